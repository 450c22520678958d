//! Spiking proportional controller, pan-tilt geometry, plant, fixational
//! walk and the closed attention loop.

use std::io::Write;
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::EventSlice;
use crate::grid::Geometry;
use crate::oms::{OmsConfig, OmsState};
use crate::proto::{saliency, ProtoConfig, ProtoInput, ProtoKernels};
use crate::scenes::{Viewport, World};
use crate::stimgen::{EventSensor, SensorModel};

/// Tuning-curve family of the controller populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeuronModel {
    #[default]
    Lif,
    /// Rate equals the input current; decoded directly, never spikes.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Neurons per axis.
    pub neurons: usize,
    pub gain_pan: f64,
    pub gain_tilt: f64,
    /// Image center in pixels.
    pub center: (f64, f64),
    /// Represented error range, pixels: errors are normalized by this.
    pub radius: f64,
    pub tau_syn: f64,
    pub tau_rc: f64,
    pub tau_ref: f64,
    pub max_rates: (f64, f64),
    pub intercepts: (f64, f64),
    /// Ridge strength as a fraction of the mean squared rate.
    pub regularization: f64,
    /// Evaluation points over `[-radius, radius]`.
    pub eval_points: usize,
    /// Spiking simulation per controller step, seconds.
    pub settle: f64,
    pub dt: f64,
    pub model: NeuronModel,
    pub seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            neurons: 50,
            gain_pan: 1.0,
            gain_tilt: 1.0,
            center: (64.0, 64.0),
            radius: 64.0,
            tau_syn: 0.005,
            tau_rc: 0.02,
            tau_ref: 0.002,
            max_rates: (100.0, 200.0),
            intercepts: (-1.0, 1.0),
            regularization: 0.1,
            eval_points: 257,
            settle: 0.2,
            dt: 0.001,
            model: NeuronModel::Lif,
            seed: 0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(Error::invalid("neurons", "need at least one neuron per axis"));
        }
        if !self.gain_pan.is_finite() || !self.gain_tilt.is_finite() {
            return Err(Error::invalid("gain", "must be finite"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius", "must be > 0"));
        }
        if !(self.tau_syn > 0.0 && self.tau_rc > 0.0 && self.tau_ref >= 0.0) {
            return Err(Error::invalid("tau", "time constants must be positive"));
        }
        if !(self.max_rates.0 > 0.0 && self.max_rates.0 <= self.max_rates.1 && self.max_rates.1 * self.tau_ref < 1.0) {
            return Err(Error::invalid("max_rates", "need 0 < lo <= hi < 1/tau_ref"));
        }
        if !(self.intercepts.0 <= self.intercepts.1 && self.intercepts.0 >= -1.0 && self.intercepts.1 <= 1.0) {
            return Err(Error::invalid("intercepts", "need -1 <= lo <= hi <= 1"));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::invalid("regularization", "must be >= 0"));
        }
        if self.eval_points < 2 {
            return Err(Error::invalid("eval_points", "need at least two"));
        }
        if !(self.dt > 0.0 && self.settle >= self.dt) {
            return Err(Error::invalid("settle", "need settle >= dt > 0"));
        }
        Ok(())
    }
}

/// Steady-state LIF rate for input current `j` (threshold 1).
pub fn lif_rate(j: f64, tau_rc: f64, tau_ref: f64) -> f64 {
    if j <= 1.0 {
        0.0
    } else {
        1.0 / (tau_ref - tau_rc * (-1.0 / j).ln_1p())
    }
}

/// One population of tuning curves over the normalized error `x ∈ [-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub encoders: Vec<f64>,
    pub gains: Vec<f64>,
    pub biases: Vec<f64>,
    pub model: NeuronModel,
    pub tau_rc: f64,
    pub tau_ref: f64,
}

impl Population {
    /// Random encoders `±1`, intercepts and max rates drawn from the config ranges.
    pub fn generate(config: &ControllerConfig, rng: &mut ChaCha8Rng) -> Self {
        let n = config.neurons;
        let mut p = Population {
            encoders: Vec::with_capacity(n),
            gains: Vec::with_capacity(n),
            biases: Vec::with_capacity(n),
            model: config.model,
            tau_rc: config.tau_rc,
            tau_ref: config.tau_ref,
        };
        for _ in 0..n {
            let e = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let intercept = sample(rng, config.intercepts).min(0.999);
            let max_rate = sample(rng, config.max_rates);
            let (gain, bias) = match config.model {
                NeuronModel::Lif => {
                    let j_max = 1.0 / -((config.tau_ref - 1.0 / max_rate) / config.tau_rc).exp_m1();
                    let gain = (j_max - 1.0) / (1.0 - intercept);
                    (gain, 1.0 - gain * intercept)
                }
                NeuronModel::Linear => {
                    let gain = max_rate / (1.0 - intercept);
                    (gain, -gain * intercept)
                }
            };
            p.encoders.push(e);
            p.gains.push(gain);
            p.biases.push(bias);
        }
        p
    }

    /// A single neuron with explicit parameters.
    pub fn single(model: NeuronModel, encoder: f64, gain: f64, bias: f64, config: &ControllerConfig) -> Self {
        Population {
            encoders: vec![encoder],
            gains: vec![gain],
            biases: vec![bias],
            model,
            tau_rc: config.tau_rc,
            tau_ref: config.tau_ref,
        }
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn current(&self, i: usize, x: f64) -> f64 {
        self.gains[i] * self.encoders[i] * x + self.biases[i]
    }

    /// Steady-state rates at normalized input `x`.
    pub fn rates(&self, x: f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let j = self.current(i, x);
                match self.model {
                    NeuronModel::Lif => lif_rate(j, self.tau_rc, self.tau_ref),
                    NeuronModel::Linear => j,
                }
            })
            .collect()
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Decoders for one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisDecoder {
    pub population: Population,
    pub gain: f64,
    pub weights: Vec<f64>,
    /// RMS of `K ε − w·a(ε)` over the evaluation grid, pixels.
    pub rmse: f64,
    /// Largest absolute residual over the grid, pixels.
    pub max_error: f64,
}

impl AxisDecoder {
    /// Rate-based decoded output for error `eps` pixels.
    pub fn decode(&self, eps: f64, radius: f64) -> f64 {
        self.population.rates(eps / radius).iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedController {
    pub config: ControllerConfig,
    pub pan: AxisDecoder,
    pub tilt: AxisDecoder,
}

impl DecodedController {
    /// Represented command range, pixels (`2 · radius`).
    pub fn range(&self) -> f64 {
        2.0 * self.config.radius
    }
}

/// Evaluation grid over `[-radius, radius]`.
pub fn eval_grid(config: &ControllerConfig) -> Vec<f64> {
    let n = config.eval_points;
    (0..n).map(|i| -config.radius + 2.0 * config.radius * i as f64 / (n - 1) as f64).collect()
}

/// Ridge least squares `min ‖K ε − A w‖² / n + λ ‖w‖²` with
/// `λ = regularization · mean(a²)`.
pub fn solve_axis(config: &ControllerConfig, population: Population, gain: f64) -> Result<AxisDecoder> {
    let eps = eval_grid(config);
    let n = eps.len();
    let d = population.len();
    let a = DMatrix::from_fn(n, d, |r, c| population.rates(eps[r] / config.radius)[c]);
    let mean_sq = a.iter().map(|v| v * v).sum::<f64>() / (n * d) as f64;
    if mean_sq == 0.0 {
        return Err(Error::Config("every tuning curve is silent over the error range".into()));
    }
    let y = DVector::from_iterator(n, eps.iter().map(|e| gain * e));
    let lambda = config.regularization * mean_sq;
    let gram = a.transpose() * &a / n as f64 + DMatrix::identity(d, d) * lambda;
    let rhs = a.transpose() * &y / n as f64;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Config(format!("decoder solve failed: {e}")))?,
    };
    let resid = &y - &a * &w;
    let rmse = (resid.norm_squared() / n as f64).sqrt();
    let max_error = resid.amax();
    Ok(AxisDecoder {
        population,
        gain,
        weights: w.iter().copied().collect(),
        rmse,
        max_error,
    })
}

/// Builds both axis populations from the seed and solves their decoders.
pub fn solve_decoders(config: &ControllerConfig) -> Result<DecodedController> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pan_pop = Population::generate(config, &mut rng);
    let tilt_pop = Population::generate(config, &mut rng);
    Ok(DecodedController {
        pan: solve_axis(config, pan_pop, config.gain_pan)?,
        tilt: solve_axis(config, tilt_pop, config.gain_tilt)?,
        config: config.clone(),
    })
}

/// Spiking state of one population: membrane, refractory clock, filtered spikes.
#[derive(Debug, Clone, PartialEq)]
struct AxisState {
    v: Vec<f64>,
    refractory: Vec<f64>,
    filtered: Vec<f64>,
}

impl AxisState {
    fn new(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            refractory: vec![0.0; n],
            filtered: vec![0.0; n],
        }
    }
}

/// Membranes and synapses of both populations, carried across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pan: AxisState,
    tilt: AxisState,
}

impl ControllerState {
    pub fn new(controller: &DecodedController) -> Self {
        Self {
            pan: AxisState::new(controller.pan.population.len()),
            tilt: AxisState::new(controller.tilt.population.len()),
        }
    }
}

/// Runs one axis for `steps` of `dt`, returning the decoded output averaged
/// over the second half.
fn run_axis(axis: &AxisDecoder, state: &mut AxisState, x: f64, steps: usize, dt: f64, tau_syn: f64) -> f64 {
    let p = &axis.population;
    if p.model == NeuronModel::Linear {
        return axis.decode(x, 1.0);
    }
    let decay = (-dt / tau_syn).exp();
    let mut acc = 0.0;
    let mut count = 0;
    for k in 0..steps {
        for i in 0..p.len() {
            let j = p.current(i, x);
            let active = (dt - state.refractory[i]).clamp(0.0, dt);
            state.v[i] += (j - state.v[i]) * -(-active / p.tau_rc).exp_m1();
            let mut spike = 0.0;
            if state.v[i] > 1.0 {
                // Time since the threshold crossing inside this step.
                let overshoot = p.tau_rc * ((state.v[i] - 1.0) / (j - 1.0)).ln_1p();
                state.v[i] = 0.0;
                state.refractory[i] = p.tau_ref + dt - overshoot.min(dt);
                spike = 1.0 / dt;
            }
            state.v[i] = state.v[i].max(0.0);
            state.refractory[i] = (state.refractory[i] - dt).max(0.0);
            state.filtered[i] = state.filtered[i] * decay + (1.0 - decay) * spike;
        }
        if 2 * k >= steps {
            acc += state.filtered.iter().zip(&axis.weights).map(|(f, w)| f * w).sum::<f64>();
            count += 1;
        }
    }
    acc / count as f64
}

/// Injects the pixel errors of `p` into the populations, simulates them for
/// the settle interval and returns `(cmd_pan, cmd_tilt)` in pixels.
pub fn controller_step(controller: &DecodedController, p: (f64, f64), state: &mut ControllerState) -> (f64, f64) {
    let c = &controller.config;
    let steps = (c.settle / c.dt).round().max(1.0) as usize;
    let ex = ((p.0 - c.center.0) / c.radius).clamp(-1.0, 1.0);
    let ey = ((p.1 - c.center.1) / c.radius).clamp(-1.0, 1.0);
    (
        run_axis(&controller.pan, &mut state.pan, ex, steps, c.dt, c.tau_syn),
        run_axis(&controller.tilt, &mut state.tilt, ey, steps, c.dt, c.tau_syn),
    )
}

/// Pan-tilt unit and camera geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PanTiltModel {
    pub degrees_per_pos: f64,
    /// Millimetres.
    pub focal_length: f64,
    /// Millimetres.
    pub sensor_width: f64,
    /// Pixels across the sensor.
    pub resolution: usize,
    /// Plant ticks needed to reach a commanded position (1 = ideal).
    pub settle_steps: usize,
    /// Standard deviation of additive tilt error per command, positions.
    pub backlash_sigma: f64,
}

impl Default for PanTiltModel {
    fn default() -> Self {
        Self {
            degrees_per_pos: 92.5714 / 3600.0,
            focal_length: 1.7,
            sensor_width: 5.12,
            resolution: 128,
            settle_steps: 1,
            backlash_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranges {
    pub fov_deg: f64,
    pub pan_limit: i64,
    pub tilt_limit: i64,
}

impl Ranges {
    pub fn pixels_per_degree(&self, resolution: usize) -> f64 {
        resolution as f64 / self.fov_deg
    }
}

/// Field of view and symmetric position limits.
pub fn compute_ranges(model: &PanTiltModel) -> Result<Ranges> {
    if !(model.focal_length > 0.0) || !(model.sensor_width >= 0.0) || !(model.degrees_per_pos > 0.0) {
        return Err(Error::invalid("pan_tilt", "focal length and step size must be > 0"));
    }
    let fov_deg = 2.0 * (model.sensor_width / (2.0 * model.focal_length)).atan().to_degrees();
    let limit = (fov_deg / model.degrees_per_pos).floor() as i64 / 2;
    Ok(Ranges {
        fov_deg,
        pan_limit: limit,
        tilt_limit: limit,
    })
}

/// Quantizes a pixel command into PTU positions, flooring toward −∞.
pub fn to_ptu_units(cmd: f64, alpha_cmd: f64, degrees_per_pos: f64, pixels_per_degree: f64) -> i64 {
    ((cmd / pixels_per_degree) / (2.0 * alpha_cmd * degrees_per_pos)).floor() as i64
}

/// Gaze in PTU positions with its command history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GazeState {
    pub pan: i64,
    pub tilt: i64,
    /// `(t_us, pan, tilt)` of every accepted command.
    pub history: Vec<(u64, i64, i64)>,
}

impl GazeState {
    pub fn degrees(&self, model: &PanTiltModel) -> (f64, f64) {
        (self.pan as f64 * model.degrees_per_pos, self.tilt as f64 * model.degrees_per_pos)
    }
}

/// Simulated PTU: ideal integrator with optional lag and tilt backlash.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: PanTiltModel,
    pub ranges: Ranges,
    pub gaze: GazeState,
    target: (i64, i64),
    start: (i64, i64),
    progress: usize,
    rng: ChaCha8Rng,
    /// Commands that hit a limit.
    pub saturations: usize,
}

impl Plant {
    pub fn new(model: PanTiltModel, seed: u64) -> Result<Self> {
        let ranges = compute_ranges(&model)?;
        Ok(Self {
            model,
            ranges,
            gaze: GazeState::default(),
            target: (0, 0),
            start: (0, 0),
            progress: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            saturations: 0,
        })
    }

    fn clip(&mut self, pan: i64, tilt: i64) -> (i64, i64) {
        let (pl, tl) = (self.ranges.pan_limit, self.ranges.tilt_limit);
        let c = (pan.clamp(-pl, pl), tilt.clamp(-tl, tl));
        if c != (pan, tilt) {
            self.saturations += 1;
        }
        c
    }

    /// Sets a new absolute target; the plant gets there over `settle_steps` ticks.
    pub fn command(&mut self, pan: i64, tilt: i64, t_us: u64) {
        let mut tilt = tilt;
        if self.model.backlash_sigma > 0.0 {
            let n = Normal::new(0.0, self.model.backlash_sigma).expect("sigma checked positive");
            tilt += n.sample(&mut self.rng).round() as i64;
        }
        self.target = self.clip(pan, tilt);
        self.start = (self.gaze.pan, self.gaze.tilt);
        self.progress = 0;
        self.gaze.history.push((t_us, self.target.0, self.target.1));
    }

    /// Moves the gaze one tick toward the target.
    pub fn tick(&mut self) {
        let n = self.model.settle_steps.max(1);
        if self.settled() {
            return;
        }
        self.progress = (self.progress + 1).min(n);
        let f = self.progress as f64 / n as f64;
        let lerp = |a: i64, b: i64| a + ((b - a) as f64 * f).round() as i64;
        self.gaze.pan = lerp(self.start.0, self.target.0);
        self.gaze.tilt = lerp(self.start.1, self.target.1);
    }

    pub fn settled(&self) -> bool {
        (self.gaze.pan, self.gaze.tilt) == self.target
    }

    /// Gaze offset in sensor pixels.
    pub fn offset_pixels(&self) -> (f64, f64) {
        let ppd = self.ranges.pixels_per_degree(self.model.resolution);
        let (p, t) = self.gaze.degrees(&self.model);
        (p * ppd, t * ppd)
    }
}

/// `n` relative micro-commands, each uniform in `[-step_scale, step_scale]`
/// positions per axis, shrunk where needed so the walk from `state` stays
/// inside the limits.
pub fn fixational_walk(state: &GazeState, n: usize, step_scale: i64, ranges: &Ranges, rng: &mut ChaCha8Rng) -> Vec<(i64, i64)> {
    let (mut pan, mut tilt) = (state.pan, state.tilt);
    let mut out = Vec::with_capacity(n);
    let s = step_scale.abs();
    for _ in 0..n {
        let dp = if s > 0 { rng.random_range(-s..=s) } else { 0 };
        let dt = if s > 0 { rng.random_range(-s..=s) } else { 0 };
        let np = (pan + dp).clamp(-ranges.pan_limit, ranges.pan_limit);
        let nt = (tilt + dt).clamp(-ranges.tilt_limit, ranges.tilt_limit);
        out.push((np - pan, nt - tilt));
        pan = np;
        tilt = nt;
    }
    out
}

#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    pub world: World,
    pub geometry: Geometry,
    /// World point at the image center when pan = tilt = 0.
    pub home: (f64, f64),
    pub iterations: usize,
    /// Fixation (accumulation) window per iteration.
    pub window_us: u64,
    pub frame_us: u64,
    pub step_scale: i64,
    pub alpha_cmd: f64,
    /// Feed the OMS mask to the proto stage instead of the raw slice.
    pub use_oms: bool,
    pub sensor: SensorModel,
    pub oms: OmsConfig,
    pub proto: ProtoConfig,
    pub controller: ControllerConfig,
    pub ptu: PanTiltModel,
    pub seed: u64,
}

impl ClosedLoopConfig {
    pub fn new(world: World) -> Self {
        let home = (world.width / 2.0, world.height / 2.0);
        Self {
            world,
            geometry: Geometry::new(128, 128),
            home,
            iterations: 10,
            window_us: 20_000,
            frame_us: 1000,
            step_scale: 5,
            alpha_cmd: 1.0,
            use_oms: true,
            sensor: SensorModel::noiseless(),
            oms: OmsConfig::default(),
            proto: ProtoConfig::default(),
            controller: ControllerConfig::default(),
            ptu: PanTiltModel::default(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.frame_us == 0 || self.window_us < self.frame_us {
            return Err(Error::invalid("window_us", "need window_us >= frame_us > 0"));
        }
        if !(self.alpha_cmd > 0.0) {
            return Err(Error::invalid("alpha_cmd", "must be > 0"));
        }
        self.sensor.validate()?;
        self.oms.validate()?;
        self.proto.validate()?;
        self.controller.validate()
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub t_us: u64,
    #[serde(rename = "P_x")]
    pub p_x: usize,
    #[serde(rename = "P_y")]
    pub p_y: usize,
    pub saliency_max: f64,
    pub cmd_pan: f64,
    pub cmd_tilt: f64,
    pub u_pan: i64,
    pub u_tilt: i64,
    pub pan_pos: i64,
    pub tilt_pos: i64,
    pub accumulate_us: u64,
    pub oms_us: u64,
    pub proto_us: u64,
    pub control_us: u64,
    pub saccade_us: u64,
}

impl TrajectoryRow {
    /// OMS + proto + argmax latency of this iteration.
    pub fn attention_us(&self) -> u64 {
        self.oms_us + self.proto_us
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopLog {
    pub rows: Vec<TrajectoryRow>,
    /// Iterations after which a saccade was executed.
    pub saccades: Vec<usize>,
    pub saturations: usize,
    /// Final gaze.
    pub gaze: GazeState,
}

impl ClosedLoopLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where world point `world` appears on the sensor when the PTU sits at `(pan, tilt)`.
pub fn sensor_position(config: &ClosedLoopConfig, ranges: &Ranges, pan: i64, tilt: i64, world: (f64, f64)) -> (f64, f64) {
    let ppd = ranges.pixels_per_degree(config.ptu.resolution);
    let k = config.ptu.degrees_per_pos * ppd;
    let v = Viewport::centered_on(config.geometry, config.home.0 + pan as f64 * k, config.home.1 + tilt as f64 * k);
    v.to_sensor(world.0, world.1)
}

fn viewport(config: &ClosedLoopConfig, plant: &Plant) -> Viewport {
    let (dx, dy) = plant.offset_pixels();
    Viewport::centered_on(config.geometry, config.home.0 + dx, config.home.1 + dy)
}

enum Request {
    /// Accumulate one window while applying one walk step per frame.
    Fixate(Vec<(i64, i64)>),
    /// Blocking move to an absolute position.
    Saccade(i64, i64),
}

enum Reply {
    Slice { slice: EventSlice, gaze: GazeState, elapsed_us: u64 },
    Settled { gaze: GazeState },
}

struct Producer {
    config: ClosedLoopConfig,
    plant: Plant,
    sensor: EventSensor,
    t_us: u64,
}

impl Producer {
    fn new(config: ClosedLoopConfig, plant: Plant) -> Result<Self> {
        let view = viewport(&config, &plant);
        let sensor = EventSensor::new(config.sensor, &view.render(&config.world, 0.0), 0.0)?;
        Ok(Self {
            config,
            plant,
            sensor,
            t_us: 0,
        })
    }

    /// Renders the next frame and returns its events.
    fn frame(&mut self) -> Result<Vec<crate::events::Event>> {
        self.t_us += self.config.frame_us;
        let view = viewport(&self.config, &self.plant);
        let img = view.render(&self.config.world, self.t_us as f64 * 1e-6);
        self.sensor.push_frame(&img, self.t_us as f64)
    }

    fn fixate(&mut self, walk: &[(i64, i64)]) -> Result<EventSlice> {
        let frames = (self.config.window_us / self.config.frame_us) as usize;
        let mut slice = EventSlice::empty(self.config.geometry, self.t_us, self.t_us + self.config.window_us);
        for k in 0..frames {
            if let Some(&(dp, dt)) = walk.get(k) {
                if dp != 0 || dt != 0 {
                    let (p, t) = (self.plant.gaze.pan + dp, self.plant.gaze.tilt + dt);
                    self.plant.command(p, t, self.t_us);
                }
            }
            self.plant.tick();
            for e in self.frame()? {
                slice.add(&e);
            }
        }
        Ok(slice)
    }

    /// Moves until settled; frames rendered meanwhile keep the sensor's
    /// reference current but their events are discarded.
    fn saccade(&mut self, pan: i64, tilt: i64) -> Result<()> {
        self.plant.command(pan, tilt, self.t_us);
        while !self.plant.settled() {
            self.plant.tick();
            self.frame()?;
        }
        self.frame()?;
        Ok(())
    }

    fn serve(mut self, requests: mpsc::Receiver<Request>, replies: mpsc::SyncSender<Result<Reply>>) -> Plant {
        for req in requests {
            let start = Instant::now();
            let reply = match req {
                Request::Fixate(walk) => self.fixate(&walk).map(|slice| Reply::Slice {
                    slice,
                    gaze: self.plant.gaze.clone(),
                    elapsed_us: start.elapsed().as_micros() as u64,
                }),
                Request::Saccade(p, t) => self.saccade(p, t).map(|()| Reply::Settled {
                    gaze: self.plant.gaze.clone(),
                }),
            };
            if replies.send(reply).is_err() {
                break;
            }
        }
        self.plant
    }
}

/// Runs the attention loop: fixate and accumulate, OMS, saliency, spiking
/// controller, blocking saccade. The sensor/plant side runs on its own
/// thread and hands slices over a bounded queue.
pub fn closed_loop(config: &ClosedLoopConfig) -> Result<ClosedLoopLog> {
    config.validate()?;
    let controller = solve_decoders(&config.controller)?;
    let mut cstate = ControllerState::new(&controller);
    let kernels = ProtoKernels::new(&config.proto)?;
    let mut oms = OmsState::new(config.oms, config.geometry)?;
    let plant = Plant::new(config.ptu.clone(), config.seed ^ 0xB4C1)?;
    let ranges = plant.ranges;
    let ppd = ranges.pixels_per_degree(config.ptu.resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let frames = (config.window_us / config.frame_us) as usize;

    let producer = Producer::new(config.clone(), plant)?;
    let (req_tx, req_rx) = mpsc::channel::<Request>();
    let (rep_tx, rep_rx) = mpsc::sync_channel::<Result<Reply>>(1);
    let handle = thread::spawn(move || producer.serve(req_rx, rep_tx));

    let mut gaze = GazeState::default();
    let mut log = ClosedLoopLog {
        rows: Vec::with_capacity(config.iterations),
        saccades: Vec::new(),
        saturations: 0,
        gaze: GazeState::default(),
    };
    let hung_up = || Error::Config("sensor task stopped".into());
    let result = (|| -> Result<()> {
        for iteration in 0..config.iterations {
            let walk = fixational_walk(&gaze, frames, config.step_scale, &ranges, &mut rng);
            req_tx.send(Request::Fixate(walk)).map_err(|_| hung_up())?;
            let Reply::Slice { slice, gaze: g, elapsed_us } = rep_rx.recv().map_err(|_| hung_up())?? else {
                return Err(hung_up());
            };
            gaze = g;

            let t0 = Instant::now();
            let input = if config.use_oms {
                let m = oms.step(&slice)?;
                ProtoInput::from_slice(&m.to_slice(&slice)?)
            } else {
                ProtoInput::from_slice(&slice)
            };
            let t1 = Instant::now();
            let sal = saliency(&config.proto, &kernels, &input)?;
            let t2 = Instant::now();

            let (mut cmd, mut u) = ((0.0, 0.0), (0, 0));
            if sal.max_value > 0.0 {
                cmd = controller_step(&controller, (sal.peak.0 as f64, sal.peak.1 as f64), &mut cstate);
                u = (
                    to_ptu_units(cmd.0, config.alpha_cmd, config.ptu.degrees_per_pos, ppd),
                    to_ptu_units(cmd.1, config.alpha_cmd, config.ptu.degrees_per_pos, ppd),
                );
            }
            let t3 = Instant::now();
            if u != (0, 0) {
                req_tx.send(Request::Saccade(gaze.pan + u.0, gaze.tilt + u.1)).map_err(|_| hung_up())?;
                let Reply::Settled { gaze: g } = rep_rx.recv().map_err(|_| hung_up())?? else {
                    return Err(hung_up());
                };
                gaze = g;
                log.saccades.push(iteration);
            }
            let t4 = Instant::now();
            let us = |a: Instant, b: Instant| (b - a).as_micros() as u64;
            log.rows.push(TrajectoryRow {
                iteration,
                t_us: slice.window_end,
                p_x: sal.peak.0,
                p_y: sal.peak.1,
                saliency_max: sal.max_value,
                cmd_pan: cmd.0,
                cmd_tilt: cmd.1,
                u_pan: u.0,
                u_tilt: u.1,
                pan_pos: gaze.pan,
                tilt_pos: gaze.tilt,
                accumulate_us: elapsed_us,
                oms_us: us(t0, t1),
                proto_us: us(t1, t2),
                control_us: us(t2, t3),
                saccade_us: us(t3, t4),
            });
        }
        Ok(())
    })();
    drop(req_tx);
    let plant = handle.join().map_err(|_| Error::Config("sensor task panicked".into()))?;
    result?;
    log.saturations = plant.saturations;
    log.gaze = plant.gaze;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lif_rate_curve() {
        assert_eq!(lif_rate(1.0, 0.02, 0.002), 0.0);
        assert_eq!(lif_rate(0.3, 0.02, 0.002), 0.0);
        let r = lif_rate(2.0, 0.02, 0.002);
        assert!((r - 1.0 / (0.002 + 0.02 * 2f64.ln())).abs() < 1e-9);
        assert!(lif_rate(1e6, 0.02, 0.002) < 500.0);
    }

    #[test]
    fn generated_tuning_hits_intercept_and_max_rate() {
        let cfg = ControllerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Population::generate(&cfg, &mut rng);
        for i in 0..p.len() {
            let e = p.encoders[i];
            let peak = lif_rate(p.current(i, e), cfg.tau_rc, cfg.tau_ref);
            assert!((cfg.max_rates.0 - 1e-6..=cfg.max_rates.1 + 1e-6).contains(&peak), "{peak}");
            let x0 = (1.0 - p.biases[i]) / (p.gains[i] * e);
            assert!((-1.0..=1.0).contains(&x0));
        }
    }

    #[test]
    fn zero_gain_gives_zero_decoders() {
        let cfg = ControllerConfig {
            gain_pan: 0.0,
            gain_tilt: 0.0,
            ..ControllerConfig::default()
        };
        let c = solve_decoders(&cfg).unwrap();
        assert!(c.pan.weights.iter().chain(&c.tilt.weights).all(|w| *w == 0.0));
    }

    #[test]
    fn silent_population_is_a_config_error() {
        let cfg = ControllerConfig {
            neurons: 1,
            ..ControllerConfig::default()
        };
        let silent = Population::single(NeuronModel::Lif, 1.0, 0.1, 0.0, &cfg);
        assert!(matches!(solve_axis(&cfg, silent, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn ptu_quantization() {
        assert_eq!(to_ptu_units(0.0, 1.0, 0.02572, 1.0), 0);
        assert_eq!(to_ptu_units(100.0, 1.0, 0.02572, 1.0), 1944);
        assert_eq!(to_ptu_units(-100.0, 1.0, 0.02572, 1.0), -1945);
        for c in [0.5, 3.0, 17.25, 63.0] {
            let (a, b) = (to_ptu_units(c, 1.0, 0.02572, 1.134), to_ptu_units(-c, 1.0, 0.02572, 1.134));
            assert!(b == -a || b == -a - 1);
        }
    }

    #[test]
    fn ranges() {
        let m = PanTiltModel::default();
        let r = compute_ranges(&m).unwrap();
        let fov = 2.0 * (5.12f64 / 3.4).atan().to_degrees();
        assert!((r.fov_deg - fov).abs() < 1e-12);
        assert!((r.fov_deg - 112.9).abs() < 0.1);
        assert_eq!(r.pan_limit, (fov / m.degrees_per_pos).floor() as i64 / 2);
        assert_eq!(r.pan_limit, r.tilt_limit);
        let zero = compute_ranges(&PanTiltModel { sensor_width: 0.0, ..m.clone() }).unwrap();
        assert_eq!((zero.fov_deg, zero.pan_limit), (0.0, 0));
        let coarse = compute_ranges(&PanTiltModel {
            degrees_per_pos: 2.0 * m.degrees_per_pos,
            ..m
        })
        .unwrap();
        assert!((coarse.pan_limit - r.pan_limit / 2).abs() <= 1);
    }

    #[test]
    fn walk_zero_scale_and_limits() {
        let m = PanTiltModel::default();
        let r = compute_ranges(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GazeState::default();
        assert!(fixational_walk(&g, 20, 0, &r, &mut rng).iter().all(|d| *d == (0, 0)));
        let edge = GazeState {
            pan: r.pan_limit,
            tilt: -r.tilt_limit,
            history: vec![],
        };
        let (mut p, mut t) = (edge.pan, edge.tilt);
        for (dp, dt) in fixational_walk(&edge, 500, 50, &r, &mut rng) {
            p += dp;
            t += dt;
            assert!(p.abs() <= r.pan_limit && t.abs() <= r.tilt_limit);
        }
    }

    #[test]
    fn plant_lag_reaches_target() {
        let mut p = Plant::new(
            PanTiltModel {
                settle_steps: 4,
                ..PanTiltModel::default()
            },
            0,
        )
        .unwrap();
        p.command(100, -40, 0);
        let mut ticks = 0;
        while !p.settled() {
            p.tick();
            ticks += 1;
        }
        assert_eq!(ticks, 4);
        assert_eq!((p.gaze.pan, p.gaze.tilt), (100, -40));
        p.command(1_000_000, 0, 1);
        assert_eq!(p.saturations, 1);
    }
}
