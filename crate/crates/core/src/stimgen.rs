//! Moving-grating stimuli and a threshold-crossing event sensor.
//!
//! The sensor keeps a per-pixel reference log intensity and emits one event
//! per contrast threshold crossed between consecutive frames, with the
//! crossing time interpolated linearly inside the frame interval. Latency,
//! jitter and photoreceptor filtering are not modeled.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::FlatConfig;
use crate::error::{Error, Result};
use crate::events::{Event, Polarity};
use crate::grid::{Geometry, Grid};

/// Intensities are floored here before taking the log.
pub const INTENSITY_FLOOR: f64 = 1e-6;

/// Which layers of the stimulus move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusMode {
    EyeOnly,
    ObjectOnly,
    EyeAndObject,
}

impl fmt::Display for StimulusMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StimulusMode::EyeOnly => "eye_only",
            StimulusMode::ObjectOnly => "object_only",
            StimulusMode::EyeAndObject => "eye_and_object",
        })
    }
}

impl FromStr for StimulusMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "eye_only" | "eyeonly" => Ok(StimulusMode::EyeOnly),
            "object_only" | "objectonly" => Ok(StimulusMode::ObjectOnly),
            "eye_and_object" | "eye_object" | "eyeandobject" => Ok(StimulusMode::EyeAndObject),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// A vertical sinusoidal grating drifting along x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grating {
    /// Cycles per image width.
    pub spatial_frequency: f64,
    /// Cycles per frame.
    pub speed: f64,
}

impl Grating {
    pub const fn new(spatial_frequency: f64, speed: f64) -> Self {
        Self {
            spatial_frequency,
            speed,
        }
    }

    fn intensity(&self, x: f64, width: f64, frame: f64) -> f64 {
        0.5 + 0.5 * (2.0 * PI * (self.spatial_frequency * x / width - self.speed * frame)).sin()
    }
}

/// Background grating with a centered foreground disk carrying its own grating.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingScenario {
    pub geometry: Geometry,
    pub background: Grating,
    pub foreground: Grating,
    /// Foreground disk radius in pixels.
    pub disk_radius: f64,
    pub mode: StimulusMode,
    pub frame_rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl GratingScenario {
    /// 128x128, 60 fps, 4 s, disk radius a quarter of the width.
    pub fn new(mode: StimulusMode, background: Grating, foreground: Grating) -> Self {
        let geometry = Geometry::new(128, 128);
        Self {
            geometry,
            background,
            foreground,
            disk_radius: geometry.width as f64 / 4.0,
            mode,
            frame_rate: 60.0,
            duration: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.is_empty() {
            return Err(Error::invalid("geometry", "image must be non-empty"));
        }
        for (name, g) in [("background", self.background), ("foreground", self.foreground)] {
            if !(g.spatial_frequency > 0.0) {
                return Err(Error::invalid("spatial_frequency", format!("{name} sf must be > 0")));
            }
            if !(g.speed >= 0.0) {
                return Err(Error::invalid("speed", format!("{name} speed must be >= 0")));
            }
        }
        if !(self.frame_rate > 0.0) || !(self.duration > 0.0) {
            return Err(Error::invalid("frame_rate", "frame rate and duration must be > 0"));
        }
        if !(self.disk_radius >= 0.0) {
            return Err(Error::invalid("disk_radius", "must be >= 0"));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn disk_center(&self) -> (f64, f64) {
        (
            (self.geometry.width as f64 - 1.0) / 2.0,
            (self.geometry.height as f64 - 1.0) / 2.0,
        )
    }

    pub fn in_disk(&self, x: usize, y: usize) -> bool {
        let (cx, cy) = self.disk_center();
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= self.disk_radius * self.disk_radius
    }

    /// Speeds after applying the mode: `(background, foreground)`.
    pub fn effective_speeds(&self) -> (f64, f64) {
        match self.mode {
            StimulusMode::EyeOnly => (self.background.speed, 0.0),
            StimulusMode::ObjectOnly => (0.0, self.foreground.speed),
            StimulusMode::EyeAndObject => (self.background.speed, self.foreground.speed),
        }
    }

    /// Reads a scenario from flat config keys, starting from the defaults of
    /// [`GratingScenario::new`]. Consumed keys are removed from `cfg`.
    pub fn from_config(cfg: &mut FlatConfig) -> Result<Self> {
        let mode = cfg.take_or("mode", StimulusMode::EyeAndObject)?;
        let width = cfg.take_or("width", 128usize)?;
        let height = cfg.take_or("height", 128usize)?;
        let bg = Grating::new(cfg.take_or("background_sf", 0.3)?, cfg.take_or("background_speed", 0.01)?);
        let fg = Grating::new(cfg.take_or("foreground_sf", 3.0)?, cfg.take_or("foreground_speed", 0.09)?);
        let mut s = GratingScenario::new(mode, bg, fg);
        s.geometry = Geometry::new(width, height);
        s.disk_radius = cfg.take_or("disk_radius", width as f64 / 4.0)?;
        s.frame_rate = cfg.take_or("frame_rate", 60.0)?;
        s.duration = cfg.take_or("duration", 4.0)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_config(&self) -> FlatConfig {
        let mut c = FlatConfig::default();
        c.set("mode", self.mode);
        c.set("width", self.geometry.width);
        c.set("height", self.geometry.height);
        c.set("background_sf", self.background.spatial_frequency);
        c.set("background_speed", self.background.speed);
        c.set("foreground_sf", self.foreground.spatial_frequency);
        c.set("foreground_speed", self.foreground.speed);
        c.set("disk_radius", self.disk_radius);
        c.set("frame_rate", self.frame_rate);
        c.set("duration", self.duration);
        c
    }
}

/// Renders frame `frame_index` of the scenario as intensities in `[0, 1]`.
pub fn render_frame(scenario: &GratingScenario, frame_index: usize) -> Grid<f64> {
    let (sb, sf) = scenario.effective_speeds();
    let bg = Grating::new(scenario.background.spatial_frequency, sb);
    let fg = Grating::new(scenario.foreground.spatial_frequency, sf);
    let w = scenario.geometry.width as f64;
    let k = frame_index as f64;
    Grid::from_fn(scenario.geometry, |x, y| {
        let layer = if scenario.in_disk(x, y) { fg } else { bg };
        layer.intensity(x as f64, w, k)
    })
}

/// Renders every frame of the scenario.
pub fn render_all(scenario: &GratingScenario) -> Vec<Grid<f64>> {
    (0..scenario.frame_count()).map(|k| render_frame(scenario, k)).collect()
}

/// Parameters of the threshold-crossing sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Log-intensity step per event.
    pub threshold: f64,
    /// Microseconds a pixel stays silent after emitting.
    pub refractory_us: f64,
    /// Spurious events per pixel per second.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            refractory_us: 100.0,
            noise_rate: 0.01,
            seed: 0,
        }
    }
}

impl SensorModel {
    pub fn noiseless() -> Self {
        Self {
            noise_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("threshold", "must be > 0"));
        }
        if !(self.refractory_us >= 0.0) {
            return Err(Error::invalid("refractory", "must be >= 0"));
        }
        if !(self.noise_rate >= 0.0) {
            return Err(Error::invalid("noise_rate", "must be >= 0"));
        }
        Ok(())
    }
}

fn log_intensity(i: f64) -> f64 {
    i.max(INTENSITY_FLOOR).ln()
}

/// Incremental sensor: feed frames one at a time with their timestamps.
#[derive(Debug, Clone)]
pub struct EventSensor {
    model: SensorModel,
    geometry: Geometry,
    reference: Vec<f64>,
    last_level: Vec<f64>,
    last_event: Vec<f64>,
    last_t: f64,
    rng: ChaCha8Rng,
}

impl EventSensor {
    /// Initializes the reference levels from `first` taken at `t_us`.
    pub fn new(model: SensorModel, first: &Grid<f64>, t_us: f64) -> Result<Self> {
        model.validate()?;
        let levels: Vec<f64> = first.iter().map(|v| log_intensity(*v)).collect();
        Ok(Self {
            model,
            geometry: first.geometry(),
            reference: levels.clone(),
            last_level: levels,
            last_event: vec![f64::NEG_INFINITY; first.geometry().len()],
            last_t: t_us,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Emits the events between the previous frame and `frame` at `t_us`,
    /// sorted by time.
    pub fn push_frame(&mut self, frame: &Grid<f64>, t_us: f64) -> Result<Vec<Event>> {
        self.geometry.ensure_same(frame.geometry())?;
        if !(t_us > self.last_t) {
            return Err(Error::NonMonotonicTimestamp {
                prev: self.last_t as u64,
                next: t_us as u64,
            });
        }
        let (t0, dt) = (self.last_t, t_us - self.last_t);
        let th = self.model.threshold;
        let tol = 1e-9;
        let w = self.geometry.width;
        let mut out = Vec::new();
        for (idx, value) in frame.iter().enumerate() {
            let (start, end) = (self.last_level[idx], log_intensity(*value));
            let delta = end - start;
            let reference = &mut self.reference[idx];
            let mut emit = |level: f64, polarity: Polarity, last: &mut f64| {
                let frac = if delta != 0.0 { ((level - start) / delta).clamp(0.0, 1.0) } else { 1.0 };
                let t = t0 + frac * dt;
                if t - *last >= self.model.refractory_us {
                    *last = t;
                    out.push(Event::new(t.round() as u64, (idx % w) as u16, (idx / w) as u16, polarity));
                }
            };
            let last = &mut self.last_event[idx];
            while end - *reference >= th - tol {
                *reference += th;
                emit(*reference, Polarity::On, last);
            }
            while *reference - end >= th - tol {
                *reference -= th;
                emit(*reference, Polarity::Off, last);
            }
            self.last_level[idx] = end;
        }
        if self.model.noise_rate > 0.0 {
            let expected = self.model.noise_rate * self.geometry.len() as f64 * dt * 1e-6;
            let n = Poisson::new(expected)
                .map(|p| p.sample(&mut self.rng) as usize)
                .unwrap_or(0);
            for _ in 0..n {
                let idx = self.rng.random_range(0..self.geometry.len());
                let t = t0 + self.rng.random::<f64>() * dt;
                let polarity = if self.rng.random::<bool>() { Polarity::On } else { Polarity::Off };
                out.push(Event::new(t.round() as u64, (idx % w) as u16, (idx / w) as u16, polarity));
            }
        }
        out.sort_unstable_by_key(|e| (e.t, e.y, e.x, e.polarity));
        self.last_t = t_us;
        Ok(out)
    }
}

/// Timestamp of frame `k` in microseconds.
pub fn frame_time_us(k: usize, frame_rate: f64) -> f64 {
    k as f64 * 1e6 / frame_rate
}

/// Converts a frame sequence into a time-sorted event stream.
pub fn simulate_events(frames: &[Grid<f64>], model: &SensorModel, frame_rate: f64) -> Result<Vec<Event>> {
    if frames.len() < 2 {
        return Err(Error::invalid("frames", "need at least two frames"));
    }
    if !(frame_rate > 0.0) {
        return Err(Error::invalid("frame_rate", "must be > 0"));
    }
    let mut sensor = EventSensor::new(*model, &frames[0], 0.0)?;
    let mut events = Vec::new();
    for (k, frame) in frames.iter().enumerate().skip(1) {
        events.extend(sensor.push_frame(frame, frame_time_us(k, frame_rate))?);
    }
    Ok(events)
}

/// Renders and senses the scenario one frame at a time, handing each
/// inter-frame batch of events (time-sorted) to `visit`.
pub fn stream_scenario_events<F>(scenario: &GratingScenario, model: &SensorModel, mut visit: F) -> Result<()>
where
    F: FnMut(&[Event]) -> Result<()>,
{
    scenario.validate()?;
    let n = scenario.frame_count();
    if n < 2 {
        return Err(Error::invalid("duration", "scenario must span at least two frames"));
    }
    let mut sensor = EventSensor::new(*model, &render_frame(scenario, 0), 0.0)?;
    for k in 1..n {
        let batch = sensor.push_frame(&render_frame(scenario, k), frame_time_us(k, scenario.frame_rate))?;
        visit(&batch)?;
    }
    Ok(())
}

/// Renders a scenario and converts it into events.
pub fn scenario_events(scenario: &GratingScenario, model: &SensorModel) -> Result<Vec<Event>> {
    let mut all = Vec::new();
    stream_scenario_events(scenario, model, |batch| {
        all.extend_from_slice(batch);
        Ok(())
    })?;
    Ok(all)
}

/// One entry of the characterization suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub id: u32,
    pub name: String,
    pub scenario: GratingScenario,
    /// OMS membrane time constant used for this experiment, when it differs
    /// from the stage default.
    pub oms_tau: Option<f64>,
}

/// The sixteen grating experiments: stimulus modes (1-3), spatial-frequency
/// sweep (4-9) and background-faster-than-foreground speeds (10-16).
pub fn make_characterization_suite() -> Vec<Experiment> {
    use StimulusMode::*;
    let g = Grating::new;
    let mut suite = Vec::with_capacity(16);
    let mut push = |id: u32, name: &str, mode, bg, fg, tau: Option<f64>| {
        suite.push(Experiment {
            id,
            name: name.to_string(),
            scenario: GratingScenario::new(mode, bg, fg),
            oms_tau: tau,
        });
    };
    push(1, "eye_and_object", EyeAndObject, g(0.3, 0.01), g(3.0, 0.09), None);
    push(2, "eye_only", EyeOnly, g(0.3, 0.01), g(3.0, 0.09), None);
    push(3, "object_only", ObjectOnly, g(0.3, 0.01), g(3.0, 0.09), None);
    let sf_sweep = [(0.2, 3.0), (1.0, 3.0), (4.0, 3.0), (3.0, 0.2), (3.0, 1.0), (3.0, 4.0)];
    for (i, (bsf, fsf)) in sf_sweep.into_iter().enumerate() {
        let id = 4 + i as u32;
        push(id, &format!("sf_bg{bsf}_fg{fsf}"), EyeAndObject, g(bsf, 0.01), g(fsf, 0.09), None);
    }
    let speeds = [(0.01, 0.01), (0.03, 0.01), (0.05, 0.01), (0.09, 0.01), (0.05, 0.05), (0.09, 0.05), (0.13, 0.05)];
    for (i, (sb, sf)) in speeds.into_iter().enumerate() {
        let id = 10 + i as u32;
        push(id, &format!("speed_bg{sb}_fg{sf}"), EyeAndObject, g(0.3, sb), g(3.0, sf), Some(0.1));
    }
    suite
}
