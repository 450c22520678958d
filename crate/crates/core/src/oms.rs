//! Spiking object-motion-sensitivity stage.
//!
//! The binary event view of each slice drives two LIF grids through a
//! center and a surround Gaussian. Their pre-reset potentials are
//! subtracted, normalized by the frame maximum and thresholded at `alpha`;
//! the surviving event pixels form the OMS map.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{accumulate, suppression_stats, Event, EventSlice, SliceBuilder};
use crate::grid::{Geometry, Grid, Mask};
use crate::snn::{conv2d_same, gaussian_kernel, GaussianKernelSpec, LifGrid, DEFAULT_THRESHOLD};
use crate::stimgen::{stream_scenario_events, Experiment, GratingScenario, SensorModel};

/// What drives the LIF layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmsInput {
    /// 1 where the slice has any event.
    #[default]
    Binary,
    /// Event count per pixel, both polarities.
    Counts,
}

impl std::fmt::Display for OmsInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OmsInput::Binary => "binary",
            OmsInput::Counts => "counts",
        })
    }
}

impl std::str::FromStr for OmsInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(OmsInput::Binary),
            "counts" => Ok(OmsInput::Counts),
            other => Err(format!("unknown OMS input {other:?} (binary|counts)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmsConfig {
    pub center: GaussianKernelSpec,
    pub surround: GaussianKernelSpec,
    /// Threshold on the max-normalized center minus surround response.
    pub alpha: f64,
    /// LIF time constant in seconds.
    pub tau: f64,
    /// Slice length in microseconds.
    pub update_interval_us: u64,
    pub threshold: f64,
    pub input: OmsInput,
}

impl Default for OmsConfig {
    fn default() -> Self {
        Self {
            center: GaussianKernelSpec::new(8, 1.0),
            surround: GaussianKernelSpec::new(8, 4.0),
            alpha: 0.8,
            tau: 0.02,
            update_interval_us: 20_000,
            threshold: DEFAULT_THRESHOLD,
            input: OmsInput::Binary,
        }
    }
}

impl OmsConfig {
    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        self.surround.validate()?;
        if self.center.size != self.surround.size {
            return Err(Error::invalid("surround", "center and surround kernels must have the same size"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("{} not in (0, 1]", self.alpha)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be > 0"));
        }
        if self.update_interval_us == 0 {
            return Err(Error::invalid("update_interval", "must be > 0"));
        }
        Ok(())
    }

    /// Number of leading slices dropped from statistics, `ceil(3 tau / interval)`.
    pub fn warmup_slices(&self) -> usize {
        (3.0 * self.tau / (self.update_interval_us as f64 * 1e-6) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Output of one OMS step.
#[derive(Debug, Clone, PartialEq)]
pub struct OmsMap {
    pub window_start: u64,
    pub window_end: u64,
    pub mask: Mask,
    /// ON events at masked pixels.
    pub on_events: u64,
    /// OFF events at masked pixels.
    pub off_events: u64,
}

impl OmsMap {
    pub fn geometry(&self) -> Geometry {
        self.mask.geometry()
    }

    /// The surviving events as a slice.
    pub fn to_slice(&self, input: &EventSlice) -> Result<EventSlice> {
        input.geometry().ensure_same(self.geometry())?;
        let mut out = EventSlice::empty(input.geometry(), input.window_start, input.window_end);
        for (i, keep) in self.mask.iter().enumerate() {
            if *keep {
                out.pos.as_mut_slice()[i] = input.pos.as_slice()[i];
                out.neg.as_mut_slice()[i] = input.neg.as_slice()[i];
            }
        }
        Ok(out)
    }
}

/// Applies the normalized difference threshold: `V && (c - s) / max(c - s) > alpha`.
///
/// The maximum is taken over the whole frame. When it is not positive the
/// mask is empty.
pub fn difference_mask(view: &Mask, center: &Grid<f64>, surround: &Grid<f64>, alpha: f64) -> Result<Mask> {
    let d = center.zip_map(surround, |c, s| c - s)?;
    view.geometry().ensure_same(d.geometry())?;
    let peak = d.max_value();
    if !(peak > 0.0) {
        return Ok(Mask::filled(view.geometry(), false));
    }
    view.zip_map(&d, |v, d| *v && d / peak > alpha)
}

/// Membranes of one OMS stream.
#[derive(Debug, Clone)]
pub struct OmsState {
    config: OmsConfig,
    center_kernel: Grid<f64>,
    surround_kernel: Grid<f64>,
    center: LifGrid,
    surround: LifGrid,
}

impl OmsState {
    pub fn new(config: OmsConfig, geometry: Geometry) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            center_kernel: gaussian_kernel(&config.center)?,
            surround_kernel: gaussian_kernel(&config.surround)?,
            center: LifGrid::with_threshold(geometry, config.tau, config.threshold)?,
            surround: LifGrid::with_threshold(geometry, config.tau, config.threshold)?,
            config,
        })
    }

    pub fn config(&self) -> &OmsConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.center.geometry()
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        let mut c = self.config;
        c.alpha = alpha;
        c.validate()?;
        self.config = c;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.center.reset();
        self.surround.reset();
    }

    /// Runs one slice through the stage.
    pub fn step(&mut self, slice: &EventSlice) -> Result<OmsMap> {
        self.geometry().ensure_same(slice.geometry())?;
        let view = slice.binary_view();
        let input = match self.config.input {
            OmsInput::Binary => view.to_f64(),
            OmsInput::Counts => slice.pos.zip_map(&slice.neg, |p, n| f64::from(p + n))?,
        };
        let dt = slice.duration_us().max(1) as f64 * 1e-6;
        let c = self.center.step(&conv2d_same(&input, &self.center_kernel)?, dt)?;
        let s = self.surround.step(&conv2d_same(&input, &self.surround_kernel)?, dt)?;
        let mask = difference_mask(&view, &c.potential, &s.potential, self.config.alpha)?;
        let (mut on_events, mut off_events) = (0, 0);
        for (i, keep) in mask.iter().enumerate() {
            if *keep {
                on_events += u64::from(slice.pos.as_slice()[i]);
                off_events += u64::from(slice.neg.as_slice()[i]);
            }
        }
        Ok(OmsMap {
            window_start: slice.window_start,
            window_end: slice.window_end,
            mask,
            on_events,
            off_events,
        })
    }
}

/// Per-neuron spike bookkeeping for firing-rate and inter-spike statistics.
#[derive(Debug, Clone)]
pub struct SpikeRecorder {
    counts: Vec<u32>,
    first: Vec<f64>,
    last: Vec<f64>,
    start: Option<f64>,
    end: f64,
}

impl SpikeRecorder {
    pub fn new(neurons: usize) -> Self {
        Self {
            counts: vec![0; neurons],
            first: vec![0.0; neurons],
            last: vec![0.0; neurons],
            start: None,
            end: 0.0,
        }
    }

    /// Records one step's spikes, stamped at `t` seconds, for the interval
    /// `[t_start, t]`.
    pub fn record(&mut self, spikes: &Mask, t_start: f64, t: f64) {
        self.start.get_or_insert(t_start);
        self.end = t;
        for (i, s) in spikes.iter().enumerate() {
            if *s {
                if self.counts[i] == 0 {
                    self.first[i] = t;
                }
                self.last[i] = t;
                self.counts[i] += 1;
            }
        }
    }

    pub fn duration(&self) -> f64 {
        self.start.map_or(0.0, |s| self.end - s)
    }

    pub fn stats(&self) -> ActivityStats {
        let n = self.counts.len().max(1) as f64;
        let duration = self.duration();
        let rates: Vec<f64> = self
            .counts
            .iter()
            .map(|c| if duration > 0.0 { f64::from(*c) / duration } else { 0.0 })
            .collect();
        let (mfr_mean, mfr_std) = mean_std(&rates);
        let isis: Vec<f64> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c >= 2)
            .map(|(i, c)| (self.last[i] - self.first[i]) / f64::from(c - 1))
            .collect();
        let spiking = self.counts.iter().filter(|c| **c >= 1).count();
        let (isi_mean, isi_std) = if isis.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&isis) };
        ActivityStats {
            mfr_mean,
            mfr_std,
            isi_mean,
            isi_std,
            multi_spike_fraction: isis.len() as f64 / n,
            isi_excluded_fraction: if spiking > 0 { 1.0 - isis.len() as f64 / spiking as f64 } else { 0.0 },
        }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population activity summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityStats {
    /// Spikes per neuron per second, over every neuron.
    pub mfr_mean: f64,
    pub mfr_std: f64,
    /// Seconds, over neurons with at least two spikes; NaN when there are none.
    pub isi_mean: f64,
    pub isi_std: f64,
    /// Fraction of all neurons with at least two spikes.
    pub multi_spike_fraction: f64,
    /// Fraction of spiking neurons left out of the ISI statistic.
    pub isi_excluded_fraction: f64,
}

/// Result of one characterization experiment.
#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationRow {
    pub id: u32,
    pub name: String,
    pub mode: String,
    pub background_sf: f64,
    pub background_speed: f64,
    pub foreground_sf: f64,
    pub foreground_speed: f64,
    pub sigma_center: f64,
    pub sigma_surround: f64,
    pub kernel_size: usize,
    pub tau: f64,
    pub slices: usize,
    pub mfr_mean: f64,
    pub mfr_std: f64,
    pub isi_mean: f64,
    pub isi_std: f64,
    pub isi_excluded_fraction: f64,
    pub suppression_fraction: f64,
    pub foreground_density: f64,
    pub background_density: f64,
    /// Foreground over background mask density; infinite when only the
    /// foreground has mask pixels, zero when neither has.
    pub density_ratio: f64,
}

/// Per-slice trace of a scenario run.
#[derive(Debug, Clone, Default)]
pub struct ScenarioTrace {
    pub maps: Vec<OmsMap>,
    pub suppression: Vec<f64>,
}

/// Runs an event stream through a fresh OMS state, calling `visit` for every
/// slice with its output map.
pub fn run_stream<F>(events: &[Event], geometry: Geometry, config: &OmsConfig, mut visit: F) -> Result<usize>
where
    F: FnMut(usize, &EventSlice, &OmsMap) -> Result<()>,
{
    let mut state = OmsState::new(*config, geometry)?;
    let mut n = 0;
    for (k, slice) in accumulate(events.iter().copied(), config.update_interval_us, geometry)?.enumerate() {
        let slice = slice?;
        let map = state.step(&slice)?;
        visit(k, &slice, &map)?;
        n += 1;
    }
    Ok(n)
}

/// Renders, simulates and segments one scenario, collecting statistics over
/// the slices after warm-up. `visit` sees every slice's map, warm-up included.
pub fn run_scenario(
    scenario: &GratingScenario,
    sensor: &SensorModel,
    config: &OmsConfig,
    mut visit: impl FnMut(usize, &OmsMap),
) -> Result<(ActivityStats, ScenarioStats)> {
    let disk = Grid::from_fn(scenario.geometry, |x, y| scenario.in_disk(x, y));
    let disk_px = disk.count_ones().max(1) as f64;
    let out_px = (scenario.geometry.len() - disk.count_ones()).max(1) as f64;
    let warmup = config.warmup_slices();
    let mut state = OmsState::new(*config, scenario.geometry)?;
    let mut builder = SliceBuilder::new(config.update_interval_us, scenario.geometry)?;
    let mut recorder = SpikeRecorder::new(scenario.geometry.len());
    let mut acc = ScenarioStats::default();
    let mut k = 0usize;
    let mut process = |slice: EventSlice| -> Result<()> {
        let map = state.step(&slice)?;
        visit(k, &map);
        k += 1;
        if k <= warmup {
            return Ok(());
        }
        recorder.record(&map.mask, slice.window_start as f64 * 1e-6, slice.window_end as f64 * 1e-6);
        let (mut fg, mut bg) = (0usize, 0usize);
        for (m, d) in map.mask.iter().zip(disk.iter()) {
            if *m {
                if *d {
                    fg += 1;
                } else {
                    bg += 1;
                }
            }
        }
        acc.foreground_density += fg as f64 / disk_px;
        acc.background_density += bg as f64 / out_px;
        acc.suppression += suppression_stats(&slice, &map.mask)?.suppression_fraction;
        acc.slices += 1;
        Ok(())
    };
    let mut failed = None;
    stream_scenario_events(scenario, sensor, |batch| {
        for e in batch {
            builder.push(e, |slice| {
                if failed.is_none() {
                    failed = process(slice).err();
                }
            })?;
        }
        failed.take().map_or(Ok(()), Err)
    })?;
    if let Some(last) = builder.finish() {
        process(last)?;
    }
    if acc.slices > 0 {
        let n = acc.slices as f64;
        acc.foreground_density /= n;
        acc.background_density /= n;
        acc.suppression /= n;
    }
    Ok((recorder.stats(), acc))
}

/// Slice-averaged mask statistics of a scenario run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScenarioStats {
    pub slices: usize,
    /// Mean fraction of disk pixels in the mask.
    pub foreground_density: f64,
    /// Mean fraction of non-disk pixels in the mask.
    pub background_density: f64,
    pub suppression: f64,
}

impl ScenarioStats {
    pub fn density_ratio(&self) -> f64 {
        match (self.foreground_density > 0.0, self.background_density > 0.0) {
            (_, true) => self.foreground_density / self.background_density,
            (true, false) => f64::INFINITY,
            (false, false) => 0.0,
        }
    }
}

/// Runs one experiment, honoring its time-constant override.
pub fn run_experiment(experiment: &Experiment, sensor: &SensorModel, config: &OmsConfig) -> Result<CharacterizationRow> {
    Ok(run_experiment_with_map(experiment, sensor, config)?.0)
}

/// [`run_experiment`] that also returns the final OMS mask.
pub fn run_experiment_with_map(experiment: &Experiment, sensor: &SensorModel, config: &OmsConfig) -> Result<(CharacterizationRow, Option<Mask>)> {
    let mut cfg = *config;
    if let Some(tau) = experiment.oms_tau {
        cfg.tau = tau;
    }
    let s = &experiment.scenario;
    let mut last = None;
    let (activity, stats) = run_scenario(s, sensor, &cfg, |_, m| last = Some(m.mask.clone()))?;
    let row = CharacterizationRow {
        id: experiment.id,
        name: experiment.name.clone(),
        mode: s.mode.to_string(),
        background_sf: s.background.spatial_frequency,
        background_speed: s.background.speed,
        foreground_sf: s.foreground.spatial_frequency,
        foreground_speed: s.foreground.speed,
        sigma_center: cfg.center.sigma,
        sigma_surround: cfg.surround.sigma,
        kernel_size: cfg.center.size,
        tau: cfg.tau,
        slices: stats.slices,
        mfr_mean: activity.mfr_mean,
        mfr_std: activity.mfr_std,
        isi_mean: activity.isi_mean,
        isi_std: activity.isi_std,
        isi_excluded_fraction: activity.isi_excluded_fraction,
        suppression_fraction: stats.suppression,
        foreground_density: stats.foreground_density,
        background_density: stats.background_density,
        density_ratio: stats.density_ratio(),
    };
    Ok((row, last))
}

/// Runs every experiment of the suite.
/// Experiments run on parallel threads; row order follows the suite.
pub fn run_characterization(suite: &[Experiment], sensor: &SensorModel, config: &OmsConfig) -> Result<Vec<CharacterizationRow>> {
    run_parallel(suite.len(), |i| run_experiment(&suite[i], sensor, config))
}

/// [`run_characterization`] keeping each experiment's final mask.
pub fn run_characterization_with_maps(
    suite: &[Experiment],
    sensor: &SensorModel,
    config: &OmsConfig,
) -> Result<Vec<(CharacterizationRow, Option<Mask>)>> {
    run_parallel(suite.len(), |i| run_experiment_with_map(&suite[i], sensor, config))
}

fn run_parallel<T: Send, F>(n: usize, job: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= n {
                            break done;
                        }
                        done.push((i, job(i)));
                    }
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("characterization worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every index visited")).collect()
}

/// Kernel variants of the Eye+Object sweep: six sigma pairs at size 8, then
/// three size/sigma combinations. Each entry is `(size, sigma_c, sigma_s)`.
pub fn kernel_sweep() -> Vec<(usize, f64, f64)> {
    vec![
        (8, 1.0, 4.0),
        (8, 2.0, 4.0),
        (8, 3.0, 4.0),
        (8, 4.0, 4.0),
        (8, 2.0, 8.0),
        (8, 4.0, 8.0),
        (8, 1.0, 4.0),
        (16, 4.0, 8.0),
        (32, 8.0, 16.0),
    ]
}

/// Runs experiment 1 once per kernel variant.
pub fn run_kernel_sweep(
    experiment: &Experiment,
    variants: &[(usize, f64, f64)],
    sensor: &SensorModel,
    config: &OmsConfig,
) -> Result<Vec<CharacterizationRow>> {
    run_parallel(variants.len(), |i| {
        let (size, sc, ss) = variants[i];
        let cfg = OmsConfig {
            center: GaussianKernelSpec::new(size, sc),
            surround: GaussianKernelSpec::new(size, ss),
            ..*config
        };
        run_experiment(experiment, sensor, &cfg)
    })
}

/// Writes rows as CSV with a header line.
pub fn write_characterization_csv<W: Write>(out: W, rows: &[CharacterizationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
