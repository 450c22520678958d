//! Command-line front end: `characterize`, `segment`, `saliency`, `bench`, `demo`.
//!
//! Every run resolves a [`RunConfig`] from defaults, an optional `--config`
//! file and flags (flags win), and records it as `manifest.txt` in `--out`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{load_dataset, run_benchmark, BenchConfig, BenchReport};
use crate::config::FlatConfig;
use crate::control::{closed_loop, ClosedLoopConfig, ClosedLoopLog, ControllerConfig, PanTiltModel};
use crate::error::{Error, Result};
use crate::events::{read_events, suppression_stats, EventFile, EventSlice, SliceBuilder};
use crate::grid::Geometry;
use crate::oms::{kernel_sweep, run_characterization_with_maps, run_kernel_sweep, write_characterization_csv, OmsConfig, OmsState};
use crate::pgm::{write_mask_pgm, write_pgm};
use crate::proto::{saliency, write_peak_line, ProtoConfig, ProtoInput, ProtoKernels, SaliencyMap};
use crate::scenes::{calibration_circles, jitter_slice, Shape, Viewport, World, CALIBRATION_GEOMETRY};
use crate::snn::GaussianKernelSpec;
use crate::stimgen::{make_characterization_suite, SensorModel};

#[derive(Debug, Parser)]
#[command(name = "bioattn", version, about = "Event-based object motion, proto-object saliency and gaze control")]
pub struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    /// The six centre/surround sigma pairs at kernel size 8.
    Sigma,
    /// Kernel sizes 8, 16 and 32.
    Size,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Raw,
    Oms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// Six dark disks of radius 12 to 25 px under fixational jitter.
    Circles,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grating experiments: activity, ISI and mask statistics.
    Characterize {
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
        /// Comma-separated experiment ids (default: all sixteen).
        #[arg(long, value_delimiter = ',')]
        experiments: Vec<u32>,
    },
    /// OMS masks and suppression statistics for an event file.
    Segment {
        input: PathBuf,
        /// Sensor size for CSV input.
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
    },
    /// Saliency maps and salient points.
    Saliency {
        #[arg(required_unless_present = "fixture")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "raw")]
        source: Source,
        #[arg(long, value_enum, conflicts_with = "input")]
        fixture: Option<Fixture>,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
    },
    /// Scores OMS maps and salient points against mask-annotated sequences.
    Bench {
        /// Root holding `<sub-dataset>/<sequence>/` directories.
        #[arg(long)]
        dataset: PathBuf,
        /// Also score morphologically closed OMS maps.
        #[arg(long)]
        closing: bool,
    },
    /// Closed attention loop on a simulated pan-tilt camera.
    Demo {
        /// Scene description (default: one blinking square off-centre).
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Characterize { .. } => "characterize",
            Command::Segment { .. } => "segment",
            Command::Saliency { .. } => "saliency",
            Command::Bench { .. } => "bench",
            Command::Demo { .. } => "demo",
        }
    }
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub sensor: SensorModel,
    pub oms: OmsConfig,
    pub proto: ProtoConfig,
    pub controller: ControllerConfig,
    pub ptu: PanTiltModel,
    pub alpha_cmd: f64,
    pub iterations: usize,
    pub window_us: u64,
    pub frame_us: u64,
    pub step_scale: i64,
    pub use_oms: bool,
    pub box_size: usize,
    pub closing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sensor: SensorModel::default(),
            oms: OmsConfig::default(),
            proto: ProtoConfig::default(),
            controller: ControllerConfig::default(),
            ptu: PanTiltModel::default(),
            alpha_cmd: 1.0,
            iterations: 20,
            window_us: 20_000,
            frame_us: 1000,
            step_scale: 5,
            use_oms: true,
            box_size: 8,
            closing: false,
        }
    }
}

fn orientations_text(o: &[f64]) -> String {
    o.iter()
        .map(|r| format!("{}", (r.to_degrees() * 1e6).round() / 1e6))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_orientations(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|d| {
            let deg: f64 = d
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("key `proto.orientations`: bad angle {d:?}")))?;
            // Exact multiples of 45 degrees map onto the same radians as the defaults.
            let q = deg / 45.0;
            Ok(if q.fract() == 0.0 { q * PI / 4.0 } else { deg.to_radians() })
        })
        .collect()
}

impl RunConfig {
    /// Consumes every known key; unknown keys are an error.
    pub fn from_flat(mut c: FlatConfig) -> Result<Self> {
        let d = RunConfig::default();
        let seed = c.take_or("seed", d.seed)?;
        let kernel_size = c.take_or("oms.kernel_size", d.oms.center.size)?;
        let oms = OmsConfig {
            center: GaussianKernelSpec::new(kernel_size, c.take_or("oms.sigma_center", d.oms.center.sigma)?),
            surround: GaussianKernelSpec::new(kernel_size, c.take_or("oms.sigma_surround", d.oms.surround.sigma)?),
            alpha: c.take_or("oms.alpha", d.oms.alpha)?,
            tau: c.take_or("oms.tau", d.oms.tau)?,
            update_interval_us: c.take_or("oms.update_interval_us", d.oms.update_interval_us)?,
            threshold: d.oms.threshold,
            input: c.take_or("oms.input", d.oms.input)?,
        };
        let orientations = match c.take_opt::<String>("proto.orientations")? {
            Some(t) => parse_orientations(&t)?,
            None => d.proto.orientations.clone(),
        };
        let proto = ProtoConfig {
            radius: c.take_or("proto.radius", d.proto.radius)?,
            rho: c.take_or("proto.rho", d.proto.rho)?,
            w: c.take_or("proto.w", d.proto.w)?,
            orientations,
            pyramid_levels: c.take_or("proto.pyramid_levels", d.proto.pyramid_levels)?,
            tau: c.take_or("proto.tau", d.proto.tau)?,
            polarity_split: c.take_or("proto.polarity_split", d.proto.polarity_split)?,
        };
        let dc = &d.controller;
        let controller = ControllerConfig {
            neurons: c.take_or("control.neurons", dc.neurons)?,
            gain_pan: c.take_or("control.gain_pan", dc.gain_pan)?,
            gain_tilt: c.take_or("control.gain_tilt", dc.gain_tilt)?,
            center: (c.take_or("control.center_x", dc.center.0)?, c.take_or("control.center_y", dc.center.1)?),
            tau_syn: c.take_or("control.tau_syn", dc.tau_syn)?,
            settle: c.take_or("control.settle", dc.settle)?,
            seed,
            ..dc.clone()
        };
        let dp = &d.ptu;
        let ptu = PanTiltModel {
            degrees_per_pos: c.take_or("ptu.degrees_per_pos", dp.degrees_per_pos)?,
            focal_length: c.take_or("ptu.focal_length", dp.focal_length)?,
            sensor_width: c.take_or("ptu.sensor_width", dp.sensor_width)?,
            settle_steps: c.take_or("ptu.settle_steps", dp.settle_steps)?,
            backlash_sigma: c.take_or("ptu.backlash_sigma", dp.backlash_sigma)?,
            ..dp.clone()
        };
        let sensor = SensorModel {
            threshold: c.take_or("sensor.threshold", d.sensor.threshold)?,
            refractory_us: c.take_or("sensor.refractory_us", d.sensor.refractory_us)?,
            noise_rate: c.take_or("sensor.noise_rate", d.sensor.noise_rate)?,
            seed,
        };
        let rc = RunConfig {
            seed,
            sensor,
            oms,
            proto,
            controller,
            ptu,
            alpha_cmd: c.take_or("control.alpha_cmd", d.alpha_cmd)?,
            iterations: c.take_or("loop.iterations", d.iterations)?,
            window_us: c.take_or("loop.window_us", d.window_us)?,
            frame_us: c.take_or("loop.frame_us", d.frame_us)?,
            step_scale: c.take_or("loop.step_scale", d.step_scale)?,
            use_oms: c.take_or("loop.use_oms", d.use_oms)?,
            box_size: c.take_or("bench.box_size", d.box_size)?,
            closing: c.take_or("bench.closing", d.closing)?,
        };
        c.finish()?;
        rc.sensor.validate()?;
        rc.oms.validate()?;
        rc.proto.validate()?;
        rc.controller.validate()?;
        Ok(rc)
    }

    pub fn to_flat(&self) -> FlatConfig {
        let mut c = FlatConfig::default();
        c.set("seed", self.seed);
        c.set("sensor.threshold", self.sensor.threshold);
        c.set("sensor.refractory_us", self.sensor.refractory_us);
        c.set("sensor.noise_rate", self.sensor.noise_rate);
        c.set("oms.kernel_size", self.oms.center.size);
        c.set("oms.sigma_center", self.oms.center.sigma);
        c.set("oms.sigma_surround", self.oms.surround.sigma);
        c.set("oms.alpha", self.oms.alpha);
        c.set("oms.tau", self.oms.tau);
        c.set("oms.update_interval_us", self.oms.update_interval_us);
        c.set("oms.input", self.oms.input);
        c.set("proto.radius", self.proto.radius);
        c.set("proto.rho", self.proto.rho);
        c.set("proto.w", self.proto.w);
        c.set("proto.orientations", orientations_text(&self.proto.orientations));
        c.set("proto.pyramid_levels", self.proto.pyramid_levels);
        c.set("proto.tau", self.proto.tau);
        c.set("proto.polarity_split", self.proto.polarity_split);
        c.set("control.neurons", self.controller.neurons);
        c.set("control.gain_pan", self.controller.gain_pan);
        c.set("control.gain_tilt", self.controller.gain_tilt);
        c.set("control.center_x", self.controller.center.0);
        c.set("control.center_y", self.controller.center.1);
        c.set("control.tau_syn", self.controller.tau_syn);
        c.set("control.settle", self.controller.settle);
        c.set("control.alpha_cmd", self.alpha_cmd);
        c.set("ptu.degrees_per_pos", self.ptu.degrees_per_pos);
        c.set("ptu.focal_length", self.ptu.focal_length);
        c.set("ptu.sensor_width", self.ptu.sensor_width);
        c.set("ptu.settle_steps", self.ptu.settle_steps);
        c.set("ptu.backlash_sigma", self.ptu.backlash_sigma);
        c.set("loop.iterations", self.iterations);
        c.set("loop.window_us", self.window_us);
        c.set("loop.frame_us", self.frame_us);
        c.set("loop.step_scale", self.step_scale);
        c.set("loop.use_oms", self.use_oms);
        c.set("bench.box_size", self.box_size);
        c.set("bench.closing", self.closing);
        c
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut flat = match &cli.config {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };
        if let Some(seed) = cli.seed {
            flat.set("seed", seed);
        }
        if let Command::Demo { iterations: Some(n), .. } = &cli.command {
            flat.set("loop.iterations", n);
        }
        if let Command::Bench { closing: true, .. } = &cli.command {
            flat.set("bench.closing", true);
        }
        Self::from_flat(flat)
    }
}

/// The scene used when `demo` gets no scene file: a 17 px square blinking
/// at 12.5 Hz, 36 px right of and 24 px above the initial gaze.
pub fn default_demo_world() -> World {
    let (cx, cy) = (200.0 + 36.0, 200.0 - 24.0);
    World::new(400.0, 400.0).with_blinking(
        Shape::Rect {
            x0: cx - 8.5,
            y0: cy - 8.5,
            w: 17.0,
            h: 17.0,
        },
        0.08,
    )
}

pub fn closed_loop_config(rc: &RunConfig, world: World) -> ClosedLoopConfig {
    let mut c = ClosedLoopConfig::new(world);
    c.iterations = rc.iterations;
    c.window_us = rc.window_us;
    c.frame_us = rc.frame_us;
    c.step_scale = rc.step_scale;
    c.alpha_cmd = rc.alpha_cmd;
    c.use_oms = rc.use_oms;
    c.sensor = SensorModel {
        noise_rate: 0.0,
        ..rc.sensor
    };
    c.oms = rc.oms;
    c.proto = rc.proto.clone();
    c.controller = rc.controller.clone();
    c.ptu = rc.ptu.clone();
    c.seed = rc.seed;
    c
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_manifest(out: &Path, command: &str, rc: &RunConfig, extra: &[(&str, String)]) -> Result<()> {
    let mut flat = rc.to_flat();
    flat.set("command", command);
    for (k, v) in extra {
        flat.set(*k, v);
    }
    fs::write(out.join("manifest.txt"), flat.to_text())?;
    Ok(())
}

fn load_stream(path: &Path, width: usize, height: usize) -> Result<EventFile> {
    read_events(path, Some(Geometry::new(width, height)))
}

fn slices(file: &EventFile, window_us: u64) -> Result<Vec<EventSlice>> {
    let mut b = SliceBuilder::new(window_us, file.geometry)?;
    let mut out = Vec::new();
    for e in &file.events {
        b.push(e, |s| out.push(s))?;
    }
    out.extend(b.finish());
    Ok(out)
}

pub fn characterize(rc: &RunConfig, out: &Path, sweep: Option<Sweep>, ids: &[u32]) -> Result<String> {
    let suite: Vec<_> = make_characterization_suite()
        .into_iter()
        .filter(|e| ids.is_empty() || ids.contains(&e.id))
        .collect();
    if suite.is_empty() {
        return Err(Error::Config(format!("no experiment matches {ids:?}")));
    }
    let mut report = String::new();
    if let Some(sweep) = sweep {
        let all = kernel_sweep();
        let variants = match sweep {
            Sweep::Sigma => &all[..6],
            Sweep::Size => &all[6..],
        };
        let rows = run_kernel_sweep(&suite[0], variants, &rc.sensor, &rc.oms)?;
        write_characterization_csv(create(&out.join("sweep.csv"))?, &rows)?;
        let _ = writeln!(report, "{:>5} {:>6} {:>6} {:>8} {:>8} {:>8}", "size", "sc", "ss", "mfr", "isi", "ratio");
        for r in &rows {
            let _ = writeln!(
                report,
                "{:>5} {:>6} {:>6} {:>8.3} {:>8.4} {:>8.2}",
                r.kernel_size, r.sigma_center, r.sigma_surround, r.mfr_mean, r.isi_mean, r.density_ratio
            );
        }
    } else {
        let rows = run_characterization_with_maps(&suite, &rc.sensor, &rc.oms)?;
        for (r, mask) in &rows {
            if let Some(m) = mask {
                write_mask_pgm(create(&out.join(format!("exp_{:02}_oms.pgm", r.id)))?, m)?;
            }
        }
        let rows: Vec<_> = rows.into_iter().map(|(r, _)| r).collect();
        write_characterization_csv(create(&out.join("characterization.csv"))?, &rows)?;
        let _ = writeln!(
            report,
            "{:>3} {:<22} {:>8} {:>8} {:>8} {:>8}",
            "id", "name", "mfr", "isi", "suppr", "ratio"
        );
        for r in &rows {
            let _ = writeln!(
                report,
                "{:>3} {:<22} {:>8.3} {:>8.4} {:>8.3} {:>8.2}",
                r.id, r.name, r.mfr_mean, r.isi_mean, r.suppression_fraction, r.density_ratio
            );
        }
    }
    fs::write(out.join("summary.txt"), &report)?;
    Ok(report)
}

pub fn segment(rc: &RunConfig, out: &Path, file: &EventFile) -> Result<String> {
    let masks = out.join("masks");
    fs::create_dir_all(&masks)?;
    let mut oms = OmsState::new(rc.oms, file.geometry)?;
    let mut w = csv::Writer::from_writer(create(&out.join("suppression.csv"))?);
    w.write_record(["slice", "window_start", "window_end", "input_events", "output_events", "suppression_fraction"])?;
    let all = slices(file, rc.oms.update_interval_us)?;
    let (mut tin, mut tout) = (0u64, 0u64);
    for (k, s) in all.iter().enumerate() {
        let map = oms.step(s)?;
        write_mask_pgm(create(&masks.join(format!("oms_{k:05}.pgm")))?, &map.mask)?;
        let st = suppression_stats(s, &map.mask)?;
        tin += st.input_events;
        tout += st.output_events;
        w.write_record([
            k.to_string(),
            s.window_start.to_string(),
            s.window_end.to_string(),
            st.input_events.to_string(),
            st.output_events.to_string(),
            st.suppression_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(format!("{} slices, {} events in, {} events out\n", all.len(), tin, tout))
}

fn write_saliency(out: &Path, k: usize, map: &SaliencyMap) -> Result<()> {
    write_pgm(create(&out.join(format!("saliency_{k:05}.pgm")))?, &map.map)
}

/// Counts calibration disks whose centre lies within `R0` of a local
/// saliency maximum. Returns the map, the count and the per-disk distance.
pub fn calibration_detections(proto: &ProtoConfig, sensor: &SensorModel) -> Result<(SaliencyMap, usize, Vec<f64>)> {
    let (world, centers) = calibration_circles();
    let slice = jitter_slice(&world, Viewport::new(CALIBRATION_GEOMETRY, (0.0, 0.0)), 1.0, 10, 2000, sensor)?;
    let kernels = ProtoKernels::new(proto)?;
    let map = saliency(proto, &kernels, &ProtoInput::from_slice(&slice))?;
    let maxima = map.local_maxima(proto.radius.round() as usize, 0.05);
    let dist: Vec<f64> = centers
        .iter()
        .map(|&(cx, cy)| {
            maxima
                .iter()
                .map(|&(x, y, _)| ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let hits = dist.iter().filter(|d| **d <= proto.radius).count();
    Ok((map, hits, dist))
}

pub fn saliency_fixture(rc: &RunConfig, out: &Path) -> Result<String> {
    let (map, hits, dist) = calibration_detections(&rc.proto, &rc.sensor)?;
    write_saliency(out, 0, &map)?;
    write_peak_line(create(&out.join("peaks.txt"))?, 0, &map)?;
    let mut s = String::new();
    for (i, d) in dist.iter().enumerate() {
        let _ = writeln!(s, "disk {i}: nearest maximum {d:.1} px");
    }
    let _ = writeln!(s, "detected {hits} of {}", dist.len());
    fs::write(out.join("detections.txt"), &s)?;
    Ok(s)
}

pub fn saliency_stream(rc: &RunConfig, out: &Path, file: &EventFile, source: Source) -> Result<String> {
    let kernels = ProtoKernels::new(&rc.proto)?;
    let mut oms = OmsState::new(rc.oms, file.geometry)?;
    let mut peaks = create(&out.join("peaks.txt"))?;
    let mut all = slices(file, rc.oms.update_interval_us)?;
    if all.is_empty() {
        all.push(EventSlice::empty(file.geometry, 0, rc.oms.update_interval_us));
    }
    for (k, s) in all.iter().enumerate() {
        let input = match source {
            Source::Raw => ProtoInput::from_slice(s),
            Source::Oms => ProtoInput::from_slice(&oms.step(s)?.to_slice(s)?),
        };
        let map = saliency(&rc.proto, &kernels, &input)?;
        write_saliency(out, k, &map)?;
        write_peak_line(&mut peaks, s.window_end, &map)?;
    }
    peaks.flush()?;
    Ok(format!("{} saliency maps\n", all.len()))
}

pub fn bench(rc: &RunConfig, out: &Path, root: &Path) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    let mut sequences = Vec::new();
    for (_, path, loaded) in load_dataset(root)? {
        match loaded {
            Ok(s) => sequences.push(s),
            Err(e) => report.failures.push((path.display().to_string(), e.to_string())),
        }
    }
    let cfg = BenchConfig {
        oms: rc.oms,
        proto: rc.proto.clone(),
        box_size: rc.box_size,
        closing: rc.closing,
    };
    let scored = run_benchmark(&sequences, &cfg);
    report.rows = scored.rows;
    report.failures.extend(scored.failures);
    report.write_csv(create(&out.join("bench.csv"))?)?;
    fs::write(out.join("bench.txt"), report.to_table())?;
    Ok(report)
}

/// Mean and standard deviation, in milliseconds, of each latency column.
pub fn latency_summary(log: &ClosedLoopLog) -> String {
    let cols: [(&str, fn(&crate::control::TrajectoryRow) -> u64); 6] = [
        ("accumulate", |r| r.accumulate_us),
        ("oms", |r| r.oms_us),
        ("proto", |r| r.proto_us),
        ("oms+proto", |r| r.attention_us()),
        ("control", |r| r.control_us),
        ("saccade", |r| r.saccade_us),
    ];
    let mut s = String::new();
    for (name, f) in cols {
        let v: Vec<f64> = log.rows.iter().map(|r| f(r) as f64 / 1000.0).collect();
        let (m, sd) = crate::bench::mean_std(&v);
        let _ = writeln!(s, "{name:<11} {m:8.3} ± {sd:.3} ms");
    }
    let _ = writeln!(s, "saccades    {}", log.saccades.len());
    let _ = writeln!(s, "saturations {}", log.saturations);
    s
}

pub fn demo(rc: &RunConfig, out: &Path, scene: Option<&Path>) -> Result<String> {
    let world = match scene {
        Some(p) => {
            let mut flat = FlatConfig::load(p)?;
            let w = World::from_config(&mut flat)?;
            flat.finish()?;
            w
        }
        None => default_demo_world(),
    };
    if rc.iterations == 0 {
        return Ok(rc.to_flat().to_text());
    }
    let log = closed_loop(&closed_loop_config(rc, world))?;
    log.write_csv(create(&out.join("trajectory.csv"))?)?;
    let summary = latency_summary(&log);
    fs::write(out.join("latency.txt"), &summary)?;
    Ok(summary)
}

/// Parses arguments, runs the subcommand and maps failures to exit codes:
/// 1 for errors, 2 for a missing dataset.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let rc = RunConfig::resolve(cli)?;
    let out = cli.out.as_path();
    if let Command::Bench { dataset, .. } = &cli.command {
        if !dataset.is_dir() {
            eprintln!(
                "dataset not found at {}: convert the sequences first into <root>/<sub-dataset>/<sequence>/ \
                 holding events.evst (or events.csv), masks.txt with \"t_us filename\" lines and 1-bit PGM masks",
                dataset.display()
            );
            return Ok(ExitCode::from(2));
        }
    }
    if let Command::Demo { .. } = &cli.command {
        if rc.iterations == 0 {
            print!("{}", rc.to_flat().to_text());
            return Ok(ExitCode::SUCCESS);
        }
    }
    fs::create_dir_all(out)?;
    let text = match &cli.command {
        Command::Characterize { sweep, experiments } => characterize(&rc, out, *sweep, experiments)?,
        Command::Segment { input, width, height } => segment(&rc, out, &load_stream(input, *width, *height)?)?,
        Command::Saliency {
            input,
            source,
            fixture,
            width,
            height,
        } => match (fixture, input) {
            (Some(Fixture::Circles), _) => saliency_fixture(&rc, out)?,
            (None, Some(p)) => saliency_stream(&rc, out, &load_stream(p, *width, *height)?, *source)?,
            (None, None) => return Err(Error::Config("saliency needs an input file or --fixture".into())),
        },
        Command::Bench { dataset, .. } => bench(&rc, out, dataset)?.to_table(),
        Command::Demo { scene, .. } => demo(&rc, out, scene.as_deref())?,
    };
    write_manifest(out, cli.command.name(), &rc, &[])?;
    print!("{text}");
    std::io::stdout().flush()?;
    Ok(ExitCode::SUCCESS)
}
