//! Proto-object saliency: border ownership, grouping and the salient point.
//!
//! Border-ownership cells sense edge mass on either side of each active
//! pixel with oriented von Mises rings; grouping cells then project every
//! owned edge back toward its figure side, so closed contours pile up
//! activity near their centers. Both stages run on a max-pooled pyramid
//! whose levels are summed at input resolution.
//!
//! Convention: `conv2d_same` is a correlation. Border ownership correlates
//! with `VM_θ` (B1 senses mass in direction θ); grouping convolves with
//! `VM_θ` proper, i.e. correlates with `VM_{θ+π}`, which pushes B1 toward θ.

use std::io::Write;

use crate::error::{Error, Result};
use crate::events::EventSlice;
use crate::grid::{Geometry, Grid, Mask};
use crate::snn::{base_orientations, conv2d_same, von_mises_kernel, LifGrid, VonMisesKernelSpec, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtoConfig {
    /// Ring radius `R0` in pixels.
    pub radius: f64,
    pub rho: f64,
    /// Inhibition between opposite sides.
    pub w: f64,
    /// Radians; each is paired with its opposite `θ + π`.
    pub orientations: Vec<f64>,
    pub pyramid_levels: usize,
    /// LIF time constant of the border-ownership layer, seconds.
    pub tau: f64,
    /// Feed ON and OFF views separately (`V₊ + V₋`) instead of the merged view.
    pub polarity_split: bool,
}

impl Default for ProtoConfig {
    fn default() -> Self {
        Self {
            radius: 8.0,
            rho: 0.2,
            w: 3.0,
            orientations: base_orientations().to_vec(),
            pyramid_levels: 3,
            tau: 0.1,
            polarity_split: true,
        }
    }
}

impl ProtoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0) {
            return Err(Error::invalid("w", "inhibition must be >= 0"));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("pyramid_levels", "must be >= 1"));
        }
        if self.orientations.is_empty() {
            return Err(Error::invalid("orientations", "need at least one"));
        }
        for (i, a) in self.orientations.iter().enumerate() {
            for b in &self.orientations[..i] {
                let d = (a - b).rem_euclid(std::f64::consts::PI);
                if d < 1e-9 || std::f64::consts::PI - d < 1e-9 {
                    return Err(Error::invalid("orientations", "must be distinct modulo pi"));
                }
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be > 0"));
        }
        VonMisesKernelSpec::new(self.radius, self.rho, 0.0).validate()
    }

    /// Largest distance, in input pixels, over which a pixel's activity can
    /// reach the saliency map: two ring radii plus pooling slack at the
    /// coarsest level.
    pub fn support_radius(&self) -> usize {
        let scale = 1usize << (self.pyramid_levels - 1);
        let r = self.radius.ceil() as usize;
        2 * r * scale + scale
    }
}

/// The von Mises kernel bank for one configuration.
#[derive(Debug, Clone)]
pub struct ProtoKernels {
    /// `VM_θ` per orientation.
    pub forward: Vec<Grid<f64>>,
    /// `VM_{θ+π}` per orientation.
    pub opposite: Vec<Grid<f64>>,
    /// Grouping kernel `VM_{θ+π} − VM_θ` as a correlation mask, which is
    /// the convolution `(G1 − G1*)` applied to `B1_θ − B2_θ`.
    pub grouping: Vec<Grid<f64>>,
}

impl ProtoKernels {
    pub fn new(config: &ProtoConfig) -> Result<Self> {
        config.validate()?;
        let mut k = ProtoKernels {
            forward: Vec::new(),
            opposite: Vec::new(),
            grouping: Vec::new(),
        };
        for &theta in &config.orientations {
            let f = von_mises_kernel(&VonMisesKernelSpec::new(config.radius, config.rho, theta))?;
            let o = von_mises_kernel(&VonMisesKernelSpec::new(
                config.radius,
                config.rho,
                theta + std::f64::consts::PI,
            ))?;
            k.grouping.push(o.zip_map(&f, |a, b| a - b)?);
            k.forward.push(f);
            k.opposite.push(o);
        }
        Ok(k)
    }

    pub fn side(&self) -> usize {
        self.forward[0].width()
    }
}

/// Binary views fed to the stage: merged `V` and per-polarity `V₊`, `V₋`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtoInput {
    pub view: Mask,
    pub on: Mask,
    pub off: Mask,
}

impl ProtoInput {
    pub fn from_slice(slice: &EventSlice) -> Self {
        Self {
            view: slice.binary_view(),
            on: slice.on_view(),
            off: slice.off_view(),
        }
    }

    /// A bare mask with no polarity: every pixel counts as ON.
    pub fn from_mask(mask: &Mask) -> Self {
        Self {
            view: mask.clone(),
            on: mask.clone(),
            off: Mask::filled(mask.geometry(), false),
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.view.geometry()
    }

    /// The drive of the border-ownership layer: `V₊ + V₋`, or `V` when the
    /// polarity split is off.
    pub fn drive(&self, polarity_split: bool) -> Grid<f64> {
        if polarity_split {
            Grid::from_fn(self.geometry(), |x, y| f64::from(u8::from(self.on[(x, y)]) + u8::from(self.off[(x, y)])))
        } else {
            self.view.to_f64()
        }
    }
}

/// Same-size correlation that also accepts levels smaller than the kernel by
/// zero-extending the input first.
fn correlate(input: &Grid<f64>, kernel: &Grid<f64>) -> Result<Grid<f64>> {
    let (w, h) = (input.width(), input.height());
    if w >= kernel.width() && h >= kernel.height() {
        return conv2d_same(input, kernel);
    }
    let big = Geometry::new(w.max(kernel.width()), h.max(kernel.height()));
    let padded = Grid::from_fn(big, |x, y| if x < w && y < h { input[(x, y)] } else { 0.0 });
    let out = conv2d_same(&padded, kernel)?;
    Ok(Grid::from_fn(input.geometry(), |x, y| out[(x, y)]))
}

fn max_pool(m: &Mask) -> Mask {
    let g = Geometry::new(m.width().div_ceil(2), m.height().div_ceil(2));
    Grid::from_fn(g, |x, y| {
        let mut any = false;
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            any |= m.get((2 * x + dx) as i64, (2 * y + dy) as i64).copied().unwrap_or(false);
        }
        any
    })
}

/// Level 0 is the input; each further level is a 2x2 max-pool of the previous.
pub fn pyramid(input: &ProtoInput, levels: usize) -> Result<Vec<ProtoInput>> {
    if levels == 0 {
        return Err(Error::invalid("pyramid_levels", "must be >= 1"));
    }
    let need = 1usize << (levels - 1);
    let g = input.geometry();
    if g.width < need || g.height < need {
        return Err(Error::invalid(
            "pyramid_levels",
            format!("{}x{} image cannot be halved {} times", g.width, g.height, levels - 1),
        ));
    }
    g.ensure_same(input.on.geometry())?;
    g.ensure_same(input.off.geometry())?;
    let mut out = vec![input.clone()];
    for _ in 1..levels {
        let prev = out.last().expect("level 0 present");
        out.push(ProtoInput {
            view: max_pool(&prev.view),
            on: max_pool(&prev.on),
            off: max_pool(&prev.off),
        });
    }
    Ok(out)
}

/// Rectified `B1_θ` and `B2_θ` per orientation at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderOwnershipResponse {
    pub b1: Vec<Grid<f64>>,
    pub b2: Vec<Grid<f64>>,
}

impl BorderOwnershipResponse {
    pub fn geometry(&self) -> Geometry {
        self.b1[0].geometry()
    }
}

/// Border ownership at one level:
/// `B1_θ = [V (U ⋆ VM_θ − w U ⋆ VM_{θ+π})]₊`, `B2_θ` with θ and θ+π exchanged,
/// where `U` is [`ProtoInput::drive`].
pub fn border_ownership(config: &ProtoConfig, kernels: &ProtoKernels, input: &ProtoInput) -> Result<BorderOwnershipResponse> {
    let drive = input.drive(config.polarity_split);
    let gate = &input.view;
    let mut r = BorderOwnershipResponse {
        b1: Vec::with_capacity(kernels.forward.len()),
        b2: Vec::with_capacity(kernels.forward.len()),
    };
    for (f, o) in kernels.forward.iter().zip(&kernels.opposite) {
        let near = correlate(&drive, f)?;
        let far = correlate(&drive, o)?;
        let side = |a: &Grid<f64>, b: &Grid<f64>| -> Result<Grid<f64>> {
            let diff = a.zip_map(b, |a, b| a - config.w * b)?;
            gate.zip_map(&diff, |g, d| if *g { d.max(0.0) } else { 0.0 })
        };
        r.b1.push(side(&near, &far)?);
        r.b2.push(side(&far, &near)?);
    }
    Ok(r)
}

/// Rectified per-level map `[(G1 − G1*) + (G2 − G2*)]₊`.
pub fn grouping_level(kernels: &ProtoKernels, response: &BorderOwnershipResponse) -> Result<Grid<f64>> {
    if response.b1.len() != kernels.grouping.len() || response.b2.len() != kernels.grouping.len() {
        return Err(Error::invalid("orientations", "response does not cover every orientation"));
    }
    let mut acc = Grid::filled(response.geometry(), 0.0);
    for ((b1, b2), k) in response.b1.iter().zip(&response.b2).zip(&kernels.grouping) {
        let net = b1.zip_map(b2, |a, b| a - b)?;
        acc.add_scaled(&correlate(&net, k)?, 1.0)?;
    }
    Ok(acc.map(|v| v.max(0.0)))
}

/// Saliency at input resolution with its peak.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub map: Grid<f64>,
    /// `(x, y)` of the maximum.
    pub peak: (usize, usize),
    pub max_value: f64,
}

impl SaliencyMap {
    /// Picks the maximum, lowest row then lowest column on ties. An all-zero
    /// map peaks at the image center `(w / 2, h / 2)`.
    pub fn from_map(map: Grid<f64>) -> Self {
        let (mut best, mut at) = (0.0, (map.width() / 2, map.height() / 2));
        for (x, y, v) in map.indexed_iter() {
            if *v > best {
                best = *v;
                at = (x, y);
            }
        }
        Self {
            map,
            peak: at,
            max_value: best,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.map.geometry()
    }

    /// Local maxima above `min_fraction` of the global maximum, strongest
    /// first. A local maximum is not smaller than any pixel in its
    /// `(2r+1)²` window.
    pub fn local_maxima(&self, r: usize, min_fraction: f64) -> Vec<(usize, usize, f64)> {
        let floor = self.max_value * min_fraction;
        let mut out = Vec::new();
        if self.max_value <= 0.0 {
            return out;
        }
        let r = r as i64;
        for (x, y, v) in self.map.indexed_iter() {
            if *v <= 0.0 || *v < floor {
                continue;
            }
            let mut is_max = true;
            'scan: for dy in -r..=r {
                for dx in -r..=r {
                    if let Some(n) = self.map.get(x as i64 + dx, y as i64 + dy) {
                        if *n > *v {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
            }
            if is_max {
                out.push((x, y, *v));
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));
        out
    }
}

/// Nearest-neighbour upsampling of each level to `geometry`, summed.
pub fn combine_levels(levels: &[Grid<f64>], geometry: Geometry) -> Grid<f64> {
    let mut out = Grid::filled(geometry, 0.0);
    for (l, m) in levels.iter().enumerate() {
        for y in 0..geometry.height {
            let src = m.row(y >> l);
            for (x, o) in out.as_mut_slice()[y * geometry.width..(y + 1) * geometry.width].iter_mut().enumerate() {
                *o += src[x >> l];
            }
        }
    }
    out
}

/// Grouping over all levels: per-level maps upsampled and summed, then the peak.
pub fn grouping(kernels: &ProtoKernels, responses: &[BorderOwnershipResponse]) -> Result<SaliencyMap> {
    let first = responses
        .first()
        .ok_or_else(|| Error::invalid("pyramid_levels", "no levels to group"))?;
    let maps = responses
        .iter()
        .map(|r| grouping_level(kernels, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SaliencyMap::from_map(combine_levels(&maps, first.geometry())))
}

/// Stateless saliency of one input: pyramid, border ownership, grouping.
pub fn saliency(config: &ProtoConfig, kernels: &ProtoKernels, input: &ProtoInput) -> Result<SaliencyMap> {
    let levels = pyramid(input, config.pyramid_levels)?;
    let responses = levels
        .iter()
        .map(|l| border_ownership(config, kernels, l))
        .collect::<Result<Vec<_>>>()?;
    grouping(kernels, &responses)
}

/// Saliency of a raw slice, or of an OMS output converted with
/// [`crate::oms::OmsMap::to_slice`].
pub fn saliency_from_events(config: &ProtoConfig, slice: &EventSlice) -> Result<SaliencyMap> {
    let kernels = ProtoKernels::new(config)?;
    saliency(config, &kernels, &ProtoInput::from_slice(slice))
}

/// Stateful stage: border-ownership responses pass through LIF layers whose
/// pre-reset potentials feed the grouping.
#[derive(Debug, Clone)]
pub struct ProtoStage {
    config: ProtoConfig,
    kernels: ProtoKernels,
    geometry: Geometry,
    /// Per level, per orientation: (B1 membrane, B2 membrane).
    membranes: Vec<Vec<(LifGrid, LifGrid)>>,
}

impl ProtoStage {
    pub fn new(config: ProtoConfig, geometry: Geometry) -> Result<Self> {
        let kernels = ProtoKernels::new(&config)?;
        let probe = ProtoInput::from_mask(&Mask::filled(geometry, false));
        let levels = pyramid(&probe, config.pyramid_levels)?;
        let mut membranes = Vec::with_capacity(levels.len());
        for l in &levels {
            let mut per = Vec::new();
            for _ in &config.orientations {
                per.push((
                    LifGrid::with_threshold(l.geometry(), config.tau, DEFAULT_THRESHOLD)?,
                    LifGrid::with_threshold(l.geometry(), config.tau, DEFAULT_THRESHOLD)?,
                ));
            }
            membranes.push(per);
        }
        Ok(Self {
            config,
            kernels,
            geometry,
            membranes,
        })
    }

    pub fn config(&self) -> &ProtoConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn reset(&mut self) {
        for level in &mut self.membranes {
            for (a, b) in level {
                a.reset();
                b.reset();
            }
        }
    }

    /// Advances the stage by `dt` seconds with `input`.
    pub fn step(&mut self, input: &ProtoInput, dt: f64) -> Result<SaliencyMap> {
        self.geometry.ensure_same(input.geometry())?;
        let levels = pyramid(input, self.config.pyramid_levels)?;
        let mut responses = Vec::with_capacity(levels.len());
        for (level, membranes) in levels.iter().zip(&mut self.membranes) {
            let bo = border_ownership(&self.config, &self.kernels, level)?;
            let mut filtered = BorderOwnershipResponse {
                b1: Vec::with_capacity(bo.b1.len()),
                b2: Vec::with_capacity(bo.b2.len()),
            };
            for ((b1, b2), (m1, m2)) in bo.b1.iter().zip(&bo.b2).zip(membranes.iter_mut()) {
                filtered.b1.push(m1.step(b1, dt)?.potential);
                filtered.b2.push(m2.step(b2, dt)?.potential);
            }
            responses.push(filtered);
        }
        grouping(&self.kernels, &responses)
    }
}

/// Writes `t_us x y value` for one salient point.
pub fn write_peak_line<W: Write>(mut out: W, t_us: u64, map: &SaliencyMap) -> Result<()> {
    writeln!(out, "{} {} {} {}", t_us, map.peak.0, map.peak.1, map.max_value)?;
    Ok(())
}
