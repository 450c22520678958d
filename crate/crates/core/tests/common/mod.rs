//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use bioattn::grid::{Geometry, Grid, Mask};
use bioattn::snn::{von_mises_kernel, VonMisesKernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(rng: &mut ChaCha8Rng, g: Geometry, p: f64) -> Mask {
    Grid::from_fn(g, |_, _| rng.random_bool(p))
}

pub fn random_grid(rng: &mut ChaCha8Rng, g: Geometry) -> Grid<f64> {
    Grid::from_fn(g, |_, _| rng.random_range(-1.0..1.0))
}

fn at(g: &Grid<f64>, x: i64, y: i64) -> f64 {
    if x < 0 || y < 0 || x >= g.width() as i64 || y >= g.height() as i64 {
        0.0
    } else {
        g[(x as usize, y as usize)]
    }
}

/// Zero-padded same-size correlation, anchor at `(k - 1) / 2`, four nested loops.
pub fn brute_correlate(input: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
    let (ax, ay) = (((kernel.width() - 1) / 2) as i64, ((kernel.height() - 1) / 2) as i64);
    Grid::from_fn(input.geometry(), |x, y| {
        let mut acc = 0.0;
        for j in 0..kernel.height() {
            for i in 0..kernel.width() {
                acc += kernel[(i, j)] * at(input, x as i64 + i as i64 - ax, y as i64 + j as i64 - ay);
            }
        }
        acc
    })
}

/// Zero-padded same-size true convolution (kernel flipped about its anchor).
pub fn brute_convolve(input: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
    let (ax, ay) = (((kernel.width() - 1) / 2) as i64, ((kernel.height() - 1) / 2) as i64);
    Grid::from_fn(input.geometry(), |x, y| {
        let mut acc = 0.0;
        for j in 0..kernel.height() {
            for i in 0..kernel.width() {
                acc += kernel[(i, j)] * at(input, x as i64 - (i as i64 - ax), y as i64 - (j as i64 - ay));
            }
        }
        acc
    })
}

fn pool(m: &Mask) -> Mask {
    Grid::from_fn(Geometry::new(m.width().div_ceil(2), m.height().div_ceil(2)), |x, y| {
        let mut any = false;
        for yy in 2 * y..(2 * y + 2).min(m.height()) {
            for xx in 2 * x..(2 * x + 2).min(m.width()) {
                any |= m[(xx, yy)];
            }
        }
        any
    })
}

/// Saliency computed term by term: B1, B2 per orientation, the four
/// grouping sums G1, G1*, G2, G2* by true convolution, rectified per level,
/// nearest-neighbour upsampled and summed.
pub fn brute_saliency(
    on: &Mask,
    off: &Mask,
    radius: f64,
    rho: f64,
    w: f64,
    orientations: &[f64],
    levels: usize,
) -> Grid<f64> {
    let g = on.geometry();
    let mut out = Grid::filled(g, 0.0);
    let (mut on, mut off) = (on.clone(), off.clone());
    for level in 0..levels {
        if level > 0 {
            on = pool(&on);
            off = pool(&off);
        }
        let lg = on.geometry();
        let view = Grid::from_fn(lg, |x, y| on[(x, y)] || off[(x, y)]);
        let drive = Grid::from_fn(lg, |x, y| on[(x, y)] as u8 as f64 + off[(x, y)] as u8 as f64);
        let mut groups = [Grid::filled(lg, 0.0), Grid::filled(lg, 0.0), Grid::filled(lg, 0.0), Grid::filled(lg, 0.0)];
        for &theta in orientations {
            let vm = von_mises_kernel(&VonMisesKernelSpec::new(radius, rho, theta)).unwrap();
            let vm_pi = von_mises_kernel(&VonMisesKernelSpec::new(radius, rho, theta + std::f64::consts::PI)).unwrap();
            let a = brute_correlate(&drive, &vm);
            let b = brute_correlate(&drive, &vm_pi);
            let b1 = Grid::from_fn(lg, |x, y| if view[(x, y)] { (a[(x, y)] - w * b[(x, y)]).max(0.0) } else { 0.0 });
            let b2 = Grid::from_fn(lg, |x, y| if view[(x, y)] { (b[(x, y)] - w * a[(x, y)]).max(0.0) } else { 0.0 });
            let terms = [
                brute_convolve(&b1, &vm),
                brute_convolve(&b1, &vm_pi),
                brute_convolve(&b2, &vm_pi),
                brute_convolve(&b2, &vm),
            ];
            for (acc, t) in groups.iter_mut().zip(&terms) {
                for (o, v) in acc.as_mut_slice().iter_mut().zip(t.as_slice()) {
                    *o += v;
                }
            }
        }
        let [g1, g1s, g2, g2s] = &groups;
        let s = Grid::from_fn(lg, |x, y| ((g1[(x, y)] - g1s[(x, y)]) + (g2[(x, y)] - g2s[(x, y)])).max(0.0));
        for y in 0..g.height {
            for x in 0..g.width {
                out.as_mut_slice()[y * g.width + x] += s[(x >> level, y >> level)];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Grid<f64>, b: &Grid<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
