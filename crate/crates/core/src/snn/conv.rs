//! Same-size 2-D correlation with zero padding.
//!
//! `out(x, y) = sum_{i,j} k(i, j) * in(x + i - ax, y + j - ay)` where
//! `(ax, ay) = ((kw - 1) / 2, (kh - 1) / 2)` is the kernel anchor. The kernel
//! is not flipped: a kernel whose weight sits at offset `+d` from the anchor
//! makes each output pixel read the input at `+d`.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Inputs sparser than this go through the scatter path.
const SPARSE_DENSITY: f64 = 0.3;

/// Same-size correlation; picks the dense or scatter path by input density.
pub fn conv2d_same(input: &Grid<f64>, kernel: &Grid<f64>) -> Result<Grid<f64>> {
    check_fit(input, kernel)?;
    if input.density() < SPARSE_DENSITY {
        Ok(scatter(input, kernel))
    } else {
        Ok(dense(input, kernel))
    }
}

/// Forces the row-streaming dense path.
pub fn conv2d_same_dense(input: &Grid<f64>, kernel: &Grid<f64>) -> Result<Grid<f64>> {
    check_fit(input, kernel)?;
    Ok(dense(input, kernel))
}

/// Forces the scatter path, which only visits non-zero input pixels.
pub fn conv2d_same_sparse(input: &Grid<f64>, kernel: &Grid<f64>) -> Result<Grid<f64>> {
    check_fit(input, kernel)?;
    Ok(scatter(input, kernel))
}

fn check_fit(input: &Grid<f64>, kernel: &Grid<f64>) -> Result<()> {
    if kernel.width() > input.width() || kernel.height() > input.height() || kernel.geometry().is_empty() {
        return Err(Error::KernelTooLarge {
            kw: kernel.width(),
            kh: kernel.height(),
            w: input.width(),
            h: input.height(),
        });
    }
    Ok(())
}

fn dense(input: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
    let (w, h) = (input.width() as isize, input.height() as isize);
    let (kw, kh) = (kernel.width() as isize, kernel.height() as isize);
    let (ax, ay) = ((kw - 1) / 2, (kh - 1) / 2);
    let mut out = Grid::new(input.geometry());
    let src = input.as_slice();
    let dst = out.as_mut_slice();
    for y in 0..h {
        let out_row = &mut dst[(y * w) as usize..((y + 1) * w) as usize];
        for j in 0..kh {
            let yy = y + j - ay;
            if yy < 0 || yy >= h {
                continue;
            }
            let in_row = &src[(yy * w) as usize..((yy + 1) * w) as usize];
            for i in 0..kw {
                let k = kernel[(i as usize, j as usize)];
                if k == 0.0 {
                    continue;
                }
                let dx = i - ax;
                // valid x: 0 <= x + dx < w
                let x0 = (-dx).max(0);
                let x1 = (w - dx).min(w);
                if x0 >= x1 {
                    continue;
                }
                let o = &mut out_row[x0 as usize..x1 as usize];
                let s = &in_row[(x0 + dx) as usize..(x1 + dx) as usize];
                for (a, b) in o.iter_mut().zip(s) {
                    *a += k * b;
                }
            }
        }
    }
    out
}

fn scatter(input: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
    let (w, h) = (input.width() as isize, input.height() as isize);
    let (kw, kh) = (kernel.width() as isize, kernel.height() as isize);
    let (ax, ay) = ((kw - 1) / 2, (kh - 1) / 2);
    let mut out = Grid::new(input.geometry());
    let dst = out.as_mut_slice();
    for (u, v, &val) in input.indexed_iter() {
        if val == 0.0 {
            continue;
        }
        let (u, v) = (u as isize, v as isize);
        // input (u, v) feeds output (u - i + ax, v - j + ay)
        for j in 0..kh {
            let y = v - j + ay;
            if y < 0 || y >= h {
                continue;
            }
            let row = (y * w) as usize;
            for i in 0..kw {
                let x = u - i + ax;
                if x < 0 || x >= w {
                    continue;
                }
                dst[row + x as usize] += val * kernel[(i as usize, j as usize)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(input: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
        let (ax, ay) = ((kernel.width() as i64 - 1) / 2, (kernel.height() as i64 - 1) / 2);
        Grid::from_fn(input.geometry(), |x, y| {
            let mut s = 0.0;
            for j in 0..kernel.height() {
                for i in 0..kernel.width() {
                    let xx = x as i64 + i as i64 - ax;
                    let yy = y as i64 + j as i64 - ay;
                    if let Some(v) = input.get(xx, yy) {
                        s += kernel[(i, j)] * v;
                    }
                }
            }
            s
        })
    }

    fn random_grid(rng: &mut ChaCha8Rng, g: Geometry, density: f64) -> Grid<f64> {
        Grid::from_fn(g, |_, _| if rng.random::<f64>() < density { rng.random_range(-1.0..1.0) } else { 0.0 })
    }

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_grid(&mut rng, Geometry::new(9, 7), 1.0);
        let k = Grid::filled(Geometry::new(1, 1), 1.0);
        assert_eq!(conv2d_same(&x, &k).unwrap(), x);
    }

    #[test]
    fn ones_on_impulse() {
        let mut x = Grid::new(Geometry::new(7, 7));
        x[(3, 3)] = 1.0;
        let k = Grid::filled(Geometry::new(3, 3), 1.0);
        let out = conv2d_same(&x, &k).unwrap();
        for (px, py, v) in out.indexed_iter() {
            let inside = (2..=4).contains(&px) && (2..=4).contains(&py);
            assert_eq!(*v, if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn offset_kernel_reads_forward() {
        // weight at offset +1 in x: out(x) = in(x + 1)
        let mut k = Grid::new(Geometry::new(3, 1));
        k[(2, 0)] = 1.0;
        let x = Grid::from_fn(Geometry::new(4, 1), |x, _| x as f64);
        let out = conv2d_same(&x, &k).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn both_paths_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (kw, kh, density) in [(5, 5, 1.0), (8, 8, 0.1), (4, 3, 0.5), (17, 17, 0.05)] {
            let x = random_grid(&mut rng, Geometry::new(19, 23), density);
            let k = random_grid(&mut rng, Geometry::new(kw, kh), 1.0);
            let want = brute(&x, &k);
            for got in [conv2d_same_dense(&x, &k).unwrap(), conv2d_same_sparse(&x, &k).unwrap()] {
                for (a, b) in got.iter().zip(want.iter()) {
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let x = Grid::new(Geometry::new(4, 4));
        let k = Grid::new(Geometry::new(5, 3));
        assert!(matches!(conv2d_same(&x, &k), Err(Error::KernelTooLarge { .. })));
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Geometry::new(16, 16);
        for _ in 0..20 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let x = random_grid(&mut rng, g, 0.4);
            let y = random_grid(&mut rng, g, 0.6);
            let k = random_grid(&mut rng, Geometry::new(5, 5), 1.0);
            let mut mix = x.clone();
            mix.scale(a);
            mix.add_scaled(&y, b).unwrap();
            let lhs = conv2d_same(&mix, &k).unwrap();
            let mut rhs = conv2d_same(&x, &k).unwrap();
            rhs.scale(a);
            rhs.add_scaled(&conv2d_same(&y, &k).unwrap(), b).unwrap();
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                assert!((l - r).abs() <= 1e-10);
            }
        }
    }
}
