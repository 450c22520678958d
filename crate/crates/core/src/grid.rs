//! Dense row-major 2-D grids.
//!
//! Every image-like quantity in the pipeline (event counts, binary maps,
//! membrane potentials, kernels, saliency) is a [`Grid`]. Indexing is
//! `grid[(x, y)]` with `x` the column and `y` the row; row 0 is the top of
//! the image.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
}

impl Geometry {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub const fn len(&self) -> usize {
        self.width * self.height
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub(crate) fn ensure_same(&self, other: Geometry) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }
}

/// A `width x height` array stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Binary map, e.g. the event-presence view or an OMS mask.
pub type Mask = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(geometry: Geometry, value: T) -> Self {
        Self {
            width: geometry.width,
            height: geometry.height,
            data: vec![value; geometry.len()],
        }
    }
}

impl<T: Clone + Default> Grid<T> {
    pub fn new(geometry: Geometry) -> Self {
        Self::filled(geometry, T::default())
    }
}

impl<T> Grid<T> {
    /// Wraps row-major data. Fails when the length does not match.
    pub fn from_vec(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Format(format!(
                "grid data has {} elements, geometry {}x{} needs {}",
                data.len(),
                geometry.width,
                geometry.height,
                geometry.len()
            )));
        }
        Ok(Self {
            width: geometry.width,
            height: geometry.height,
            data,
        })
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(geometry.len());
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                data.push(f(x, y));
            }
        }
        Self {
            width: geometry.width,
            height: geometry.height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.width, self.height)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn get(&self, x: i64, y: i64) -> Option<&T> {
        if self.geometry().contains(x, y) {
            Some(&self.data[y as usize * self.width + x as usize])
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn indexed_iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % w, i / w, v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V>(&self, other: &Grid<U>, mut f: impl FnMut(&T, &U) -> V) -> Result<Grid<V>> {
        self.geometry().ensure_same(other.geometry())?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self
    where
        T: Clone,
    {
        Grid::from_fn(self.geometry(), |x, y| self[(self.width - 1 - x, y)].clone())
    }

    /// Rotate by 90 degrees counter-clockwise (as displayed, row 0 on top).
    pub fn rotate_ccw(&self) -> Self
    where
        T: Clone,
    {
        let g = Geometry::new(self.height, self.width);
        Grid::from_fn(g, |x, y| self[(self.width - 1 - y, x)].clone())
    }
}

impl Grid<f64> {
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &Grid<f64>, k: f64) -> Result<()> {
        self.geometry().ensure_same(other.geometry())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    /// Fraction of entries that are non-zero.
    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|v| **v != 0.0).count() as f64 / self.data.len() as f64
    }
}

impl Mask {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn to_f64(&self) -> Grid<f64> {
        self.map(|b| if *b { 1.0 } else { 0.0 })
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &T {
        debug_assert!(x < self.width && y < self.height);
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        debug_assert!(x < self.width && y < self.height);
        &mut self.data[y * self.width + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_column_row() {
        let g = Grid::from_fn(Geometry::new(3, 2), |x, y| x + 10 * y);
        assert_eq!(g[(2, 1)], 12);
        assert_eq!(g.row(1), &[10, 11, 12]);
        assert_eq!(g.get(3, 0), None);
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let g = Grid::from_fn(Geometry::new(4, 3), |x, y| (x * 7 + y * 3) as f64);
        let r = g.rotate_ccw().rotate_ccw().rotate_ccw().rotate_ccw();
        assert_eq!(g, r);
        assert_eq!(g.rotate_ccw().geometry(), Geometry::new(3, 4));
    }

    #[test]
    fn rotate_moves_top_right_to_top_left() {
        let mut g = Grid::new(Geometry::new(4, 4));
        g[(3, 0)] = 1.0;
        assert_eq!(g.rotate_ccw()[(0, 0)], 1.0);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(Geometry::new(2, 2), vec![0u8; 3]).is_err());
    }
}
