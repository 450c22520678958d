use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, Mask};

/// Default firing threshold, with subtract-on-spike reset.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

/// A grid of leaky integrate-and-fire units sharing `tau` and `threshold`.
///
/// Leak is integrated exactly: `v <- v * exp(-dt / tau) + input`.
#[derive(Debug, Clone, PartialEq)]
pub struct LifGrid {
    pub tau: f64,
    pub threshold: f64,
    v: Grid<f64>,
}

/// Result of one [`LifGrid::step`].
#[derive(Debug, Clone)]
pub struct LifStep {
    pub spikes: Mask,
    /// Membrane potential after integration, before the spike reset.
    pub potential: Grid<f64>,
}

impl LifGrid {
    pub fn new(geometry: Geometry, tau: f64) -> Result<Self> {
        Self::with_threshold(geometry, tau, DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(geometry: Geometry, tau: f64, threshold: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid("tau", format!("{tau} must be > 0")));
        }
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::invalid("threshold", format!("{threshold} must be > 0")));
        }
        Ok(Self {
            tau,
            threshold,
            v: Grid::new(geometry),
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.v.geometry()
    }

    pub fn potential(&self) -> &Grid<f64> {
        &self.v
    }

    pub fn set_potential(&mut self, v: Grid<f64>) -> Result<()> {
        self.geometry().ensure_same(v.geometry())?;
        self.v = v;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.v.as_mut_slice().fill(0.0);
    }

    pub fn step(&mut self, input: &Grid<f64>, dt: f64) -> Result<LifStep> {
        self.geometry().ensure_same(input.geometry())?;
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("{dt} must be > 0")));
        }
        let decay = (-dt / self.tau).exp();
        let mut spikes = Mask::new(self.geometry());
        let mut potential = Grid::new(self.geometry());
        let th = self.threshold;
        for (((v, i), s), p) in self
            .v
            .as_mut_slice()
            .iter_mut()
            .zip(input.as_slice())
            .zip(spikes.as_mut_slice())
            .zip(potential.as_mut_slice())
        {
            let mut nv = *v * decay + i;
            if !nv.is_finite() {
                nv = 0.0;
            }
            *p = nv;
            if nv >= th {
                *s = true;
                nv -= th;
            }
            *v = nv;
        }
        Ok(LifStep { spikes, potential })
    }
}
