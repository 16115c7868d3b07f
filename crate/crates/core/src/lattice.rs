//! Uniform time and space grids, linear interpolation with boundary rules,
//! and control meshes.

use crate::error::{invalid, Result};
use crate::market::Interval;

/// Uniform grid `x_m = m Δx`, `m = 0..=J`, on `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    steps: usize,
    max: f64,
    step: f64,
    inv_step: f64,
}

impl SpaceGrid {
    pub fn new(max: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return invalid("space grid needs at least one step");
        }
        if !(max > 0.0 && max.is_finite()) {
            return invalid(format!("space grid extent must be positive, got {max}"));
        }
        let step = max / steps as f64;
        Ok(SpaceGrid {
            steps,
            max,
            step,
            inv_step: steps as f64 / max,
        })
    }

    /// `J`, the number of cells.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    #[inline]
    pub fn node(&self, m: usize) -> f64 {
        m as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |m| self.node(m))
    }

    /// Linear interpolation of nodal `values` at `x`.
    ///
    /// Left of the grid the first cell is extended linearly. Right of `x_max`
    /// the value is `right_plateau` when given, otherwise the last cell is
    /// extended linearly.
    #[inline]
    pub fn interpolate_unchecked(&self, values: &[f64], x: f64, right_plateau: Option<f64>) -> f64 {
        let s = x * self.inv_step;
        if s >= self.steps as f64 {
            if let Some(c) = right_plateau {
                return if s == self.steps as f64 {
                    values[self.steps]
                } else {
                    c
                };
            }
            let k = self.steps - 1;
            let w = s - k as f64;
            return values[k] + w * (values[k + 1] - values[k]);
        }
        if s < 0.0 {
            return values[0] + s * (values[1] - values[0]);
        }
        let k = s as usize;
        let w = s - k as f64;
        if w == 0.0 {
            values[k]
        } else {
            values[k] + w * (values[k + 1] - values[k])
        }
    }
}

/// Checked interpolation: `values` must have one finite entry per node.
pub fn interpolate(
    grid: &SpaceGrid,
    values: &[f64],
    x: f64,
    right_plateau: Option<f64>,
) -> Result<f64> {
    if values.len() != grid.len() {
        return invalid(format!(
            "expected {} nodal values, got {}",
            grid.len(),
            values.len()
        ));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return invalid(format!("nodal value {bad} is not finite"));
    }
    if right_plateau.is_some_and(|c| !c.is_finite()) {
        return invalid("right plateau value is not finite");
    }
    if !x.is_finite() {
        return invalid("interpolation point is not finite");
    }
    Ok(grid.interpolate_unchecked(values, x, right_plateau))
}

/// Uniform time grid `t_n = n h`, `h = T/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    horizon: f64,
}

impl TimeGrid {
    /// `steps = 0` is allowed and describes the terminal time only.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        Ok(TimeGrid { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `h = T/N`; zero-step grids report the horizon.
    pub fn step(&self) -> f64 {
        if self.steps == 0 {
            self.horizon
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.step()
        }
    }
}

/// `count` equally spaced points of `interval`, endpoints included.
///
/// A single point is the midpoint; a degenerate interval yields its one point.
pub fn control_mesh(interval: Interval, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return invalid("control mesh needs at least one point");
    }
    if interval.lo > interval.hi {
        return invalid("control interval is empty");
    }
    if interval.lo == interval.hi {
        return Ok(vec![interval.lo]);
    }
    if count == 1 {
        return Ok(vec![0.5 * (interval.lo + interval.hi)]);
    }
    let n = (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            if k == count - 1 {
                interval.hi
            } else {
                let s = k as f64 / n;
                interval.lo + s * (interval.hi - interval.lo)
            }
        })
        .collect())
}
