//! Backward semi-Lagrangian recursions for the primal (sup) and dual (inf)
//! problems, and exact enumeration of the underlying Markov chains.
//!
//! One step of either scheme reads
//!
//! ```text
//! W(t_n, z_m) = opt_c Σ_i λ_i I[W](t_{n+1}, z_m (1 + h μ(t_n, c) + √h ψ(t_n, c) ξ_i))
//! ```
//!
//! with `opt = max` over the primal mesh and `opt = min` over the dual mesh.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lattice::{control_mesh, SpaceGrid, TimeGrid};
use crate::market::MarketModel;
use crate::quadrature::{gauss_hermite_rule, QuadratureRule};
use crate::utility::{Conjugate, Utility};

/// Largest scenario tree enumerated exactly.
pub const MAX_TREE_SIZE: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Primal,
    Dual,
}

/// Grid sizes for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationConfig {
    /// `N`
    pub time_steps: usize,
    /// `J`
    pub space_steps: usize,
    pub x_max: f64,
    /// `M`
    pub quadrature_order: usize,
    /// `N_a`
    pub controls: usize,
    /// `N_γ`
    pub dual_controls: usize,
    pub y_max: f64,
    pub dual_space_steps: usize,
}

/// Default dual extent: the primal extent, or `L_ρ` if that is larger.
pub fn default_y_max(x_max: f64, conjugate: &Conjugate) -> f64 {
    x_max.max(conjugate.support_cutoff())
}

impl DiscretizationConfig {
    /// Primal grid on `[0, x_max]` and a dual grid on `[0, y_max]` with the
    /// same number of cells.
    pub fn new(
        time_steps: usize,
        space_steps: usize,
        x_max: f64,
        quadrature_order: usize,
        controls: usize,
        y_max: f64,
    ) -> Self {
        DiscretizationConfig {
            time_steps,
            space_steps,
            x_max,
            quadrature_order,
            controls,
            dual_controls: controls,
            y_max,
            dual_space_steps: space_steps,
        }
    }

    pub fn space_grid(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.x_max, self.space_steps)
    }

    pub fn dual_grid(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.y_max, self.dual_space_steps)
    }
}

/// Nodal values `(N+1) × (J+1)` of the fully discrete scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: SpaceGrid,
    times: TimeGrid,
    data: Vec<f64>,
    /// Optimal control per node for rows `0..N`.
    controls: Vec<f64>,
    direction: Direction,
    plateau: Option<f64>,
}

impl ValueSurface {
    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Constant used right of the grid, if any.
    pub fn plateau(&self) -> Option<f64> {
        self.plateau
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.grid.len();
        &self.data[n * w..(n + 1) * w]
    }

    /// Argoptimal controls used to produce row `n < N`.
    pub fn control_row(&self, n: usize) -> &[f64] {
        let w = self.grid.len();
        &self.controls[n * w..(n + 1) * w]
    }

    pub fn value(&self, n: usize, m: usize) -> f64 {
        self.row(n)[m]
    }

    /// Interpolated value of row `n` at an arbitrary state.
    pub fn interpolate(&self, n: usize, x: f64) -> f64 {
        self.grid
            .interpolate_unchecked(self.row(n), x, self.plateau)
    }
}

/// Values and argoptimal controls of one backward step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub values: Vec<f64>,
    pub controls: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Generator {
    control: f64,
    drift: f64,
    vol: f64,
}

/// Shared inputs of a backward step.
#[derive(Debug, Clone, Copy)]
pub struct Stepper<'a> {
    pub model: &'a MarketModel,
    pub rule: &'a QuadratureRule,
    pub grid: SpaceGrid,
    /// Time step `h`.
    pub h: f64,
    /// Value used right of the grid; `None` extrapolates linearly.
    pub plateau: Option<f64>,
}

impl Stepper<'_> {
    /// One primal step at time `t` maximizing over `mesh ⊂ A`.
    pub fn primal_step(&self, next: &[f64], t: f64, mesh: &[f64]) -> Result<StepResult> {
        if mesh.is_empty() {
            return invalid("empty primal control mesh");
        }
        let gens: Vec<Generator> = mesh
            .iter()
            .map(|&a| Generator {
                control: a,
                drift: self.model.primal_drift_rate(t, a),
                vol: self.model.primal_vol_rate(t, a),
            })
            .collect();
        self.step(next, t, &gens, Direction::Primal)
    }

    /// One dual step at time `t` minimizing over `mesh ⊂ Γ`.
    pub fn dual_step(&self, next: &[f64], t: f64, mesh: &[f64]) -> Result<StepResult> {
        if mesh.is_empty() {
            return invalid("empty dual control mesh");
        }
        let gens: Vec<Generator> = mesh
            .iter()
            .map(|&gamma| Generator {
                control: gamma,
                drift: self
                    .model
                    .dual_drift_rate(t, self.model.g_tilde_dense(t, gamma)),
                vol: self.model.dual_vol_rate(t, gamma),
            })
            .collect();
        self.step(next, t, &gens, Direction::Dual)
    }

    fn step(
        &self,
        next: &[f64],
        t: f64,
        gens: &[Generator],
        direction: Direction,
    ) -> Result<StepResult> {
        if next.len() != self.grid.len() {
            return invalid(format!(
                "row has {} entries, grid has {} nodes",
                next.len(),
                self.grid.len()
            ));
        }
        if let Some(m) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite value at t = {t}, node {m} of the next row"
            )));
        }
        let sqrt_h = self.h.sqrt();
        let pairs: Vec<(f64, f64)> = (0..self.grid.len())
            .into_par_iter()
            .map(|m| self.node_value(next, t, m, gens, direction, sqrt_h))
            .collect::<Result<_>>()?;
        let (values, controls) = pairs.into_iter().unzip();
        Ok(StepResult { values, controls })
    }

    fn node_value(
        &self,
        next: &[f64],
        t: f64,
        m: usize,
        gens: &[Generator],
        direction: Direction,
        sqrt_h: f64,
    ) -> Result<(f64, f64)> {
        if m == 0 {
            // Zero wealth (or zero state price) is absorbing.
            return Ok((next[0], gens[0].control));
        }
        let x = self.grid.node(m);
        let mut best = f64::NAN;
        let mut best_control = gens[0].control;
        for (k, g) in gens.iter().enumerate() {
            let centre = x + self.h * x * g.drift;
            let spread = sqrt_h * x * g.vol;
            let mut acc = 0.0;
            for (xi, w) in self.rule.iter() {
                acc +=
                    w * self
                        .grid
                        .interpolate_unchecked(next, centre + spread * xi, self.plateau);
            }
            if !acc.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite expectation at t = {t}, node {m}, control {}",
                    g.control
                )));
            }
            let better = match direction {
                Direction::Primal => acc > best,
                Direction::Dual => acc < best,
            };
            if k == 0 || better {
                best = acc;
                best_control = g.control;
            }
        }
        Ok((best, best_control))
    }
}

/// Terminal data for a backward solve.
#[derive(Debug, Clone, Copy)]
pub enum Terminal<'a> {
    Utility(&'a Utility),
    Conjugate(&'a Conjugate),
}

/// Primal solve with terminal row `U` (normally the truncated `U_ρ`).
pub fn solve_primal(
    model: &MarketModel,
    utility: &Utility,
    config: &DiscretizationConfig,
) -> Result<ValueSurface> {
    solve(model, Terminal::Utility(utility), config, Direction::Primal)
}

/// Dual solve with terminal row `Ũ_ρ`.
pub fn solve_dual(
    model: &MarketModel,
    conjugate: &Conjugate,
    config: &DiscretizationConfig,
) -> Result<ValueSurface> {
    solve(
        model,
        Terminal::Conjugate(conjugate),
        config,
        Direction::Dual,
    )
}

/// Sets the terminal row and sweeps backwards for `n = N−1, …, 0`.
pub fn solve(
    model: &MarketModel,
    terminal: Terminal<'_>,
    config: &DiscretizationConfig,
    direction: Direction,
) -> Result<ValueSurface> {
    let times = TimeGrid::new(model.horizon, config.time_steps)?;
    let rule = gauss_hermite_rule(config.quadrature_order)?;
    let (grid, mesh, plateau) = match direction {
        Direction::Primal => (
            config.space_grid()?,
            control_mesh(model.controls, config.controls)?,
            match terminal {
                Terminal::Utility(u) => u
                    .truncation()
                    .filter(|t| config.x_max > t.rho)
                    .map(|t| u.evaluate(t.rho)),
                Terminal::Conjugate(_) => None,
            },
        ),
        Direction::Dual => (
            config.dual_grid()?,
            control_mesh(model.dual_controls, config.dual_controls)?,
            match terminal {
                Terminal::Conjugate(c) if config.y_max >= c.support_cutoff() => {
                    Some(c.evaluate(c.support_cutoff()))
                }
                _ => None,
            },
        ),
    };
    let terminal_row: Vec<f64> = match terminal {
        Terminal::Utility(u) => grid.nodes().map(|x| u.evaluate(x)).collect(),
        Terminal::Conjugate(c) => grid.nodes().map(|y| c.evaluate(y)).collect(),
    };
    sweep(
        model,
        &rule,
        grid,
        times,
        terminal_row,
        &mesh,
        plateau,
        direction,
    )
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    model: &MarketModel,
    rule: &QuadratureRule,
    grid: SpaceGrid,
    times: TimeGrid,
    terminal_row: Vec<f64>,
    mesh: &[f64],
    plateau: Option<f64>,
    direction: Direction,
) -> Result<ValueSurface> {
    let width = grid.len();
    let steps = times.steps();
    let mut data = vec![0.0; (steps + 1) * width];
    let mut controls = vec![0.0; steps * width];
    data[steps * width..].copy_from_slice(&terminal_row);
    let stepper = Stepper {
        model,
        rule,
        grid,
        h: times.step(),
        plateau,
    };
    for n in (0..steps).rev() {
        let t = times.time(n);
        let (head, tail) = data.split_at_mut((n + 1) * width);
        let next = &tail[..width];
        let out = match direction {
            Direction::Primal => stepper.primal_step(next, t, mesh),
            Direction::Dual => stepper.dual_step(next, t, mesh),
        }
        .map_err(|e| match e {
            Error::NumericalFailure(msg) => Error::NumericalFailure(format!("step n = {n}: {msg}")),
            other => other,
        })?;
        head[n * width..].copy_from_slice(&out.values);
        controls[n * width..(n + 1) * width].copy_from_slice(&out.controls);
    }
    Ok(ValueSurface {
        grid,
        times,
        data,
        controls,
        direction,
        plateau,
    })
}

/// Start point and per-step policy of a primal or dual chain.
#[derive(Debug, Clone)]
pub struct ChainSpec<'a> {
    pub model: &'a MarketModel,
    pub rule: &'a QuadratureRule,
    pub times: TimeGrid,
    /// Index `n` of the starting time `t_n`.
    pub start_step: usize,
    pub start_state: f64,
    /// Controls `a_n, a_{n+1}, …` (or `γ_n, …` for the dual chain).
    pub policy: Vec<f64>,
    pub direction: Direction,
}

/// Exact terminal law of the chain after `horizon_steps` steps, as
/// `(state, probability)` pairs in lexicographic branch order.
pub fn enumerate_chain(spec: &ChainSpec<'_>, horizon_steps: usize) -> Result<Vec<(f64, f64)>> {
    let m = spec.rule.order();
    let size = tree_size(m, horizon_steps)?;
    if spec.start_step + horizon_steps > spec.times.steps() {
        return invalid("chain runs past the horizon");
    }
    if spec.policy.len() < horizon_steps {
        return invalid(format!(
            "policy has {} controls, {horizon_steps} steps requested",
            spec.policy.len()
        ));
    }
    let rates = step_rates(spec, horizon_steps)?;
    let h = spec.times.step();
    let sqrt_h = h.sqrt();
    let mut states = Vec::with_capacity(size);
    states.push((spec.start_state, 1.0));
    for &(drift, vol) in &rates {
        let mut next = Vec::with_capacity(states.len() * m);
        for &(x, p) in &states {
            for (xi, w) in spec.rule.iter() {
                next.push((x + h * x * drift + sqrt_h * x * vol * xi, p * w));
            }
        }
        states = next;
    }
    Ok(states)
}

pub(crate) fn tree_size(order: usize, steps: usize) -> Result<usize> {
    let mut size: usize = 1;
    for _ in 0..steps {
        size = size.saturating_mul(order);
        if size > MAX_TREE_SIZE {
            return Err(Error::ResourceLimit(format!(
                "scenario tree with {order}^{steps} leaves exceeds {MAX_TREE_SIZE}"
            )));
        }
    }
    Ok(size)
}

/// `(drift rate, vol rate)` of each step of the chain.
pub(crate) fn step_rates(spec: &ChainSpec<'_>, steps: usize) -> Result<Vec<(f64, f64)>> {
    (0..steps)
        .map(|i| {
            let t = spec.times.time(spec.start_step + i);
            let c = spec.policy[i];
            match spec.direction {
                Direction::Primal => {
                    if !spec.model.controls.contains(c) {
                        return invalid(format!("policy control {c} outside A"));
                    }
                    Ok((
                        spec.model.primal_drift_rate(t, c),
                        spec.model.primal_vol_rate(t, c),
                    ))
                }
                Direction::Dual => {
                    if !spec.model.dual_controls.contains(c) {
                        return invalid(format!("policy control {c} outside Gamma"));
                    }
                    Ok((
                        spec.model
                            .dual_drift_rate(t, spec.model.g_tilde_dense(t, c)),
                        spec.model.dual_vol_rate(t, c),
                    ))
                }
            }
        })
        .collect()
}
