//! Error norms, empirical orders and refinement ladders.

use std::time::Instant;

use crate::apriori::{em_bound, gh_bound};
use crate::duality::duality_gap;
use crate::error::{invalid, Result};
use crate::lattice::SpaceGrid;
use crate::market::coefficient_bounds;
use crate::market::MarketModel;
use crate::quadrature::gauss_hermite_rule;
use crate::solver::{solve_dual, solve_primal, DiscretizationConfig, ValueSurface};
use crate::utility::{conjugate_spec, Utility};

/// Discrete norms of an error sample over a window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Norms of `values[m] − reference(x_m)` over the nodes `x_m ∈ [lo, hi]`:
/// `Δx Σ|e|`, `(Δx Σ e²)^{1/2}` and `max |e|`.
pub fn window_norms(
    grid: &SpaceGrid,
    values: &[f64],
    reference: impl Fn(f64) -> f64,
    window: (f64, f64),
) -> Result<WindowNorms> {
    if values.len() != grid.len() {
        return invalid(format!(
            "{} values for a grid of {} nodes",
            values.len(),
            grid.len()
        ));
    }
    let (lo, hi) = window;
    if lo.is_nan() || hi.is_nan() || lo > hi || lo < -1e-12 || hi > grid.max() * (1.0 + 1e-12) {
        return invalid(format!("window [{lo}, {hi}] outside [0, {}]", grid.max()));
    }
    let dx = grid.step();
    let slack = 1e-9 * dx;
    let mut count = 0usize;
    let mut norms = WindowNorms::default();
    let mut sq = 0.0;
    for (m, x) in grid.nodes().enumerate() {
        if x < lo - slack || x > hi + slack {
            continue;
        }
        let e = (values[m] - reference(x)).abs();
        norms.l1 += e;
        sq += e * e;
        norms.linf = norms.linf.max(e);
        count += 1;
    }
    if count == 0 {
        return invalid(format!("no grid node in window [{lo}, {hi}]"));
    }
    norms.l1 *= dx;
    norms.l2 = (sq * dx).sqrt();
    Ok(norms)
}

/// `log₂(v_{k−1}/v_k)` for consecutive entries.
pub fn convergence_orders(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return invalid(format!("orders need positive values, got {v}"));
    }
    Ok(values.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Space-time coupling `J = ⌈N^{num/den}⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub num: u32,
    pub den: u32,
}

impl Default for Coupling {
    /// `11/8`, balancing `h^{3/8}` against `Δx/h`.
    fn default() -> Self {
        Coupling { num: 11, den: 8 }
    }
}

impl Coupling {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return invalid(format!("coupling exponent {num}/{den} must be positive"));
        }
        Ok(Coupling { num, den })
    }

    pub fn exponent(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌈N^{num/den}⌉`, exact in integer arithmetic.
    pub fn space_steps(&self, n: usize) -> Result<usize> {
        let too_large = || {
            crate::Error::ResourceLimit(format!(
                "N = {n} too large for J = N^{}/{}",
                self.num, self.den
            ))
        };
        let guess = (n as f64).powf(self.exponent()).ceil();
        if guess.is_nan() || guess >= 1e15 {
            return Err(too_large());
        }
        let target = (n as u128).checked_pow(self.num).ok_or_else(too_large)?;
        let pow = |j: u128| j.checked_pow(self.den).unwrap_or(u128::MAX);
        let mut j = (guess as u128).max(1);
        while pow(j) < target {
            j += 1;
        }
        while j > 1 && pow(j - 1) >= target {
            j -= 1;
        }
        usize::try_from(j).map_err(|_| too_large())
    }
}

/// `⌈N^{11/8}⌉`, exact in integer arithmetic.
pub fn coupled_space_steps(n: usize) -> Result<usize> {
    Coupling::default().space_steps(n)
}

/// One rung of a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub k: u32,
    /// `N = N₀·2^k`
    pub time_steps: usize,
    /// `J = ⌈N^{11/8}⌉` by default.
    pub space_steps: usize,
    /// `N_a = N_γ = 2^k + 1`
    pub controls: usize,
}

/// Levels `k_min..=k_max` with a fixed quadrature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefinementLadder {
    pub k_min: u32,
    pub k_max: u32,
    pub order: usize,
    /// `N₀`, 4 by default.
    pub base_steps: usize,
    pub coupling: Coupling,
}

impl RefinementLadder {
    /// `N = 4·2^k`, `J = ⌈N^{11/8}⌉`.
    pub fn new(k_min: u32, k_max: u32, order: usize) -> Result<Self> {
        Self::with_coupling(k_min, k_max, order, 4, Coupling::default())
    }

    pub fn with_coupling(
        k_min: u32,
        k_max: u32,
        order: usize,
        base_steps: usize,
        coupling: Coupling,
    ) -> Result<Self> {
        if k_min > k_max {
            return invalid(format!("k_min = {k_min} exceeds k_max = {k_max}"));
        }
        if k_max > 30 {
            return invalid(format!("k_max = {k_max} too large"));
        }
        if base_steps == 0 {
            return invalid("base number of time steps must be positive");
        }
        Ok(RefinementLadder {
            k_min,
            k_max,
            order,
            base_steps,
            coupling,
        })
    }

    pub fn level_at(&self, k: u32) -> Result<Level> {
        let time_steps = self
            .base_steps
            .checked_shl(k)
            .filter(|n| n >> k == self.base_steps)
            .ok_or_else(|| crate::Error::ResourceLimit(format!("N overflows at k = {k}")))?;
        Ok(Level {
            k,
            time_steps,
            space_steps: self.coupling.space_steps(time_steps)?,
            controls: (1usize << k) + 1,
        })
    }

    /// Level `k` of the default ladder.
    pub fn level(k: u32) -> Result<Level> {
        Self::new(k, k, 4)?.level_at(k)
    }

    pub fn levels(&self) -> Result<Vec<Level>> {
        (self.k_min..=self.k_max)
            .map(|k| self.level_at(k))
            .collect()
    }
}

/// What a ladder measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderMode {
    /// Primal values at `t = 0` against a reference over the window.
    Error,
    /// Duality gap at `t = 0` over the window.
    Gap,
}

/// The problem solved on each rung.
pub struct LadderProblem<'a> {
    pub model: &'a MarketModel,
    /// Terminal utility, normally truncated.
    pub utility: &'a Utility,
    pub x_max: f64,
    /// `None` selects the default dual extent.
    pub y_max: Option<f64>,
    pub window: (f64, f64),
    /// Reference `x ↦ v(0, x)`, required in error mode.
    pub reference: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

/// One table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub level: Level,
    pub norms: WindowNorms,
    /// Wall time of the solves in seconds.
    pub seconds: f64,
}

/// Norms per level with empirical orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub mode: LadderMode,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    fn column(&self, f: impl Fn(&WindowNorms) -> f64) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.rows.windows(2) {
            let (a, b) = (f(&w[0].norms), f(&w[1].norms));
            out.push((a > 0.0 && b > 0.0).then(|| (a / b).log2()));
        }
        out.truncate(self.rows.len());
        out
    }

    pub fn orders_l1(&self) -> Vec<Option<f64>> {
        self.column(|n| n.l1)
    }

    pub fn orders_l2(&self) -> Vec<Option<f64>> {
        self.column(|n| n.l2)
    }

    pub fn orders_linf(&self) -> Vec<Option<f64>> {
        self.column(|n| n.linf)
    }
}

/// Primal and dual surfaces at one level.
pub struct LevelSolution {
    pub config: DiscretizationConfig,
    pub primal: ValueSurface,
    pub dual: Option<ValueSurface>,
}

/// Solves one level; the dual is included when `with_dual` is set.
pub fn solve_level(
    problem: &LadderProblem<'_>,
    level: &Level,
    order: usize,
    with_dual: bool,
) -> Result<LevelSolution> {
    let conjugate = conjugate_spec(problem.utility)?;
    let y_max = problem
        .y_max
        .unwrap_or_else(|| crate::solver::default_y_max(problem.x_max, &conjugate));
    let config = DiscretizationConfig::new(
        level.time_steps,
        level.space_steps,
        problem.x_max,
        order,
        level.controls,
        y_max,
    );
    let primal = solve_primal(problem.model, problem.utility, &config)?;
    let dual = if with_dual {
        Some(solve_dual(problem.model, &conjugate, &config)?)
    } else {
        None
    };
    Ok(LevelSolution {
        config,
        primal,
        dual,
    })
}

/// Runs every level of the ladder and tabulates norms at `t = 0`.
pub fn run_ladder(
    problem: &LadderProblem<'_>,
    ladder: &RefinementLadder,
    mode: LadderMode,
) -> Result<ConvergenceTable> {
    if mode == LadderMode::Error && problem.reference.is_none() {
        return invalid("error mode needs a reference solution");
    }
    let mut rows = Vec::new();
    for level in ladder.levels()? {
        let start = Instant::now();
        let sol = solve_level(problem, &level, ladder.order, mode == LadderMode::Gap)?;
        let seconds = start.elapsed().as_secs_f64();
        let grid = sol.primal.grid();
        let norms = match mode {
            LadderMode::Error => {
                let reference = problem.reference.expect("checked above");
                window_norms(grid, sol.primal.row(0), reference, problem.window)?
            }
            LadderMode::Gap => {
                let dual = sol.dual.as_ref().expect("gap mode solves the dual");
                let gap = duality_gap(&sol.primal, dual, 0)?;
                window_norms(grid, &gap.gap, |_| 0.0, problem.window)?
            }
        };
        rows.push(TableRow {
            level,
            norms,
            seconds,
        });
    }
    Ok(ConvergenceTable { mode, rows })
}

/// Figure-style comparison of the a priori estimates at `x = 1` with the
/// measured local error and global gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurvePoint {
    pub h: f64,
    pub em_bound: f64,
    pub gh_bound: f64,
    /// `None` when no reference solution exists.
    pub empirical_error: Option<f64>,
    pub duality_gap: f64,
}

/// For each level: both a priori estimates at `x = 1`, the local `L∞` error
/// (when a reference is given) and the global `L∞` gap.
pub fn bound_curve(
    problem: &LadderProblem<'_>,
    error_window: (f64, f64),
    ladder: &RefinementLadder,
) -> Result<Vec<BoundCurvePoint>> {
    let Some(trunc) = problem.utility.truncation() else {
        return invalid("a priori estimates need a Lipschitz-truncated utility");
    };
    let bounds = coefficient_bounds(problem.model)?;
    let rule = gauss_hermite_rule(ladder.order)?;
    let horizon = problem.model.horizon;
    let mut out = Vec::new();
    for level in ladder.levels()? {
        let h = horizon / level.time_steps as f64;
        let sol = solve_level(problem, &level, ladder.order, true)?;
        let grid = sol.primal.grid();
        let empirical_error = match problem.reference {
            Some(reference) => {
                Some(window_norms(grid, sol.primal.row(0), reference, error_window)?.linf)
            }
            None => None,
        };
        let dual = sol.dual.as_ref().expect("dual requested");
        let gap = duality_gap(&sol.primal, dual, 0)?;
        let gap_norms = window_norms(grid, &gap.gap, |_| 0.0, problem.window)?;
        out.push(BoundCurvePoint {
            h,
            em_bound: em_bound(h, 1.0, trunc.lipschitz, &bounds, horizon),
            gh_bound: gh_bound(
                h,
                1.0,
                ladder.order,
                trunc.lipschitz,
                &bounds,
                horizon,
                &rule,
            )?,
            empirical_error,
            duality_gap: gap_norms.linf,
        });
    }
    Ok(out)
}
