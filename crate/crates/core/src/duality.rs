//! Numerical duality gap, a posteriori bounds and the discrete polar property.

use crate::apriori::{delta_allowance, scheme_constant};
use crate::error::{invalid, Result};
use crate::lattice::TimeGrid;
use crate::market::{coefficient_bounds, dual_coefficient_bounds, MarketModel};
use crate::quadrature::{gauss_hermite_rule, QuadratureRule};
use crate::solver::{
    step_rates, tree_size, ChainSpec, Direction, DiscretizationConfig, ValueSurface,
};
use crate::utility::Utility;

/// Dual nodes entering the minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapDomain {
    /// All nodes `y_0 = 0, …, y_J`: the closure of `y > 0`.
    #[default]
    Closed,
    /// Only `y_1, …, y_J`.
    Positive,
}

/// Gap `G(t_n, x_m) = min_j {W̃(t_n, y_j) + x_m y_j} − W(t_n, x_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub time_index: usize,
    pub x: Vec<f64>,
    pub gap: Vec<f64>,
    /// `I(t_n, x_m) = y_{j*}`.
    pub argmin_y: Vec<f64>,
    pub argmin_index: Vec<usize>,
    /// `true` when `j*` is the first or the last node searched.
    pub argmin_on_boundary: Vec<bool>,
}

/// Gap over the closed dual grid; see [`duality_gap_with`].
pub fn duality_gap(primal: &ValueSurface, dual: &ValueSurface, n: usize) -> Result<GapReport> {
    duality_gap_with(primal, dual, n, GapDomain::Closed)
}

/// Exhaustive minimization over the dual nodes of `domain`, smallest `j` on
/// ties.
pub fn duality_gap_with(
    primal: &ValueSurface,
    dual: &ValueSurface,
    n: usize,
    domain: GapDomain,
) -> Result<GapReport> {
    if primal.direction() != Direction::Primal || dual.direction() != Direction::Dual {
        return invalid("duality_gap expects a primal and a dual surface");
    }
    if primal.times() != dual.times() {
        return invalid("primal and dual surfaces use different time grids");
    }
    if n > primal.times().steps() {
        return invalid(format!(
            "time index {n} beyond N = {}",
            primal.times().steps()
        ));
    }
    let grid = primal.grid();
    let dual_grid = dual.grid();
    let w = primal.row(n);
    let w_dual = dual.row(n);
    let first = match domain {
        GapDomain::Closed => 0,
        GapDomain::Positive => 1,
    };
    let last = dual_grid.steps();

    let len = grid.len();
    let mut report = GapReport {
        time_index: n,
        x: Vec::with_capacity(len),
        gap: Vec::with_capacity(len),
        argmin_y: Vec::with_capacity(len),
        argmin_index: Vec::with_capacity(len),
        argmin_on_boundary: Vec::with_capacity(len),
    };
    for (m, x) in grid.nodes().enumerate() {
        let mut best_j = first;
        let mut best = w_dual[first] + x * dual_grid.node(first);
        for (j, &wd) in w_dual.iter().enumerate().skip(first + 1) {
            let v = wd + x * dual_grid.node(j);
            if v < best {
                best = v;
                best_j = j;
            }
        }
        report.x.push(x);
        report.gap.push(best - w[m]);
        report.argmin_y.push(dual_grid.node(best_j));
        report.argmin_index.push(best_j);
        report
            .argmin_on_boundary
            .push(best_j == first || best_j == last);
    }
    Ok(report)
}

/// Inputs of the two-sided a posteriori bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// Scheme constant `C` of the primal lower bound.
    pub c: f64,
    /// Scheme constant `C̃` of the dual upper bound.
    pub c_tilde: f64,
    /// `L_ρ`
    pub lipschitz: f64,
    /// `L̃_ρ`
    pub dual_lipschitz: f64,
    /// `M`
    pub order: usize,
    pub h: f64,
    /// Primal spacing `Δx`.
    pub dx: f64,
    /// Dual spacing `Δy`.
    pub dy: f64,
}

impl BoundConstants {
    /// The explicit a priori constants for a truncated utility: `C` from the
    /// primal coefficient bounds, `C̃` from the dual ones, `L̃_ρ = ρ`.
    pub fn from_model(
        model: &MarketModel,
        utility: &Utility,
        config: &DiscretizationConfig,
    ) -> Result<Self> {
        let Some(trunc) = utility.truncation() else {
            return invalid("bound constants need a Lipschitz-truncated utility");
        };
        let rule = gauss_hermite_rule(config.quadrature_order)?;
        let primal = coefficient_bounds(model)?;
        let dual = dual_coefficient_bounds(model)?;
        Ok(BoundConstants {
            c: scheme_constant(&primal, model.horizon, &rule),
            c_tilde: scheme_constant(&dual, model.horizon, &rule),
            lipschitz: trunc.lipschitz,
            dual_lipschitz: trunc.y_rho(),
            order: config.quadrature_order,
            h: model.horizon / config.time_steps as f64,
            dx: config.x_max / config.space_steps as f64,
            dy: config.y_max / config.dual_space_steps as f64,
        })
    }
}

/// The tail allowance `x ↦ δ(x, ρ)` for a truncated utility.
pub fn default_delta(model: &MarketModel, utility: &Utility) -> Result<impl Fn(f64) -> f64> {
    let Some(trunc) = utility.truncation().copied() else {
        return invalid("the tail allowance needs a Lipschitz-truncated utility");
    };
    let bounds = coefficient_bounds(model)?;
    let horizon = model.horizon;
    let utility = utility.clone();
    Ok(move |x: f64| delta_allowance(x, trunc.rho, trunc.c0, &bounds, horizon, &utility))
}

/// Per-node bounds `lower ≤ v − W ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub x: Vec<f64>,
    pub gap: Vec<f64>,
    pub argmin_y: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `δ(x, ρ)` at each node.
    pub delta: Vec<f64>,
}

/// `lower = −L C (1 + x^{2M}) (h^{(M−1)/2M} + Δx/h)` and
/// `upper = G + L̃ C̃ (1 + I^{2M}) (h^{(M−1)/2M} + Δy/h) + δ(x)`.
pub fn aposteriori_bounds(
    gap: &GapReport,
    constants: &BoundConstants,
    delta: impl Fn(f64) -> f64,
) -> BoundReport {
    let k = constants;
    let two_m = 2 * k.order as i32;
    let rate = k.h.powf((k.order as f64 - 1.0) / (2.0 * k.order as f64));
    let primal_factor = rate + k.dx / k.h;
    let dual_factor = rate + k.dy / k.h;
    let mut report = BoundReport {
        constants: *constants,
        x: gap.x.clone(),
        gap: gap.gap.clone(),
        argmin_y: gap.argmin_y.clone(),
        lower: Vec::with_capacity(gap.x.len()),
        upper: Vec::with_capacity(gap.x.len()),
        delta: Vec::with_capacity(gap.x.len()),
    };
    for ((&x, &g), &i) in gap.x.iter().zip(&gap.gap).zip(&gap.argmin_y) {
        let d = delta(x);
        report
            .lower
            .push(-k.lipschitz * k.c * (1.0 + x.powi(two_m)) * primal_factor);
        report
            .upper
            .push(g + k.dual_lipschitz * k.c_tilde * (1.0 + i.powi(two_m)) * dual_factor + d);
        report.delta.push(d);
    }
    report
}

/// Exact expectation of `X̂_T Ŷ_T` for the coupled chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCheck {
    pub product_expectation: f64,
    /// `E[X̂_T Ŷ_T] − x y`.
    pub defect: f64,
}

/// Enumerates the product chain driven by a common `ζ` per step, from
/// `(t_0, x, y)` over `steps` steps of size `T/steps`.
pub fn polar_property_check(
    model: &MarketModel,
    rule: &QuadratureRule,
    steps: usize,
    x: f64,
    y: f64,
    primal_policy: &[f64],
    dual_policy: &[f64],
) -> Result<PolarCheck> {
    let m = rule.order();
    tree_size(m, steps)?;
    let times = TimeGrid::new(model.horizon, steps)?;
    let primal = ChainSpec {
        model,
        rule,
        times,
        start_step: 0,
        start_state: x,
        policy: primal_policy.to_vec(),
        direction: Direction::Primal,
    };
    let dual = ChainSpec {
        policy: dual_policy.to_vec(),
        direction: Direction::Dual,
        start_state: y,
        ..primal.clone()
    };
    if primal_policy.len() < steps || dual_policy.len() < steps {
        return invalid("policies shorter than the number of steps");
    }
    let primal_rates = step_rates(&primal, steps)?;
    let dual_rates = step_rates(&dual, steps)?;
    let h = times.step();
    let sqrt_h = h.sqrt();

    struct Walk<'a> {
        pr: Vec<(f64, f64)>,
        dr: Vec<(f64, f64)>,
        rule: &'a QuadratureRule,
        h: f64,
        sqrt_h: f64,
    }

    // Depth-first walk; the weight of a leaf is the product of λ along it.
    fn walk(depth: usize, x: f64, y: f64, prob: f64, ctx: &Walk<'_>) -> f64 {
        let Walk {
            pr,
            dr,
            rule,
            h,
            sqrt_h,
        } = ctx;
        if depth == pr.len() {
            return prob * x * y;
        }
        let (mu_x, psi_x) = pr[depth];
        let (mu_y, psi_y) = dr[depth];
        let mut acc = 0.0;
        for (xi, w) in rule.iter() {
            let nx = x + h * x * mu_x + sqrt_h * x * psi_x * xi;
            let ny = y + h * y * mu_y + sqrt_h * y * psi_y * xi;
            acc += walk(depth + 1, nx, ny, prob * w, ctx);
        }
        acc
    }
    let ctx = Walk {
        pr: primal_rates,
        dr: dual_rates,
        rule,
        h,
        sqrt_h,
    };
    let product_expectation = walk(0, x, y, 1.0, &ctx);
    Ok(PolarCheck {
        product_expectation,
        defect: product_expectation - x * y,
    })
}
