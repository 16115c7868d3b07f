//! Controlled wealth dynamics, their duals and the two benchmark markets.
//!
//! Primal wealth follows `dX = X (r + a(b − r) + g(t, a)) dt + X a σ dB` with
//! control `a ∈ A`. The dual state follows
//! `dY = −(r + g̃(t, γ)) Y dt + Y (r − b − γ)/σ dB` with `γ ∈ Γ`, where
//! `g̃(t, ν) = sup_{a ∈ A} {g(t, a) − a ν}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::lattice::control_mesh;
use crate::utility::{golden_section_max, power_utility, Utility};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return invalid(format!("interval [{lo}, {hi}] must be bounded"));
        }
        if lo > hi {
            return invalid(format!("interval [{lo}, {hi}] is empty"));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        // Mesh points are produced by affine interpolation of the endpoints.
        let slack = 1e-12 * (1.0 + self.lo.abs().max(self.hi.abs()));
        v >= self.lo - slack && v <= self.hi + slack
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A time-dependent scalar coefficient.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    TimeDependent(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::TimeDependent(_) => f.write_str("TimeDependent"),
        }
    }
}

impl Coefficient {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::TimeDependent(f) => f(t),
        }
    }
}

/// Parameters of the borrowing/short-selling friction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuocoLiuParams {
    pub r: f64,
    pub big_r: f64,
    pub iota: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

/// The friction nonlinearity `g(t, a)`.
#[derive(Clone)]
pub enum Friction {
    None,
    CuocoLiu(CuocoLiuParams),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Friction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Friction::None => f.write_str("None"),
            Friction::CuocoLiu(p) => f.debug_tuple("CuocoLiu").field(p).finish(),
            Friction::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Friction {
    #[inline]
    pub fn at(&self, t: f64, a: f64) -> f64 {
        match self {
            Friction::None => 0.0,
            Friction::CuocoLiu(c) => {
                let short = (-a).max(0.0);
                let long = a.max(0.0);
                -c.r * (1.0 + c.iota * c.lambda_minus) * short
                    - (c.big_r - c.r) * (1.0 - long - c.iota * c.lambda_minus * short)
            }
            Friction::Custom(g) => g(t, a),
        }
    }
}

/// Number of points in the dense control scan behind `g̃`.
const G_TILDE_MESH: usize = 2001;
/// Number of time samples used when checking or bounding coefficients.
const TIME_SAMPLES: usize = 11;
const BOUNDS_SPACING: f64 = 1e-4;

/// Coefficients, control sets and horizon of a one-asset market.
#[derive(Debug, Clone)]
pub struct MarketModel {
    pub r: Coefficient,
    pub b: Coefficient,
    pub sigma: Coefficient,
    pub g: Friction,
    /// Primal control set `A`.
    pub controls: Interval,
    /// Dual control truncation `Γ`.
    pub dual_controls: Interval,
    pub horizon: f64,
    g_tilde_mesh: Vec<f64>,
}

impl MarketModel {
    /// Builds a model and checks `0 ∈ A`, ellipticity and concavity of `g` on
    /// sampled grids.
    pub fn new(
        r: Coefficient,
        b: Coefficient,
        sigma: Coefficient,
        g: Friction,
        controls: Interval,
        dual_controls: Interval,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if !controls.contains(0.0) {
            return invalid(format!(
                "control set [{}, {}] must contain 0",
                controls.lo, controls.hi
            ));
        }
        let g_tilde_mesh = control_mesh(controls, G_TILDE_MESH)?;
        let model = MarketModel {
            r,
            b,
            sigma,
            g,
            controls,
            dual_controls,
            horizon,
            g_tilde_mesh,
        };
        let eta = model.ellipticity();
        if eta.is_nan() || eta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "volatility must be uniformly elliptic, min sigma^2 = {eta}"
            )));
        }
        model.check_concave_friction()?;
        Ok(model)
    }

    fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..TIME_SAMPLES).map(move |k| self.horizon * k as f64 / (TIME_SAMPLES - 1) as f64)
    }

    /// Smallest sampled `σ(t)²`.
    pub fn ellipticity(&self) -> f64 {
        self.sample_times()
            .map(|t| self.sigma.at(t).powi(2))
            .fold(f64::INFINITY, f64::min)
    }

    fn check_concave_friction(&self) -> Result<()> {
        if matches!(self.g, Friction::None) {
            return Ok(());
        }
        let mesh = &self.g_tilde_mesh;
        if mesh.len() < 3 {
            return Ok(());
        }
        for t in self.sample_times() {
            for w in mesh.windows(3) {
                let second = self.g.at(t, w[0]) - 2.0 * self.g.at(t, w[1]) + self.g.at(t, w[2]);
                if second > 1e-8 {
                    return invalid(format!(
                        "friction g(t, .) is not concave near a = {} at t = {t}",
                        w[1]
                    ));
                }
            }
        }
        Ok(())
    }

    /// Growth rate `r + a(b − r) + g(t, a)`, without the control check.
    #[inline]
    pub fn primal_drift_rate(&self, t: f64, a: f64) -> f64 {
        let r = self.r.at(t);
        r + a * (self.b.at(t) - r) + self.g.at(t, a)
    }

    /// Volatility rate `a σ(t)`, without the control check.
    #[inline]
    pub fn primal_vol_rate(&self, t: f64, a: f64) -> f64 {
        a * self.sigma.at(t)
    }

    /// Dual growth rate `−(r + g̃(t, γ))` given a precomputed `g̃`.
    #[inline]
    pub fn dual_drift_rate(&self, t: f64, g_tilde: f64) -> f64 {
        -(self.r.at(t) + g_tilde)
    }

    /// Dual volatility rate `(r − b − γ)/σ(t)`.
    #[inline]
    pub fn dual_vol_rate(&self, t: f64, gamma: f64) -> f64 {
        let s = self.sigma.at(t);
        (self.r.at(t) - self.b.at(t) - gamma) * s / (s * s)
    }

    fn check_control(&self, a: f64) -> Result<()> {
        if self.controls.contains(a) {
            Ok(())
        } else {
            invalid(format!(
                "control {a} outside A = [{}, {}]",
                self.controls.lo, self.controls.hi
            ))
        }
    }

    fn check_dual_control(&self, gamma: f64) -> Result<()> {
        if self.dual_controls.contains(gamma) {
            Ok(())
        } else {
            invalid(format!(
                "dual control {gamma} outside Gamma = [{}, {}]",
                self.dual_controls.lo, self.dual_controls.hi
            ))
        }
    }

    /// `μ(t, x, a) = x (r + a(b − r) + g(t, a))`.
    pub fn primal_drift(&self, t: f64, x: f64, a: f64) -> Result<f64> {
        self.check_control(a)?;
        Ok(x * self.primal_drift_rate(t, a))
    }

    /// `ψ(t, x, a) = x a σ(t)`.
    pub fn primal_vol(&self, t: f64, x: f64, a: f64) -> Result<f64> {
        self.check_control(a)?;
        Ok(x * self.primal_vol_rate(t, a))
    }

    pub fn dual_drift(&self, t: f64, y: f64, gamma: f64) -> Result<f64> {
        self.check_dual_control(gamma)?;
        let gt = self.g_tilde_dense(t, gamma);
        Ok(y * self.dual_drift_rate(t, gt))
    }

    pub fn dual_vol(&self, t: f64, y: f64, gamma: f64) -> Result<f64> {
        self.check_dual_control(gamma)?;
        if self.sigma.at(t) == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ellipticity violated: sigma({t}) = 0"
            )));
        }
        Ok(y * self.dual_vol_rate(t, gamma))
    }

    /// `g̃(t, ν)` on the model's internal dense control mesh.
    pub fn g_tilde_dense(&self, t: f64, nu: f64) -> f64 {
        g_tilde_unchecked(self, t, nu, &self.g_tilde_mesh)
    }
}

/// `g̃(t, ν) = sup_{a ∈ A} {g(t, a) − a ν}`: a scan over `control_mesh`
/// followed by golden-section refinement on the bracketing cells.
pub fn g_tilde(model: &MarketModel, t: f64, nu: f64, control_mesh: &[f64]) -> Result<f64> {
    if control_mesh.is_empty() {
        return invalid("empty control mesh for g_tilde");
    }
    Ok(g_tilde_unchecked(model, t, nu, control_mesh))
}

fn g_tilde_unchecked(model: &MarketModel, t: f64, nu: f64, mesh: &[f64]) -> f64 {
    let objective = |a: f64| model.g.at(t, a) - a * nu;
    let mut best = 0;
    let mut best_val = objective(mesh[0]);
    for (k, &a) in mesh.iter().enumerate().skip(1) {
        let v = objective(a);
        if v > best_val {
            best = k;
            best_val = v;
        }
    }
    if mesh.len() < 2 {
        return best_val;
    }
    let lo = mesh[best.saturating_sub(1)];
    let hi = mesh[(best + 1).min(mesh.len() - 1)];
    let (_, refined) = golden_section_max(&objective, lo, hi);
    best_val.max(refined)
}

/// Constant-coefficient market with `g ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonParams {
    pub p: f64,
    pub r: f64,
    pub b: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl Default for MertonParams {
    fn default() -> Self {
        MertonParams {
            p: 0.5,
            r: 0.8,
            b: 1.2,
            sigma: 1.0,
            horizon: 0.5,
        }
    }
}

/// The Merton market with `A = [−1, 1]` and `Γ = {0}`.
pub fn merton_model(params: &MertonParams) -> Result<MarketModel> {
    merton_model_with_controls(params, Interval::new(-1.0, 1.0)?, Interval::point(0.0))
}

pub fn merton_model_with_controls(
    params: &MertonParams,
    controls: Interval,
    dual_controls: Interval,
) -> Result<MarketModel> {
    if params.sigma == 0.0 {
        return invalid("Merton volatility must be nonzero");
    }
    MarketModel::new(
        Coefficient::Constant(params.r),
        Coefficient::Constant(params.b),
        Coefficient::Constant(params.sigma),
        Friction::None,
        controls,
        dual_controls,
        params.horizon,
    )
}

/// Closed-form Merton value function for power utility.
#[derive(Debug, Clone)]
pub struct MertonSolution {
    params: MertonParams,
    utility: Utility,
}

impl MertonSolution {
    pub fn new(params: &MertonParams) -> Result<Self> {
        if params.sigma == 0.0 {
            return invalid("Merton volatility must be nonzero");
        }
        Ok(MertonSolution {
            params: *params,
            utility: power_utility(params.p)?,
        })
    }

    /// `a* = (b − r) / (σ² (1 − p))`.
    pub fn optimal_control(&self) -> f64 {
        let MertonParams { p, r, b, sigma, .. } = self.params;
        (b - r) / (sigma * sigma * (1.0 - p))
    }

    /// Exponential growth rate of `E[X_T^p]` under `a*`, per unit time.
    pub fn growth_rate(&self) -> f64 {
        let MertonParams { p, r, b, sigma, .. } = self.params;
        let a = self.optimal_control();
        p * (a * (b - r) + r - 0.5 * a * a * (1.0 - p) * sigma * sigma)
    }

    /// `v` at time-to-maturity `tau`.
    pub fn value(&self, tau: f64, x: f64) -> f64 {
        (tau * self.growth_rate()).exp() * self.utility.evaluate(x)
    }
}

/// Closed-form optimal Merton fraction.
pub fn merton_optimal_control(params: &MertonParams) -> Result<f64> {
    Ok(MertonSolution::new(params)?.optimal_control())
}

/// Closed-form Merton value at time-to-maturity `tau`.
pub fn merton_closed_form(params: &MertonParams, tau: f64, x: f64) -> Result<f64> {
    Ok(MertonSolution::new(params)?.value(tau, x))
}

/// Market with borrowing and short-selling frictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuocoLiuMarket {
    pub p: f64,
    pub r: f64,
    pub big_r: f64,
    pub b: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub iota: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl Default for CuocoLiuMarket {
    fn default() -> Self {
        CuocoLiuMarket {
            p: 0.5,
            r: 0.8,
            big_r: 1.0,
            b: 1.2,
            sigma: 0.5,
            horizon: 0.5,
            iota: 0.5,
            lambda_plus: 1.0,
            lambda_minus: 1.0,
        }
    }
}

/// Builds the friction market: `A = [−1/λ₋, 1/λ₊]`, `Γ = [−1, 1]`.
///
/// `g(0) = −(R − r)` is nonzero in this model; the `g(t, 0) = 0` condition is
/// not enforced.
pub fn cuoco_liu_model(params: &CuocoLiuMarket) -> Result<MarketModel> {
    let c = params;
    if c.lambda_minus.is_nan() || c.lambda_minus <= 0.0 {
        return invalid("lambda_minus must be positive for a bounded control set");
    }
    if !(c.lambda_plus > 0.0 && c.lambda_plus <= 1.0) {
        return invalid("lambda_plus must lie in (0, 1]");
    }
    if c.big_r < c.r {
        return invalid(format!("borrowing rate R = {} below r = {}", c.big_r, c.r));
    }
    if !(0.0..=1.0).contains(&c.iota) {
        return invalid(format!("iota must lie in [0, 1], got {}", c.iota));
    }
    MarketModel::new(
        Coefficient::Constant(c.r),
        Coefficient::Constant(c.b),
        Coefficient::Constant(c.sigma),
        Friction::CuocoLiu(CuocoLiuParams {
            r: c.r,
            big_r: c.big_r,
            iota: c.iota,
            lambda_plus: c.lambda_plus,
            lambda_minus: c.lambda_minus,
        }),
        Interval::new(-1.0 / c.lambda_minus, 1.0 / c.lambda_plus)?,
        Interval::new(-1.0, 1.0)?,
        c.horizon,
    )
}

/// Growth and Lipschitz constants of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    /// `sup |r + a(b − r) + g(t, a)|`.
    pub c_mu: f64,
    /// `sup |a σ(t)|`.
    pub c_psi: f64,
    /// Hölder-1/2 constant of `r`, `b`, `σ` in time.
    pub k0: f64,
    /// Lipschitz constant of `g` in the control (and Hölder-1/2 in time).
    pub k1: f64,
    /// `sup |r + a(b − r) + g − a²σ²/2|`, the drift of `log X`.
    pub log_drift: f64,
}

/// Evaluates the coefficient bounds by dense sampling of `A` (spacing 1e-4)
/// and of `[0, T]`.
pub fn coefficient_bounds(model: &MarketModel) -> Result<CoefficientBounds> {
    let a = model.controls;
    if !(a.lo.is_finite() && a.hi.is_finite()) {
        return invalid("coefficient bounds need a bounded control set");
    }
    let count = ((a.width() / BOUNDS_SPACING).ceil() as usize + 1).max(1);
    let mesh = control_mesh(a, count)?;
    let times: Vec<f64> = model.sample_times().collect();

    let mut c_mu: f64 = 0.0;
    let mut c_psi: f64 = 0.0;
    let mut log_drift: f64 = 0.0;
    let mut k1: f64 = 0.0;
    for &t in &times {
        let s = model.sigma.at(t);
        let mut prev: Option<(f64, f64)> = None;
        for &ctl in &mesh {
            let rate = model.primal_drift_rate(t, ctl);
            let vol = ctl * s;
            c_mu = c_mu.max(rate.abs());
            c_psi = c_psi.max(vol.abs());
            log_drift = log_drift.max((rate - 0.5 * vol * vol).abs());
            let gv = model.g.at(t, ctl);
            if let Some((pa, pg)) = prev {
                if ctl > pa {
                    k1 = k1.max((gv - pg).abs() / (ctl - pa));
                }
            }
            prev = Some((ctl, gv));
        }
    }
    let mut k0: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        for &s in &times[i + 1..] {
            let dt = (s - t).abs().sqrt();
            let diff = (model.r.at(t) - model.r.at(s)).abs()
                + (model.b.at(t) - model.b.at(s)).abs()
                + (model.sigma.at(t) - model.sigma.at(s)).abs();
            k0 = k0.max(diff / dt);
            for &ctl in mesh.iter().step_by(100) {
                k1 = k1.max((model.g.at(t, ctl) - model.g.at(s, ctl)).abs() / dt);
            }
        }
    }
    Ok(CoefficientBounds {
        c_mu,
        c_psi,
        k0,
        k1,
        log_drift,
    })
}

/// Growth bounds of the dual coefficients over `Γ`:
/// `C̃_μ = sup |r + g̃(t, γ)|`, `C̃_ψ = sup |(r − b − γ)/σ|`.
pub fn dual_coefficient_bounds(model: &MarketModel) -> Result<CoefficientBounds> {
    let gamma = model.dual_controls;
    let count = ((gamma.width() / 1e-3).ceil() as usize + 1).max(1);
    let mesh = control_mesh(gamma, count)?;
    let mut c_mu: f64 = 0.0;
    let mut c_psi: f64 = 0.0;
    let mut log_drift: f64 = 0.0;
    for t in model.sample_times() {
        for &g in &mesh {
            let drift = model.dual_drift_rate(t, model.g_tilde_dense(t, g));
            let vol = model.dual_vol_rate(t, g);
            c_mu = c_mu.max(drift.abs());
            c_psi = c_psi.max(vol.abs());
            log_drift = log_drift.max((drift - 0.5 * vol * vol).abs());
        }
    }
    Ok(CoefficientBounds {
        c_mu,
        c_psi,
        k0: 0.0,
        k1: 0.0,
        log_drift,
    })
}
