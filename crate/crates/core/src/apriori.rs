//! Explicit constants and a priori error bounds for the Euler–Maruyama and
//! Gauss–Hermite steps, and large-deviation tail bounds for the truncation.

use crate::error::{invalid, Result};
use crate::market::CoefficientBounds;
use crate::quadrature::{moment_defect, odd_double_factorial, QuadratureRule};
use crate::utility::Utility;

/// Terms below this are dropped from the tail sum.
const TAIL_CUTOFF: f64 = 1e-16;
const TAIL_MAX_TERMS: usize = 10_000_000;

/// The constants `K₁ … K₅` for growth bounds `C_μ`, `C_ψ`, horizon `T` and
/// quadrature order `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSet {
    pub c_mu: f64,
    pub c_psi: f64,
    pub horizon: f64,
    pub order: usize,
}

impl ConstantSet {
    pub fn new(bounds: &CoefficientBounds, horizon: f64, order: usize) -> Self {
        ConstantSet {
            c_mu: bounds.c_mu,
            c_psi: bounds.c_psi,
            horizon,
            order,
        }
    }

    /// `K₁ = C_μ² T + C_ψ²`
    pub fn k1(&self) -> f64 {
        self.c_mu * self.c_mu * self.horizon + self.c_psi * self.c_psi
    }

    /// `K₂(ξ) = C_μ² ξ + 4 C_ψ²`
    pub fn k2(&self, xi: f64) -> f64 {
        self.c_mu * self.c_mu * xi + 4.0 * self.c_psi * self.c_psi
    }

    /// `K₃(x) = 3 (x² + 2 K₂(T) T) e^{6 K₂(T) T}`
    pub fn k3(&self, x: f64) -> f64 {
        let t = self.horizon;
        let k2 = self.k2(t);
        3.0 * (x * x + 2.0 * k2 * t) * (6.0 * k2 * t).exp()
    }

    /// `K₄ = 2M C₁ 2^{2M} + M(2M−1) C₁² 2^{2M−2}`, `C₁ = max(C_μ, C_ψ)`.
    pub fn k4(&self) -> f64 {
        let m = self.order as f64;
        let c1 = self.c_mu.max(self.c_psi);
        let p = 2f64.powi(2 * self.order as i32);
        2.0 * m * c1 * p + m * (2.0 * m - 1.0) * c1 * c1 * p / 4.0
    }

    /// `K₅ = (3 + 9 K₁ T e^{3 K₁ T})^{1/2}`
    pub fn k5(&self) -> f64 {
        let t = self.horizon;
        let k1 = self.k1();
        (3.0 + 9.0 * k1 * t * (3.0 * k1 * t).exp()).sqrt()
    }
}

/// Which Euler–Maruyama estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmVariant {
    /// The multiplicative-dynamics estimate with second moments replaced by
    /// `x²`.
    #[default]
    Sharp,
    /// The estimate for general Lipschitz coefficients.
    General,
}

/// How `sup E[X̂^{2M}]` enters the Gauss–Hermite estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentBound {
    /// `≈ x^{2M}`
    #[default]
    Local,
    /// `x^{2M} e^{K₄ T} + K₄ T`
    Full,
}

/// Euler–Maruyama contribution
/// `L (24 K₁ T C_ψ² x² (1 + 4 K₁ T e^{4 K₁ T}))^{1/2} h^{1/2}`.
pub fn em_bound(h: f64, x: f64, lipschitz: f64, bounds: &CoefficientBounds, horizon: f64) -> f64 {
    em_bound_with(h, x, lipschitz, bounds, horizon, EmVariant::Sharp)
}

pub fn em_bound_with(
    h: f64,
    x: f64,
    lipschitz: f64,
    bounds: &CoefficientBounds,
    horizon: f64,
    variant: EmVariant,
) -> f64 {
    let k = ConstantSet::new(bounds, horizon, 2);
    let k1 = k.k1();
    let t = horizon;
    let inner = match variant {
        EmVariant::Sharp => {
            24.0 * k1
                * t
                * bounds.c_psi.powi(2)
                * x
                * x
                * (1.0 + 4.0 * k1 * t * (4.0 * k1 * t).exp())
        }
        EmVariant::General => {
            8.0 * k1
                * (1.0 + 2.0 * k.k2(h))
                * (1.0 + k.k3(x))
                * (1.0 + 8.0 * k1 * t * (8.0 * k1 * t).exp())
        }
    };
    lipschitz * inner.sqrt() * h.sqrt()
}

/// Gauss–Hermite contribution
/// `L K₅ h^{(M−1)/2M} 2^{2M−1}/(2M)! C_ψ^{2M} ((2M−1)!! + defect) (1 + x^{2M})`.
pub fn gh_bound(
    h: f64,
    x: f64,
    order: usize,
    lipschitz: f64,
    bounds: &CoefficientBounds,
    horizon: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    gh_bound_with(
        h,
        x,
        order,
        lipschitz,
        bounds,
        horizon,
        rule,
        MomentBound::Local,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn gh_bound_with(
    h: f64,
    x: f64,
    order: usize,
    lipschitz: f64,
    bounds: &CoefficientBounds,
    horizon: f64,
    rule: &QuadratureRule,
    moments: MomentBound,
) -> Result<f64> {
    if rule.order() != order {
        return invalid(format!(
            "quadrature rule has {} nodes, bound requested for M = {order}",
            rule.order()
        ));
    }
    let k = ConstantSet::new(bounds, horizon, order);
    let two_m = 2 * order as i32;
    let moment = match moments {
        MomentBound::Local => x.abs().powi(two_m),
        MomentBound::Full => {
            let k4 = k.k4();
            x.abs().powi(two_m) * (k4 * horizon).exp() + k4 * horizon
        }
    };
    Ok(lipschitz * gh_factor(&k, rule) * h.powf(rate_exponent(order)) * (1.0 + moment))
}

/// `(M−1)/(2M)`
pub fn rate_exponent(order: usize) -> f64 {
    (order as f64 - 1.0) / (2.0 * order as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `K₅ 2^{2M−1}/(2M)! C_ψ^{2M} ((2M−1)!! + defect)`
fn gh_factor(k: &ConstantSet, rule: &QuadratureRule) -> f64 {
    let m = k.order;
    let two_m = 2 * m as i32;
    k.k5() * 2f64.powi(two_m - 1) / factorial(2 * m)
        * k.c_psi.powi(two_m)
        * (odd_double_factorial(2 * m as i64 - 1) + moment_defect(rule))
}

/// Scheme constant `C` of the bound `L C (1 + x^{2M}) (h^{(M−1)/2M} + Δx/h)`,
/// obtained by dominating both a priori estimates for `h ≤ 1`: the
/// Euler–Maruyama coefficient of `|x| h^{1/2}` plus the Gauss–Hermite
/// coefficient of `(1 + x^{2M}) h^{(M−1)/2M}`.
pub fn scheme_constant(bounds: &CoefficientBounds, horizon: f64, rule: &QuadratureRule) -> f64 {
    let em = em_bound(1.0, 1.0, 1.0, bounds, horizon);
    let k = ConstantSet::new(bounds, horizon, rule.order());
    em + gh_factor(&k, rule)
}

/// Large-deviation bounds on `P[X_T ≥ ρ]` and `P[X_T ≤ c₀/ρ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBounds {
    pub upper_tail: f64,
    pub lower_tail: f64,
}

/// `2 exp(−3/(8γ²T) (log(ρ/x) − μT)²)` for the upper tail and the same with
/// `log(ρx/c₀)` for the lower tail, each clamped at 1.
pub fn tail_bounds(x: f64, rho: f64, c0: f64, mu: f64, gamma: f64, horizon: f64) -> TailBounds {
    if x <= 0.0 {
        return TailBounds {
            upper_tail: 0.0,
            lower_tail: 1.0,
        };
    }
    let scale = 3.0 / (8.0 * gamma * gamma * horizon);
    let bound = |log_ratio: f64| {
        // The bound needs the log-distance to exceed the drift allowance.
        let d = log_ratio - mu * horizon;
        if d <= 0.0 {
            1.0
        } else {
            (2.0 * (-scale * d * d).exp()).min(1.0)
        }
    };
    TailBounds {
        upper_tail: bound((rho / x).ln()),
        lower_tail: bound((rho * x / c0).ln()),
    }
}

/// Truncation allowance `δ(x, ρ) = U(c₀/ρ) P[X_T ≤ c₀/ρ] + U′(ρ) E[X_T 1{X_T ≥ ρ}]`,
/// the tail expectation bounded by `(⌊ρ⌋ + 1) P[X ≥ ⌊ρ⌋] + Σ_{k ≥ ⌊ρ⌋} P[X ≥ k]`.
///
/// `log_bounds` supplies the drift (`log_drift`) and volatility (`c_psi`)
/// bounds of `log X`; `utility` is the untruncated utility.
pub fn delta_allowance(
    x: f64,
    rho: f64,
    c0: f64,
    log_bounds: &CoefficientBounds,
    horizon: f64,
    utility: &Utility,
) -> f64 {
    let mu = log_bounds.log_drift;
    let gamma = log_bounds.c_psi;
    let u = utility.untruncated();
    if x <= 0.0 {
        return u.evaluate(c0 / rho);
    }
    if gamma == 0.0 {
        // Deterministic log-wealth within [log x − μT, log x + μT].
        let lo = x * (-mu * horizon).exp();
        let hi = x * (mu * horizon).exp();
        let low_part = if lo <= c0 / rho {
            u.evaluate(c0 / rho)
        } else {
            0.0
        };
        let high_part = if hi >= rho {
            u.derivative(rho) * hi
        } else {
            0.0
        };
        return low_part + high_part;
    }
    let lower = tail_bounds(x, rho, c0, mu, gamma, horizon).lower_tail;
    let slope = u.derivative(rho);
    let tail_mean = if slope == 0.0 {
        0.0
    } else {
        let k0 = rho.floor().max(1.0);
        let p = |k: f64| tail_bounds(x, k, c0, mu, gamma, horizon).upper_tail;
        let mut sum = (k0 + 1.0) * p(k0);
        let mut k = k0;
        for _ in 0..TAIL_MAX_TERMS {
            let term = p(k);
            sum += term;
            if term < TAIL_CUTOFF {
                break;
            }
            k += 1.0;
        }
        sum
    };
    u.evaluate(c0 / rho) * lower + slope * tail_mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite_rule;
    use crate::utility::power_utility;

    fn test1_bounds() -> CoefficientBounds {
        CoefficientBounds {
            c_mu: 1.2,
            c_psi: 1.0,
            k0: 0.0,
            k1: 0.0,
            log_drift: 0.88,
        }
    }

    #[test]
    fn constants_for_merton() {
        let k = ConstantSet::new(&test1_bounds(), 0.5, 4);
        assert!((k.k1() - 1.72).abs() < 1e-12);
        assert!((k.k2(0.5) - 4.72).abs() < 1e-12);
        // (3 + 9·0.86·e^{2.58})^{1/2}
        assert!((k.k5() - 10.25407).abs() < 1e-4, "{}", k.k5());
        // 2·4·1.2·256 + 4·7·1.44·64
        assert!((k.k4() - (2457.6 + 2580.48)).abs() < 1e-9);
        assert!(k.k3(2.0) > k.k3(1.0));
    }

    #[test]
    fn em_bound_values() {
        let b = test1_bounds();
        let c = em_bound(1.0, 1.0, 3.0, &b, 0.5);
        assert!((c / 141.8 - 1.0).abs() < 0.01, "{c}");
        assert_eq!(em_bound(0.01, 0.0, 3.0, &b, 0.5), 0.0);
        let r = em_bound(0.01, 1.3, 3.0, &b, 0.5) / em_bound(0.04, 1.3, 3.0, &b, 0.5);
        assert!((r - 0.5).abs() < 1e-12);
        let g = em_bound_with(0.01, 1.0, 3.0, &b, 0.5, EmVariant::General);
        assert!(g > em_bound(0.01, 1.0, 3.0, &b, 0.5));
    }

    #[test]
    fn gh_bound_values() {
        let b = test1_bounds();
        let rule = gauss_hermite_rule(4).unwrap();
        let c = gh_bound(1.0, 1.0, 4, 3.0, &b, 0.5, &rule).unwrap();
        assert!((c / 25.2 - 1.0).abs() < 0.01, "{c}");
        assert!(gh_bound(1.0, 1.0, 3, 3.0, &b, 0.5, &rule).is_err());
        let rule2 = gauss_hermite_rule(2).unwrap();
        let at_zero = gh_bound(0.25, 0.0, 2, 1.0, &b, 0.5, &rule2).unwrap();
        let k5 = ConstantSet::new(&b, 0.5, 2).k5();
        let want = k5 * 0.25f64.powf(0.25) * 8.0 / 24.0 * (3.0 + 2.0);
        assert!((at_zero - want).abs() < 1e-12);
        let full = gh_bound_with(0.25, 1.0, 2, 1.0, &b, 0.5, &rule2, MomentBound::Full).unwrap();
        assert!(full > gh_bound(0.25, 1.0, 2, 1.0, &b, 0.5, &rule2).unwrap());
    }

    #[test]
    fn tails() {
        let t = tail_bounds(1.0, 2f64.exp(), 8.0, 0.0, 1.0, 0.5);
        assert!((t.upper_tail - 2.0 * (-3f64).exp()).abs() < 1e-12);
        let t = tail_bounds(1.0, 1.0, 8.0, 0.0, 1.0, 0.5);
        assert_eq!(t.upper_tail, 1.0);
        let t = tail_bounds(1.0, 1e12, 8.0, 0.0, 1.0, 0.5);
        assert!(t.upper_tail < 1e-100 && t.lower_tail < 1e-80);
    }

    #[test]
    fn delta_behaviour() {
        let u = power_utility(0.5).unwrap();
        let b = test1_bounds();
        let near_zero = delta_allowance(1e-9, 18.0, 8.0, &b, 0.5, &u);
        assert!((near_zero - u.evaluate(8.0 / 18.0)).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for rho in [18.0, 30.0, 60.0, 120.0, 500.0] {
            let d = delta_allowance(10.0, rho, 8.0, &b, 0.5, &u);
            assert!(d <= prev + 1e-15, "rho={rho}");
            prev = d;
        }
        let flat =
            crate::utility::Utility::custom(|x| x.min(1.0), |x| if x < 1.0 { 1.0 } else { 0.0 });
        let d = delta_allowance(5.0, 18.0, 8.0, &b, 0.5, &flat);
        assert!(d <= flat.evaluate(8.0 / 18.0));
    }
}
