//! Utility functions, their Lipschitz truncation and convex conjugates.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default truncation level.
pub const DEFAULT_RHO: f64 = 18.0;
/// Default constant fixing the left kink at `x_ρ = c₀/ρ`.
pub const DEFAULT_C0: f64 = 8.0;

/// The untruncated utility.
#[derive(Clone)]
pub enum BaseUtility {
    /// `U(x) = x^p / p` with `0 < p < 1`.
    Power { p: f64 },
    /// A user supplied concave, nondecreasing utility with its derivative.
    Custom {
        value: ScalarFn,
        derivative: ScalarFn,
    },
}

impl fmt::Debug for BaseUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseUtility::Power { p } => f.debug_struct("Power").field("p", p).finish(),
            BaseUtility::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl BaseUtility {
    fn value(&self, x: f64) -> f64 {
        match self {
            BaseUtility::Power { p } => x.powf(*p) / p,
            BaseUtility::Custom { value, .. } => value(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            BaseUtility::Power { p } => x.powf(p - 1.0),
            BaseUtility::Custom { derivative, .. } => derivative(x),
        }
    }
}

/// Parameters of the three-piece Lipschitz modification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub rho: f64,
    pub c0: f64,
    /// Left kink `c₀/ρ`.
    pub x_rho: f64,
    /// Slope of the linear piece on `[0, x_ρ]`, the Lipschitz constant.
    pub lipschitz: f64,
}

impl Truncation {
    /// The right kink `y_ρ = ρ`, which is also the Lipschitz constant of the
    /// conjugate.
    pub fn y_rho(&self) -> f64 {
        self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Power,
    TruncatedPower,
    Custom,
}

/// A terminal utility, optionally Lipschitz-truncated.
#[derive(Debug, Clone)]
pub struct Utility {
    base: BaseUtility,
    truncation: Option<Truncation>,
}

/// Power utility `x^p / p`.
pub fn power_utility(p: f64) -> Result<Utility> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("power exponent must lie in (0, 1), got {p}"));
    }
    Ok(Utility {
        base: BaseUtility::Power { p },
        truncation: None,
    })
}

impl Utility {
    /// Wraps a custom utility given by its value and derivative.
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Utility {
            base: BaseUtility::Custom {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
            },
            truncation: None,
        }
    }

    pub fn kind(&self) -> UtilityKind {
        match (&self.base, self.truncation) {
            (BaseUtility::Power { .. }, None) => UtilityKind::Power,
            (BaseUtility::Power { .. }, Some(_)) => UtilityKind::TruncatedPower,
            (BaseUtility::Custom { .. }, _) => UtilityKind::Custom,
        }
    }

    /// The power exponent, for power-family utilities.
    pub fn exponent(&self) -> Option<f64> {
        match self.base {
            BaseUtility::Power { p } => Some(p),
            BaseUtility::Custom { .. } => None,
        }
    }

    pub fn truncation(&self) -> Option<&Truncation> {
        self.truncation.as_ref()
    }

    /// The utility with any truncation removed.
    pub fn untruncated(&self) -> Utility {
        Utility {
            base: self.base.clone(),
            truncation: None,
        }
    }

    /// Lipschitz constant, if the utility is truncated.
    pub fn lipschitz(&self) -> Option<f64> {
        self.truncation.map(|t| t.lipschitz)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self.truncation {
            None => self.base.value(x),
            Some(t) => {
                if x <= t.x_rho {
                    self.base.value(0.0) + t.lipschitz * x
                } else if x <= t.rho {
                    self.base.value(x)
                } else {
                    self.base.value(t.rho)
                }
            }
        }
    }

    /// `U′(x)` for `x > 0`; the right derivative at the kinks of a truncated
    /// utility.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.truncation {
            None => self.base.derivative(x),
            Some(t) => {
                if x < t.x_rho {
                    t.lipschitz
                } else if x < t.rho {
                    self.base.derivative(x)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Replaces `U` by the three-piece function which is linear on `[0, x_ρ]`,
/// equal to `U` on `(x_ρ, ρ]` and constant beyond `ρ`.
pub fn lipschitz_truncate(utility: &Utility, rho: f64, c0: f64) -> Result<Utility> {
    if utility.truncation.is_some() {
        return invalid("utility is already truncated");
    }
    if !(rho > 0.0 && c0 > 0.0) {
        return invalid(format!(
            "rho and c0 must be positive, got rho={rho}, c0={c0}"
        ));
    }
    let x_rho = c0 / rho;
    if x_rho >= rho {
        return invalid(format!(
            "x_rho = c0/rho = {x_rho} must be below rho = {rho}"
        ));
    }
    let at_zero = utility.base.value(0.0);
    if !at_zero.is_finite() {
        return Err(Error::Unsupported(
            "utilities unbounded at zero cannot be truncated".into(),
        ));
    }
    let lipschitz = (utility.base.value(x_rho) - at_zero) / x_rho;
    Ok(Utility {
        base: utility.base.clone(),
        truncation: Some(Truncation {
            rho,
            c0,
            x_rho,
            lipschitz,
        }),
    })
}

/// `sup_{x ≥ 0} {U(x) − x y}` by a scan over `search_grid` followed by one
/// golden-section pass on the cell pair around the best node.
pub fn convex_conjugate(utility: &Utility, y: f64, search_grid: &[f64]) -> Result<f64> {
    if search_grid.is_empty() {
        return invalid("empty search grid for conjugate");
    }
    let objective = |x: f64| utility.evaluate(x) - x * y;
    Ok(maximize_on_grid(objective, search_grid).1)
}

/// Scans `grid` for the maximizer of a concave `f` (smallest index on ties) and
/// refines it by golden section on the neighbouring cells. Returns
/// `(argmax, max)`.
pub(crate) fn maximize_on_grid(f: impl Fn(f64) -> f64, grid: &[f64]) -> (f64, f64) {
    let mut best = 0;
    let mut best_val = f(grid[0]);
    for (k, &x) in grid.iter().enumerate().skip(1) {
        let v = f(x);
        if v > best_val {
            best = k;
            best_val = v;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_section_max(&f, lo, hi);
    if v > best_val {
        (x, v)
    } else {
        (grid[best], best_val)
    }
}

pub(crate) fn golden_section_max(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    if b <= a {
        return (a, f(a));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Convex conjugate of a truncated utility.
#[derive(Debug, Clone)]
pub struct Conjugate {
    primal: Utility,
    truncation: Truncation,
    search_grid: Vec<f64>,
}

const CONJUGATE_SEARCH_CELLS: usize = 20_000;

/// Packages the conjugate of a Lipschitz (truncated) utility.
pub fn conjugate_spec(utility: &Utility) -> Result<Conjugate> {
    let truncation = *utility.truncation().ok_or_else(|| {
        Error::Unsupported("conjugate requires a Lipschitz-truncated utility".into())
    })?;
    let search_grid = match utility.kind() {
        UtilityKind::TruncatedPower => Vec::new(),
        _ => {
            let dx = truncation.rho / CONJUGATE_SEARCH_CELLS as f64;
            (0..=CONJUGATE_SEARCH_CELLS)
                .map(|k| k as f64 * dx)
                .collect()
        }
    };
    Ok(Conjugate {
        primal: utility.clone(),
        truncation,
        search_grid,
    })
}

impl Conjugate {
    pub fn primal(&self) -> &Utility {
        &self.primal
    }

    /// Beyond this point the conjugate is identically `U(0)`.
    pub fn support_cutoff(&self) -> f64 {
        self.truncation.lipschitz
    }

    /// Lipschitz constant `L̃_ρ = ρ`.
    pub fn lipschitz(&self) -> f64 {
        self.truncation.y_rho()
    }

    /// `Ũ_ρ(y)` for `y ≥ 0`; `+∞` for negative `y`.
    pub fn evaluate(&self, y: f64) -> f64 {
        if y < 0.0 {
            return f64::INFINITY;
        }
        let t = &self.truncation;
        let u = &self.primal;
        if y >= t.lipschitz {
            return u.evaluate(0.0);
        }
        match u.exponent() {
            Some(p) if u.kind() == UtilityKind::TruncatedPower => {
                // Slopes of U at the two kinks delimit the interior branch.
                let slope_left = t.x_rho.powf(p - 1.0);
                let slope_right = t.rho.powf(p - 1.0);
                let x_star = if y >= slope_left {
                    t.x_rho
                } else if y > slope_right {
                    y.powf(1.0 / (p - 1.0))
                } else {
                    t.rho
                };
                u.evaluate(x_star) - x_star * y
            }
            _ => {
                let objective = |x: f64| u.evaluate(x) - x * y;
                maximize_on_grid(objective, &self.search_grid).1
            }
        }
    }
}
