//! Gauss–Hermite quadrature rescaled to the standard normal distribution.
//!
//! The rule `{(ξ_i, λ_i)}` satisfies `Σ λ_i f(ξ_i) ≈ E[f(Z)]` for `Z ~ N(0, 1)`
//! and is exact for polynomials of degree up to `2M − 1`. Nodes are the roots
//! of the physicists' Hermite polynomial `H_M` scaled by `√2`, weights are the
//! classical Gauss–Hermite weights divided by `√π`.

use crate::error::{invalid, Error, Result};

/// Largest supported number of nodes.
pub const MAX_ORDER: usize = 20;

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-15;

/// An `M`-point quadrature rule for the standard normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Number of nodes `M`.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterator over `(ξ_i, λ_i)` in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ λ_i ξ_i^j`, summed over mirrored pairs from the outside in, then
    /// the centre node. Odd moments cancel exactly.
    pub fn moment(&self, j: u32) -> f64 {
        let m = self.order();
        let mut acc = 0.0;
        for i in 0..m / 2 {
            let pair = self.nodes[i].powi(j as i32) + self.nodes[m - 1 - i].powi(j as i32);
            acc += self.weights[i] * pair;
        }
        if m % 2 == 1 {
            acc += self.weights[m / 2] * self.nodes[m / 2].powi(j as i32);
        }
        acc
    }

    /// Quadrature approximation of `E[f(Z)]`.
    pub fn expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().fold(0.0, |acc, (xi, w)| acc + w * f(xi))
    }
}

/// `n!!` for odd `n` (and `1` for `n ≤ 0`), as a float.
pub fn odd_double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// The `j`-th moment of the standard normal distribution.
pub fn normal_moment(j: u32) -> f64 {
    if j % 2 == 1 {
        0.0
    } else {
        odd_double_factorial(j as i64 - 1)
    }
}

/// Builds the `M`-point Gauss–Hermite rule for the standard normal law.
///
/// Roots of `H_M` are found by Newton iteration on the orthonormal Hermite
/// recurrence, started from asymptotic initial guesses for the largest roots
/// and extrapolated inwards. Only the non-negative half is computed; the
/// negative half is mirrored so the rule is exactly symmetric.
pub fn gauss_hermite_rule(m: usize) -> Result<QuadratureRule> {
    if !(2..=MAX_ORDER).contains(&m) {
        return invalid(format!(
            "quadrature order must lie in 2..={MAX_ORDER}, got {m}"
        ));
    }
    let half = m / 2;
    // Positive roots of H_M in descending order, with their weights for e^{-z^2}.
    let mut roots: Vec<f64> = Vec::with_capacity(half);
    let mut hermite_weights: Vec<f64> = Vec::with_capacity(half);
    let n = m as f64;
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * n + 1.0).sqrt() - 1.85575 * (2.0 * n + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * n.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        let mut converged = false;
        let mut derivative = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (value, d) = orthonormal_hermite(m, z);
            derivative = d;
            let step = value / d;
            z -= step;
            if step.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NumericalFailure(format!(
                "Newton iteration for Hermite root {i} of order {m} did not converge"
            )));
        }
        let (_, d) = orthonormal_hermite(m, z);
        if d.is_finite() {
            derivative = d;
        }
        roots.push(z);
        hermite_weights.push(2.0 / (derivative * derivative));
    }

    let sqrt_pi = std::f64::consts::PI.sqrt();
    let sqrt_2 = std::f64::consts::SQRT_2;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (&root, &w) in roots.iter().zip(&hermite_weights) {
        nodes.push(-sqrt_2 * root);
        weights.push(w / sqrt_pi);
    }
    if m % 2 == 1 {
        nodes.push(0.0);
        // The central weight is whatever mass the symmetric pairs leave over.
        let paired: f64 = weights.iter().sum();
        weights.push(1.0 - 2.0 * paired);
    }
    for i in (0..half).rev() {
        nodes.push(sqrt_2 * roots[i]);
        weights.push(hermite_weights[i] / sqrt_pi);
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Orthonormal Hermite function value `p_M(z)` (up to the Gaussian factor) and
/// its derivative, via the three-term recurrence.
fn orthonormal_hermite(m: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=m {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    let derivative = (2.0 * m as f64).sqrt() * p2;
    (p1, derivative)
}

/// `|(2M−1)!! − Σ λ_i ξ_i^{2M}|`, the first moment the rule fails to match.
pub fn moment_defect(rule: &QuadratureRule) -> f64 {
    let m = rule.order() as u32;
    (normal_moment(2 * m) - rule.moment(2 * m)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_closed_forms() {
        let r2 = gauss_hermite_rule(2).unwrap();
        assert!((r2.nodes()[0] + 1.0).abs() < 1e-12);
        assert!((r2.nodes()[1] - 1.0).abs() < 1e-12);
        assert!(r2.weights().iter().all(|w| (w - 0.5).abs() < 1e-12));

        let r3 = gauss_hermite_rule(3).unwrap();
        let s3 = 3f64.sqrt();
        for (got, want) in r3.nodes().iter().zip([-s3, 0.0, s3]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        for (got, want) in r3.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }

        let r4 = gauss_hermite_rule(4).unwrap();
        let s6 = 6f64.sqrt();
        let inner = (3.0 - s6).sqrt();
        let outer = (3.0 + s6).sqrt();
        let wi = (3.0 + s6) / 12.0;
        let wo = (3.0 - s6) / 12.0;
        let nodes = [-outer, -inner, inner, outer];
        let weights = [wo, wi, wi, wo];
        for i in 0..4 {
            assert!((r4.nodes()[i] - nodes[i]).abs() < 1e-12);
            assert!((r4.weights()[i] - weights[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn order_out_of_range() {
        assert!(matches!(
            gauss_hermite_rule(1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            gauss_hermite_rule(21),
            Err(Error::InvalidArgument(_))
        ));
        assert!(gauss_hermite_rule(20).is_ok());
    }

    #[test]
    fn moment_defects() {
        let d2 = moment_defect(&gauss_hermite_rule(2).unwrap());
        assert!((d2 - 2.0).abs() < 1e-12);
        let d3 = moment_defect(&gauss_hermite_rule(3).unwrap());
        assert!((d3 - 6.0).abs() < 1e-10);
        // Direct sum with the closed forms: 2·(wo·(3+√6)^4 + wi·(3−√6)^4) = 81.
        let d4 = moment_defect(&gauss_hermite_rule(4).unwrap());
        assert!((d4 - 24.0).abs() < 1e-9, "{d4}");
    }

    #[test]
    fn exact_up_to_degree_2m_minus_1() {
        for m in 2..=MAX_ORDER {
            let rule = gauss_hermite_rule(m).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..=(2 * m as u32 - 1) {
                let exact = normal_moment(j);
                let got = rule.moment(j);
                assert!(
                    (got - exact).abs() <= 1e-10 * exact.max(1.0),
                    "M={m} j={j}: {got} vs {exact}"
                );
            }
            for i in 0..m {
                assert_eq!(rule.nodes()[i], -rule.nodes()[m - 1 - i]);
            }
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
