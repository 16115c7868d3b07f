//! Straight-line recursive dynamic program for small models, written
//! directly from the scheme and sharing no code with the solver.

use std::sync::Arc;

use proptest::prelude::*;
use sl_duality::lattice::control_mesh;
use sl_duality::market::{Coefficient, Friction, Interval, MarketModel};
use sl_duality::solver::{solve, Direction, DiscretizationConfig, Terminal};
use sl_duality::utility::{conjugate_spec, lipschitz_truncate, power_utility};

#[derive(Debug, Clone)]
pub struct Case {
    r0: f64,
    r1: f64,
    b: f64,
    sigma: f64,
    friction: Option<(f64, f64)>,
    a_lo: f64,
    a_hi: f64,
    g_lo: f64,
    g_hi: f64,
    horizon: f64,
    p: f64,
    rho: f64,
    c0: f64,
    x_max: f64,
    y_max: f64,
    steps: usize,
    cells: usize,
    order: usize,
}

pub fn case() -> impl Strategy<Value = Case> {
    (
        (0.0..0.5f64, -0.2..0.2f64, 0.1..1.5f64, 0.2..1.2f64),
        prop::option::of((0.0..1.0f64, 0.0..1.0f64)),
        (-1.0..-0.1f64, 0.1..1.5f64, -1.0..0.0f64, 0.0..1.0f64),
        (0.1..1.0f64, 0.2..0.8f64, 2.0..6.0f64, 0.3..1.5f64),
        (0.5..2.0f64, 0.5..2.0f64),
        (1usize..=3, 2usize..=16, 2usize..=3),
    )
        .prop_map(
            |(
                (r0, r1, b, sigma),
                friction,
                (a_lo, a_hi, g_lo, g_hi),
                (horizon, p, rho, c0),
                (xs, ys),
                (steps, cells, order),
            )| {
                let (a_lo, a_hi) = if friction.is_some() {
                    (-1.0, 1.0)
                } else {
                    (a_lo, a_hi)
                };
                // Concavity in a needs spread <= r(t) for all t.
                let r1 = if friction.is_some() { r1.abs() } else { r1 };
                let friction = friction.map(|(frac, iota)| (frac * r0, iota));
                Case {
                    r0,
                    r1,
                    b,
                    sigma,
                    friction,
                    a_lo,
                    a_hi,
                    g_lo,
                    g_hi,
                    horizon,
                    p,
                    rho,
                    c0,
                    x_max: rho * xs,
                    y_max: ys * 3.0,
                    steps,
                    cells,
                    order,
                }
            },
        )
}

/// Hermite nodes and weights for the standard normal, from the closed forms.
fn rule(order: usize) -> Vec<(f64, f64)> {
    match order {
        2 => vec![(-1.0, 0.5), (1.0, 0.5)],
        3 => {
            let s = 3f64.sqrt();
            vec![(-s, 1.0 / 6.0), (0.0, 2.0 / 3.0), (s, 1.0 / 6.0)]
        }
        _ => unreachable!(),
    }
}

fn friction_value(f: Option<(f64, f64)>, r: f64, a: f64) -> f64 {
    // Cuoco–Liu form with λ± = 1, spread `s = R − r` and ι.
    match f {
        None => 0.0,
        Some((s, iota)) => {
            let short = (-a).max(0.0);
            let long = a.max(0.0);
            -r * (1.0 + iota) * short - s * (1.0 - long - iota * short)
        }
    }
}

struct Oracle<'a> {
    c: &'a Case,
    nodes: Vec<(f64, f64)>,
    terminal: Vec<f64>,
    plateau: Option<f64>,
    extent: f64,
    controls: Vec<f64>,
    dual: bool,
}

impl Oracle<'_> {
    fn r(&self, t: f64) -> f64 {
        self.c.r0 + self.c.r1 * t
    }

    fn rates(&self, t: f64, u: f64) -> (f64, f64) {
        let c = self.c;
        let r = self.r(t);
        if self.dual {
            // sup over A of g(a) − a ν: a concave piecewise-linear g peaks at a vertex.
            let vertices = [c.a_lo, 0.0, c.a_hi];
            let gt = vertices
                .iter()
                .map(|&a| friction_value(c.friction, r, a) - a * u)
                .fold(f64::NEG_INFINITY, f64::max);
            (-(r + gt), (r - c.b - u) / c.sigma)
        } else {
            (
                r + u * (c.b - r) + friction_value(c.friction, r, u),
                u * c.sigma,
            )
        }
    }

    fn interp(&self, row: &[f64], x: f64) -> f64 {
        let j = row.len() - 1;
        let dx = self.extent / j as f64;
        if x > self.extent {
            if let Some(p) = self.plateau {
                return p;
            }
            let slope = (row[j] - row[j - 1]) / dx;
            return row[j] + slope * (x - self.extent);
        }
        if x < 0.0 {
            return row[0] + (row[1] - row[0]) / dx * x;
        }
        let k = ((x / dx).floor() as usize).min(j - 1);
        let left = k as f64 * dx;
        row[k] + (row[k + 1] - row[k]) * (x - left) / dx
    }

    /// Full row at time index `n`, computed recursively from row `n + 1`.
    fn row(&self, n: usize) -> Vec<f64> {
        if n == self.c.steps {
            return self.terminal.clone();
        }
        let next = self.row(n + 1);
        let h = self.c.horizon / self.c.steps as f64;
        let t = n as f64 * h;
        let j = self.terminal.len() - 1;
        (0..=j)
            .map(|m| {
                let x = self.extent * m as f64 / j as f64;
                let values = self.controls.iter().map(|&u| {
                    let (mu, psi) = self.rates(t, u);
                    self.nodes
                        .iter()
                        .map(|&(xi, w)| {
                            w * self.interp(&next, x + h * x * mu + h.sqrt() * x * psi * xi)
                        })
                        .sum::<f64>()
                });
                if self.dual {
                    values.fold(f64::INFINITY, f64::min)
                } else {
                    values.fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect()
    }
}

fn truncated_power(p: f64, rho: f64, c0: f64, x: f64) -> f64 {
    let u = |x: f64| x.powf(p) / p;
    let xr = c0 / rho;
    if x <= xr {
        u(xr) / xr * x
    } else if x <= rho {
        u(x)
    } else {
        u(rho)
    }
}

fn truncated_power_conjugate(p: f64, rho: f64, c0: f64, y: f64) -> f64 {
    let u = |x: f64| x.powf(p) / p;
    let xr = c0 / rho;
    let slope0 = u(xr) / xr;
    if y >= slope0 {
        0.0
    } else if y >= xr.powf(p - 1.0) {
        u(xr) - xr * y
    } else if y > rho.powf(p - 1.0) {
        let x = y.powf(1.0 / (p - 1.0));
        u(x) - x * y
    } else {
        u(rho) - rho * y
    }
}

fn model(c: &Case) -> MarketModel {
    let (r0, r1) = (c.r0, c.r1);
    let g = match c.friction {
        None => Friction::None,
        Some((s, iota)) => Friction::Custom(Arc::new(move |t, a| {
            friction_value(Some((s, iota)), r0 + r1 * t, a)
        })),
    };
    MarketModel::new(
        Coefficient::TimeDependent(Arc::new(move |t| r0 + r1 * t)),
        Coefficient::Constant(c.b),
        Coefficient::Constant(c.sigma),
        g,
        Interval::new(c.a_lo, c.a_hi).unwrap(),
        Interval::new(c.g_lo, c.g_hi).unwrap(),
        c.horizon,
    )
    .unwrap()
}

/// Largest relative mismatch `|solver − oracle| / (1 + |oracle|)` over both
/// directions and all rows.
pub fn max_mismatch(c: &Case) -> f64 {
    let m = model(c);
    let u = lipschitz_truncate(&power_utility(c.p).unwrap(), c.rho, c.c0).unwrap();
    let conj = conjugate_spec(&u).unwrap();
    let cfg = DiscretizationConfig::new(c.steps, c.cells, c.x_max, c.order, 3, c.y_max);
    let lipschitz = {
        let xr = c.c0 / c.rho;
        xr.powf(c.p) / c.p / xr
    };
    let mut worst = 0.0f64;
    for dual in [false, true] {
        let (extent, terminal, plateau, interval): (f64, Vec<f64>, Option<f64>, Interval) = if dual
        {
            let t = (0..=c.cells)
                .map(|j| {
                    truncated_power_conjugate(c.p, c.rho, c.c0, c.y_max * j as f64 / c.cells as f64)
                })
                .collect();
            (
                c.y_max,
                t,
                (c.y_max >= lipschitz).then_some(0.0),
                m.dual_controls,
            )
        } else {
            let t = (0..=c.cells)
                .map(|j| truncated_power(c.p, c.rho, c.c0, c.x_max * j as f64 / c.cells as f64))
                .collect();
            (
                c.x_max,
                t,
                (c.x_max > c.rho).then(|| truncated_power(c.p, c.rho, c.c0, c.rho)),
                m.controls,
            )
        };
        let oracle = Oracle {
            c,
            nodes: rule(c.order),
            terminal,
            plateau,
            extent,
            controls: control_mesh(interval, 3).unwrap(),
            dual,
        };
        let surface = if dual {
            solve(&m, Terminal::Conjugate(&conj), &cfg, Direction::Dual).unwrap()
        } else {
            solve(&m, Terminal::Utility(&u), &cfg, Direction::Primal).unwrap()
        };
        for n in 0..=c.steps {
            for (&got, &w) in surface.row(n).iter().zip(&oracle.row(n)) {
                worst = worst.max((got - w).abs() / (1.0 + w.abs()));
            }
        }
    }
    worst
}
