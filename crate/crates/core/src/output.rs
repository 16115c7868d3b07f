//! CSV emitters. Every number is written as `{:.15e}`, which keeps 16
//! significant digits and is deterministic.

use std::fmt::Write;

use crate::analytics::{BoundCurvePoint, ConvergenceTable};
use crate::duality::BoundReport;
use crate::solver::ValueSurface;

/// Scientific notation with 16 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.15e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_else(|| "-".to_string())
}

fn header(comment: &str, columns: &str) -> String {
    let mut s = String::new();
    for line in comment.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{columns}");
    s
}

/// `t,x,value`, row-major by time then space.
pub fn surface_csv(surface: &ValueSurface, comment: &str) -> String {
    let mut s = header(comment, "t,x,value");
    let times = surface.times();
    for n in 0..=times.steps() {
        let t = sci(times.time(n));
        for (x, v) in surface.grid().nodes().zip(surface.row(n)) {
            let _ = writeln!(s, "{t},{},{}", sci(x), sci(*v));
        }
    }
    s
}

/// `x,gap,argmin_y,lower,upper`
pub fn bounds_csv(report: &BoundReport, comment: &str) -> String {
    let mut s = header(comment, "x,gap,argmin_y,lower,upper");
    for i in 0..report.x.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            sci(report.x[i]),
            sci(report.gap[i]),
            sci(report.argmin_y[i]),
            sci(report.lower[i]),
            sci(report.upper[i])
        );
    }
    s
}

/// `J,N,l1,order_l1,l2,order_l2,linf,order_linf,cpu_s`. The time column is
/// written as `-` unless `with_time` is set.
pub fn table_csv(table: &ConvergenceTable, with_time: bool, comment: &str) -> String {
    let mut s = header(comment, "J,N,l1,order_l1,l2,order_l2,linf,order_linf,cpu_s");
    let (o1, o2, oi) = (table.orders_l1(), table.orders_l2(), table.orders_linf());
    for (i, row) in table.rows.iter().enumerate() {
        let cpu = if with_time {
            sci(row.seconds)
        } else {
            "-".to_string()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            row.level.space_steps,
            row.level.time_steps,
            sci(row.norms.l1),
            opt(o1[i]),
            sci(row.norms.l2),
            opt(o2[i]),
            sci(row.norms.linf),
            opt(oi[i]),
            cpu
        );
    }
    s
}

/// `h,em_bound,gh_bound,empirical_error,duality_gap`, one row per level.
pub fn bound_curve_csv(points: &[BoundCurvePoint], comment: &str) -> String {
    let mut s = header(comment, "h,em_bound,gh_bound,empirical_error,duality_gap");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            sci(p.h),
            sci(p.em_bound),
            sci(p.gh_bound),
            opt(p.empirical_error),
            sci(p.duality_gap)
        );
    }
    s
}
