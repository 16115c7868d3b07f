//! The pipelines behind each subcommand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sl_duality::analytics::{
    bound_curve, run_ladder, solve_level, LadderMode, LadderProblem, Level, RefinementLadder,
};
use sl_duality::duality::{aposteriori_bounds, default_delta, duality_gap, BoundConstants};
use sl_duality::market::{
    cuoco_liu_model, merton_model, CuocoLiuMarket, MarketModel, MertonParams, MertonSolution,
};
use sl_duality::output::{bound_curve_csv, bounds_csv, sci, surface_csv, table_csv};
use sl_duality::quadrature::gauss_hermite_rule;
use sl_duality::utility::{lipschitz_truncate, power_utility, Utility};
use sl_duality::{polar_property_check, Error};

use crate::config::{ExperimentConfig, PolarPolicy, ProblemKind};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Unsupported(_) => Failure::Config(e.to_string()),
            Error::NumericalFailure(_) | Error::ResourceLimit(_) => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Error,
    Gap,
}

type Outcome = Result<(), Failure>;

struct Setup {
    model: MarketModel,
    utility: Utility,
    merton: Option<MertonSolution>,
    ladder: RefinementLadder,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, Failure> {
    let (model, merton) = match cfg.problem {
        ProblemKind::Merton => {
            let params = MertonParams {
                p: cfg.p,
                r: cfg.r,
                b: cfg.b,
                sigma: cfg.sigma,
                horizon: cfg.horizon,
            };
            (merton_model(&params)?, Some(MertonSolution::new(&params)?))
        }
        ProblemKind::CuocoLiu => {
            let k = cfg.cuoco_liu.expect("validated by the parser");
            let params = CuocoLiuMarket {
                p: cfg.p,
                r: cfg.r,
                big_r: k.big_r,
                b: cfg.b,
                sigma: cfg.sigma,
                horizon: cfg.horizon,
                iota: k.iota,
                lambda_plus: k.lambda_plus,
                lambda_minus: k.lambda_minus,
            };
            (cuoco_liu_model(&params)?, None)
        }
    };
    let utility = lipschitz_truncate(&power_utility(cfg.p)?, cfg.rho, cfg.c0)?;
    let ladder = RefinementLadder::with_coupling(
        cfg.k_min,
        cfg.k_max,
        cfg.order,
        cfg.base_steps,
        cfg.coupling,
    )?;
    Ok(Setup {
        model,
        utility,
        merton,
        ladder,
    })
}

fn reference_fn(s: &Setup, horizon: f64) -> Option<impl Fn(f64) -> f64 + Sync + '_> {
    s.merton
        .as_ref()
        .map(move |m| move |x: f64| m.value(horizon, x))
}

fn write(out: &Path, name: &str, body: &str) -> Outcome {
    std::fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    std::fs::write(&path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn comment(cfg: &ExperimentConfig, command: &str, extra: &str) -> String {
    format!("sldual {command}{extra}\n{}", cfg.echo())
}

fn pick_level(s: &Setup, cfg: &ExperimentConfig, level: Option<u32>) -> Result<Level, Failure> {
    let k = level.unwrap_or(cfg.k_max);
    Ok(s.ladder.level_at(k)?)
}

fn level_tag(level: &Level) -> String {
    format!(
        " (level {}, N = {}, J = {})",
        level.k, level.time_steps, level.space_steps
    )
}

pub fn solve_surface(
    cfg: &ExperimentConfig,
    out: &Path,
    level: Option<u32>,
    dual: bool,
) -> Outcome {
    let s = setup(cfg)?;
    let level = pick_level(&s, cfg, level)?;
    let problem = LadderProblem {
        model: &s.model,
        utility: &s.utility,
        x_max: cfg.x_max,
        y_max: cfg.y_max,
        window: (0.0, cfg.x_max),
        reference: None,
    };
    let sol = solve_level(&problem, &level, cfg.order, dual)?;
    let (name, command, surface) = if dual {
        (
            "dual_surface.csv",
            "solve-dual",
            sol.dual.as_ref().expect("dual requested"),
        )
    } else {
        ("primal_surface.csv", "solve-primal", &sol.primal)
    };
    let tag = level_tag(&level);
    write(
        out,
        name,
        &surface_csv(surface, &comment(cfg, command, &tag)),
    )?;
    let at_one = surface.interpolate(0, 1.0);
    println!(
        "level {} N={} J={}: {} value at t=0, state 1: {}",
        level.k,
        level.time_steps,
        level.space_steps,
        if dual { "dual" } else { "primal" },
        sci(at_one)
    );
    Ok(())
}

pub fn gap(cfg: &ExperimentConfig, out: &Path, level: Option<u32>) -> Outcome {
    let s = setup(cfg)?;
    let level = pick_level(&s, cfg, level)?;
    let report = bound_report(cfg, &s, &level)?;
    let tag = level_tag(&level);
    write(
        out,
        "gap.csv",
        &bounds_csv(&report, &comment(cfg, "gap", &tag)),
    )?;
    let linf = report.gap.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    println!(
        "level {} N={} J={}: global Linf gap at t=0 = {}",
        level.k,
        level.time_steps,
        level.space_steps,
        sci(linf)
    );
    Ok(())
}

fn bound_report(
    cfg: &ExperimentConfig,
    s: &Setup,
    level: &Level,
) -> Result<sl_duality::BoundReport, Failure> {
    let problem = LadderProblem {
        model: &s.model,
        utility: &s.utility,
        x_max: cfg.x_max,
        y_max: cfg.y_max,
        window: (0.0, cfg.x_max),
        reference: None,
    };
    let sol = solve_level(&problem, level, cfg.order, true)?;
    let dual = sol.dual.as_ref().expect("dual requested");
    let g = duality_gap(&sol.primal, dual, 0)?;
    let constants = BoundConstants::from_model(&s.model, &s.utility, &sol.config)?;
    let delta = default_delta(&s.model, &s.utility)?;
    Ok(aposteriori_bounds(&g, &constants, delta))
}

pub fn convergence(cfg: &ExperimentConfig, out: &Path, mode: Option<Mode>) -> Outcome {
    let s = setup(cfg)?;
    let mode = mode.unwrap_or(if s.merton.is_some() {
        Mode::Error
    } else {
        Mode::Gap
    });
    let reference = reference_fn(&s, cfg.horizon);
    let reference_dyn: Option<&(dyn Fn(f64) -> f64 + Sync)> = reference
        .as_ref()
        .map(|f| f as &(dyn Fn(f64) -> f64 + Sync));
    let (ladder_mode, window, name) = match mode {
        Mode::Error => {
            if reference_dyn.is_none() {
                return Err(Failure::Config(
                    "error mode needs a closed-form reference; only merton has one".into(),
                ));
            }
            (LadderMode::Error, (1.0, 2.0), "convergence_error.csv")
        }
        Mode::Gap => (LadderMode::Gap, (0.0, cfg.x_max), "convergence_gap.csv"),
    };
    let problem = LadderProblem {
        model: &s.model,
        utility: &s.utility,
        x_max: cfg.x_max,
        y_max: cfg.y_max,
        window,
        reference: reference_dyn,
    };
    let table = run_ladder(&problem, &s.ladder, ladder_mode)?;
    let orders = table.orders_linf();
    for (row, order) in table.rows.iter().zip(&orders) {
        println!(
            "level {} N={} J={}: l1 {} l2 {} linf {} order_linf {}",
            row.level.k,
            row.level.time_steps,
            row.level.space_steps,
            sci(row.norms.l1),
            sci(row.norms.l2),
            sci(row.norms.linf),
            order.map(sci).unwrap_or_else(|| "-".into())
        );
    }
    let extra = match mode {
        Mode::Error => " --mode error",
        Mode::Gap => " --mode gap",
    };
    let body = table_csv(
        &table,
        cfg.record_cpu_time,
        &comment(cfg, "convergence", extra),
    );
    write(out, name, &body)
}

pub fn bounds(cfg: &ExperimentConfig, out: &Path, level: Option<u32>) -> Outcome {
    let s = setup(cfg)?;
    let reference = reference_fn(&s, cfg.horizon);
    let problem = LadderProblem {
        model: &s.model,
        utility: &s.utility,
        x_max: cfg.x_max,
        y_max: cfg.y_max,
        window: (0.0, cfg.x_max),
        reference: reference
            .as_ref()
            .map(|f| f as &(dyn Fn(f64) -> f64 + Sync)),
    };
    let curve = bound_curve(&problem, (1.0, 2.0), &s.ladder)?;
    for p in &curve {
        println!(
            "h {}: em {} gh {} error {} gap {}",
            sci(p.h),
            sci(p.em_bound),
            sci(p.gh_bound),
            p.empirical_error.map(sci).unwrap_or_else(|| "-".into()),
            sci(p.duality_gap)
        );
    }
    write(
        out,
        "bound_curve.csv",
        &bound_curve_csv(&curve, &comment(cfg, "bounds", "")),
    )?;
    let level = pick_level(&s, cfg, level)?;
    let report = bound_report(cfg, &s, &level)?;
    let tag = level_tag(&level);
    write(
        out,
        "bounds.csv",
        &bounds_csv(&report, &comment(cfg, "bounds", &tag)),
    )
}

pub fn polar(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let s = setup(cfg)?;
    let rule = gauss_hermite_rule(cfg.order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (a, g) = (s.model.controls, s.model.dual_controls);
    let mut body = comment(cfg, "polar-check", "")
        .lines()
        .map(|l| format!("# {l}\n"))
        .collect::<String>();
    body.push_str("N,h,product_expectation,defect,defect_over_xyh\n");
    for &n in &cfg.polar_steps {
        let (primal, dual): (Vec<f64>, Vec<f64>) = match cfg.polar_policy {
            PolarPolicy::Constant { a, gamma } => (vec![a; n], vec![gamma; n]),
            PolarPolicy::Random => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    (a.lo + u * a.width(), g.lo + v * g.width())
                })
                .unzip(),
        };
        let res =
            polar_property_check(&s.model, &rule, n, cfg.polar_x, cfg.polar_y, &primal, &dual)?;
        let h = cfg.horizon / n as f64;
        let xy = cfg.polar_x * cfg.polar_y;
        let scaled = if xy == 0.0 {
            0.0
        } else {
            res.defect / (xy * h)
        };
        println!(
            "N={n}: E[XY] = {} defect = {} defect/(xyh) = {}",
            sci(res.product_expectation),
            sci(res.defect),
            sci(scaled)
        );
        body.push_str(&format!(
            "{n},{},{},{},{}\n",
            sci(h),
            sci(res.product_expectation),
            sci(res.defect),
            sci(scaled)
        ));
    }
    write(out, "polar.csv", &body)
}
