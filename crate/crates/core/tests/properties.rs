use proptest::prelude::*;
use sl_duality::apriori::{delta_allowance, em_bound, gh_bound};
use sl_duality::lattice::{control_mesh, SpaceGrid, TimeGrid};
use sl_duality::market::{
    coefficient_bounds, merton_model, merton_model_with_controls, Interval, MertonParams,
};
use sl_duality::solver::{enumerate_chain, ChainSpec, Stepper};
use sl_duality::{
    conjugate_spec, duality_gap, gauss_hermite_rule, lipschitz_truncate, power_utility, solve_dual,
    solve_primal, Direction, DiscretizationConfig,
};

fn merton() -> impl Strategy<Value = MertonParams> {
    (
        0.2..0.8f64,
        0.0..0.6f64,
        0.0..0.8f64,
        0.3..1.2f64,
        0.2..1.0f64,
    )
        .prop_map(|(p, r, excess, sigma, horizon)| MertonParams {
            p,
            r,
            b: r + excess,
            sigma,
            horizon,
        })
}

fn row(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

proptest! {
    #[test]
    fn step_is_monotone(
        params in merton(),
        base in row(17),
        bumps in prop::collection::vec(0.0..1.0f64, 17),
        order in 2usize..7,
        steps in 1usize..200,
    ) {
        // Extrapolation is not order-preserving, so keep every displaced
        // point at or above zero and use a fixed plateau on the right.
        let h = params.horizon / steps as f64;
        let vol = params.sigma.max((params.b - params.r + 0.5) / params.sigma);
        let xi_max = gauss_hermite_rule(order).unwrap().nodes().iter().cloned().fold(0.0, f64::max);
        prop_assume!(1.0 - h * (params.r + params.b + 1.0) - h.sqrt() * vol * xi_max > 0.0);
        let model = merton_model_with_controls(&params, Interval::new(-1.0, 1.0).unwrap(), Interval::new(-0.5, 0.5).unwrap()).unwrap();
        let rule = gauss_hermite_rule(order).unwrap();
        let stepper = Stepper {
            model: &model,
            rule: &rule,
            grid: SpaceGrid::new(4.0, 16).unwrap(),
            h,
            plateau: Some(0.0),
        };
        let upper: Vec<f64> = base.iter().zip(&bumps).map(|(a, b)| a + b).collect();
        let mesh = [-1.0, 0.0, 1.0];
        let lo = stepper.primal_step(&base, 0.0, &mesh).unwrap().values;
        let hi = stepper.primal_step(&upper, 0.0, &mesh).unwrap().values;
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a <= b, "primal step not monotone: {a} > {b}");
        }
        let dmesh = [-0.5, 0.0, 0.5];
        let lo = stepper.dual_step(&base, 0.0, &dmesh).unwrap().values;
        let hi = stepper.dual_step(&upper, 0.0, &dmesh).unwrap().values;
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a <= b, "dual step not monotone: {a} > {b}");
        }
    }

    #[test]
    fn constants_are_preserved(params in merton(), c in -10.0..10.0f64, order in 2usize..10) {
        let model = merton_model(&params).unwrap();
        let rule = gauss_hermite_rule(order).unwrap();
        let stepper = Stepper {
            model: &model,
            rule: &rule,
            grid: SpaceGrid::new(5.0, 12).unwrap(),
            h: params.horizon / 4.0,
            plateau: Some(c),
        };
        let next = vec![c; 13];
        for v in stepper.primal_step(&next, 0.0, &[-1.0, 0.5, 1.0]).unwrap().values {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
        for v in stepper.dual_step(&next, 0.0, &[0.0]).unwrap().values {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn interpolation_hits_nodes_and_lines(
        values in row(11),
        slope in -3.0..3.0f64,
        icpt in -3.0..3.0f64,
        x in -2.0..8.0f64,
        max in 0.5..6.0f64,
    ) {
        let grid = SpaceGrid::new(max, 10).unwrap();
        for (m, &v) in values.iter().enumerate() {
            let got = grid.interpolate_unchecked(&values, grid.node(m), None);
            prop_assert!((got - v).abs() <= 1e-12 * 10.0, "node {m}: {got} vs {v}");
        }
        let line: Vec<f64> = grid.nodes().map(|y| icpt + slope * y).collect();
        let got = grid.interpolate_unchecked(&line, x, None);
        prop_assert!((got - (icpt + slope * x)).abs() <= 1e-10 * (1.0 + got.abs()));
        if x > max {
            prop_assert_eq!(grid.interpolate_unchecked(&line, x, Some(7.0)), 7.0);
        }
    }

    #[test]
    fn interpolation_is_monotone_and_lipschitz(
        incs in prop::collection::vec(0.0..2.0f64, 10),
        x in -1.0..5.0f64,
        dx in 0.0..0.5f64,
    ) {
        let grid = SpaceGrid::new(4.0, 10).unwrap();
        let mut values = vec![0.0];
        for d in &incs {
            values.push(values.last().unwrap() + d);
        }
        let a = grid.interpolate_unchecked(&values, x, None);
        let b = grid.interpolate_unchecked(&values, x + dx, None);
        let lip = incs.iter().cloned().fold(0.0, f64::max) / grid.step();
        prop_assert!(a <= b + 1e-12);
        prop_assert!(b - a <= lip * dx + 1e-12);
    }

    #[test]
    fn chain_is_a_probability_law(
        params in merton(),
        order in 2usize..6,
        steps in 1usize..5,
        x in 0.1..5.0f64,
        policy in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let model = merton_model(&params).unwrap();
        let rule = gauss_hermite_rule(order).unwrap();
        let spec = ChainSpec {
            model: &model,
            rule: &rule,
            times: TimeGrid::new(params.horizon, 4).unwrap(),
            start_step: 0,
            start_state: x,
            policy: policy.clone(),
            direction: Direction::Primal,
        };
        let law = enumerate_chain(&spec, steps.min(4)).unwrap();
        prop_assert_eq!(law.len(), order.pow(steps.min(4) as u32));
        let total: f64 = law.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // One step: the mean is the Euler drift exactly.
        let one = enumerate_chain(&spec, 1).unwrap();
        let mean: f64 = one.iter().map(|(s, p)| s * p).sum();
        let h = params.horizon / 4.0;
        let want = x * (1.0 + h * model.primal_drift_rate(0.0, policy[0]));
        prop_assert!((mean - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn optimizing_beats_a_restricted_policy(params in merton(), steps in 1usize..6, side in 0usize..3) {
        let u = lipschitz_truncate(&power_utility(params.p).unwrap(), 18.0, 8.0).unwrap();
        let conj = conjugate_spec(&u).unwrap();
        // Five points on the full sets contain the three points of each half.
        let mut full = DiscretizationConfig::new(steps, 24, 20.0, 3, 5, 20.0);
        full.dual_controls = 5;
        let mut part = full;
        part.controls = 3;
        part.dual_controls = 3;
        let (lo, hi) = [(-1.0, 0.0), (0.0, 1.0), (0.0, 0.0)][side];
        let a = Interval::new(lo, hi).unwrap();
        let g = Interval::new(0.5 * lo, 0.5 * hi).unwrap();
        let big_a = Interval::new(-1.0, 1.0).unwrap();
        let big_g = Interval::new(-0.5, 0.5).unwrap();
        let free = merton_model_with_controls(&params, big_a, big_g).unwrap();
        let pinned_a = merton_model_with_controls(&params, a, big_g).unwrap();
        let pinned_g = merton_model_with_controls(&params, big_a, g).unwrap();
        let mut dual_part = full;
        dual_part.dual_controls = 3;
        let w = solve_primal(&free, &u, &full).unwrap();
        let w_a = solve_primal(&pinned_a, &u, &part).unwrap();
        let d = solve_dual(&free, &conj, &full).unwrap();
        let d_g = solve_dual(&pinned_g, &conj, &dual_part).unwrap();
        for (x, y) in w.row(0).iter().zip(w_a.row(0)) {
            prop_assert!(x + 1e-12 >= *y);
        }
        for (x, y) in d.row(0).iter().zip(d_g.row(0)) {
            prop_assert!(x <= &(y + 1e-12));
        }
    }

    #[test]
    fn primal_rows_increase_in_wealth(params in merton(), steps in 4usize..12, cells in 8usize..40) {
        let model = merton_model(&params).unwrap();
        let h = params.horizon / steps as f64;
        // Every displaced node stays nonnegative for the 2-point rule.
        prop_assume!(1.0 - h * params.r.max(params.b) - h.sqrt() * params.sigma > 0.0);
        let u = lipschitz_truncate(&power_utility(params.p).unwrap(), 18.0, 8.0).unwrap();
        let cfg = DiscretizationConfig::new(steps, cells, 20.0, 2, 5, 20.0);
        let w = solve_primal(&model, &u, &cfg).unwrap();
        for n in 0..=steps {
            for pair in w.row(n).windows(2) {
                prop_assert!(pair[0] <= pair[1] + 1e-12, "row {n} decreases");
            }
        }
    }

    #[test]
    fn terminal_gap_is_within_one_dual_cell(
        p in 0.2..0.8f64,
        rho in 4.0..20.0f64,
        c0 in 0.5..4.0f64,
        cells in 4usize..200,
        x_scale in 1.0..1.5f64,
    ) {
        let params = MertonParams { p, ..MertonParams::default() };
        let model = merton_model(&params).unwrap();
        let u = lipschitz_truncate(&power_utility(p).unwrap(), rho, c0).unwrap();
        let conj = conjugate_spec(&u).unwrap();
        let x_max = rho * x_scale;
        let y_max = x_max.max(conj.support_cutoff());
        let cfg = DiscretizationConfig::new(1, cells, x_max, 2, 3, y_max);
        let w = solve_primal(&model, &u, &cfg).unwrap();
        let d = solve_dual(&model, &conj, &cfg).unwrap();
        let gap = duality_gap(&w, &d, 1).unwrap();
        let dy = y_max / cells as f64;
        for (x, g) in gap.x.iter().zip(&gap.gap) {
            prop_assert!(*g >= -1e-12, "negative terminal gap {g} at {x}");
            prop_assert!(*g <= x * dy + 1e-9, "terminal gap {g} exceeds x dy at {x}");
        }
    }

    #[test]
    fn fenchel_inequality(p in 0.1..0.9f64, x in 0.0..30.0f64, y in 0.0..5.0f64) {
        let u = lipschitz_truncate(&power_utility(p).unwrap(), 18.0, 8.0).unwrap();
        let conj = conjugate_spec(&u).unwrap();
        prop_assert!(conj.evaluate(y) + x * y >= u.evaluate(x) - 1e-12);
        // Equality at a supergradient.
        if x > 8.0 / 18.0 && x < 18.0 {
            let s = u.derivative(x);
            prop_assert!((conj.evaluate(s) + x * s - u.evaluate(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn apriori_bounds_grow_with_step_and_wealth(
        params in merton(),
        h1 in 1e-4..1.0f64,
        h2 in 1e-4..1.0f64,
        x1 in 0.1..10.0f64,
        x2 in 0.1..10.0f64,
        order in 2usize..8,
    ) {
        let model = merton_model(&params).unwrap();
        let b = coefficient_bounds(&model).unwrap();
        let rule = gauss_hermite_rule(order).unwrap();
        let (h_lo, h_hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let (x_lo, x_hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let t = params.horizon;
        prop_assert!(em_bound(h_lo, x_lo, 3.0, &b, t) <= em_bound(h_hi, x_lo, 3.0, &b, t));
        prop_assert!(em_bound(h_lo, x_lo, 3.0, &b, t) <= em_bound(h_lo, x_hi, 3.0, &b, t));
        let gh = |h, x| gh_bound(h, x, order, 3.0, &b, t, &rule).unwrap();
        prop_assert!(gh(h_lo, x_lo) <= gh(h_hi, x_lo));
        prop_assert!(gh(h_lo, x_lo) <= gh(h_lo, x_hi));
    }

    #[test]
    fn tail_allowance_shrinks_with_rho(params in merton(), x in 8.0..12.0f64, rho in 14.0..40.0f64, extra in 0.0..20.0f64) {
        let model = merton_model(&params).unwrap();
        let b = coefficient_bounds(&model).unwrap();
        let u = power_utility(params.p).unwrap();
        let d1 = delta_allowance(x, rho, 8.0, &b, params.horizon, &u);
        let d2 = delta_allowance(x, rho + extra, 8.0, &b, params.horizon, &u);
        prop_assert!(d2 <= d1 + 1e-12, "delta({x}, {rho}) = {d1} < delta at {} = {d2}", rho + extra);
    }

    #[test]
    fn mesh_covers_interval(lo in -2.0..0.0f64, width in 0.0..3.0f64, count in 1usize..40) {
        let iv = Interval::new(lo, lo + width).unwrap();
        let mesh = control_mesh(iv, count).unwrap();
        prop_assert!(mesh.iter().all(|a| iv.contains(*a)));
        if width > 0.0 && count > 1 {
            prop_assert_eq!(mesh.len(), count);
            prop_assert_eq!(mesh[0], lo);
            prop_assert_eq!(*mesh.last().unwrap(), lo + width);
        }
    }
}
