//! Primal and dual semi-Lagrangian Gauss–Hermite schemes for
//! utility-maximization problems, the numerical duality gap, and explicit
//! two-sided error bounds.
//!
//! ```
//! use sl_duality::{merton_model, MertonParams, power_utility, lipschitz_truncate};
//! use sl_duality::{solve_primal, DiscretizationConfig};
//!
//! let params = MertonParams::default();
//! let model = merton_model(&params).unwrap();
//! let u = lipschitz_truncate(&power_utility(0.5).unwrap(), 18.0, 8.0).unwrap();
//! let config = DiscretizationConfig::new(8, 18, 20.0, 4, 3, 4.0);
//! let w = solve_primal(&model, &u, &config).unwrap();
//! assert!(w.interpolate(0, 1.0) > 2.0);
//! ```

pub mod analytics;
pub mod apriori;
pub mod duality;
mod error;
pub mod lattice;
pub mod market;
pub mod output;
pub mod quadrature;
pub mod solver;
pub mod utility;

pub use analytics::{
    convergence_orders, run_ladder, window_norms, ConvergenceTable, LadderMode, LadderProblem,
    RefinementLadder,
};
pub use apriori::{delta_allowance, em_bound, gh_bound, tail_bounds, ConstantSet};
pub use duality::{
    aposteriori_bounds, duality_gap, duality_gap_with, polar_property_check, BoundReport,
    GapDomain, GapReport,
};
pub use error::{Error, Result};
pub use lattice::{SpaceGrid, TimeGrid};
pub use market::{
    cuoco_liu_model, merton_closed_form, merton_model, CuocoLiuMarket, MarketModel, MertonParams,
};
pub use quadrature::{gauss_hermite_rule, moment_defect, QuadratureRule};
pub use solver::{solve_dual, solve_primal, Direction, DiscretizationConfig, ValueSurface};
pub use utility::{conjugate_spec, convex_conjugate, lipschitz_truncate, power_utility, Utility};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/utility.md")]
    mod utility {}
    #[doc = include_str!("../../../book/src/merton.md")]
    mod merton {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/gap.md")]
    mod gap {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/ladders.md")]
    mod ladders {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
