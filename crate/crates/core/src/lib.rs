//! Riemannian geometry of two-consumer exchange-economy equilibrium manifolds:
//! immersions and their connections, geodesics, economy-derived price curves,
//! and the finite-geodesic-property harness.

// Tensor code indexes several arrays with the same loop variables, and
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod charts;
pub mod diffgeo;
pub mod economy;
pub mod error;
pub mod expr;
pub mod fgp;
pub mod geodesic;
pub mod io;
pub mod manifolds;
pub mod scalar;

pub use error::{Error, Result};
pub use diffgeo::{ChristoffelSymbols, CurvatureReport, DerivativeEngine, Domain, Immersion, MetricTensor};
pub use economy::{Economy, EquilibriumSet, Preference, PriceIncomeJet};
pub use expr::CurveExpression;
pub use fgp::{CorollaryDashboard, FgpConfig, FgpReport, Subject, Verdict};
pub use geodesic::{GeodesicState, Geometry, ParamCurve, ResidualReport, Trajectory};
pub use manifolds::{EquilibriumManifold, PriceIncomeCurve};
pub use scalar::{HyperDual, Scalar};
