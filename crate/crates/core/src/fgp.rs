//! Finite-geodesic-property checks, price constancy, and the corollary
//! dashboard.
//!
//! A manifold has the finite geodesic property (FGP) when its `L` coordinate
//! `t`-curves through `0, e_1, …, e_{L−1}` are geodesics. Each curve is
//! reparametrized by arc length before its normal geodesic residual is taken.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffgeo::{sectional_curvature, DerivativeEngine, Immersion};
use crate::economy::{count_equilibria_at, Economy};
use crate::error::{Error, Result};
use crate::geodesic::{arc_length_reparametrize, geodesic_residual, Geometry, ParamCurve};
use crate::manifolds::{
    alpha_line, coordinate_curves, positivity_audit, EquilibriumManifold, ManifoldKind, PositivityAudit,
    PriceIncomeCurve, Remark2Hypersurface,
};

/// Anything the harness can be pointed at. Coordinate 0 is always `t`.
#[derive(Clone)]
pub enum Subject {
    Equilibrium {
        manifold: EquilibriumManifold,
        economy: Option<Economy>,
    },
    Hypersurface(Remark2Hypersurface),
    Chart(Arc<dyn Immersion>),
}

impl Subject {
    pub fn from_economy(economy: Economy) -> Result<Self> {
        Ok(Subject::Equilibrium {
            manifold: EquilibriumManifold::from_economy(economy.clone())?,
            economy: Some(economy),
        })
    }

    pub fn immersion(&self) -> Arc<dyn Immersion> {
        match self {
            Subject::Equilibrium { manifold, .. } => Arc::new(manifold.clone()),
            Subject::Hypersurface(h) => Arc::new(h.clone()),
            Subject::Chart(f) => f.clone(),
        }
    }

    pub fn price_curve(&self) -> Option<&Arc<dyn PriceIncomeCurve>> {
        match self {
            Subject::Equilibrium { manifold, .. } => Some(manifold.curve()),
            _ => None,
        }
    }

    pub fn economy(&self) -> Option<&Economy> {
        match self {
            Subject::Equilibrium { economy, .. } => economy.as_ref(),
            _ => None,
        }
    }

    /// True for equilibrium manifolds built with positivity enforced.
    pub fn is_equilibrium_manifold(&self) -> bool {
        matches!(self, Subject::Equilibrium { manifold, .. } if manifold.kind() == ManifoldKind::EquilibriumM2)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Subject::Equilibrium { manifold, economy } => match (manifold.kind(), economy) {
                (ManifoldKind::Remark1, _) => "remark1",
                (_, Some(_)) => "economy",
                _ => "equilibrium_m2",
            },
            Subject::Hypersurface(_) => "remark2",
            Subject::Chart(_) => "analytic",
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.immersion().domain().bounds[0]
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FgpConfig {
    /// Normal residual at or below which a curve counts as a geodesic.
    pub geodesic_tol: f64,
    /// Residual at or above which a curve is clearly not a geodesic.
    pub failure_tol: f64,
    /// Largest `|ṗ_j|` still counted as a constant price.
    pub constancy_tol: f64,
    /// Residual samples per coordinate curve.
    pub samples: usize,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_240_501;

impl Default for FgpConfig {
    fn default() -> Self {
        FgpConfig {
            geodesic_tol: 1e-8,
            failure_tol: 1e-3,
            constancy_tol: 1e-6,
            samples: 101,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    FgpHolds,
    FgpFails,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveResidual {
    /// `α` base point of a `t`-curve, or `(t, j)` for an `α_j`-line.
    pub base: Vec<f64>,
    pub max_normal: f64,
    pub max_total: f64,
    /// Metric length of the sampled curve segment.
    pub length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FgpReport {
    pub subject: String,
    pub kind: String,
    pub per_curve: Vec<CurveResidual>,
    pub alpha_lines: Vec<CurveResidual>,
    pub price_variation: Option<f64>,
    pub positivity_ok: Option<bool>,
    pub positivity: Option<PositivityAudit>,
    pub verdict: Verdict,
    /// Coordinate curves are geodesics while the price varies.
    pub theorem_violation: bool,
    pub notes: Vec<String>,
    pub config: FgpConfig,
}

impl FgpReport {
    pub fn max_residual(&self) -> f64 {
        self.per_curve.iter().map(|c| c.max_normal).fold(0.0, f64::max)
    }
}

/// `max_j max_t |ṗ_j(t)|` over the grid.
pub fn price_constancy(curve: &dyn PriceIncomeCurve, t_grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &t in t_grid {
        for d in curve.jet(t)?.dp {
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Normal residual of the `t`-curve through `base`, after arc-length
/// reparametrization over the whole `t`-range.
pub fn coordinate_curve_residual(geom: &Geometry, base: &[f64], samples: usize) -> Result<CurveResidual> {
    let (lo, hi) = geom.domain().bounds[0];
    let curve = crate::manifolds::CoordinateCurve { base: base.to_vec() }.line();
    let arc = arc_length_reparametrize(geom, Arc::new(curve), (lo, hi))?;
    let (a, b) = arc.span();
    let report = geodesic_residual(geom, &arc, &uniform_grid(a, b, samples))?;
    Ok(CurveResidual {
        base: base.to_vec(),
        max_normal: report.max_normal,
        max_total: report.total.iter().cloned().fold(0.0, f64::max),
        length: arc.length(),
    })
}

fn alpha_line_residual(geom: &Geometry, t: f64, j: usize, samples: usize) -> Result<CurveResidual> {
    let m = geom.dim();
    let (lo, hi) = geom.domain().bounds[j + 1];
    let mut base = vec![0.0; m - 1];
    base[j] = lo;
    let line = alpha_line(t, &base, j);
    let report = geodesic_residual(geom, &line, &uniform_grid(0.0, hi - lo, samples))?;
    let speed = geom.metric(line.jet(0.0)?.point.as_slice())?.g[(j + 1, j + 1)].sqrt();
    Ok(CurveResidual {
        base: vec![t, j as f64],
        max_normal: report.max_normal,
        max_total: report.total.iter().cloned().fold(0.0, f64::max),
        length: speed * (hi - lo),
    })
}

pub fn check_fgp(subject: &Subject, config: &FgpConfig) -> Result<FgpReport> {
    let f = subject.immersion();
    let geom = Geometry::new(f.clone()).with_engine(DerivativeEngine::Dual);
    let m = f.dim_param();
    if m < 2 {
        return Err(Error::invalid("need at least one α coordinate"));
    }
    let per_curve = coordinate_curves(m)
        .iter()
        .map(|c| coordinate_curve_residual(&geom, &c.base, config.samples))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = subject.t_range();
    let alpha_lines = (0..m - 1)
        .map(|j| alpha_line_residual(&geom, 0.5 * (lo + hi), j, config.samples))
        .collect::<Result<Vec<_>>>()?;

    let (price_variation, positivity) = match subject.price_curve() {
        Some(curve) => (
            Some(price_constancy(curve.as_ref(), &uniform_grid(lo, hi, 201))?),
            Some(positivity_audit(curve.as_ref())?),
        ),
        None => (None, None),
    };
    let positivity_ok = positivity.as_ref().map(PositivityAudit::ok);

    let holds = per_curve.iter().all(|c| c.max_normal <= config.geodesic_tol);
    let verdict = if holds { Verdict::FgpHolds } else { Verdict::FgpFails };
    let varies = price_variation.is_some_and(|v| v > config.constancy_tol);
    let theorem_violation = holds && varies;

    let mut notes = Vec::new();
    let ambiguous: Vec<String> = per_curve
        .iter()
        .filter(|c| c.max_normal > config.geodesic_tol && c.max_normal < config.failure_tol)
        .map(|c| format!("{:?}", c.base))
        .collect();
    if !ambiguous.is_empty() {
        notes.push(format!(
            "residuals between the geodesic ({:e}) and failure ({:e}) tolerances at bases {}",
            config.geodesic_tol,
            config.failure_tol,
            ambiguous.join(", ")
        ));
    }
    if price_variation.is_none() {
        notes.push("not an equilibrium manifold: price variation and positivity do not apply".into());
    }
    if theorem_violation {
        match &positivity {
            Some(audit) if !audit.ok() => {
                let (t, j) = audit.violation.unwrap();
                notes.push(format!(
                    "THEOREM_VIOLATION: coordinate curves are geodesics but prices vary; \
                     price {} is non-positive at t = {t} (minimum {} at t = {}), so the positive-price \
                     premise of the constant-price argument does not hold",
                    j + 1,
                    audit.min_price,
                    audit.at
                ));
            }
            _ => notes.push(
                "THEOREM_VIOLATION: coordinate curves are geodesics while prices stay positive and vary; \
                 the t-curves are straight segments on a bounded t-range, which the constant-price argument \
                 (linear price positive for every real t) does not cover"
                    .into(),
            ),
        }
    }
    Ok(FgpReport {
        subject: f.name(),
        kind: subject.kind().into(),
        per_curve,
        alpha_lines,
        price_variation,
        positivity_ok,
        positivity,
        verdict,
        theorem_violation,
        notes,
        config: *config,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DashboardConfig {
    pub fgp: FgpConfig,
    /// Number of sampled (point, plane) pairs; at least 50.
    pub curvature_samples: usize,
    pub curvature_tol: f64,
    /// Randomly sampled endowment fibers; at least 5.
    pub fibers: usize,
    /// Log10 spacing of the equilibrium scan.
    pub resolution: f64,
}

impl Default for DashboardConfig {
    fn default() -> Self {
        DashboardConfig {
            fgp: FgpConfig::default(),
            curvature_samples: 50,
            curvature_tol: 1e-6,
            fibers: 5,
            resolution: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSummary {
    pub samples: usize,
    pub max_abs: f64,
    /// Point and plane of the largest `|K|`.
    pub worst_point: Vec<f64>,
    pub worst_plane: (Vec<f64>, Vec<f64>),
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberCount {
    pub endowment: Vec<f64>,
    pub count: usize,
    pub roots: Vec<f64>,
    pub censored: bool,
    pub warning: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Consistency {
    Consistent,
    Inconsistent,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ImplicationCheck {
    pub implication: String,
    pub holds: Option<bool>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryDashboard {
    pub subject: String,
    pub kind: String,
    pub seed: u64,
    pub price_constancy: Option<f64>,
    pub curvature: CurvatureSummary,
    pub fgp: FgpReport,
    pub equilibrium_counts: Option<Vec<FiberCount>>,
    pub entropy: &'static str,
    pub consistency: Consistency,
    pub checks: Vec<ImplicationCheck>,
    pub observations: Vec<String>,
    pub config: DashboardConfig,
}

impl CorollaryDashboard {
    /// 0 when consistent, 2 when a theorem-direction violation was flagged.
    pub fn exit_code(&self) -> i32 {
        if self.fgp.theorem_violation || self.consistency == Consistency::Inconsistent {
            2
        } else {
            0
        }
    }
}

/// Random tangent plane with well-separated directions.
fn random_plane(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (uu, vv, uv) = (
            u.iter().map(|a| a * a).sum::<f64>(),
            v.iter().map(|a| a * a).sum::<f64>(),
            u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>(),
        );
        if uu * vv - uv * uv > 0.01 * uu * vv {
            return (u, v);
        }
    }
}

pub fn sample_curvature(f: &dyn Immersion, samples: usize, rng: &mut ChaCha8Rng) -> Result<CurvatureSummary> {
    let m = f.dim_param();
    let inner = f.domain().shrink(0.02);
    let mut out = CurvatureSummary {
        samples,
        max_abs: 0.0,
        worst_point: vec![],
        worst_plane: (vec![], vec![]),
    };
    for _ in 0..samples {
        let x: Vec<f64> = inner.bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        let (u, v) = random_plane(rng, m);
        let k = sectional_curvature(f, &x, &u, &v)?;
        if k.sectional.abs() >= out.max_abs || out.worst_point.is_empty() {
            out.max_abs = k.sectional.abs();
            out.worst_point = x;
            out.worst_plane = (u, v);
        }
    }
    Ok(out)
}

fn fiber_counts(econ: &Economy, cfg: &DashboardConfig, rng: &mut ChaCha8Rng) -> Result<Vec<FiberCount>> {
    let mut endowments: Vec<Vec<f64>> = econ.omega1.iter().cloned().collect();
    for _ in 0..cfg.fibers {
        endowments.push(econ.r.iter().map(|r| r * rng.gen_range(0.05..0.95)).collect());
    }
    endowments
        .into_iter()
        .map(|w| {
            let set = count_equilibria_at(econ, &w, cfg.resolution)?;
            Ok(FiberCount {
                endowment: w,
                count: set.count,
                roots: set.roots.iter().map(|r| r.p[0]).collect(),
                censored: set.censored,
                warning: set.scan_warning,
            })
        })
        .collect()
}

pub fn corollary_dashboard(subject: &Subject, cfg: &DashboardConfig) -> Result<CorollaryDashboard> {
    if cfg.curvature_samples < 50 || cfg.fibers < 5 {
        return Err(Error::invalid("dashboard needs at least 50 curvature samples and 5 fibers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fgp.seed);
    let f = subject.immersion();
    let fgp = check_fgp(subject, &cfg.fgp)?;
    let curvature = sample_curvature(f.as_ref(), cfg.curvature_samples, &mut rng)?;
    let mut observations = Vec::new();
    let equilibrium_counts = match subject.economy() {
        Some(e) if e.goods == 2 => Some(fiber_counts(e, cfg, &mut rng)?),
        Some(_) => {
            observations.push("equilibrium counts: N/A (fiber scan needs L = 2)".into());
            None
        }
        None => {
            observations.push("equilibrium counts: N/A (no economy backs this manifold)".into());
            None
        }
    };
    let price_constancy = fgp.price_variation;

    let mut checks = Vec::new();
    let consistency = match price_constancy {
        Some(score) if score <= cfg.fgp.constancy_tol => {
            checks.push(ImplicationCheck {
                implication: "constant price ⟹ zero curvature".into(),
                holds: Some(curvature.max_abs <= cfg.curvature_tol),
                detail: format!("max |K| = {:e} over {} samples", curvature.max_abs, curvature.samples),
            });
            checks.push(ImplicationCheck {
                implication: "constant price ⟹ coordinate curves are geodesics".into(),
                holds: Some(fgp.verdict == Verdict::FgpHolds),
                detail: format!("max coordinate-curve residual {:e}", fgp.max_residual()),
            });
            let unique = equilibrium_counts.as_ref().map(|c| c.iter().all(|f| f.count == 1));
            checks.push(ImplicationCheck {
                implication: "constant price ⟹ unique equilibrium".into(),
                holds: unique,
                detail: match &equilibrium_counts {
                    Some(c) => format!("fiber counts {:?}", c.iter().map(|f| f.count).collect::<Vec<_>>()),
                    None => "no fibers sampled".into(),
                },
            });
            if checks.iter().all(|c| c.holds != Some(false)) {
                Consistency::Consistent
            } else {
                Consistency::Inconsistent
            }
        }
        Some(score) => {
            observations.push(format!(
                "price varies (max |dp/dt| = {score:e}); only the constant-price direction is checked"
            ));
            observations.push(format!(
                "observed: max |K| = {:e}, FGP verdict {:?}",
                curvature.max_abs, fgp.verdict
            ));
            if let Some(c) = &equilibrium_counts {
                let counts: Vec<usize> = c.iter().map(|f| f.count).collect();
                observations.push(format!("observed fiber counts {counts:?}"));
                if counts.iter().all(|&n| n == 1) {
                    observations.push(
                        "every sampled fiber has a unique equilibrium although the price varies; \
                         per-fiber uniqueness is not the corollary's uniqueness condition"
                            .into(),
                    );
                }
            }
            Consistency::NotApplicable
        }
        None => {
            observations.push(format!(
                "not an equilibrium manifold: observed max |K| = {:e}, FGP verdict {:?}",
                curvature.max_abs, fgp.verdict
            ));
            Consistency::NotApplicable
        }
    };
    Ok(CorollaryDashboard {
        subject: f.name(),
        kind: subject.kind().into(),
        seed: cfg.fgp.seed,
        price_constancy,
        curvature,
        fgp,
        equilibrium_counts,
        entropy: "UNAVAILABLE",
        consistency,
        checks,
        observations,
        config: *cfg,
    })
}
