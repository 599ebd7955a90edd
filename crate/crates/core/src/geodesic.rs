//! Geodesic equation: integration, residuals, reparametrization and shooting.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::diffgeo::{
    christoffel_from_metric, directional, induced_metric, metric_derivatives, unit_normal,
    ChristoffelSymbols, DerivativeEngine, Domain, Immersion, MetricTensor,
};
use crate::error::{Error, Result};
use crate::expr::CurveExpression;
use crate::io::fmt_num;
use crate::scalar::HyperDual;

/// An immersion together with the rule used to differentiate its metric.
#[derive(Clone)]
pub struct Geometry {
    immersion: Arc<dyn Immersion>,
    engine: DerivativeEngine,
}

impl Geometry {
    pub fn new(immersion: Arc<dyn Immersion>) -> Self {
        Geometry {
            immersion,
            engine: DerivativeEngine::default(),
        }
    }

    pub fn with_engine(mut self, engine: DerivativeEngine) -> Self {
        self.engine = engine;
        self
    }

    pub fn immersion(&self) -> &dyn Immersion {
        self.immersion.as_ref()
    }

    pub fn engine(&self) -> DerivativeEngine {
        self.engine
    }

    pub fn dim(&self) -> usize {
        self.immersion.dim_param()
    }

    pub fn domain(&self) -> &Domain {
        self.immersion.domain()
    }

    pub fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        induced_metric(self.immersion(), x)
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<ChristoffelSymbols> {
        christoffel_from_metric(self.immersion(), x, self.engine)
    }

    fn acceleration(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.christoffel(x.as_slice())?.contract(v, v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub states: Vec<GeodesicState>,
    pub step: f64,
    pub manifold: String,
    pub integrator: String,
    pub step_policy: String,
    /// Set when integration stopped because the state left the domain.
    pub exited_domain: bool,
}

impl Trajectory {
    pub fn last(&self) -> &GeodesicState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// `sqrt(⟨v, v⟩_g)` at every state.
    pub fn metric_speeds(&self, geom: &Geometry) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| {
                let g = geom.metric(&s.x)?;
                Ok(g.norm_sq(&DVector::from_column_slice(&s.v)).sqrt())
            })
            .collect()
    }

    /// Largest relative change of `⟨v, v⟩_g` against the initial state.
    pub fn energy_drift(&self, geom: &Geometry) -> Result<f64> {
        let speeds = self.metric_speeds(geom)?;
        let e0 = speeds[0] * speeds[0];
        Ok(speeds
            .iter()
            .map(|s| ((s * s) - e0).abs() / e0)
            .fold(0.0, f64::max))
    }

    /// Length from trapezoidal quadrature of the metric speed.
    pub fn length(&self, geom: &Geometry) -> Result<f64> {
        let speeds = self.metric_speeds(geom)?;
        Ok(self
            .states
            .windows(2)
            .zip(speeds.windows(2))
            .map(|(s, v)| 0.5 * (v[0] + v[1]) * (s[1].time - s[0].time))
            .sum())
    }

    pub fn to_csv(&self, geom: &Geometry) -> Result<String> {
        let m = geom.dim();
        let speeds = self.metric_speeds(geom)?;
        let mut out = String::from("time");
        for i in 0..m {
            let _ = write!(out, ",x_{i}");
        }
        for i in 0..m {
            let _ = write!(out, ",v_{i}");
        }
        out.push_str(",metric_speed\n");
        for (s, speed) in self.states.iter().zip(speeds) {
            out.push_str(&fmt_num(s.time));
            for v in s.x.iter().chain(&s.v) {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push(',');
            out.push_str(&fmt_num(speed));
            out.push('\n');
        }
        Ok(out)
    }
}

pub const DEFAULT_STEP: f64 = 1e-3;

/// Classic fixed-step RK4 on `ẋ = v, v̇^k = −Γ^k_ij v^i v^j`.
///
/// The step is shrunk slightly so that the horizon is hit exactly. If a stage
/// leaves the domain the partial trajectory is returned with `exited_domain`.
pub fn geodesic_ivp(geom: &Geometry, x0: &[f64], v0: &[f64], horizon: f64, step: f64) -> Result<Trajectory> {
    let m = geom.dim();
    if x0.len() != m || v0.len() != m {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("step and horizon must be positive"));
    }
    if v0.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("initial velocity is zero"));
    }
    geom.domain().check(x0)?;

    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut traj = Trajectory {
        states: vec![GeodesicState {
            x: x0.to_vec(),
            v: v0.to_vec(),
            time: 0.0,
        }],
        step: h,
        manifold: geom.immersion().name(),
        integrator: "rk4".into(),
        step_policy: "fixed".into(),
        exited_domain: false,
    };
    let mut x = DVector::from_column_slice(x0);
    let mut v = DVector::from_column_slice(v0);

    let stage = |x: &DVector<f64>, v: &DVector<f64>| -> Result<Option<DVector<f64>>> {
        if !geom.domain().contains(x.as_slice()) {
            return Ok(None);
        }
        match geom.acceleration(x, v) {
            Ok(a) => Ok(Some(a)),
            Err(Error::OutsideDomain { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    for i in 1..=n {
        let Some(a1) = stage(&x, &v)? else { break };
        let (x2, v2) = (&x + &v * (0.5 * h), &v + &a1 * (0.5 * h));
        let Some(a2) = stage(&x2, &v2)? else { break };
        let (x3, v3) = (&x + &v2 * (0.5 * h), &v + &a2 * (0.5 * h));
        let Some(a3) = stage(&x3, &v3)? else { break };
        let (x4, v4) = (&x + &v3 * h, &v + &a3 * h);
        let Some(a4) = stage(&x4, &v4)? else { break };
        let xn = &x + (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        let vn = &v + (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (h / 6.0);
        if !geom.domain().contains(xn.as_slice()) {
            break;
        }
        x = xn;
        v = vn;
        traj.states.push(GeodesicState {
            x: x.as_slice().to_vec(),
            v: v.as_slice().to_vec(),
            time: i as f64 * h,
        });
    }
    traj.exited_domain = traj.states.len() < n + 1;
    Ok(traj)
}

/// Position and its first two derivatives along a parameter-space curve.
#[derive(Clone, Debug)]
pub struct CurveJet {
    pub point: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

pub trait ParamCurve: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, s: f64) -> Result<CurveJet>;
}

/// `s ↦ base + s · direction`.
#[derive(Clone, Debug)]
pub struct LineCurve {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
}

impl LineCurve {
    pub fn new(base: Vec<f64>, direction: Vec<f64>) -> Self {
        LineCurve { base, direction }
    }
}

impl ParamCurve for LineCurve {
    fn dim(&self) -> usize {
        self.base.len()
    }
    fn jet(&self, s: f64) -> Result<CurveJet> {
        let b = DVector::from_column_slice(&self.base);
        let d = DVector::from_column_slice(&self.direction);
        Ok(CurveJet {
            point: &b + &d * s,
            velocity: d,
            acceleration: DVector::zeros(self.base.len()),
        })
    }
}

type CurveFn = dyn Fn(HyperDual) -> Vec<HyperDual> + Send + Sync;

/// A curve given by a closure; derivatives come from hyper-dual evaluation.
pub struct FnCurve {
    dim: usize,
    f: Box<CurveFn>,
}

impl FnCurve {
    pub fn new(dim: usize, f: impl Fn(HyperDual) -> Vec<HyperDual> + Send + Sync + 'static) -> Self {
        FnCurve { dim, f: Box::new(f) }
    }
}

impl ParamCurve for FnCurve {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, s: f64) -> Result<CurveJet> {
        let y = (self.f)(HyperDual::new(s, 1.0, 1.0, 0.0));
        Ok(CurveJet {
            point: DVector::from_iterator(self.dim, y.iter().map(|c| c.re)),
            velocity: DVector::from_iterator(self.dim, y.iter().map(|c| c.e1)),
            acceleration: DVector::from_iterator(self.dim, y.iter().map(|c| c.e12)),
        })
    }
}

/// Curve known only at uniformly spaced samples. Derivatives use 5-point
/// centered stencils in the interior, 3-point centered stencils one sample in
/// from either end, and one-sided 4-point stencils at the ends.
#[derive(Clone, Debug)]
pub struct SampledCurve {
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
}

impl SampledCurve {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 5 {
            return Err(Error::invalid("sampled curve needs at least 5 matching samples"));
        }
        let h = times[1] - times[0];
        if !(h > 0.0) {
            return Err(Error::invalid("sample times must increase"));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::invalid("sample times must be uniformly spaced"));
            }
        }
        Ok(SampledCurve {
            times,
            points: points.into_iter().map(DVector::from_vec).collect(),
        })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        SampledCurve::new(
            traj.states.iter().map(|s| s.time).collect(),
            traj.states.iter().map(|s| s.x.clone()).collect(),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn index_of(&self, s: f64) -> Result<usize> {
        let h = self.times[1] - self.times[0];
        let i = ((s - self.times[0]) / h).round();
        if i < 0.0 || i as usize >= self.times.len() || (self.times[i as usize] - s).abs() > 1e-9 * h {
            return Err(Error::invalid(format!("{s} is not a sample time of this curve")));
        }
        Ok(i as usize)
    }
}

impl ParamCurve for SampledCurve {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn jet(&self, s: f64) -> Result<CurveJet> {
        let i = self.index_of(s)?;
        let n = self.times.len();
        let h = self.times[1] - self.times[0];
        let p = |k: usize| &self.points[k];
        let (vel, acc) = if i >= 2 && i + 2 < n {
            (
                (p(i - 2) - p(i - 1) * 8.0 + p(i + 1) * 8.0 - p(i + 2)) / (12.0 * h),
                (-p(i - 2) + p(i - 1) * 16.0 - p(i) * 30.0 + p(i + 1) * 16.0 - p(i + 2)) / (12.0 * h * h),
            )
        } else if i == 0 {
            (
                (p(0) * -11.0 + p(1) * 18.0 - p(2) * 9.0 + p(3) * 2.0) / (6.0 * h),
                (p(0) * 2.0 - p(1) * 5.0 + p(2) * 4.0 - p(3)) / (h * h),
            )
        } else if i == n - 1 {
            (
                (p(i) * 11.0 - p(i - 1) * 18.0 + p(i - 2) * 9.0 - p(i - 3) * 2.0) / (6.0 * h),
                (p(i) * 2.0 - p(i - 1) * 5.0 + p(i - 2) * 4.0 - p(i - 3)) / (h * h),
            )
        } else {
            (
                (p(i + 1) - p(i - 1)) / (2.0 * h),
                (p(i + 1) - p(i) * 2.0 + p(i - 1)) / (h * h),
            )
        };
        Ok(CurveJet {
            point: p(i).clone(),
            velocity: vel,
            acceleration: acc,
        })
    }
}

/// `s ↦ γ(τ(s))` for an analytic time warp `τ`.
pub struct TimeWarp {
    inner: Arc<dyn ParamCurve>,
    warp: CurveExpression,
}

impl TimeWarp {
    pub fn new(inner: Arc<dyn ParamCurve>, warp: CurveExpression) -> Self {
        TimeWarp { inner, warp }
    }
}

impl ParamCurve for TimeWarp {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet(&self, s: f64) -> Result<CurveJet> {
        let (tau, d1, d2) = self.warp.jet(s);
        let j = self.inner.jet(tau)?;
        Ok(CurveJet {
            point: j.point,
            velocity: &j.velocity * d1,
            acceleration: &j.acceleration * (d1 * d1) + &j.velocity * d2,
        })
    }
}

/// Geodesic residual `γ̈^k + Γ^k_ij γ̇^i γ̇^j` on a grid, split into the part
/// along `γ̇` and the `g`-orthogonal remainder. Magnitudes are `g`-norms;
/// `total_euclidean` is the plain Euclidean norm over `k`.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub total: Vec<f64>,
    pub total_euclidean: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangential: Vec<f64>,
    pub max_normal: f64,
}

impl ResidualReport {
    pub fn is_pregeodesic(&self, tol: f64) -> bool {
        self.max_normal <= tol
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,total,normal,tangential\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_num(self.grid[i]),
                fmt_num(self.total[i]),
                fmt_num(self.normal[i]),
                fmt_num(self.tangential[i])
            );
        }
        out
    }
}

pub fn geodesic_residual(geom: &Geometry, curve: &dyn ParamCurve, grid: &[f64]) -> Result<ResidualReport> {
    if curve.dim() != geom.dim() {
        return Err(Error::invalid("curve dimension does not match the manifold"));
    }
    let mut report = ResidualReport {
        grid: grid.to_vec(),
        total: Vec::with_capacity(grid.len()),
        total_euclidean: Vec::with_capacity(grid.len()),
        normal: Vec::with_capacity(grid.len()),
        tangential: Vec::with_capacity(grid.len()),
        max_normal: 0.0,
    };
    for &s in grid {
        let jet = curve.jet(s)?;
        let x = jet.point.as_slice();
        geom.domain().check(x)?;
        let gamma = geom.christoffel(x)?;
        let metric = geom.metric(x)?;
        let r = &jet.acceleration + gamma.contract(&jet.velocity, &jet.velocity);
        let speed_sq = metric.norm_sq(&jet.velocity);
        if speed_sq <= 0.0 {
            return Err(Error::VanishingSpeed { at: s });
        }
        let along = metric.inner(&r, &jet.velocity) / speed_sq;
        let rn = &r - &jet.velocity * along;
        let normal = metric.norm_sq(&rn).max(0.0).sqrt();
        report.total.push(metric.norm_sq(&r).max(0.0).sqrt());
        report.total_euclidean.push(r.norm());
        report.normal.push(normal);
        report.tangential.push(along.abs() * speed_sq.sqrt());
        report.max_normal = report.max_normal.max(normal);
    }
    Ok(report)
}

// 5-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Arc-length reparametrization of a curve on `[a, b]`.
///
/// `τ(s)` is found by Newton's method on the cumulative length; velocity and
/// acceleration follow from `τ' = |γ'|_g⁻¹` and
/// `τ'' = −½ q'(τ) / q(τ)²` with `q = ⟨γ', γ'⟩_g`.
pub struct ArcLengthCurve {
    geom: Geometry,
    inner: Arc<dyn ParamCurve>,
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

pub const ARC_LENGTH_PANELS: usize = 256;

impl ArcLengthCurve {
    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn span(&self) -> (f64, f64) {
        (0.0, self.length())
    }

    fn speed(&self, tau: f64) -> Result<f64> {
        let jet = self.inner.jet(tau)?;
        let g = self.geom.metric(jet.point.as_slice())?;
        let q = g.norm_sq(&jet.velocity);
        if !(q > 1e-24) {
            return Err(Error::VanishingSpeed { at: tau });
        }
        Ok(q.sqrt())
    }

    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            s += w * self.speed(mid + half * x)?;
        }
        Ok(s * half)
    }

    /// Original parameter at arc length `s`.
    pub fn original_time(&self, s: f64) -> Result<f64> {
        let total = self.length();
        if s < -1e-12 * total.max(1.0) || s > total * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(format!("arc length {s} outside [0, {total}]")));
        }
        let k = match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => return Ok(self.knots[k]),
            Err(k) => k.clamp(1, self.knots.len() - 1) - 1,
        };
        let (t0, t1) = (self.knots[k], self.knots[k + 1]);
        let (s0, s1) = (self.cumulative[k], self.cumulative[k + 1]);
        let mut tau = (t0 + (t1 - t0) * (s - s0) / (s1 - s0)).clamp(t0, t1);
        for _ in 0..50 {
            let f = s0 + self.integral(t0, tau)? - s;
            let step = f / self.speed(tau)?;
            tau = (tau - step).clamp(t0, t1);
            if step.abs() <= 1e-15 * (1.0 + tau.abs()) {
                break;
            }
        }
        Ok(tau)
    }
}

impl ParamCurve for ArcLengthCurve {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, s: f64) -> Result<CurveJet> {
        let tau = self.original_time(s)?;
        let j = self.inner.jet(tau)?;
        let x = j.point.as_slice();
        let (metric, dg) = metric_derivatives(self.geom.immersion(), x, DerivativeEngine::Dual)?;
        let q = metric.norm_sq(&j.velocity);
        if !(q > 1e-24) {
            return Err(Error::VanishingSpeed { at: tau });
        }
        let mut dq = 2.0 * metric.inner(&j.acceleration, &j.velocity);
        for (k, dgk) in dg.iter().enumerate() {
            dq += j.velocity[k] * (j.velocity.transpose() * dgk * &j.velocity)[(0, 0)];
        }
        let d1 = 1.0 / q.sqrt();
        let d2 = -0.5 * dq / (q * q);
        Ok(CurveJet {
            point: j.point,
            velocity: &j.velocity * d1,
            acceleration: &j.acceleration * (d1 * d1) + &j.velocity * d2,
        })
    }
}

pub fn arc_length_reparametrize(
    geom: &Geometry,
    curve: Arc<dyn ParamCurve>,
    domain: (f64, f64),
) -> Result<ArcLengthCurve> {
    let (a, b) = domain;
    if !(b > a) {
        return Err(Error::invalid("empty curve domain"));
    }
    let mut out = ArcLengthCurve {
        geom: geom.clone(),
        inner: curve,
        knots: (0..=ARC_LENGTH_PANELS)
            .map(|i| a + (b - a) * i as f64 / ARC_LENGTH_PANELS as f64)
            .collect(),
        cumulative: vec![0.0],
    };
    let mut acc = 0.0;
    for i in 0..ARC_LENGTH_PANELS {
        acc += out.integral(out.knots[i], out.knots[i + 1])?;
        out.cumulative.push(acc);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalTestReport {
    pub grid: Vec<f64>,
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
}

/// Component of the ambient acceleration of `f ∘ γ` orthogonal to the unit
/// normal of the hypersurface `f`.
pub fn ambient_normal_test(f: &dyn Immersion, curve: &dyn ParamCurve, grid: &[f64]) -> Result<NormalTestReport> {
    let m = f.dim_param();
    if f.dim_ambient() != m + 1 {
        return Err(Error::Unsupported(format!(
            "ambient normal test needs n = m + 1, got m = {m}, n = {}",
            f.dim_ambient()
        )));
    }
    let mut out = NormalTestReport {
        grid: grid.to_vec(),
        deviation: Vec::with_capacity(grid.len()),
        max_deviation: 0.0,
    };
    let zero = vec![0.0; m];
    for &s in grid {
        let jet = curve.jet(s)?;
        let x = jet.point.as_slice();
        f.domain().check(x)?;
        let (_, second) = directional(f, x, jet.velocity.as_slice(), jet.velocity.as_slice());
        let (first, _) = directional(f, x, jet.acceleration.as_slice(), &zero);
        let acc = first + second;
        let normal = unit_normal(f, x)?;
        let dev = (&acc - &normal * acc.dot(&normal)).norm();
        out.max_deviation = out.max_deviation.max(dev);
        out.deviation.push(dev);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct BvpOptions {
    pub step: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub damping: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            step: DEFAULT_STEP,
            max_iterations: 50,
            tolerance: 1e-7,
            damping: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BvpSolution {
    pub trajectory: Trajectory,
    pub initial_velocity: Vec<f64>,
    pub endpoint_error: f64,
    pub length: f64,
    pub iterations: usize,
    /// Number of Newton steps that had to be damped after leaving the domain.
    pub damped_retries: usize,
}

/// Newton shooting on the unit time interval with a finite-difference
/// Jacobian of the endpoint map.
pub fn geodesic_bvp(
    geom: &Geometry,
    x_start: &[f64],
    x_end: &[f64],
    init_guess: Option<&[f64]>,
    opts: BvpOptions,
) -> Result<BvpSolution> {
    let m = geom.dim();
    geom.domain().check(x_start)?;
    geom.domain().check(x_end)?;
    let target = DVector::from_column_slice(x_end);
    let start = DVector::from_column_slice(x_start);
    let mut v = match init_guess {
        Some(g) => DVector::from_column_slice(g),
        None => &target - &start,
    };
    if v.norm() == 0.0 {
        return Err(Error::invalid("start and end coincide"));
    }

    let shoot = |v: &DVector<f64>| -> Result<Option<(Trajectory, DVector<f64>)>> {
        let traj = geodesic_ivp(geom, x_start, v.as_slice(), 1.0, opts.step)?;
        if traj.exited_domain {
            return Ok(None);
        }
        let end = DVector::from_column_slice(&traj.last().x);
        Ok(Some((traj, end - &target)))
    };

    let Some((mut traj, mut res)) = shoot(&v)? else {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    };
    let mut damped = 0;
    let mut iterations = 0;
    while res.norm() > 0.01 * opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let eps = 1e-6 * (1.0 + v.amax());
        let mut jac = nalgebra::DMatrix::zeros(m, m);
        for j in 0..m {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += eps;
            vm[j] -= eps;
            let (Some((_, rp)), Some((_, rm))) = (shoot(&vp)?, shoot(&vm)?) else {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res.norm(),
                });
            };
            jac.set_column(j, &((rp - rm) / (2.0 * eps)));
        }
        let Some(delta) = jac.lu().solve(&(-&res)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &v + &delta * lambda;
            match shoot(&trial)? {
                Some((t, r)) => {
                    accepted = Some((trial, t, r));
                    break;
                }
                None => {
                    damped += 1;
                    lambda *= opts.damping;
                }
            }
        }
        let Some((nv, nt, nr)) = accepted else { break };
        let improved = nr.norm() < res.norm();
        v = nv;
        traj = nt;
        res = nr;
        if !improved && res.norm() <= opts.tolerance {
            break;
        }
    }
    let err = res.norm();
    if err > opts.tolerance {
        return Err(Error::NoConvergence {
            iterations,
            residual: err,
        });
    }
    let length = traj.length(geom)?;
    Ok(BvpSolution {
        trajectory: traj,
        initial_velocity: v.as_slice().to_vec(),
        endpoint_error: err,
        length,
        iterations,
        damped_retries: damped,
    })
}
