//! Differential geometry of parametrized submanifolds of Euclidean space.
//!
//! An [`Immersion`] is evaluated over [`HyperDual`] numbers, which gives the
//! Jacobian (one forward pass per column) and exact second derivatives
//! without a separate symbolic layer. The induced metric, Christoffel
//! symbols and curvature are all built from that single entry point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::HyperDual;

/// Axis-aligned box of admissible parameter values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Domain { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: x.to_vec() })
        }
    }

    /// Shrinks every side by `frac` of its width; used to keep random
    /// samples away from finite-difference stencils that would leave the box.
    pub fn shrink(&self, frac: f64) -> Domain {
        Domain::new(
            self.bounds
                .iter()
                .map(|(lo, hi)| {
                    let pad = (hi - lo) * frac;
                    (lo + pad, hi - pad)
                })
                .collect(),
        )
    }
}

/// A smooth map from a box in `R^m` into `R^n`.
pub trait Immersion: Send + Sync {
    fn dim_param(&self) -> usize;
    fn dim_ambient(&self) -> usize;
    fn domain(&self) -> &Domain;

    /// Evaluates the map on hyper-dual inputs. Implementations must not
    /// check the domain; callers do.
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual>;

    fn name(&self) -> String {
        "immersion".to_string()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let xs: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
        self.eval_hd(&xs).into_iter().map(|y| y.re).collect()
    }
}

impl<T: Immersion + ?Sized> Immersion for std::sync::Arc<T> {
    fn dim_param(&self) -> usize {
        (**self).dim_param()
    }
    fn dim_ambient(&self) -> usize {
        (**self).dim_ambient()
    }
    fn domain(&self) -> &Domain {
        (**self).domain()
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        (**self).eval_hd(x)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

fn seeded(x: &[f64], d1: &[f64], d2: &[f64]) -> Vec<HyperDual> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| HyperDual::new(v, d1[i], d2[i], 0.0))
        .collect()
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = 1.0;
    e
}

/// Directional derivative `DΦ(x)[u]` and second derivative `D²Φ(x)[u, v]`.
pub fn directional(f: &dyn Immersion, x: &[f64], u: &[f64], v: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let y = f.eval_hd(&seeded(x, u, v));
    (
        DVector::from_iterator(y.len(), y.iter().map(|c| c.e1)),
        DVector::from_iterator(y.len(), y.iter().map(|c| c.e12)),
    )
}

/// Smallest singular value below which the Jacobian is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

fn jacobian_unchecked(f: &dyn Immersion, x: &[f64]) -> DMatrix<f64> {
    let m = f.dim_param();
    let n = f.dim_ambient();
    let zero = vec![0.0; m];
    let mut jac = DMatrix::zeros(n, m);
    for j in 0..m {
        let y = f.eval_hd(&seeded(x, &unit(m, j), &zero));
        for (i, c) in y.iter().enumerate() {
            jac[(i, j)] = c.e1;
        }
    }
    jac
}

/// Column `j` is `∂f/∂x_j` at `x`.
pub fn jacobian(f: &dyn Immersion, x: &[f64]) -> Result<DMatrix<f64>> {
    f.domain().check(x)?;
    let jac = jacobian_unchecked(f, x);
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularPoint {
            point: x.to_vec(),
            reason: "immersion is not finite here".into(),
        });
    }
    let scale = jac.amax().max(1.0);
    let smallest = jac
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smallest <= RANK_TOL * scale {
        return Err(Error::NotImmersion { point: x.to_vec() });
    }
    Ok(jac)
}

/// Gram matrix of the Jacobian columns at one point, with its inverse.
#[derive(Clone, Debug)]
pub struct MetricTensor {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricTensor {
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.g * v)[(0, 0)]
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u)
    }
}

fn metric_from_jacobian(jac: &DMatrix<f64>, x: &[f64]) -> Result<MetricTensor> {
    let g = jac.transpose() * jac;
    let g = (&g + g.transpose()) * 0.5;
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    Ok(MetricTensor {
        point: x.to_vec(),
        g_inv: chol.inverse(),
        g,
    })
}

pub fn induced_metric(f: &dyn Immersion, x: &[f64]) -> Result<MetricTensor> {
    let jac = jacobian(f, x).map_err(|e| match e {
        Error::NotImmersion { point } => Error::SingularMetric { point },
        other => other,
    })?;
    metric_from_jacobian(&jac, x)
}

/// How metric derivatives are obtained when assembling Christoffel symbols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DerivativeEngine {
    /// Second-order central differences of the metric. The actual step for
    /// coordinate `h` is `step * (1 + |x_h|)`.
    CentralDifference { step: f64 },
    /// Exact metric derivatives from hyper-dual second derivatives of the map.
    Dual,
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl Default for DerivativeEngine {
    fn default() -> Self {
        DerivativeEngine::CentralDifference { step: DEFAULT_FD_STEP }
    }
}

/// `Γ^k_ij` stored as `gamma[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelSymbols {
    pub point: Vec<f64>,
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl ChristoffelSymbols {
    pub fn zeros(point: &[f64]) -> Self {
        let m = point.len();
        ChristoffelSymbols {
            point: point.to_vec(),
            gamma: vec![vec![vec![0.0; m]; m]; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][i][j]
    }

    /// Sets `Γ^k_ij` and `Γ^k_ji` together.
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.gamma[k][i][j] = v;
        self.gamma[k][j][i] = v;
    }

    /// `Γ^k_ij u^i v^j` for every `k`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let m = self.dim();
        DVector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.gamma[k][i][j] * u[i] * v[j];
                }
            }
            s
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `max |a - b| / max(1, max|a|, max|b|)` over all entries.
    pub fn relative_discrepancy(&self, other: &ChristoffelSymbols) -> f64 {
        let scale = 1.0f64.max(self.max_abs()).max(other.max_abs());
        let mut worst = 0.0f64;
        for (a, b) in self
            .gamma
            .iter()
            .flatten()
            .flatten()
            .zip(other.gamma.iter().flatten().flatten())
        {
            worst = worst.max((a - b).abs());
        }
        worst / scale
    }
}

fn fd_step(step: f64, xh: f64) -> f64 {
    step * (1.0 + xh.abs())
}

/// `∂g/∂x_h` for every `h`, together with the metric at `x`.
pub fn metric_derivatives(
    f: &dyn Immersion,
    x: &[f64],
    engine: DerivativeEngine,
) -> Result<(MetricTensor, Vec<DMatrix<f64>>)> {
    let metric = induced_metric(f, x)?;
    let m = f.dim_param();
    let derivs = match engine {
        DerivativeEngine::CentralDifference { step } => {
            let mut out = Vec::with_capacity(m);
            for h in 0..m {
                let dh = fd_step(step, x[h]);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[h] += dh;
                xm[h] -= dh;
                let gp = induced_metric(f, &xp)?;
                let gm = induced_metric(f, &xm)?;
                out.push((gp.g - gm.g) / (2.0 * dh));
            }
            out
        }
        DerivativeEngine::Dual => {
            let jac = jacobian_unchecked(f, x);
            // second[i][h] = ∂²Φ/∂x_i∂x_h
            let mut second = vec![vec![DVector::zeros(f.dim_ambient()); m]; m];
            for i in 0..m {
                for h in i..m {
                    let (_, d2) = directional(f, x, &unit(m, i), &unit(m, h));
                    second[i][h] = d2.clone();
                    second[h][i] = d2;
                }
            }
            (0..m)
                .map(|h| {
                    DMatrix::from_fn(m, m, |i, j| {
                        second[i][h].dot(&jac.column(j)) + jac.column(i).dot(&second[j][h])
                    })
                })
                .collect()
        }
    };
    Ok((metric, derivs))
}

fn christoffel_from_parts(x: &[f64], metric: &MetricTensor, dg: &[DMatrix<f64>]) -> ChristoffelSymbols {
    let m = x.len();
    let mut out = ChristoffelSymbols::zeros(x);
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for h in 0..m {
                    s += metric.g_inv[(h, k)] * (dg[i][(j, h)] + dg[j][(h, i)] - dg[h][(i, j)]);
                }
                out.set(k, i, j, 0.5 * s);
            }
        }
    }
    out
}

fn check_stencil(f: &dyn Immersion, x: &[f64], engine: DerivativeEngine, reach: f64) -> Result<()> {
    f.domain().check(x)?;
    if let DerivativeEngine::CentralDifference { step } = engine {
        for (h, (lo, hi)) in f.domain().bounds.iter().enumerate() {
            let dh = reach * fd_step(step, x[h]);
            if x[h] - dh < *lo || x[h] + dh > *hi {
                return Err(Error::OutsideDomain { point: x.to_vec() });
            }
        }
    }
    Ok(())
}

/// Levi-Civita symbols from the induced metric and its derivatives.
pub fn christoffel_from_metric(
    f: &dyn Immersion,
    x: &[f64],
    engine: DerivativeEngine,
) -> Result<ChristoffelSymbols> {
    check_stencil(f, x, engine, 1.0)?;
    let (metric, dg) = metric_derivatives(f, x, engine)?;
    Ok(christoffel_from_parts(x, &metric, &dg))
}

/// Sectional curvature of one tangent plane plus the largest Riemann component.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub plane: (Vec<f64>, Vec<f64>),
    pub sectional: f64,
    pub riemann_max_abs: f64,
}

/// Options for curvature: Christoffel symbols come from `engine` and are
/// differentiated by central differences with step `outer_step * (1 + |x_h|)`.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureOptions {
    pub engine: DerivativeEngine,
    pub outer_step: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            engine: DerivativeEngine::Dual,
            outer_step: 1e-4,
        }
    }
}

/// `R^l_ijk` stored as `r[l][i][j][k]`, convention
/// `R(∂_i, ∂_j)∂_k = ∇_i∇_j∂_k − ∇_j∇_i∂_k = R^l_ijk ∂_l`.
pub fn riemann_tensor(
    f: &dyn Immersion,
    x: &[f64],
    opts: CurvatureOptions,
) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let m = f.dim_param();
    f.domain().check(x)?;
    for (h, (lo, hi)) in f.domain().bounds.iter().enumerate() {
        let dh = fd_step(opts.outer_step, x[h]);
        let inner = match opts.engine {
            DerivativeEngine::CentralDifference { step } => fd_step(step, x[h] + dh),
            DerivativeEngine::Dual => 0.0,
        };
        if x[h] - dh - inner < *lo || x[h] + dh + inner > *hi {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
    }
    let gamma = christoffel_from_metric(f, x, opts.engine)?;
    // dgamma[i] = ∂_i Γ
    let mut dgamma = Vec::with_capacity(m);
    for i in 0..m {
        let dh = fd_step(opts.outer_step, x[i]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += dh;
        xm[i] -= dh;
        let gp = christoffel_from_metric(f, &xp, opts.engine)?;
        let gm = christoffel_from_metric(f, &xm, opts.engine)?;
        let mut d = ChristoffelSymbols::zeros(x);
        for l in 0..m {
            for a in 0..m {
                for b in 0..m {
                    d.gamma[l][a][b] = (gp.gamma[l][a][b] - gm.gamma[l][a][b]) / (2.0 * dh);
                }
            }
        }
        dgamma.push(d);
    }
    let mut r = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut v = dgamma[i].gamma[l][j][k] - dgamma[j].gamma[l][i][k];
                    for p in 0..m {
                        v += gamma.gamma[l][i][p] * gamma.gamma[p][j][k]
                            - gamma.gamma[l][j][p] * gamma.gamma[p][i][k];
                    }
                    r[l][i][j][k] = v;
                }
            }
        }
    }
    Ok(r)
}

pub fn sectional_curvature(
    f: &dyn Immersion,
    x: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<CurvatureReport> {
    sectional_curvature_with(f, x, u, v, CurvatureOptions::default())
}

pub fn sectional_curvature_with(
    f: &dyn Immersion,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    opts: CurvatureOptions,
) -> Result<CurvatureReport> {
    let m = f.dim_param();
    if u.len() != m || v.len() != m {
        return Err(Error::invalid("tangent vectors have the wrong dimension"));
    }
    let metric = induced_metric(f, x)?;
    let uu = DVector::from_column_slice(u);
    let vv = DVector::from_column_slice(v);
    let guu = metric.inner(&uu, &uu);
    let gvv = metric.inner(&vv, &vv);
    let guv = metric.inner(&uu, &vv);
    let area = guu * gvv - guv * guv;
    if area <= 1e-12 * guu * gvv {
        return Err(Error::DegeneratePlane);
    }
    let r = riemann_tensor(f, x, opts)?;
    // ⟨R(u,v)v, u⟩ = −¼ R_aijk X^ij X^ka with X = u ∧ v. Written through the
    // bivector, the value depends only on the plane even though the
    // differenced tensor is only approximately antisymmetric.
    let wedge = |i: usize, j: usize| u[i] * v[j] - u[j] * v[i];
    let mut num = 0.0;
    let mut rmax = 0.0f64;
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                let xij = wedge(i, j);
                for k in 0..m {
                    rmax = rmax.max(r[l][i][j][k].abs());
                    if xij == 0.0 {
                        continue;
                    }
                    let mut lowered = 0.0;
                    for a in 0..m {
                        lowered += metric.g[(a, l)] * wedge(k, a);
                    }
                    num -= 0.25 * r[l][i][j][k] * xij * lowered;
                }
            }
        }
    }
    Ok(CurvatureReport {
        point: x.to_vec(),
        plane: (u.to_vec(), v.to_vec()),
        sectional: num / area,
        riemann_max_abs: rmax,
    })
}

/// Unit normal of a hypersurface (`n = m + 1`) from the generalized cross
/// product of the Jacobian columns.
pub fn unit_normal(f: &dyn Immersion, x: &[f64]) -> Result<DVector<f64>> {
    let m = f.dim_param();
    let n = f.dim_ambient();
    if n != m + 1 {
        return Err(Error::Unsupported(format!(
            "normal vector needs a hypersurface, got m = {m}, n = {n}"
        )));
    }
    let jac = jacobian(f, x)?;
    let mut normal = DVector::zeros(n);
    for i in 0..n {
        let minor = jac.clone().remove_row(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        normal[i] = sign * minor.determinant();
    }
    let len = normal.norm();
    if len <= RANK_TOL * jac.amax().max(1.0).powi(m as i32) {
        return Err(Error::SingularPoint {
            point: x.to_vec(),
            reason: "degenerate normal".into(),
        });
    }
    Ok(normal / len)
}

/// Affine-in-parameters defect used by the ruled-structure check:
/// `max |f(x) − f(x₀) − Σ_j (x_j − x₀_j)(f(x₀ + e_j) − f(x₀))|` where only the
/// coordinates listed in `ruling` move.
pub fn ruling_defect(f: &dyn Immersion, base: &[f64], offsets: &[f64], ruling: &[usize]) -> f64 {
    let f0 = DVector::from_vec(f.eval(base));
    let mut predicted = f0.clone();
    let mut moved = base.to_vec();
    for (&j, &a) in ruling.iter().zip(offsets) {
        let mut bj = base.to_vec();
        bj[j] += 1.0;
        let fj = DVector::from_vec(f.eval(&bj));
        predicted += (fj - &f0) * a;
        moved[j] += a;
    }
    let actual = DVector::from_vec(f.eval(&moved));
    (actual - predicted).amax()
}
