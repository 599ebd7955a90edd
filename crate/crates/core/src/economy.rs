//! Two-consumer pure exchange economies: demand, excess demand, the
//! price-income curve over the income-share chart, and equilibrium counting.
//!
//! Prices are normalized with the last good as numéraire (`p_L = 1`).
//! Solvers work on the log of the remaining `L − 1` prices so iterates stay
//! positive.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{HyperDual, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preference {
    CobbDouglas { alpha: Vec<f64> },
    Ces { alpha: Vec<f64>, rho: f64 },
}

impl Preference {
    pub fn alpha(&self) -> &[f64] {
        match self {
            Preference::CobbDouglas { alpha } | Preference::Ces { alpha, .. } => alpha,
        }
    }

    pub fn validate(&self, goods: usize) -> Result<()> {
        let alpha = self.alpha();
        if alpha.len() != goods {
            return Err(Error::invalid(format!(
                "share vector has {} entries, expected {goods}",
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::invalid("share vector must be strictly positive"));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("shares sum to {total}, not 1")));
        }
        if let Preference::Ces { rho, .. } = self {
            if !(*rho < 1.0) || *rho == 0.0 || !rho.is_finite() {
                return Err(Error::invalid(format!("CES rho must lie in (-inf, 1) \\ {{0}}, got {rho}")));
            }
        }
        Ok(())
    }

    /// Marshallian demand; no argument checks.
    pub fn demand_generic<S: Scalar>(&self, p: &[S], w: S) -> Vec<S> {
        match self {
            Preference::CobbDouglas { alpha } => {
                alpha.iter().zip(p).map(|(a, pl)| w * *a / *pl).collect()
            }
            Preference::Ces { alpha, rho } => {
                let sigma = 1.0 / (1.0 - rho);
                let q: Vec<S> = alpha
                    .iter()
                    .zip(p)
                    .map(|(a, pl)| (S::cst(*a) / *pl).powf(S::cst(sigma)))
                    .collect();
                let mut spend = S::zero();
                for (ql, pl) in q.iter().zip(p) {
                    spend += *ql * *pl;
                }
                q.into_iter().map(|ql| ql * w / spend).collect()
            }
        }
    }
}

pub fn demand(pref: &Preference, p: &[f64], w: f64) -> Result<Vec<f64>> {
    if p.len() != pref.alpha().len() {
        return Err(Error::invalid("price vector has the wrong length"));
    }
    if p.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("prices must be positive"));
    }
    if !(w > 0.0) {
        return Err(Error::invalid("income must be positive"));
    }
    Ok(pref.demand_generic(p, w))
}

/// Domain hints for building the equilibrium manifold of an economy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDomain {
    pub t: [f64; 2],
    pub alpha: [f64; 2],
}

impl Default for ChartDomain {
    fn default() -> Self {
        ChartDomain {
            t: [0.05, 0.95],
            alpha: [-2.0, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Economy {
    #[serde(rename = "L")]
    pub goods: usize,
    pub preferences: Vec<Preference>,
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<ChartDomain>,
}

impl Economy {
    pub fn new(preferences: Vec<Preference>, r: Vec<f64>) -> Result<Self> {
        let e = Economy {
            goods: r.len(),
            preferences,
            r,
            omega1: None,
            domain: None,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_endowment(mut self, omega1: Vec<f64>) -> Result<Self> {
        self.omega1 = Some(omega1);
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Economy = serde_json::from_str(text).map_err(|e| Error::invalid(format!("economy JSON: {e}")))?;
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.goods < 2 {
            return Err(Error::invalid("need at least two goods"));
        }
        if self.preferences.len() != 2 {
            return Err(Error::invalid("exactly two consumers are supported"));
        }
        for p in &self.preferences {
            p.validate(self.goods)?;
        }
        if self.r.len() != self.goods || self.r.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("total resources must be strictly positive"));
        }
        if let Some(w) = &self.omega1 {
            if w.len() != self.goods || w.iter().zip(&self.r).any(|(a, r)| !(*a > 0.0 && *a < *r)) {
                return Err(Error::invalid("endowment must satisfy 0 < omega1 < r componentwise"));
            }
        }
        Ok(())
    }

    pub fn chart_domain(&self) -> ChartDomain {
        self.domain.clone().unwrap_or_default()
    }

    /// `p·r` with `p` the full price vector.
    fn wealth<S: Scalar>(&self, p: &[S]) -> S {
        let mut s = S::zero();
        for (pl, rl) in p.iter().zip(&self.r) {
            s += *pl * *rl;
        }
        s
    }

    fn excess_generic<S: Scalar>(&self, p: &[S], w1: S) -> Vec<S> {
        let w2 = self.wealth(p) - w1;
        let d1 = self.preferences[0].demand_generic(p, w1);
        let d2 = self.preferences[1].demand_generic(p, w2);
        d1.into_iter()
            .zip(d2)
            .zip(&self.r)
            .map(|((a, b), r)| a + b - *r)
            .collect()
    }

    /// Market-clearing residual on the first `L − 1` goods in log-price
    /// coordinates, with consumer 1's income set to `t · p·r`.
    fn share_residual<S: Scalar>(&self, logp: &[S], t: S) -> Vec<S> {
        let mut p: Vec<S> = logp.iter().map(|y| y.exp()).collect();
        p.push(S::one());
        let w1 = t * self.wealth(&p);
        let mut z = self.excess_generic(&p, w1);
        z.pop();
        z
    }
}

/// `Z(p, w1) = x_1(p, w1) + x_2(p, p·r − w1) − r`.
pub fn excess_demand(econ: &Economy, p: &[f64], w1: f64) -> Result<Vec<f64>> {
    if p.len() != econ.goods || p.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("prices must be positive and of length L"));
    }
    let total = econ.wealth(p);
    if !(w1 > 0.0 && w1 < total) {
        return Err(Error::invalid(format!("income {w1} outside (0, {total})")));
    }
    Ok(econ.excess_generic(p, w1))
}

/// Equilibrium prices (first `L − 1` components) and consumer 1's income.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceIncome {
    pub t: f64,
    pub p: Vec<f64>,
    pub w1: f64,
    pub residual: f64,
}

impl PriceIncome {
    pub fn full_prices(&self) -> Vec<f64> {
        let mut p = self.p.clone();
        p.push(1.0);
        p
    }
}

fn residual_jacobian(econ: &Economy, y: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let k = y.len();
    let mut jac = DMatrix::zeros(k, k);
    let mut f = DVector::zeros(k);
    for j in 0..k {
        let yd: Vec<HyperDual> = y
            .iter()
            .enumerate()
            .map(|(i, &v)| HyperDual::new(v, if i == j { 1.0 } else { 0.0 }, 0.0, 0.0))
            .collect();
        let z = econ.share_residual(&yd, HyperDual::constant(t));
        for i in 0..k {
            jac[(i, j)] = z[i].e1;
            f[i] = z[i].re;
        }
    }
    (f, jac)
}

const NEWTON_TOL: f64 = 1e-10;

fn newton(econ: &Economy, t: f64, guess: &[f64]) -> Result<Vec<f64>> {
    let mut y = guess.to_vec();
    let (mut f, mut jac) = residual_jacobian(econ, &y, t);
    let mut polish = 0;
    for _ in 0..200 {
        let norm = f.amax();
        if norm <= NEWTON_TOL {
            // a few extra steps push the residual to rounding level
            polish += 1;
            if polish > 3 || norm == 0.0 {
                return Ok(y);
            }
        }
        let Some(step) = jac.clone().lu().solve(&(-&f)) else {
            return Err(Error::NewtonFailed {
                t,
                reason: "singular Jacobian".into(),
                last: y.iter().map(|v| v.exp()).collect(),
            });
        };
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            let (tf, tj) = residual_jacobian(econ, &trial, t);
            if tf.iter().all(|v| v.is_finite()) && (tf.amax() < norm || norm <= NEWTON_TOL) {
                if norm <= NEWTON_TOL && tf.amax() > norm {
                    return Ok(y);
                }
                y = trial;
                f = tf;
                jac = tj;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::NewtonFailed {
                    t,
                    reason: format!("line search stalled at residual {norm:e}"),
                    last: y.iter().map(|v| v.exp()).collect(),
                });
            }
        }
    }
    if f.amax() <= NEWTON_TOL {
        return Ok(y);
    }
    Err(Error::NewtonFailed {
        t,
        reason: format!("no convergence, residual {:e}", f.amax()),
        last: y.iter().map(|v| v.exp()).collect(),
    })
}

fn finish(econ: &Economy, t: f64, y: &[f64]) -> Result<PriceIncome> {
    let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let mut full = p.clone();
    full.push(1.0);
    let w1 = t * econ.wealth(&full);
    let z = econ.excess_generic(&full, w1);
    let residual = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NewtonFailed {
            t,
            reason: "non-positive price".into(),
            last: p,
        });
    }
    Ok(PriceIncome { t, p, w1, residual })
}

/// Solves for the equilibrium at income share `t ∈ (0, 1)`, starting from
/// uniform prices.
pub fn solve_price_income(econ: &Economy, t: f64) -> Result<PriceIncome> {
    solve_price_income_from(econ, t, None)
}

/// As [`solve_price_income`], with an optional warm start (previous prices).
pub fn solve_price_income_from(econ: &Economy, t: f64, guess: Option<&[f64]>) -> Result<PriceIncome> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("income share {t} is not in (0, 1)")));
    }
    let k = econ.goods - 1;
    let uniform = vec![0.0; k];
    let y0: Vec<f64> = match guess {
        Some(p) => p.iter().map(|v| v.ln()).collect(),
        None => uniform.clone(),
    };
    let y = match newton(econ, t, &y0) {
        Ok(y) => y,
        Err(first) if guess.is_some() => newton(econ, t, &uniform).map_err(|_| first)?,
        Err(first) => {
            // continuation from the balanced share, where uniform prices are
            // a good start for near-symmetric economies
            let mut y = newton(econ, 0.5, &uniform).map_err(|_| first.clone())?;
            let steps = 16;
            for i in 1..=steps {
                let ti = 0.5 + (t - 0.5) * i as f64 / steps as f64;
                y = newton(econ, ti, &y).map_err(|_| first.clone())?;
            }
            y
        }
    };
    finish(econ, t, &y)
}

/// Logistic map from the real line onto income shares.
pub fn share_from_logit(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

pub fn logit_from_share(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

/// Prices and income with exact `t`-derivatives (implicit differentiation
/// of the market-clearing conditions).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceIncomeJet {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub d2p: Vec<f64>,
    pub w: f64,
    pub dw: f64,
    pub d2w: f64,
}

pub fn price_income_jet(econ: &Economy, t: f64, guess: Option<&[f64]>) -> Result<PriceIncomeJet> {
    let sol = solve_price_income_from(econ, t, guess)?;
    let y: Vec<f64> = sol.p.iter().map(|v| v.ln()).collect();
    let k = y.len();
    let (_, fy) = residual_jacobian(econ, &y, t);
    let lu = fy.lu();
    let singular = || Error::SingularPoint {
        point: vec![t],
        reason: "market-clearing Jacobian is singular".into(),
    };

    let yd: Vec<HyperDual> = y.iter().map(|v| HyperDual::constant(*v)).collect();
    let ft: Vec<f64> = econ
        .share_residual(&yd, HyperDual::new(t, 1.0, 0.0, 0.0))
        .iter()
        .map(|c| c.e1)
        .collect();
    let dy = lu.solve(&(-DVector::from_vec(ft))).ok_or_else(singular)?;

    let yd: Vec<HyperDual> = y
        .iter()
        .zip(dy.iter())
        .map(|(v, d)| HyperDual::new(*v, *d, *d, 0.0))
        .collect();
    let second: Vec<f64> = econ
        .share_residual(&yd, HyperDual::new(t, 1.0, 1.0, 0.0))
        .iter()
        .map(|c| c.e12)
        .collect();
    let d2y = lu.solve(&(-DVector::from_vec(second))).ok_or_else(singular)?;

    let p = sol.p.clone();
    let dp: Vec<f64> = (0..k).map(|i| p[i] * dy[i]).collect();
    let d2p: Vec<f64> = (0..k).map(|i| p[i] * (d2y[i] + dy[i] * dy[i])).collect();
    let dot = |v: &[f64]| v.iter().zip(&econ.r).map(|(a, b)| a * b).sum::<f64>();
    let wealth = dot(&p) + econ.r[k];
    Ok(PriceIncomeJet {
        w: t * wealth,
        dw: wealth + t * dot(&dp),
        d2w: 2.0 * dot(&dp) + t * dot(&d2p),
        p,
        dp,
        d2p,
    })
}

/// Step for the Richardson-extrapolated first derivative.
pub const RICHARDSON_STEP: f64 = 1e-4;
/// Step for the Richardson-extrapolated second derivative; larger because
/// the second difference amplifies Newton rounding by `1/h²`.
pub const RICHARDSON_STEP_2: f64 = 1e-3;

/// Price-income curve solved on a grid with finite-difference derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct SampledPriceIncome {
    pub t: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub dp: Vec<Vec<f64>>,
    pub d2p: Vec<Vec<f64>>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
    /// Largest grid second difference of any price, divided by spacing².
    pub max_second_difference: f64,
    pub smooth: bool,
}

pub fn sample_b_curve(econ: &Economy, t_grid: &[f64]) -> Result<SampledPriceIncome> {
    sample_b_curve_with_step(econ, t_grid, RICHARDSON_STEP, RICHARDSON_STEP_2)
}

pub fn sample_b_curve_with_step(econ: &Economy, t_grid: &[f64], h1: f64, h2: f64) -> Result<SampledPriceIncome> {
    let k = econ.goods - 1;
    let mut out = SampledPriceIncome {
        t: t_grid.to_vec(),
        p: vec![],
        w: vec![],
        dp: vec![],
        d2p: vec![],
        dw: vec![],
        d2w: vec![],
        max_second_difference: 0.0,
        smooth: true,
    };
    let mut warm: Option<Vec<f64>> = None;
    for &t in t_grid {
        let reach = h1.max(h2);
        if !(t - reach > 0.0 && t + reach < 1.0) {
            return Err(Error::invalid(format!("grid point {t} too close to the edge of (0, 1)")));
        }
        let at = |s: f64, g: Option<&[f64]>| -> Result<(Vec<f64>, f64)> {
            let sol = solve_price_income_from(econ, s, g)
                .map_err(|e| Error::invalid(format!("grid point t = {t}: {e}")))?;
            Ok((sol.p, sol.w1))
        };
        let (p0, w0) = at(t, warm.as_deref())?;
        let g = Some(p0.as_slice());
        let value = |s: f64| -> Result<Vec<f64>> {
            let (p, w) = at(s, g)?;
            let mut v = p;
            v.push(w);
            Ok(v)
        };
        let mut base = p0.clone();
        base.push(w0);
        let d1 = |h: f64| -> Result<Vec<f64>> {
            let (a, b) = (value(t + h)?, value(t - h)?);
            Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect())
        };
        let d2 = |h: f64| -> Result<Vec<f64>> {
            let (a, b) = (value(t + h)?, value(t - h)?);
            Ok((0..=k).map(|i| (a[i] - 2.0 * base[i] + b[i]) / (h * h)).collect())
        };
        let (r1h, r1h2) = (d1(h1)?, d1(0.5 * h1)?);
        let (r2h, r2h2) = (d2(h2)?, d2(0.5 * h2)?);
        let first: Vec<f64> = (0..=k).map(|i| (4.0 * r1h2[i] - r1h[i]) / 3.0).collect();
        let second: Vec<f64> = (0..=k).map(|i| (4.0 * r2h2[i] - r2h[i]) / 3.0).collect();
        out.dp.push(first[..k].to_vec());
        out.dw.push(first[k]);
        out.d2p.push(second[..k].to_vec());
        out.d2w.push(second[k]);
        out.p.push(p0.clone());
        out.w.push(w0);
        warm = Some(p0);
    }
    // smoothness: grid second differences against the extrapolated p̈
    let n = t_grid.len();
    let scale = 1.0 + out.d2p.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 1..n.saturating_sub(1) {
        let (ha, hb) = (t_grid[i] - t_grid[i - 1], t_grid[i + 1] - t_grid[i]);
        for j in 0..k {
            let sd = 2.0 * (hb * out.p[i - 1][j] - (ha + hb) * out.p[i][j] + ha * out.p[i + 1][j])
                / (ha * hb * (ha + hb));
            out.max_second_difference = out.max_second_difference.max(sd.abs());
            if !sd.is_finite() || (sd - out.d2p[i][j]).abs() > 0.1 * scale {
                out.smooth = false;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Root {
    /// Normalized price vector, last entry 1.
    pub p: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub endowment: Vec<f64>,
    pub roots: Vec<Root>,
    pub count: usize,
    /// A sign change or near-root sits in the first or last grid cell.
    pub censored: bool,
    /// Regular economies have an odd number of equilibria.
    pub scan_warning: Option<String>,
}

pub const SCAN_LOWER: f64 = 1e-3;
pub const SCAN_UPPER: f64 = 1e3;

/// Excess demand for good 1 of a two-good economy at `p = (p1, 1)` with
/// incomes induced by the endowment.
pub fn fiber_excess(econ: &Economy, omega1: &[f64], p1: f64) -> f64 {
    let p = [p1, 1.0];
    let w1 = p1 * omega1[0] + omega1[1];
    econ.excess_generic(&p, w1)[0]
}

fn fiber_excess_hd(econ: &Economy, omega1: &[f64], logp: HyperDual) -> HyperDual {
    let p1 = logp.exp();
    let p = [p1, HyperDual::one()];
    let w1 = p1 * omega1[0] + omega1[1];
    econ.excess_generic(&p, w1)[0]
}

/// Counts equilibria on the endowment fiber by scanning `Z_1(p_1)` on a
/// log-spaced grid over `[1e-3, 1e3]` with spacing `resolution` in `log10 p_1`,
/// then polishing each bracket with safeguarded Newton.
pub fn count_equilibria(econ: &Economy, resolution: f64) -> Result<EquilibriumSet> {
    let Some(omega1) = econ.omega1.clone() else {
        return Err(Error::invalid("economy has no endowment"));
    };
    count_equilibria_at(econ, &omega1, resolution)
}

pub fn count_equilibria_at(econ: &Economy, omega1: &[f64], resolution: f64) -> Result<EquilibriumSet> {
    if econ.goods != 2 {
        return Err(Error::Unsupported("equilibrium scan needs L = 2".into()));
    }
    if omega1.len() != 2 || omega1.iter().zip(&econ.r).any(|(a, r)| !(*a > 0.0 && *a < *r)) {
        return Err(Error::invalid("endowment must be interior"));
    }
    if !(resolution > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    let (lo, hi) = (SCAN_LOWER.log10(), SCAN_UPPER.log10());
    let cells = ((hi - lo) / resolution).ceil() as usize;
    let grid: Vec<f64> = (0..=cells)
        .map(|i| (lo + (hi - lo) * i as f64 / cells as f64) * std::f64::consts::LN_10)
        .collect();
    let values: Vec<f64> = grid.iter().map(|y| fiber_excess(econ, omega1, y.exp())).collect();

    let mut roots: Vec<f64> = Vec::new();
    let mut censored = false;
    for i in 0..cells {
        let (a, b) = (values[i], values[i + 1]);
        let root = if a == 0.0 {
            Some(grid[i])
        } else if a * b < 0.0 {
            Some(polish(econ, omega1, grid[i], grid[i + 1]))
        } else {
            None
        };
        if let Some(y) = root {
            if i == 0 || i + 1 == cells {
                censored = true;
            }
            if roots.last().is_none_or(|prev| (y.exp() - prev.exp()).abs() > 1e-6) {
                roots.push(y);
            }
        }
    }
    if values[cells] == 0.0 {
        censored = true;
        roots.push(grid[cells]);
    }
    let roots: Vec<Root> = roots
        .into_iter()
        .map(|y| {
            let p1 = y.exp();
            Root {
                p: vec![p1, 1.0],
                residual: {
                    let p = [p1, 1.0];
                    let z = econ.excess_generic(&p, p1 * omega1[0] + omega1[1]);
                    z.iter().fold(0.0f64, |a, v| a.max(v.abs()))
                },
            }
        })
        .collect();
    let count = roots.len();
    let scan_warning = if count.is_multiple_of(2) {
        Some(format!("even number of equilibria ({count}); scan likely missed or split a root"))
    } else {
        None
    };
    Ok(EquilibriumSet {
        endowment: omega1.to_vec(),
        roots,
        count,
        censored,
        scan_warning,
    })
}

/// Newton in `log p_1`, falling back to bisection whenever a step leaves the
/// bracket.
fn polish(econ: &Economy, omega1: &[f64], mut a: f64, mut b: f64) -> f64 {
    let fa = fiber_excess(econ, omega1, a.exp());
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let f = fiber_excess_hd(econ, omega1, HyperDual::new(x, 1.0, 0.0, 0.0));
        if f.re == 0.0 {
            return x;
        }
        if (f.re > 0.0) == (fa > 0.0) {
            a = x;
        } else {
            b = x;
        }
        let newton = x - f.re / f.e1;
        let next = if f.e1 != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) || b - a <= 1e-16 {
            return next;
        }
        x = next;
    }
    x
}
