//! Equilibrium manifolds of two-consumer economies and the two
//! counterexample constructions.
//!
//! Parameters are `x = (t, α_1, …, α_{L−1})`. Given a price-income curve
//! `t ↦ (p(t), w(t))` the immersion is
//! `Φ(t, α) = (p_1, …, p_{L−1}, α_1, …, α_{L−1}, w − Σ_j p_j α_j)`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::diffgeo::{jacobian, ruling_defect, unit_normal, ChristoffelSymbols, Domain, Immersion};
use crate::economy::{price_income_jet, Economy, PriceIncomeJet, SampledPriceIncome};
use crate::error::{Error, Result};
use crate::expr::CurveExpression;
use crate::geodesic::LineCurve;
use crate::scalar::HyperDual;

/// `t ↦ (p(t), w(t))` with `L − 1` free prices and consumer 1's income.
pub trait PriceIncomeCurve: Send + Sync {
    fn goods(&self) -> usize;
    fn t_range(&self) -> (f64, f64);
    fn jet(&self, t: f64) -> Result<PriceIncomeJet>;
    fn describe(&self) -> String;
}

/// Curve given by expressions in `t`, differentiated symbolically.
#[derive(Clone, Debug)]
pub struct AnalyticCurve {
    p: Vec<CurveExpression>,
    w: CurveExpression,
    t_range: (f64, f64),
}

impl AnalyticCurve {
    pub fn new(p: Vec<CurveExpression>, w: CurveExpression, t_range: (f64, f64)) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("need at least one price expression (L ≥ 2)"));
        }
        if !(t_range.1 > t_range.0) {
            return Err(Error::invalid("empty t-range"));
        }
        Ok(AnalyticCurve { p, w, t_range })
    }

    pub fn parse(p: &[&str], w: &str, t_range: (f64, f64)) -> Result<Self> {
        let p = p.iter().map(|s| CurveExpression::parse(s)).collect::<Result<Vec<_>>>()?;
        AnalyticCurve::new(p, CurveExpression::parse(w)?, t_range)
    }

    pub fn prices(&self) -> &[CurveExpression] {
        &self.p
    }

    pub fn income(&self) -> &CurveExpression {
        &self.w
    }
}

impl PriceIncomeCurve for AnalyticCurve {
    fn goods(&self) -> usize {
        self.p.len() + 1
    }
    fn t_range(&self) -> (f64, f64) {
        self.t_range
    }
    fn jet(&self, t: f64) -> Result<PriceIncomeJet> {
        let mut out = PriceIncomeJet {
            p: vec![],
            dp: vec![],
            d2p: vec![],
            w: 0.0,
            dw: 0.0,
            d2w: 0.0,
        };
        for e in &self.p {
            let (v, d, d2) = e.jet(t);
            out.p.push(v);
            out.dp.push(d);
            out.d2p.push(d2);
        }
        (out.w, out.dw, out.d2w) = self.w.jet(t);
        Ok(out)
    }
    fn describe(&self) -> String {
        let p: Vec<String> = self.p.iter().map(|e| e.to_string()).collect();
        format!("p = ({}), w = {}", p.join(", "), self.w)
    }
}

/// Curve solved from an economy on demand; derivatives by implicit
/// differentiation of market clearing.
#[derive(Clone, Debug)]
pub struct EconomyCurve {
    economy: Economy,
    t_range: (f64, f64),
}

impl EconomyCurve {
    pub fn new(economy: Economy) -> Result<Self> {
        economy.validate()?;
        let d = economy.chart_domain();
        if !(d.t[0] > 0.0 && d.t[1] < 1.0 && d.t[1] > d.t[0]) {
            return Err(Error::invalid("income-share range must lie inside (0, 1)"));
        }
        Ok(EconomyCurve {
            t_range: (d.t[0], d.t[1]),
            economy,
        })
    }

    pub fn economy(&self) -> &Economy {
        &self.economy
    }
}

impl PriceIncomeCurve for EconomyCurve {
    fn goods(&self) -> usize {
        self.economy.goods
    }
    fn t_range(&self) -> (f64, f64) {
        self.t_range
    }
    fn jet(&self, t: f64) -> Result<PriceIncomeJet> {
        price_income_jet(&self.economy, t, None)
    }
    fn describe(&self) -> String {
        "economy price-income curve".into()
    }
}

/// Quintic Hermite interpolation of a sampled curve through the sampled
/// values and their first two derivative estimates; `C²` across knots.
#[derive(Clone, Debug)]
pub struct SampledPriceCurve {
    goods: usize,
    t: Vec<f64>,
    /// per knot: values `[p_1.., w]`, first and second derivatives
    v: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
}

impl SampledPriceCurve {
    pub fn new(samples: &SampledPriceIncome) -> Result<Self> {
        let n = samples.t.len();
        if n < 2 || samples.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sampled curve needs an increasing grid of ≥ 2 points"));
        }
        let join = |a: &Vec<f64>, b: f64| {
            let mut v = a.clone();
            v.push(b);
            v
        };
        Ok(SampledPriceCurve {
            goods: samples.p[0].len() + 1,
            t: samples.t.clone(),
            v: (0..n).map(|i| join(&samples.p[i], samples.w[i])).collect(),
            d: (0..n).map(|i| join(&samples.dp[i], samples.dw[i])).collect(),
            d2: (0..n).map(|i| join(&samples.d2p[i], samples.d2w[i])).collect(),
        })
    }
}

/// Quintic Hermite basis values and derivatives at `u ∈ [0, 1]`:
/// rows are (value, first, second) derivative of the six basis functions.
fn hermite5(u: f64) -> [[f64; 6]; 3] {
    let (u2, u3, u4, u5) = (u * u, u * u * u, u.powi(4), u.powi(5));
    [
        [
            1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5,
            u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5,
            0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5,
            10.0 * u3 - 15.0 * u4 + 6.0 * u5,
            -4.0 * u3 + 7.0 * u4 - 3.0 * u5,
            0.5 * u3 - u4 + 0.5 * u5,
        ],
        [
            -30.0 * u2 + 60.0 * u3 - 30.0 * u4,
            1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4,
            u - 4.5 * u2 + 6.0 * u3 - 2.5 * u4,
            30.0 * u2 - 60.0 * u3 + 30.0 * u4,
            -12.0 * u2 + 28.0 * u3 - 15.0 * u4,
            1.5 * u2 - 4.0 * u3 + 2.5 * u4,
        ],
        [
            -60.0 * u + 180.0 * u2 - 120.0 * u3,
            -36.0 * u + 96.0 * u2 - 60.0 * u3,
            1.0 - 9.0 * u + 18.0 * u2 - 10.0 * u3,
            60.0 * u - 180.0 * u2 + 120.0 * u3,
            -24.0 * u + 84.0 * u2 - 60.0 * u3,
            3.0 * u - 12.0 * u2 + 10.0 * u3,
        ],
    ]
}

impl PriceIncomeCurve for SampledPriceCurve {
    fn goods(&self) -> usize {
        self.goods
    }
    fn t_range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }
    fn jet(&self, t: f64) -> Result<PriceIncomeJet> {
        let (lo, hi) = self.t_range();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutsideDomain { point: vec![t] });
        }
        let k = match self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(self.t.len() - 2),
            Err(k) => k - 1,
        };
        let h = self.t[k + 1] - self.t[k];
        let b = hermite5((t - self.t[k]) / h);
        let comps = self.goods;
        let mut out = [vec![0.0; comps], vec![0.0; comps], vec![0.0; comps]];
        for c in 0..comps {
            let coef = [
                self.v[k][c],
                h * self.d[k][c],
                h * h * self.d2[k][c],
                self.v[k + 1][c],
                h * self.d[k + 1][c],
                h * h * self.d2[k + 1][c],
            ];
            for (order, row) in b.iter().enumerate() {
                let s: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
                out[order][c] = s / h.powi(order as i32);
            }
        }
        let l = comps - 1;
        Ok(PriceIncomeJet {
            p: out[0][..l].to_vec(),
            dp: out[1][..l].to_vec(),
            d2p: out[2][..l].to_vec(),
            w: out[0][l],
            dw: out[1][l],
            d2w: out[2][l],
        })
    }
    fn describe(&self) -> String {
        format!("sampled price-income curve on {} knots", self.t.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    EquilibriumM2,
    Remark1,
}

/// Number of samples used by the positivity audit.
pub const POSITIVITY_SAMPLES: usize = 1001;

/// Smallest price over a uniform grid of the curve's range, with its
/// location; `(t, index)` of the first non-positive price if any.
pub fn positivity_audit(curve: &dyn PriceIncomeCurve) -> Result<PositivityAudit> {
    let (lo, hi) = curve.t_range();
    let mut audit = PositivityAudit {
        min_price: f64::INFINITY,
        at: lo,
        violation: None,
    };
    for i in 0..POSITIVITY_SAMPLES {
        let t = lo + (hi - lo) * i as f64 / (POSITIVITY_SAMPLES - 1) as f64;
        let jet = curve.jet(t)?;
        for (j, &p) in jet.p.iter().enumerate() {
            if p < audit.min_price {
                audit.min_price = p;
                audit.at = t;
            }
            if !(p > 0.0) && audit.violation.is_none() {
                audit.violation = Some((t, j));
            }
        }
    }
    Ok(audit)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityAudit {
    pub min_price: f64,
    pub at: f64,
    /// First `(t, price index)` with a non-positive price.
    pub violation: Option<(f64, usize)>,
}

impl PositivityAudit {
    pub fn ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// The boxed quantities of the closed-form connection at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Boxed {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `‖p‖² = 1 + Σ p_j²`
    pub p_norm_sq: f64,
    pub a_prime: f64,
    /// `‖p‖² B + A²`
    pub denominator: f64,
}

/// Equilibrium manifold for two consumers, built from a price-income curve.
#[derive(Clone)]
pub struct EquilibriumManifold {
    curve: Arc<dyn PriceIncomeCurve>,
    domain: Domain,
    kind: ManifoldKind,
    label: String,
}

impl std::fmt::Debug for EquilibriumManifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquilibriumManifold")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("curve", &self.curve.describe())
            .field("domain", &self.domain)
            .finish()
    }
}

/// Default box for the `α` coordinates.
pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (-2.0, 2.0);

impl EquilibriumManifold {
    /// Builds `Φ`, rejecting curves with a non-positive price anywhere on
    /// their `t`-range.
    pub fn assemble(curve: Arc<dyn PriceIncomeCurve>, alpha: (f64, f64)) -> Result<Self> {
        let audit = positivity_audit(curve.as_ref())?;
        if let Some((t, index)) = audit.violation {
            return Err(Error::PositivityViolation { t, index });
        }
        Self::build(curve, alpha, ManifoldKind::EquilibriumM2)
    }

    pub fn from_economy(economy: Economy) -> Result<Self> {
        let d = economy.chart_domain();
        let curve = EconomyCurve::new(economy)?;
        Self::assemble(Arc::new(curve), (d.alpha[0], d.alpha[1]))
    }

    fn build(curve: Arc<dyn PriceIncomeCurve>, alpha: (f64, f64), kind: ManifoldKind) -> Result<Self> {
        if curve.goods() < 2 {
            return Err(Error::invalid("need L ≥ 2"));
        }
        if !(alpha.1 > alpha.0) {
            return Err(Error::invalid("empty alpha range"));
        }
        let mut bounds = vec![curve.t_range()];
        bounds.extend(std::iter::repeat_n(alpha, curve.goods() - 1));
        Ok(EquilibriumManifold {
            label: curve.describe(),
            curve,
            domain: Domain::new(bounds),
            kind,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn goods(&self) -> usize {
        self.curve.goods()
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn curve(&self) -> &Arc<dyn PriceIncomeCurve> {
        &self.curve
    }

    fn check_point(&self, x: &[f64]) -> Result<PriceIncomeJet> {
        if x.len() != self.goods() {
            return Err(Error::invalid(format!("point needs {} coordinates", self.goods())));
        }
        self.domain.check(x)?;
        self.curve.jet(x[0])
    }

    pub fn boxed(&self, x: &[f64]) -> Result<Boxed> {
        let jet = self.check_point(x)?;
        Ok(boxed_from_jet(&jet, &x[1..]))
    }

    /// Christoffel symbols from the closed-form expressions in the boxed
    /// quantities; symbols with two `α` indices are zero.
    pub fn closed_form_christoffel(&self, x: &[f64]) -> Result<ChristoffelSymbols> {
        let jet = self.check_point(x)?;
        let q = boxed_from_jet(&jet, &x[1..]);
        let scale = q.p_norm_sq * q.b.max(0.0) + q.a * q.a;
        if !(q.denominator > 1e-14 * scale.max(1e-300)) || q.denominator <= 0.0 {
            return Err(Error::SingularPoint {
                point: x.to_vec(),
                reason: "‖p‖²B + A² vanishes (degenerate curve)".into(),
            });
        }
        let d = q.denominator;
        let l = self.goods();
        let mut g = ChristoffelSymbols::zeros(x);
        g.set(0, 0, 0, (q.p_norm_sq * q.c + q.a * q.a_prime) / d);
        for k in 1..l {
            let pk = jet.p[k - 1];
            g.set(k, 0, 0, pk * (q.a * q.c - q.a_prime * q.b) / d);
            for j in 1..l {
                g.set(k, 0, j, jet.dp[j - 1] * pk * q.b / d);
            }
        }
        for j in 1..l {
            g.set(0, 0, j, -jet.dp[j - 1] * q.a / d);
        }
        Ok(g)
    }

    /// Base points `0, e_1, …, e_{L−1}` of the coordinate curves.
    pub fn coordinate_bases(&self) -> Vec<Vec<f64>> {
        coordinate_bases(self.goods())
    }

    /// The `L` coordinate curves `t ↦ (t, base)`.
    pub fn coordinate_curves(&self) -> Vec<CoordinateCurve> {
        coordinate_curves(self.goods())
    }
}

fn boxed_from_jet(jet: &PriceIncomeJet, alpha: &[f64]) -> Boxed {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let a = jet.dw - dot(&jet.dp, alpha);
    let b = dot(&jet.dp, &jet.dp);
    let c = dot(&jet.dp, &jet.d2p);
    let s = 1.0 + dot(&jet.p, &jet.p);
    let ap = jet.d2w - dot(&jet.d2p, alpha);
    Boxed {
        a,
        b,
        c,
        p_norm_sq: s,
        a_prime: ap,
        denominator: s * b + a * a,
    }
}

impl Immersion for EquilibriumManifold {
    fn dim_param(&self) -> usize {
        self.goods()
    }
    fn dim_ambient(&self) -> usize {
        2 * self.goods() - 1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        let l = self.goods();
        let Ok(jet) = self.curve.jet(x[0].re) else {
            return vec![HyperDual::constant(f64::NAN); 2 * l - 1];
        };
        let t = x[0];
        let p: Vec<HyperDual> = (0..l - 1).map(|j| t.chain(jet.p[j], jet.dp[j], jet.d2p[j])).collect();
        let mut last = t.chain(jet.w, jet.dw, jet.d2w);
        for j in 0..l - 1 {
            last -= p[j] * x[j + 1];
        }
        let mut out = p;
        out.extend_from_slice(&x[1..]);
        out.push(last);
        out
    }
    fn name(&self) -> String {
        match self.kind {
            ManifoldKind::EquilibriumM2 => format!("equilibrium manifold ({})", self.label),
            ManifoldKind::Remark1 => format!("positivity counterexample ({})", self.label),
        }
    }
}

/// A `t`-curve in parameter space: `t ↦ (t, base)`.
#[derive(Clone, Debug, Serialize)]
pub struct CoordinateCurve {
    pub base: Vec<f64>,
}

impl CoordinateCurve {
    pub fn line(&self) -> LineCurve {
        let mut origin = vec![0.0];
        origin.extend_from_slice(&self.base);
        let mut dir = vec![0.0; origin.len()];
        dir[0] = 1.0;
        LineCurve::new(origin, dir)
    }
}

pub fn coordinate_bases(goods: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; goods - 1]];
    for j in 0..goods - 1 {
        let mut e = vec![0.0; goods - 1];
        e[j] = 1.0;
        out.push(e);
    }
    out
}

pub fn coordinate_curves(goods: usize) -> Vec<CoordinateCurve> {
    coordinate_bases(goods)
        .into_iter()
        .map(|base| CoordinateCurve { base })
        .collect()
}

/// The ruling line `s ↦ (t, α_0 + s e_j)` at fixed `t`.
pub fn alpha_line(t: f64, base: &[f64], j: usize) -> LineCurve {
    let mut origin = vec![t];
    origin.extend_from_slice(base);
    let mut dir = vec![0.0; origin.len()];
    dir[j + 1] = 1.0;
    LineCurve::new(origin, dir)
}

/// `N = (ṗα − ẇ, pṗ, ṗ)` for the two-good surface.
pub fn normal_vector_l2(m: &EquilibriumManifold, t: f64, alpha: f64) -> Result<[f64; 3]> {
    if m.goods() != 2 {
        return Err(Error::Unsupported(format!("normal formula needs L = 2, got L = {}", m.goods())));
    }
    let jet = m.check_point(&[t, alpha])?;
    let (p, dp, dw) = (jet.p[0], jet.dp[0], jet.dw);
    Ok([dp * alpha - dw, p * dp, dp])
}

#[derive(Clone, Debug, Serialize)]
pub struct RuledCheck {
    pub ruled: bool,
    pub max_defect: f64,
    pub samples: usize,
}

/// Threshold for declaring the parametrization affine in the `α` coordinates.
pub const RULED_TOL: f64 = 1e-10;

/// Checks `f(t, α) = f(t, 0) + Σ α_j (f(t, e_j) − f(t, 0))` at the given
/// points; coordinates `1..m` are the ruling directions.
pub fn ruled_decomposition_check(f: &dyn Immersion, points: &[Vec<f64>]) -> RuledCheck {
    let m = f.dim_param();
    let ruling: Vec<usize> = (1..m).collect();
    let mut worst = 0.0f64;
    for x in points {
        let mut base = x.clone();
        for b in base.iter_mut().skip(1) {
            *b = 0.0;
        }
        let d = ruling_defect(f, &base, &x[1..], &ruling);
        worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
    }
    RuledCheck {
        ruled: worst <= RULED_TOL,
        max_defect: worst,
        samples: points.len(),
    }
}

/// Positivity counterexample: `p_j` constant for `j < L − 1`,
/// `p_{L−1}(t) = t`, on `t ∈ [−1, 1]`. Not checked for positivity.
pub fn remark1_manifold(goods: usize, constants: &[f64], w: CurveExpression) -> Result<EquilibriumManifold> {
    if goods < 2 || constants.len() != goods - 2 {
        return Err(Error::invalid(format!("need L ≥ 2 and {} constant prices", goods.saturating_sub(2))));
    }
    if constants.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("constant prices must be positive"));
    }
    let mut p: Vec<CurveExpression> = constants
        .iter()
        .map(|c| CurveExpression::parse(&format!("{c:?}")))
        .collect::<Result<_>>()?;
    p.push(CurveExpression::parse("t")?);
    let curve = AnalyticCurve::new(p, w, (-1.0, 1.0))?;
    Ok(EquilibriumManifold::build(Arc::new(curve), DEFAULT_ALPHA_RANGE, ManifoldKind::Remark1)?
        .with_label("linear last price"))
}

/// Ruled hypersurface `F(t, α) = (α_1, …, α_{L−1}, γ_1(t), γ_2(t))` in
/// `R^{L+1}`.
#[derive(Clone, Debug)]
pub struct Remark2Hypersurface {
    goods: usize,
    gamma: [CurveExpression; 2],
    domain: Domain,
}

impl Remark2Hypersurface {
    pub fn new(goods: usize, gamma1: CurveExpression, gamma2: CurveExpression, t: (f64, f64)) -> Result<Self> {
        Self::with_alpha(goods, gamma1, gamma2, t, DEFAULT_ALPHA_RANGE)
    }

    pub fn with_alpha(
        goods: usize,
        gamma1: CurveExpression,
        gamma2: CurveExpression,
        t: (f64, f64),
        alpha: (f64, f64),
    ) -> Result<Self> {
        if goods < 2 {
            return Err(Error::invalid("need L ≥ 2"));
        }
        if !(t.1 > t.0) || !(alpha.1 > alpha.0) {
            return Err(Error::invalid("empty parameter range"));
        }
        let n = 1001;
        for i in 0..n {
            let s = t.0 + (t.1 - t.0) * i as f64 / (n - 1) as f64;
            let speed = gamma1.d1(s).hypot(gamma2.d1(s));
            if !(speed > 1e-10) {
                return Err(Error::SingularPoint {
                    point: vec![s],
                    reason: "profile curve has zero velocity".into(),
                });
            }
        }
        let mut bounds = vec![t];
        bounds.extend(std::iter::repeat_n(alpha, goods - 1));
        Ok(Remark2Hypersurface {
            goods,
            gamma: [gamma1, gamma2],
            domain: Domain::new(bounds),
        })
    }

    pub fn goods(&self) -> usize {
        self.goods
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.domain.bounds[0]
    }
}

impl Immersion for Remark2Hypersurface {
    fn dim_param(&self) -> usize {
        self.goods
    }
    fn dim_ambient(&self) -> usize {
        self.goods + 1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        let mut out: Vec<HyperDual> = x[1..].to_vec();
        out.push(self.gamma[0].tree().eval(x[0]));
        out.push(self.gamma[1].tree().eval(x[0]));
        out
    }
    fn name(&self) -> String {
        format!("ruled hypersurface over ({}, {})", self.gamma[0], self.gamma[1])
    }
}

/// Largest angle (radians, sign-insensitive) between unit normals at the
/// sample points; zero for a hyperplane.
pub fn hyperplane_test(f: &dyn Immersion, points: &[Vec<f64>]) -> Result<f64> {
    let normals: Vec<DVector<f64>> = points.iter().map(|x| unit_normal(f, x)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for a in &normals {
        for b in &normals {
            let c = a.dot(b).abs().min(1.0);
            worst = worst.max(c.acos());
        }
    }
    Ok(worst)
}

/// Full-rank check of the immersion at each point.
pub fn immersion_check(f: &dyn Immersion, points: &[Vec<f64>]) -> Result<()> {
    for x in points {
        jacobian(f, x)?;
    }
    Ok(())
}
