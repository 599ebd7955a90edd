//! Number formatting shared by the CSV writers, and loaders for the JSON
//! manifold and economy descriptions.

use std::sync::Arc;

use serde::Deserialize;

use crate::charts::{FlatPlane, PolarChart, SphereChart};
use crate::diffgeo::{Domain, Immersion};
use crate::economy::Economy;
use crate::error::{Error, Result};
use crate::expr::CurveExpression;
use crate::fgp::Subject;
use crate::manifolds::{
    remark1_manifold, AnalyticCurve, EquilibriumManifold, Remark2Hypersurface, DEFAULT_ALPHA_RANGE,
};

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    EquilibriumM2,
    Remark1,
    Remark2,
    Analytic,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub t: Option<[f64; 2]>,
    pub alpha: Option<[f64; 2]>,
    /// Full box for standard charts.
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// JSON description of a manifold.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    #[serde(rename = "L")]
    pub goods: Option<usize>,
    #[serde(default)]
    pub p: Vec<String>,
    pub w: Option<String>,
    /// Profile curve of the ruled hypersurface.
    pub gamma: Option<[String; 2]>,
    /// Standard chart name for `analytic`: plane, polar or sphere.
    pub chart: Option<String>,
    #[serde(default)]
    pub domain: DomainSpec,
}

fn pair(v: Option<[f64; 2]>, default: (f64, f64)) -> (f64, f64) {
    v.map_or(default, |[a, b]| (a, b))
}

fn expr(src: &str, field: &str) -> Result<CurveExpression> {
    CurveExpression::parse(src).map_err(|e| Error::invalid(format!("field `{field}`: {e}")))
}

impl ManifoldSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("manifold JSON: {e}")))
    }

    fn goods(&self, default: usize) -> Result<usize> {
        let l = self.goods.unwrap_or(default);
        if l < 2 {
            return Err(Error::invalid("`L` must be at least 2"));
        }
        Ok(l)
    }

    pub fn build(&self) -> Result<Subject> {
        let alpha = pair(self.domain.alpha, DEFAULT_ALPHA_RANGE);
        match self.kind {
            ManifoldKind::EquilibriumM2 => {
                let l = self.goods(self.p.len() + 1)?;
                if self.p.len() != l - 1 {
                    return Err(Error::invalid(format!("`p` needs {} expressions for L = {l}", l - 1)));
                }
                let p = self
                    .p
                    .iter()
                    .enumerate()
                    .map(|(j, s)| expr(s, &format!("p[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let w = expr(self.w.as_deref().ok_or_else(|| Error::invalid("missing `w`"))?, "w")?;
                let curve = AnalyticCurve::new(p, w, pair(self.domain.t, (0.0, 1.0)))?;
                Ok(Subject::Equilibrium {
                    manifold: EquilibriumManifold::assemble(Arc::new(curve), alpha)?,
                    economy: None,
                })
            }
            ManifoldKind::Remark1 => {
                let l = self.goods(self.p.len() + 2)?;
                if self.p.len() != l - 2 {
                    return Err(Error::invalid(format!(
                        "`p` lists the {} constant prices for L = {l}; the last price is t",
                        l - 2
                    )));
                }
                let mut constants = Vec::new();
                for (j, s) in self.p.iter().enumerate() {
                    let e = expr(s, &format!("p[{j}]"))?;
                    if e.tree().depends_on_t() {
                        return Err(Error::invalid(format!("`p[{j}]` must be constant")));
                    }
                    constants.push(e.value(0.0));
                }
                let w = expr(self.w.as_deref().unwrap_or("t"), "w")?;
                Ok(Subject::Equilibrium {
                    manifold: remark1_manifold(l, &constants, w)?,
                    economy: None,
                })
            }
            ManifoldKind::Remark2 => {
                let l = self.goods(2)?;
                let [g1, g2] = self.gamma.clone().unwrap_or(["cos(t)".into(), "sin(t)".into()]);
                let h = Remark2Hypersurface::with_alpha(
                    l,
                    expr(&g1, "gamma[0]")?,
                    expr(&g2, "gamma[1]")?,
                    pair(self.domain.t, (0.0, 1.0)),
                    alpha,
                )?;
                Ok(Subject::Hypersurface(h))
            }
            ManifoldKind::Analytic => {
                let name = self.chart.as_deref().ok_or_else(|| Error::invalid("`analytic` needs a `chart`"))?;
                let bounds = self
                    .domain
                    .bounds
                    .as_ref()
                    .map(|b| Domain::new(b.iter().map(|[a, c]| (*a, *c)).collect()));
                let chart: Arc<dyn Immersion> = match name {
                    "plane" => Arc::new(bounds.map(FlatPlane::new).unwrap_or_default()),
                    "polar" => Arc::new(bounds.map(PolarChart::new).unwrap_or_default()),
                    "sphere" => Arc::new(bounds.map(SphereChart::new).unwrap_or_default()),
                    other => return Err(Error::invalid(format!("unknown chart `{other}`"))),
                };
                if chart.domain().dim() != chart.dim_param() {
                    return Err(Error::invalid("domain bounds have the wrong dimension"));
                }
                Ok(Subject::Chart(chart))
            }
        }
    }
}

/// Loads either an economy (recognized by a `preferences` key) or a
/// manifold description.
pub fn load_subject(text: &str) -> Result<Subject> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("invalid JSON: {e}")))?;
    if value.get("preferences").is_some() {
        Subject::from_economy(Economy::from_json(text)?)
    } else {
        ManifoldSpec::from_json(text)?.build()
    }
}
