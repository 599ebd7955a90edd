//! Reference charts with known geometry.

use std::f64::consts::PI;

use crate::diffgeo::{Domain, Immersion};
use crate::scalar::{HyperDual, Scalar};

/// `(x, y) ↦ (x, y, 0)`.
#[derive(Clone, Debug)]
pub struct FlatPlane {
    domain: Domain,
}

impl FlatPlane {
    pub fn new(domain: Domain) -> Self {
        FlatPlane { domain }
    }
}

impl Default for FlatPlane {
    fn default() -> Self {
        FlatPlane::new(Domain::new(vec![(-10.0, 10.0); 2]))
    }
}

impl Immersion for FlatPlane {
    fn dim_param(&self) -> usize {
        2
    }
    fn dim_ambient(&self) -> usize {
        3
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        vec![x[0], x[1], HyperDual::zero()]
    }
    fn name(&self) -> String {
        "plane".into()
    }
}

/// Identity map of `R^m`; used for curves drawn directly in a flat space.
#[derive(Clone, Debug)]
pub struct IdentityChart {
    domain: Domain,
}

impl IdentityChart {
    pub fn new(domain: Domain) -> Self {
        IdentityChart { domain }
    }
}

impl Immersion for IdentityChart {
    fn dim_param(&self) -> usize {
        self.domain.dim()
    }
    fn dim_ambient(&self) -> usize {
        self.domain.dim()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        x.to_vec()
    }
    fn name(&self) -> String {
        "identity".into()
    }
}

/// `(r, θ) ↦ (r cos θ, r sin θ)`.
#[derive(Clone, Debug)]
pub struct PolarChart {
    domain: Domain,
}

impl PolarChart {
    pub fn new(domain: Domain) -> Self {
        PolarChart { domain }
    }
}

impl Default for PolarChart {
    fn default() -> Self {
        PolarChart::new(Domain::new(vec![(0.5, 5.0), (-2.0 * PI, 2.0 * PI)]))
    }
}

impl Immersion for PolarChart {
    fn dim_param(&self) -> usize {
        2
    }
    fn dim_ambient(&self) -> usize {
        2
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        vec![x[0] * x[1].cos(), x[0] * x[1].sin()]
    }
    fn name(&self) -> String {
        "polar".into()
    }
}

/// `(θ, φ) ↦ (sin θ cos φ, sin θ sin φ, cos θ)` on the unit sphere.
#[derive(Clone, Debug)]
pub struct SphereChart {
    domain: Domain,
}

impl SphereChart {
    pub fn new(domain: Domain) -> Self {
        SphereChart { domain }
    }
}

impl Default for SphereChart {
    fn default() -> Self {
        SphereChart::new(Domain::new(vec![(0.1, PI - 0.1), (-7.0, 7.0)]))
    }
}

impl Immersion for SphereChart {
    fn dim_param(&self) -> usize {
        2
    }
    fn dim_ambient(&self) -> usize {
        3
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval_hd(&self, x: &[HyperDual]) -> Vec<HyperDual> {
        let st = x[0].sin();
        vec![st * x[1].cos(), st * x[1].sin(), x[0].cos()]
    }
    fn name(&self) -> String {
        "sphere".into()
    }
}
