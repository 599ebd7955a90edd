#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use eqmanifold_core::diffgeo::Immersion;
use eqmanifold_core::fgp::Subject;
use eqmanifold_core::io::load_subject;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn subject(name: &str) -> Subject {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    load_subject(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn immersion(name: &str) -> Arc<dyn Immersion> {
    subject(name).immersion()
}

/// Uniform point of the domain shrunk by `margin` of each side's width.
pub fn random_point(f: &dyn Immersion, rng: &mut ChaCha8Rng, margin: f64) -> Vec<f64> {
    f.domain()
        .shrink(margin)
        .bounds
        .iter()
        .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
        .collect()
}

/// Every fixture that describes a manifold the geometry layer can work on.
pub const GEOMETRY_FIXTURES: [&str; 10] = [
    "plane.json",
    "sphere.json",
    "identical_cd.json",
    "hetero_cd.json",
    "ces_mirror.json",
    "linear_price.json",
    "constant_price.json",
    "analytic_l4.json",
    "remark1.json",
    "remark2.json",
];
