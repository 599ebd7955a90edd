//! Shared setup for the benchmarks: fixture manifolds loaded once.

use std::path::PathBuf;

use eqmanifold_core::economy::Economy;
use eqmanifold_core::fgp::Subject;
use eqmanifold_core::io::load_subject;

fn read(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn subject(name: &str) -> Subject {
    load_subject(&read(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn economy(name: &str) -> Economy {
    Economy::from_json(&read(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
