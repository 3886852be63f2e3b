#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revpart::fixtures;
use revpart::numerics::{c, CMat};
use revpart::qds::Qds;
use serde_json::Value;

pub mod schema;

/// The five reference systems.
pub fn reference_systems() -> Vec<(String, Qds)> {
    fixtures::all()
        .into_iter()
        .map(|(n, q)| (n.to_string(), q))
        .collect()
}

/// Seeded covariant draws with `d = 2 + seed mod 3`.
pub fn random_systems(count: u64) -> Vec<(String, Qds)> {
    (0..count)
        .map(|seed| {
            let d = 2 + (seed % 3) as usize;
            let q = fixtures::random_covariant(d, seed).expect("covariant draw validates");
            (format!("random d={d} seed={seed}"), q)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn load_json(path: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("readable")).expect("json")
}

pub fn docs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}
