//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The fixture corpus pages, sorted by file name.
pub fn corpus() -> Vec<(String, String)> {
    let mut paths: Vec<_> = std::fs::read_dir(fixtures_dir().join("corpus"))
        .expect("fixture corpus")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).expect("corpus page"))
        })
        .collect()
}

/// Attribute values of the kind found on real pages: words, ids, hashes.
pub fn attribute_samples() -> Vec<String> {
    let mut out = Vec::new();
    for w in ["departmentButton", "navBC", "search-input", "add-to-cart", "menuitem", "checkout"] {
        out.push(w.to_string());
    }
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for _ in 0..26 {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        out.push(format!("css-{:x}", x & 0xffff_ffff));
    }
    out
}
