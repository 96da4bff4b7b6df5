//! Reverse-mode gradients vs central finite differences, across the whole
//! op catalog and three-layer compositions.

use pathgrad::verify::{
    catalog_probes, composition_probes, probe_coverage, relu_margins_ok, run_probes,
};

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

#[test]
fn catalog_ops_match_finite_differences() {
    let results = run_probes(&catalog_probes(), H).unwrap();
    for r in &results {
        assert!(
            r.max_rel_err < TOL,
            "op '{}' gradient mismatch: rel err {:.3e}",
            r.name,
            r.max_rel_err
        );
    }
}

#[test]
fn catalog_is_fully_probed() {
    let (catalog, probed) = probe_coverage();
    let missing: Vec<_> = catalog
        .iter()
        .filter(|name| !probed.iter().any(|p| p == *name))
        .collect();
    assert!(missing.is_empty(), "unprobed catalog ops: {missing:?}");
}

#[test]
fn three_layer_compositions_match_finite_differences() {
    let probes = composition_probes();
    // The ReLU composition must sit clear of its kinks or the comparison
    // is meaningless.
    for p in &probes {
        if p.name.contains("relu") {
            assert!(relu_margins_ok(p).unwrap(), "{} too close to a kink", p.name);
        }
    }
    let results = run_probes(&probes, H).unwrap();
    for r in &results {
        assert!(
            r.max_rel_err < TOL,
            "composition '{}' gradient mismatch: rel err {:.3e}",
            r.name,
            r.max_rel_err
        );
    }
}
