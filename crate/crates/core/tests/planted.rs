use cspmi_core::analogy::{evaluate_analogy_set, EvalOptions, Metric};
use cspmi_core::factorize::exact_factorize;
use cspmi_core::synthetic::{plant_parallelogram_space, PlantedSpace};
use cspmi_core::theorem::*;

fn planted() -> PlantedSpace {
    plant_parallelogram_space(10, 20, 200, true, 11).unwrap()
}

fn pairs(p: &PlantedSpace) -> Vec<(u32, u32)> {
    let null: Vec<u32> = p.null_word.into_iter().collect();
    sample_pairs(p.space.n_words(), 5000, &null, 3)
}

#[test]
fn rotations_are_solved() {
    let p = planted();
    let set = p.analogy_set();
    let opts = EvalOptions { metric: Metric::Euclidean, pool: None };
    for r in evaluate_analogy_set(&p.space, &p.vocab, &set, opts).unwrap() {
        assert_eq!(r.accuracy, Some(1.0), "{}", r.category);
    }
}

#[test]
fn geometry_holds() {
    let rep = planted_geometry_check(&planted(), 500, 5);
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn mixed_product_identity_is_exact() {
    let p = planted();
    let rep = cspmi_identity_check(&p.space, &p, &pairs(&p), &Thresholds::default());
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.value("mixed_product_residual_max").unwrap() <= 1e-9);
}

#[test]
fn identity_survives_refactorization() {
    let p = planted();
    let space = exact_factorize(&p.matrix()).unwrap();
    let rep = cspmi_identity_check(&space, &p, &pairs(&p), &Thresholds::default());
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn distance_law_fit_is_exact() {
    let p = planted();
    let rep = euclid_cspmi_correlation(&p.space, &p, &pairs(&p), false, &Thresholds::default());
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn null_word_addition() {
    let p = planted();
    let rep = null_word_addition_check(&p, &pairs(&p), &Thresholds::default()).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.value("addition_identity_residual_max").unwrap() <= 1e-9);
}

#[test]
fn planted_lambda_is_one() {
    let rep = lambda_estimate(&planted().space, &Thresholds::default());
    assert!(rep.passed(), "{rep:?}");
    assert!((rep.value("lambda").unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn missing_null_word_is_an_error() {
    let p = plant_parallelogram_space(10, 2, 10, false, 1).unwrap();
    assert!(null_word_addition_check(&p, &[(0, 1)], &Thresholds::default()).is_err());
}
