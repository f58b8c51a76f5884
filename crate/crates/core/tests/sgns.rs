use cspmi_core::analogy::{evaluate_analogy_set, EvalOptions};
use cspmi_core::sgns::{pair_gradient, pair_objective, train_sgns};
use cspmi_core::synthetic::{generate_analogy_corpus, AnalogyCorpusConfig};
use cspmi_core::{Corpus, SgnsConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `‖a − n‖ / max(‖a‖, ‖n‖)` over one gradient block.
fn relative_gap(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-300)
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central differences of `f` around `v`.
fn numeric_gradient(v: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let (mut p, mut m) = (v.to_vec(), v.to_vec());
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

// Each block is differenced through only the log-sigmoid terms it enters, so
// saturated terms are not swamped by roundoff in the full objective.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gradient_matches_central_differences(
        dim in 1usize..40,
        k in 0usize..8,
        seed in any::<u64>(),
        scale in 0.01f64..1.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..scale)).collect() };
        let w = draw(dim);
        let c = draw(dim);
        let negs: Vec<Vec<f64>> = (0..k).map(|_| draw(dim)).collect();
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();

        let terms = |w: &[f64]| log_sigmoid(dot(w, &c)) + negs.iter().map(|n| log_sigmoid(-dot(w, n))).sum::<f64>();
        let obj = pair_objective(&w, &c, &refs);
        prop_assert!((obj - terms(&w)).abs() <= 1e-12 * obj.abs().max(1.0));

        let g = pair_gradient(&w, &c, &refs);
        let h = 1e-5;
        prop_assert!(relative_gap(&g.word, &numeric_gradient(&w, h, terms)) <= 1e-4);
        prop_assert!(relative_gap(&g.context, &numeric_gradient(&c, h, |v| log_sigmoid(dot(&w, v)))) <= 1e-4);
        for (j, n) in negs.iter().enumerate() {
            let numeric = numeric_gradient(n, h, |v| log_sigmoid(-dot(&w, v)));
            prop_assert!(relative_gap(&g.negatives[j], &numeric) <= 1e-4);
        }
    }
}

#[test]
fn single_relation_is_learned() {
    let cfg = AnalogyCorpusConfig {
        n_relations: 1,
        n_pairs_per_relation: 2,
        repetitions: vec![300],
        seed: 3,
        ..Default::default()
    };
    let (tokens, set) = generate_analogy_corpus(&cfg).unwrap();
    let corpus = Corpus::from_tokens(tokens.iter().map(String::as_str), 1, false).unwrap();
    let sgns = SgnsConfig { dim: 20, window: 2, epochs: 10, seed: 2, ..Default::default() };
    let space = train_sgns::<f32>(&corpus.tokens, &corpus.vocab, &sgns).unwrap();
    let res = evaluate_analogy_set(&space, &corpus.vocab, &set, EvalOptions::default()).unwrap();
    assert!(res[0].accuracy.unwrap() >= 0.9, "{res:?}");
}
