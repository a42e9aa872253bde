use std::sync::OnceLock;

use cropshift::classify::forest::ForestModel;
use cropshift::classify::lda::LdaModel;
use cropshift::synth::SyntheticSpec;
use cropshift::{ClassList, ClassifierConfig, Dataset, ForestParams, TrainedClassifier};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn world() -> Dataset {
    let mut spec = SyntheticSpec::acceptance_world();
    spec.samples_per_region = vec![400, 400, 400];
    spec.generate().unwrap().remove("r1").unwrap()
}

fn lda() -> &'static LdaModel {
    static MODEL: OnceLock<LdaModel> = OnceLock::new();
    MODEL.get_or_init(|| LdaModel::fit(&world(), 1e-6).unwrap())
}

proptest! {
    #[test]
    fn lda_posteriors_sum_to_one(x in prop::collection::vec(-1e3..1e3f64, 6)) {
        let p = lda().posteriors(&x).unwrap();
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.0.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn lda_decision_regions_are_convex() {
    let model = lda();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pairs = 0;
    while pairs < 1000 {
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..4.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..4.0)).collect();
        let k = model.posteriors(&a).unwrap().argmax();
        if model.posteriors(&b).unwrap().argmax() != k {
            continue;
        }
        pairs += 1;
        for s in 1..10 {
            let t = s as f64 / 10.0;
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect();
            assert_eq!(model.posteriors(&m).unwrap().argmax(), k);
        }
    }
}

#[test]
fn forest_votes_are_multiples_of_one_over_trees() {
    let data = world();
    let params = ForestParams { n_trees: 37, seed: 5, ..Default::default() };
    let model = ForestModel::fit(&data, &params).unwrap();
    for x in data.rows().iter().take(50) {
        for p in model.posteriors(x).unwrap().0 {
            let votes = p * 37.0;
            assert!((votes - votes.round()).abs() < 1e-9);
        }
    }
}

#[test]
fn forest_is_independent_of_thread_count() {
    let data = world();
    let params = ForestParams { n_trees: 40, seed: 9, ..Default::default() };
    let fit_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ForestModel::fit(&data, &params).unwrap())
    };
    let one = fit_with(1);
    let four = fit_with(4);
    assert_eq!(one, four);
    for x in data.rows() {
        assert_eq!(one.posteriors(x).unwrap(), four.posteriors(x).unwrap());
    }
}

#[test]
fn model_files_round_trip() {
    let data = world();
    for config in [
        ClassifierConfig::default(),
        ClassifierConfig::Rf(ForestParams { n_trees: 10, ..Default::default() }),
    ] {
        let model = config.fit(&data).unwrap();
        let back = TrainedClassifier::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        for x in data.rows().iter().take(20) {
            assert_eq!(back.posteriors(x).unwrap(), model.posteriors(x).unwrap());
        }
    }
    let bumped = ClassifierConfig::default()
        .fit(&data)
        .unwrap()
        .to_json()
        .unwrap()
        .replacen("\"format_version\":1", "\"format_version\":99", 1);
    assert!(TrainedClassifier::from_json(&bumped).is_err());
}

#[test]
fn forest_separates_well_separated_classes() {
    let cl = ClassList::new(["a", "b", "c"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let k = i % 3;
        rows.push(vec![k as f64 * 10.0 + rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
        labels.push(k);
    }
    let data = Dataset::from_rows(cl, rows, labels, "r").unwrap();
    let model = ForestModel::fit(&data, &ForestParams::default()).unwrap();
    for (x, &k) in data.rows().iter().zip(data.labels()) {
        assert_eq!(model.posteriors(x).unwrap().argmax(), k);
    }
}
