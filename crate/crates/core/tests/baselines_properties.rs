use cropshift::baselines::{
    major_class_classify, pipeline_smote_psa, pipeline_zt_fpsa, pipeline_zt_smote_fpsa, smote_resample_traced,
    ResamplePlan, SampleOrigin, ZTransform,
};
use cropshift::synth::SyntheticSpec;
use cropshift::{ClassList, ClassPriors, ClassifierConfig, Dataset, Error, ForestParams};
use proptest::prelude::*;

fn data(n: usize, seed: u64) -> std::collections::BTreeMap<String, Dataset> {
    let mut spec = SyntheticSpec::acceptance_world();
    spec.samples_per_region = vec![n; 3];
    spec.seed = seed;
    spec.generate().unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn smote_hits_targets_and_stays_on_segments(w in weights(4), seed in 0u64..1000) {
        let d = data(120, seed);
        let train = &d["r1"];
        let classes = train.class_list().names().to_vec();
        let target = ClassPriors::from_weights("t", classes.iter().cloned().zip(w)).unwrap();
        let out = smote_resample_traced(train, &target, 5, seed).unwrap();
        let plan = ResamplePlan::new(&target.aligned(train.class_list()).unwrap(), train.len(), 5);
        prop_assert_eq!(out.data.class_counts(), plan.target_counts);
        prop_assert_eq!(out.data.len(), train.len());

        let mut originals = Vec::new();
        for (o, row) in out.origins.iter().zip(out.data.rows()) {
            match *o {
                SampleOrigin::Original(i) => {
                    prop_assert_eq!(row.as_slice(), train.row(i));
                    originals.push(i);
                }
                SampleOrigin::Synthetic { base, neighbor, u } => {
                    prop_assert!((0.0..1.0).contains(&u));
                    prop_assert_eq!(train.labels()[base], train.labels()[neighbor]);
                    let (a, b) = (train.row(base), train.row(neighbor));
                    for j in 0..row.len() {
                        prop_assert!((row[j] - (a[j] + u * (b[j] - a[j]))).abs() <= 1e-9);
                    }
                }
            }
        }
        let mut dedup = originals.clone();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), originals.len(), "originals kept once each, in order");
    }

    #[test]
    fn z_transform_round_trips(x in prop::collection::vec(-50.0..50.0f64, 6)) {
        let d = data(60, 1);
        let z = ZTransform::fit(&d["r2"]).unwrap();
        let back = z.invert(&z.apply(&x).unwrap()).unwrap();
        let again = z.apply(&back).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for (a, b) in z.apply(&x).unwrap().iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn three_member_class_is_infeasible_for_k5() {
    let cl = ClassList::new(["big", "rare"]).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    let mut labels = vec![0; 20];
    rows.extend([vec![100.0], vec![101.0], vec![102.0]]);
    labels.extend([1, 1, 1]);
    let train = Dataset::from_rows(cl, rows, labels, "r").unwrap();
    let target = ClassPriors::new("t", [("big", 0.5), ("rare", 0.5)]).unwrap();
    assert_eq!(
        smote_resample_traced(&train, &target, 5, 0).unwrap_err(),
        Error::SmoteInfeasible { class: "rare".into(), available: 3, required: 6 }
    );
}

#[test]
fn major_class_accuracy_is_majority_frequency() {
    let d = data(500, 4);
    for region in ["r2", "r3"] {
        let test = &d[region];
        let priors = ClassPriors::empirical(region, test);
        let k = major_class_classify(&priors, test.class_list()).unwrap();
        let correct = test.labels().iter().filter(|&&l| l == k).count();
        let max = *test.class_counts().iter().max().unwrap();
        assert_eq!(correct, max);
    }
}

#[test]
fn pipelines_are_deterministic() {
    let d = data(300, 2);
    let priors = ClassPriors::empirical("r3", &d["r3"]);
    for config in [
        ClassifierConfig::default(),
        ClassifierConfig::Rf(ForestParams { n_trees: 15, ..Default::default() }),
    ] {
        let a = pipeline_smote_psa(&d["r1"], &d["r3"], &priors, &config, 5, 8).unwrap();
        assert_eq!(a, pipeline_smote_psa(&d["r1"], &d["r3"], &priors, &config, 5, 8).unwrap());
        let b = pipeline_zt_fpsa(&d["r1"], &d["r3"], &priors, &config).unwrap();
        assert_eq!(b, pipeline_zt_fpsa(&d["r1"], &d["r3"], &priors, &config).unwrap());
        let c = pipeline_zt_smote_fpsa(&d["r1"], &d["r3"], &priors, &config, 5, 8).unwrap();
        assert_eq!(c, pipeline_zt_smote_fpsa(&d["r1"], &d["r3"], &priors, &config, 5, 8).unwrap());
    }
}

#[test]
fn smote_psa_with_matching_priors_is_a_plain_fit() {
    let d = data(300, 3);
    let train = &d["r1"];
    let priors = ClassPriors::empirical("r1", train);
    let config = ClassifierConfig::default();
    let labels = pipeline_smote_psa(train, &d["r2"], &priors, &config, 5, 1).unwrap();
    let model = config.fit(train).unwrap();
    let plain: Vec<usize> = d["r2"].rows().iter().map(|x| model.predict(x).unwrap()).collect();
    assert_eq!(labels, plain);
}

#[test]
fn zt_fpsa_on_the_same_region_is_plain_z_classification() {
    let d = data(300, 5);
    let train = &d["r1"];
    let priors = ClassPriors::empirical("r1", train);
    let config = ClassifierConfig::default();
    let labels = pipeline_zt_fpsa(train, train, &priors, &config).unwrap();
    let z = ZTransform::fit(train).unwrap();
    let model = config.fit(&z.apply_dataset(train).unwrap()).unwrap();
    let plain: Vec<usize> = train.rows().iter().map(|x| model.predict(&z.apply(x).unwrap()).unwrap()).collect();
    assert_eq!(labels, plain);
}
