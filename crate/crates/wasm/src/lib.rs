//! WebAssembly bindings behind `www/index.html`.
//!
//! Each export is a thin wrapper over a plain function returning
//! `Result<_, String>`, so the logic is testable on the host.

use std::collections::BTreeMap;

use cropshift::eval::{run_transfer_experiment, ExperimentConfig, Method};
use cropshift::features::{fit_harmonics, HarmonicCoefficients};
use cropshift::shift::psa_reweight_aligned;
use cropshift::SyntheticSpec;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Reweights a posterior from training priors to target priors.
pub fn psa_posterior(posterior: &[f64], train: &[f64], test: &[f64]) -> Result<Vec<f64>, String> {
    psa_reweight_aligned(posterior, train, test).map(|p| p.0).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct HarmonicFit {
    pub coefficients: [f64; 5],
    pub curve: Vec<(f64, f64)>,
    pub rmse: f64,
}

pub fn harmonic_fit_result(times: &[f64], values: &[f64], grid: usize) -> Result<HarmonicFit, String> {
    if times.len() != values.len() {
        return Err(format!("{} times but {} values", times.len(), values.len()));
    }
    let samples: Vec<(f64, f64)> = times.iter().copied().zip(values.iter().copied()).collect();
    let fit: HarmonicCoefficients = fit_harmonics(&samples).map_err(|e| e.to_string())?;
    let grid = grid.max(2);
    let curve = (0..grid)
        .map(|i| {
            let t = i as f64 / (grid - 1) as f64;
            (t, fit.evaluate(t))
        })
        .collect();
    let sse: f64 = samples.iter().map(|&(t, y)| (y - fit.evaluate(t)).powi(2)).sum();
    Ok(HarmonicFit { coefficients: fit.to_array(), curve, rmse: (sse / samples.len() as f64).sqrt() })
}

#[derive(Debug, Serialize)]
pub struct MethodScore {
    pub method: String,
    pub accuracy: f64,
    pub regions: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct TransferDemo {
    pub train_region: String,
    pub priors: BTreeMap<String, Vec<f64>>,
    pub classes: Vec<String>,
    pub methods: Vec<MethodScore>,
}

/// LDA transfer on the synthetic world with its regional offsets scaled by `shift_scale`.
pub fn transfer_demo_result(seed: u64, shift_scale: f64, samples_per_region: usize) -> Result<TransferDemo, String> {
    let mut spec = SyntheticSpec::acceptance_world();
    spec.seed = seed;
    spec.samples_per_region = vec![samples_per_region; spec.regions.len()];
    for effect in &mut spec.region_effects {
        effect.iter_mut().for_each(|v| *v *= shift_scale);
    }
    let data = spec.generate().map_err(|e| e.to_string())?;
    let priors = spec.all_priors().map_err(|e| e.to_string())?;
    let config = ExperimentConfig::default();
    let mut methods = Vec::new();
    for method in [Method::Gmc, Method::Uat, Method::Psa, Method::Fsa, Method::Fpsa] {
        let result = run_transfer_experiment(&data, &spec.train_region, method, &priors, &config, seed)
            .map_err(|e| e.to_string())?;
        methods.push(MethodScore {
            method: method.to_string(),
            accuracy: result.aggregate_metrics.overall_accuracy,
            regions: result.regions.iter().map(|(r, o)| (r.clone(), o.metrics.overall_accuracy)).collect(),
        });
    }
    Ok(TransferDemo {
        train_region: spec.train_region.clone(),
        priors: spec.regions.iter().cloned().zip(spec.priors.iter().cloned()).collect(),
        classes: spec.classes.clone(),
        methods,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn psa(posterior: Vec<f64>, train_priors: Vec<f64>, test_priors: Vec<f64>) -> Result<Vec<f64>, JsError> {
    psa_posterior(&posterior, &train_priors, &test_priors).map_err(|e| JsError::new(&e))
}

/// JSON `{coefficients, curve, rmse}`.
#[wasm_bindgen]
pub fn harmonic_fit(times: Vec<f64>, values: Vec<f64>, grid: usize) -> Result<String, JsError> {
    to_json(harmonic_fit_result(&times, &values, grid))
}

/// JSON `{train_region, priors, classes, methods: [{method, accuracy, regions}]}`.
#[wasm_bindgen]
pub fn transfer_demo(seed: u32, shift_scale: f64, samples_per_region: usize) -> Result<String, JsError> {
    to_json(transfer_demo_result(seed as u64, shift_scale, samples_per_region))
}
