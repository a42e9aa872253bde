//! Harmonic featurization of quality-flagged multispectral time series.
//!
//! Each band of a pixel's (cloud-filtered) time series is regressed onto the
//! two-frequency annual Fourier basis
//! `[1, cos 2πt, sin 2πt, cos 4πt, sin 4πt]`, with `t` in years measured from
//! the April 1 anchor. The five coefficients per band, concatenated band-major
//! in manifest order, form the pixel's feature vector.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the derived chlorophyll index band.
pub const GCVI_BAND: &str = "GCVI";

/// Number of basis functions: intercept plus a cosine/sine pair for each of two frequencies.
pub const HARMONIC_TERMS: usize = 5;

/// Relative singular-value threshold below which the design is treated as singular.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time_years: f64,
    pub band_values: BTreeMap<String, f64>,
    pub clear: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelTimeSeries {
    pub pixel_id: String,
    pub region_id: String,
    pub label: Option<String>,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub c: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl HarmonicCoefficients {
    pub fn to_array(&self) -> [f64; HARMONIC_TERMS] {
        [self.c, self.a1, self.b1, self.a2, self.b2]
    }

    pub fn from_array(v: [f64; HARMONIC_TERMS]) -> Self {
        HarmonicCoefficients {
            c: v[0],
            a1: v[1],
            b1: v[2],
            a2: v[3],
            b2: v[4],
        }
    }

    /// Evaluates the harmonic signal at time `t` (years).
    pub fn evaluate(&self, t: f64) -> f64 {
        let basis = harmonic_basis(t);
        self.to_array().iter().zip(basis).map(|(c, b)| c * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub pixel_id: String,
    pub region_id: String,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

/// Ordered list of band names fixing the feature layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandManifest(pub Vec<String>);

impl BandManifest {
    pub fn new<S: Into<String>>(bands: impl IntoIterator<Item = S>) -> Self {
        BandManifest(bands.into_iter().map(Into::into).collect())
    }

    pub fn bands(&self) -> &[String] {
        &self.0
    }

    pub fn feature_len(&self) -> usize {
        HARMONIC_TERMS * self.0.len()
    }

    /// Column names `f0..f{5B-1}`.
    pub fn feature_names(&self) -> Vec<String> {
        (0..self.feature_len()).map(|i| format!("f{i}")).collect()
    }
}

/// The row of the harmonic design matrix at time `t`.
pub fn harmonic_basis(t: f64) -> [f64; HARMONIC_TERMS] {
    let w1 = TAU * t;
    let w2 = 2.0 * TAU * t;
    [1.0, w1.cos(), w1.sin(), w2.cos(), w2.sin()]
}

/// Year fraction of `date` relative to `anchor` (actual days / 365.25).
pub fn year_fraction(date: NaiveDate, anchor: NaiveDate) -> f64 {
    (date - anchor).num_days() as f64 / 365.25
}

pub fn compute_gcvi(nir: f64, green: f64) -> Result<f64> {
    if green == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(nir / green - 1.0)
}

pub fn filter_clear(series: &PixelTimeSeries) -> PixelTimeSeries {
    PixelTimeSeries {
        pixel_id: series.pixel_id.clone(),
        region_id: series.region_id.clone(),
        label: series.label.clone(),
        observations: series
            .observations
            .iter()
            .filter(|o| o.clear)
            .cloned()
            .collect(),
    }
}

/// Adds a [`GCVI_BAND`] value to every observation, computed from the named bands.
///
/// Run this after [`filter_clear`]: a zero green reflectance on a clear
/// observation is an error, not a value to be skipped.
pub fn append_gcvi(series: &PixelTimeSeries, nir_band: &str, green_band: &str) -> Result<PixelTimeSeries> {
    let mut out = series.clone();
    for obs in &mut out.observations {
        let nir = *obs
            .band_values
            .get(nir_band)
            .ok_or_else(|| Error::MissingBand(nir_band.to_string()))?;
        let green = *obs
            .band_values
            .get(green_band)
            .ok_or_else(|| Error::MissingBand(green_band.to_string()))?;
        let gcvi = compute_gcvi(nir, green).map_err(|e| Error::PixelBand {
            pixel_id: series.pixel_id.clone(),
            band: GCVI_BAND.to_string(),
            source: Box::new(e),
        })?;
        obs.band_values.insert(GCVI_BAND.to_string(), gcvi);
    }
    Ok(out)
}

/// Ordinary least squares onto the two-frequency harmonic basis.
///
/// Solved through a singular value decomposition of the design matrix; the
/// fit is rejected when the smallest singular value falls below
/// [`RANK_TOLERANCE`] times the largest.
pub fn fit_harmonics(samples: &[(f64, f64)]) -> Result<HarmonicCoefficients> {
    let mut times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < HARMONIC_TERMS {
        return Err(Error::InsufficientObservations {
            distinct: times.len(),
        });
    }

    let n = samples.len();
    let design = DMatrix::from_fn(n, HARMONIC_TERMS, |i, j| harmonic_basis(samples[i].0)[j]);
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));

    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv < RANK_TOLERANCE * max_sv {
        return Err(Error::RankDeficient {
            ratio: if max_sv > 0.0 { min_sv / max_sv } else { 0.0 },
        });
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|_| Error::RankDeficient { ratio: min_sv / max_sv })?;
    Ok(HarmonicCoefficients::from_array([
        beta[0], beta[1], beta[2], beta[3], beta[4],
    ]))
}

/// Fits every manifest band and concatenates the coefficients band-major.
///
/// The series should already be clear-filtered, with GCVI appended when the
/// manifest names it. Any band failure fails the whole pixel.
pub fn build_features(series: &PixelTimeSeries, manifest: &BandManifest) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(manifest.feature_len());
    for band in manifest.bands() {
        let tag = |e: Error| Error::PixelBand {
            pixel_id: series.pixel_id.clone(),
            band: band.clone(),
            source: Box::new(e),
        };
        let samples = series
            .observations
            .iter()
            .map(|o| {
                o.band_values
                    .get(band)
                    .map(|v| (o.time_years, *v))
                    .ok_or_else(|| tag(Error::MissingBand(band.clone())))
            })
            .collect::<Result<Vec<_>>>()?;
        let coeffs = fit_harmonics(&samples).map_err(tag)?;
        values.extend_from_slice(&coeffs.to_array());
    }
    Ok(FeatureVector {
        pixel_id: series.pixel_id.clone(),
        region_id: series.region_id.clone(),
        label: series.label.clone(),
        values,
    })
}

/// A pixel excluded from the feature table, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedPixel {
    pub pixel_id: String,
    pub region_id: String,
    pub reason: String,
}

/// Full per-pixel pipeline: clear filter, optional GCVI, harmonic fit.
///
/// Pixels that fail are reported rather than aborting the batch.
pub fn featurize_all(
    series: &[PixelTimeSeries],
    manifest: &BandManifest,
    gcvi_sources: Option<(&str, &str)>,
) -> (Vec<FeatureVector>, Vec<DroppedPixel>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in series {
        let clear = filter_clear(s);
        let result = match gcvi_sources {
            Some((nir, green)) if manifest.bands().iter().any(|b| b == GCVI_BAND) => {
                append_gcvi(&clear, nir, green)
            }
            _ => Ok(clear),
        }
        .and_then(|s| build_features(&s, manifest));
        match result {
            Ok(fv) => kept.push(fv),
            Err(e) => dropped.push(DroppedPixel {
                pixel_id: s.pixel_id.clone(),
                region_id: s.region_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (kept, dropped)
}
