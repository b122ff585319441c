//! Historical population model `N_i(t) = w_i N0 g(t)`.
//!
//! Region weights and the growth function are fitted by linear least squares
//! on log population sizes; `ln g` is then summarised by a quartic in years
//! since 1 BCE.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{LanguageHistory, RegionPopulationRecord};
use crate::numeric::quad::{integrate, QuadOptions};
use crate::numeric::stats::quantile;
use crate::{Error, Result};

pub const DEFAULT_REFERENCE_REGION: &str = "Iceland";

const G_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographyFit {
    pub n0: f64,
    pub reference_region: String,
    pub weights: BTreeMap<String, f64>,
    /// `c0..c4` of `ln g(t) = Σ c_k t^k`.
    pub g_coeffs: [f64; G_DEGREE + 1],
    pub r_squared: f64,
    /// 2.5% and 97.5% quantiles of the log residuals.
    pub residual_quantiles: [f64; 2],
    /// Fitted `ln g(t_j)` at each survey time point, before smoothing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ln_g_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub region: String,
    pub year: f64,
    pub observed: f64,
    pub fitted: f64,
    /// `ln(observed / fitted)`.
    pub residual: f64,
}

impl DemographyFit {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn weight(&self, region: &str) -> Result<f64> {
        self.weights.get(region).copied().ok_or_else(|| Error::Lookup {
            kind: "region",
            name: region.to_string(),
        })
    }

    pub fn g(&self, t: f64) -> f64 {
        growth_g(t, &self.g_coeffs)
    }
}

/// `g(t) = exp(c0 + c1 t + ... + c4 t^4)`.
pub fn growth_g(t: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c).exp()
}

/// Fit weights, scale and growth function to regional population records.
pub fn fit_population_model(
    records: &[RegionPopulationRecord],
    reference_region: &str,
) -> Result<(DemographyFit, Vec<Residual>)> {
    let regions: Vec<&str> = records
        .iter()
        .map(|r| r.region.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut years: Vec<f64> = records.iter().map(|r| r.year).collect();
    years.sort_by(f64::total_cmp);
    years.dedup();
    if !regions.contains(&reference_region) {
        return Err(Error::Config(format!(
            "reference region `{reference_region}` has no population records"
        )));
    }
    if years.len() < 2 {
        return Err(Error::Fit("need at least two survey time points".into()));
    }
    // b_j is pinned to zero at the survey time closest to t = 0
    let j0 = years
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(j, _)| j)
        .unwrap_or(0);

    // columns: ln N0, a_i (i != reference), b_j (j != j0)
    let a_col: BTreeMap<&str, usize> = regions
        .iter()
        .filter(|&&r| r != reference_region)
        .enumerate()
        .map(|(k, &r)| (r, 1 + k))
        .collect();
    let b_base = 1 + a_col.len();
    let b_col = |j: usize| -> Option<usize> {
        match j.cmp(&j0) {
            std::cmp::Ordering::Less => Some(b_base + j),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(b_base + j - 1),
        }
    };
    let ncols = b_base + years.len() - 1;
    let nrows = records.len();
    if nrows < ncols {
        return Err(Error::Fit(format!(
            "{nrows} observations cannot determine {ncols} parameters"
        )));
    }
    let year_index = |y: f64| years.iter().position(|&v| v == y).unwrap_or(0);

    let mut design = DMatrix::<f64>::zeros(nrows, ncols);
    let mut rhs = DVector::<f64>::zeros(nrows);
    for (row, rec) in records.iter().enumerate() {
        design[(row, 0)] = 1.0;
        if let Some(&c) = a_col.get(rec.region.as_str()) {
            design[(row, c)] = 1.0;
        }
        if let Some(c) = b_col(year_index(rec.year)) {
            design[(row, c)] = 1.0;
        }
        rhs[row] = rec.size.ln();
    }
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&v| v > max_sv * 1e-10).count();
    if rank < ncols {
        return Err(Error::Fit(format!(
            "least-squares system is underdetermined (rank {rank} < {ncols})"
        )));
    }
    let params = svd.solve(&rhs, max_sv * 1e-12).map_err(|e| Error::Fit(e.to_string()))?;
    let fitted = &design * &params;

    let mean = rhs.mean();
    let ss_tot: f64 = rhs.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = rhs.iter().zip(fitted.iter()).map(|(o, f)| (o - f).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let residuals: Vec<Residual> = records
        .iter()
        .enumerate()
        .map(|(row, rec)| Residual {
            region: rec.region.clone(),
            year: rec.year,
            observed: rec.size,
            fitted: fitted[row].exp(),
            residual: rhs[row] - fitted[row],
        })
        .collect();
    let mut sorted: Vec<f64> = residuals.iter().map(|r| r.residual).collect();
    sorted.sort_by(f64::total_cmp);
    let residual_quantiles = [quantile(&sorted, 0.025), quantile(&sorted, 0.975)];

    let weights = regions
        .iter()
        .map(|&r| {
            let a = a_col.get(r).map_or(0.0, |&c| params[c]);
            (r.to_string(), a.exp())
        })
        .collect();
    let ln_g_points: Vec<(f64, f64)> = years
        .iter()
        .enumerate()
        .map(|(j, &y)| (y, b_col(j).map_or(0.0, |c| params[c])))
        .collect();
    let g_coeffs = fit_polynomial(&ln_g_points)?;

    Ok((
        DemographyFit {
            n0: params[0].exp(),
            reference_region: reference_region.to_string(),
            weights,
            g_coeffs,
            r_squared,
            residual_quantiles,
            ln_g_points,
        },
        residuals,
    ))
}

/// Least-squares quartic through `(t, y)` points. Time is rescaled to
/// millennia internally for conditioning.
fn fit_polynomial(points: &[(f64, f64)]) -> Result<[f64; G_DEGREE + 1]> {
    const SCALE: f64 = 1000.0;
    let n = points.len();
    let degree = G_DEGREE.min(n.saturating_sub(1));
    let mut v = DMatrix::<f64>::zeros(n, degree + 1);
    let mut y = DVector::<f64>::zeros(n);
    for (i, &(t, val)) in points.iter().enumerate() {
        let u = t / SCALE;
        let mut p = 1.0;
        for k in 0..=degree {
            v[(i, k)] = p;
            p *= u;
        }
        y[i] = val;
    }
    let coef = v
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let mut out = [0.0; G_DEGREE + 1];
    for k in 0..=degree {
        out[k] = coef[k] / SCALE.powi(k as i32);
    }
    Ok(out)
}

/// Duration-weighted mean of `g` over the language's observation windows.
pub fn mean_growth(history: &LanguageHistory, coeffs: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for w in &history.windows {
        total += integrate(|t| growth_g(t, coeffs), w.start, w.end, QuadOptions::rel(1e-6))?.value;
    }
    Ok(total / history.observation_time())
}

/// Composite weight `Σ fraction × w_region` from the language's composition.
pub fn composite_weight(history: &LanguageHistory, fit: &DemographyFit) -> Result<f64> {
    if history.composition.is_empty() {
        return Err(Error::Lookup {
            kind: "composition for language",
            name: history.name.clone(),
        });
    }
    history
        .composition
        .iter()
        .map(|(region, frac)| fit.weight(region).map(|w| frac * w))
        .sum()
}

/// Historical mean speaker count from the geographic composition.
pub fn language_mean_size(history: &LanguageHistory, fit: &DemographyFit) -> Result<f64> {
    Ok(fit.n0 * composite_weight(history, fit)? * mean_growth(history, &fit.g_coeffs)?)
}

/// Historical mean speaker count from the weight recorded with the history.
pub fn language_mean_size_from_weight(history: &LanguageHistory, fit: &DemographyFit) -> Result<f64> {
    Ok(fit.n0 * history.weight * mean_growth(history, &fit.g_coeffs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(region: &str, year: f64, size: f64) -> RegionPopulationRecord {
        RegionPopulationRecord {
            region: region.into(),
            year,
            size,
        }
    }

    #[test]
    fn growth_function_values() {
        let c = [-0.0127, -2.00e-4, 2.13e-7, 2.04e-10, 2.55e-14];
        assert!((growth_g(0.0, &c) - (-0.0127f64).exp()).abs() < 1e-15);
        assert_eq!(growth_g(123.0, &[0.0; 5]), 1.0);
        let direct = (-0.0127 - 2.00e-4 * 1975.0
            + 2.13e-7 * 1975f64.powi(2)
            + 2.04e-10 * 1975f64.powi(3)
            + 2.55e-14 * 1975f64.powi(4))
        .exp();
        assert!((growth_g(1975.0, &c) - direct).abs() < 1e-12 * direct);
        assert!((growth_g(1975.0, &c) - 10.8338).abs() < 1e-4);
    }

    #[test]
    fn exact_model_is_recovered() {
        let g = |t: f64| (1e-3 * t).exp();
        let mut records = Vec::new();
        for (r, w) in [("Ref", 1.0), ("B", 3.5), ("C", 40.0)] {
            for t in [-1000.0, 0.0, 500.0, 1500.0] {
                records.push(rec(r, t, 200.0 * w * g(t)));
            }
        }
        let (fit, res) = fit_population_model(&records, "Ref").unwrap();
        assert!((fit.n0 - 200.0).abs() < 1e-8);
        assert!((fit.weights["C"] - 40.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(res.iter().all(|r| r.residual.abs() < 1e-10));
        assert!((fit.g(1500.0) - g(1500.0)).abs() < 1e-8);
    }

    #[test]
    fn missing_reference_is_config_error() {
        let records = vec![rec("A", 0.0, 1.0), rec("A", 10.0, 2.0)];
        assert!(matches!(
            fit_population_model(&records, "Iceland"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn underdetermined_is_fit_error() {
        let records = vec![rec("A", 0.0, 1.0), rec("B", 10.0, 2.0)];
        assert!(matches!(fit_population_model(&records, "A"), Err(Error::Fit(_))));
    }
}
