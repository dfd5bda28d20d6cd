use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Ordinary least squares of log(metric) on log(ε): (slope, r²).
pub fn fit_slope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(LabError::InvalidArgument(format!("slope fit needs ≥ 3 samples, got {}", samples.len())));
    }
    if let Some(&(e, m)) = samples.iter().find(|&&(e, m)| !(e > 0.0) || !(m > 0.0)) {
        return Err(LabError::InvalidArgument(format!("slope fit needs positive values, got ({e}, {m})")));
    }
    let xs: Vec<f64> = samples.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidArgument("slope fit needs distinct ε values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub metric_name: String,
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub fit_r2: f64,
}

impl ScalingReport {
    pub fn fit(metric_name: &str, samples: Vec<(f64, f64)>) -> Result<Self> {
        let (slope, fit_r2) = fit_slope(&samples)?;
        Ok(Self { metric_name: metric_name.into(), samples, slope, fit_r2 })
    }
}
