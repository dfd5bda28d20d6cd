use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::normalform::NormalFormConfig;
use crate::spectral::{Grid1D, SpectralField};
use crate::whitham::default_profiles;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    /// Only "gaussian" is built in.
    pub shape: String,
    /// Amplitude a of Φ₁.
    pub amplitude: f64,
    /// Width σ; `None` means slow length / 16.
    pub width: Option<f64>,
    /// Amplitude b of Φ₂ = b·σ·∂_X(bump); `None` means b = a.
    pub velocity_amplitude: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { shape: "gaussian".into(), amplitude: 0.05, width: None, velocity_amplitude: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionConfig {
    pub slow_n: usize,
    pub slow_length: f64,
    /// Fast grid: smallest power of two with spacing ≤ dx_max.
    pub dx_max: f64,
    pub dt: f64,
    pub whitham_dt: f64,
    /// Snapshots per unit of slow time.
    pub snapshots_per_unit: usize,
    /// Certification run: dt divided by this factor ...
    pub reference_dt_factor: usize,
    /// ... and the fast grid refined by this factor.
    pub reference_n_factor: usize,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            slow_n: 256,
            slow_length: 16.0 * PI,
            dx_max: 0.5,
            dt: 0.05,
            whitham_dt: 0.01,
            snapshots_per_unit: 20,
            reference_dt_factor: 4,
            reference_n_factor: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub eps_ladder: Vec<f64>,
    /// Ladder for the energy-drift runs (each needs one normal-form run per
    /// energy snapshot).
    pub energy_ladder: Vec<f64>,
    pub profile: ProfileConfig,
    /// Slow-time horizon T0.
    pub t0: f64,
    pub s: u32,
    /// Error normalization exponent β in 𝒲 = ψ + ε^β R.
    pub beta: f64,
    pub resolution: ResolutionConfig,
    pub normal_form: NormalFormConfig,
    /// Snapshot indices (on the stride grid) at which energies are evaluated.
    pub energy_snapshots: Vec<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.1, 0.05, 0.025, 0.0125],
            energy_ladder: vec![0.1, 0.05, 0.025],
            profile: ProfileConfig::default(),
            t0: 1.0,
            s: 1,
            beta: 1.5,
            resolution: ResolutionConfig::default(),
            normal_form: NormalFormConfig::default(),
            energy_snapshots: vec![0, 4, 8, 12, 16, 20],
            seed: 7,
        }
    }
}

fn check_ladder(name: &str, ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(LabError::Config(format!("{name} is empty")));
    }
    for w in ladder.windows(2) {
        if w[1] >= w[0] {
            return Err(LabError::Config(format!("{name} must be strictly decreasing ({} then {})", w[0], w[1])));
        }
    }
    if let Some(e) = ladder.iter().find(|&&e| !(e > 0.0 && e <= 0.2)) {
        return Err(LabError::Config(format!("{name} entry {e} outside (0, 0.2]")));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check_ladder("eps_ladder", &self.eps_ladder)?;
        check_ladder("energy_ladder", &self.energy_ladder)?;
        if self.profile.shape != "gaussian" {
            return Err(LabError::Config(format!("unknown profile shape {:?}", self.profile.shape)));
        }
        if !(self.t0 > 0.0) || !(self.beta > 0.0) || self.s == 0 {
            return Err(LabError::Config("need t0 > 0, beta > 0, s ≥ 1".into()));
        }
        let r = &self.resolution;
        if r.snapshots_per_unit == 0 || r.reference_dt_factor == 0 || r.reference_n_factor == 0 {
            return Err(LabError::Config("snapshot stride and reference factors must be ≥ 1".into()));
        }
        if !(r.dt > 0.0 && r.whitham_dt > 0.0 && r.dx_max > 0.0 && r.slow_length > 0.0) {
            return Err(LabError::Config("resolution values must be positive".into()));
        }
        let n_snap = self.snapshot_count();
        if let Some(&i) = self.energy_snapshots.iter().find(|&&i| i > n_snap) {
            return Err(LabError::Config(format!("energy snapshot index {i} beyond {n_snap}")));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Serde(e.to_string()))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn snapshot_count(&self) -> usize {
        ((self.t0 * self.resolution.snapshots_per_unit as f64).round() as usize).max(1)
    }

    pub fn slow_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.resolution.slow_n, self.resolution.slow_length)
    }

    pub fn sigma(&self) -> f64 {
        self.profile.width.unwrap_or(self.resolution.slow_length / 16.0)
    }

    /// (Φ₁, Φ₂) on the slow grid.
    pub fn profiles(&self) -> Result<(SpectralField, SpectralField)> {
        let a = self.profile.amplitude;
        let b = self.profile.velocity_amplitude.unwrap_or(a);
        Ok(default_profiles(self.slow_grid()?, a, b, self.sigma()))
    }
}
