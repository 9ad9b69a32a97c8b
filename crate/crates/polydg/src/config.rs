//! JSON run configurations shared by the CLI and the verification studies.

use crate::error::{Error, Result};
use crate::forms::ModelParams;
use crate::mesh::{self, PolyMesh, VoronoiDomain};
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};

/// FNV-1a 64-bit hash; stable across platforms and versions.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Mesh families exposed by the generators and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    Nonconvex,
    Voronoi,
    Mixed,
    Disk,
}

impl MeshFamily {
    /// Generate the family member with nominal mesh size `h`.
    ///
    /// Structured families use n = 2/h subdivisions; Voronoi families pick
    /// the seed count so the mean cell area is h^2.
    pub fn generate_at(&self, h: f64, lloyd_iters: usize, seed: u64) -> Result<PolyMesh> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid(format!("nominal mesh size {h} out of range")));
        }
        match self {
            MeshFamily::Nonconvex => {
                let n = (2.0 / h).round() as usize;
                mesh::generate_structured_nonconvex(n)
            }
            MeshFamily::Mixed => {
                let n = (2.0 / h).round() as usize;
                mesh::generate_mixed(n)
            }
            MeshFamily::Voronoi => {
                let n_seeds = (1.0 / (h * h)).round() as usize;
                mesh::generate_voronoi(n_seeds, VoronoiDomain::Square, lloyd_iters, seed)
            }
            MeshFamily::Disk => {
                let n_seeds = (std::f64::consts::PI / (h * h)).round() as usize;
                mesh::generate_voronoi(
                    n_seeds,
                    VoronoiDomain::disk_for(n_seeds),
                    lloyd_iters,
                    seed,
                )
            }
        }
    }

    /// Generate from the family-native parameter (subdivision count for
    /// structured families, seed count for Voronoi families).
    pub fn generate_native(&self, n: usize, lloyd_iters: usize, seed: u64) -> Result<PolyMesh> {
        match self {
            MeshFamily::Nonconvex => mesh::generate_structured_nonconvex(n),
            MeshFamily::Mixed => mesh::generate_mixed(n),
            MeshFamily::Voronoi => {
                mesh::generate_voronoi(n, VoronoiDomain::Square, lloyd_iters, seed)
            }
            MeshFamily::Disk => {
                mesh::generate_voronoi(n, VoronoiDomain::disk_for(n), lloyd_iters, seed)
            }
        }
    }
}

fn default_t_final() -> f64 {
    1.0
}

fn default_lloyd() -> usize {
    3
}

fn default_trials() -> usize {
    1000
}

fn default_solver_tol() -> f64 {
    1e-10
}

/// A batch run description. Field meaning depends on the subcommand:
/// `convergence` consumes `h_levels`, `temporal` consumes `tau_levels` plus a
/// single `h`, `solve`/`stability` consume `h` and `tau`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Manufactured case: 1 (square) or 2 (disk).
    pub example: u8,
    pub family: MeshFamily,
    pub k: usize,
    pub theta: f64,
    /// Interior-penalty parameter; defaults to 10 (k+1)^2.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Nominal mesh sizes for spatial studies.
    #[serde(default)]
    pub h_levels: Vec<f64>,
    /// Time-step levels for temporal studies.
    #[serde(default)]
    pub tau_levels: Vec<f64>,
    /// Single nominal mesh size (temporal studies, solve, stability).
    #[serde(default)]
    pub h: Option<f64>,
    /// Fixed time step; when absent, spatial studies apply the
    /// h^{(k+1)/2}/4 rule on the finest level.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lloyd")]
    pub lloyd_iters: usize,
    /// Force the source term to zero (stability runs).
    #[serde(default)]
    pub zero_source: bool,
    /// Verify that halving tau changes the finest-level error by < 5%.
    #[serde(default)]
    pub check_tau_gate: bool,
    /// Acceptance gates on the finest-pair orders, if any.
    #[serde(default)]
    pub l2_order_range: Option<[f64; 2]>,
    #[serde(default)]
    pub h1_order_range: Option<[f64; 2]>,
    /// Trial count for the property suites.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.example) {
            return Err(Error::Config(format!("example must be 1 or 2, got {}", self.example)));
        }
        if !(1..=3).contains(&self.k) {
            return Err(Error::Config(format!("k must be in 1..=3, got {}", self.k)));
        }
        if !(0.0..=0.5).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta must lie in [0, 1/2], got {}",
                self.theta
            )));
        }
        if self.params.nu <= 0.0 || self.params.kappa <= 0.0 {
            return Err(Error::Config("nu and kappa must be positive".into()));
        }
        if self.t_final <= 0.0 {
            return Err(Error::Config("t_final must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| 10.0 * ((self.k + 1) * (self.k + 1)) as f64)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.solver_tol,
            ..SolverConfig::default()
        }
    }

    /// Stable hash of the resolved configuration, recorded in run manifests.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn config_roundtrip_and_defaults() {
        let text = r#"{
            "example": 1,
            "family": "nonconvex",
            "k": 2,
            "theta": 0.125,
            "h_levels": [0.5, 0.25]
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.resolved_lambda(), 90.0);
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.params.nu, 1.0);
        assert!(!cfg.digest().is_empty());
    }

    #[test]
    fn config_rejects_bad_theta() {
        let text = r#"{"example":1,"family":"mixed","k":1,"theta":0.6}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert!(cfg.validate().is_err());
    }
}
