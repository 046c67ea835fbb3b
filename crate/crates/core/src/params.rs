use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;

/// External potential `V` on configuration space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    /// `Σ_i Σ_c ½ m_i ω_c² x_{i,c}²`, one frequency per spatial dimension.
    Harmonic { omega: Vec<f64> },
    /// One real value per grid node, row-major.
    Tabulated { values: Vec<f64> },
}

impl Potential {
    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    /// Potential values at the grid nodes, or `None` when `V ≡ 0`.
    pub fn sample(&self, grid: &Grid, masses: &[f64]) -> Option<Vec<f64>> {
        match self {
            Potential::Zero => None,
            Potential::Harmonic { omega } => {
                let d = grid.dim();
                let vals = (0..grid.len())
                    .map(|flat| {
                        let x = grid.node(flat);
                        (0..grid.ndim())
                            .map(|k| {
                                let m = masses[grid.particle_of(k)];
                                let w = omega[(k % d).min(omega.len() - 1)];
                                0.5 * m * w * w * x[k] * x[k]
                            })
                            .sum()
                    })
                    .collect();
                Some(vals)
            }
            Potential::Tabulated { values } => Some(values.clone()),
        }
    }
}

/// The physical constants of the dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub masses: Vec<f64>,
    /// Collapse rate per particle.
    pub lambda: f64,
    /// Collapse width.
    pub sigma: f64,
    pub potential: Potential,
}

impl PhysicalParams {
    /// `ħ = 1`, unit masses, `λ = 1`, `σ = 0.5`, no potential.
    pub fn standard(particles: usize) -> Self {
        PhysicalParams {
            hbar: 1.0,
            masses: vec![1.0; particles],
            lambda: 1.0,
            sigma: 0.5,
            potential: Potential::Zero,
        }
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    /// Mass attached to each configuration-space axis of `grid`.
    pub fn axis_masses(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.ndim())
            .map(|k| self.masses[grid.particle_of(k)])
            .collect()
    }

    /// All invariant violations against `grid`.
    pub fn violations(&self, grid: Option<&Grid>) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            v.push("hbar must be positive".to_string());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            v.push("lambda must be nonnegative".to_string());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            v.push("sigma must be positive".to_string());
        }
        for (i, m) in self.masses.iter().enumerate() {
            if !(*m > 0.0 && m.is_finite()) {
                v.push(format!("mass of particle {} must be positive", i + 1));
            }
        }
        match &self.potential {
            Potential::Zero => {}
            Potential::Harmonic { omega } => {
                if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
                    v.push("harmonic potential needs finite omega values".to_string());
                }
                if let Some(g) = grid {
                    if omega.len() != 1 && omega.len() != g.dim() {
                        v.push(format!(
                            "harmonic potential has {} omega values, expected 1 or d={}",
                            omega.len(),
                            g.dim()
                        ));
                    }
                }
            }
            Potential::Tabulated { values } => {
                if values.iter().any(|x| !x.is_finite()) {
                    v.push("tabulated potential has non-finite values".to_string());
                }
                if let Some(g) = grid {
                    if values.len() != g.len() {
                        v.push(format!(
                            "tabulated potential size mismatch with grid: {} values for {} nodes",
                            values.len(),
                            g.len()
                        ));
                    }
                }
            }
        }
        v
    }
}

/// How collapse centers are chosen (or whether collapses happen at all).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Center drawn from the collapse density of the pre-collapse state.
    Grw,
    /// Center at the actual particle position plus Gaussian noise.
    Grwp,
    /// Center exactly at the actual particle position.
    Pinned,
    /// No collapses; plain guided trajectories.
    BohmOnly,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Grw, Mode::Grwp, Mode::Pinned, Mode::BohmOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Grw => "grw",
            Mode::Grwp => "grwp",
            Mode::Pinned => "pinned",
            Mode::BohmOnly => "bohm_only",
        }
    }

    pub fn collapses(self) -> bool {
        self != Mode::BohmOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected grw, grwp, pinned or bohm_only)"))
    }
}
