//! Scenario configuration documents.

use serde::{Deserialize, Serialize};

use crate::expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    /// Forced van der Pol oscillator; `epsilons` are physical values.
    Vdp,
    /// Field components as expressions in `t`, `x1..xn`, `eps`, `mu`.
    Custom {
        psi: Vec<String>,
        #[serde(default)]
        phi1: Vec<String>,
        phi2: Vec<String>,
        period: PeriodSpec,
        #[serde(default)]
        profile: ProfileSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodSpec {
    Value(f64),
    Expr(String),
}

impl PeriodSpec {
    pub fn resolve(&self) -> anyhow::Result<f64> {
        match self {
            Self::Value(v) => Ok(*v),
            Self::Expr(src) => {
                let e = expr::parse(src)?;
                if e.depends_on(expr::Var::T) || e.depends_on(expr::Var::Eps) || e.depends_on(expr::Var::Mu) || e.max_state_index().is_some() {
                    anyhow::bail!("period expression must be constant: {src}");
                }
                Ok(e.eval(&expr::Env { t: 0.0, x: &[], eps: 0.0, mu: 0.0 }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSpec {
    #[default]
    TwoTerm,
    OneTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionConfig {
    Disc { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self::Disc { center: [0.0, 0.0], radius: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremSpec {
    T1,
    T2,
    T3,
    T4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConfig {
    pub id: TheoremSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1.0
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self { id: TheoremSpec::T3, delta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub boundary_samples: usize,
    pub s_samples: usize,
    pub membership_samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { boundary_samples: 256, s_samples: 16, membership_samples: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    pub abs: f64,
    pub rel: f64,
    pub tol_eq: f64,
    pub floor_neq: f64,
    pub shooting: f64,
    pub residual: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10, tol_eq: 1e-7, floor_neq: 1e-4, shooting: 1e-12, residual: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuGridConfig {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        step: f64,
        #[serde(default = "default_verify_mu")]
        verify: Vec<f64>,
    },
}

fn default_verify_mu() -> Vec<f64> {
    vec![-0.1, 0.0, 0.1]
}

impl Default for MuGridConfig {
    fn default() -> Self {
        Self::Range { start: -0.5, stop: 0.5, step: 0.05, verify: default_verify_mu() }
    }
}

impl MuGridConfig {
    /// Grid values `start + k·step`, computed from integer multiples so that
    /// `0` and symmetric pairs are hit exactly.
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        match self {
            Self::List(v) => Ok(v.clone()),
            Self::Range { start, stop, step, .. } => {
                if !(*step > 0.0) || stop < start {
                    anyhow::bail!("mu grid needs step > 0 and stop >= start");
                }
                let k0 = (start / step).round() as i64;
                let k1 = (stop / step).round() as i64;
                let on_lattice = ((start / step) - k0 as f64).abs() < 1e-9 && ((stop / step) - k1 as f64).abs() < 1e-9;
                if on_lattice {
                    Ok((k0..=k1).map(|k| k as f64 * step).collect())
                } else {
                    let n = ((stop - start) / step + 1e-9).floor() as i64;
                    Ok((0..=n).map(|k| start + k as f64 * step).collect())
                }
            }
        }
    }

    /// Detunings used for shooting verification.
    pub fn verify_values(&self) -> Vec<f64> {
        match self {
            Self::List(_) => default_verify_mu(),
            Self::Range { verify, .. } => verify.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: String,
    pub json: bool,
    pub csv: bool,
    /// Wall-clock timings make reports run-dependent, so they are opt-in.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), json: true, csv: true, timings: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default)]
    pub theorem: TheoremConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub mu_grid: MuGridConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

impl ScenarioConfig {
    pub fn vdp_default() -> Self {
        Self {
            system: SystemConfig::Vdp,
            region: RegionConfig::default(),
            theorem: TheoremConfig::default(),
            grids: GridConfig::default(),
            tolerances: ToleranceConfig::default(),
            epsilons: default_epsilons(),
            mu_grid: MuGridConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
