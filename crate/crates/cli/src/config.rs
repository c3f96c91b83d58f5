//! JSON run-configuration schema and conversion into toolbox types.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use lpvsyn::iqc::{
    make_multiplier, realize_filter, MultiplierKind, MultiplierRealization, MultiplierSpec,
    DEFAULT_C1, DEFAULT_DELTA, DEFAULT_EPSILON,
};
use lpvsyn::model::{DelaySpec, DelayedLpvPlant};
use lpvsyn::param::{BasisFunction, ParamMatrixFunction, ParameterDomain};
use lpvsyn::sim::Scenario;
use lpvsyn::synth::{GammaMode, SynthesisConfig};
use lpvsyn::{Error, Result};

/// One monomial term of a parameter-dependent matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    /// Monomial exponents, one per parameter component.
    pub exponents: Vec<u32>,
    /// Coefficient matrix as nested rows.
    pub coeff: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    pub intervals: Vec<(f64, f64)>,
    pub rate_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub parameters: ParameterConfig,
    pub a_p: Vec<MatrixTerm>,
    pub a_d: Vec<MatrixTerm>,
    pub b_p1: Vec<MatrixTerm>,
    pub b_p2: Vec<MatrixTerm>,
    pub c_p1: Vec<MatrixTerm>,
    pub c_d1: Vec<MatrixTerm>,
    pub d_p11: Vec<MatrixTerm>,
    pub d_p12: Vec<MatrixTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub tau_bar: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplierConfig {
    /// Explicit multiplier selection; `None` applies the default rule
    /// (both kinds when `r <= 0.5`, the second kind alone otherwise).
    pub kinds: Option<Vec<MultiplierKind>>,
    pub c1: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self {
            kinds: None,
            c1: DEFAULT_C1,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    /// Monomial exponent vectors for the Lyapunov-side basis.
    pub r_basis: Vec<Vec<u32>>,
    /// Monomial exponent vectors shared by the multiplier scalings.
    pub x_basis: Vec<Vec<u32>>,
    pub grid_counts: Vec<usize>,
    /// Fixed gain level; `null` minimizes.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_recovery_margin")]
    pub recovery_margin: f64,
}

fn default_recovery_margin() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    pub delay: DelayConfig,
    #[serde(default)]
    pub multipliers: MultiplierConfig,
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub scenarios: BTreeMap<String, Scenario>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn matrix_function(terms: &[MatrixTerm], param_dim: usize) -> Result<ParamMatrixFunction> {
    if terms.is_empty() {
        return Err(Error::InvalidConfig("matrix needs at least one term".into()));
    }
    let mut out = Vec::with_capacity(terms.len());
    for term in terms {
        if term.exponents.len() != param_dim {
            return Err(Error::InvalidConfig(format!(
                "term has {} exponents, domain has {param_dim} components",
                term.exponents.len()
            )));
        }
        let nrows = term.coeff.len();
        let ncols = term.coeff.first().map_or(0, |r| r.len());
        if nrows == 0 || ncols == 0 || term.coeff.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidConfig(
                "coefficient matrix rows must be nonempty and rectangular".into(),
            ));
        }
        let m = DMatrix::from_fn(nrows, ncols, |i, j| term.coeff[i][j]);
        out.push((BasisFunction::monomial(term.exponents.clone()), m));
    }
    ParamMatrixFunction::new(out)
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn build_plant(&self) -> Result<DelayedLpvPlant> {
        let dim = self.plant.parameters.intervals.len();
        let domain = ParameterDomain::new(
            self.plant.parameters.intervals.clone(),
            self.plant.parameters.rate_intervals.clone(),
        )?;
        let delay = DelaySpec::new(self.delay.tau_bar, self.delay.r)?;
        DelayedLpvPlant::new(
            matrix_function(&self.plant.a_p, dim)?,
            matrix_function(&self.plant.a_d, dim)?,
            matrix_function(&self.plant.b_p1, dim)?,
            matrix_function(&self.plant.b_p2, dim)?,
            matrix_function(&self.plant.c_p1, dim)?,
            matrix_function(&self.plant.c_d1, dim)?,
            matrix_function(&self.plant.d_p11, dim)?,
            matrix_function(&self.plant.d_p12, dim)?,
            delay,
            domain,
        )
    }

    /// Multiplier kinds for a given delay-rate bound: configured list or
    /// the default selection rule.
    pub fn multiplier_kinds(&self, r: f64) -> Vec<MultiplierKind> {
        match &self.multipliers.kinds {
            Some(kinds) => kinds.clone(),
            None if r <= 0.5 => vec![MultiplierKind::Pi1, MultiplierKind::Pi2],
            None => vec![MultiplierKind::Pi2],
        }
    }

    pub fn build_multipliers(&self, delay: &DelaySpec) -> Result<Vec<MultiplierSpec>> {
        self.multiplier_kinds(delay.r)
            .iter()
            .map(|&kind| {
                make_multiplier(
                    kind,
                    delay,
                    self.multipliers.c1,
                    self.multipliers.epsilon,
                    self.multipliers.delta,
                )
            })
            .collect()
    }

    pub fn build_realization(&self, plant: &DelayedLpvPlant) -> Result<MultiplierRealization> {
        realize_filter(&self.build_multipliers(&plant.delay)?, plant.n_x)
    }

    pub fn build_synthesis(&self, gamma_override: Option<f64>) -> Result<SynthesisConfig> {
        let basis = |exps: &[Vec<u32>]| -> Vec<BasisFunction> {
            exps.iter()
                .map(|e| BasisFunction::monomial(e.clone()))
                .collect()
        };
        let gamma_mode = match gamma_override.or(self.synthesis.gamma) {
            Some(g) => GammaMode::Fixed(g),
            None => GammaMode::Minimize,
        };
        Ok(SynthesisConfig {
            r_basis: basis(&self.synthesis.r_basis),
            x_basis: basis(&self.synthesis.x_basis),
            grid_counts: self.synthesis.grid_counts.clone(),
            gamma_mode,
            recovery_margin: self.synthesis.recovery_margin,
            sdp: Default::default(),
        })
    }

    pub fn scenario(&self, name: &str) -> Result<&Scenario> {
        self.scenarios.get(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "scenario '{name}' not found; available: {:?}",
                self.scenarios.keys().collect::<Vec<_>>()
            ))
        })
    }
}
