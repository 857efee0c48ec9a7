//! Run configuration: one TOML file, strict keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fss::{Bracket, CollapseSign};
use crate::pencil::{BConvention, Measure, PencilOptions};
use crate::quadrature::QuadratureRule;
use crate::sweep::{Precision, SolverOptions, SweepConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FssConfig {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub bisection_tol: f64,
    pub collapse_window: [f64; 2],
    pub collapse_sign_convention: CollapseSign,
    /// Collapse estimates; any unset value is taken from the crossing fit.
    pub collapse_lambda_c: Option<f64>,
    pub collapse_alpha: Option<f64>,
    pub collapse_nu: Option<f64>,
}

impl Default for FssConfig {
    fn default() -> Self {
        let b = Bracket::default();
        Self {
            bracket_lo: b.lo,
            bracket_hi: b.hi,
            bisection_tol: b.tol,
            collapse_window: [0.5, 0.56],
            collapse_sign_convention: CollapseSign::Printed,
            collapse_lambda_c: None,
            collapse_alpha: None,
            collapse_nu: None,
        }
    }
}

impl FssConfig {
    pub fn bracket(&self) -> Bracket {
        Bracket {
            lo: self.bracket_lo,
            hi: self.bracket_hi,
            tol: self.bisection_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub extended_precision: bool,
    pub b_element_convention: BConvention,
    pub measure: Measure,
    pub residual_tol: f64,
    pub condition_warn: f64,
    pub condition_limit: f64,
    pub allow_ill_conditioned: bool,
    /// Quadrature for the oracle checks; chosen per rate range when unset.
    pub quadrature: Option<QuadratureRule>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let p = PencilOptions::default();
        Self {
            extended_precision: true,
            b_element_convention: p.b_convention,
            measure: p.measure,
            residual_tol: SolverOptions::default().residual_tol,
            condition_warn: p.condition_warn,
            condition_limit: p.condition_limit,
            allow_ill_conditioned: p.allow_ill_conditioned,
            quadrature: None,
        }
    }
}

impl NumericsConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            precision: if self.extended_precision {
                Precision::Extended
            } else {
                Precision::Double
            },
            pencil: PencilOptions {
                b_convention: self.b_element_convention,
                measure: self.measure,
                condition_warn: self.condition_warn,
                condition_limit: self.condition_limit,
                allow_ill_conditioned: self.allow_ill_conditioned,
            },
            residual_tol: self.residual_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Multiplies every validation tolerance.
    pub tolerance_scale: f64,
    pub random_pairs: usize,
    pub seed: u64,
    /// λ points of the Hellmann–Feynman and regression sweeps.
    pub lambda_points: usize,
    pub n_basis: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            random_pairs: 200,
            seed: 20_240_501,
            lambda_points: 200,
            n_basis: 48,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub sweep: SweepConfig,
    pub fss: FssConfig,
    pub numerics: NumericsConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            sweep: SweepConfig::default(),
            fss: FssConfig::default(),
            numerics: NumericsConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        let f = &self.fss;
        if !(f.bracket_lo < f.bracket_hi) {
            return Err(Error::Config("fss.bracket_lo must be below fss.bracket_hi".into()));
        }
        if !(f.bisection_tol > 0.0) {
            return Err(Error::Config("fss.bisection_tol must be positive".into()));
        }
        if !(f.collapse_window[0] < f.collapse_window[1]) {
            return Err(Error::Config("fss.collapse_window must be ascending".into()));
        }
        if !(self.numerics.residual_tol > 0.0) {
            return Err(Error::Config("numerics.residual_tol must be positive".into()));
        }
        if let Some(q) = &self.numerics.quadrature {
            q.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let v = &self.validate;
        if !(v.tolerance_scale > 0.0 && v.tolerance_scale.is_finite()) {
            return Err(Error::Config("validate.tolerance_scale must be positive".into()));
        }
        if v.lambda_points < 3 || v.n_basis < 2 {
            return Err(Error::Config("validate needs lambda_points ≥ 3 and n_basis ≥ 2".into()));
        }
        Ok(())
    }

    /// Canonical TOML rendering, the input of [`RunConfig::hash`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// SHA-256 of the canonical rendering. The output directory is left out
    /// since it cannot change any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// Second line of every output file.
    pub fn metadata(&self) -> String {
        format!(
            "{} {} config_sha256={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.hash()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sweep.n_list.len(), 9);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[sweep]\nlambda_mni = 0.4\n").unwrap_err();
        assert!(err.to_string().contains("lambda_mni"), "{err}");
        let err = RunConfig::from_toml("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn nested_overrides() {
        let c = RunConfig::from_toml(
            "[numerics]\nb_element_convention = \"paper_printed\"\nextended_precision = false\n\
             [fss]\ncollapse_sign_convention = \"standard\"\n",
        )
        .unwrap();
        assert_eq!(c.numerics.b_element_convention, BConvention::PaperPrinted);
        assert_eq!(c.numerics.solver_options().precision, Precision::Double);
        assert_eq!(c.fss.collapse_sign_convention, CollapseSign::Standard);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sweep.lambda_steps = 11;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.sweep.lambda_steps = a.sweep.lambda_steps;
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        let back = RunConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[sweep]\nn_list = []\n").is_err());
        assert!(RunConfig::from_toml("[validate]\ntolerance_scale = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[fss]\nbracket_lo = 0.6\n").is_err());
    }
}
