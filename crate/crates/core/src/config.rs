//! Numerical tolerances shared by every check in the crate.
//!
//! Defaults can be overridden wholesale (one global value for the 1e-9
//! family) or per check through a TOML file:
//!
//! ```toml
//! tol = 1e-10
//!
//! [checks]
//! positivity = 1e-14
//! equilibrium = 1e-7
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{CrnError, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Environment variable that replaces [`DEFAULT_TOL`].
pub const TOL_ENV: &str = "CRN_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative pivot threshold for rank and kernel computations.
    pub rank: f64,
    /// Relative residual bound for image-membership tests.
    pub membership: f64,
    /// Absolute threshold, after normalisation, below which an entry of
    /// ρ, σ or a mass vector counts as zero.
    pub positivity: f64,
    /// Relative bound on ‖L·Exp(Zᵀ Ln x)‖∞ for accepting an equilibrium.
    pub equilibrium: f64,
    /// Relative bound on ‖𝓛 − 𝓛ᵀ‖∞ for symmetry.
    pub symmetry: f64,
    /// Bound used for equality in the dissipation inequalities.
    pub inequality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::with_global(DEFAULT_TOL)
    }
}

impl Tolerances {
    /// Sets every check in the 1e-9 family to `tol`; positivity and
    /// equilibrium keep their own defaults.
    pub fn with_global(tol: f64) -> Self {
        Tolerances {
            rank: tol,
            membership: tol,
            positivity: 1e-12,
            equilibrium: 1e-8,
            symmetry: tol,
            inequality: tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("rank", self.rank),
            ("membership", self.membership),
            ("positivity", self.positivity),
            ("equilibrium", self.equilibrium),
            ("symmetry", self.symmetry),
            ("inequality", self.inequality),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(CrnError::Invalid(format!(
                    "tolerance `{name}` must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Reads `CRN_TOL` if set.
    pub fn global_from_env() -> Result<Option<f64>> {
        match std::env::var(TOL_ENV) {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| CrnError::Invalid(format!("{TOL_ENV}=`{s}` is not a number"))),
            Err(_) => Ok(None),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tol: Option<f64>,
    #[serde(default)]
    checks: Option<toml::Table>,
}

/// Layers tolerance sources: defaults, then the optional config file, then
/// `CRN_TOL`, then an explicit global value (a command-line flag).
pub fn resolve_tolerances(
    config_text: Option<&str>,
    env_global: Option<f64>,
    flag_global: Option<f64>,
) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    let mut overrides = None;
    if let Some(text) = config_text {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CrnError::Invalid(format!("config: {e}")))?;
        if let Some(g) = file.tol {
            tol = Tolerances::with_global(g);
        }
        overrides = file.checks;
    }
    if let Some(g) = env_global.or(flag_global) {
        // flag wins over env
        tol = Tolerances::with_global(flag_global.unwrap_or(g));
    }
    if let Some(table) = overrides {
        let mut merged = toml::Table::try_from(tol).map_err(|e| CrnError::Invalid(format!("config: {e}")))?;
        for (k, v) in table {
            merged.insert(k, v);
        }
        tol = merged
            .try_into()
            .map_err(|e| CrnError::Invalid(format!("config [checks]: {e}")))?;
    }
    tol.validate()?;
    Ok(tol)
}
