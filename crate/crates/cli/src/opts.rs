//! Option groups shared by several subcommands.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use torus_core::map::GOLDEN_GAMMA;
use torus_core::numtheory::named_vector;
use torus_core::resonance::{CLASSIFICATION_RHO, DEFAULT_MAX_ORDER, RESONANCE_ORDER_CUTOFF};
use torus_core::sweep::{DEFAULT_WINDOW, DIG_CUTOFF};
use torus_core::{FrequencyVector, GridSpec, MapParams, OmegaBox};

use crate::CliError;

/// Fixed constants of the map.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapOpts {
    /// Frequency offset gamma in Omega(y) = (y + gamma, -delta + beta y^2).
    #[arg(long, default_value_t = GOLDEN_GAMMA)]
    pub gamma: f64,
    /// Twist beta in Omega(y).
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Force amplitude of sin 2 pi x1.
    #[arg(long = "force-a", default_value_t = 1.0)]
    pub a: f64,
    /// Force amplitude of sin 2 pi x2.
    #[arg(long = "force-b", default_value_t = 1.0)]
    pub b: f64,
    /// Force amplitude of sin 2 pi (x1 - x2).
    #[arg(long = "force-c", default_value_t = 1.0)]
    pub c: f64,
}

impl MapOpts {
    pub fn params(&self, delta: f64, eps: f64) -> MapParams {
        MapParams {
            gamma: self.gamma,
            beta: self.beta,
            a: self.a,
            b: self.b,
            c: self.c,
            delta,
            eps,
        }
    }
}

/// Averaging window and classification cutoffs.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOpts {
    /// Averaging window T; each orbit is iterated 2T steps.
    #[arg(long = "T", value_name = "T", default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Orbits whose two windows agree to at most this many digits are chaotic.
    #[arg(long, default_value_t = DIG_CUTOFF)]
    pub dig_cutoff: f64,
    /// Resonance precision rho used for classification.
    #[arg(long, default_value_t = CLASSIFICATION_RHO)]
    pub rho: f64,
    /// Bounded regular orbits with resonance order M at or below this are resonant.
    #[arg(long, default_value_t = RESONANCE_ORDER_CUTOFF)]
    pub order_cutoff: u64,
    /// Largest order searched; vectors with no resonance below it count as rotational.
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    pub max_order: u64,
    /// Orbits with |y| above this are treated as escaping.
    #[arg(long)]
    pub y_escape: Option<f64>,
    /// Initial angles (x1, x2).
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0])]
    pub angle: Vec<f64>,
    /// Frequency box for bounded orbits: w1min,w1max,w2min,w2max.
    #[arg(long = "box", value_delimiter = ',', num_args = 4, default_values_t = [0.0, 1.0, 0.0, 1.0])]
    pub omega_box: Vec<f64>,
    #[command(flatten)]
    pub map: MapOpts,
}

impl ClassifyOpts {
    pub fn omega_box(&self) -> Result<OmegaBox, CliError> {
        match self.omega_box[..] {
            [a, b, c, d] => Ok(OmegaBox::new(a, b, c, d)),
            _ => Err(CliError::Usage("--box takes four values".into())),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let angle = match self.angle[..] {
            [x1, x2] => [x1, x2],
            _ => return Err(CliError::Usage("--angle takes two values".into())),
        };
        Ok(GridSpec {
            window: self.window,
            dig_cutoff: self.dig_cutoff,
            rho: self.rho,
            order_cutoff: self.order_cutoff,
            max_order: self.max_order,
            omega_box: self.omega_box()?,
            initial_angle: angle,
            y_escape: self.y_escape,
            map: self.map.params(0.0, 0.0),
            ..GridSpec::default()
        })
    }
}

/// Output file plus the `--check` switch.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOpts {
    /// CSV output; the JSON sidecar goes next to it with extension .json.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Re-verify invariants of an existing output instead of computing.
    #[arg(long, requires = "out")]
    #[serde(skip)]
    pub check: bool,
}

impl OutOpts {
    pub fn required(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out is required for this command".into()))
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// A frequency vector given by name (`spiral-sq`, `D49`, `D44-b`, ...) or as
/// `w1,w2`.
pub fn parse_omega(text: &str) -> Result<(FrequencyVector, String), CliError> {
    if let Some((a, b)) = text.split_once(',') {
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse frequency component {s:?}")))
        };
        let w = FrequencyVector::new(parse(a)?, parse(b)?);
        return Ok((w, format!("({:.15}, {:.15})", w.w1, w.w2)));
    }
    let v = named_vector(text).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((v.omega, v.label()))
}
