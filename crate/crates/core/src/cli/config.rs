//! Run configuration read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::inference::{KernelKind, ScoreForm};
use crate::numeric::DesignSpec;
use crate::smoother::DrawMode;
use crate::structural::FevdForm;

/// Bootstrap bandwidth: the sample-size rule or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(usize),
}

impl Bandwidth {
    pub fn fixed(&self) -> Option<usize> {
        match self {
            Bandwidth::Auto => None,
            Bandwidth::Fixed(b) => Some(*b),
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<usize>()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be \"auto\" or a non-negative integer, got {s:?}"))
    }
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Auto => s.serialize_str("auto"),
            Bandwidth::Fixed(b) => s.serialize_u64(*b as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(b) => Ok(Bandwidth::Fixed(b as usize)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn default_lags() -> usize {
    4
}
fn default_trend() -> i32 {
    0
}
fn default_h1() -> usize {
    8
}
fn default_h2() -> usize {
    20
}
fn default_draws() -> usize {
    1000
}
fn default_alpha() -> Vec<f64> {
    vec![0.32]
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("hetlp-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// Column holding the volatility instrument.
    pub instrument: Option<String>,
    /// Variable whose structural shock is identified.
    pub shock: Option<String>,
    /// Columns to use as the panel; defaults to every column except the date
    /// and the instrument.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    /// Optional date column; a first column named `date` is used when unset.
    #[serde(default)]
    pub date_column: Option<String>,
    #[serde(default = "default_lags")]
    pub lags: usize,
    /// Degree of the deterministic trend; -1 for none.
    #[serde(default = "default_trend")]
    pub trend: i32,
    #[serde(default = "default_h1")]
    pub h1: usize,
    #[serde(default = "default_h2")]
    pub h2: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    /// Kernel of the long-run covariance reported with the estimates.
    #[serde(default)]
    pub kernel: KernelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Variable order for the recursive comparison; defaults to the panel order.
    #[serde(default)]
    pub ordering: Option<Vec<String>>,
    #[serde(default)]
    pub flip: bool,
    #[serde(default)]
    pub score_form: ScoreForm,
    #[serde(default)]
    pub fevd_form: FevdForm,
    #[serde(default)]
    pub smooth_mode: DrawMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            instrument: None,
            shock: None,
            variables: None,
            date_column: None,
            lags: default_lags(),
            trend: default_trend(),
            h1: default_h1(),
            h2: default_h2(),
            draws: default_draws(),
            alpha: default_alpha(),
            bandwidth: Bandwidth::Auto,
            kernel: KernelKind::Bartlett,
            seed: 0,
            out_dir: default_out_dir(),
            ordering: None,
            flip: false,
            score_form: ScoreForm::Consistent,
            fevd_form: FevdForm::Standard,
            smooth_mode: DrawMode::Refit,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn design(&self) -> DesignSpec {
        DesignSpec::new(self.lags, self.trend, self.h1, self.h2)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.input.is_none() {
            return Err(Error::Config("no input file given".into()));
        }
        if self.instrument.is_none() {
            return Err(Error::Config("no instrument column given".into()));
        }
        if self.shock.is_none() {
            return Err(Error::Config("no shock variable given".into()));
        }
        if self.draws == 0 {
            return Err(Error::Config("draws must be positive".into()));
        }
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("every alpha must lie in (0, 1)".into()));
        }
        if self.bandwidth == Bandwidth::Fixed(0) {
            return Err(Error::Config("bootstrap bandwidth must be at least 1".into()));
        }
        let spec = self.design();
        if spec.lags == 0 || spec.trend_degree < -1 || spec.h1 < spec.lags || spec.h2 < spec.h1 {
            return Err(Error::Config(format!(
                "need lags >= 1, trend >= -1, h1 >= lags and h2 >= h1 (got lags {}, trend {}, h1 {}, h2 {})",
                spec.lags, spec.trend_degree, spec.h1, spec.h2
            )));
        }
        Ok(())
    }
}
