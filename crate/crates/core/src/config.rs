use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnswerPredictionMatrix, CanonicalizationMap, IngestOptions, PredictionPolicy, DEFAULT_DONT_KNOW, DEFAULT_THRESHOLD};
use crate::rank::{DEFAULT_MAX, VARIANT_MAX};

/// Where the per-answer frequencies used for tie-breaking and cluster weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PSource {
    /// `support / sum(support)`.
    #[default]
    Support,
    /// Row sums of the count matrix.
    RowSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Default,
    Variant,
    #[default]
    Both,
}

impl Algorithm {
    pub fn runs_default(self) -> bool {
        matches!(self, Algorithm::Default | Algorithm::Both)
    }

    pub fn runs_variant(self) -> bool {
        matches!(self, Algorithm::Variant | Algorithm::Both)
    }
}

macro_rules! str_enum {
    ($ty:ident, $field:literal, $($name:literal => $variant:ident),+) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::validation($field, None, format!("unknown value {other:?}"))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($ty::$variant => $name,)+
                })
            }
        }
    };
}

str_enum!(PSource, "p_source", "support" => Support, "row_sum" => RowSum);
str_enum!(Algorithm, "algorithm", "default" => Default, "variant" => Variant, "both" => Both);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub default: usize,
    pub variant: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            default: DEFAULT_MAX,
            variant: VARIANT_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub threshold: f64,
    pub dont_know_token: String,
    pub prediction_policy: PredictionPolicy,
    pub p_source: PSource,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub caps: Caps,
    pub canonicalization: CanonicalizationMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threshold: DEFAULT_THRESHOLD,
            dont_know_token: DEFAULT_DONT_KNOW.to_string(),
            prediction_policy: PredictionPolicy::All,
            p_source: PSource::Support,
            algorithm: Algorithm::Both,
            seed: 0,
            caps: Caps::default(),
            canonicalization: CanonicalizationMap::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::validation("threshold", None, format!("{} is outside [0, 1)", self.threshold)));
        }
        if self.caps.default == 0 || self.caps.default > DEFAULT_MAX {
            return Err(Error::validation("caps.default", None, format!("must be in 1..={DEFAULT_MAX}")));
        }
        if self.caps.variant == 0 || self.caps.variant > VARIANT_MAX {
            return Err(Error::validation("caps.variant", None, format!("must be in 1..={VARIANT_MAX}")));
        }
        Ok(())
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            threshold: self.threshold,
            dont_know_token: self.dont_know_token.clone(),
            prediction_policy: self.prediction_policy,
        }
    }

    pub fn frequencies(&self, matrix: &AnswerPredictionMatrix) -> Vec<f64> {
        match self.p_source {
            PSource::Support => matrix.support_frequencies(),
            PSource::RowSum => matrix.row_sum_frequencies(),
        }
    }

    /// Fails with a cap error when `n` answers exceed the configured cap for `algorithm`.
    pub fn check_caps(&self, n: usize) -> Result<()> {
        if self.algorithm.runs_default() && n > self.caps.default {
            return Err(Error::TooLarge {
                algorithm: "default ranking",
                size: n,
                cap: self.caps.default,
            });
        }
        if self.algorithm.runs_variant() && n > self.caps.variant {
            return Err(Error::TooLarge {
                algorithm: "variant ranking",
                size: n,
                cap: self.caps.variant,
            });
        }
        Ok(())
    }
}
