//! Per-question analysis and the machine-readable reports built from it.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{lack_of_fit, plurality, FitReport};
use crate::error::{Error, Result};
use crate::ingest::AnswerPredictionMatrix;
use crate::rank::{rank_default, rank_variant, ClusterHierarchy, Ranking};

/// Both rankers and the baseline applied to one answer-prediction matrix.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub matrix: AnswerPredictionMatrix,
    pub frequencies: Vec<f64>,
    pub plurality: String,
    pub default: Option<(Ranking, FitReport)>,
    pub variant: Option<(ClusterHierarchy, FitReport)>,
}

impl Analysis {
    pub fn default_top(&self) -> Option<&str> {
        self.default.as_ref().map(|(r, _)| r.order[0].as_str())
    }

    /// Most-supported answer of the top cluster.
    pub fn variant_top(&self) -> Option<&str> {
        self.variant.as_ref().map(|(h, _)| h.top_by_support(&self.matrix.support))
    }

    /// Fit of the default ranking when it ran, else of the variant.
    pub fn primary_fit(&self) -> Option<&FitReport> {
        self.default
            .as_ref()
            .map(|(_, f)| f)
            .or_else(|| self.variant.as_ref().map(|(_, f)| f))
    }
}

pub fn analyze(matrix: AnswerPredictionMatrix, config: &RunConfig) -> Result<Analysis> {
    config.check_caps(matrix.len())?;
    let frequencies = config.frequencies(&matrix);
    let default = if config.algorithm.runs_default() {
        let r = rank_default(&matrix, &frequencies)?;
        let fit = lack_of_fit(&matrix, &r)?;
        Some((r, fit))
    } else {
        None
    };
    let variant = if config.algorithm.runs_variant() {
        let h = rank_variant(&matrix, &frequencies)?;
        let fit = lack_of_fit(&matrix, &h)?;
        Some((h, fit))
    } else {
        None
    };
    Ok(Analysis {
        plurality: plurality(&matrix).to_string(),
        matrix,
        frequencies,
        default,
        variant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedLabel {
    pub answer: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub clusters: Vec<Vec<WeightedLabel>>,
    pub induced_order: Vec<String>,
    pub objective: f64,
    pub lack_of_fit_raw: f64,
    pub lack_of_fit_normalized: f64,
}

/// Output of `rank`. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub answers: Vec<String>,
    pub order_default: Option<Vec<String>>,
    pub clusters_variant: Option<VariantReport>,
    /// Objective and fit of the default ranking, or of the variant when only it ran.
    pub objective: f64,
    pub lack_of_fit_raw: f64,
    pub lack_of_fit_normalized: f64,
    pub plurality: String,
    pub dropped_predictions: u64,
}

impl RankReport {
    pub fn from_analysis(a: &Analysis) -> Self {
        let clusters_variant = a.variant.as_ref().map(|(h, fit)| VariantReport {
            clusters: h
                .clusters
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|wa| WeightedLabel {
                            answer: wa.answer.clone(),
                            weight: wa.weight,
                        })
                        .collect()
                })
                .collect(),
            induced_order: h.induced_order.clone(),
            objective: h.objective,
            lack_of_fit_raw: fit.lack_of_fit_raw,
            lack_of_fit_normalized: fit.lack_of_fit_normalized,
        });
        let objective = match (&a.default, &a.variant) {
            (Some((r, _)), _) => r.objective,
            (None, Some((h, _))) => h.objective,
            (None, None) => 0.0,
        };
        let fit = a.primary_fit();
        RankReport {
            answers: a.matrix.answers.clone(),
            order_default: a.default.as_ref().map(|(r, _)| r.order.clone()),
            clusters_variant,
            objective,
            lack_of_fit_raw: fit.map_or(0.0, |f| f.lack_of_fit_raw),
            lack_of_fit_normalized: fit.map_or(0.0, |f| f.lack_of_fit_normalized),
            plurality: a.plurality.clone(),
            dropped_predictions: a.matrix.dropped_predictions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayDiagonal {
    /// Diagonal cell `(a, a)` shows the number of respondents answering `a`.
    #[default]
    Support,
    Raw,
}

impl FromStr for DisplayDiagonal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support" => Ok(DisplayDiagonal::Support),
            "raw" => Ok(DisplayDiagonal::Raw),
            other => Err(Error::validation("display_diagonal", None, format!("unknown value {other:?}"))),
        }
    }
}

impl fmt::Display for DisplayDiagonal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisplayDiagonal::Support => "support",
            DisplayDiagonal::Raw => "raw",
        })
    }
}

/// Count matrix reordered by a ranking, ready for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapGrid {
    pub labels: Vec<String>,
    pub display_diagonal: DisplayDiagonal,
    /// `cells[i][j]`: respondents ranked-`i` answer predicting ranked-`j` answer.
    pub cells: Vec<Vec<u64>>,
}

impl HeatmapGrid {
    /// Display-only: the ranking is computed before and independently of this grid.
    pub fn new(matrix: &AnswerPredictionMatrix, ranking: &Ranking, diagonal: DisplayDiagonal) -> Self {
        let idx = &ranking.indices;
        let cells = idx
            .iter()
            .map(|&a| {
                idx.iter()
                    .map(|&g| match diagonal {
                        DisplayDiagonal::Support if a == g => matrix.support[a],
                        _ => matrix.counts[a][g],
                    })
                    .collect()
            })
            .collect();
        HeatmapGrid {
            labels: ranking.order.clone(),
            display_diagonal: diagonal,
            cells,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}
