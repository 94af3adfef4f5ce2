//! On-disk rule formats: CSV with `#`-prefixed metadata header lines, or a
//! JSON object `{"meta": ..., "nodes": [...], "weights": [...]}`. Numbers
//! are written with 17 significant digits so a round trip through text is
//! value-exact for binary64.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulegen::{QuadratureRule, RuleMeta};

#[derive(Debug, Error)]
pub enum RuleFileError {
    #[error("line {line}: malformed rule row: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("rule file has no data rows")]
    Empty,
    #[error("missing or malformed band metadata")]
    BadBand,
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRule {
    meta: JsonMeta,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonMeta {
    band: (f64, f64),
    order: usize,
    #[serde(flatten)]
    rest: RuleMeta,
}

/// Format with 17 significant digits (enough to round-trip any f64).
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(rule: &QuadratureRule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# source_id: {}", rule.meta.source_id);
    let _ = writeln!(out, "# column: {}", rule.meta.column);
    let _ = writeln!(out, "# band_nm: {},{}", fmt17(rule.band.0), fmt17(rule.band.1));
    let _ = writeln!(out, "# order: {}", rule.order());
    let _ = writeln!(out, "# modifier: {}", rule.meta.modifier);
    let _ = writeln!(out, "# moment_rel_tol: {:e}", rule.meta.moment_rel_tol);
    let _ = writeln!(out, "# tool_version: {}", rule.meta.tool_version);
    let _ = writeln!(out, "node_nm,weight");
    for (n, w) in rule.nodes.iter().zip(&rule.weights) {
        let _ = writeln!(out, "{},{}", fmt17(*n), fmt17(*w));
    }
    out
}

pub fn from_csv(text: &str) -> Result<QuadratureRule, RuleFileError> {
    let mut meta = RuleMeta {
        source_id: String::new(),
        column: String::new(),
        modifier: String::new(),
        moment_rel_tol: 0.0,
        tool_version: String::new(),
    };
    let mut band: Option<(f64, f64)> = None;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "source_id" => meta.source_id = value.to_string(),
                    "column" => meta.column = value.to_string(),
                    "modifier" => meta.modifier = value.to_string(),
                    "moment_rel_tol" => meta.moment_rel_tol = value.parse().unwrap_or(0.0),
                    "tool_version" => meta.tool_version = value.to_string(),
                    "band_nm" => {
                        let parts: Vec<&str> = value.split(',').collect();
                        if parts.len() == 2 {
                            let a = parts[0].trim().parse().map_err(|_| RuleFileError::BadBand)?;
                            let b = parts[1].trim().parse().map_err(|_| RuleFileError::BadBand)?;
                            band = Some((a, b));
                        }
                    }
                    _ => {}
                }
            }
            continue;
        }
        if trimmed.starts_with("node_nm") {
            continue; // column header
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 2 {
            return Err(RuleFileError::MalformedRow {
                line,
                detail: format!("expected 2 fields, got {}", parts.len()),
            });
        }
        let node: f64 = parts[0].trim().parse().map_err(|e| RuleFileError::MalformedRow {
            line,
            detail: format!("{e}"),
        })?;
        let weight: f64 = parts[1].trim().parse().map_err(|e| RuleFileError::MalformedRow {
            line,
            detail: format!("{e}"),
        })?;
        nodes.push(node);
        weights.push(weight);
    }
    if nodes.is_empty() {
        return Err(RuleFileError::Empty);
    }
    let band = band.ok_or(RuleFileError::BadBand)?;
    Ok(QuadratureRule {
        nodes,
        weights,
        band,
        meta,
    })
}

pub fn to_json(rule: &QuadratureRule) -> Result<String, RuleFileError> {
    let json = JsonRule {
        meta: JsonMeta {
            band: rule.band,
            order: rule.order(),
            rest: rule.meta.clone(),
        },
        nodes: rule.nodes.clone(),
        weights: rule.weights.clone(),
    };
    Ok(serde_json::to_string_pretty(&json)?)
}

pub fn from_json(text: &str) -> Result<QuadratureRule, RuleFileError> {
    let json: JsonRule = serde_json::from_str(text)?;
    if json.nodes.is_empty() || json.nodes.len() != json.weights.len() {
        return Err(RuleFileError::Empty);
    }
    Ok(QuadratureRule {
        nodes: json.nodes,
        weights: json.weights,
        band: json.meta.band,
        meta: json.meta.rest,
    })
}
