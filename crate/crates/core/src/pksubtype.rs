//! Rule-based pharmacokinetic subtype classification.
//!
//! A PK interaction is coded along three axes: the trend of the change
//! (increased/decreased), the affected parameter (AUC, Cmax, half-life,
//! level, Tmax) and the affected drug (the label drug itself or the
//! concomitant drug), giving a 2×5×2 grid of twenty codes. Trend and
//! parameter come from keyword dictionaries applied to the trigger
//! phrase; the affected drug falls out of a token-distance rule.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Span, Token};

/// Direction of the pharmacokinetic change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trend {
    Increased,
    Decreased,
}

impl Trend {
    pub const ALL: [Trend; 2] = [Trend::Increased, Trend::Decreased];

    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Increased => "INCREASED",
            Trend::Decreased => "DECREASED",
        }
    }

    pub fn parse(s: &str) -> Option<Trend> {
        match s {
            "INCREASED" => Some(Trend::Increased),
            "DECREASED" => Some(Trend::Decreased),
            _ => None,
        }
    }
}

/// Which pharmacokinetic parameter is affected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PkParameter {
    Auc,
    Cmax,
    HalfLife,
    Level,
    Tmax,
}

impl PkParameter {
    pub const ALL: [PkParameter; 5] = [
        PkParameter::Auc,
        PkParameter::Cmax,
        PkParameter::HalfLife,
        PkParameter::Level,
        PkParameter::Tmax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PkParameter::Auc => "AUC",
            PkParameter::Cmax => "CMAX",
            PkParameter::HalfLife => "HALF_LIFE",
            PkParameter::Level => "LEVEL",
            PkParameter::Tmax => "TMAX",
        }
    }

    pub fn parse(s: &str) -> Option<PkParameter> {
        match s {
            "AUC" => Some(PkParameter::Auc),
            "CMAX" => Some(PkParameter::Cmax),
            "HALF_LIFE" => Some(PkParameter::HalfLife),
            "LEVEL" => Some(PkParameter::Level),
            "TMAX" => Some(PkParameter::Tmax),
            _ => None,
        }
    }
}

/// Whose pharmacokinetics change: the label drug or the other drug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AffectedObject {
    Drug,
    ConcomitantDrug,
}

impl AffectedObject {
    pub const ALL: [AffectedObject; 2] = [AffectedObject::Drug, AffectedObject::ConcomitantDrug];

    pub fn as_str(&self) -> &'static str {
        match self {
            AffectedObject::Drug => "DRUG",
            AffectedObject::ConcomitantDrug => "CONCOMITANT_DRUG",
        }
    }

    pub fn parse(s: &str) -> Option<AffectedObject> {
        match s {
            "DRUG" => Some(AffectedObject::Drug),
            "CONCOMITANT_DRUG" => Some(AffectedObject::ConcomitantDrug),
            _ => None,
        }
    }
}

/// One cell of the 2×5×2 subtype grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PkSubtype {
    pub trend: Trend,
    pub parameter: PkParameter,
    pub object: AffectedObject,
}

impl PkSubtype {
    pub fn new(trend: Trend, parameter: PkParameter, object: AffectedObject) -> Self {
        PkSubtype { trend, parameter, object }
    }

    /// The symbolic code string, e.g. `INCREASED AUC OF CONCOMITANT_DRUG`.
    pub fn code(&self) -> String {
        format!("{} {} OF {}", self.trend.as_str(), self.parameter.as_str(), self.object.as_str())
    }

    /// Inverse of [`PkSubtype::code`].
    pub fn parse_code(code: &str) -> Option<PkSubtype> {
        let mut parts = code.split_whitespace();
        let trend = Trend::parse(parts.next()?)?;
        let parameter = PkParameter::parse(parts.next()?)?;
        if parts.next()? != "OF" {
            return None;
        }
        let object = AffectedObject::parse(parts.next()?)?;
        if parts.next().is_some() {
            return None;
        }
        Some(PkSubtype { trend, parameter, object })
    }

    /// All twenty grid cells in a fixed order.
    pub fn all() -> Vec<PkSubtype> {
        let mut out = Vec::with_capacity(20);
        for trend in Trend::ALL {
            for parameter in PkParameter::ALL {
                for object in AffectedObject::ALL {
                    out.push(PkSubtype { trend, parameter, object });
                }
            }
        }
        out
    }
}

impl fmt::Display for PkSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Error)]
pub enum DictError {
    #[error("dictionary line {line}: expected <keyword>\\t<VALUE>")]
    Malformed { line: usize },
    #[error("dictionary line {line}: unknown value {value:?}")]
    UnknownValue { line: usize, value: String },
    #[error("failed to read dictionary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Keyword dictionaries driving trend and parameter matching.
///
/// File format: one `<keyword>\t<VALUE>` pair per line, `#` comments and
/// blank lines ignored. Keywords are stored lowercase and matched
/// case-insensitively against single tokens.
#[derive(Debug, Clone)]
pub struct PkDicts {
    trend: HashMap<String, Trend>,
    param: HashMap<String, PkParameter>,
}

impl PkDicts {
    /// The dictionaries shipped with the crate.
    pub fn builtin() -> Self {
        let trend = parse_dict(include_str!("../data/trend.tsv"), Trend::parse)
            .expect("builtin trend dictionary is well-formed");
        let param = parse_dict(include_str!("../data/param.tsv"), PkParameter::parse)
            .expect("builtin parameter dictionary is well-formed");
        PkDicts { trend, param }
    }

    pub fn from_files(trend_path: &Path, param_path: &Path) -> Result<Self, DictError> {
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|source| DictError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Ok(PkDicts {
            trend: parse_dict(&read(trend_path)?, Trend::parse)?,
            param: parse_dict(&read(param_path)?, PkParameter::parse)?,
        })
    }

    pub fn trend_of(&self, token: &str) -> Option<Trend> {
        self.trend.get(&token.to_lowercase()).copied()
    }

    pub fn param_of(&self, token: &str) -> Option<PkParameter> {
        self.param.get(&token.to_lowercase()).copied()
    }
}

fn parse_dict<V: Copy>(
    text: &str,
    parse_value: impl Fn(&str) -> Option<V>,
) -> Result<HashMap<String, V>, DictError> {
    let mut map = HashMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keyword, value) =
            line.split_once('\t').ok_or(DictError::Malformed { line: i + 1 })?;
        let value = value.trim();
        let parsed = parse_value(value).ok_or_else(|| DictError::UnknownValue {
            line: i + 1,
            value: value.to_string(),
        })?;
        map.insert(keyword.trim().to_lowercase(), parsed);
    }
    Ok(map)
}

/// First trigger token with a trend-dictionary hit decides the trend.
pub fn match_trend(trigger_tokens: &[&str], dicts: &PkDicts) -> Option<Trend> {
    trigger_tokens.iter().find_map(|t| dicts.trend_of(t))
}

/// First trigger token with a parameter-dictionary hit decides the parameter.
pub fn match_param(trigger_tokens: &[&str], dicts: &PkDicts) -> Option<PkParameter> {
    trigger_tokens.iter().find_map(|t| dicts.param_of(t))
}

/// Minimum number of tokens strictly between any token of `a` and any
/// token of `b`; 0 when the spans touch or overlap.
pub fn span_distance(a: &Span, b: &Span) -> usize {
    let mut best = usize::MAX;
    for &(a0, a1) in &a.fragments {
        for &(b0, b1) in &b.fragments {
            let d = if a1 < b0 {
                b0 - a1 - 1
            } else if b1 < a0 {
                a0 - b1 - 1
            } else {
                0
            };
            best = best.min(d);
        }
    }
    best
}

/// Decides whose pharmacokinetics the trigger talks about.
///
/// With no label-drug occurrence in the sentence the effect can only be
/// on the concomitant drug. Otherwise whichever drug sits closer to the
/// trigger wins, the label drug taking ties.
pub fn resolve_object(
    trigger: &Span,
    precipitant: &Span,
    label_drug_occurrences: &[Span],
) -> AffectedObject {
    let Some(d_label) =
        label_drug_occurrences.iter().map(|o| span_distance(o, trigger)).min()
    else {
        return AffectedObject::ConcomitantDrug;
    };
    let d_precipitant = span_distance(precipitant, trigger);
    if d_label <= d_precipitant {
        AffectedObject::Drug
    } else {
        AffectedObject::ConcomitantDrug
    }
}

/// A classification result plus dictionary-coverage flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PkClassification {
    pub subtype: PkSubtype,
    pub trend_matched: bool,
    pub param_matched: bool,
}

impl PkClassification {
    /// True when a dictionary miss forced a default trend or parameter.
    pub fn low_confidence(&self) -> bool {
        !(self.trend_matched && self.param_matched)
    }
}

/// Composes trend, parameter and affected-object decisions for one PK
/// trigger. Total: dictionary misses fall back to INCREASED / LEVEL and
/// are flagged via [`PkClassification::low_confidence`].
pub fn classify(
    tokens: &[Token],
    trigger: &Span,
    precipitant: &Span,
    label_drug_occurrences: &[Span],
    dicts: &PkDicts,
) -> PkClassification {
    let trigger_tokens: Vec<&str> =
        trigger.token_indices().iter().map(|&i| tokens[i].text.as_str()).collect();
    let trend = match_trend(&trigger_tokens, dicts);
    let param = match_param(&trigger_tokens, dicts);
    let object = resolve_object(trigger, precipitant, label_drug_occurrences);
    PkClassification {
        subtype: PkSubtype {
            trend: trend.unwrap_or(Trend::Increased),
            parameter: param.unwrap_or(PkParameter::Level),
            object,
        },
        trend_matched: trend.is_some(),
        param_matched: param.is_some(),
    }
}
