//! Input file formats: model JSON, projects JSON and rankings CSV.
//!
//! JSON parsers report fields they do not know. The caller decides whether
//! those are fatal (`--strict`) or warnings.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::elicitation::{CategoryKey, RankingSheet};
use crate::model::{CausalModel, FactorCategory, FactorKind, ProjectRecord};

pub const RANKINGS_HEADER: [&str; 5] = ["expert_id", "kind", "category", "factor_id", "rank"];

const MODEL_FIELDS: &[&str] = &["context", "factors", "provenance", "quantified"];
const FACTOR_FIELDS: &[&str] = &["id", "name", "kind", "category", "scale", "multiplier"];
const MULTIPLIER_FIELDS: &[&str] = &["min", "most_likely", "max"];
const PROJECT_FIELDS: &[&str] = &["project_id", "size", "defects_found", "levels"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("input is empty")]
    Empty,
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown field(s): {}", .0.join(", "))]
    UnknownFields(Vec<String>),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("expected CSV header `{}`, found `{found}`", RANKINGS_HEADER.join(","))]
    BadHeader { found: String },
    #[error("duplicate project id `{0}`")]
    DuplicateProject(String),
    #[error("line {line}: expert `{expert}` ranks factor `{factor}` twice in {key}")]
    DuplicateRank {
        line: u64,
        expert: String,
        factor: String,
        key: CategoryKey,
    },
}

/// A parsed document plus any unknown-field warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub unknown_fields: Vec<String>,
}

impl<T> Parsed<T> {
    /// Fails if unknown fields were seen and `strict` is set.
    pub fn enforce(self, strict: bool) -> Result<Self, FormatError> {
        if strict && !self.unknown_fields.is_empty() {
            Err(FormatError::UnknownFields(self.unknown_fields))
        } else {
            Ok(self)
        }
    }
}

fn unknown_keys(value: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(format!("{path}.{key}"));
            }
        }
    }
}

fn parse_value(text: &str) -> Result<Value, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(serde_json::from_str(text)?)
}

pub fn parse_model(text: &str) -> Result<Parsed<CausalModel>, FormatError> {
    let value = parse_value(text)?;
    let mut unknown = Vec::new();
    unknown_keys(&value, MODEL_FIELDS, "$", &mut unknown);
    if let Some(factors) = value.get("factors").and_then(Value::as_array) {
        for (i, factor) in factors.iter().enumerate() {
            let path = format!("$.factors[{i}]");
            unknown_keys(factor, FACTOR_FIELDS, &path, &mut unknown);
            if let Some(m) = factor.get("multiplier") {
                unknown_keys(
                    m,
                    MULTIPLIER_FIELDS,
                    &format!("{path}.multiplier"),
                    &mut unknown,
                );
            }
        }
    }
    let model = CausalModel::deserialize(value)?;
    Ok(Parsed {
        value: model,
        unknown_fields: unknown,
    })
}

pub fn parse_projects(text: &str) -> Result<Parsed<Vec<ProjectRecord>>, FormatError> {
    let value = parse_value(text)?;
    let mut unknown = Vec::new();
    if let Some(rows) = value.as_array() {
        for (i, row) in rows.iter().enumerate() {
            unknown_keys(row, PROJECT_FIELDS, &format!("$[{i}]"), &mut unknown);
        }
    }
    let records = Vec::<ProjectRecord>::deserialize(value)?;
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.project_id.as_str()) {
            return Err(FormatError::DuplicateProject(r.project_id.clone()));
        }
    }
    Ok(Parsed {
        value: records,
        unknown_fields: unknown,
    })
}

#[derive(Debug, Deserialize)]
struct RankingRow {
    expert_id: String,
    kind: FactorKind,
    category: FactorCategory,
    factor_id: String,
    rank: f64,
}

/// Parses a rankings CSV (one row per expert and factor) into sheets,
/// ordered by category and then expert id.
pub fn parse_rankings_csv(text: &str) -> Result<Vec<RankingSheet>, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| FormatError::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    if !headers.iter().eq(RANKINGS_HEADER.iter().copied()) {
        return Err(FormatError::BadHeader {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut sheets: BTreeMap<(CategoryKey, String), BTreeMap<String, f64>> = BTreeMap::new();
    for result in reader.deserialize::<RankingRow>() {
        let row = result.map_err(|e| FormatError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        let key = CategoryKey::new(row.kind, row.category);
        let ranks = sheets.entry((key, row.expert_id.clone())).or_default();
        if ranks.insert(row.factor_id.clone(), row.rank).is_some() {
            return Err(FormatError::DuplicateRank {
                line: reader.position().line(),
                expert: row.expert_id,
                factor: row.factor_id,
                key,
            });
        }
    }
    if sheets.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(sheets
        .into_iter()
        .map(|((key, expert_id), ranks)| RankingSheet {
            expert_id,
            key,
            ranks,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::model;
    use proptest::prelude::*;

    const CSV: &str = "expert_id,kind,category,factor_id,rank
e1,defect_content,project,a,1
e1,defect_content,project,b,2
e2,defect_content,project,a,2
e2,defect_content,project,b,1
";

    #[test]
    fn rankings_csv_groups_sheets() {
        let sheets = parse_rankings_csv(CSV).unwrap();
        assert_eq!(sheets.len(), 2);
        assert_eq!(sheets[0].expert_id, "e1");
        assert_eq!(sheets[1].ranks["b"], 1.0);
    }

    #[test]
    fn rankings_csv_errors() {
        assert!(matches!(parse_rankings_csv(""), Err(FormatError::Empty)));
        assert!(matches!(
            parse_rankings_csv("expert,kind\n"),
            Err(FormatError::BadHeader { .. })
        ));
        let bad = format!("{CSV}e3,defect_content,project,a,abc\n");
        match parse_rankings_csv(&bad) {
            Err(FormatError::Csv { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        let bad_kind = format!("{CSV}e3,quality,project,a,1\n");
        assert!(matches!(
            parse_rankings_csv(&bad_kind),
            Err(FormatError::Csv { line: 6, .. })
        ));
        let dup = format!("{CSV}e2,defect_content,project,a,1\n");
        assert!(matches!(
            parse_rankings_csv(&dup),
            Err(FormatError::DuplicateRank { .. })
        ));
        assert!(matches!(
            parse_rankings_csv("expert_id,kind,category,factor_id,rank\n"),
            Err(FormatError::Empty)
        ));
    }

    #[test]
    fn model_rejects_unknown_kind_and_reports_unknown_fields() {
        let text = r#"{"context":"c","factors":[{"id":"a","name":"A","kind":"cost","category":"product","scale":["0","1","2","3"]}]}"#;
        assert!(matches!(parse_model(text), Err(FormatError::Json(_))));

        let text = r#"{"context":"c","extra":1,"factors":[{"id":"a","name":"A","kind":"defect_content","category":"product","scale":["0","1","2","3"],"multiplier":{"min":0.1,"most_likely":0.2,"max":0.3,"mode":1},"weight":2}]}"#;
        let parsed = parse_model(text).unwrap();
        assert_eq!(
            parsed.unknown_fields,
            vec![
                "$.extra",
                "$.factors[0].weight",
                "$.factors[0].multiplier.mode"
            ]
        );
        assert!(parsed.clone().enforce(false).is_ok());
        assert!(matches!(
            parsed.enforce(true),
            Err(FormatError::UnknownFields(_))
        ));
    }

    #[test]
    fn scale_must_have_four_levels() {
        let text = r#"{"context":"c","factors":[{"id":"a","name":"A","kind":"effectiveness","category":"project","scale":["0","1","2"]}]}"#;
        assert!(parse_model(text).is_err());
    }

    #[test]
    fn projects_file() {
        let text = r#"[{"project_id":"A","size":10,"defects_found":4,"levels":{"x":1}},{"project_id":"N","size":5,"levels":{"x":0}}]"#;
        let parsed = parse_projects(text).unwrap();
        assert_eq!(parsed.value[0].defects_found, Some(4));
        assert_eq!(parsed.value[1].defects_found, None);
        let dup =
            r#"[{"project_id":"A","size":10,"levels":{}},{"project_id":"A","size":5,"levels":{}}]"#;
        assert!(matches!(
            parse_projects(dup),
            Err(FormatError::DuplicateProject(_))
        ));
        assert!(matches!(parse_projects("  "), Err(FormatError::Empty)));
    }

    proptest! {
        #[test]
        fn model_round_trips(dc in 1usize..7, eff in 1usize..7, q in any::<bool>(), m in (0.0f64..1.0, 0.0f64..1.0)) {
            let mut original = model(dc, eff);
            original.quantified = q;
            original.provenance = if q { String::new() } else { "draft".into() };
            original.factors[0].multiplier = Some(crate::model::Multiplier { min: m.0.min(m.1), most_likely: m.0.max(m.1), max: 1.0 });
            if !q {
                original.factors[dc - 1].multiplier = None;
            }
            let text = crate::output::to_stable_json(&original).unwrap();
            let parsed = parse_model(&text).unwrap();
            prop_assert!(parsed.unknown_fields.is_empty());
            prop_assert_eq!(parsed.value, original);
        }
    }
}
