//! JSON wire formats for databases, queries and releases.
//!
//! Parse failures carry the byte offset of the offending position so a
//! truncated or malformed file can be located without a JSON tool.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AttributeTable, BitDatabase, DatabaseFamily, HistogramDatabase};
use crate::linalg::Matrix;
use crate::mechanisms::NoisyRelease;
use crate::queries::{CountingQuery, LipschitzQuery, MarginalQuery, Query};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("{kind} error at byte {offset} (line {line}, column {column}): {message}")]
    Parse { kind: ParseFailure, offset: usize, line: usize, column: usize, message: String },
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    Syntax,
    /// Input ended early, e.g. a truncated file.
    Truncated,
    /// Well-formed JSON of the wrong shape.
    Schema,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseFailure::Syntax => "syntax",
            ParseFailure::Truncated => "truncated input",
            ParseFailure::Schema => "schema",
        })
    }
}

/// Bytes consumed up to a 1-based (line, column) position, as reported by
/// the JSON parser (the column is that of the last byte read).
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| {
        let kind = match e.classify() {
            serde_json::error::Category::Eof => ParseFailure::Truncated,
            serde_json::error::Category::Data => ParseFailure::Schema,
            _ => ParseFailure::Syntax,
        };
        let (line, column) = (e.line(), e.column());
        FormatError::Parse { kind, offset: byte_offset(text, line, column), line, column, message: e.to_string() }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &std::path::Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_json(&text)
}

/// `{"kind": "histogram"|"bits"|"table", "data": [...], "meta": {...}}`.
/// A table's secret column is `meta.hidden_column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseDocument {
    #[serde(flatten)]
    pub payload: DatabasePayload,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatabasePayload {
    Histogram { data: Vec<u64> },
    Bits { data: Vec<u8> },
    Table { data: Vec<Vec<i8>> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Database {
    Histogram(HistogramDatabase),
    Bits(BitDatabase),
    Table(AttributeTable),
}

impl DatabaseDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        parse_json(text)
    }

    pub fn into_database(self) -> Result<Database, FormatError> {
        let invalid = |e: crate::data::ConstructionError| FormatError::Invalid(e.to_string());
        Ok(match self.payload {
            DatabasePayload::Histogram { data } => Database::Histogram(HistogramDatabase::new(data)),
            DatabasePayload::Bits { data } => Database::Bits(BitDatabase::new(data).map_err(invalid)?),
            DatabasePayload::Table { data } => {
                let d_prime = data.first().map_or(0, Vec::len);
                let hidden = match self.meta.get("hidden_column") {
                    None | Some(serde_json::Value::Null) => None,
                    Some(v) => Some(v.as_u64().ok_or_else(|| FormatError::Invalid("meta.hidden_column must be a nonnegative integer".into()))? as usize),
                };
                Database::Table(AttributeTable::new(data, d_prime, hidden).map_err(invalid)?)
            }
        })
    }

    pub fn from_histogram(x: &HistogramDatabase) -> Self {
        Self { payload: DatabasePayload::Histogram { data: x.counts.clone() }, meta: Default::default() }
    }

    pub fn from_table(t: &AttributeTable) -> Self {
        let mut meta = serde_json::Map::new();
        if let Some(h) = t.hidden_column() {
            meta.insert("hidden_column".into(), h.into());
        }
        Self { payload: DatabasePayload::Table { data: t.rows().map(<[i8]>::to_vec).collect() }, meta }
    }
}

/// `{"kind": "counting"|"lipschitz"|"marginal", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QueryDocument {
    Counting { matrix: Matrix },
    Lipschitz { anchors: Vec<Vec<u64>>, size_bound: f64, radius: f64, signs: Vec<Vec<i8>> },
    Marginal { d_prime: usize, ell: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltQuery {
    Counting(CountingQuery),
    Lipschitz(LipschitzQuery),
    Marginal(MarginalQuery),
}

impl BuiltQuery {
    pub fn as_query(&self) -> &dyn Query {
        match self {
            BuiltQuery::Counting(q) => q,
            BuiltQuery::Lipschitz(q) => q,
            BuiltQuery::Marginal(q) => q,
        }
    }
}

impl QueryDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        parse_json(text)
    }

    pub fn build(self) -> Result<BuiltQuery, FormatError> {
        let invalid = |e: String| FormatError::Invalid(e);
        Ok(match self {
            QueryDocument::Counting { matrix } => BuiltQuery::Counting(CountingQuery::new(matrix).map_err(|e| invalid(e.to_string()))?),
            QueryDocument::Lipschitz { anchors, size_bound, radius, signs } => {
                let members = anchors.into_iter().map(HistogramDatabase::new).collect();
                let family = DatabaseFamily::from_members(members, size_bound).map_err(|e| invalid(e.to_string()))?;
                BuiltQuery::Lipschitz(LipschitzQuery::new(family, radius, signs).map_err(|e| invalid(e.to_string()))?)
            }
            QueryDocument::Marginal { d_prime, ell } => BuiltQuery::Marginal(MarginalQuery::new(d_prime, ell).map_err(|e| invalid(e.to_string()))?),
        })
    }

    pub fn from_counting(q: &CountingQuery) -> Self {
        QueryDocument::Counting { matrix: q.matrix().clone() }
    }
}

pub fn parse_release(text: &str) -> Result<NoisyRelease, FormatError> {
    let rel: NoisyRelease = parse_json(text)?;
    if let Some(i) = rel.answers.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::Invalid(format!("answer {i} is not finite")));
    }
    Ok(rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::noiseless;
    use crate::queries::random_sign_query;

    #[test]
    fn database_round_trips() {
        let h = DatabaseDocument::from_histogram(&HistogramDatabase::new(vec![1, 0, 4]));
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(text, r#"{"kind":"histogram","data":[1,0,4],"meta":{}}"#);
        assert_eq!(DatabaseDocument::parse(&text).unwrap(), h);
        let t = crate::data::random_attribute_table(3, 2, 1).with_hidden_column(1).unwrap();
        let doc = DatabaseDocument::from_table(&t);
        let back = DatabaseDocument::parse(&serde_json::to_string(&doc).unwrap()).unwrap().into_database().unwrap();
        assert_eq!(back, Database::Table(t));
    }

    #[test]
    fn bits_validated() {
        let doc = DatabaseDocument::parse(r#"{"kind":"bits","data":[0,2]}"#).unwrap();
        assert!(matches!(doc.into_database(), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn query_documents_build() {
        let q = random_sign_query(3, 2, 0);
        let doc = QueryDocument::from_counting(&q);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with(r#"{"kind":"counting","matrix":"#));
        let built = QueryDocument::parse(&text).unwrap().build().unwrap();
        assert_eq!(built, BuiltQuery::Counting(q));
        let m = QueryDocument::parse(r#"{"kind":"marginal","d_prime":4,"ell":2}"#).unwrap().build().unwrap();
        assert_eq!(m.as_query().arity(), 24);
        let bad = QueryDocument::parse(r#"{"kind":"counting","matrix":{"rows":1,"cols":1,"entries":[3.0]}}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn truncated_file_reports_offset() {
        let text = serde_json::to_string(&noiseless(&[1.0, 2.0])).unwrap();
        let cut = &text[..text.len() - 5];
        match parse_release(cut) {
            Err(FormatError::Parse { kind: ParseFailure::Truncated, offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_error_offset_points_into_document() {
        let text = "{\n  \"answers\": [1.0],\n  \"mechanism\": \"bogus\",\n  \"seed\": 0\n}";
        match parse_release(text) {
            Err(FormatError::Parse { kind: ParseFailure::Schema, offset, line, .. }) => {
                assert_eq!(line, 3);
                assert!(text[..offset].ends_with("\"bogus\""));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn byte_offsets() {
        assert_eq!(byte_offset("ab\ncd", 2, 2), 5);
        assert_eq!(byte_offset("ab", 1, 1), 1);
    }
}
