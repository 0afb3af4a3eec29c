//! Embedding files: a JSON object mapping keys to equal-length vectors.

use std::collections::BTreeMap;

use crate::{Error, Result};

pub fn parse_embeddings(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let table: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut dim = None;
    for (key, v) in &table {
        if v.is_empty() {
            return Err(Error::Parse(format!("embedding {key:?} is empty")));
        }
        if *dim.get_or_insert(v.len()) != v.len() {
            return Err(Error::Parse(format!("embedding {key:?} has length {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding file"));
        }
    }
    Ok(table)
}
