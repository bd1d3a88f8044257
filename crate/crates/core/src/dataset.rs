//! Coding-problem records, stored one JSON document per line.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub difficulty: String,
    pub statement: String,
    pub initial_code: String,
    pub ideal_solution: String,
    pub test_code: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: duplicate problem_id `{problem_id}`")]
    Duplicate { line: usize, problem_id: String },
}

/// Problems indexed by id, in file order.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<ProblemRecord>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn parse_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut dataset = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ProblemRecord = serde_json::from_str(line).map_err(|e| DatasetError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            dataset.insert(record).map_err(|problem_id| DatasetError::Duplicate { line: i + 1, problem_id })?;
        }
        Ok(dataset)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_jsonl(&text)
    }

    /// Adds a record; a clashing id is returned as the error.
    pub fn insert(&mut self, record: ProblemRecord) -> Result<(), String> {
        if self.by_id.contains_key(&record.problem_id) {
            return Err(record.problem_id);
        }
        self.by_id.insert(record.problem_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, problem_id: &str) -> Option<&ProblemRecord> {
        self.by_id.get(problem_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[ProblemRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        serde_json::json!({
            "problem_id": id, "difficulty": "easy", "statement": "s",
            "initial_code": "", "ideal_solution": "def f():\n    return 1\n",
            "test_code": "def test_f():\n    assert f() == 1\n",
        })
        .to_string()
    }

    #[test]
    fn parses_and_indexes() {
        let text = format!("{}\n\n{}\n", line("p1"), line("p2"));
        let d = Dataset::parse_jsonl(&text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.get("p2").unwrap().difficulty, "easy");
        assert!(d.get("p3").is_none());
    }

    #[test]
    fn rejects_duplicates_and_unknown_fields() {
        let dup = format!("{}\n{}\n", line("p1"), line("p1"));
        assert!(matches!(Dataset::parse_jsonl(&dup), Err(DatasetError::Duplicate { line: 2, .. })));
        let extra = line("p1").replacen('{', "{\"bogus\":1,", 1);
        assert!(matches!(Dataset::parse_jsonl(&extra), Err(DatasetError::Record { line: 1, .. })));
    }
}
