//! Comparisons CSV: header `query_id,ref_id,outcome`, outcome `1` when the
//! query ranks above the reference and `0` otherwise.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use super::{RankItem, Ranker};
use crate::error::{Error, Result};
use crate::model::{ComparisonOutcome, ComparisonSet, LabeledReference, ReferenceSet};

const HEADER: [&str; 3] = ["query_id", "ref_id", "outcome"];

/// Reads outcomes in file order, rejecting malformed outcome values and
/// repeated `(query, reference)` pairs.
pub fn read_outcomes<R: Read>(reader: R, source: &str) -> Result<Vec<ComparisonOutcome>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: source.to_string(),
            })
    };
    let (q, r, o) = (col(HEADER[0])?, col(HEADER[1])?, col(HEADER[2])?);
    let mut seen = HashSet::new();
    let mut outcomes = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let query_above = match &record[o] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    message: format!("outcome must be 0 or 1, got `{other}`"),
                })
            }
        };
        let outcome = ComparisonOutcome::new(&record[q], &record[r], query_above);
        if !seen.insert((outcome.query_id.clone(), outcome.ref_id.clone())) {
            return Err(Error::DuplicatePair {
                query: outcome.query_id,
                reference: outcome.ref_id,
            });
        }
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

pub fn write_outcomes<W: Write>(writer: W, outcomes: &[ComparisonOutcome]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER)?;
    for o in outcomes {
        wtr.write_record([
            o.query_id.as_str(),
            o.ref_id.as_str(),
            if o.query_above { "1" } else { "0" },
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Loads a comparisons file and groups it per query, resolving every
/// reference id against `references`.
pub fn load_comparisons(path: impl AsRef<Path>, references: &ReferenceSet) -> Result<BTreeMap<String, ComparisonSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let outcomes = read_outcomes(file, &path.display().to_string())?;
    group_outcomes(outcomes, references)
}

pub(crate) fn group_outcomes(
    outcomes: Vec<ComparisonOutcome>,
    references: &ReferenceSet,
) -> Result<BTreeMap<String, ComparisonSet>> {
    let mut grouped: BTreeMap<String, Vec<ComparisonOutcome>> = BTreeMap::new();
    for o in outcomes {
        grouped.entry(o.query_id.clone()).or_default().push(o);
    }
    grouped
        .into_iter()
        .map(|(q, outs)| Ok((q, ComparisonSet::from_outcomes(outs, references)?)))
        .collect()
}

/// Replays precomputed outcomes; abstains on pairs it has no record of.
#[derive(Debug, Clone, Default)]
pub struct FileRanker {
    outcomes: HashMap<(String, String), bool>,
}

impl FileRanker {
    pub fn new(outcomes: &[ComparisonOutcome]) -> Self {
        FileRanker {
            outcomes: outcomes
                .iter()
                .map(|o| ((o.query_id.clone(), o.ref_id.clone()), o.query_above))
                .collect(),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(&read_outcomes(file, &path.display().to_string())?))
    }
}

impl Ranker for FileRanker {
    fn compare(&self, query: &RankItem<'_>, reference: &LabeledReference, _pair_index: usize) -> Result<Option<bool>> {
        Ok(self
            .outcomes
            .get(&(query.id.to_string(), reference.id.clone()))
            .copied())
    }
}
