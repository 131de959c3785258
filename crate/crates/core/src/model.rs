//! Domain types shared by every stage of the refinement pipeline, plus the
//! dataset CSV format and the low-data re-split protocol.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::Substream;

/// A reference item with a known property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReference {
    pub id: String,
    pub label: f64,
}

impl LabeledReference {
    pub fn new(id: impl Into<String>, label: f64) -> Result<Self> {
        let id = id.into();
        if !label.is_finite() {
            return Err(Error::NonFinite(format!("label of reference `{id}`")));
        }
        Ok(LabeledReference { id, label })
    }
}

/// Ordered, non-empty collection of references with distinct ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    refs: Vec<LabeledReference>,
    by_id: HashMap<String, usize>,
}

impl ReferenceSet {
    pub fn new(refs: Vec<LabeledReference>) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::Empty("reference set"));
        }
        let mut by_id = HashMap::with_capacity(refs.len());
        for (i, r) in refs.iter().enumerate() {
            if !r.label.is_finite() {
                return Err(Error::NonFinite(format!("label of reference `{}`", r.id)));
            }
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(ReferenceSet { refs, by_id })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledReference> {
        self.refs.iter()
    }

    pub fn as_slice(&self) -> &[LabeledReference] {
        &self.refs
    }

    pub fn get(&self, id: &str) -> Option<&LabeledReference> {
        self.by_id.get(id).map(|&i| &self.refs[i])
    }

    pub fn label_of(&self, id: &str) -> Result<f64> {
        self.get(id)
            .map(|r| r.label)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Reads `id` and `y` columns from a CSV; other columns are ignored.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let id_col = column_index(&headers, "id", source)?;
        let y_col = column_index(&headers, "y", source)?;
        let mut refs = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let label = parse_finite(&record[y_col], source, line, "y")?;
            refs.push(LabeledReference {
                id: record[id_col].to_string(),
                label,
            });
        }
        ReferenceSet::new(refs)
    }
}

impl<'a> IntoIterator for &'a ReferenceSet {
    type Item = &'a LabeledReference;
    type IntoIter = std::slice::Iter<'a, LabeledReference>;

    fn into_iter(self) -> Self::IntoIter {
        self.refs.iter()
    }
}

/// Point prediction and its variance from a base regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorEstimate {
    pub value: f64,
    pub variance: f64,
}

impl RegressorEstimate {
    pub fn new(value: f64, variance: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("regressor prediction".into()));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!(
                "regressor variance must be positive and finite, got {variance}"
            )));
        }
        Ok(RegressorEstimate { value, variance })
    }
}

/// One ranker judgment between a query and a reference.
///
/// `query_above == true` means the ranker places the query's property above
/// the reference's, i.e. it claims `y_query > y_ref`. Rankers that report the
/// opposite convention (0 for "first item wins") must be mapped onto this one
/// at their boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub query_id: String,
    pub ref_id: String,
    pub query_above: bool,
}

impl ComparisonOutcome {
    pub fn new(query_id: impl Into<String>, ref_id: impl Into<String>, query_above: bool) -> Self {
        ComparisonOutcome {
            query_id: query_id.into(),
            ref_id: ref_id.into(),
            query_above,
        }
    }
}

/// A query's outcomes against a reference set, split into the labels of
/// references ranked below the query and those ranked above it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonSet {
    outcomes: Vec<ComparisonOutcome>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl ComparisonSet {
    /// Resolves outcome ids against `references`. All outcomes must belong to
    /// the same query and name each reference at most once.
    pub fn from_outcomes(outcomes: Vec<ComparisonOutcome>, references: &ReferenceSet) -> Result<Self> {
        let mut seen = HashSet::with_capacity(outcomes.len());
        let mut below = Vec::new();
        let mut above = Vec::new();
        if let Some(first) = outcomes.first() {
            if let Some(other) = outcomes.iter().find(|o| o.query_id != first.query_id) {
                return Err(Error::invalid(format!(
                    "comparison set mixes queries `{}` and `{}`",
                    first.query_id, other.query_id
                )));
            }
        }
        for o in &outcomes {
            if !seen.insert(o.ref_id.as_str()) {
                return Err(Error::DuplicatePair {
                    query: o.query_id.clone(),
                    reference: o.ref_id.clone(),
                });
            }
            let label = references.label_of(&o.ref_id)?;
            if o.query_above {
                below.push(label);
            } else {
                above.push(label);
            }
        }
        Ok(ComparisonSet { outcomes, below, above })
    }

    /// Builds a set directly from label lists. Synthetic outcome ids
    /// `below-<i>` and `above-<j>` are generated for the anonymous references.
    pub fn from_labels(below: Vec<f64>, above: Vec<f64>) -> Result<Self> {
        if let Some(bad) = below.iter().chain(&above).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("comparison label {bad}")));
        }
        let outcomes = below
            .iter()
            .enumerate()
            .map(|(i, _)| ComparisonOutcome::new("query", format!("below-{i}"), true))
            .chain(
                above
                    .iter()
                    .enumerate()
                    .map(|(j, _)| ComparisonOutcome::new("query", format!("above-{j}"), false)),
            )
            .collect();
        Ok(ComparisonSet { outcomes, below, above })
    }

    pub fn outcomes(&self) -> &[ComparisonOutcome] {
        &self.outcomes
    }

    /// Labels of references ranked below the query.
    pub fn below(&self) -> &[f64] {
        &self.below
    }

    /// Labels of references ranked above the query.
    pub fn above(&self) -> &[f64] {
        &self.above
    }

    pub fn len(&self) -> usize {
        self.below.len() + self.above.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_one_sided(&self) -> bool {
        self.below.is_empty() || self.above.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.below.iter().chain(&self.above).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub id: String,
    pub features: Vec<f64>,
    pub target: f64,
    /// Opaque text carried through untouched (for instance a SMILES string).
    pub text: Option<String>,
}

/// Rows of fixed-dimension numeric features with a real-valued target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    rows: Vec<DataRow>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, feature_names: Vec<String>, rows: Vec<DataRow>) -> Result<Self> {
        let dim = feature_names.len();
        let mut ids = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.features.len() != dim {
                return Err(Error::invalid(format!(
                    "row `{}` has {} features, expected {dim}",
                    row.id,
                    row.features.len()
                )));
            }
            if !row.target.is_finite() || row.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("row `{}`", row.id)));
            }
            if !ids.insert(row.id.as_str()) {
                return Err(Error::DuplicateId(row.id.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            feature_names,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn to_references(&self) -> Result<ReferenceSet> {
        ReferenceSet::new(
            self.rows
                .iter()
                .map(|r| LabeledReference {
                    id: r.id.clone(),
                    label: r.target,
                })
                .collect(),
        )
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Parses a dataset CSV. The header must contain a `y` column (target);
    /// `id` and `text` columns are optional; every other column is a feature.
    /// Rows without an `id` column are named by their zero-based row index.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Self::from_csv_reader(file, &path.display().to_string()).map(|d| d.with_name(name))
    }

    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = column_index(&headers, "y", source)?;
        let id_col = headers.iter().position(|h| h == "id");
        let text_col = headers.iter().position(|h| h == "text");
        let feature_cols: Vec<usize> = (0..headers.len())
            .filter(|&i| i != y_col && Some(i) != id_col && Some(i) != text_col)
            .collect();
        let feature_names = feature_cols.iter().map(|&i| headers[i].to_string()).collect();

        let mut rows = Vec::new();
        for (n, record) in rdr.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let target = parse_finite(&record[y_col], source, line, "y")?;
            let features = feature_cols
                .iter()
                .map(|&i| parse_finite(&record[i], source, line, &headers[i]))
                .collect::<Result<Vec<_>>>()?;
            rows.push(DataRow {
                id: id_col.map_or_else(|| n.to_string(), |i| record[i].to_string()),
                features,
                target,
                text: text_col.map(|i| record[i].to_string()),
            });
        }
        Dataset::new("dataset", feature_names, rows)
    }

    /// Writes the dataset in the same CSV layout it is read from.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let has_text = self.rows.iter().any(|r| r.text.is_some());
        let mut header = vec!["id".to_string()];
        if has_text {
            header.push("text".into());
        }
        header.extend(self.feature_names.iter().cloned());
        header.push("y".into());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.id.clone()];
            if has_text {
                rec.push(row.text.clone().unwrap_or_default());
            }
            rec.extend(row.features.iter().map(|v| v.to_string()));
            rec.push(row.target.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, source: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            path: source.to_string(),
        })
}

pub(crate) fn parse_finite(raw: &str, source: &str, line: u64, column: &str) -> Result<f64> {
    let value: f64 = raw.parse().map_err(|_| Error::Parse {
        path: source.to_string(),
        line,
        message: format!("column `{column}`: `{raw}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: source.to_string(),
            line,
            message: format!("column `{column}`: `{raw}` is not finite"),
        });
    }
    Ok(value)
}

/// Low-data re-split settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub seed: u64,
    pub seed_count: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_size: 50,
            seed: 0,
            seed_count: 5,
        }
    }
}

/// Draws `train_size` rows uniformly without replacement for training; every
/// other row becomes test data. Both halves keep the dataset's row order.
pub fn resplit(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if spec.train_size == 0 {
        return Err(Error::invalid("train_size must be at least 1"));
    }
    if n < spec.train_size + 1 {
        return Err(Error::Size(format!(
            "dataset has {n} rows, need at least train_size + 1 = {}",
            spec.train_size + 1
        )));
    }
    let mut rng = Substream::new(spec.seed, "resplit").rng();
    let mut train_idx = index::sample(&mut rng, n, spec.train_size).into_vec();
    train_idx.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}
