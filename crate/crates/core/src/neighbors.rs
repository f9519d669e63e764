//! Tabular datasets and neighbouring-pair generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rng::DpRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Public lower bound (inclusive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    /// Public upper bound (inclusive for categorical columns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Column {
    pub fn categorical(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), kind: ColumnKind::Categorical, lo: Some(lo as f64), hi: Some(hi as f64) }
    }

    pub fn real(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), kind: ColumnKind::Real, lo: Some(lo), hi: Some(hi) }
    }

    pub fn unbounded(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Real, lo: None, hi: None }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeighborError {
    #[error("schema has no columns")]
    EmptySchema,
    #[error("row count must be at least 1")]
    NoRows,
    #[error("row {row} has {got} cells, schema has {want}")]
    RowWidth { row: usize, got: usize, want: usize },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("cannot {0} an empty dataset")]
    EmptyDataset(&'static str),
    #[error("strategy {strategy} is not defined under {model}")]
    Unsupported { strategy: Strategy, model: AdjacencyModel },
    #[error("every row is identical, so no replacement changes the dataset")]
    NoDistinctRow,
    #[error("unknown {what} {name:?}")]
    Parse { what: &'static str, name: String },
    #[error("format error: {0}")]
    Format(String),
}

/// Rows of `f64` cells; categorical values are stored as integral floats.
#[derive(Debug, Clone)]
pub struct TabularDataset {
    columns: Vec<Column>,
    rows: Vec<Vec<f64>>,
}

fn row_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl PartialEq for TabularDataset {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| row_eq(a, b))
    }
}

impl TabularDataset {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<f64>>) -> Result<Self, NeighborError> {
        if columns.is_empty() {
            return Err(NeighborError::EmptySchema);
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(NeighborError::RowWidth { row, got: r.len(), want: columns.len() });
        }
        Ok(Self { columns, rows })
    }

    /// Single-column dataset.
    pub fn from_column(column: Column, values: &[f64]) -> Self {
        Self { columns: vec![column], rows: values.iter().map(|v| vec![*v]).collect() }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, NeighborError> {
        self.columns.iter().position(|c| c.name == name).ok_or_else(|| NeighborError::UnknownColumn(name.into()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, NeighborError> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn with_row(&self, row: Vec<f64>) -> Result<Self, NeighborError> {
        let mut rows = self.rows.clone();
        rows.push(row);
        Self::new(self.columns.clone(), rows)
    }

    pub fn without_row(&self, i: usize) -> Self {
        let mut rows = self.rows.clone();
        rows.remove(i);
        Self { columns: self.columns.clone(), rows }
    }

    pub fn with_replaced(&self, i: usize, row: Vec<f64>) -> Result<Self, NeighborError> {
        let mut rows = self.rows.clone();
        rows[i] = row;
        Self::new(self.columns.clone(), rows)
    }

    /// Whether the pair differs by exactly one record under `model`.
    pub fn is_neighbor_of(&self, other: &Self, model: AdjacencyModel) -> bool {
        if self.columns != other.columns {
            return false;
        }
        match model {
            AdjacencyModel::AddRemove => {
                let (small, big) = if self.len() < other.len() { (self, other) } else { (other, self) };
                if big.len() != small.len() + 1 {
                    return false;
                }
                multiset_contains(&big.rows, &small.rows)
            }
            AdjacencyModel::ReplaceOne => {
                self.len() == other.len()
                    && self.rows.iter().zip(&other.rows).filter(|(a, b)| !row_eq(a, b)).count() == 1
            }
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ColumnarDoc {
            columns: self.columns.clone(),
            data: (0..self.columns.len())
                .map(|j| ColumnData(self.rows.iter().map(|r| r[j]).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("dataset is serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, NeighborError> {
        let doc: ColumnarDoc = serde_json::from_str(s).map_err(|e| NeighborError::Format(e.to_string()))?;
        if doc.data.len() != doc.columns.len() {
            return Err(NeighborError::Format("column count and data count differ".into()));
        }
        let n = doc.data.first().map_or(0, |c| c.0.len());
        if doc.data.iter().any(|c| c.0.len() != n) {
            return Err(NeighborError::Format("columns differ in length".into()));
        }
        let rows = (0..n).map(|i| doc.data.iter().map(|c| c.0[i]).collect()).collect();
        Self::new(doc.columns, rows)
    }

    /// Comma-separated text with a header row; floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|x| format!("{x:?}"))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    /// Parses text produced by [`to_csv`](Self::to_csv) under the given schema.
    pub fn from_csv(text: &str, columns: Vec<Column>) -> Result<Self, NeighborError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| NeighborError::Format(e.to_string()))?.iter().map(String::from).collect();
        if header.len() != columns.len() || header.iter().zip(&columns).any(|(h, c)| *h != c.name) {
            return Err(NeighborError::Format(format!("header {header:?} does not match schema")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| NeighborError::Format(e.to_string()))?;
            let row = rec
                .iter()
                .map(|cell| cell.parse::<f64>().map_err(|_| NeighborError::Format(format!("bad cell {cell:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(columns, rows)
    }
}

fn multiset_contains(big: &[Vec<f64>], small: &[Vec<f64>]) -> bool {
    let key = |r: &Vec<f64>| r.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    let mut a: Vec<Vec<u64>> = big.iter().map(key).collect();
    let mut b: Vec<Vec<u64>> = small.iter().map(key).collect();
    a.sort();
    b.sort();
    let mut j = 0;
    let mut skipped = 0;
    for row in &a {
        if j < b.len() && *row == b[j] {
            j += 1;
        } else {
            skipped += 1;
        }
    }
    j == b.len() && skipped == 1
}

#[derive(Serialize, Deserialize)]
struct ColumnData(#[serde(with = "crate::float_repr::vec")] Vec<f64>);

#[derive(Serialize, Deserialize)]
struct ColumnarDoc {
    columns: Vec<Column>,
    data: Vec<ColumnData>,
}

/// Seeded dataset with every cell uniform over its column's bounds.
/// Unbounded categorical columns default to `0..=9`, unbounded real columns to `[0, 1)`.
pub fn gen_synthetic(seed: u64, n: usize, schema: &[Column]) -> Result<TabularDataset, NeighborError> {
    if schema.is_empty() {
        return Err(NeighborError::EmptySchema);
    }
    if n == 0 {
        return Err(NeighborError::NoRows);
    }
    let mut rng = DpRng::seed_from_u64(seed);
    let rows = (0..n).map(|_| schema.iter().map(|c| uniform_cell(c, None, &mut rng)).collect()).collect();
    TabularDataset::new(schema.to_vec(), rows)
}

fn uniform_cell(c: &Column, observed: Option<(f64, f64)>, rng: &mut DpRng) -> f64 {
    let (lo, hi) = match (c.lo, c.hi, observed) {
        (Some(lo), Some(hi), _) => (lo, hi),
        (_, _, Some(range)) => range,
        _ if c.kind == ColumnKind::Categorical => (0.0, 9.0),
        _ => (0.0, 1.0),
    };
    match c.kind {
        ColumnKind::Categorical => {
            let span = (hi - lo).max(0.0) as u64 + 1;
            lo + (rng.next_u64() % span) as f64
        }
        ColumnKind::Real => lo + (hi - lo) * rng.uniform(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyModel {
    AddRemove,
    ReplaceOne,
}

impl fmt::Display for AdjacencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjacencyModel::AddRemove => "add_remove",
            AdjacencyModel::ReplaceOne => "replace_one",
        })
    }
}

impl FromStr for AdjacencyModel {
    type Err = NeighborError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "add_remove" => Ok(Self::AddRemove),
            "replace_one" => Ok(Self::ReplaceOne),
            _ => Err(NeighborError::Parse { what: "adjacency model", name: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RemoveRandom,
    AddUniform,
    AddMarginal,
    AddDuplicate,
    AddFloatLimit,
    AddOutOfDomain,
    AddNan,
    AddInf,
    ReplaceCombined,
}

impl Strategy {
    pub const ALL: [Strategy; 9] = [
        Strategy::RemoveRandom,
        Strategy::AddUniform,
        Strategy::AddMarginal,
        Strategy::AddDuplicate,
        Strategy::AddFloatLimit,
        Strategy::AddOutOfDomain,
        Strategy::AddNan,
        Strategy::AddInf,
        Strategy::ReplaceCombined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RemoveRandom => "remove_random",
            Strategy::AddUniform => "add_uniform",
            Strategy::AddMarginal => "add_marginal",
            Strategy::AddDuplicate => "add_duplicate",
            Strategy::AddFloatLimit => "add_float_limit",
            Strategy::AddOutOfDomain => "add_out_of_domain",
            Strategy::AddNan => "add_nan",
            Strategy::AddInf => "add_inf",
            Strategy::ReplaceCombined => "replace_combined",
        }
    }

    pub fn is_pathological(self) -> bool {
        matches!(self, Strategy::AddFloatLimit | Strategy::AddOutOfDomain | Strategy::AddNan | Strategy::AddInf)
    }

    fn code(self) -> u64 {
        Strategy::ALL.iter().position(|s| *s == self).expect("listed") as u64
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = NeighborError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == key)
            .ok_or_else(|| NeighborError::Parse { what: "strategy", name: s.into() })
    }
}

pub const DEFAULT_PAIR_COUNT: usize = 5;

fn observed_range(d: &TabularDataset, j: usize) -> Option<(f64, f64)> {
    let vals: Vec<f64> = d.rows.iter().map(|r| r[j]).filter(|x| x.is_finite()).collect();
    let lo = vals.iter().copied().reduce(f64::min)?;
    let hi = vals.iter().copied().reduce(f64::max)?;
    Some((lo, hi))
}

fn pick(rng: &mut DpRng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn base_row(d: &TabularDataset, rng: &mut DpRng) -> Vec<f64> {
    if d.is_empty() {
        d.columns.iter().map(|c| uniform_cell(c, None, rng)).collect()
    } else {
        d.rows[pick(rng, d.len())].clone()
    }
}

/// The record a strategy adds (or swaps in), for pair number `j`.
fn new_row(d: &TabularDataset, strategy: Strategy, j: usize, rng: &mut DpRng) -> Result<Vec<f64>, NeighborError> {
    let width = d.columns.len();
    let target = j % width;
    let row = match strategy {
        Strategy::AddUniform | Strategy::ReplaceCombined => d
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| uniform_cell(col, observed_range(d, c), rng))
            .collect(),
        Strategy::AddMarginal => {
            if d.is_empty() {
                return Err(NeighborError::EmptyDataset("sample marginals of"));
            }
            (0..width).map(|c| d.rows[pick(rng, d.len())][c]).collect()
        }
        Strategy::AddDuplicate => {
            if d.is_empty() {
                return Err(NeighborError::EmptyDataset("duplicate a row of"));
            }
            base_row(d, rng)
        }
        Strategy::AddFloatLimit => {
            let mut r = base_row(d, rng);
            r[target] = if j % 2 == 0 { f64::MAX } else { -f64::MAX };
            r
        }
        Strategy::AddOutOfDomain => {
            let mut r = base_row(d, rng);
            let (lo, hi) = observed_range(d, target)
                .or_else(|| d.columns[target].lo.zip(d.columns[target].hi))
                .unwrap_or((0.0, 1.0));
            r[target] = hi + 10.0 * (hi - lo).max(1.0);
            r
        }
        Strategy::AddNan => {
            let mut r = base_row(d, rng);
            r[target] = f64::NAN;
            r
        }
        Strategy::AddInf => {
            let mut r = base_row(d, rng);
            r[target] = if j % 2 == 0 { f64::INFINITY } else { f64::NEG_INFINITY };
            r
        }
        Strategy::RemoveRandom => unreachable!("removal adds no row"),
    };
    Ok(row)
}

/// `count` neighbouring pairs `(d, d')` built by `strategy` under `model`.
///
/// Under replace-one, additive strategies overwrite a uniformly chosen row
/// with the record they would have added.
pub fn gen_neighbors(
    d: &TabularDataset,
    model: AdjacencyModel,
    strategy: Strategy,
    seed: u64,
    count: usize,
) -> Result<Vec<(TabularDataset, TabularDataset)>, NeighborError> {
    (0..count)
        .map(|j| {
            let mut rng = DpRng::child(seed, strategy.code(), j as u64);
            let d_prime = match (model, strategy) {
                (AdjacencyModel::AddRemove, Strategy::RemoveRandom) => {
                    if d.is_empty() {
                        return Err(NeighborError::EmptyDataset("remove a row from"));
                    }
                    d.without_row(pick(&mut rng, d.len()))
                }
                (AdjacencyModel::ReplaceOne, Strategy::RemoveRandom) => {
                    return Err(NeighborError::Unsupported { strategy, model });
                }
                (AdjacencyModel::AddRemove, _) => d.with_row(new_row(d, strategy, j, &mut rng)?)?,
                (AdjacencyModel::ReplaceOne, _) => {
                    if d.is_empty() {
                        return Err(NeighborError::EmptyDataset("replace a row of"));
                    }
                    replace_distinct(d, strategy, j, &mut rng)?
                }
            };
            Ok((d.clone(), d_prime))
        })
        .collect()
}

fn replace_distinct(d: &TabularDataset, strategy: Strategy, j: usize, rng: &mut DpRng) -> Result<TabularDataset, NeighborError> {
    for _ in 0..256 {
        let i = pick(rng, d.len());
        let row = new_row(d, strategy, j, rng)?;
        if !row_eq(&row, &d.rows[i]) {
            return d.with_replaced(i, row);
        }
    }
    Err(NeighborError::NoDistinctRow)
}
