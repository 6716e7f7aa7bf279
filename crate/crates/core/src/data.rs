//! Schemas, dense tables, weighted views and benchmark loaders.
//!
//! Discrete benchmarks use the plain `<dir>/<name>.{train,valid,test}.data`
//! layout: comma-separated nonnegative integers, one row per line, no header.
//! Mixed datasets are a CSV with a header plus a small sidecar file that fixes
//! the kind of every column (see [`MixedSpec`]).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::weighted_mean_std;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: ragged row with {found} columns, expected {expected}")]
    RaggedRow {
        file: String,
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("{file}:{line}: invalid token {token:?}")]
    BadToken { file: String, line: usize, token: String },
    #[error("{0} is empty")]
    Empty(String),
    #[error("column {column:?}: level {level:?} does not occur in the training split")]
    UnseenLevel { column: String, level: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("variable {var}: value {value} is not valid for {kind}")]
    InvalidValue { var: usize, value: f64, kind: String },
    #[error("invalid weighted dataset: {0}")]
    InvalidDataset(String),
}

/// Kind of a single variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Categorical { arity: usize },
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub kind: VarKind,
    pub name: Option<String>,
}

impl Variable {
    pub fn categorical(arity: usize) -> Self {
        Variable { kind: VarKind::Categorical { arity }, name: None }
    }

    pub fn continuous() -> Self {
        Variable { kind: VarKind::Continuous, name: None }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn arity(&self) -> Option<usize> {
        match self.kind {
            VarKind::Categorical { arity } => Some(arity),
            VarKind::Continuous => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, VarKind::Continuous)
    }
}

/// Ordered list of variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    vars: Vec<Variable>,
}

impl Schema {
    pub fn new(vars: Vec<Variable>) -> Result<Self, DataError> {
        for (i, v) in vars.iter().enumerate() {
            if let VarKind::Categorical { arity } = v.kind {
                if arity < 2 {
                    return Err(DataError::Schema(format!("variable {i} has arity {arity} < 2")));
                }
            }
        }
        Ok(Schema { vars })
    }

    pub fn binary(n: usize) -> Self {
        Schema { vars: vec![Variable::categorical(2); n] }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, i: usize) -> &Variable {
        &self.vars[i]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn all_categorical(&self) -> bool {
        self.vars.iter().all(|v| !v.is_continuous())
    }

    /// Checks that `value` is admissible for variable `var`.
    pub fn check_value(&self, var: usize, value: f64) -> Result<(), DataError> {
        let v = &self.vars[var];
        match v.kind {
            VarKind::Categorical { arity } => {
                if value.fract() != 0.0 || value < 0.0 || value >= arity as f64 {
                    return Err(DataError::InvalidValue { var, value, kind: format!("categorical arity {arity}") });
                }
            }
            VarKind::Continuous => {
                if !value.is_finite() {
                    return Err(DataError::InvalidValue { var, value, kind: "continuous".into() });
                }
            }
        }
        Ok(())
    }
}

/// Dense row-major data matrix. Categorical values are stored as integral
/// `f64`s below the variable's arity.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    n_rows: usize,
    values: Vec<f64>,
}

impl Table {
    pub fn new(schema: Schema, values: Vec<f64>) -> Result<Self, DataError> {
        let d = schema.len();
        if d == 0 {
            return Err(DataError::Schema("table needs at least one column".into()));
        }
        if values.len() % d != 0 {
            return Err(DataError::Schema(format!("{} values do not fill rows of width {d}", values.len())));
        }
        for (i, &v) in values.iter().enumerate() {
            schema.check_value(i % d, v)?;
        }
        Ok(Table { n_rows: values.len() / d, schema, values })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let d = schema.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(DataError::RaggedRow { file: "<rows>".into(), line: i + 1, found: r.len(), expected: d });
            }
            values.extend_from_slice(r);
        }
        Table::new(schema, values)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_cols())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A table view restricted to a subset of rows, each carrying a positive
/// weight, and to an active scope of variables.
#[derive(Debug, Clone)]
pub struct WeightedDataset {
    table: Arc<Table>,
    rows: Vec<usize>,
    weights: Vec<f64>,
    scope: Vec<usize>,
}

impl WeightedDataset {
    pub fn new(table: Arc<Table>, rows: Vec<usize>, weights: Vec<f64>, mut scope: Vec<usize>) -> Result<Self, DataError> {
        if rows.len() != weights.len() {
            return Err(DataError::InvalidDataset(format!("{} rows but {} weights", rows.len(), weights.len())));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= table.n_rows()) {
            return Err(DataError::InvalidDataset(format!("row {r} out of range")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(DataError::InvalidDataset(format!("row weight {w} is not positive")));
        }
        scope.sort_unstable();
        scope.dedup();
        if scope.is_empty() {
            return Err(DataError::InvalidDataset("empty scope".into()));
        }
        if let Some(&v) = scope.iter().find(|&&v| v >= table.n_cols()) {
            return Err(DataError::InvalidDataset(format!("scope variable {v} out of range")));
        }
        Ok(WeightedDataset { table, rows, weights, scope })
    }

    /// Every row of `table` with unit weight over the full schema.
    pub fn unit(table: Arc<Table>) -> Self {
        let n = table.n_rows();
        let d = table.n_cols();
        WeightedDataset { table, rows: (0..n).collect(), weights: vec![1.0; n], scope: (0..d).collect() }
    }

    pub fn with_weights(table: Arc<Table>, weights: Vec<f64>) -> Result<Self, DataError> {
        let n = table.n_rows();
        let d = table.n_cols();
        WeightedDataset::new(table, (0..n).collect(), weights, (0..d).collect())
    }

    /// Same rows and weights over a different scope.
    pub fn restrict_scope(&self, scope: Vec<usize>) -> Self {
        WeightedDataset { table: self.table.clone(), rows: self.rows.clone(), weights: self.weights.clone(), scope }
    }

    /// Same scope, a new row subset (indices into the table) with weights.
    pub fn with_rows(&self, rows: Vec<usize>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(rows.len(), weights.len());
        WeightedDataset { table: self.table.clone(), rows, weights, scope: self.scope.clone() }
    }

    pub fn table(&self) -> &Arc<Table> {
        &self.table
    }

    pub fn schema(&self) -> &Schema {
        self.table.schema()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Effective sample size `Σ w`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Value of variable `var` at the `i`-th row of this view.
    #[inline]
    pub fn value(&self, i: usize, var: usize) -> f64 {
        self.table.get(self.rows[i], var)
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        self.rows.iter().map(|&r| self.table.get(r, var)).collect()
    }
}

/// Train / validation / test splits sharing one schema.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub schema: Schema,
    pub train: Arc<Table>,
    pub valid: Arc<Table>,
    pub test: Arc<Table>,
}

impl DatasetBundle {
    pub fn train_dataset(&self) -> WeightedDataset {
        WeightedDataset::unit(self.train.clone())
    }
}

// ---------------------------------------------------------------------------
// Discrete benchmark files
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Parses comma-separated integer rows. Blank lines are skipped.
pub fn parse_discrete(text: &str, file: &str) -> Result<Vec<Vec<u32>>, DataError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v: u32 = tok.parse().map_err(|_| DataError::BadToken {
                file: file.to_string(),
                line: lineno + 1,
                token: tok.to_string(),
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(DataError::RaggedRow { file: file.to_string(), line: lineno + 1, found: row.len(), expected: w })
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

fn split_path(dir: &Path, name: &str, split: &str) -> PathBuf {
    let flat = dir.join(format!("{name}.{split}.data"));
    if flat.exists() {
        return flat;
    }
    let nested = dir.join(name).join(format!("{name}.{split}.data"));
    if nested.exists() {
        nested
    } else {
        flat
    }
}

/// Returns true when all three split files of `name` are present in `dir`.
pub fn discrete_available(name: &str, dir: &Path) -> bool {
    ["train", "valid", "test"].iter().all(|s| split_path(dir, name, s).exists())
}

/// Loads `<dir>/<name>.{train,valid,test}.data` (a `<dir>/<name>/` subfolder is
/// also accepted). Arity of each column is one plus the largest value seen in
/// any split, and at least 2.
pub fn load_discrete(name: &str, dir: &Path) -> Result<DatasetBundle, DataError> {
    let mut parsed = Vec::new();
    for split in ["train", "valid", "test"] {
        let path = split_path(dir, name, split);
        let text = read_file(&path)?;
        let rows = parse_discrete(&text, &path.display().to_string())?;
        parsed.push((path, rows));
    }
    let width = parsed
        .iter()
        .find_map(|(_, r)| r.first().map(|x| x.len()))
        .ok_or_else(|| DataError::Empty(format!("dataset {name}")))?;
    for (path, rows) in &parsed {
        if let Some(r) = rows.first() {
            if r.len() != width {
                return Err(DataError::RaggedRow { file: path.display().to_string(), line: 1, found: r.len(), expected: width });
            }
        }
    }
    if parsed[0].1.is_empty() {
        return Err(DataError::Empty(parsed[0].0.display().to_string()));
    }
    let mut max = vec![0u32; width];
    for (_, rows) in &parsed {
        for r in rows {
            for (m, &v) in max.iter_mut().zip(r) {
                *m = (*m).max(v);
            }
        }
    }
    let schema = Schema::new(max.iter().map(|&m| Variable::categorical((m as usize + 1).max(2))).collect())?;
    let to_table = |rows: &[Vec<u32>]| -> Result<Arc<Table>, DataError> {
        let values = rows.iter().flat_map(|r| r.iter().map(|&v| v as f64)).collect();
        Ok(Arc::new(Table::new_unchecked_width(schema.clone(), values, rows.len())))
    };
    Ok(DatasetBundle {
        name: name.to_string(),
        schema: schema.clone(),
        train: to_table(&parsed[0].1)?,
        valid: to_table(&parsed[1].1)?,
        test: to_table(&parsed[2].1)?,
    })
}

impl Table {
    /// Builds a table whose values are already known to satisfy `schema`.
    /// Allows zero rows, which [`Table::new`] also accepts.
    fn new_unchecked_width(schema: Schema, values: Vec<f64>, n_rows: usize) -> Self {
        debug_assert_eq!(values.len(), n_rows * schema.len());
        Table { schema, n_rows, values }
    }
}

/// Expected statistics of one canonical discrete benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub label: String,
    pub vars: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub density: f64,
}

const MANIFEST: &str = include_str!("../manifest/discrete_datasets.tsv");

/// The shipped manifest of the twenty discrete benchmarks.
pub fn discrete_manifest() -> Vec<ManifestEntry> {
    MANIFEST
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            ManifestEntry {
                name: f[0].to_string(),
                label: f[1].to_string(),
                vars: f[2].parse().expect("manifest vars"),
                train: f[3].parse().expect("manifest train"),
                valid: f[4].parse().expect("manifest valid"),
                test: f[5].parse().expect("manifest test"),
                density: f[6].parse().expect("manifest density"),
            }
        })
        .collect()
}

pub fn manifest_entry(name: &str) -> Option<ManifestEntry> {
    let lower = name.to_ascii_lowercase();
    discrete_manifest().into_iter().find(|e| e.name == lower || e.label.to_ascii_lowercase() == lower)
}

// ---------------------------------------------------------------------------
// Mixed CSV datasets
// ---------------------------------------------------------------------------

/// Sidecar description of a mixed dataset.
///
/// Plain `key = value` lines, `#` comments:
///
/// ```text
/// name = cmc
/// seed = 0
/// split = 0.7 0.1 0.2        # fractions, used when no explicit split files
/// train = cmc.train.csv      # optional explicit split files, relative to the sidecar
/// valid = cmc.valid.csv
/// test = cmc.test.csv
/// delimiter = ,
/// column wife_age = cont
/// column wife_education = cat
/// ```
///
/// Every CSV header column needs a `column` line unless `default_kind` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpec {
    pub name: String,
    pub seed: u64,
    pub fractions: [f64; 3],
    pub split_files: Option<[PathBuf; 3]>,
    pub delimiter: u8,
    pub columns: Vec<(String, ColumnKind)>,
    pub default_kind: Option<ColumnKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

impl MixedSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, DataError> {
        let mut spec = MixedSpec {
            name: String::new(),
            seed: 0,
            fractions: [0.7, 0.1, 0.2],
            split_files: None,
            delimiter: b',',
            columns: Vec::new(),
            default_kind: None,
        };
        let mut files: [Option<PathBuf>; 3] = [None, None, None];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || DataError::Schema(format!("sidecar line {}: cannot parse {raw:?}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let key = key.trim();
            let value = value.trim();
            let kind = |v: &str| match v {
                "cat" | "categorical" => Ok(ColumnKind::Categorical),
                "cont" | "continuous" | "numeric" => Ok(ColumnKind::Continuous),
                _ => Err(bad()),
            };
            if let Some(col) = key.strip_prefix("column ") {
                spec.columns.push((col.trim().to_string(), kind(value)?));
                continue;
            }
            match key {
                "name" => spec.name = value.to_string(),
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "split" => {
                    let f: Vec<f64> = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad())?;
                    if f.len() != 3 || f.iter().any(|x| *x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(bad());
                    }
                    spec.fractions = [f[0], f[1], f[2]];
                }
                "train" => files[0] = Some(base_dir.join(value)),
                "valid" => files[1] = Some(base_dir.join(value)),
                "test" => files[2] = Some(base_dir.join(value)),
                "delimiter" => {
                    let v = if value == "\\t" || value == "tab" { "\t" } else { value };
                    if v.len() != 1 {
                        return Err(bad());
                    }
                    spec.delimiter = v.as_bytes()[0];
                }
                "default_kind" => spec.default_kind = Some(kind(value)?),
                _ => return Err(bad()),
            }
        }
        match files {
            [Some(a), Some(b), Some(c)] => spec.split_files = Some([a, b, c]),
            [None, None, None] => {}
            _ => return Err(DataError::Schema("train, valid and test files must be given together".into())),
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = read_file(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut spec = MixedSpec::parse(&text, base)?;
        if spec.name.is_empty() {
            spec.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(spec)
    }

    fn kind_of(&self, column: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|(c, _)| c == column).map(|(_, k)| *k).or(self.default_kind)
    }
}

fn read_csv(path: &Path, delimiter: u8) -> Result<(Vec<String>, Vec<Vec<String>>), DataError> {
    let text = read_file(path)?;
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Schema(format!("{file}: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::Empty(file));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => DataError::RaggedRow {
                file: file.clone(),
                line: i + 2,
                found: *len as usize,
                expected: *expected_len as usize,
            },
            _ => DataError::Schema(format!("{file}: {e}")),
        })?;
        rows.push(rec.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

/// Loads a mixed-type CSV described by `spec`. Categorical levels are
/// dictionary-encoded in order of first appearance in the training split;
/// a level that only occurs in the validation or test split is mapped to a
/// reserved extra level when `alpha > 0` and rejected otherwise.
pub fn load_mixed_csv(path: &Path, spec: &MixedSpec, alpha: f64) -> Result<DatasetBundle, DataError> {
    let (header, splits) = match &spec.split_files {
        Some(files) => {
            let (h, train) = read_csv(&files[0], spec.delimiter)?;
            let (h1, valid) = read_csv(&files[1], spec.delimiter)?;
            let (h2, test) = read_csv(&files[2], spec.delimiter)?;
            if h1 != h || h2 != h {
                return Err(DataError::Schema("split files have different headers".into()));
            }
            (h, [train, valid, test])
        }
        None => {
            let (h, mut rows) = read_csv(path, spec.delimiter)?;
            if rows.is_empty() {
                return Err(DataError::Empty(path.display().to_string()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rows.shuffle(&mut rng);
            let n = rows.len();
            let n_train = ((spec.fractions[0] * n as f64).round() as usize).clamp(1, n);
            let n_valid = ((spec.fractions[1] * n as f64).round() as usize).min(n - n_train);
            let test = rows.split_off(n_train + n_valid);
            let valid = rows.split_off(n_train);
            (h, [rows, valid, test])
        }
    };
    if splits[0].is_empty() {
        return Err(DataError::Empty(format!("training split of {}", spec.name)));
    }
    let kinds: Vec<ColumnKind> = header
        .iter()
        .map(|c| spec.kind_of(c).ok_or_else(|| DataError::Schema(format!("no kind given for column {c:?}"))))
        .collect::<Result<_, _>>()?;

    let d = header.len();
    let mut dictionaries: Vec<HashMap<String, usize>> = vec![HashMap::new(); d];
    let mut encoded: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut reserved = vec![false; d];
    for (s, rows) in splits.iter().enumerate() {
        for (li, row) in rows.iter().enumerate() {
            for (c, token) in row.iter().enumerate() {
                let v = match kinds[c] {
                    ColumnKind::Continuous => token.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                        DataError::BadToken { file: spec.name.clone(), line: li + 2, token: token.clone() }
                    })?,
                    ColumnKind::Categorical => {
                        let next = dictionaries[c].len();
                        if s == 0 {
                            *dictionaries[c].entry(token.clone()).or_insert(next) as f64
                        } else if let Some(&code) = dictionaries[c].get(token) {
                            code as f64
                        } else if alpha > 0.0 {
                            reserved[c] = true;
                            f64::NAN
                        } else {
                            return Err(DataError::UnseenLevel { column: header[c].clone(), level: token.clone() });
                        }
                    }
                };
                encoded[s].push(v);
            }
        }
    }
    let vars: Vec<Variable> = (0..d)
        .map(|c| {
            let var = match kinds[c] {
                ColumnKind::Continuous => Variable::continuous(),
                ColumnKind::Categorical => {
                    let levels = dictionaries[c].len() + usize::from(reserved[c]);
                    Variable::categorical(levels.max(2))
                }
            };
            var.named(header[c].clone())
        })
        .collect();
    // unseen levels take the reserved code, one past the training levels
    for split in encoded.iter_mut().skip(1) {
        for (i, v) in split.iter_mut().enumerate() {
            if v.is_nan() {
                *v = dictionaries[i % d].len() as f64;
            }
        }
    }
    let schema = Schema::new(vars)?;
    let [train, valid, test] = encoded;
    let mk = |values: Vec<f64>| Table::new(schema.clone(), values).map(Arc::new);
    Ok(DatasetBundle { name: spec.name.clone(), schema: schema.clone(), train: mk(train)?, valid: mk(valid)?, test: mk(test)? })
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-column affine transform taking continuous columns to weighted zero
/// mean and unit (population) standard deviation. Categorical columns and
/// zero-variance columns keep mean 0 and std 1, i.e. pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &WeightedDataset) -> Self {
        let d = data.schema().len();
        let mut means = vec![0.0; d];
        let mut stds = vec![1.0; d];
        for var in 0..d {
            if !data.schema().var(var).is_continuous() {
                continue;
            }
            let (m, s) = weighted_mean_std(&data.column(var), data.weights());
            if s > 0.0 {
                means[var] = m;
                stds[var] = s;
            }
        }
        Standardizer { means, stds }
    }

    pub fn transform_value(&self, var: usize, x: f64) -> f64 {
        (x - self.means[var]) / self.stds[var]
    }

    pub fn inverse_value(&self, var: usize, z: f64) -> f64 {
        z * self.stds[var] + self.means[var]
    }

    pub fn transform(&self, table: &Table) -> Table {
        let d = table.n_cols();
        let values = table.values().iter().enumerate().map(|(i, &x)| self.transform_value(i % d, x)).collect();
        Table { schema: table.schema().clone(), n_rows: table.n_rows(), values }
    }

    pub fn inverse(&self, table: &Table) -> Table {
        let d = table.n_cols();
        let values = table.values().iter().enumerate().map(|(i, &z)| self.inverse_value(i % d, z)).collect();
        Table { schema: table.schema().clone(), n_rows: table.n_rows(), values }
    }
}

/// Standardizes the continuous columns of `data`'s table using its row weights.
pub fn standardize(data: &WeightedDataset) -> (Table, Standardizer) {
    let st = Standardizer::fit(data);
    (st.transform(data.table()), st)
}
