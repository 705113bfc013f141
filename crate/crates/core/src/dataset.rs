//! Schema-typed tabular datasets with a binary class attribute.
//!
//! A dataset is loaded from a plain CSV file plus a sidecar TOML schema:
//!
//! ```toml
//! class = "infection"
//! class_labels = ["NO", "YES"]
//! positive = "YES"
//!
//! [[attributes]]
//! name = "apache"
//! kind = "numeric"
//!
//! [[attributes]]
//! name = "gender"
//! kind = "nominal"
//! categories = ["M", "F"]
//! ```
//!
//! `positive` names the minority class. Attribute values are stored as `f64`;
//! nominal values hold the category index.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric)
    }

    /// Category count for nominal attributes, `None` for numeric ones.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            AttributeKind::Numeric => None,
            AttributeKind::Nominal { categories } => Some(categories.len()),
        }
    }

    pub fn categories(&self) -> &[String] {
        match &self.kind {
            AttributeKind::Numeric => &[],
            AttributeKind::Nominal { categories } => categories,
        }
    }

    /// Renders a stored value the way it appears in CSV and rules.
    pub fn format_value(&self, v: f64) -> String {
        match &self.kind {
            AttributeKind::Numeric => format!("{v}"),
            AttributeKind::Nominal { categories } => categories
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{v}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Negative,
    Positive,
}

impl ClassLabel {
    pub fn is_positive(self) -> bool {
        self == ClassLabel::Positive
    }

    /// 0 for negative, 1 for positive.
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Negative => 0,
            ClassLabel::Positive => 1,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Negative => "negative",
            ClassLabel::Positive => "positive",
        })
    }
}

/// Where an instance came from: a row of the loaded data, or a synthetic
/// instance interpolated from one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Row(usize),
    Synthetic { base: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<f64>,
    pub label: ClassLabel,
    pub origin: Origin,
}

impl Instance {
    pub fn new(values: Vec<f64>, label: ClassLabel) -> Self {
        Self {
            values,
            label,
            origin: Origin::Row(0),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.origin, Origin::Synthetic { .. })
    }

    /// Row index of the original instance (the base row for synthetics).
    pub fn row(&self) -> usize {
        match self.origin {
            Origin::Row(r) => r,
            Origin::Synthetic { base } => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeSpec>,
    /// Name of the class column.
    pub class: String,
    /// The two class labels as they appear in the data.
    pub class_labels: [String; 2],
    /// Which of `class_labels` is the minority (positive) class.
    pub positive: String,
}

#[derive(Deserialize)]
struct SchemaFile {
    class: String,
    class_labels: Vec<String>,
    positive: String,
    #[serde(default)]
    attributes: Vec<AttributeSpec>,
}

impl Schema {
    pub fn new(
        attributes: Vec<AttributeSpec>,
        class: impl Into<String>,
        negative: impl Into<String>,
        positive: impl Into<String>,
    ) -> Result<Self> {
        let positive = positive.into();
        let schema = Self {
            attributes,
            class: class.into(),
            class_labels: [negative.into(), positive.clone()],
            positive,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: SchemaFile = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if raw.class_labels.len() != 2 {
            return Err(Error::Schema(format!(
                "class '{}' must have exactly 2 labels, found {}",
                raw.class,
                raw.class_labels.len()
            )));
        }
        let schema = Self {
            attributes: raw.attributes,
            class: raw.class,
            class_labels: [raw.class_labels[0].clone(), raw.class_labels[1].clone()],
            positive: raw.positive,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            class: &'a str,
            class_labels: &'a [String; 2],
            positive: &'a str,
            attributes: &'a [AttributeSpec],
        }
        toml::to_string(&Out {
            class: &self.class,
            class_labels: &self.class_labels,
            positive: &self.positive,
            attributes: &self.attributes,
        })
        .expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.class_labels[0] == self.class_labels[1] {
            return Err(Error::Schema("class labels must be distinct".into()));
        }
        if !self.class_labels.contains(&self.positive) {
            return Err(Error::Schema(format!(
                "positive label '{}' is not one of the class labels",
                self.positive
            )));
        }
        let mut names: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        names.push(&self.class);
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate column '{}'", w[0])));
        }
        for attr in &self.attributes {
            if let AttributeKind::Nominal { categories } = &attr.kind {
                if categories.is_empty() {
                    return Err(Error::Schema(format!("nominal '{}' has no categories", attr.name)));
                }
                let mut c: Vec<&String> = categories.iter().collect();
                c.sort_unstable();
                if c.windows(2).any(|w| w[0] == w[1]) || categories.iter().any(|s| s.is_empty()) {
                    return Err(Error::Schema(format!(
                        "nominal '{}' has empty or duplicate categories",
                        attr.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn negative_label(&self) -> &str {
        if self.class_labels[0] == self.positive {
            &self.class_labels[1]
        } else {
            &self.class_labels[0]
        }
    }

    pub fn label_name(&self, label: ClassLabel) -> &str {
        match label {
            ClassLabel::Positive => &self.positive,
            ClassLabel::Negative => self.negative_label(),
        }
    }

    /// Checks that `values` conforms: right length, finite numerics,
    /// in-range category indices.
    pub fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.attributes.len() {
            return Err(Error::SchemaMismatch {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        for (attr, &v) in self.attributes.iter().zip(values) {
            let ok = match attr.arity() {
                None => v.is_finite(),
                Some(n) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < n,
            };
            if !ok {
                return Err(Error::invalid(format!("value {v} out of domain for '{}'", attr.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Arc<Schema>,
    pub instances: Vec<Instance>,
}

impl Dataset {
    /// Builds a dataset from `(values, label)` rows; origins are the row indices.
    pub fn from_rows(schema: Schema, rows: Vec<(Vec<f64>, ClassLabel)>) -> Result<Self> {
        let schema = Arc::new(schema);
        let instances = rows
            .into_iter()
            .enumerate()
            .map(|(i, (values, label))| {
                schema.check_values(&values)?;
                Ok(Instance {
                    values,
                    label,
                    origin: Origin::Row(i),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { schema, instances })
    }

    /// A dataset sharing this one's schema.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Self {
        Self {
            schema: Arc::clone(&self.schema),
            instances,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        self.with_instances(indices.iter().map(|&i| self.instances[i].clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// `(negative, positive)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.instances.iter().filter(|i| i.label.is_positive()).count();
        (self.instances.len() - pos, pos)
    }

    pub fn n_positive(&self) -> usize {
        self.class_counts().1
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Majority-to-minority ratio, `|negative| / |positive|`.
    pub fn imbalance_ratio(&self) -> Result<f64> {
        let (neg, pos) = self.class_counts();
        if pos == 0 {
            return Err(Error::NoMinority);
        }
        Ok(neg as f64 / pos as f64)
    }

    /// A warning when the declared minority label outnumbers the other class.
    pub fn minority_warning(&self) -> Option<String> {
        let (neg, pos) = self.class_counts();
        (pos > neg).then(|| {
            format!(
                "declared minority label '{}' has {pos} instances vs {neg}; imbalance ratio < 1",
                self.schema.positive
            )
        })
    }

    pub fn load_csv(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Self> {
        let schema = Schema::load(schema_path)?;
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, schema)
    }

    /// Parses CSV text against `schema`. Rows are numbered as file lines
    /// (the header is line 1).
    pub fn read_csv<R: std::io::Read>(reader: R, schema: Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(1, e))?
            .iter()
            .map(str::to_owned)
            .collect();

        let col_of = |name: &str| header.iter().position(|h| h == name);
        let class_col = col_of(&schema.class).ok_or_else(|| Error::Parse {
            row: 1,
            column: schema.class.clone(),
            message: "class column absent from header".into(),
        })?;
        let attr_cols = schema
            .attributes
            .iter()
            .map(|a| {
                col_of(&a.name).ok_or_else(|| Error::Parse {
                    row: 1,
                    column: a.name.clone(),
                    message: "missing column".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut instances = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(line, e))?;
            if record.len() != header.len() {
                return Err(Error::Parse {
                    row: line,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            let mut values = Vec::with_capacity(attr_cols.len());
            for (attr, &col) in schema.attributes.iter().zip(&attr_cols) {
                let cell = &record[col];
                let err = |message: String| Error::Parse {
                    row: line,
                    column: attr.name.clone(),
                    message,
                };
                if cell.is_empty() || cell == "?" {
                    return Err(err("missing value".into()));
                }
                let v = match &attr.kind {
                    AttributeKind::Numeric => {
                        let v: f64 = cell
                            .parse()
                            .map_err(|_| err(format!("non-numeric value '{cell}'")))?;
                        if !v.is_finite() {
                            return Err(err(format!("non-finite value '{cell}'")));
                        }
                        v
                    }
                    AttributeKind::Nominal { categories } => categories
                        .iter()
                        .position(|c| c == cell)
                        .ok_or_else(|| err(format!("unknown category '{cell}'")))?
                        as f64,
                };
                values.push(v);
            }
            let class_cell = &record[class_col];
            let label = if class_cell == schema.positive {
                ClassLabel::Positive
            } else if class_cell == schema.negative_label() {
                ClassLabel::Negative
            } else {
                return Err(Error::Parse {
                    row: line,
                    column: schema.class.clone(),
                    message: format!("unknown class label '{class_cell}' (class must be binary)"),
                });
            };
            instances.push(Instance {
                values,
                label,
                origin: Origin::Row(i),
            });
        }
        Ok(Self {
            schema: Arc::new(schema),
            instances,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.schema.class);
        writeln!(w, "{}", header.join(","))?;
        for inst in &self.instances {
            for (attr, &v) in self.schema.attributes.iter().zip(&inst.values) {
                write!(w, "{},", attr.format_value(v))?;
            }
            writeln!(w, "{}", self.schema.label_name(inst.label))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
    }

    /// Stratified k-fold assignment: each class is shuffled with `seed` and
    /// dealt round-robin over the folds, the deal continuing across classes so
    /// fold sizes also differ by at most one.
    pub fn stratified_kfold(&self, k: usize, seed: u64) -> Result<FoldSplit> {
        if k < 2 {
            return Err(Error::invalid(format!("fold count must be >= 2, got {k}")));
        }
        let (neg, pos) = self.class_counts();
        if neg.min(pos) < k {
            return Err(Error::invalid(format!(
                "{k} folds requested but the smaller class has only {} instances",
                neg.min(pos)
            )));
        }
        let mut rng = seeding::rng(seed);
        let mut assignments = vec![0usize; self.len()];
        let mut next = 0usize;
        for class in [ClassLabel::Positive, ClassLabel::Negative] {
            let mut members: Vec<usize> = (0..self.len())
                .filter(|&i| self.instances[i].label == class)
                .collect();
            members.shuffle(&mut rng);
            for idx in members {
                assignments[idx] = next % k;
                next += 1;
            }
        }
        Ok(FoldSplit { k, assignments })
    }
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        row: line,
        column: String::new(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    /// Fold index of each instance.
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}
