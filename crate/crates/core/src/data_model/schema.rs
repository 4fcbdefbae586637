//! Column kinds, schemas and the schema text format.

use super::DataError;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// What a raw survey column holds and how it is encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Real values in `[min, max]`; one encoded slot, min-max scaled.
    Numeric { min: f64, max: f64 },
    /// Integer levels `0..levels`; one encoded slot, min-max scaled.
    Ordinal { levels: usize },
    /// One of the listed labels; one encoded slot per label (one-hot).
    Categorical { labels: Vec<String> },
    /// 0 or 1; one encoded slot.
    Binary,
}

impl ColumnKind {
    /// Number of encoded slots this kind occupies.
    pub fn encoded_width(&self) -> usize {
        match self {
            ColumnKind::Categorical { labels } => labels.len(),
            _ => 1,
        }
    }

    fn validate(&self, column: &str) -> Result<(), DataError> {
        let fail = |reason: String| {
            Err(DataError::BadColumnKind {
                column: column.to_string(),
                reason,
            })
        };
        match self {
            ColumnKind::Numeric { min, max } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return fail(format!("numeric bounds must satisfy min < max, got {min}..{max}"));
                }
            }
            ColumnKind::Ordinal { levels } => {
                if *levels < 2 {
                    return fail(format!("ordinal needs >= 2 levels, got {levels}"));
                }
            }
            ColumnKind::Categorical { labels } => {
                if labels.len() < 2 {
                    return fail("categorical needs >= 2 labels".into());
                }
                let mut sorted = labels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != labels.len() {
                    return fail("categorical labels must be distinct".into());
                }
                if labels.iter().any(|l| l.is_empty() || l.chars().any(char::is_whitespace)) {
                    return fail("labels must be non-empty and whitespace-free".into());
                }
            }
            ColumnKind::Binary => {}
        }
        Ok(())
    }
}

/// A named survey column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered list of survey columns plus the encoding geometry they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let mut names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != columns.len() {
            return Err(DataError::SchemaParse("duplicate column names".into()));
        }
        for c in &columns {
            if c.name.is_empty() || c.name.chars().any(char::is_whitespace) {
                return Err(DataError::SchemaParse(format!(
                    "column name `{}` must be non-empty and whitespace-free",
                    c.name
                )));
            }
            c.kind.validate(&c.name)?;
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Total number of encoded slots (one-hot groups expanded).
    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(|c| c.kind.encoded_width()).sum()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Encoded slot range of the raw column at `index`.
    pub fn slot_range(&self, index: usize) -> Range<usize> {
        let start: usize = self.columns[..index]
            .iter()
            .map(|c| c.kind.encoded_width())
            .sum();
        start..start + self.columns[index].kind.encoded_width()
    }

    /// Slot ranges of all raw columns, in column order.
    pub fn slot_ranges(&self) -> Vec<Range<usize>> {
        (0..self.columns.len()).map(|i| self.slot_range(i)).collect()
    }

    /// Raw column owning the given encoded slot.
    pub fn column_of_slot(&self, slot: usize) -> usize {
        let mut acc = 0;
        for (i, c) in self.columns.iter().enumerate() {
            acc += c.kind.encoded_width();
            if slot < acc {
                return i;
            }
        }
        panic!("slot {slot} out of range (width {})", self.encoded_width());
    }

    /// Parses the schema text format: one `name = kind args...` line per
    /// column. Kinds: `numeric MIN MAX`, `ordinal LEVELS`,
    /// `categorical LABEL...`, `binary`. Blank lines and `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::SchemaParse(format!("line {}: {msg}", lineno + 1));
            let (name, rest) = line
                .split_once('=')
                .ok_or_else(|| err("expected `name = kind ...`".into()))?;
            let name = name.trim().to_string();
            let mut parts = rest.split_whitespace();
            let kind_word = parts.next().ok_or_else(|| err("missing kind".into()))?;
            let args: Vec<&str> = parts.collect();
            let kind = match kind_word {
                "numeric" => {
                    if args.len() != 2 {
                        return Err(err("numeric takes MIN MAX".into()));
                    }
                    let min = args[0].parse().map_err(|_| err("bad MIN".into()))?;
                    let max = args[1].parse().map_err(|_| err("bad MAX".into()))?;
                    ColumnKind::Numeric { min, max }
                }
                "ordinal" => {
                    if args.len() != 1 {
                        return Err(err("ordinal takes LEVELS".into()));
                    }
                    let levels = args[0].parse().map_err(|_| err("bad LEVELS".into()))?;
                    ColumnKind::Ordinal { levels }
                }
                "categorical" => ColumnKind::Categorical {
                    labels: args.iter().map(|s| s.to_string()).collect(),
                },
                "binary" => {
                    if !args.is_empty() {
                        return Err(err("binary takes no arguments".into()));
                    }
                    ColumnKind::Binary
                }
                other => return Err(err(format!("unknown kind `{other}`"))),
            };
            columns.push(Column { name, kind });
        }
        if columns.is_empty() {
            return Err(DataError::SchemaParse("no columns declared".into()));
        }
        Schema::new(columns)
    }

    /// Renders the schema in the format accepted by [`Schema::parse`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let line = match &c.kind {
                ColumnKind::Numeric { min, max } => format!("{} = numeric {} {}", c.name, min, max),
                ColumnKind::Ordinal { levels } => format!("{} = ordinal {}", c.name, levels),
                ColumnKind::Categorical { labels } => {
                    format!("{} = categorical {}", c.name, labels.join(" "))
                }
                ColumnKind::Binary => format!("{} = binary", c.name),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// The default 8-column survey schema (13 encoded slots): five scalar
/// demographics, an attendance flag, and two categorical columns expanded to
/// 4 + 3 one-hot slots. A stand-in for survey data whose real category names
/// are not distributed with this toolkit.
pub fn default_schema() -> Schema {
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Schema::new(vec![
        Column { name: "age".into(), kind: ColumnKind::Numeric { min: 12.0, max: 50.0 } },
        Column { name: "education".into(), kind: ColumnKind::Ordinal { levels: 14 } },
        Column { name: "gravidity".into(), kind: ColumnKind::Numeric { min: 0.0, max: 12.0 } },
        Column { name: "parity".into(), kind: ColumnKind::Numeric { min: 0.0, max: 12.0 } },
        Column { name: "hiv".into(), kind: ColumnKind::Binary },
        Column {
            name: "race".into(),
            kind: ColumnKind::Categorical { labels: labels(&["r1", "r2", "r3", "r4"]) },
        },
        Column {
            name: "province".into(),
            kind: ColumnKind::Categorical { labels: labels(&["p1", "p2", "p3"]) },
        },
        Column { name: "clinic_visit".into(), kind: ColumnKind::Binary },
    ])
    .expect("default schema is valid")
}
