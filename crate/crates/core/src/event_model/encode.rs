use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CriticalEvent, Variable};
use crate::error::{Error, Result};

/// One design-matrix column: a continuous variable (`level == None`) or the
/// indicator of one level of a categorical variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub variable: Variable,
    pub level: Option<usize>,
}

impl Column {
    pub fn continuous(variable: Variable) -> Self {
        Self { variable, level: None }
    }

    pub fn indicator(variable: Variable, level: usize) -> Self {
        Self { variable, level: Some(level) }
    }

    pub fn is_continuous(&self) -> bool {
        self.level.is_none()
    }

    /// `pet`, `veh_movement.through`, `nearside`.
    pub fn name(&self) -> String {
        match self.level {
            None => self.variable.name().to_string(),
            Some(_) if self.variable == Variable::Nearside => "nearside".to_string(),
            Some(l) => format!("{}.{}", self.variable.name(), self.variable.levels()[l]),
        }
    }
}

/// Contiguous columns that share a source variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnGroup {
    pub variable: Variable,
    pub start: usize,
    pub len: usize,
}

impl ColumnGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Where a row of an encoded matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOrigin {
    /// Index into the event sequence that was encoded.
    Original(usize),
    /// Interpolated between two rows of the same matrix.
    Synthetic { seed: usize, neighbor: usize },
}

/// Numeric design matrix (row-major) with labels, row weights and column
/// metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    columns: Vec<Column>,
    values: Vec<f64>,
    n_rows: usize,
    drop_baseline: bool,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
    pub origins: Vec<RowOrigin>,
}

impl EncodedMatrix {
    /// Builds a matrix from raw parts. Weights default to 1.
    pub fn new(columns: Vec<Column>, values: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = labels.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch { expected: n_rows * n_cols, got: values.len() });
        }
        Ok(Self {
            columns,
            values,
            n_rows,
            drop_baseline: false,
            weights: vec![1.0; n_rows],
            origins: (0..n_rows).map(RowOrigin::Original).collect(),
            labels,
        })
    }

    /// Builds a matrix from row vectors with generic continuous columns.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(labels.len(), rows.len()));
        }
        let columns = vec![Column::continuous(Variable::Pet); n_cols];
        Self::new(columns, rows.concat(), labels)
    }

    /// Column layout for the event schema.
    pub fn schema_columns(drop_baseline: bool) -> Vec<Column> {
        let mut columns: Vec<Column> =
            Variable::CONTINUOUS.iter().map(|&v| Column::continuous(v)).collect();
        for var in Variable::CATEGORICAL {
            let baseline = var.baseline().expect("categorical");
            for level in 0..var.levels().len() {
                let binary_drop = var.is_binary() && level == baseline;
                if binary_drop || (drop_baseline && level == baseline) {
                    continue;
                }
                columns.push(Column::indicator(var, level));
            }
        }
        columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(Column::name).collect()
    }

    pub fn drop_baseline(&self) -> bool {
        self.drop_baseline
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let p = self.n_cols().max(1);
        self.values.chunks(p).take(self.n_rows)
    }

    /// Level dropped for each categorical variable. Binary variables always
    /// drop their baseline; multi-level ones only under `drop_baseline`.
    pub fn baseline_map(&self) -> BTreeMap<Variable, usize> {
        let mut map = BTreeMap::new();
        for g in self.groups() {
            if g.variable.is_continuous() {
                continue;
            }
            if g.variable.is_binary() || self.drop_baseline {
                map.insert(g.variable, g.variable.baseline().expect("categorical"));
            }
        }
        map
    }

    /// Groups of adjacent columns sharing a source variable, in column order.
    pub fn groups(&self) -> Vec<ColumnGroup> {
        let mut groups: Vec<ColumnGroup> = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.variable == c.variable && !c.is_continuous() => g.len += 1,
                _ => groups.push(ColumnGroup { variable: c.variable, start: j, len: 1 }),
            }
        }
        groups
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn push_row(&mut self, row: &[f64], label: bool, weight: f64, origin: RowOrigin) {
        assert_eq!(row.len(), self.n_cols(), "row width");
        self.values.extend_from_slice(row);
        self.labels.push(label);
        self.weights.push(weight);
        self.origins.push(origin);
        self.n_rows += 1;
    }

    /// Rows `idx` (repeats allowed), keeping their origins.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            columns: self.columns.clone(),
            values,
            n_rows: idx.len(),
            drop_baseline: self.drop_baseline,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            origins: idx.iter().map(|&i| self.origins[i]).collect(),
        }
    }

    /// Reconstructs the event behind row `i`.
    pub fn decode_row(&self, i: usize) -> Result<CriticalEvent> {
        let mut event = super::sample_event();
        let row = self.row(i);
        let groups = self.groups();
        for var in Variable::ALL {
            let Some(g) = groups.iter().find(|g| g.variable == var) else {
                return Err(Error::SchemaMismatch(format!("no columns for {var}")));
            };
            if var.is_continuous() {
                event.set_continuous(var, row[g.start]);
                continue;
            }
            let hot: Vec<usize> = g.range().filter(|&j| row[j] == 1.0).collect();
            let level = match hot.as_slice() {
                [j] => self.columns[*j].level.expect("indicator"),
                [] if g.len < var.levels().len() => var.baseline().expect("categorical"),
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "row {i}: invalid indicator pattern for {var}"
                    )))
                }
            };
            event.set_level(var, level);
        }
        event.label = Some(self.labels[i]);
        Ok(event)
    }

    pub fn decode(&self) -> Result<Vec<CriticalEvent>> {
        (0..self.n_rows).map(|i| self.decode_row(i)).collect()
    }

    /// The baseline-dropped layout of a fully encoded schema matrix. Rows,
    /// labels, weights and origins are kept.
    pub fn without_baselines(&self) -> Result<Self> {
        if self.drop_baseline {
            return Ok(self.clone());
        }
        let target = Self::schema_columns(true);
        let keep: Vec<usize> = target
            .iter()
            .map(|c| {
                self.columns
                    .iter()
                    .position(|own| own == c)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing column {}", c.name())))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows * keep.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(keep.iter().map(|&j| row[j]));
        }
        Ok(Self {
            columns: target,
            values,
            n_rows: self.n_rows,
            drop_baseline: true,
            labels: self.labels.clone(),
            weights: self.weights.clone(),
            origins: self.origins.clone(),
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::LengthMismatch(self.n_rows, weights.len()));
        }
        self.weights = weights;
        Ok(self)
    }
}

/// Encodes events into a design matrix. Continuous fields become one column
/// each; binary variables one indicator; other categoricals one indicator per
/// level, minus the baseline level when `drop_baseline` is set. Unlabeled
/// events get label `false`.
pub fn one_hot_encode(events: &[CriticalEvent], drop_baseline: bool) -> Result<EncodedMatrix> {
    if events.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let columns = EncodedMatrix::schema_columns(drop_baseline);
    let mut values = Vec::with_capacity(events.len() * columns.len());
    for e in events {
        for c in &columns {
            let v = match c.level {
                None => e.continuous(c.variable).expect("continuous"),
                Some(l) => f64::from(u8::from(e.level(c.variable) == Some(l))),
            };
            values.push(v);
        }
    }
    let labels = events.iter().map(|e| e.label.unwrap_or(false)).collect();
    let mut m = EncodedMatrix::new(columns, values, labels)?;
    m.drop_baseline = drop_baseline;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{sample_event, VehMovement};
    use crate::synth::{generate_dataset, GeneratorConfig};

    #[test]
    fn full_indicator_for_tree_models() {
        let mut e = sample_event();
        e.veh_movement = VehMovement::Through;
        let m = one_hot_encode(&[e], false).unwrap();
        let names = m.column_names();
        let get = |n: &str| m.value(0, names.iter().position(|c| c == n).unwrap());
        assert_eq!(get("veh_movement.through"), 1.0);
        assert_eq!(get("veh_movement.left_turn"), 0.0);
        assert_eq!(get("veh_movement.right_turn"), 0.0);
    }

    #[test]
    fn baseline_dropped_for_logistic() {
        let mut e = sample_event();
        e.veh_movement = VehMovement::Through;
        let m = one_hot_encode(&[e], true).unwrap();
        let names = m.column_names();
        let movement: Vec<_> = names.iter().filter(|n| n.starts_with("veh_movement.")).collect();
        assert_eq!(movement, ["veh_movement.through", "veh_movement.right_turn"]);
        let get = |n: &str| m.value(0, names.iter().position(|c| c == n).unwrap());
        assert_eq!(get("veh_movement.through"), 1.0);
        assert_eq!(get("veh_movement.right_turn"), 0.0);
        assert_eq!(m.baseline_map()[&Variable::VehMovement], VehMovement::LeftTurn.index());
    }

    #[test]
    fn column_counts() {
        let e = sample_event();
        // 5 continuous + 5 binary indicators + (4 + 5 + 4 + 3 + 4 + 4 + 5) levels.
        assert_eq!(one_hot_encode(&[e.clone()], false).unwrap().n_cols(), 5 + 5 + 29);
        assert_eq!(one_hot_encode(&[e], true).unwrap().n_cols(), 5 + 5 + 22);
        let expected = |drop: bool| {
            5 + Variable::CATEGORICAL
                .iter()
                .map(|v| v.levels().len() - usize::from(v.is_binary() || drop))
                .sum::<usize>()
        };
        assert_eq!(EncodedMatrix::schema_columns(false).len(), expected(false));
        assert_eq!(EncodedMatrix::schema_columns(true).len(), expected(true));
    }

    #[test]
    fn binary_variables_get_one_column() {
        for drop in [false, true] {
            let m = one_hot_encode(&[sample_event()], drop).unwrap();
            for g in m.groups() {
                if g.variable.is_binary() {
                    assert_eq!(g.len, 1, "{}", g.variable);
                }
            }
        }
    }

    #[test]
    fn dropping_baselines_matches_direct_encoding() {
        let events = generate_dataset(&GeneratorConfig::default().with_seed(4), 30).unwrap();
        let full = one_hot_encode(&events, false).unwrap();
        assert_eq!(full.without_baselines().unwrap(), one_hot_encode(&events, true).unwrap());
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(one_hot_encode(&[], false), Err(Error::EmptyDataset)));
    }

    #[test]
    fn decode_inverts_encode() {
        let events = generate_dataset(&GeneratorConfig::default().with_seed(3), 20).unwrap();
        for drop in [false, true] {
            let m = one_hot_encode(&events, drop).unwrap();
            assert_eq!(m.decode().unwrap(), events);
            for i in 0..m.n_rows() {
                for g in m.groups().iter().filter(|g| !g.variable.is_continuous()) {
                    let s: f64 = g.range().map(|j| m.value(i, j)).sum();
                    if drop || g.variable.is_binary() {
                        assert!(s <= 1.0);
                    } else {
                        assert_eq!(s, 1.0);
                    }
                }
            }
        }
    }
}
