use crate::error::{Error, Result};

/// Per-column linear normalization bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ColumnBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Shape { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Domain("column bounds need lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Observed min and max of every column.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for row in rows {
            if row.len() != lo.len() {
                return Err(Error::Shape { expected: lo.len(), got: row.len() });
            }
            for (c, &v) in row.iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> usize {
        self.lo.len()
    }

    pub fn normalize_value(&self, col: usize, v: f64) -> f64 {
        let span = self.hi[col] - self.lo[col];
        if span > 0.0 {
            (v - self.lo[col]) / span
        } else {
            0.0
        }
    }

    pub fn denormalize_value(&self, col: usize, v: f64) -> f64 {
        self.lo[col] + v * (self.hi[col] - self.lo[col])
    }

    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.normalize_value(c, v)).collect()
    }

    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.denormalize_value(c, v)).collect()
    }

    /// Keeps only the listed columns.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self { lo: columns.iter().map(|&c| self.lo[c]).collect(), hi: columns.iter().map(|&c| self.hi[c]).collect() }
    }
}

/// Paired input/target rows in raw units, with the bounds used to normalize
/// them for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub input_bounds: ColumnBounds,
    pub target_bounds: ColumnBounds,
}

impl Dataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        input_bounds: ColumnBounds,
        target_bounds: ColumnBounds,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape { expected: inputs.len(), got: targets.len() });
        }
        if let Some(r) = inputs.iter().find(|r| r.len() != input_bounds.width()) {
            return Err(Error::Shape { expected: input_bounds.width(), got: r.len() });
        }
        if let Some(r) = targets.iter().find(|r| r.len() != target_bounds.width()) {
            return Err(Error::Shape { expected: target_bounds.width(), got: r.len() });
        }
        Ok(Self { inputs, targets, input_bounds, target_bounds })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Rows mapped into [0, 1] by the stored bounds.
    pub fn normalized(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.inputs.iter().map(|r| self.input_bounds.normalize(r)).collect(),
            self.targets.iter().map(|r| self.target_bounds.normalize(r)).collect(),
        )
    }

    /// Dataset restricted to a subset of input columns.
    pub fn select_inputs(&self, columns: &[usize]) -> Self {
        Self {
            inputs: self.inputs.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
            targets: self.targets.clone(),
            input_bounds: self.input_bounds.select(columns),
            target_bounds: self.target_bounds.clone(),
        }
    }

    /// Rows of `other` appended after this dataset's rows. Bounds are widened
    /// to cover both.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        let widen = |a: &ColumnBounds, b: &ColumnBounds| -> Result<ColumnBounds> {
            if a.width() != b.width() {
                return Err(Error::Shape { expected: a.width(), got: b.width() });
            }
            ColumnBounds::new(
                a.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect(),
                a.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect(),
            )
        };
        let input_bounds = widen(&self.input_bounds, &other.input_bounds)?;
        let target_bounds = widen(&self.target_bounds, &other.target_bounds)?;
        let mut inputs = self.inputs.clone();
        inputs.extend(other.inputs.iter().cloned());
        let mut targets = self.targets.clone();
        targets.extend(other.targets.iter().cloned());
        Self::new(inputs, targets, input_bounds, target_bounds)
    }
}
