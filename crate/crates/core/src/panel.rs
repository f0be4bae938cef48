//! Balanced panels and their CSV/JSON file formats.
//!
//! CSV layout: header `id,t,y,<name1>,...,<namep>`, one row per `(id, t)`,
//! rows in any order. The schema is a small JSON document naming the family,
//! the optional lagged-outcome column and the bound on individual effects.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::scalar::Scalar;

/// Default bound `A` on individual effects, `α ∈ [-A, A]`.
pub const DEFAULT_ALPHA_BOUND: f64 = 50.0;

/// Balanced panel of outcomes `y(i,t)` and regressors `x(i,t,k)`.
///
/// Individual `i` occupies the contiguous block `i*T .. (i+1)*T` of `y`, and
/// each observation's regressors are a contiguous row of length `p` in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData<S> {
    n: usize,
    t: usize,
    p: usize,
    ids: Vec<String>,
    periods: Vec<i64>,
    y: Vec<S>,
    x: Vec<S>,
    column_names: Vec<String>,
    lag_column: Option<usize>,
}

impl<S: Scalar> PanelData<S> {
    /// Builds a panel with ids `1..=n` and periods `1..=T`.
    pub fn new(
        n: usize,
        t: usize,
        y: Vec<S>,
        x: Vec<S>,
        column_names: Vec<String>,
        lag_column: Option<usize>,
    ) -> Result<Self> {
        let ids = (1..=n).map(|i| i.to_string()).collect();
        let periods = (1..=t as i64).collect();
        Self::with_labels(ids, periods, y, x, column_names, lag_column)
    }

    pub fn with_labels(
        ids: Vec<String>,
        periods: Vec<i64>,
        y: Vec<S>,
        x: Vec<S>,
        column_names: Vec<String>,
        lag_column: Option<usize>,
    ) -> Result<Self> {
        let n = ids.len();
        let t = periods.len();
        let p = column_names.len();
        if n == 0 || t == 0 {
            return Err(Error::Domain("panel needs at least one individual and one period".into()));
        }
        if y.len() != n * t || x.len() != n * t * p {
            return Err(Error::Domain(format!(
                "array sizes do not match n={n}, T={t}, p={p} (|y|={}, |x|={})",
                y.len(),
                x.len()
            )));
        }
        if let Some(k) = lag_column {
            if k >= p {
                return Err(Error::Domain(format!("lag column {k} out of range")));
            }
        }
        let panel = Self { n, t, p, ids, periods, y, x, column_names, lag_column };
        panel.check_lag_invariant()?;
        Ok(panel)
    }

    fn check_lag_invariant(&self) -> Result<()> {
        let Some(k) = self.lag_column else { return Ok(()) };
        for i in 0..self.n {
            for s in 1..self.t {
                if self.x_at(i, s, k) != self.y_at(i, s - 1) {
                    return Err(Error::Domain(format!(
                        "lag column {} does not equal the previous outcome for id {} at t {}",
                        self.column_names[k], self.ids[i], self.periods[s]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of periods `T`.
    pub fn periods_len(&self) -> usize {
        self.t
    }

    /// Number of regressors `p`.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn lag_column(&self) -> Option<usize> {
        self.lag_column
    }

    pub fn y(&self) -> &[S] {
        &self.y
    }

    pub fn x(&self) -> &[S] {
        &self.x
    }

    #[inline]
    pub fn y_at(&self, i: usize, s: usize) -> S {
        self.y[i * self.t + s]
    }

    #[inline]
    pub fn x_at(&self, i: usize, s: usize, k: usize) -> S {
        self.x[(i * self.t + s) * self.p + k]
    }

    /// Outcomes of individual `i`, periods in order.
    #[inline]
    pub fn individual_y(&self, i: usize) -> &[S] {
        &self.y[i * self.t..(i + 1) * self.t]
    }

    /// Regressor rows of individual `i`, `T × p` row-major.
    #[inline]
    pub fn individual_x(&self, i: usize) -> &[S] {
        &self.x[i * self.t * self.p..(i + 1) * self.t * self.p]
    }

    /// Checks every outcome against the family's support.
    pub fn validate_for(&self, family: Family) -> Result<()> {
        for (idx, y) in self.y.iter().enumerate() {
            family.validate_outcome(*y).map_err(|e| {
                Error::Domain(format!(
                    "id {} t {}: {e}",
                    self.ids[idx / self.t],
                    self.periods[idx % self.t]
                ))
            })?;
        }
        if !family.has_index() && self.p > 0 {
            return Err(Error::Domain("neyman-scott panels carry no regressors".into()));
        }
        Ok(())
    }

    /// Observed initial outcomes `y(i,0)` of a dynamic panel: the lag column in
    /// the first period.
    pub fn initial_outcomes(&self) -> Option<Vec<S>> {
        let k = self.lag_column?;
        Some((0..self.n).map(|i| self.x_at(i, 0, k)).collect())
    }

    /// Same regressors, new outcomes. In a dynamic panel the lag column is
    /// rebuilt from the new outcomes for every period after the first.
    pub fn with_outcomes(&self, y: Vec<S>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::Domain("outcome array has the wrong length".into()));
        }
        let mut out = self.clone();
        out.y = y;
        if let Some(k) = self.lag_column {
            for i in 0..self.n {
                for s in 1..self.t {
                    out.x[(i * self.t + s) * self.p + k] = out.y[i * self.t + s - 1];
                }
            }
        }
        Ok(out)
    }

    /// Panel restricted to the listed individuals, in the given order.
    pub fn subset_individuals(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::NoEstimableIndividuals);
        }
        let (t, p) = (self.t, self.p);
        let mut y = Vec::with_capacity(keep.len() * t);
        let mut x = Vec::with_capacity(keep.len() * t * p);
        for &i in keep {
            y.extend_from_slice(self.individual_y(i));
            x.extend_from_slice(self.individual_x(i));
        }
        Ok(Self {
            n: keep.len(),
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            y,
            x,
            ..self.clone_meta()
        })
    }

    /// Panel restricted to the contiguous period positions `range`.
    pub fn slice_periods(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.t {
            return Err(Error::Domain(format!("period range {range:?} out of bounds")));
        }
        let keep: Vec<usize> = range.collect();
        Ok(self.select_periods(&keep))
    }

    /// Panel without period position `s`. Not defined for dynamic panels,
    /// where removing a period breaks the lag structure.
    pub fn drop_period(&self, s: usize) -> Result<Self> {
        if self.lag_column.is_some() {
            return Err(Error::NotApplicable("cannot drop a period from a dynamic panel".into()));
        }
        if s >= self.t || self.t < 2 {
            return Err(Error::Domain(format!("cannot drop period {s} of {}", self.t)));
        }
        let keep: Vec<usize> = (0..self.t).filter(|&r| r != s).collect();
        Ok(self.select_periods(&keep))
    }

    fn select_periods(&self, keep: &[usize]) -> Self {
        let (t, p) = (self.t, self.p);
        let mut y = Vec::with_capacity(self.n * keep.len());
        let mut x = Vec::with_capacity(self.n * keep.len() * p);
        for i in 0..self.n {
            for &s in keep {
                y.push(self.y[i * t + s]);
                x.extend_from_slice(&self.x[(i * t + s) * p..(i * t + s + 1) * p]);
            }
        }
        Self {
            t: keep.len(),
            periods: keep.iter().map(|&s| self.periods[s]).collect(),
            y,
            x,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            n: self.n,
            t: self.t,
            p: self.p,
            ids: self.ids.clone(),
            periods: self.periods.clone(),
            y: Vec::new(),
            x: Vec::new(),
            column_names: self.column_names.clone(),
            lag_column: self.lag_column,
        }
    }

    /// Writes the panel as CSV. Values use the shortest representation that
    /// parses back to the same bits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "t".to_string(), "y".to_string()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n {
            for s in 0..self.t {
                let mut rec = vec![self.ids[i].clone(), self.periods[s].to_string(), self.y_at(i, s).to_string()];
                rec.extend((0..self.p).map(|k| self.x_at(i, s, k).to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Companion JSON schema of a CSV panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_column: Option<String>,
    #[serde(default = "default_alpha_bound")]
    pub alpha_bound: f64,
}

fn default_alpha_bound() -> f64 {
    DEFAULT_ALPHA_BOUND
}

impl Schema {
    pub fn new(family: Family) -> Self {
        Self { family, lag_column: None, alpha_bound: DEFAULT_ALPHA_BOUND }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Reads a CSV panel from `path`.
pub fn load_panel<S: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<PanelData<S>> {
    read_panel(std::fs::File::open(path)?, schema)
}

#[derive(PartialEq, Eq, PartialOrd, Ord, Clone)]
enum IdKey {
    Numeric(i64, String),
    Text(String),
}

/// Reads a CSV panel from any reader. Rows may come in any order; the result
/// is sorted by `(id, t)` with individuals re-indexed densely.
pub fn read_panel<S: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<PanelData<S>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3
        || !header[0].eq_ignore_ascii_case("id")
        || !header[1].eq_ignore_ascii_case("t")
        || !header[2].eq_ignore_ascii_case("y")
    {
        return Err(Error::Parse { row: 1, message: "header must start with id,t,y".into() });
    }
    let column_names: Vec<String> = header[3..].to_vec();
    let p = column_names.len();
    let lag_column = match &schema.lag_column {
        None => None,
        Some(name) => Some(column_names.iter().position(|c| c == name).ok_or_else(|| {
            Error::Config(format!("lag column {name:?} not among the regressors"))
        })?),
    };

    let mut rows: BTreeMap<String, BTreeMap<i64, (S, Vec<S>)>> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse { row, message: format!("expected {} fields", header.len()) });
        }
        let id = record[0].to_string();
        let t: i64 = record[1]
            .parse()
            .map_err(|_| Error::Parse { row, message: format!("period {:?} is not an integer", &record[1]) })?;
        let mut nums = Vec::with_capacity(p + 1);
        for (c, cell) in record.iter().enumerate().skip(2) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {} value {cell:?} is not numeric", header[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("column {} is not finite", header[c]) });
            }
            nums.push(S::lit(v));
        }
        let y = nums[0];
        schema
            .family
            .validate_outcome(y)
            .map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let entry = rows.entry(id.clone()).or_default();
        if entry.insert(t, (y, nums[1..].to_vec())).is_some() {
            return Err(Error::Duplicate { id, t });
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 2, message: "no observations".into() });
    }

    let mut periods: Vec<i64> = rows.values().flat_map(|m| m.keys().copied()).collect();
    periods.sort_unstable();
    periods.dedup();

    let mut keyed: Vec<(IdKey, String)> = rows
        .keys()
        .map(|id| match id.parse::<i64>() {
            Ok(v) => (IdKey::Numeric(v, id.clone()), id.clone()),
            Err(_) => (IdKey::Text(id.clone()), id.clone()),
        })
        .collect();
    keyed.sort_by(|a, b| match (&a.0, &b.0) {
        (IdKey::Numeric(..), IdKey::Text(..)) => Ordering::Less,
        (IdKey::Text(..), IdKey::Numeric(..)) => Ordering::Greater,
        _ => a.0.cmp(&b.0),
    });

    let t = periods.len();
    let mut y = Vec::with_capacity(keyed.len() * t);
    let mut x = Vec::with_capacity(keyed.len() * t * p);
    for (_, id) in &keyed {
        let obs = &rows[id];
        if obs.len() != t {
            return Err(Error::Unbalanced { id: id.clone() });
        }
        for (yv, xv) in obs.values() {
            y.push(*yv);
            x.extend_from_slice(xv);
        }
    }
    let ids = keyed.into_iter().map(|(_, id)| id).collect();
    PanelData::with_labels(ids, periods, y, x, column_names, lag_column)
}
