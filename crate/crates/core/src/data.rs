use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Rectangular applicant-level data: outcome, K treatment indicators, K
/// instruments, controls (with exactly one constant column), cluster ids and
/// an optional categorical group label.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vector,
    a: Mat,
    z: Mat,
    x: Mat,
    cluster: Vec<String>,
    group: Option<Vec<String>>,
    /// Control columns already projected out of y, A and Z (0 for raw data).
    absorbed: usize,
}

fn is_constant(col: nalgebra::DVectorView<'_, f64>) -> bool {
    match col.iter().next() {
        Some(&first) => first != 0.0 && col.iter().all(|v| *v == first),
        None => false,
    }
}

impl Dataset {
    /// Validated constructor for raw data with 0/1 treatment indicators.
    pub fn new(
        y: Vector,
        a: Mat,
        z: Mat,
        x: Mat,
        cluster: Vec<String>,
        group: Option<Vec<String>>,
    ) -> Result<Self> {
        let d = Self::new_continuous(y, a, z, x, cluster, group)?;
        if let Some((i, j)) = d
            .a
            .row_iter()
            .enumerate()
            .find_map(|(i, row)| row.iter().position(|v| *v != 0.0 && *v != 1.0).map(|j| (i, j)))
        {
            return Err(Error::InvalidInput(format!(
                "treatment a_{} at row {} is {}, expected 0 or 1",
                j + 1,
                i,
                d.a[(i, j)]
            )));
        }
        Ok(d)
    }

    /// Same as [`Dataset::new`] but allows real-valued treatments (quantities
    /// allocated by a market rather than admission indicators).
    pub fn new_continuous(
        y: Vector,
        a: Mat,
        z: Mat,
        x: Mat,
        cluster: Vec<String>,
        group: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        for (name, rows) in [("A", a.nrows()), ("Z", z.nrows()), ("X", x.nrows()), ("cluster", cluster.len())] {
            if rows != n {
                return Err(Error::InvalidInput(format!("{name} has {rows} rows, expected {n}")));
            }
        }
        if let Some(g) = &group {
            if g.len() != n {
                return Err(Error::InvalidInput(format!("group has {} rows, expected {n}", g.len())));
            }
        }
        if a.ncols() == 0 {
            return Err(Error::InvalidInput("at least one treatment is required".into()));
        }
        let constants = x.column_iter().filter(|c| is_constant(c.as_view())).count();
        if constants != 1 {
            return Err(Error::InvalidInput(format!(
                "controls must contain exactly one constant column, found {constants}"
            )));
        }
        if let Some(i) = cluster.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidInput(format!("empty cluster id at row {i}")));
        }
        if y.iter().chain(a.iter()).chain(z.iter()).chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in data".into()));
        }
        Ok(Dataset { y, a, z, x, cluster, group, absorbed: 0 })
    }

    pub(crate) fn partialled(y: Vector, a: Mat, z: Mat, cluster: Vec<String>, group: Option<Vec<String>>, absorbed: usize) -> Self {
        let n = y.len();
        Dataset { y, a, z, x: Mat::from_element(n, 1, 1.0), cluster, group, absorbed }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of treatments.
    pub fn k(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_instruments(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn z(&self) -> &Mat {
        &self.z
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn cluster(&self) -> &[String] {
        &self.cluster
    }

    pub fn group(&self) -> Option<&[String]> {
        self.group.as_deref()
    }

    pub fn is_partialled(&self) -> bool {
        self.absorbed > 0
    }

    /// Control columns that count against degrees of freedom.
    pub fn n_controls(&self) -> usize {
        if self.absorbed > 0 {
            self.absorbed
        } else {
            self.x.ncols()
        }
    }

    /// Dense cluster codes in order of first appearance, and the cluster count.
    pub fn cluster_codes(&self) -> (Vec<usize>, usize) {
        let mut map: HashMap<&str, usize> = HashMap::new();
        let codes = self
            .cluster
            .iter()
            .map(|c| {
                let next = map.len();
                *map.entry(c.as_str()).or_insert(next)
            })
            .collect();
        (codes, map.len())
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_codes().1
    }

    /// Distinct group labels in order of first appearance.
    pub fn group_levels(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        if let Some(g) = &self.group {
            for label in g {
                if !seen.iter().any(|s| s == label) {
                    seen.push(label.clone());
                }
            }
        }
        seen
    }

    /// Copy with a different outcome vector.
    pub fn with_outcome(&self, y: Vector) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch { left: y.len(), right: self.n() });
        }
        let mut d = self.clone();
        d.y = y;
        Ok(d)
    }

    /// Rows `rows` (in order, duplicates allowed). Cluster ids are kept.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let pick = |m: &Mat| Mat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
        Dataset {
            y: Vector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            a: pick(&self.a),
            z: pick(&self.z),
            x: pick(&self.x),
            cluster: rows.iter().map(|&r| self.cluster[r].clone()).collect(),
            group: self.group.as_ref().map(|g| rows.iter().map(|&r| g[r].clone()).collect()),
            absorbed: self.absorbed,
        }
    }

    /// Rows whose group label equals `label`.
    pub fn group_subsample(&self, label: &str) -> Result<Self> {
        let g = self
            .group
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("dataset has no group column".into()))?;
        let rows: Vec<usize> = g.iter().enumerate().filter(|(_, l)| *l == label).map(|(i, _)| i).collect();
        if rows.is_empty() {
            return Err(Error::InvalidInput(format!("group '{label}' has no rows")));
        }
        Ok(self.select_rows(&rows))
    }

    pub(crate) fn relabel_clusters(&mut self, ids: Vec<String>) {
        debug_assert_eq!(ids.len(), self.n());
        self.cluster = ids;
    }
}
