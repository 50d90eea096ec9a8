//! System instance, load map and instance file I/O.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of the correlation matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Rows of an ingested file within this distance of 1 are rescaled instead of rejected.
pub const INGEST_ROW_SUM_TOL: f64 = 1e-9;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    what: "correlation row",
                    got: row.len(),
                    expected: n,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `out = self · v`
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot4(self.row(i), v);
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Dot product with four interleaved partial sums, so the compiler can vectorize it.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Per-node cost parameters: `eta` weights queueing delay at the proxy,
/// `gamma_cost` weights latency to the secondary layer, `d` is the round-trip
/// latency parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCost {
    pub eta: f64,
    pub gamma_cost: f64,
    pub d: f64,
}

impl Default for NodeCost {
    fn default() -> Self {
        Self {
            eta: 1.0,
            gamma_cost: 10.0,
            d: 0.5,
        }
    }
}

/// The complete problem datum. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    corr: Matrix,
    arrivals: Vec<f64>,
    thresholds: Vec<f64>,
    costs: Vec<NodeCost>,
}

impl SystemInstance {
    /// Builds an instance after checking that all dimensions agree. Numeric
    /// invariants are checked separately by [`validate`].
    pub fn new(corr: Matrix, arrivals: Vec<f64>, thresholds: Vec<f64>, costs: Vec<NodeCost>) -> Result<Self> {
        let n = corr.dim();
        if n == 0 {
            return Err(Error::InvalidInstance("instance has no nodes".into()));
        }
        for (what, len) in [
            ("arrivals", arrivals.len()),
            ("thresholds", thresholds.len()),
            ("cost parameters", costs.len()),
        ] {
            if len != n {
                return Err(Error::Dimension { what, got: len, expected: n });
            }
        }
        Ok(Self {
            corr,
            arrivals,
            thresholds,
            costs,
        })
    }

    /// Same as [`SystemInstance::new`] but rejects instances with any violation.
    pub fn validated(corr: Matrix, arrivals: Vec<f64>, thresholds: Vec<f64>, costs: Vec<NodeCost>) -> Result<Self> {
        let inst = Self::new(corr, arrivals, thresholds, costs)?;
        let report = validate(&inst);
        if report.is_ok() {
            Ok(inst)
        } else {
            Err(Error::InvalidInstance(report.to_string()))
        }
    }

    /// Convenience constructor with identical cost parameters on every node.
    pub fn uniform_costs(rows: &[Vec<f64>], arrivals: &[f64], thresholds: &[f64], cost: NodeCost) -> Result<Self> {
        let corr = Matrix::from_rows(rows)?;
        let n = corr.dim();
        Self::validated(corr, arrivals.to_vec(), thresholds.to_vec(), vec![cost; n])
    }

    pub fn n(&self) -> usize {
        self.corr.dim()
    }

    pub fn corr(&self) -> &Matrix {
        &self.corr
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn costs(&self) -> &[NodeCost] {
        &self.costs
    }

    /// Copy of this instance with different arrival rates.
    pub fn with_arrivals(&self, arrivals: Vec<f64>) -> Result<Self> {
        Self::new(self.corr.clone(), arrivals, self.thresholds.clone(), self.costs.clone())
    }

    pub fn is_strictly_positive(&self) -> bool {
        (0..self.n()).all(|i| self.corr.row(i).iter().all(|&c| c > 0.0))
    }

    pub fn total_arrivals(&self) -> f64 {
        self.arrivals.iter().sum()
    }

    pub fn max_threshold(&self) -> f64 {
        self.thresholds.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ViolationKind {
    RowSum,
    NegativeCorrelation,
    NegativeArrival,
    NonPositiveThreshold,
    NonPositiveEta,
    NonPositiveGamma,
    NegativeLatency,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: (usize, usize),
    /// Offending value (the row sum for `RowSum`).
    pub magnitude: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Reports every violated invariant of `instance`.
pub fn validate(instance: &SystemInstance) -> ValidationReport {
    let n = instance.n();
    let mut out = Vec::new();
    let mut push = |kind, index, magnitude: f64, message: String| {
        out.push(Violation {
            kind,
            index,
            magnitude,
            message,
        })
    };
    for i in 0..n {
        let row = instance.corr.row(i);
        for (j, &c) in row.iter().enumerate() {
            if !c.is_finite() {
                push(ViolationKind::NonFinite, (i, j), c, format!("C[{i}][{j}] is not finite"));
            } else if c < 0.0 {
                push(ViolationKind::NegativeCorrelation, (i, j), c, format!("C[{i}][{j}] = {c} is negative"));
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            push(ViolationKind::RowSum, (i, 0), sum, format!("row {i} sums to {sum}"));
        }
    }
    type ScalarCheck<'a> = (&'a [f64], ViolationKind, &'a str, fn(f64) -> bool);
    let scalar_checks: [ScalarCheck; 2] = [
        (&instance.arrivals, ViolationKind::NegativeArrival, "arrival", |v| v >= 0.0),
        (&instance.thresholds, ViolationKind::NonPositiveThreshold, "threshold", |v| v > 0.0),
    ];
    for (values, kind, name, ok) in scalar_checks {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                push(ViolationKind::NonFinite, (i, 0), v, format!("{name}[{i}] is not finite"));
            } else if !ok(v) {
                push(kind.clone(), (i, 0), v, format!("{name}[{i}] = {v} out of range"));
            }
        }
    }
    for (i, c) in instance.costs.iter().enumerate() {
        for (v, kind, name, ok) in [
            (c.eta, ViolationKind::NonPositiveEta, "eta", c.eta > 0.0),
            (c.gamma_cost, ViolationKind::NonPositiveGamma, "gamma_cost", c.gamma_cost > 0.0),
            (c.d, ViolationKind::NegativeLatency, "d", c.d >= 0.0),
        ] {
            if !v.is_finite() {
                push(ViolationKind::NonFinite, (i, 0), v, format!("{name}[{i}] is not finite"));
            } else if !ok {
                push(kind, (i, 0), v, format!("{name}[{i}] = {v} out of range"));
            }
        }
    }
    ValidationReport { violations: out }
}

/// `B = Cᵀ diag(A)`, i.e. `B_ij = C_ji A_j`.
pub fn routing_matrix(instance: &SystemInstance) -> Matrix {
    let n = instance.n();
    let mut b = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = instance.corr[(j, i)] * instance.arrivals[j];
        }
    }
    b
}

/// Proxy loads `S = B x`.
pub fn compute_load(instance: &SystemInstance, x: &[f64]) -> Vec<f64> {
    routing_matrix(instance).mul_vec(x)
}

/// `Σ_j C_ji A_j`, the load proxy `i` would see if every node kept all traffic.
pub fn max_load(instance: &SystemInstance) -> Vec<f64> {
    compute_load(instance, &vec![1.0; instance.n()])
}

/// Rejects vectors that are not valid offload states.
pub fn check_offload_state(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Dimension {
            what: "offload state",
            got: x.len(),
            expected: n,
        });
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("x[{i}] = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// On-disk instance layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub corr: Vec<Vec<f64>>,
    pub arrivals: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma_cost: Vec<f64>,
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// Rows that were rescaled during ingestion: `(row, original sum)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rescaled_rows: Vec<(usize, f64)>,
}

impl InstanceFile {
    pub fn from_instance(instance: &SystemInstance, metadata: Option<serde_json::Value>) -> Self {
        let c = instance.costs();
        Self {
            n: instance.n(),
            corr: instance.corr().to_rows(),
            arrivals: instance.arrivals().to_vec(),
            thresholds: instance.thresholds().to_vec(),
            eta: c.iter().map(|c| c.eta).collect(),
            gamma_cost: c.iter().map(|c| c.gamma_cost).collect(),
            d: c.iter().map(|c| c.d).collect(),
            metadata,
        }
    }

    /// Converts to an instance, rescaling rows whose sums are within
    /// [`INGEST_ROW_SUM_TOL`] of 1. The result is validated.
    pub fn into_instance(self) -> Result<(SystemInstance, IngestReport)> {
        if self.corr.len() != self.n {
            return Err(Error::Dimension {
                what: "corr",
                got: self.corr.len(),
                expected: self.n,
            });
        }
        for (what, len) in [
            ("eta", self.eta.len()),
            ("gamma_cost", self.gamma_cost.len()),
            ("d", self.d.len()),
        ] {
            if len != self.n {
                return Err(Error::Dimension {
                    what,
                    got: len,
                    expected: self.n,
                });
            }
        }
        let mut corr = Matrix::from_rows(&self.corr)?;
        let mut report = IngestReport::default();
        for i in 0..self.n {
            let row = corr.row_mut(i);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL && (sum - 1.0).abs() <= INGEST_ROW_SUM_TOL {
                row.iter_mut().for_each(|c| *c /= sum);
                report.rescaled_rows.push((i, sum));
            }
        }
        let costs = (0..self.n)
            .map(|i| NodeCost {
                eta: self.eta[i],
                gamma_cost: self.gamma_cost[i],
                d: self.d[i],
            })
            .collect();
        let inst = SystemInstance::validated(corr, self.arrivals, self.thresholds, costs)?;
        Ok((inst, report))
    }
}

pub fn instance_from_json(text: &str) -> Result<(SystemInstance, IngestReport)> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(e.to_string()))?;
    file.into_instance()
}

pub fn instance_to_json(instance: &SystemInstance, metadata: Option<serde_json::Value>) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance, metadata)).expect("instance serializes")
}
