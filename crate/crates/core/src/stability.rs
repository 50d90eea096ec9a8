//! Stability analysis of the greedy dynamics.
//!
//! Covers the overload polytope `Π_C = {A ≥ 0 : Σ_{j≠i} C_ji A_j ≤ T_i}`, the
//! analytic Jacobian of the greedy vector field, local classification of fixed
//! points, the closed-form two-node results and the Dulac divergence that rules
//! out periodic orbits in the plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{routing_matrix, Matrix, SystemInstance};
use crate::numeric::fsum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolytopeReport {
    pub contained: bool,
    /// `T_i - Σ_{j≠i} C_ji A_j`.
    pub slack: Vec<f64>,
}

/// Membership of the arrival vector in `Π_C`, with per-node slack.
pub fn polytope_contains(instance: &SystemInstance) -> PolytopeReport {
    let slack: Vec<f64> = (0..instance.n()).map(|i| node_slack(instance, i)).collect();
    PolytopeReport {
        contained: slack.iter().all(|s| *s >= 0.0),
        slack,
    }
}

fn node_slack(instance: &SystemInstance, k: usize) -> f64 {
    let c = instance.corr();
    let a = instance.arrivals();
    let inflow = fsum((0..instance.n()).filter(|&j| j != k).map(|j| c[(j, k)] * a[j]));
    instance.thresholds()[k] - inflow
}

/// `Σ_{j≠k} C_jk A_j ≤ T_k`: node `k` cannot be driven into uncontrollable overload.
pub fn node_sufficient_condition(instance: &SystemInstance, k: usize) -> bool {
    node_slack(instance, k) >= 0.0
}

/// Jacobian of `F(x) = -β R(x) ∘ (B x - T)`:
/// `J_ij = -β x_i (1 - x_i) B_ij` off the diagonal and
/// `J_ii = -β (x_i (1 - x_i) B_ii + (1 - 2 x_i)(S_i - T_i))`.
pub fn jacobian_at(instance: &SystemInstance, x: &[f64], sensitivity: f64) -> Matrix {
    let n = instance.n();
    let b = routing_matrix(instance);
    let s = b.mul_vec(x);
    let mut j = Matrix::zeros(n);
    for i in 0..n {
        let r = x[i] * (1.0 - x[i]);
        for k in 0..n {
            j[(i, k)] = -sensitivity * r * b[(i, k)];
        }
        j[(i, i)] -= sensitivity * (1.0 - 2.0 * x[i]) * (s[i] - instance.thresholds()[i]);
    }
    j
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// Eigenvalues of a 2×2 matrix from the characteristic polynomial.
pub fn eigenvalues_2x2(m: &Matrix) -> [Eigenvalue; 2] {
    assert_eq!(m.dim(), 2);
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Eigenvalue { re: half_tr + r, im: 0.0 },
            Eigenvalue { re: half_tr - r, im: 0.0 },
        ]
    } else {
        let r = (-disc).sqrt();
        [Eigenvalue { re: half_tr, im: r }, Eigenvalue { re: half_tr, im: -r }]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LocalVerdict {
    Stable,
    Unstable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointAnalysis {
    pub label: String,
    pub point: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
    /// Available when the Jacobian is triangular or `n = 2`.
    pub eigenvalues: Option<Vec<Eigenvalue>>,
    pub verdict: LocalVerdict,
}

fn is_triangular(m: &Matrix) -> bool {
    let n = m.dim();
    let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == 0.0));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == 0.0));
    upper || lower
}

/// Linearized stability of `x` from the analytic Jacobian.
pub fn analyze_fixed_point(instance: &SystemInstance, x: &[f64], sensitivity: f64, label: &str) -> FixedPointAnalysis {
    let j = jacobian_at(instance, x, sensitivity);
    let eigenvalues: Option<Vec<Eigenvalue>> = if is_triangular(&j) {
        Some((0..j.dim()).map(|i| Eigenvalue { re: j[(i, i)], im: 0.0 }).collect())
    } else if j.dim() == 2 {
        Some(eigenvalues_2x2(&j).to_vec())
    } else {
        None
    };
    let verdict = match &eigenvalues {
        Some(ev) if ev.iter().any(|e| e.re > 0.0) => LocalVerdict::Unstable,
        Some(ev) if ev.iter().all(|e| e.re < 0.0) => LocalVerdict::Stable,
        _ => LocalVerdict::Indeterminate,
    };
    FixedPointAnalysis {
        label: label.to_string(),
        point: x.to_vec(),
        jacobian: j.to_rows(),
        eigenvalues,
        verdict,
    }
}

/// Self-correlations of a two-node correlation matrix `((α, 1-α), (1-β, β))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoNodeParams {
    pub alpha: f64,
    pub beta_corr: f64,
}

impl TwoNodeParams {
    pub fn new(alpha: f64, beta_corr: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&beta_corr)) {
            return Err(Error::InvalidArgument(format!(
                "self-correlations must lie in [0, 1], got ({alpha}, {beta_corr})"
            )));
        }
        Ok(Self { alpha, beta_corr })
    }

    pub fn from_instance(instance: &SystemInstance) -> Result<Self> {
        if instance.n() != 2 {
            return Err(Error::Unsupported(format!("two-node analysis needs n = 2, got n = {}", instance.n())));
        }
        Self::new(instance.corr()[(0, 0)], instance.corr()[(1, 1)])
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        vec![vec![self.alpha, 1.0 - self.alpha], vec![1.0 - self.beta_corr, self.beta_corr]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TwoNodeClass {
    ControllableAllA,
    ControllableIf {
        /// Strict upper bounds on `(A_1, A_2)`.
        bounds: [f64; 2],
        satisfied: bool,
    },
    Indeterminate,
}

/// Both self-correlations above one half: controllable for every arrival pair.
/// Both below: controllable whenever `A_1 < T_2/(1-α)` and `A_2 < T_1/(1-β)`,
/// i.e. neither node's spill-over alone exceeds the other's threshold.
pub fn two_node_classify(params: TwoNodeParams, a: [f64; 2], t: [f64; 2]) -> TwoNodeClass {
    let (al, be) = (params.alpha, params.beta_corr);
    if al > 0.5 && be > 0.5 {
        TwoNodeClass::ControllableAllA
    } else if al < 0.5 && be < 0.5 {
        let bounds = [t[1] / (1.0 - al), t[0] / (1.0 - be)];
        TwoNodeClass::ControllableIf {
            bounds,
            satisfied: a[0] < bounds[0] && a[1] < bounds[1],
        }
    } else {
        TwoNodeClass::Indeterminate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryPoint {
    /// `x = (0, 1)`.
    ZeroOne,
    /// `x = (1, 0)`.
    OneZero,
    /// `x_1 = 0`, `S_2 = T_2`.
    ZeroBalanced,
    /// `S_1 = T_1`, `x_2 = 0`.
    BalancedZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityWindow {
    pub point: BoundaryPoint,
    /// Which arrival rate the window constrains (0 or 1).
    pub arrival: usize,
    /// Open interval of arrival rates on which the point is a stable attractor;
    /// `None` when no arrival rate makes it stable.
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WindowMembership {
    Inside,
    Boundary,
    Outside,
}

impl StabilityWindow {
    pub fn membership(&self, a: [f64; 2]) -> WindowMembership {
        let v = a[self.arrival];
        match self.interval {
            None => WindowMembership::Outside,
            Some((lo, hi)) if v > lo && v < hi => WindowMembership::Inside,
            Some((lo, hi)) if v == lo || v == hi => WindowMembership::Boundary,
            Some(_) => WindowMembership::Outside,
        }
    }
}

fn open_interval(lo: f64, hi: f64) -> Option<(f64, f64)> {
    (lo < hi).then_some((lo, hi))
}

/// Arrival-rate windows in which each undesirable boundary fixed point is a
/// stable attractor, for `C = ((α, 1-α), (1-β, β))`:
///
/// * `(0, 1)`: `S_1 = (1-β) A_2 > T_1` and `S_2 = β A_2 < T_2`.
/// * `(1, 0)`: `S_2 = (1-α) A_1 > T_2` and `S_1 = α A_1 < T_1`.
/// * `(0, T_2/(β A_2))`: feasible for `A_2 > T_2/β`; stable iff `(1-β) T_2/β > T_1`.
/// * `(T_1/(α A_1), 0)`: feasible for `A_1 > T_1/α`; stable iff `(1-α) T_1/α > T_2`.
pub fn two_node_fixed_point_windows(params: TwoNodeParams, t: [f64; 2]) -> [StabilityWindow; 4] {
    let (al, be) = (params.alpha, params.beta_corr);
    let mixed = |own_t: f64, own_c: f64, other_t: f64| {
        if own_c > 0.0 && (1.0 - own_c) * own_t / own_c > other_t {
            Some((own_t / own_c, f64::INFINITY))
        } else {
            None
        }
    };
    [
        StabilityWindow {
            point: BoundaryPoint::ZeroOne,
            arrival: 1,
            interval: open_interval(t[0] / (1.0 - be), t[1] / be),
        },
        StabilityWindow {
            point: BoundaryPoint::OneZero,
            arrival: 0,
            interval: open_interval(t[1] / (1.0 - al), t[0] / al),
        },
        StabilityWindow {
            point: BoundaryPoint::ZeroBalanced,
            arrival: 1,
            interval: mixed(t[1], be, t[0]),
        },
        StabilityWindow {
            point: BoundaryPoint::BalancedZero,
            arrival: 0,
            interval: mixed(t[0], al, t[1]),
        },
    ]
}

/// Coordinates of a boundary fixed point for the given arrivals, if it lies in the square.
pub fn boundary_point_location(point: BoundaryPoint, params: TwoNodeParams, a: [f64; 2], t: [f64; 2]) -> Option<[f64; 2]> {
    let in_open = |v: f64| v > 0.0 && v < 1.0;
    match point {
        BoundaryPoint::ZeroOne => Some([0.0, 1.0]),
        BoundaryPoint::OneZero => Some([1.0, 0.0]),
        BoundaryPoint::ZeroBalanced => {
            let x2 = t[1] / (a[1] * params.beta_corr);
            in_open(x2).then_some([0.0, x2])
        }
        BoundaryPoint::BalancedZero => {
            let x1 = t[0] / (a[0] * params.alpha);
            in_open(x1).then_some([x1, 0.0])
        }
    }
}

/// `∇·(g F)` with `g = 1/(x_1 x_2 (1-x_1)(1-x_2))`:
/// `-β (B_11/(x_2(1-x_2)) + B_22/(x_1(1-x_1)))`.
pub fn dulac_divergence(instance: &SystemInstance, x: &[f64], sensitivity: f64) -> Result<f64> {
    if instance.n() != 2 {
        return Err(Error::Unsupported(format!("Dulac divergence needs n = 2, got n = {}", instance.n())));
    }
    if x.len() != 2 {
        return Err(Error::Dimension {
            what: "x",
            got: x.len(),
            expected: 2,
        });
    }
    for (index, &value) in x.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::BoundaryStart { index, value });
        }
    }
    let b = routing_matrix(instance);
    Ok(-sensitivity * (b[(0, 0)] / (x[1] * (1.0 - x[1])) + b[(1, 1)] / (x[0] * (1.0 - x[0]))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub group1: Vec<usize>,
    pub group2: Vec<usize>,
    /// `Σ_{i,j ∈ G1} C_ij / |G1|`.
    pub alpha_g1: f64,
    /// `Σ_{i,j ∈ G2} C_ij / |G2|`.
    pub beta_g2: f64,
    /// Both block self-correlations strictly above one half.
    pub controllable_all_symmetric: bool,
}

/// Block-averaged self-correlations of a two-group partition.
pub fn effective_self_correlation(instance: &SystemInstance, g1: &[usize], g2: &[usize]) -> Result<PartitionReport> {
    let n = instance.n();
    let mut seen = vec![false; n];
    for &i in g1.iter().chain(g2) {
        if i >= n {
            return Err(Error::InvalidArgument(format!("node {i} out of range for n = {n}")));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!("node {i} appears twice in the partition")));
        }
        seen[i] = true;
    }
    if g1.is_empty() || g2.is_empty() || seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument(
            "partition groups must be nonempty, disjoint and cover every node".into(),
        ));
    }
    let c = instance.corr();
    let block = |g: &[usize]| fsum(g.iter().flat_map(|&i| g.iter().map(move |&j| c[(i, j)]))) / g.len() as f64;
    let (alpha_g1, beta_g2) = (block(g1), block(g2));
    Ok(PartitionReport {
        group1: g1.to_vec(),
        group2: g2.to_vec(),
        alpha_g1,
        beta_g2,
        controllable_all_symmetric: alpha_g1 > 0.5 && beta_g2 > 0.5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoNodeReport {
    pub params: TwoNodeParams,
    pub class: TwoNodeClass,
    pub windows: Vec<StabilityWindow>,
    /// Membership of the instance's arrivals in each window.
    pub membership: Vec<WindowMembership>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n: usize,
    pub polytope: PolytopeReport,
    pub node_conditions: Vec<bool>,
    pub two_node: Option<TwoNodeReport>,
    pub fixed_points: Vec<FixedPointAnalysis>,
    pub partition: Option<PartitionReport>,
}

/// Fixed points of the two-node field that lie in the closed unit square.
pub fn two_node_fixed_points(instance: &SystemInstance) -> Vec<(String, Vec<f64>)> {
    let b = routing_matrix(instance);
    let t = instance.thresholds();
    let mut out: Vec<(String, Vec<f64>)> = vec![
        ("vertex (0,0)".into(), vec![0.0, 0.0]),
        ("vertex (0,1)".into(), vec![0.0, 1.0]),
        ("vertex (1,0)".into(), vec![1.0, 0.0]),
        ("vertex (1,1)".into(), vec![1.0, 1.0]),
    ];
    let inside = |v: f64| v > 0.0 && v < 1.0;
    // One coordinate pinned to a face, the other balancing its own load.
    for (fixed, free) in [(0usize, 1usize), (1, 0)] {
        for face in [0.0, 1.0] {
            if b[(free, free)] > 0.0 {
                let v = (t[free] - b[(free, fixed)] * face) / b[(free, free)];
                if inside(v) {
                    let mut p = vec![0.0; 2];
                    p[fixed] = face;
                    p[free] = v;
                    out.push((format!("x_{} = {face}, S_{} = T_{}", fixed + 1, free + 1, free + 1), p));
                }
            }
        }
    }
    let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    if det != 0.0 {
        let x1 = (t[0] * b[(1, 1)] - b[(0, 1)] * t[1]) / det;
        let x2 = (b[(0, 0)] * t[1] - b[(1, 0)] * t[0]) / det;
        if inside(x1) && inside(x2) {
            out.push(("interior S = T".into(), vec![x1, x2]));
        }
    }
    out
}

/// Full report: polytope, per-node conditions, and for `n = 2` the
/// classification, windows and fixed-point analyses.
pub fn analyze(instance: &SystemInstance, sensitivity: f64, partition: Option<(&[usize], &[usize])>) -> Result<StabilityReport> {
    let n = instance.n();
    let polytope = polytope_contains(instance);
    let node_conditions = (0..n).map(|k| node_sufficient_condition(instance, k)).collect();
    let partition = partition.map(|(g1, g2)| effective_self_correlation(instance, g1, g2)).transpose()?;
    let (two_node, fixed_points) = if n == 2 {
        let params = TwoNodeParams::from_instance(instance)?;
        let a = [instance.arrivals()[0], instance.arrivals()[1]];
        let t = [instance.thresholds()[0], instance.thresholds()[1]];
        let windows = two_node_fixed_point_windows(params, t);
        let fps = two_node_fixed_points(instance)
            .into_iter()
            .map(|(label, p)| analyze_fixed_point(instance, &p, sensitivity, &label))
            .collect();
        (
            Some(TwoNodeReport {
                params,
                class: two_node_classify(params, a, t),
                membership: windows.iter().map(|w| w.membership(a)).collect(),
                windows: windows.to_vec(),
            }),
            fps,
        )
    } else {
        let ones = vec![1.0; n];
        let zeros = vec![0.0; n];
        (
            None,
            vec![
                analyze_fixed_point(instance, &zeros, sensitivity, "vertex 0"),
                analyze_fixed_point(instance, &ones, sensitivity, "vertex 1"),
            ],
        )
    };
    Ok(StabilityReport {
        n,
        polytope,
        node_conditions,
        two_node,
        fixed_points,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{greedy_derivative, integrate, GreedyConfig};
    use crate::model::tests::two_node_example;
    use crate::model::{compute_load, NodeCost};
    use proptest::prelude::*;

    fn two(alpha: f64, beta: f64, a: [f64; 2], t: [f64; 2]) -> SystemInstance {
        SystemInstance::uniform_costs(&TwoNodeParams { alpha, beta_corr: beta }.rows(), &a, &t, NodeCost::default()).unwrap()
    }

    #[test]
    fn polytope_examples() {
        let fig = two_node_example();
        let r = polytope_contains(&fig);
        assert!(!r.contained);
        assert!((r.slack[1] + 0.2).abs() < 1e-12);
        assert!((r.slack[0] - 0.2).abs() < 1e-12);
        assert!(node_sufficient_condition(&fig, 0));
        assert!(!node_sufficient_condition(&fig, 1));

        let zero = fig.with_arrivals(vec![0.0, 0.0]).unwrap();
        let r = polytope_contains(&zero);
        assert!(r.contained);
        assert_eq!(r.slack, vec![0.7, 0.7]);
        assert!((0..2).all(|k| node_sufficient_condition(&zero, k)));

        let r = polytope_contains(&two(0.8, 0.8, [1.0, 1.0], [0.7, 0.7]));
        assert!(r.contained);
        assert!(r.slack.iter().all(|s| (s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn jacobian_examples() {
        let fig = two_node_example();
        // Row of a node at x_k = 0 is diagonal with entry -(S_k - T_k).
        let x = [0.3, 0.0];
        let j = jacobian_at(&fig, &x, 1.0);
        let s = compute_load(&fig, &x);
        assert_eq!(j[(1, 0)], 0.0);
        assert!((j[(1, 1)] + (s[1] - 0.7)).abs() < 1e-15);

        let i = two(0.8, 0.8, [5.0, 5.0], [0.7, 0.7]);
        let x = [0.14, 0.14];
        let j = jacobian_at(&i, &x, 1.0);
        let b = routing_matrix(&i);
        for r in 0..2 {
            for c in 0..2 {
                assert!((j[(r, c)] + 0.14 * 0.86 * b[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_closed_form() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = eigenvalues_2x2(&m);
        assert_eq!((ev[0].re, ev[1].re), (3.0, 1.0));
        let rot = Matrix::from_rows(&[vec![-1.0, -2.0], vec![2.0, -1.0]]).unwrap();
        let ev = eigenvalues_2x2(&rot);
        assert_eq!((ev[0].re, ev[0].im.abs()), (-1.0, 2.0));
    }

    #[test]
    fn classify_examples() {
        let p = TwoNodeParams::new(0.8, 0.8).unwrap();
        assert_eq!(two_node_classify(p, [1e6, 3.0], [0.7, 0.7]), TwoNodeClass::ControllableAllA);
        let p = TwoNodeParams::new(0.3, 0.3).unwrap();
        match two_node_classify(p, [0.9, 0.9], [0.7, 0.7]) {
            TwoNodeClass::ControllableIf { bounds, satisfied } => {
                assert!((bounds[0] - 1.0).abs() < 1e-15 && (bounds[1] - 1.0).abs() < 1e-15);
                assert!(satisfied);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            two_node_classify(p, [1.5, 0.5], [0.7, 0.7]),
            TwoNodeClass::ControllableIf { satisfied: false, .. }
        ));
        let p = TwoNodeParams::new(0.5, 0.5).unwrap();
        assert_eq!(two_node_classify(p, [1.0, 1.0], [0.7, 0.7]), TwoNodeClass::Indeterminate);
        assert!(TwoNodeParams::new(1.2, 0.5).is_err());
    }

    #[test]
    fn windows_examples() {
        let w = two_node_fixed_point_windows(TwoNodeParams::new(0.8, 0.8).unwrap(), [0.7, 0.7]);
        assert!(w.iter().all(|w| w.interval.is_none()));

        // (0,1) needs (1-β) A_2 > T_1 and β A_2 < T_2.
        let w = two_node_fixed_point_windows(TwoNodeParams::new(0.1, 0.3).unwrap(), [0.7, 0.7]);
        let (lo, hi) = w[0].interval.unwrap();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 0.7 / 0.3).abs() < 1e-15);
        // β = 1/2 closes the (0,1) window for symmetric thresholds.
        let w = two_node_fixed_point_windows(TwoNodeParams::new(0.1, 0.5).unwrap(), [0.7, 0.7]);
        assert!(w[0].interval.is_none());
        let (lo, hi) = w[1].interval.unwrap();
        assert!((lo - 0.7 / 0.9).abs() < 1e-15 && (hi - 7.0).abs() < 1e-12);

        // Mixed point: β < 1/2 and A_2 > T/β.
        let w = two_node_fixed_point_windows(TwoNodeParams::new(0.6, 0.3).unwrap(), [0.7, 0.7]);
        assert_eq!(w[2].interval, Some((0.7 / 0.3, f64::INFINITY)));
        assert_eq!(w[2].membership([1.0, 3.0]), WindowMembership::Inside);
        assert_eq!(w[2].membership([1.0, 2.0]), WindowMembership::Outside);
        assert_eq!(w[2].membership([1.0, 0.7 / 0.3]), WindowMembership::Boundary);
        assert!(w[3].interval.is_none());
    }

    #[test]
    fn window_points_are_stable_attractors() {
        let p = TwoNodeParams::new(0.1, 0.3).unwrap();
        let t = [0.7, 0.7];
        // A_2 = 1.5 is inside (1, 2.33): (0,1) attracts a nearby start.
        let i = two(0.1, 0.3, [0.5, 1.5], t);
        let fp = analyze_fixed_point(&i, &[0.0, 1.0], 1.0, "");
        assert_eq!(fp.verdict, LocalVerdict::Stable);
        let cfg = GreedyConfig::default();
        let tr = integrate(&i, &[0.01, 0.99], &cfg).unwrap();
        assert!(tr.final_x()[0] < 1e-3 && tr.final_x()[1] > 1.0 - 1e-3);
        // Outside the window the vertex repels.
        let i = two(0.1, 0.3, [0.5, 0.8], t);
        assert_eq!(analyze_fixed_point(&i, &[0.0, 1.0], 1.0, "").verdict, LocalVerdict::Unstable);
        assert_eq!(two_node_fixed_point_windows(p, t)[0].membership([0.5, 0.8]), WindowMembership::Outside);
        // The swapped index form (T/(1-α) < A_2) would put A_2 = 1.0 inside for α = 0.1,
        // β = 0.5, yet node 1 sees S_1 = 0.5 < T and pushes x_1 off zero.
        let i = two(0.1, 0.5, [0.5, 1.0], t);
        assert_eq!(analyze_fixed_point(&i, &[0.0, 1.0], 1.0, "").verdict, LocalVerdict::Unstable);
    }

    #[test]
    fn mixed_point_is_stable_inside_window() {
        let p = TwoNodeParams::new(0.6, 0.3).unwrap();
        let (a, t) = ([1.0, 4.0], [0.7, 0.7]);
        let loc = boundary_point_location(BoundaryPoint::ZeroBalanced, p, a, t).unwrap();
        assert!((loc[1] - 0.7 / 1.2).abs() < 1e-15);
        let i = two(0.6, 0.3, a, t);
        assert_eq!(analyze_fixed_point(&i, &loc, 1.0, "").verdict, LocalVerdict::Stable);
        assert!(boundary_point_location(BoundaryPoint::ZeroBalanced, p, [1.0, 2.0], t).is_none());
    }

    #[test]
    fn dulac_examples() {
        let i = two(0.8, 0.8, [5.0, 5.0], [0.7, 0.7]);
        assert_eq!(dulac_divergence(&i, &[0.5, 0.5], 1.0).unwrap(), -32.0);
        let i = two(0.5, 0.5, [2.0, 2.0], [0.7, 0.7]);
        assert_eq!(dulac_divergence(&i, &[0.5, 0.5], 1.0).unwrap(), -8.0);
        assert!(dulac_divergence(&i, &[0.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn partition_examples() {
        let fig = two_node_example();
        let r = effective_self_correlation(&fig, &[0], &[1]).unwrap();
        assert_eq!((r.alpha_g1, r.beta_g2), (0.1, 0.5));
        assert!(!r.controllable_all_symmetric);

        let rows = vec![
            vec![0.35, 0.35, 0.15, 0.15],
            vec![0.35, 0.35, 0.15, 0.15],
            vec![0.15, 0.15, 0.35, 0.35],
            vec![0.15, 0.15, 0.35, 0.35],
        ];
        let i = SystemInstance::uniform_costs(&rows, &[1.0; 4], &[0.7; 4], NodeCost::default()).unwrap();
        let r = effective_self_correlation(&i, &[0, 1], &[2, 3]).unwrap();
        assert!((r.alpha_g1 - 0.7).abs() < 1e-15 && (r.beta_g2 - 0.7).abs() < 1e-15);
        assert!(r.controllable_all_symmetric);

        let u = SystemInstance::uniform_costs(&vec![vec![0.25; 4]; 4], &[1.0; 4], &[0.7; 4], NodeCost::default()).unwrap();
        let r = effective_self_correlation(&u, &[0, 1], &[2, 3]).unwrap();
        assert_eq!((r.alpha_g1, r.beta_g2), (0.5, 0.5));
        assert!(!r.controllable_all_symmetric);

        assert!(effective_self_correlation(&u, &[0, 1], &[1, 2, 3]).is_err());
        assert!(effective_self_correlation(&u, &[0, 1], &[2]).is_err());
        assert!(effective_self_correlation(&u, &[], &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn analyze_reports() {
        let r = analyze(&two_node_example(), 1.0, None).unwrap();
        assert!(!r.polytope.contained);
        assert!(r.two_node.is_some());
        let stable_bad: Vec<_> = r
            .fixed_points
            .iter()
            .filter(|f| f.verdict == LocalVerdict::Stable)
            .map(|f| f.point.clone())
            .collect();
        assert_eq!(stable_bad, vec![vec![1.0, 0.0]]);

        let r = analyze(&two(0.8, 0.8, [1.0, 1.0], [0.7, 0.7]), 1.0, None).unwrap();
        assert_eq!(r.two_node.unwrap().class, TwoNodeClass::ControllableAllA);
        let json = serde_json::to_value(analyze(&two_node_example(), 1.0, Some((&[0], &[1]))).unwrap()).unwrap();
        assert_eq!(json["polytope"]["contained"], false);
        assert!(json["partition"]["alpha_g1"].is_number());
    }

    proptest! {
        #[test]
        fn polytope_equals_node_conditions(
            a in prop::collection::vec(0.0f64..5.0, 3),
            w in prop::collection::vec(0.05f64..1.0, 9),
        ) {
            let rows: Vec<Vec<f64>> = w.chunks(3).map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            }).collect();
            let i = SystemInstance::uniform_costs(&rows, &a, &[0.7; 3], NodeCost::default()).unwrap();
            let all = (0..3).all(|k| node_sufficient_condition(&i, k));
            prop_assert_eq!(polytope_contains(&i).contained, all);
        }

        #[test]
        fn dulac_sign(
            alpha in 0.01f64..1.0, beta in 0.01f64..1.0,
            a1 in 0.01f64..20.0, a2 in 0.01f64..20.0,
            x1 in 0.001f64..0.999, x2 in 0.001f64..0.999,
        ) {
            let i = two(alpha, beta, [a1, a2], [0.7, 0.7]);
            prop_assert!(dulac_divergence(&i, &[x1, x2], 1.0).unwrap() < 0.0);
        }

        #[test]
        fn jacobian_of_vertex_is_diagonal(bits in prop::collection::vec(any::<bool>(), 2), a in 0.0f64..10.0) {
            let i = two(0.3, 0.6, [a, a], [0.7, 0.7]);
            let x: Vec<f64> = bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
            let j = jacobian_at(&i, &x, 1.0);
            prop_assert_eq!(j[(0, 1)], 0.0);
            prop_assert_eq!(j[(1, 0)], 0.0);
            prop_assert!(greedy_derivative(&i, &x, 1.0).iter().all(|v| *v == 0.0));
        }
    }
}
