//! Discrete optimal transport: cost matrices, couplings, and solvers.
//!
//! Costs default to the quadratic form `0.5 * ||x - y||^2`. Semi-supervision
//! enters through the cost matrix: where both endpoints carry labels, the
//! entry becomes `0` for matching labels and a large finite penalty
//! otherwise, which forbids cross-label mass to solver tolerance while
//! keeping the linear program bounded and the scaling kernels nonzero.

mod emd;
mod otlin;
mod sinkhorn;

pub use emd::solve_emd;
pub use otlin::{solve_otlin, solve_otlin_guided, LinearMap, OtLinSolution};
pub use sinkhorn::{solve_sinkhorn, solve_sinkhorn_l1l2, solve_sinkhorn_lpl1};

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Marginal slack accepted by the [`Coupling`] invariant (L1).
pub const MARGINAL_TOL: f64 = 1e-6;

/// Default Sinkhorn iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Default Sinkhorn marginal tolerance.
pub const DEFAULT_SINKHORN_TOL: f64 = 1e-9;

/// Default outer iterations for the regularized variants.
pub const DEFAULT_OUTER_ITER: usize = 10;

/// Label penalty as a multiple of the largest base cost.
pub const PENALTY_FACTOR: f64 = 1e6;

/// What a cost matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostTag {
    /// `0.5 * ||x - y||^2`
    HalfSqEuclidean,
    /// `||x - y||^p`
    EuclideanPower(f64),
    /// Produced internally (e.g. map-dependent costs).
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    None,
    Labeled { penalty: f64 },
}

/// Nonnegative, finite `n x m` cost matrix plus provenance metadata.
#[derive(Debug, Clone)]
pub struct CostMatrix<F: Scalar> {
    matrix: Array2<F>,
    tag: CostTag,
    penalty: PenaltyMode,
}

impl<F: Scalar> CostMatrix<F> {
    pub fn new(matrix: Array2<F>, tag: CostTag, penalty: PenaltyMode) -> Result<Self> {
        for &v in matrix.iter() {
            if !(v >= F::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "cost entries must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            matrix,
            tag,
            penalty,
        })
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn tag(&self) -> CostTag {
        self.tag
    }

    pub fn penalty(&self) -> PenaltyMode {
        self.penalty
    }

    pub fn max_entry(&self) -> F {
        self.matrix
            .iter()
            .copied()
            .fold(F::zero(), |acc, v| acc.max(v))
    }

    /// Same metadata, entries scaled by `s > 0`.
    pub fn scaled(&self, s: F) -> Result<Self> {
        if !(s > F::zero()) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        Self::new(self.matrix.mapv(|v| v * s), self.tag, self.penalty)
    }
}

fn half_sq_euclidean<F: Scalar>(x: &Array2<F>, y: &Array2<F>) -> Result<Array2<F>> {
    if x.ncols() != y.ncols() {
        return Err(Error::InvalidParameter(format!(
            "point dimensions differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let mut out = Array2::zeros((x.nrows(), y.nrows()));
    for (i, xi) in x.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            let mut sum = F::zero();
            for (a, b) in xi.iter().zip(yj.iter()) {
                let d = *a - *b;
                sum += d * d;
            }
            out[(i, j)] = sum / F::cast(2.0);
        }
    }
    Ok(out)
}

/// Quadratic base cost `0.5 * ||x_i - y_j||^2` with optional label
/// penalization: where both row `i` and column `j` are labeled, the entry is
/// replaced by `0` (labels equal) or `penalty` (labels differ). `penalty`
/// must exceed the largest base cost whenever both label sets are supplied.
pub fn build_cost<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    x_labels: Option<&[Option<usize>]>,
    y_labels: Option<&[Option<usize>]>,
    penalty: F,
) -> Result<CostMatrix<F>> {
    let mut matrix = half_sq_euclidean(x, y)?;
    let (Some(xl), Some(yl)) = (x_labels, y_labels) else {
        return CostMatrix::new(matrix, CostTag::HalfSqEuclidean, PenaltyMode::None);
    };
    if xl.len() != x.nrows() || yl.len() != y.nrows() {
        return Err(Error::InvalidParameter(
            "label slices must match point counts".into(),
        ));
    }
    let max_base = matrix
        .iter()
        .copied()
        .fold(F::zero(), |acc, v| acc.max(v));
    if !(penalty > max_base) {
        return Err(Error::InvalidParameter(format!(
            "label penalty {penalty} must exceed the maximum base cost {max_base}"
        )));
    }
    for (i, li) in xl.iter().enumerate() {
        let Some(ci) = li else { continue };
        for (j, lj) in yl.iter().enumerate() {
            let Some(cj) = lj else { continue };
            matrix[(i, j)] = if ci == cj { F::zero() } else { penalty };
        }
    }
    CostMatrix::new(
        matrix,
        CostTag::HalfSqEuclidean,
        PenaltyMode::Labeled {
            penalty: penalty.as_f64(),
        },
    )
}

/// Default penalty for [`build_cost`]: `1e6` times the largest base cost
/// between the two point sets (with a unit floor for degenerate zero-cost
/// instances).
pub fn default_label_penalty<F: Scalar>(x: &Array2<F>, y: &Array2<F>) -> Result<F> {
    let base = half_sq_euclidean(x, y)?;
    let max_base = base.iter().copied().fold(F::zero(), |acc, v| acc.max(v));
    if max_base == F::zero() {
        return Ok(F::one());
    }
    Ok(max_base * F::cast(PENALTY_FACTOR))
}

/// Power cost `||x_i - y_j||^p` (the form Wasserstein distances are defined
/// over).
pub fn build_cost_power<F: Scalar>(x: &Array2<F>, y: &Array2<F>, p: f64) -> Result<CostMatrix<F>> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "power cost requires p >= 1, got {p}"
        )));
    }
    let mut matrix = half_sq_euclidean(x, y)?;
    matrix.mapv_inplace(|half_sq| {
        let dist = (half_sq.as_f64() * 2.0).sqrt();
        F::cast(dist.powf(p))
    });
    CostMatrix::new(matrix, CostTag::EuclideanPower(p), PenaltyMode::None)
}

/// Transport plan with its prescribed marginals. Construction checks
/// nonnegativity and that row/column sums match the marginals within
/// [`MARGINAL_TOL`] in L1.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<F: Scalar> {
    matrix: Array2<F>,
    row_marginal: Array1<F>,
    col_marginal: Array1<F>,
}

impl<F: Scalar> Coupling<F> {
    pub fn new(matrix: Array2<F>, row_marginal: Array1<F>, col_marginal: Array1<F>) -> Result<Self> {
        if matrix.nrows() != row_marginal.len() || matrix.ncols() != col_marginal.len() {
            return Err(Error::InvalidParameter(format!(
                "coupling shape {:?} does not match marginals ({}, {})",
                matrix.dim(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        if matrix.iter().any(|&v| !(v >= F::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "coupling entries must be finite and nonnegative".into(),
            ));
        }
        let row_err = l1_gap(&matrix.sum_axis(Axis(1)), &row_marginal);
        let col_err = l1_gap(&matrix.sum_axis(Axis(0)), &col_marginal);
        if row_err > MARGINAL_TOL || col_err > MARGINAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "coupling marginals off by L1 {row_err:.3e} / {col_err:.3e}, tolerance {MARGINAL_TOL}"
            )));
        }
        Ok(Self {
            matrix,
            row_marginal,
            col_marginal,
        })
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.matrix
    }

    pub fn row_marginal(&self) -> &Array1<F> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Array1<F> {
        &self.col_marginal
    }

    /// Support of the plan: entries above `threshold`.
    pub fn support(&self, threshold: F) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for ((i, j), &v) in self.matrix.indexed_iter() {
            if v > threshold {
                cells.push((i, j));
            }
        }
        cells
    }
}

fn l1_gap<F: Scalar>(got: &Array1<F>, want: &Array1<F>) -> f64 {
    got.iter()
        .zip(want.iter())
        .map(|(g, w)| (*g - *w).abs().as_f64())
        .sum()
}

/// Which algorithm produced a [`TransportResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    Emd,
    Sinkhorn,
    SinkhornL1L2,
    SinkhornLpL1,
    OtLin,
}

impl std::fmt::Display for SolverTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverTag::Emd => "emd",
            SolverTag::Sinkhorn => "sinkhorn",
            SolverTag::SinkhornL1L2 => "sinkhorn_l1l2",
            SolverTag::SinkhornLpL1 => "sinkhorn_lpl1",
            SolverTag::OtLin => "otlin",
        };
        f.write_str(name)
    }
}

/// A solver's output: the plan, its transport cost, and convergence info.
/// The objective is always the Frobenius inner product of plan and cost.
#[derive(Debug, Clone)]
pub struct TransportResult<F: Scalar> {
    pub coupling: Coupling<F>,
    pub objective: F,
    pub converged: bool,
    pub iterations: usize,
    pub solver: SolverTag,
}

impl<F: Scalar> TransportResult<F> {
    pub(crate) fn from_plan(
        cost: &CostMatrix<F>,
        plan: Array2<F>,
        a: &Array1<F>,
        b: &Array1<F>,
        converged: bool,
        iterations: usize,
        solver: SolverTag,
    ) -> Result<Self> {
        let objective = frobenius(&plan, cost.matrix());
        let coupling = Coupling::new(plan, a.clone(), b.clone())?;
        Ok(Self {
            coupling,
            objective,
            converged,
            iterations,
            solver,
        })
    }
}

pub(crate) fn frobenius<F: Scalar>(plan: &Array2<F>, cost: &Array2<F>) -> F {
    plan.iter()
        .zip(cost.iter())
        .map(|(&p, &c)| p * c)
        .fold(F::zero(), |acc, v| acc + v)
}

pub(crate) fn validate_marginals<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
) -> Result<()> {
    if a.len() != cost.nrows() || b.len() != cost.ncols() {
        return Err(Error::InvalidParameter(format!(
            "marginal lengths ({}, {}) do not match cost shape {}x{}",
            a.len(),
            b.len(),
            cost.nrows(),
            cost.ncols()
        )));
    }
    if a.iter().any(|&v| !(v >= F::zero()) || !v.is_finite())
        || b.iter().any(|&v| !(v >= F::zero()) || !v.is_finite())
    {
        return Err(Error::InvalidParameter(
            "marginals must be finite and nonnegative".into(),
        ));
    }
    let sa = a.iter().copied().fold(F::zero(), |acc, v| acc + v).as_f64();
    let sb = b.iter().copied().fold(F::zero(), |acc, v| acc + v).as_f64();
    if (sa - sb).abs() > 1e-9 * sa.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "marginal sums differ: {sa} vs {sb}"
        )));
    }
    if sa <= 0.0 {
        return Err(Error::InvalidParameter(
            "marginals must carry positive total mass".into(),
        ));
    }
    Ok(())
}

/// Barycentric projection of a plan: row `i` maps to the plan-weighted mean
/// of the destination points, `(sum_j plan_ij * y_j) / (sum_j plan_ij)`.
/// Rows without mass have no image and are an error.
pub fn barycentric_map<F: Scalar>(coupling: &Coupling<F>, y: &Array2<F>) -> Result<Array2<F>> {
    let plan = coupling.matrix();
    if plan.ncols() != y.nrows() {
        return Err(Error::InvalidParameter(format!(
            "coupling has {} columns but {} destination points",
            plan.ncols(),
            y.nrows()
        )));
    }
    let mut out = Array2::zeros((plan.nrows(), y.ncols()));
    for i in 0..plan.nrows() {
        let mut total = F::zero();
        for j in 0..plan.ncols() {
            let w = plan[(i, j)];
            if w == F::zero() {
                continue;
            }
            total += w;
            for k in 0..y.ncols() {
                out[(i, k)] += w * y[(j, k)];
            }
        }
        if total <= F::zero() {
            return Err(Error::DegenerateCoupling(i));
        }
        for k in 0..y.ncols() {
            out[(i, k)] /= total;
        }
    }
    Ok(out)
}

/// `p`-Wasserstein distance: the `p`-th root of the exact transport optimum.
/// The cost matrix must hold `||x - y||^p` entries (see [`build_cost_power`]).
pub fn wasserstein_distance<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    p: f64,
) -> Result<F> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "wasserstein distance requires p >= 1, got {p}"
        )));
    }
    let result = solve_emd(cost, a, b)?;
    Ok(F::cast(result.objective.as_f64().powf(1.0 / p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn base_cost_of_identical_sets_has_zero_diagonal() {
        let x = array![[1.0f64, 2.0], [3.0, -1.0], [0.0, 0.5]];
        let cost = build_cost(&x, &x, None, None, 1.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(cost.matrix()[(i, i)], 0.0);
        }
        assert_eq!(cost.tag(), CostTag::HalfSqEuclidean);
        assert_eq!(cost.penalty(), PenaltyMode::None);
    }

    #[test]
    fn two_by_two_half_squared_distances() {
        let x = array![[0.0f64], [1.0]];
        let cost = build_cost(&x, &x, None, None, 1.0).unwrap();
        assert_eq!(
            cost.matrix(),
            &array![[0.0, 0.5], [0.5, 0.0]]
        );
    }

    #[test]
    fn equal_labels_zero_the_entry_regardless_of_distance() {
        let x = array![[0.0f64, 0.0]];
        let y = array![[100.0f64, 100.0], [1.0, 0.0]];
        let labels_x = [Some(1usize)];
        let labels_y = [Some(1usize), Some(0)];
        let penalty = default_label_penalty(&x, &y).unwrap();
        let cost = build_cost(&x, &y, Some(&labels_x), Some(&labels_y), penalty).unwrap();
        assert_abs_diff_eq!(cost.matrix()[(0, 0)], 0.0);
        assert_abs_diff_eq!(cost.matrix()[(0, 1)], penalty);
    }

    #[test]
    fn unlabeled_entries_keep_the_base_cost() {
        let x = array![[0.0f64], [2.0]];
        let y = array![[1.0f64]];
        let labels_x = [None, Some(0usize)];
        let labels_y = [Some(0usize)];
        let cost = build_cost(&x, &y, Some(&labels_x), Some(&labels_y), 1e9).unwrap();
        assert_abs_diff_eq!(cost.matrix()[(0, 0)], 0.5);
        assert_abs_diff_eq!(cost.matrix()[(1, 0)], 0.0);
    }

    #[test]
    fn penalty_below_max_base_cost_is_rejected() {
        let x = array![[0.0f64], [10.0]];
        let labels = [Some(0usize), Some(1)];
        let err = build_cost(&x, &x, Some(&labels), Some(&labels), 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn barycentric_of_permutation_reorders() {
        let plan = array![[0.0f64, 0.5], [0.5, 0.0]];
        let coupling = Coupling::new(
            plan,
            array![0.5, 0.5],
            array![0.5, 0.5],
        )
        .unwrap();
        let y = array![[1.0f64, 1.0], [2.0, 2.0]];
        let mapped = barycentric_map(&coupling, &y).unwrap();
        assert_eq!(mapped, array![[2.0, 2.0], [1.0, 1.0]]);
    }

    #[test]
    fn barycentric_of_independent_coupling_is_the_mean() {
        let a = array![0.25f64, 0.75];
        let b = array![0.5f64, 0.25, 0.25];
        let mut plan = Array2::zeros((2, 3));
        for i in 0..2 {
            for j in 0..3 {
                plan[(i, j)] = a[i] * b[j];
            }
        }
        let coupling = Coupling::new(plan, a, b.clone()).unwrap();
        let y = array![[0.0f64], [4.0], [8.0]];
        let mapped = barycentric_map(&coupling, &y).unwrap();
        let mean = 0.5 * 0.0 + 0.25 * 4.0 + 0.25 * 8.0;
        for i in 0..2 {
            assert_abs_diff_eq!(mapped[(i, 0)], mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn barycentric_rejects_zero_mass_rows() {
        let plan = array![[0.0f64, 0.0], [0.5, 0.5]];
        // Bypass Coupling validation on purpose via a marginal that matches.
        let coupling = Coupling::new(plan, array![0.0, 1.0], array![0.5, 0.5]).unwrap();
        let y = array![[1.0f64], [2.0]];
        match barycentric_map(&coupling, &y) {
            Err(Error::DegenerateCoupling(0)) => {}
            other => panic!("expected degenerate row 0, got {other:?}"),
        }
    }

    #[test]
    fn coupling_validation_rejects_bad_marginals() {
        let plan = array![[0.5f64, 0.0], [0.0, 0.5]];
        assert!(Coupling::new(plan, array![0.9, 0.1], array![0.5, 0.5]).is_err());
    }
}
