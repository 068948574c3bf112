//! Joint estimation of a coupling and an affine map, for transport that
//! generalizes to points outside the training support.
//!
//! Alternating minimization of
//! `J(gamma, L, c) = <gamma, 0.5 ||x L + c - y||^2> + reg * H(gamma)
//!  + 1/(2 mu) * ||L - I||_F^2`:
//! the gamma-step is a Sinkhorn solve under the current map's cost, the
//! (L, c)-step is a closed-form weighted ridge regression onto the
//! barycentric image of the plan. Each step minimizes its block exactly, so
//! the joint objective never increases.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::sinkhorn::solve_sinkhorn;
use super::{CostMatrix, CostTag, PenaltyMode, SolverTag, TransportResult};

// The alternating scheme produces near-decoupled transport problems (each
// point crisply matched): their marginal residual converges at a rate set by
// the weak kernel mixing, so the inner solves get a far larger budget than
// the plain-solver default and a tolerance that is still well inside the
// coupling invariant.
const INNER_MAX_ITER: usize = 200_000;
const INNER_TOL: f64 = 1e-7;

/// Affine map `z -> z L + bias` learned by [`solve_otlin`]; applies to any
/// point set of matching dimension, including points absent from training.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<F: Scalar> {
    pub matrix: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> LinearMap<F> {
    pub fn identity(d: usize) -> Self {
        Self {
            matrix: Array2::eye(d),
            bias: Array1::zeros(d),
        }
    }

    pub fn apply(&self, points: &Array2<F>) -> Array2<F> {
        let mut out = points.dot(&self.matrix);
        out += &self.bias;
        out
    }

    /// Ridge penalty `||L - I||_F^2` of this map.
    #[cfg(test)]
    fn deviation_from_identity(&self) -> F {
        let d = self.matrix.nrows();
        let mut sum = F::zero();
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { F::one() } else { F::zero() };
                let diff = self.matrix[(i, j)] - target;
                sum += diff * diff;
            }
        }
        sum
    }
}

#[derive(Debug, Clone)]
pub struct OtLinSolution<F: Scalar> {
    pub transport: TransportResult<F>,
    pub map: LinearMap<F>,
    /// One entry per internal ridge escalation on singular normal equations.
    pub warnings: Vec<String>,
}

fn map_cost<F: Scalar>(x: &Array2<F>, y: &Array2<F>, map: &LinearMap<F>) -> Array2<F> {
    let z = map.apply(x);
    let mut out = Array2::zeros((x.nrows(), y.nrows()));
    for (i, zi) in z.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            let mut sum = F::zero();
            for (a, b) in zi.iter().zip(yj.iter()) {
                let d = *a - *b;
                sum += d * d;
            }
            out[(i, j)] = sum / F::cast(2.0);
        }
    }
    out
}

fn apply_label_mask<F: Scalar>(
    matrix: &mut Array2<F>,
    x_labels: &[Option<usize>],
    y_labels: &[Option<usize>],
    penalty: F,
) {
    for (i, li) in x_labels.iter().enumerate() {
        let Some(ci) = li else { continue };
        for (j, lj) in y_labels.iter().enumerate() {
            let Some(cj) = lj else { continue };
            matrix[(i, j)] = if ci == cj { F::zero() } else { penalty };
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when a pivot collapses.
fn solve_linear_system<F: Scalar>(mut gram: Array2<F>, mut rhs: Array2<F>) -> Option<Array2<F>> {
    let n = gram.nrows();
    let k = rhs.ncols();
    let scale = gram
        .iter()
        .fold(F::zero(), |acc, v| acc.max(v.abs()))
        .max(F::cast(f64::MIN_POSITIVE));
    let pivot_floor = scale * F::cast(1e-13);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = gram[(col, col)].abs();
        for r in (col + 1)..n {
            let v = gram[(r, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= pivot_floor {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = gram[(col, c)];
                gram[(col, c)] = gram[(pivot_row, c)];
                gram[(pivot_row, c)] = tmp;
            }
            for c in 0..k {
                let tmp = rhs[(col, c)];
                rhs[(col, c)] = rhs[(pivot_row, c)];
                rhs[(pivot_row, c)] = tmp;
            }
        }
        let pivot = gram[(col, col)];
        for r in (col + 1)..n {
            let factor = gram[(r, col)] / pivot;
            if factor == F::zero() {
                continue;
            }
            for c in col..n {
                let upper = gram[(col, c)];
                gram[(r, c)] -= factor * upper;
            }
            for c in 0..k {
                let upper = rhs[(col, c)];
                rhs[(r, c)] -= factor * upper;
            }
        }
    }
    // Back substitution.
    let mut solution = Array2::zeros((n, k));
    for col in (0..n).rev() {
        for c in 0..k {
            let mut v = rhs[(col, c)];
            for r in (col + 1)..n {
                v -= gram[(col, r)] * solution[(r, c)];
            }
            solution[(col, c)] = v / gram[(col, col)];
        }
    }
    Some(solution)
}

/// Weighted ridge fit of `x L + c` to the targets, ridge `1/(2 mu)` pulling
/// `L` toward the identity, bias unpenalized. Singular normal equations get
/// an escalating diagonal boost, each recorded as a warning.
fn fit_map<F: Scalar>(
    x: &Array2<F>,
    targets: &Array2<F>,
    weights: &Array1<F>,
    mu: F,
    warnings: &mut Vec<String>,
) -> Result<LinearMap<F>> {
    let n = x.nrows();
    let d = x.ncols();
    let ridge = F::one() / mu;

    // Gram = Xt^T A Xt + ridge * diag(1...1, 0) over the augmented [x | 1].
    let mut gram = Array2::zeros((d + 1, d + 1));
    let mut rhs = Array2::zeros((d + 1, d));
    for i in 0..n {
        let w = weights[i];
        if w == F::zero() {
            continue;
        }
        for r in 0..=d {
            let xr = if r < d { x[(i, r)] } else { F::one() };
            for c in 0..=d {
                let xc = if c < d { x[(i, c)] } else { F::one() };
                gram[(r, c)] += w * xr * xc;
            }
            for c in 0..d {
                rhs[(r, c)] += w * xr * targets[(i, c)];
            }
        }
    }
    for r in 0..d {
        gram[(r, r)] += ridge;
        rhs[(r, r)] += ridge; // pulls column r of L toward e_r
    }

    let mut boost = F::zero();
    for attempt in 0..12 {
        let mut attempt_gram = gram.clone();
        if boost > F::zero() {
            for r in 0..=d {
                attempt_gram[(r, r)] += boost;
            }
        }
        if let Some(solution) = solve_linear_system(attempt_gram, rhs.clone()) {
            let mut matrix = Array2::zeros((d, d));
            for r in 0..d {
                for c in 0..d {
                    matrix[(r, c)] = solution[(r, c)];
                }
            }
            let bias = Array1::from_iter((0..d).map(|c| solution[(d, c)]));
            return Ok(LinearMap { matrix, bias });
        }
        let trace_scale = (0..=d)
            .map(|r| gram[(r, r)])
            .fold(F::zero(), |acc, v| acc.max(v));
        boost = if boost == F::zero() {
            trace_scale * F::cast(1e-10) + F::cast(1e-12)
        } else {
            boost * F::cast(10.0)
        };
        warnings.push(format!(
            "normal equations singular; raised ridge boost to {boost} (attempt {attempt})"
        ));
    }
    Err(Error::InvalidParameter(
        "map fit failed: normal equations remained singular".into(),
    ))
}

/// Joint coupling + affine map, unguided (pure geometric cost).
pub fn solve_otlin<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    mu: F,
    outer_iter: usize,
) -> Result<OtLinSolution<F>> {
    solve_otlin_impl(x, y, a, b, reg, mu, outer_iter, None)
}

/// Joint coupling + affine map with the label-penalized cost: wherever both
/// endpoints carry labels the map-dependent cost entry is replaced, exactly
/// as in [`super::build_cost`].
#[allow(clippy::too_many_arguments)]
pub fn solve_otlin_guided<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    mu: F,
    outer_iter: usize,
    x_labels: &[Option<usize>],
    y_labels: &[Option<usize>],
    penalty: F,
) -> Result<OtLinSolution<F>> {
    if x_labels.len() != x.nrows() || y_labels.len() != y.nrows() {
        return Err(Error::InvalidParameter(
            "label slices must match point counts".into(),
        ));
    }
    solve_otlin_impl(
        x,
        y,
        a,
        b,
        reg,
        mu,
        outer_iter,
        Some((x_labels, y_labels, penalty)),
    )
}

#[allow(clippy::too_many_arguments)]
fn solve_otlin_impl<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    mu: F,
    outer_iter: usize,
    labels: Option<(&[Option<usize>], &[Option<usize>], F)>,
) -> Result<OtLinSolution<F>> {
    if x.ncols() != y.ncols() {
        return Err(Error::InvalidParameter(format!(
            "point dimensions differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    if !(mu > F::zero()) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "map-fitting weight mu must be positive, got {mu}"
        )));
    }
    if outer_iter == 0 {
        return Err(Error::InvalidParameter("outer_iter must be >= 1".into()));
    }

    let mut map = LinearMap::identity(x.ncols());
    let mut warnings = Vec::new();
    let mut total_inner = 0usize;
    let mut all_converged = true;
    let mut last: Option<(TransportResult<F>, CostMatrix<F>)> = None;

    for _ in 0..outer_iter {
        let mut matrix = map_cost(x, y, &map);
        if let Some((xl, yl, penalty)) = labels {
            apply_label_mask(&mut matrix, xl, yl, penalty);
        }
        let cost = CostMatrix::new(matrix, CostTag::Derived, match labels {
            Some((_, _, penalty)) => PenaltyMode::Labeled {
                penalty: penalty.as_f64(),
            },
            None => PenaltyMode::None,
        })?;
        let result = solve_sinkhorn(&cost, a, b, reg, INNER_MAX_ITER, F::cast(INNER_TOL))?;
        total_inner += result.iterations;
        all_converged &= result.converged;

        // Barycentric image per row under the prescribed row masses.
        let plan = result.coupling.matrix();
        let mut targets = Array2::zeros((x.nrows(), x.ncols()));
        for i in 0..x.nrows() {
            if a[i] == F::zero() {
                continue;
            }
            for j in 0..y.nrows() {
                let w = plan[(i, j)];
                if w == F::zero() {
                    continue;
                }
                for k in 0..y.ncols() {
                    targets[(i, k)] += w * y[(j, k)];
                }
            }
            for k in 0..x.ncols() {
                targets[(i, k)] /= a[i];
            }
        }
        map = fit_map(x, &targets, a, mu, &mut warnings)?;
        last = Some((result, cost));
    }

    let (mut transport, _cost) = last.expect("outer_iter >= 1");
    transport.solver = SolverTag::OtLin;
    transport.converged = all_converged;
    transport.iterations = total_inner;
    Ok(OtLinSolution {
        transport,
        map,
        warnings,
    })
}

/// Joint objective value, exposed for the descent tests.
#[cfg(test)]
fn otlin_objective<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    plan: &Array2<F>,
    map: &LinearMap<F>,
    reg: F,
    mu: F,
) -> F {
    let cost = map_cost(x, y, map);
    let transport: F = plan
        .iter()
        .zip(cost.iter())
        .map(|(&p, &c)| p * c)
        .fold(F::zero(), |acc, v| acc + v);
    let entropy: F = plan
        .iter()
        .map(|&p| if p > F::zero() { p * p.ln() } else { F::zero() })
        .fold(F::zero(), |acc, v| acc + v);
    transport + reg * entropy + map.deviation_from_identity() / (F::cast(2.0) * mu)
}
