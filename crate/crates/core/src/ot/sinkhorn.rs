//! Entropic transport by log-domain scaling, and the class-structured
//! variants built on top of it.
//!
//! Everything runs on dual potentials with log-sum-exp updates; the kernel
//! `exp(-M/reg)` is never materialized, so large label penalties and small
//! regularization stay finite.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{
    frobenius, validate_marginals, CostMatrix, SolverTag, TransportResult, DEFAULT_MAX_ITER,
    DEFAULT_SINKHORN_TOL,
};

fn logsumexp_by<F: Scalar>(len: usize, mut f: impl FnMut(usize) -> F) -> F {
    let mut max = F::neg_infinity();
    for i in 0..len {
        max = max.max(f(i));
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = F::zero();
    for i in 0..len {
        sum += (f(i) - max).exp();
    }
    max + sum.ln()
}

fn log_or_neg_inf<F: Scalar>(w: &Array1<F>) -> Array1<F> {
    w.mapv(|x| if x > F::zero() { x.ln() } else { F::neg_infinity() })
}

/// Entropic-regularized transport: `gamma = diag(u) K diag(v)` with
/// `K = exp(-M/reg)`, scaled alternately to the marginals in log domain.
/// The converged flag reports whether the largest marginal L1 violation fell
/// below `tol` within `max_iter` sweeps.
pub fn solve_sinkhorn<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    max_iter: usize,
    tol: F,
) -> Result<TransportResult<F>> {
    let (plan, converged, iterations) = sinkhorn_plan(cost.matrix(), a, b, reg, max_iter, tol)?;
    TransportResult::from_plan(cost, plan, a, b, converged, iterations, SolverTag::Sinkhorn)
}

fn sinkhorn_plan<F: Scalar>(
    cost: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    max_iter: usize,
    tol: F,
) -> Result<(Array2<F>, bool, usize)> {
    if !(reg > F::zero()) || !reg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "entropic regularization must be positive, got {reg}"
        )));
    }
    let n = a.len();
    let m = b.len();
    if cost.nrows() != n || cost.ncols() != m {
        return Err(Error::InvalidParameter(format!(
            "cost shape {:?} does not match marginals ({n}, {m})",
            cost.dim()
        )));
    }
    let log_a = log_or_neg_inf(a);
    let log_b = log_or_neg_inf(b);
    let mut f: Array1<F> = Array1::zeros(n);
    let mut g: Array1<F> = Array1::zeros(m);

    let mut converged = false;
    let mut iterations = 0usize;
    let check_every = 10usize;
    for iter in 0..max_iter {
        for i in 0..n {
            let lse = logsumexp_by(m, |j| (g[j] - cost[(i, j)]) / reg);
            f[i] = if log_a[i].is_finite() {
                reg * (log_a[i] - lse)
            } else {
                F::neg_infinity()
            };
        }
        for j in 0..m {
            let lse = logsumexp_by(n, |i| (f[i] - cost[(i, j)]) / reg);
            g[j] = if log_b[j].is_finite() {
                reg * (log_b[j] - lse)
            } else {
                F::neg_infinity()
            };
        }
        iterations = iter + 1;
        if iterations % check_every == 0 || iterations == max_iter {
            // After the g-sweep column sums are exact; the row violation is
            // the live residual. Both are measured for the verdict.
            let mut row_err = F::zero();
            for i in 0..n {
                let lse = logsumexp_by(m, |j| (g[j] - cost[(i, j)]) / reg);
                let row_sum = if f[i].is_finite() && lse.is_finite() {
                    (f[i] / reg + lse).exp()
                } else {
                    F::zero()
                };
                row_err += (row_sum - a[i]).abs();
            }
            let mut col_err = F::zero();
            for j in 0..m {
                let lse = logsumexp_by(n, |i| (f[i] - cost[(i, j)]) / reg);
                let col_sum = if g[j].is_finite() && lse.is_finite() {
                    (g[j] / reg + lse).exp()
                } else {
                    F::zero()
                };
                col_err += (col_sum - b[j]).abs();
            }
            if row_err.max(col_err) < tol {
                converged = true;
                break;
            }
        }
    }

    let mut plan = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let log_p = if f[i].is_finite() && g[j].is_finite() {
                (f[i] + g[j] - cost[(i, j)]) / reg
            } else {
                F::neg_infinity()
            };
            let p = log_p.exp();
            if p.is_nan() || p.is_infinite() {
                return Err(Error::Instability {
                    reg: reg.as_f64(),
                });
            }
            plan[(i, j)] = p;
        }
    }
    if !converged {
        // A near-miss still yields a usable coupling; a plan outside the
        // coupling tolerance does not.
        let mut row_err = F::zero();
        for (sum, want) in plan.sum_axis(ndarray::Axis(1)).iter().zip(a.iter()) {
            row_err += (*sum - *want).abs();
        }
        let mut col_err = F::zero();
        for (sum, want) in plan.sum_axis(ndarray::Axis(0)).iter().zip(b.iter()) {
            col_err += (*sum - *want).abs();
        }
        if row_err.max(col_err).as_f64() > super::MARGINAL_TOL {
            return Err(Error::NonConvergence(iterations));
        }
    }
    Ok((plan, converged, iterations))
}

/// Rows of the plan grouped by the class of the corresponding source sample;
/// unlabeled rows belong to no group.
fn class_groups(x_class_of_row: &[Option<usize>]) -> Vec<Vec<usize>> {
    let num_classes = x_class_of_row
        .iter()
        .flatten()
        .copied()
        .max()
        .map_or(0, |c| c + 1);
    let mut groups = vec![Vec::new(); num_classes];
    for (i, class) in x_class_of_row.iter().enumerate() {
        if let Some(c) = class {
            groups[*c].push(i);
        }
    }
    groups
}

/// Group-lasso penalty `sum_j sum_c ||gamma(I_c, j)||_2`.
fn group_l2_penalty<F: Scalar>(plan: &Array2<F>, groups: &[Vec<usize>]) -> F {
    let mut total = F::zero();
    for j in 0..plan.ncols() {
        for group in groups {
            if group.is_empty() {
                continue;
            }
            let mut sq = F::zero();
            for &i in group {
                sq += plan[(i, j)] * plan[(i, j)];
            }
            total += sq.sqrt();
        }
    }
    total
}

/// `x log x` entropy term (0 at 0), matching the entropic objective
/// `<gamma, M> + reg * sum gamma log gamma`.
fn entropy_term<F: Scalar>(plan: &Array2<F>) -> F {
    plan.iter()
        .map(|&p| if p > F::zero() { p * p.ln() } else { F::zero() })
        .fold(F::zero(), |acc, v| acc + v)
}

fn regularized_objective<F: Scalar>(
    cost: &Array2<F>,
    plan: &Array2<F>,
    reg: F,
    eta: F,
    groups: &[Vec<usize>],
) -> F {
    frobenius(plan, cost) + reg * entropy_term(plan) + eta * group_l2_penalty(plan, groups)
}

// Deterministic golden-section minimization of a convex objective on [0, 1].
fn golden_section<F: Scalar>(mut phi: impl FnMut(F) -> F) -> F {
    let inv_phi = F::cast(0.618_033_988_749_894_9);
    let mut lo = F::zero();
    let mut hi = F::one();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = phi(x1);
    let mut f2 = phi(x2);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = phi(x2);
        }
        if (hi - lo).as_f64() < 1e-12 {
            break;
        }
    }
    (lo + hi) / F::cast(2.0)
}

/// Group-lasso regularized transport
/// `min <gamma, M> + reg * H(gamma) + eta * sum_j sum_c ||gamma(I_c, j)||_2`
/// by generalized conditional gradient: each outer step solves a Sinkhorn
/// problem on the cost augmented with the group subgradient, then line
/// searches along the segment toward that solution, so the full regularized
/// objective never increases. With `eta = 0` the call reduces to plain
/// [`solve_sinkhorn`], bitwise.
pub fn solve_sinkhorn_l1l2<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    eta: F,
    x_class_of_row: &[Option<usize>],
    outer_iter: usize,
) -> Result<TransportResult<F>> {
    if !(eta >= F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "group weight eta must be nonnegative, got {eta}"
        )));
    }
    validate_marginals(cost, a, b)?;
    if x_class_of_row.len() != a.len() {
        return Err(Error::InvalidParameter(
            "class assignment must cover every row".into(),
        ));
    }
    if eta == F::zero() {
        let mut result = solve_sinkhorn(cost, a, b, reg, DEFAULT_MAX_ITER, F::cast(DEFAULT_SINKHORN_TOL))?;
        result.solver = SolverTag::SinkhornL1L2;
        return Ok(result);
    }
    if outer_iter == 0 {
        return Err(Error::InvalidParameter("outer_iter must be >= 1".into()));
    }

    let groups = class_groups(x_class_of_row);
    let m = cost.matrix();
    let tol = F::cast(DEFAULT_SINKHORN_TOL);

    // Start from the independent coupling a b^T (feasible, fully supported).
    let mut plan = Array2::zeros((a.len(), b.len()));
    for i in 0..a.len() {
        for j in 0..b.len() {
            plan[(i, j)] = a[i] * b[j];
        }
    }
    let mut objective = regularized_objective(m, &plan, reg, eta, &groups);
    let mut total_inner = 0usize;
    let mut all_converged = true;

    for _ in 0..outer_iter {
        // Subgradient of the group norm at the current plan, broadcast over
        // each (class, column) block.
        let mut augmented = m.clone();
        for j in 0..plan.ncols() {
            for group in &groups {
                if group.is_empty() {
                    continue;
                }
                let mut sq = F::zero();
                for &i in group {
                    sq += plan[(i, j)] * plan[(i, j)];
                }
                let norm = sq.sqrt();
                if norm > F::zero() {
                    for &i in group {
                        augmented[(i, j)] += eta * plan[(i, j)] / norm;
                    }
                }
            }
        }
        let (candidate, converged, inner) = sinkhorn_plan(&augmented, a, b, reg, DEFAULT_MAX_ITER, tol)?;
        total_inner += inner;
        all_converged &= converged;

        let direction = &candidate - &plan;
        let step = golden_section(|t| {
            let trial = &plan + &direction.mapv(|d| d * t);
            regularized_objective(m, &trial, reg, eta, &groups)
        });
        // The convex combination can leave ulp-scale negative dust; clamp it
        // so the coupling invariant holds exactly.
        let trial = (&plan + &direction.mapv(|d| d * step))
            .mapv(|v| if v > F::zero() { v } else { F::zero() });
        let trial_obj = regularized_objective(m, &trial, reg, eta, &groups);
        // Keep the current plan when the line search cannot improve on it.
        if trial_obj <= objective {
            plan = trial;
            objective = trial_obj;
        }
    }

    TransportResult::from_plan(
        cost,
        plan,
        a,
        b,
        all_converged,
        total_inner,
        SolverTag::SinkhornL1L2,
    )
}

/// POT-compatible smoothing inside the concave group gradient.
const LPL1_SMOOTHING: f64 = 1e-3;

/// Non-convex group penalty `sum_j sum_c (mass of class c in column j)^p`
/// with `0 < p < 1`, minimized by majorization-minimization: each outer step
/// solves Sinkhorn on `M + eta * p * (group mass + s)^(p-1)` broadcast per
/// (class, column). The linearization majorizes the concave penalty, so the
/// regularized objective is non-increasing across outer steps.
pub fn solve_sinkhorn_lpl1<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    eta: F,
    p: F,
    x_class_of_row: &[Option<usize>],
    outer_iter: usize,
) -> Result<TransportResult<F>> {
    if !(p > F::zero() && p < F::one()) {
        return Err(Error::InvalidParameter(format!(
            "lpl1 exponent must satisfy 0 < p < 1, got {p}"
        )));
    }
    if !(eta >= F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "group weight eta must be nonnegative, got {eta}"
        )));
    }
    if outer_iter == 0 {
        return Err(Error::InvalidParameter("outer_iter must be >= 1".into()));
    }
    validate_marginals(cost, a, b)?;
    if x_class_of_row.len() != a.len() {
        return Err(Error::InvalidParameter(
            "class assignment must cover every row".into(),
        ));
    }

    let groups = class_groups(x_class_of_row);
    let m = cost.matrix();
    let tol = F::cast(DEFAULT_SINKHORN_TOL);
    let smoothing = F::cast(LPL1_SMOOTHING);

    let mut weight: Array2<F> = Array2::zeros(m.dim());
    let mut plan = Array2::zeros(m.dim());
    let mut total_inner = 0usize;
    let mut all_converged = true;
    for _ in 0..outer_iter {
        let augmented = m + &weight.mapv(|w| eta * w);
        let (next, converged, inner) = sinkhorn_plan(&augmented, a, b, reg, DEFAULT_MAX_ITER, tol)?;
        plan = next;
        total_inner += inner;
        all_converged &= converged;

        // Gradient of the smoothed concave penalty at the new plan.
        weight.fill(F::zero());
        for group in &groups {
            if group.is_empty() {
                continue;
            }
            for j in 0..plan.ncols() {
                let mut mass = F::zero();
                for &i in group {
                    mass += plan[(i, j)];
                }
                let w = p * (mass + smoothing).powf(p - F::one());
                for &i in group {
                    weight[(i, j)] = w;
                }
            }
        }
    }

    TransportResult::from_plan(
        cost,
        plan,
        a,
        b,
        all_converged,
        total_inner,
        SolverTag::SinkhornLpL1,
    )
}

/// Smoothed concave penalty value used by the lpl1 descent tests.
#[cfg(test)]
fn lpl1_penalty<F: Scalar>(
    plan: &Array2<F>,
    p: F,
    x_class_of_row: &[Option<usize>],
) -> F {
    let groups = class_groups(x_class_of_row);
    let smoothing = F::cast(LPL1_SMOOTHING);
    let mut total = F::zero();
    for group in &groups {
        if group.is_empty() {
            continue;
        }
        for j in 0..plan.ncols() {
            let mut mass = F::zero();
            for &i in group {
                mass += plan[(i, j)];
            }
            total += (mass + smoothing).powf(p);
        }
    }
    total
}

/// Full group-lasso objective, exposed for descent tests.
#[cfg(test)]
fn l1l2_objective<F: Scalar>(
    cost: &Array2<F>,
    plan: &Array2<F>,
    reg: F,
    eta: F,
    x_class_of_row: &[Option<usize>],
) -> F {
    let groups = class_groups(x_class_of_row);
    regularized_objective(cost, plan, reg, eta, &groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{build_cost, solve_emd, CostTag, PenaltyMode};
    use crate::rng::seed_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Axis};
    use rand::Rng;

    fn uniform(n: usize) -> Array1<f64> {
        Array1::from_elem(n, 1.0 / n as f64)
    }

    fn marginal_l1_violation(plan: &Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let row: f64 = plan
            .sum_axis(Axis(1))
            .iter()
            .zip(a.iter())
            .map(|(g, w)| (g - w).abs())
            .sum();
        let col: f64 = plan
            .sum_axis(Axis(0))
            .iter()
            .zip(b.iter())
            .map(|(g, w)| (g - w).abs())
            .sum();
        row.max(col)
    }

    fn random_instance(rng: &mut impl Rng, n: usize, m: usize) -> CostMatrix<f64> {
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0f64));
        let y = Array2::from_shape_fn((m, 2), |_| rng.random_range(-2.0..2.0f64));
        build_cost(&x, &y, None, None, 1.0).unwrap()
    }

    #[test]
    fn huge_regularization_approaches_the_independent_coupling() {
        let mut rng = seed_rng(21);
        let cost = random_instance(&mut rng, 5, 4);
        let a = uniform(5);
        let b = uniform(4);
        let reg = 1e4 * cost.max_entry();
        let result = solve_sinkhorn(&cost, &a, &b, reg, DEFAULT_MAX_ITER, 1e-9).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    result.coupling.matrix()[(i, j)],
                    a[i] * b[j],
                    epsilon = 1e-3
                );
            }
        }
    }

    #[test]
    fn small_regularization_approaches_the_exact_optimum() {
        // Offset-cluster instances keep the optimum a large fraction of the
        // maximum cost, where the entropic bias stays well under 2%.
        let mut rng = seed_rng(22);
        for _ in 0..20 {
            let n = rng.random_range(3..=7);
            let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-0.35..0.35f64));
            let y = Array2::from_shape_fn((n, 2), |_| 4.0 + rng.random_range(-0.35..0.35f64));
            let cost = build_cost(&x, &y, None, None, 1.0).unwrap();
            let a = uniform(n);
            let b = uniform(n);
            let emd = solve_emd(&cost, &a, &b).unwrap();
            let reg = 0.01 * cost.max_entry();
            let sk = solve_sinkhorn(&cost, &a, &b, reg, DEFAULT_MAX_ITER, 1e-7).unwrap();
            assert!(sk.converged);
            assert!(
                sk.objective >= emd.objective - 1e-9,
                "entropic objective cannot beat the exact optimum"
            );
            assert!(
                (sk.objective - emd.objective) <= 0.02 * emd.objective,
                "gap {} vs emd {}",
                sk.objective - emd.objective,
                emd.objective
            );
            assert!(
                marginal_l1_violation(sk.coupling.matrix(), &a, &b) < 1e-6,
                "marginals at convergence"
            );
        }
    }

    #[test]
    fn objective_is_monotone_in_the_regularization() {
        let mut rng = seed_rng(23);
        let cost = random_instance(&mut rng, 6, 6);
        let a = uniform(6);
        let b = uniform(6);
        let regs = [0.1, 0.4, 1.6, 6.4];
        let mut previous = -f64::INFINITY;
        for &reg in &regs {
            let obj = solve_sinkhorn(&cost, &a, &b, reg, 400_000, 1e-7)
                .unwrap()
                .objective;
            assert!(
                previous <= obj + 1e-9,
                "objective must grow with reg: {previous} vs {obj}"
            );
            previous = obj;
        }
    }

    #[test]
    fn rejects_nonpositive_regularization() {
        let cost = CostMatrix::new(
            Array2::zeros((2, 2)),
            CostTag::Derived,
            PenaltyMode::None,
        )
        .unwrap();
        assert!(solve_sinkhorn(&cost, &uniform(2), &uniform(2), 0.0, 10, 1e-9).is_err());
    }

    #[test]
    fn label_penalties_stay_finite_in_log_domain() {
        // Penalty entries of 1e6 * max cost underflow the kernel to zero;
        // the log-domain sweeps must still converge on the feasible support.
        let x = array![[0.0f64], [1.0]];
        let labels = [Some(0usize), Some(1)];
        let cost = build_cost(&x, &x, Some(&labels), Some(&labels), 1e6).unwrap();
        let result =
            solve_sinkhorn(&cost, &uniform(2), &uniform(2), 4.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        assert!(result.converged);
        assert!(result.coupling.matrix()[(0, 1)] < 1e-12);
        assert!(result.coupling.matrix()[(1, 0)] < 1e-12);
        assert_abs_diff_eq!(result.coupling.matrix()[(0, 0)], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn eta_zero_reduces_to_plain_sinkhorn_bitwise() {
        let mut rng = seed_rng(24);
        let cost = random_instance(&mut rng, 5, 5);
        let a = uniform(5);
        let b = uniform(5);
        let classes: Vec<Option<usize>> = vec![Some(0), Some(0), Some(1), None, Some(1)];
        let plain = solve_sinkhorn(&cost, &a, &b, 1.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let l1l2 = solve_sinkhorn_l1l2(&cost, &a, &b, 1.0, 0.0, &classes, 10).unwrap();
        assert_eq!(plain.coupling.matrix(), l1l2.coupling.matrix());
        assert_eq!(plain.iterations, l1l2.iterations);
    }

    #[test]
    fn single_class_grouping_still_satisfies_marginals() {
        let mut rng = seed_rng(25);
        let cost = random_instance(&mut rng, 6, 4);
        let a = uniform(6);
        let b = uniform(4);
        let classes = vec![Some(0usize); 6];
        let result = solve_sinkhorn_l1l2(&cost, &a, &b, 0.5, 0.3, &classes, 8).unwrap();
        assert!(marginal_l1_violation(result.coupling.matrix(), &a, &b) < 1e-6);
    }

    #[test]
    fn l1l2_objective_is_non_increasing_across_outer_iterations() {
        // Deterministic prefixes: running k outer iterations reproduces the
        // first k steps of a longer run, so the sequence of final objectives
        // over k is exactly the per-iteration objective trace.
        let mut rng = seed_rng(26);
        let cost = random_instance(&mut rng, 6, 5);
        let a = uniform(6);
        let b = uniform(5);
        let classes: Vec<Option<usize>> =
            vec![Some(0), Some(0), Some(1), Some(1), Some(2), Some(2)];
        let mut previous = f64::INFINITY;
        for k in 1..=6 {
            let result = solve_sinkhorn_l1l2(&cost, &a, &b, 0.8, 0.4, &classes, k).unwrap();
            let obj = l1l2_objective(cost.matrix(), result.coupling.matrix(), 0.8, 0.4, &classes);
            assert!(
                obj <= previous + 1e-8,
                "objective increased at k={k}: {previous} -> {obj}"
            );
            previous = obj;
        }
    }

    #[test]
    fn lpl1_objective_is_non_increasing_across_outer_iterations() {
        let mut rng = seed_rng(27);
        let cost = random_instance(&mut rng, 6, 5);
        let a = uniform(6);
        let b = uniform(5);
        let classes: Vec<Option<usize>> =
            vec![Some(0), Some(0), Some(1), Some(1), Some(2), None];
        let reg = 0.8;
        let eta = 0.4;
        let p = 0.5;
        let mut previous = f64::INFINITY;
        for k in 1..=6 {
            let result =
                solve_sinkhorn_lpl1(&cost, &a, &b, reg, eta, p, &classes, k).unwrap();
            let plan = result.coupling.matrix();
            let obj = frobenius(plan, cost.matrix())
                + reg * entropy_term(plan)
                + eta * lpl1_penalty(plan, p, &classes);
            assert!(
                obj <= previous + 1e-8,
                "objective increased at k={k}: {previous} -> {obj}"
            );
            previous = obj;
        }
    }

    #[test]
    fn group_regularization_concentrates_class_mass() {
        // Two tight, well-separated row classes; columns sit between them.
        // The group penalty should push each column toward single-class
        // supply relative to plain Sinkhorn.
        let mut rng = seed_rng(28);
        let mut x = Array2::zeros((10, 2));
        for i in 0..5 {
            x[(i, 0)] = -2.0 + 0.05 * rng.random_range(-1.0..1.0f64);
            x[(i, 1)] = 0.05 * rng.random_range(-1.0..1.0f64);
        }
        for i in 5..10 {
            x[(i, 0)] = 2.0 + 0.05 * rng.random_range(-1.0..1.0f64);
            x[(i, 1)] = 0.05 * rng.random_range(-1.0..1.0f64);
        }
        let y = array![
            [-0.4f64, 0.0],
            [-0.2, 0.1],
            [0.2, -0.1],
            [0.4, 0.0]
        ];
        let cost = build_cost(&x, &y, None, None, 1.0).unwrap();
        let a = uniform(10);
        let b = uniform(4);
        let classes: Vec<Option<usize>> = (0..10).map(|i| Some(usize::from(i >= 5))).collect();

        let concentration = |plan: &Array2<f64>| -> f64 {
            let mut total = 0.0;
            for j in 0..4 {
                let lower: f64 = (0..5).map(|i| plan[(i, j)]).sum();
                let upper: f64 = (5..10).map(|i| plan[(i, j)]).sum();
                total += lower.max(upper) / (lower + upper);
            }
            total / 4.0
        };

        let plain = solve_sinkhorn(&cost, &a, &b, 2.0, DEFAULT_MAX_ITER, 1e-9).unwrap();
        let grouped = solve_sinkhorn_l1l2(&cost, &a, &b, 2.0, 5.0, &classes, 10).unwrap();
        assert!(
            concentration(grouped.coupling.matrix()) >= concentration(plain.coupling.matrix()),
            "group term must not reduce class concentration"
        );
        let lp = solve_sinkhorn_lpl1(&cost, &a, &b, 2.0, 5.0, 0.5, &classes, 10).unwrap();
        assert!(
            concentration(lp.coupling.matrix()) >= concentration(plain.coupling.matrix())
        );
    }
}
