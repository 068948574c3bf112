//! Cyclical-monotonicity oracle for point pairings under quadratic cost.
//!
//! A pairing `(x_1, x'_1), ..., (x_N, x'_N)` is cyclically monotone when for
//! every index cycle the matched cost sum stays below the shifted one:
//! `sum c(x_i, x'_i) <= sum c(x_i, x'_{i+1})`. Optimal transport plans have
//! this property, and so does any perturbation whose radius stays within half
//! the minimal pairwise distance of the inputs — the fact the attack module
//! relies on. This module checks the property by brute force (exhaustively
//! for small `N`, by sampled cycles otherwise), and measures how quickly it
//! breaks past the bound.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::attack::epsilon_bound;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

/// Quadratic transport cost `c(x, y) = 0.5 * ||x - y||^2`.
///
/// Both vectors must have the same length.
pub fn quadratic_cost<F: Scalar>(x: ArrayView1<'_, F>, y: ArrayView1<'_, F>) -> F {
    assert_eq!(x.len(), y.len(), "quadratic cost needs equal dimensions");
    let mut sum = F::zero();
    for (a, b) in x.iter().zip(y.iter()) {
        let d = *a - *b;
        sum += d * d;
    }
    sum / F::cast(2.0)
}

/// Source points paired with their images, row for row.
#[derive(Debug, Clone)]
pub struct Pairing<F: Scalar> {
    source: Array2<F>,
    paired: Array2<F>,
}

impl<F: Scalar> Pairing<F> {
    pub fn new(source: Array2<F>, paired: Array2<F>) -> Result<Self> {
        if source.dim() != paired.dim() {
            return Err(Error::InvalidParameter(format!(
                "pairing shapes differ: {:?} vs {:?}",
                source.dim(),
                paired.dim()
            )));
        }
        if source.nrows() == 0 {
            return Err(Error::InvalidParameter("pairing must not be empty".into()));
        }
        Ok(Self { source, paired })
    }

    pub fn len(&self) -> usize {
        self.source.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.source.nrows() == 0
    }

    pub fn source(&self) -> &Array2<F> {
        &self.source
    }

    pub fn paired(&self) -> &Array2<F> {
        &self.paired
    }

    /// Matrix of costs `c(x_i, x'_j)`; entry `(i, i)` is the matched cost.
    fn cost_table(&self) -> Array2<F> {
        let n = self.len();
        let mut table = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                table[(i, j)] = quadratic_cost(self.source.row(i), self.paired.row(j));
            }
        }
        table
    }
}

/// Witness that a cycle violates the monotonicity inequality: the matched
/// sum (`lhs`) exceeds the shifted sum (`rhs`) by `gap > tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    pub cycle: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// How [`check_cycles`] walks the cycle space.
#[derive(Debug, Clone, Copy)]
pub enum CycleMode {
    /// Every cycle of length `2..=max_cycle_len` over distinct indices,
    /// cyclic rotations deduplicated (reflections are kept: the inequality is
    /// orientation-dependent). Limited to `N <= 10`.
    Exhaustive,
    /// `count` random distinct-index cycles with lengths drawn uniformly
    /// from `2..=max_cycle_len`.
    Sampled { seed: u64, count: usize },
}

#[derive(Clone, Copy)]
struct CycleCheck<'a, F: Scalar> {
    table: &'a Array2<F>,
    tolerance: F,
}

impl<F: Scalar> CycleCheck<'_, F> {
    fn evaluate(&self, cycle: &[usize]) -> Option<ViolationReport> {
        let k = cycle.len();
        let mut lhs = F::zero();
        let mut rhs = F::zero();
        for t in 0..k {
            lhs += self.table[(cycle[t], cycle[t])];
            rhs += self.table[(cycle[t], cycle[(t + 1) % k])];
        }
        if lhs - rhs > self.tolerance {
            Some(ViolationReport {
                cycle: cycle.to_vec(),
                lhs: lhs.as_f64(),
                rhs: rhs.as_f64(),
                gap: (lhs - rhs).as_f64(),
            })
        } else {
            None
        }
    }
}

/// Search for a violating cycle; `None` means the pairing passed.
///
/// Exhaustive mode enumerates canonical cycles (smallest index first) in
/// lexicographic order and reports the first violation, which is therefore
/// the lexicographically smallest violating tuple; sampled mode reports the
/// first violation in the seeded draw sequence. Either way the verdict is a
/// pure function of the inputs.
pub fn check_cycles<F: Scalar>(
    pairing: &Pairing<F>,
    max_cycle_len: usize,
    tolerance: F,
    mode: CycleMode,
) -> Result<Option<ViolationReport>> {
    if max_cycle_len < 2 {
        return Err(Error::InvalidParameter(
            "max_cycle_len must be at least 2".into(),
        ));
    }
    let n = pairing.len();
    let max_len = max_cycle_len.min(n);
    if max_len < 2 {
        return Ok(None);
    }
    let table = pairing.cost_table();
    let check = CycleCheck {
        table: &table,
        tolerance,
    };

    match mode {
        CycleMode::Exhaustive => {
            if n > 10 {
                return Err(Error::Scale(n));
            }
            let mut stack = Vec::with_capacity(max_len);
            let mut used = vec![false; n];
            for start in 0..n {
                stack.push(start);
                used[start] = true;
                if let Some(v) = extend_cycles(&check, &mut stack, &mut used, start, max_len) {
                    return Ok(Some(v));
                }
                used[start] = false;
                stack.pop();
            }
            Ok(None)
        }
        CycleMode::Sampled { seed, count } => {
            let mut rng = stream_rng(seed, "cycle-sampling");
            let mut pool: Vec<usize> = (0..n).collect();
            let mut cycle = Vec::with_capacity(max_len);
            for _ in 0..count {
                let k = rng.random_range(2..=max_len);
                cycle.clear();
                // Partial Fisher-Yates: the first k entries become the cycle.
                for t in 0..k {
                    let pick = rng.random_range(t..n);
                    pool.swap(t, pick);
                    cycle.push(pool[t]);
                }
                if let Some(v) = check.evaluate(&cycle) {
                    return Ok(Some(v));
                }
            }
            Ok(None)
        }
    }
}

// Depth-first extension over indices strictly above the cycle's first entry,
// in ascending order. Checking every prefix of depth >= 2 yields each
// rotation-canonical tuple exactly once, in lexicographic order.
fn extend_cycles<F: Scalar>(
    check: &CycleCheck<'_, F>,
    stack: &mut Vec<usize>,
    used: &mut [bool],
    start: usize,
    max_len: usize,
) -> Option<ViolationReport> {
    if stack.len() >= 2 {
        if let Some(v) = check.evaluate(stack) {
            return Some(v);
        }
    }
    if stack.len() == max_len {
        return None;
    }
    for next in (start + 1)..used.len() {
        if used[next] {
            continue;
        }
        stack.push(next);
        used[next] = true;
        if let Some(v) = extend_cycles(check, stack, used, start, max_len) {
            return Some(v);
        }
        used[next] = false;
        stack.pop();
    }
    None
}

/// One row of the bound-sharpness scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub multiplier: f64,
    pub violation_rate: f64,
}

const SCAN_CYCLES_PER_TRIAL: usize = 2000;
const SCAN_MAX_CYCLE_LEN: usize = 8;

/// Perturb `points` at radius exactly `multiplier * epsilon_bound(points)`
/// and measure, per multiplier, the fraction of `trials` whose pairing shows
/// a sampled-cycle violation. For multipliers at or below one the rate is
/// zero by the monotonicity guarantee; past the bound it becomes an
/// empirical measurement, not a certified quantity.
pub fn lemma_bound_sharpness_scan<F: Scalar>(
    points: &Array2<F>,
    multipliers: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    if multipliers.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidParameter(
            "multipliers must be positive".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let bound = epsilon_bound(points)?;
    let n = points.nrows();
    let d = points.ncols();
    let mut rows = Vec::with_capacity(multipliers.len());
    for (mi, &multiplier) in multipliers.iter().enumerate() {
        let radius = F::cast(multiplier) * bound;
        let mut violations = 0usize;
        for trial in 0..trials {
            let label = format!("scan.m{mi}.t{trial}");
            let mut rng = stream_rng(seed, &label);
            let mut paired = points.clone();
            for i in 0..n {
                // Uniform random direction scaled to the exact radius.
                let mut dir = Array1::<F>::zeros(d);
                let mut norm = F::zero();
                while norm <= F::zero() {
                    for v in dir.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = F::cast(z);
                    }
                    norm = dir.iter().map(|v| *v * *v).sum::<F>().sqrt();
                }
                let scale = radius / norm;
                for (p, v) in paired.row_mut(i).iter_mut().zip(dir.iter()) {
                    *p += *v * scale;
                }
            }
            let pairing = Pairing::new(points.clone(), paired)?;
            let verdict = check_cycles(
                &pairing,
                SCAN_MAX_CYCLE_LEN,
                F::cast(1e-9),
                CycleMode::Sampled {
                    seed: crate::rng::derive_seed(seed, &label),
                    count: SCAN_CYCLES_PER_TRIAL,
                },
            )?;
            if verdict.is_some() {
                violations += 1;
            }
        }
        rows.push(ScanRow {
            multiplier,
            violation_rate: violations as f64 / trials as f64,
        });
    }
    Ok(rows)
}

/// CSV form of a scan: `multiplier,violation_rate` per row.
pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("multiplier,violation_rate\n");
    for row in rows {
        out.push_str(&format!("{},{}\n", row.multiplier, row.violation_rate));
    }
    out
}

/// The canonical one-dimensional crossing: `x = (0, 2)` paired to
/// `x' = (2, 0)`. Its two-cycle has matched sum 4 against shifted sum 0 —
/// the textbook violation used by the demo and the tests.
pub fn demo_crossing_pairing<F: Scalar>() -> Pairing<F> {
    let source = Array2::from_shape_vec((2, 1), vec![F::zero(), F::cast(2.0)])
        .expect("static shape");
    let paired = Array2::from_shape_vec((2, 1), vec![F::cast(2.0), F::zero()])
        .expect("static shape");
    Pairing::new(source, paired).expect("shapes match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn quadratic_cost_basics() {
        let v = array![1.0f64, -2.0, 3.0];
        assert_abs_diff_eq!(quadratic_cost(v.view(), v.view()), 0.0);
        let a = array![0.0f64, 0.0];
        let b = array![3.0f64, 4.0];
        assert_abs_diff_eq!(quadratic_cost(a.view(), b.view()), 12.5);
        let mut rng = seed_rng(2);
        for _ in 0..20 {
            let x = Array1::from_iter((0..4).map(|_| rng.random_range(-5.0..5.0)));
            let y = Array1::from_iter((0..4).map(|_| rng.random_range(-5.0..5.0)));
            assert_abs_diff_eq!(
                quadratic_cost(x.view(), y.view()),
                quadratic_cost(y.view(), x.view())
            );
        }
    }

    #[test]
    fn identity_pairing_never_violates() {
        let mut rng = seed_rng(5);
        let points =
            Array2::from_shape_fn((7, 3), |_| rng.random_range(-2.0..2.0f64));
        let pairing = Pairing::new(points.clone(), points).unwrap();
        let verdict = check_cycles(&pairing, 7, 1e-9, CycleMode::Exhaustive).unwrap();
        assert!(verdict.is_none());
    }

    #[test]
    fn crossing_pair_reports_gap_four() {
        let pairing = demo_crossing_pairing::<f64>();
        let v = check_cycles(&pairing, 2, 1e-9, CycleMode::Exhaustive)
            .unwrap()
            .expect("crossing violates");
        assert_eq!(v.cycle, vec![0, 1]);
        assert_abs_diff_eq!(v.lhs, 4.0);
        assert_abs_diff_eq!(v.rhs, 0.0);
        assert_abs_diff_eq!(v.gap, 4.0);
    }

    #[test]
    fn exhaustive_mode_is_capped_at_ten_points() {
        let points = Array2::<f64>::zeros((11, 2));
        let shifted = points.clone() + 1.0;
        let pairing = Pairing::new(points, shifted).unwrap();
        assert!(matches!(
            check_cycles(&pairing, 4, 1e-9, CycleMode::Exhaustive),
            Err(Error::Scale(11))
        ));
    }

    #[test]
    fn bounded_perturbations_are_monotone() {
        // Direct brute-force statement of the perturbation guarantee over
        // random instances.
        let mut rng = seed_rng(123);
        for trial in 0..50 {
            let n = rng.random_range(2..=8);
            let d = rng.random_range(1..=4);
            let points = Array2::from_shape_fn((n, d), |_| rng.random_range(-5.0..5.0f64));
            let bound = match epsilon_bound(&points) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let mut paired = points.clone();
            for i in 0..n {
                let dir = Array1::from_iter((0..d).map(|_| rng.random_range(-1.0..1.0f64)));
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let radius = bound * rng.random_range(0.0..=1.0);
                for (p, v) in paired.row_mut(i).iter_mut().zip(dir.iter()) {
                    *p += v * radius / norm;
                }
            }
            let pairing = Pairing::new(points, paired).unwrap();
            let verdict = check_cycles(&pairing, n, 1e-9, CycleMode::Exhaustive).unwrap();
            assert!(verdict.is_none(), "trial {trial} found {verdict:?}");
        }
    }

    #[test]
    fn verdict_is_invariant_under_row_relabeling() {
        let mut rng = seed_rng(9);
        for _ in 0..30 {
            let n = rng.random_range(2..=6);
            let points = Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0f64));
            let paired = Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0f64));
            let pairing = Pairing::new(points.clone(), paired.clone()).unwrap();
            let base = check_cycles(&pairing, n, 1e-9, CycleMode::Exhaustive)
                .unwrap()
                .is_some();
            // One fixed permutation per instance: rotate rows by one.
            let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            let mut p2 = points.clone();
            let mut q2 = paired.clone();
            for (to, &from) in perm.iter().enumerate() {
                p2.row_mut(to).assign(&points.row(from));
                q2.row_mut(to).assign(&paired.row(from));
            }
            let permuted = Pairing::new(p2, q2).unwrap();
            let after = check_cycles(&permuted, n, 1e-9, CycleMode::Exhaustive)
                .unwrap()
                .is_some();
            assert_eq!(base, after);
        }
    }

    #[test]
    fn two_cycle_violations_match_the_crossing_condition() {
        let mut rng = seed_rng(31);
        for _ in 0..50 {
            let points = Array2::from_shape_fn((2, 2), |_| rng.random_range(-3.0..3.0f64));
            let paired = Array2::from_shape_fn((2, 2), |_| rng.random_range(-3.0..3.0f64));
            let pairing = Pairing::new(points.clone(), paired.clone()).unwrap();
            let found = check_cycles(&pairing, 2, 1e-9, CycleMode::Exhaustive)
                .unwrap()
                .is_some();
            let direct = quadratic_cost(points.row(0), paired.row(0))
                + quadratic_cost(points.row(1), paired.row(1))
                > quadratic_cost(points.row(0), paired.row(1))
                    + quadratic_cost(points.row(1), paired.row(0))
                    + 1e-9;
            assert_eq!(found, direct);
        }
    }

    #[test]
    fn sampled_mode_finds_the_demo_crossing() {
        let pairing = demo_crossing_pairing::<f64>();
        let verdict = check_cycles(
            &pairing,
            2,
            1e-9,
            CycleMode::Sampled { seed: 1, count: 64 },
        )
        .unwrap();
        assert!(verdict.is_some());
    }

    #[test]
    fn scan_reports_zero_rate_at_or_below_the_bound() {
        let mut rng = seed_rng(77);
        let points = Array2::from_shape_fn((10, 3), |_| rng.random_range(-4.0..4.0f64));
        let rows =
            lemma_bound_sharpness_scan(&points, &[0.25, 0.5, 1.0], 20, 3141).unwrap();
        for row in &rows {
            assert_eq!(row.violation_rate, 0.0, "multiplier {}", row.multiplier);
        }
        let csv = scan_to_csv(&rows);
        assert!(csv.starts_with("multiplier,violation_rate\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
