//! Inverse sign-gradient attack and the perturbation bound that keeps it
//! cyclically monotone.
//!
//! The attack is *targeted at the true label*: it descends the head loss,
//! turning a sample into one the classifier gets right instead of fooling it.
//! Iterates stay inside an epsilon-ball around the starting point; as long as
//! epsilon is at most half the minimal pairwise distance of the attacked set,
//! the pairing (input, output) is cyclically monotone under quadratic cost,
//! which is exactly what [`crate::monotonicity`] verifies.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::ClassifierParams;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::{step_sign, Scalar};

/// Geometry of the clipping region around the attacked point.
///
/// `L2` projects onto the Euclidean epsilon-ball. `Linf` clips each
/// coordinate to a box of half-width `epsilon / sqrt(d)`, the largest box
/// inscribed in that ball, so the Euclidean displacement guarantee — the one
/// the monotonicity bound needs — holds in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    L2,
    Linf,
}

/// Parameters of the iterative inverse attack.
#[derive(Debug, Clone, Serialize)]
pub struct AttackConfig<F: Scalar> {
    /// Euclidean radius the output may move from the input.
    pub epsilon: F,
    /// Per-iteration step size.
    pub alpha: F,
    pub iterations: usize,
    pub ball_norm: BallNorm,
    /// Permit `build_source_fiction` to run with epsilon above the pairwise
    /// bound. Outside the bound no monotonicity guarantee is made.
    pub override_bound: bool,
}

impl<F: Scalar> Default for AttackConfig<F> {
    /// 50 steps at radius 0.45 with the usual `2.5 * epsilon / iterations`
    /// step size.
    fn default() -> Self {
        Self::with_step_heuristic(F::cast(0.45), 50, BallNorm::L2)
            .expect("default configuration is valid")
    }
}

impl<F: Scalar> AttackConfig<F> {
    /// Build a config with `alpha = 2.5 * epsilon / iterations`.
    pub fn with_step_heuristic(epsilon: F, iterations: usize, ball_norm: BallNorm) -> Result<Self> {
        let alpha = if iterations == 0 || epsilon == F::zero() {
            epsilon.max(F::cast(f64::MIN_POSITIVE))
        } else {
            (F::cast(2.5) * epsilon / F::cast(iterations as f64)).min(epsilon)
        };
        let cfg = Self {
            epsilon,
            alpha,
            iterations,
            ball_norm,
            override_bound: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= F::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        // A single step must stay inside the ball. With a zero radius every
        // iterate projects back onto the start, so any alpha is harmless.
        if self.iterations >= 1 && self.epsilon > F::zero() && self.alpha > self.epsilon {
            return Err(Error::InvalidParameter(format!(
                "alpha ({}) must not exceed epsilon ({}) when iterating",
                self.alpha, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Half the minimal pairwise Euclidean distance between rows: the largest
/// perturbation radius for which the cyclical-monotonicity guarantee holds.
/// Duplicate rows collapse the bound to zero and are rejected.
pub fn epsilon_bound<F: Scalar>(points: &Array2<F>) -> Result<F> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "bound needs at least 2 rows, got {n}"
        )));
    }
    let mut min_sq = F::infinity();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d = F::zero();
            for k in 0..points.ncols() {
                let diff = points[(i, k)] - points[(j, k)];
                d += diff * diff;
            }
            if d < min_sq {
                min_sq = d;
            }
        }
    }
    if min_sq == F::zero() {
        return Err(Error::DegenerateInput(
            "duplicate rows make the perturbation bound zero".into(),
        ));
    }
    Ok(min_sq.sqrt() / F::cast(2.0))
}

fn project_onto_ball<F: Scalar>(
    point: &mut Array1<F>,
    center: ArrayView1<'_, F>,
    epsilon: F,
    norm: BallNorm,
) {
    match norm {
        BallNorm::L2 => {
            let mut sq = F::zero();
            for (p, c) in point.iter().zip(center.iter()) {
                let d = *p - *c;
                sq += d * d;
            }
            let dist = sq.sqrt();
            if dist > epsilon {
                let shrink = epsilon / dist;
                for (p, c) in point.iter_mut().zip(center.iter()) {
                    *p = *c + (*p - *c) * shrink;
                }
            }
        }
        BallNorm::Linf => {
            let width = epsilon / F::cast((center.len() as f64).sqrt());
            for (p, c) in point.iter_mut().zip(center.iter()) {
                *p = (*p).max(*c - width).min(*c + width);
            }
        }
    }
}

/// Iterative inverse attack on one latent point:
/// `x' <- clip(x' - alpha * sign(grad loss(x', true_label)))`.
///
/// Returns the final iterate. The non-worsening guarantee — head loss at the
/// result never exceeds head loss at the input — is checked at the end; if
/// the final iterate violates it (large steps can overshoot), the best-loss
/// iterate seen along the trajectory is returned instead.
pub fn inverse_fsgd<F: Scalar>(
    params: &ClassifierParams<F>,
    point: ArrayView1<'_, F>,
    true_label: usize,
    cfg: &AttackConfig<F>,
) -> Result<Array1<F>> {
    cfg.validate()?;
    if cfg.iterations == 0 || cfg.epsilon == F::zero() {
        // Radius-zero ball or no iterations: the attack is the identity.
        params.head_loss(point, true_label)?;
        return Ok(point.to_owned());
    }

    let mut current = point.to_owned();
    let mut best = current.clone();
    let start_loss = params.head_loss(point, true_label)?;
    let mut best_loss = start_loss;
    let mut last_loss = start_loss;
    for _ in 0..cfg.iterations {
        let grad = params.head_loss_gradient(current.view(), true_label)?;
        for (x, g) in current.iter_mut().zip(grad.iter()) {
            *x = *x - cfg.alpha * step_sign(*g);
        }
        project_onto_ball(&mut current, point, cfg.epsilon, cfg.ball_norm);
        last_loss = params.head_loss(current.view(), true_label)?;
        if last_loss < best_loss {
            best_loss = last_loss;
            best.assign(&current);
        }
    }
    if last_loss <= start_loss {
        Ok(current)
    } else {
        Ok(best)
    }
}

/// One warning per fiction point the classifier still gets wrong.
#[derive(Debug, Clone, Serialize)]
pub struct FictionWarning {
    pub row: usize,
    pub true_label: usize,
    pub predicted: usize,
}

/// The attacked copy of the labeled targets, plus everything the sidecar
/// format records about how it was built.
#[derive(Debug, Clone)]
pub struct SourceFiction<F: Scalar> {
    pub data: LabeledDataset<F>,
    /// Pairwise bound of the attacked points.
    pub bound: F,
    /// Euclidean displacement of each row.
    pub displacements: Vec<F>,
    pub warnings: Vec<FictionWarning>,
    pub config: AttackConfig<F>,
}

impl<F: Scalar> SourceFiction<F> {
    /// Fraction of fiction rows the classifier head labels correctly.
    pub fn classification_rate(&self) -> f64 {
        let n = self.data.n();
        if n == 0 {
            return 0.0;
        }
        (n - self.warnings.len()) as f64 / n as f64
    }

    /// Sidecar document written next to a fiction CSV.
    pub fn sidecar(&self) -> FictionSidecar {
        FictionSidecar {
            epsilon: self.config.epsilon.as_f64(),
            alpha: self.config.alpha.as_f64(),
            iterations: self.config.iterations,
            ball_norm: self.config.ball_norm,
            override_bound: self.config.override_bound,
            bound: self.bound.as_f64(),
            classification_rate: self.classification_rate(),
            displacements: self.displacements.iter().map(|d| d.as_f64()).collect(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FictionSidecar {
    pub epsilon: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub ball_norm: BallNorm,
    pub override_bound: bool,
    pub bound: f64,
    pub classification_rate: f64,
    pub displacements: Vec<f64>,
    pub warnings: Vec<FictionWarning>,
}

/// Attack every row of a fully labeled latent-space dataset toward its own
/// label. Row `i` of the result corresponds to row `i` of the input; labels
/// and mass carry over unchanged.
///
/// Unless `cfg.override_bound` is set, `cfg.epsilon` must not exceed
/// [`epsilon_bound`] of the input features — that is the hypothesis under
/// which the output pairing is guaranteed cyclically monotone.
pub fn build_source_fiction<F: Scalar>(
    params: &ClassifierParams<F>,
    labeled_targets: &LabeledDataset<F>,
    cfg: &AttackConfig<F>,
) -> Result<SourceFiction<F>> {
    cfg.validate()?;
    let labels = labeled_targets.required_labels()?;
    if labeled_targets.dim() != params.latent_dim() {
        return Err(Error::InvalidParameter(format!(
            "fiction inputs must live in the {}-dimensional latent space, got dimension {}",
            params.latent_dim(),
            labeled_targets.dim()
        )));
    }
    let bound = epsilon_bound(labeled_targets.features())?;
    if cfg.epsilon > bound && !cfg.override_bound {
        return Err(Error::BoundViolation {
            epsilon: cfg.epsilon.as_f64(),
            bound: bound.as_f64(),
        });
    }

    // Rows are independent; run them in parallel but keep output order.
    let rows: Vec<(Array1<F>, F)> = (0..labeled_targets.n())
        .into_par_iter()
        .map(|i| {
            let attacked = inverse_fsgd(params, labeled_targets.row(i), labels[i], cfg)?;
            let mut sq = F::zero();
            for (a, b) in attacked.iter().zip(labeled_targets.row(i).iter()) {
                let d = *a - *b;
                sq += d * d;
            }
            Ok((attacked, sq.sqrt()))
        })
        .collect::<Result<_>>()?;

    let mut features = Array2::zeros((labeled_targets.n(), labeled_targets.dim()));
    let mut displacements = Vec::with_capacity(rows.len());
    for (i, (row, moved)) in rows.into_iter().enumerate() {
        features.row_mut(i).assign(&row);
        displacements.push(moved);
    }

    let predicted = params.head_predict(&features)?;
    let warnings = predicted
        .iter()
        .zip(&labels)
        .enumerate()
        .filter(|(_, (p, t))| *p != *t)
        .map(|(row, (p, t))| FictionWarning {
            row,
            true_label: *t,
            predicted: *p,
        })
        .collect();

    let data = labeled_targets.with_features(features)?;
    Ok(SourceFiction {
        data,
        bound,
        displacements,
        warnings,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train, Activation, ClassifierParams, Layer, Optimizer, TrainConfig};
    use crate::dataset::{generate_gaussian_mixture, select_labeled_subset};
    use crate::rng::seed_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn bound_of_two_points_at_distance_two_is_one() {
        let points = array![[0.0f64, 0.0], [2.0, 0.0]];
        assert_abs_diff_eq!(epsilon_bound(&points).unwrap(), 1.0);
    }

    #[test]
    fn bound_on_a_line_uses_the_minimum_gap() {
        let points = array![[0.0f64], [2.0], [5.0]];
        assert_abs_diff_eq!(epsilon_bound(&points).unwrap(), 1.0);
    }

    // Independent oracle: all ordered pairs, distances via an explicit loop.
    #[test]
    fn bound_matches_double_loop_oracle() {
        let mut rng = seed_rng(314);
        let mut points = Array2::<f64>::zeros((100, 16));
        for v in points.iter_mut() {
            *v = rng.random_range(-3.0..3.0);
        }
        let mut oracle = f64::INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                if i == j {
                    continue;
                }
                let d: f64 = (0..16)
                    .map(|k| (points[(i, k)] - points[(j, k)]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                oracle = oracle.min(d);
            }
        }
        assert_abs_diff_eq!(
            epsilon_bound(&points).unwrap(),
            oracle / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn duplicate_rows_are_degenerate() {
        let points = array![[1.0f64, 2.0], [1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(
            epsilon_bound(&points),
            Err(Error::DegenerateInput(_))
        ));
    }

    fn logistic_head(w: f64) -> ClassifierParams<f64> {
        // Identity passthrough into a 1 -> 2 linear head with logits
        // (0, w*z): a logistic model on a one-dimensional latent space.
        ClassifierParams::new(
            vec![
                Layer {
                    weights: array![[1.0]],
                    bias: array![0.0],
                    activation: Activation::Identity,
                },
                Layer {
                    weights: array![[0.0, w]],
                    bias: array![0.0, 0.0],
                    activation: Activation::Identity,
                },
            ],
            0,
            2,
        )
        .unwrap()
    }

    #[test]
    fn zero_iterations_and_zero_radius_are_identities() {
        let params = logistic_head(2.0);
        let point = array![0.25];
        let mut cfg = AttackConfig::<f64>::with_step_heuristic(0.5, 0, BallNorm::L2).unwrap();
        assert_eq!(
            inverse_fsgd(&params, point.view(), 1, &cfg).unwrap(),
            point
        );
        cfg = AttackConfig::with_step_heuristic(0.0, 10, BallNorm::L2).unwrap();
        assert_eq!(
            inverse_fsgd(&params, point.view(), 1, &cfg).unwrap(),
            point
        );
    }

    #[test]
    fn one_logistic_step_moves_uphill_in_score() {
        // With weight w > 0 and true label 1, the loss gradient in z is
        // negative, so a single sign step moves the point by +alpha and the
        // loss strictly decreases.
        let params = logistic_head(3.0);
        let start = array![0.1];
        let cfg = AttackConfig {
            epsilon: 1.0,
            alpha: 0.25,
            iterations: 1,
            ball_norm: BallNorm::L2,
            override_bound: false,
        };
        let out = inverse_fsgd(&params, start.view(), 1, &cfg).unwrap();
        assert_abs_diff_eq!(out[0], 0.35, epsilon = 1e-12);
        let before = params.head_loss(start.view(), 1).unwrap();
        let after = params.head_loss(out.view(), 1).unwrap();
        assert!(after < before);
    }

    #[test]
    fn displacement_never_exceeds_epsilon_in_either_norm() {
        let data = generate_gaussian_mixture::<f64>(3, 20, 2, 5.0, 0.5, 50).unwrap();
        let params = train(
            &data,
            &[16, 8, 3],
            &TrainConfig {
                epochs: 60,
                optimizer: Optimizer::Adam,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let latent = params.latent(data.features()).unwrap();
        let latent_data = data.with_features(latent).unwrap();
        let (subset, _) = select_labeled_subset(&latent_data, 5, 9).unwrap();
        let bound = epsilon_bound(subset.features()).unwrap();
        for norm in [BallNorm::L2, BallNorm::Linf] {
            let cfg = AttackConfig::with_step_heuristic(0.9 * bound, 25, norm).unwrap();
            let fiction = build_source_fiction(&params, &subset, &cfg).unwrap();
            for &d in &fiction.displacements {
                assert!(d <= cfg.epsilon * (1.0 + 1e-12), "{d} > {}", cfg.epsilon);
            }
        }
    }

    #[test]
    fn fiction_preserves_rows_labels_and_mass() {
        let data = generate_gaussian_mixture::<f64>(2, 10, 2, 4.0, 0.4, 3).unwrap();
        let params = train(&data, &[8, 4, 2], &TrainConfig::default()).unwrap();
        let latent = data
            .with_features(params.latent(data.features()).unwrap())
            .unwrap();
        let cfg = AttackConfig::with_step_heuristic(0.0, 0, BallNorm::L2).unwrap();
        let fiction = build_source_fiction(&params, &latent, &cfg).unwrap();
        // Zero-step attack: the fiction is exactly the labeled input.
        assert_eq!(fiction.data, latent);
        assert_abs_diff_eq!(fiction.classification_rate(), {
            let preds = params.head_predict(latent.features()).unwrap();
            let truth = latent.required_labels().unwrap();
            crate::dataset::accuracy(&truth, &preds)
        });
    }

    #[test]
    fn epsilon_above_bound_is_rejected_unless_overridden() {
        let data = generate_gaussian_mixture::<f64>(2, 5, 2, 4.0, 0.4, 13).unwrap();
        let params = train(&data, &[4, 2], &TrainConfig::default()).unwrap();
        let latent = data
            .with_features(params.latent(data.features()).unwrap())
            .unwrap();
        let bound = epsilon_bound(latent.features()).unwrap();
        let mut cfg = AttackConfig::with_step_heuristic(bound * 2.0, 5, BallNorm::L2).unwrap();
        match build_source_fiction(&params, &latent, &cfg) {
            Err(Error::BoundViolation { epsilon, bound: b }) => {
                assert_abs_diff_eq!(epsilon, 2.0 * bound);
                assert_abs_diff_eq!(b, bound);
            }
            other => panic!("expected bound violation, got {other:?}"),
        }
        cfg.override_bound = true;
        assert!(build_source_fiction(&params, &latent, &cfg).is_ok());
    }

    #[test]
    fn attack_improves_or_preserves_classification() {
        let data = generate_gaussian_mixture::<f64>(3, 30, 2, 5.0, 0.5, 60).unwrap();
        let params = train(
            &data,
            &[16, 8, 3],
            &TrainConfig {
                epochs: 40,
                optimizer: Optimizer::Adam,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let latent = data
            .with_features(params.latent(data.features()).unwrap())
            .unwrap();
        let (subset, _) = select_labeled_subset(&latent, 10, 4).unwrap();
        let bound = epsilon_bound(subset.features()).unwrap();
        let cfg = AttackConfig::with_step_heuristic(0.9 * bound, 50, BallNorm::L2).unwrap();
        let fiction = build_source_fiction(&params, &subset, &cfg).unwrap();
        let raw_preds = params.head_predict(subset.features()).unwrap();
        let truth = subset.required_labels().unwrap();
        let raw_rate = crate::dataset::accuracy(&truth, &raw_preds);
        assert!(fiction.classification_rate() >= raw_rate);
    }

    #[test]
    fn attack_is_bitwise_deterministic() {
        let data = generate_gaussian_mixture::<f64>(3, 10, 2, 5.0, 0.5, 61).unwrap();
        let params = train(&data, &[8, 4, 3], &TrainConfig::default()).unwrap();
        let latent = data
            .with_features(params.latent(data.features()).unwrap())
            .unwrap();
        let bound = epsilon_bound(latent.features()).unwrap();
        let cfg = AttackConfig::with_step_heuristic(bound, 20, BallNorm::L2).unwrap();
        let a = build_source_fiction(&params, &latent, &cfg).unwrap();
        let b = build_source_fiction(&params, &latent, &cfg).unwrap();
        assert_eq!(a.data, b.data);
    }
}
