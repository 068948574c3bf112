//! End-to-end adaptation: train on source, attack the labeled target subset
//! into a source fiction, transport every target sample onto it, classify.
//!
//! `adapt` also computes two baselines on the same latent geometry — the
//! classifier applied directly to the target (source-only) and transport
//! onto the real source latents (plain) — so a run yields the three-way
//! comparison the benchmark tables are made of. `ablate_epsilon` sweeps the
//! attack radius as a multiple of the monotonicity bound, and `benchmark`
//! aggregates repetitions with independently re-drawn labeled subsets.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{build_source_fiction, epsilon_bound, AttackConfig};
use crate::classifier::{train_with_activation, Activation, Optimizer, TrainConfig};
use crate::dataset::{
    accuracy, apply_shift, generate_gaussian_mixture, labeled_split_indices, LabeledDataset,
    ShiftSpec,
};
use crate::error::{Error, Result};
use crate::ot::{
    barycentric_map, build_cost, default_label_penalty, solve_emd, solve_sinkhorn,
    solve_sinkhorn_l1l2, solve_sinkhorn_lpl1, solve_otlin_guided, CostMatrix, SolverTag,
    TransportResult, DEFAULT_MAX_ITER, DEFAULT_OUTER_ITER, DEFAULT_SINKHORN_TOL,
};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

/// Solver choice plus its hyperparameters. Regularization defaults to 4.0
/// and the remaining knobs follow the reference discrete-OT defaults.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverConfig<F: Scalar> {
    Emd,
    Sinkhorn {
        reg: F,
    },
    SinkhornL1L2 {
        reg: F,
        eta: F,
        outer_iter: usize,
    },
    SinkhornLpL1 {
        reg: F,
        eta: F,
        p: F,
        outer_iter: usize,
    },
    OtLin {
        reg: F,
        mu: F,
        outer_iter: usize,
    },
}

impl<F: Scalar> SolverConfig<F> {
    pub fn tag(&self) -> SolverTag {
        match self {
            SolverConfig::Emd => SolverTag::Emd,
            SolverConfig::Sinkhorn { .. } => SolverTag::Sinkhorn,
            SolverConfig::SinkhornL1L2 { .. } => SolverTag::SinkhornL1L2,
            SolverConfig::SinkhornLpL1 { .. } => SolverTag::SinkhornLpL1,
            SolverConfig::OtLin { .. } => SolverTag::OtLin,
        }
    }

    /// The five solvers at their default hyperparameters.
    pub fn default_suite() -> Vec<Self> {
        let reg = F::cast(4.0);
        vec![
            SolverConfig::Emd,
            SolverConfig::Sinkhorn { reg },
            SolverConfig::SinkhornL1L2 {
                reg,
                eta: F::cast(0.1),
                outer_iter: DEFAULT_OUTER_ITER,
            },
            SolverConfig::SinkhornLpL1 {
                reg,
                eta: F::cast(0.1),
                p: F::cast(0.5),
                outer_iter: DEFAULT_OUTER_ITER,
            },
            SolverConfig::OtLin {
                reg,
                mu: F::one(),
                outer_iter: DEFAULT_OUTER_ITER,
            },
        ]
    }

    /// Parse a solver tag with default hyperparameters.
    pub fn from_name(name: &str) -> Result<Self> {
        let reg = F::cast(4.0);
        match name {
            "emd" => Ok(SolverConfig::Emd),
            "sinkhorn" => Ok(SolverConfig::Sinkhorn { reg }),
            "sinkhorn_l1l2" | "sinkhorn-l1l2" => Ok(SolverConfig::SinkhornL1L2 {
                reg,
                eta: F::cast(0.1),
                outer_iter: DEFAULT_OUTER_ITER,
            }),
            "sinkhorn_lpl1" | "sinkhorn-lpl1" => Ok(SolverConfig::SinkhornLpL1 {
                reg,
                eta: F::cast(0.1),
                p: F::cast(0.5),
                outer_iter: DEFAULT_OUTER_ITER,
            }),
            "otlin" => Ok(SolverConfig::OtLin {
                reg,
                mu: F::one(),
                outer_iter: DEFAULT_OUTER_ITER,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver {other:?}; expected emd | sinkhorn | sinkhorn-l1l2 | sinkhorn-lpl1 | otlin"
            ))),
        }
    }
}

/// Everything `adapt` needs besides the two datasets.
#[derive(Debug, Clone)]
pub struct AdaptationConfig<F: Scalar> {
    pub solver: SolverConfig<F>,
    pub attack: AttackConfig<F>,
    pub per_class_labeled: usize,
    pub seed: u64,
    /// Apply the label-penalized cost to both the fiction and the plain
    /// transport problems (both sides see the same supervision).
    pub label_penalty: bool,
    pub train: TrainConfig<F>,
    /// Hidden layer widths; the class count is appended automatically.
    pub hidden_layers: Vec<usize>,
    /// Activation of the hidden layers.
    pub hidden_activation: Activation,
}

impl<F: Scalar> Default for AdaptationConfig<F> {
    fn default() -> Self {
        Self {
            solver: SolverConfig::Emd,
            attack: AttackConfig::default(),
            per_class_labeled: 10,
            seed: 0,
            label_penalty: true,
            train: TrainConfig {
                optimizer: Optimizer::Adam,
                epochs: 300,
                ..TrainConfig::default()
            },
            hidden_layers: vec![32, 16],
            hidden_activation: Activation::Relu,
        }
    }
}

/// Outcome of one adaptation run. Accuracies are over every target row
/// against its ground-truth label; the confusion matrix belongs to the
/// fiction-OT variant.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptationReport {
    pub solver: String,
    pub source_only_accuracy: f64,
    pub plain_ot_accuracy: f64,
    pub fiction_ot_accuracy: f64,
    /// `confusion[true][predicted]`, fiction-OT variant.
    pub confusion: Vec<Vec<usize>>,
    pub fiction_classification_rate: f64,
    pub epsilon_used: f64,
    pub bound: f64,
    pub fiction_converged: bool,
    pub plain_converged: bool,
    /// Wall-clock seconds per stage; excluded from deterministic outputs.
    pub stage_seconds: Vec<(String, f64)>,
}

fn solve_with<F: Scalar>(
    solver: &SolverConfig<F>,
    x: &Array2<F>,
    y: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    x_labels: &[Option<usize>],
    y_labels: &[Option<usize>],
    use_penalty: bool,
) -> Result<TransportResult<F>> {
    let cost = build_penalized_cost(x, y, x_labels, y_labels, use_penalty)?;
    match solver {
        SolverConfig::Emd => solve_emd(&cost, a, b),
        SolverConfig::Sinkhorn { reg } => solve_sinkhorn(
            &cost,
            a,
            b,
            *reg,
            DEFAULT_MAX_ITER,
            F::cast(DEFAULT_SINKHORN_TOL),
        ),
        SolverConfig::SinkhornL1L2 {
            reg,
            eta,
            outer_iter,
        } => solve_sinkhorn_l1l2(&cost, a, b, *reg, *eta, x_labels, *outer_iter),
        SolverConfig::SinkhornLpL1 {
            reg,
            eta,
            p,
            outer_iter,
        } => solve_sinkhorn_lpl1(&cost, a, b, *reg, *eta, *p, x_labels, *outer_iter),
        SolverConfig::OtLin {
            reg,
            mu,
            outer_iter,
        } => {
            let penalty = default_label_penalty(x, y)?;
            let (xl, yl): (Vec<Option<usize>>, Vec<Option<usize>>) = if use_penalty {
                (x_labels.to_vec(), y_labels.to_vec())
            } else {
                (vec![None; x.nrows()], vec![None; y.nrows()])
            };
            let solution =
                solve_otlin_guided(x, y, a, b, *reg, *mu, *outer_iter, &xl, &yl, penalty)?;
            Ok(solution.transport)
        }
    }
}

fn build_penalized_cost<F: Scalar>(
    x: &Array2<F>,
    y: &Array2<F>,
    x_labels: &[Option<usize>],
    y_labels: &[Option<usize>],
    use_penalty: bool,
) -> Result<CostMatrix<F>> {
    if use_penalty {
        let penalty = default_label_penalty(x, y)?;
        build_cost(x, y, Some(x_labels), Some(y_labels), penalty)
    } else {
        build_cost(x, y, None, None, F::one())
    }
}

/// Attack configuration actually used by a run: the requested radius clamped
/// to the pairwise bound (unless the override flag allows exceeding it), with
/// the step size rebuilt by the `2.5 * eps / iterations` rule whenever the
/// clamp changed the radius.
fn effective_attack<F: Scalar>(requested: &AttackConfig<F>, bound: F) -> Result<AttackConfig<F>> {
    if requested.override_bound || requested.epsilon <= bound {
        return Ok(requested.clone());
    }
    let mut cfg = AttackConfig::with_step_heuristic(bound, requested.iterations, requested.ball_norm)?;
    cfg.override_bound = requested.override_bound;
    Ok(cfg)
}

/// Run the full adaptation: (1) train on source, (2) embed both domains,
/// (3) draw the labeled target subset, (4) attack it into the fiction,
/// (5) build the label-penalized cost from all target latents to the
/// fiction, (6) solve, (7) barycentric-map, (8) classify with the head —
/// plus the plain (target onto source latents) and source-only baselines.
/// Deterministic given `cfg.seed`.
pub fn adapt<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    cfg: &AdaptationConfig<F>,
) -> Result<AdaptationReport> {
    if cfg.per_class_labeled < 1 {
        return Err(Error::InvalidParameter(
            "per-class labeled count must be >= 1 (the method is semi-supervised)".into(),
        ));
    }
    let truth = target
        .required_labels()
        .map_err(|e| e.in_stage("evaluate"))?;
    let num_classes = source.num_classes();
    let mut stage_seconds = Vec::new();

    // (1) Source classifier.
    let t0 = Instant::now();
    let mut arch = cfg.hidden_layers.clone();
    arch.push(num_classes);
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(cfg.seed, "pipeline.train");
    let params = train_with_activation(source, &arch, cfg.hidden_activation, &train_cfg)
        .map_err(|e| e.in_stage("train"))?;
    stage_seconds.push(("train".into(), t0.elapsed().as_secs_f64()));

    // (2) Latent embeddings.
    let t0 = Instant::now();
    let latent_source = params
        .latent(source.features())
        .map_err(|e| e.in_stage("embed"))?;
    let latent_target = params
        .latent(target.features())
        .map_err(|e| e.in_stage("embed"))?;
    stage_seconds.push(("embed".into(), t0.elapsed().as_secs_f64()));

    // (3) Labeled subset of the target, in latent coordinates.
    let t0 = Instant::now();
    let subset_seed = derive_seed(cfg.seed, "pipeline.subset");
    let (subset_idx, _) = labeled_split_indices(target, cfg.per_class_labeled, subset_seed)
        .map_err(|e| e.in_stage("select"))?;
    let latent_target_data = target
        .with_features(latent_target.clone())
        .map_err(|e| e.in_stage("select"))?;
    let labeled_latent = latent_target_data
        .subset(&subset_idx)
        .map_err(|e| e.in_stage("select"))?;
    stage_seconds.push(("select".into(), t0.elapsed().as_secs_f64()));

    // (4) Source fiction.
    let t0 = Instant::now();
    let bound = epsilon_bound(labeled_latent.features()).map_err(|e| e.in_stage("fiction"))?;
    let attack_cfg = effective_attack(&cfg.attack, bound).map_err(|e| e.in_stage("fiction"))?;
    let fiction = build_source_fiction(&params, &labeled_latent, &attack_cfg)
        .map_err(|e| e.in_stage("fiction"))?;
    stage_seconds.push(("fiction".into(), t0.elapsed().as_secs_f64()));

    // Target-side labels: known only on the subset rows.
    let mut target_labels: Vec<Option<usize>> = vec![None; target.n()];
    for &i in &subset_idx {
        target_labels[i] = target.labels()[i];
    }
    let fiction_labels = fiction.data.labels().to_vec();

    // (5)+(6) Transport all target latents onto the fiction.
    let t0 = Instant::now();
    let fiction_result = solve_with(
        &cfg.solver,
        &latent_target,
        fiction.data.features(),
        target.mass(),
        fiction.data.mass(),
        &target_labels,
        &fiction_labels,
        cfg.label_penalty,
    )
    .map_err(|e| e.in_stage("transport-fiction"))?;
    stage_seconds.push(("transport-fiction".into(), t0.elapsed().as_secs_f64()));

    // (7)+(8) Map and classify.
    let t0 = Instant::now();
    let mapped = barycentric_map(&fiction_result.coupling, fiction.data.features())
        .map_err(|e| e.in_stage("map"))?;
    let fiction_preds = params.head_predict(&mapped).map_err(|e| e.in_stage("classify"))?;
    stage_seconds.push(("map-classify".into(), t0.elapsed().as_secs_f64()));

    // (9) Baselines on the same geometry.
    let t0 = Instant::now();
    let source_labels: Vec<Option<usize>> = source.labels().to_vec();
    let plain_result = solve_with(
        &cfg.solver,
        &latent_target,
        &latent_source,
        target.mass(),
        source.mass(),
        &target_labels,
        &source_labels,
        cfg.label_penalty,
    )
    .map_err(|e| e.in_stage("transport-plain"))?;
    let plain_mapped = barycentric_map(&plain_result.coupling, &latent_source)
        .map_err(|e| e.in_stage("transport-plain"))?;
    let plain_preds = params
        .head_predict(&plain_mapped)
        .map_err(|e| e.in_stage("transport-plain"))?;
    let source_only_preds = params
        .head_predict(&latent_target)
        .map_err(|e| e.in_stage("baseline-source"))?;
    stage_seconds.push(("baselines".into(), t0.elapsed().as_secs_f64()));

    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(&fiction_preds) {
        confusion[t][p] += 1;
    }

    Ok(AdaptationReport {
        solver: cfg.solver.tag().to_string(),
        source_only_accuracy: accuracy(&truth, &source_only_preds),
        plain_ot_accuracy: accuracy(&truth, &plain_preds),
        fiction_ot_accuracy: accuracy(&truth, &fiction_preds),
        confusion,
        fiction_classification_rate: fiction.classification_rate(),
        epsilon_used: attack_cfg.epsilon.as_f64(),
        bound: bound.as_f64(),
        fiction_converged: fiction_result.converged,
        plain_converged: plain_result.converged,
        stage_seconds,
    })
}

/// One row of the epsilon ablation.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub multiplier: f64,
    pub epsilon: f64,
    pub fiction_classification_rate: f64,
    pub adapted_accuracy: f64,
}

/// Sweep the attack radius over `multiplier * bound` and record, per
/// multiplier, how well the classifier recognizes the fiction and how well
/// the full adaptation scores. Multipliers must be positive and ascending;
/// values above one run with the bound override enabled.
pub fn ablate_epsilon<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    base_cfg: &AdaptationConfig<F>,
    multipliers: &[f64],
) -> Result<Vec<AblationRow>> {
    if multipliers.is_empty() {
        return Err(Error::InvalidParameter("no multipliers given".into()));
    }
    if multipliers.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidParameter(
            "multipliers must be positive".into(),
        ));
    }
    if multipliers.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "multipliers must be sorted ascending".into(),
        ));
    }

    // The bound depends on the trained latent space and the subset draw;
    // reproduce the exact stages `adapt` will run under the same seed.
    let mut arch = base_cfg.hidden_layers.clone();
    arch.push(source.num_classes());
    let mut train_cfg = base_cfg.train.clone();
    train_cfg.seed = derive_seed(base_cfg.seed, "pipeline.train");
    let params = train_with_activation(source, &arch, base_cfg.hidden_activation, &train_cfg)?;
    let latent_target = params.latent(target.features())?;
    let subset_seed = derive_seed(base_cfg.seed, "pipeline.subset");
    let (subset_idx, _) = labeled_split_indices(target, base_cfg.per_class_labeled, subset_seed)?;
    let labeled_latent = target.with_features(latent_target)?.subset(&subset_idx)?;
    let bound = epsilon_bound(labeled_latent.features())?;

    let mut rows = Vec::with_capacity(multipliers.len());
    for &multiplier in multipliers {
        let epsilon = F::cast(multiplier) * bound;
        let mut attack = AttackConfig::with_step_heuristic(
            epsilon,
            base_cfg.attack.iterations,
            base_cfg.attack.ball_norm,
        )?;
        attack.override_bound = multiplier > 1.0;
        let cfg = AdaptationConfig {
            attack,
            ..base_cfg.clone()
        };
        let report = adapt(source, target, &cfg)?;
        rows.push(AblationRow {
            multiplier,
            epsilon: report.epsilon_used,
            fiction_classification_rate: report.fiction_classification_rate,
            adapted_accuracy: report.fiction_ot_accuracy,
        });
    }
    Ok(rows)
}

/// CSV form of an ablation sweep.
pub fn ablation_to_csv(rows: &[AblationRow]) -> String {
    let mut out =
        String::from("multiplier,epsilon,fiction_classification_rate,adapted_accuracy\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.multiplier, row.epsilon, row.fiction_classification_rate, row.adapted_accuracy
        );
    }
    out
}

/// A named (source, target) pair for the benchmark harness.
#[derive(Debug, Clone)]
pub struct BenchmarkTask<F: Scalar> {
    pub name: String,
    pub source: LabeledDataset<F>,
    pub target: LabeledDataset<F>,
}

/// Aggregated accuracy of one (task, solver, variant) cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub task: String,
    pub solver: String,
    pub variant: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_epsilon: f64,
    pub mean_bound: f64,
}

/// Run every solver on every task `repetitions` times with independently
/// re-drawn labeled subsets, and aggregate mean/population-std accuracies
/// per variant. Cells run in parallel; results are keyed by coordinates, so
/// scheduling cannot change the output.
pub fn benchmark<F: Scalar>(
    tasks: &[BenchmarkTask<F>],
    solvers: &[SolverConfig<F>],
    repetitions: usize,
    base_cfg: &AdaptationConfig<F>,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    if repetitions < 1 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let cells: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|t| (0..solvers.len()).map(move |s| (t, s)))
        .collect();

    let reports: Vec<(usize, usize, Vec<AdaptationReport>)> = cells
        .par_iter()
        .map(|&(t, s)| {
            let task = &tasks[t];
            let mut runs = Vec::with_capacity(repetitions);
            for rep in 0..repetitions {
                let cfg = AdaptationConfig {
                    solver: solvers[s].clone(),
                    seed: derive_seed(seed, &format!("bench.{}.{}.rep{rep}", task.name, s)),
                    ..base_cfg.clone()
                };
                runs.push(adapt(&task.source, &task.target, &cfg)?);
            }
            Ok((t, s, runs))
        })
        .collect::<Result<_>>()?;

    let stats = |values: &[f64]| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var =
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        (mean, var.sqrt())
    };

    let mut rows = Vec::new();
    for t in 0..tasks.len() {
        // Source-only baseline once per task (taken from the first solver's
        // runs; it does not depend on the solver).
        if let Some((_, _, runs)) = reports.iter().find(|(rt, rs, _)| *rt == t && *rs == 0) {
            let accs: Vec<f64> = runs.iter().map(|r| r.source_only_accuracy).collect();
            let (mean, std) = stats(&accs);
            rows.push(BenchmarkRow {
                task: tasks[t].name.clone(),
                solver: "source".into(),
                variant: "source".into(),
                mean_accuracy: mean,
                std_accuracy: std,
                mean_epsilon: f64::NAN,
                mean_bound: f64::NAN,
            });
        }
        for (s, solver) in solvers.iter().enumerate() {
            let (_, _, runs) = reports
                .iter()
                .find(|(rt, rs, _)| *rt == t && *rs == s)
                .expect("cell computed");
            let eps: Vec<f64> = runs.iter().map(|r| r.epsilon_used).collect();
            let bounds: Vec<f64> = runs.iter().map(|r| r.bound).collect();
            let (mean_eps, _) = stats(&eps);
            let (mean_bound, _) = stats(&bounds);
            for variant in ["plain", "fiction"] {
                let accs: Vec<f64> = match variant {
                    "plain" => runs.iter().map(|r| r.plain_ot_accuracy).collect(),
                    _ => runs.iter().map(|r| r.fiction_ot_accuracy).collect(),
                };
                let (mean, std) = stats(&accs);
                rows.push(BenchmarkRow {
                    task: tasks[t].name.clone(),
                    solver: solver.tag().to_string(),
                    variant: variant.into(),
                    mean_accuracy: mean,
                    std_accuracy: std,
                    mean_epsilon: mean_eps,
                    mean_bound: mean_bound,
                });
            }
        }
    }
    Ok(rows)
}

/// CSV form of a benchmark: one row per (task, solver, variant) cell.
/// Epsilon and bound cells are empty for the source-only rows.
pub fn benchmark_to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("task,solver,variant,mean_acc,std_acc,eps,bound\n");
    for row in rows {
        let eps = if row.mean_epsilon.is_nan() {
            String::new()
        } else {
            format!("{}", row.mean_epsilon)
        };
        let bound = if row.mean_bound.is_nan() {
            String::new()
        } else {
            format!("{}", row.mean_bound)
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.task, row.solver, row.variant, row.mean_accuracy, row.std_accuracy, eps, bound
        );
    }
    out
}

/// Fixed-width text rendering of a benchmark for terminal output.
pub fn benchmark_to_text(rows: &[BenchmarkRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<14} {:<8} {:>9} {:>9}",
        "task", "solver", "variant", "mean_acc", "std_acc"
    );
    let _ = writeln!(out, "{}", "-".repeat(60));
    for row in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<14} {:<8} {:>9.4} {:>9.4}",
            row.task, row.solver, row.variant, row.mean_accuracy, row.std_accuracy
        );
    }
    out
}

// Shift constants of the canonical crossing family, solved so that (for
// three classes on a circle of radius `sep`) the rotated, scaled, cyclically
// relabeled clusters land as:
//   - an oversized cluster on the blob matching its new label (owner),
//   - a small cluster inside the same decision basin but carrying the label
//     of the now-empty blob (rescuer), parked near that basin's boundary,
//   - a regular cluster on the blob matching its new label.
// The translation scales with the separation; rotation and axis scales are
// dimensionless.
const CROSSING_ROTATION: f64 = 1.847886;
const CROSSING_SCALE_X: f64 = 0.459116;
const CROSSING_SCALE_Y: f64 = 1.043956;
const CROSSING_TRANSLATION_X: f64 = -0.2632864;
const CROSSING_TRANSLATION_Y: f64 = -0.1520084;

/// The canonical crossing-shift family on three circle classes.
///
/// The target reuses the source's cluster layout under a rotation, an
/// anisotropic scale, a translation, and a cyclic label advance, with
/// deliberately unequal class sizes: one oversized class sits on its own
/// source blob, so its excess mass must transport elsewhere; a small class
/// sits inside that same basin; the third is a regular aligned class. Plain
/// Euclidean transport must push the oversized class's excess onto a
/// wrong-class source blob (crossing), while transport onto the fiction can
/// absorb it at the small class's nearby anchors, which live in
/// correctly-classified territory. The small cluster is parked near its
/// basin's boundary: within the perturbation bound its anchors stay put,
/// while radii past the bound let the attack push them across, degrading
/// the adapted accuracy — the two regimes the ablation sweep measures.
pub fn crossing_shift_task<F: Scalar>(
    classes: usize,
    per_class: usize,
    separation: F,
    sigma: F,
    seed: u64,
) -> Result<(LabeledDataset<F>, LabeledDataset<F>)> {
    if classes != 3 {
        return Err(Error::InvalidParameter(
            "the crossing-shift family is defined for exactly 3 classes".into(),
        ));
    }
    if per_class < 5 {
        return Err(Error::InvalidParameter(
            "the crossing-shift family needs at least 5 samples per class".into(),
        ));
    }
    let source = generate_gaussian_mixture(
        classes,
        per_class,
        2,
        separation,
        sigma,
        derive_seed(seed, "crossing.source"),
    )?;

    // Unequal target classes: rescuer n/5, owner 2n - n/5, aligned n.
    let rescuer_n = (per_class / 5).max(1);
    let owner_n = 2 * per_class - rescuer_n;
    let base = generate_gaussian_mixture(
        classes,
        owner_n,
        2,
        separation,
        sigma,
        derive_seed(seed, "crossing.target"),
    )?;
    // Generator rows are class-major blocks of `owner_n`.
    let mut keep = Vec::with_capacity(per_class + owner_n + rescuer_n);
    keep.extend(0..per_class); // class 0 -> aligned cluster
    keep.extend(owner_n..2 * owner_n); // class 1 -> owner cluster
    keep.extend(2 * owner_n..2 * owner_n + rescuer_n); // class 2 -> rescuer
    let trimmed = base.subset(&keep)?;

    let spec = ShiftSpec::identity(2)
        .with_rotation(F::cast(CROSSING_ROTATION))
        .with_scale(Array1::from_vec(vec![
            F::cast(CROSSING_SCALE_X),
            F::cast(CROSSING_SCALE_Y),
        ]))
        .with_translation(Array1::from_vec(vec![
            separation * F::cast(CROSSING_TRANSLATION_X),
            separation * F::cast(CROSSING_TRANSLATION_Y),
        ]))
        .with_label_permutation(true);
    let target = apply_shift(&trimmed, &spec)?;
    Ok((source, target))
}
