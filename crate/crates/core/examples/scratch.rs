// Ad-hoc experiment driver used while tuning defaults; not part of the API.
use ndarray::{Array1, Array2};
use rand::Rng;
use sfot::dataset::generate_gaussian_mixture;
use sfot::ot::{build_cost, solve_emd, solve_sinkhorn};
use sfot::rng::seed_rng;

fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("sinkhorn");
    match mode {
        "sinkhorn" => sinkhorn_convergence(),
        "otlin" => otlin_probe(),
        "pipeline" => pipeline_calibration(),
        "family" => family_grid(),
        "probe" => per_cluster_probe(),
        "manual" => manual_sinkhorn(),
        "gen" => {
            let d = generate_gaussian_mixture::<f64>(3, 5, 2, 5.0, 0.5, 1).unwrap();
            println!("{:?}", d.features());
        }
        other => eprintln!("unknown mode {other}"),
    }
}

fn per_cluster_probe() {
    use sfot::attack::{build_source_fiction, epsilon_bound, AttackConfig, BallNorm};
    use sfot::classifier::{train_with_activation, Activation, Optimizer, TrainConfig};
    use sfot::dataset::{labeled_split_indices};
    use sfot::pipeline::crossing_shift_task;
    use sfot::rng::derive_seed;
    let act = match std::env::args().nth(2).as_deref() {
        Some("tanh") => Activation::Tanh,
        Some("linear") => Activation::Identity,
        _ => Activation::Relu,
    };
    let arch: Vec<usize> = std::env::args()
        .nth(3)
        .map(|v| v.split(',').filter(|t| !t.is_empty()).map(|t| t.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![32, 16]);
    let epochs: usize = std::env::args().nth(4).and_then(|v| v.parse().ok()).unwrap_or(150);
    let use_sgd = std::env::args().nth(5).as_deref() == Some("sgd");
    let lr: f64 = std::env::args().nth(6).and_then(|v| v.parse().ok()).unwrap_or(1e-3);
    println!("act {act:?} arch {arch:?} epochs {epochs} sgd={use_sgd} lr={lr}");
    for seed in 0..6u64 {
        let (source, target) = crossing_shift_task::<f64>(3, 50, 5.0, 0.5, 3000 + seed).unwrap();
        let cfg = TrainConfig {
            optimizer: if use_sgd { Optimizer::Sgd } else { Optimizer::Adam },
            epochs,
            learning_rate: lr,
            batch_size: 150,
            ..TrainConfig::default()
        };
        let mut tc = cfg.clone();
        tc.seed = derive_seed(seed, "pipeline.train");
        let mut full_arch = arch.clone();
        full_arch.push(3);
        let params = train_with_activation(&source, &full_arch, act, &tc).unwrap();
        let latent_t = params.latent(target.features()).unwrap();
        let verdicts = params.head_predict(&latent_t).unwrap();
        let truth = target.required_labels().unwrap();
        // Per original cluster (rows are class-major blocks of 50 in the base,
        // but labels were permuted; group by TRUE label):
        for c in 0..3 {
            let rows: Vec<usize> = (0..target.n()).filter(|&i| truth[i] == c).collect();
            let mut verdict_counts = [0usize; 3];
            for &i in &rows { verdict_counts[verdicts[i]] += 1; }
            // input-space center
            let cx: f64 = rows.iter().map(|&i| target.features()[(i, 0)]).sum::<f64>() / rows.len() as f64;
            let cy: f64 = rows.iter().map(|&i| target.features()[(i, 1)]).sum::<f64>() / rows.len() as f64;
            println!("seed {seed} label {c}: center ({cx:+.2},{cy:+.2}) verdicts {verdict_counts:?}");
        }
        let (subset_idx, _) = labeled_split_indices(&target, 10, derive_seed(seed, "pipeline.subset")).unwrap();
        let latent_data = target.with_features(latent_t).unwrap();
        let labeled = latent_data.subset(&subset_idx).unwrap();
        let bound = epsilon_bound(labeled.features()).unwrap();
        let attack = AttackConfig::with_step_heuristic(bound, 50, BallNorm::L2).unwrap();
        let fiction = build_source_fiction(&params, &labeled, &attack).unwrap();
        // flip success per true label
        let ltruth = labeled.required_labels().unwrap();
        let raw_preds = params.head_predict(labeled.features()).unwrap();
        let fic_preds = params.head_predict(fiction.data.features()).unwrap();
        for c in 0..3 {
            let rows: Vec<usize> = (0..labeled.n()).filter(|&i| ltruth[i] == c).collect();
            let raw_ok = rows.iter().filter(|&&i| raw_preds[i] == c).count();
            let fic_ok = rows.iter().filter(|&&i| fic_preds[i] == c).count();
            println!("  label {c}: raw {raw_ok}/10 fiction {fic_ok}/10 bound {bound:.4}");
        }
        // latent-space geometry: typical latent norm + within/cross distances
        let f = labeled.features();
        let mut min_same = f64::INFINITY;
        let mut min_cross = f64::INFINITY;
        for i in 0..f.nrows() {
            for j in (i+1)..f.nrows() {
                let d: f64 = (0..f.ncols()).map(|k| (f[(i,k)]-f[(j,k)]).powi(2)).sum::<f64>().sqrt();
                if ltruth[i] == ltruth[j] { min_same = min_same.min(d); } else { min_cross = min_cross.min(d); }
            }
        }
        println!("  latent min same-class {min_same:.4} min cross-class {min_cross:.4}");
    }
}

fn family_grid() {
    use ndarray::Array1 as A1;
    use sfot::attack::{AttackConfig, BallNorm};
    use sfot::classifier::{Optimizer, TrainConfig};
    use sfot::dataset::{apply_shift, generate_gaussian_mixture, ShiftSpec};
    use sfot::pipeline::{adapt, ablate_epsilon, AdaptationConfig, SolverConfig};
    use sfot::rng::derive_seed;

    let make_task = |rot_frac: f64, sy: f64, permute: bool, seed: u64| {
        let source = generate_gaussian_mixture::<f64>(3, 50, 2, 5.0, 0.5,
            derive_seed(seed, "src")).unwrap();
        let base = generate_gaussian_mixture::<f64>(3, 50, 2, 5.0, 0.5,
            derive_seed(seed, "tgt")).unwrap();
        let spec = ShiftSpec::identity(2)
            .with_rotation(std::f64::consts::PI * rot_frac)
            .with_scale(A1::from_vec(vec![1.0, sy]))
            .with_label_permutation(permute);
        (source, apply_shift(&base, &spec).unwrap())
    };

    for (rot_frac, sy, permute, epochs, hidden) in [
        (1.0, 0.1, true, 150usize, vec![32usize, 16]),
        (1.0, 0.05, true, 150, vec![32, 16]),
        (1.0, 0.2, true, 150, vec![32, 16]),
        (1.0, 0.1, true, 60, vec![32, 16]),
        (1.0, 0.1, true, 300, vec![32, 16]),
        (1.0, 0.1, true, 150, vec![64, 32]),
        (1.0, 0.1, true, 150, vec![16]),
    ] {
        let mut gaps = Vec::new();
        let mut decays = Vec::new();
        let mut rates = Vec::new();
        for seed in 0..6u64 {
            let (source, target) = make_task(rot_frac, sy, permute, 3000 + seed);
            let cfg = AdaptationConfig {
                solver: SolverConfig::Emd,
                seed,
                train: TrainConfig { optimizer: Optimizer::Adam, epochs, ..TrainConfig::default() },
                hidden_layers: hidden.clone(),
                attack: AttackConfig::with_step_heuristic(1e18, 50, BallNorm::L2).unwrap(),
                ..AdaptationConfig::default()
            };
            let r = adapt(&source, &target, &cfg).unwrap();
            gaps.push(r.fiction_ot_accuracy - r.plain_ot_accuracy);
            rates.push(r.fiction_classification_rate);
            let abl = ablate_epsilon(&source, &target, &cfg, &[1.0, 4.0]).unwrap();
            decays.push(abl[0].adapted_accuracy - abl[1].adapted_accuracy);
        }
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let min = |v: &Vec<f64>| v.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "rot={rot_frac} sy={sy} perm={permute} ep={epochs} h={hidden:?}: gap mean {:+.3} min {:+.3} | rate mean {:.3} | decay mean {:+.3} min {:+.3}",
            mean(&gaps), min(&gaps), mean(&rates), mean(&decays), min(&decays)
        );
    }
}

fn pipeline_calibration() {
    use sfot::attack::{AttackConfig, BallNorm};
    use sfot::classifier::{Optimizer, TrainConfig};
    use sfot::pipeline::{adapt, ablate_epsilon, crossing_shift_task, AdaptationConfig, SolverConfig};
    let epochs: usize = std::env::args().nth(2).and_then(|v| v.parse().ok()).unwrap_or(150);
    let hidden: Vec<usize> = std::env::args()
        .nth(3)
        .map(|v| v.split(',').map(|t| t.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![32, 16]);
    let seeds: u64 = std::env::args().nth(4).and_then(|v| v.parse().ok()).unwrap_or(8);
    println!("epochs={epochs} hidden={hidden:?}");
    let mut worst_gap = f64::INFINITY;
    let mut sum_gap = 0.0;
    let mut m4_gaps = Vec::new();
    for seed in 0..seeds {
        let (source, target) = crossing_shift_task::<f64>(3, 50, 5.0, 0.5, 1000 + seed).unwrap();
        let cfg = AdaptationConfig {
            solver: SolverConfig::Emd,
            seed,
            train: TrainConfig {
                optimizer: Optimizer::Adam,
                epochs,
                ..TrainConfig::default()
            },
            hidden_layers: hidden.clone(),
            attack: AttackConfig::with_step_heuristic(1e18, 50, BallNorm::L2).unwrap(),
            ..AdaptationConfig::default()
        };
        let r = adapt(&source, &target, &cfg).unwrap();
        let gap = r.fiction_ot_accuracy - r.plain_ot_accuracy;
        worst_gap = worst_gap.min(gap);
        sum_gap += gap;
        let abl = ablate_epsilon(&source, &target, &cfg, &[1.0, 4.0]).unwrap();
        let m4 = abl[0].adapted_accuracy - abl[1].adapted_accuracy;
        m4_gaps.push(m4);
        println!(
            "seed {seed}: src {:.3} plain {:.3} fiction {:.3} rate {:.3} bound {:.3} | m1 {:.3} m4 {:.3} decay {:+.3}",
            r.source_only_accuracy,
            r.plain_ot_accuracy,
            r.fiction_ot_accuracy,
            r.fiction_classification_rate,
            r.bound,
            abl[0].adapted_accuracy,
            abl[1].adapted_accuracy,
            m4,
        );
    }
    let mean_decay = m4_gaps.iter().sum::<f64>() / m4_gaps.len() as f64;
    println!(
        "gap: mean {:+.3} worst {:+.3} | m1-m4 decay mean {:+.3}",
        sum_gap / seeds as f64,
        worst_gap,
        mean_decay
    );
}

fn manual_sinkhorn() {
    let mut rng = seed_rng(41);
    let x = Array2::from_shape_fn((12, 2), |(i, j)| {
        let base = if j == 0 { (i % 4) as f64 * 4.0 } else { (i / 4) as f64 * 4.0 };
        base + rng.random_range(-0.3..0.3)
    });
    let t = [0.6f64, -0.45];
    let y = Array2::from_shape_fn((12, 2), |(i, j)| x[(i, j)] + t[j]);
    let a = uniform(12);
    let cost_m = build_cost(&x, &y, None, None, 1.0).unwrap();
    let cost = cost_m.matrix();
    let (n, m, reg) = (12usize, 12usize, 0.4f64);
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let lse = |vals: &dyn Fn(usize) -> f64, len: usize| -> f64 {
        let mut mx = f64::NEG_INFINITY;
        for i in 0..len { mx = mx.max(vals(i)); }
        let mut s = 0.0;
        for i in 0..len { s += (vals(i) - mx).exp(); }
        mx + s.ln()
    };
    for iter in 0..40 {
        for i in 0..n {
            let l = lse(&|j| (g[j] - cost[(i, j)]) / reg, m);
            f[i] = reg * (log_a[i] - l);
        }
        for j in 0..m {
            let l = lse(&|i| (f[i] - cost[(i, j)]) / reg, n);
            g[j] = reg * (log_a[j] - l);
        }
        let mut row_err = 0.0;
        for i in 0..n {
            let l = lse(&|j| (g[j] - cost[(i, j)]) / reg, m);
            let row_sum = (f[i] / reg + l).exp();
            row_err += (row_sum - a[i]).abs();
        }
        if iter % 4 == 0 || iter == 39 {
            println!("iter {iter}: row_err {row_err:.3e}  f0={} g0={}", f[0], g[0]);
        }
    }
}

fn otlin_probe() {
    use sfot::ot::solve_otlin;
    let mut rng = seed_rng(41);
    let x = Array2::from_shape_fn((12, 2), |(i, j)| {
        let base = if j == 0 { (i % 4) as f64 * 4.0 } else { (i / 4) as f64 * 4.0 };
        base + rng.random_range(-0.3..0.3)
    });
    let t = [0.6f64, -0.45];
    let y = Array2::from_shape_fn((12, 2), |(i, j)| x[(i, j)] + t[j]);
    let a = uniform(12);
    // Plain sinkhorn on the initial cost first:
    let cost = build_cost(&x, &y, None, None, 1.0).unwrap();
    match solve_sinkhorn(&cost, &a, &a, 0.4, 200, 1e-9) {
        Ok(r) => println!("plain sinkhorn: converged={} iters={}", r.converged, r.iterations),
        Err(e) => println!("plain sinkhorn error: {e}"),
    }
    match solve_otlin(&x, &y, &a, &a, 0.4, 1e6, 8) {
        Ok(sol) => println!("otlin ok, map bias {:?}", sol.map.bias),
        Err(e) => println!("otlin error: {e}"),
    }
}

fn sinkhorn_convergence() {
    let mut rng = seed_rng(2024);
    let mut worst_rel: f64 = 0.0;
    let mut worst_iters = 0usize;
    let mut unconverged = 0usize;
    let trials = 500;
    for trial in 0..trials {
        let n = rng.random_range(2..=7);
        // Two offset clusters: the optimum is a large fraction of max(M).
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-0.35..0.35f64));
        let y = Array2::from_shape_fn((n, 2), |_| 4.0 + rng.random_range(-0.35..0.35f64));
        let cost = build_cost(&x, &y, None, None, 1.0).unwrap();
        let a = uniform(n);
        let b = uniform(n);
        let emd = solve_emd(&cost, &a, &b).unwrap();
        let reg = 0.01 * cost.max_entry();
        match solve_sinkhorn(&cost, &a, &b, reg, 100_000, 1e-7) {
            Ok(res) => {
                let rel = (res.objective - emd.objective) / emd.objective;
                if rel > worst_rel {
                    worst_rel = rel;
                }
                if res.iterations > worst_iters {
                    worst_iters = res.iterations;
                }
                if !res.converged {
                    unconverged += 1;
                    println!("trial {trial}: not converged");
                }
            }
            Err(e) => {
                unconverged += 1;
                println!("trial {trial} error: {e}");
            }
        }
    }
    println!(
        "{} trials: worst rel gap {:.5}, worst iterations {}, unconverged {}",
        trials, worst_rel, worst_iters, unconverged
    );
}
