//! Acceptance criteria 1-10. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line even under `cargo test`.

use std::collections::HashMap;
use std::time::Instant;

use hooptraj::baselines::{fit_enet, fit_gbm_traced, mean_log_loss, EnetParams};
use hooptraj::config::RunConfig;
use hooptraj::dataset::{Label, SequenceWindow, Trajectory, CHANNELS};
use hooptraj::features::{feature_matrix, FeatureMode, Matrix};
use hooptraj::geometry::Point3;
use hooptraj::metrics::{roc_auc, roc_auc_exact};
use hooptraj::pipeline::{self, ModelKind, Prepared};
use hooptraj::sanity::{run_sanity, SanityTask};
use hooptraj::seqnet::{backward, forward, losses, LossConfig, MdnMixture, Mode, ParamSet, SeqNetParams, SIGMA_MIN};
use hooptraj::simulator::{simulate_flight, FlightConfig, ForceConfig, LaunchState};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass: Some(pass), detail: detail.into() }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self { pass: None, detail: detail.into() }
    }
}

fn random_net(hidden: usize, rng: &mut ChaCha8Rng) -> SeqNetParams<f64> {
    let mut p = SeqNetParams::init(CHANNELS, hidden, 2, 0.5, 1.0, rng);
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            if *v == 0.0 {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
    }
    p
}

fn random_window(len: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; CHANNELS]> {
    (0..len).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect()
}

fn gradient_check() -> Outcome {
    let cfg = LossConfig { mdn_weight: 1.0, class_all_steps: false };
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_net(5, &mut rng);
        let w = random_window(4, &mut rng);
        let label = (seed % 2) as usize;
        let loss = |q: &SeqNetParams<f64>| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            losses(&forward(q, &w, 0.0, Mode::Train, &mut r).unwrap(), label, &cfg).total
        };
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let cache = forward(&p, &w, 0.0, Mode::Train, &mut r).unwrap();
        let (g, _) = backward(&p, &cache, label, &cfg).unwrap();
        for (ti, analytic) in g.tensors().iter().enumerate() {
            for (j, &a) in analytic.iter().enumerate() {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][j] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][j] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    Outcome::check(
        worst < 1e-4,
        format!("{checked} parameters over 20 nets, worst relative error {worst:.2e} (limit 1e-4)"),
    )
}

fn brute_force_auc(scores: &[i64], labels: &[bool]) -> Ratio<u64> {
    let (mut num, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            num += match si.cmp(&sj) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ratio::new(num, 2 * pairs)
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(1..=20);
        let scores: Vec<i64> = (0..n).map(|_| rng.gen_range(0..levels)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let as_f64: Vec<f64> = scores.iter().map(|&s| s as f64 * 0.1).collect();
        if roc_auc_exact(&as_f64, &labels).unwrap() != brute_force_auc(&scores, &labels) {
            mismatches += 1;
        }
        done += 1;
    }
    Outcome::check(mismatches == 0, format!("{mismatches} mismatches in 1000 tied instances"))
}

fn physics() -> Outcome {
    let forces = ForceConfig::<f64>::vacuum();
    let g = forces.effective_gravity();
    let launch =
        LaunchState { origin: Point3::new(30.0, 20.0, 7.0), speed: 40.0, elevation: 1.0, azimuth: 2.5, backspin: 2.0 };
    let flight = FlightConfig { dt: 0.04, t_max: 2.0, clock_start: 100.0 };
    let traj = simulate_flight(&launch, &forces, &flight).unwrap();
    let (vx, vy, vz) = (40.0 * 1.0f64.cos() * 2.5f64.cos(), 40.0 * 1.0f64.cos() * 2.5f64.sin(), 40.0 * 1.0f64.sin());
    let mut worst = 0.0f64;
    for (k, s) in traj.samples.iter().enumerate() {
        let t = k as f64 * 0.04;
        let exact = [30.0 + vx * t, 20.0 + vy * t, 7.0 + vz * t - 0.5 * g * t * t];
        for (a, b) in [s.pos.x, s.pos.y, s.pos.z].iter().zip(exact) {
            worst = worst.max((a - b).abs());
        }
    }
    let span = (traj.samples.len() - 1) as f64 * 0.04;
    let covers = (span - 2.0).abs() < 1e-9;
    Outcome::check(
        covers && worst < 1e-9,
        format!("{} frames over {span:.2} s, max deviation {worst:.2e} ft", traj.samples.len()),
    )
}

fn mdn_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sum = 0.0f64;
    let mut min_sigma = f64::INFINITY;
    for _ in 0..1000 {
        let raw: Vec<f64> =
            (0..21).map(|i| if i >= 12 { rng.gen_range(-40.0..3.0) } else { rng.gen_range(-30.0..30.0) }).collect();
        let m = MdnMixture::from_raw(&raw);
        worst_sum = worst_sum.max((m.weights.iter().sum::<f64>() - 1.0).abs());
        min_sigma = m.scales.iter().flatten().copied().fold(min_sigma, f64::min);
    }
    // Monte-Carlo mass of mixtures produced by random networks.
    let mut worst_mass = 0.0f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let p = random_net(8, &mut rng);
        let w = random_window(3, &mut rng);
        let cache = forward(&p, &w, 0.0, Mode::Eval, &mut rng).unwrap();
        let mix = cache.mixtures[2];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for k in 0..3 {
            for d in 0..3 {
                lo[d] = lo[d].min(mix.means[k][d] - 6.0 * mix.scales[k][d]);
                hi[d] = hi[d].max(mix.means[k][d] + 6.0 * mix.scales[k][d]);
            }
        }
        let volume: f64 = (0..3).map(|d| hi[d] - lo[d]).product();
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| {
                let y: [f64; 3] = std::array::from_fn(|d| rng.gen_range(lo[d]..hi[d]));
                mix.density(&y)
            })
            .sum();
        let mass = volume * total / n as f64;
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    Outcome::check(
        worst_sum < 1e-9 && min_sigma >= SIGMA_MIN && worst_mass <= 0.05,
        format!("weight-sum error {worst_sum:.1e}, min sigma {min_sigma:.2e}, worst |mass - 1| {worst_mass:.3}"),
    )
}

/// Largest violation of the elastic-net optimality conditions, using an
/// analytic gradient of the mean log loss in standardized coordinates.
fn kkt_residual(m: &hooptraj::Enet, x: &Matrix<f64>, y: &[bool]) -> f64 {
    let z: Vec<Vec<f64>> =
        (0..x.rows).map(|i| (0..x.cols).map(|j| (x.get(i, j) - m.means[j]) / m.scales[j]).collect()).collect();
    let n = x.rows as f64;
    let mut grad = vec![0.0; x.cols];
    let mut grad_bias = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let eta = m.bias + zi.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>();
        let r = 1.0 / (1.0 + (-eta).exp()) - if y[i] { 1.0 } else { 0.0 };
        grad_bias += r / n;
        for j in 0..x.cols {
            grad[j] += r * zi[j] / n;
        }
    }
    let (l1, l2) = (m.lambda * m.alpha, m.lambda * (1.0 - m.alpha));
    grad.iter()
        .zip(&m.weights)
        .map(|(&g, &w)| if w != 0.0 { (g + l1 * w.signum() + l2 * w).abs() } else { (g.abs() - l1).max(0.0) })
        .fold(grad_bias.abs(), f64::max)
}

fn baseline_health(data: &Experiment) -> Outcome {
    let windows = pipeline::windows_for(&data.prepared.train(1.0), 8.0, &data.cfg);
    let (x, y) = feature_matrix(&windows, &data.cfg.geometry, FeatureMode::Full).unwrap();
    let mut worst_kkt = 0.0f64;
    for lambda in [1e-3, 1e-2, 0.1] {
        let m = fit_enet(&x, &y, &EnetParams { lambda, ..EnetParams::default() }).unwrap();
        worst_kkt = worst_kkt.max(kkt_residual(&m, &x, &y));
    }
    let params = hooptraj::baselines::GbmParams { n_trees: 50, ..data.cfg.gbm };
    let (model, trace) = fit_gbm_traced(&x, &y, &params).unwrap();
    let monotone = trace.windows(2).all(|w| w[1] <= w[0]);
    // The trace must agree with an independent recomputation of the loss.
    let eta: Vec<f64> = (0..x.rows)
        .map(|i| model.trees.iter().fold(model.base_score, |acc, t| acc + model.learning_rate * t.eval(x.row(i))))
        .collect();
    let final_ok = (mean_log_loss(&eta, &y) - trace[trace.len() - 1]).abs() < 1e-9;
    Outcome::check(
        worst_kkt < 1e-6 && monotone && final_ok && trace.len() == 51,
        format!(
            "enet KKT residual {worst_kkt:.1e} on {} windows; gbm log loss {:.4} -> {:.4} over {} rounds, non-increasing: {monotone}",
            x.rows,
            trace[0],
            trace[trace.len() - 1],
            trace.len() - 1
        ),
    )
}

struct Experiment {
    cfg: RunConfig,
    prepared: Prepared,
    make_rate: f64,
}

fn build_experiment() -> Experiment {
    let cfg = RunConfig::default();
    let (tracks, _) = pipeline::simulate(&cfg).unwrap();
    let made = tracks.iter().filter(|t| t.label == Label::Made).count();
    let make_rate = made as f64 / tracks.len() as f64;
    let labels: HashMap<String, Label> = tracks.iter().map(|t| (t.shot_id.clone(), t.label)).collect();
    let prepared = pipeline::prepare(tracks, &labels, &cfg).unwrap();
    Experiment { cfg, prepared, make_rate }
}

fn test_auc(data: &Experiment, cfg: &RunConfig, kind: ModelKind, features: FeatureMode) -> Vec<(f64, f64)> {
    let (model, _) = pipeline::train_model(&data.prepared, cfg, kind, features).unwrap();
    let test: Vec<&Trajectory<f64>> = data.prepared.test();
    cfg.data
        .distances
        .iter()
        .map(|&d| {
            let windows: Vec<SequenceWindow<f64>> = pipeline::windows_for(&test, d, cfg);
            let labels: Vec<bool> = windows.iter().map(|w| w.label == Label::Made).collect();
            let scores = model.score(d, &windows, cfg).unwrap();
            (d, roc_auc(&scores, &labels).unwrap())
        })
        .collect()
}

fn fmt_aucs(v: &[(f64, f64)]) -> String {
    v.iter().map(|(d, a)| format!("{d}:{a:.3}")).collect::<Vec<_>>().join(" ")
}

fn at(v: &[(f64, f64)], d: f64) -> f64 {
    v.iter().find(|(x, _)| *x == d).map(|(_, a)| *a).unwrap()
}

fn desk_experiment(data: &Experiment) -> (Outcome, Vec<(f64, f64)>) {
    let rate_ok = (data.make_rate - 0.357).abs() <= 0.02;
    let enet_full = test_auc(data, &data.cfg, ModelKind::Enet, FeatureMode::Full);
    let gbm_full = test_auc(data, &data.cfg, ModelKind::Gbm, FeatureMode::Full);
    let mut eight = data.cfg.clone();
    eight.data.distances = vec![8.0];
    let enet_xyz = test_auc(data, &eight, ModelKind::Enet, FeatureMode::PositionalOnly);
    let mut far = data.cfg.clone();
    far.data.distances = vec![6.0, 7.0, 8.0];
    let rnn = test_auc(data, &far, ModelKind::Rnn, FeatureMode::PositionalOnly);

    let a = enet_full.iter().zip(&gbm_full).all(|((_, e), (_, g))| g > e);
    let wins = [6.0, 7.0, 8.0].iter().filter(|&&d| at(&rnn, d) > at(&gbm_full, d)).count();
    let b = wins >= 2;
    let gap = at(&rnn, 8.0) - at(&enet_xyz, 8.0);
    let c = gap >= 0.05;
    println!("    make rate {:.4}", data.make_rate);
    println!("    glm full  {}", fmt_aucs(&enet_full));
    println!("    gbm full  {}", fmt_aucs(&gbm_full));
    println!("    glm xyz   {}", fmt_aucs(&enet_xyz));
    println!("    rnn xyz   {}", fmt_aucs(&rnn));
    let detail = format!("make rate ok {rate_ok}; (a) gbm>glm everywhere {a}; (b) rnn beats gbm at {wins}/3; (c) rnn-glm_xyz at 8 ft {gap:.3}");
    (Outcome::check(rate_ok && a && b && c, detail), rnn)
}

fn half_data(data: &Experiment) -> Outcome {
    let mut cfg = data.cfg.clone();
    cfg.data.distances = vec![4.0];
    let full = at(&test_auc(data, &cfg, ModelKind::Rnn, FeatureMode::PositionalOnly), 4.0);
    cfg.data.train_fraction = 0.5;
    let half = at(&test_auc(data, &cfg, ModelKind::Rnn, FeatureMode::PositionalOnly), 4.0);
    let loss = full - half;
    Outcome::check(loss <= 0.06, format!("4 ft AUC full {full:.3}, half {half:.3}, loss {loss:.3} (limit 0.06)"))
}

fn sanity_tasks() -> Outcome {
    let (mse, _) = run_sanity::<f64>(&SanityTask::sine(), 2000, 0).unwrap();
    let (mae, _) = run_sanity::<f32>(&SanityTask::addition(), 5000, 0).unwrap();
    Outcome::check(
        mse < 1e-3 && mae <= 5.0,
        format!("sine MSE {mse:.2e} (limit 1e-3); addition MAE {mae:.3} (limit 5)"),
    )
}

fn determinism() -> Outcome {
    let run = || {
        let mut cfg = RunConfig { sim_shots: 1500, ..RunConfig::default() };
        cfg.data.distances = vec![4.0, 8.0];
        cfg.rnn.epochs = 1;
        cfg.rnn.hidden = 8;
        let (tracks, _) = pipeline::simulate(&cfg).unwrap();
        let labels: HashMap<String, Label> = tracks.iter().map(|t| (t.shot_id.clone(), t.label)).collect();
        let prepared = pipeline::prepare(tracks, &labels, &cfg).unwrap();
        let mut checkpoints = Vec::new();
        let mut models = Vec::new();
        for (kind, features) in [
            (ModelKind::Enet, FeatureMode::Full),
            (ModelKind::Gbm, FeatureMode::Full),
            (ModelKind::Rnn, FeatureMode::PositionalOnly),
        ] {
            let (m, logs) = pipeline::train_model(&prepared, &cfg, kind, features).unwrap();
            checkpoints.push(m.to_checkpoint().render());
            checkpoints.extend(logs.into_iter().map(|l| l.csv));
            models.push(m);
        }
        let report = pipeline::evaluate(&models, &prepared, &cfg).unwrap();
        (checkpoints, report.render(hooptraj::metrics::ReportFormat::Csv).unwrap())
    };
    let (c1, r1) = run();
    let (c2, r2) = run();
    let same = c1 == c2 && r1 == r2;
    Outcome::check(same, format!("{} checkpoint/log artifacts and the report compared byte for byte", c1.len()))
}

fn real_data() -> Outcome {
    match std::env::var("HOOPTRAJ_REAL_DATA") {
        Ok(dir) if !dir.is_empty() => Outcome::skip(format!("real-data reproduction is run through the CLI on {dir}")),
        _ => Outcome::skip("published tracking data not available (set HOOPTRAJ_REAL_DATA)"),
    }
}

fn report(n: usize, name: &str, start: Instant, out: Outcome, failures: &mut usize) {
    let status = match out.pass {
        Some(true) => "PASS",
        Some(false) => {
            *failures += 1;
            "FAIL"
        }
        None => "SKIP",
    };
    println!("criterion {n:>2} {status} {name}: {} [{:.1}s]", out.detail, start.elapsed().as_secs_f64());
}

fn main() {
    // Cargo passes libtest flags such as `--list` to every test target.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let t = Instant::now();
    report(1, "gradient correctness", t, gradient_check(), &mut failures);
    let t = Instant::now();
    report(2, "auc oracle equivalence", t, auc_oracle(), &mut failures);
    let t = Instant::now();
    report(3, "drag-free physics", t, physics(), &mut failures);
    let t = Instant::now();
    report(4, "mdn validity", t, mdn_validity(), &mut failures);

    let t = Instant::now();
    let data = build_experiment();
    println!("    simulated and prepared {} shots in {:.1}s", data.prepared.tracks.len(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    report(5, "optimizer and baseline health", t, baseline_health(&data), &mut failures);
    let t = Instant::now();
    let (desk, _) = desk_experiment(&data);
    report(6, "desk-scale experiment", t, desk, &mut failures);
    let t = Instant::now();
    report(7, "real-data reproduction", t, real_data(), &mut failures);
    let t = Instant::now();
    report(8, "half-data ablation", t, half_data(&data), &mut failures);
    let t = Instant::now();
    report(9, "sanity tasks", t, sanity_tasks(), &mut failures);
    let t = Instant::now();
    report(10, "determinism", t, determinism(), &mut failures);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
