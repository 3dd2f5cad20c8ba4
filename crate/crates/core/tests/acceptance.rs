//! Acceptance criteria. Each test prints one `[PASS]` or `[FAIL]` line to
//! stderr, outside the harness's output capture.
//!
//! The training criteria (7, 8, 9 and the replay check) share one set of
//! desk-scale runs: 3 columns x 2 levels, 10 structural elements, target
//! corner 5, 1000 episodes of one held activation over 0.5 s each.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use latticeworm::env::{reward, EnvConfig, Environment, EpisodeRow, LatticeEnv, MuscleEpisodeRow, RewardConfig};
use latticeworm::expt::{
    self, read_csv, run_dir, run_one, BarRow, CurveRow, ExperimentConfig, HeatRow, Manifest, ManifestEntry,
    RunMeta, RunRecord, RunSpec, RunStatus, TraceRow, MANIFEST_FORMAT, RECORD_FORMAT,
};
use latticeworm::lattice::{build_lattice, LatticeSpec};
use latticeworm::muscle::{adapt, muscle_force, AdaptConfig, MuscleBank, MuscleState};
use latticeworm::ppo::{log_prob, minibatch_loss, MlpShape, PolicyParams, RolloutBuffer, TrainConfig};
use latticeworm::rod::{
    compute_internal_loads, connection_force, Connection, MaterialParams, NodeRef, RodState, SimConfig, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {n:>2}: {name}: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_01_adaptation_law() {
    let cfg = AdaptConfig { beta: 1e-6, gamma: 4e-8, lambda_0: 2.0, adaptation_enabled: true };
    let state = MuscleState {
        muscle_id: 0,
        lambda: 2.0,
        last_episode_strain: 0.1,
        last_episode_force: 1.0,
        activation: 0.5,
    };
    // 2000 mN * (1 + 1e-6 * 0.1 + 4e-8 * 1000)
    let got_mn = adapt(&state, &cfg) * 1e3;
    let err = rel(got_mn, 2000.0802);
    let near_cap = MuscleState { lambda: 3.9999, last_episode_force: 3.9999, ..state };
    let capped = adapt(&near_cap, &cfg);
    let pass = err <= 1e-12 && capped == 4.0;
    verdict(1, "adaptation law", pass, &format!("{got_mn:.7} mN (rel err {err:.1e}), capped at {capped} N"));
    assert!(pass);
}

#[test]
fn criterion_02_reward() {
    let cfg = RewardConfig::default();
    let cases = [(0.0005, 1.99999975), (0.0015, 0.49999775), (0.05, -0.0025)];
    let worst = cases.iter().map(|&(n, want)| (reward(n, &cfg) - want).abs()).fold(0.0, f64::max);

    let mut env_cfg = EnvConfig::desk_scale();
    env_cfg.sim.dt = 0.02;
    env_cfg.episode.control_dt = 1.0;
    let mut env = LatticeEnv::new(env_cfg).unwrap();
    env.reset(0, 1).unwrap();
    let (_, tr) = env.step_control(&[1.0; 6]).unwrap();
    let pass = worst <= 1e-12 && tr.unstable && tr.done && tr.reward == -2.0;
    verdict(
        2,
        "reward",
        pass,
        &format!("max abs err {worst:.1e}; unstable step reward {} done {}", tr.reward, tr.done),
    );
    assert!(pass);
}

#[test]
fn criterion_03_rod_statics() {
    let mut rod =
        RodState::straight(Vec3::zeros(), Vec3::z(), 0.1, 40, 0.010, MaterialParams::structure(), Vec3::x()).unwrap();
    let eps = 0.01;
    for x in rod.node_positions.iter_mut() {
        *x *= 1.0 + eps;
    }
    let (f, _) = compute_internal_loads(&rod).unwrap();
    let ea = 70e3 * std::f64::consts::PI * 0.010 * 0.010;
    let end_err = rel(f[40].norm(), ea * eps);

    let a = RodState::straight(Vec3::zeros(), Vec3::z(), 0.1, 2, 0.01, MaterialParams::structure(), Vec3::x()).unwrap();
    let mut b = a.clone();
    for x in b.node_positions.iter_mut() {
        x.x += 0.001;
    }
    let c = Connection { a: NodeRef { rod: 0, node: 1 }, b: NodeRef { rod: 1, node: 1 }, stiffness: 100.0, damping: 0.0 };
    let spring = connection_force(&c, &[a, b]).norm();
    let spring_err = (spring - 0.1).abs();
    let pass = end_err <= 0.01 && spring_err <= 1e-9;
    verdict(
        3,
        "rod statics",
        pass,
        &format!("end force {:.6} N vs EA eps {:.6} N (rel {end_err:.1e}); spring {spring} N", f[40].norm(), ea * eps),
    );
    assert!(pass);
}

#[test]
fn criterion_04_passivity() {
    let spec = LatticeSpec::default();
    let mut lattice = build_lattice(&spec).unwrap();
    let h = spec.height;
    for rod in lattice.system.rods_mut() {
        for (x, v) in rod.node_positions.iter_mut().zip(rod.node_velocities.iter_mut()) {
            let s = (x.z / h).clamp(0.0, 1.0);
            x.x += 0.002 * s * s;
            v.y += 0.01 * s;
        }
    }
    let config = SimConfig { dt: 1e-5, damping_coefficient: 0.035, ..SimConfig::default() };
    let sys = &mut lattice.system;
    let start = sys.energy(&config).total();
    let mut prev = start;
    let mut worst_rise = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        sys.step(&config, &[]);
        let e = sys.energy(&config).total();
        worst_rise = worst_rise.max(e - prev);
        prev = e;
    }
    let pass = worst_rise <= 1e-9 && prev < start && prev.is_finite();
    verdict(
        4,
        "passivity",
        pass,
        &format!("energy {start:.4e} J -> {prev:.4e} J over 1e4 steps, largest single-step rise {worst_rise:.1e} J"),
    );
    assert!(pass);
}

/// Relative error of a gradient block against central differences.
fn block_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

#[test]
fn criterion_05_gradient_check() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut blocks = 0;

    // raw networks at full observation and action size
    for out_dim in [42, 1] {
        let shape = MlpShape::new(597, &[64, 64], out_dim);
        let params = shape.init_orthogonal(&mut rng, 2f64.sqrt(), 1.0);
        let x: Vec<f64> = (0..597).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..out_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |p: &[f64]| -> f64 {
            shape.forward(p, &x).output().iter().zip(&weights).map(|(o, w)| o * w).sum()
        };
        let cache = shape.forward(&params, &x);
        let mut grad = vec![0.0; params.len()];
        shape.backward(&params, &cache, &weights, &mut grad);
        let mut numeric = vec![0.0; params.len()];
        let mut p = params.clone();
        for i in 0..params.len() {
            p[i] = params[i] + h;
            let up = objective(&p);
            p[i] = params[i] - h;
            let down = objective(&p);
            p[i] = params[i];
            numeric[i] = (up - down) / (2.0 * h);
        }
        for l in 0..shape.n_layers() {
            let (w, b) = shape.offsets(l);
            let end = if l + 1 < shape.n_layers() { shape.offsets(l + 1).0 } else { params.len() };
            worst = worst.max(block_error(&grad[w..b], &numeric[w..b]));
            worst = worst.max(block_error(&grad[b..end], &numeric[b..end]));
            blocks += 2;
        }
    }

    // the full clipped loss through a desk-size policy, log_std included
    let cfg = TrainConfig { entropy_coef: 0.01, ..Default::default() };
    let mut params = PolicyParams::init(93, 6, &[64, 64], &mut rng);
    for k in params.log_std_range() {
        params.theta[k] = rng.random_range(-0.8..0.2);
    }
    let mut buf = RolloutBuffer::new(2);
    for k in 0..2 {
        let obs: Vec<f64> = (0..93).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = params.forward(&obs);
        let action: Vec<f64> = out.mean.iter().map(|m| m + rng.random_range(-0.5..0.5)).collect();
        let lp = log_prob(&action, &out.mean, params.log_std()) + 0.02;
        buf.push(obs, action, lp, -0.01 * k as f64, out.value, k == 1);
    }
    buf.compute_advantages(0.0, cfg.discount_gamma, cfg.gae_lambda);
    let idx = [0, 1];
    let adv = [0.7, -0.7];
    let mut grad = vec![0.0; params.n_params()];
    minibatch_loss(&params, &buf, &idx, &adv, &cfg, Some(&mut grad));
    let mut numeric = vec![0.0; params.n_params()];
    let mut q = params.clone();
    for i in 0..params.n_params() {
        q.theta[i] = params.theta[i] + h;
        let up = minibatch_loss(&q, &buf, &idx, &adv, &cfg, None).total;
        q.theta[i] = params.theta[i] - h;
        let down = minibatch_loss(&q, &buf, &idx, &adv, &cfg, None).total;
        q.theta[i] = params.theta[i];
        numeric[i] = (up - down) / (2.0 * h);
    }
    let pi = params.policy_range();
    let vf = params.value_range();
    let mut ranges = vec![params.log_std_range()];
    for (shape, base) in [(&params.policy_shape, pi.start), (&params.value_shape, vf.start)] {
        for l in 0..shape.n_layers() {
            let (w, b) = shape.offsets(l);
            let end = if l + 1 < shape.n_layers() { shape.offsets(l + 1).0 } else { shape.n_params() };
            ranges.push(base + w..base + b);
            ranges.push(base + b..base + end);
        }
    }
    for r in ranges {
        worst = worst.max(block_error(&grad[r.clone()], &numeric[r]));
        blocks += 1;
    }

    let pass = worst <= 1e-4;
    verdict(5, "gradient check", pass, &format!("{blocks} parameter tensors, worst relative error {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_06_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let on = AdaptConfig::default();
    let off = AdaptConfig { adaptation_enabled: false, ..on };
    let mut violations = Vec::new();
    for history in 0..10_000 {
        let n_muscles = rng.random_range(1..6);
        let mut bank = MuscleBank::new(n_muscles, on);
        let mut frozen = MuscleBank::new(n_muscles, off);
        for _ in 0..rng.random_range(1..40) {
            let mut traces = Vec::new();
            let mut forces = Vec::new();
            for m in &bank.muscles {
                let a: f64 = rng.random_range(-0.5..1.5);
                let f = muscle_force(a, m.lambda);
                if f > m.lambda || f < 0.0 {
                    violations.push(format!("history {history}: force {f} outside [0, {}]", m.lambda));
                }
                let len = rng.random_range(0..4);
                traces.push((0..len).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>());
                // heavy use reaches the cap within a history
                forces.push(if rng.random_bool(0.2) { 1e4 } else { f });
            }
            let before = bank.lambdas();
            bank.end_episode(&traces, &forces);
            frozen.end_episode(&traces, &forces);
            for (b, a) in before.iter().zip(bank.lambdas()) {
                if a < *b || a > on.lambda_cap() {
                    violations.push(format!("history {history}: lambda {b} -> {a}"));
                }
            }
            if frozen.lambdas().iter().any(|l| *l != on.lambda_0) {
                violations.push(format!("history {history}: disabled adaptation changed lambda"));
            }
        }
    }

    let mut env = LatticeEnv::new(EnvConfig::desk_scale()).unwrap();
    let mut slice_mismatch = 0;
    for episode in 0..6 {
        let obs = env.reset(0, 5).unwrap();
        if obs.force_ceilings != env.muscles().lambdas() {
            slice_mismatch += 1;
        }
        let action: Vec<f64> = (0..6).map(|m| ((episode + m) % 3) as f64 / 2.0).collect();
        let (obs, _) = env.step_control(&action).unwrap();
        if obs.force_ceilings != env.muscles().lambdas() {
            slice_mismatch += 1;
        }
    }
    env.flush();
    let grew = env.muscles().lambdas().iter().any(|l| *l > 2.0);

    let pass = violations.is_empty() && slice_mismatch == 0 && grew;
    verdict(
        6,
        "invariants",
        pass,
        &format!(
            "10000 histories, {} violations; observation ceiling slice mismatches {slice_mismatch}",
            violations.len()
        ),
    );
    assert!(pass, "{:?}", violations.iter().take(5).collect::<Vec<_>>());
}

struct DeskRuns {
    _dir: tempfile::TempDir,
    config: ExperimentConfig,
    adaptive: Vec<RunRecord>,
    nonadaptive: Vec<RunRecord>,
    rerun: RunRecord,
    adaptive_dirs: Vec<std::path::PathBuf>,
}

const DESK_TARGET: usize = 5;

fn desk_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::desk_scale(),
        train: TrainConfig { total_episodes: 1000, ..TrainConfig::default() },
        seeds: (0..5).collect(),
        targets: vec![DESK_TARGET],
        arms: vec![true, false],
        output_dir: out.to_path_buf(),
        log_cadence: 0,
        checkpoint_cadence: 0,
        rolling_window: 50,
        heatmap_episodes: 100,
    }
}

fn desk_runs() -> &'static DeskRuns {
    static RUNS: OnceLock<DeskRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = desk_config(dir.path());
        let run = |seed: u64, adaptation: bool, sub: &str| {
            let spec = RunSpec::new(seed, DESK_TARGET, adaptation);
            let d = dir.path().join(sub).join(&spec.run_id);
            (run_one(&config, &spec, &d, false).unwrap(), d)
        };
        let mut adaptive = Vec::new();
        let mut adaptive_dirs = Vec::new();
        for seed in 0..5 {
            let (r, d) = run(seed, true, "a");
            adaptive.push(r);
            adaptive_dirs.push(d);
        }
        let nonadaptive = (0..3).map(|seed| run(seed, false, "a").0).collect();
        let rerun = run(0, true, "b").0;
        DeskRuns { _dir: dir, config, adaptive, nonadaptive, rerun, adaptive_dirs }
    })
}

fn returns(r: &RunRecord) -> Vec<f64> {
    r.episodes.iter().map(|e| e.episode_return).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criterion_07_determinism() {
    let runs = desk_runs();
    let a = returns(&runs.adaptive[0]);
    let b = returns(&runs.rerun);
    let identical = a.len() == 1000 && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()) && a.len() == b.len();
    let ceilings_identical = runs.adaptive[0].muscles == runs.rerun.muscles;
    let pass = identical && ceilings_identical;
    verdict(
        7,
        "determinism",
        pass,
        &format!("two 1000-episode runs (seed 0, adaptive): histories bit-identical {identical}, muscle logs identical {ceilings_identical}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_desk_learning() {
    let runs = desk_runs();
    let mut improved = 0;
    let mut detail = Vec::new();
    for r in &runs.adaptive {
        let h = returns(r);
        let (first, last) = (mean(&h[..100]), mean(&h[h.len() - 100..]));
        if last > first {
            improved += 1;
        }
        detail.push(format!("s{} {first:.5}->{last:.5}", r.meta.seed));
    }
    let pass = improved >= 4;
    verdict(8, "desk-scale learning", pass, &format!("{improved}/5 seeds improved [{}]", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_09_adaptation_benefit() {
    let runs = desk_runs();
    let maxima = |rs: &[RunRecord]| -> Vec<f64> { rs.iter().map(|r| expt::max_return(r).unwrap()).collect() };
    let on = maxima(&runs.adaptive[..3]);
    let off = maxima(&runs.nonadaptive);
    let (m_on, m_off) = (mean(&on), mean(&off));
    let pass = m_on >= m_off;
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    verdict(
        9,
        "adaptation benefit",
        pass,
        &format!(
            "seeds 0-2 target {DESK_TARGET}: adaptive mean max {m_on:.6} [{}] vs non-adaptive {m_off:.6} [{}]",
            fmt(&on),
            fmt(&off)
        ),
    );
    assert!(pass, "adaptive mean of maxima {m_on} < non-adaptive {m_off}");
}

#[test]
fn trained_desk_agent_replays_closer_to_target() {
    let runs = desk_runs();
    let r = expt::replay(&runs.adaptive_dirs[0], &runs.config, None).unwrap();
    let untrained = {
        let mut env = LatticeEnv::new(runs.config.env.clone()).unwrap();
        env.reset(0, DESK_TARGET).unwrap();
        env.step_control(&[0.0; 6]).unwrap().1.distance
    };
    let pass = !r.unstable && r.final_distance < r.initial_distance && r.final_distance < untrained;
    let _ = writeln!(
        std::io::stderr(),
        "[{}] replay of trained desk agent: distance {:.5} m -> {:.5} m (resting terminus {:.5} m)",
        if pass { "PASS" } else { "FAIL" },
        r.initial_distance,
        r.final_distance,
        untrained
    );
    assert!(pass);
}

fn record(seed: u64, adaptation: bool, returns: [f64; 3], unstable: [bool; 3], activations: [[f64; 2]; 3]) -> RunRecord {
    let arm = if adaptation { "on" } else { "off" };
    RunRecord {
        meta: RunMeta {
            format: RECORD_FORMAT.into(),
            run_id: format!("t1_s{seed}_{arm}"),
            seed,
            target_index: 1,
            adaptation,
            config_hash: ExperimentConfig::default().hash(),
            n_columns: 2,
            n_levels: 1,
            lambda_0: 2.0,
            episodes: 3,
            wall_clock_seconds: 0.0,
            finished_unix: 0,
        },
        episodes: (0..3)
            .map(|e| EpisodeRow {
                episode: e,
                seed,
                target_index: 1,
                adaptation,
                episode_return: returns[e],
                max_step_reward: returns[e],
                final_distance: 0.01,
                unstable: unstable[e],
                steps: 1,
            })
            .collect(),
        muscles: (0..3)
            .flat_map(|e| {
                (0..2).map(move |m| MuscleEpisodeRow {
                    episode: e,
                    muscle_id: m,
                    lambda: if adaptation { 2.0 + 0.25 * (e * (m + 1)) as f64 } else { 2.0 },
                    force: activations[e][m] * 2.0,
                    activation: activations[e][m],
                    peak_strain: 0.0,
                })
            })
            .collect(),
    }
}

/// `data-*` attribute maps of every SVG element carrying `key`.
fn svg_elements(svg: &str, key: &str) -> Vec<std::collections::HashMap<String, String>> {
    let element = Regex::new(r"<(circle|rect|line)\b[^>]*>").unwrap();
    let attr = Regex::new(r#"data-([a-z-]+)="([^"]*)""#).unwrap();
    element
        .find_iter(svg)
        .map(|m| {
            attr.captures_iter(m.as_str())
                .map(|c| (c[1].to_string(), c[2].to_string()))
                .collect::<std::collections::HashMap<_, _>>()
        })
        .filter(|a| a.contains_key(key))
        .collect()
}

fn num(attrs: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    attrs[key].parse().unwrap()
}

#[test]
fn criterion_10_reporting_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let records = [
        record(0, true, [-1.0, -0.5, -0.25], [false; 3], [[0.25, 1.0], [0.5, 1.0], [0.75, 1.0]]),
        record(1, true, [-2.0, -2.0, -0.75], [false, true, false], [[0.0, 0.5], [0.0, 0.5], [0.0, 0.5]]),
        record(0, false, [-1.5, -1.0, -0.5], [false; 3], [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]),
    ];
    let config = ExperimentConfig { output_dir: out.to_path_buf(), rolling_window: 2, heatmap_episodes: 3, ..Default::default() };
    let mut runs = Vec::new();
    for r in &records {
        r.save(&run_dir(out, &r.meta.run_id)).unwrap();
        runs.push(ManifestEntry {
            spec: RunSpec::new(r.meta.seed, 1, r.meta.adaptation),
            status: RunStatus::Completed,
            error: None,
        });
    }
    Manifest { format: MANIFEST_FORMAT.into(), config_hash: config.hash(), config: config.clone(), runs }
        .save(out)
        .unwrap();
    let emitted = expt::report(out, config.rolling_window, config.heatmap_episodes).unwrap();
    let report = out.join("report");
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };

    // rolling means, window 2, unstable episode dropped before windowing:
    // s0 on [-1, -0.75, -0.375], s1 on [-2, -2, -1.375], s0 off [-1.5, -1.25, -0.75]
    let curves: Vec<CurveRow> = read_csv(&report.join("reward_curves_target1.csv")).unwrap();
    let want_mean = [-1.5, -1.375, -0.875];
    let want_std = [0.5f64.sqrt(), 0.78125f64.sqrt(), 0.5f64.sqrt()];
    let want_off = [-1.5, -1.25, -0.75];
    for (e, row) in curves.iter().enumerate() {
        check(row.mean_adaptive == Some(want_mean[e]), format!("curve mean at {e}: {:?}", row.mean_adaptive));
        check(row.std_adaptive == Some(want_std[e]), format!("curve std at {e}: {:?}", row.std_adaptive));
        check(row.mean_nonadaptive == Some(want_off[e]), format!("off mean at {e}"));
        check(row.std_nonadaptive == Some(0.0), format!("single-seed std at {e}"));
    }
    check(curves.len() == 3, "curve rows".into());

    // per-seed maxima -0.25 and -0.75 (adaptive), -0.5 (non-adaptive)
    let bars: Vec<BarRow> = read_csv(&report.join("max_reward_bars.csv")).unwrap();
    check(bars.len() == 2, "bar rows".into());
    check(bars[0].adaptation && bars[0].mean_max_return == -0.5, format!("adaptive bar {:?}", bars[0]));
    check(bars[0].std_max_return == 0.125f64.sqrt(), "adaptive bar std".into());
    check(!bars[1].adaptation && bars[1].mean_max_return == -0.5 && bars[1].std_max_return == 0.0, "non-adaptive bar".into());

    let traces: Vec<TraceRow> = read_csv(&report.join("adaptation_traces_t1_s0_on.csv")).unwrap();
    let want: Vec<(usize, usize, f64, f64)> =
        vec![(0, 0, 2.0, 0.5), (0, 1, 2.25, 1.0), (0, 2, 2.5, 1.5), (1, 0, 2.0, 2.0), (1, 1, 2.5, 2.0), (1, 2, 3.0, 2.0)];
    let got: Vec<(usize, usize, f64, f64)> = traces.iter().map(|t| (t.muscle_id, t.episode, t.lambda, t.force)).collect();
    check(got == want, format!("traces {got:?}"));

    let heat: Vec<HeatRow> = read_csv(&report.join("activation_heatmap_t1_s0_on.csv")).unwrap();
    check(heat[0].mean_activation == 0.5 && heat[0].normalized == 0.5, format!("heat 0 {:?}", heat[0]));
    check(heat[1].mean_activation == 1.0 && heat[1].normalized == 1.0, format!("heat 1 {:?}", heat[1]));
    let heat: Vec<HeatRow> = read_csv(&report.join("activation_heatmap_t1_s1_on.csv")).unwrap();
    check(heat[0].normalized == 0.0 && heat[1].normalized == 1.0, "heat s1".into());

    // every SVG against its CSV
    let mut compared = 0;
    for e in &emitted {
        check(e.csv.exists(), format!("{} has no CSV", e.svg.display()));
        let svg = std::fs::read_to_string(&e.svg).unwrap();
        let name = e.csv.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with("reward_curves") {
            let rows: Vec<CurveRow> = read_csv(&e.csv).unwrap();
            let els = svg_elements(&svg, "series");
            let mut expected = 0;
            for row in &rows {
                for (series, m, s) in [
                    ("adaptive", row.mean_adaptive, row.std_adaptive),
                    ("non-adaptive", row.mean_nonadaptive, row.std_nonadaptive),
                ] {
                    let (Some(m), Some(s)) = (m, s) else { continue };
                    expected += 1;
                    let hit = els.iter().any(|a| {
                        a["series"] == series && num(a, "episode") as usize == row.episode && num(a, "mean") == m && num(a, "std") == s
                    });
                    check(hit, format!("{name}: {series} episode {} missing from SVG", row.episode));
                }
            }
            check(els.len() == expected, format!("{name}: {} SVG points vs {expected} CSV values", els.len()));
        } else if name.starts_with("max_reward_bars") {
            let rows: Vec<BarRow> = read_csv(&e.csv).unwrap();
            let els = svg_elements(&svg, "n-seeds");
            check(els.len() == rows.len(), format!("{name}: bar count"));
            for row in &rows {
                let hit = els.iter().any(|a| {
                    num(a, "target") as usize == row.target_index
                        && a["adaptation"] == row.adaptation.to_string()
                        && num(a, "n-seeds") as usize == row.n_seeds
                        && num(a, "mean") == row.mean_max_return
                        && num(a, "std") == row.std_max_return
                });
                check(hit, format!("{name}: bar {row:?} missing"));
            }
        } else if name.starts_with("adaptation_traces") {
            let rows: Vec<TraceRow> = read_csv(&e.csv).unwrap();
            let els = svg_elements(&svg, "kind");
            check(els.len() == 2 * rows.len(), format!("{name}: point count"));
            for row in &rows {
                for (kind, v) in [("lambda", row.lambda), ("force", row.force)] {
                    let hit = els.iter().any(|a| {
                        a["kind"] == kind
                            && num(a, "muscle") as usize == row.muscle_id
                            && num(a, "episode") as usize == row.episode
                            && num(a, "value") == v
                    });
                    check(hit, format!("{name}: {kind} {row:?} missing"));
                }
            }
        } else if name.starts_with("activation_heatmap") {
            let rows: Vec<HeatRow> = read_csv(&e.csv).unwrap();
            let els = svg_elements(&svg, "normalized");
            check(els.len() == rows.len(), format!("{name}: segment count"));
            for row in &rows {
                let hit = els.iter().any(|a| {
                    num(a, "muscle") as usize == row.muscle_id
                        && num(a, "column") as usize == row.column
                        && num(a, "level") as usize == row.level
                        && num(a, "mean") == row.mean_activation
                        && num(a, "normalized") == row.normalized
                });
                check(hit, format!("{name}: segment {row:?} missing"));
            }
        } else {
            check(false, format!("unexpected figure {name}"));
        }
        compared += 1;
    }

    let pass = failures.is_empty() && compared == emitted.len() && compared == 1 + 1 + 3 + 3;
    verdict(
        10,
        "reporting fidelity",
        pass,
        &format!("{compared} figures compared against their CSVs, {} mismatches", failures.len()),
    );
    assert!(pass, "{failures:#?}");
}

#[test]
fn learner_solves_one_muscle_reach() {
    use latticeworm::env::ToyReachEnv;
    use latticeworm::ppo::Trainer;
    let cfg = TrainConfig { total_episodes: 3000, seed: 3, learning_rate: 1e-3, ..TrainConfig::default() };
    let mut trainer = Trainer::new(ToyReachEnv::new(), cfg).unwrap();
    trainer.train().unwrap();
    let mut env = ToyReachEnv::new();
    let obs = env.reset().unwrap();
    let action = trainer.act_deterministic(&obs);
    let tr = env.step(&action).unwrap();
    let radius = RewardConfig::default().bonus_radius_d;
    let pass = tr.distance <= radius;
    let _ = writeln!(
        std::io::stderr(),
        "[{}] one-muscle reach after 3000 episodes: activation {:.4} (optimum {:.4}), distance {:.2e} m",
        if pass { "PASS" } else { "FAIL" },
        action[0],
        env.optimal_activation(),
        tr.distance
    );
    assert!(pass);
}
