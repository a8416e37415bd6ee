//! Acceptance suite: one test per release criterion, each printing a
//! single PASS line with the measured quantities (run with
//! `cargo test -p hedgebench --test acceptance -- --nocapture`).
//!
//! Tolerances are pinned in the constants below; they are part of the
//! release gate, not knobs.

use hedgebench::agents::{
    double_dql_target, dql_target, dueling_aggregate, never_stop, ppo_clip_objective, td3_target,
    train, Algorithm, TrainInputs,
};
use hedgebench::bs::{self, DeltaHedgePolicy};
use hedgebench::env::{run_episode, run_episodes, rsqp, EnvConfig, Policy};
use hedgebench::harness::{
    compare, early_stop_check, evaluate, generate_datasets, student_t_cdf, welch_t_test_one_sided,
    DatasetSpec, ExperimentSpec,
};
use hedgebench::market::{
    simulate_paths, simulate_paths_with_offset, GjrGarchParams, PathSet, PricePath,
};
use hedgebench::num::{special, Activation, Matrix, Mlp, Optimizer, OutputHead, RngStream, Tape};

/// Criterion 1: autodiff vs central finite differences over 100 random
/// network shapes drawn from the hyperparameter grid.
const GRAD_NETS: usize = 100;
const GRAD_REL_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;

/// Criterion 3: long-run moments of the simulated returns.
const VARIANCE_REL_TOL: f64 = 0.02;

/// Criterion 6: the headline training run.
const HEADLINE_BUDGET: u64 = 20_000;
const HEADLINE_RATIO: f64 = 0.98;

/// Criterion 7: absolute baseline window.
const BASELINE_CENTER: f64 = 0.9038;
const BASELINE_TOL: f64 = 0.05;

/// Criterion 8: smoke-run length for the value-based/actor-critic family.
const SMOKE_UPDATES: u64 = 5_000;

fn table_params() -> GjrGarchParams {
    GjrGarchParams::default()
}

fn desk_env() -> EnvConfig {
    bs::default_env_config(&table_params()).unwrap()
}

#[test]
fn criterion_01_gradient_suite() {
    let started = std::time::Instant::now();
    let mut shape_rng = RngStream::new(101, 0);
    let layer_grid = [2usize, 3, 4];
    let width_grid = [64usize, 128, 256];
    let mut worst = 0.0f64;
    let mut kinks = 0usize;
    let mut probes = 0usize;

    for net_idx in 0..GRAD_NETS {
        let layers = layer_grid[shape_rng.index(3)];
        let width = width_grid[shape_rng.index(3)];
        let out_dim = if shape_rng.index(2) == 0 { 1 } else { 51 };
        let head = if shape_rng.index(2) == 0 {
            OutputHead::Identity
        } else {
            OutputHead::Logistic
        };
        let mut net = Mlp::with_hidden(3, layers, width, out_dim, Activation::Relu, head).unwrap();
        let mut init = RngStream::new(500 + net_idx as u64, 0);
        net.init_fan_in(&mut init);

        let x = Matrix::from_vec(
            4,
            3,
            (0..12).map(|_| shape_rng.range(-1.5, 1.5)).collect(),
        );
        let loss_of = |net: &Mlp| {
            let out = net.forward_batch(&x);
            out.data().iter().sum::<f64>() / out.data().len() as f64
        };
        let grads = {
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let xid = tape.constant(x.clone());
            let out = net.tape_forward(&mut tape, xid, &bound);
            let loss = tape.mean(out);
            tape.backward(loss).unwrap()
        };

        let base = net.flat_params();
        let mut probe = net.clone();
        let mut fd_at = |idx: usize, h: f64| {
            let mut plus = base.clone();
            plus[idx] += h;
            probe.set_flat_params(&plus).unwrap();
            let up = loss_of(&probe);
            let mut minus = base.clone();
            minus[idx] -= h;
            probe.set_flat_params(&minus).unwrap();
            let down = loss_of(&probe);
            (up - down) / (2.0 * h)
        };
        // a spread of coordinates across all layers
        for _ in 0..16 {
            let idx = shape_rng.index(base.len());
            let fd = fd_at(idx, FD_STEP);
            let fd_half = fd_at(idx, 0.5 * FD_STEP);
            // two step sizes must agree to O(h^2); where they do not, the
            // probe crossed a relu kink and the function is not
            // differentiable there — skip the coordinate
            if (fd - fd_half).abs() > 1e-9 + 1e-6 * fd_half.abs() {
                kinks += 1;
                continue;
            }
            probes += 1;
            // relative where the gradient has size, absolute (1e-8) below
            // the 1e-3 floor where central differences lose digits
            let rel = (grads[idx] - fd).abs() / grads[idx].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
            assert!(
                rel < GRAD_REL_TOL,
                "net {net_idx} ({layers}x{width}->{out_dim}) param {idx}: ad {} fd {} rel {rel:e}",
                grads[idx],
                fd
            );
        }
    }
    let dt = started.elapsed().as_secs_f64();
    assert!(dt < 60.0, "gradient suite took {dt:.1} s (budget 60 s)");
    assert!(
        kinks * 20 < probes,
        "too many kink skips ({kinks} of {})",
        kinks + probes
    );
    println!(
        "[criterion 1] PASS — {GRAD_NETS} nets, {probes} coords, max rel err {worst:.2e}, {kinks} kink skips, {dt:.1} s"
    );
}

#[test]
fn criterion_02_rsqp_oracle_equivalence() {
    let mut rng = RngStream::new(202, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = 1 + rng.index(64);
        let losses: Vec<f64> = (0..len).map(|_| rng.range(-5.0, 5.0)).collect();
        let got = rsqp(&losses).unwrap();
        // naive loop-and-accumulate re-implementation
        let mut acc = 0.0;
        for &r in &losses {
            if r > 0.0 {
                acc += r * r;
            }
        }
        let want = (acc / losses.len() as f64).sqrt();
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() < 1e-12);

        for c in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = losses.iter().map(|r| c * r).collect();
            let s = rsqp(&scaled).unwrap();
            assert!(
                (s - c * got).abs() < 1e-10 * (1.0 + c * got),
                "homogeneity failed at c={c}"
            );
        }
    }
    println!("[criterion 2] PASS — 10^4 vectors, max |delta| {worst:.2e}");
}

#[test]
fn criterion_03_garch_stationarity() {
    let started = std::time::Instant::now();
    let params = table_params();
    let set = simulate_paths(&params, 1, 1_000_000, 100.0, 1.0 / 12.0, 7).unwrap();
    let y = &set.paths[0].log_returns;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let stationary = params.stationary_variance().unwrap();
    assert!((stationary - 1.4902e-3).abs() < 1e-6);

    let var_ratio = var / stationary;
    assert!(
        (var_ratio - 1.0).abs() < VARIANCE_REL_TOL,
        "sample variance {var:.6e} vs stationary {stationary:.6e} (ratio {var_ratio:.4})"
    );
    let se = (var / n).sqrt();
    let mean_gap = (mean - params.mu).abs();
    assert!(
        mean_gap < 4.0 * se,
        "sample mean {mean:.6e} vs mu {} ({} SE)",
        params.mu,
        mean_gap / se
    );
    let dt = started.elapsed().as_secs_f64();
    assert!(dt < 60.0, "stationarity run took {dt:.1} s (budget 60 s)");
    println!(
        "[criterion 3] PASS — var ratio {var_ratio:.4}, mean gap {:.2} SE, {dt:.1} s",
        mean_gap / se
    );
}

#[test]
fn criterion_04_mle_sanity() {
    let started = std::time::Instant::now();
    let truth = table_params();
    let set = simulate_paths(&truth, 1, 5000, 100.0, 1.0 / 12.0, 21).unwrap();
    let returns = &set.paths[0].log_returns;
    let cal = hedgebench::market::calibrate_mle(returns, None).unwrap();
    let nll_truth = hedgebench::market::negative_log_likelihood(&truth, returns);
    assert!(
        cal.nll <= nll_truth + 1e-6,
        "calibrated NLL {} vs truth {}",
        cal.nll,
        nll_truth
    );

    let flat = GjrGarchParams::new(0.0, 0.01, 0.0, 0.0, 0.0).unwrap();
    let set = simulate_paths(&flat, 1, 10_000, 100.0, 1.0 / 12.0, 11).unwrap();
    let rec = hedgebench::market::calibrate_mle(&set.paths[0].log_returns, None).unwrap();
    assert!(
        (rec.params.nu0 - 0.01).abs() <= 0.001,
        "recovered nu0 {} outside +-10% of 0.01",
        rec.params.nu0
    );
    let dt = started.elapsed().as_secs_f64();
    assert!(dt < 120.0, "MLE suite took {dt:.1} s (budget 120 s)");
    println!(
        "[criterion 4] PASS — dNLL {:.2e}, recovered nu0 {:.5}, {dt:.1} s",
        cal.nll - nll_truth,
        rec.params.nu0
    );
}

#[test]
fn criterion_05_self_financing() {
    struct Seq(Vec<f64>);
    impl Policy for Seq {
        fn act(&self, t: usize, _s: [f64; 3]) -> f64 {
            self.0[t]
        }
    }
    let mut rng = RngStream::new(505, 0);
    for (s0, strike) in [(100.0, 100.0), (110.0, 100.0)] {
        let env = EnvConfig {
            strike,
            horizon: 12,
            delta_t: 1.0 / 12.0,
            rate_step: 0.0,
            s0,
            premium: 5.0,
        };
        let path = PricePath::from_prices(vec![s0; 13]);
        let expected = -env.premium + if s0 > strike { s0 - strike } else { 0.0 };
        for _ in 0..1000 {
            let actions: Vec<f64> = (0..12).map(|_| rng.uniform()).collect();
            let rec = run_episode(&Seq(actions), &path, &env).unwrap();
            for v in &rec.values {
                assert!(
                    (v - env.premium).abs() < 1e-10,
                    "V_t drifted to {v} on a constant path"
                );
            }
            assert!(
                (rec.loss - expected).abs() < 1e-10,
                "terminal loss {} vs {expected}",
                rec.loss
            );
        }
    }
    println!("[criterion 5] PASS — 2x1000 random action sequences, V_t constant to 1e-10");
}

/// The headline run: tuned MCPG against the delta-hedge baseline on a
/// fresh test set. This is the long test (tens of minutes on one core).
#[test]
fn criterion_06_scaled_headline_result() {
    let started = std::time::Instant::now();
    let params = table_params();
    let env = desk_env();
    let train_set = simulate_paths(&params, 1 << 15, 12, 100.0, 1.0 / 12.0, 1).unwrap();
    let validation =
        simulate_paths_with_offset(&params, 1 << 13, 12, 100.0, 1.0 / 12.0, 1, 1 << 15).unwrap();
    let test_set = simulate_paths_with_offset(
        &params,
        1 << 13,
        12,
        100.0,
        1.0 / 12.0,
        1,
        (1 << 15) + (1 << 13),
    )
    .unwrap();

    let baseline = DeltaHedgePolicy::from_params(env, &params).unwrap();
    let baseline_validation = rsqp(&run_episodes(&baseline, &validation, &env).unwrap()).unwrap();
    let baseline_test = rsqp(&run_episodes(&baseline, &test_set, &env).unwrap()).unwrap();

    let config = Algorithm::Mcpg.tuned_config();
    assert_eq!(
        (config.learning_rate, config.batch_size, config.hidden_layers, config.hidden_size),
        (1e-5, 256, 4, 64)
    );
    let inputs = TrainInputs {
        env: &env,
        train: &train_set,
        validation: &validation,
        config: &config,
        budget: HEADLINE_BUDGET,
        validation_every: 1000,
        seed: 7,
    };
    let stop = |log: &[(u64, f64)]| {
        let values: Vec<f64> = log.iter().map(|(_, v)| *v).collect();
        early_stop_check(&values, baseline_validation)
    };
    let outcome = train(&inputs, &stop).unwrap();
    assert!(!outcome.trace.diverged, "headline training diverged");

    let test_rsqp = rsqp(&run_episodes(&outcome.policy, &test_set, &env).unwrap()).unwrap();
    let dt = started.elapsed().as_secs_f64();
    assert!(dt < 3600.0, "headline run took {dt:.0} s (budget 3600 s)");
    assert!(
        test_rsqp <= HEADLINE_RATIO * baseline_test,
        "trained policy RSQP {test_rsqp:.4} vs {:.4} required ({:.4} baseline, {} updates)",
        HEADLINE_RATIO * baseline_test,
        baseline_test,
        outcome.trace.updates_done
    );
    println!(
        "[criterion 6] PASS — policy {test_rsqp:.4} vs baseline {baseline_test:.4} (ratio {:.3}, {} updates, {:.0} s)",
        test_rsqp / baseline_test,
        outcome.trace.updates_done,
        dt
    );
}

/// The absolute baseline magnitude pinned from the reference results.
/// See the repository notes: under the shipped market parameters the
/// measured downside tail sits well above this window; the criterion is
/// asserted as stated rather than loosened.
#[test]
fn criterion_07_baseline_magnitude() {
    let params = table_params();
    let env = desk_env();
    let set = simulate_paths(&params, 1 << 13, 12, 100.0, 1.0 / 12.0, 42).unwrap();
    let losses = bs::run_delta_hedge(&set, &env, None).unwrap();
    let risk = rsqp(&losses).unwrap();
    assert!(
        (risk - BASELINE_CENTER).abs() <= BASELINE_TOL,
        "baseline RSQP {risk:.4} outside {BASELINE_CENTER} +- {BASELINE_TOL}"
    );
    println!("[criterion 7] PASS — baseline RSQP {risk:.4}");
}

#[test]
fn criterion_08_value_based_smoke_suite() {
    let params = table_params();
    let env = desk_env();
    let train_set = simulate_paths(&params, 1 << 15, 12, 100.0, 1.0 / 12.0, 3).unwrap();
    let validation =
        simulate_paths_with_offset(&params, 1 << 13, 12, 100.0, 1.0 / 12.0, 3, 1 << 15).unwrap();

    let algos = [
        Algorithm::Dql,
        Algorithm::DoubleDql,
        Algorithm::DuelingDql,
        Algorithm::DdDql,
        Algorithm::Ddpg,
        Algorithm::Td3,
        Algorithm::Ppo,
    ];
    for algo in algos {
        let started = std::time::Instant::now();
        // tuned learning rate; compact 2x64 trunk and batch 64 keep the
        // smoke suite inside a desktop-CPU budget
        let mut config = algo.tuned_config();
        config.hidden_layers = 2;
        config.hidden_size = 64;
        config.batch_size = 64;
        let inputs = TrainInputs {
            env: &env,
            train: &train_set,
            validation: &validation,
            config: &config,
            budget: SMOKE_UPDATES,
            validation_every: 1000,
            seed: 11,
        };
        let outcome = train(&inputs, &never_stop).unwrap();
        assert!(!outcome.trace.diverged, "{} diverged", algo.name());
        assert_eq!(outcome.trace.updates_done, SMOKE_UPDATES, "{}", algo.name());
        assert!(
            !outcome.trace.validation_rsqps.is_empty(),
            "{} never validated",
            algo.name()
        );
        for (_, v) in &outcome.trace.validation_rsqps {
            assert!(v.is_finite(), "{} validation RSQP not finite", algo.name());
        }
        // emitted actions stay inside the unit interval
        let mut rng = RngStream::new(99, 0);
        for _ in 0..200 {
            let state = [rng.uniform(), rng.range(0.3, 2.0), rng.range(-2.0, 3.0)];
            let x = outcome.policy.act(rng.index(12), state);
            assert!((0.0..=1.0).contains(&x), "{} emitted {x}", algo.name());
        }
        let last = outcome.trace.validation_rsqps.last().unwrap().1;
        println!(
            "[criterion 8] {}: final validation RSQP {last:.4} after {} updates ({:.0} s)",
            algo.name(),
            SMOKE_UPDATES,
            started.elapsed().as_secs_f64()
        );
    }
    println!("[criterion 8] PASS — 7 algorithms, no NaN, actions in [0,1]");
}

#[test]
fn criterion_09_early_stopping_rule() {
    let baseline = 0.9038;
    let table: &[(&[f64], bool)] = &[
        (&[0.85, 0.86, 0.87, 0.88, 0.89, 0.90], true),
        (&[0.85, 0.86, 0.87, 0.88, 0.89, 0.84], false), // dips below anchor
        (&[0.95, 0.96, 0.97, 0.98, 0.99, 1.00], false), // never under baseline
        (&[0.86, 0.87, 0.88, 0.89, 0.90], false),       // too short
        (&[1.2, 1.1, 0.85, 0.86, 0.87, 0.88, 0.89, 0.90], true), // window-local
        (&[0.85, 0.86, 0.87, 0.88, 0.85, 0.90], false), // tie with anchor inside window
        (&[0.85, 0.90, 0.91, 0.92, 0.93, 0.9038], false), // last not under baseline
    ];
    for (log, want) in table {
        assert_eq!(
            early_stop_check(log, baseline),
            *want,
            "log {log:?} expected {want}"
        );
    }
    println!("[criterion 9] PASS — {} table rows", table.len());
}

#[test]
fn criterion_10_welch_test() {
    let a = [0.8, 0.9, 1.0, 1.1];
    assert_eq!(welch_t_test_one_sided(&a, &a).unwrap(), 0.5);

    // independent oracle: Welch statistic recomputed by hand, CDF by
    // Simpson quadrature of the t density
    fn t_pdf(x: f64, df: f64) -> f64 {
        let ln_c = special::ln_gamma(0.5 * (df + 1.0))
            - special::ln_gamma(0.5 * df)
            - 0.5 * (df * std::f64::consts::PI).ln();
        (ln_c - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp()
    }
    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let m = b.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / m;
        let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (n - 1.0);
        let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (m - 1.0);
        let se2 = va / n + vb / m;
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / ((va / n) * (va / n) / (n - 1.0) + (vb / m) * (vb / m) / (m - 1.0));
        let steps = 80_000;
        let h = t.abs() / steps as f64;
        let mut s = t_pdf(0.0, df) + t_pdf(t.abs(), df);
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * t_pdf(i as f64 * h, df);
        }
        let half = s * h / 3.0;
        if t <= 0.0 {
            0.5 - half
        } else {
            0.5 + half
        }
    }

    let lo = [0.80, 0.81, 0.82];
    let hi = [0.90, 0.89, 0.91];
    let p = welch_t_test_one_sided(&lo, &hi).unwrap();
    let q = welch_t_test_one_sided(&hi, &lo).unwrap();
    assert!(p < 0.01 && q > 0.99);
    assert!((p - oracle(&lo, &hi)).abs() < 1e-6, "p {p} oracle {}", oracle(&lo, &hi));
    assert!((q - oracle(&hi, &lo)).abs() < 1e-6);
    // CDF sanity pin
    assert!((student_t_cdf(0.0, 7.0) - 0.5).abs() < 1e-15);
    println!("[criterion 10] PASS — p = {p:.3e}, complement {q:.6}");
}

#[test]
fn criterion_11_target_rule_micro_tests() {
    // dql_target
    assert_eq!(dql_target(-4.0, true, 1.0, &[9.0, 9.0]), -4.0);
    assert_eq!(dql_target(0.0, false, 1.0, &[5.0, 2.0]), 5.0);
    // double_dql_target
    assert_eq!(
        double_dql_target(0.0, false, 1.0, &[1.0, 3.0], &[5.0, 2.0]),
        2.0
    );
    assert_eq!(
        double_dql_target(-1.0, true, 1.0, &[1.0, 3.0], &[5.0, 2.0]),
        -1.0
    );
    // shared nets collapse the two rules
    let mut rng = RngStream::new(1111, 0);
    for _ in 0..500 {
        let q: Vec<f64> = (0..51).map(|_| rng.range(-5.0, 5.0)).collect();
        let r = rng.range(-4.0, 0.0);
        let a = dql_target(r, false, 1.0, &q);
        let b = double_dql_target(r, false, 1.0, &q, &q);
        assert!((a - b).abs() < 1e-12);
    }
    // dueling_aggregate
    assert_eq!(dueling_aggregate(1.0, &[0.0; 51]), vec![1.0; 51]);
    assert_eq!(dueling_aggregate(0.0, &[1.0, 2.0, 3.0]), vec![-1.0, 0.0, 1.0]);
    // ppo clip
    assert_eq!(ppo_clip_objective(1.0, 2.5, 0.2), 2.5);
    assert!((ppo_clip_objective(2.0, 1.0, 0.2) - 1.2).abs() < 1e-15);
    assert!((ppo_clip_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    // td3 target: min of twins via bias-only critics
    let zero_actor = Mlp::new(&[3, 1], Activation::Relu, OutputHead::Logistic).unwrap();
    let bias_critic = |v: f64| {
        let mut c = Mlp::new(&[4, 1], Activation::Relu, OutputHead::Identity).unwrap();
        let mut p = c.flat_params();
        *p.last_mut().unwrap() = v;
        c.set_flat_params(&p).unwrap();
        c
    };
    let c3 = bias_critic(3.0);
    let c5 = bias_critic(5.0);
    assert_eq!(
        td3_target(0.0, false, [0.2, 1.0, 1.0], &zero_actor, &c3, &c5, 1.0, 0.0, 0.25),
        3.0
    );
    assert_eq!(
        td3_target(-2.0, true, [0.2, 1.0, 1.0], &zero_actor, &c3, &c5, 1.0, 0.0, 0.25),
        -2.0
    );
    println!("[criterion 11] PASS — all target-rule tables");
}

#[test]
fn criterion_12_compare_determinism() {
    std::env::set_var("HEDGEBENCH_THREADS", "1");
    let mut spec = ExperimentSpec::desk(77).unwrap();
    spec.dataset = DatasetSpec {
        train_size: 64,
        validation_size: 32,
        n_test_sets: 3,
        test_size: 32,
    };
    spec.algorithms = vec![Algorithm::Mcpg, Algorithm::Dql];
    spec.budget = 60;
    spec.tune_budget = 30;
    spec.validation_every = 30;
    let a = compare(&spec).unwrap().to_json().unwrap();
    let b = compare(&spec).unwrap().to_json().unwrap();
    assert_eq!(a.as_bytes(), b.as_bytes(), "comparison.json not byte-identical");
    println!("[criterion 12] PASS — byte-identical comparison.json ({} bytes)", a.len());
}

/// Not a numbered criterion: exercises the evaluation helper end to end
/// so the per-set statistics used above are themselves covered here.
#[test]
fn evaluation_summary_consistency() {
    let mut spec = ExperimentSpec::desk(5).unwrap();
    spec.dataset = DatasetSpec {
        train_size: 16,
        validation_size: 16,
        n_test_sets: 4,
        test_size: 64,
    };
    let datasets = generate_datasets(&spec, None).unwrap();
    let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch).unwrap();
    let eval = evaluate(&baseline, &datasets.tests, &spec.env).unwrap();
    let mean: f64 = eval.per_set.iter().sum::<f64>() / eval.per_set.len() as f64;
    assert!((eval.mean - mean).abs() < 1e-12);
    assert!(eval.per_set.iter().all(|r| r.is_finite()));
    let _ = PathSet::from_paths(
        datasets.tests[0].paths.clone(),
        spec.garch,
        spec.env.delta_t,
    )
    .unwrap();
}
