//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use switchid::pe_estimation::{correlation_words_up_to, EstimateOptions, IdentifyOptions, PlugIn};
use switchid::pe_inputs::default_max_len;
use switchid::testing::{
    planar_example, random_reversible_system, random_stable_system, random_system, scalar_example,
};
use switchid::{
    build_hankel, build_pe_input_model_based, check_pe_conditions, empirical_mode_freq, estimate_all_markov,
    extract_markov_from_response, gcr_evaluate, generate_pe_input, hankel_rank, identify, markov_distance, realize,
    state_correlation_check, words_up_to, Execution, HybridWord, MarkovSource, PeSignalConfig, SwitchedLinearSystem,
};

type Criterion = (&'static str, u64, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn random_word<R: Rng>(rng: &mut R, d: usize, m: usize, len: usize) -> HybridWord {
    let mut w = HybridWord::with_capacity(m, len);
    for _ in 0..len {
        let q = rng.random_range(1..=d);
        let u: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        w.push(q, &u);
    }
    w
}

fn simulate_outputs(sys: &SwitchedLinearSystem, w: &HybridWord) -> switchid::OutputSeries {
    sys.simulate(w, &DVector::zeros(sys.n())).expect("simulation").into_outputs()
}

fn gcr_vs_simulation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n, d) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let (m, p) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let sys = Arc::new(random_system(&mut rng, n, m, p, d));
        let src = MarkovSource::from_model(sys.clone());
        for _ in 0..5 {
            let len = rng.random_range(1..=20);
            let w = random_word(&mut rng, d, m, len);
            let direct = sys.response(&w).unwrap().unwrap();
            let gcr = gcr_evaluate(&src, &w).unwrap();
            worst = worst.max((direct - gcr).amax());
        }
    }
    Outcome { passed: worst <= 1e-10, detail: format!("max entry diff {worst:.2e} (tol 1e-10), 200 systems x 5 words") }
}

fn oracle_vs_model() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut words = 0;
    for _ in 0..20 {
        let (n, m, p) = (rng.random_range(1..=4), rng.random_range(1..=2), rng.random_range(1..=2));
        let sys = Arc::new(random_system(&mut rng, n, m, p, 2));
        let model = MarkovSource::from_model(sys.clone());
        let oracle = MarkovSource::from_simulator(sys);
        worst = worst.max(markov_distance(&model, &oracle, 4).unwrap());
        words += words_up_to(4, 2).unwrap().len() * 4;
    }
    Outcome { passed: worst <= 1e-12, detail: format!("max entry diff {worst:.2e} (tol 1e-12), {words} words over 20 systems") }
}

fn realization_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut dim_mismatch = 0;
    for _ in 0..100 {
        let (n, m, p) = (rng.random_range(1..=4), rng.random_range(1..=2), rng.random_range(1..=2));
        let sys = Arc::new(random_stable_system(&mut rng, n, m, p, 2));
        let src = MarkovSource::from_model(sys);
        let h = build_hankel(&src, n, n + 1).unwrap();
        let found = realize(&h, 1e-9).unwrap();
        if found.system.n() != hankel_rank(&h, 1e-9) || found.system.n() != n {
            dim_mismatch += 1;
        }
        let found_src = MarkovSource::from_model(Arc::new(found.system));
        worst = worst.max(markov_distance(&src, &found_src, 2 * n + 1).unwrap());
    }
    Outcome {
        passed: worst <= 1e-8 && dim_mismatch == 0,
        detail: format!("max Markov distance {worst:.2e} (tol 1e-8), dimension mismatches {dim_mismatch}/100"),
    }
}

fn finite_pe_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut extract_err, mut ident_err) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (n, m, p) = (rng.random_range(1..=3), rng.random_range(1..=2), rng.random_range(1..=2));
        let sys = Arc::new(random_reversible_system(&mut rng, n, m, p, 2));
        let pe = build_pe_input_model_based(&sys, n, default_max_len(&sys), 1e-12).unwrap();
        let y = simulate_outputs(&sys, &pe.w);
        let depth = 2 * n - 1;
        let extracted = extract_markov_from_response(&pe, &y, depth).unwrap();
        let model = MarkovSource::from_model(sys.clone());
        extract_err = extract_err.max(markov_distance(&extracted, &model, depth).unwrap());
        let h = build_hankel(&extracted, n - 1, n).unwrap();
        let found = realize(&h, 1e-9).unwrap();
        let found_src = MarkovSource::from_model(Arc::new(found.system));
        ident_err = ident_err.max(markov_distance(&model, &found_src, 2 * n + 1).unwrap());
    }
    Outcome {
        passed: extract_err <= 1e-8 && ident_err <= 1e-8,
        detail: format!(
            "extraction error {extract_err:.2e}, identified-model distance {ident_err:.2e} (tol 1e-8), 50 systems"
        ),
    }
}

fn asymptotic_pe() -> Outcome {
    let sys = Arc::new(scalar_example());
    let reference = MarkovSource::from_model(sys.clone());
    let (mut final_err, mut early, mut late) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..10 {
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, seed, 200_000)).unwrap();
        let y = simulate_outputs(&sys, &w);
        let opts = EstimateOptions { checkpoints: vec![10_000, 40_000, 160_000, 200_000], ..EstimateOptions::new(2) };
        let (_, report) = estimate_all_markov(&w, &y, 2, &opts, Some(&reference)).unwrap();
        let rel = |i: usize| report.checkpoints[i].max_rel_error.unwrap();
        early.push(rel(0));
        late.push(rel(2));
        final_err.push(rel(3));
    }
    let (med, e1, e3) = (median(final_err), median(early), median(late));
    Outcome {
        passed: med <= 0.05 && e3 <= 0.8 * e1,
        detail: format!(
            "median rel error {med:.4} at N=2e5 (tol 0.05); median error 1e4 -> 1.6e5: {e1:.4} -> {e3:.4} (ratio {:.3}, need <= 0.8)",
            e3 / e1
        ),
    }
}

fn correlation_residuals() -> Outcome {
    let words = correlation_words_up_to(3, 2).unwrap();
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, sys) in [("scalar", scalar_example()), ("planar", planar_example())] {
        let mut ratios = Vec::new();
        let mut cross = Vec::new();
        for seed in 0..10 {
            let w = generate_pe_input(&PeSignalConfig::white(2, 1, 100 + seed, 200_000)).unwrap();
            let rep = state_correlation_check(&sys, &w, &words, Execution::default()).unwrap();
            ratios.push(rep.max_residual() / rep.scale);
            cross.push(rep.max_state_input_residual / rep.scale);
        }
        let (r, l) = (median(ratios), median(cross));
        passed &= r <= 0.05;
        parts.push(format!("{name}: median max residual/scale {r:.4} (x_t u_t term {l:.4})"));
    }
    Outcome { passed, detail: format!("{} (tol 0.05)", parts.join("; ")) }
}

fn mode_frequencies() -> Outcome {
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, 7, 100_000)).unwrap();
    let mut worst = 0.0f64;
    for v in words_up_to(3, 2).unwrap().into_iter().filter(|v| !v.is_empty()) {
        let f = empirical_mode_freq(&w, &v).unwrap();
        worst = worst.max((f - 0.5f64.powi(v.len() as i32)).abs());
    }
    Outcome { passed: worst <= 0.01, detail: format!("max |pi_hat - 2^-|v|| = {worst:.4} over 14 words (tol 0.01)") }
}

// Every stochastic pipeline serialized to bytes.
fn pipeline_bytes(seed: u64, exec: Execution) -> Vec<u8> {
    let mut out = Vec::new();
    let sys = Arc::new(planar_example());
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, seed, 50_000)).unwrap();
    switchid::io::write_hybrid_csv(&w, &mut out).unwrap();
    let traj = sys.simulate(&w, &DVector::zeros(2)).unwrap();
    switchid::io::write_trajectory_csv(&w, &traj, &mut out).unwrap();
    let y = traj.into_outputs();
    let reference = MarkovSource::from_model(sys.clone());
    let opts = EstimateOptions { checkpoints: vec![10_000, 50_000], exec, ..EstimateOptions::new(3) };
    let (est, report) = estimate_all_markov(&w, &y, 2, &opts, Some(&reference)).unwrap();
    out.extend(serde_json::to_vec(&est.source.table(3).unwrap()).unwrap());
    report.write_csv(&mut out).unwrap();
    let mut iopts = IdentifyOptions::new(2);
    iopts.exec = exec;
    iopts.plug_in = PlugIn::Theoretical { mode_probs: vec![0.5, 0.5], r: DMatrix::identity(1, 1) };
    out.extend(identify(&w, &y, 2, &iopts).unwrap().system.to_json_string().into_bytes());
    out.extend(serde_json::to_vec(&check_pe_conditions(&w, 2, 3, 5, 0.05, exec).unwrap()).unwrap());
    let words = correlation_words_up_to(3, 2).unwrap();
    out.extend(serde_json::to_vec(&state_correlation_check(&sys, &w, &words, exec).unwrap()).unwrap());
    out
}

fn determinism() -> Outcome {
    let a = pipeline_bytes(42, Execution::Parallel);
    let b = pipeline_bytes(42, Execution::Parallel);
    let c = pipeline_bytes(42, Execution::Sequential);
    let other = pipeline_bytes(43, Execution::Parallel);
    Outcome {
        passed: a == b && a == c && a != other,
        detail: format!(
            "{} bytes; rerun identical: {}, sequential identical: {}, other seed differs: {}",
            a.len(),
            a == b,
            a == c,
            a != other
        ),
    }
}

fn main() {
    switchid::exec::init_thread_pool_from_env();
    let criteria: Vec<Criterion> = vec![
        ("1 GCR equals simulation", 10, gcr_vs_simulation),
        ("2 oracle/model Markov agreement", 10, oracle_vs_model),
        ("3 realization round trip", 60, realization_round_trip),
        ("4 finite PE construction", 60, finite_pe_construction),
        ("5 asymptotic PE estimation", 120, asymptotic_pe),
        ("6 state/output correlation limits", 120, correlation_residuals),
        ("7 mode-frequency consistency", 60, mode_frequencies),
        ("8 determinism", 120, determinism),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let ok = outcome.passed && in_time;
        if !ok {
            failures += 1;
        }
        println!(
            "[{}] {name}: {}; runtime {:.2} s (limit {limit} s)",
            if ok { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
