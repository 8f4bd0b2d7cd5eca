use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use switchid::markov::markov_scale;
use switchid::pe_estimation::{correlation_words_up_to, EstimateOptions, IdentifyOptions, PlugIn};
use switchid::pe_inputs::default_max_len;
use switchid::realization::span_reachability_rank;
use switchid::testing::{planar_example, random_paired_system, random_reversible_system, scalar_example};
use switchid::{
    build_hankel, build_pe_input_map_based, build_pe_input_model_based, estimate_all_markov,
    extract_markov_from_response, find_zeroing_input, generate_pe_input, identify, is_minimal, markov_distance,
    realize, state_correlation_check, Error, Execution, InverseMap, MarkovSource, OutputSeries, PeSignalConfig,
    PersistentInput, SwitchedLinearSystem, HybridWord,
};

fn outputs(sys: &SwitchedLinearSystem, w: &HybridWord) -> OutputSeries {
    sys.simulate(w, &DVector::zeros(sys.n())).unwrap().into_outputs()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

#[test]
fn identify_scalar_example() {
    let sys = Arc::new(scalar_example());
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, 11, 200_000)).unwrap();
    let found = identify(&w, &outputs(&sys, &w), 2, &IdentifyOptions::new(1)).unwrap();
    assert_eq!(found.system.n(), 1);
    let truth = MarkovSource::from_model(sys);
    let dist = markov_distance(&truth, &MarkovSource::from_model(Arc::new(found.system)), 3).unwrap();
    assert!(dist <= 0.1 * markov_scale(&truth, 3).unwrap(), "distance {dist}");
}

#[test]
fn identify_planar_example() {
    let sys = Arc::new(planar_example());
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, 12, 1_000_000)).unwrap();
    let found = identify(&w, &outputs(&sys, &w), 2, &IdentifyOptions::new(2)).unwrap();
    let truth = MarkovSource::from_model(sys);
    let dist = markov_distance(&truth, &MarkovSource::from_model(Arc::new(found.system)), 5).unwrap();
    assert!(dist <= 0.1 * markov_scale(&truth, 5).unwrap(), "distance {dist}");
}

#[test]
fn estimation_error_decays_like_inverse_square_root() {
    let sys = Arc::new(scalar_example());
    let reference = MarkovSource::from_model(sys.clone());
    let ratios: Vec<f64> = (0..10)
        .map(|seed| {
            let w = generate_pe_input(&PeSignalConfig::white(2, 1, 500 + seed, 160_000)).unwrap();
            let opts = EstimateOptions {
                checkpoints: vec![40_000, 160_000],
                plug_in: PlugIn::Theoretical { mode_probs: vec![0.5, 0.5], r: DMatrix::identity(1, 1) },
                ..EstimateOptions::new(1)
            };
            let (_, rep) = estimate_all_markov(&w, &outputs(&sys, &w), 2, &opts, Some(&reference)).unwrap();
            rep.checkpoints[1].max_abs_error.unwrap() / rep.checkpoints[0].max_abs_error.unwrap()
        })
        .collect();
    let r = median(ratios);
    assert!((0.3..=0.8).contains(&r), "median ratio {r}");
}

#[test]
fn depth_one_estimate_is_within_tolerance() {
    let sys = Arc::new(scalar_example());
    let reference = MarkovSource::from_model(sys.clone());
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, 8, 200_000)).unwrap();
    let (est, _) = estimate_all_markov(&w, &outputs(&sys, &w), 2, &EstimateOptions::new(1), None).unwrap();
    let err = markov_distance(&est.source, &reference, 1).unwrap();
    assert!(err <= 0.05 * markov_scale(&reference, 1).unwrap(), "error {err}");
}

#[test]
fn correlation_residuals_decay() {
    let words = correlation_words_up_to(3, 2).unwrap();
    let sys = scalar_example();
    let ratios: Vec<f64> = (0..10)
        .map(|seed| {
            let w = generate_pe_input(&PeSignalConfig::white(2, 1, 900 + seed, 160_000)).unwrap();
            let short = state_correlation_check(&sys, &w.prefix(40_000), &words, Execution::default()).unwrap();
            let long = state_correlation_check(&sys, &w, &words, Execution::default()).unwrap();
            long.max_residual() / short.max_residual()
        })
        .collect();
    assert!(median(ratios) <= 0.8);
}

#[test]
fn model_based_pe_input_for_reversible_scalar() {
    let sys = Arc::new(SwitchedLinearSystem::scalar(&[2.0, 0.5], &[1.0, 0.5], &[1.0, 1.0]).unwrap());
    let pe = build_pe_input_model_based(&sys, 1, default_max_len(&sys), 1e-9).unwrap();
    assert_eq!(pe.probe_index.len(), 12);
    let src = extract_markov_from_response(&pe, &outputs(&sys, &pe.w), 1).unwrap();
    assert!(markov_distance(&src, &MarkovSource::from_model(sys), 1).unwrap() <= 1e-8);
}

#[test]
fn zeroing_input_for_random_reversible_planar() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let sys = random_reversible_system(&mut rng, 2, 1, 1, 2);
        let x = DVector::from_vec(vec![1.0, -0.5]);
        let w = find_zeroing_input(&sys, &x, default_max_len(&sys), 1e-9).unwrap();
        assert!(sys.simulate(&w, &x).unwrap().final_state().norm() <= 1e-9);
    }
}

#[test]
fn map_based_input_identifies_paired_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sys = Arc::new(random_paired_system(&mut rng, 2, 1, 1, 1));
    let pe = build_pe_input_map_based(&InverseMap::paired_modes(1), 2, 2, 1).unwrap();
    let src = extract_markov_from_response(&pe, &outputs(&sys, &pe.w), 3).unwrap();
    let model = MarkovSource::from_model(sys.clone());
    assert!(markov_distance(&src, &model, 3).unwrap() <= 1e-8);
    let found = realize(&build_hankel(&src, 1, 2).unwrap(), 1e-9).unwrap();
    let found_src = MarkovSource::from_model(Arc::new(found.system.clone()));
    assert!(markov_distance(&model, &found_src, 5).unwrap() <= 1e-8);
    assert!(is_minimal(&found.system, 1e-9));
    assert_eq!(span_reachability_rank(&found.system, 1e-9), found.system.n());
}

#[test]
fn persistent_input_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("switchid-pe-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let pe = build_pe_input_map_based(&InverseMap::paired_modes(1), 1, 2, 2).unwrap();
    let (csv, idx) = (dir.join("w.csv"), dir.join("w.index.json"));
    pe.save(&csv, &idx).unwrap();
    let back = PersistentInput::load(&csv, &idx).unwrap();
    assert_eq!(back.w, pe.w);
    assert_eq!(back.probe_index, pe.probe_index);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn truncated_response_is_incomplete() {
    let pe = build_pe_input_map_based(&InverseMap::paired_modes(1), 1, 2, 1).unwrap();
    let sys = random_paired_system(&mut ChaCha8Rng::seed_from_u64(1), 1, 1, 1, 1);
    let y = outputs(&sys, &pe.w.prefix(pe.w.len() - 1));
    assert!(matches!(extract_markov_from_response(&pe, &y, 1), Err(Error::IncompleteData(_))));
}
