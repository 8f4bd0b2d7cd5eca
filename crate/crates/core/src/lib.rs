//! Realization, identification and experiment design for discrete-time
//! linear switched systems.
//!
//! The crate covers simulation of switched systems under hybrid input words,
//! Markov parameters (from a model, from a black-box input-output map, or
//! estimated from data), Hankel matrices over mode words and the
//! realization algorithm that recovers a minimal system from them, finite
//! persistently exciting inputs for reversible systems, and asymptotic
//! estimation from a single long random experiment.
//!
//! ```
//! use std::sync::Arc;
//! use switchid::{build_hankel, realize, markov_distance, MarkovSource, SwitchedLinearSystem};
//!
//! let sys = SwitchedLinearSystem::scalar(&[0.4, 0.3], &[1.0, 2.0], &[1.0, 3.0]).unwrap();
//! let src = MarkovSource::from_model(Arc::new(sys));
//! let h = build_hankel(&src, 1, 2).unwrap();
//! let found = realize(&h, 1e-9).unwrap();
//! assert_eq!(found.system.n(), 1);
//! let found_src = MarkovSource::from_model(Arc::new(found.system));
//! assert!(markov_distance(&src, &found_src, 3).unwrap() < 1e-12);
//! ```

pub mod error;
pub mod exec;
pub mod hankel;
pub mod io;
pub mod linalg;
pub mod markov;
pub mod pe_estimation;
pub mod pe_inputs;
pub mod realization;
pub mod system;
pub mod testing;
pub mod words;

pub use error::{Error, Result};
pub use exec::Execution;
pub use hankel::{build_hankel, build_hankel_with, hankel_rank, HankelMeta, HankelSubMatrix};
pub use markov::{
    combined_markov, gcr_evaluate, markov_distance, markov_distance_with, markov_from_model, markov_from_oracle,
    CombinedMarkov, MarkovSource, Origin,
};
pub use pe_estimation::{
    check_pe_conditions, empirical_mode_freq, estimate_all_markov, estimate_markov, generate_pe_input, identify,
    state_correlation_check, ConvergenceReport, EmpiricalEstimate, EstimateOptions, IdentifyOptions, PeSignalConfig,
    PlugIn, SwitchingLaw,
};
pub use pe_inputs::{
    build_pe_input_map_based, build_pe_input_model_based, elementwise_inverse_word, enumerate_probe_set,
    extract_markov_from_response, find_zeroing_input, InverseMap, PersistentInput,
};
pub use realization::{is_minimal, realize, realize_with_rank, RealizationResult};
pub use system::{HybridWord, OutputSeries, SwitchedLinearSystem, Trajectory};
pub use words::{count_words_up_to, index_of_word, word_at_index, words_up_to, ModeWord};
