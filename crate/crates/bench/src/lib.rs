//! Shared inputs for the benchmarks.

use cluens::base::{generate_ensemble, EnsembleConfig};
use cluens::model::ClusterEnsemble;
use cluens::synth::{generate_synthetic_bundle, SynthConfig, SyntheticData};

/// The graded noise-view bundle with `n` samples, 5 blobs and 6 views.
pub fn bundle(n: usize, seed: u64) -> SyntheticData {
    generate_synthetic_bundle(&SynthConfig::with_noise_view(n, 5, 6, seed)).expect("valid synthetic config")
}

/// A `6 * m_prime` member ensemble over [`bundle`].
pub fn ensemble(n: usize, m_prime: usize, seed: u64) -> ClusterEnsemble {
    let data = bundle(n, seed);
    let cfg = EnsembleConfig {
        m_prime,
        ..EnsembleConfig::new(5, seed)
    };
    generate_ensemble(&data.bundle, &cfg).expect("ensemble")
}
