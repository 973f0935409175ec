//! Noisy corpora: dictionary matching, controlled label corruption and a
//! synthetic benchmark generator.

mod gazetteer;
mod generator;
mod noise;

pub use gazetteer::{distant_label, match_gazetteer, Gazetteer};
pub use generator::{
    generate_synthetic, noise_profile, DsSource, GeneratorSettings, NoiseProfile, SyntheticCorpus,
};
pub use noise::{inject_noise, perturbation_count, NoiseMode, NoiseSpec};
