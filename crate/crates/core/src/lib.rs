pub mod audio_io;
pub mod baseline_features;
pub mod cli_report;
pub mod condition_sampler;
pub mod corpus_manifest;
pub mod fixture;
pub mod keyed_rng;
pub mod metrics;
pub mod pipeline;
pub mod snr_mixer;
