//! Versioned experiment configuration, loaded from JSON. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Derivative-norm profiles of the state-space and interaction models.
    LrdProfile,
    /// Per-step decay inequality on random stable instances.
    DecayCheck,
    /// Attention Jacobian against finite differences.
    AttentionLrd,
    /// Interaction scan against its unrolled form.
    Theorem1Equivalence,
    /// Monte Carlo histograms of the log-product channel.
    StabilityHistogram,
    /// Sub-exponential tail bound against empirical frequencies.
    TailCheck,
    /// All verification checks in one run.
    OracleSuite,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::LrdProfile => "lrd-profile",
            ExperimentKind::DecayCheck => "decay-check",
            ExperimentKind::AttentionLrd => "attention-lrd",
            ExperimentKind::Theorem1Equivalence => "theorem1-equivalence",
            ExperimentKind::StabilityHistogram => "stability-histogram",
            ExperimentKind::TailCheck => "tail-check",
            ExperimentKind::OracleSuite => "oracle-suite",
        }
    }
}

/// One interacting channel `(lambda_h, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub lambda_h: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Config format version; must be "1".
    pub version: String,
    pub experiment: ExperimentKind,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Hidden-state dimension H.
    #[serde(default = "defaults::h")]
    pub h: usize,
    /// Token dimension for attention experiments.
    #[serde(default = "defaults::d")]
    pub d: usize,
    /// Sequence length T.
    #[serde(default = "defaults::seq_len")]
    pub seq_len: usize,
    /// Probed input position (1-based).
    #[serde(default = "defaults::t")]
    pub t: usize,
    /// Largest gap k in derivative profiles.
    #[serde(default = "defaults::k_max")]
    pub k_max: usize,
    /// Channel for the stability experiments; when absent, both reference
    /// channels (0.9, 0.099) and (0.5, 0.499) are run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelConfig>,
    /// Monte Carlo draws per channel.
    #[serde(default = "defaults::n_samples")]
    pub n_samples: usize,
    /// Steps per Monte Carlo draw.
    #[serde(default = "defaults::horizon")]
    pub horizon: usize,
    /// Number of seeds tried when searching for a non-monotone profile.
    #[serde(default = "defaults::sweep_seeds")]
    pub sweep_seeds: usize,
    /// Multiplier on the interaction vectors; 0 reduces the interaction
    /// model to the plain recurrence.
    #[serde(default = "defaults::g_scale")]
    pub g_scale: f64,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn seed() -> u64 {
        42
    }
    pub fn h() -> usize {
        16
    }
    pub fn d() -> usize {
        4
    }
    pub fn seq_len() -> usize {
        200
    }
    pub fn t() -> usize {
        50
    }
    pub fn k_max() -> usize {
        100
    }
    pub fn n_samples() -> usize {
        10_000
    }
    pub fn horizon() -> usize {
        10_000
    }
    pub fn sweep_seeds() -> usize {
        100
    }
    pub fn g_scale() -> f64 {
        1.0
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!(
                "unsupported config version {:?}, expected {CONFIG_VERSION:?}",
                self.version
            ));
        }
        if self.h == 0 || self.d == 0 || self.seq_len == 0 {
            return Err("h, d, and seq_len must be positive".into());
        }
        if self.t == 0 {
            return Err("t is 1-based and must be positive".into());
        }
        if self.t + self.k_max > self.seq_len {
            return Err(format!(
                "t + k_max must not exceed seq_len ({} + {} > {})",
                self.t, self.k_max, self.seq_len
            ));
        }
        if self.n_samples == 0 || self.horizon == 0 || self.sweep_seeds == 0 {
            return Err("n_samples, horizon, and sweep_seeds must be positive".into());
        }
        if let Some(channel) = &self.channel {
            if !(channel.lambda_h.is_finite()
                && channel.lambda_h > 0.0
                && channel.lambda_h <= 1.0)
            {
                return Err(format!(
                    "channel.lambda_h must lie in (0, 1], got {}",
                    channel.lambda_h
                ));
            }
            if !(channel.gamma.is_finite() && channel.gamma >= 0.0) {
                return Err(format!(
                    "channel.gamma must be non-negative, got {}",
                    channel.gamma
                ));
            }
        }
        if !(self.g_scale.is_finite() && self.g_scale >= 0.0) {
            return Err(format!(
                "g_scale must be a non-negative finite number, got {}",
                self.g_scale
            ));
        }
        Ok(())
    }

    /// Probed position as a 0-based index.
    pub fn t_index(&self) -> usize {
        self.t - 1
    }

    /// The channels a stability experiment runs: the configured one, or the
    /// two reference channels.
    pub fn channels(&self) -> Vec<ChannelConfig> {
        match self.channel {
            Some(channel) => vec![channel],
            None => vec![
                ChannelConfig {
                    lambda_h: 0.9,
                    gamma: 0.099,
                },
                ChannelConfig {
                    lambda_h: 0.5,
                    gamma: 0.499,
                },
            ],
        }
    }
}
