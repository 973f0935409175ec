use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::TagSet;
use crate::selection::Thresholds;
use crate::tagger::TaggerArch;
use crate::{Error, Result};

use super::seeds::SeedPlan;

/// Every knob of one experiment. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub entity_types: Vec<String>,
    /// Noisy training corpus. When unset the synthetic generator supplies data.
    pub train_path: Option<PathBuf>,
    /// Clean labels of the training corpus, used only for diagnostics.
    pub train_gold_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,

    pub lr: f64,
    pub batch_size: usize,
    pub ema_alpha: f64,
    pub warmup_steps: u64,
    /// Self-training epochs.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub sigma_co: f64,
    #[serde(with = "threshold")]
    pub sigma_ua: f64,
    pub mc_passes: usize,
    pub dropout: f64,
    pub delta: f64,
    /// Steps between label-store refreshes; 0 disables refreshing.
    pub update_cycle: u64,

    pub embedding_dim: usize,
    pub net1_window: usize,
    pub net1_hidden: usize,
    pub net2_window: usize,
    pub net2_hidden: usize,
    pub min_count: usize,
    pub case_folding: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            entity_types: TagSet::conll03().entity_types().to_vec(),
            train_path: None,
            train_gold_path: None,
            dev_path: None,
            test_path: None,
            lr: 1e-5,
            batch_size: 8,
            ema_alpha: 0.995,
            warmup_steps: 200,
            epochs: 50,
            pretrain_epochs: 1,
            sigma_co: 0.9,
            sigma_ua: 0.01,
            mc_passes: 8,
            dropout: 0.5,
            delta: 0.3,
            update_cycle: 6000,
            embedding_dim: 32,
            net1_window: 2,
            net1_hidden: 64,
            net2_window: 1,
            net2_hidden: 32,
            min_count: 1,
            case_folding: false,
        }
    }
}

impl ExperimentConfig {
    /// Settings for the from-scratch window taggers on the synthetic benchmark.
    pub fn synthetic() -> Self {
        Self {
            lr: 3e-3,
            warmup_steps: 50,
            epochs: 8,
            pretrain_epochs: 2,
            ema_alpha: 0.99,
            dropout: 0.3,
            embedding_dim: 16,
            net1_hidden: 32,
            net2_hidden: 24,
            sigma_co: 0.5,
            sigma_ua: 0.02,
            ..Self::default()
        }
    }

    /// Uncertainty-aware selection disabled: every teacher label is kept.
    pub fn without_utl(&self) -> Self {
        Self {
            sigma_ua: f64::INFINITY,
            sigma_co: 0.0,
            ..self.clone()
        }
    }

    /// Student-student transfer disabled.
    pub fn without_scl(&self) -> Self {
        Self {
            delta: 0.0,
            ..self.clone()
        }
    }

    /// Plain dual mean-teacher self-training.
    pub fn vanilla(&self) -> Self {
        self.without_utl().without_scl()
    }

    pub fn tagset(&self) -> Result<TagSet> {
        TagSet::new(&self.entity_types)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            sigma_co: self.sigma_co,
            sigma_ua: self.sigma_ua,
        }
    }

    pub fn seeds(&self) -> SeedPlan {
        SeedPlan::new(self.seed)
    }

    /// Architecture of network `net` (0 or 1).
    pub fn arch(&self, net: usize, num_labels: usize) -> TaggerArch {
        let (window_radius, hidden_dim) = if net == 0 {
            (self.net1_window, self.net1_hidden)
        } else {
            (self.net2_window, self.net2_hidden)
        };
        TaggerArch {
            embedding_dim: self.embedding_dim,
            window_radius,
            hidden_dim,
            num_labels,
            dropout_rate: self.dropout,
            init_seed: self.seeds().init(net),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tagset = self
            .tagset()
            .map_err(|e| Error::config(format!("entity_types: {e}")))?;
        if tagset.num_types() == 0 {
            return Err(Error::config("entity_types must name at least one type"));
        }
        let check = |ok: bool, key: &str, value: String, range: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{key} = {value} outside {range}")))
            }
        };
        check(
            self.lr.is_finite() && self.lr > 0.0,
            "lr",
            self.lr.to_string(),
            "(0, inf)",
        )?;
        check(
            self.batch_size >= 1,
            "batch_size",
            self.batch_size.to_string(),
            "[1, inf)",
        )?;
        check(
            (0.0..=1.0).contains(&self.ema_alpha),
            "ema_alpha",
            self.ema_alpha.to_string(),
            "[0, 1]",
        )?;
        check(
            self.pretrain_epochs >= 1,
            "pretrain_epochs",
            self.pretrain_epochs.to_string(),
            "[1, inf)",
        )?;
        check(
            (0.0..=1.0).contains(&self.sigma_co),
            "sigma_co",
            self.sigma_co.to_string(),
            "[0, 1]",
        )?;
        check(
            self.sigma_ua >= 0.0,
            "sigma_ua",
            self.sigma_ua.to_string(),
            "[0, inf]",
        )?;
        check(
            self.mc_passes >= 2,
            "mc_passes",
            self.mc_passes.to_string(),
            "[2, inf)",
        )?;
        check(
            (0.0..1.0).contains(&self.dropout),
            "dropout",
            self.dropout.to_string(),
            "[0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.delta),
            "delta",
            self.delta.to_string(),
            "[0, 1]",
        )?;
        for (key, v) in [
            ("embedding_dim", self.embedding_dim),
            ("net1_hidden", self.net1_hidden),
            ("net2_hidden", self.net2_hidden),
        ] {
            check(v >= 1, key, v.to_string(), "[1, inf)")?;
        }
        for net in 0..2 {
            self.arch(net, tagset.num_labels()).validate()?;
        }
        Ok(())
    }
}

/// Thresholds that may be infinite; written as `"inf"` so JSON can carry them.
mod threshold {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if !v.is_nan() => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            _ => Err(D::Error::custom("expected a number or \"inf\"")),
        }
    }
}
