use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How the reported predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierMode {
    /// The classifier head trained jointly with the encoder.
    Joint,
    /// A softmax-regression probe fit on frozen embeddings after training.
    Probe,
}

impl FromStr for ClassifierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(ClassifierMode::Joint),
            "probe" => Ok(ClassifierMode::Probe),
            _ => Err(Error::config(
                "classifier",
                format!("expected joint or probe, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Softmax temperature of the contrastive loss.
    pub tau: f64,
    /// Weight of the adversarial degree loss.
    pub lambda1: f64,
    /// Weight of the group-balanced classification loss.
    pub lambda2: f64,
    /// Gradient-reversal strength.
    pub alpha: f64,
    /// Moving-average rate of the target encoder.
    pub ema_lambda: f64,
    /// Positives sampled per node; `None` uses every neighbor.
    pub neighbor_sample_size: Option<usize>,
    pub k_neg: usize,
    pub hidden: usize,
    pub embed: usize,
    pub predictor_hidden: usize,
    pub disc_hidden: usize,
    pub seed: u64,
    /// Number of degree groups of the balanced loss.
    pub group_count: usize,
    pub uniformity_weight: f64,
    pub classifier: ClassifierMode,
    /// Add self-loops before normalizing the adjacency.
    pub self_loops: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 5e-4,
            weight_decay: 1e-4,
            tau: 0.5,
            lambda1: 0.5,
            lambda2: 0.5,
            alpha: 1.0,
            ema_lambda: 0.99,
            neighbor_sample_size: Some(5),
            k_neg: 10,
            hidden: 64,
            embed: 64,
            predictor_hidden: 64,
            disc_hidden: 64,
            seed: 0,
            group_count: 4,
            uniformity_weight: 0.0,
            classifier: ClassifierMode::Joint,
            self_loops: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn check(key: &str, ok: bool, value: impl Display, domain: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, format!("{value} is outside {domain}")))
    }
}

impl TrainConfig {
    /// Canonical name of a config key. Accepts field names, their dashed
    /// spellings and the short command-line aliases.
    pub fn canonical_key(key: &str) -> Option<&'static str> {
        let key = key.trim().replace('-', "_");
        Some(match key.as_str() {
            "epochs" => "epochs",
            "learning_rate" | "lr" => "learning_rate",
            "weight_decay" => "weight_decay",
            "tau" => "tau",
            "lambda1" => "lambda1",
            "lambda2" => "lambda2",
            "alpha" => "alpha",
            "ema_lambda" | "ema" => "ema_lambda",
            "neighbor_sample_size" | "neighbors" => "neighbor_sample_size",
            "k_neg" | "kneg" => "k_neg",
            "hidden" => "hidden",
            "embed" => "embed",
            "predictor_hidden" => "predictor_hidden",
            "disc_hidden" => "disc_hidden",
            "seed" => "seed",
            "group_count" | "groups" => "group_count",
            "uniformity_weight" => "uniformity_weight",
            "classifier" => "classifier",
            "self_loops" => "self_loops",
            _ => return None,
        })
    }

    /// Sets one field from its textual value. Does not validate ranges.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let canon = Self::canonical_key(key)
            .ok_or_else(|| Error::config(key.trim(), "unknown configuration key"))?;
        let value = value.trim();
        match canon {
            "epochs" => self.epochs = parse(canon, value)?,
            "learning_rate" => self.learning_rate = parse(canon, value)?,
            "weight_decay" => self.weight_decay = parse(canon, value)?,
            "tau" => self.tau = parse(canon, value)?,
            "lambda1" => self.lambda1 = parse(canon, value)?,
            "lambda2" => self.lambda2 = parse(canon, value)?,
            "alpha" => self.alpha = parse(canon, value)?,
            "ema_lambda" => self.ema_lambda = parse(canon, value)?,
            "neighbor_sample_size" => {
                self.neighbor_sample_size = if value == "all" {
                    None
                } else {
                    Some(parse(canon, value)?)
                }
            }
            "k_neg" => self.k_neg = parse(canon, value)?,
            "hidden" => self.hidden = parse(canon, value)?,
            "embed" => self.embed = parse(canon, value)?,
            "predictor_hidden" => self.predictor_hidden = parse(canon, value)?,
            "disc_hidden" => self.disc_hidden = parse(canon, value)?,
            "seed" => self.seed = parse(canon, value)?,
            "group_count" => self.group_count = parse(canon, value)?,
            "uniformity_weight" => self.uniformity_weight = parse(canon, value)?,
            "classifier" => self.classifier = value.parse()?,
            "self_loops" => self.self_loops = parse(canon, value)?,
            _ => unreachable!("canonical_key covers every field"),
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    /// Returns the `(line, key, value)` triples; use [`TrainConfig::set`] to
    /// apply the ones that belong to training.
    pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    /// Defaults overridden by every line of a config file; unknown keys are
    /// errors. The result is validated.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (_, k, v) in Self::parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` rendering that [`TrainConfig::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let neighbors = match self.neighbor_sample_size {
            Some(s) => s.to_string(),
            None => "all".into(),
        };
        let classifier = match self.classifier {
            ClassifierMode::Joint => "joint",
            ClassifierMode::Probe => "probe",
        };
        format!(
            "epochs = {}\nlearning_rate = {}\nweight_decay = {}\ntau = {}\nlambda1 = {}\n\
             lambda2 = {}\nalpha = {}\nema_lambda = {}\nneighbor_sample_size = {}\nk_neg = {}\n\
             hidden = {}\nembed = {}\npredictor_hidden = {}\ndisc_hidden = {}\nseed = {}\n\
             group_count = {}\nuniformity_weight = {}\nclassifier = {}\nself_loops = {}\n",
            self.epochs,
            self.learning_rate,
            self.weight_decay,
            self.tau,
            self.lambda1,
            self.lambda2,
            self.alpha,
            self.ema_lambda,
            neighbors,
            self.k_neg,
            self.hidden,
            self.embed,
            self.predictor_hidden,
            self.disc_hidden,
            self.seed,
            self.group_count,
            self.uniformity_weight,
            classifier,
            self.self_loops,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check(
            "learning_rate",
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            self.learning_rate,
            "(0, inf)",
        )?;
        check(
            "weight_decay",
            self.weight_decay >= 0.0 && self.weight_decay.is_finite(),
            self.weight_decay,
            "[0, inf)",
        )?;
        check("tau", (0.5..=1.0).contains(&self.tau), self.tau, "[0.5, 1]")?;
        check(
            "lambda1",
            (0.0..=1.0).contains(&self.lambda1),
            self.lambda1,
            "[0, 1]",
        )?;
        check(
            "lambda2",
            (0.0..=1.0).contains(&self.lambda2),
            self.lambda2,
            "[0, 1]",
        )?;
        check(
            "alpha",
            (0.0..=2.0).contains(&self.alpha),
            self.alpha,
            "[0, 2]",
        )?;
        check(
            "ema_lambda",
            (0.0..=1.0).contains(&self.ema_lambda),
            self.ema_lambda,
            "[0, 1]",
        )?;
        if let Some(s) = self.neighbor_sample_size {
            check("neighbor_sample_size", s >= 1, s, "[1, inf)")?;
        }
        check("k_neg", self.k_neg >= 1, self.k_neg, "[1, inf)")?;
        for (key, v) in [
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("predictor_hidden", self.predictor_hidden),
            ("disc_hidden", self.disc_hidden),
        ] {
            check(key, v >= 1, v, "[1, inf)")?;
        }
        check(
            "group_count",
            self.group_count >= 2,
            self.group_count,
            "[2, inf)",
        )?;
        check(
            "uniformity_weight",
            self.uniformity_weight >= 0.0 && self.uniformity_weight.is_finite(),
            self.uniformity_weight,
            "[0, inf)",
        )?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
