use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Fedavg,
    Afl,
    GenAfl,
    Vm,
    FedIrm,
    Fedprox,
    Centralized,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Fedavg => "fedavg",
            StrategyKind::Afl => "afl",
            StrategyKind::GenAfl => "gen_afl",
            StrategyKind::Vm => "vm",
            StrategyKind::FedIrm => "fed_irm",
            StrategyKind::Fedprox => "fedprox",
            StrategyKind::Centralized => "centralized",
        }
    }
}

/// Only full participation is simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Participation {
    #[default]
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Communication rounds T.
    pub rounds: usize,
    /// Local steps E per round.
    pub local_steps: usize,
    pub batch_size: usize,
    pub lr_theta: f64,
    /// Step size of the λ ascent (afl, gen_afl).
    pub lr_lambda: f64,
    /// Lower bound of the generalized simplex (gen_afl).
    pub lambda_min: f64,
    /// Variance weight (vm) or penalty weight (fed_irm).
    pub beta: f64,
    /// Proximal weight (fedprox).
    pub mu: f64,
    pub optimizer: OptimizerKind,
    pub participation: Participation,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::Fedavg,
            rounds: 80,
            local_steps: 200,
            batch_size: 64,
            lr_theta: 1e-3,
            lr_lambda: 0.1,
            lambda_min: -1.0,
            beta: 10.0,
            mu: 0.01,
            optimizer: OptimizerKind::Adam,
            participation: Participation::Full,
        }
    }
}

impl StrategyConfig {
    /// Checks the configuration against a federation of `num_clients` clients.
    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if num_clients == 0 {
            return Err(Error::Empty("training clients"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be >= 1"));
        }
        if self.local_steps == 0 {
            return Err(Error::invalid("local_steps must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        for (name, v) in [("lr_theta", self.lr_theta), ("lr_lambda", self.lr_lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let n = if self.kind == StrategyKind::Centralized {
            1
        } else {
            num_clients
        };
        if !self.lambda_min.is_finite() || self.lambda_min >= 1.0 / n as f64 {
            return Err(Error::invalid(format!(
                "lambda_min must be < 1/n (got {}, n = {n})",
                self.lambda_min
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.kind == StrategyKind::Fedprox && self.optimizer != OptimizerKind::Sgd {
            return Err(Error::invalid("fedprox requires optimizer = sgd"));
        }
        Ok(())
    }

    /// Gradient steps taken by each client over the whole run.
    pub fn gradient_budget(&self) -> usize {
        self.rounds * self.local_steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let cfg = StrategyConfig::default();
        assert_eq!((cfg.rounds, cfg.local_steps, cfg.batch_size), (80, 200, 64));
        assert_eq!(cfg.lr_theta, 1e-3);
        assert_eq!(cfg.lambda_min, -1.0);
        assert_eq!(cfg.beta, 10.0);
        assert_eq!(cfg.optimizer, OptimizerKind::Adam);
        assert_eq!(cfg.gradient_budget(), 16000);
        cfg.validate(5).unwrap();
    }

    #[test]
    fn lambda_min_bound() {
        let cfg = StrategyConfig {
            kind: StrategyKind::GenAfl,
            lambda_min: 0.9,
            ..Default::default()
        };
        let err = cfg.validate(5).unwrap_err().to_string();
        assert!(err.contains("lambda_min must be < 1/n"), "{err}");
        let cfg = StrategyConfig { lambda_min: 0.2, ..cfg };
        assert!(cfg.validate(5).is_err());
        assert!(cfg.validate(4).is_ok());
    }

    #[test]
    fn fedprox_needs_sgd() {
        let cfg = StrategyConfig {
            kind: StrategyKind::Fedprox,
            ..Default::default()
        };
        assert!(cfg.validate(3).is_err());
        let cfg = StrategyConfig {
            optimizer: OptimizerKind::Sgd,
            ..cfg
        };
        assert!(cfg.validate(3).is_ok());
    }

    #[test]
    fn rejects_zero_counts_and_negative_weights() {
        let base = StrategyConfig::default();
        assert!(StrategyConfig {
            rounds: 0,
            ..base.clone()
        }
        .validate(2)
        .is_err());
        assert!(StrategyConfig {
            local_steps: 0,
            ..base.clone()
        }
        .validate(2)
        .is_err());
        assert!(StrategyConfig {
            beta: -1.0,
            ..base.clone()
        }
        .validate(2)
        .is_err());
        assert!(StrategyConfig {
            mu: -0.1,
            ..base.clone()
        }
        .validate(2)
        .is_err());
        assert!(base.validate(0).is_err());
    }

    #[test]
    fn serde_defaults_and_unknown_fields() {
        let cfg: StrategyConfig = serde_json::from_str(r#"{"kind":"gen_afl","rounds":3}"#).unwrap();
        assert_eq!(cfg.kind, StrategyKind::GenAfl);
        assert_eq!(cfg.rounds, 3);
        assert_eq!(cfg.local_steps, 200);
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"round":3}"#).is_err());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<StrategyConfig>(&text).unwrap(), cfg);
    }
}
