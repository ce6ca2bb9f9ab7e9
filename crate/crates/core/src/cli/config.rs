//! Operator configuration: a `key = value` file shared by every command.

use crate::bridge::{Quorum, Scenario};
use crate::devirgo::ProofConfig;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub proof: ProofConfig,
    pub workers: usize,
    pub rounds: usize,
    pub committee_size: usize,
    pub signers: usize,
    pub quorum: Quorum,
    pub batch: usize,
    pub confirmations: usize,
    pub full_nodes: usize,
    pub seed: u64,
    pub identity: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            proof: ProofConfig::default(),
            workers: 1,
            rounds: 8,
            committee_size: 4,
            signers: 3,
            quorum: Quorum::default(),
            batch: 1,
            confirmations: 2,
            full_nodes: 3,
            seed: 1,
            identity: "zkbridge-cli".into(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("line {}: expected key = value", n + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "log_rate" => c.proof.log_rate = num(key, value)?,
                "queries" => c.proof.queries = num(key, value)?,
                "workers" => c.workers = num(key, value)?,
                "rounds" => c.rounds = num(key, value)?,
                "committee_size" => c.committee_size = num(key, value)?,
                "signers" => c.signers = num(key, value)?,
                "quorum" => {
                    let (a, b) = value
                        .split_once('/')
                        .ok_or_else(|| Error::InvalidArgument(format!("quorum: expected n/d, got {value:?}")))?;
                    c.quorum = Quorum::new(num(key, a.trim())?, num(key, b.trim())?)?;
                }
                "batch" => c.batch = num(key, value)?,
                "confirmations" => c.confirmations = num(key, value)?,
                "full_nodes" => c.full_nodes = num(key, value)?,
                "seed" => c.seed = num(key, value)?,
                "identity" => c.identity = value.to_string(),
                _ => return invalid(format!("line {}: unknown key {key:?}", n + 1)),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("workers", self.workers), ("batch", self.batch)] {
            if v == 0 || !v.is_power_of_two() {
                return invalid(format!("{name} = {v} is not a power of two"));
            }
        }
        if self.proof.log_rate == 0 || self.proof.queries == 0 {
            return invalid("log_rate and queries must be positive");
        }
        Ok(())
    }

    /// Scenario defaults taken from this configuration.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            seed: self.seed,
            committee_size: self.committee_size,
            signers: self.signers,
            rounds: self.rounds,
            full_nodes: self.full_nodes,
            batch: self.batch,
            confirmations: self.confirmations,
            quorum: self.quorum,
            workers: self.workers,
            proof: self.proof,
            ..Scenario::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let c = Config::parse("workers = 4\nquorum = 3/4\nidentity = relay-7\n").unwrap();
        assert_eq!(c.workers, 4);
        assert_eq!(c.identity, "relay-7");
        assert_eq!(c.scenario().quorum, Quorum::new(3, 4).unwrap());
        assert!(Config::parse("workers = 3").is_err());
        assert!(Config::parse("batch = 6").is_err());
        assert!(Config::parse("colour = red").is_err());
    }
}
