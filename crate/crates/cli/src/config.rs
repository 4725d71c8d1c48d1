//! Run configuration: command-line flags layered over an optional plain-text
//! `key = value` file (`#` starts a comment). Flags win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use ldgram_core::analysis::ConditionConstants;
use ldgram_core::models::{AlterationSpec, ModelSpec, MomentOracle, OracleConfig, DEFAULT_STATE_BUDGET};
use ldgram_core::rational::{parse_rational, q_int};
use ldgram_core::{LdError, Result};

/// Keys accepted in a configuration file.
const KEYS: &[&str] = &[
    "family",
    "sampling",
    "n",
    "k",
    "q",
    "lambda",
    "D",
    "epsilon",
    "seed",
    "samples",
    "threads",
    "budget",
    "mc_fallback_samples",
    "max_pattern_nodes",
    "output",
    "csv",
    "gram_file",
    "rooted",
    "conditions",
    "c_s",
    "c_m",
    "c_v1",
    "c_v2",
    "c_v3",
    "c_v4",
    "c_vd1",
    "c_vd2",
];

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Plain-text `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model family: hs, sbm or ts.
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Latent sampling: independent or permutation.
    #[arg(long, global = true)]
    pub sampling: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<String>,
    /// Base connection probability, as `p/q` or a decimal.
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Signal strength, as `p/q` or a decimal.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Polynomial degree (maximal number of template edges).
    #[arg(long = "D", visible_alias = "degree", global = true)]
    pub degree: Option<String>,
    /// Alteration parameter; 0 means no alteration.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Monte-Carlo samples (mc-check).
    #[arg(long, global = true)]
    pub samples: Option<String>,
    /// Worker threads (falls back to LDGRAM_THREADS, then to all cores).
    #[arg(long, global = true)]
    pub threads: Option<String>,
    /// Largest latent state space enumerated exactly per moment.
    #[arg(long, global = true)]
    pub budget: Option<String>,
    /// Monte-Carlo samples used when a moment exceeds the budget (default: report the cap).
    #[arg(long, global = true)]
    pub mc_fallback_samples: Option<String>,
    /// Largest node count of the equality-pattern sums (variance-permutation condition).
    #[arg(long, global = true)]
    pub max_pattern_nodes: Option<String>,
    /// Output file (default: standard output).
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// CSV output file (spectrum eigenvalues, mc-check table).
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Gram matrix JSON written by `gram` (spectrum).
    #[arg(long, global = true)]
    pub gram_file: Option<PathBuf>,
    /// Use the rooted basis (templates, gram, spectrum).
    #[arg(long, global = true)]
    pub rooted: bool,
    /// Comma-separated conditions: signal, moment, variance, variance-permutation.
    #[arg(long, global = true)]
    pub conditions: Option<String>,
    /// Condition constants, e.g. `--constant c_m=1` (repeatable).
    #[arg(long = "constant", global = true, value_name = "NAME=VALUE")]
    pub constants: Vec<String>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub rooted: bool,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub gram_file: Option<PathBuf>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LdError::Validation(msg.into()))
}

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return invalid(format!("config line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return invalid(format!("config line {}: unknown key '{key}'", lineno + 1));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut values = match &args.config {
            Some(path) => parse_config_text(&read_text(path)?)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("family", &args.family),
            ("sampling", &args.sampling),
            ("n", &args.n),
            ("k", &args.k),
            ("q", &args.q),
            ("lambda", &args.lambda),
            ("D", &args.degree),
            ("epsilon", &args.epsilon),
            ("seed", &args.seed),
            ("samples", &args.samples),
            ("threads", &args.threads),
            ("budget", &args.budget),
            ("mc_fallback_samples", &args.mc_fallback_samples),
            ("max_pattern_nodes", &args.max_pattern_nodes),
            ("conditions", &args.conditions),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(key.to_string(), v.clone());
            }
        }
        for c in &args.constants {
            let Some((name, value)) = c.split_once('=') else {
                return invalid(format!("constant '{c}' must look like NAME=VALUE"));
            };
            let name = name.trim();
            if !name.starts_with("c_") || !KEYS.contains(&name) {
                return invalid(format!("unknown condition constant '{name}'"));
            }
            values.insert(name.to_string(), value.trim().to_string());
        }
        let path = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| values.get(key).map(PathBuf::from));
        let rooted = args.rooted || values.get("rooted").is_some_and(|v| matches!(v.as_str(), "true" | "1" | "yes"));
        Ok(RunConfig {
            rooted,
            output: path(&args.output, "output"),
            csv: path(&args.csv, "csv"),
            gram_file: path(&args.gram_file, "gram_file"),
            values,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| LdError::Validation(format!("missing required parameter '{key}'")))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| LdError::Validation(format!("{key} = '{v}' is not a valid integer"))))
            .transpose()
    }

    pub fn degree(&self) -> Result<usize> {
        self.integer("D")?.ok_or_else(|| LdError::Validation("missing required parameter 'D'".into()))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.integer("seed")?.unwrap_or(0))
    }

    pub fn samples(&self) -> Result<u64> {
        Ok(self.integer("samples")?.unwrap_or(100_000))
    }

    pub fn max_pattern_nodes(&self) -> Result<usize> {
        Ok(self.integer("max_pattern_nodes")?.unwrap_or(ldgram_core::analysis::DEFAULT_MAX_PATTERN_NODES))
    }

    /// Thread count from the flag/file, then `LDGRAM_THREADS`; `None` means all cores.
    pub fn threads(&self) -> Result<Option<usize>> {
        let from_env = std::env::var("LDGRAM_THREADS").ok();
        let raw = self.get("threads").map(str::to_string).or(from_env);
        match raw {
            None => Ok(None),
            Some(v) => match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Ok(Some(t)),
                _ => invalid(format!("thread count '{v}' must be a positive integer")),
            },
        }
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let family = self.require("family")?.parse()?;
        let sampling = self.require("sampling")?.parse()?;
        let n = self.integer("n")?.ok_or_else(|| LdError::Validation("missing required parameter 'n'".into()))?;
        let k = self.integer("k")?.ok_or_else(|| LdError::Validation("missing required parameter 'k'".into()))?;
        let q = parse_rational(self.require("q")?)?;
        let lambda = parse_rational(self.require("lambda")?)?;
        ModelSpec::new(family, sampling, n, k, q, lambda)
    }

    pub fn alteration(&self) -> Result<Option<AlterationSpec>> {
        match self.get("epsilon") {
            None => Ok(None),
            Some(v) => {
                let eps = parse_rational(v)?;
                if eps == q_int(0) {
                    Ok(None)
                } else {
                    AlterationSpec::new(eps).map(Some)
                }
            }
        }
    }

    pub fn oracle(&self) -> Result<MomentOracle> {
        let config = OracleConfig {
            state_budget: self.integer("budget")?.unwrap_or(DEFAULT_STATE_BUDGET),
            mc_samples: self.integer("mc_fallback_samples")?,
            seed: self.seed()?,
        };
        Ok(MomentOracle::new(self.model()?).with_alteration(self.alteration()?).with_config(config))
    }

    pub fn constants(&self, model: &ModelSpec) -> Result<ConditionConstants> {
        let mut c = ConditionConstants::defaults_for(model);
        for (key, value) in &self.values {
            if key.starts_with("c_") {
                c.set(key, value)?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LdError::Validation(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let v = parse_config_text("# model\nfamily = hs  # trailing\n\nn=12\n").unwrap();
        assert_eq!(v.get("family").map(String::as_str), Some("hs"));
        assert_eq!(v.get("n").map(String::as_str), Some("12"));
        assert!(parse_config_text("colour = blue").is_err());
        assert!(parse_config_text("family hs").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("ldgram-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "family = hs\nsampling = independent\nn = 12\nk = 3\nq = 1/2\nlambda = 1/5\n").unwrap();
        let args = RunArgs { config: Some(path), n: Some("20".into()), ..Default::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.model().unwrap().n, 20);
        assert_eq!(cfg.model().unwrap().k, 3);
    }
}
