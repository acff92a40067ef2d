//! Plain-text `key = value` run configuration, one entry per line, `#`
//! starts a comment. Every key is optional and falls back to the library
//! default. `seed` drives both data generation and training.

use std::collections::HashSet;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use uot_align::ot::LogDomain;
use uot_align::sampler::SamplerMode;
use uot_align::synth::BenchConfig;
use uot_align::trainer::{Method, TrainConfig};
use uot_align::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub bench: BenchConfig,
    pub train: TrainConfig,
}

struct Key {
    name: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> Result<()>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| Error::Parse(format!("{key} = {v:?}: {e}")))
}

macro_rules! plain {
    ($name:literal, $($path:ident).+) => {
        Key {
            name: $name,
            get: |c| c.$($path).+.to_string(),
            set: |c, v| {
                c.$($path).+ = parse($name, v)?;
                Ok(())
            },
        }
    };
}

const KEYS: &[Key] = &[
    plain!("bench.n_src", bench.n_src),
    plain!("bench.n_tgt", bench.n_tgt),
    plain!("bench.horizon", bench.horizon),
    plain!("bench.noise_std", bench.noise_std),
    plain!("bench.d_o", bench.d_o),
    plain!("bench.gain", bench.gain),
    plain!("bench.a_max", bench.a_max),
    plain!("bench.start_radius", bench.start_radius),
    plain!("bench.bias_std", bench.bias_std),
    plain!("bench.n_probes", bench.n_probes),
    Key {
        name: "train.method",
        get: |c| c.train.method.name().to_string(),
        set: |c, v| {
            c.train.method = Method::parse(v)?;
            Ok(())
        },
    },
    plain!("train.lambda", train.lambda),
    plain!("train.bc_batch", train.bc_batch),
    plain!("train.ot_batch", train.ot_batch),
    plain!("train.cotrain_ratio", train.cotrain_ratio),
    plain!("train.steps", train.steps),
    plain!("train.eval_every", train.eval_every),
    plain!("train.eval_episodes", train.eval_episodes),
    plain!("train.alpha1", train.alpha1),
    plain!("train.alpha2", train.alpha2),
    plain!("train.hidden", train.hidden),
    plain!("train.d_z", train.d_z),
    plain!("train.lr", train.adam.lr),
    plain!("train.beta1", train.adam.beta1),
    plain!("train.beta2", train.adam.beta2),
    plain!("train.adam_eps", train.adam.eps),
    Key {
        name: "sampler.mode",
        get: |c| c.train.sampler.mode.name().to_string(),
        set: |c, v| {
            c.train.sampler.mode = SamplerMode::parse(v)?;
            Ok(())
        },
    },
    Key {
        name: "sampler.winsize",
        get: |c| c.train.sampler.winsize.map_or_else(|| "off".into(), |w| w.to_string()),
        set: |c, v| {
            c.train.sampler.winsize = parse_winsize(v)?;
            Ok(())
        },
    },
    plain!("sampler.batch_size", train.sampler.batch_size),
    plain!("sampler.seed", train.sampler.seed),
    plain!("uot.epsilon", train.uot.epsilon),
    plain!("uot.tau", train.uot.tau),
    plain!("uot.max_iter", train.uot.max_iter),
    plain!("uot.tol", train.uot.tol),
    Key {
        name: "uot.log_domain",
        get: |c| c.train.uot.log_domain.name().to_string(),
        set: |c, v| {
            c.train.uot.log_domain = LogDomain::parse(v)?;
            Ok(())
        },
    },
];

/// `off` or a positive step count.
pub fn parse_winsize(v: &str) -> Result<Option<usize>> {
    if v == "off" {
        Ok(None)
    } else {
        parse("sampler.winsize", v).map(Some)
    }
}

impl RunConfig {
    /// Every recognized key, in emission order.
    #[cfg(test)]
    pub fn keys() -> impl Iterator<Item = &'static str> {
        std::iter::once("seed").chain(KEYS.iter().map(|k| k.name))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value)?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse(format!("duplicate key `{key}`")));
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "seed" {
            let seed = parse(key, value)?;
            self.seed = Some(seed);
            self.bench.seed = seed;
            self.train.seed = seed;
            return Ok(());
        }
        let entry = KEYS
            .iter()
            .find(|k| k.name == key)
            .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        (entry.set)(self, value)
    }

    /// Canonical text with every key, parseable by [`RunConfig::parse`].
    pub fn emit(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        for k in KEYS {
            out.push_str(&format!("{} = {}\n", k.name, (k.get)(self)));
        }
        out
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.emit().as_bytes()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("config must set `seed`".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.bench.validate()?;
        self.train.validate()?;
        self.train.sampler.validate()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n   \n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.require_seed().is_err());
    }

    #[test]
    fn parses_values_and_comments() {
        let text = "seed = 7   # trailing\ntrain.method=cotrain\nsampler.winsize = off\nuot.log_domain = always\nbench.noise_std = 0.25\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.bench.seed, 7);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.train.method, Method::Cotrain);
        assert_eq!(cfg.train.sampler.winsize, None);
        assert_eq!(cfg.train.uot.log_domain, LogDomain::Always);
        assert_eq!(cfg.bench.noise_std, 0.25);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        match RunConfig::parse("bench.n_srcc = 3") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "bench.n_srcc"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("seed = 1\nseed = 2"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::parse("seed"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::parse("bench.n_src = -1"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::parse("train.method = best"), Err(Error::Parse(_))));
    }

    #[test]
    fn emit_lists_every_key_once() {
        let cfg = RunConfig { seed: Some(3), ..RunConfig::default() };
        let text = cfg.emit();
        let emitted: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let keys: Vec<&str> = RunConfig::keys().collect();
        assert_eq!(emitted, keys);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig { seed: Some(1), ..RunConfig::default() };
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.set("train.lambda", "0.2").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, (-300i32..300).prop_map(|e| 1.5 * 10f64.powi(e))]
    }

    proptest! {
        #[test]
        fn emit_parse_round_trip(
            seed in proptest::option::of(any::<u64>()),
            n_src in 1usize..1000,
            noise in finite(),
            lambda in finite(),
            lr in finite(),
            winsize in proptest::option::of(1usize..100),
            method in 0usize..5,
            mode in 0usize..3,
            log in 0usize..3,
            sampler_seed in any::<u64>(),
            tol in finite(),
        ) {
            let mut cfg = RunConfig::default();
            if let Some(s) = seed {
                cfg.set("seed", &s.to_string()).unwrap();
            }
            cfg.bench.n_src = n_src;
            cfg.bench.noise_std = noise;
            cfg.train.lambda = lambda;
            cfg.train.adam.lr = lr;
            cfg.train.sampler.winsize = winsize;
            cfg.train.method = Method::ALL[method];
            cfg.train.sampler.mode = SamplerMode::ALL[mode];
            cfg.train.uot.log_domain = LogDomain::ALL[log];
            cfg.train.sampler.seed = sampler_seed;
            cfg.train.uot.tol = tol;
            let back = RunConfig::parse(&cfg.emit()).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.emit(), cfg.emit());
        }
    }
}
