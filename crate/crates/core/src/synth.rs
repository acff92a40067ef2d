//! Synthetic two-domain point-mass "reach" benchmark.
//!
//! A 2-D agent moves from near the origin to a goal under a scripted
//! proportional controller. Both domains share states, goals, proprioception
//! and actions; they differ only in the linear emission that renders
//! `(state, goal)` into an observation vector. Source demonstrations cover
//! goals over the whole square, target demonstrations only its left half.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Dimension of the underlying state and of goals.
pub const STATE_DIM: usize = 2;
/// Distance at which a reach counts as successful.
pub const SUCCESS_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Src,
    Tgt,
}

/// Goal regions. `Source` is the full square `[−1,1]²`, `Target` its left
/// half (`x < 0`) and `TargetOod` its right half (`x > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Source,
    Target,
    TargetOod,
}

impl Region {
    pub fn contains(self, goal: &[f64]) -> bool {
        let in_square = goal.iter().all(|v| (-1.0..=1.0).contains(v));
        in_square
            && match self {
                Region::Source => true,
                Region::Target => goal[0] < 0.0,
                Region::TargetOod => goal[0] > 0.0,
            }
    }

    pub fn sample_goal<R: Rng>(self, rng: &mut R) -> Vec<f64> {
        let y = rng.random_range(-1.0..=1.0);
        let x = match self {
            Region::Source => rng.random_range(-1.0..=1.0),
            Region::Target => -1.0 + rng.random::<f64>(),
            Region::TargetOod => 1.0 - rng.random::<f64>(),
        };
        vec![x, y]
    }
}

/// One demonstration. `shadow_obs` holds target-domain emissions of the
/// same state sequence and is only present on source trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub domain: Domain,
    pub region: Region,
    pub goal: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
    pub proprio: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_obs: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_dim("trajectory proprio length", self.obs.len(), self.proprio.len())?;
        ensure_dim("trajectory action length", self.obs.len(), self.actions.len())?;
        if let Some(shadow) = &self.shadow_obs {
            ensure_dim("trajectory shadow length", self.obs.len(), shadow.len())?;
        }
        if !self.region.contains(&self.goal) {
            return Err(Error::InvalidArgument(format!(
                "goal {:?} outside region {:?}",
                self.goal, self.region
            )));
        }
        let finite = self
            .obs
            .iter()
            .chain(&self.proprio)
            .chain(&self.actions)
            .flatten()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(())
    }
}

/// Affine emission `o = M (s ⊕ g) + b` plus isotropic Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    /// `d_o × 4`, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Emission {
    /// Random projection with unit-norm columns and Gaussian bias.
    pub fn random<R: Rng>(d_o: usize, bias_std: f64, rng: &mut R) -> Self {
        let inputs = 2 * STATE_DIM;
        let mut cols: Vec<Vec<f64>> = (0..inputs)
            .map(|_| (0..d_o).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        for c in &mut cols {
            let norm = c.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= norm);
        }
        let matrix = (0..d_o).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        let bias = (0..d_o)
            .map(|_| bias_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { matrix, bias }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// Noise-free observation.
    pub fn render(&self, s: &[f64], g: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let lin: f64 = row[..STATE_DIM].iter().zip(s).map(|(m, x)| m * x).sum::<f64>()
                    + row[STATE_DIM..].iter().zip(g).map(|(m, x)| m * x).sum::<f64>();
                lin + b
            })
            .collect()
    }

    pub fn emit<R: Rng>(&self, s: &[f64], g: &[f64], noise_std: f64, rng: &mut R) -> Vec<f64> {
        let mut o = self.render(s, g);
        if noise_std > 0.0 {
            for v in &mut o {
                *v += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        o
    }
}

/// Per-domain emissions of one benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitters {
    pub src: Emission,
    pub tgt: Emission,
}

impl Emitters {
    pub fn get(&self, domain: Domain) -> &Emission {
        match domain {
            Domain::Src => &self.src,
            Domain::Tgt => &self.tgt,
        }
    }
}

/// Benchmark generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_src: usize,
    pub n_tgt: usize,
    pub horizon: usize,
    pub noise_std: f64,
    pub d_o: usize,
    pub seed: u64,
    /// Proportional gain of the scripted expert.
    pub gain: f64,
    /// Action norm limit of the scripted expert.
    pub a_max: f64,
    /// Half-width of the square around the origin that start states are drawn from.
    pub start_radius: f64,
    /// Standard deviation of the emission bias entries.
    pub bias_std: f64,
    /// Probes per region (target and target-OOD).
    pub n_probes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_src: 200,
            n_tgt: 10,
            horizon: 40,
            noise_std: 0.01,
            d_o: 16,
            seed: 0,
            gain: 0.5,
            a_max: 0.2,
            start_radius: 0.1,
            bias_std: 0.0,
            n_probes: 200,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tgt < 1 || self.n_src < self.n_tgt {
            return Err(Error::InvalidArgument(format!(
                "need n_src >= n_tgt >= 1, got n_src={} n_tgt={}",
                self.n_src, self.n_tgt
            )));
        }
        if self.horizon == 0 || self.d_o == 0 || self.n_probes == 0 {
            return Err(Error::InvalidArgument(
                "horizon, d_o and n_probes must be positive".into(),
            ));
        }
        let nonneg = [self.noise_std, self.bias_std, self.start_radius];
        if nonneg.iter().any(|x| !(*x >= 0.0)) || !(self.gain > 0.0) || !(self.a_max > 0.0) {
            return Err(Error::InvalidArgument(
                "noise_std, bias_std, start_radius must be >= 0; gain, a_max > 0".into(),
            ));
        }
        if self.start_radius >= 1.0 {
            return Err(Error::InvalidArgument(
                "start_radius must stay inside the unit square".into(),
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn emitters(&self) -> Emitters {
        Emitters {
            src: Emission::random(self.d_o, self.bias_std, &mut self.rng(STREAM_EMIT_SRC)),
            tgt: Emission::random(self.d_o, self.bias_std, &mut self.rng(STREAM_EMIT_TGT)),
        }
    }

    pub fn sample_start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let r = self.start_radius;
        (0..STATE_DIM)
            .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
            .collect()
    }
}

const STREAM_EMIT_SRC: u64 = 1;
const STREAM_EMIT_TGT: u64 = 2;
const STREAM_SRC_DEMOS: u64 = 3;
const STREAM_TGT_DEMOS: u64 = 4;
const STREAM_PROBES: u64 = 5;
/// Stream reserved for evaluation start states and goals.
pub const STREAM_EVAL: u64 = 6;

/// Scripted expert: `a = clip_norm(k (g − s), a_max)`.
pub fn expert_action(s: &[f64], g: &[f64], gain: f64, a_max: f64) -> Vec<f64> {
    let mut a: Vec<f64> = g.iter().zip(s).map(|(gi, si)| gain * (gi - si)).collect();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > a_max {
        let scale = a_max / norm;
        a.iter_mut().for_each(|x| *x *= scale);
    }
    a
}

/// Paired source/target emissions of one underlying `(state, goal)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub region: Region,
    pub state: Vec<f64>,
    pub goal: Vec<f64>,
    pub o_src: Vec<f64>,
    pub o_tgt: Vec<f64>,
}

pub type ProbeSet = Vec<Probe>;

/// A generated benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub config: BenchConfig,
    pub emitters: Emitters,
    pub src: Vec<Trajectory>,
    pub tgt: Vec<Trajectory>,
    pub probes: ProbeSet,
}

fn rollout_expert(cfg: &BenchConfig, s0: Vec<f64>, goal: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut states = Vec::with_capacity(cfg.horizon);
    let mut actions = Vec::with_capacity(cfg.horizon);
    let mut s = s0;
    for _ in 0..cfg.horizon {
        let a = expert_action(&s, goal, cfg.gain, cfg.a_max);
        let next: Vec<f64> = s.iter().zip(&a).map(|(x, d)| x + d).collect();
        states.push(s);
        actions.push(a);
        s = next;
    }
    let miss = crate::geometry::euclid(&s, goal)?;
    if !(miss < SUCCESS_RADIUS) {
        return Err(Error::InvalidArgument(format!(
            "expert misses goal {goal:?} by {miss:.3} within horizon {}; raise gain, a_max or horizon",
            cfg.horizon
        )));
    }
    Ok((states, actions))
}

fn demos(
    cfg: &BenchConfig,
    emitters: &Emitters,
    domain: Domain,
    region: Region,
    count: usize,
    stream: u64,
) -> Result<Vec<Trajectory>> {
    let mut rng = cfg.rng(stream);
    let emission = emitters.get(domain);
    (0..count)
        .map(|_| {
            let goal = region.sample_goal(&mut rng);
            let s0 = cfg.sample_start(&mut rng);
            let (proprio, actions) = rollout_expert(cfg, s0, &goal)?;
            let obs = proprio
                .iter()
                .map(|s| emission.emit(s, &goal, cfg.noise_std, &mut rng))
                .collect();
            let shadow_obs = (domain == Domain::Src).then(|| {
                proprio
                    .iter()
                    .map(|s| emitters.tgt.emit(s, &goal, cfg.noise_std, &mut rng))
                    .collect()
            });
            Ok(Trajectory {
                domain,
                region,
                goal,
                obs,
                proprio,
                actions,
                shadow_obs,
            })
        })
        .collect()
}

fn probes(cfg: &BenchConfig, emitters: &Emitters) -> Result<ProbeSet> {
    let mut rng = cfg.rng(STREAM_PROBES);
    let mut out = Vec::with_capacity(2 * cfg.n_probes);
    for region in [Region::Target, Region::TargetOod] {
        for _ in 0..cfg.n_probes {
            let goal = region.sample_goal(&mut rng);
            let s0 = cfg.sample_start(&mut rng);
            let (states, _) = rollout_expert(cfg, s0, &goal)?;
            let state = states[rng.random_range(0..states.len())].clone();
            out.push(Probe {
                region,
                o_src: emitters.src.render(&state, &goal),
                o_tgt: emitters.tgt.render(&state, &goal),
                state,
                goal,
            });
        }
    }
    Ok(out)
}

/// Generates source demonstrations (goals over the full square, source
/// emissions, with target-domain shadow emissions), target demonstrations
/// (left-half goals, target emissions) and noise-free paired probes from
/// both halves. Deterministic in `cfg`.
pub fn generate(cfg: &BenchConfig) -> Result<Benchmark> {
    cfg.validate()?;
    let emitters = cfg.emitters();
    let src = demos(cfg, &emitters, Domain::Src, Region::Source, cfg.n_src, STREAM_SRC_DEMOS)?;
    let tgt = demos(cfg, &emitters, Domain::Tgt, Region::Target, cfg.n_tgt, STREAM_TGT_DEMOS)?;
    let probes = probes(cfg, &emitters)?;
    Ok(Benchmark {
        config: cfg.clone(),
        emitters,
        src,
        tgt,
        probes,
    })
}

/// Start states and goals used for closed-loop evaluation in one region.
pub fn eval_episodes(cfg: &BenchConfig, region: Region, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = cfg.rng(STREAM_EVAL);
    // Separate, fixed offsets per region so that both sets are stable when
    // `count` changes for the other one.
    rng.set_word_pos(match region {
        Region::Source => 0,
        Region::Target => 1 << 40,
        Region::TargetOod => 2 << 40,
    });
    (0..count)
        .map(|_| {
            let goal = region.sample_goal(&mut rng);
            (cfg.sample_start(&mut rng), goal)
        })
        .collect()
}
