//! Two-stage, temporally aligned mini-batch construction.
//!
//! Stage one draws a (source, target) trajectory pair with probability
//! proportional to its DTW similarity weight. Stage two draws a source step
//! uniformly and a target step from a window around the DTW-matched step.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtw::{dtw, PairWeights};
use crate::error::{Error, Result};
use crate::synth::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Similarity-weighted pair, DTW-windowed step.
    Ours,
    /// Independent uniform transitions on each side.
    NoSampler,
    /// Source transitions paired with their own target-domain shadow emission.
    Oracle,
}

impl SamplerMode {
    pub const ALL: [SamplerMode; 3] = [SamplerMode::Ours, SamplerMode::NoSampler, SamplerMode::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::Ours => "ours",
            SamplerMode::NoSampler => "no_sampler",
            SamplerMode::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown sampler mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    /// Number of consecutive target steps the match window spans; `None`
    /// samples the whole paired trajectory.
    pub winsize: Option<usize>,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Ours,
            winsize: Some(10),
            batch_size: 128,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.winsize == Some(0) {
            return Err(Error::InvalidArgument("winsize must be >= 1 or off".into()));
        }
        Ok(())
    }
}

/// Borrowed `(o, x, a)` tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a> {
    pub obs: &'a [f64],
    pub proprio: &'a [f64],
    pub action: &'a [f64],
}

impl<'a> Transition<'a> {
    pub fn of(traj: &'a Trajectory, t: usize) -> Self {
        Self {
            obs: &traj.obs[t],
            proprio: &traj.proprio[t],
            action: &traj.actions[t],
        }
    }

    fn shadow(traj: &'a Trajectory, t: usize) -> Option<Self> {
        let shadow = traj.shadow_obs.as_ref()?;
        Some(Self {
            obs: &shadow[t],
            proprio: &traj.proprio[t],
            action: &traj.actions[t],
        })
    }
}

/// Indices behind one batch element. In oracle mode the target side is the
/// shadow emission of source trajectory `tgt_traj`, so `tgt_traj` indexes
/// the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub src_traj: usize,
    pub src_t: usize,
    pub tgt_traj: usize,
    pub tgt_t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedBatch<'a> {
    pub src: Vec<Transition<'a>>,
    pub tgt: Vec<Transition<'a>>,
    pub provenance: Vec<Provenance>,
}

impl PairedBatch<'_> {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Mean Euclidean distance between paired proprio vectors.
    pub fn mean_proprio_distance(&self) -> f64 {
        let total: f64 = self
            .src
            .iter()
            .zip(&self.tgt)
            .map(|(s, t)| crate::geometry::euclid(s.proprio, t.proprio).unwrap_or(f64::NAN))
            .sum();
        total / self.len() as f64
    }
}

/// Rebuilds a batch from its provenance.
pub fn replay<'a>(
    src: &'a [Trajectory],
    tgt: &'a [Trajectory],
    mode: SamplerMode,
    provenance: &[Provenance],
) -> Result<PairedBatch<'a>> {
    let mut out = PairedBatch {
        src: Vec::with_capacity(provenance.len()),
        tgt: Vec::with_capacity(provenance.len()),
        provenance: provenance.to_vec(),
    };
    let bad = |p: &Provenance| Error::InvalidArgument(format!("provenance {p:?} out of range"));
    for p in provenance {
        let s = src.get(p.src_traj).filter(|s| p.src_t < s.len()).ok_or_else(|| bad(p))?;
        out.src.push(Transition::of(s, p.src_t));
        let t = match mode {
            SamplerMode::Oracle => src
                .get(p.tgt_traj)
                .filter(|s| p.tgt_t < s.len())
                .and_then(|s| Transition::shadow(s, p.tgt_t)),
            _ => tgt
                .get(p.tgt_traj)
                .filter(|s| p.tgt_t < s.len())
                .map(|s| Transition::of(s, p.tgt_t)),
        };
        out.tgt.push(t.ok_or_else(|| bad(p))?);
    }
    Ok(out)
}

/// Uniform draws over every `(trajectory, step)` of a dataset.
#[derive(Debug, Clone)]
pub struct TransitionIndex {
    /// `offsets[k]` is the flat index of step 0 of trajectory `k`.
    offsets: Vec<usize>,
    total: usize,
}

impl TransitionIndex {
    pub fn new(data: &[Trajectory]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(data.len());
        let mut total = 0;
        for t in data {
            offsets.push(total);
            total += t.len();
        }
        if total == 0 {
            return Err(Error::Empty("transition dataset"));
        }
        Ok(Self { offsets, total })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let flat = rng.random_range(0..self.total);
        // Last trajectory whose offset is <= flat; skips empty trajectories.
        let k = self.offsets.partition_point(|&o| o <= flat) - 1;
        (k, flat - self.offsets[k])
    }
}

/// Draws `(k, l)` with probability `weights[k][l] / Σ weights`.
pub fn sample_pair<R: Rng + ?Sized>(weights: &PairWeights, rng: &mut R) -> Result<(usize, usize)> {
    let dist = pair_distribution(weights)?;
    let flat = dist.sample(rng);
    Ok((flat / weights.shape().1, flat % weights.shape().1))
}

fn pair_distribution(weights: &PairWeights) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights.weights.as_slice().iter().copied())
        .map_err(|e| Error::InvalidArgument(format!("pair weights: {e}")))
}

/// Smallest target index aligned with `t_src` on a DTW path.
///
/// # Panics
/// If `t_src` is not covered by `path`.
pub fn match_step(path: &[(usize, usize)], t_src: usize) -> usize {
    // Paths are sorted by source index and, within it, by target index.
    let at = path.partition_point(|&(i, _)| i < t_src);
    assert!(
        at < path.len() && path[at].0 == t_src,
        "source step {t_src} not on warping path"
    );
    path[at].1
}

/// Target step drawn from the `winsize` consecutive indices centred on
/// `matched`, shifted to lie within `[0, len)`.
pub fn window_step<R: Rng + ?Sized>(matched: usize, len: usize, winsize: Option<usize>, rng: &mut R) -> usize {
    let w = winsize.unwrap_or(len).min(len);
    let start = matched.saturating_sub(w / 2).min(len - w);
    start + rng.random_range(0..w)
}

/// Batch source bound to a dataset pair. Owns its seeded stream.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    cfg: SamplerConfig,
    src: &'a [Trajectory],
    tgt: &'a [Trajectory],
    weights: &'a PairWeights,
    pairs: Option<WeightedIndex<f64>>,
    src_index: TransitionIndex,
    tgt_index: TransitionIndex,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    pub fn new(
        cfg: SamplerConfig,
        src: &'a [Trajectory],
        tgt: &'a [Trajectory],
        weights: &'a PairWeights,
    ) -> Result<Self> {
        cfg.validate()?;
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::Empty("trajectory dataset"));
        }
        let pairs = match cfg.mode {
            SamplerMode::Ours => {
                crate::error::ensure_dim("pair weight rows", src.len(), weights.shape().0)?;
                crate::error::ensure_dim("pair weight cols", tgt.len(), weights.shape().1)?;
                Some(pair_distribution(weights)?)
            }
            SamplerMode::Oracle => {
                if src.iter().any(|t| t.shadow_obs.is_none()) {
                    return Err(Error::InvalidArgument(
                        "oracle mode needs shadow target emissions on every source trajectory".into(),
                    ));
                }
                None
            }
            SamplerMode::NoSampler => None,
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            src_index: TransitionIndex::new(src)?,
            tgt_index: TransitionIndex::new(tgt)?,
            cfg,
            src,
            tgt,
            weights,
            pairs,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn next_batch(&mut self) -> Result<PairedBatch<'a>> {
        let mut rng = self.rng.clone();
        let batch = self.batch_with(&mut rng);
        self.rng = rng;
        batch
    }

    /// Draws one batch from an external stream.
    pub fn batch_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PairedBatch<'a>> {
        let n = self.cfg.batch_size;
        let mut provenance = Vec::with_capacity(n);
        for _ in 0..n {
            provenance.push(self.draw(rng)?);
        }
        replay(self.src, self.tgt, self.cfg.mode, &provenance)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Provenance> {
        Ok(match self.cfg.mode {
            SamplerMode::NoSampler => {
                let (k, s) = self.src_index.sample(rng);
                let (l, t) = self.tgt_index.sample(rng);
                Provenance { src_traj: k, src_t: s, tgt_traj: l, tgt_t: t }
            }
            SamplerMode::Oracle => {
                let (k, s) = self.src_index.sample(rng);
                Provenance { src_traj: k, src_t: s, tgt_traj: k, tgt_t: s }
            }
            SamplerMode::Ours => {
                let pairs = self.pairs.as_ref().expect("pair distribution built for ours");
                let flat = pairs.sample(rng);
                let (k, l) = (flat / self.tgt.len(), flat % self.tgt.len());
                let (s_len, t_len) = (self.src[k].len(), self.tgt[l].len());
                if s_len == 0 || t_len == 0 {
                    return Err(Error::Empty("sampled trajectory"));
                }
                let s = rng.random_range(0..s_len);
                let matched = match self.weights.cached_path(k, l) {
                    Some(path) => match_step(path, s),
                    None => match_step(&dtw(&self.src[k].proprio, &self.tgt[l].proprio)?.path, s),
                };
                let t = window_step(matched, t_len, self.cfg.winsize, rng);
                Provenance { src_traj: k, src_t: s, tgt_traj: l, tgt_t: t }
            }
        })
    }
}

/// One batch from a fresh sampler over the given stream.
pub fn sample_paired_batch<'a, R: Rng + ?Sized>(
    src: &'a [Trajectory],
    tgt: &'a [Trajectory],
    weights: &'a PairWeights,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<PairedBatch<'a>> {
    Sampler::new(cfg.clone(), src, tgt, weights)?.batch_with(rng)
}
