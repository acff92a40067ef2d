//! Joint training loop, baselines, evaluation and sweeps.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtw::{build_pair_weights, PairWeights};
use crate::error::{Error, Result};
use crate::model::{
    act, adam_step, batch_cost, encode, total_loss_and_grads, AdamConfig, AdamState, Alignment, Dims,
    LossConfig, ModelParams,
};
use crate::ot::{sinkhorn_unbalanced, Marginals, UotConfig};
use crate::sampler::{Sampler, SamplerConfig, Transition, TransitionIndex};
use crate::synth::{
    eval_episodes, expert_action, generate, BenchConfig, Benchmark, Domain, Emission, Probe, Region,
    Trajectory, SUCCESS_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    Cotrain,
    Mmd,
    SourceOnly,
    TargetOnly,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ours, Method::Cotrain, Method::Mmd, Method::SourceOnly, Method::TargetOnly];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Cotrain => "cotrain",
            Method::Mmd => "mmd",
            Method::SourceOnly => "source_only",
            Method::TargetOnly => "target_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub lambda: f64,
    pub bc_batch: usize,
    /// Size of each paired OT batch; overrides `sampler.batch_size`.
    pub ot_batch: usize,
    /// Fraction of each BC batch drawn from the source dataset (floored).
    pub cotrain_ratio: f64,
    pub uot: UotConfig<f64>,
    pub sampler: SamplerConfig,
    pub steps: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub hidden: usize,
    pub d_z: usize,
    pub adam: AdamConfig,
    /// Closed-loop episodes per region at each evaluation.
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ours,
            lambda: 0.1,
            bc_batch: 256,
            ot_batch: 128,
            cotrain_ratio: 0.9,
            uot: UotConfig::default(),
            sampler: SamplerConfig::default(),
            steps: 5000,
            eval_every: 500,
            seed: 0,
            alpha1: 1.0,
            alpha2: 1.0,
            hidden: 32,
            d_z: 8,
            adam: AdamConfig::default(),
            eval_episodes: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.cotrain_ratio) {
            return bad("cotrain_ratio must lie in [0, 1]");
        }
        if self.bc_batch == 0 || self.ot_batch == 0 || self.eval_every == 0 {
            return bad("bc_batch, ot_batch and eval_every must be >= 1");
        }
        if self.hidden == 0 || self.d_z == 0 || self.eval_episodes == 0 {
            return bad("hidden, d_z and eval_episodes must be >= 1");
        }
        if !(self.alpha1 >= 0.0) || !(self.alpha2 >= 0.0) {
            return bad("alpha1 and alpha2 must be >= 0");
        }
        if !(self.adam.lr > 0.0) {
            return bad("learning rate must be > 0");
        }
        self.uot.validate()?;
        self.sampler_config().validate()?;
        let (n_src, n_tgt) = self.bc_split();
        if self.method == Method::Mmd && self.effective_lambda() > 0.0 && (n_src == 0 || n_tgt == 0) {
            return bad("mmd needs source and target samples in every BC batch");
        }
        Ok(())
    }

    /// λ actually applied: zero for the methods without an alignment term.
    pub fn effective_lambda(&self) -> f64 {
        match self.method {
            Method::Ours | Method::Mmd => self.lambda,
            Method::Cotrain | Method::SourceOnly | Method::TargetOnly => 0.0,
        }
    }

    pub fn effective_ratio(&self) -> f64 {
        match self.method {
            Method::SourceOnly => 1.0,
            Method::TargetOnly => 0.0,
            _ => self.cotrain_ratio,
        }
    }

    /// `(source, target)` counts per BC batch.
    pub fn bc_split(&self) -> (usize, usize) {
        let n_src = ((self.effective_ratio() * self.bc_batch as f64).floor() as usize).min(self.bc_batch);
        (n_src, self.bc_batch - n_src)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig { batch_size: self.ot_batch, seed: self.seed ^ SAMPLER_SEED_SALT, ..self.sampler.clone() }
    }

    pub fn dims(&self, bench: &BenchConfig) -> Dims {
        Dims { d_o: bench.d_o, hidden: self.hidden, d_z: self.d_z, d_x: 2, d_a: 2 }
    }
}

const SAMPLER_SEED_SALT: u64 = 0x5eed_0f0a_11a1_u64;
const STREAM_INIT: u64 = 1;
const STREAM_BC: u64 = 2;

/// Evaluation snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    /// BC mean squared error over every target transition.
    pub bc_loss: f64,
    /// Mean training transport cost `⟨Π, Ĉ⟩` since the previous record.
    pub uot_loss: f64,
    pub align_err_id: f64,
    pub align_err_ood: f64,
    pub action_mse_ood: f64,
    pub success_rate_id: f64,
    pub success_rate_ood: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<MetricsRecord>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub optimizer: AdamState,
    pub log: MetricsLog,
    /// Steps whose UOT term was dropped because the solver did not converge.
    pub skipped_steps: usize,
    /// More than 1% of steps skipped.
    pub failed: bool,
}

/// Mean `‖f(o_src) − f(o_tgt)‖²` over the in-distribution and OOD probes.
pub fn eval_alignment(params: &ModelParams, probes: &[Probe]) -> Result<(f64, f64)> {
    let region_err = |region: Region| -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for p in probes.iter().filter(|p| p.region == region) {
            total += crate::geometry::sq_euclid(&encode(params, &p.o_src)?, &encode(params, &p.o_tgt)?)?;
            count += 1;
        }
        if count == 0 {
            return Err(Error::Empty("probe region"));
        }
        Ok(total / count as f64)
    };
    Ok((region_err(Region::Target)?, region_err(Region::TargetOod)?))
}

/// Mean per-dimension variance of probe latents from both domains.
pub fn latent_variance(params: &ModelParams, probes: &[Probe]) -> Result<f64> {
    let mut zs = Vec::with_capacity(2 * probes.len());
    for p in probes {
        zs.push(encode(params, &p.o_src)?);
        zs.push(encode(params, &p.o_tgt)?);
    }
    if zs.len() < 2 {
        return Err(Error::Empty("probe set"));
    }
    let n = zs.len() as f64;
    let d = zs[0].len();
    let mut var = 0.0;
    for c in 0..d {
        let mean = zs.iter().map(|z| z[c]).sum::<f64>() / n;
        var += zs.iter().map(|z| (z[c] - mean).powi(2)).sum::<f64>() / n;
    }
    Ok(var / d as f64)
}

/// Closed loop `s ← s + π(f(E(s, g)), s)` for `horizon` steps from `start`.
/// Returns the visited states (including the final one) and whether the
/// final state is within the success radius.
pub fn rollout(
    params: &ModelParams,
    emission: &Emission,
    start: &[f64],
    goal: &[f64],
    horizon: usize,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut states = Vec::with_capacity(horizon + 1);
    let mut s = start.to_vec();
    for _ in 0..horizon {
        let a = act(params, &emission.render(&s, goal), &s)?;
        let next: Vec<f64> = s.iter().zip(&a).map(|(x, d)| x + d).collect();
        states.push(std::mem::replace(&mut s, next));
    }
    let success = crate::geometry::euclid(&s, goal)? < SUCCESS_RADIUS;
    states.push(s);
    Ok((states, success))
}

/// Fixed evaluation material derived from a benchmark.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    bench: &'a Benchmark,
    episodes_id: Vec<(Vec<f64>, Vec<f64>)>,
    episodes_ood: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(bench: &'a Benchmark, episodes: usize) -> Self {
        Self {
            bench,
            episodes_id: eval_episodes(&bench.config, Region::Target, episodes),
            episodes_ood: eval_episodes(&bench.config, Region::TargetOod, episodes),
        }
    }

    fn success_rate(&self, params: &ModelParams, episodes: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut hits = 0usize;
        for (s0, g) in episodes {
            if rollout(params, &self.bench.emitters.tgt, s0, g, self.bench.config.horizon)?.1 {
                hits += 1;
            }
        }
        Ok(hits as f64 / episodes.len() as f64)
    }

    /// Metrics for `params`; `uot_loss` is supplied by the caller.
    pub fn evaluate(&self, params: &ModelParams, step: usize, uot_loss: f64) -> Result<MetricsRecord> {
        let tgt: Vec<Transition<'_>> = transitions(&self.bench.tgt).collect();
        let bc_loss = crate::model::bc_loss(params, &tgt)?;
        let (align_err_id, align_err_ood) = eval_alignment(params, &self.bench.probes)?;
        let cfg = &self.bench.config;
        let mut mse = 0.0;
        let mut count = 0usize;
        for p in self.bench.probes.iter().filter(|p| p.region == Region::TargetOod) {
            let a = act(params, &p.o_tgt, &p.state)?;
            let target = expert_action(&p.state, &p.goal, cfg.gain, cfg.a_max);
            mse += crate::geometry::sq_euclid(&a, &target)?;
            count += 1;
        }
        Ok(MetricsRecord {
            step,
            bc_loss,
            uot_loss,
            align_err_id,
            align_err_ood,
            action_mse_ood: mse / count as f64,
            success_rate_id: self.success_rate(params, &self.episodes_id)?,
            success_rate_ood: self.success_rate(params, &self.episodes_ood)?,
        })
    }
}

fn transitions(data: &[Trajectory]) -> impl Iterator<Item = Transition<'_>> {
    data.iter().flat_map(|t| (0..t.len()).map(move |k| Transition::of(t, k)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Parameters a training run with `cfg` starts from.
pub fn initial_params(cfg: &TrainConfig, bench: &BenchConfig) -> ModelParams {
    ModelParams::init(cfg.dims(bench), stream(cfg.seed, STREAM_INIT).random())
}

/// Trains one model. BC batches, OT batches and initialization draw from
/// independent seed-derived streams.
pub fn train(cfg: &TrainConfig, bench: &Benchmark, weights: &PairWeights) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (src, tgt) = (&bench.src[..], &bench.tgt[..]);
    let dims = cfg.dims(&bench.config);
    let mut params = initial_params(cfg, &bench.config);
    let mut optimizer = AdamState::new(dims.num_params());
    let evaluator = Evaluator::new(bench, cfg.eval_episodes);
    let mut log = MetricsLog { records: vec![evaluator.evaluate(&params, 0, 0.0)?] };

    let lambda = cfg.effective_lambda();
    let loss_cfg = LossConfig { lambda, alpha1: cfg.alpha1, alpha2: cfg.alpha2 };
    let (n_src, n_tgt) = cfg.bc_split();
    let src_index = TransitionIndex::new(src)?;
    let tgt_index = TransitionIndex::new(tgt)?;
    let mut bc_rng = stream(cfg.seed, STREAM_BC);
    let mut sampler = if cfg.method == Method::Ours && lambda > 0.0 {
        Some(Sampler::new(cfg.sampler_config(), src, tgt, weights)?)
    } else {
        None
    };
    let marginals = Marginals::uniform(cfg.ot_batch, cfg.ot_batch);

    let mut skipped = 0usize;
    let mut uot_sum = 0.0;
    let mut uot_count = 0usize;
    let mut bc = Vec::with_capacity(cfg.bc_batch);
    for step in 1..=cfg.steps {
        bc.clear();
        for _ in 0..n_src {
            let (k, t) = src_index.sample(&mut bc_rng);
            bc.push(Transition::of(&src[k], t));
        }
        for _ in 0..n_tgt {
            let (k, t) = tgt_index.sample(&mut bc_rng);
            bc.push(Transition::of(&tgt[k], t));
        }

        let pair;
        let solved;
        let align = match (&mut sampler, cfg.method) {
            (Some(s), _) => {
                pair = s.next_batch()?;
                let cost = batch_cost(&params, &pair, cfg.alpha1, cfg.alpha2)?;
                match sinkhorn_unbalanced(&cost, &marginals, &cfg.uot) {
                    Ok(plan) if plan.converged => {
                        solved = plan.plan;
                        Alignment::Uot { batch: &pair, plan: &solved }
                    }
                    Ok(_) | Err(Error::EpsilonTooSmall { .. }) => {
                        skipped += 1;
                        Alignment::None
                    }
                    Err(e) => return Err(e),
                }
            }
            (None, Method::Mmd) if lambda > 0.0 => Alignment::Mmd { src: &bc[..n_src], tgt: &bc[n_src..] },
            _ => Alignment::None,
        };
        let (loss, grads) = total_loss_and_grads(&params, &bc, align, &loss_cfg)?;
        if let Alignment::Uot { .. } = align {
            uot_sum += loss.uot;
            uot_count += 1;
        }
        adam_step(&mut params, &grads, &mut optimizer, &cfg.adam)?;

        if step % cfg.eval_every == 0 || step == cfg.steps {
            let uot = if uot_count > 0 { uot_sum / uot_count as f64 } else { 0.0 };
            log.records.push(evaluator.evaluate(&params, step, uot)?);
            uot_sum = 0.0;
            uot_count = 0;
        }
    }
    // Strictly more than 1% of steps.
    let failed = skipped * 100 > cfg.steps;
    Ok(TrainOutcome { params, optimizer, log, skipped_steps: skipped, failed })
}

/// Hyperparameter swept by [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Epsilon(Vec<f64>),
    Tau(Vec<f64>),
    /// `None` samples the whole paired trajectory.
    Winsize(Vec<Option<usize>>),
    NSrc(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Epsilon(_) => "epsilon",
            SweepAxis::Tau(_) => "tau",
            SweepAxis::Winsize(_) => "winsize",
            SweepAxis::NSrc(_) => "n_src",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Epsilon(v) | SweepAxis::Tau(v) => v.len(),
            SweepAxis::Winsize(v) => v.len(),
            SweepAxis::NSrc(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, k: usize) -> String {
        match self {
            SweepAxis::Epsilon(v) | SweepAxis::Tau(v) => v[k].to_string(),
            SweepAxis::Winsize(v) => v[k].map_or_else(|| "off".to_string(), |w| w.to_string()),
            SweepAxis::NSrc(v) => v[k].to_string(),
        }
    }

    fn apply(&self, k: usize, bench: &mut BenchConfig, train: &mut TrainConfig) {
        match self {
            SweepAxis::Epsilon(v) => train.uot.epsilon = v[k],
            SweepAxis::Tau(v) => train.uot.tau = v[k],
            SweepAxis::Winsize(v) => train.sampler.winsize = v[k],
            SweepAxis::NSrc(v) => bench.n_src = v[k],
        }
    }
}

/// Final metrics of one sweep run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub step: usize,
    pub align_err_id: f64,
    pub align_err_ood: f64,
    pub action_mse_ood: f64,
    pub success_rate_id: f64,
    pub success_rate_ood: f64,
    pub skipped_steps: usize,
    pub failed: bool,
    /// Empty unless the run returned an error.
    pub error: String,
}

/// One run per `(grid value, seed)`. The seed drives both data generation
/// and training. A run that errors is recorded and the sweep continues.
pub fn sweep(
    axis: &SweepAxis,
    base_bench: &BenchConfig,
    base_train: &TrainConfig,
    seeds: &[u64],
    mut on_run: impl FnMut(&SweepRow, Option<&TrainOutcome>),
) -> Result<Vec<SweepRow>> {
    if axis.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    let mut rows = Vec::with_capacity(axis.len() * seeds.len());
    for k in 0..axis.len() {
        for &seed in seeds {
            let mut bench_cfg = BenchConfig { seed, ..base_bench.clone() };
            let mut train_cfg = TrainConfig { seed, ..base_train.clone() };
            axis.apply(k, &mut bench_cfg, &mut train_cfg);
            let result = generate(&bench_cfg).and_then(|bench| {
                let weights = build_pair_weights(&bench.src, &bench.tgt)?;
                train(&train_cfg, &bench, &weights)
            });
            let mut row = SweepRow {
                param: axis.name().to_string(),
                value: axis.label(k),
                seed,
                step: 0,
                align_err_id: f64::NAN,
                align_err_ood: f64::NAN,
                action_mse_ood: f64::NAN,
                success_rate_id: f64::NAN,
                success_rate_ood: f64::NAN,
                skipped_steps: 0,
                failed: true,
                error: String::new(),
            };
            match &result {
                Ok(out) => {
                    let last = out.log.last().expect("log has the initial record");
                    row.step = last.step;
                    row.align_err_id = last.align_err_id;
                    row.align_err_ood = last.align_err_ood;
                    row.action_mse_ood = last.action_mse_ood;
                    row.success_rate_id = last.success_rate_id;
                    row.success_rate_ood = last.success_rate_ood;
                    row.skipped_steps = out.skipped_steps;
                    row.failed = out.failed;
                }
                Err(e) => row.error = e.to_string(),
            }
            on_run(&row, result.as_ref().ok());
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Probe latents, one row per `(probe, domain)`: `index,domain,region,z0..`.
pub fn write_embeddings_csv<W: Write>(params: &ModelParams, probes: &[Probe], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d_z = params.dims().d_z;
    let mut header = vec!["index".to_string(), "domain".into(), "region".into()];
    header.extend((0..d_z).map(|c| format!("z{c}")));
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    for (k, p) in probes.iter().enumerate() {
        for (domain, o) in [(Domain::Src, &p.o_src), (Domain::Tgt, &p.o_tgt)] {
            let mut rec = vec![k.to_string(), tag(&domain), tag(&p.region)];
            rec.extend(encode(params, o)?.iter().map(|z| z.to_string()));
            w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
