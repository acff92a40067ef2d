//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use uot_align::dtw::{build_pair_weights, dtw, normalized_dtw, weight_transform};
use uot_align::geometry::Matrix;
use uot_align::model::{Checkpoint, ModelParams};
use uot_align::ot::{sinkhorn_balanced, sinkhorn_unbalanced, LogDomain, Marginals};
use uot_align::sampler::{Provenance, Sampler};
use uot_align::synth::generate;
use uot_align::trainer::{
    initial_params, sweep, train, write_embeddings_csv, write_sweep_csv, Evaluator, MetricsLog, SweepAxis,
};
use uot_align::{CostMatrix, SinkhornConfig, UotConfig};

use crate::config::{parse_winsize, RunConfig};
use crate::failure::Failure;
use crate::io::{self, Manifest, LoadedData};

pub type Outcome = Result<(), Failure>;

/// Config file plus command-line overrides.
pub struct ConfigArgs<'a> {
    pub path: Option<&'a Path>,
    pub seed: Option<u64>,
    pub set: &'a [String],
}

impl ConfigArgs<'_> {
    /// The parsed config and the hash of the file it came from.
    fn load(&self) -> Result<(RunConfig, Option<String>), Failure> {
        let (mut cfg, hash) = match self.path {
            Some(p) => {
                let (cfg, bytes) = io::load_config(p)?;
                (cfg, Some(io::sha256(&bytes)))
            }
            None => (RunConfig::default(), None),
        };
        for kv in self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Input(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.set("seed", &seed.to_string())?;
        }
        cfg.validate()?;
        Ok((cfg, hash))
    }
}

fn config_inputs(hash: Option<String>) -> BTreeMap<String, String> {
    hash.into_iter().map(|h| ("config".to_string(), h)).collect()
}

fn manifest_bytes(cfg: &RunConfig, inputs: BTreeMap<String, String>) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(&Manifest::new(cfg, inputs)).map_err(|e| Failure::Other(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn json_line<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure::Other(e.to_string()))
}

pub fn show_config(config: ConfigArgs<'_>) -> Outcome {
    let (cfg, _) = config.load()?;
    print!("{}", cfg.emit());
    Ok(())
}

pub fn gen_data(config: ConfigArgs<'_>, out: &Path) -> Outcome {
    let (cfg, hash) = config.load()?;
    cfg.require_seed()?;
    let bench = generate(&cfg.bench)?;
    let mut files = io::benchmark_files(&bench, &cfg)?;
    files.push((io::MANIFEST, manifest_bytes(&cfg, config_inputs(hash))?));
    io::write_files(out, &files)?;
    println!(
        "wrote {} source and {} target trajectories, {} probes to {}",
        bench.src.len(),
        bench.tgt.len(),
        bench.probes.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolveMode {
    Balanced,
    Unbalanced,
}

pub struct SolveArgs<'a> {
    pub cost: &'a Path,
    pub marginals: Option<&'a Path>,
    pub mode: SolveMode,
    pub epsilon: f64,
    pub tau: f64,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub log_domain: &'a str,
    pub out: &'a Path,
    pub summary: Option<&'a Path>,
}

/// Two CSV rows, source masses then target masses. Rows may differ in length.
fn read_marginals(path: &Path) -> Result<Marginals<f64>, Failure> {
    let bytes = io::read_input(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Failure::Input(format!("not a number: `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    match <[Vec<f64>; 2]>::try_from(rows) {
        Ok([p, q]) => Ok(Marginals::new(p, q)?),
        Err(rows) => Err(Failure::Input(format!(
            "{}: expected 2 rows (p, q), got {}",
            path.display(),
            rows.len()
        ))),
    }
}

pub fn solve(args: SolveArgs<'_>) -> Outcome {
    let cost = CostMatrix::new(Matrix::read_csv(&io::read_input(args.cost)?[..])?)?;
    let (n, m) = cost.shape();
    let mu = match args.marginals {
        Some(p) => read_marginals(p)?,
        None => Marginals::uniform(n, m),
    };
    let log_domain = LogDomain::parse(args.log_domain)?;
    let plan = match args.mode {
        SolveMode::Balanced => {
            let mut cfg = SinkhornConfig::new(args.epsilon);
            cfg.log_domain = log_domain;
            cfg.max_iter = args.max_iter.unwrap_or(cfg.max_iter);
            cfg.tol = args.tol.unwrap_or(cfg.tol);
            sinkhorn_balanced(&cost, &mu, &cfg)?
        }
        SolveMode::Unbalanced => {
            let mut cfg = UotConfig::new(args.epsilon, args.tau);
            cfg.log_domain = log_domain;
            cfg.max_iter = args.max_iter.unwrap_or(cfg.max_iter);
            cfg.tol = args.tol.unwrap_or(cfg.tol);
            sinkhorn_unbalanced(&cost, &mu, &cfg)?
        }
    };
    io::write_file(args.out, plan.plan.to_csv_string().as_bytes())?;
    let summary = json_line(&plan.summary())?;
    if let Some(path) = args.summary {
        io::write_file(path, format!("{summary}\n").as_bytes())?;
    }
    println!("{summary}");
    if !plan.converged {
        return Err(Failure::Numerical(format!(
            "no convergence after {} iterations (row residual {:e}, column residual {:e})",
            plan.iterations, plan.row_residual, plan.col_residual
        )));
    }
    Ok(())
}

fn read_sequence(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let m = Matrix::<f64>::read_csv(&io::read_input(path)?[..])?;
    Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
}

#[derive(Serialize)]
struct DtwReport {
    distance: f64,
    normalized: f64,
    weight: f64,
    path: Vec<(usize, usize)>,
}

pub fn dtw_pair(x: &Path, y: &Path) -> Outcome {
    let (x, y) = (read_sequence(x)?, read_sequence(y)?);
    let res = dtw(&x, &y)?;
    let normalized = normalized_dtw(&x, &y)?;
    let report = DtwReport {
        distance: res.distance,
        normalized,
        weight: weight_transform(normalized),
        path: res.path,
    };
    println!("{}", json_line(&report)?);
    Ok(())
}

pub fn dtw_weights(data: &Path, out: &Path, dists: Option<&Path>) -> Outcome {
    let LoadedData { bench, .. } = io::load_data(data)?;
    let w = build_pair_weights(&bench.src, &bench.tgt)?;
    io::write_file(out, w.weights.to_csv_string().as_bytes())?;
    if let Some(path) = dists {
        io::write_file(path, w.norm_dists.to_csv_string().as_bytes())?;
    }
    let (n, m) = w.shape();
    println!("wrote {n}x{m} pair weights to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct BatchReport<'a> {
    batch: usize,
    mean_proprio_distance: f64,
    pairs: &'a [Provenance],
}

pub fn sample_debug(config: ConfigArgs<'_>, data: &Path, batches: usize, out: &Path) -> Outcome {
    let (cfg, _) = config.load()?;
    let LoadedData { bench, .. } = io::load_data(data)?;
    let weights = build_pair_weights(&bench.src, &bench.tgt)?;
    let mut sampler = Sampler::new(cfg.train.sampler.clone(), &bench.src, &bench.tgt, &weights)?;
    let mut lines = String::new();
    let mut total = 0.0;
    for b in 0..batches {
        let batch = sampler.next_batch()?;
        let d = batch.mean_proprio_distance();
        total += d;
        lines.push_str(&json_line(&BatchReport {
            batch: b,
            mean_proprio_distance: d,
            pairs: &batch.provenance,
        })?);
        lines.push('\n');
    }
    io::write_file(out, lines.as_bytes())?;
    println!(
        "{} batches in mode {}, mean proprio distance {}",
        batches,
        cfg.train.sampler.mode.name(),
        total / batches.max(1) as f64
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    method: &'static str,
    steps: usize,
    skipped_steps: usize,
    failed: bool,
    final_metrics: Option<uot_align::trainer::MetricsRecord>,
}

pub fn train_cmd(config: ConfigArgs<'_>, data: &Path, out: &Path) -> Outcome {
    let (cfg, hash) = config.load()?;
    cfg.require_seed()?;
    let LoadedData { bench, mut hashes } = io::load_data(data)?;
    hashes.extend(config_inputs(hash));
    let weights = build_pair_weights(&bench.src, &bench.tgt)?;
    let outcome = train(&cfg.train, &bench, &weights)?;
    let checkpoint = Checkpoint::new(&outcome.params, Some(outcome.optimizer.clone()))
        .to_json()?
        .into_bytes();
    let summary = TrainSummary {
        method: cfg.train.method.name(),
        steps: cfg.train.steps,
        skipped_steps: outcome.skipped_steps,
        failed: outcome.failed,
        final_metrics: outcome.log.last().copied(),
    };
    let summary = json_line(&summary)?;
    io::write_files(
        out,
        &[
            ("metrics.csv", outcome.log.to_csv_string().into_bytes()),
            ("checkpoint.json", checkpoint),
            ("summary.json", format!("{summary}\n").into_bytes()),
            (io::MANIFEST, manifest_bytes(&cfg, hashes)?),
        ],
    )?;
    println!("{summary}");
    if outcome.failed {
        return Err(Failure::Numerical(format!(
            "{} of {} steps skipped after unconverged transport solves",
            outcome.skipped_steps, cfg.train.steps
        )));
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<ModelParams, Failure> {
    Ok(Checkpoint::from_json(&io::read_text(path)?)?.params()?)
}

fn check_obs_dim(params: &ModelParams, d_o: usize) -> Result<(), Failure> {
    if params.dims().d_o != d_o {
        return Err(Failure::Input(format!(
            "checkpoint expects {}-dimensional observations, data has {d_o}",
            params.dims().d_o
        )));
    }
    Ok(())
}

pub fn eval(config: ConfigArgs<'_>, data: &Path, checkpoint: Option<&Path>, out: &Path) -> Outcome {
    let (cfg, _) = config.load()?;
    let LoadedData { bench, .. } = io::load_data(data)?;
    let params = match checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => initial_params(&cfg.train, &bench.config),
    };
    check_obs_dim(&params, bench.config.d_o)?;
    let record = Evaluator::new(&bench, cfg.train.eval_episodes).evaluate(&params, 0, 0.0)?;
    let log = MetricsLog { records: vec![record] };
    io::write_file(out, log.to_csv_string().as_bytes())?;
    println!("{}", json_line(&record)?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Epsilon,
    Tau,
    Winsize,
    NSrc,
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, Failure>) -> Result<Vec<T>, Failure> {
    s.split(',').map(|v| f(v.trim())).collect()
}

fn number<T: std::str::FromStr>(v: &str) -> Result<T, Failure> {
    v.parse().map_err(|_| Failure::Input(format!("bad grid value {v:?}")))
}

pub fn sweep_cmd(config: ConfigArgs<'_>, axis: Axis, values: &str, seeds: Option<&str>, out: &Path) -> Outcome {
    let (cfg, hash) = config.load()?;
    let axis = match axis {
        Axis::Epsilon => SweepAxis::Epsilon(parse_list(values, number)?),
        Axis::Tau => SweepAxis::Tau(parse_list(values, number)?),
        Axis::Winsize => SweepAxis::Winsize(parse_list(values, |v| Ok(parse_winsize(v)?))?),
        Axis::NSrc => SweepAxis::NSrc(parse_list(values, number)?),
    };
    let seeds: Vec<u64> = match seeds {
        Some(s) => parse_list(s, number)?,
        None => vec![cfg.require_seed()?],
    };
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let rows = sweep(&axis, &cfg.bench, &cfg.train, &seeds, |row, outcome| {
        if let Some(o) = outcome {
            let name = format!("metrics_{}_{}_seed{}.csv", row.param, row.value, row.seed);
            files.push((name, o.log.to_csv_string().into_bytes()));
        }
        eprintln!(
            "{}={} seed={} success_ood={} align_ood={} {}",
            row.param, row.value, row.seed, row.success_rate_ood, row.align_err_ood, row.error
        );
    })?;
    let mut summary = Vec::new();
    write_sweep_csv(&rows, &mut summary)?;
    files.push(("summary.csv".into(), summary));
    files.push((io::MANIFEST.into(), manifest_bytes(&cfg, config_inputs(hash))?));
    let borrowed: Vec<(&str, Vec<u8>)> = files.iter().map(|(n, b)| (n.as_str(), b.clone())).collect();
    io::write_files(out, &borrowed)?;
    let bad = rows.iter().filter(|r| r.failed).count();
    println!("{} runs, {} failed, summary in {}", rows.len(), bad, out.join("summary.csv").display());
    if bad > 0 {
        return Err(Failure::Numerical(format!("{bad} of {} sweep runs failed", rows.len())));
    }
    Ok(())
}

pub fn export_embeddings(data: &Path, checkpoint: &Path, out: &PathBuf) -> Outcome {
    let LoadedData { bench, .. } = io::load_data(data)?;
    let params = load_checkpoint(checkpoint)?;
    check_obs_dim(&params, bench.config.d_o)?;
    let mut buf = Vec::new();
    write_embeddings_csv(&params, &bench.probes, &mut buf)?;
    io::write_file(out, &buf)?;
    println!("wrote {} probe embeddings per domain to {}", bench.probes.len(), out.display());
    Ok(())
}
