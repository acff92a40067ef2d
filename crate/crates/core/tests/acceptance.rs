//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-7 and 10 check implementation contracts and fail the run.
//! Criteria 8 and 9 check empirical claims about the method on the synthetic
//! benchmark; they are reported but do not fail the run.
//!
//! `UOT_ACCEPTANCE_FAST=1` skips the training criteria 8-10.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use uot_align::dtw::{build_pair_weights, dtw, weight_transform, PairWeights};
use uot_align::geometry::{CostMatrix, Matrix};
use uot_align::model::{
    batch_cost, bc_loss, total_loss_and_grads, Alignment, Dims, LossConfig, ModelParams,
};
use uot_align::ot::{
    exact_ot_oracle, exact_uot_oracle, sinkhorn_balanced, sinkhorn_unbalanced, transport_cost,
    LogDomain, Marginals, SinkhornConfig, UotConfig,
};
use uot_align::sampler::{sample_pair, Sampler, SamplerConfig, SamplerMode, Transition};
use uot_align::synth::{generate, BenchConfig};
use uot_align::trainer::{sweep, train, write_sweep_csv, Method, SweepAxis, SweepRow, TrainConfig};

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CostMatrix<f64> {
    CostMatrix::new(Matrix::from_fn(n, m, |_, _| rng.random::<f64>())).unwrap()
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_rel, mut rel_fail, mut mono_fail, mut unconverged) = (0.0f64, 0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(2..=6);
        let c = random_cost(&mut rng, n, n);
        let mu = Marginals::uniform(n, n);
        let (_, exact) = exact_ot_oracle(&c).unwrap();
        let solve = |eps: f64| {
            let plan = sinkhorn_balanced(&c, &mu, &SinkhornConfig::new(eps)).unwrap();
            (plan.objective, plan.converged)
        };
        let (obj, conv) = solve(0.001);
        unconverged += usize::from(!conv);
        // The exact cost is strictly positive for costs drawn from (0, 1).
        let rel = (obj - exact).abs() / exact;
        worst_rel = worst_rel.max(rel);
        rel_fail += usize::from(!(rel <= 1e-3));
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let (obj, conv) = solve(eps);
            unconverged += usize::from(!conv);
            let gap = obj - exact;
            // Gaps that have collapsed to rounding level compare equal.
            if gap > prev + 1e-12 {
                mono_fail += 1;
            }
            prev = gap;
        }
    }
    let elapsed = t0.elapsed();
    Verdict {
        id: 1,
        name: "solver-oracle equivalence",
        pass: rel_fail == 0 && mono_fail == 0 && unconverged == 0 && within(elapsed, 10.0),
        detail: format!(
            "200 instances: worst rel gap at eps=0.001 {worst_rel:.2e} (limit 1e-3), {rel_fail} over limit, \
             {mono_fail} non-monotone gap sequences, {unconverged} unconverged solves, {:.1}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grid = [0.05, 0.2, 1.0];
    let (mut worst_obj, mut worst_gibbs, mut worst_bal) = (0.0f64, 0.0f64, 0.0f64);
    let mut oracle_unconverged = 0;
    for k in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let c = random_cost(&mut rng, n, m);
        let mu = Marginals::new(random_masses(&mut rng, n), random_masses(&mut rng, m)).unwrap();
        let (eps, tau) = (grid[k % 3], grid[(k / 3) % 3]);

        let cfg = UotConfig::new(eps, tau);
        let plan = sinkhorn_unbalanced(&c, &mu, &cfg).unwrap();
        let oracle = exact_uot_oracle(&c, &mu, &cfg).unwrap();
        oracle_unconverged += usize::from(!oracle.converged || !plan.converged);
        worst_obj = worst_obj.max((plan.objective - oracle.objective).abs());

        let gibbs = sinkhorn_unbalanced(&c, &mu, &UotConfig::new(eps, 0.0)).unwrap();
        for i in 0..n {
            for j in 0..m {
                worst_gibbs = worst_gibbs.max((gibbs.plan.get(i, j) - (-c.get(i, j) / eps).exp()).abs());
            }
        }

        let stiff = sinkhorn_unbalanced(&c, &mu, &UotConfig::new(eps, 1e6)).unwrap();
        let balanced = sinkhorn_balanced(&c, &mu, &SinkhornConfig::new(eps)).unwrap();
        worst_bal = worst_bal.max(stiff.plan.max_abs_diff(&balanced.plan).unwrap());
    }
    let elapsed = t0.elapsed();
    Verdict {
        id: 2,
        name: "UOT correctness",
        pass: worst_obj <= 1e-6
            && worst_gibbs <= 1e-8
            && worst_bal <= 1e-3
            && oracle_unconverged == 0
            && within(elapsed, 30.0),
        detail: format!(
            "100 instances: |obj - oracle| max {worst_obj:.2e} (limit 1e-6), tau=0 vs exp(-C/eps) max {worst_gibbs:.2e} \
             (limit 1e-8), tau=1e6 vs balanced max {worst_bal:.2e} (limit 1e-3), {oracle_unconverged} unconverged, {:.1}s (limit 30s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_3() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = UotConfig { log_domain: LogDomain::Always, ..UotConfig::new(0.0005, 0.01) };
    let mu = Marginals::uniform(4, 4);
    let h = 1e-5;
    let (mut worst, mut unconverged) = (0.0f64, 0);
    for _ in 0..50 {
        let c = random_cost(&mut rng, 4, 4);
        let plan = sinkhorn_unbalanced(&c, &mu, &cfg).unwrap();
        unconverged += usize::from(!plan.converged);
        for i in 0..4 {
            for j in 0..4 {
                let objective_at = |d: f64| {
                    let mut m = c.matrix().clone();
                    m.set(i, j, m.get(i, j) + d);
                    sinkhorn_unbalanced(&CostMatrix::new(m).unwrap(), &mu, &cfg).unwrap().objective
                };
                let fd = (objective_at(h) - objective_at(-h)) / (2.0 * h);
                worst = worst.max((fd - plan.plan.get(i, j)).abs());
            }
        }
    }
    Verdict {
        id: 3,
        name: "envelope gradient",
        pass: worst <= 1e-4 && unconverged == 0,
        detail: format!(
            "50 instances 4x4 at eps=0.0005, tau=0.01, log domain: max |dL/dC - plan| {worst:.2e} (limit 1e-4), \
             {unconverged} unconverged, {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
    }
}

fn criterion_4() -> Verdict {
    let t0 = Instant::now();
    let bench = generate(&BenchConfig { n_src: 20, n_tgt: 5, n_probes: 1, ..BenchConfig::default() }).unwrap();
    let weights = build_pair_weights(&bench.src, &bench.tgt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst, mut coords) = (0.0f64, 0usize);
    for k in 0..20 {
        let dims = Dims {
            d_o: bench.config.d_o,
            hidden: rng.random_range(2..12),
            d_z: rng.random_range(1..6),
            d_x: 2,
            d_a: 2,
        };
        let mut params = ModelParams::init(dims, k);
        params.as_mut_slice().iter_mut().for_each(|w| *w *= rng.random_range(1.0..3.0));
        let n = rng.random_range(2..9);
        let sampler_cfg = SamplerConfig { batch_size: n, seed: k, ..SamplerConfig::default() };
        let sampler = Sampler::new(sampler_cfg, &bench.src, &bench.tgt, &weights).unwrap();
        let batch = sampler.batch_with(&mut rng).unwrap();
        let bc: Vec<Transition<'_>> = (0..rng.random_range(1..9))
            .map(|_| {
                let traj = &bench.src[rng.random_range(0..bench.src.len())];
                Transition::of(traj, rng.random_range(0..traj.len()))
            })
            .collect();
        let loss_cfg = LossConfig { lambda: rng.random_range(0.01..2.0), alpha1: rng.random_range(0.1..2.0), alpha2: 1.0 };
        let cost = batch_cost(&params, &batch, loss_cfg.alpha1, loss_cfg.alpha2).unwrap();
        let uot = UotConfig::new(rng.random_range(0.01..0.2), rng.random_range(0.01..1.0));
        let plan = sinkhorn_unbalanced(&cost, &Marginals::uniform(n, n), &uot).unwrap().plan;

        let frozen = |p: &ModelParams| {
            let c = batch_cost(p, &batch, loss_cfg.alpha1, loss_cfg.alpha2).unwrap();
            bc_loss(p, &bc).unwrap() + loss_cfg.lambda * transport_cost(&plan, &c).unwrap()
        };
        let (_, grads) =
            total_loss_and_grads(&params, &bc, Alignment::Uot { batch: &batch, plan: &plan }, &loss_cfg).unwrap();
        let h = 1e-5;
        for i in 0..params.as_slice().len() {
            let mut up = params.clone();
            up.as_mut_slice()[i] += h;
            let mut down = params.clone();
            down.as_mut_slice()[i] -= h;
            let fd = (frozen(&up) - frozen(&down)) / (2.0 * h);
            // Relative error with an absolute floor for coordinates whose
            // gradient vanishes.
            let err = (grads.as_slice()[i] - fd).abs() / fd.abs().max(1e-3);
            worst = worst.max(err);
            coords += 1;
        }
    }
    let elapsed = t0.elapsed();
    Verdict {
        id: 4,
        name: "model gradient check",
        pass: worst <= 1e-5 && within(elapsed, 20.0),
        detail: format!(
            "20 configurations, {coords} coordinates: max |g - fd| / max(|fd|, 1e-3) {worst:.2e} (limit 1e-5), \
             {:.1}s (limit 20s)",
            elapsed.as_secs_f64()
        ),
    }
}

/// Minimum accumulated cost over every monotone path, by recursion.
fn dtw_brute_force(x: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let step = x[i].iter().zip(&y[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if i + 1 == x.len() && j + 1 == y.len() {
        return step;
    }
    let mut best = f64::INFINITY;
    if i + 1 < x.len() {
        best = best.min(dtw_brute_force(x, y, i + 1, j));
    }
    if j + 1 < y.len() {
        best = best.min(dtw_brute_force(x, y, i, j + 1));
    }
    if i + 1 < x.len() && j + 1 < y.len() {
        best = best.min(dtw_brute_force(x, y, i + 1, j + 1));
    }
    step + best
}

fn criterion_5() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let seq = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        let len = rng.random_range(1..=6);
        (0..len).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
    };
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (x, y) = (seq(&mut rng), seq(&mut rng));
        let got = dtw(&x, &y).unwrap().distance;
        worst = worst.max((got - dtw_brute_force(&x, &y, 0, 0)).abs());
    }
    let half = weight_transform(0.01f64);
    Verdict {
        id: 5,
        name: "DTW exactness",
        pass: worst <= 1e-12 && half == 0.5,
        detail: format!(
            "500 pairs: max |dtw - enumeration| {worst:.2e}; weight_transform(0.01) = {half:?} (must be 0.5 exactly), {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
    }
}

fn criterion_6() -> Verdict {
    let t0 = Instant::now();
    let mut ratios = Vec::new();
    for seed in 0..3 {
        let bench = generate(&BenchConfig { seed, ..BenchConfig::default() }).unwrap();
        let weights = build_pair_weights(&bench.src, &bench.tgt).unwrap();
        let mean_distance = |mode| {
            let cfg = SamplerConfig { mode, seed, ..SamplerConfig::default() };
            let mut sampler = Sampler::new(cfg, &bench.src, &bench.tgt, &weights).unwrap();
            (0..100).map(|_| sampler.next_batch().unwrap().mean_proprio_distance()).sum::<f64>() / 100.0
        };
        ratios.push(mean_distance(SamplerMode::Ours) / mean_distance(SamplerMode::NoSampler));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let chi2 = ChiSquared::new(15.0).unwrap();
    let mut p_values = Vec::new();
    for _ in 0..5 {
        let w = Matrix::from_fn(4, 4, |_, _| rng.random_range(0.05..1.0));
        let total = w.sum();
        let table = PairWeights::from_weights(w.clone()).unwrap();
        let mut counts = [0usize; 16];
        let draws = 40_000;
        for _ in 0..draws {
            let (k, l) = sample_pair(&table, &mut rng).unwrap();
            counts[k * 4 + l] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(w.as_slice())
            .map(|(&o, &wi)| {
                let e = draws as f64 * wi / total;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        p_values.push(1.0 - chi2.cdf(stat));
    }
    let ratio_ok = ratios.iter().all(|&r| r < 0.5);
    let p_ok = p_values.iter().all(|&p| p > 0.001);
    Verdict {
        id: 6,
        name: "sampler efficacy",
        pass: ratio_ok && p_ok,
        detail: format!(
            "ours/no_sampler proprio distance per seed {:?} (limit < 0.5); chi-square p on 5 tables of 4x4, \
             40000 draws each: min {:.3} (limit > 0.001), {:.1}s",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            p_values.iter().copied().fold(f64::INFINITY, f64::min),
            t0.elapsed().as_secs_f64()
        ),
    }
}

fn criterion_7() -> Verdict {
    let bench = generate(&BenchConfig::default()).unwrap();
    let weights = build_pair_weights(&bench.src, &bench.tgt).unwrap();
    let timed = |cfg: TrainConfig| {
        let t0 = Instant::now();
        let log = train(&cfg, &bench, &weights).unwrap().log;
        (log, t0.elapsed())
    };
    let (cotrain, t_cotrain) = timed(TrainConfig { method: Method::Cotrain, ..TrainConfig::default() });
    let mut ours_cfg = TrainConfig { method: Method::Ours, lambda: 0.0, ..TrainConfig::default() };
    ours_cfg.sampler.mode = SamplerMode::NoSampler;
    let (ours, t_ours) = timed(ours_cfg);
    let (mmd, t_mmd) = timed(TrainConfig { method: Method::Mmd, lambda: 0.0, ..TrainConfig::default() });
    let same_ours = ours == cotrain && ours.to_csv_string() == cotrain.to_csv_string();
    let same_mmd = mmd == cotrain && mmd.to_csv_string() == cotrain.to_csv_string();
    let slowest = t_cotrain.max(t_ours).max(t_mmd);
    Verdict {
        id: 7,
        name: "method reduction identities",
        pass: same_ours && same_mmd && within(slowest, 60.0),
        detail: format!(
            "5000 steps: ours(lambda=0, no_sampler) == cotrain bitwise: {same_ours}; mmd(lambda=0) == cotrain bitwise: \
             {same_mmd}; slowest run {:.1}s (limit 60s)",
            slowest.as_secs_f64()
        ),
    }
}

/// Everything criteria 8 and 9 produce, kept for the determinism check.
struct EndToEnd {
    methods: BTreeMap<&'static str, Vec<SweepRow>>,
    scaling: Vec<SweepRow>,
    /// File name to CSV contents.
    csvs: BTreeMap<String, String>,
    /// Wall time of criterion 8, and of criterion 9 including the reused
    /// n_src = 200 runs.
    t8: Duration,
    t9: Duration,
}

const SEEDS_8: [u64; 5] = [0, 1, 2, 3, 4];
const SEEDS_9: [u64; 3] = [0, 1, 2];

fn run_sweep(
    axis: SweepAxis,
    method: Method,
    seeds: &[u64],
    csvs: &mut BTreeMap<String, String>,
) -> (Vec<SweepRow>, BTreeMap<u64, Duration>) {
    let train_cfg = TrainConfig { method, ..TrainConfig::default() };
    let mut durations = BTreeMap::new();
    let mut last = Instant::now();
    let rows = sweep(&axis, &BenchConfig::default(), &train_cfg, seeds, |row, outcome| {
        if let Some(out) = outcome {
            let name = format!("{}_{}_{}_seed{}.csv", method.name(), row.param, row.value, row.seed);
            csvs.insert(name, out.log.to_csv_string());
        }
        durations.insert(row.seed, last.elapsed());
        last = Instant::now();
    })
    .unwrap();
    let mut summary = Vec::new();
    write_sweep_csv(&rows, &mut summary).unwrap();
    csvs.insert(
        format!("{}_{}_summary.csv", method.name(), axis.name()),
        String::from_utf8(summary).unwrap(),
    );
    (rows, durations)
}

/// Criteria 8 and 9 share their `ours` runs at the default `n_src = 200`:
/// the scaling sweep at that grid point is the same configuration and seed.
fn end_to_end() -> EndToEnd {
    let mut csvs = BTreeMap::new();
    let mut methods = BTreeMap::new();
    let default_n = BenchConfig::default().n_src;
    let t0 = Instant::now();
    let mut ours_time = BTreeMap::new();
    for method in [Method::Ours, Method::Cotrain, Method::TargetOnly] {
        let (rows, durations) = run_sweep(SweepAxis::NSrc(vec![default_n]), method, &SEEDS_8, &mut csvs);
        if method == Method::Ours {
            ours_time = durations;
        }
        methods.insert(method.name(), rows);
    }
    let t8 = t0.elapsed();

    let t1 = Instant::now();
    let (mut scaling, _) = run_sweep(SweepAxis::NSrc(vec![50, 100]), Method::Ours, &SEEDS_9, &mut csvs);
    scaling.extend(methods["ours"].iter().filter(|r| SEEDS_9.contains(&r.seed)).cloned());
    let reused: Duration = SEEDS_9.iter().map(|s| ours_time[s]).sum();
    let t9 = t1.elapsed() + reused;
    EndToEnd { methods, scaling, csvs, t8, t9 }
}

fn criterion_8(e: &EndToEnd) -> Verdict {
    let by_seed = |m: &str| -> Vec<&SweepRow> { e.methods[m].iter().collect() };
    let (ours, cotrain, target) = (by_seed("ours"), by_seed("cotrain"), by_seed("target_only"));
    let mut table = String::new();
    let (mut align_wins, mut success_wins, mut target_low) = (0, 0, 0);
    for k in 0..SEEDS_8.len() {
        let (o, c, t) = (ours[k], cotrain[k], target[k]);
        align_wins += usize::from(o.align_err_ood < 0.5 * c.align_err_ood);
        success_wins += usize::from(o.success_rate_ood > c.success_rate_ood);
        target_low += usize::from(t.success_rate_ood < 0.2);
        table.push_str(&format!(
            "\n      seed {}: align_err_ood ours {:.5} cotrain {:.5} | success_rate_ood ours {:.2} cotrain {:.2} target_only {:.2}{}",
            o.seed,
            o.align_err_ood,
            c.align_err_ood,
            o.success_rate_ood,
            c.success_rate_ood,
            t.success_rate_ood,
            if o.error.is_empty() && c.error.is_empty() && t.error.is_empty() { "" } else { " (run error)" }
        ));
    }
    let n = SEEDS_8.len();
    Verdict {
        id: 8,
        name: "end-to-end alignment claim",
        pass: align_wins >= 4 && success_wins >= 4 && target_low == n && within(e.t8, 600.0),
        detail: format!(
            "align_err_ood(ours) < 0.5x cotrain in {align_wins}/{n} seeds (need 4); success_rate_ood(ours) > cotrain \
             in {success_wins}/{n} (need 4); success_rate_ood(target_only) < 0.2 in {target_low}/{n} (need {n}); \
             {:.0}s (limit 600s){table}",
            e.t8.as_secs_f64()
        ),
    }
}

fn criterion_9(e: &EndToEnd) -> Verdict {
    let grid = [50usize, 100, 200];
    let means: Vec<f64> = grid
        .iter()
        .map(|n| {
            let rows: Vec<&SweepRow> = e.scaling.iter().filter(|r| r.value == n.to_string()).collect();
            assert_eq!(rows.len(), SEEDS_9.len());
            rows.iter().map(|r| r.success_rate_ood).sum::<f64>() / rows.len() as f64
        })
        .collect();
    // Both adjacent steps plus the end-to-end comparison.
    let pairs = [(0, 1), (1, 2), (0, 2)];
    let ok = pairs.iter().filter(|&&(a, b)| means[b] >= means[a]).count();
    Verdict {
        id: 9,
        name: "scaling claim",
        pass: ok >= 2 && within(e.t9, 900.0),
        detail: format!(
            "mean success_rate_ood(ours) over seeds 0-2 at n_src 50/100/200: {:.3} / {:.3} / {:.3}; \
             non-decreasing in {ok}/3 comparisons (need 2); {:.0}s (limit 900s)",
            means[0],
            means[1],
            means[2],
            e.t9.as_secs_f64()
        ),
    }
}

fn criterion_10(first: &EndToEnd, second: &EndToEnd) -> Verdict {
    let differing: Vec<&String> = first
        .csvs
        .iter()
        .filter(|(name, text)| second.csvs.get(*name) != Some(text))
        .map(|(name, _)| name)
        .collect();
    let same_set = first.csvs.len() == second.csvs.len();
    Verdict {
        id: 10,
        name: "determinism",
        pass: differing.is_empty() && same_set,
        detail: format!(
            "re-ran criteria 8-9: {} CSVs compared, {} differ{}",
            first.csvs.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {differing:?}") }
        ),
    }
}

fn print(v: &Verdict, hard: bool) {
    let tag = match (v.pass, hard) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (reported)",
    };
    println!("[{tag}] criterion {} {}: {}", v.id, v.name, v.detail);
}

fn main() -> ExitCode {
    let fast = std::env::var("UOT_ACCEPTANCE_FAST").is_ok_and(|v| v == "1");
    let mut hard_failures = 0;
    let mut report = |v: Verdict, hard: bool| {
        print(&v, hard);
        if hard && !v.pass {
            hard_failures += 1;
        }
    };
    report(criterion_1(), true);
    report(criterion_2(), true);
    report(criterion_3(), true);
    report(criterion_4(), true);
    report(criterion_5(), true);
    report(criterion_6(), true);
    report(criterion_7(), true);
    if fast {
        println!("[SKIP] criteria 8-10: UOT_ACCEPTANCE_FAST=1");
    } else {
        let first = end_to_end();
        report(criterion_8(&first), false);
        report(criterion_9(&first), false);
        let second = end_to_end();
        report(criterion_10(&first, &second), true);
    }
    if hard_failures > 0 {
        println!("acceptance: {hard_failures} contract criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all contract criteria passed");
        ExitCode::SUCCESS
    }
}
