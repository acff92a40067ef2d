use super::*;
use rand::Rng;
use crate::sampler::Provenance;
use proptest::prelude::*;

const TINY: Dims = Dims { d_o: 1, hidden: 1, d_z: 1, d_x: 1, d_a: 1 };

/// Owned `(o, x, a)` storage for building borrowed batches.
struct Owned {
    obs: Vec<Vec<f64>>,
    proprio: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

impl Owned {
    fn random(dims: Dims, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut vecs = |d: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
        };
        Self { obs: vecs(dims.d_o), proprio: vecs(dims.d_x), actions: vecs(dims.d_a) }
    }

    fn batch(&self) -> Vec<Transition<'_>> {
        (0..self.obs.len())
            .map(|k| Transition { obs: &self.obs[k], proprio: &self.proprio[k], action: &self.actions[k] })
            .collect()
    }
}

fn paired<'a>(src: &'a Owned, tgt: &'a Owned) -> PairedBatch<'a> {
    let provenance = (0..src.obs.len())
        .map(|k| Provenance { src_traj: k, src_t: 0, tgt_traj: k, tgt_t: 0 })
        .collect();
    PairedBatch { src: src.batch(), tgt: tgt.batch(), provenance }
}

#[test]
fn encode_examples() {
    let dims = Dims { d_o: 3, hidden: 4, d_z: 2, d_x: 2, d_a: 2 };
    let zero = ModelParams::zeros(dims);
    assert_eq!(encode(&zero, &[0.3, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);

    let mut bias = ModelParams::zeros(dims);
    let l = dims.layout();
    bias.as_mut_slice()[l.b2..l.wp].copy_from_slice(&[0.7, -0.2]);
    assert_eq!(encode(&bias, &[5.0, 5.0, 5.0]).unwrap(), vec![0.7, -0.2]);

    let p = ModelParams::with_tensors(TINY, &[1.0], &[0.0], &[2.0], &[0.0], &[0.0, 0.0], &[0.0]).unwrap();
    let z = encode(&p, &[0.5]).unwrap();
    assert!((z[0] - 0.924_234_314_520_019_5).abs() < 1e-12);
    assert_eq!(z, encode(&p, &[0.5]).unwrap());

    assert!(encode(&zero, &[1.0]).is_err());
}

#[test]
fn policy_examples() {
    let dims = Dims { d_o: 2, hidden: 2, d_z: 2, d_x: 2, d_a: 2 };
    let zero = ModelParams::zeros(dims);
    assert_eq!(policy_forward(&zero, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![0.0, 0.0]);

    let mut proj = ModelParams::zeros(dims);
    let l = dims.layout();
    // Rows of wp are [z0 z1 x0 x1].
    proj.as_mut_slice()[l.wp..l.bp].copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    assert_eq!(policy_forward(&proj, &[1.5, -2.5], &[3.0, 4.0]).unwrap(), vec![1.5, -2.5]);

    let p = ModelParams::with_tensors(TINY, &[0.0], &[0.0], &[0.0], &[0.0], &[1.0, 1.0], &[0.0]).unwrap();
    assert_eq!(policy_forward(&p, &[0.2], &[0.3]).unwrap(), vec![0.5]);
    assert!(policy_forward(&p, &[0.2, 0.1], &[0.3]).is_err());
}

#[test]
fn bc_loss_examples() {
    let zero = ModelParams::zeros(TINY);
    let ones = Owned { obs: vec![vec![0.4]; 3], proprio: vec![vec![-0.1]; 3], actions: vec![vec![1.0]; 3] };
    assert_eq!(bc_loss(&zero, &ones.batch()).unwrap(), 1.0);

    // a = x, so residual = x − label.
    let ident = ModelParams::with_tensors(TINY, &[0.0], &[0.0], &[0.0], &[0.0], &[0.0, 1.0], &[0.0]).unwrap();
    let two = Owned { obs: vec![vec![0.0]; 2], proprio: vec![vec![1.0], vec![3.0]], actions: vec![vec![0.0]; 2] };
    assert_eq!(bc_loss(&ident, &two.batch()).unwrap(), 5.0);
    let exact = Owned { obs: vec![vec![0.0]; 2], proprio: vec![vec![1.0], vec![3.0]], actions: vec![vec![1.0], vec![3.0]] };
    assert_eq!(bc_loss(&ident, &exact.batch()).unwrap(), 0.0);
    assert!(bc_loss(&ident, &[]).is_err());
}

#[test]
fn mmd_examples() {
    let a = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
    assert_eq!(mmd_loss(&a, &a).unwrap(), 0.0);
    assert_eq!(mmd_loss(&[vec![1.0]], &[vec![3.0]]).unwrap(), 4.0);
    let b = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let mut a_perm = a.clone();
    a_perm.rotate_left(1);
    let base = mmd_loss(&a, &b).unwrap();
    assert!((mmd_loss(&a_perm, &b).unwrap() - base).abs() < 1e-15);
    assert!(base >= 0.0);
    assert!(mmd_loss(&[], &b).is_err());
}

fn random_problem(seed: u64) -> (ModelParams, Owned, Owned, Owned, Matrix<f64>, LossConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        d_o: rng.random_range(1..5),
        hidden: rng.random_range(1..6),
        d_z: rng.random_range(1..4),
        d_x: 2,
        d_a: rng.random_range(1..3),
    };
    let mut params = ModelParams::init(dims, seed);
    // Larger weights push tanh out of its linear regime.
    params.as_mut_slice().iter_mut().for_each(|w| *w *= 2.0);
    let bc = Owned::random(dims, rng.random_range(1..6), &mut rng);
    let n = rng.random_range(1..5);
    let src = Owned::random(dims, n, &mut rng);
    let tgt = Owned::random(dims, n, &mut rng);
    let plan = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..0.3));
    let cfg = LossConfig { lambda: rng.random_range(0.0..2.0), alpha1: rng.random_range(0.1..2.0), alpha2: 1.0 };
    (params, bc, src, tgt, plan, cfg)
}

fn frozen_loss(params: &ModelParams, bc: &[Transition<'_>], batch: &PairedBatch<'_>, plan: &Matrix<f64>, cfg: &LossConfig) -> f64 {
    let cost = batch_cost(params, batch, cfg.alpha1, cfg.alpha2).unwrap();
    bc_loss(params, bc).unwrap() + cfg.lambda * crate::ot::transport_cost(plan, &cost).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..20 {
        let (params, bc, src, tgt, plan, cfg) = random_problem(seed);
        let bc = bc.batch();
        let batch = paired(&src, &tgt);
        let (loss, grads) = total_loss_and_grads(&params, &bc, Alignment::Uot { batch: &batch, plan: &plan }, &cfg).unwrap();
        assert!((loss.total - frozen_loss(&params, &bc, &batch, &plan, &cfg)).abs() < 1e-12);
        let h = 1e-5;
        for k in 0..params.as_slice().len() {
            let mut up = params.clone();
            up.as_mut_slice()[k] += h;
            let mut down = params.clone();
            down.as_mut_slice()[k] -= h;
            let fd = (frozen_loss(&up, &bc, &batch, &plan, &cfg) - frozen_loss(&down, &bc, &batch, &plan, &cfg)) / (2.0 * h);
            let g = grads.as_slice()[k];
            assert!((g - fd).abs() <= 1e-8 + 1e-5 * fd.abs(), "seed {seed} coord {k}: {g} vs {fd}");
        }
    }
}

#[test]
fn mmd_gradients_match_central_differences() {
    for seed in 0..10 {
        let (params, bc, src, tgt, _, cfg) = random_problem(seed);
        let bc = bc.batch();
        let (s, t) = (src.batch(), tgt.batch());
        let (_, grads) = total_loss_and_grads(&params, &bc, Alignment::Mmd { src: &s, tgt: &t }, &cfg).unwrap();
        let f = |p: &ModelParams| {
            let z = |b: &[Transition<'_>]| b.iter().map(|x| encode(p, x.obs).unwrap()).collect::<Vec<_>>();
            bc_loss(p, &bc).unwrap() + cfg.lambda * mmd_loss(&z(&s), &z(&t)).unwrap()
        };
        let h = 1e-5;
        for k in 0..params.as_slice().len() {
            let mut up = params.clone();
            up.as_mut_slice()[k] += h;
            let mut down = params.clone();
            down.as_mut_slice()[k] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            let g = grads.as_slice()[k];
            assert!((g - fd).abs() <= 1e-8 + 1e-5 * fd.abs(), "seed {seed} coord {k}: {g} vs {fd}");
        }
    }
}

#[test]
fn zero_lambda_and_empty_plan_reduce_to_bc() {
    let (params, bc, src, tgt, plan, cfg) = random_problem(4);
    let bc = bc.batch();
    let batch = paired(&src, &tgt);
    let (_, pure) = total_loss_and_grads(&params, &bc, Alignment::None, &cfg).unwrap();
    let no_lambda = LossConfig { lambda: 0.0, ..cfg };
    let (_, g0) = total_loss_and_grads(&params, &bc, Alignment::Uot { batch: &batch, plan: &plan }, &no_lambda).unwrap();
    assert_eq!(g0, pure);
    let empty = Matrix::zeros(plan.rows(), plan.cols());
    let (loss, ge) = total_loss_and_grads(&params, &bc, Alignment::Uot { batch: &batch, plan: &empty }, &cfg).unwrap();
    assert_eq!(ge, pure);
    assert_eq!(loss.uot, 0.0);
    let wrong = Matrix::zeros(plan.rows() + 1, plan.cols());
    assert!(total_loss_and_grads(&params, &bc, Alignment::Uot { batch: &batch, plan: &wrong }, &cfg).is_err());
}

#[test]
fn adam_examples() {
    let dims = TINY;
    let mut p = ModelParams::init(dims, 1);
    let before = p.clone();
    let mut state = AdamState::new(dims.num_params());
    state.m.iter_mut().for_each(|m| *m = 0.5);
    state.v.iter_mut().for_each(|v| *v = 0.25);
    let cfg = AdamConfig { lr: 0.0, ..AdamConfig::default() };
    adam_step(&mut p, &ModelParams::zeros(dims), &mut state, &cfg).unwrap();
    assert_eq!(p, before);
    assert!(state.m.iter().all(|&m| (m - 0.45).abs() < 1e-15));
    assert!(state.v.iter().all(|&v| (v - 0.24975).abs() < 1e-15));

    // First step: m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + eps).
    let mut p = ModelParams::zeros(dims);
    let g = ModelParams::from_flat(dims, vec![0.5, -2.0, 1e-3, 3.0, -0.25, 7.0, -1e-4]).unwrap();
    let mut state = AdamState::new(dims.num_params());
    let cfg = AdamConfig::default();
    adam_step(&mut p, &g, &mut state, &cfg).unwrap();
    for (x, gk) in p.as_slice().iter().zip(g.as_slice()) {
        let expect = -1e-3 * gk / (gk.abs() + 1e-8);
        assert!((x - expect).abs() < 1e-15, "{x} vs {expect}");
    }
    assert!(adam_step(&mut p, &ModelParams::zeros(Dims::default()), &mut state, &cfg).is_err());
}

#[test]
fn init_is_seeded_and_bounded() {
    let dims = Dims::default();
    let a = ModelParams::init(dims, 7);
    assert_eq!(a, ModelParams::init(dims, 7));
    assert_ne!(a, ModelParams::init(dims, 8));
    let w1_bound = 1.0 / (dims.d_o as f64).sqrt();
    let t = a.tensors();
    assert!(t["w1"].iter().all(|w| w.abs() <= w1_bound));
    assert!(t["wp"].iter().all(|w| w.abs() <= 1.0 / 10f64.sqrt()));
}

#[test]
fn checkpoint_round_trip() {
    let p = ModelParams::init(Dims::default(), 3);
    let ck = Checkpoint::new(&p, Some(AdamState::new(p.as_slice().len())));
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.params().unwrap(), p);
    let mut broken = ck.clone();
    broken.tensors.remove("b1");
    assert!(broken.params().is_err());
}

proptest! {
    #[test]
    fn mmd_is_nonnegative_and_permutation_invariant(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8),
        other in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8),
    ) {
        let base = mmd_loss(&rows, &other).unwrap();
        prop_assert!(base >= 0.0);
        let mut rev = rows.clone();
        rev.reverse();
        prop_assert!((mmd_loss(&rev, &other).unwrap() - base).abs() <= 1e-12 * (1.0 + base));
    }
}
