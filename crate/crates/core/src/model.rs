//! Encoder `o → tanh → z`, affine policy `(z ⊕ x) → a`, their losses with
//! closed-form gradients, and Adam.
//!
//! All parameters live in one flat buffer so the optimizer and finite
//! difference checks can treat them uniformly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{CostMatrix, Matrix};
use crate::sampler::{PairedBatch, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_o: usize,
    pub hidden: usize,
    pub d_z: usize,
    pub d_x: usize,
    pub d_a: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { d_o: 16, hidden: 32, d_z: 8, d_x: 2, d_a: 2 }
    }
}

/// Tensor names, shapes and flat offsets, in storage order.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    len: usize,
}

impl Dims {
    fn layout(&self) -> Layout {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.d_o;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.d_z * self.hidden;
        let wp = b2 + self.d_z;
        let bp = wp + self.d_a * (self.d_z + self.d_x);
        Layout { w1, b1, w2, b2, wp, bp, len: bp + self.d_a }
    }

    pub fn num_params(&self) -> usize {
        self.layout().len
    }

    fn tensors(&self) -> [(&'static str, usize, usize); 6] {
        let l = self.layout();
        [
            ("w1", l.w1, l.b1),
            ("b1", l.b1, l.w2),
            ("w2", l.w2, l.b2),
            ("b2", l.b2, l.wp),
            ("wp", l.wp, l.bp),
            ("bp", l.bp, l.len),
        ]
    }
}

/// Encoder and policy parameters; also used for their gradients.
///
/// `w1` is `hidden × d_o`, `w2` is `d_z × hidden`, `wp` is
/// `d_a × (d_z + d_x)`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: Dims,
    data: Vec<f64>,
}

struct View<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    wp: &'a [f64],
    bp: &'a [f64],
}

struct ViewMut<'a> {
    w1: &'a mut [f64],
    b1: &'a mut [f64],
    w2: &'a mut [f64],
    b2: &'a mut [f64],
    wp: &'a mut [f64],
    bp: &'a mut [f64],
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.num_params()] }
    }

    /// Weights and biases uniform in `±1/√fan_in` of their layer.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        let fan_in = [dims.d_o, dims.d_o, dims.hidden, dims.hidden, dims.d_z + dims.d_x, dims.d_z + dims.d_x];
        for ((_, lo, hi), fan) in dims.tensors().into_iter().zip(fan_in) {
            let bound = 1.0 / (fan as f64).sqrt();
            for v in &mut p.data[lo..hi] {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_flat(dims: Dims, data: Vec<f64>) -> Result<Self> {
        ensure_dim("parameter count", dims.num_params(), data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Named copies of each tensor.
    pub fn tensors(&self) -> BTreeMap<String, Vec<f64>> {
        self.dims
            .tensors()
            .into_iter()
            .map(|(name, lo, hi)| (name.to_string(), self.data[lo..hi].to_vec()))
            .collect()
    }

    pub fn from_tensors(dims: Dims, tensors: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.num_params());
        for (name, lo, hi) in dims.tensors() {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Parse(format!("checkpoint is missing tensor {name}")))?;
            ensure_dim("checkpoint tensor", hi - lo, t.len())?;
            data.extend_from_slice(t);
        }
        Self::from_flat(dims, data)
    }

    fn view(&self) -> View<'_> {
        let l = self.dims.layout();
        let d = &self.data;
        View {
            w1: &d[l.w1..l.b1],
            b1: &d[l.b1..l.w2],
            w2: &d[l.w2..l.b2],
            b2: &d[l.b2..l.wp],
            wp: &d[l.wp..l.bp],
            bp: &d[l.bp..l.len],
        }
    }

    fn view_mut(&mut self) -> ViewMut<'_> {
        let l = self.dims.layout();
        let (w1, rest) = self.data.split_at_mut(l.b1);
        let (b1, rest) = rest.split_at_mut(l.w2 - l.b1);
        let (w2, rest) = rest.split_at_mut(l.b2 - l.w2);
        let (b2, rest) = rest.split_at_mut(l.wp - l.b2);
        let (wp, bp) = rest.split_at_mut(l.bp - l.wp);
        ViewMut { w1, b1, w2, b2, wp, bp }
    }

    /// Builds parameters from explicit row-major tensors.
    #[allow(clippy::too_many_arguments)]
    pub fn with_tensors(
        dims: Dims,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
        wp: &[f64],
        bp: &[f64],
    ) -> Result<Self> {
        for ((name, lo, hi), t) in dims.tensors().into_iter().zip([w1, b1, w2, b2, wp, bp]) {
            ensure_dim(name, hi - lo, t.len())?;
        }
        Self::from_flat(dims, [w1, b1, w2, b2, wp, bp].concat())
    }
}

/// Encoder activations kept for backprop.
#[derive(Debug, Clone)]
struct Trace {
    hidden: Vec<f64>,
    z: Vec<f64>,
}

fn encode_trace(v: &View<'_>, dims: Dims, o: &[f64]) -> Trace {
    let hidden: Vec<f64> = (0..dims.hidden)
        .map(|r| {
            let row = &v.w1[r * dims.d_o..(r + 1) * dims.d_o];
            (row.iter().zip(o).map(|(w, x)| w * x).sum::<f64>() + v.b1[r]).tanh()
        })
        .collect();
    let z = (0..dims.d_z)
        .map(|r| {
            let row = &v.w2[r * dims.hidden..(r + 1) * dims.hidden];
            row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + v.b2[r]
        })
        .collect();
    Trace { hidden, z }
}

fn policy(v: &View<'_>, dims: Dims, z: &[f64], x: &[f64]) -> Vec<f64> {
    let width = dims.d_z + dims.d_x;
    (0..dims.d_a)
        .map(|r| {
            let row = &v.wp[r * width..(r + 1) * width];
            let zpart: f64 = row[..dims.d_z].iter().zip(z).map(|(w, a)| w * a).sum();
            let xpart: f64 = row[dims.d_z..].iter().zip(x).map(|(w, a)| w * a).sum();
            zpart + xpart + v.bp[r]
        })
        .collect()
}

/// Accumulates encoder gradients for upstream `dz`.
fn backprop_encoder(v: &View<'_>, g: &mut ViewMut<'_>, dims: Dims, o: &[f64], tr: &Trace, dz: &[f64]) {
    let mut dpre = vec![0.0; dims.hidden];
    for (r, &d) in dz.iter().enumerate() {
        g.b2[r] += d;
        let row = r * dims.hidden;
        for (c, h) in tr.hidden.iter().enumerate() {
            g.w2[row + c] += d * h;
            dpre[c] += v.w2[row + c] * d;
        }
    }
    for (c, h) in tr.hidden.iter().enumerate() {
        let d = dpre[c] * (1.0 - h * h);
        g.b1[c] += d;
        let row = c * dims.d_o;
        for (k, x) in o.iter().enumerate() {
            g.w1[row + k] += d * x;
        }
    }
}

fn check_obs(dims: Dims, o: &[f64]) -> Result<()> {
    ensure_dim("observation", dims.d_o, o.len())
}

/// `z = W2 tanh(W1 o + b1) + b2`.
pub fn encode(params: &ModelParams, o: &[f64]) -> Result<Vec<f64>> {
    check_obs(params.dims, o)?;
    Ok(encode_trace(&params.view(), params.dims, o).z)
}

/// `a = Wp (z ⊕ x) + bp`.
pub fn policy_forward(params: &ModelParams, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    ensure_dim("latent", params.dims.d_z, z.len())?;
    ensure_dim("proprio", params.dims.d_x, x.len())?;
    Ok(policy(&params.view(), params.dims, z, x))
}

/// Action predicted from an observation and proprio.
pub fn act(params: &ModelParams, o: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let z = encode(params, o)?;
    policy_forward(params, &z, x)
}

fn check_transition(dims: Dims, t: &Transition<'_>) -> Result<()> {
    check_obs(dims, t.obs)?;
    ensure_dim("proprio", dims.d_x, t.proprio.len())?;
    ensure_dim("action", dims.d_a, t.action.len())
}

/// Mean squared action error over the batch.
pub fn bc_loss(params: &ModelParams, batch: &[Transition<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("BC batch"));
    }
    let v = params.view();
    let mut total = 0.0;
    for t in batch {
        check_transition(params.dims, t)?;
        let z = encode_trace(&v, params.dims, t.obs).z;
        let a = policy(&v, params.dims, &z, t.proprio);
        total += a.iter().zip(t.action).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Linear MMD: squared distance between the latent means.
pub fn mmd_loss(z_src: &[Vec<f64>], z_tgt: &[Vec<f64>]) -> Result<f64> {
    if z_src.is_empty() || z_tgt.is_empty() {
        return Err(Error::Empty("MMD latent batch"));
    }
    crate::geometry::sq_euclid(&mean(z_src), &mean(z_tgt))
}

/// Alignment term added to behaviour cloning.
#[derive(Debug, Clone, Copy)]
pub enum Alignment<'b, 'a> {
    None,
    /// `⟨Π, Ĉ⟩` with the plan held fixed.
    Uot { batch: &'b PairedBatch<'a>, plan: &'b Matrix<f64> },
    /// Linear MMD between the latents of two observation sets.
    Mmd { src: &'b [Transition<'a>], tgt: &'b [Transition<'a>] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 0.1, alpha1: 1.0, alpha2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub bc: f64,
    pub uot: f64,
    pub mmd: f64,
    pub total: f64,
}

/// Joint ground cost between the two sides of a paired batch under the
/// current encoder.
pub fn batch_cost(
    params: &ModelParams,
    batch: &PairedBatch<'_>,
    alpha1: f64,
    alpha2: f64,
) -> Result<CostMatrix<f64>> {
    let v = params.view();
    let enc = |ts: &[Transition<'_>]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut zs = Vec::with_capacity(ts.len());
        let mut xs = Vec::with_capacity(ts.len());
        for t in ts {
            check_obs(params.dims, t.obs)?;
            zs.push(encode_trace(&v, params.dims, t.obs).z);
            xs.push(t.proprio.to_vec());
        }
        Ok((zs, xs))
    };
    let (zs, xs) = enc(&batch.src)?;
    let (zt, xt) = enc(&batch.tgt)?;
    Ok(crate::geometry::joint_cost_matrix(&zs, &xs, &zt, &xt, alpha1, alpha2)?)
}

/// Loss `bc + λ·align` and its gradient. The transport plan is treated as
/// a constant, so the UOT gradient only reaches the encoder through the
/// latent part of the cost.
pub fn total_loss_and_grads(
    params: &ModelParams,
    bc_batch: &[Transition<'_>],
    align: Alignment<'_, '_>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, ModelParams)> {
    if bc_batch.is_empty() {
        return Err(Error::Empty("BC batch"));
    }
    let dims = params.dims;
    let v = params.view();
    let mut grads = ModelParams::zeros(dims);
    let mut out = LossBreakdown::default();
    {
        let mut g = grads.view_mut();
        let width = dims.d_z + dims.d_x;
        let scale = 2.0 / bc_batch.len() as f64;
        let mut bc = 0.0;
        for t in bc_batch {
            check_transition(dims, t)?;
            let tr = encode_trace(&v, dims, t.obs);
            let a = policy(&v, dims, &tr.z, t.proprio);
            let mut dz = vec![0.0; dims.d_z];
            for (r, (p, y)) in a.iter().zip(t.action).enumerate() {
                let res = p - y;
                bc += res * res;
                let da = scale * res;
                g.bp[r] += da;
                let row = r * width;
                for (c, zc) in tr.z.iter().enumerate() {
                    g.wp[row + c] += da * zc;
                    dz[c] += v.wp[row + c] * da;
                }
                for (c, xc) in t.proprio.iter().enumerate() {
                    g.wp[row + dims.d_z + c] += da * xc;
                }
            }
            backprop_encoder(&v, &mut g, dims, t.obs, &tr, &dz);
        }
        out.bc = bc / bc_batch.len() as f64;

        match align {
            Alignment::None => {}
            Alignment::Uot { batch, plan } => {
                let (n, m) = (batch.src.len(), batch.tgt.len());
                ensure_dim("plan rows", n, plan.rows())?;
                ensure_dim("plan cols", m, plan.cols())?;
                let trace_all = |ts: &[Transition<'_>]| -> Result<Vec<Trace>> {
                    ts.iter()
                        .map(|t| {
                            check_obs(dims, t.obs)?;
                            Ok(encode_trace(&v, dims, t.obs))
                        })
                        .collect()
                };
                let ts = trace_all(&batch.src)?;
                let tt = trace_all(&batch.tgt)?;
                let mut dzs = vec![vec![0.0; dims.d_z]; n];
                let mut dzt = vec![vec![0.0; dims.d_z]; m];
                let mut cost = 0.0;
                let coef = 2.0 * cfg.lambda * cfg.alpha1;
                for i in 0..n {
                    let prow = plan.row(i);
                    for j in 0..m {
                        let pij = prow[j];
                        if pij == 0.0 {
                            continue;
                        }
                        let mut dz2 = 0.0;
                        for c in 0..dims.d_z {
                            let diff = ts[i].z[c] - tt[j].z[c];
                            dz2 += diff * diff;
                            dzs[i][c] += coef * pij * diff;
                            dzt[j][c] -= coef * pij * diff;
                        }
                        let dx2 = crate::geometry::sq_euclid_unchecked(batch.src[i].proprio, batch.tgt[j].proprio);
                        cost += pij * (cfg.alpha1 * dz2 + cfg.alpha2 * dx2);
                    }
                }
                out.uot = cost;
                for (k, t) in batch.src.iter().enumerate() {
                    backprop_encoder(&v, &mut g, dims, t.obs, &ts[k], &dzs[k]);
                }
                for (k, t) in batch.tgt.iter().enumerate() {
                    backprop_encoder(&v, &mut g, dims, t.obs, &tt[k], &dzt[k]);
                }
            }
            Alignment::Mmd { src, tgt } => {
                if src.is_empty() || tgt.is_empty() {
                    return Err(Error::Empty("MMD batch"));
                }
                let trace_all = |ts: &[Transition<'_>]| -> Vec<Trace> {
                    ts.iter().map(|t| encode_trace(&v, dims, t.obs)).collect()
                };
                let ts = trace_all(src);
                let tt = trace_all(tgt);
                let zs: Vec<Vec<f64>> = ts.iter().map(|t| t.z.clone()).collect();
                let zt: Vec<Vec<f64>> = tt.iter().map(|t| t.z.clone()).collect();
                let diff: Vec<f64> = mean(&zs).iter().zip(mean(&zt)).map(|(a, b)| a - b).collect();
                out.mmd = diff.iter().map(|d| d * d).sum();
                let ds: Vec<f64> = diff.iter().map(|d| 2.0 * cfg.lambda * d / src.len() as f64).collect();
                let dt: Vec<f64> = diff.iter().map(|d| -2.0 * cfg.lambda * d / tgt.len() as f64).collect();
                for (t, tr) in src.iter().zip(&ts) {
                    backprop_encoder(&v, &mut g, dims, t.obs, tr, &ds);
                }
                for (t, tr) in tgt.iter().zip(&tt) {
                    backprop_encoder(&v, &mut g, dims, t.obs, tr, &dt);
                }
            }
        }
    }
    out.total = out.bc + cfg.lambda * (out.uot + out.mmd);
    if !out.total.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite("loss or gradient"));
    }
    Ok((out, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.data.len();
    ensure_dim("gradient size", n, grads.data.len())?;
    ensure_dim("adam first moment", n, state.m.len())?;
    ensure_dim("adam second moment", n, state.v.len())?;
    state.step += 1;
    let c1 = 1.0 - cfg.beta1.powf(state.step as f64);
    let c2 = 1.0 - cfg.beta2.powf(state.step as f64);
    for k in 0..n {
        let g = grads.data[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params.data[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// On-disk model: dimensions, named tensors and optional optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub dims: Dims,
    pub tensors: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, optimizer: Option<AdamState>) -> Self {
        Self { dims: params.dims, tensors: params.tensors(), optimizer }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::from_tensors(self.dims, &self.tensors)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        ck.params()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests;
