//! Joint autoencoder over adjacency and attribute rows.
//!
//! Two encoders embed a node's adjacency row and attribute row separately;
//! their concatenation passes through a joint encoder to the latent space,
//! and twin decoders reconstruct both rows from the latent vector. The
//! training loss combines attention-weighted reconstruction error with a
//! similarity term that ties exp(−λ·latent distance) to the pairwise Jaccard
//! distances of the input rows, plus L2 weight regularization. Gradients are
//! computed analytically, including through the pairwise-distance terms.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BinaryAttributedGraph, NodeSubset};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::seeding;
use crate::similarity::{jaccard_row_distance, pairwise_euclidean, pairwise_jaccard};

/// Layer sizes of the five affine maps. Each encoder/decoder is a single
/// affine layer: adjacency encoder n→hidden_a (rectified), attribute encoder
/// d→hidden_x (rectified), joint encoder (hidden_a+hidden_x)→latent_dim
/// (identity), decoders latent_dim→n and latent_dim→d (logistic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n: usize,
    pub d: usize,
    pub hidden_a: usize,
    pub hidden_x: usize,
    pub latent_dim: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParameter(
                "graph dimensions must be positive".into(),
            ));
        }
        if self.hidden_a == 0 || self.hidden_x == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidParameter(
                "layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn joint_dim(&self) -> usize {
        self.hidden_a + self.hidden_x
    }
}

/// One affine layer: `y = x·weight + bias`, weight is in×out row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<S> {
    pub weight: DenseMatrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Affine<S> {
    fn zeros(input: usize, output: usize) -> Self {
        Affine {
            weight: DenseMatrix::zeros(input, output),
            bias: vec![S::zero(); output],
        }
    }

    fn apply(&self, input: &DenseMatrix<S>) -> DenseMatrix<S> {
        let mut out = input.matmul(&self.weight);
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(self.bias.iter()) {
                *o += b;
            }
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// All weights and biases of the five-layer model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub arch: Architecture,
    pub enc_a: Affine<S>,
    pub enc_x: Affine<S>,
    pub enc_joint: Affine<S>,
    pub dec_a: Affine<S>,
    pub dec_x: Affine<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(ModelParams {
            arch,
            enc_a: Affine::zeros(arch.n, arch.hidden_a),
            enc_x: Affine::zeros(arch.d, arch.hidden_x),
            enc_joint: Affine::zeros(arch.joint_dim(), arch.latent_dim),
            dec_a: Affine::zeros(arch.latent_dim, arch.n),
            dec_x: Affine::zeros(arch.latent_dim, arch.d),
        })
    }

    pub fn layers(&self) -> [&Affine<S>; 5] {
        [
            &self.enc_a,
            &self.enc_x,
            &self.enc_joint,
            &self.dec_a,
            &self.dec_x,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Affine<S>; 5] {
        [
            &mut self.enc_a,
            &mut self.enc_x,
            &mut self.enc_joint,
            &mut self.dec_a,
            &mut self.dec_x,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.is_finite())
    }

    /// `self += factor · other`, layer by layer.
    pub fn add_scaled(&mut self, other: &ModelParams<S>, factor: S) {
        let others = other.layers();
        for (layer, other_layer) in self.layers_mut().into_iter().zip(others) {
            layer.weight.add_scaled(&other_layer.weight, factor);
            for (b, &ob) in layer.bias.iter_mut().zip(other_layer.bias.iter()) {
                *b += factor * ob;
            }
        }
    }
}

/// Loss weights and the similarity/attention hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_a: f64,
    pub w_x: f64,
    pub w_recon: f64,
    pub w_sim: f64,
    pub lambda: f64,
    pub l2: f64,
    /// Reconstruction attention: entries whose target is 1 are weighted by
    /// this factor, all others by 1.
    pub attention_beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_a: 1.0,
            w_x: 1.0,
            w_recon: 1.0,
            w_sim: 1.0,
            lambda: 1.0,
            l2: 1e-4,
            attention_beta: 5.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("w_a", self.w_a),
            ("w_x", self.w_x),
            ("w_recon", self.w_recon),
            ("w_sim", self.w_sim),
            ("lambda", self.lambda),
            ("l2", self.l2),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.attention_beta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "attention_beta must be >= 1, got {}",
                self.attention_beta
            )));
        }
        Ok(())
    }
}

/// How batch peers are drawn around the uniformly chosen anchor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Uniform,
    /// Peers drawn with probability proportional to
    /// (1 − Jaccard distance of adjacency rows to the anchor) + 0.01.
    SimilarityWeighted,
}

/// Training knobs. `epochs` counts gradient steps; each step trains on one
/// sampled batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub latent_dim: usize,
    pub hidden_a: usize,
    pub hidden_x: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 32,
            learning_rate: 5e-4,
            seed: 42,
            sampler: SamplerKind::SimilarityWeighted,
            latent_dim: 32,
            hidden_a: 128,
            hidden_x: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidParameter(
                "batch_size must be >= 2 (pairwise losses need pairs)".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.latent_dim == 0 || self.hidden_a == 0 || self.hidden_x == 0 {
            return Err(Error::InvalidParameter("layer sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn architecture(&self, n: usize, d: usize) -> Architecture {
        Architecture {
            n,
            d,
            hidden_a: self.hidden_a,
            hidden_x: self.hidden_x,
            latent_dim: self.latent_dim,
        }
    }
}

/// Per-node latent embedding; row i corresponds to node i of the source graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix<S> {
    pub h: DenseMatrix<S>,
}

impl<S: Scalar> LatentMatrix<S> {
    pub fn node_count(&self) -> usize {
        self.h.rows()
    }

    pub fn dim(&self) -> usize {
        self.h.cols()
    }
}

/// Decoder/latent outputs of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput<S> {
    pub latent: DenseMatrix<S>,
    pub a_hat: DenseMatrix<S>,
    pub x_hat: DenseMatrix<S>,
}

/// Loss value decomposed into its parts. `total` is exactly
/// `w_recon·(w_a·recon_a + w_x·recon_x) + w_sim·(w_a·sim_a + w_x·sim_x) + reg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<S> {
    pub recon_a: S,
    pub recon_x: S,
    pub sim_a: S,
    pub sim_x: S,
    pub reg: S,
    pub total: S,
}

/// A sampled training batch: the anchor plus its peers, as a sorted subset.
#[derive(Debug, Clone)]
pub struct BatchSample {
    pub anchor: usize,
    pub nodes: NodeSubset,
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub params: ModelParams<S>,
    pub latent: LatentMatrix<S>,
    pub loss_history: Vec<S>,
}

fn logistic<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

/// Weights drawn uniformly from [−√(3/fan_in), √(3/fan_in)] (variance
/// 1/fan_in), biases zero. Deterministic given the seed.
pub fn init_params<S: Scalar>(arch: Architecture, seed: u64) -> Result<ModelParams<S>> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, seeding::tags::WEIGHT_INIT));
    let mut params = ModelParams::zeros(arch)?;
    for layer in params.layers_mut() {
        let fan_in = layer.weight.rows();
        let bound = (3.0 / fan_in as f64).sqrt();
        for w in layer.weight.data_mut() {
            *w = S::from_f64_lossy(rng.random::<f64>() * 2.0 * bound - bound);
        }
    }
    Ok(params)
}

struct ForwardTrace<S> {
    hidden_a: DenseMatrix<S>,
    hidden_x: DenseMatrix<S>,
    joint: DenseMatrix<S>,
    latent: DenseMatrix<S>,
    a_hat: DenseMatrix<S>,
    x_hat: DenseMatrix<S>,
}

fn check_batch_dims<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
) -> Result<()> {
    if a_batch.rows() != x_batch.rows() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency batch has {} rows but attribute batch has {}",
            a_batch.rows(),
            x_batch.rows()
        )));
    }
    if a_batch.cols() != params.arch.n || x_batch.cols() != params.arch.d {
        return Err(Error::DimensionMismatch(format!(
            "batch is {}x{} / {}x{}, model expects n={}, d={}",
            a_batch.rows(),
            a_batch.cols(),
            x_batch.rows(),
            x_batch.cols(),
            params.arch.n,
            params.arch.d
        )));
    }
    Ok(())
}

struct EncodeTrace<S> {
    hidden_a: DenseMatrix<S>,
    hidden_x: DenseMatrix<S>,
    joint: DenseMatrix<S>,
    latent: DenseMatrix<S>,
}

fn encode_trace<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
) -> Result<EncodeTrace<S>> {
    check_batch_dims(params, a_batch, x_batch)?;
    let hidden_a = params.enc_a.apply(a_batch).map(|z| z.max(S::zero()));
    let hidden_x = params.enc_x.apply(x_batch).map(|z| z.max(S::zero()));

    let b = a_batch.rows();
    let mut joint = DenseMatrix::zeros(b, params.arch.joint_dim());
    for i in 0..b {
        let row = joint.row_mut(i);
        row[..params.arch.hidden_a].copy_from_slice(hidden_a.row(i));
        row[params.arch.hidden_a..].copy_from_slice(hidden_x.row(i));
    }

    let latent = params.enc_joint.apply(&joint);
    Ok(EncodeTrace {
        hidden_a,
        hidden_x,
        joint,
        latent,
    })
}

fn forward_trace<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
) -> Result<ForwardTrace<S>> {
    let encoded = encode_trace(params, a_batch, x_batch)?;
    let a_hat = params.dec_a.apply(&encoded.latent).map(logistic);
    let x_hat = params.dec_x.apply(&encoded.latent).map(logistic);
    Ok(ForwardTrace {
        hidden_a: encoded.hidden_a,
        hidden_x: encoded.hidden_x,
        joint: encoded.joint,
        latent: encoded.latent,
        a_hat,
        x_hat,
    })
}

/// Runs the encoders and decoders over a batch of adjacency/attribute rows.
/// Decoder outputs are squashed by a logistic, so they lie strictly in (0,1).
pub fn forward<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
) -> Result<ForwardOutput<S>> {
    let trace = forward_trace(params, a_batch, x_batch)?;
    Ok(ForwardOutput {
        latent: trace.latent,
        a_hat: trace.a_hat,
        x_hat: trace.x_hat,
    })
}

fn supports_from_dense<S: Scalar>(m: &DenseMatrix<S>) -> Vec<Vec<u32>> {
    let half = S::from_f64_lossy(0.5);
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > half)
                .map(|(j, _)| j as u32)
                .collect()
        })
        .collect()
}

/// Attention-weighted squared reconstruction error plus its gradient factor.
/// Returns (loss, 2·resid·w² entrywise matrix) for reuse in backprop.
fn recon_loss_and_factor<S: Scalar>(
    prediction: &DenseMatrix<S>,
    target: &DenseMatrix<S>,
    beta: S,
) -> (S, DenseMatrix<S>) {
    let mut factor = DenseMatrix::zeros(prediction.rows(), prediction.cols());
    let mut loss = S::zero();
    let half = S::from_f64_lossy(0.5);
    let two = S::from_f64_lossy(2.0);
    for i in 0..prediction.rows() {
        let p_row = prediction.row(i);
        let t_row = target.row(i);
        let f_row = factor.row_mut(i);
        for ((&p, &t), f) in p_row.iter().zip(t_row.iter()).zip(f_row.iter_mut()) {
            let w = if t > half { beta } else { S::one() };
            let weighted = (p - t) * w;
            loss += weighted * weighted;
            *f = two * (p - t) * w * w;
        }
    }
    (loss, factor)
}

struct SimEvaluation<S> {
    sim_a: S,
    sim_x: S,
    distances: DenseMatrix<S>,
    transformed: DenseMatrix<S>,
    jaccard_a: DenseMatrix<S>,
    jaccard_x: DenseMatrix<S>,
}

fn evaluate_similarity<S: Scalar>(
    latent: &DenseMatrix<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
    lambda: S,
) -> Result<SimEvaluation<S>> {
    let supports_a = supports_from_dense(a_batch);
    let supports_x = supports_from_dense(x_batch);
    let refs_a: Vec<&[u32]> = supports_a.iter().map(Vec::as_slice).collect();
    let refs_x: Vec<&[u32]> = supports_x.iter().map(Vec::as_slice).collect();
    let jaccard_a = pairwise_jaccard::<S>(&refs_a).values;
    let jaccard_x = pairwise_jaccard::<S>(&refs_x).values;
    let distances = pairwise_euclidean(latent)?.values;
    let transformed = distances.map(|d| (-lambda * d).exp());

    let mut sim_a = S::zero();
    let mut sim_x = S::zero();
    for (&e, (&ja, &jx)) in transformed
        .data()
        .iter()
        .zip(jaccard_a.data().iter().zip(jaccard_x.data().iter()))
    {
        let ra = e - ja;
        let rx = e - jx;
        sim_a += ra * ra;
        sim_x += rx * rx;
    }
    Ok(SimEvaluation {
        sim_a,
        sim_x,
        distances,
        transformed,
        jaccard_a,
        jaccard_x,
    })
}

fn regularization<S: Scalar>(params: &ModelParams<S>, l2: S) -> S {
    let fro: S = params
        .layers()
        .iter()
        .fold(S::zero(), |acc, layer| acc + layer.weight.frobenius_sq());
    l2 * fro
}

fn assemble_total<S: Scalar>(weights: &LossWeights, parts: (S, S, S, S, S)) -> S {
    let (recon_a, recon_x, sim_a, sim_x, reg) = parts;
    let w_a = S::from_f64_lossy(weights.w_a);
    let w_x = S::from_f64_lossy(weights.w_x);
    let w_recon = S::from_f64_lossy(weights.w_recon);
    let w_sim = S::from_f64_lossy(weights.w_sim);
    w_recon * (w_a * recon_a + w_x * recon_x) + w_sim * (w_a * sim_a + w_x * sim_x) + reg
}

/// Joint loss over a batch: attention-weighted reconstruction of both
/// matrices, the two pairwise-similarity discrepancies, and L2 weight decay.
pub fn loss_joint<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
    weights: &LossWeights,
) -> Result<LossParts<S>> {
    weights.validate()?;
    if a_batch.rows() < 2 {
        return Err(Error::InvalidParameter(
            "pairwise similarity loss needs a batch of at least 2 rows".into(),
        ));
    }
    let trace = forward_trace(params, a_batch, x_batch)?;
    let beta = S::from_f64_lossy(weights.attention_beta);
    let (recon_a, _) = recon_loss_and_factor(&trace.a_hat, a_batch, beta);
    let (recon_x, _) = recon_loss_and_factor(&trace.x_hat, x_batch, beta);
    let sim = evaluate_similarity(
        &trace.latent,
        a_batch,
        x_batch,
        S::from_f64_lossy(weights.lambda),
    )?;
    let reg = regularization(params, S::from_f64_lossy(weights.l2));
    let total = assemble_total(weights, (recon_a, recon_x, sim.sim_a, sim.sim_x, reg));
    if !total.is_finite() {
        return Err(Error::NonFinite("joint loss".into()));
    }
    Ok(LossParts {
        recon_a,
        recon_x,
        sim_a: sim.sim_a,
        sim_x: sim.sim_x,
        reg,
        total,
    })
}

/// Analytic gradient of the joint loss with respect to every weight and bias,
/// returned in a `ModelParams`-shaped container together with the loss parts.
pub fn gradients<S: Scalar>(
    params: &ModelParams<S>,
    a_batch: &DenseMatrix<S>,
    x_batch: &DenseMatrix<S>,
    weights: &LossWeights,
) -> Result<(LossParts<S>, ModelParams<S>)> {
    weights.validate()?;
    if a_batch.rows() < 2 {
        return Err(Error::InvalidParameter(
            "pairwise similarity loss needs a batch of at least 2 rows".into(),
        ));
    }
    let trace = forward_trace(params, a_batch, x_batch)?;
    let arch = params.arch;
    let b = a_batch.rows();

    let w_a = S::from_f64_lossy(weights.w_a);
    let w_x = S::from_f64_lossy(weights.w_x);
    let w_recon = S::from_f64_lossy(weights.w_recon);
    let w_sim = S::from_f64_lossy(weights.w_sim);
    let lambda = S::from_f64_lossy(weights.lambda);
    let l2 = S::from_f64_lossy(weights.l2);
    let beta = S::from_f64_lossy(weights.attention_beta);

    let mut grad = ModelParams::zeros(arch)?;

    // Reconstruction terms: d/d logits = scale · 2(ŷ−y)·w² · ŷ(1−ŷ).
    let (recon_a, factor_a) = recon_loss_and_factor(&trace.a_hat, a_batch, beta);
    let (recon_x, factor_x) = recon_loss_and_factor(&trace.x_hat, x_batch, beta);

    let scale_a = w_recon * w_a;
    let mut g_logits_a = DenseMatrix::zeros(b, arch.n);
    for i in 0..b {
        let a_hat_row = trace.a_hat.row(i);
        let f_row = factor_a.row(i);
        let g_row = g_logits_a.row_mut(i);
        for ((g, &f), &y) in g_row.iter_mut().zip(f_row.iter()).zip(a_hat_row.iter()) {
            *g = scale_a * f * y * (S::one() - y);
        }
    }
    let scale_x = w_recon * w_x;
    let mut g_logits_x = DenseMatrix::zeros(b, arch.d);
    for i in 0..b {
        let x_hat_row = trace.x_hat.row(i);
        let f_row = factor_x.row(i);
        let g_row = g_logits_x.row_mut(i);
        for ((g, &f), &y) in g_row.iter_mut().zip(f_row.iter()).zip(x_hat_row.iter()) {
            *g = scale_x * f * y * (S::one() - y);
        }
    }

    grad.dec_a.weight = trace.latent.transpose_matmul(&g_logits_a);
    grad.dec_a.bias = g_logits_a.column_sums();
    grad.dec_x.weight = trace.latent.transpose_matmul(&g_logits_x);
    grad.dec_x.bias = g_logits_x.column_sums();

    let mut g_latent = g_logits_a.matmul_transpose(&params.dec_a.weight);
    let g_latent_x = g_logits_x.matmul_transpose(&params.dec_x.weight);
    g_latent.add_scaled(&g_latent_x, S::one());

    // Similarity terms flow into the latent matrix through the pairwise
    // Euclidean distances. Each Frobenius term (i,j) contributes
    // dL/dD_ij = 2(w_sim·w_a·(E−S_A) + w_sim·w_x·(E−S_X))·(−λE), and D_ij
    // depends on both rows: dD_ij/dH_i = (H_i−H_j)/D_ij = −dD_ij/dH_j.
    // Looping over unordered pairs, the (i,j) and (j,i) terms double up.
    let sim = evaluate_similarity(&trace.latent, a_batch, x_batch, lambda)?;
    let two = S::from_f64_lossy(2.0);
    for i in 0..b {
        for j in (i + 1)..b {
            let dist = sim.distances.get(i, j);
            if dist == S::zero() {
                continue;
            }
            let e = sim.transformed.get(i, j);
            let residual =
                w_sim * w_a * (e - sim.jaccard_a.get(i, j)) + w_sim * w_x * (e - sim.jaccard_x.get(i, j));
            // 2 terms × dterm/dD = 2·residual·(−λE), per endpoint
            let coeff = two * two * residual * (-lambda * e) / dist;
            for t in 0..arch.latent_dim {
                let diff = trace.latent.get(i, t) - trace.latent.get(j, t);
                let gi = g_latent.get(i, t) + coeff * diff;
                g_latent.set(i, t, gi);
                let gj = g_latent.get(j, t) - coeff * diff;
                g_latent.set(j, t, gj);
            }
        }
    }

    grad.enc_joint.weight = trace.joint.transpose_matmul(&g_latent);
    grad.enc_joint.bias = g_latent.column_sums();
    let g_joint = g_latent.matmul_transpose(&params.enc_joint.weight);

    // Split the joint gradient and gate through the rectifier.
    let mut g_hidden_a = DenseMatrix::zeros(b, arch.hidden_a);
    let mut g_hidden_x = DenseMatrix::zeros(b, arch.hidden_x);
    for i in 0..b {
        let g_row = g_joint.row(i);
        let ua = trace.hidden_a.row(i);
        let ux = trace.hidden_x.row(i);
        let ga = g_hidden_a.row_mut(i);
        for (t, g) in ga.iter_mut().enumerate() {
            *g = if ua[t] > S::zero() { g_row[t] } else { S::zero() };
        }
        let gx = g_hidden_x.row_mut(i);
        for (t, g) in gx.iter_mut().enumerate() {
            *g = if ux[t] > S::zero() {
                g_row[arch.hidden_a + t]
            } else {
                S::zero()
            };
        }
    }
    grad.enc_a.weight = a_batch.transpose_matmul(&g_hidden_a);
    grad.enc_a.bias = g_hidden_a.column_sums();
    grad.enc_x.weight = x_batch.transpose_matmul(&g_hidden_x);
    grad.enc_x.bias = g_hidden_x.column_sums();

    // L2 decay: d(l2·‖W‖²)/dW = 2·l2·W.
    let two_l2 = two * l2;
    for (g, p) in grad.layers_mut().into_iter().zip(params.layers()) {
        g.weight.add_scaled(&p.weight, two_l2);
    }

    let reg = regularization(params, l2);
    let total = assemble_total(weights, (recon_a, recon_x, sim.sim_a, sim.sim_x, reg));
    let parts = LossParts {
        recon_a,
        recon_x,
        sim_a: sim.sim_a,
        sim_x: sim.sim_x,
        reg,
        total,
    };
    Ok((parts, grad))
}

/// Samples a training batch: a uniformly chosen anchor plus `batch_size − 1`
/// distinct peers drawn without replacement by the configured sampler.
pub fn sample_batch(
    graph: &BinaryAttributedGraph,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<BatchSample> {
    let n = graph.node_count();
    if cfg.batch_size > n {
        return Err(Error::InvalidParameter(format!(
            "batch_size {} exceeds node count {}",
            cfg.batch_size, n
        )));
    }
    if cfg.batch_size < 2 {
        return Err(Error::InvalidParameter("batch_size must be >= 2".into()));
    }
    let anchor = rng.random_range(0..n);
    let mut candidates: Vec<usize> = (0..n).filter(|&v| v != anchor).collect();
    let picks = cfg.batch_size - 1;
    let mut chosen = Vec::with_capacity(cfg.batch_size);
    chosen.push(anchor);

    match cfg.sampler {
        SamplerKind::Uniform => {
            // partial Fisher-Yates
            for i in 0..picks {
                let j = rng.random_range(i..candidates.len());
                candidates.swap(i, j);
                chosen.push(candidates[i]);
            }
        }
        SamplerKind::SimilarityWeighted => {
            let anchor_row = graph.adjacency().row(anchor);
            let mut weights: Vec<f64> = candidates
                .iter()
                .map(|&c| {
                    (1.0 - jaccard_row_distance(anchor_row, graph.adjacency().row(c))) + 0.01
                })
                .collect();
            let mut total: f64 = weights.iter().sum();
            for _ in 0..picks {
                let mut x = rng.random::<f64>() * total;
                let mut pick = candidates.len() - 1;
                for (idx, &w) in weights.iter().enumerate() {
                    if x < w {
                        pick = idx;
                        break;
                    }
                    x -= w;
                }
                chosen.push(candidates[pick]);
                total -= weights[pick];
                candidates.swap_remove(pick);
                weights.swap_remove(pick);
            }
        }
    }

    Ok(BatchSample {
        anchor,
        nodes: NodeSubset::new(chosen),
    })
}

/// Runs the encoder half over every node, in fixed-size chunks, producing the
/// full n×k latent matrix.
pub fn encode_all<S: Scalar>(
    params: &ModelParams<S>,
    graph: &BinaryAttributedGraph,
) -> Result<LatentMatrix<S>> {
    const CHUNK: usize = 1024;
    let n = graph.node_count();
    let mut h = DenseMatrix::zeros(n, params.arch.latent_dim);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let a_rows: DenseMatrix<S> = graph.adjacency().dense_rows(&indices);
        let x_rows: DenseMatrix<S> = graph.attributes().dense_rows(&indices);
        let encoded = encode_trace(params, &a_rows, &x_rows)?;
        for (offset, i) in (start..end).enumerate() {
            h.row_mut(i).copy_from_slice(encoded.latent.row(offset));
        }
        start = end;
    }
    Ok(LatentMatrix { h })
}

/// Trains the model with plain SGD on sampled batches and returns the final
/// parameters, the full latent matrix, and the per-iteration loss history.
/// Deterministic given `cfg.seed`. Aborts with `TrainingDiverged` if the
/// loss or the resulting latent matrix stops being finite.
pub fn train<S: Scalar>(
    graph: &BinaryAttributedGraph,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    weights.validate()?;
    let arch = cfg.architecture(graph.node_count(), graph.attribute_count());
    let mut params: ModelParams<S> = init_params(arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, seeding::tags::BATCH_SAMPLER));
    let lr = S::from_f64_lossy(-cfg.learning_rate);
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for iteration in 0..cfg.epochs {
        let batch = sample_batch(graph, cfg, &mut rng)?;
        let indices: Vec<usize> = batch.nodes.iter().collect();
        let a_rows: DenseMatrix<S> = graph.adjacency().dense_rows(&indices);
        let x_rows: DenseMatrix<S> = graph.attributes().dense_rows(&indices);
        let (parts, grad) = gradients(&params, &a_rows, &x_rows, weights)?;
        if !parts.total.is_finite() {
            return Err(Error::TrainingDiverged { iteration });
        }
        params.add_scaled(&grad, lr);
        loss_history.push(parts.total);
    }

    if !params.is_finite() {
        return Err(Error::TrainingDiverged {
            iteration: cfg.epochs,
        });
    }
    let latent = encode_all(&params, graph)?;
    if !latent.h.is_finite() {
        return Err(Error::TrainingDiverged {
            iteration: cfg.epochs,
        });
    }
    Ok(TrainOutcome {
        params,
        latent,
        loss_history,
    })
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weight: TensorDoc,
    bias: Vec<f64>,
}

/// On-disk model checkpoint: architecture, tensors in row-major order, the
/// training seed and iteration count.
#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    arch: Architecture,
    seed: u64,
    iterations: usize,
    enc_a: LayerDoc,
    enc_x: LayerDoc,
    enc_joint: LayerDoc,
    dec_a: LayerDoc,
    dec_x: LayerDoc,
}

fn layer_doc<S: Scalar>(layer: &Affine<S>) -> LayerDoc {
    LayerDoc {
        weight: TensorDoc {
            rows: layer.weight.rows(),
            cols: layer.weight.cols(),
            data: layer.weight.data().iter().map(|&v| v.into_f64()).collect(),
        },
        bias: layer.bias.iter().map(|&v| v.into_f64()).collect(),
    }
}

fn layer_from_doc<S: Scalar>(doc: &LayerDoc) -> Result<Affine<S>> {
    Ok(Affine {
        weight: DenseMatrix::from_vec(
            doc.weight.rows,
            doc.weight.cols,
            doc.weight.data.iter().map(|&v| S::from_f64_lossy(v)).collect(),
        )?,
        bias: doc.bias.iter().map(|&v| S::from_f64_lossy(v)).collect(),
    })
}

pub fn save_checkpoint<S: Scalar>(
    params: &ModelParams<S>,
    seed: u64,
    iterations: usize,
    path: &Path,
) -> Result<()> {
    let doc = CheckpointDoc {
        arch: params.arch,
        seed,
        iterations,
        enc_a: layer_doc(&params.enc_a),
        enc_x: layer_doc(&params.enc_x),
        enc_joint: layer_doc(&params.enc_joint),
        dec_a: layer_doc(&params.dec_a),
        dec_x: layer_doc(&params.dec_x),
    };
    let json = serde_json::to_string(&doc)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(ModelParams<S>, u64, usize)> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CheckpointDoc = serde_json::from_str(&raw)?;
    let params = ModelParams {
        arch: doc.arch,
        enc_a: layer_from_doc(&doc.enc_a)?,
        enc_x: layer_from_doc(&doc.enc_x)?,
        enc_joint: layer_from_doc(&doc.enc_joint)?,
        dec_a: layer_from_doc(&doc.dec_a)?,
        dec_x: layer_from_doc(&doc.dec_x)?,
    };
    params.arch.validate()?;
    Ok((params, doc.seed, doc.iterations))
}

/// Writes the latent matrix as CSV with header `node_id,h_0,...,h_{k-1}`.
pub fn write_latent_csv<S: Scalar>(
    latent: &LatentMatrix<S>,
    node_ids: &[String],
    out: &mut impl Write,
) -> std::io::Result<()> {
    let k = latent.dim();
    write!(out, "node_id")?;
    for t in 0..k {
        write!(out, ",h_{t}")?;
    }
    writeln!(out)?;
    for (i, id) in node_ids.iter().enumerate() {
        write!(out, "{id}")?;
        for &v in latent.h.row(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a latent CSV produced by [`write_latent_csv`]; returns the matrix
/// and the node-id column.
pub fn read_latent_csv<S: Scalar>(reader: impl BufRead) -> Result<(LatentMatrix<S>, Vec<String>)> {
    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut ids = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<latent csv>", e))?;
        if lineno == 0 {
            if !line.starts_with("node_id") {
                return Err(Error::MalformedLine {
                    path: "<latent csv>".into(),
                    line: 1,
                    reason: "missing node_id header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let values: std::result::Result<Vec<S>, _> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map(S::from_f64_lossy)
                    .map_err(|e| Error::MalformedLine {
                        path: "<latent csv>".into(),
                        line: lineno + 1,
                        reason: e.to_string(),
                    })
            })
            .collect();
        ids.push(id);
        rows.push(values?);
    }
    let h = DenseMatrix::from_rows(&rows)?;
    Ok((LatentMatrix { h }, ids))
}
