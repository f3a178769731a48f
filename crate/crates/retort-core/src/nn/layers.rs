//! Linear layers and GRU cells built from tape primitives, plus their
//! parameter registration (Glorot-uniform weights, zero biases).

use crate::prelude::*;
use rand::Rng;

use super::store::ParameterStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::NnError;
use crate::fmath;

/// Glorot-uniform matrix `[fan_in, fan_out]`.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = fmath::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
        .collect();
    Tensor::matrix(fan_in, fan_out, data).expect("sized data")
}

/// Register `{prefix}.w [in,out]` and `{prefix}.b [out]`.
pub fn register_linear(
    store: &mut ParameterStore,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Result<(), NnError> {
    store.insert(&format!("{prefix}.w"), glorot(fan_in, fan_out, rng))?;
    store.insert(&format!("{prefix}.b"), Tensor::zeros(&[fan_out]))?;
    Ok(())
}

/// Register a bias-free projection `{prefix}.w [in,out]`.
pub fn register_projection(
    store: &mut ParameterStore,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Result<(), NnError> {
    store.insert(&format!("{prefix}.w"), glorot(fan_in, fan_out, rng))
}

/// Register a plain learnable vector (uniform in [-0.1, 0.1]).
pub fn register_vector(
    store: &mut ParameterStore,
    name: &str,
    dim: usize,
    rng: &mut impl Rng,
) -> Result<(), NnError> {
    let data = (0..dim)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 0.1)
        .collect();
    store.insert(name, Tensor::vector(data))
}

/// `x . w + b`; `x` may be a vector or a matrix of row vectors.
pub fn linear(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    x: Var,
) -> Result<Var, NnError> {
    let w = tape.param(store, &format!("{prefix}.w"))?;
    let b = tape.param(store, &format!("{prefix}.b"))?;
    let xw = tape.matmul(x, w)?;
    tape.add_bias(xw, b)
}

/// `x . w` for a bias-free projection.
pub fn linear_no_bias(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    x: Var,
) -> Result<Var, NnError> {
    let w = tape.param(store, &format!("{prefix}.w"))?;
    tape.matmul(x, w)
}

/// `mu + exp(log_var / 2) * noise`; differentiable w.r.t. `mu` and
/// `log_var`. The noise is an ordinary var (usually a constant).
pub fn gaussian_reparam(
    tape: &mut Tape,
    mu: Var,
    log_var: Var,
    noise: Var,
) -> Result<Var, NnError> {
    let half = tape.affine(log_var, 0.5, 0.0)?;
    let std = tape.exp(half)?;
    let scaled = tape.mul(std, noise)?;
    tape.add(mu, scaled)
}

/// A stack of GRU layers; layer 0 consumes the input, each further layer
/// consumes the hidden state below it.
#[derive(Debug, Clone)]
pub struct GruStackSpec {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
}

impl GruStackSpec {
    fn layer_prefix(&self, layer: usize) -> String {
        format!("{}.l{layer}", self.prefix)
    }
}

/// Gate packing follows the r|z|n convention: `w_ih [in, 3h]`,
/// `w_hh [h, 3h]`, biases `[3h]`.
pub fn register_gru_stack(
    store: &mut ParameterStore,
    spec: &GruStackSpec,
    rng: &mut impl Rng,
) -> Result<(), NnError> {
    for layer in 0..spec.layers {
        let fan_in = if layer == 0 {
            spec.input_dim
        } else {
            spec.hidden_dim
        };
        let p = spec.layer_prefix(layer);
        let h = spec.hidden_dim;
        store.insert(&format!("{p}.w_ih"), glorot(fan_in, 3 * h, rng))?;
        store.insert(&format!("{p}.w_hh"), glorot(h, 3 * h, rng))?;
        store.insert(&format!("{p}.b_ih"), Tensor::zeros(&[3 * h]))?;
        store.insert(&format!("{p}.b_hh"), Tensor::zeros(&[3 * h]))?;
    }
    Ok(())
}

/// One GRU layer update:
/// r = sigmoid(gi_r + gh_r), z = sigmoid(gi_z + gh_z),
/// n = tanh(gi_n + r * gh_n), h' = (1 - z) * n + z * h.
///
/// `x` and `h` may be vectors or row matrices (every row updated at once).
pub fn gru_layer_step(
    tape: &mut Tape,
    store: &ParameterStore,
    layer_prefix: &str,
    hidden_dim: usize,
    x: Var,
    h: Var,
) -> Result<Var, NnError> {
    let w_ih = tape.param(store, &format!("{layer_prefix}.w_ih"))?;
    let w_hh = tape.param(store, &format!("{layer_prefix}.w_hh"))?;
    let b_ih = tape.param(store, &format!("{layer_prefix}.b_ih"))?;
    let b_hh = tape.param(store, &format!("{layer_prefix}.b_hh"))?;

    let gi = tape.matmul(x, w_ih)?;
    let gi = tape.add_bias(gi, b_ih)?;
    let gh = tape.matmul(h, w_hh)?;
    let gh = tape.add_bias(gh, b_hh)?;

    let axis = tape.value(gi).rank() - 1;
    let split = |tape: &mut Tape, v: Var, k: usize| {
        tape.slice(v, axis, k * hidden_dim, (k + 1) * hidden_dim)
    };
    let gi_r = split(tape, gi, 0)?;
    let gi_z = split(tape, gi, 1)?;
    let gi_n = split(tape, gi, 2)?;
    let gh_r = split(tape, gh, 0)?;
    let gh_z = split(tape, gh, 1)?;
    let gh_n = split(tape, gh, 2)?;

    let r_pre = tape.add(gi_r, gh_r)?;
    let r = tape.sigmoid(r_pre)?;
    let z_pre = tape.add(gi_z, gh_z)?;
    let z = tape.sigmoid(z_pre)?;
    let gated = tape.mul(r, gh_n)?;
    let n_pre = tape.add(gi_n, gated)?;
    let n = tape.tanh(n_pre)?;

    let one_minus_z = tape.affine(z, -1.0, 1.0)?;
    let a = tape.mul(one_minus_z, n)?;
    let b = tape.mul(z, h)?;
    tape.add(a, b)
}

/// Step the whole stack once: layer 0 sees `input`, each next layer sees the
/// new hidden state of the layer below. Returns the new hidden states.
pub fn gru_cell(
    tape: &mut Tape,
    store: &ParameterStore,
    spec: &GruStackSpec,
    input: Var,
    hidden: &[Var],
) -> Result<Vec<Var>, NnError> {
    debug_assert_eq!(hidden.len(), spec.layers);
    let mut new_hidden = Vec::with_capacity(spec.layers);
    let mut x = input;
    for layer in 0..spec.layers {
        let h_new = gru_layer_step(
            tape,
            store,
            &spec.layer_prefix(layer),
            spec.hidden_dim,
            x,
            hidden[layer],
        )?;
        new_hidden.push(h_new);
        x = h_new;
    }
    Ok(new_hidden)
}
