//! Model dimensions, parameter registration, encoder, decoder and property
//! head.

use crate::prelude::*;
use rand::Rng;

use crate::chem::ElementTable;
use crate::fmath;
use crate::ggnn::{embed_molecule, register_ggnn, GgnnDims};
use crate::nn::{
    gru_cell, linear, linear_no_bias, register_gru_stack, register_linear, register_projection,
    register_vector, GruStackSpec, ParameterStore, Tape, Tensor, Var,
};

use super::vocab::{ReactantBag, ReactantVocabulary};
use super::WaeError;

pub const GGNN_PREFIX: &str = "ggnn";

#[derive(Debug, Clone, Copy)]
pub struct ModelDims {
    pub ggnn: GgnnDims,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub t_max: usize,
    pub decoder_hidden: usize,
    pub property_hidden: usize,
}

impl ModelDims {
    /// Paper-default architecture: latent 25, encoder hidden 200, 2-layer
    /// GRU of width 50, horizon 5, decoder query hidden 128, property head
    /// 40x40.
    pub fn defaults(table: &ElementTable) -> Self {
        ModelDims {
            ggnn: GgnnDims::defaults(table),
            latent_dim: 25,
            encoder_hidden: 200,
            gru_hidden: 50,
            gru_layers: 2,
            t_max: 5,
            decoder_hidden: 128,
            property_hidden: 40,
        }
    }

    pub fn decoder_gru_spec(&self) -> GruStackSpec {
        GruStackSpec {
            prefix: "dec.gru".to_string(),
            input_dim: self.ggnn.embed_dim,
            hidden_dim: self.gru_hidden,
            layers: self.gru_layers,
        }
    }
}

/// Register every weight of the model (GGNN, encoder, decoder, property
/// head) into `store`. Registration order fixes the serialization layout.
pub fn register_model(
    store: &mut ParameterStore,
    dims: &ModelDims,
    rng: &mut impl Rng,
) -> Result<(), WaeError> {
    register_ggnn(store, GGNN_PREFIX, &dims.ggnn, rng)?;
    register_linear(store, "enc.hidden", dims.ggnn.embed_dim, dims.encoder_hidden, rng)?;
    register_linear(store, "enc.out", dims.encoder_hidden, 2 * dims.latent_dim, rng)?;
    register_projection(store, "dec.init", dims.latent_dim, dims.gru_hidden, rng)?;
    register_gru_stack(store, &dims.decoder_gru_spec(), rng)?;
    register_linear(store, "dec.query.hidden", dims.gru_hidden, dims.decoder_hidden, rng)?;
    register_linear(store, "dec.query.out", dims.decoder_hidden, dims.ggnn.embed_dim, rng)?;
    register_vector(store, "dec.halt", dims.ggnn.embed_dim, rng)?;
    register_linear(store, "prop.l1", dims.latent_dim, dims.property_hidden, rng)?;
    register_linear(store, "prop.l2", dims.property_hidden, dims.property_hidden, rng)?;
    register_linear(store, "prop.out", dims.property_hidden, 1, rng)?;
    Ok(())
}

/// Embeddings of every vocabulary molecule on one tape, plus the stacked
/// `[V+1, embed]` matrix with the halt embedding as the last row.
pub struct VocabEmbeddings {
    pub vars: Vec<Var>,
    pub stacked_with_halt: Var,
}

impl VocabEmbeddings {
    pub fn build(
        tape: &mut Tape,
        store: &ParameterStore,
        dims: &ModelDims,
        vocab: &ReactantVocabulary,
    ) -> Result<Self, WaeError> {
        let mut vars = Vec::with_capacity(vocab.len());
        for entry in vocab.entries() {
            vars.push(embed_molecule(
                tape,
                store,
                GGNN_PREFIX,
                &dims.ggnn,
                &entry.tensors,
            )?);
        }
        let halt = tape.param(store, "dec.halt")?;
        let mut rows = vars.clone();
        rows.push(halt);
        let stacked_with_halt = tape.concat_rows(&rows)?;
        Ok(VocabEmbeddings {
            vars,
            stacked_with_halt,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Multiset representation: sum over distinct members of count x embedding,
/// accumulated in ascending index order.
fn bag_sum(
    tape: &mut Tape,
    emb: &VocabEmbeddings,
    bag: &ReactantBag,
) -> Result<Var, WaeError> {
    let mut total: Option<Var> = None;
    for (index, count) in bag.counts() {
        let term = if count == 1 {
            emb.vars[index]
        } else {
            tape.affine(emb.vars[index], count as f64, 0.0)?
        };
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    Ok(total.expect("bags are non-empty"))
}

/// Posterior parameters as tape vars (for training paths).
pub fn encode_vars(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    emb: &VocabEmbeddings,
    bag: &ReactantBag,
) -> Result<(Var, Var), WaeError> {
    let summed = bag_sum(tape, emb, bag)?;
    let hidden_pre = linear(tape, store, "enc.hidden", summed)?;
    let hidden = tape.tanh(hidden_pre)?;
    let out = linear(tape, store, "enc.out", hidden)?;
    let mean = tape.slice(out, 0, 0, dims.latent_dim)?;
    let log_var = tape.slice(out, 0, dims.latent_dim, 2 * dims.latent_dim)?;
    Ok((mean, log_var))
}

/// q(z | bag): the public encoder. Embeds the whole vocabulary on a fresh
/// tape; for repeated calls against a frozen store use [`super::FrozenWae`].
pub fn encode(
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    bag: &ReactantBag,
) -> Result<GaussianPosterior, WaeError> {
    let mut tape = Tape::new();
    let emb = VocabEmbeddings::build(&mut tape, store, dims, vocab)?;
    let (mean, log_var) = encode_vars(&mut tape, store, dims, &emb, bag)?;
    Ok(GaussianPosterior {
        mean: tape.value(mean).data().to_vec(),
        log_var: tape.value(log_var).data().to_vec(),
    })
}

/// One decoder step: update the GRU stack, build the query, dot against
/// every reactant embedding plus halt.
pub(super) fn decoder_step(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    emb: &VocabEmbeddings,
    input: Var,
    hidden: &[Var],
) -> Result<(Vec<Var>, Var), WaeError> {
    let spec = dims.decoder_gru_spec();
    let new_hidden = gru_cell(tape, store, &spec, input, hidden)?;
    let top = *new_hidden.last().expect("at least one GRU layer");
    let q_pre = linear(tape, store, "dec.query.hidden", top)?;
    let q_hidden = tape.tanh(q_pre)?;
    let query = linear(tape, store, "dec.query.out", q_hidden)?;
    let logits = tape.matmul(emb.stacked_with_halt, query)?;
    Ok((new_hidden, logits))
}

pub(super) fn initial_state(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    z: Var,
) -> Result<(Var, Vec<Var>), WaeError> {
    let h0 = linear_no_bias(tape, store, "dec.init", z)?;
    // both layers start from the same projection of z
    let hidden = vec![h0; dims.gru_layers];
    let start = tape.constant(Tensor::zeros(&[dims.ggnn.embed_dim]))?;
    Ok((start, hidden))
}

#[derive(Debug, Clone)]
pub struct DecodeStep {
    pub logits: Vec<f64>,
    /// Chosen token; `vocab.halt_token()` is the halt.
    pub chosen: usize,
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// `None` when halt was chosen at the first step (an empty decode —
    /// reported as an outcome, not an error).
    pub bag: Option<ReactantBag>,
    pub steps: Vec<DecodeStep>,
}

pub(super) fn decode_with(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    emb: &VocabEmbeddings,
    z: &[f64],
    mut pick: impl FnMut(&[f64]) -> usize,
) -> Result<DecodeResult, WaeError> {
    let z_var = tape.constant(Tensor::vector(z.to_vec()))?;
    let (mut input, mut hidden) = initial_state(tape, store, dims, z_var)?;
    let halt = vocab.halt_token();
    let mut steps = Vec::new();
    let mut tokens = Vec::new();
    for _ in 0..dims.t_max {
        let (new_hidden, logits) = decoder_step(tape, store, dims, emb, input, &hidden)?;
        hidden = new_hidden;
        let logit_values = tape.value(logits).data().to_vec();
        let chosen = pick(&logit_values);
        steps.push(DecodeStep {
            logits: logit_values,
            chosen,
        });
        if chosen == halt {
            break;
        }
        tokens.push(chosen);
        input = emb.vars[chosen];
    }
    let bag = if tokens.is_empty() {
        None
    } else {
        Some(ReactantBag::new(tokens, vocab.len())?)
    };
    Ok(DecodeResult { bag, steps })
}

/// Deterministic argmax pick; ties go to the lowest index.
pub(super) fn argmax(logits: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// Softmax + inverse-CDF sample.
pub(super) fn categorical(logits: &[f64], rng: &mut impl Rng) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| fmath::exp(l - max)).collect();
    let total: f64 = weights.iter().sum();
    let mut u: f64 = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Greedy decode on a fresh tape (vocabulary embedded from scratch).
pub fn decode_greedy(
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    z: &[f64],
) -> Result<DecodeResult, WaeError> {
    let mut tape = Tape::new();
    let emb = VocabEmbeddings::build(&mut tape, store, dims, vocab)?;
    decode_with(&mut tape, store, dims, vocab, &emb, z, argmax)
}

/// Categorical decode on a fresh tape.
pub fn decode_sample(
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    z: &[f64],
    rng: &mut impl Rng,
) -> Result<DecodeResult, WaeError> {
    let mut tape = Tape::new();
    let emb = VocabEmbeddings::build(&mut tape, store, dims, vocab)?;
    decode_with(&mut tape, store, dims, vocab, &emb, z, |logits| {
        categorical(logits, rng)
    })
}

/// Property head on a latent var: latent -> hidden -> hidden -> scalar,
/// tanh activations.
pub fn property_head_var(
    tape: &mut Tape,
    store: &ParameterStore,
    z: Var,
) -> Result<Var, WaeError> {
    let h1_pre = linear(tape, store, "prop.l1", z)?;
    let h1 = tape.tanh(h1_pre)?;
    let h2_pre = linear(tape, store, "prop.l2", h1)?;
    let h2 = tape.tanh(h2_pre)?;
    let out = linear(tape, store, "prop.out", h2)?;
    Ok(tape.sum(out)?)
}

/// Predicted property score at `z`.
pub fn property_score(store: &ParameterStore, z: &[f64]) -> Result<f64, WaeError> {
    let mut tape = Tape::new();
    let zv = tape.constant(Tensor::vector(z.to_vec()))?;
    let s = property_head_var(&mut tape, store, zv)?;
    Ok(tape.value(s).scalar_value())
}

/// Score and its gradient w.r.t. `z`.
pub fn property_grad(store: &ParameterStore, z: &[f64]) -> Result<(f64, Vec<f64>), WaeError> {
    let mut tape = Tape::new();
    let zv = tape.constant(Tensor::vector(z.to_vec()))?;
    let s = property_head_var(&mut tape, store, zv)?;
    let score = tape.value(s).scalar_value();
    let grads = tape.backward(s)?;
    let gz = grads
        .get(zv)
        .map(|g| g.data().to_vec())
        .unwrap_or_else(|| vec![0.0; z.len()]);
    Ok((score, gz))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::sync::Arc;

    pub(crate) fn tiny_vocab() -> ReactantVocabulary {
        let table = Arc::new(ElementTable::builtin());
        ReactantVocabulary::build(
            table,
            &[
                ("CCO".to_string(), 5),
                ("CC(=O)O".to_string(), 4),
                ("CN".to_string(), 3),
                ("CCBr".to_string(), 2),
            ],
        )
        .unwrap()
    }

    pub(crate) fn tiny_dims(vocab: &ReactantVocabulary) -> ModelDims {
        let mut dims = ModelDims::defaults(vocab.table());
        dims.ggnn.node_dim = 8;
        dims.ggnn.embed_dim = 6;
        dims.ggnn.steps = 2;
        dims.latent_dim = 4;
        dims.encoder_hidden = 10;
        dims.gru_hidden = 6;
        dims.decoder_hidden = 7;
        dims.property_hidden = 5;
        dims
    }

    pub(crate) fn tiny_model(seed: u64) -> (ReactantVocabulary, ModelDims, ParameterStore) {
        let vocab = tiny_vocab();
        let dims = tiny_dims(&vocab);
        let mut store = ParameterStore::new();
        let mut rng = crate::rng::stream(seed, "tiny-model");
        register_model(&mut store, &dims, &mut rng).unwrap();
        (vocab, dims, store)
    }

    #[test]
    fn encode_is_multiset_invariant_bit_exact() {
        let (vocab, dims, store) = tiny_model(1);
        let a = ReactantBag::new(vec![0, 2], vocab.len()).unwrap();
        let b = ReactantBag::new(vec![2, 0], vocab.len()).unwrap();
        let pa = encode(&store, &dims, &vocab, &a).unwrap();
        let pb = encode(&store, &dims, &vocab, &b).unwrap();
        assert!(pa
            .mean
            .iter()
            .zip(pb.mean.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(pa
            .log_var
            .iter()
            .zip(pb.log_var.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn duplicate_member_scales_the_embedding() {
        let (vocab, dims, store) = tiny_model(2);
        // encode({i,i}) must equal an encode built on 2 * embedding(i); we
        // check it against a bag sum computed by hand on the same tape
        let bag = ReactantBag::new(vec![1, 1], vocab.len()).unwrap();
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store, &dims, &vocab).unwrap();
        let summed = bag_sum(&mut tape, &emb, &bag).unwrap();
        let direct = tape.affine(emb.vars[1], 2.0, 0.0).unwrap();
        assert_eq!(tape.value(summed).data(), tape.value(direct).data());
    }

    #[test]
    fn greedy_decode_is_deterministic_and_capped() {
        let (vocab, dims, store) = tiny_model(3);
        let z = vec![0.3, -0.2, 0.5, 0.1];
        let a = decode_greedy(&store, &dims, &vocab, &z).unwrap();
        let b = decode_greedy(&store, &dims, &vocab, &z).unwrap();
        match (&a.bag, &b.bag) {
            (Some(x), Some(y)) => assert_eq!(x, y),
            (None, None) => {}
            _ => panic!("nondeterministic decode"),
        }
        assert!(a.steps.len() <= dims.t_max);
        if let Some(bag) = &a.bag {
            assert!(bag.len() <= dims.t_max);
        }
    }

    #[test]
    fn property_head_zero_weights_gives_bias_and_zero_grad() {
        let (vocab, dims, _) = tiny_model(4);
        let mut store = ParameterStore::new();
        let mut rng = crate::rng::stream(99, "zero");
        register_model(&mut store, &dims, &mut rng).unwrap();
        for name in ["prop.l1.w", "prop.l2.w", "prop.out.w"] {
            let t = store.get_mut(name).unwrap();
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        store.get_mut("prop.out.b").unwrap().data_mut()[0] = 0.75;
        let z = vec![0.4; dims.latent_dim];
        let (score, grad) = property_grad(&store, &z).unwrap();
        assert_eq!(score, 0.75);
        assert!(grad.iter().all(|&g| g == 0.0));
        let _ = vocab;
    }

    /// Hand-built weights: all embeddings forced to zero, the halt logit
    /// driven by a bias-only GRU so it crosses zero exactly at step 3. The
    /// greedy decode must pick reactant 0 twice and then halt.
    #[test]
    fn hand_built_decoder_halts_at_step_three() {
        let table = Arc::new(ElementTable::builtin());
        let vocab = ReactantVocabulary::build(
            table.clone(),
            &[("C".to_string(), 1), ("O".to_string(), 1)],
        )
        .unwrap();
        let mut dims = ModelDims::defaults(&table);
        dims.ggnn.node_dim = 2;
        dims.ggnn.embed_dim = 1;
        dims.ggnn.steps = 1;
        dims.latent_dim = 1;
        dims.encoder_hidden = 2;
        dims.gru_hidden = 1;
        dims.decoder_hidden = 1;
        dims.property_hidden = 1;

        let mut store = ParameterStore::new();
        let mut rng = crate::rng::stream(0, "hand");
        register_model(&mut store, &dims, &mut rng).unwrap();
        // zero every parameter, then set just what the construction needs
        let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
        for name in &names {
            for v in store.get_mut(name).unwrap().data_mut() {
                *v = 0.0;
            }
        }
        // bias-only GRU layer 0: z-gate 0 -> sigmoid = 0.5, candidate bias 2
        // h_t = 0.5 * tanh(2) + 0.5 * h_{t-1}, so h rises 0.482, 0.723, 0.844
        store.get_mut("dec.gru.l0.b_ih").unwrap().data_mut()[2] = 2.0;
        // layer 1 copies its input through the candidate path: w_ih candidate
        // weight 4 (tanh near-linear ramp), z-gate bias 0
        store.get_mut("dec.gru.l1.w_ih").unwrap().data_mut()[2] = 4.0;
        // query: hidden = tanh(h * 1), out = hidden * 1
        store.get_mut("dec.query.hidden.w").unwrap().data_mut()[0] = 1.0;
        store.get_mut("dec.query.out.w").unwrap().data_mut()[0] = 1.0;
        // read the raw query trajectory with halt embedding still zero
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store, &dims, &vocab).unwrap();
        // all reactant embeddings are zero by construction
        for &v in &emb.vars {
            assert!(tape.value(v).data().iter().all(|&x| x == 0.0));
        }
        let probe = decode_with(&mut tape, &store, &dims, &vocab, &emb, &[0.0], argmax).unwrap();
        // with halt = 0 every logit ties at 0 and greedy walks reactant 0
        assert_eq!(probe.bag.as_ref().unwrap().indices(), &[0; 5]);

        // now compute the query value at each step by re-running with a halt
        // of 1.0: the halt logit IS the query scalar
        store.get_mut("dec.halt").unwrap().data_mut()[0] = 1.0;
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store, &dims, &vocab).unwrap();
        let probe2 =
            decode_with(&mut tape, &store, &dims, &vocab, &emb, &[0.0], |l| {
                // never halt: always pick 0 so we see all five query values
                let _ = l;
                0
            })
            .unwrap();
        let queries: Vec<f64> = probe2.steps.iter().map(|s| s.logits[2]).collect();
        assert!(queries[0] < queries[1] && queries[1] < queries[2]);
        // shift the halt logit so steps 1-2 stay negative and step 3 crosses
        let threshold = 0.5 * (queries[1] + queries[2]);
        store.get_mut("dec.query.out.b").unwrap().data_mut()[0] = -threshold;

        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store, &dims, &vocab).unwrap();
        let result = decode_with(&mut tape, &store, &dims, &vocab, &emb, &[0.0], argmax).unwrap();
        // hand logits: steps 1-2 have halt < 0 = reactant logits (tie ->
        // index 0); step 3 has halt > 0
        assert_eq!(result.bag.as_ref().unwrap().indices(), &[0, 0]);
        assert_eq!(result.steps.len(), 3);
        assert_eq!(result.steps[2].chosen, vocab.halt_token());
    }
}
