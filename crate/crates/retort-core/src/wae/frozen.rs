//! Evaluation against a frozen parameter store: one long-lived tape holds
//! the vocabulary embedding table, per-call work is appended and rolled
//! back.

use crate::prelude::*;
use rand::Rng;

use crate::chem::MolecularGraph;
use crate::ggnn::{embed_molecule, graph_tensors};
use crate::nn::{ParameterStore, Tape, Tensor};

use super::model::{
    argmax, categorical, decode_with, encode_vars, initial_state, property_head_var, DecodeResult,
    GaussianPosterior, ModelDims, VocabEmbeddings, GGNN_PREFIX,
};
use super::vocab::{ReactantBag, ReactantVocabulary};
use super::WaeError;

pub struct FrozenWae<'a> {
    store: &'a ParameterStore,
    dims: ModelDims,
    vocab: &'a ReactantVocabulary,
    tape: Tape,
    emb: VocabEmbeddings,
    base: usize,
}

impl<'a> FrozenWae<'a> {
    pub fn new(
        store: &'a ParameterStore,
        dims: &ModelDims,
        vocab: &'a ReactantVocabulary,
    ) -> Result<Self, WaeError> {
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, store, dims, vocab)?;
        let base = tape.mark();
        Ok(FrozenWae {
            store,
            dims: *dims,
            vocab,
            tape,
            emb,
            base,
        })
    }

    pub fn vocab(&self) -> &ReactantVocabulary {
        self.vocab
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn store(&self) -> &ParameterStore {
        self.store
    }

    /// Embedding of one vocabulary entry (already on the base tape).
    pub fn vocab_embedding(&self, index: usize) -> &[f64] {
        self.tape.value(self.emb.vars[index]).data()
    }

    pub fn posterior(&mut self, bag: &ReactantBag) -> Result<GaussianPosterior, WaeError> {
        let out = (|| {
            let (mean, log_var) =
                encode_vars(&mut self.tape, self.store, &self.dims, &self.emb, bag)?;
            Ok(GaussianPosterior {
                mean: self.tape.value(mean).data().to_vec(),
                log_var: self.tape.value(log_var).data().to_vec(),
            })
        })();
        self.tape.truncate(self.base);
        out
    }

    /// Posterior mean of q(z | bag).
    pub fn encode_mean(&mut self, bag: &ReactantBag) -> Result<Vec<f64>, WaeError> {
        Ok(self.posterior(bag)?.mean)
    }

    pub fn decode_greedy(&mut self, z: &[f64]) -> Result<DecodeResult, WaeError> {
        let out = decode_with(
            &mut self.tape,
            self.store,
            &self.dims,
            self.vocab,
            &self.emb,
            z,
            argmax,
        );
        self.tape.truncate(self.base);
        out
    }

    pub fn decode_sample(
        &mut self,
        z: &[f64],
        rng: &mut impl Rng,
    ) -> Result<DecodeResult, WaeError> {
        let out = decode_with(
            &mut self.tape,
            self.store,
            &self.dims,
            self.vocab,
            &self.emb,
            z,
            |logits| categorical(logits, rng),
        );
        self.tape.truncate(self.base);
        out
    }

    /// Teacher-forced reconstruction loss of `bag` at latent `z` (identity
    /// ordering); used by evaluation reports.
    pub fn reconstruction_loss(
        &mut self,
        bag: &ReactantBag,
        z: &[f64],
    ) -> Result<f64, WaeError> {
        let out = (|| {
            let z_var = self.tape.constant(Tensor::vector(z.to_vec()))?;
            let ordering: Vec<usize> = (0..bag.len()).collect();
            let loss = super::loss::reconstruction_loss(
                &mut self.tape,
                self.store,
                &self.dims,
                self.vocab,
                &self.emb,
                z_var,
                bag,
                &ordering,
            )?;
            Ok(self.tape.value(loss).scalar_value())
        })();
        self.tape.truncate(self.base);
        out
    }

    pub fn property(&mut self, z: &[f64]) -> Result<f64, WaeError> {
        let out = (|| {
            let zv = self.tape.constant(Tensor::vector(z.to_vec()))?;
            let s = property_head_var(&mut self.tape, self.store, zv)?;
            Ok(self.tape.value(s).scalar_value())
        })();
        self.tape.truncate(self.base);
        out
    }

    /// Property score and its gradient w.r.t. `z`.
    pub fn property_grad(&mut self, z: &[f64]) -> Result<(f64, Vec<f64>), WaeError> {
        let out = (|| {
            let zv = self.tape.constant(Tensor::vector(z.to_vec()))?;
            let s = property_head_var(&mut self.tape, self.store, zv)?;
            let score = self.tape.value(s).scalar_value();
            let grads = self.tape.backward(s)?;
            let gz = grads
                .get(zv)
                .map(|g| g.data().to_vec())
                .unwrap_or_else(|| vec![0.0; z.len()]);
            Ok((score, gz))
        })();
        self.tape.truncate(self.base);
        out
    }

    /// Graph-level embedding of an arbitrary molecule under the frozen
    /// shared GGNN.
    pub fn embed(&mut self, graph: &MolecularGraph) -> Result<Vec<f64>, WaeError> {
        let out = (|| {
            let gt = graph_tensors(graph, self.vocab.table())?;
            let e = embed_molecule(
                &mut self.tape,
                self.store,
                GGNN_PREFIX,
                &self.dims.ggnn,
                &gt,
            )?;
            Ok(self.tape.value(e).data().to_vec())
        })();
        self.tape.truncate(self.base);
        out
    }

    /// `initial_state` exposed for diagnostics and tests.
    pub fn decoder_warmup(&mut self, z: &[f64]) -> Result<usize, WaeError> {
        let out = (|| {
            let zv = self.tape.constant(Tensor::vector(z.to_vec()))?;
            let (_, hidden) = initial_state(&mut self.tape, self.store, &self.dims, zv)?;
            Ok(hidden.len())
        })();
        self.tape.truncate(self.base);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::tests::tiny_model;
    use super::super::model::{decode_greedy, encode};
    use super::*;

    #[test]
    fn frozen_paths_match_fresh_tape_paths() {
        let (vocab, dims, store) = tiny_model(31);
        let mut frozen = FrozenWae::new(&store, &dims, &vocab).unwrap();
        let bag = ReactantBag::new(vec![0, 2], vocab.len()).unwrap();

        let fresh = encode(&store, &dims, &vocab, &bag).unwrap();
        let frozen_posterior = frozen.posterior(&bag).unwrap();
        assert_eq!(fresh, frozen_posterior);

        let z = vec![0.2; dims.latent_dim];
        let fresh_decode = decode_greedy(&store, &dims, &vocab, &z).unwrap();
        let frozen_decode = frozen.decode_greedy(&z).unwrap();
        assert_eq!(fresh_decode.bag, frozen_decode.bag);

        // repeated calls stay stable (the tape rolls back cleanly)
        let again = frozen.decode_greedy(&z).unwrap();
        assert_eq!(frozen_decode.bag, again.bag);
        assert_eq!(frozen.dims().latent_dim, dims.latent_dim);
    }
}
