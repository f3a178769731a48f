//! Teacher-forced reconstruction loss and the full training objective.

use crate::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{gaussian_reparam, MmdKernel, ParameterStore, Tape, Tensor, Var};

use super::model::{
    decoder_step, encode_vars, initial_state, property_head_var, ModelDims, VocabEmbeddings,
};
use super::vocab::{ReactantBag, ReactantVocabulary};
use super::WaeError;

/// Sum over steps of the cross entropy of the true token against the step's
/// logits. The teacher forces the bag's members in the given `ordering`
/// (a permutation of `0..bag.len()`), then the halt token — unless the bag
/// already fills the decoder horizon, in which case decoding terminates by
/// the step cap and there is no halt step to force.
pub fn reconstruction_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    emb: &VocabEmbeddings,
    z: Var,
    bag: &ReactantBag,
    ordering: &[usize],
) -> Result<Var, WaeError> {
    if bag.len() > dims.t_max {
        return Err(WaeError::BagTooLarge {
            len: bag.len(),
            t_max: dims.t_max,
        });
    }
    let mut check: Vec<usize> = ordering.to_vec();
    check.sort_unstable();
    if check != (0..bag.len()).collect::<Vec<_>>() {
        return Err(WaeError::BadOrdering);
    }

    let mut tokens: Vec<usize> = ordering.iter().map(|&p| bag.indices()[p]).collect();
    if tokens.len() < dims.t_max {
        tokens.push(vocab.halt_token());
    }

    let (mut input, mut hidden) = initial_state(tape, store, dims, z)?;
    let mut total: Option<Var> = None;
    for &token in &tokens {
        let (new_hidden, logits) = decoder_step(tape, store, dims, emb, input, &hidden)?;
        hidden = new_hidden;
        let ce = tape.softmax_cross_entropy(logits, token)?;
        total = Some(match total {
            None => ce,
            Some(t) => tape.add(t, ce)?,
        });
        if token != vocab.halt_token() {
            input = emb.vars[token];
        }
    }
    Ok(total.expect("at least one step"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub mmd: f64,
    /// Present when property targets were supplied.
    pub property_mse: Option<f64>,
}

/// Build the full batch objective on `tape`:
/// mean reconstruction + `lambda` * MMD^2(posterior samples, prior draws)
/// [+ `property_weight` * mean squared error of the property head].
///
/// One reparameterized posterior sample and one fresh teacher-forcing
/// ordering per bag, both drawn from `rng` — so calling this once per epoch
/// resamples the orderings per datapoint per epoch. The rng consumption
/// order does not depend on `lambda` or on whether targets are present.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    bags: &[&ReactantBag],
    targets: Option<&[f64]>,
    lambda: f64,
    kernel: MmdKernel,
    property_weight: f64,
    rng: &mut impl Rng,
) -> Result<(Var, LossParts), WaeError> {
    if bags.len() < 2 {
        return Err(WaeError::BatchTooSmall(bags.len()));
    }
    if let Some(t) = targets {
        debug_assert_eq!(t.len(), bags.len());
    }
    let batch = bags.len();
    let latent = dims.latent_dim;

    // all randomness up front, in a fixed order
    let mut noises = Vec::with_capacity(batch);
    let mut orderings = Vec::with_capacity(batch);
    for bag in bags {
        let noise: Vec<f64> = (0..latent).map(|_| rng.sample(StandardNormal)).collect();
        noises.push(noise);
        let mut ordering: Vec<usize> = (0..bag.len()).collect();
        ordering.shuffle(rng);
        orderings.push(ordering);
    }
    let prior: Vec<f64> = (0..batch * latent).map(|_| rng.sample(StandardNormal)).collect();

    let emb = VocabEmbeddings::build(tape, store, dims, vocab)?;

    let mut recon_sum: Option<Var> = None;
    let mut zs = Vec::with_capacity(batch);
    for (i, bag) in bags.iter().enumerate() {
        let (mean, log_var) = encode_vars(tape, store, dims, &emb, bag)?;
        let noise = tape.constant(Tensor::vector(noises[i].clone()))?;
        let z = gaussian_reparam(tape, mean, log_var, noise)?;
        zs.push(z);
        let r = reconstruction_loss(tape, store, dims, vocab, &emb, z, bag, &orderings[i])?;
        recon_sum = Some(match recon_sum {
            None => r,
            Some(acc) => tape.add(acc, r)?,
        });
    }
    let recon = tape.affine(recon_sum.expect("non-empty batch"), 1.0 / batch as f64, 0.0)?;

    let z_matrix = tape.concat_rows(&zs)?;
    let prior_matrix = tape.constant(Tensor::from_shape(&[batch, latent], prior)?)?;
    let mmd = tape.mmd_squared(z_matrix, prior_matrix, kernel)?;
    let weighted_mmd = tape.affine(mmd, lambda, 0.0)?;
    let mut total = tape.add(recon, weighted_mmd)?;

    let mut property_mse = None;
    if let Some(target_values) = targets {
        let mut mse_sum: Option<Var> = None;
        for (i, &z) in zs.iter().enumerate() {
            let predicted = property_head_var(tape, store, z)?;
            let target = tape.scalar(target_values[i])?;
            let diff = tape.sub(predicted, target)?;
            let sq = tape.mul(diff, diff)?;
            mse_sum = Some(match mse_sum {
                None => sq,
                Some(acc) => tape.add(acc, sq)?,
            });
        }
        let mse = tape.affine(mse_sum.expect("non-empty batch"), 1.0 / batch as f64, 0.0)?;
        property_mse = Some(tape.value(mse).scalar_value());
        let weighted = tape.affine(mse, property_weight, 0.0)?;
        total = tape.add(total, weighted)?;
    }

    let parts = LossParts {
        total: tape.value(total).scalar_value(),
        recon: tape.value(recon).scalar_value(),
        mmd: tape.value(mmd).scalar_value(),
        property_mse,
    };
    Ok((total, parts))
}

/// The published objective: reconstruction + lambda * MMD (no property
/// term).
#[allow(clippy::too_many_arguments)]
pub fn wae_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: &ModelDims,
    vocab: &ReactantVocabulary,
    bags: &[&ReactantBag],
    lambda: f64,
    kernel: MmdKernel,
    rng: &mut impl Rng,
) -> Result<(Var, LossParts), WaeError> {
    batch_loss(
        tape, store, dims, vocab, bags, None, lambda, kernel, 1.0, rng,
    )
}

#[cfg(test)]
mod tests {
    use super::super::model::tests::tiny_model;
    use super::*;
    use crate::fmath;
    use crate::rng::stream;

    #[test]
    fn uniform_logits_give_k_plus_one_log_v_plus_one() {
        let (vocab, dims, store) = tiny_model(7);
        // zero decoder + zero halt makes every logit 0: uniform over V+1
        let mut store2 = store;
        let names: Vec<String> = store2.names().map(|s| s.to_string()).collect();
        for name in names {
            for v in store2.get_mut(&name).unwrap().data_mut() {
                *v = 0.0;
            }
        }
        let bag = ReactantBag::new(vec![0, 1], vocab.len()).unwrap();
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store2, &dims, &vocab).unwrap();
        let z = tape.constant(Tensor::vector(vec![0.0; dims.latent_dim])).unwrap();
        let loss =
            reconstruction_loss(&mut tape, &store2, &dims, &vocab, &emb, z, &bag, &[0, 1])
                .unwrap();
        let expect = 3.0 * fmath::ln((vocab.len() + 1) as f64); // (k+1) ln(V+1)
        assert!((tape.value(loss).scalar_value() - expect).abs() < 1e-12);
    }

    #[test]
    fn recon_loss_is_nonnegative_and_rejects_bad_ordering() {
        let (vocab, dims, store) = tiny_model(8);
        let bag = ReactantBag::new(vec![0, 2], vocab.len()).unwrap();
        let mut tape = Tape::new();
        let emb = VocabEmbeddings::build(&mut tape, &store, &dims, &vocab).unwrap();
        let z = tape
            .constant(Tensor::vector(vec![0.1; dims.latent_dim]))
            .unwrap();
        let loss =
            reconstruction_loss(&mut tape, &store, &dims, &vocab, &emb, z, &bag, &[1, 0]).unwrap();
        assert!(tape.value(loss).scalar_value() >= 0.0);
        assert!(matches!(
            reconstruction_loss(&mut tape, &store, &dims, &vocab, &emb, z, &bag, &[0, 0]),
            Err(WaeError::BadOrdering)
        ));
    }

    #[test]
    fn lambda_zero_is_pure_reconstruction_and_decomposition_holds() {
        let (vocab, dims, store) = tiny_model(9);
        let bags = [
            ReactantBag::new(vec![0], vocab.len()).unwrap(),
            ReactantBag::new(vec![1, 2], vocab.len()).unwrap(),
            ReactantBag::new(vec![3, 3], vocab.len()).unwrap(),
        ];
        let refs: Vec<&ReactantBag> = bags.iter().collect();
        let kernel = MmdKernel::default_for_dim(dims.latent_dim);

        let run = |lambda: f64| {
            let mut rng = stream(33, "loss");
            let mut tape = Tape::new();
            let (_, parts) = wae_loss(
                &mut tape, &store, &dims, &vocab, &refs, lambda, kernel, &mut rng,
            )
            .unwrap();
            parts
        };
        let at_zero = run(0.0);
        assert_eq!(at_zero.total, at_zero.recon);
        let at_ten = run(10.0);
        // same rng stream -> identical recon and mmd parts
        assert_eq!(at_zero.recon, at_ten.recon);
        assert_eq!(at_zero.mmd, at_ten.mmd);
        assert!((at_ten.total - at_zero.total - 10.0 * at_ten.mmd).abs() < 1e-12);
    }

    #[test]
    fn batch_too_small() {
        let (vocab, dims, store) = tiny_model(10);
        let bag = ReactantBag::new(vec![0], vocab.len()).unwrap();
        let mut rng = stream(1, "small");
        let mut tape = Tape::new();
        assert!(matches!(
            wae_loss(
                &mut tape,
                &store,
                &dims,
                &vocab,
                &[&bag],
                10.0,
                MmdKernel::default_for_dim(dims.latent_dim),
                &mut rng
            ),
            Err(WaeError::BatchTooSmall(1))
        ));
    }

    /// The acceptance-gate rehearsal: analytic gradients of the full
    /// objective (recon + lambda mmd + property mse) against central finite
    /// differences on a 4-reactant vocabulary, 3-bag batch.
    #[test]
    fn full_loss_gradcheck() {
        use crate::nn::{finite_diff_grad, max_param_rel_err};
        let (vocab, dims, mut store) = tiny_model(11);
        let bags = [
            ReactantBag::new(vec![0, 1], vocab.len()).unwrap(),
            ReactantBag::new(vec![2], vocab.len()).unwrap(),
            ReactantBag::new(vec![3, 0], vocab.len()).unwrap(),
        ];
        let refs: Vec<&ReactantBag> = bags.iter().collect();
        let targets = [0.7, 0.4, 0.55];
        let kernel = MmdKernel::default_for_dim(dims.latent_dim);

        let build = |tape: &mut Tape, s: &ParameterStore| {
            let mut rng = stream(77, "gradcheck");
            let (loss, _) = batch_loss(
                tape,
                s,
                &dims,
                &vocab,
                &refs,
                Some(&targets),
                10.0,
                kernel,
                1.0,
                &mut rng,
            )
            .map_err(|e| match e {
                WaeError::Nn(n) => n,
                other => panic!("unexpected error {other}"),
            })?;
            Ok(loss)
        };

        store.zero_grads();
        let mut tape = Tape::new();
        let loss = build(&mut tape, &store).unwrap();
        let grads = tape.backward(loss).unwrap();
        grads.accumulate_into(&tape, &mut store);

        let numeric = finite_diff_grad(
            |s| {
                let mut tape = Tape::new();
                let loss = build(&mut tape, s)?;
                Ok(tape.value(loss).scalar_value())
            },
            &mut store,
            1e-5,
        )
        .unwrap();
        let worst = max_param_rel_err(&store, &numeric);
        assert!(worst < 1e-4, "worst rel err {worst}");
    }
}
