//! Gated graph neural network over molecular graphs.
//!
//! Nodes exchange bond-type-specific linear messages for a fixed number of
//! propagation steps, updating through a GRU-style gate; a gated weighted
//! sum followed by a linear projection yields the graph-level embedding.
//!
//! Bit-exact permutation invariance comes from ordering everything by
//! canonical rank before any float touches the tape: feature rows, adjacency
//! matrices and the final sum all live in rank space, so the accumulation
//! order is a function of the molecule alone.

use crate::prelude::*;
use rand::Rng;

use crate::chem::{atom_features, feature_dim, BondOrder, ElementTable, FeatureError, MolecularGraph};
use crate::nn::{
    glorot, gru_layer_step, linear, register_gru_stack, register_linear, register_projection,
    GruStackSpec, NnError, ParameterStore, Tape, Tensor, Var,
};

pub const BOND_CHANNELS: [BondOrder; 4] = [
    BondOrder::Single,
    BondOrder::Double,
    BondOrder::Triple,
    BondOrder::Aromatic,
];

fn channel_name(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Single => "single",
        BondOrder::Double => "double",
        BondOrder::Triple => "triple",
        BondOrder::Aromatic => "aromatic",
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GgnnDims {
    pub feature_dim: usize,
    pub node_dim: usize,
    pub embed_dim: usize,
    pub steps: usize,
}

impl GgnnDims {
    /// Paper-default sizes for a given element table: node states of 101,
    /// graph embeddings of 50, 4 propagation steps.
    pub fn defaults(table: &ElementTable) -> Self {
        GgnnDims {
            feature_dim: feature_dim(table),
            node_dim: 101,
            embed_dim: 50,
            steps: 4,
        }
    }
}

/// Register one GGNN namespace under `prefix` (message matrices, input
/// projection, node-update GRU, aggregation gate/transform, output
/// projection).
pub fn register_ggnn(
    store: &mut ParameterStore,
    prefix: &str,
    dims: &GgnnDims,
    rng: &mut impl Rng,
) -> Result<(), NnError> {
    for order in BOND_CHANNELS {
        store.insert(
            &format!("{prefix}.msg.{}", channel_name(order)),
            glorot(dims.node_dim, dims.node_dim, rng),
        )?;
    }
    register_projection(store, &format!("{prefix}.proj_in"), dims.feature_dim, dims.node_dim, rng)?;
    register_gru_stack(store, &node_gru_spec(prefix, dims), rng)?;
    register_linear(store, &format!("{prefix}.gate"), dims.node_dim, dims.node_dim, rng)?;
    register_linear(
        store,
        &format!("{prefix}.transform"),
        dims.node_dim,
        dims.node_dim,
        rng,
    )?;
    register_projection(
        store,
        &format!("{prefix}.proj_out"),
        dims.node_dim,
        dims.embed_dim,
        rng,
    )?;
    Ok(())
}

fn node_gru_spec(prefix: &str, dims: &GgnnDims) -> GruStackSpec {
    GruStackSpec {
        prefix: format!("{prefix}.update"),
        input_dim: dims.node_dim,
        hidden_dim: dims.node_dim,
        layers: 1,
    }
}

/// A molecule lowered to rank space: feature rows and per-bond-type
/// adjacency, ready for the tape. Deterministic given the graph, so callers
/// cache it.
#[derive(Debug, Clone)]
pub struct GraphTensors {
    pub n_atoms: usize,
    pub features: Tensor,
    /// Symmetric adjacency per bond channel; `None` when the molecule has no
    /// bonds of that type (skipping an all-zero term is exact).
    pub adjacency: [Option<Tensor>; 4],
}

pub fn graph_tensors(
    graph: &MolecularGraph,
    feature_table: &ElementTable,
) -> Result<GraphTensors, FeatureError> {
    let n = graph.atom_count();
    let ranks = graph.canonical_ranks();
    let fdim = feature_dim(feature_table);
    let mut features = Tensor::zeros(&[n, fdim]);
    for atom in 0..n {
        let f = atom_features(graph, atom, feature_table)?;
        let row = ranks[atom];
        features.data_mut()[row * fdim..(row + 1) * fdim].copy_from_slice(&f);
    }
    let mut adjacency: [Option<Tensor>; 4] = [None, None, None, None];
    for bond in graph.bonds() {
        let channel = BOND_CHANNELS
            .iter()
            .position(|&o| o == bond.order)
            .expect("every bond order has a channel");
        let adj = adjacency[channel].get_or_insert_with(|| Tensor::zeros(&[n, n]));
        let (ra, rb) = (ranks[bond.a], ranks[bond.b]);
        adj.set2(ra, rb, 1.0);
        adj.set2(rb, ra, 1.0);
    }
    Ok(GraphTensors {
        n_atoms: n,
        features,
        adjacency,
    })
}

/// Node states after `dims.steps` rounds of message passing; rows in rank
/// order. With zero steps this is just the projected input features.
pub fn embed_nodes(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    dims: &GgnnDims,
    gt: &GraphTensors,
) -> Result<Var, NnError> {
    let features = tape.constant(gt.features.clone())?;
    let proj_in = tape.param(store, &format!("{prefix}.proj_in.w"))?;
    let mut h = tape.matmul(features, proj_in)?;

    let adj_vars: Vec<Option<Var>> = gt
        .adjacency
        .iter()
        .map(|a| a.clone().map(|t| tape.constant(t)).transpose())
        .collect::<Result<_, _>>()?;

    let gru_prefix = format!("{prefix}.update.l0");
    for _ in 0..dims.steps {
        let mut message: Option<Var> = None;
        for (channel, adj) in adj_vars.iter().enumerate() {
            let Some(adj) = adj else { continue };
            let w = tape.param(
                store,
                &format!("{prefix}.msg.{}", channel_name(BOND_CHANNELS[channel])),
            )?;
            let transformed = tape.matmul(h, w)?;
            let routed = tape.matmul(*adj, transformed)?;
            message = Some(match message {
                None => routed,
                Some(m) => tape.add(m, routed)?,
            });
        }
        let message = match message {
            Some(m) => m,
            None => tape.constant(Tensor::zeros(&[gt.n_atoms, dims.node_dim]))?,
        };
        h = gru_layer_step(tape, store, &gru_prefix, dims.node_dim, message, h)?;
    }
    Ok(h)
}

/// Order-invariant readout: sigmoid(gate(h)) * transform(h), summed over
/// nodes in rank order, projected to the embedding dimension.
pub fn aggregate(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    dims: &GgnnDims,
    node_states: Var,
) -> Result<Var, NnError> {
    let n = tape.value(node_states).rows();
    let gate_pre = linear(tape, store, &format!("{prefix}.gate"), node_states)?;
    let gate = tape.sigmoid(gate_pre)?;
    let tr = linear(tape, store, &format!("{prefix}.transform"), node_states)?;
    let gated = tape.mul(gate, tr)?;
    let ones = tape.constant(Tensor::fill(&[n], 1.0))?;
    let summed = tape.matmul(ones, gated)?;
    let proj_out = tape.param(store, &format!("{prefix}.proj_out.w"))?;
    tape.matmul(summed, proj_out)
}

/// The shared molecule-embedding pathway: message passing then aggregation.
pub fn embed_molecule(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    dims: &GgnnDims,
    gt: &GraphTensors,
) -> Result<Var, NnError> {
    let states = embed_nodes(tape, store, prefix, dims, gt)?;
    aggregate(tape, store, prefix, dims, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use alloc::sync::Arc;
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_dims(table: &ElementTable) -> GgnnDims {
        GgnnDims {
            feature_dim: feature_dim(table),
            node_dim: 7,
            embed_dim: 5,
            steps: 2,
        }
    }

    fn setup(dims: &GgnnDims) -> ParameterStore {
        let mut rng = crate::rng::stream(21, "ggnn-test");
        let mut store = ParameterStore::new();
        register_ggnn(&mut store, "ggnn", dims, &mut rng).unwrap();
        store
    }

    fn embed(store: &ParameterStore, dims: &GgnnDims, graph: &MolecularGraph) -> Vec<f64> {
        let table = graph.table().clone();
        let gt = graph_tensors(graph, &table).unwrap();
        let mut tape = Tape::new();
        let e = embed_molecule(&mut tape, store, "ggnn", dims, &gt).unwrap();
        tape.value(e).data().to_vec()
    }

    #[test]
    fn zero_steps_is_projected_features() {
        let table = Arc::new(ElementTable::builtin());
        let mut dims = small_dims(&table);
        dims.steps = 0;
        let store = setup(&dims);
        let g = parse_smiles("CCO").unwrap();
        let gt = graph_tensors(&g, &table).unwrap();
        let mut tape = Tape::new();
        let states = embed_nodes(&mut tape, &store, "ggnn", &dims, &gt).unwrap();
        // directly compare against features * W
        let f = tape.constant(gt.features.clone()).unwrap();
        let w = tape.param(&store, "ggnn.proj_in.w").unwrap();
        let expect = tape.matmul(f, w).unwrap();
        assert_eq!(tape.value(states).data(), tape.value(expect).data());
    }

    #[test]
    fn bondless_graph_still_updates_through_gru() {
        let table = Arc::new(ElementTable::builtin());
        let dims = small_dims(&table);
        let store = setup(&dims);
        // two disconnected atoms: no adjacency at all
        let g = parse_smiles("C.O").unwrap();
        let e = embed(&store, &dims, &g);
        assert_eq!(e.len(), dims.embed_dim);
        assert!(e.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn permutation_invariance_is_bit_exact() {
        let table = Arc::new(ElementTable::builtin());
        let dims = small_dims(&table);
        let store = setup(&dims);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for smi in ["CC(=O)OCC", "c1ccncc1", "OB(O)c1ccccc1"] {
            let g = parse_smiles(smi).unwrap();
            let base = embed(&store, &dims, &g);
            let n = g.atom_count();
            for _ in 0..100 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let e = embed(&store, &dims, &g.permuted(&perm).unwrap());
                assert!(
                    base.iter().zip(e.iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
                    "{smi}"
                );
            }
        }
    }

    #[test]
    fn disjoint_copies_double_the_embedding() {
        let table = Arc::new(ElementTable::builtin());
        let dims = small_dims(&table);
        let store = setup(&dims);
        let single = embed(&store, &dims, &parse_smiles("CCO").unwrap());
        let double = embed(&store, &dims, &parse_smiles("CCO.CCO").unwrap());
        for (s, d) in single.iter().zip(double.iter()) {
            assert!((2.0 * s - d).abs() < 1e-9, "{s} vs {d}");
        }
    }

    #[test]
    fn identical_molecules_embed_identically() {
        let table = Arc::new(ElementTable::builtin());
        let dims = small_dims(&table);
        let store = setup(&dims);
        let a = embed(&store, &dims, &parse_smiles("CCO").unwrap());
        let b = embed(&store, &dims, &parse_smiles("OCC").unwrap());
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn message_matrix_gradients_match_finite_differences() {
        use crate::nn::{finite_diff_grad, max_param_rel_err};
        let table = Arc::new(ElementTable::builtin());
        let dims = small_dims(&table);
        let mut store = setup(&dims);
        let g = parse_smiles("CC=O").unwrap();
        let gt = graph_tensors(&g, &table).unwrap();

        let build = |tape: &mut Tape, s: &ParameterStore| {
            let e = embed_molecule(tape, s, "ggnn", &dims, &gt)?;
            let sq = tape.mul(e, e)?;
            tape.sum(sq)
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
        assert!(worst < 1e-5, "worst rel err {worst}");
    }
}
