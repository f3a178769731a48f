//! The reverse-mode tape.
//!
//! Forward ops append nodes; `backward` walks the nodes in exact reverse
//! order and accumulates gradients additively. Parameter bindings are
//! memoized per (store, slot), so using a parameter many times in one tape
//! creates one leaf whose gradient collects every contribution.

use crate::prelude::*;

use super::mmd::MmdKernel;
use super::store::ParameterStore;
use super::tensor::{mm_nn, mm_nt, mm_tn, Tensor};
use super::{shape_err, NnError};
use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    Matmul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    AddBias { x: Var, bias: Var },
    Affine { x: Var, scale: f64 },
    Exp { x: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    Relu { x: Var },
    Sum { x: Var },
    Mean { x: Var },
    ConcatRows { parts: Vec<Var> },
    Slice { x: Var, axis: usize, start: usize, end: usize },
    SoftmaxCrossEntropy { logits: Var, probs: Tensor },
    Mmd { a: Var, b: Var, kernel: MmdKernel },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<(u64, usize), Var>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Add every parameter-leaf gradient into its store slot. Leaves bound
    /// to other stores are left alone.
    pub fn accumulate_into(&self, tape: &Tape, store: &mut ParameterStore) {
        for (&(store_id, slot), &var) in &tape.params {
            if store_id != store.id() {
                continue;
            }
            if let Some(grad) = self.get(var) {
                store.accumulate_grad(slot, grad);
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Checkpoint for [`Tape::truncate`].
    pub fn mark(&self) -> usize {
        self.nodes.len()
    }

    /// Drop every node recorded after `mark`. Parameter bindings made after
    /// the mark are forgotten too, so they re-bind cleanly later.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
        self.params.retain(|_, var| var.0 < mark);
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op) -> Result<Var, NnError> {
        if !value.all_finite() {
            return Err(NnError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: node_op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant (non-parameter) input. Its gradient is computed but feeds
    /// nothing.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, NnError> {
        self.push("constant", value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Result<Var, NnError> {
        self.constant(Tensor::scalar(v))
    }

    /// Bind a store parameter as a leaf. Repeated binds of the same
    /// parameter return the same var.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var, NnError> {
        let slot = store
            .slot_of(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))?;
        let key = (store.id(), slot);
        if let Some(&var) = self.params.get(&key) {
            return Ok(var);
        }
        let var = self.push("param", store.value_at(slot).clone(), Op::Param)?;
        self.params.insert(key, var);
        Ok(var)
    }

    // ---- forward primitives -------------------------------------------

    /// Matrix/vector product: `[n,k]x[k,m] -> [n,m]`, `[n,k]x[k] -> [n]`,
    /// `[k]x[k,m] -> [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = match (va.rank(), vb.rank()) {
            (2, 2) => {
                if va.cols() != vb.rows() {
                    return Err(shape_err(
                        "matmul",
                        format!("{:?} x {:?}", va.shape(), vb.shape()),
                    ));
                }
                mm_nn(va, vb)
            }
            (2, 1) => {
                if va.cols() != vb.len() {
                    return Err(shape_err(
                        "matmul",
                        format!("{:?} x {:?}", va.shape(), vb.shape()),
                    ));
                }
                let m = Tensor::from_shape(&[vb.len(), 1], vb.data().to_vec())?;
                let out = mm_nn(va, &m);
                Tensor::vector(out.data().to_vec())
            }
            (1, 2) => {
                if va.len() != vb.rows() {
                    return Err(shape_err(
                        "matmul",
                        format!("{:?} x {:?}", va.shape(), vb.shape()),
                    ));
                }
                let m = Tensor::from_shape(&[1, va.len()], va.data().to_vec())?;
                let out = mm_nn(&m, vb);
                Tensor::vector(out.data().to_vec())
            }
            _ => {
                return Err(shape_err(
                    "matmul",
                    format!("unsupported ranks {:?} x {:?}", va.shape(), vb.shape()),
                ))
            }
        };
        self.push("matmul", value, Op::Matmul { a, b })
    }

    fn elementwise2(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        node_op: Op,
    ) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data().iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::from_shape(va.shape(), data)?;
        self.push(op, value, node_op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.elementwise2("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.elementwise2("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.elementwise2("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    /// Broadcast a bias vector over the rows of a matrix (or add it to a
    /// plain vector).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NnError> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.rank() != 1 {
            return Err(shape_err("add_bias", "bias must be rank 1".to_string()));
        }
        let value = match vx.rank() {
            1 => {
                if vx.len() != vb.len() {
                    return Err(shape_err(
                        "add_bias",
                        format!("{:?} vs {:?}", vx.shape(), vb.shape()),
                    ));
                }
                Tensor::vector(
                    vx.data()
                        .iter()
                        .zip(vb.data().iter())
                        .map(|(&x, &b)| x + b)
                        .collect(),
                )
            }
            2 => {
                if vx.cols() != vb.len() {
                    return Err(shape_err(
                        "add_bias",
                        format!("{:?} vs {:?}", vx.shape(), vb.shape()),
                    ));
                }
                let cols = vx.cols();
                let data = vx
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x + vb.data()[i % cols])
                    .collect();
                Tensor::from_shape(vx.shape(), data)?
            }
            _ => return Err(shape_err("add_bias", "rank must be 1 or 2".to_string())),
        };
        self.push("add_bias", value, Op::AddBias { x, bias })
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var, NnError> {
        let vx = self.value(x);
        let data = vx.data().iter().map(|&v| scale * v + shift).collect();
        let value = Tensor::from_shape(vx.shape(), data)?;
        self.push("affine", value, Op::Affine { x, scale })
    }

    fn unary(
        &mut self,
        op: &'static str,
        x: Var,
        f: impl Fn(f64) -> f64,
        node_op: Op,
    ) -> Result<Var, NnError> {
        let vx = self.value(x);
        let data = vx.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_shape(vx.shape(), data)?;
        self.push(op, value, node_op)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary("exp", x, fmath::exp, Op::Exp { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary("sigmoid", x, fmath::sigmoid, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary("tanh", x, fmath::tanh, Op::Tanh { x })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary("relu", x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu { x })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NnError> {
        let total: f64 = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(total), Op::Sum { x })
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, NnError> {
        let vx = self.value(x);
        if vx.is_empty() {
            return Err(shape_err("mean", "empty tensor".to_string()));
        }
        let total: f64 = vx.data().iter().sum();
        let value = Tensor::scalar(total / vx.len() as f64);
        self.push("mean", value, Op::Mean { x })
    }

    /// Stack 1-D vectors of equal length into a `[p, m]` matrix.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(shape_err("concat_rows", "no parts".to_string()));
        }
        let m = self.value(parts[0]).len();
        let mut data = Vec::with_capacity(parts.len() * m);
        for &p in parts {
            let vp = self.value(p);
            if vp.rank() != 1 || vp.len() != m {
                return Err(shape_err(
                    "concat_rows",
                    format!("expected [{m}], got {:?}", vp.shape()),
                ));
            }
            data.extend_from_slice(vp.data());
        }
        let value = Tensor::from_shape(&[parts.len(), m], data)?;
        self.push(
            "concat_rows",
            value,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        )
    }

    /// Contiguous range along `axis` (0 = rows / vector entries, 1 = columns).
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        if start >= end {
            return Err(shape_err("slice", "empty range".to_string()));
        }
        let value = match (vx.rank(), axis) {
            (1, 0) => {
                if end > vx.len() {
                    return Err(shape_err("slice", "range out of bounds".to_string()));
                }
                Tensor::vector(vx.data()[start..end].to_vec())
            }
            (2, 0) => {
                if end > vx.rows() {
                    return Err(shape_err("slice", "row range out of bounds".to_string()));
                }
                let c = vx.cols();
                Tensor::from_shape(&[end - start, c], vx.data()[start * c..end * c].to_vec())?
            }
            (2, 1) => {
                if end > vx.cols() {
                    return Err(shape_err("slice", "column range out of bounds".to_string()));
                }
                let mut data = Vec::with_capacity((end - start) * vx.rows());
                for i in 0..vx.rows() {
                    data.extend_from_slice(&vx.row(i)[start..end]);
                }
                Tensor::from_shape(&[vx.rows(), end - start], data)?
            }
            _ => return Err(shape_err("slice", "unsupported rank/axis".to_string())),
        };
        self.push("slice", value, Op::Slice { x, axis, start, end })
    }

    /// Cross entropy of `target` under `softmax(logits)` for 1-D logits.
    /// Numerically stabilized; the softmax probabilities are saved for the
    /// backward pass.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, NnError> {
        let vl = self.value(logits);
        if vl.rank() != 1 || target >= vl.len() {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("logits {:?}, target {target}", vl.shape()),
            ));
        }
        let max = vl.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = Vec::with_capacity(vl.len());
        let mut denom = 0.0;
        for &l in vl.data() {
            let e = fmath::exp(l - max);
            probs.push(e);
            denom += e;
        }
        for p in &mut probs {
            *p /= denom;
        }
        let loss = fmath::ln(denom) + max - vl.data()[target];
        let probs = Tensor::vector(probs);
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs: probs_with_target(probs, target),
            },
        )
    }

    /// Biased V-statistic MMD^2 between the rows of `a` and `b`;
    /// differentiable w.r.t. both.
    pub fn mmd_squared(&mut self, a: Var, b: Var, kernel: MmdKernel) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.cols() {
            return Err(shape_err(
                "mmd_squared",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let value = super::mmd::forward(va, vb, kernel);
        self.push("mmd_squared", Tensor::scalar(value), Op::Mmd { a, b, kernel })
    }

    // ---- backward ------------------------------------------------------

    /// Reverse pass from a scalar loss. Returns a gradient per node;
    /// gradients of unused branches stay `None`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        if !self.value(loss).is_scalar() && self.value(loss).len() != 1 {
            return Err(shape_err("backward", "loss must be scalar".to_string()));
        }
        let seed = Tensor::from_shape(self.value(loss).shape(), vec![1.0])?;
        self.backward_seeded(loss, seed)
    }

    /// Reverse pass with an explicit output cotangent (vector-Jacobian
    /// product). Lets staged computations chain their backward passes.
    pub fn backward_seeded(&self, output: Var, seed: Tensor) -> Result<Gradients, NnError> {
        if seed.shape() != self.value(output).shape() {
            return Err(shape_err(
                "backward_seeded",
                format!(
                    "seed {:?} vs output {:?}",
                    seed.shape(),
                    self.value(output).shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(out_grad) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &out_grad, &mut grads);
            grads[idx] = Some(out_grad);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
        match &mut grads[var.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, idx: usize, out_grad: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[idx].op {
            Op::Leaf | Op::Param => {}
            Op::Matmul { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                match (va.rank(), vb.rank()) {
                    (2, 2) => {
                        Self::accumulate(grads, *a, mm_nt(out_grad, vb));
                        Self::accumulate(grads, *b, mm_tn(va, out_grad));
                    }
                    (2, 1) => {
                        // c = A x: dA = dc outer x, dx = A^T dc
                        let n = va.rows();
                        let k = va.cols();
                        let mut da = Tensor::zeros(&[n, k]);
                        for i in 0..n {
                            let g = out_grad.data()[i];
                            for j in 0..k {
                                da.set2(i, j, g * vb.data()[j]);
                            }
                        }
                        Self::accumulate(grads, *a, da);
                        let dc =
                            Tensor::from_shape(&[n, 1], out_grad.data().to_vec()).expect("shape");
                        let dx = mm_tn(va, &dc);
                        Self::accumulate(grads, *b, Tensor::vector(dx.data().to_vec()));
                    }
                    (1, 2) => {
                        // c = x B: dx = B dc, dB = x outer dc
                        let k = va.len();
                        let m = vb.cols();
                        let dc =
                            Tensor::from_shape(&[m, 1], out_grad.data().to_vec()).expect("shape");
                        let dx = mm_nn(vb, &dc);
                        Self::accumulate(grads, *a, Tensor::vector(dx.data().to_vec()));
                        let mut db = Tensor::zeros(&[k, m]);
                        for i in 0..k {
                            for j in 0..m {
                                db.set2(i, j, va.data()[i] * out_grad.data()[j]);
                            }
                        }
                        Self::accumulate(grads, *b, db);
                    }
                    _ => unreachable!("matmul forward validated ranks"),
                }
            }
            Op::Add { a, b } => {
                Self::accumulate(grads, *a, out_grad.clone());
                Self::accumulate(grads, *b, out_grad.clone());
            }
            Op::Sub { a, b } => {
                Self::accumulate(grads, *a, out_grad.clone());
                let neg = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad.data().iter().map(|&g| -g).collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *b, neg);
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let da = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad
                        .data()
                        .iter()
                        .zip(vb.data())
                        .map(|(&g, &y)| g * y)
                        .collect(),
                )
                .expect("shape");
                let db = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(&g, &x)| g * x)
                        .collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::AddBias { x, bias } => {
                Self::accumulate(grads, *x, out_grad.clone());
                let vb_len = self.value(*bias).len();
                let mut db = vec![0.0; vb_len];
                for (i, &g) in out_grad.data().iter().enumerate() {
                    db[i % vb_len] += g;
                }
                Self::accumulate(grads, *bias, Tensor::vector(db));
            }
            Op::Affine { x, scale } => {
                let dx = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad.data().iter().map(|&g| g * scale).collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *x, dx);
            }
            Op::Exp { x } => {
                let y = &self.nodes[idx].value;
                Self::accumulate(grads, *x, hadamard(out_grad, y.data()));
            }
            Op::Sigmoid { x } => {
                let y = self.nodes[idx].value.data();
                let dx = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad
                        .data()
                        .iter()
                        .zip(y)
                        .map(|(&g, &s)| g * s * (1.0 - s))
                        .collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let y = self.nodes[idx].value.data();
                let dx = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad
                        .data()
                        .iter()
                        .zip(y)
                        .map(|(&g, &t)| g * (1.0 - t * t))
                        .collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *x, dx);
            }
            Op::Relu { x } => {
                let y = self.nodes[idx].value.data();
                let dx = Tensor::from_shape(
                    out_grad.shape(),
                    out_grad
                        .data()
                        .iter()
                        .zip(y)
                        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                        .collect(),
                )
                .expect("shape");
                Self::accumulate(grads, *x, dx);
            }
            Op::Sum { x } => {
                let vx = self.value(*x);
                let g = out_grad.scalar_value();
                Self::accumulate(grads, *x, Tensor::fill(vx.shape(), g));
            }
            Op::Mean { x } => {
                let vx = self.value(*x);
                let g = out_grad.scalar_value() / vx.len() as f64;
                Self::accumulate(grads, *x, Tensor::fill(vx.shape(), g));
            }
            Op::ConcatRows { parts } => {
                let m = self.value(parts[0]).len();
                for (row, &p) in parts.iter().enumerate() {
                    Self::accumulate(
                        grads,
                        p,
                        Tensor::vector(out_grad.data()[row * m..(row + 1) * m].to_vec()),
                    );
                }
            }
            Op::Slice { x, axis, start, end } => {
                let vx = self.value(*x);
                let mut dx = Tensor::zeros(vx.shape());
                match (vx.rank(), *axis) {
                    (1, 0) => {
                        dx.data_mut()[*start..*end].copy_from_slice(out_grad.data());
                    }
                    (2, 0) => {
                        let c = vx.cols();
                        dx.data_mut()[*start * c..*end * c].copy_from_slice(out_grad.data());
                    }
                    (2, 1) => {
                        let w = end - start;
                        for i in 0..vx.rows() {
                            let src = &out_grad.data()[i * w..(i + 1) * w];
                            let c = vx.cols();
                            dx.data_mut()[i * c + start..i * c + end].copy_from_slice(src);
                        }
                    }
                    _ => unreachable!("slice forward validated rank/axis"),
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::SoftmaxCrossEntropy { logits, probs } => {
                // probs already has the one-hot target subtracted
                let g = out_grad.scalar_value();
                let dl = Tensor::vector(probs.data().iter().map(|&p| g * p).collect());
                Self::accumulate(grads, *logits, dl);
            }
            Op::Mmd { a, b, kernel } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let g = out_grad.scalar_value();
                let (da, db) = super::mmd::backward(va, vb, *kernel, g);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
        }
    }
}

fn hadamard(g: &Tensor, y: &[f64]) -> Tensor {
    Tensor::from_shape(
        g.shape(),
        g.data().iter().zip(y).map(|(&gi, &yi)| gi * yi).collect(),
    )
    .expect("shape")
}

/// softmax probabilities with 1 subtracted at the target: exactly the
/// cross-entropy gradient.
fn probs_with_target(mut probs: Tensor, target: usize) -> Tensor {
    probs.data_mut()[target] -= 1.0;
    probs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_uniform_cross_entropy() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![-2.0, 0.5])).unwrap();
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.5]);

        let logits = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0])).unwrap();
        let loss = tape.softmax_cross_entropy(logits, 1).unwrap();
        let expect = fmath::ln(3.0);
        assert!((tape.value(loss).scalar_value() - expect).abs() < 1e-12);
    }

    #[test]
    fn nonfinite_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![700.0, 800.0])).unwrap();
        assert!(matches!(
            tape.exp(x),
            Err(NnError::NonFinite { op: "exp" })
        ));
        assert!(tape.constant(Tensor::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1.0, 2.0])).unwrap();
        let b = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(tape.add(a, b).is_err());
        let m = tape
            .constant(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap())
            .unwrap();
        assert!(tape.matmul(m, b).is_err());
    }

    #[test]
    fn backward_through_composite() {
        // f(x) = sum((x * x) + 3x) => df/dx = 2x + 3
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5])).unwrap();
        let sq = tape.mul(x, x).unwrap();
        let lin = tape.affine(x, 3.0, 0.0).unwrap();
        let s = tape.add(sq, lin).unwrap();
        let loss = tape.sum(s).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gx = grads.get(x).unwrap();
        for (i, &xv) in [1.0, -2.0, 0.5].iter().enumerate() {
            assert!((gx.data()[i] - (2.0 * xv + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn param_binding_is_memoized_and_grads_accumulate() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::vector(vec![2.0, -1.0])).unwrap();
        let mut tape = Tape::new();
        let w1 = tape.param(&store, "w").unwrap();
        let w2 = tape.param(&store, "w").unwrap();
        assert_eq!(w1, w2);
        // loss = sum(w * w): dw = 2w, accumulated through both uses
        let sq = tape.mul(w1, w2).unwrap();
        let loss = tape.sum(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        grads.accumulate_into(&tape, &mut store);
        assert_eq!(store.grad("w").unwrap().data(), &[4.0, -2.0]);
    }

    #[test]
    fn truncate_forgets_bindings() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut tape = Tape::new();
        let mark = tape.mark();
        let w = tape.param(&store, "w").unwrap();
        let _ = w;
        tape.truncate(mark);
        assert!(tape.is_empty());
        // re-binding after truncate works
        let w2 = tape.param(&store, "w").unwrap();
        assert_eq!(tape.value(w2).scalar_value(), 1.0);
    }
}
