//! Named parameter tensors with gradient and Adam state slots.

use crate::prelude::*;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{NnError, Tensor};
use crate::fmath;

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

struct Slot {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Ordered map name -> (value, gradient, Adam moments). Iteration follows
/// insertion order, which also fixes the serialization layout.
pub struct ParameterStore {
    id: u64,
    slots: Vec<Slot>,
    index: BTreeMap<String, usize>,
}

impl Default for ParameterStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            slots: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    /// Identity used by tapes to key parameter bindings; unique per store.
    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<(), NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let shape = value.shape().to_vec();
        self.index.insert(name.to_string(), self.slots.len());
        self.slots.push(Slot {
            name: name.to_string(),
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn slot_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.slot_of(name)
            .map(|i| &self.slots[i].value)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        match self.slot_of(name) {
            Some(i) => Ok(&mut self.slots[i].value),
            None => Err(NnError::UnknownParam(name.to_string())),
        }
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        self.slot_of(name)
            .map(|i| &self.slots[i].grad)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub(crate) fn value_at(&self, slot: usize) -> &Tensor {
        &self.slots[slot].value
    }

    pub(crate) fn accumulate_grad(&mut self, slot: usize, grad: &Tensor) {
        self.slots[slot].grad.add_assign(grad);
    }

    /// (name, value) pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &s.value))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn zero_grads(&mut self) {
        for slot in &mut self.slots {
            for g in slot.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// Bitwise equality of parameter values (names, shapes, bits).
    pub fn values_equal(&self, other: &ParameterStore) -> bool {
        self.len() == other.len()
            && self.slots.iter().zip(other.slots.iter()).all(|(a, b)| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a.value
                        .data()
                        .iter()
                        .zip(b.value.data().iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction at step `t` (1-based). Gradients are
/// zeroed afterwards.
pub fn adam_step(store: &mut ParameterStore, lr: f64, t: u64, hyper: &AdamHyper) {
    debug_assert!(t >= 1);
    let b1 = hyper.beta1;
    let b2 = hyper.beta2;
    let c1 = 1.0 - fmath::powi(b1, t as i32);
    let c2 = 1.0 - fmath::powi(b2, t as i32);
    for slot in &mut store.slots {
        let g = slot.grad.data();
        let m = slot.m.data_mut();
        for (mi, &gi) in m.iter_mut().zip(g.iter()) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
        }
        let v = slot.v.data_mut();
        for (vi, &gi) in v.iter_mut().zip(g.iter()) {
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
        }
        let w = slot.value.data_mut();
        for i in 0..w.len() {
            let m_hat = slot.m.data()[i] / c1;
            let v_hat = slot.v.data()[i] / c2;
            w[i] -= lr * m_hat / (fmath::sqrt(v_hat) + hyper.eps);
        }
        for gi in slot.grad.data_mut() {
            *gi = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_and_duplicates() {
        let mut s = ParameterStore::new();
        s.insert("b", Tensor::scalar(1.0)).unwrap();
        s.insert("a", Tensor::scalar(2.0)).unwrap();
        let names: Vec<&str> = s.names().collect();
        assert_eq!(names, ["b", "a"]);
        assert!(matches!(
            s.insert("a", Tensor::scalar(0.0)),
            Err(NnError::DuplicateParam(_))
        ));
    }

    #[test]
    fn zero_gradient_leaves_parameters_untouched() {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::vector(vec![1.5, -2.0])).unwrap();
        adam_step(&mut s, 0.1, 1, &AdamHyper::default());
        assert_eq!(s.get("w").unwrap().data(), &[1.5, -2.0]);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        // closed form at t=1: lr * g / (|g| + eps * sqrt(1-b2)) ~ lr * sign(g)
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::scalar(0.0)).unwrap();
        let slot = s.slot_of("w").unwrap();
        s.accumulate_grad(slot, &Tensor::scalar(3.7));
        adam_step(&mut s, 0.01, 1, &AdamHyper::default());
        let w = s.get("w").unwrap().scalar_value();
        assert!(w < 0.0);
        assert!((w.abs() - 0.01).abs() < 1e-6);
        // gradient zeroed afterwards
        assert_eq!(s.grad("w").unwrap().scalar_value(), 0.0);
    }

    #[test]
    fn determinism() {
        let run = || {
            let mut s = ParameterStore::new();
            s.insert("w", Tensor::vector(vec![0.3, -0.7, 1.1])).unwrap();
            let slot = s.slot_of("w").unwrap();
            for t in 1..=5 {
                s.accumulate_grad(slot, &Tensor::vector(vec![0.1, 0.2, -0.3]));
                adam_step(&mut s, 0.05, t, &AdamHyper::default());
            }
            s.get("w").unwrap().data().to_vec()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
