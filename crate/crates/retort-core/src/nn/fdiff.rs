//! Central finite differences over a parameter store — the gradient oracle
//! every differentiable path in this crate is checked against.

use crate::prelude::*;

use super::store::ParameterStore;
use super::tensor::Tensor;
use super::NnError;
use crate::fmath;

/// Numeric gradient of `loss` w.r.t. every scalar in `store`, by central
/// differences. The store is restored bit-exactly afterwards; `loss` must be
/// deterministic given the store.
pub fn finite_diff_grad<F>(
    mut loss: F,
    store: &mut ParameterStore,
    epsilon: f64,
) -> Result<Vec<(String, Tensor)>, NnError>
where
    F: FnMut(&ParameterStore) -> Result<f64, NnError>,
{
    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let len = store.get(&name)?.len();
        let shape = store.get(&name)?.shape().to_vec();
        let mut grad = Vec::with_capacity(len);
        for i in 0..len {
            let original = store.get(&name)?.data()[i];
            store.get_mut(&name)?.data_mut()[i] = original + epsilon;
            let plus = loss(store)?;
            store.get_mut(&name)?.data_mut()[i] = original - epsilon;
            let minus = loss(store)?;
            store.get_mut(&name)?.data_mut()[i] = original;
            grad.push((plus - minus) / (2.0 * epsilon));
        }
        out.push((name, Tensor::from_shape(&shape, grad)?));
    }
    Ok(out)
}

/// |a - n| / max(|a|, |n|, 1e-5). The floor keeps near-zero gradients from
/// amplifying finite-difference noise into spurious failures: central
/// differences at eps = 1e-5 on an O(1) loss carry ~1e-10 of roundoff, so
/// below 1e-5 the comparison is noise, not signal (same reasoning as the
/// usual gradcheck atol).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = fmath::abs(analytic).max(fmath::abs(numeric)).max(1e-5);
    fmath::abs(analytic - numeric) / denom
}

/// Worst relative error between a store's accumulated analytic gradients and
/// a finite-difference result.
pub fn max_param_rel_err(store: &ParameterStore, numeric: &[(String, Tensor)]) -> f64 {
    let mut worst = 0.0f64;
    for (name, num) in numeric {
        let ana = store.grad(name).expect("parameter exists");
        for (&a, &n) in ana.data().iter().zip(num.data().iter()) {
            worst = worst.max(relative_error(a, n));
        }
    }
    worst
}
