//! Layer primitives and their backward passes.

use crate::nn::scalar::sigmoid;
use crate::nn::{Real, TensorBuf};
use crate::{Error, Result};

/// Gradients of an affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGrads<T> {
    pub dx: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

fn affine_dims<T: Real>(x: &[T], w: &TensorBuf<T>, b: &[T]) -> Result<(usize, usize)> {
    let (m, n) = w.dims2()?;
    if x.len() != n || b.len() != m {
        return Err(Error::Shape(format!(
            "affine: W is {m}x{n}, x has {}, b has {}",
            x.len(),
            b.len()
        )));
    }
    Ok((m, n))
}

/// `y = W·x + b`.
pub fn affine<T: Real>(x: &[T], w: &TensorBuf<T>, b: &[T]) -> Result<Vec<T>> {
    let (m, n) = affine_dims(x, w, b)?;
    let mut y = b.to_vec();
    matvec_acc(w.data(), m, n, x, &mut y);
    Ok(y)
}

pub fn affine_backward<T: Real>(
    x: &[T],
    w: &TensorBuf<T>,
    grad_y: &[T],
) -> Result<AffineGrads<T>> {
    let (m, n) = w.dims2()?;
    if x.len() != n || grad_y.len() != m {
        return Err(Error::Shape(format!(
            "affine_backward: W is {m}x{n}, x has {}, grad has {}",
            x.len(),
            grad_y.len()
        )));
    }
    let mut dw = vec![T::zero(); m * n];
    outer_acc(grad_y, x, &mut dw);
    let mut dx = vec![T::zero(); n];
    matvec_t_acc(w.data(), m, n, grad_y, &mut dx);
    Ok(AffineGrads {
        dx,
        dw,
        db: grad_y.to_vec(),
    })
}

/// `y += W·x` for row-major `W` of `rows×cols`.
#[inline]
pub fn matvec_acc<T: Real>(w: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, yr) in y.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *yr += acc;
    }
}

/// `x += Wᵀ·g`.
#[inline]
pub fn matvec_t_acc<T: Real>(w: &[T], rows: usize, cols: usize, g: &[T], x: &mut [T]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (xi, a) in x.iter_mut().zip(row) {
            *xi += *a * gr;
        }
    }
}

/// `dw += g·xᵀ`.
#[inline]
pub fn outer_acc<T: Real>(g: &[T], x: &[T], dw: &mut [T]) {
    let n = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == T::zero() {
            continue;
        }
        let row = &mut dw[r * n..(r + 1) * n];
        for (d, xi) in row.iter_mut().zip(x) {
            *d += *gr * *xi;
        }
    }
}

/// Gated linear unit: `out[i] = pre[i]·σ(pre[C+i])`.
pub fn glu<T: Real>(pre: &[T]) -> Result<Vec<T>> {
    if pre.len() % 2 != 0 {
        return Err(Error::Shape(format!("glu: odd input length {}", pre.len())));
    }
    let c = pre.len() / 2;
    let mut out = vec![T::zero(); c];
    glu_into(pre, &mut out);
    Ok(out)
}

#[inline]
pub fn glu_into<T: Real>(pre: &[T], out: &mut [T]) {
    let c = out.len();
    let (v, g) = pre.split_at(c);
    for i in 0..c {
        out[i] = v[i] * sigmoid(g[i]);
    }
}

/// Gradient w.r.t. the `2C` pre-activation given the gradient on the `C` outputs.
pub fn glu_backward<T: Real>(pre: &[T], grad_out: &[T]) -> Result<Vec<T>> {
    if pre.len() != 2 * grad_out.len() {
        return Err(Error::Shape(format!(
            "glu_backward: pre has {}, grad has {}",
            pre.len(),
            grad_out.len()
        )));
    }
    let mut d = vec![T::zero(); pre.len()];
    glu_backward_into(pre, grad_out, &mut d);
    Ok(d)
}

#[inline]
pub fn glu_backward_into<T: Real>(pre: &[T], grad_out: &[T], d_pre: &mut [T]) {
    let c = grad_out.len();
    let (v, g) = pre.split_at(c);
    let (dv, dg) = d_pre.split_at_mut(c);
    for i in 0..c {
        let s = sigmoid(g[i]);
        dv[i] = grad_out[i] * s;
        dg[i] = grad_out[i] * v[i] * s * (T::one() - s);
    }
}

#[inline]
pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zero the gradient wherever the ReLU output was clipped.
#[inline]
pub fn relu_backward_inplace<T: Real>(out: &[T], grad: &mut [T]) {
    for (g, o) in grad.iter_mut().zip(out) {
        if *o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, v| m.max(*v));
    let mut p: Vec<T> = logits.iter().map(|v| (*v - max).exp()).collect();
    let z: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v = *v / z);
    p
}

/// Negative log-likelihood of `target` under `softmax(logits)`.
pub fn softmax_nll<T: Real>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if logits.len() < 2 {
        return Err(Error::Shape(format!("softmax_nll: need at least 2 logits, got {}", logits.len())));
    }
    if target >= logits.len() {
        return Err(Error::Invalid(format!(
            "softmax_nll: target {target} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, v| m.max(*v));
    let lse = logits.iter().map(|v| (*v - max).exp()).sum::<T>().ln() + max;
    let loss = lse - logits[target];
    Ok((loss, softmax(logits)))
}

/// `probs − onehot(target)`.
pub fn softmax_nll_backward<T: Real>(probs: &[T], target: usize) -> Vec<T> {
    let mut g = probs.to_vec();
    g[target] -= T::one();
    g
}

pub fn argmax<T: Real>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}
