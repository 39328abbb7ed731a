//! The temporal stack evaluated over a contiguous run of frames.
//!
//! `C(t, 0) = E·repr(t)` and for `l ≥ 1`
//! `C(t, l) = GLU(W1·C(t − d_l, l − 1) + W2·C(t, l − 1) + b) + C(t, l − 1)`.
//! Positions before the first row of a segment read as zero at every layer,
//! which is what left padding of an out-of-stream region means here.

use crate::nn::ops::{glu_backward_into, glu_into, matvec_acc, matvec_t_acc, outer_acc, relu_backward_inplace, relu_inplace};
use crate::nn::scalar::{gemm, Layout};
use crate::nn::{Grads, ParamStore, Real};
use crate::temporal::TemporalSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct LayerIds {
    w1: usize,
    w2: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct HeadIds {
    pub fc: [(usize, usize); 5],
}

/// A supervised (or queried) position inside a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub pos: usize,
    /// 1-based layer count feeding the classifier.
    pub layer: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadOut<T> {
    pub logits: Vec<T>,
    /// Raw regression output (normalised units when normalisation is on).
    pub s_norm: T,
}

#[derive(Clone, Debug)]
pub(crate) struct HeadCache<T> {
    gc: Vec<T>,
    h1: Vec<T>,
    gs: Vec<T>,
    h3: Vec<T>,
    h4: Vec<T>,
}

/// Everything a segment forward needs to run backward.
#[derive(Clone, Debug)]
pub struct SegmentCache<T> {
    rows: usize,
    reprs: Vec<T>,
    /// `c[l]` is `rows × C` for `l = 0..=L`.
    c: Vec<Vec<T>>,
    /// `pre[l - 1]` is `rows × 2C`.
    pre: Vec<Vec<T>>,
    queries: Vec<Query>,
    heads: Vec<HeadCache<T>>,
}

impl<T> SegmentCache<T> {
    pub fn queries(&self) -> &[Query] {
        &self.queries
    }
}

impl<T: Real> SegmentCache<T> {
    /// Activation `C(pos, layer)`.
    pub fn activation(&self, pos: usize, layer: usize) -> &[T] {
        let c = self.c[layer].len() / self.rows;
        &self.c[layer][pos * c..(pos + 1) * c]
    }
}

#[derive(Clone, Debug)]
pub struct TemporalNet {
    pub spec: TemporalSpec,
    pub repr_dim: usize,
    pub fc_hidden: usize,
    pub classes: usize,
    embed: usize,
    layers: Vec<LayerIds>,
    pub(crate) head: HeadIds,
}

fn fc_names(i: usize) -> (String, String) {
    (format!("head.fc{i}.w"), format!("head.fc{i}.b"))
}

impl TemporalNet {
    pub fn param_spec(spec: &TemporalSpec, repr_dim: usize, fc_hidden: usize, classes: usize) -> Vec<(String, Vec<usize>)> {
        let c = spec.channels;
        let h = fc_hidden;
        let mut out = vec![("temporal.embed".to_string(), vec![c, repr_dim])];
        for l in 1..=spec.layers() {
            out.push((format!("temporal.layer{l}.w1"), vec![2 * c, c]));
            out.push((format!("temporal.layer{l}.w2"), vec![2 * c, c]));
            out.push((format!("temporal.layer{l}.bias"), vec![2 * c]));
        }
        let dims = [(h, c), (classes, h), (h, c), (h, h), (1, h)];
        for (i, (o, n)) in dims.into_iter().enumerate() {
            let (w, b) = fc_names(i + 1);
            out.push((w, vec![o, n]));
            out.push((b, vec![o]));
        }
        out
    }

    pub fn bind<T: Real>(
        spec: TemporalSpec,
        repr_dim: usize,
        fc_hidden: usize,
        classes: usize,
        params: &ParamStore<T>,
    ) -> Result<Self> {
        spec.validate()?;
        for (name, shape) in Self::param_spec(&spec, repr_dim, fc_hidden, classes) {
            let id = params.require(&name)?;
            let got = params.param(id).value.shape();
            if got != shape.as_slice() {
                return Err(Error::Shape(format!("`{name}` has shape {got:?}, expected {shape:?}")));
            }
        }
        let layers = (1..=spec.layers())
            .map(|l| -> Result<LayerIds> {
                Ok(LayerIds {
                    w1: params.require(&format!("temporal.layer{l}.w1"))?,
                    w2: params.require(&format!("temporal.layer{l}.w2"))?,
                    bias: params.require(&format!("temporal.layer{l}.bias"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut fc = [(0, 0); 5];
        for (i, slot) in fc.iter_mut().enumerate() {
            let (w, b) = fc_names(i + 1);
            *slot = (params.require(&w)?, params.require(&b)?);
        }
        Ok(Self {
            embed: params.require("temporal.embed")?,
            spec,
            repr_dim,
            fc_hidden,
            classes,
            layers,
            head: HeadIds { fc },
        })
    }

    pub fn layers(&self) -> usize {
        self.spec.layers()
    }

    pub fn channels(&self) -> usize {
        self.spec.channels
    }

    #[inline]
    pub(crate) fn layer_weights<'a, T: Real>(&self, params: &'a ParamStore<T>, l: usize) -> (&'a [T], &'a [T], &'a [T]) {
        let ids = self.layers[l - 1];
        (params.value(ids.w1), params.value(ids.w2), params.value(ids.bias))
    }

    #[inline]
    pub(crate) fn embed_weights<'a, T: Real>(&self, params: &'a ParamStore<T>) -> &'a [T] {
        params.value(self.embed)
    }

    /// Forward over `rows` consecutive frame representations.
    pub fn forward<T: Real>(
        &self,
        params: &ParamStore<T>,
        reprs: &[T],
        queries: &[Query],
    ) -> Result<(Vec<HeadOut<T>>, SegmentCache<T>)> {
        let r = self.repr_dim;
        if reprs.len() % r != 0 {
            return Err(Error::Shape(format!("reprs length {} is not a multiple of {r}", reprs.len())));
        }
        let rows = reprs.len() / r;
        let l_max = self.layers();
        for q in queries {
            if q.pos >= rows {
                return Err(Error::Invalid(format!("query position {} outside segment of {rows}", q.pos)));
            }
            if q.layer == 0 || q.layer > l_max {
                return Err(Error::Invalid(format!("selected layer {} outside 1..={l_max}", q.layer)));
            }
        }
        let c = self.channels();
        let mut cs = Vec::with_capacity(l_max + 1);
        let mut pres = Vec::with_capacity(l_max);
        let mut c0 = vec![T::zero(); rows * c];
        gemm(rows, r, c, reprs, Layout::N, self.embed_weights(params), Layout::T, T::zero(), &mut c0);
        cs.push(c0);
        for l in 1..=l_max {
            let d = self.spec.dilations[l - 1];
            let (w1, w2, b) = self.layer_weights(params, l);
            let prev = &cs[l - 1];
            let mut pre = Vec::with_capacity(rows * 2 * c);
            for _ in 0..rows {
                pre.extend_from_slice(b);
            }
            gemm(rows, c, 2 * c, prev, Layout::N, w2, Layout::T, T::one(), &mut pre);
            if rows > d {
                gemm(rows - d, c, 2 * c, &prev[..(rows - d) * c], Layout::N, w1, Layout::T, T::one(), &mut pre[d * 2 * c..]);
            }
            let mut cur = prev.clone();
            let mut act = vec![T::zero(); c];
            for t in 0..rows {
                glu_into(&pre[t * 2 * c..(t + 1) * 2 * c], &mut act);
                for (o, a) in cur[t * c..(t + 1) * c].iter_mut().zip(&act) {
                    *o += *a;
                }
            }
            pres.push(pre);
            cs.push(cur);
        }
        let mut outs = Vec::with_capacity(queries.len());
        let mut heads = Vec::with_capacity(queries.len());
        for q in queries {
            let gc = self.skip_mean(&cs, q.pos, q.layer);
            let gs = self.skip_mean(&cs, q.pos, l_max);
            let (out, hc) = self.heads_forward(params, gc, gs);
            outs.push(out);
            heads.push(hc);
        }
        Ok((
            outs,
            SegmentCache {
                rows,
                reprs: reprs.to_vec(),
                c: cs,
                pre: pres,
                queries: queries.to_vec(),
                heads,
            },
        ))
    }

    fn skip_mean<T: Real>(&self, cs: &[Vec<T>], pos: usize, upto: usize) -> Vec<T> {
        let c = self.channels();
        let mut g = vec![T::zero(); c];
        for layer in cs.iter().take(upto + 1).skip(1) {
            for (a, v) in g.iter_mut().zip(&layer[pos * c..(pos + 1) * c]) {
                *a += *v;
            }
        }
        let w = T::one() / T::of(upto as f64);
        g.iter_mut().for_each(|v| *v *= w);
        g
    }

    /// Classification head on `gc`, regression head on `gs`.
    pub(crate) fn heads_forward<T: Real>(&self, params: &ParamStore<T>, gc: Vec<T>, gs: Vec<T>) -> (HeadOut<T>, HeadCache<T>) {
        let h = self.fc_hidden;
        let c = self.channels();
        let fc = |i: usize, x: &[T], rows: usize, cols: usize| -> Vec<T> {
            let (w, b) = self.head.fc[i];
            let mut y = params.value(b).to_vec();
            matvec_acc(params.value(w), rows, cols, x, &mut y);
            y
        };
        let mut h1 = fc(0, &gc, h, c);
        relu_inplace(&mut h1);
        let logits = fc(1, &h1, self.classes, h);
        let mut h3 = fc(2, &gs, h, c);
        relu_inplace(&mut h3);
        let mut h4 = fc(3, &h3, h, h);
        relu_inplace(&mut h4);
        let s = fc(4, &h4, 1, h)[0];
        (HeadOut { logits, s_norm: s }, HeadCache { gc, h1, gs, h3, h4 })
    }

    /// Returns `(d_gc, d_gs)` and accumulates head parameter gradients.
    fn heads_backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        hc: &HeadCache<T>,
        d_logits: &[T],
        d_s: T,
        grads: &mut Grads<T>,
    ) -> (Vec<T>, Vec<T>) {
        let h = self.fc_hidden;
        let c = self.channels();
        let fc_back = |grads: &mut Grads<T>, i: usize, x: &[T], gy: &[T], rows: usize, cols: usize| -> Vec<T> {
            let (w, b) = self.head.fc[i];
            outer_acc(gy, x, grads.get_mut(w));
            for (d, g) in grads.get_mut(b).iter_mut().zip(gy) {
                *d += *g;
            }
            let mut dx = vec![T::zero(); cols];
            matvec_t_acc(params.value(w), rows, cols, gy, &mut dx);
            dx
        };
        let mut dh1 = fc_back(grads, 1, &hc.h1, d_logits, self.classes, h);
        relu_backward_inplace(&hc.h1, &mut dh1);
        let d_gc = fc_back(grads, 0, &hc.gc, &dh1, h, c);
        let mut dh4 = fc_back(grads, 4, &hc.h4, &[d_s], 1, h);
        relu_backward_inplace(&hc.h4, &mut dh4);
        let mut dh3 = fc_back(grads, 3, &hc.h3, &dh4, h, h);
        relu_backward_inplace(&hc.h3, &mut dh3);
        let d_gs = fc_back(grads, 2, &hc.gs, &dh3, h, c);
        (d_gc, d_gs)
    }

    /// Backward through heads, skip averaging, the residual GLU stack and the
    /// embedding. Returns the gradient on the input representations.
    pub fn backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        cache: &SegmentCache<T>,
        d_logits: &[Vec<T>],
        d_s: &[T],
        grads: &mut Grads<T>,
    ) -> Result<Vec<T>> {
        if d_logits.len() != cache.queries.len() || d_s.len() != cache.queries.len() {
            return Err(Error::Invalid(format!(
                "stale cache: {} queries cached, {} / {} gradients supplied",
                cache.queries.len(),
                d_logits.len(),
                d_s.len()
            )));
        }
        let rows = cache.rows;
        let c = self.channels();
        let l_max = self.layers();
        let mut dc: Vec<Vec<T>> = (0..=l_max).map(|_| vec![T::zero(); rows * c]).collect();
        for ((q, hc), (dl, ds)) in cache.queries.iter().zip(&cache.heads).zip(d_logits.iter().zip(d_s)) {
            let (d_gc, d_gs) = self.heads_backward(params, hc, dl, *ds, grads);
            let wc = T::one() / T::of(q.layer as f64);
            let ws = T::one() / T::of(l_max as f64);
            for (l, dcl) in dc.iter_mut().enumerate().skip(1) {
                let row = &mut dcl[q.pos * c..(q.pos + 1) * c];
                for i in 0..c {
                    let mut g = d_gs[i] * ws;
                    if l <= q.layer {
                        g += d_gc[i] * wc;
                    }
                    row[i] += g;
                }
            }
        }
        for l in (1..=l_max).rev() {
            let d = self.spec.dilations[l - 1];
            let ids = self.layers[l - 1];
            let (w1, w2, _) = self.layer_weights(params, l);
            let (lower, upper) = dc.split_at_mut(l);
            let d_cur = &upper[0];
            let d_prev = &mut lower[l - 1];
            let pre = &cache.pre[l - 1];
            let prev = &cache.c[l - 1];
            let mut d_pre = vec![T::zero(); rows * 2 * c];
            for t in 0..rows {
                glu_backward_into(&pre[t * 2 * c..(t + 1) * 2 * c], &d_cur[t * c..(t + 1) * c], &mut d_pre[t * 2 * c..(t + 1) * 2 * c]);
            }
            for (p, g) in d_prev.iter_mut().zip(d_cur.iter()) {
                *p += *g;
            }
            let db = grads.get_mut(ids.bias);
            for t in 0..rows {
                for (a, g) in db.iter_mut().zip(&d_pre[t * 2 * c..(t + 1) * 2 * c]) {
                    *a += *g;
                }
            }
            gemm(2 * c, rows, c, &d_pre, Layout::T, prev, Layout::N, T::one(), grads.get_mut(ids.w2));
            gemm(rows, 2 * c, c, &d_pre, Layout::N, w2, Layout::N, T::one(), d_prev);
            if rows > d {
                let n = rows - d;
                gemm(2 * c, n, c, &d_pre[d * 2 * c..], Layout::T, &prev[..n * c], Layout::N, T::one(), grads.get_mut(ids.w1));
                gemm(n, 2 * c, c, &d_pre[d * 2 * c..], Layout::N, w1, Layout::N, T::one(), &mut d_prev[..n * c]);
            }
        }
        let r = self.repr_dim;
        gemm(c, rows, r, &dc[0], Layout::T, &cache.reprs, Layout::N, T::one(), grads.get_mut(self.embed));
        let mut d_reprs = vec![T::zero(); rows * r];
        gemm(rows, c, r, &dc[0], Layout::N, self.embed_weights(params), Layout::N, T::zero(), &mut d_reprs);
        Ok(d_reprs)
    }
}

/// Cache of a single-window evaluation.
#[derive(Clone, Debug)]
pub struct WindowCache<T> {
    pad: usize,
    segment: SegmentCache<T>,
}

impl TemporalNet {
    /// Evaluate the final position of a full `max_scale`-frame window.
    ///
    /// The first `pad` rows are out-of-stream padding: every activation there
    /// reads as zero, matching a freshly initialised stream state.
    pub fn window_forward<T: Real>(
        &self,
        params: &ParamStore<T>,
        window: &[T],
        pad: usize,
        l_sel: usize,
    ) -> Result<(HeadOut<T>, WindowCache<T>)> {
        let len = self.spec.max_scale();
        if window.len() != len * self.repr_dim {
            return Err(Error::Shape(format!(
                "window must hold {len} representations, got {}",
                window.len() / self.repr_dim.max(1)
            )));
        }
        if pad >= len {
            return Err(Error::Invalid(format!("padding {pad} leaves no frames in a {len}-frame window")));
        }
        let tail = &window[pad * self.repr_dim..];
        let q = Query {
            pos: len - pad - 1,
            layer: l_sel,
        };
        let (mut outs, segment) = self.forward(params, tail, &[q])?;
        Ok((outs.pop().expect("one query"), WindowCache { pad, segment }))
    }

    /// Parameter gradients plus the gradient on every window row.
    pub fn window_backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        cache: &WindowCache<T>,
        grad_logits: &[T],
        grad_s: T,
    ) -> Result<(Grads<T>, Vec<T>)> {
        if grad_logits.len() != self.classes {
            return Err(Error::Shape(format!("expected {} logit gradients, got {}", self.classes, grad_logits.len())));
        }
        let mut grads = Grads::zeros_like(params);
        let d_tail = self.backward(params, &cache.segment, &[grad_logits.to_vec()], &[grad_s], &mut grads)?;
        let mut d = vec![T::zero(); cache.pad * self.repr_dim];
        d.extend(d_tail);
        Ok((grads, d))
    }
}
