use crate::data::Frame;
use crate::nn::ops::{glu_backward_into, glu_into};
use crate::nn::scalar::{gemm, Layout};
use crate::nn::{Grads, ParamStore, Real};
use crate::tree::{InputNorm, TreeHierarchy};
use crate::{Error, Result};

#[derive(Clone, Debug)]
struct LayerIds {
    taps: Vec<usize>,
    bias: usize,
}

/// Dilated tree convolutions bound to a parameter layout.
///
/// Layer `l` maps `in_l` channels per node to `2·out` pre-activations
/// (value and gate halves of a GLU), `out = 3·J`. Layer 1 reads the raw
/// `(x, y, z)` of each joint.
#[derive(Clone, Debug)]
pub struct TreeConv {
    pub hierarchy: TreeHierarchy,
    pub out: usize,
    /// Applied to raw coordinates before layer 1.
    pub input_norm: Option<InputNorm>,
    ids: Vec<LayerIds>,
}

/// Activations kept by [`TreeConv::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct TreeCache<T> {
    bodies: usize,
    /// Per layer, per tap: gathered inputs, `rows × in_l`.
    gathered: Vec<Vec<Vec<T>>>,
    /// Per layer: pre-activations, `rows × 2·out`.
    pre: Vec<Vec<T>>,
}

/// Frame-level cache: body reprs are averaged into frame reprs.
#[derive(Clone, Debug)]
pub struct FrameTreeCache<T> {
    tree: TreeCache<T>,
    /// Owning frame of every body row.
    body_frame: Vec<usize>,
    bodies_per_frame: Vec<usize>,
}

pub fn layer_param_name(layer: usize, tap: &str) -> String {
    format!("tree.layer{}.{tap}", layer + 1)
}

impl TreeConv {
    fn in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            3
        } else {
            self.out
        }
    }

    /// Parameter names and shapes in canonical order.
    pub fn param_spec(h: &TreeHierarchy) -> Vec<(String, Vec<usize>)> {
        let out = 3 * h.joints;
        let mut spec = Vec::new();
        for (l, layer) in h.layers.iter().enumerate() {
            let inp = if l == 0 { 3 } else { out };
            for name in h.scheme.tap_names(layer.dilation) {
                spec.push((layer_param_name(l, &name), vec![2 * out, inp]));
            }
            spec.push((layer_param_name(l, "bias"), vec![2 * out]));
        }
        spec
    }

    pub fn bind<T: Real>(hierarchy: TreeHierarchy, params: &ParamStore<T>) -> Result<Self> {
        let out = 3 * hierarchy.joints;
        let mut ids = Vec::new();
        for (l, layer) in hierarchy.layers.iter().enumerate() {
            let taps = hierarchy
                .scheme
                .tap_names(layer.dilation)
                .iter()
                .map(|n| params.require(&layer_param_name(l, n)))
                .collect::<Result<Vec<_>>>()?;
            let bias = params.require(&layer_param_name(l, "bias"))?;
            ids.push(LayerIds { taps, bias });
        }
        let conv = Self {
            hierarchy,
            out,
            input_norm: None,
            ids,
        };
        for (name, shape) in Self::param_spec(&conv.hierarchy) {
            let got = params.get(&name).expect("bound above").shape();
            if got != shape.as_slice() {
                return Err(Error::Shape(format!("`{name}` has shape {got:?}, expected {shape:?}")));
            }
        }
        Ok(conv)
    }

    /// Body representations (`bodies × out`) plus the cache for backward.
    pub fn forward<T: Real>(&self, params: &ParamStore<T>, bodies: &[&[f32]]) -> (Vec<T>, TreeCache<T>) {
        self.run(params, bodies, true)
    }

    /// Forward without keeping activations.
    pub fn infer<T: Real>(&self, params: &ParamStore<T>, bodies: &[&[f32]]) -> Vec<T> {
        self.run(params, bodies, false).0
    }

    fn run<T: Real>(&self, params: &ParamStore<T>, bodies: &[&[f32]], keep: bool) -> (Vec<T>, TreeCache<T>) {
        let j = self.hierarchy.joints;
        let b = bodies.len();
        let rows = b * j;
        let out = self.out;
        let mut x: Vec<T> = Vec::with_capacity(rows * 3);
        let mut normed = Vec::with_capacity(3 * j);
        for body in bodies {
            assert_eq!(body.len(), 3 * j, "body coordinate count");
            match &self.input_norm {
                Some(n) => {
                    normed.clear();
                    n.apply(body, &mut normed);
                    x.extend(normed.iter().map(|v| T::of(*v)));
                }
                None => x.extend(body.iter().map(|v| T::of(*v as f64))),
            }
        }
        let mut repr_sum = vec![T::zero(); b * out];
        let mut cache = TreeCache {
            bodies: b,
            gathered: Vec::new(),
            pre: Vec::new(),
        };
        for (l, layer) in self.hierarchy.layers.iter().enumerate() {
            let inp = self.in_channels(l);
            let ids = &self.ids[l];
            let bias = params.value(ids.bias);
            let mut pre = Vec::with_capacity(rows * 2 * out);
            for _ in 0..rows {
                pre.extend_from_slice(bias);
            }
            let mut gathered = Vec::with_capacity(layer.taps);
            for (k, &wid) in ids.taps.iter().enumerate() {
                let g = gather(&x, inp, j, b, |v| layer.tap(v, k));
                gemm(rows, inp, 2 * out, &g, Layout::N, params.value(wid), Layout::T, T::one(), &mut pre);
                if keep {
                    gathered.push(g);
                }
            }
            let mut act = vec![T::zero(); rows * out];
            for r in 0..rows {
                glu_into(&pre[r * 2 * out..(r + 1) * 2 * out], &mut act[r * out..(r + 1) * out]);
            }
            for bi in 0..b {
                let acc = &mut repr_sum[bi * out..(bi + 1) * out];
                for &v in &self.hierarchy.order {
                    let row = &act[(bi * j + v) * out..(bi * j + v + 1) * out];
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += *r;
                    }
                }
            }
            if keep {
                cache.gathered.push(gathered);
                cache.pre.push(pre);
            }
            x = act;
        }
        let scale = T::one() / T::of((self.hierarchy.layers.len() * j) as f64);
        repr_sum.iter_mut().for_each(|v| *v *= scale);
        (repr_sum, cache)
    }

    /// Accumulate parameter gradients given `d_repr` (`bodies × out`).
    pub fn backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        cache: &TreeCache<T>,
        d_repr: &[T],
        grads: &mut Grads<T>,
    ) -> Result<()> {
        let j = self.hierarchy.joints;
        let b = cache.bodies;
        let rows = b * j;
        let out = self.out;
        let n_layers = self.hierarchy.layers.len();
        if cache.pre.len() != n_layers {
            return Err(Error::Invalid("tree backward: missing forward cache".into()));
        }
        if d_repr.len() != b * out {
            return Err(Error::Shape(format!(
                "tree backward: gradient has {} values, expected {}",
                d_repr.len(),
                b * out
            )));
        }
        let scale = T::one() / T::of((n_layers * j) as f64);
        let mut d_from_above: Option<Vec<T>> = None;
        for l in (0..n_layers).rev() {
            let layer = &self.hierarchy.layers[l];
            let inp = self.in_channels(l);
            let ids = &self.ids[l];
            let mut d_act = d_from_above.take().unwrap_or_else(|| vec![T::zero(); rows * out]);
            for bi in 0..b {
                let g = &d_repr[bi * out..(bi + 1) * out];
                for v in 0..j {
                    let row = &mut d_act[(bi * j + v) * out..(bi * j + v + 1) * out];
                    for (a, gv) in row.iter_mut().zip(g) {
                        *a += *gv * scale;
                    }
                }
            }
            let pre = &cache.pre[l];
            let mut d_pre = vec![T::zero(); rows * 2 * out];
            for r in 0..rows {
                glu_backward_into(
                    &pre[r * 2 * out..(r + 1) * 2 * out],
                    &d_act[r * out..(r + 1) * out],
                    &mut d_pre[r * 2 * out..(r + 1) * 2 * out],
                );
            }
            let db = grads.get_mut(ids.bias);
            for r in 0..rows {
                for (d, g) in db.iter_mut().zip(&d_pre[r * 2 * out..(r + 1) * 2 * out]) {
                    *d += *g;
                }
            }
            let mut d_in = if l > 0 { Some(vec![T::zero(); rows * inp]) } else { None };
            for (k, &wid) in ids.taps.iter().enumerate() {
                let g = &cache.gathered[l][k];
                gemm(2 * out, rows, inp, &d_pre, Layout::T, g, Layout::N, T::one(), grads.get_mut(wid));
                if let Some(d_in) = d_in.as_mut() {
                    let mut d_g = vec![T::zero(); rows * inp];
                    gemm(rows, 2 * out, inp, &d_pre, Layout::N, params.value(wid), Layout::N, T::zero(), &mut d_g);
                    for bi in 0..b {
                        for v in 0..j {
                            if let Some(u) = layer.tap(v, k) {
                                let src = &d_g[(bi * j + v) * inp..(bi * j + v + 1) * inp];
                                let dst = &mut d_in[(bi * j + u) * inp..(bi * j + u + 1) * inp];
                                for (dd, s) in dst.iter_mut().zip(src) {
                                    *dd += *s;
                                }
                            }
                        }
                    }
                }
            }
            d_from_above = d_in;
        }
        Ok(())
    }

    /// Frame representations (`frames × out`); two-body frames average their bodies.
    pub fn forward_frames<T: Real>(
        &self,
        params: &ParamStore<T>,
        frames: &[&Frame],
    ) -> (Vec<T>, FrameTreeCache<T>) {
        let (bodies, body_frame, counts) = flatten(frames);
        let (body_repr, tree) = self.forward(params, &bodies);
        let reprs = average_bodies(&body_repr, &body_frame, &counts, self.out);
        (
            reprs,
            FrameTreeCache {
                tree,
                body_frame,
                bodies_per_frame: counts,
            },
        )
    }

    pub fn infer_frames<T: Real>(&self, params: &ParamStore<T>, frames: &[&Frame]) -> Vec<T> {
        let (bodies, body_frame, counts) = flatten(frames);
        let body_repr = self.infer(params, &bodies);
        average_bodies(&body_repr, &body_frame, &counts, self.out)
    }

    pub fn backward_frames<T: Real>(
        &self,
        params: &ParamStore<T>,
        cache: &FrameTreeCache<T>,
        d_reprs: &[T],
        grads: &mut Grads<T>,
    ) -> Result<()> {
        let out = self.out;
        let mut d_body = vec![T::zero(); cache.body_frame.len() * out];
        for (bi, &f) in cache.body_frame.iter().enumerate() {
            let w = T::one() / T::of(cache.bodies_per_frame[f] as f64);
            for (d, g) in d_body[bi * out..(bi + 1) * out]
                .iter_mut()
                .zip(&d_reprs[f * out..(f + 1) * out])
            {
                *d = *g * w;
            }
        }
        self.backward(params, &cache.tree, &d_body, grads)
    }
}

fn flatten<'a>(frames: &[&'a Frame]) -> (Vec<&'a [f32]>, Vec<usize>, Vec<usize>) {
    let mut bodies = Vec::with_capacity(frames.len());
    let mut body_frame = Vec::with_capacity(frames.len());
    let mut counts = Vec::with_capacity(frames.len());
    for (f, frame) in frames.iter().enumerate() {
        counts.push(frame.bodies.len());
        for b in &frame.bodies {
            bodies.push(b.coords.as_slice());
            body_frame.push(f);
        }
    }
    (bodies, body_frame, counts)
}

fn average_bodies<T: Real>(body_repr: &[T], body_frame: &[usize], counts: &[usize], out: usize) -> Vec<T> {
    if counts.iter().all(|c| *c == 1) {
        return body_repr.to_vec();
    }
    let mut reprs = vec![T::zero(); counts.len() * out];
    for (bi, &f) in body_frame.iter().enumerate() {
        for (r, v) in reprs[f * out..(f + 1) * out]
            .iter_mut()
            .zip(&body_repr[bi * out..(bi + 1) * out])
        {
            *r += *v;
        }
    }
    for (f, &c) in counts.iter().enumerate() {
        if c > 1 {
            let w = T::one() / T::of(c as f64);
            reprs[f * out..(f + 1) * out].iter_mut().for_each(|v| *v *= w);
        }
    }
    reprs
}

/// Rows `(body, v)` take node `tap(v)` of the same body, zero when padded.
fn gather<T: Real>(x: &[T], inp: usize, j: usize, bodies: usize, tap: impl Fn(usize) -> Option<usize>) -> Vec<T> {
    let mut g = vec![T::zero(); bodies * j * inp];
    for v in 0..j {
        if let Some(u) = tap(v) {
            for bi in 0..bodies {
                g[(bi * j + v) * inp..(bi * j + v + 1) * inp]
                    .copy_from_slice(&x[(bi * j + u) * inp..(bi * j + u + 1) * inp]);
            }
        }
    }
    g
}
