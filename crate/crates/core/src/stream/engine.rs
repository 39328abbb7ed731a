use std::time::Instant;

use serde::Serialize;

use crate::data::Frame;
use crate::model::Model;
use crate::nn::ops::{argmax, glu_into, matvec_acc, softmax};
use crate::nn::{ParamStore, Real};
use crate::stream::{Mode, Prediction};
use crate::{Error, Result};

/// Ring buffers of past activations plus the last regressed distance.
///
/// `rings[l]` holds the `d_{l+1}` most recent columns of layer `l`
/// (layer 0 is the embedded input), oldest overwritten first. Total size is
/// `Σ d_l · C` values regardless of how long the stream runs.
#[derive(Clone, Debug)]
pub struct StreamState<T> {
    mode: Mode,
    rings: Vec<Vec<T>>,
    s_prev: f64,
    t: usize,
    columns: u64,
}

impl<T: Real> StreamState<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Frames consumed so far.
    pub fn frames_seen(&self) -> usize {
        self.t
    }

    /// Last regressed start distance in frames (0 before the first frame).
    pub fn last_distance(&self) -> f64 {
        self.s_prev
    }

    /// Buffered activation values.
    pub fn buffered_values(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    /// Temporal activation columns computed since initialisation.
    pub fn columns_computed(&self) -> u64 {
        self.columns
    }
}

/// Zeroed buffers, equivalent to a stream preceded by zero frames.
pub fn stream_init<T: Real>(model: &Model, mode: Mode) -> StreamState<T> {
    let c = model.temporal.channels();
    StreamState {
        mode,
        rings: model.config.temporal.dilations.iter().map(|&d| vec![T::zero(); d * c]).collect(),
        s_prev: 0.0,
        t: 0,
        columns: 0,
    }
}

/// Consume one frame. `gt_distance` is the true start distance of this frame
/// and is required in [`Mode::SsNetGt`].
pub fn stream_step<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    state: &mut StreamState<T>,
    frame: &Frame,
    gt_distance: Option<f64>,
) -> Result<Prediction> {
    let repr = model.tree.infer_frames(params, &[frame]);
    step_repr(model, params, state, &repr, gt_distance)
}

/// [`stream_step`] on an already computed frame representation.
pub(crate) fn step_repr<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    state: &mut StreamState<T>,
    repr: &[T],
    gt_distance: Option<f64>,
) -> Result<Prediction> {
    let net = &model.temporal;
    let spec = &model.config.temporal;
    let l_sel = state.mode.select(state.s_prev, gt_distance, spec)?;
    if repr.len() != net.repr_dim {
        return Err(Error::Shape(format!("representation has {} values, expected {}", repr.len(), net.repr_dim)));
    }
    let c = net.channels();
    let l_max = net.layers();
    let mut cur = vec![T::zero(); c];
    matvec_acc(net.embed_weights(params), c, net.repr_dim, repr, &mut cur);
    let mut pre = vec![T::zero(); 2 * c];
    let mut act = vec![T::zero(); c];
    let mut gc = vec![T::zero(); c];
    let mut gs = vec![T::zero(); c];
    for l in 1..=l_max {
        let d = spec.dilations[l - 1];
        let (w1, w2, b) = net.layer_weights(params, l);
        let ring = &mut state.rings[l - 1];
        let slot = (state.t % d) * c;
        pre.copy_from_slice(b);
        matvec_acc(w1, 2 * c, c, &ring[slot..slot + c], &mut pre);
        matvec_acc(w2, 2 * c, c, &cur, &mut pre);
        ring[slot..slot + c].copy_from_slice(&cur);
        glu_into(&pre, &mut act);
        for (o, a) in cur.iter_mut().zip(&act) {
            *o += *a;
        }
        for i in 0..c {
            gs[i] += cur[i];
            if l <= l_sel {
                gc[i] += cur[i];
            }
        }
    }
    state.columns += l_max as u64;
    let wc = T::one() / T::of(l_sel as f64);
    let ws = T::one() / T::of(l_max as f64);
    gc.iter_mut().for_each(|v| *v *= wc);
    gs.iter_mut().for_each(|v| *v *= ws);
    let (out, _) = net.heads_forward(params, gc, gs);
    let probs = softmax(&out.logits);
    let s_hat = model.config.distance_frames(out.s_norm.f64());
    let pred = Prediction {
        t: state.t,
        class: argmax(&probs),
        s_hat,
        layer_used: l_sel,
        probs: probs.iter().map(|p| p.f64()).collect(),
    };
    state.s_prev = s_hat;
    state.t += 1;
    Ok(pred)
}

/// Wall-clock and work counts for one pass over a stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimingReport {
    pub frames: usize,
    pub seconds: f64,
    pub fps: f64,
    /// Temporal activation columns computed per frame at steady state.
    pub columns_per_frame: usize,
}

fn check_gt(mode: Mode, frames: usize, gt: Option<&[f64]>) -> Result<()> {
    match gt {
        None if mode.needs_ground_truth() => Err(Error::Invalid("ssnet-gt mode needs annotations".into())),
        Some(g) if g.len() != frames => Err(Error::Invalid(format!(
            "{} ground-truth distances for {frames} frames",
            g.len()
        ))),
        _ => Ok(()),
    }
}

/// Stream every frame through a fresh state.
pub fn run_stream<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    frames: &[Frame],
    mode: Mode,
    gt: Option<&[f64]>,
) -> Result<(Vec<Prediction>, TimingReport)> {
    check_gt(mode, frames.len(), gt)?;
    let start = Instant::now();
    let mut state = stream_init::<T>(model, mode);
    let mut out = Vec::with_capacity(frames.len());
    for (t, f) in frames.iter().enumerate() {
        out.push(stream_step(model, params, &mut state, f, gt.map(|g| g[t]))?);
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok((out, report(frames.len(), seconds, model.temporal.layers())))
}

fn report(frames: usize, seconds: f64, columns_per_frame: usize) -> TimingReport {
    TimingReport {
        frames,
        seconds,
        fps: if seconds > 0.0 { frames as f64 / seconds } else { f64::INFINITY },
        columns_per_frame,
    }
}

/// Reference path: every frame recomputes the whole trailing window from
/// scratch. Frame representations are computed once per frame, as in the
/// shared path, so the difference is purely the temporal recomputation.
pub fn run_stream_naive<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    frames: &[Frame],
    mode: Mode,
    gt: Option<&[f64]>,
) -> Result<(Vec<Prediction>, TimingReport)> {
    check_gt(mode, frames.len(), gt)?;
    let start = Instant::now();
    let net = &model.temporal;
    let r = net.repr_dim;
    let w = model.max_scale();
    let mut reprs = Vec::with_capacity(frames.len() * r);
    let mut window = vec![T::zero(); w * r];
    let mut s_prev = 0.0;
    let mut out = Vec::with_capacity(frames.len());
    for (t, f) in frames.iter().enumerate() {
        reprs.extend(model.tree.infer_frames(params, &[f]));
        let real = (t + 1).min(w);
        let pad = w - real;
        window[..pad * r].iter_mut().for_each(|v| *v = T::zero());
        window[pad * r..].copy_from_slice(&reprs[(t + 1 - real) * r..(t + 1) * r]);
        let l_sel = mode.select(s_prev, gt.map(|g| g[t]), &model.config.temporal)?;
        let (head, _) = net.window_forward(params, &window, pad, l_sel)?;
        let probs = softmax(&head.logits);
        let s_hat = model.config.distance_frames(head.s_norm.f64());
        out.push(Prediction {
            t,
            class: argmax(&probs),
            s_hat,
            layer_used: l_sel,
            probs: probs.iter().map(|p| p.f64()).collect(),
        });
        s_prev = s_hat;
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok((out, report(frames.len(), seconds, w * net.layers())))
}
