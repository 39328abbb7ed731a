//! Loss and gradients for one mini-batch.
//!
//! A clip's output depends only on its final `S_max` frames, so clips from
//! the same stream whose windows overlap are evaluated in one segment forward
//! with a query per clip. The result is identical to evaluating each window
//! separately; it just skips the shared columns.

use crate::data::AnnotatedStream;
use crate::model::Model;
use crate::nn::ops::{argmax, softmax_nll, softmax_nll_backward};
use crate::nn::{Grads, ParamStore, Real};
use crate::par;
use crate::temporal::Query;
use crate::trainer::Clip;
use crate::{Error, Result};

/// Batch means of the loss terms plus classifier hits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchLoss {
    /// `loss_c + γ·loss_s`.
    pub loss: f64,
    pub loss_c: f64,
    /// Unweighted `(ŝ_norm − s_norm)²`.
    pub loss_s: f64,
    pub correct: usize,
    pub count: usize,
}

struct Segment {
    stream: usize,
    lo: usize,
    hi: usize,
    members: Vec<usize>,
}

/// Merge clips whose windows overlap, stream by stream, in a fixed order.
fn plan_segments(clips: &[Clip], window: usize) -> Vec<Segment> {
    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.sort_by_key(|&i| (clips[i].stream, clips[i].end, i));
    let mut out: Vec<Segment> = Vec::new();
    for i in order {
        let c = clips[i];
        let lo = (c.end + 1).saturating_sub(window);
        match out.last_mut() {
            Some(seg) if seg.stream == c.stream && lo <= seg.hi + 1 => {
                seg.hi = seg.hi.max(c.end);
                seg.members.push(i);
            }
            _ => out.push(Segment {
                stream: c.stream,
                lo,
                hi: c.end,
                members: vec![i],
            }),
        }
    }
    out
}

struct ClipResult {
    loss_c: f64,
    loss_s: f64,
    correct: bool,
}

/// Mean loss over `clips` and its gradient, with `layers[i]` feeding the
/// classifier of clip `i`.
///
/// Segments are evaluated in parallel; their gradients are summed in segment
/// order, so the result does not depend on scheduling.
pub fn batch_gradients<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    streams: &[AnnotatedStream],
    clips: &[Clip],
    layers: &[usize],
    gamma: f64,
) -> Result<(BatchLoss, Grads<T>)> {
    if clips.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    if layers.len() != clips.len() {
        return Err(Error::Invalid(format!("{} layer choices for {} clips", layers.len(), clips.len())));
    }
    for c in clips {
        let len = streams.get(c.stream).map(|s| s.len()).unwrap_or(0);
        if c.end >= len {
            return Err(Error::Invalid(format!("clip ends at frame {} outside stream {} of {len}", c.end, c.stream)));
        }
    }
    let segments = plan_segments(clips, model.max_scale());
    let n = T::of(clips.len() as f64);
    let cfg = &model.config;
    let per_segment = par::map(&segments, |seg| -> Result<(Grads<T>, Vec<(usize, ClipResult)>)> {
        let frames = &streams[seg.stream].frames[seg.lo..=seg.hi];
        let queries: Vec<Query> = seg
            .members
            .iter()
            .map(|&i| Query {
                pos: clips[i].end - seg.lo,
                layer: layers[i],
            })
            .collect();
        let (outs, cache) = model.forward(params, frames, &queries)?;
        let mut d_logits = Vec::with_capacity(outs.len());
        let mut d_s = Vec::with_capacity(outs.len());
        let mut results = Vec::with_capacity(outs.len());
        for (&i, out) in seg.members.iter().zip(&outs) {
            let label = clips[i].label;
            let (nll, probs) = softmax_nll(&out.logits, label.class)?;
            let target = cfg.distance_target(label.start_distance);
            let diff = out.s_norm.f64() - target;
            let mut g = softmax_nll_backward(&probs, label.class);
            g.iter_mut().for_each(|v| *v = *v / n);
            d_logits.push(g);
            d_s.push(T::of(2.0 * gamma * diff) / n);
            results.push((
                i,
                ClipResult {
                    loss_c: nll.f64(),
                    loss_s: diff * diff,
                    correct: argmax(&out.logits) == label.class,
                },
            ));
        }
        let mut grads = Grads::zeros_like(params);
        model.backward(params, &cache, &d_logits, &d_s, &mut grads)?;
        Ok((grads, results))
    });

    let mut total = Grads::zeros_like(params);
    let mut per_clip: Vec<Option<ClipResult>> = (0..clips.len()).map(|_| None).collect();
    for r in per_segment {
        let (g, results) = r?;
        total.add_assign(&g);
        for (i, res) in results {
            per_clip[i] = Some(res);
        }
    }
    let mut loss = BatchLoss {
        count: clips.len(),
        ..Default::default()
    };
    for r in per_clip.into_iter().flatten() {
        loss.loss_c += r.loss_c;
        loss.loss_s += r.loss_s;
        loss.correct += r.correct as usize;
    }
    loss.loss_c /= clips.len() as f64;
    loss.loss_s /= clips.len() as f64;
    loss.loss = loss.loss_c + gamma * loss.loss_s;
    Ok((loss, total))
}

/// Mean loss with every clip evaluated on its own window, no gradients.
pub fn batch_loss<T: Real>(
    model: &Model,
    params: &ParamStore<T>,
    streams: &[AnnotatedStream],
    clips: &[Clip],
    layers: &[usize],
    gamma: f64,
) -> Result<f64> {
    let w = model.max_scale();
    let mut total = 0.0;
    for (c, &l) in clips.iter().zip(layers) {
        let lo = (c.end + 1).saturating_sub(w);
        let frames = &streams[c.stream].frames[lo..=c.end];
        let (outs, _) = model.forward(params, frames, &[Query { pos: c.end - lo, layer: l }])?;
        let (nll, _) = softmax_nll(&outs[0].logits, c.label.class)?;
        let diff = outs[0].s_norm.f64() - model.config.distance_target(c.label.start_distance);
        total += nll.f64() + gamma * diff * diff;
    }
    Ok(total / clips.len() as f64)
}
