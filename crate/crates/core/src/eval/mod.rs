//! Prediction metrics over annotated streams.
//!
//! Observation ratio `p` of an instance `[start, end]` with `d = end − start + 1`
//! covers frames `start ..= start + ceil(p·d / 100) − 1` (at least one frame).

mod report;

use std::collections::BTreeMap;

use crate::data::{ActionInstance, BLANK};
use crate::nn::ops::argmax;
use crate::stream::Prediction;
use crate::{Error, Result};

pub use report::{compare_reports, evaluate, write_report_csv, EvalReport, StreamPredictions};

pub const DEFAULT_RATIOS: [u32; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];
pub const DEFAULT_REGRESSION_RATIOS: [u32; 10] = [5, 10, 20, 30, 40, 50, 60, 70, 80, 90];

/// Frames of the observed prefix at ratio `p` percent.
pub fn observed_len(d: usize, p: u32) -> usize {
    (d * p as usize).div_ceil(100).max(1).min(d)
}

fn check(preds: &[Prediction], instances: &[ActionInstance]) -> Result<()> {
    if let Some(bad) = instances.iter().find(|i| i.end >= preds.len()) {
        return Err(Error::Invalid(format!(
            "instance {}..={} lies beyond the {} predictions",
            bad.start,
            bad.end,
            preds.len()
        )));
    }
    Ok(())
}

fn check_ratio(p: u32) -> Result<()> {
    if p == 0 || p > 100 {
        return Err(Error::Invalid(format!("observation ratio must lie in 1..=100, got {p}")));
    }
    Ok(())
}

/// Per-instance accuracy of the observed prefix, keyed by ratio.
pub(crate) fn instance_accuracies(preds: &[Prediction], instances: &[ActionInstance], ratios: &[u32]) -> Result<BTreeMap<u32, Vec<f64>>> {
    check(preds, instances)?;
    let mut out = BTreeMap::new();
    for &p in ratios {
        check_ratio(p)?;
        let accs = instances
            .iter()
            .map(|inst| {
                let n = observed_len(inst.len(), p);
                let hits = preds[inst.start..inst.start + n].iter().filter(|x| x.class == inst.label).count();
                hits as f64 / n as f64
            })
            .collect();
        out.insert(p, accs);
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean over instances of the observed-segment accuracy at each ratio.
pub fn observation_ratio_accuracy(preds: &[Prediction], instances: &[ActionInstance], ratios: &[u32]) -> Result<BTreeMap<u32, f64>> {
    Ok(instance_accuracies(preds, instances, ratios)?
        .into_iter()
        .map(|(p, v)| (p, mean(&v)))
        .collect())
}

/// `e^{−|ŝ − s| / d}` for a correctly classified in-instance frame, else 0.
pub fn sl_score(pred: &Prediction, inst: &ActionInstance, t: usize) -> f64 {
    if pred.class != inst.label {
        return 0.0;
    }
    let s = (t - inst.start) as f64;
    (-(pred.s_hat - s).abs() / inst.len() as f64).exp()
}

pub(crate) fn sl_scores(preds: &[Prediction], instances: &[ActionInstance]) -> Result<Vec<f64>> {
    check(preds, instances)?;
    Ok(instances
        .iter()
        .flat_map(|inst| (inst.start..=inst.end).map(move |t| (inst, t)))
        .map(|(inst, t)| sl_score(&preds[t], inst, t))
        .collect())
}

/// Mean SL score over all in-instance frames.
pub fn sl_score_mean(preds: &[Prediction], instances: &[ActionInstance]) -> Result<f64> {
    Ok(mean(&sl_scores(preds, instances)?))
}

pub(crate) fn instance_regression_errors(
    preds: &[Prediction],
    instances: &[ActionInstance],
    ratios: &[u32],
) -> Result<BTreeMap<u32, Vec<f64>>> {
    check(preds, instances)?;
    let mut out = BTreeMap::new();
    for &p in ratios {
        check_ratio(p)?;
        let errs = instances
            .iter()
            .map(|inst| {
                let s = observed_len(inst.len(), p) - 1;
                (preds[inst.start + s].s_hat - s as f64).abs()
            })
            .collect();
        out.insert(p, errs);
    }
    Ok(out)
}

/// Mean `|ŝ − s|` in frames at the last observed frame for each ratio.
pub fn regression_error_at_ratio(preds: &[Prediction], instances: &[ActionInstance], ratios: &[u32]) -> Result<BTreeMap<u32, f64>> {
    Ok(instance_regression_errors(preds, instances, ratios)?
        .into_iter()
        .map(|(p, v)| (p, mean(&v)))
        .collect())
}

/// Ground-truth class of every frame; blank outside instances.
pub fn frame_classes(len: usize, instances: &[ActionInstance]) -> Vec<usize> {
    let mut out = vec![BLANK; len];
    for inst in instances {
        for c in out.iter_mut().take(inst.end + 1).skip(inst.start) {
            *c = inst.label;
        }
    }
    out
}

pub(crate) fn frame_hits(preds: &[Prediction], instances: &[ActionInstance]) -> Result<usize> {
    check(preds, instances)?;
    let truth = frame_classes(preds.len(), instances);
    Ok(preds.iter().zip(&truth).filter(|(p, c)| p.class == **c).count())
}

/// Fraction of all frames, blank included, classified correctly.
pub fn frame_accuracy(preds: &[Prediction], instances: &[ActionInstance]) -> Result<f64> {
    if preds.is_empty() {
        return Ok(0.0);
    }
    Ok(frame_hits(preds, instances)? as f64 / preds.len() as f64)
}

/// Average the probability vectors of several runs over the same stream.
///
/// The fused class is the argmax of the mean distribution and `s_hat` is the
/// mean of the inputs; `layer_used` is 0.
pub fn fuse_predictions(runs: &[Vec<Prediction>]) -> Result<Vec<Prediction>> {
    let first = runs.first().ok_or_else(|| Error::Invalid("nothing to fuse".into()))?;
    let k = first.first().map(|p| p.probs.len()).unwrap_or(0);
    for (i, r) in runs.iter().enumerate() {
        if r.len() != first.len() {
            return Err(Error::Invalid(format!("run {i} has {} frames, run 0 has {}", r.len(), first.len())));
        }
        if r.iter().any(|p| p.probs.len() != k) {
            return Err(Error::Invalid(format!("run {i} does not have {k} classes throughout")));
        }
    }
    let n = runs.len() as f64;
    Ok((0..first.len())
        .map(|t| {
            let mut probs = vec![0.0; k];
            let mut s = 0.0;
            for r in runs {
                for (a, b) in probs.iter_mut().zip(&r[t].probs) {
                    *a += b;
                }
                s += r[t].s_hat;
            }
            probs.iter_mut().for_each(|v| *v /= n);
            Prediction {
                t,
                class: argmax(&probs),
                s_hat: s / n,
                layer_used: 0,
                probs,
            }
        })
        .collect())
}
