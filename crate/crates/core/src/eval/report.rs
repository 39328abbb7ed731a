use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::ActionInstance;
use crate::eval::{frame_hits, instance_accuracies, instance_regression_errors, sl_scores};
use crate::par;
use crate::stream::Prediction;
use crate::{Error, Result};

/// Predictions for one stream alongside its annotations.
#[derive(Clone, Debug)]
pub struct StreamPredictions {
    pub name: String,
    pub frames: usize,
    pub instances: Vec<ActionInstance>,
    pub preds: Vec<Prediction>,
}

/// Dataset-level metrics; instance and frame populations are pooled across streams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: BTreeMap<u32, f64>,
    pub sl_score: f64,
    pub regression_error: BTreeMap<u32, f64>,
    pub frame_accuracy: f64,
    pub streams: usize,
    pub instances: usize,
    pub frames: usize,
}

struct Partial {
    acc: BTreeMap<u32, Vec<f64>>,
    reg: BTreeMap<u32, Vec<f64>>,
    sl: Vec<f64>,
    hits: usize,
    frames: usize,
    instances: usize,
}

pub fn evaluate(streams: &[StreamPredictions], ratios: &[u32], regression_ratios: &[u32]) -> Result<EvalReport> {
    let parts = par::map(streams, |s| -> Result<Partial> {
        if s.preds.len() != s.frames {
            return Err(Error::Invalid(format!(
                "{}: {} predictions for a stream of {} frames",
                s.name,
                s.preds.len(),
                s.frames
            )));
        }
        Ok(Partial {
            acc: instance_accuracies(&s.preds, &s.instances, ratios)?,
            reg: instance_regression_errors(&s.preds, &s.instances, regression_ratios)?,
            sl: sl_scores(&s.preds, &s.instances)?,
            hits: frame_hits(&s.preds, &s.instances)?,
            frames: s.frames,
            instances: s.instances.len(),
        })
    });
    let mut acc: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut reg: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let (mut sl, mut hits, mut frames, mut instances) = (Vec::new(), 0, 0, 0);
    for p in parts {
        let p = p?;
        for (k, v) in p.acc {
            acc.entry(k).or_default().extend(v);
        }
        for (k, v) in p.reg {
            reg.entry(k).or_default().extend(v);
        }
        sl.extend(p.sl);
        hits += p.hits;
        frames += p.frames;
        instances += p.instances;
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(EvalReport {
        accuracy: ratios.iter().map(|r| (*r, mean(acc.get(r).map(Vec::as_slice).unwrap_or(&[])))).collect(),
        sl_score: mean(&sl),
        regression_error: regression_ratios.iter().map(|r| (*r, mean(reg.get(r).map(Vec::as_slice).unwrap_or(&[])))).collect(),
        frame_accuracy: if frames == 0 { 0.0 } else { hits as f64 / frames as f64 },
        streams: streams.len(),
        instances,
        frames,
    })
}

/// Rows `metric,ratio,value`; scalar metrics leave `ratio` empty.
pub fn write_report_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "ratio", "value"])?;
    for (r, v) in &report.accuracy {
        w.write_record(["accuracy", &r.to_string(), &v.to_string()])?;
    }
    w.write_record(["sl_score", "", &report.sl_score.to_string()])?;
    for (r, v) in &report.regression_error {
        w.write_record(["regression_error", &r.to_string(), &v.to_string()])?;
    }
    w.write_record(["frame_accuracy", "", &report.frame_accuracy.to_string()])?;
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Side-by-side table of two reports with `b − a` deltas.
pub fn compare_reports(a_name: &str, a: &EvalReport, b_name: &str, b: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:>12} {:>12} {:>10}", "metric", a_name, b_name, "delta");
    let mut row = |label: String, x: Option<f64>, y: Option<f64>| {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let d = match (x, y) {
            (Some(x), Some(y)) => format!("{:+.4}", y - x),
            _ => "-".into(),
        };
        let _ = writeln!(s, "{label:<22} {:>12} {:>12} {d:>10}", f(x), f(y));
    };
    let ratios: std::collections::BTreeSet<u32> = a.accuracy.keys().chain(b.accuracy.keys()).copied().collect();
    for r in ratios {
        row(format!("accuracy@{r}%"), a.accuracy.get(&r).copied(), b.accuracy.get(&r).copied());
    }
    row("sl_score".into(), Some(a.sl_score), Some(b.sl_score));
    let ratios: std::collections::BTreeSet<u32> = a.regression_error.keys().chain(b.regression_error.keys()).copied().collect();
    for r in ratios {
        row(format!("regression_error@{r}%"), a.regression_error.get(&r).copied(), b.regression_error.get(&r).copied());
    }
    row("frame_accuracy".into(), Some(a.frame_accuracy), Some(b.frame_accuracy));
    s
}
