use std::io::{Read, Write};

use crate::{Error, Result};

/// One frame's output.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub t: usize,
    pub class: usize,
    /// Regressed start distance in frames, clamped to `[0, S_max − 1]`.
    pub s_hat: f64,
    /// Layers averaged by the classifier; 0 for fused predictions.
    pub layer_used: usize,
    pub probs: Vec<f64>,
}

/// CSV with header `t,pred_class,s_hat,layer_used,p_0,…,p_{K−1}`.
pub fn write_predictions<W: Write>(out: W, preds: &[Prediction]) -> Result<()> {
    let k = preds.first().map(|p| p.probs.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "pred_class", "s_hat", "layer_used"].iter().map(|s| s.to_string()).collect();
    header.extend((0..k).map(|i| format!("p_{i}")));
    w.write_record(&header)?;
    for p in preds {
        if p.probs.len() != k {
            return Err(Error::Shape(format!("frame {} has {} probabilities, expected {k}", p.t, p.probs.len())));
        }
        let mut row = vec![p.t.to_string(), p.class.to_string(), p.s_hat.to_string(), p.layer_used.to_string()];
        row.extend(p.probs.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed = ["t", "pred_class", "s_hat", "layer_used"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(a, b)| a != b) {
        return Err(Error::Invalid(format!("prediction header must start with {}", fixed.join(","))));
    }
    let k = header.len() - fixed.len();
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> { rec.get(i).ok_or_else(|| Error::Invalid(format!("row {}: missing column {i}", row + 1))) };
        let int = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|_| Error::Invalid(format!("row {}: bad integer in column {i}", row + 1)))
        };
        let real = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|_| Error::Invalid(format!("row {}: bad number in column {i}", row + 1)))
        };
        let t = int(0)?;
        if t != out.len() {
            return Err(Error::Invalid(format!("row {}: expected t = {}, found {t}", row + 1, out.len())));
        }
        out.push(Prediction {
            t,
            class: int(1)?,
            s_hat: real(2)?,
            layer_used: int(3)?,
            probs: (0..k).map(|i| real(4 + i)).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let preds = vec![
            Prediction { t: 0, class: 1, s_hat: 0.0, layer_used: 1, probs: vec![0.25, 0.75] },
            Prediction { t: 1, class: 0, s_hat: 12.375, layer_used: 5, probs: vec![0.6, 0.4] },
        ];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &preds).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,pred_class,s_hat,layer_used,p_0,p_1\n"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), preds);
    }

    #[test]
    fn rejects_gaps_in_time() {
        let text = "t,pred_class,s_hat,layer_used,p_0,p_1\n0,1,0,1,0.5,0.5\n2,1,0,1,0.5,0.5\n";
        assert!(read_predictions(text.as_bytes()).is_err());
    }
}
