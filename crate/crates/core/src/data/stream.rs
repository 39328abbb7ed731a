use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Class id reserved for frames outside every action instance.
pub const BLANK: usize = 0;

/// One skeleton: `J` joints as consecutive `(x, y, z)` triples in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyPose {
    pub coords: Vec<f32>,
}

impl BodyPose {
    pub fn zeros(joints: usize) -> Self {
        Self {
            coords: vec![0.0; 3 * joints],
        }
    }

    pub fn joint(&self, j: usize) -> [f32; 3] {
        [self.coords[3 * j], self.coords[3 * j + 1], self.coords[3 * j + 2]]
    }
}

/// One time step with one or two bodies.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub bodies: Vec<BodyPose>,
}

impl Frame {
    /// Build a frame, substituting a zero body when none is present.
    pub fn new(index: usize, mut bodies: Vec<BodyPose>, joints: usize) -> Result<Self> {
        if bodies.len() > 2 {
            return Err(Error::Stream(format!(
                "frame {index}: {} bodies, at most 2 supported",
                bodies.len()
            )));
        }
        for b in &bodies {
            if b.coords.len() != 3 * joints {
                return Err(Error::Stream(format!(
                    "frame {index}: expected {} coordinates, got {}",
                    3 * joints,
                    b.coords.len()
                )));
            }
            if b.coords.iter().any(|v| !v.is_finite()) {
                return Err(Error::Stream(format!("frame {index}: non-finite coordinate")));
            }
        }
        if bodies.is_empty() {
            bodies.push(BodyPose::zeros(joints));
        }
        Ok(Self { index, bodies })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionInstance {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub label: usize,
}

impl ActionInstance {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedStream {
    pub frames: Vec<Frame>,
    pub instances: Vec<ActionInstance>,
    /// Includes the blank class.
    pub class_count: usize,
}

impl AnnotatedStream {
    pub fn new(frames: Vec<Frame>, instances: Vec<ActionInstance>, class_count: usize) -> Result<Self> {
        validate_instances(&instances, frames.len(), class_count)?;
        Ok(Self {
            frames,
            instances,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of joints per body, read from the first frame.
    pub fn joints(&self) -> usize {
        self.frames.first().map(|f| f.bodies[0].coords.len() / 3).unwrap_or(0)
    }

    pub fn frames_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            let rec = FrameRecord {
                t: f.index,
                bodies: f.bodies.iter().map(|b| b.coords.clone()).collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn annotations_json(&self) -> String {
        let doc = AnnotationDoc {
            class_count: self.class_count,
            instances: self.instances.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }
}

fn validate_instances(instances: &[ActionInstance], len: usize, class_count: usize) -> Result<()> {
    if class_count < 2 {
        return Err(Error::Stream(format!("class_count {class_count} must include blank plus at least one action")));
    }
    let mut prev_end: Option<usize> = None;
    for inst in instances {
        if inst.start > inst.end {
            return Err(Error::Stream(format!(
                "instance ({}, {}) ends before it starts",
                inst.start, inst.end
            )));
        }
        if inst.end >= len {
            return Err(Error::Stream(format!(
                "instance ({}, {}) exceeds stream length {len}",
                inst.start, inst.end
            )));
        }
        if inst.label == BLANK {
            return Err(Error::Stream(format!(
                "instance at frame {} uses reserved blank label 0",
                inst.start
            )));
        }
        if inst.label >= class_count {
            return Err(Error::Stream(format!(
                "label {} >= class_count {class_count}",
                inst.label
            )));
        }
        if let Some(e) = prev_end {
            if inst.start <= e {
                return Err(Error::Stream(format!("overlap at frame {}", inst.start)));
            }
        }
        prev_end = Some(inst.end);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: usize,
    bodies: Vec<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationDoc {
    class_count: usize,
    instances: Vec<ActionInstance>,
}

/// Parse a line-delimited frame file; indices must run `0, 1, 2, …`.
pub fn parse_frames(frames_text: &str, joints: usize) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    for (line_no, line) in frames_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(line)
            .map_err(|e| Error::json(format!("frame record on line {}", line_no + 1), e))?;
        if rec.t != frames.len() {
            return Err(Error::Stream(format!(
                "line {}: frame index {} out of sequence (expected {})",
                line_no + 1,
                rec.t,
                frames.len()
            )));
        }
        let bodies = rec.bodies.into_iter().map(|coords| BodyPose { coords }).collect();
        frames.push(Frame::new(rec.t, bodies, joints)?);
    }
    Ok(frames)
}

/// Parse a line-delimited frame file plus its annotation document.
pub fn parse_stream(frames_text: &str, annotation_text: &str, joints: usize) -> Result<AnnotatedStream> {
    let frames = parse_frames(frames_text, joints)?;
    let (class_count, instances) = parse_annotations(annotation_text)?;
    AnnotatedStream::new(frames, instances, class_count)
}

/// Parse an annotation document on its own.
pub fn parse_annotations(text: &str) -> Result<(usize, Vec<ActionInstance>)> {
    let doc: AnnotationDoc = serde_json::from_str(text).map_err(|e| Error::json("annotation document", e))?;
    Ok((doc.class_count, doc.instances))
}
