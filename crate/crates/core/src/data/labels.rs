use crate::data::{AnnotatedStream, BLANK};

/// Per-frame supervision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameLabel {
    pub class: usize,
    /// Frames since the current segment started.
    pub start_distance: usize,
    /// Length of the segment containing the frame.
    pub instance_length: usize,
}

/// A maximal run of frames sharing one label; blank gaps are segments too.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

/// Tile `[0, len)` with the annotated instances and the blank gaps between them.
pub fn segments(stream: &AnnotatedStream) -> Vec<Segment> {
    let mut out = Vec::with_capacity(2 * stream.instances.len() + 1);
    let mut t = 0;
    for inst in &stream.instances {
        if inst.start > t {
            out.push(Segment {
                start: t,
                end: inst.start - 1,
                label: BLANK,
            });
        }
        out.push(Segment {
            start: inst.start,
            end: inst.end,
            label: inst.label,
        });
        t = inst.end + 1;
    }
    if t < stream.len() {
        out.push(Segment {
            start: t,
            end: stream.len() - 1,
            label: BLANK,
        });
    }
    out
}

/// One label per frame. Blank gaps count their distance from the gap start.
pub fn derive_frame_labels(stream: &AnnotatedStream) -> Vec<FrameLabel> {
    let mut out = Vec::with_capacity(stream.len());
    for seg in segments(stream) {
        let d = seg.end - seg.start + 1;
        for t in seg.start..=seg.end {
            out.push(FrameLabel {
                class: seg.label,
                start_distance: t - seg.start,
                instance_length: d,
            });
        }
    }
    out
}
