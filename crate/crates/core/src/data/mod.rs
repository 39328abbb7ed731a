//! Skeleton topology, annotated streams, frame labels and synthetic data.

pub mod dataset;
pub mod labels;
pub mod stream;
pub mod synth;
pub mod topology;

pub use labels::{derive_frame_labels, segments, FrameLabel, Segment};
pub use stream::{parse_annotations, parse_frames, parse_stream, ActionInstance, AnnotatedStream, BodyPose, Frame, BLANK};
pub use synth::{synth_generate, SynthConfig};
pub use topology::{parse_topology, SkeletonTopology};
