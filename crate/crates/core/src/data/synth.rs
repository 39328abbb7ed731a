//! Deterministic synthetic skeleton streams.
//!
//! Every action class owns a fixed subset of joints that oscillate
//! sinusoidally around a rest pose with class-specific frequency, phase and
//! amplitude; a moving joint carries its whole sub-tree with it, like a limb.
//! Instances are separated by blank gaps holding the rest pose.
//!
//! The rest pose and class templates depend only on the topology and class
//! count, not on the seed, so datasets drawn with different seeds share one
//! action vocabulary and can serve as train and test splits.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ActionInstance, AnnotatedStream, BodyPose, Frame, SkeletonTopology};
use crate::{Error, Result};

/// Largest instance duration; the top temporal window spans 255 frames.
pub const MAX_DURATION: usize = 255;
pub const MIN_DURATION: usize = 8;

const VOCABULARY_SEED: u64 = 0x5eed_acc0;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    /// Action classes, blank excluded.
    pub class_count: usize,
    pub stream_count: usize,
    pub stream_len: usize,
    /// Inclusive instance duration range in frames.
    pub duration_range: (usize, usize),
    /// Inclusive blank gap range in frames.
    pub gap_range: (usize, usize),
    pub noise_sigma: f64,
    pub topology: SkeletonTopology,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Synth(format!(
                "need >= 2 action classes, got {}",
                self.class_count
            )));
        }
        let (lo, hi) = self.duration_range;
        if lo > hi || lo < MIN_DURATION || hi > MAX_DURATION {
            return Err(Error::Synth(format!(
                "duration range [{lo}, {hi}] must lie within [{MIN_DURATION}, {MAX_DURATION}]"
            )));
        }
        let (glo, ghi) = self.gap_range;
        if glo > ghi || glo == 0 {
            return Err(Error::Synth(format!("gap range [{glo}, {ghi}] must be positive and ordered")));
        }
        if self.stream_count == 0 || self.stream_len == 0 {
            return Err(Error::Synth("stream_count and stream_len must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Synth(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct JointMotion {
    /// The driven joint followed by its descendants.
    subtree: Vec<usize>,
    amplitude: [f64; 3],
    phase: f64,
}

#[derive(Clone, Debug)]
struct ClassTemplate {
    /// Cycles per frame.
    frequency: f64,
    joints: Vec<JointMotion>,
}

impl ClassTemplate {
    fn pose(&self, rest: &[f64], tau: usize) -> Vec<f64> {
        let mut p = rest.to_vec();
        for m in &self.joints {
            let s = (TAU * self.frequency * tau as f64 + m.phase).sin();
            for &v in &m.subtree {
                for a in 0..3 {
                    p[3 * v + a] += m.amplitude[a] * s;
                }
            }
        }
        p
    }
}

fn rest_pose(topology: &SkeletonTopology, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let j = topology.joint_count();
    let mut pose = vec![0.0; 3 * j];
    let root = topology.root();
    pose[3 * root..3 * root + 3].copy_from_slice(&[0.0, 1.6, 3.0]);
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &c in topology.children(v) {
            let off = [
                rng.random_range(-0.15..0.15),
                -rng.random_range(0.05..0.25),
                rng.random_range(-0.05..0.05),
            ];
            for a in 0..3 {
                pose[3 * c + a] = pose[3 * v + a] + off[a];
            }
            order.push(c);
        }
        i += 1;
    }
    pose
}

fn subtree(topology: &SkeletonTopology, v: usize) -> Vec<usize> {
    let mut out = vec![v];
    let mut i = 0;
    while i < out.len() {
        out.extend_from_slice(topology.children(out[i]));
        i += 1;
    }
    out
}

fn class_templates(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<ClassTemplate> {
    let j = cfg.topology.joint_count();
    let max_moving = (j / 4).clamp(1, 6);
    let min_moving = max_moving.min(3);
    (0..cfg.class_count)
        .map(|_| {
            let k = rng.random_range(min_moving..=max_moving);
            let mut pool: Vec<usize> = (0..j).collect();
            pool.shuffle(rng);
            pool.truncate(k);
            pool.sort_unstable();
            let frequency = rng.random_range(1.0 / 50.0..1.0 / 12.0);
            let joints = pool
                .into_iter()
                .map(|joint| {
                    let mut amplitude = [0.0; 3];
                    for a in amplitude.iter_mut() {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        *a = sign * rng.random_range(0.1..0.4);
                    }
                    JointMotion {
                        subtree: subtree(&cfg.topology, joint),
                        amplitude,
                        phase: rng.random_range(0.0..TAU),
                    }
                })
                .collect();
            ClassTemplate { frequency, joints }
        })
        .collect()
}

/// Generate `cfg.stream_count` annotated streams; a pure function of `(cfg, seed)`.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Vec<AnnotatedStream>> {
    cfg.validate()?;
    let mut vocab = ChaCha8Rng::seed_from_u64(VOCABULARY_SEED);
    let rest = rest_pose(&cfg.topology, &mut vocab);
    let templates = class_templates(cfg, &mut vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let joints = cfg.topology.joint_count();
    let (dlo, dhi) = cfg.duration_range;
    let (glo, ghi) = cfg.gap_range;

    let mut streams = Vec::with_capacity(cfg.stream_count);
    for _ in 0..cfg.stream_count {
        // labels cycle through shuffled rounds of all classes
        let mut bag: Vec<usize> = Vec::new();
        let mut instances = Vec::new();
        let mut t = rng.random_range(glo..=ghi);
        loop {
            let dur = rng.random_range(dlo..=dhi);
            if t + dur > cfg.stream_len {
                break;
            }
            if bag.is_empty() {
                bag = (1..=cfg.class_count).collect();
                bag.shuffle(&mut rng);
            }
            let label = bag.pop().expect("refilled");
            instances.push(ActionInstance {
                start: t,
                end: t + dur - 1,
                label,
            });
            t += dur + rng.random_range(glo..=ghi);
        }

        let mut frames = Vec::with_capacity(cfg.stream_len);
        let mut next = 0;
        for t in 0..cfg.stream_len {
            while next < instances.len() && instances[next].end < t {
                next += 1;
            }
            let base = match instances.get(next) {
                Some(inst) if inst.contains(t) => templates[inst.label - 1].pose(&rest, t - inst.start),
                _ => rest.clone(),
            };
            let coords = base
                .iter()
                .map(|v| {
                    let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (v + n) as f32
                })
                .collect();
            frames.push(Frame::new(t, vec![BodyPose { coords }], joints)?);
        }
        streams.push(AnnotatedStream::new(frames, instances, cfg.class_count + 1)?);
    }
    Ok(streams)
}
