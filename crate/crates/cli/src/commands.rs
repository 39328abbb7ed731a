use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde_json::json;
use ssnet::checkpoint::{load_checkpoint, Checkpoint};
use ssnet::data::dataset::{annotations_path, list_streams, load_dataset, write_dataset};
use ssnet::data::{parse_annotations, parse_frames, parse_topology, synth_generate, AnnotatedStream, SkeletonTopology, SynthConfig};
use ssnet::eval::{compare_reports, evaluate, fuse_predictions, write_report_csv, EvalReport, StreamPredictions, DEFAULT_RATIOS, DEFAULT_REGRESSION_RATIOS};
use ssnet::model::Model;
use ssnet::nn::{ParamStore, Real};
use ssnet::stream::{ground_truth_distances, read_predictions, run_stream, run_stream_naive, write_predictions, Mode, Prediction, TimingReport};
use ssnet::trainer::{train as train_model, TrainMode};

use crate::config::RunConfig;
use crate::{EvalArgs, FuseArgs, InspectArgs, StreamArgs, SynthArgs, TrainArgs};

const TOPOLOGY_FILE: &str = "topology.json";
const PREDS_SUFFIX: &str = ".preds.csv";

fn read_topology(path: &Path) -> Result<SkeletonTopology> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_topology(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// `--topology`, else the dataset's `topology.json`, else the 25-joint default.
fn resolve_topology(flag: Option<&Path>, data: Option<&Path>) -> Result<SkeletonTopology> {
    if let Some(p) = flag {
        return read_topology(p);
    }
    if let Some(p) = data.map(|d| d.join(TOPOLOGY_FILE)).filter(|p| p.exists()) {
        return read_topology(&p);
    }
    Ok(SkeletonTopology::default_25())
}

fn preds_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}{PREDS_SUFFIX}"))
}

fn write_preds_file(path: &Path, preds: &[Prediction]) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_predictions(BufWriter::new(f), preds)?;
    Ok(())
}

fn read_preds_file(path: &Path) -> Result<Vec<Prediction>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_predictions(f).with_context(|| format!("reading {}", path.display()))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?.synth;
    let topology = match &a.topology {
        Some(p) => read_topology(p)?,
        None => SkeletonTopology::default_25(),
    };
    let sc = SynthConfig {
        class_count: a.classes.unwrap_or(cfg.classes),
        stream_count: a.streams.unwrap_or(cfg.streams),
        stream_len: a.len.unwrap_or(cfg.stream_len),
        duration_range: a.duration.unwrap_or(cfg.duration),
        gap_range: a.gap.unwrap_or(cfg.gap),
        noise_sigma: a.noise.unwrap_or(cfg.noise),
        topology: topology.clone(),
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    if a.out.exists() {
        let non_empty = fs::read_dir(&a.out)?.next().is_some();
        ensure!(!non_empty || a.force, "{} is not empty (pass --force to overwrite)", a.out.display());
    }
    let streams = synth_generate(&sc, seed)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let generator = json!({
        "classes": sc.class_count,
        "streams": sc.stream_count,
        "stream_len": sc.stream_len,
        "duration": sc.duration_range,
        "gap": sc.gap_range,
        "noise": sc.noise_sigma,
        "topology_digest": topology.digest(),
    });
    write_dataset(&a.out, &streams, Some(seed), generator)?;
    fs::write(a.out.join(TOPOLOGY_FILE), topology.to_json())?;
    let instances: usize = streams.iter().map(|s| s.instances.len()).sum();
    println!(
        "wrote {} streams ({} instances, {} classes + blank) to {}",
        streams.len(),
        instances,
        sc.class_count,
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let data = a.data.clone().or(cfg.paths.data.clone()).context("no dataset: pass --data or set paths.data")?;
    let out = a.out.clone().or(cfg.paths.out.clone()).context("no output: pass --out or set paths.out")?;
    let topo_flag = a.topology.clone().or(cfg.paths.topology.clone());
    let topology = resolve_topology(topo_flag.as_deref(), Some(&data))?;

    let mut tc = cfg.train.clone();
    if let Some(m) = &a.mode {
        tc.mode = m.parse::<TrainMode>()?;
    }
    if let Some(g) = a.gamma {
        tc.gamma = g;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(lr) = a.lr {
        tc.opt.learning_rate = lr;
    }
    tc.validate()?;

    let named = load_dataset(&data, topology.joint_count())?;
    let streams: Vec<AnnotatedStream> = named.into_iter().map(|(_, s)| s).collect();
    let classes = streams.iter().map(|s| s.class_count).max().unwrap_or(0);
    let mut mc = cfg.model.build(topology.joint_count(), classes);
    if a.raw_distance {
        mc.normalize_distance = false;
    }
    mc.validate()?;
    println!(
        "training {} on {} streams ({} frames), {} classes, {} epochs",
        tc.mode,
        streams.len(),
        streams.iter().map(|s| s.len()).sum::<usize>(),
        classes,
        tc.epochs
    );
    let outcome = train_model(&streams, &topology, mc, &tc, Some(&out), |row| {
        println!(
            "epoch {:>3}  loss {:.5}  loss_c {:.5}  loss_s {:.5}  lr {:.5}  frame_acc {:.4}",
            row.epoch, row.loss, row.loss_c, row.loss_s, row.lr, row.frame_acc
        );
    })?;
    println!("saved checkpoint ({} parameters) to {}", outcome.params.scalar_count(), out.display());
    Ok(())
}

struct StreamJob {
    name: String,
    frames: Vec<ssnet::data::Frame>,
    gt: Option<Vec<f64>>,
    out: PathBuf,
}

fn run_job<T: Real>(model: &Model, params: &ParamStore<T>, job: &StreamJob, mode: Mode, bench: bool) -> Result<(TimingReport, Option<TimingReport>)> {
    let (preds, timing) = run_stream(model, params, &job.frames, mode, job.gt.as_deref())?;
    write_preds_file(&job.out, &preds)?;
    let naive = if bench {
        let (naive_preds, t) = run_stream_naive(model, params, &job.frames, mode, job.gt.as_deref())?;
        let agree = preds.iter().zip(&naive_preds).filter(|(a, b)| a.class == b.class).count();
        if agree != preds.len() {
            eprintln!("{}: naive path disagrees on {} of {} frames", job.name, preds.len() - agree, preds.len());
        }
        Some(t)
    } else {
        None
    };
    Ok((timing, naive))
}

fn stream_jobs(a: &StreamArgs, joints: usize) -> Result<Vec<StreamJob>> {
    let load_gt = |ann: &Path, frames: &[ssnet::data::Frame]| -> Result<Vec<f64>> {
        let text = fs::read_to_string(ann).with_context(|| format!("reading {}", ann.display()))?;
        let (classes, instances) = parse_annotations(&text)?;
        let s = AnnotatedStream::new(frames.to_vec(), instances, classes)?;
        Ok(ground_truth_distances(&s))
    };
    match (&a.input, &a.data) {
        (Some(input), None) => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let frames = parse_frames(&text, joints)?;
            let gt = a.annotations.as_deref().map(|p| load_gt(p, &frames)).transpose()?;
            let name = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(vec![StreamJob { name, frames, gt, out: a.out.clone() }])
        }
        (None, Some(data)) => {
            fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            let names = list_streams(data)?;
            ensure!(!names.is_empty(), "no streams in {}", data.display());
            names
                .into_iter()
                .map(|name| {
                    let path = ssnet::data::dataset::frames_path(data, &name);
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let frames = parse_frames(&text, joints)?;
                    let ann = annotations_path(data, &name);
                    let gt = if ann.exists() { Some(load_gt(&ann, &frames)?) } else { None };
                    let out = preds_path(&a.out, &name);
                    Ok(StreamJob { name, frames, gt, out })
                })
                .collect()
        }
        _ => bail!("pass either --input FILE or --data DIR"),
    }
}

pub fn stream(a: StreamArgs) -> Result<()> {
    let ck = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let model = ck.model()?;
    let mode: Mode = a.mode.parse()?;
    let jobs = stream_jobs(&a, model.config.joints)?;
    if mode.needs_ground_truth() {
        if let Some(j) = jobs.iter().find(|j| j.gt.is_none()) {
            bail!("ssnet-gt mode needs annotations, none found for {}", j.name);
        }
    }
    let mut total = (0usize, 0.0f64, 0.0f64);
    let mut columns = (0usize, 0usize);
    for job in &jobs {
        let (t, naive) = match a.precision.as_str() {
            "f32" => run_job(&model, &ck.params, job, mode, a.bench)?,
            "f64" => run_job(&model, &ck.params.cast::<f64>(), job, mode, a.bench)?,
            other => bail!("unknown precision `{other}` (expected f32 or f64)"),
        };
        total.0 += t.frames;
        total.1 += t.seconds;
        columns.0 = t.columns_per_frame;
        if let Some(n) = naive {
            total.2 += n.seconds;
            columns.1 = n.columns_per_frame;
        }
    }
    let fps = |s: f64| if s > 0.0 { total.0 as f64 / s } else { f64::INFINITY };
    println!(
        "{} streams, {} frames, mode {mode}: {:.1} fps, {} columns/frame",
        jobs.len(),
        total.0,
        fps(total.1),
        columns.0
    );
    if a.bench {
        println!(
            "naive recompute: {:.1} fps, {} columns/frame, speedup {:.2}x",
            fps(total.2),
            columns.1,
            total.2 / total.1.max(f64::MIN_POSITIVE)
        );
    }
    Ok(())
}

fn eval_dir(data: &Path, preds: &Path, ratios: &[u32], reg: &[u32]) -> Result<EvalReport> {
    let names = list_streams(data)?;
    ensure!(!names.is_empty(), "no streams in {}", data.display());
    let streams = names
        .into_iter()
        .map(|name| {
            let ann = annotations_path(data, &name);
            let text = fs::read_to_string(&ann).with_context(|| format!("reading {}", ann.display()))?;
            let (_, instances) = parse_annotations(&text)?;
            let preds = read_preds_file(&preds_path(preds, &name))?;
            // Frame count comes from the frame file so truncated predictions are caught.
            let fp = ssnet::data::dataset::frames_path(data, &name);
            let frames = fs::read_to_string(&fp)
                .with_context(|| format!("reading {}", fp.display()))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .count();
            Ok(StreamPredictions { name, frames, instances, preds })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&streams, ratios, reg)?)
}

fn print_report(r: &EvalReport) {
    println!("{} streams, {} instances, {} frames", r.streams, r.instances, r.frames);
    for (k, v) in &r.accuracy {
        println!("accuracy@{k:>2}%          {v:.4}");
    }
    println!("sl_score              {:.4}", r.sl_score);
    for (k, v) in &r.regression_error {
        println!("regression_error@{k:>2}%  {v:.4}");
    }
    println!("frame_accuracy        {:.4}", r.frame_accuracy);
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let ratios = a.ratios.clone().unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
    let reg = a.regression_ratios.clone().unwrap_or_else(|| DEFAULT_REGRESSION_RATIOS.to_vec());
    ensure!(ratios.iter().chain(&reg).all(|r| (1..=100).contains(r)), "ratios must lie in 1..=100");
    if let Some(dirs) = &a.compare {
        let ra = eval_dir(&a.data, &dirs[0], &ratios, &reg)?;
        let rb = eval_dir(&a.data, &dirs[1], &ratios, &reg)?;
        print!("{}", compare_reports(&dirs[0].display().to_string(), &ra, &dirs[1].display().to_string(), &rb));
        if let Some(out) = &a.out {
            let doc = json!({ "a": ra, "b": rb });
            fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        return Ok(());
    }
    let preds = a.preds.as_ref().expect("clap requires --preds without --compare");
    let report = eval_dir(&a.data, preds, &ratios, &reg)?;
    print_report(&report);
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(csv) = &a.csv {
        let f = fs::File::create(csv).with_context(|| format!("creating {}", csv.display()))?;
        write_report_csv(BufWriter::new(f), &report)?;
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let ck: Checkpoint = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let m = &ck.manifest;
    let c = &m.model_config;
    println!("checkpoint       {}", a.model.display());
    println!("format version   {}", m.format_version);
    println!("trained as       {} ({} epochs)", m.train_mode, m.epoch);
    println!("topology         {} joints, digest {}", ck.topology.joint_count(), m.topology_digest);
    println!("classes          {} (including blank)", c.classes);
    println!("tree             {:?} taps, dilations {:?}", c.tree_scheme, c.tree_dilations);
    println!("temporal         {} layers, {} channels", c.temporal.dilations.len(), c.temporal.channels);
    println!("dilations        {:?}", c.temporal.dilations);
    println!("scales           {:?}", ssnet::temporal::scale_table(&c.temporal));
    println!("distance target  {}", if c.normalize_distance { "normalised" } else { "raw frames" });
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    for p in ck.params.iter() {
        let group = p.name.split('.').next().unwrap_or("");
        *groups.entry(group).or_default() += p.value.data().len();
    }
    for (g, n) in &groups {
        println!("params {g:<10} {n}");
    }
    println!("params total     {}", ck.params.scalar_count());
    if a.tensors {
        for p in ck.params.iter() {
            println!("  {:<28} {:?}", p.name, p.value.shape());
        }
    }
    Ok(())
}

/// Each input is a directory of `*.preds.csv` files or a single CSV.
pub fn fuse(a: FuseArgs) -> Result<()> {
    let all_dirs = a.inputs.iter().all(|p| p.is_dir());
    let all_files = a.inputs.iter().all(|p| p.is_file());
    if all_files {
        let runs = a.inputs.iter().map(|p| read_preds_file(p)).collect::<Result<Vec<_>>>()?;
        let fused = fuse_predictions(&runs)?;
        write_preds_file(&a.out, &fused)?;
        println!("fused {} runs over {} frames into {}", runs.len(), fused.len(), a.out.display());
        return Ok(());
    }
    ensure!(all_dirs, "inputs must be all directories or all files");
    let names = |d: &Path| -> Result<Vec<String>> {
        let mut v: Vec<String> = fs::read_dir(d)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_string_lossy().strip_suffix(PREDS_SUFFIX).map(str::to_string))
            .collect();
        v.sort();
        Ok(v)
    };
    let first = names(&a.inputs[0])?;
    ensure!(!first.is_empty(), "no prediction files in {}", a.inputs[0].display());
    for d in &a.inputs[1..] {
        ensure!(names(d)? == first, "{} does not cover the same streams as {}", d.display(), a.inputs[0].display());
    }
    fs::create_dir_all(&a.out)?;
    for name in &first {
        let runs = a.inputs.iter().map(|d| read_preds_file(&preds_path(d, name))).collect::<Result<Vec<_>>>()?;
        let fused = fuse_predictions(&runs).with_context(|| format!("fusing {name}"))?;
        write_preds_file(&preds_path(&a.out, name), &fused)?;
    }
    println!("fused {} runs for {} streams into {}", a.inputs.len(), first.len(), a.out.display());
    Ok(())
}
