use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use wlrbg::frame_io::{load_manifest, read_matrix, save_frames, write_frame, write_matrix, Dataset, Manifest};
use wlrbg::metrics::{evaluate, MetricsReport};
use wlrbg::synth::generate;
use wlrbg::{Error, Method, SynthSpec};

use crate::methods::{configure, run, Run};
use crate::params;

const STATE: &str = "state.json";
const FOREGROUND: &str = "foreground.mat";
const THRESHOLDED: &str = "foreground_thresholded.mat";

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn synth(out: &Path, seed: Option<u64>, overrides: &[(String, String)]) -> Result<()> {
    let mut spec = params::apply(&SynthSpec::default(), overrides, "synth")?;
    spec.seed = seed.unwrap_or(spec.seed);
    let data = generate(&spec)?;
    create_dir(out)?;
    save_frames(&data.frames, spec.height, spec.width, &out.join("input"))?;
    let gt = data.ground_truth.as_ref().expect("synthetic data has masks");
    save_frames(gt, spec.height, spec.width, &out.join("groundtruth"))?;
    Manifest {
        height: spec.height,
        width: spec.width,
        n_frames: spec.n_frames,
        frame_glob: "input/*.pgm".into(),
        gt_glob: Some("groundtruth/*.pgm".into()),
    }
    .write(&out.join("manifest.json"))?;
    write_json(&out.join("spec.json"), &json!(spec))?;
    println!("wrote {} frames to {}", spec.n_frames, out.display());
    Ok(())
}

fn save_run(out: &Path, dataset: &Dataset, run: &Run) -> Result<()> {
    let dec = &run.decomposition;
    let (h, w) = (dataset.height, dataset.width);
    create_dir(out)?;
    save_frames(&dec.background, h, w, &out.join("background"))?;
    save_frames(&dec.evaluated_foreground().abs(), h, w, &out.join("foreground"))?;
    write_matrix(&out.join("background.mat"), &dec.background)?;
    write_matrix(&out.join(FOREGROUND), &dec.foreground)?;
    if let Some(t) = &dec.thresholded_foreground {
        write_matrix(&out.join(THRESHOLDED), t)?;
    }
    let mut state = run.state.clone();
    state["seconds"] = json!(run.seconds);
    write_json(&out.join(STATE), &state)
}

pub fn decompose(manifest: &Path, method: Method, out: &Path, seed: Option<u64>, overrides: &[(String, String)]) -> Result<()> {
    let config = configure(method, seed, overrides)?;
    let dataset = load_manifest(manifest)?;
    let run = run(method, &config, &dataset).with_context(|| format!("{method} failed"))?;
    save_run(out, &dataset, &run)?;
    println!(
        "{method}: {} iterations, converged {}, {:.2}s -> {}",
        run.decomposition.iterations,
        run.decomposition.converged,
        run.seconds,
        out.display()
    );
    Ok(())
}

struct Means {
    mse: f64,
    psnr: f64,
    infinite_psnr: usize,
    mssim: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// PSNR is averaged over the frames where it is finite.
fn means(r: &MetricsReport) -> Means {
    Means {
        mse: mean(r.per_frame_mse.iter().copied()),
        psnr: mean(r.per_frame_psnr.iter().copied().filter(|p| p.is_finite())),
        infinite_psnr: r.per_frame_psnr.iter().filter(|p| p.is_infinite()).count(),
        mssim: mean(r.per_frame_mssim.iter().copied()),
    }
}

fn report(dataset: &Dataset, run_dir: &Path) -> Result<MetricsReport> {
    if dataset.ground_truth.is_none() {
        return Err(Error::MissingGroundTruth.into());
    }
    let raw = read_matrix(&run_dir.join(FOREGROUND))?;
    let thresholded = run_dir.join(THRESHOLDED);
    let quality = if thresholded.is_file() { read_matrix(&thresholded)? } else { raw.clone() };
    Ok(evaluate(&raw, &quality, dataset, true)?)
}

fn save_report(out: &Path, dataset: &Dataset, r: &MetricsReport, state: Option<&Value>) -> Result<Means> {
    create_dir(out)?;
    let mut roc = String::from("threshold,tp,fp,tn,fn,tpr,fpr\n");
    for p in &r.roc {
        writeln!(roc, "{},{},{},{},{},{},{}", p.threshold, p.tp, p.fp, p.tn, p.fn_, p.tpr, p.fpr)?;
    }
    write_text(&out.join("roc.csv"), &roc)?;

    let mut per_frame = String::from("frame,mse,psnr,mssim\n");
    for j in 0..r.per_frame_mse.len() {
        writeln!(
            per_frame,
            "{},{},{},{}",
            dataset.names[j], r.per_frame_mse[j], r.per_frame_psnr[j], r.per_frame_mssim[j]
        )?;
    }
    write_text(&out.join("per_frame.csv"), &per_frame)?;

    if let Some(maps) = &r.ssim_maps {
        let dir = out.join("ssim");
        create_dir(&dir)?;
        for (j, map) in maps.iter().enumerate() {
            write_frame(&dir.join(format!("frame_{:06}.pgm", j + 1)), &map.map(|v| 255.0 * v.clamp(0.0, 1.0)))?;
        }
    }

    let m = means(r);
    let summary = json!({
        "method": state.and_then(|s| s.get("method")).cloned().unwrap_or(Value::Null),
        "seconds": state.and_then(|s| s.get("seconds")).cloned().unwrap_or(Value::Null),
        "auc": r.auc,
        "mean_mse": m.mse,
        "mean_psnr": m.psnr,
        "infinite_psnr_frames": m.infinite_psnr,
        "mean_mssim": m.mssim,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(m)
}

fn read_state(run_dir: &Path) -> Option<Value> {
    let text = fs::read_to_string(run_dir.join(STATE)).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn evaluate_run(manifest: &Path, run_dir: &Path, out: &Path) -> Result<()> {
    let dataset = load_manifest(manifest)?;
    let r = report(&dataset, run_dir)?;
    save_report(out, &dataset, &r, read_state(run_dir).as_ref())?;
    println!("auc {:.4} -> {}", r.auc, out.display());
    Ok(())
}

pub fn compare(manifest: &Path, methods: &[Method], out: &Path, seed: Option<u64>) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Config("compare needs at least one --method".into()).into());
    }
    let dataset = load_manifest(manifest)?;
    if dataset.ground_truth.is_none() {
        return Err(Error::MissingGroundTruth.into());
    }
    let mut table = String::from(
        "method,seconds,iterations,svd_count,converged,auc,mean_mse,mean_psnr,infinite_psnr_frames,mean_mssim\n",
    );
    for &method in methods {
        let config = configure(method, seed, &[])?;
        let run = run(method, &config, &dataset).with_context(|| format!("{method} failed"))?;
        let dir = out.join(method.name());
        save_run(&dir, &dataset, &run)?;
        let r = report(&dataset, &dir)?;
        let m = save_report(&dir.join("report"), &dataset, &r, read_state(&dir).as_ref())?;
        let d = &run.decomposition;
        writeln!(
            table,
            "{},{:.3},{},{},{},{},{},{},{},{}",
            method, run.seconds, d.iterations, d.svd_count, d.converged, r.auc, m.mse, m.psnr, m.infinite_psnr, m.mssim
        )?;
        println!("{method}: auc {:.4}, {:.2}s", r.auc, run.seconds);
    }
    write_text(&out.join("comparison.csv"), &table)
}
