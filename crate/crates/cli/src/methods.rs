//! Per-method configuration tables and a uniform way to run any method on a
//! dataset.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wlrbg::frame_io::Dataset;
use wlrbg::pipeline::run_pipeline;
use wlrbg::rpca::{solve_apg, solve_iealm};
use wlrbg::wlr::{golub_solve, solve_gtls, solve_wlr, WlrState};
use wlrbg::{Decomposition, DenseMatrix, Error, Method, PipelineConfig, RpcaConfig, WeightBlock, WlrConfig};

use crate::params;

/// Plain alternating solver on the first `k` frames versus the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WlrRunConfig {
    pub k: usize,
    pub rank: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub w1_low: f64,
    pub w1_high: f64,
    pub seed: u64,
}

impl Default for WlrRunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        WlrRunConfig {
            k: 1,
            rank: 1 + p.i2,
            epsilon: p.epsilon,
            max_iter: p.wlr_max_iter,
            w1_low: p.w1_low,
            w1_high: p.w1_high,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtlsRunConfig {
    pub k: usize,
    pub rank: usize,
    pub lambda: f64,
}

impl Default for GtlsRunConfig {
    fn default() -> Self {
        GtlsRunConfig { k: 1, rank: 2, lambda: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GolubRunConfig {
    pub k: usize,
    pub rank: usize,
}

impl Default for GolubRunConfig {
    fn default() -> Self {
        GolubRunConfig { k: 1, rank: 2 }
    }
}

#[derive(Debug, Clone)]
pub enum MethodConfig {
    Pipeline(PipelineConfig),
    Wlr(WlrRunConfig),
    Gtls(GtlsRunConfig),
    Golub(GolubRunConfig),
    Rpca(RpcaConfig),
}

impl MethodConfig {
    fn to_json(&self) -> Value {
        match self {
            MethodConfig::Pipeline(c) => json!(c),
            MethodConfig::Wlr(c) => json!(c),
            MethodConfig::Gtls(c) => json!(c),
            MethodConfig::Golub(c) => json!(c),
            MethodConfig::Rpca(c) => json!(c),
        }
    }
}

pub fn default_config(method: Method) -> MethodConfig {
    match method {
        Method::WlrPipeline => MethodConfig::Pipeline(PipelineConfig::default()),
        Method::Wlr => MethodConfig::Wlr(WlrRunConfig::default()),
        Method::Gtls => MethodConfig::Gtls(GtlsRunConfig::default()),
        Method::Golub => MethodConfig::Golub(GolubRunConfig::default()),
        Method::Iealm | Method::Apg => MethodConfig::Rpca(RpcaConfig::default()),
    }
}

pub fn defaults_json() -> Value {
    let mut out = serde_json::Map::new();
    out.insert("synth".into(), json!(wlrbg::SynthSpec::default()));
    for m in Method::ALL {
        out.insert(m.name().into(), default_config(m).to_json());
    }
    Value::Object(out)
}

/// Defaults, then `--param` overrides, then `--seed`.
pub fn configure(method: Method, seed: Option<u64>, overrides: &[(String, String)]) -> wlrbg::Result<MethodConfig> {
    let what = method.name();
    let cfg = match default_config(method) {
        MethodConfig::Pipeline(c) => {
            let mut c = params::apply(&c, overrides, what)?;
            c.seed = seed.unwrap_or(c.seed);
            c.validate()?;
            MethodConfig::Pipeline(c)
        }
        MethodConfig::Wlr(c) => {
            let mut c = params::apply(&c, overrides, what)?;
            c.seed = seed.unwrap_or(c.seed);
            MethodConfig::Wlr(c)
        }
        MethodConfig::Gtls(c) => MethodConfig::Gtls(params::apply(&c, overrides, what)?),
        MethodConfig::Golub(c) => MethodConfig::Golub(params::apply(&c, overrides, what)?),
        MethodConfig::Rpca(c) => {
            let c = params::apply(&c, overrides, what)?;
            c.validate()?;
            MethodConfig::Rpca(c)
        }
    };
    if seed.is_some() && !matches!(cfg, MethodConfig::Pipeline(_) | MethodConfig::Wlr(_)) {
        eprintln!("note: {what} is deterministic; --seed has no effect");
    }
    Ok(cfg)
}

pub struct Run {
    pub decomposition: Decomposition,
    /// Everything needed to reproduce and inspect the run except timing.
    pub state: Value,
    pub seconds: f64,
}

fn split(a: &DenseMatrix, k: usize) -> wlrbg::Result<(DenseMatrix, DenseMatrix)> {
    if k == 0 || k >= a.ncols() {
        return Err(Error::Config(format!("k = {k} must be in [1, {})", a.ncols())));
    }
    Ok((a.columns(0, k).into_owned(), a.columns(k, a.ncols() - k).into_owned()))
}

fn closed_form(method: Method, a: &DenseMatrix, background: DenseMatrix) -> Decomposition {
    Decomposition {
        method,
        foreground: a - &background,
        background,
        thresholded_foreground: None,
        iterations: 0,
        converged: true,
        svd_count: 1,
        residual: 0.0,
    }
}

fn histories(state: &WlrState) -> Value {
    json!({
        "initial_objective": state.initial_objective,
        "objective_history": state.objective_history,
        "error_history": state.error_history,
        "relative_error_history": state.relative_error_history,
        "rank_deficient": state.rank_deficient,
    })
}

pub fn run(method: Method, config: &MethodConfig, dataset: &Dataset) -> wlrbg::Result<Run> {
    let a = &dataset.frames;
    let start = Instant::now();
    let (decomposition, mut extra) = match config {
        MethodConfig::Pipeline(c) => {
            let (dec, selection, state) = run_pipeline(dataset, c)?;
            (dec, json!({ "selection": selection, "wlr": histories(&state) }))
        }
        MethodConfig::Wlr(c) => {
            let (a1, a2) = split(a, c.k)?;
            let w1 = WeightBlock::uniform(a.nrows(), c.k, c.w1_low, c.w1_high, c.seed.wrapping_add(1))?;
            let wcfg = WlrConfig {
                epsilon: c.epsilon,
                max_iter: c.max_iter,
                seed: c.seed,
                ..WlrConfig::new(c.rank, c.k)
            };
            let (state, dec) = solve_wlr(&a1, &a2, &w1, &wcfg)?;
            (dec, json!({ "wlr": histories(&state) }))
        }
        MethodConfig::Gtls(c) => {
            let (a1, a2) = split(a, c.k)?;
            (closed_form(method, a, solve_gtls(&a1, &a2, c.lambda, c.rank)?), json!({}))
        }
        MethodConfig::Golub(c) => {
            let (a1, a2) = split(a, c.k)?;
            (closed_form(method, a, golub_solve(&a1, &a2, c.rank)?), json!({}))
        }
        MethodConfig::Rpca(c) => {
            let dec = if method == Method::Apg { solve_apg(a, c)? } else { solve_iealm(a, c)? };
            (dec, json!({}))
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    let mut echoed = config.to_json();
    if let MethodConfig::Rpca(c) = config {
        echoed["lambda"] = json!(c.resolved_lambda(a.nrows(), a.ncols()));
    }
    let mut state = json!({
        "method": method.name(),
        "config": echoed,
        "dataset": { "height": dataset.height, "width": dataset.width, "n_frames": dataset.n_frames() },
        "iterations": decomposition.iterations,
        "converged": decomposition.converged,
        "svd_count": decomposition.svd_count,
        "residual": decomposition.residual,
    });
    if let Some(map) = extra.as_object_mut() {
        for (k, v) in std::mem::take(map) {
            state[k] = v;
        }
    }
    Ok(Run { decomposition, state, seconds })
}
