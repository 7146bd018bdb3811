//! The orientation benchmark sweep, the end-to-end demodulation pipeline and
//! the run manifests that make both reproducible.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classic::{cpfg_orientation, gradient_orientation, prefilter_auto, Window};
use crate::error::{Error, Result};
use crate::hst::{demodulate, Demodulation};
use crate::image::RealImage;
use crate::metrics::{orientation_error_with_coverage, rmse_phase, sin_error_map, EvalReport};
use crate::net::{infer_orientation, ModelWeights};
use crate::orientation::{encode_orientation, OrientationMap};
use crate::sim::{add_gaussian_noise, derive_seed, gen_carrier, gen_peaks_phase, ground_truth_orientation, render_fringe, CarrierSpec};
use crate::unwrap::{orientation_to_direction, DirectionLift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradient,
    Cpfg,
    Deeporient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::Cpfg => "cpfg",
            Method::Deeporient => "deeporient",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Method::Gradient),
            "cpfg" => Ok(Method::Cpfg),
            "deeporient" => Ok(Method::Deeporient),
            other => Err(Error::param("method", format!("unknown method `{other}` (gradient, cpfg, deeporient)"))),
        }
    }
}

/// Peaks-plus-carrier sweep over modulation depth and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub a_values: Vec<f64>,
    pub period: f64,
    pub theta: f64,
    pub noise_levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub window: usize,
    pub repetitions: usize,
    pub rows: usize,
    pub cols: usize,
    pub border: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a_values: (0..=10).map(f64::from).collect(),
            period: 14.0,
            theta: 0.0,
            noise_levels: vec![0.0, 0.1],
            methods: vec![Method::Cpfg],
            window: 2,
            repetitions: 5,
            rows: 512,
            cols: 512,
            border: 8,
            base_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_values.is_empty() {
            return Err(Error::param("a_values", "must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::param("methods", "must not be empty"));
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|&n| !(n >= 0.0 && n.is_finite())) {
            return Err(Error::param("noise_levels", "need at least one non-negative level"));
        }
        if self.a_values.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::param("a_values", "coefficients must be non-negative"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be positive"));
        }
        CarrierSpec::new(self.period, self.theta)?;
        Window::new(self.window)?;
        Ok(())
    }

    /// All cases in output order: by `a`, then noise, then repetition.
    pub fn cases(&self) -> Vec<BenchCase> {
        let mut out = Vec::new();
        for (ai, &a) in self.a_values.iter().enumerate() {
            for &noise_std in &self.noise_levels {
                for rep in 0..self.repetitions {
                    // Seeds ignore the noise level so noisy and clean runs pair up.
                    let seed = derive_seed(self.base_seed, (ai * self.repetitions + rep) as u64);
                    out.push(BenchCase { a, noise_std, rep, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub a: f64,
    pub noise_std: f64,
    pub rep: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub a: f64,
    pub noise_std: f64,
    pub method: Method,
    pub seed: u64,
    pub oe: f64,
}

/// One method's result on one case, with its `|sin 2FO - sin 2FO_gt|` map.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub row: BenchRow,
    pub error_map: RealImage,
}

/// Simulated prefiltered input and ground truth for one case.
pub fn case_input(cfg: &SweepConfig, case: &BenchCase) -> Result<(RealImage, OrientationMap)> {
    let carrier = gen_carrier(cfg.rows, cfg.cols, CarrierSpec::new(cfg.period, cfg.theta)?);
    let phase = gen_peaks_phase(cfg.rows, cfg.cols, case.a).zip_map(&carrier, |p, c| p + c)?;
    let fringe = add_gaussian_noise(&render_fringe(&phase), case.noise_std, case.seed)?;
    Ok((prefilter_auto(&fringe)?, ground_truth_orientation(&phase)))
}

/// Estimates orientation with `method`; the network needs `model`.
pub fn estimate(method: Method, img: &RealImage, window: usize, model: Option<&ModelWeights>) -> Result<OrientationMap> {
    match method {
        Method::Gradient => gradient_orientation(img, Window::new(window)?),
        Method::Cpfg => cpfg_orientation(img, Window::new(window)?),
        Method::Deeporient => {
            let w = model.ok_or_else(|| Error::param("model", "the deeporient method needs a trained model"))?;
            infer_orientation(w, img)
        }
    }
}

/// Runs every configured method on one case.
pub fn run_case(cfg: &SweepConfig, case: &BenchCase, model: Option<&ModelWeights>) -> Result<Vec<CaseResult>> {
    let (img, truth) = case_input(cfg, case)?;
    let truth_enc = encode_orientation(&truth);
    cfg.methods
        .iter()
        .map(|&method| {
            let fo = estimate(method, &img, cfg.window, model)?;
            let (oe, _) = orientation_error_with_coverage(&fo, &truth, cfg.border)?;
            Ok(CaseResult {
                row: BenchRow {
                    a: case.a,
                    noise_std: case.noise_std,
                    method,
                    seed: case.seed,
                    oe,
                },
                error_map: sin_error_map(&encode_orientation(&fo), &truth_enc)?,
            })
        })
        .collect()
}

/// Sequential sweep over all cases.
pub fn benchmark(cfg: &SweepConfig, model: Option<&ModelWeights>) -> Result<Vec<CaseResult>> {
    cfg.validate()?;
    if cfg.methods.contains(&Method::Deeporient) && model.is_none() {
        return Err(Error::param("model", "the deeporient method needs a trained model"));
    }
    let mut out = Vec::new();
    for case in cfg.cases() {
        out.extend(run_case(cfg, &case, model)?);
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "a,noise_std,method,seed,oe";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{},{:.17e}\n", r.a, r.noise_std, r.method.name(), r.seed, r.oe));
    }
    s
}

/// Mean OE per `(a, noise_std, method)` in first-seen order.
pub fn mean_by_point(rows: &[BenchRow]) -> Vec<(f64, f64, Method, f64)> {
    let mut acc: Vec<(f64, f64, Method, f64, usize)> = Vec::new();
    for r in rows {
        match acc.iter_mut().find(|e| e.0 == r.a && e.1 == r.noise_std && e.2 == r.method) {
            Some(e) => {
                e.3 += r.oe;
                e.4 += 1;
            }
            None => acc.push((r.a, r.noise_std, r.method, r.oe, 1)),
        }
    }
    acc.into_iter().map(|(a, n, m, s, c)| (a, n, m, s / c as f64)).collect()
}

/// Everything the end-to-end pipeline produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub prefiltered: RealImage,
    pub orientation: OrientationMap,
    pub lift: DirectionLift,
    pub demodulation: Demodulation,
}

/// Prefilter, network orientation, direction lifting and HST demodulation.
/// Errors carry the name of the failing stage.
pub fn run_pipeline(fringe: &RealImage, model: &ModelWeights) -> Result<PipelineOutput> {
    let prefiltered = prefilter_auto(fringe).map_err(|e| e.in_stage("prefilter"))?;
    let orientation = infer_orientation(model, &prefiltered).map_err(|e| e.in_stage("orientation"))?;
    let lift = orientation_to_direction(&orientation).map_err(|e| e.in_stage("unwrap-orientation"))?;
    let demodulation = demodulate(&prefiltered, &lift.direction).map_err(|e| e.in_stage("demodulate"))?;
    Ok(PipelineOutput {
        prefiltered,
        orientation,
        lift,
        demodulation,
    })
}

/// Phase RMSE up to the sign ambiguity of the recovered direction branch.
/// Returns `(rmse, negated)` where `negated` says the estimate was flipped.
pub fn sign_aligned_rmse(phase: &RealImage, truth: &RealImage, border: usize) -> Result<(f64, bool)> {
    let direct = rmse_phase(phase, truth, border)?;
    let flipped = rmse_phase(&phase.map(|v| -v), truth, border)?;
    Ok(if flipped < direct { (flipped, true) } else { (direct, false) })
}

/// Scores a pipeline run against the true phase.
pub fn evaluate_pipeline(out: &PipelineOutput, truth_phase: &RealImage, border: usize) -> Result<(EvalReport, bool)> {
    let truth_fo = ground_truth_orientation(truth_phase);
    let (oe, coverage) = orientation_error_with_coverage(&out.orientation, &truth_fo, border)?;
    let (rmse, negated) = sign_aligned_rmse(&out.demodulation.unwrapped, truth_phase, border)?;
    let mut report = EvalReport::new("deeporient+hst", border);
    report.orientation_error = Some(oe);
    report.rmse_phase = Some(rmse);
    report.valid_pixel_fraction = coverage;
    Ok((report, negated))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    /// `(path, sha256)` of every input file.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Result<Self> {
        let config_hash = sha256_hex(&serde_json::to_vec(&config)?);
        Ok(Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            config_hash,
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: serde_json::Value::Null,
        })
    }

    fn hashed(path: &std::path::Path) -> Result<(String, String)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok((path.display().to_string(), sha256_hex(&bytes)))
    }

    pub fn add_input(&mut self, path: &std::path::Path) -> Result<()> {
        self.inputs.push(Self::hashed(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &std::path::Path) -> Result<()> {
        self.outputs.push(Self::hashed(path)?);
        Ok(())
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        crate::container::write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}
