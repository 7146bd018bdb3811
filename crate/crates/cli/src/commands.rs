use std::path::Path;

use fringeproc::classic::{cpfg_orientation, gradient_orientation, prefilter_auto, Window};
use fringeproc::container::{read_sidecar, write_atomic, Kind, Sidecar};
use fringeproc::dataset::{load_dataset, make_dataset as write_dataset, DatasetManifest};
use fringeproc::experiment::{self, evaluate_pipeline, run_case, rows_to_csv, run_pipeline, Method, RunManifest, SweepConfig};
use fringeproc::hst;
use fringeproc::metrics::{orientation_error_with_coverage, rmse_channels, rmse_phase, EvalReport};
use fringeproc::net::{infer_orientation, load_weights, save_weights, train as train_net, NetworkConfig, TrainConfig};
use fringeproc::orientation::encode_orientation;
use fringeproc::sim::{
    add_gaussian_noise, derive_seed, gen_blob_mask_phase, gen_carrier, gen_object_phase_gaussians, gen_peaks_phase, ground_truth_direction,
    render_fringe, CarrierSpec, GaussianRanges,
};
use fringeproc::unwrap::orientation_to_direction;
use fringeproc::RealImage;
use rayon::prelude::*;
use serde_json::json;

use crate::io::*;
use crate::{
    BenchmarkArgs, ClassicMethod, DemodulateArgs, EvaluateArgs, InferArgs, MakeDatasetArgs, Metric, ObjectKind, OrientClassicArgs, PipelineArgs,
    SimulateArgs, TrainArgs, UnwrapArgs,
};

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let (rows, cols, seed) = (a.rows, a.cols, a.common.seed);
    let object = match a.object {
        ObjectKind::Gaussians => gen_object_phase_gaussians(rows, cols, derive_seed(seed, 0), &GaussianRanges::default_for(rows, cols))?,
        ObjectKind::Peaks => gen_peaks_phase(rows, cols, a.coeff),
        ObjectKind::PeaksBlobs => {
            let blobs = gen_blob_mask_phase(rows, cols, derive_seed(seed, 0), a.blob_amplitude)?;
            gen_peaks_phase(rows, cols, a.coeff).zip_map(&blobs, |p, b| p + b)?
        }
        ObjectKind::Flat => RealImage::zeros(rows, cols),
    };
    let phase = match a.period {
        Some(t) => object.zip_map(&gen_carrier(rows, cols, CarrierSpec::new(t, a.theta)?), |p, c| p + c)?,
        None => object,
    };
    let fringe = add_gaussian_noise(&render_fringe(&phase), a.noise, derive_seed(seed, 2))?;
    let direction = ground_truth_direction(&phase);
    let fo = direction.to_orientation();

    let (phase_p, fo_p, dir_p) = (sibling(&a.out, "phase"), sibling(&a.out, "fo"), sibling(&a.out, "direction"));
    let params = json!({
        "rows": rows, "cols": cols, "object": format!("{:?}", a.object).to_lowercase(),
        "coeff": a.coeff, "blob_amplitude": a.blob_amplitude, "period": a.period, "theta": a.theta, "noise_std": a.noise,
        "phase_file": file_name(&phase_p), "orientation_file": file_name(&fo_p), "direction_file": file_name(&dir_p),
    });
    write_images(&a.out, vec![fringe], Kind::Fringe, Some(seed), params.clone())?;
    write_images(&phase_p, vec![phase], Kind::Phase, Some(seed), params.clone())?;
    write_orientation(&fo_p, &fo, Sidecar::new(Kind::Orientation, Some(seed), params.clone()))?;
    write_direction(&dir_p, &direction, Sidecar::new(Kind::Direction, Some(seed), params.clone()))?;

    let mut m = RunManifest::new("simulate", seed, params)?;
    for p in [&a.out, &phase_p, &fo_p, &dir_p] {
        m.add_output(p)?;
    }
    finish(&m, &a.out, &m.outputs, a.common.json_report.as_deref())
}

pub fn make_dataset(a: MakeDatasetArgs) -> CmdResult {
    let seed = a.common.seed;
    let mut report = Vec::new();
    for (name, count, idx) in [("train", a.train, 0), ("val", a.val, 1)] {
        let mut m = DatasetManifest::new(derive_seed(seed, idx), count, a.rows, a.cols)?;
        m.noise_std = a.noise;
        m.validate()?;
        write_dataset(&m, &a.out.join(name))?;
        report.push(json!({"split": name, "count": count, "base_seed": m.base_seed}));
    }
    let config = json!({"train": a.train, "val": a.val, "rows": a.rows, "cols": a.cols, "noise_std": a.noise});
    let mut m = RunManifest::new("make-dataset", seed, config)?;
    for split in ["train", "val"] {
        m.add_output(&a.out.join(split).join(fringeproc::dataset::MANIFEST_FILE))?;
    }
    finish(&m, &a.out, &report, a.common.json_report.as_deref())
}

pub fn train(a: TrainArgs) -> CmdResult {
    let seed = a.common.seed;
    let (_, train_set) = stage("load-dataset", load_dataset(&a.dataset.join("train")))?;
    let (_, val_set) = stage("load-dataset", load_dataset(&a.dataset.join("val")))?;
    let net = NetworkConfig {
        paths: a.paths,
        filters: a.filters,
        blocks_per_path: a.blocks,
        kernel_size: 3,
    };
    let cfg = TrainConfig {
        initial_lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        shuffle_seed: derive_seed(seed, 1),
        ..Default::default()
    };
    let (w, history) = stage(
        "train",
        train_net(&train_set, &val_set, net, &cfg, derive_seed(seed, 0), |e| {
            eprintln!(
                "epoch {:>3}  lr {:.1e}  train {:.5}  val {:.5}  val OE {:.4}",
                e.epoch, e.lr, e.train_loss, e.val_loss, e.val_oe
            )
        }),
    )?;
    save_weights(&w, &a.out)?;
    let mut m = RunManifest::new("train", seed, json!({"network": net, "train": cfg}))?;
    for split in ["train", "val"] {
        m.add_input(&a.dataset.join(split).join(fringeproc::dataset::MANIFEST_FILE))?;
    }
    m.add_output(&a.out)?;
    finish(&m, &a.out, &history, a.common.json_report.as_deref())
}

fn maybe_prefilter(img: RealImage, on: bool) -> fringeproc::Result<RealImage> {
    if on {
        prefilter_auto(&img)
    } else {
        Ok(img)
    }
}

pub fn infer(a: InferArgs) -> CmdResult {
    let w = stage("load-model", load_weights(&a.model))?;
    let img = stage("read-input", read_image(&a.input))?;
    let img = stage("prefilter", maybe_prefilter(img, a.prefilter))?;
    let fo = stage("orientation", infer_orientation(&w, &img))?;
    let params = json!({"method": "deeporient", "prefilter": a.prefilter});
    write_orientation(&a.out, &fo, Sidecar::new(Kind::Orientation, None, params.clone()))?;
    let mut m = RunManifest::new("infer", a.common.seed, params)?;
    m.add_input(&a.model)?;
    m.add_input(&a.input)?;
    m.add_output(&a.out)?;
    finish(&m, &a.out, &json!({"valid_fraction": fo.valid_fraction()}), a.common.json_report.as_deref())
}

pub fn orient_classic(a: OrientClassicArgs) -> CmdResult {
    let img = stage("read-input", read_image(&a.input))?;
    let img = stage("prefilter", maybe_prefilter(img, a.prefilter))?;
    let win = Window::new(a.window)?;
    let fo = stage(
        "orientation",
        match a.method {
            ClassicMethod::Gradient => gradient_orientation(&img, win),
            ClassicMethod::Cpfg => cpfg_orientation(&img, win),
        },
    )?;
    let params = json!({"method": format!("{:?}", a.method).to_lowercase(), "window": a.window, "prefilter": a.prefilter});
    write_orientation(&a.out, &fo, Sidecar::new(Kind::Orientation, None, params.clone()))?;
    let mut m = RunManifest::new("orient-classic", a.common.seed, params)?;
    m.add_input(&a.input)?;
    m.add_output(&a.out)?;
    finish(&m, &a.out, &json!({"valid_fraction": fo.valid_fraction()}), a.common.json_report.as_deref())
}

pub fn unwrap_orientation(a: UnwrapArgs) -> CmdResult {
    let fo = stage("read-input", read_orientation(&a.input))?;
    let lift = stage("unwrap-orientation", orientation_to_direction(&fo))?;
    let (ax, ay) = lift.anchor_xy();
    let params = json!({"anchor": [ax, ay], "branch": "anchor direction in [0, pi)"});
    write_direction(&a.out, &lift.direction, Sidecar::new(Kind::Direction, None, params.clone()))?;
    let mut m = RunManifest::new("unwrap-orientation", a.common.seed, json!({}))?;
    m.extra = params.clone();
    m.add_input(&a.input)?;
    m.add_output(&a.out)?;
    finish(&m, &a.out, &params, a.common.json_report.as_deref())
}

pub fn demodulate(a: DemodulateArgs) -> CmdResult {
    let img = stage("read-input", read_image(&a.input))?;
    let img = stage("prefilter", maybe_prefilter(img, a.prefilter))?;
    let beta = stage("read-direction", read_direction(&a.direction))?;
    let d = stage("demodulate", hst::demodulate(&img, &beta))?;
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    let params = json!({"prefilter": a.prefilter, "channels": ["unwrapped", "wrapped"]});
    write_images(&a.out, vec![d.unwrapped.clone(), d.wrapped.phase.clone()], Kind::Phase, None, params.clone())?;
    let mut m = RunManifest::new("demodulate", a.common.seed, params)?;
    m.add_input(&a.input)?;
    m.add_input(&a.direction)?;
    m.add_output(&a.out)?;
    let masked = d.wrapped.masked.iter().filter(|&&v| v).count();
    finish(&m, &a.out, &json!({"masked_pixels": masked, "warnings": d.warnings}), a.common.json_report.as_deref())
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let name = match a.metric {
        Metric::Oe => "oe",
        Metric::RmseSin => "rmse-sin",
        Metric::RmsePhase => "rmse-phase",
    };
    let mut report = EvalReport::new(name, a.exclude_border);
    match a.metric {
        Metric::Oe => {
            let p = stage("read-pred", read_orientation(&a.pred))?;
            let r = stage("read-ref", read_orientation(&a.reference))?;
            let (oe, frac) = stage("evaluate", orientation_error_with_coverage(&p, &r, a.exclude_border))?;
            report.orientation_error = Some(oe);
            report.valid_pixel_fraction = frac;
        }
        Metric::RmseSin => {
            let p = stage("read-pred", read_orientation(&a.pred))?;
            let r = stage("read-ref", read_orientation(&a.reference))?;
            let (s, c) = stage("evaluate", rmse_channels(&encode_orientation(&p), &encode_orientation(&r)))?;
            report.rmse_sin = Some(s);
            report.rmse_cos = Some(c);
        }
        Metric::RmsePhase => {
            let p = stage("read-pred", read_image(&a.pred))?;
            let r = stage("read-ref", read_image(&a.reference))?;
            report.rmse_phase = Some(stage("evaluate", rmse_phase(&p, &r, a.exclude_border))?);
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(fringeproc::Error::from)?);
    } else {
        let value = report.orientation_error.or(report.rmse_sin).or(report.rmse_phase).unwrap_or(f64::NAN);
        println!("{} = {value:.6}", report.method);
    }
    if let Some(p) = &a.common.json_report {
        write_atomic(p, &serde_json::to_vec_pretty(&report).map_err(fringeproc::Error::from)?)?;
    }
    Ok(())
}

pub fn benchmark(a: BenchmarkArgs) -> CmdResult {
    let methods = a.methods.iter().map(|m| Method::parse(m.trim())).collect::<fringeproc::Result<Vec<_>>>()?;
    let cfg = SweepConfig {
        a_values: a.a_values.clone(),
        period: a.period,
        theta: a.theta,
        noise_levels: a.noise.clone(),
        methods,
        window: a.window,
        repetitions: a.reps,
        rows: a.size,
        cols: a.size,
        border: a.border,
        base_seed: a.common.seed,
    };
    cfg.validate()?;
    let model = match (&a.model, cfg.methods.contains(&Method::Deeporient)) {
        (Some(p), true) => Some(stage("load-model", load_weights(p))?),
        (None, true) => return Err(Failure::Usage("the deeporient method needs --model".into())),
        (_, false) => None,
    };
    let cases = cfg.cases();
    let results = cases
        .par_iter()
        .map(|c| run_case(&cfg, c, model.as_ref()))
        .collect::<fringeproc::Result<Vec<_>>>()
        .map_err(|e| e.in_stage("benchmark"))?;

    if let Some(dir) = &a.error_maps {
        std::fs::create_dir_all(dir).map_err(|e| fringeproc::Error::Io { path: dir.clone(), source: e })?;
        for (case, res) in cases.iter().zip(&results) {
            for r in res {
                let name = format!("a{}_n{}_{}_r{}.fpai", case.a, case.noise_std, r.row.method.name(), case.rep);
                let params = json!({"a": case.a, "noise_std": case.noise_std, "method": r.row.method.name(), "seed": case.seed});
                write_images(&dir.join(name), vec![r.error_map.clone()], Kind::ErrorMap, Some(case.seed), params)?;
            }
        }
    }
    let rows: Vec<_> = results.into_iter().flatten().map(|r| r.row).collect();
    write_atomic(&a.out, rows_to_csv(&rows).as_bytes())?;
    let means: Vec<_> = experiment::mean_by_point(&rows)
        .into_iter()
        .map(|(a, n, m, oe)| json!({"a": a, "noise_std": n, "method": m.name(), "mean_oe": oe}))
        .collect();
    for m in &means {
        println!("a={:<4} noise={:<4} {:<10} mean OE {:.5}", m["a"], m["noise_std"], m["method"].as_str().unwrap_or(""), m["mean_oe"].as_f64().unwrap_or(f64::NAN));
    }
    let mut manifest = RunManifest::new("benchmark", a.common.seed, serde_json::to_value(&cfg).map_err(fringeproc::Error::from)?)?;
    if let Some(p) = &a.model {
        manifest.add_input(p)?;
    }
    manifest.add_output(&a.out)?;
    finish(&manifest, &a.out, &means, a.common.json_report.as_deref())
}

pub fn pipeline(a: PipelineArgs) -> CmdResult {
    let w = stage("load-model", load_weights(&a.model))?;
    let fringe = stage("read-input", read_image(&a.input))?;
    let out = run_pipeline(&fringe, &w)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| fringeproc::Error::Io { path: a.out_dir.clone(), source: e })?;

    let (ax, ay) = out.lift.anchor_xy();
    let branch = json!({"anchor": [ax, ay], "rule": "anchor direction in [0, pi)"});
    let fo_p = a.out_dir.join("orientation.fpai");
    let dir_p = a.out_dir.join("direction.fpai");
    let ph_p = a.out_dir.join("phase.fpai");
    write_orientation(&fo_p, &out.orientation, Sidecar::new(Kind::Orientation, None, json!({"method": "deeporient"})))?;
    write_direction(&dir_p, &out.lift.direction, Sidecar::new(Kind::Direction, None, branch.clone()))?;
    write_images(
        &ph_p,
        vec![out.demodulation.unwrapped.clone(), out.demodulation.wrapped.phase.clone()],
        Kind::Phase,
        None,
        json!({"channels": ["unwrapped", "wrapped"]}),
    )?;

    // Ground truth is available when the input came from `simulate`.
    let truth = stage("read-input", read_sidecar(&a.input))?
        .and_then(|s| s.params.get("phase_file").and_then(|v| v.as_str()).map(String::from))
        .map(|f| a.input.with_file_name(f));
    let mut report = json!({"branch": branch, "warnings": out.demodulation.warnings});
    if let Some(tp) = truth {
        let truth_phase = stage("read-truth", read_image(&tp))?;
        let (eval, negated) = stage("evaluate", evaluate_pipeline(&out, &truth_phase, a.border))?;
        report["evaluation"] = serde_json::to_value(&eval).map_err(fringeproc::Error::from)?;
        report["phase_negated_to_match_truth"] = json!(negated);
    }
    let report_p = a.out_dir.join("report.json");
    write_atomic(&report_p, &serde_json::to_vec_pretty(&report).map_err(fringeproc::Error::from)?)?;

    let mut m = RunManifest::new("pipeline", a.common.seed, json!({"border": a.border}))?;
    m.extra = branch;
    m.add_input(&a.model)?;
    m.add_input(&a.input)?;
    for p in [&fo_p, &dir_p, &ph_p, &report_p] {
        m.add_output(p)?;
    }
    finish(&m, &a.out_dir, &report, a.common.json_report.as_deref())
}
