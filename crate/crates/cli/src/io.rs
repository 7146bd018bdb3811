//! File helpers and the failure type that maps onto exit codes.

use std::fmt;
use std::path::{Path, PathBuf};

use fringeproc::container::{read_container, write_container, write_sidecar, ImageStack, Kind, Sidecar};
use fringeproc::experiment::RunManifest;
use fringeproc::{DirectionMap, Error, OrientationMap, RealImage};
use serde::Serialize;

pub enum Failure {
    Usage(String),
    Core(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) if e.is_io_or_format() => 3,
            Failure::Core(e) if matches!(e.root(), Error::InvalidParameter { .. }) => 2,
            Failure::Core(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            // Every variant already renders its source.
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn stage<T>(name: &'static str, r: fringeproc::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Core(e.in_stage(name)))
}

pub fn read_image(path: &Path) -> fringeproc::Result<RealImage> {
    let mut ch = read_container(path)?.into_channels();
    Ok(ch.swap_remove(0))
}

fn mask_channel(valid: &[bool], rows: usize, cols: usize) -> RealImage {
    RealImage::new(rows, cols, valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect()).expect("finite mask")
}

fn angles_and_mask(path: &Path) -> fringeproc::Result<(RealImage, Vec<bool>)> {
    let ch = read_container(path)?.into_channels();
    let valid = match ch.get(1) {
        Some(m) => m.as_slice().iter().map(|&v| v > 0.5).collect(),
        None => vec![true; ch[0].len()],
    };
    let angles = ch.into_iter().next().expect("containers hold at least one channel");
    Ok((angles, valid))
}

pub fn read_orientation(path: &Path) -> fringeproc::Result<OrientationMap> {
    let (a, v) = angles_and_mask(path)?;
    OrientationMap::new(a, v)
}

pub fn read_direction(path: &Path) -> fringeproc::Result<DirectionMap> {
    let (a, v) = angles_and_mask(path)?;
    DirectionMap::new(a, v)
}

pub fn write_orientation(path: &Path, fo: &OrientationMap, sidecar: Sidecar) -> fringeproc::Result<()> {
    let (rows, cols) = fo.dims();
    write_container(path, &ImageStack::new(vec![fo.angles().clone(), mask_channel(fo.valid(), rows, cols)])?)?;
    write_sidecar(path, &sidecar)
}

pub fn write_direction(path: &Path, d: &DirectionMap, sidecar: Sidecar) -> fringeproc::Result<()> {
    let (rows, cols) = d.dims();
    write_container(path, &ImageStack::new(vec![d.angles().clone(), mask_channel(d.valid(), rows, cols)])?)?;
    write_sidecar(path, &sidecar)
}

pub fn write_images(path: &Path, channels: Vec<RealImage>, kind: Kind, seed: Option<u64>, params: serde_json::Value) -> fringeproc::Result<()> {
    write_container(path, &ImageStack::new(channels)?)?;
    write_sidecar(path, &Sidecar::new(kind, seed, params))
}

/// `<out>.manifest.json` next to a file output, or `DIR/run_manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("run_manifest.json")
    } else {
        out.with_extension("manifest.json")
    }
}

pub fn finish(manifest: &RunManifest, primary_out: &Path, report: &impl Serialize, report_path: Option<&Path>) -> CmdResult {
    manifest.write(&manifest_path(primary_out))?;
    if let Some(p) = report_path {
        let bytes = serde_json::to_vec_pretty(report).map_err(Error::from)?;
        fringeproc::container::write_atomic(p, &bytes)?;
    }
    Ok(())
}

/// Sibling of `base` with `suffix` replacing its extension, e.g. `x_phase.fpai`.
pub fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}_{suffix}.fpai"))
}
