//! Seeded simulated corpora: object phase from Gaussian sums plus a random
//! linear carrier, rendered to `cos` fringes with optional Gaussian noise.
//!
//! A directory holds `manifest.json` and, per item, three FPAI files:
//! `item_<idx>_fringe.fpai` (1 channel), `item_<idx>_encoding.fpai`
//! (`sin 2FO`, `cos 2FO`) and `item_<idx>_fo.fpai` (FO, validity as 1/0).

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::container::{read_container, write_atomic, write_container, ImageStack};
use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::net::TrainSample;
use crate::orientation::{encode_orientation, OrientationEncoding, OrientationMap};
use crate::sim::{
    add_gaussian_noise, derive_seed, gen_carrier, gen_object_phase_gaussians, ground_truth_orientation, render_fringe, rng_from_seed,
    CarrierSpec, GaussianRanges,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One corpus entry. `seed` is `derive_seed(base_seed, index)`; the carrier
/// drawn from it is recorded for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub index: usize,
    pub seed: u64,
    pub period: f64,
    pub theta: f64,
    pub fringe: String,
    pub encoding: String,
    pub fo: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub base_seed: u64,
    pub count: usize,
    pub image_size: (usize, usize),
    pub kernel_count_range: (usize, usize),
    pub sigma_range: (f64, f64),
    pub amplitude_range: (f64, f64),
    pub period_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub noise_std: f64,
    pub items: Vec<DatasetItem>,
}

/// Everything simulated for one item.
#[derive(Debug, Clone)]
pub struct GeneratedItem {
    pub phase: RealImage,
    pub fringe: RealImage,
    pub fo: OrientationMap,
    pub encoding: OrientationEncoding,
}

impl DatasetManifest {
    /// Default ranges for `rows x cols` images; items are planned immediately.
    pub fn new(base_seed: u64, count: usize, rows: usize, cols: usize) -> Result<Self> {
        let g = GaussianRanges::default_for(rows, cols);
        let mut m = Self {
            base_seed,
            count,
            image_size: (rows, cols),
            kernel_count_range: g.count,
            sigma_range: g.sigma,
            amplitude_range: g.amplitude,
            period_range: (8.0, 32.0),
            theta_range: (0.0, std::f64::consts::PI),
            noise_std: 0.0,
            items: Vec::new(),
        };
        m.plan()?;
        Ok(m)
    }

    /// Desk-scale training corpus: 200 images of 64x64.
    pub fn desk_train(base_seed: u64) -> Result<Self> {
        Self::new(base_seed, 200, 64, 64)
    }

    /// Desk-scale validation corpus: 50 images of 64x64.
    pub fn desk_val(base_seed: u64) -> Result<Self> {
        Self::new(base_seed, 50, 64, 64)
    }

    pub fn ranges(&self) -> GaussianRanges {
        GaussianRanges {
            count: self.kernel_count_range,
            sigma: self.sigma_range,
            amplitude: self.amplitude_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.image_size;
        if rows < crate::image::MIN_SIDE || cols < crate::image::MIN_SIDE {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: format!("dataset images need at least {} px per side", crate::image::MIN_SIDE),
            });
        }
        if self.count == 0 {
            return Err(Error::EmptyDataset);
        }
        self.ranges().validate()?;
        let (t0, t1) = self.period_range;
        if !(t0 > 2.0 && t0 <= t1) {
            return Err(Error::param("period_range", "need 2 < min <= max"));
        }
        let (a0, a1) = self.theta_range;
        if !(0.0 <= a0 && a0 <= a1 && a1 <= std::f64::consts::PI) {
            return Err(Error::param("theta_range", "need 0 <= min <= max <= pi"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std", "must be non-negative"));
        }
        Ok(())
    }

    /// Recomputes the item list from the ranges and seeds.
    pub fn plan(&mut self) -> Result<()> {
        self.validate()?;
        self.items = (0..self.count)
            .map(|index| {
                let seed = derive_seed(self.base_seed, index as u64);
                let c = self.carrier_for(seed);
                DatasetItem {
                    index,
                    seed,
                    period: c.period,
                    theta: c.theta,
                    fringe: format!("item_{index}_fringe.fpai"),
                    encoding: format!("item_{index}_encoding.fpai"),
                    fo: format!("item_{index}_fo.fpai"),
                }
            })
            .collect();
        Ok(())
    }

    fn carrier_for(&self, item_seed: u64) -> CarrierSpec {
        let mut rng = rng_from_seed(derive_seed(item_seed, 1));
        let draw = |rng: &mut crate::sim::SimRng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let period = draw(&mut rng, self.period_range);
        // theta_range may be closed at pi; fold that endpoint back to 0.
        let theta = draw(&mut rng, self.theta_range) % std::f64::consts::PI;
        CarrierSpec { period, theta }
    }

    /// Simulates item `index` from the manifest alone.
    pub fn generate_item(&self, index: usize) -> Result<GeneratedItem> {
        let item = self.items.get(index).ok_or_else(|| Error::param("index", format!("{index} is outside the manifest")))?;
        let (rows, cols) = self.image_size;
        let object = gen_object_phase_gaussians(rows, cols, derive_seed(item.seed, 0), &self.ranges())?;
        let carrier = gen_carrier(rows, cols, self.carrier_for(item.seed));
        let phase = object.zip_map(&carrier, |a, b| a + b)?;
        let fringe = add_gaussian_noise(&render_fringe(&phase), self.noise_std, derive_seed(item.seed, 2))?;
        let fo = ground_truth_orientation(&phase);
        let encoding = encode_orientation(&fo);
        Ok(GeneratedItem { phase, fringe, fo, encoding })
    }
}

/// Writes every item and the manifest into `dir`.
pub fn make_dataset(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    manifest.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for item in &manifest.items {
        let g = manifest.generate_item(item.index)?;
        write_container(dir.join(&item.fringe), &ImageStack::single(g.fringe))?;
        write_container(dir.join(&item.encoding), &ImageStack::new(vec![g.encoding.sin2, g.encoding.cos2])?)?;
        let mask = RealImage::new(
            manifest.image_size.0,
            manifest.image_size.1,
            g.fo.valid().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )?;
        write_container(dir.join(&item.fo), &ImageStack::new(vec![g.fo.angles().clone(), mask])?)?;
    }
    let json = serde_json::to_vec_pretty(manifest)?;
    write_atomic(&dir.join(MANIFEST_FILE), &json)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let m: DatasetManifest = serde_json::from_slice(&bytes)?;
    m.validate()?;
    Ok(m)
}

/// Reads a dataset directory back as training samples.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<TrainSample>)> {
    let m = read_manifest(dir)?;
    let mut samples = Vec::with_capacity(m.items.len());
    for item in &m.items {
        let input = read_container(dir.join(&item.fringe))?.into_single()?;
        let mut enc = read_container(dir.join(&item.encoding))?.into_channels();
        let mut fo = read_container(dir.join(&item.fo))?.into_channels();
        if enc.len() != 2 || fo.len() != 2 {
            return Err(Error::MalformedHeader(format!("item {} needs 2-channel encoding and fo files", item.index)));
        }
        let cos2 = enc.pop().expect("two channels");
        let sin2 = enc.pop().expect("two channels");
        let mask = fo.pop().expect("two channels");
        let angles = fo.pop().expect("two channels");
        let valid = mask.as_slice().iter().map(|&v| v > 0.5).collect();
        samples.push(TrainSample {
            input,
            target: OrientationEncoding::new(sin2, cos2)?,
            reference: OrientationMap::new(angles, valid)?,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((m, samples))
}

/// Simulates samples in memory without touching the filesystem.
pub fn samples_in_memory(m: &DatasetManifest) -> Result<Vec<TrainSample>> {
    (0..m.items.len())
        .map(|i| {
            let g = m.generate_item(i)?;
            Ok(TrainSample {
                input: g.fringe,
                target: g.encoding,
                reference: g.fo,
            })
        })
        .collect()
}
