//! Synthetic datasets and fixed image transforms: tearing into rotated,
//! shuffled patches, colorized embedding of 28×28 digits into 32×32, and
//! i.i.d. random labels.
//!
//! All generators are deterministic in their seed. Per-image randomness is
//! drawn from a stream indexed by the image number, so results do not depend
//! on processing order.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{read_nact, write_nact, ActivationTensor};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// N×D vectors or N×Ch×H×W images, real32.
    pub inputs: ActivationTensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: ActivationTensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.as_f32().is_none() {
            return Err(Error::Validation("dataset inputs must be real32".into()));
        }
        if labels.len() != inputs.dims()[0] {
            return Err(Error::Validation(format!(
                "{} labels for {} samples",
                labels.len(),
                inputs.dims()[0]
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Validation(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample feature count (product of the non-batch dims).
    pub fn feature_dim(&self) -> usize {
        self.inputs.dims()[1..].iter().product()
    }

    fn values(&self) -> &[f32] {
        self.inputs.as_f32().unwrap()
    }
}

/// Generator metadata stored next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub generator: String,
    pub seed: u64,
    pub classes: usize,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub params: serde_json::Value,
}

pub const INPUTS_FILE: &str = "inputs.nact";
pub const LABELS_FILE: &str = "labels.json";
pub const DESCRIPTOR_FILE: &str = "descriptor.json";

pub fn save_dataset(ds: &LabeledDataset, descriptor: &DatasetDescriptor, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_nact(&ds.inputs, dir.join(INPUTS_FILE))?;
    let labels = serde_json::to_string(&ds.labels).unwrap();
    std::fs::write(dir.join(LABELS_FILE), labels).map_err(|e| Error::io(dir.join(LABELS_FILE), e))?;
    let desc = serde_json::to_string_pretty(descriptor).unwrap();
    std::fs::write(dir.join(DESCRIPTOR_FILE), desc).map_err(|e| Error::io(dir.join(DESCRIPTOR_FILE), e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(LabeledDataset, DatasetDescriptor)> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
    };
    let descriptor: DatasetDescriptor = serde_json::from_str(&read(DESCRIPTOR_FILE)?)
        .map_err(|e| Error::Validation(format!("{DESCRIPTOR_FILE}: {e}")))?;
    let labels: Vec<usize> = serde_json::from_str(&read(LABELS_FILE)?)
        .map_err(|e| Error::Validation(format!("{LABELS_FILE}: {e}")))?;
    let inputs = read_nact(dir.join(INPUTS_FILE))?;
    let ds = LabeledDataset::new(inputs, labels, descriptor.classes)?;
    Ok((ds, descriptor))
}

/// A fixed tearing of every image: output cell `i` (row-major over the grid)
/// receives input cell `permutation[i]` rotated counterclockwise by
/// `rotations[i]` quarter turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TearPlan {
    pub grid: (usize, usize),
    pub patch: usize,
    pub permutation: Vec<usize>,
    pub rotations: Vec<u8>,
}

impl TearPlan {
    pub fn identity(grid: (usize, usize), patch: usize) -> Self {
        let cells = grid.0 * grid.1;
        Self {
            grid,
            patch,
            permutation: (0..cells).collect(),
            rotations: vec![0; cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cells();
        if self.permutation.len() != n || self.rotations.len() != n {
            return Err(Error::Validation(format!(
                "tear plan lengths {} / {} do not match {n} grid cells",
                self.permutation.len(),
                self.rotations.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &self.permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Validation("tear permutation is not a bijection".into()));
            }
        }
        if self.rotations.iter().any(|&r| r > 3) {
            return Err(Error::Validation("rotations must be in 0..=3".into()));
        }
        Ok(())
    }

    /// The plan that undoes this one.
    pub fn inverse(&self) -> Self {
        let mut permutation = vec![0; self.cells()];
        let mut rotations = vec![0; self.cells()];
        for (i, (&src, &rot)) in self.permutation.iter().zip(&self.rotations).enumerate() {
            permutation[src] = i;
            rotations[src] = (4 - rot) % 4;
        }
        Self {
            grid: self.grid,
            patch: self.patch,
            permutation,
            rotations,
        }
    }
}

/// Seeded uniform cell permutation and independent uniform quarter-turn rotations.
pub fn make_tear_plan(image_h: usize, image_w: usize, patch: usize, seed: u64) -> Result<TearPlan> {
    if patch == 0 {
        return Err(Error::Validation("patch size must be positive".into()));
    }
    if !image_h.is_multiple_of(patch) {
        return Err(Error::Validation(format!(
            "patch {patch} does not divide image height {image_h}"
        )));
    }
    if !image_w.is_multiple_of(patch) {
        return Err(Error::Validation(format!(
            "patch {patch} does not divide image width {image_w}"
        )));
    }
    let grid = (image_h / patch, image_w / patch);
    let cells = grid.0 * grid.1;
    let mut g = rng::stream(seed, Stream::TearPlan, 0);
    let permutation = rng::permutation(&mut g, cells);
    let rotations = (0..cells).map(|_| g.random_range(0..4u8)).collect();
    Ok(TearPlan {
        grid,
        patch,
        permutation,
        rotations,
    })
}

/// Source offset inside a k×k patch for output offset (r, c) after `quarter_turns`
/// counterclockwise rotations.
fn rotated_source(r: usize, c: usize, k: usize, quarter_turns: u8) -> (usize, usize) {
    match quarter_turns % 4 {
        0 => (r, c),
        1 => (c, k - 1 - r),
        2 => (k - 1 - r, k - 1 - c),
        _ => (k - 1 - c, r),
    }
}

/// Apply one plan to every image; labels are unchanged.
pub fn tear(ds: &LabeledDataset, plan: &TearPlan) -> Result<LabeledDataset> {
    plan.validate()?;
    let dims = ds.inputs.dims();
    if dims.len() != 4 {
        return Err(Error::Shape(format!("tear needs N×Ch×H×W images, got {dims:?}")));
    }
    let (n, ch, h, w) = (dims[0], dims[1], dims[2], dims[3]);
    let k = plan.patch;
    if plan.grid.0 * k != h || plan.grid.1 * k != w {
        return Err(Error::Shape(format!(
            "plan covers {}×{} pixels, images are {h}×{w}",
            plan.grid.0 * k,
            plan.grid.1 * k
        )));
    }
    let src = ds.values();
    let mut out = vec![0f32; src.len()];
    for img in 0..n * ch {
        let base = img * h * w;
        for (cell, (&from, &rot)) in plan.permutation.iter().zip(&plan.rotations).enumerate() {
            let (oy, ox) = ((cell / plan.grid.1) * k, (cell % plan.grid.1) * k);
            let (iy, ix) = ((from / plan.grid.1) * k, (from % plan.grid.1) * k);
            for r in 0..k {
                for c in 0..k {
                    let (sr, sc) = rotated_source(r, c, k, rot);
                    out[base + (oy + r) * w + ox + c] = src[base + (iy + sr) * w + ix + sc];
                }
            }
        }
    }
    LabeledDataset::new(
        ActivationTensor::from_f32(dims.to_vec(), out)?,
        ds.labels.clone(),
        ds.classes,
    )
}

/// Per-image random placement of a 28×28 gray digit in a 3×32×32 canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedDraw {
    pub offset: (usize, usize),
    pub channel_factors: [f32; 3],
}

/// Offset uniform in {0..4}², channel factors uniform in [0.5, 1.0].
pub fn embed_draw(seed: u64, image: usize) -> EmbedDraw {
    let mut g = rng::stream(seed, Stream::Colorize, image as u64);
    let offset = (g.random_range(0..=4usize), g.random_range(0..=4usize));
    let channel_factors = [
        g.random_range(0.5f32..=1.0),
        g.random_range(0.5f32..=1.0),
        g.random_range(0.5f32..=1.0),
    ];
    EmbedDraw {
        offset,
        channel_factors,
    }
}

/// N×28×28 (or N×1×28×28) gray images in [0,1] → N×3×32×32 colorized,
/// randomly placed copies; background 0, values clipped to [0,1].
pub fn colorize_embed(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let dims = ds.inputs.dims();
    let ok = matches!(dims, [_, 28, 28] | [_, 1, 28, 28]);
    if !ok {
        return Err(Error::Shape(format!(
            "colorize_embed needs N×28×28 gray images, got {dims:?}"
        )));
    }
    let n = dims[0];
    let src = ds.values();
    let mut out = vec![0f32; n * 3 * 32 * 32];
    for i in 0..n {
        let d = embed_draw(seed, i);
        let img = &src[i * 784..(i + 1) * 784];
        for (ch, &f) in d.channel_factors.iter().enumerate() {
            let base = (i * 3 + ch) * 1024;
            for r in 0..28 {
                for c in 0..28 {
                    let v = (img[r * 28 + c] * f).clamp(0.0, 1.0);
                    out[base + (d.offset.0 + r) * 32 + d.offset.1 + c] = v;
                }
            }
        }
    }
    LabeledDataset::new(
        ActivationTensor::from_f32(vec![n, 3, 32, 32], out)?,
        ds.labels.clone(),
        ds.classes,
    )
}

/// Labels drawn i.i.d. uniform over `0..classes`; inputs untouched.
pub fn randomize_labels(ds: &LabeledDataset, classes: usize, seed: u64) -> Result<LabeledDataset> {
    if classes == 0 {
        return Err(Error::Validation("classes must be positive".into()));
    }
    let mut g = rng::stream(seed, Stream::Labels, 0);
    let labels = (0..ds.len()).map(|_| g.random_range(0..classes)).collect();
    LabeledDataset::new(ds.inputs.clone(), labels, classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    /// Per-sample shape: `[D]` or `[Ch, H, W]`.
    pub shape: Vec<usize>,
    /// Minimum pairwise distance between class prototypes.
    pub spread: f64,
    /// Standard deviation of the isotropic Gaussian noise around prototypes.
    pub noise: f64,
    pub samples: usize,
    pub seed: u64,
}

const PROTOTYPE_ATTEMPTS: usize = 10_000;

/// Prototypes drawn uniformly on the sphere of radius `spread`, rejected until
/// all pairwise distances are ≥ `spread`.
pub fn blob_prototypes(blob: &BlobSpec) -> Result<Vec<Vec<f64>>> {
    let d: usize = blob.shape.iter().product();
    let mut g = rng::stream(blob.seed, Stream::Blobs, 0);
    let mut protos: Vec<Vec<f64>> = Vec::with_capacity(blob.classes);
    for k in 0..blob.classes {
        let mut placed = false;
        for _ in 0..PROTOTYPE_ATTEMPTS {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut g)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x *= blob.spread / norm);
            let far = protos.iter().all(|p| {
                p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= blob.spread
            });
            if far {
                protos.push(v);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Validation(format!(
                "cannot place {} prototypes at pairwise distance {} in {d} dimensions (failed at class {k})",
                blob.classes, blob.spread
            )));
        }
    }
    Ok(protos)
}

/// Gaussian blobs around seeded prototypes; sample `i` has class `i mod K`.
pub fn synth_blobs(blob: &BlobSpec) -> Result<LabeledDataset> {
    if blob.classes < 2 {
        return Err(Error::Validation("synth_blobs needs at least 2 classes".into()));
    }
    if blob.samples < blob.classes {
        return Err(Error::Validation(format!(
            "{} samples cannot cover {} classes",
            blob.samples, blob.classes
        )));
    }
    if blob.shape.is_empty() || blob.shape.len() > 3 || blob.shape.contains(&0) {
        return Err(Error::Shape(format!("bad sample shape {:?}", blob.shape)));
    }
    let protos = blob_prototypes(blob)?;
    let d: usize = blob.shape.iter().product();
    let mut g = rng::stream(blob.seed, Stream::Blobs, 1);
    let mut data = Vec::with_capacity(blob.samples * d);
    let mut labels = Vec::with_capacity(blob.samples);
    for i in 0..blob.samples {
        let k = i % blob.classes;
        labels.push(k);
        for &p in &protos[k] {
            let z: f64 = StandardNormal.sample(&mut g);
            data.push((p + blob.noise * z) as f32);
        }
    }
    let mut dims = vec![blob.samples];
    dims.extend(&blob.shape);
    LabeledDataset::new(ActivationTensor::from_f32(dims, data)?, labels, blob.classes)
}
