use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::nact::{read_nact, NACT_MAGIC, NACT_VERSION};
use super::tensor::{ActivationTensor, DType};
use crate::error::{Error, Result};

/// Substituted with the decimal epoch index when a layer path is resolved.
pub const EPOCH_PLACEHOLDER: &str = "{epoch}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Highway,
    ConvIngested,
    EventMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub kind: LayerKind,
    pub neuron_count: usize,
    pub pre_act_path: String,
    pub post_act_path: String,
}

/// On-disk run description. Paths are relative to the manifest's directory and
/// may contain `{epoch}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub architecture: String,
    pub dataset_id: String,
    pub seed: u64,
    pub epochs_captured: Vec<u32>,
    pub layers: Vec<LayerEntry>,
    /// Free-form provenance (initializer, training config) written by the trainer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// One row of a trajectory table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerObservables {
    pub epoch: u32,
    pub layer: String,
    pub depth_index: usize,
    pub neuron_count: usize,
    pub complexity_bits: f64,
    pub complexity_per_neuron: f64,
    pub effective_dimension: f64,
    pub linearity: f64,
    pub total_correlation_norm: f64,
    pub estimator: String,
    pub sample_rows: usize,
}

/// A manifest whose invariants have been checked against the files on disk.
/// Tensors are only read on request.
#[derive(Debug, Clone)]
pub struct Run {
    manifest: RunManifest,
    base_dir: PathBuf,
}

fn read_header(path: &Path) -> Result<(DType, Vec<usize>)> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut head = [0u8; 8];
    f.read_exact(&mut head)
        .map_err(|_| Error::Format(format!("{}: header shorter than 8 bytes", path.display())))?;
    if head[0..4] != NACT_MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    if head[4] != NACT_VERSION {
        return Err(Error::UnsupportedVersion(head[4]));
    }
    let dtype = DType::from_code(head[5])
        .ok_or_else(|| Error::Format(format!("{}: unknown dtype {}", path.display(), head[5])))?;
    let ndim = head[6] as usize;
    if !(1..=4).contains(&ndim) {
        return Err(Error::Format(format!("{}: ndim {ndim}", path.display())));
    }
    let mut raw = vec![0u8; 8 * ndim];
    f.read_exact(&mut raw).map_err(|_| Error::Truncated {
        expected: 8 + 8 * ndim as u64,
        found: file_len,
    })?;
    let dims: Vec<usize> = raw
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let expected =
        8 + 8 * ndim as u64 + dims.iter().map(|&d| d as u64).product::<u64>() * dtype.element_size() as u64;
    if file_len < expected {
        return Err(Error::Truncated {
            expected,
            found: file_len,
        });
    }
    Ok((dtype, dims))
}

fn channel_axis_len(dims: &[usize]) -> usize {
    if dims.len() == 4 {
        dims[1]
    } else {
        *dims.last().unwrap()
    }
}

impl RunManifest {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Manifest {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Structural checks that need no file access.
    pub fn validate_structure(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for l in &self.layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::Validation(format!("duplicate layer name '{}'", l.name)));
            }
            if l.neuron_count == 0 {
                return Err(Error::Validation(format!("layer '{}' has neuron_count 0", l.name)));
            }
            if self.epochs_captured.is_empty()
                && (l.pre_act_path.contains(EPOCH_PLACEHOLDER)
                    || l.post_act_path.contains(EPOCH_PLACEHOLDER))
            {
                return Err(Error::Validation(format!(
                    "layer '{}' uses {EPOCH_PLACEHOLDER} but no epochs are captured",
                    l.name
                )));
            }
        }
        if self.epochs_captured.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "epochs_captured must be strictly increasing: {:?}",
                self.epochs_captured
            )));
        }
        Ok(())
    }
}

/// Which dump of a layer to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Pre,
    Post,
}

impl Run {
    /// Parse and eagerly validate a manifest: structure, file presence, headers,
    /// and that every dump's channel axis matches `neuron_count`.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest = RunManifest::from_json(&text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_manifest(manifest, base_dir)
    }

    pub fn from_manifest(manifest: RunManifest, base_dir: PathBuf) -> Result<Self> {
        manifest.validate_structure()?;
        let run = Self { manifest, base_dir };
        let epochs: Vec<Option<u32>> = if run.manifest.epochs_captured.is_empty() {
            vec![None]
        } else {
            run.manifest.epochs_captured.iter().copied().map(Some).collect()
        };
        for layer in &run.manifest.layers {
            for &epoch in &epochs {
                for which in [Which::Pre, Which::Post] {
                    let p = run.resolve(layer, epoch, which);
                    let (_, dims) = read_header(&p).map_err(|e| match e {
                        Error::Io { .. } => Error::Validation(format!(
                            "layer '{}': missing dump {}",
                            layer.name,
                            p.display()
                        )),
                        other => other,
                    })?;
                    let c = channel_axis_len(&dims);
                    if c != layer.neuron_count {
                        return Err(Error::Validation(format!(
                            "layer '{}': {} has {c} channels but neuron_count is {}",
                            layer.name,
                            p.display(),
                            layer.neuron_count
                        )));
                    }
                }
            }
        }
        Ok(run)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn layers(&self) -> &[LayerEntry] {
        &self.manifest.layers
    }

    fn resolve(&self, layer: &LayerEntry, epoch: Option<u32>, which: Which) -> PathBuf {
        let raw = match which {
            Which::Pre => &layer.pre_act_path,
            Which::Post => &layer.post_act_path,
        };
        let rel = match epoch {
            Some(e) => raw.replace(EPOCH_PLACEHOLDER, &e.to_string()),
            None => raw.clone(),
        };
        self.base_dir.join(rel)
    }

    /// Path of a dump; `epoch` is ignored for runs without captured epochs.
    pub fn dump_path(&self, layer: &LayerEntry, epoch: u32, which: Which) -> PathBuf {
        let e = if self.manifest.epochs_captured.is_empty() {
            None
        } else {
            Some(epoch)
        };
        self.resolve(layer, e, which)
    }

    /// True when the layer's pre- and post-activation dumps are distinct files.
    pub fn has_distinct_pre(&self, layer: &LayerEntry) -> bool {
        layer.pre_act_path != layer.post_act_path
    }

    pub fn load_tensor(&self, layer: &LayerEntry, epoch: u32, which: Which) -> Result<ActivationTensor> {
        if !self.manifest.epochs_captured.is_empty() && !self.manifest.epochs_captured.contains(&epoch) {
            return Err(Error::Validation(format!(
                "epoch {epoch} not captured in run '{}'",
                self.manifest.run_id
            )));
        }
        read_nact(self.dump_path(layer, epoch, which))
    }
}
