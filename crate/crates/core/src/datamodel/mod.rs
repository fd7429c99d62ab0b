//! Activation tensors, the NACT file format and run manifests.

mod manifest;
mod nact;
mod tensor;

pub use manifest::{LayerEntry, LayerKind, LayerObservables, Run, RunManifest, Which, EPOCH_PLACEHOLDER};
pub use nact::{read_nact, write_nact, NACT_MAGIC, NACT_VERSION};
pub use tensor::{ActivationTensor, DType};
