//! Mesh datasets, kernel SVMs and hyperparameter search.

pub mod dataset;
pub mod svm;
pub mod tune;

pub use dataset::{
    default_references, generate_labels, label_mesh, make_mesh, sample_training, Label, LabeledDataset, Reference,
};
pub use svm::{svm_predict, svm_train, SvmModel};
pub use tune::{fit, rbf_kernel, tune, GridPoint, GridSpec, KernelSource, TuneResult};
