//! Tuned SVMs with the quantum kernel and with an RBF kernel on a small
//! labeled mesh.
//!
//! cargo run --release --example qsvm_vs_rbf

use mbar_kernel::dynamics::PropagatorConfig;
use mbar_kernel::kernel::{EncodingConfig, QuantumKernel};
use mbar_kernel::ml::{default_references, label_mesh, make_mesh, sample_training, tune, GridSpec, KernelSource};
use mbar_kernel::model::DeviceParams;

fn main() -> mbar_kernel::Result<()> {
    let res = 15;
    let device = DeviceParams::classifier(400.0, 2, 6)?;
    let kernel = QuantumKernel::new(&device, &EncodingConfig::classifier(), &PropagatorConfig::default())?;
    let ds = label_mesh(&kernel, &make_mesh(res)?, default_references(), res, 0)?;
    let points = ds.all_points();
    let gram = kernel.gram(&points, &points)?;
    let eval: Vec<usize> = (0..points.len()).collect();
    let quantum_grid = GridSpec::default().with_extended_c();
    let rbf_grid = GridSpec {
        c: GridSpec::default().c,
        gamma: mbar_kernel::ml::tune::linspace(1.0, 1000.0, 10),
        extended_c: None,
    };
    for seed in 0..3 {
        let train = sample_training(&ds, 32, seed)?;
        let q = tune(KernelSource::Precomputed(&gram), &ds, &train, &quantum_grid, &eval)?.best;
        let r = tune(KernelSource::Rbf, &ds, &train, &rbf_grid, &eval)?.best;
        println!(
            "seed {seed}: quantum {:.4} (C = {:.3e}), RBF {:.4} (C = {:.3e}, gamma = {:.1})",
            q.accuracy,
            q.c,
            r.accuracy,
            r.c,
            r.gamma.unwrap_or(0.0)
        );
    }
    Ok(())
}
