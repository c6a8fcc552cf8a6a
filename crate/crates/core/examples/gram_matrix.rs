//! Quantum Gram matrix with a shared per-sample cache, and the zero-Kerr
//! limit where entries depend only on the distance between samples.
//!
//! cargo run --release --example gram_matrix

use std::sync::Arc;

use mbar_kernel::dynamics::PropagatorConfig;
use mbar_kernel::kernel::{gram_matrix, EncodingConfig, RhoCache, Sample};
use mbar_kernel::model::DeviceParams;

fn main() -> mbar_kernel::Result<()> {
    let samples: Vec<Sample> = [[0.0, 0.0], [0.1, 0.0], [0.5, 0.5], [1.0, 1.0]]
        .iter()
        .enumerate()
        .map(|(i, x)| Sample::new(format!("s{i}"), x.to_vec()))
        .collect::<mbar_kernel::Result<_>>()?;
    let enc = EncodingConfig::classifier();
    let cfg = PropagatorConfig::default();
    for kerr in [0.0, 400.0] {
        let device = DeviceParams::classifier(kerr, 2, 6)?;
        let cache = Arc::new(RhoCache::new());
        let gram = gram_matrix(&samples, &samples, &enc, &device, &cfg, cache.clone())?;
        println!("K/2pi = {kerr} MHz ({} samples simulated)", cache.len());
        for i in 0..gram.nrows() {
            let row: Vec<String> = gram.row(i).iter().map(|v| format!("{v:.6}")).collect();
            println!("  {}", row.join("  "));
        }
    }
    Ok(())
}
