//! Labels a mesh by kernel similarity to two reference points and prints
//! the class map.
//!
//! cargo run --release --example dataset

use mbar_kernel::dynamics::PropagatorConfig;
use mbar_kernel::kernel::{EncodingConfig, QuantumKernel};
use mbar_kernel::ml::{default_references, label_mesh, make_mesh};
use mbar_kernel::model::DeviceParams;

fn main() -> mbar_kernel::Result<()> {
    let res = 15;
    let device = DeviceParams::classifier(400.0, 2, 6)?;
    let kernel = QuantumKernel::new(&device, &EncodingConfig::classifier(), &PropagatorConfig::default())?;
    let ds = label_mesh(&kernel, &make_mesh(res)?, default_references(), res, 0)?;
    println!("{res}x{res} mesh, class counts {:?} ('#' = label 1, x1 down, x2 across)", ds.class_counts());
    for i in 0..res {
        let row: String = (0..res).map(|j| if ds.labels[i * res + j] == 1 { '#' } else { '.' }).collect();
        println!("{row}");
    }
    ds.write_csv(std::io::stdout().lock())?;
    Ok(())
}
