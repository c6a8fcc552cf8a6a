//! Fidelity to the post-pulse state and resonator entanglement after a
//! burst of resonant pulses, with and without the qubit Kerr term.
//!
//! cargo run --release --example entanglement_demo

use mbar_kernel::dynamics::PropagatorConfig;
use mbar_kernel::entangle::{first_crossing, time_grid, trajectory, DemoDrive};
use mbar_kernel::model::DeviceParams;

fn main() -> mbar_kernel::Result<()> {
    let n = 2;
    let drive = DemoDrive::standard(n)?;
    let times = time_grid(&drive, 8.0, 0.05)?;
    for kerr in [0.0, 400.0] {
        let device = DeviceParams::entanglement_demo(kerr, n, 6)?;
        let points = trajectory(&device, &drive, &times, &PropagatorConfig::default())?;
        println!("K/2pi = {kerr} MHz");
        println!("  {:>6}  {:>9}  {:>9}", "t (us)", "F", "E_N");
        for p in points.iter().step_by(20) {
            println!("  {:>6.2}  {:>9.6}  {:>9.6}", p.t, p.fidelity, p.log_negativity.unwrap_or(0.0));
        }
        match first_crossing(&points, 0.9) {
            Some(t) => println!("  fidelity first below 0.9 at {t:.2} us"),
            None => println!("  fidelity stays above 0.9"),
        }
    }
    Ok(())
}
