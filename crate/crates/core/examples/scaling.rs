//! Qubit-equivalent counts and the single-threaded cost of one kernel
//! entry for small systems.
//!
//! cargo run --release --example scaling

use mbar_kernel::bench::{qubits_required, time_kernel_entry, write_rows, BenchProtocol};

fn main() -> mbar_kernel::Result<()> {
    for n in 1..=4 {
        let counts: Vec<String> = [6, 9, 12]
            .iter()
            .map(|&d| Ok(format!("{:>3}", qubits_required(n, d)?)))
            .collect::<mbar_kernel::Result<_>>()?;
        println!("n = {n}: n_q for n_dim 6, 9, 12 = {}", counts.join(""));
    }
    let protocol = BenchProtocol::default();
    let rows = [(1, 6), (2, 6), (2, 9), (3, 6)]
        .iter()
        .map(|&(n, d)| time_kernel_entry(n, d, &protocol))
        .collect::<mbar_kernel::Result<Vec<_>>>()?;
    write_rows(&rows, std::io::stdout().lock())
}
