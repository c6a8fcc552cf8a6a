//! Fidelity, partial trace and logarithmic negativity on small states.
//!
//! cargo run --example quantum_information

use num_complex::Complex64 as C64;

use mbar_kernel::hilbert::{ModeLayout, StateVector};
use mbar_kernel::qinfo::{log_negativity, partial_trace, uhlmann_fidelity, DensityMatrix};

fn main() -> mbar_kernel::Result<()> {
    let two_qubits = ModeLayout::new(vec![2, 2])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = StateVector::new(two_qubits.clone(), vec![C64::new(s, 0.0), 0.0.into(), 0.0.into(), C64::new(s, 0.0)])?;
    let product = StateVector::new(two_qubits, vec![C64::new(s, 0.0), C64::new(s, 0.0), 0.0.into(), 0.0.into()])?;

    let bell_rho = DensityMatrix::from_pure(&bell);
    println!("E_N(Bell)     = {:.6}", log_negativity(&bell_rho, &[0])?);
    println!("E_N(product)  = {:.6}", log_negativity(&DensityMatrix::from_pure(&product), &[0])?);

    let half = partial_trace(&bell, &[1])?;
    println!("purity of one Bell qubit = {:.6}", half.purity());

    let qubit = ModeLayout::new(vec![2])?;
    let zero = DensityMatrix::from_pure(&StateVector::new(qubit.clone(), vec![1.0.into(), 0.0.into()])?);
    let mixed = DensityMatrix::maximally_mixed(qubit);
    println!("F(I/2, |0>)   = {:.6} (1/sqrt 2 = {s:.6})", uhlmann_fidelity(&mixed, &zero)?);
    println!("F(|0>, |0>)   = {:.6}", uhlmann_fidelity(&zero, &zero)?);
    Ok(())
}
