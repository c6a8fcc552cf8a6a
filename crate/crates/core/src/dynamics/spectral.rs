//! Exact propagation of a time-independent Hermitian operator through its
//! eigendecomposition.
//!
//! The operator is first split into the connected components of its
//! nonzero pattern. The device Hamiltonian after the pulses conserves total
//! excitation number, so these components are the excitation-number sectors
//! and each one is diagonalized separately.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::hilbert::HermitianEntries;
use crate::linalg::{eigh, eigh_real};

#[derive(Clone, Debug)]
enum Basis {
    Real(Mat<f64>),
    Complex(Mat<C64>),
}

#[derive(Clone, Debug)]
struct Block {
    indices: Vec<usize>,
    energies: Vec<f64>,
    basis: Basis,
}

/// Cached eigendecomposition of a Hermitian operator, split into blocks.
#[derive(Clone, Debug)]
pub struct BlockSpectral {
    dim: usize,
    blocks: Vec<Block>,
}

/// Connected components of the nonzero pattern, each sorted ascending.
pub fn connected_blocks<H: HermitianEntries + ?Sized>(h: &H) -> Vec<Vec<usize>> {
    let dim = h.dim();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    h.for_each_upper(&mut |r, c, _| {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    });
    let mut slot = vec![usize::MAX; dim];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..dim {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(i);
    }
    blocks
}

impl BlockSpectral {
    pub fn new<H: HermitianEntries + ?Sized>(h: &H) -> Result<Self> {
        let dim = h.dim();
        let groups = connected_blocks(h);
        let mut owner = vec![(0usize, 0usize); dim];
        for (b, idx) in groups.iter().enumerate() {
            for (local, &i) in idx.iter().enumerate() {
                owner[i] = (b, local);
            }
        }
        let mut real = true;
        let mut entries: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); groups.len()];
        h.for_each_upper(&mut |r, c, v| {
            let (b, lr) = owner[r];
            let (_, lc) = owner[c];
            if v.im != 0.0 {
                real = false;
            }
            entries[b].push((lr, lc, v));
        });
        let mut blocks = Vec::with_capacity(groups.len());
        for (indices, upper) in groups.into_iter().zip(entries) {
            let n = indices.len();
            let (energies, basis) = if real {
                let mut m = Mat::<f64>::zeros(n, n);
                for (local, &i) in indices.iter().enumerate() {
                    m[(local, local)] = h.diagonal(i);
                }
                for &(r, c, v) in &upper {
                    m[(r, c)] = v.re;
                    m[(c, r)] = v.re;
                }
                let (e, u) = eigh_real(&m)?;
                (e, Basis::Real(u))
            } else {
                let mut m = Mat::<C64>::zeros(n, n);
                for (local, &i) in indices.iter().enumerate() {
                    m[(local, local)] = C64::new(h.diagonal(i), 0.0);
                }
                for &(r, c, v) in &upper {
                    m[(r, c)] = v;
                    m[(c, r)] = v.conj();
                }
                let (e, u) = eigh(&m)?;
                (e, Basis::Complex(u))
            };
            blocks.push(Block { indices, energies, basis });
        }
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0)
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// All eigenvalues, unsorted.
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.energies.iter().copied())
    }

    /// `exp(-i H t) psi`.
    pub fn evolve(&self, psi: &[C64], t: f64) -> Vec<C64> {
        assert_eq!(psi.len(), self.dim, "dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for block in &self.blocks {
            let n = block.indices.len();
            let phases: Vec<C64> = block.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
            match &block.basis {
                Basis::Real(u) => {
                    let x = Mat::from_fn(n, 2, |i, j| {
                        let p = psi[block.indices[i]];
                        if j == 0 {
                            p.re
                        } else {
                            p.im
                        }
                    });
                    let c = u.transpose() * &x;
                    let c = Mat::from_fn(n, 2, |k, j| {
                        let z = C64::new(c[(k, 0)], c[(k, 1)]) * phases[k];
                        if j == 0 {
                            z.re
                        } else {
                            z.im
                        }
                    });
                    let y = u * &c;
                    for (i, &idx) in block.indices.iter().enumerate() {
                        out[idx] = C64::new(y[(i, 0)], y[(i, 1)]);
                    }
                }
                Basis::Complex(u) => {
                    let x = Mat::from_fn(n, 1, |i, _| psi[block.indices[i]]);
                    let c = u.adjoint() * &x;
                    let c = Mat::from_fn(n, 1, |k, _| c[(k, 0)] * phases[k]);
                    let y = u * &c;
                    for (i, &idx) in block.indices.iter().enumerate() {
                        out[idx] = y[(i, 0)];
                    }
                }
            }
        }
        out
    }
}
