//! Dense complex spin operators and small-matrix helpers.
//!
//! Hamiltonians carry rad/s entries; unitaries and density matrices are
//! dimensionless. Every Hamiltonian builder in this crate routes through
//! [`OperatorMatrix::hamiltonian`], which enforces hermiticity on
//! construction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn ci(im: f64) -> C64 {
    C64::new(0.0, im)
}

/// Relative hermiticity tolerance for Hamiltonian builders.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unitarity tolerance (|U U^† - 1|).
pub const UNITARITY_TOL: f64 = 1e-10;
/// Trace/norm tolerance for states.
pub const STATE_TOL: f64 = 1e-10;

/// A dense operator with its dimension, hermiticity-checked for Hamiltonians.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub dim: usize,
    pub entries: CMat,
}

impl OperatorMatrix {
    /// Wrap a Hamiltonian, verifying hermiticity to `HERMITICITY_TOL` relative.
    pub fn hamiltonian(entries: CMat) -> Result<Self> {
        let (asym, scale) = hermiticity_defect(&entries);
        if asym > HERMITICITY_TOL * scale.max(1e-300) {
            return Err(Error::NonHermitian {
                max_asym: asym,
                scale,
            });
        }
        Ok(OperatorMatrix {
            dim: entries.nrows(),
            entries,
        })
    }

    pub fn unchecked(entries: CMat) -> Self {
        OperatorMatrix {
            dim: entries.nrows(),
            entries,
        }
    }

    /// Real eigenvalues of a Hermitian operator, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// (max |A - A^†| element, max |A| element).
pub fn hermiticity_defect(m: &CMat) -> (f64, f64) {
    let mut asym: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            scale = scale.max(m[(i, j)].norm());
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            asym = asym.max(d);
        }
    }
    (asym, scale)
}

pub fn is_hermitian(m: &CMat) -> bool {
    let (asym, scale) = hermiticity_defect(m);
    asym <= HERMITICITY_TOL * scale.max(1e-300)
}

/// |U U^† - 1| max element.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let p = u * u.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let expect = if i == j { c(1.0) } else { c(0.0) };
            worst = worst.max((p[(i, j)] - expect).norm());
        }
    }
    worst
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Spin operators (Sx, Sy, Sz) for spin j = two_j/2, dimension two_j+1.
/// Basis ordering is m = +j .. -j (so the spin-1 Sz is diag(1, 0, -1)).
pub fn spin_operators(two_j: u8) -> (CMat, CMat, CMat) {
    let j = f64::from(two_j) / 2.0;
    let dim = usize::from(two_j) + 1;
    let mut sp = CMat::zeros(dim, dim); // raising operator S+
    for k in 1..dim {
        // row k-1 has m' = j-(k-1); S+ |j, m=j-k> = sqrt(j(j+1)-m(m+1)) |j, m+1>
        let m = j - k as f64;
        sp[(k - 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm) * ci(-0.5);
    let mut sz = CMat::zeros(dim, dim);
    for k in 0..dim {
        sz[(k, k)] = c(j - k as f64);
    }
    (sx, sy, sz)
}

/// Kronecker product chain.
pub fn kron_all(ops: &[CMat]) -> CMat {
    let mut acc = identity(1);
    for op in ops {
        acc = acc.kronecker(op);
    }
    acc
}

/// Embed `op` at tensor slot `slot` among subsystems of dimensions `dims`.
pub fn embed(op: &CMat, slot: usize, dims: &[usize]) -> CMat {
    let mut acc = identity(1);
    for (k, &d) in dims.iter().enumerate() {
        if k == slot {
            acc = acc.kronecker(op);
        } else {
            acc = acc.kronecker(&identity(d));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_half_algebra() {
        let (sx, sy, sz) = spin_operators(1);
        // [Sx, Sy] = i Sz
        let comm = &sx * &sy - &sy * &sx;
        let expect = &sz * ci(1.0);
        assert!((&comm - &expect).norm() < 1e-14);
        assert!(is_hermitian(&sx) && is_hermitian(&sy) && is_hermitian(&sz));
    }

    #[test]
    fn spin_one_matrices_match_reference() {
        let (sx, sy, sz) = spin_operators(2);
        let s = 1.0 / 2f64.sqrt();
        assert!((sx[(0, 1)] - c(s)).norm() < 1e-15);
        assert!((sy[(1, 0)] - ci(s)).norm() < 1e-15);
        assert!((sz[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!((sz[(2, 2)] - c(-1.0)).norm() < 1e-15);
        let comm = &sx * &sy - &sy * &sx;
        assert!((&comm - &(&sz * ci(1.0))).norm() < 1e-14);
    }

    #[test]
    fn embed_acts_on_one_slot() {
        let (_, _, sz) = spin_operators(1);
        let dims = [2usize, 2, 2];
        let op = embed(&sz, 1, &dims);
        assert_eq!(op.nrows(), 8);
        // trace of Sz embedded is 0
        let tr: C64 = (0..8).map(|i| op[(i, i)]).sum();
        assert!(tr.norm() < 1e-14);
    }

    #[test]
    fn hermiticity_detects_defect() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0);
        assert!(!is_hermitian(&m));
    }
}
