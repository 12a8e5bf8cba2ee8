//! Hermitian eigendecomposition with deterministic conventions.
//!
//! Backed by nalgebra's symmetric (Hermitian) eigensolver; this module adds
//! the ordering and phase conventions the rest of the crate relies on:
//! energies ascending, and each eigenvector rephased so its first component
//! with magnitude above 1e-8 is real and positive.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Eigenpairs of a Hermitian operator.
///
/// `vectors` holds the eigenvectors as columns, aligned with `energies`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub energies: Array1<f64>,
    pub vectors: Array2<Complex64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Column `k` as an owned state vector.
    pub fn eigenvector(&self, k: usize) -> Array1<Complex64> {
        self.vectors.column(k).to_owned()
    }

    /// Max-norm of V diag(E) V^dagger - H.
    pub fn reconstruction_residual(&self, h: &Array2<Complex64>) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    acc += self.vectors[[i, k]] * self.energies[k] * self.vectors[[j, k]].conj();
                }
                worst = worst.max((acc - h[[i, j]]).norm());
            }
        }
        worst
    }

    /// Max-norm of V^dagger V - I.
    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for a in 0..d {
            for b in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    acc += self.vectors[[i, a]].conj() * self.vectors[[i, b]];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((acc - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

pub fn eigh(h: &Array2<Complex64>) -> EigenDecomposition {
    let d = h.nrows();
    let na = DMatrix::from_fn(d, d, |i, j| h[[i, j]]);
    // Symmetrize against roundoff so the solver sees an exactly Hermitian input.
    let na = (&na + &na.adjoint()).scale(0.5);
    let se = na.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));

    let mut energies = Array1::zeros(d);
    let mut vectors = Array2::zeros((d, d));
    for (col, &src) in order.iter().enumerate() {
        energies[col] = se.eigenvalues[src];
        // Phase convention: first component with |v_i| > 1e-8 made real positive.
        let mut phase = Complex64::new(1.0, 0.0);
        for i in 0..d {
            let v = se.eigenvectors[(i, src)];
            if v.norm() > 1e-8 {
                phase = (v / v.norm()).conj();
                break;
            }
        }
        for i in 0..d {
            vectors[[i, col]] = se.eigenvectors[(i, src)] * phase;
        }
    }
    EigenDecomposition { energies, vectors }
}
