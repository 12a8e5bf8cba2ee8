//! Dense complex operator algebra on small multi-qubit Hilbert spaces.
//!
//! [`Operator`] is a square complex matrix carrying the ordered list of local
//! subsystem dimensions whose product equals the matrix dimension. The basis
//! convention throughout is the product basis |q1 q2 ... qN> with qubit 1 as
//! the leftmost (most significant) tensor factor and |0> the lower Zeeman
//! level of -w*Sz with w > 0.

mod eigh;
mod expm;

pub use eigh::EigenDecomposition;
pub use expm::{expm as expm_matrix, expm_action as expm_action_matrix};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex state vector in the product basis.
pub type State = Array1<Complex64>;

pub const I0: Complex64 = Complex64::new(0.0, 0.0);
pub const I1: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix with subsystem-dimension metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: Array2<Complex64>,
    dims: Vec<usize>,
}

impl Operator {
    /// Wrap a square matrix, checking that the subsystem dimensions multiply
    /// to the matrix dimension.
    pub fn new(mat: Array2<Complex64>, dims: Vec<usize>) -> Result<Self> {
        let d = mat.nrows();
        if mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, expected square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let prod: usize = dims.iter().product();
        if prod != d {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dims {:?} multiply to {}, matrix dim is {}",
                dims, prod, d
            )));
        }
        Ok(Self { mat, dims })
    }

    /// Square matrix over a single subsystem of its own dimension.
    pub fn from_matrix(mat: Array2<Complex64>) -> Result<Self> {
        let d = mat.nrows();
        Self::new(mat, vec![d])
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self {
            mat: Array2::zeros((d, d)),
            dims: dims.to_vec(),
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self {
            mat: Array2::eye(d),
            dims: dims.to_vec(),
        }
    }

    /// Identity on n qubits.
    pub fn qubit_identity(n: usize) -> Self {
        Self::identity(&vec![2; n])
    }

    pub fn pauli_x() -> Self {
        Self {
            mat: ndarray::array![[I0, I1], [I1, I0]],
            dims: vec![2],
        }
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::i();
        Self {
            mat: ndarray::array![[I0, -i], [i, I0]],
            dims: vec![2],
        }
    }

    pub fn pauli_z() -> Self {
        Self {
            mat: ndarray::array![[I1, I0], [I0, -I1]],
            dims: vec![2],
        }
    }

    /// Raising operator |1><0| in the convention |0> = ground.
    pub fn sigma_plus() -> Self {
        let mut m = Array2::zeros((2, 2));
        m[[1, 0]] = I1;
        Self { mat: m, dims: vec![2] }
    }

    /// Lowering operator |0><1|.
    pub fn sigma_minus() -> Self {
        let mut m = Array2::zeros((2, 2));
        m[[0, 1]] = I1;
        Self { mat: m, dims: vec![2] }
    }

    /// Projector |ket><bra| from two state vectors.
    pub fn outer(ket: &State, bra: &State, dims: &[usize]) -> Result<Self> {
        let d: usize = dims.iter().product();
        if ket.len() != d || bra.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "outer product of {}- and {}-vectors for dim {}",
                ket.len(),
                bra.len(),
                d
            )));
        }
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = ket[i] * bra[j].conj();
            }
        }
        Ok(Self { mat: m, dims: dims.to_vec() })
    }

    /// Density matrix |psi><psi|.
    pub fn projector(psi: &State, dims: &[usize]) -> Result<Self> {
        Self::outer(psi, psi, dims)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_qubits(&self) -> usize {
        self.dims.len()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.mat
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.mat[[i, j]]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut m = Array2::zeros((self.dim(), self.dim()));
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                m[[i, j]] = self.mat[[j, i]].conj();
            }
        }
        Self { mat: m, dims: self.dims.clone() }
    }

    /// Elementwise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        Self {
            mat: self.mat.mapv(|z| z.conj()),
            dims: self.dims.clone(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.mat[[i, i]]).sum()
    }

    /// Matrix product self * rhs.
    pub fn matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.dim(), rhs.dim());
        Self {
            mat: self.mat.dot(&rhs.mat),
            dims: self.dims.clone(),
        }
    }

    /// Apply to a state vector.
    pub fn apply(&self, psi: &State) -> State {
        self.mat.dot(psi)
    }

    /// A * rho * A^dagger.
    pub fn conjugate(&self, rho: &Self) -> Self {
        Self {
            mat: self.mat.dot(&rho.mat).dot(&self.dagger().mat),
            dims: rho.dims.clone(),
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            mat: self.mat.mapv(|x| x * z),
            dims: self.dims.clone(),
        }
    }

    pub fn scale_re(&self, r: f64) -> Self {
        self.scale(Complex64::new(r, 0.0))
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.dim() {
            let s: f64 = (0..self.dim()).map(|i| self.mat[[i, j]].norm()).sum();
            best = best.max(s);
        }
        best
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.mat.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn herm_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                worst = worst.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.herm_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let p = self.dagger().matmul(self);
        let eye = Self::identity(&self.dims);
        (&p - &eye).max_norm() <= tol
    }

    /// Trace of the product Tr[self * rhs] without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Complex64 {
        let d = self.dim();
        let mut acc = I0;
        for i in 0..d {
            for k in 0..d {
                acc += self.mat[[i, k]] * rhs.mat[[k, i]];
            }
        }
        acc
    }

    /// Kronecker product; subsystem dims concatenate.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (da, db) = (self.dim(), rhs.dim());
        let d = da * db;
        let mut m = Array2::zeros((d, d));
        for ia in 0..da {
            for ja in 0..da {
                let za = self.mat[[ia, ja]];
                if za == I0 {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        m[[ia * db + ib, ja * db + jb]] = za * rhs.mat[[ib, jb]];
                    }
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&rhs.dims);
        Self { mat: m, dims }
    }

    /// Embed a single-site 2x2 operator at `site` of an `n_sites` qubit
    /// register, identity elsewhere.
    pub fn embed_single_site(op: &Self, site: usize, n_sites: usize) -> Result<Self> {
        if op.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "embed_single_site expects a 2x2 operator, got dim {}",
                op.dim()
            )));
        }
        if site >= n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites });
        }
        let mut acc = if site == 0 {
            op.clone()
        } else {
            Self::qubit_identity(site)
        };
        if site > 0 {
            acc = acc.kron(op);
        }
        let trailing = n_sites - site - 1;
        if trailing > 0 {
            acc = acc.kron(&Self::qubit_identity(trailing));
        }
        Ok(acc)
    }

    /// Reduced operator over the subsystems in `keep` (0-based, ascending
    /// output order), tracing out the rest. Trace is preserved.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.dims.len();
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.iter().any(|&k| k >= n) {
            return Err(Error::InvalidIndexSet(format!(
                "keep = {:?} for {} subsystems",
                keep, n
            )));
        }
        let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let dk: usize = keep.iter().map(|&i| self.dims[i]).product();
        let dt: usize = traced.iter().map(|&i| self.dims[i]).product();

        // Strides of each subsystem index in the flat basis label.
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        let flat = |subidx: &[(usize, usize)]| -> usize {
            subidx.iter().map(|&(site, v)| v * strides[site]).sum()
        };
        let unrank = |mut r: usize, sites: &[usize]| -> Vec<(usize, usize)> {
            let mut out = Vec::with_capacity(sites.len());
            for &s in sites.iter().rev() {
                out.push((s, r % self.dims[s]));
                r /= self.dims[s];
            }
            out.reverse();
            out
        };

        let mut m = Array2::zeros((dk, dk));
        for rk in 0..dk {
            let ridx = unrank(rk, &keep);
            for ck in 0..dk {
                let cidx = unrank(ck, &keep);
                let mut acc = I0;
                for t in 0..dt {
                    let tidx = unrank(t, &traced);
                    let mut ri = ridx.clone();
                    ri.extend_from_slice(&tidx);
                    let mut ci = cidx.clone();
                    ci.extend_from_slice(&tidx);
                    acc += self.mat[[flat(&ri), flat(&ci)]];
                }
                m[[rk, ck]] = acc;
            }
        }
        let dims: Vec<usize> = keep.iter().map(|&i| self.dims[i]).collect();
        Self::new(m, dims)
    }

    /// Matrix exponential, accurate to ~1e-13 relative for the norms used
    /// here (scaling-and-squaring with diagonal Pade approximants).
    pub fn expm(&self) -> Result<Self> {
        if let Some((i, j)) = self
            .mat
            .indexed_iter()
            .find(|(_, z)| !(z.re.is_finite() && z.im.is_finite()))
            .map(|((i, j), _)| (i, j))
        {
            return Err(Error::NonFinite { row: i, col: j });
        }
        Ok(Self {
            mat: expm::expm(&self.mat),
            dims: self.dims.clone(),
        })
    }

    /// exp(self * scale) applied to a set of column vectors, without forming
    /// the matrix exponential. Exact to machine precision via scaled Taylor
    /// summation; intended for propagating a few states through large
    /// superoperators.
    pub fn expm_action(&self, scale: Complex64, states: &mut [State]) {
        expm::expm_action(&self.mat, scale, states);
    }

    /// Hermitian eigendecomposition with deterministic ordering and phases:
    /// energies ascending, each eigenvector scaled so its first component of
    /// magnitude above 1e-8 is real positive.
    pub fn eigh(&self) -> Result<EigenDecomposition> {
        let dev = self.herm_deviation();
        let tol = 1e-10 * self.one_norm().max(1.0);
        if dev > tol {
            return Err(Error::NotHermitian { deviation: dev, tol });
        }
        Ok(eigh::eigh(&self.mat))
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        debug_assert_eq!(self.dim(), rhs.dim());
        Operator {
            mat: &self.mat + &rhs.mat,
            dims: self.dims.clone(),
        }
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        debug_assert_eq!(self.dim(), rhs.dim());
        Operator {
            mat: &self.mat - &rhs.mat,
            dims: self.dims.clone(),
        }
    }
}

impl std::ops::Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

/// Commutator [a, b].
pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    &a.matmul(b) - &b.matmul(a)
}

/// Basis vector |idx> of dimension `dim`.
pub fn basis_ket(dim: usize, idx: usize) -> State {
    let mut v = Array1::zeros(dim);
    v[idx] = I1;
    v
}

/// <a|b>.
pub fn inner(a: &State, b: &State) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Normalize a state vector in place; returns the original norm.
pub fn normalize(psi: &mut State) -> f64 {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        psi.mapv_inplace(|z| z / n);
    }
    n
}
