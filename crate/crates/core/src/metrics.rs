//! Figures of merit: closed-system gate fidelity against drift-dressed
//! targets, average gate fidelity with its coherent/diagonal decomposition,
//! state fidelity, and Wootters concurrence in a chosen basis.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{EigenDecomposition, Operator, State, I0, I1};
use crate::propagate::lindblad_propagate_many;
use crate::pulse::SampledPulse;

/// Frame in which a gate target is stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFrame {
    /// Drift phases dressed onto the gate (physical lab-frame evolution).
    Lab,
    /// The bare gate, no drift phases.
    Rotating,
}

/// A target unitary, stored as its static (rotating-frame) gate.
#[derive(Debug, Clone)]
pub struct GateTarget {
    pub static_gate: Operator,
    pub frame: TargetFrame,
}

impl GateTarget {
    pub fn new(static_gate: Operator, frame: TargetFrame) -> Result<Self> {
        if !static_gate.is_unitary(1e-12) {
            return Err(Error::InvalidParameter("gate target must be unitary".into()));
        }
        Ok(Self { static_gate, frame })
    }

    /// Target at time t: the lab frame dresses each outgoing eigenstate with
    /// its drift phase, exp(-i H0 t) G.
    pub fn at_time(&self, drift: &EigenDecomposition, t: f64) -> Operator {
        match self.frame {
            TargetFrame::Rotating => self.static_gate.clone(),
            TargetFrame::Lab => lab_frame_target(&self.static_gate, drift, t),
        }
    }
}

/// exp(-i H0 t) G expressed through the drift eigendecomposition, so each
/// outgoing eigenstate accrues its own phase exp(-i E_k t).
pub fn lab_frame_target(gate: &Operator, drift: &EigenDecomposition, t: f64) -> Operator {
    let d = drift.dim();
    let mut phase_op = Array2::<Complex64>::zeros((d, d));
    for k in 0..d {
        let ph = Complex64::new(0.0, -drift.energies[k] * t).exp();
        let col = drift.vectors.column(k);
        for i in 0..d {
            for j in 0..d {
                phase_op[[i, j]] += col[i] * ph * col[j].conj();
            }
        }
    }
    Operator::new(phase_op, gate.dims().to_vec())
        .expect("square")
        .matmul(gate)
}

/// Dominant product label of each drift eigenstate; errors when the mapping
/// is not one-to-one (too much hybridization to name states).
pub fn dominant_labels(drift: &EigenDecomposition) -> Result<Vec<usize>> {
    let d = drift.dim();
    let labels: Vec<usize> = (0..d)
        .map(|k| {
            let col = drift.vectors.column(k);
            (0..d).max_by(|&i, &j| col[i].norm().total_cmp(&col[j].norm())).unwrap()
        })
        .collect();
    let mut seen = vec![false; d];
    for &l in &labels {
        if seen[l] {
            return Err(Error::InvalidParameter(
                "eigenstates do not map one-to-one onto product labels".into(),
            ));
        }
        seen[l] = true;
    }
    Ok(labels)
}

/// Lift a product-label permutation to an eigenbasis permutation gate
/// G = sum_a |psi_{pi(a)}><psi_a|, where pi sends eigenstate a to the
/// eigenstate whose dominant label is perm(label(a)).
pub fn eigenstate_permutation_gate(
    drift: &EigenDecomposition,
    dims: &[usize],
    perm: impl Fn(usize) -> usize,
) -> Result<Operator> {
    let labels = dominant_labels(drift)?;
    let d = drift.dim();
    let index_of_label = |l: usize| -> Result<usize> {
        labels
            .iter()
            .position(|&x| x == l)
            .ok_or_else(|| Error::InvalidParameter(format!("no eigenstate with dominant label {l}")))
    };
    let mut m = Array2::<Complex64>::zeros((d, d));
    for a in 0..d {
        let target = index_of_label(perm(labels[a]))?;
        let out = drift.vectors.column(target);
        let src = drift.vectors.column(a);
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] += out[i] * src[j].conj();
            }
        }
    }
    Operator::new(m, dims.to_vec())
}

/// NOT on one qubit as an eigenbasis permutation (bit flip of the dominant
/// label). Qubit 0 is the leftmost tensor factor.
pub fn not_gate(drift: &EigenDecomposition, n_qubits: usize, qubit: usize) -> Result<Operator> {
    if qubit >= n_qubits {
        return Err(Error::SiteOutOfRange { site: qubit, n_sites: n_qubits });
    }
    let bit = 1usize << (n_qubits - 1 - qubit);
    eigenstate_permutation_gate(drift, &vec![2; n_qubits], move |l| l ^ bit)
}

/// CNOT as an eigenbasis permutation: flip `target` iff `control` is 1.
pub fn cnot_gate(
    drift: &EigenDecomposition,
    n_qubits: usize,
    control: usize,
    target: usize,
) -> Result<Operator> {
    if control >= n_qubits || target >= n_qubits || control == target {
        return Err(Error::InvalidParameter(format!(
            "bad cnot qubits ({control}, {target}) for {n_qubits} qubits"
        )));
    }
    let cbit = 1usize << (n_qubits - 1 - control);
    let tbit = 1usize << (n_qubits - 1 - target);
    eigenstate_permutation_gate(drift, &vec![2; n_qubits], move |l| {
        if l & cbit != 0 {
            l ^ tbit
        } else {
            l
        }
    })
}

/// (|Tr(U^+ U_target)|^2 + d) / (d (d + 1)).
pub fn closed_gate_fidelity(u: &Operator, u_target: &Operator) -> Result<f64> {
    if u.dim() != u_target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gate fidelity between dims {} and {}",
            u.dim(),
            u_target.dim()
        )));
    }
    let d = u.dim() as f64;
    let tr = u.dagger().trace_product(u_target);
    Ok((tr.norm_sqr() + d) / (d * (d + 1.0)))
}

/// <psi_target| rho |psi_target>.
pub fn state_fidelity(rho: &Operator, target: &State) -> f64 {
    let d = rho.dim();
    let mut acc = I0;
    for i in 0..d {
        for j in 0..d {
            acc += target[i].conj() * rho.at(i, j) * target[j];
        }
    }
    acc.re
}

/// Outputs of a dynamical map over a full Liouville basis |phi_i><phi_j|.
#[derive(Debug, Clone)]
pub struct LiouvilleBasisOutputs {
    pub basis: Vec<State>,
    /// outputs[i][j] = E(|phi_i><phi_j|).
    pub outputs: Vec<Vec<Operator>>,
}

/// Propagate the Liouville basis of `basis` through the master equation.
///
/// Off-diagonal |i><j| are not density matrices; they are reconstructed by
/// linearity from four Hermitian propagations: the projectors onto |i>, |j>,
/// (|i>+|j>)/sqrt(2), and (|i>+i|j>)/sqrt(2).
pub fn propagate_liouville_basis(
    h0: &Operator,
    control: &Operator,
    pulse: &SampledPulse,
    collapse: &[Operator],
    basis: &[State],
) -> Result<LiouvilleBasisOutputs> {
    let n = basis.len();
    let dims = h0.dims().to_vec();
    let proj = |psi: &State| Operator::projector(psi, &dims);

    // Assemble all Hermitian inputs: n diagonal projectors then, for each
    // i < j, the plus and phase superpositions.
    let mut inputs = Vec::with_capacity(n * n);
    for psi in basis {
        inputs.push(proj(psi)?);
    }
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let plus: State = basis[i].mapv(|z| z * inv_sqrt2) + basis[j].mapv(|z| z * inv_sqrt2);
            let phase: State =
                basis[i].mapv(|z| z * inv_sqrt2) + basis[j].mapv(|z| z * inv_sqrt2 * Complex64::i());
            inputs.push(proj(&plus)?);
            inputs.push(proj(&phase)?);
        }
    }

    let finals = lindblad_propagate_many(h0, control, pulse, collapse, &inputs)?;

    let mut outputs: Vec<Vec<Operator>> = vec![vec![Operator::zeros(&dims); n]; n];
    for i in 0..n {
        outputs[i][i] = finals[i].clone();
    }
    let mut k = n;
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let e_plus = &finals[k];
            let e_phase = &finals[k + 1];
            k += 2;
            // |i><j| = P_plus + i P_phase - (1+i)/2 (P_i + P_j)
            let diag_part = &outputs[i][i] + &outputs[j][j];
            let upper = &(&e_plus.scale(I1) + &e_phase.scale(Complex64::i()))
                - &diag_part.scale(half + half_i);
            outputs[j][i] = upper.dagger();
            outputs[i][j] = upper;
        }
    }
    Ok(LiouvilleBasisOutputs {
        basis: basis.to_vec(),
        outputs,
    })
}

/// Average gate fidelity split into coherence and population parts:
///
///   F_avg = (Re F_coh + F_dia) / (N (N + 1)),
///   F_coh = sum_ij <phi_i| U^+ E(|phi_i><phi_j|) U |phi_j>,
///   F_dia = sum_ij <phi_i| U^+ E(|phi_j><phi_j|) U |phi_i>.
#[derive(Debug, Clone, Serialize)]
pub struct FidelityBreakdown {
    pub f_avg: f64,
    pub f_coh_re: f64,
    pub f_coh_im: f64,
    pub f_dia: f64,
    /// Per-(i,j) coherent contributions, real and imaginary parts.
    pub coh_panel_re: Vec<Vec<f64>>,
    pub coh_panel_im: Vec<Vec<f64>>,
    /// Per-(i,j) diagonal contributions <phi_i|U^+ rho_jj U|phi_i>.
    pub dia_panel: Vec<Vec<f64>>,
}

pub fn average_gate_fidelity(
    map: &LiouvilleBasisOutputs,
    u_target: &Operator,
) -> Result<FidelityBreakdown> {
    let n = map.basis.len();
    if n == 0 || map.outputs.len() != n {
        return Err(Error::DimensionMismatch("empty or ragged Liouville basis".into()));
    }
    // Targets |t_i> = U |phi_i>.
    let targets: Vec<State> = map.basis.iter().map(|b| u_target.apply(b)).collect();

    let mut coh_re = vec![vec![0.0; n]; n];
    let mut coh_im = vec![vec![0.0; n]; n];
    let mut dia = vec![vec![0.0; n]; n];
    let mut f_coh = I0;
    let mut f_dia = 0.0;
    for i in 0..n {
        for j in 0..n {
            // <phi_i|U^+ rho_ij U|phi_j> = <t_i| rho_ij |t_j>
            let rho_ij = &map.outputs[i][j];
            let mut c = I0;
            let d = rho_ij.dim();
            for a in 0..d {
                for b in 0..d {
                    c += targets[i][a].conj() * rho_ij.at(a, b) * targets[j][b];
                }
            }
            coh_re[i][j] = c.re;
            coh_im[i][j] = c.im;
            f_coh += c;

            let rho_jj = &map.outputs[j][j];
            let mut p = I0;
            for a in 0..d {
                for b in 0..d {
                    p += targets[i][a].conj() * rho_jj.at(a, b) * targets[i][b];
                }
            }
            dia[i][j] = p.re;
            f_dia += p.re;
        }
    }
    let nn = n as f64;
    Ok(FidelityBreakdown {
        f_avg: (f_coh.re + f_dia) / (nn * (nn + 1.0)),
        f_coh_re: f_coh.re,
        f_coh_im: f_coh.im,
        f_dia,
        coh_panel_re: coh_re,
        coh_panel_im: coh_im,
        dia_panel: dia,
    })
}

/// Wootters concurrence of a two-qubit state.
///
/// With `basis`, the state is first rewritten in that eigenbasis, so the
/// spin flip acts between hybridized eigenstates; `None` uses the product
/// basis directly. Eigenvalues slightly below zero from integration noise
/// are clamped before the square roots.
pub fn concurrence(rho: &Operator, basis: Option<&EigenDecomposition>) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "concurrence needs a 4x4 density matrix, got dim {}",
            rho.dim()
        )));
    }
    let rho_b = match basis {
        Some(dec) => {
            // rho' = V^+ rho V
            let d = 4;
            let mut m = Array2::<Complex64>::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    let mut acc = I0;
                    for a in 0..d {
                        for b in 0..d {
                            acc += dec.vectors[[a, i]].conj() * rho.at(a, b) * dec.vectors[[b, j]];
                        }
                    }
                    m[[i, j]] = acc;
                }
            }
            Operator::new(m, vec![2, 2])?
        }
        None => rho.clone(),
    };

    let yy = Operator::pauli_y().kron(&Operator::pauli_y());
    let rho_tilde = yy.matmul(&rho_b.conj()).matmul(&yy);

    let sqrt_rho = psd_sqrt(&rho_b)?;
    let m = sqrt_rho.matmul(&rho_tilde).matmul(&sqrt_rho);
    let dec = symmetrized_eigh(&m)?;
    let mut lambdas = [0.0; 4];
    for (slot, &e) in lambdas.iter_mut().zip(dec.energies.iter()) {
        *slot = clamp_small_negative(e)?.sqrt();
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

fn clamp_small_negative(e: f64) -> Result<f64> {
    if e < -1e-6 {
        return Err(Error::InvalidParameter(format!(
            "density matrix has a significantly negative eigenvalue {e:.3e}"
        )));
    }
    Ok(e.max(0.0))
}

fn psd_sqrt(rho: &Operator) -> Result<Operator> {
    let dec = symmetrized_eigh(rho)?;
    let d = rho.dim();
    let mut m = Array2::<Complex64>::zeros((d, d));
    for k in 0..d {
        let lam = clamp_small_negative(dec.energies[k])?.sqrt();
        let col = dec.vectors.column(k);
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] += col[i] * lam * col[j].conj();
            }
        }
    }
    Operator::new(m, rho.dims().to_vec())
}

/// eigh after forcing exact Hermiticity, for matrices that are Hermitian up
/// to integration noise.
fn symmetrized_eigh(op: &Operator) -> Result<EigenDecomposition> {
    let d = op.dim();
    let mut m = Array2::<Complex64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[[i, j]] = 0.5 * (op.at(i, j) + op.at(j, i).conj());
        }
    }
    Operator::new(m, op.dims().to_vec())?.eigh()
}

/// Check the entanglement bound F <= (1 + C)/2 with 1e-9 slack.
pub fn fidelity_concurrence_bound(fidelity: f64, concurrence: f64) -> bool {
    fidelity <= 0.5 * (1.0 + concurrence) + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{basis_ket, normalize};
    use crate::spin::SpinSystem;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn paper_drift() -> (Operator, EigenDecomposition) {
        let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0);
        let h0 = sys.drift_hamiltonian();
        let dec = h0.eigh().unwrap();
        (h0, dec)
    }

    fn bell_phi_plus() -> State {
        let mut v = basis_ket(4, 0);
        v[3] = I1;
        normalize(&mut v);
        v
    }

    #[test]
    fn lab_frame_target_reduces_to_bare_gate_at_t0() {
        let (_, dec) = paper_drift();
        let g = not_gate(&dec, 2, 1).unwrap();
        let dressed = lab_frame_target(&g, &dec, 0.0);
        assert!((&dressed - &g).max_norm() < 1e-12);
    }

    #[test]
    fn lab_frame_identity_gate_is_drift_propagator() {
        let (h0, dec) = paper_drift();
        let t = 3.7;
        let dressed = lab_frame_target(&Operator::qubit_identity(2), &dec, t);
        let direct = h0.scale(Complex64::new(0.0, -t)).expm().unwrap();
        assert!((&dressed - &direct).max_norm() < 1e-10);
    }

    #[test]
    fn lab_frame_not_gate_term_by_term() {
        // exp(-i E_k t) on each outgoing eigenstate of the swapped pairs
        // (1<->2) and (3<->4).
        let (_, dec) = paper_drift();
        let t = 1.234;
        let g = not_gate(&dec, 2, 1).unwrap();
        let dressed = lab_frame_target(&g, &dec, t);
        let pairs = [(0usize, 1usize), (1, 0), (2, 3), (3, 2)];
        let mut expect = Array2::<Complex64>::zeros((4, 4));
        for (out, input) in pairs {
            let ph = Complex64::new(0.0, -dec.energies[out] * t).exp();
            let vo = dec.vectors.column(out);
            let vi = dec.vectors.column(input);
            for i in 0..4 {
                for j in 0..4 {
                    expect[[i, j]] += vo[i] * ph * vi[j].conj();
                }
            }
        }
        let expect = Operator::new(expect, vec![2, 2]).unwrap();
        assert!((&dressed - &expect).max_norm() < 1e-10);
    }

    #[test]
    fn closed_fidelity_reference_values() {
        let (_, dec) = paper_drift();
        let g = not_gate(&dec, 2, 1).unwrap();
        assert_abs_diff_eq!(closed_gate_fidelity(&g, &g).unwrap(), 1.0, epsilon = 1e-12);

        // Orthogonal-trace case: d = 4, Tr = 0 gives 4/20.
        let sz_i = Operator::pauli_z().kron(&Operator::qubit_identity(1));
        let sx_i = Operator::pauli_x().kron(&Operator::qubit_identity(1));
        let f = closed_gate_fidelity(&sz_i, &sx_i).unwrap();
        assert_abs_diff_eq!(f, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn closed_fidelity_global_phase_invariant() {
        let (_, dec) = paper_drift();
        let g = not_gate(&dec, 2, 1).unwrap();
        let phased = g.scale(Complex64::new(0.0, 0.7).exp());
        let f = closed_gate_fidelity(&phased, &g).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_fidelity_dimension_mismatch() {
        let a = Operator::qubit_identity(1);
        let b = Operator::qubit_identity(2);
        assert!(closed_gate_fidelity(&a, &b).is_err());
    }

    #[test]
    fn state_fidelity_reference_values() {
        let psi = bell_phi_plus();
        let rho = Operator::projector(&psi, &[2, 2]).unwrap();
        assert_abs_diff_eq!(state_fidelity(&rho, &psi), 1.0, epsilon = 1e-12);

        let mut orth = basis_ket(4, 0);
        orth[3] = -I1;
        normalize(&mut orth);
        assert_abs_diff_eq!(state_fidelity(&rho, &orth), 0.0, epsilon = 1e-12);

        let mixed = Operator::qubit_identity(2).scale_re(0.25);
        assert_abs_diff_eq!(state_fidelity(&mixed, &psi), 0.25, epsilon = 1e-12);
    }

    fn identity_map_outputs(basis: &[State]) -> LiouvilleBasisOutputs {
        let n = basis.len();
        let mut outputs = vec![vec![Operator::zeros(&[2, 2]); n]; n];
        for i in 0..n {
            for j in 0..n {
                outputs[i][j] = Operator::outer(&basis[i], &basis[j], &[2, 2]).unwrap();
            }
        }
        LiouvilleBasisOutputs { basis: basis.to_vec(), outputs }
    }

    #[test]
    fn agf_identity_map_is_one() {
        let basis: Vec<State> = (0..4).map(|k| basis_ket(4, k)).collect();
        let out = identity_map_outputs(&basis);
        let f = average_gate_fidelity(&out, &Operator::qubit_identity(2)).unwrap();
        assert_abs_diff_eq!(f.f_avg, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.f_coh_re, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.f_dia, 4.0, epsilon = 1e-12);
        assert!(f.f_coh_im.abs() < 1e-9);
        assert_abs_diff_eq!(f.f_avg, (f.f_coh_re + f.f_dia) / 20.0, epsilon = 1e-10);
    }

    #[test]
    fn agf_perfect_gate_is_one() {
        let (_, dec) = paper_drift();
        let g = not_gate(&dec, 2, 1).unwrap();
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        let n = basis.len();
        let mut outputs = vec![vec![Operator::zeros(&[2, 2]); n]; n];
        for i in 0..n {
            for j in 0..n {
                let x = Operator::outer(&basis[i], &basis[j], &[2, 2]).unwrap();
                outputs[i][j] = g.conjugate(&x);
            }
        }
        let out = LiouvilleBasisOutputs { basis, outputs };
        let f = average_gate_fidelity(&out, &g).unwrap();
        assert_abs_diff_eq!(f.f_avg, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.f_coh_re, 16.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.f_dia, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn agf_depolarizing_map_is_quarter() {
        // E(rho) = Tr(rho) I/4 sends every pure state to fidelity 1/4.
        let basis: Vec<State> = (0..4).map(|k| basis_ket(4, k)).collect();
        let n = basis.len();
        let quarter = Operator::qubit_identity(2).scale_re(0.25);
        let mut outputs = vec![vec![Operator::zeros(&[2, 2]); n]; n];
        for (i, row) in outputs.iter_mut().enumerate() {
            row[i] = quarter.clone();
        }
        let out = LiouvilleBasisOutputs { basis, outputs };
        let f = average_gate_fidelity(&out, &Operator::qubit_identity(2)).unwrap();
        assert_abs_diff_eq!(f.f_coh_re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.f_dia, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.f_avg, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn liouville_basis_reconstruction_matches_unitary_map() {
        // With no collapse operators the reconstructed E(|i><j|) must equal
        // U |i><j| U^+.
        let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0);
        let h0 = sys.drift_hamiltonian();
        let v = sys.control_operator();
        let pulse = crate::pulse::TonePulse::bichromatic(0.1, 41.2, 0.07, 46.2, 2.0)
            .unwrap()
            .sample(0.01)
            .unwrap();
        let dec = h0.eigh().unwrap();
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        let map = propagate_liouville_basis(&h0, &v, &pulse, &[], &basis).unwrap();
        let u = crate::propagate::trotter_propagator(&h0, &v, &pulse).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let x = Operator::outer(&basis[i], &basis[j], &[2, 2]).unwrap();
                let expect = u.conjugate(&x);
                let got = &map.outputs[i][j];
                assert!(
                    (got - &expect).max_norm() < 1e-7,
                    "element ({i},{j}) off by {:.2e}",
                    (got - &expect).max_norm()
                );
            }
        }
    }

    #[test]
    fn concurrence_reference_states() {
        let bell = Operator::projector(&bell_phi_plus(), &[2, 2]).unwrap();
        assert_abs_diff_eq!(concurrence(&bell, None).unwrap(), 1.0, epsilon = 1e-10);

        let product = Operator::projector(&basis_ket(4, 0), &[2, 2]).unwrap();
        assert_abs_diff_eq!(concurrence(&product, None).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn concurrence_eigenbasis_bell_states() {
        // Bell states built from hybridized eigenstates score 1 in the
        // eigenbasis convention.
        let (_, dec) = paper_drift();
        for (a, b, sign) in [(0, 3, 1.0), (0, 3, -1.0), (1, 2, 1.0), (1, 2, -1.0)] {
            let mut psi: State = dec.eigenvector(a) + dec.eigenvector(b).mapv(|z| z * sign);
            normalize(&mut psi);
            let rho = Operator::projector(&psi, &[2, 2]).unwrap();
            let c = concurrence(&rho, Some(&dec)).unwrap();
            assert_abs_diff_eq!(c, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn concurrence_invariant_under_local_unitaries() {
        let bell = Operator::projector(&bell_phi_plus(), &[2, 2]).unwrap();
        let mixed = &bell.scale_re(0.7) + &Operator::qubit_identity(2).scale_re(0.3 * 0.25);
        let c0 = concurrence(&mixed, None).unwrap();
        for (a, b, c) in [(0.3, 0.1, 0.7), (1.1, -0.4, 0.2), (-0.8, 0.9, 1.3)] {
            let gen = &(&Operator::pauli_x().scale_re(a) + &Operator::pauli_y().scale_re(b))
                + &Operator::pauli_z().scale_re(c);
            let u1 = gen.scale(Complex64::new(0.0, -1.0)).expm().unwrap();
            let gen2 = &(&Operator::pauli_x().scale_re(c) + &Operator::pauli_y().scale_re(a))
                + &Operator::pauli_z().scale_re(b);
            let u2 = gen2.scale(Complex64::new(0.0, -0.6)).expm().unwrap();
            let local = u1.kron(&u2);
            let rotated = local.conjugate(&mixed);
            let c1 = concurrence(&rotated, None).unwrap();
            assert_abs_diff_eq!(c0, c1, epsilon = 1e-8);
        }
    }

    #[test]
    fn bound_checks() {
        assert!(fidelity_concurrence_bound(1.0, 1.0));
        assert!(fidelity_concurrence_bound(0.9849, 0.9712));
        assert!(!fidelity_concurrence_bound(0.9, 0.5));
    }
}
