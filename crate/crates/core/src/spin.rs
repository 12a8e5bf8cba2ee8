//! Drift Hamiltonians for exchange-coupled spin-1/2 registers, the analytic
//! two-qubit theory, transition enumeration, and thermal states.
//!
//! The drift of an N-qubit register is
//!
//!   H0 = -sum_i w_i S_i^z + sum_{j>i} J_ij S_i . S_j      (Heisenberg)
//!
//! or with S_i^z S_j^z replacing the dot product for Ising coupling, with
//! S^a = sigma^a / 2 and everything in rad/ns.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{basis_ket, EigenDecomposition, Operator, State};
use crate::units::KB_RAD_PER_NS_PER_K;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Heisenberg,
    Ising,
}

/// N exchange-coupled spin-1/2 qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    /// Larmor frequencies w_i in rad/ns.
    pub larmor: Vec<f64>,
    /// Symmetric coupling matrix J_ij in rad/ns, zero diagonal.
    pub coupling: Vec<Vec<f64>>,
    pub interaction: InteractionKind,
}

impl SpinSystem {
    pub fn new(larmor: Vec<f64>, coupling: Vec<Vec<f64>>, interaction: InteractionKind) -> Result<Self> {
        let n = larmor.len();
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one qubit".into()));
        }
        if coupling.len() != n || coupling.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            if coupling[i][i].abs() > 0.0 {
                return Err(Error::InvalidParameter("coupling diagonal must be zero".into()));
            }
            for j in 0..n {
                if (coupling[i][j] - coupling[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("coupling matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { larmor, coupling, interaction })
    }

    /// Two-qubit Heisenberg system, the workhorse configuration.
    pub fn two_qubit(omega1: f64, omega2: f64, j: f64) -> Self {
        Self {
            larmor: vec![omega1, omega2],
            coupling: vec![vec![0.0, j], vec![j, 0.0]],
            interaction: InteractionKind::Heisenberg,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.larmor.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// -sum_i w_i S_i^z + coupling terms. Hermitian by construction.
    pub fn drift_hamiltonian(&self) -> Operator {
        let n = self.n_qubits();
        let mut h = Operator::zeros(&vec![2; n]);
        for (i, &w) in self.larmor.iter().enumerate() {
            let sz = Operator::embed_single_site(&Operator::pauli_z(), i, n).unwrap();
            h = &h + &sz.scale_re(-0.5 * w);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let jij = self.coupling[i][j];
                if jij == 0.0 {
                    continue;
                }
                match self.interaction {
                    InteractionKind::Heisenberg => {
                        for pauli in [Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z()] {
                            let a = Operator::embed_single_site(&pauli, i, n).unwrap();
                            let b = Operator::embed_single_site(&pauli, j, n).unwrap();
                            h = &h + &a.matmul(&b).scale_re(0.25 * jij);
                        }
                    }
                    InteractionKind::Ising => {
                        let a = Operator::embed_single_site(&Operator::pauli_z(), i, n).unwrap();
                        let b = Operator::embed_single_site(&Operator::pauli_z(), j, n).unwrap();
                        h = &h + &a.matmul(&b).scale_re(0.25 * jij);
                    }
                }
            }
        }
        h
    }

    /// The drive coupling operator sum_i sigma_i^x.
    pub fn control_operator(&self) -> Operator {
        let n = self.n_qubits();
        let mut v = Operator::zeros(&vec![2; n]);
        for i in 0..n {
            v = &v + &Operator::embed_single_site(&Operator::pauli_x(), i, n).unwrap();
        }
        v
    }

    pub fn eigendecomposition(&self) -> EigenDecomposition {
        self.drift_hamiltonian().eigh().expect("drift is Hermitian")
    }

    /// Thermal state exp(-H0/kT)/Z in the product basis.
    ///
    /// T = 0 returns the ground projector (equal mixture over a degenerate
    /// ground space); very large T approaches I/d.
    pub fn thermal_state(&self, temperature_k: f64) -> Result<Operator> {
        if temperature_k < 0.0 {
            return Err(Error::InvalidParameter("temperature must be >= 0".into()));
        }
        let dec = self.eigendecomposition();
        let weights = thermal_populations(&dec.energies.to_vec(), temperature_k);
        let d = self.dim();
        let mut m = Array2::<Complex64>::zeros((d, d));
        for k in 0..d {
            let v = dec.vectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    m[[i, j]] += v[i] * weights[k] * v[j].conj();
                }
            }
        }
        Operator::new(m, vec![2; self.n_qubits()])
    }
}

/// Boltzmann weights for energies in rad/ns at temperature in kelvin,
/// normalized to sum 1. Degenerate levels share weight equally at T = 0.
pub fn thermal_populations(energies: &[f64], temperature_k: f64) -> Vec<f64> {
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    if temperature_k == 0.0 {
        let degenerate: Vec<bool> = energies.iter().map(|&e| (e - e_min).abs() < 1e-12).collect();
        let count = degenerate.iter().filter(|&&g| g).count() as f64;
        return degenerate.iter().map(|&g| if g { 1.0 / count } else { 0.0 }).collect();
    }
    let kt = KB_RAD_PER_NS_PER_K * temperature_k;
    let unnorm: Vec<f64> = energies.iter().map(|&e| (-(e - e_min) / kt).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|w| w / z).collect()
}

/// Closed-form two-qubit Heisenberg theory: mixing angles, energies, and the
/// hybridized eigenstates
///
///   |01~> = -sin(xi1)|01> + cos(xi1)|10>,
///   |10~> =  sin(xi2)|01> + cos(xi2)|10>,
///
/// with xi1 = arctan(a + sqrt(a^2+1)), xi2 = arctan(-a + sqrt(a^2+1)) and
/// a = (w1 - w2)/J.
#[derive(Debug, Clone)]
pub struct TwoQubitAnalytic {
    pub alpha: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// E1..E4 ascending for the regime w1 > w2 > 0, J > 0.
    pub energies: [f64; 4],
    /// Eigenstates as 4-vectors in the product basis, aligned with energies.
    pub eigenstates: [State; 4],
}

impl TwoQubitAnalytic {
    pub fn new(omega1: f64, omega2: f64, j: f64) -> Result<Self> {
        if j == 0.0 {
            return Err(Error::InvalidParameter(
                "analytic two-qubit form degenerates at J = 0; use eigh".into(),
            ));
        }
        let alpha = (omega1 - omega2) / j;
        let s = (alpha * alpha + 1.0).sqrt();
        let xi1 = (alpha + s).atan();
        let xi2 = (-alpha + s).atan();
        let half_diff = 0.5 * (omega1 - omega2);
        let e1 = 0.25 * j - 0.5 * (omega1 + omega2);
        let e2 = half_diff * (2.0 * xi1).cos() - 0.25 * j * (1.0 + 2.0 * (2.0 * xi1).sin());
        let e3 = half_diff * (2.0 * xi2).cos() + 0.25 * j * (-1.0 + 2.0 * (2.0 * xi2).sin());
        let e4 = 0.25 * j + 0.5 * (omega1 + omega2);

        let mut tilde01 = basis_ket(4, 1).mapv(|z| z * -xi1.sin());
        tilde01[2] = Complex64::new(xi1.cos(), 0.0);
        let mut tilde10 = basis_ket(4, 1).mapv(|z| z * xi2.sin());
        tilde10[2] = Complex64::new(xi2.cos(), 0.0);

        Ok(Self {
            alpha,
            xi1,
            xi2,
            energies: [e1, e2, e3, e4],
            eigenstates: [basis_ket(4, 0), tilde01, tilde10, basis_ket(4, 3)],
        })
    }

    /// Effective drive factor |cos(xi1) - sin(xi1)| of the lower pair of
    /// single-flip transitions.
    pub fn factor1(&self) -> f64 {
        (self.xi1.cos() - self.xi1.sin()).abs()
    }

    /// Effective drive factor cos(xi2) + sin(xi2) of the upper pair.
    pub fn factor2(&self) -> f64 {
        self.xi2.cos() + self.xi2.sin()
    }

    /// Transition frequency E2 - E1 (flip of qubit 2 with qubit 1 down).
    pub fn omega_rf1(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// Transition frequency E4 - E3 (flip of qubit 2 with qubit 1 up).
    pub fn omega_rf2(&self) -> f64 {
        self.energies[3] - self.energies[2]
    }
}

/// Amplitude ratio O1/O2 that synchronizes the two NOT-gate Rabi rates,
/// |cos(xi2) + sin(xi2)| / |cos(xi1) - sin(xi1)|.
///
/// The magnitude is returned; the relative sign depends only on the phase
/// convention of the hybridized eigenvectors.
pub fn rabi_sync_ratio(analytic: &TwoQubitAnalytic) -> Result<f64> {
    let den = analytic.factor1();
    if den < 1e-12 {
        return Err(Error::InvalidParameter(
            "effective amplitude of transition 1 vanishes; sync ratio undefined".into(),
        ));
    }
    Ok(analytic.factor2() / den)
}

/// One drive-connected transition between drift eigenstates.
#[derive(Debug, Clone)]
pub struct Transition {
    /// Eigenstate indices (energy-ascending order), a < b.
    pub state_a: usize,
    pub state_b: usize,
    /// |E_b - E_a| in rad/ns.
    pub frequency: f64,
    /// |<a| sum_i sigma_i^x |b>|.
    pub amplitude_factor: f64,
    /// Qubit whose product label flips across the transition, when the
    /// dominant labels differ in exactly one bit.
    pub flipped_qubit: Option<usize>,
}

/// All transitions with a nonzero drive matrix element.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub transitions: Vec<Transition>,
    /// Dominant product-basis label of each eigenstate.
    pub dominant_labels: Vec<usize>,
}

impl TransitionTable {
    /// Transitions that flip exactly one qubit, sorted by frequency.
    pub fn single_flips(&self) -> Vec<&Transition> {
        let mut v: Vec<&Transition> = self
            .transitions
            .iter()
            .filter(|t| t.flipped_qubit.is_some())
            .collect();
        v.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        v
    }

    /// Single-flip transitions of one qubit, sorted by frequency.
    pub fn flips_of(&self, qubit: usize) -> Vec<&Transition> {
        let mut v: Vec<&Transition> = self
            .transitions
            .iter()
            .filter(|t| t.flipped_qubit == Some(qubit))
            .collect();
        v.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        v
    }
}

/// Enumerate drive-connected transitions of the drift Hamiltonian.
///
/// Pairs enter the table when |<a| sum sigma_i^x |b>| > 1e-10; the matrix
/// pattern of the two-qubit Hamiltonian in its eigenbasis shows exactly the
/// single-flip transitions surviving this threshold.
pub fn transition_frequencies(sys: &SpinSystem) -> TransitionTable {
    let dec = sys.eigendecomposition();
    let v = sys.control_operator();
    let d = sys.dim();

    let dominant_labels: Vec<usize> = (0..d)
        .map(|k| {
            let col = dec.vectors.column(k);
            (0..d).max_by(|&i, &j| col[i].norm().total_cmp(&col[j].norm())).unwrap()
        })
        .collect();

    let mut transitions = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            let va = dec.vectors.column(a);
            let vb = dec.vectors.column(b);
            let mut elem = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    elem += va[i].conj() * v.at(i, j) * vb[j];
                }
            }
            let mag = elem.norm();
            if mag <= 1e-10 {
                continue;
            }
            let la = dominant_labels[a];
            let lb = dominant_labels[b];
            let flipped = if (la ^ lb).count_ones() == 1 {
                Some((la ^ lb).leading_zeros() as usize - (usize::BITS - sys.n_qubits() as u32) as usize)
            } else {
                None
            };
            transitions.push(Transition {
                state_a: a,
                state_b: b,
                frequency: dec.energies[b] - dec.energies[a],
                amplitude_factor: mag,
                flipped_qubit: flipped,
            });
        }
    }
    TransitionTable { transitions, dominant_labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::commutator;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Paper drift used across most scenarios.
    pub fn paper_system() -> SpinSystem {
        SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0)
    }

    #[test]
    fn single_qubit_zeeman_levels() {
        let sys = SpinSystem::new(vec![2.0], vec![vec![0.0]], InteractionKind::Heisenberg).unwrap();
        let dec = sys.eigendecomposition();
        assert_abs_diff_eq!(dec.energies[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.energies[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn uncoupled_two_qubit_levels() {
        let sys = SpinSystem::two_qubit(5.0, 3.0, 0.0);
        let dec = sys.eigendecomposition();
        let expect = [-4.0, -1.0, 1.0, 4.0];
        for (e, x) in dec.energies.iter().zip(expect) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn paper_drift_matches_closed_forms() {
        let sys = paper_system();
        let dec = sys.eigendecomposition();
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(dec.energies[k], ana.energies[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn drift_commutes_with_total_sz() {
        let sys = paper_system();
        let h = sys.drift_hamiltonian();
        let mut sz_tot = Operator::zeros(&[2, 2]);
        for i in 0..2 {
            sz_tot = &sz_tot + &Operator::embed_single_site(&Operator::pauli_z(), i, 2).unwrap().scale_re(0.5);
        }
        assert!(commutator(&h, &sz_tot).max_norm() < 1e-12);
    }

    #[test]
    fn drift_trace_equals_energy_sum() {
        for (sys, _) in [
            (paper_system(), "heisenberg"),
            (
                SpinSystem::new(
                    vec![20.0 * PI, 14.0 * PI],
                    vec![vec![0.0, 5.0], vec![5.0, 0.0]],
                    InteractionKind::Ising,
                )
                .unwrap(),
                "ising",
            ),
        ] {
            let h = sys.drift_hamiltonian();
            let dec = sys.eigendecomposition();
            let esum: f64 = dec.energies.iter().sum();
            assert_abs_diff_eq!(esum, h.trace().re, epsilon = 1e-10);
            assert_abs_diff_eq!(h.trace().re, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn hybridization_close_to_product_states() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        // |01~| components: ~(0.992, 0.129) in magnitude.
        let t01 = &ana.eigenstates[1];
        assert_abs_diff_eq!(t01[1].norm(), 0.992, epsilon = 1e-3);
        assert_abs_diff_eq!(t01[2].norm(), 0.129, epsilon = 1e-3);
        let t10 = &ana.eigenstates[2];
        assert_abs_diff_eq!(t10[1].norm(), 0.129, epsilon = 1e-3);
        assert_abs_diff_eq!(t10[2].norm(), 0.992, epsilon = 1e-3);
    }

    #[test]
    fn decoupling_limit_recovers_product_states() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 1e-6).unwrap();
        assert!(ana.alpha > 1e7);
        // xi1 -> pi/2: |01~> -> -|01>, xi2 -> 0: |10~> -> |10>.
        assert_abs_diff_eq!(ana.eigenstates[1][1].norm(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(ana.eigenstates[2][2].norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn analytic_agrees_with_eigh_over_random_parameters() {
        let mut s = 0.123_f64;
        let mut next = move || {
            s = (s * 16807.0 + 0.5).rem_euclid(1.0);
            s
        };
        for _ in 0..50 {
            let w2 = 5.0 + 40.0 * next();
            let w1 = w2 + 1.0 + 40.0 * next();
            let j = 0.5 + 8.0 * next();
            let sys = SpinSystem::two_qubit(w1, w2, j);
            let dec = sys.eigendecomposition();
            let ana = TwoQubitAnalytic::new(w1, w2, j).unwrap();
            let mut sorted = ana.energies;
            sorted.sort_by(f64::total_cmp);
            for k in 0..4 {
                assert_abs_diff_eq!(dec.energies[k], sorted[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn analytic_rejects_zero_coupling() {
        assert!(TwoQubitAnalytic::new(5.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn sync_ratio_paper_value() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        let r = rabi_sync_ratio(&ana).unwrap();
        assert!((r - 1.3).abs() < 0.05, "ratio = {r}");
    }

    #[test]
    fn sync_ratio_decoupling_limit() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 1e-9).unwrap();
        let r = rabi_sync_ratio(&ana).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sync_equalizes_effective_amplitudes() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        let r = rabi_sync_ratio(&ana).unwrap();
        let omega2 = 0.1;
        let omega1 = r * omega2;
        assert_abs_diff_eq!(omega1 * ana.factor1(), omega2 * ana.factor2(), epsilon = 1e-12);
    }

    #[test]
    fn transition_table_single_flips() {
        let sys = paper_system();
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        let table = transition_frequencies(&sys);
        let flips = table.single_flips();
        assert_eq!(flips.len(), 4);
        let freqs: Vec<f64> = flips.iter().map(|t| t.frequency).collect();
        let expect = [
            ana.omega_rf1(),
            ana.omega_rf2(),
            ana.energies[2] - ana.energies[0],
            ana.energies[3] - ana.energies[1],
        ];
        let mut expect = expect.to_vec();
        expect.sort_by(f64::total_cmp);
        for (f, x) in freqs.iter().zip(&expect) {
            assert_abs_diff_eq!(*f, *x, epsilon = 1e-9);
        }
        // Effective amplitude factors follow the eigenbasis matrix pattern.
        for t in &table.transitions {
            let f1 = ana.factor1();
            let f2 = ana.factor2();
            assert!(
                (t.amplitude_factor - f1).abs() < 1e-9 || (t.amplitude_factor - f2).abs() < 1e-9,
                "unexpected factor {}",
                t.amplitude_factor
            );
        }
    }

    #[test]
    fn transition_frequencies_uncoupled_degenerate() {
        let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 0.0);
        let table = transition_frequencies(&sys);
        let q2: Vec<f64> = table.flips_of(1).iter().map(|t| t.frequency).collect();
        assert_eq!(q2.len(), 2);
        assert_abs_diff_eq!(q2[0], 14.0 * PI, epsilon = 1e-9);
        assert_abs_diff_eq!(q2[1], 14.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn transitions_match_exhaustive_pair_enumeration() {
        let sys = paper_system();
        let dec = sys.eigendecomposition();
        let table = transition_frequencies(&sys);
        for t in &table.transitions {
            let direct = dec.energies[t.state_b] - dec.energies[t.state_a];
            assert_abs_diff_eq!(t.frequency, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn thermal_state_limits() {
        let sys = paper_system();
        let ground = sys.thermal_state(0.0).unwrap();
        assert_abs_diff_eq!(ground.trace().re, 1.0, epsilon = 1e-12);
        let purity = ground.matmul(&ground).trace().re;
        assert_abs_diff_eq!(purity, 1.0, epsilon = 1e-10);

        let hot = sys.thermal_state(1e9).unwrap();
        let expect = Operator::qubit_identity(2).scale_re(0.25);
        assert!((&hot - &expect).max_norm() < 1e-6);
    }

    #[test]
    fn thermal_populations_boltzmann_at_0p4_kelvin() {
        // Direct Boltzmann evaluation oracle at the tabulated temperature.
        let sys = paper_system();
        let dec = sys.eigendecomposition();
        let p = thermal_populations(&dec.energies.to_vec(), 0.4);
        let kt = KB_RAD_PER_NS_PER_K * 0.4;
        let raw: Vec<f64> = dec.energies.iter().map(|&e| (-(e - dec.energies[0]) / kt).exp()).collect();
        let z: f64 = raw.iter().sum();
        for k in 0..4 {
            assert_abs_diff_eq!(p[k], raw[k] / z, epsilon = 1e-14);
        }
        // Populations descend with energy and the ground state dominates.
        assert!(p[0] > 0.99 && p[1] < 0.01);
        for w in p.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}
