//! Time evolution.
//!
//! Closed systems use the Trotter product U(tau) = prod_n exp(-i H(t_n) dt)
//! with the pulse held constant on each segment, which makes every segment
//! exponential exact. Open systems evolve density matrices under the GKSL
//! master equation
//!
//!   drho/dt = -i[H(t), rho] + sum_k (L_k rho L_k^+ - {L_k^+ L_k, rho}/2)
//!
//! by exponentiating the vectorized generator segment by segment. Both paths
//! are deterministic: the same pulse always produces bitwise-identical
//! trajectories.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{expm_action_matrix, Operator, State, I0};
use crate::pulse::SampledPulse;
use crate::spin::{transition_frequencies, SpinSystem};
use crate::units::KB_RAD_PER_NS_PER_K;

/// Reference frame of a stored trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Interaction,
}

/// Density-matrix trajectory on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
    pub frame: Frame,
}

impl Trajectory {
    pub fn final_state(&self) -> &Operator {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Per-segment unitary steps for a drift + single-control Hamiltonian.
pub struct ClosedStepper {
    h0: Operator,
    control: Operator,
    dt: f64,
}

impl ClosedStepper {
    pub fn new(h0: Operator, control: Operator, dt: f64) -> Self {
        Self { h0, control, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// exp(-i (H0 + u V) dt).
    pub fn step_matrix(&self, u: f64) -> Operator {
        let h = &self.h0 + &self.control.scale_re(u);
        h.scale(Complex64::new(0.0, -self.dt)).expm().expect("finite Hamiltonian")
    }
}

/// Total propagator U(tau) for a sampled pulse.
pub fn trotter_propagator(h0: &Operator, control: &Operator, pulse: &SampledPulse) -> Result<Operator> {
    let stepper = ClosedStepper::new(h0.clone(), control.clone(), pulse.dt());
    let mut u = Operator::identity(h0.dims());
    for &s in pulse.samples() {
        if !s.is_finite() {
            return Err(Error::InvalidParameter("non-finite pulse sample".into()));
        }
        u = stepper.step_matrix(s).matmul(&u);
    }
    Ok(u)
}

/// Propagators U(t_n) at every grid point, U(0) = I first.
pub fn trotter_trajectory(h0: &Operator, control: &Operator, pulse: &SampledPulse) -> Result<Vec<Operator>> {
    let stepper = ClosedStepper::new(h0.clone(), control.clone(), pulse.dt());
    let mut out = Vec::with_capacity(pulse.len() + 1);
    let mut u = Operator::identity(h0.dims());
    out.push(u.clone());
    for &s in pulse.samples() {
        if !s.is_finite() {
            return Err(Error::InvalidParameter("non-finite pulse sample".into()));
        }
        u = stepper.step_matrix(s).matmul(&u);
        out.push(u.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Relaxation,
    Dephasing,
}

/// One dissipation channel acting on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseChannel {
    pub qubit: usize,
    pub kind: ChannelKind,
    /// T1 for relaxation, T_phi for dephasing, in ns. Infinity disables the
    /// channel.
    pub time_constant: f64,
    /// Transition energy in rad/ns entering the thermal balance of a
    /// relaxation channel; ignored for dephasing.
    pub transition_energy: f64,
    /// Bath temperature in kelvin; 0 gives pure decay.
    pub temperature: f64,
}

impl CollapseChannel {
    pub fn relaxation(qubit: usize, t1: f64, transition_energy: f64, temperature: f64) -> Self {
        Self { qubit, kind: ChannelKind::Relaxation, time_constant: t1, transition_energy, temperature }
    }

    pub fn dephasing(qubit: usize, t_phi: f64) -> Self {
        Self { qubit, kind: ChannelKind::Dephasing, time_constant: t_phi, transition_energy: 0.0, temperature: 0.0 }
    }

    /// Excitation and decay rates (gamma_plus, gamma_minus) of a relaxation
    /// channel: gamma_+ + gamma_- = 1/T1 with the Boltzmann split
    /// gamma_+ / (gamma_+ + gamma_-) = 1 / (1 + exp(de/kT)).
    pub fn relaxation_rates(&self) -> (f64, f64) {
        let total = 1.0 / self.time_constant;
        if self.temperature <= 0.0 {
            return (0.0, total);
        }
        let x = self.transition_energy / (KB_RAD_PER_NS_PER_K * self.temperature);
        let up = total / (1.0 + x.exp());
        (up, total - up)
    }
}

/// Basis in which collapse operators act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseBasis {
    /// Plain sigma operators in the product basis.
    Product,
    /// The sigma pattern rewritten between drift eigenstates, matched to
    /// product labels by dominant overlap.
    Eigen,
}

/// Default transition energy per qubit: among its single-flip transitions,
/// the one involving the lowest-index eigenstate.
pub fn default_transition_energies(sys: &SpinSystem) -> Vec<f64> {
    let table = transition_frequencies(sys);
    (0..sys.n_qubits())
        .map(|q| {
            table
                .flips_of(q)
                .iter()
                .min_by_key(|t| t.state_a)
                .map(|t| t.frequency)
                .unwrap_or(sys.larmor[q])
        })
        .collect()
}

/// Build collapse operators for a set of channels.
///
/// Relaxation: L = sqrt(g+) s+ + sqrt(g-) s- on the channel's qubit.
/// Dephasing: L = sqrt(1/(2 T_phi)) sz. Channels with zero total rate are
/// omitted. With `CollapseBasis::Eigen` the sigma pattern is conjugated into
/// the drift eigenbasis.
pub fn build_collapse_operators(
    channels: &[CollapseChannel],
    basis: CollapseBasis,
    drift: &Operator,
) -> Result<Vec<Operator>> {
    let n = drift.n_qubits();
    let to_eigen = match basis {
        CollapseBasis::Product => None,
        CollapseBasis::Eigen => Some(eigenbasis_pattern_map(drift)?),
    };
    let mut out = Vec::new();
    for ch in channels {
        if ch.qubit >= n {
            return Err(Error::SiteOutOfRange { site: ch.qubit, n_sites: n });
        }
        if ch.time_constant <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "channel time constant must be positive, got {}",
                ch.time_constant
            )));
        }
        if ch.time_constant.is_infinite() {
            continue;
        }
        let op = match ch.kind {
            ChannelKind::Relaxation => {
                let (up, down) = ch.relaxation_rates();
                let plus = Operator::embed_single_site(&Operator::sigma_plus(), ch.qubit, n)?;
                let minus = Operator::embed_single_site(&Operator::sigma_minus(), ch.qubit, n)?;
                &plus.scale_re(up.sqrt()) + &minus.scale_re(down.sqrt())
            }
            ChannelKind::Dephasing => {
                let sz = Operator::embed_single_site(&Operator::pauli_z(), ch.qubit, n)?;
                sz.scale_re((0.5 / ch.time_constant).sqrt())
            }
        };
        let op = match &to_eigen {
            Some(w) => w.matmul(&op).matmul(&w.dagger()),
            None => op,
        };
        if op.max_norm() > 0.0 {
            out.push(op);
        }
    }
    Ok(out)
}

/// W = sum_a |psi_a><prod(a)| mapping each product label to the eigenstate
/// it dominates, so W P W^+ has the matrix elements of pattern P between
/// eigenstates.
fn eigenbasis_pattern_map(drift: &Operator) -> Result<Operator> {
    let dec = drift.eigh()?;
    let d = dec.dim();
    let labels: Vec<usize> = (0..d)
        .map(|k| {
            let col = dec.vectors.column(k);
            (0..d).max_by(|&i, &j| col[i].norm().total_cmp(&col[j].norm())).unwrap()
        })
        .collect();
    let mut seen = vec![false; d];
    for &l in &labels {
        if seen[l] {
            return Err(Error::InvalidParameter(
                "drift eigenstates do not map one-to-one onto product labels; eigenbasis collapse operators are ambiguous".into(),
            ));
        }
        seen[l] = true;
    }
    let mut m = Array2::<Complex64>::zeros((d, d));
    for a in 0..d {
        for i in 0..d {
            m[[i, labels[a]]] = dec.vectors[[i, a]];
        }
    }
    Operator::new(m, drift.dims().to_vec())
}

fn kron_raw(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let z = a[[i, j]];
            if z == I0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = z * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Row-major vectorization: vec(rho)[i*d + j] = rho[i, j].
pub fn vectorize(rho: &Operator) -> State {
    let d = rho.dim();
    let mut v = State::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = rho.at(i, j);
        }
    }
    v
}

pub fn unvectorize(v: &State, dims: &[usize]) -> Operator {
    let d: usize = dims.iter().product();
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[[i, j]] = v[i * d + j];
        }
    }
    Operator::new(m, dims.to_vec()).expect("dims consistent")
}

/// Vectorized GKSL generator, split into a constant drift part and the
/// control part that scales linearly with the pulse.
pub struct Liouvillian {
    dims: Vec<usize>,
    m_drift: Array2<Complex64>,
    m_ctrl: Array2<Complex64>,
}

impl Liouvillian {
    pub fn new(h0: &Operator, control: &Operator, collapse: &[Operator]) -> Self {
        let d = h0.dim();
        let eye: Array2<Complex64> = Array2::eye(d);
        let ham_part = |h: &Operator| -> Array2<Complex64> {
            let left = kron_raw(h.matrix(), &eye);
            let right = kron_raw(&eye, &h.matrix().t().to_owned());
            (left - right).mapv(|z| z * Complex64::new(0.0, -1.0))
        };
        let mut m_drift = ham_part(h0);
        for l in collapse {
            let lbar = l.conj();
            let ldl = l.dagger().matmul(l);
            let jump = kron_raw(l.matrix(), lbar.matrix());
            let left = kron_raw(ldl.matrix(), &eye).mapv(|z| z * 0.5);
            let right = kron_raw(&eye, &ldl.matrix().t().to_owned()).mapv(|z| z * 0.5);
            m_drift = m_drift + jump - left - right;
        }
        Self {
            dims: h0.dims().to_vec(),
            m_drift,
            m_ctrl: ham_part(control),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Generator matrix at control amplitude u.
    pub fn generator(&self, u: f64) -> Array2<Complex64> {
        &self.m_drift + &self.m_ctrl.mapv(|z| z * u)
    }

    /// Advance vectorized states by exp(M(u) dt).
    pub fn step(&self, u: f64, dt: f64, states: &mut [State]) {
        let m = self.generator(u);
        expm_action_matrix(&m, Complex64::new(dt, 0.0), states);
    }

    /// Advance vectorized co-states by exp(M(u)^+ dt) (adjoint generator,
    /// used backward in time).
    pub fn step_adjoint(&self, u: f64, dt: f64, states: &mut [State]) {
        let m = self.generator(u);
        let madj = Array2::from_shape_fn(m.dim(), |(i, j)| m[[j, i]].conj());
        expm_action_matrix(&madj, Complex64::new(dt, 0.0), states);
    }

    /// Matrix of the segment propagator exp(M(u) dt).
    pub fn step_matrix(&self, u: f64, dt: f64) -> Array2<Complex64> {
        let m = self.generator(u).mapv(|z| z * dt);
        crate::operator::expm_matrix(&m)
    }
}

/// Integrate the master equation for a sampled pulse, storing the state at
/// every grid point.
pub fn lindblad_propagate(
    h0: &Operator,
    control: &Operator,
    pulse: &SampledPulse,
    collapse: &[Operator],
    rho0: &Operator,
) -> Result<Trajectory> {
    let liou = Liouvillian::new(h0, control, collapse);
    let dt = pulse.dt();
    let mut v = vec![vectorize(rho0)];
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for (n, &u) in pulse.samples().iter().enumerate() {
        liou.step(u, dt, &mut v);
        times.push((n + 1) as f64 * dt);
        states.push(unvectorize(&v[0], h0.dims()));
    }
    Ok(Trajectory { times, states, frame: Frame::Lab })
}

/// Final states of several initial density matrices under the same pulse.
///
/// All states share each segment's propagator; when many states are in
/// flight the propagator matrix is formed once per segment instead of
/// applying the exponential action per state.
pub fn lindblad_propagate_many(
    h0: &Operator,
    control: &Operator,
    pulse: &SampledPulse,
    collapse: &[Operator],
    initial: &[Operator],
) -> Result<Vec<Operator>> {
    let liou = Liouvillian::new(h0, control, collapse);
    let dt = pulse.dt();
    let d2 = liou.hilbert_dim() * liou.hilbert_dim();
    let mut vs: Vec<State> = initial.iter().map(vectorize).collect();
    let use_matrix = vs.len() * 16 >= d2;
    if use_matrix {
        // Stack states as columns and advance with one matrix product per
        // segment.
        let mut stack = Array2::<Complex64>::zeros((d2, vs.len()));
        for (c, v) in vs.iter().enumerate() {
            for r in 0..d2 {
                stack[[r, c]] = v[r];
            }
        }
        for &u in pulse.samples() {
            let e = liou.step_matrix(u, dt);
            stack = e.dot(&stack);
        }
        for (c, v) in vs.iter_mut().enumerate() {
            for r in 0..d2 {
                v[r] = stack[[r, c]];
            }
        }
    } else {
        for &u in pulse.samples() {
            liou.step(u, dt, &mut vs);
        }
    }
    Ok(vs.iter().map(|v| unvectorize(v, h0.dims())).collect())
}

/// rho_I(t) = exp(i H0 t) rho(t) exp(-i H0 t), removing drift phases.
pub fn to_interaction_picture(traj: &Trajectory, h0: &Operator) -> Result<Trajectory> {
    let dec = h0.eigh()?;
    let d = dec.dim();
    let rotate = |t: f64, rho: &Operator| -> Operator {
        let mut u = Array2::<Complex64>::zeros((d, d));
        for k in 0..d {
            let ph = Complex64::new(0.0, dec.energies[k] * t).exp();
            let col = dec.vectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    u[[i, j]] += col[i] * ph * col[j].conj();
                }
            }
        }
        let u = Operator::new(u, rho.dims().to_vec()).expect("square");
        u.conjugate(rho)
    };
    Ok(Trajectory {
        times: traj.times.clone(),
        states: traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, rho)| rotate(t, rho))
            .collect(),
        frame: Frame::Interaction,
    })
}

/// Per-time expectation values (<sx>, <sy>, <sz>) of one qubit's reduced
/// state.
pub fn bloch_vector(traj: &Trajectory, qubit: usize) -> Result<Vec<[f64; 3]>> {
    let n = traj.states.first().map(|s| s.n_qubits()).unwrap_or(0);
    if qubit >= n {
        return Err(Error::SiteOutOfRange { site: qubit, n_sites: n });
    }
    let sx = Operator::pauli_x();
    let sy = Operator::pauli_y();
    let sz = Operator::pauli_z();
    traj.states
        .iter()
        .map(|rho| {
            let red = rho.partial_trace(&[qubit])?;
            Ok([
                red.trace_product(&sx).re,
                red.trace_product(&sy).re,
                red.trace_product(&sz).re,
            ])
        })
        .collect()
}
