//! Krotov optimal control: monotonic iterative pulse updates for closed
//! gate/state objectives and for open-system objectives evolving density
//! matrices under the master equation.
//!
//! Each iteration backward-propagates co-states from the terminal condition
//! chi_k(tau) = -dJ_T/d<phi_k(tau)| under the current pulse, then sweeps
//! forward applying the first-order sequential update with immediate
//! feedback,
//!
//!   du(t) = (S(t)/lambda_a) Im sum_k <chi_k(t)| dH/du |phi_k(t)>,
//!
//! where the already-updated amplitude drives each forward step. The running
//! cost (lambda_a / S(t)) (u - u_ref)^2 with u_ref the previous pulse makes
//! the cost functional non-increasing for any lambda_a > 0.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{closed_gate_fidelity, state_fidelity};
use crate::operator::{inner, Operator, State, I0};
use crate::propagate::{vectorize, ClosedStepper, Liouvillian};
use crate::pulse::SampledPulse;

/// |dJ_T| per-iteration stationarity tolerance for closed systems.
pub const DEFAULT_TOL_CLOSED: f64 = 1e-6;
/// |dJ_T| per-iteration stationarity tolerance for open systems.
pub const DEFAULT_TOL_OPEN: f64 = 1e-3;

/// What the optimizer drives toward.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Drive a full orthonormal basis onto target states U_target |phi_k>.
    ClosedGate {
        /// Basis states phi_k spanning the register (drift eigenstates in
        /// the built-in scenarios).
        basis: Vec<State>,
        /// Target unitary at final time (lab-frame dressed by the caller).
        target: Operator,
    },
    /// Drive one pure state onto another.
    ClosedStateToState { initial: State, target: State },
    /// Open-system gate through three encoded density matrices: minimizes
    /// 1 - sum_i w_i / Tr[rho_i(0)^2] Re Tr[U rho_i(0) U^+ rho_i(T)].
    OpenGate {
        encoded: Vec<Operator>,
        weights: Vec<f64>,
        target: Operator,
        collapse: Vec<Operator>,
    },
    /// Drive a density matrix toward a pure target state.
    OpenStateToState {
        initial: Operator,
        target: State,
        collapse: Vec<Operator>,
    },
}

impl Objective {
    pub fn is_open(&self) -> bool {
        matches!(self, Objective::OpenGate { .. } | Objective::OpenStateToState { .. })
    }

    pub fn default_tolerance(&self) -> f64 {
        if self.is_open() {
            DEFAULT_TOL_OPEN
        } else {
            DEFAULT_TOL_CLOSED
        }
    }
}

/// Standard encoded density matrices for open-system gate optimization over
/// a d-dimensional basis: a diagonal state with decreasing weights
/// 2(d+1-i)/(d(d+1)), the uniform full-coherence projector, and I/d.
pub fn default_encoded_states(basis: &[State], dims: &[usize]) -> Result<Vec<Operator>> {
    let d = basis.len();
    let dim: usize = dims.iter().product();
    if d == 0 || basis.iter().any(|b| b.len() != dim) {
        return Err(Error::DimensionMismatch("encoded-state basis mismatch".into()));
    }
    let mut rho1 = Operator::zeros(dims);
    for (i, b) in basis.iter().enumerate() {
        let w = 2.0 * (d - i) as f64 / (d * (d + 1)) as f64;
        rho1 = &rho1 + &Operator::projector(b, dims)?.scale_re(w);
    }
    let mut s = State::zeros(dim);
    for b in basis {
        s = s + b;
    }
    crate::operator::normalize(&mut s);
    let rho2 = Operator::projector(&s, dims)?;
    let rho3 = Operator::identity(dims).scale_re(1.0 / dim as f64);
    Ok(vec![rho1, rho2, rho3])
}

/// Default weights (20, 1, 1)/22 for the three encoded states.
pub fn default_encoded_weights() -> Vec<f64> {
    vec![20.0 / 22.0, 1.0 / 22.0, 1.0 / 22.0]
}

/// A full optimization setup.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub h0: Operator,
    pub control: Operator,
    pub objective: Objective,
    pub guess: SampledPulse,
    /// Inverse step width; larger values take smaller pulse updates.
    pub lambda_a: f64,
    /// Update shape S(t) in [0, 1], zero at both endpoints, on the same
    /// grid as the guess.
    pub update_shape: SampledPulse,
    pub max_iterations: usize,
    /// Stationarity tolerance on |dJ_T| used to pick the best iteration
    /// after the run. The loop itself runs the full iteration budget (the
    /// update can pass through long shallow stretches before breaking out
    /// of a stationary guess), stopping early only at an exact fixed point.
    pub stop_tolerance: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub j_t: f64,
    pub fidelity: f64,
    /// Largest |du| applied in this iteration (0 for the guess record).
    pub max_update: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The update vanished identically; the pulse is an exact fixed point.
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    #[serde(skip)]
    pub pulse: SampledPulse,
    /// trace[0] evaluates the guess; trace[i] the pulse after iteration i.
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl OptimizationResult {
    pub fn final_fidelity(&self) -> f64 {
        self.trace.last().map(|r| r.fidelity).unwrap_or(0.0)
    }

    pub fn final_j_t(&self) -> f64 {
        self.trace.last().map(|r| r.j_t).unwrap_or(f64::NAN)
    }

    /// Earliest iteration whose J_T is within `tolerance` of the minimum.
    pub fn best_iteration(&self, tolerance: f64) -> usize {
        let jts: Vec<f64> = self.trace.iter().map(|r| r.j_t).collect();
        convergence_monitor(&jts, tolerance).0
    }
}

/// J_T = 1 - (1/N) Re sum_k <target_k | final_k>.
pub fn gate_functional_closed(finals: &[State], targets: &[State]) -> f64 {
    let n = finals.len() as f64;
    let re_sum: f64 = finals.iter().zip(targets).map(|(f, t)| inner(t, f).re).sum();
    1.0 - re_sum / n
}

/// Open-system functional over encoded states:
/// J_T = 1 - sum_i (w_i / Tr[rho_i(0)^2]) Re Tr[U rho_i(0) U^+ rho_i(T)].
pub fn open_functional(
    encoded_initial: &[Operator],
    encoded_final: &[Operator],
    target: &Operator,
    weights: &[f64],
) -> Result<f64> {
    if encoded_initial.len() != encoded_final.len() || encoded_initial.len() != weights.len() {
        return Err(Error::DimensionMismatch(
            "encoded states and weights must have equal length".into(),
        ));
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "encoded-state weights must sum to 1, got {wsum}"
        )));
    }
    let mut acc = 0.0;
    for ((rho0, rho_t), &w) in encoded_initial.iter().zip(encoded_final).zip(weights) {
        let purity = rho0.matmul(rho0).trace().re;
        let sigma = target.conjugate(rho0);
        acc += w / purity * sigma.trace_product(rho_t).re;
    }
    Ok(1.0 - acc)
}

/// Trace analysis: earliest index within `tolerance` of the minimum, and
/// whether the trace ended stationary (|dJ_T| of the final step below
/// `tolerance`). A single-entry trace counts as stationary.
pub fn convergence_monitor(j_t_trace: &[f64], tolerance: f64) -> (usize, bool) {
    if j_t_trace.is_empty() {
        return (0, false);
    }
    let min = j_t_trace.iter().cloned().fold(f64::INFINITY, f64::min);
    let best = j_t_trace
        .iter()
        .position(|&j| j <= min + tolerance)
        .unwrap_or(j_t_trace.len() - 1);
    let converged = match j_t_trace.len() {
        1 => true,
        n => (j_t_trace[n - 1] - j_t_trace[n - 2]).abs() < tolerance,
    };
    (best, converged)
}

/// Run the Krotov loop.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    validate(problem)?;
    match &problem.objective {
        Objective::ClosedGate { .. } | Objective::ClosedStateToState { .. } => optimize_closed(problem),
        Objective::OpenGate { .. } | Objective::OpenStateToState { .. } => optimize_open(problem),
    }
}

fn validate(problem: &OptimizationProblem) -> Result<()> {
    if problem.lambda_a <= 0.0 {
        return Err(Error::InvalidParameter("lambda_a must be positive".into()));
    }
    let s = &problem.update_shape;
    if s.len() != problem.guess.len() || (s.dt() - problem.guess.dt()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "update shape must live on the guess pulse's grid".into(),
        ));
    }
    if s.samples().iter().any(|&x| !(0.0..=1.0 + 1e-12).contains(&x)) {
        return Err(Error::InvalidParameter("update shape must lie in [0, 1]".into()));
    }
    if s.samples()[0].abs() > 1e-12 || s.samples()[s.len() - 1].abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "update shape must vanish at both pulse endpoints".into(),
        ));
    }
    Ok(())
}

/// Fidelity reported alongside J_T in the iteration trace.
fn closed_fidelity(objective: &Objective, finals: &[State], dims: &[usize]) -> Result<f64> {
    match objective {
        Objective::ClosedGate { basis, target } => {
            // Assemble U(tau) from the propagated basis columns.
            let dim: usize = dims.iter().product();
            let mut u = Array2::<Complex64>::zeros((dim, dim));
            for (phi, b) in finals.iter().zip(basis) {
                for i in 0..dim {
                    for j in 0..dim {
                        u[[i, j]] += phi[i] * b[j].conj();
                    }
                }
            }
            closed_gate_fidelity(&Operator::new(u, dims.to_vec())?, target)
        }
        Objective::ClosedStateToState { target, .. } => Ok(inner(target, &finals[0]).norm_sqr()),
        _ => unreachable!("closed fidelity on open objective"),
    }
}

fn optimize_closed(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let (initial_states, targets): (Vec<State>, Vec<State>) = match &problem.objective {
        Objective::ClosedGate { basis, target } => {
            (basis.clone(), basis.iter().map(|b| target.apply(b)).collect())
        }
        Objective::ClosedStateToState { initial, target } => {
            (vec![initial.clone()], vec![target.clone()])
        }
        _ => unreachable!(),
    };
    let k = initial_states.len();
    let n_half = 0.5 / k as f64; // chi(tau) = (1/2N) |target>
    let stepper = ClosedStepper::new(problem.h0.clone(), problem.control.clone(), problem.guess.dt());
    let n_t = problem.guess.len();
    let dims = problem.h0.dims().to_vec();

    let forward_eval = |pulse: &SampledPulse| -> Vec<State> {
        let mut phi = initial_states.clone();
        for &u in pulse.samples() {
            let step = stepper.step_matrix(u);
            for p in phi.iter_mut() {
                *p = step.apply(p);
            }
        }
        phi
    };

    let mut pulse = problem.guess.clone();
    let finals = forward_eval(&pulse);
    let mut j_t = gate_functional_closed(&finals, &targets);
    let mut trace = vec![IterationRecord {
        j_t,
        fidelity: closed_fidelity(&problem.objective, &finals, &dims)?,
        max_update: 0.0,
    }];

    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations_run = 0;
    for iter in 1..=problem.max_iterations {
        // Backward sweep under the current pulse, storing chi at grid points.
        let mut chi: Vec<Vec<State>> = vec![Vec::new(); n_t + 1];
        let mut cur: Vec<State> = targets.iter().map(|t| t.mapv(|z| z * n_half)).collect();
        chi[n_t] = cur.clone();
        for n in (0..n_t).rev() {
            let step = stepper.step_matrix(pulse.samples()[n]).dagger();
            for c in cur.iter_mut() {
                *c = step.apply(c);
            }
            chi[n] = cur.clone();
        }

        // Forward sweep with immediate feedback.
        let mut phi = initial_states.clone();
        let mut new_pulse = pulse.clone();
        let mut max_update = 0.0_f64;
        for n in 0..n_t {
            let gate = problem.update_shape.samples()[n] / problem.lambda_a;
            let du = if gate == 0.0 {
                0.0
            } else {
                let mut g = 0.0;
                for (c, p) in chi[n].iter().zip(&phi) {
                    let vp = problem.control.apply(p);
                    g += inner(c, &vp).im;
                }
                gate * g
            };
            max_update = max_update.max(du.abs());
            new_pulse.samples_mut()[n] = pulse.samples()[n] + du;
            let step = stepper.step_matrix(new_pulse.samples()[n]);
            for p in phi.iter_mut() {
                *p = step.apply(p);
            }
        }

        let j_new = gate_functional_closed(&phi, &targets);
        if j_new > j_t + 1e-9 {
            return Err(Error::NonMonotonicStep { iteration: iter, increase: j_new - j_t });
        }
        pulse = new_pulse;
        iterations_run = iter;
        j_t = j_new;
        trace.push(IterationRecord {
            j_t,
            fidelity: closed_fidelity(&problem.objective, &phi, &dims)?,
            max_update,
        });
        if max_update < 1e-14 * pulse.max_abs().max(1.0) {
            stop_reason = StopReason::Stationary;
            break;
        }
    }

    let jts: Vec<f64> = trace.iter().map(|r| r.j_t).collect();
    let (_, converged) = convergence_monitor(&jts, problem.stop_tolerance);
    Ok(OptimizationResult {
        pulse,
        trace,
        iterations_run,
        converged: converged || stop_reason == StopReason::Stationary,
        stop_reason,
    })
}

fn optimize_open(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let (initial_states, terminal_costates, collapse): (Vec<Operator>, Vec<Operator>, &[Operator]) =
        match &problem.objective {
            Objective::OpenGate { encoded, weights, target, collapse } => {
                if encoded.len() != weights.len() {
                    return Err(Error::DimensionMismatch(
                        "encoded states and weights must have equal length".into(),
                    ));
                }
                // chi_i(T) = (w_i / (2 Tr[rho_i(0)^2])) U rho_i(0) U^+
                let costates = encoded
                    .iter()
                    .zip(weights)
                    .map(|(rho0, &w)| {
                        let purity = rho0.matmul(rho0).trace().re;
                        target.conjugate(rho0).scale_re(0.5 * w / purity)
                    })
                    .collect();
                (encoded.clone(), costates, collapse.as_slice())
            }
            Objective::OpenStateToState { initial, target, collapse } => {
                let proj = Operator::projector(target, initial.dims())?;
                (vec![initial.clone()], vec![proj.scale_re(0.5)], collapse.as_slice())
            }
            _ => unreachable!(),
        };

    let liou = Liouvillian::new(&problem.h0, &problem.control, collapse);
    let n_t = problem.guess.len();
    let dt = problem.guess.dt();
    let dims = problem.h0.dims().to_vec();
    let d2 = liou.hilbert_dim() * liou.hilbert_dim();

    let initial_vecs: Vec<State> = initial_states.iter().map(vectorize).collect();
    let costate_vecs: Vec<State> = terminal_costates.iter().map(vectorize).collect();

    let j_t_of = |final_vecs: &[State]| -> Result<f64> {
        let finals: Vec<Operator> =
            final_vecs.iter().map(|v| crate::propagate::unvectorize(v, &dims)).collect();
        match &problem.objective {
            Objective::OpenGate { encoded, weights, target, .. } => {
                open_functional(encoded, &finals, target, weights)
            }
            Objective::OpenStateToState { target, .. } => {
                Ok(1.0 - state_fidelity(&finals[0], target))
            }
            _ => unreachable!(),
        }
    };
    let fidelity_of = |j_t: f64, final_vecs: &[State]| -> f64 {
        match &problem.objective {
            Objective::OpenStateToState { target, .. } => {
                state_fidelity(&crate::propagate::unvectorize(&final_vecs[0], &dims), target)
            }
            _ => 1.0 - j_t,
        }
    };

    // Gradient coupling: Re<<chi | M_ctrl | rho>> where M_ctrl is the
    // vectorized control generator -i[V, .].
    let m_ctrl = {
        let zero = Operator::zeros(&dims);
        let pure_ctrl = Liouvillian::new(&zero, &problem.control, &[]);
        pure_ctrl.generator(1.0)
    };

    let forward_eval = |pulse: &SampledPulse| -> Vec<State> {
        let mut rho = initial_vecs.clone();
        for &u in pulse.samples() {
            liou.step(u, dt, &mut rho);
        }
        rho
    };

    let mut pulse = problem.guess.clone();
    let finals = forward_eval(&pulse);
    let mut j_t = j_t_of(&finals)?;
    let mut trace = vec![IterationRecord {
        j_t,
        fidelity: fidelity_of(j_t, &finals),
        max_update: 0.0,
    }];

    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations_run = 0;
    for iter in 1..=problem.max_iterations {
        // Backward co-state sweep under the current pulse.
        let mut chi: Vec<Vec<State>> = vec![Vec::new(); n_t + 1];
        let mut cur = costate_vecs.clone();
        chi[n_t] = cur.clone();
        for n in (0..n_t).rev() {
            liou.step_adjoint(pulse.samples()[n], dt, &mut cur);
            chi[n] = cur.clone();
        }

        // Forward sweep with immediate feedback.
        let mut rho = initial_vecs.clone();
        let mut new_pulse = pulse.clone();
        let mut max_update = 0.0_f64;
        for n in 0..n_t {
            let gate = problem.update_shape.samples()[n] / problem.lambda_a;
            let du = if gate == 0.0 {
                0.0
            } else {
                let mut g = 0.0;
                for (c, r) in chi[n].iter().zip(&rho) {
                    let mut acc = I0;
                    for row in 0..d2 {
                        let mut mv = I0;
                        for col in 0..d2 {
                            mv += m_ctrl[[row, col]] * r[col];
                        }
                        acc += c[row].conj() * mv;
                    }
                    g += acc.re;
                }
                gate * g
            };
            max_update = max_update.max(du.abs());
            new_pulse.samples_mut()[n] = pulse.samples()[n] + du;
            liou.step(new_pulse.samples()[n], dt, &mut rho);
        }

        let j_new = j_t_of(&rho)?;
        if j_new > j_t + 1e-9 {
            return Err(Error::NonMonotonicStep { iteration: iter, increase: j_new - j_t });
        }
        pulse = new_pulse;
        iterations_run = iter;
        j_t = j_new;
        trace.push(IterationRecord {
            j_t,
            fidelity: fidelity_of(j_t, &rho),
            max_update,
        });
        if max_update < 1e-14 * pulse.max_abs().max(1.0) {
            stop_reason = StopReason::Stationary;
            break;
        }
    }

    let jts: Vec<f64> = trace.iter().map(|r| r.j_t).collect();
    let (_, converged) = convergence_monitor(&jts, problem.stop_tolerance);
    Ok(OptimizationResult {
        pulse,
        trace,
        iterations_run,
        converged: converged || stop_reason == StopReason::Stationary,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::not_gate;
    use crate::operator::basis_ket;
    use crate::propagate::{build_collapse_operators, CollapseBasis, CollapseChannel};
    use crate::pulse::flattop;
    use crate::spin::SpinSystem;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn paper_system() -> SpinSystem {
        SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0)
    }

    fn update_shape(duration: f64, dt: f64) -> SampledPulse {
        flattop(duration, 1.0, 0.05 * duration, dt).unwrap()
    }

    fn closed_not_problem(tau: f64, dt: f64, iters: usize) -> OptimizationProblem {
        let sys = paper_system();
        let h0 = sys.drift_hamiltonian();
        let dec = h0.eigh().unwrap();
        let gate = not_gate(&dec, 2, 1).unwrap();
        let target = crate::metrics::lab_frame_target(&gate, &dec, tau);
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        OptimizationProblem {
            h0,
            control: sys.control_operator(),
            objective: Objective::ClosedGate { basis, target },
            guess: flattop(tau, 0.05, 0.05 * tau, dt).unwrap(),
            lambda_a: 10.0,
            update_shape: update_shape(tau, dt),
            max_iterations: iters,
            stop_tolerance: DEFAULT_TOL_CLOSED,
        }
    }

    /// Forward-propagate a closed problem and evaluate J_T.
    fn closed_j_t(problem: &OptimizationProblem, pulse: &SampledPulse) -> f64 {
        let (initial, targets): (Vec<State>, Vec<State>) = match &problem.objective {
            Objective::ClosedGate { basis, target } => {
                (basis.clone(), basis.iter().map(|b| target.apply(b)).collect())
            }
            Objective::ClosedStateToState { initial, target } => {
                (vec![initial.clone()], vec![target.clone()])
            }
            _ => unreachable!(),
        };
        let u = crate::propagate::trotter_propagator(&problem.h0, &problem.control, pulse).unwrap();
        let finals: Vec<State> = initial.iter().map(|s| u.apply(s)).collect();
        gate_functional_closed(&finals, &targets)
    }

    #[test]
    fn already_optimal_guess_keeps_floor() {
        // Target the drift evolution itself with a zero pulse: the guess is
        // exactly optimal and the update must vanish.
        let sys = paper_system();
        let h0 = sys.drift_hamiltonian();
        let dec = h0.eigh().unwrap();
        let tau = 2.0;
        let target = crate::metrics::lab_frame_target(&Operator::qubit_identity(2), &dec, tau);
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        let problem = OptimizationProblem {
            h0,
            control: sys.control_operator(),
            objective: Objective::ClosedGate { basis, target },
            guess: SampledPulse::zeros(tau, 0.01).unwrap(),
            lambda_a: 1.0,
            update_shape: update_shape(tau, 0.01),
            max_iterations: 3,
            stop_tolerance: 0.0,
        };
        let res = optimize(&problem).unwrap();
        assert!(res.trace[0].j_t < 1e-8);
        for rec in &res.trace[1..] {
            assert!(rec.max_update < 1e-8, "update {} should vanish", rec.max_update);
            assert!(rec.j_t <= res.trace[0].j_t + 1e-9);
        }
    }

    #[test]
    fn closed_not_gate_improves_and_is_monotone() {
        // The flattop start sits near a stationary point of the functional;
        // the escape takes a few hundred iterations before J_T collapses.
        let res = optimize(&closed_not_problem(50.0, 0.02, 500)).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].j_t <= w[0].j_t + 1e-9, "non-monotone step");
        }
        assert!(
            res.final_j_t() < 0.2 * res.trace[0].j_t,
            "J_T barely moved: {} -> {}",
            res.trace[0].j_t,
            res.final_j_t()
        );
    }

    #[test]
    fn closed_update_matches_finite_difference_gradient() {
        // With a huge lambda_a the first iteration stays in the linear
        // regime; the predicted first-order change sum_n (dJ/du_n) du_n must
        // match the actual change of J_T.
        let mut problem = closed_not_problem(2.0, 0.02, 1);
        problem.guess = flattop(2.0, 0.3, 0.2, 0.02).unwrap();
        problem.lambda_a = 1e6;
        let res = optimize(&problem).unwrap();
        let actual = res.trace[1].j_t - res.trace[0].j_t;
        assert!(actual < 0.0, "first step must not increase J_T");

        let eps = 1e-6;
        let mut predicted = 0.0;
        for n in 0..problem.guess.len() {
            let du = res.pulse.samples()[n] - problem.guess.samples()[n];
            if du == 0.0 {
                continue;
            }
            let mut up = problem.guess.clone();
            up.samples_mut()[n] += eps;
            let mut down = problem.guess.clone();
            down.samples_mut()[n] -= eps;
            let grad = (closed_j_t(&problem, &up) - closed_j_t(&problem, &down)) / (2.0 * eps);
            predicted += grad * du;
        }
        let ratio = predicted / actual;
        assert!((ratio - 1.0).abs() < 0.05, "predicted/actual = {ratio:.4}");
    }

    #[test]
    fn endpoint_samples_pinned() {
        let problem = closed_not_problem(10.0, 0.02, 10);
        let res = optimize(&problem).unwrap();
        let n = res.pulse.len();
        assert_abs_diff_eq!(res.pulse.samples()[0], problem.guess.samples()[0], epsilon = 1e-12);
        assert_abs_diff_eq!(
            res.pulse.samples()[n - 1],
            problem.guess.samples()[n - 1],
            epsilon = 1e-12
        );
    }

    #[test]
    fn final_pulse_reproduces_reported_fidelity() {
        let problem = closed_not_problem(10.0, 0.02, 15);
        let res = optimize(&problem).unwrap();
        // Independent forward propagation of the returned pulse.
        let u = crate::propagate::trotter_propagator(&problem.h0, &problem.control, &res.pulse).unwrap();
        let target = match &problem.objective {
            Objective::ClosedGate { target, .. } => target.clone(),
            _ => unreachable!(),
        };
        let f = closed_gate_fidelity(&u, &target).unwrap();
        assert_abs_diff_eq!(f, res.final_fidelity(), epsilon = 1e-6);
    }

    #[test]
    fn doubling_lambda_never_increases_updates() {
        let base = closed_not_problem(10.0, 0.02, 12);
        let mut stiff = base.clone();
        stiff.lambda_a *= 2.0;
        let res_a = optimize(&base).unwrap();
        let res_b = optimize(&stiff).unwrap();
        let max_a = res_a.trace.iter().map(|r| r.max_update).fold(0.0, f64::max);
        let max_b = res_b.trace.iter().map(|r| r.max_update).fold(0.0, f64::max);
        assert!(max_b <= max_a + 1e-12, "stiffer run moved more: {max_b} > {max_a}");
    }

    fn bell_problem(tau: f64, dt: f64, lambda_a: f64, iters: usize) -> OptimizationProblem {
        let sys = paper_system();
        let h0 = sys.drift_hamiltonian();
        let dec = h0.eigh().unwrap();
        let des = crate::propagate::default_transition_energies(&sys);
        let collapse = build_collapse_operators(
            &[
                CollapseChannel::relaxation(0, 150.0, des[0], 0.4),
                CollapseChannel::relaxation(1, 150.0, des[1], 0.4),
            ],
            CollapseBasis::Eigen,
            &h0,
        )
        .unwrap();
        let mut bell: State = dec.eigenvector(0) + dec.eigenvector(3);
        crate::operator::normalize(&mut bell);
        OptimizationProblem {
            h0: h0.clone(),
            control: sys.control_operator(),
            objective: Objective::OpenStateToState {
                initial: sys.thermal_state(0.4).unwrap(),
                target: bell,
                collapse,
            },
            guess: flattop(tau, 0.05, 0.05 * tau, dt).unwrap(),
            lambda_a,
            update_shape: update_shape(tau, dt),
            max_iterations: iters,
            stop_tolerance: DEFAULT_TOL_OPEN,
        }
    }

    #[test]
    fn open_state_to_state_reduces_cost_monotonically() {
        let res = optimize(&bell_problem(10.0, 0.02, 0.1, 40)).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].j_t <= w[0].j_t + 1e-9);
        }
        assert!(
            res.final_fidelity() > res.trace[0].fidelity + 0.05,
            "fidelity {} -> {}",
            res.trace[0].fidelity,
            res.final_fidelity()
        );
    }

    #[test]
    fn open_update_matches_finite_difference_gradient() {
        let mut problem = bell_problem(2.0, 0.02, 1e6, 1);
        problem.guess = flattop(2.0, 0.3, 0.2, 0.02).unwrap();
        let res = optimize(&problem).unwrap();
        let actual = res.trace[1].j_t - res.trace[0].j_t;
        assert!(actual < 0.0, "first step must not increase J_T");

        let j_of = |pulse: &SampledPulse| -> f64 {
            let (rho0, target, collapse) = match &problem.objective {
                Objective::OpenStateToState { initial, target, collapse } => {
                    (initial.clone(), target.clone(), collapse.clone())
                }
                _ => unreachable!(),
            };
            let traj = crate::propagate::lindblad_propagate(
                &problem.h0,
                &problem.control,
                pulse,
                &collapse,
                &rho0,
            )
            .unwrap();
            1.0 - state_fidelity(traj.final_state(), &target)
        };

        let eps = 1e-6;
        let mut predicted = 0.0;
        for n in 0..problem.guess.len() {
            let du = res.pulse.samples()[n] - problem.guess.samples()[n];
            if du == 0.0 {
                continue;
            }
            let mut up = problem.guess.clone();
            up.samples_mut()[n] += eps;
            let mut down = problem.guess.clone();
            down.samples_mut()[n] -= eps;
            let grad = (j_of(&up) - j_of(&down)) / (2.0 * eps);
            predicted += grad * du;
        }
        let ratio = predicted / actual;
        assert!((ratio - 1.0).abs() < 0.05, "predicted/actual = {ratio:.4}");
    }

    #[test]
    fn open_functional_perfect_map_is_zero() {
        let sys = paper_system();
        let dec = sys.drift_hamiltonian().eigh().unwrap();
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        let encoded = default_encoded_states(&basis, &[2, 2]).unwrap();
        let weights = default_encoded_weights();
        let gate = not_gate(&dec, 2, 1).unwrap();
        let finals: Vec<Operator> = encoded.iter().map(|r| gate.conjugate(r)).collect();
        let j = open_functional(&encoded, &finals, &gate, &weights).unwrap();
        assert_abs_diff_eq!(j, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn open_functional_depolarizing_value() {
        // E(rho) = I/4: each term contributes w_i Tr[sigma_i I/4]/purity_i
        // = w_i /(4 purity_i); with the standard encodings the purities are
        // 0.3, 1, 1/4.
        let sys = paper_system();
        let dec = sys.drift_hamiltonian().eigh().unwrap();
        let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
        let encoded = default_encoded_states(&basis, &[2, 2]).unwrap();
        let weights = default_encoded_weights();
        let gate = not_gate(&dec, 2, 1).unwrap();
        let quarter = Operator::qubit_identity(2).scale_re(0.25);
        let finals = vec![quarter.clone(), quarter.clone(), quarter];
        let j = open_functional(&encoded, &finals, &gate, &weights).unwrap();
        let expect = 1.0 - 0.25 * (weights[0] / 0.3 + weights[1] / 1.0 + weights[2] / 0.25);
        assert_abs_diff_eq!(j, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(
            encoded[0].matmul(&encoded[0]).trace().re,
            0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gate_functional_reference_values() {
        let targets: Vec<State> = (0..4).map(|k| basis_ket(4, k)).collect();
        assert_abs_diff_eq!(gate_functional_closed(&targets, &targets), 0.0, epsilon = 1e-15);

        let rotated: Vec<State> = (0..4).map(|k| basis_ket(4, (k + 1) % 4)).collect();
        assert_abs_diff_eq!(gate_functional_closed(&rotated, &targets), 1.0, epsilon = 1e-15);

        // Common phase theta: J_T = 1 - cos(theta).
        let theta = 0.3;
        let ph = Complex64::new(0.0, theta).exp();
        let phased: Vec<State> = targets.iter().map(|t| t.mapv(|z| z * ph)).collect();
        assert_abs_diff_eq!(
            gate_functional_closed(&phased, &targets),
            1.0 - theta.cos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn convergence_monitor_cases() {
        let (best, conv) = convergence_monitor(&[0.5, 0.5, 0.5], 1e-3);
        assert_eq!(best, 0);
        assert!(conv);

        let decreasing: Vec<f64> = (0..10).map(|k| 1.0 - 0.01 * k as f64).collect();
        let (_, conv) = convergence_monitor(&decreasing, 1e-3);
        assert!(!conv);

        // Saddle start: flat, drop, flat again at the floor.
        let trace = [1.0, 1.0, 0.9, 0.3, 0.0500, 0.0500004];
        let (best, conv) = convergence_monitor(&trace, 1e-3);
        assert_eq!(best, 4);
        assert!(conv);
    }

    #[test]
    fn rejects_bad_update_shape() {
        let mut problem = closed_not_problem(10.0, 0.02, 2);
        problem.update_shape = SampledPulse::new(vec![1.0; problem.guess.len()], 0.02).unwrap();
        assert!(matches!(optimize(&problem), Err(Error::InvalidParameter(_))));
    }
}
