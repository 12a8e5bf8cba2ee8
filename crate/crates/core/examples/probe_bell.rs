use spinctrl_core::krotov::*;
use spinctrl_core::metrics::{concurrence, fidelity_concurrence_bound, state_fidelity};
use spinctrl_core::operator::{normalize, State};
use spinctrl_core::propagate::*;
use spinctrl_core::pulse::{flattop, SampledPulse};

/// Flattop update window over [start, tau].
fn windowed_shape(tau: f64, start: f64, rise: f64, dt: f64) -> SampledPulse {
    if start <= 0.0 {
        return flattop(tau, 1.0, rise, dt).unwrap();
    }
    let n = (tau / dt).round() as usize;
    let samples: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            if t <= start + 0.5 * dt {
                0.0
            } else {
                spinctrl_core::pulse::flattop_envelope(t - start - 0.5 * dt, tau - start - dt, rise).clamp(0.0, 1.0)
            }
        })
        .collect();
    SampledPulse::new(samples, dt).unwrap()
}
use spinctrl_core::spin::SpinSystem;
use std::f64::consts::PI;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lambda: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let which: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let amp: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let s_rise: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(2.5);
    let dt: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let basis_product: bool = args.get(7).map(|s| s == "product").unwrap_or(false);
    let closed_seed_iters: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(0);
    let closed_lambda: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let s_start: f64 = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let open_s_start: f64 = args.get(11).and_then(|s| s.parse().ok()).unwrap_or(s_start);
    let tau = 50.0;
    let temp = 0.4;
    let t1 = 150.0;

    let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0);
    let h0 = sys.drift_hamiltonian();
    let dec = h0.eigh().unwrap();
    let des = default_transition_energies(&sys);
    let collapse = build_collapse_operators(
        &[
            CollapseChannel::relaxation(0, t1, des[0], temp),
            CollapseChannel::relaxation(1, t1, des[1], temp),
        ],
        if basis_product { CollapseBasis::Product } else { CollapseBasis::Eigen },
        &h0,
    )
    .unwrap();

    // Bell states in the eigenbasis: Phi+- from (1,4), Psi+- from (2,3).
    let (a, b, sign) = match which {
        0 => (0, 3, 1.0),
        1 => (0, 3, -1.0),
        2 => (1, 2, 1.0),
        _ => (1, 2, -1.0),
    };
    let mut bell: State = dec.eigenvector(a) + dec.eigenvector(b).mapv(|z| z * sign);
    normalize(&mut bell);

    // Optional closed-system seeding: optimize |00> -> bell as a pure-state
    // problem, then refine under noise.
    let guess = if closed_seed_iters > 0 {
        let closed = OptimizationProblem {
            h0: h0.clone(),
            control: sys.control_operator(),
            objective: Objective::ClosedStateToState {
                initial: spinctrl_core::operator::basis_ket(4, 0),
                target: bell.clone(),
            },
            guess: flattop(tau, amp, 0.05 * tau, dt).unwrap(),
            lambda_a: closed_lambda,
            update_shape: windowed_shape(tau, s_start, s_rise, dt),
            max_iterations: closed_seed_iters,
            stop_tolerance: DEFAULT_TOL_CLOSED,
        };
        let seeded = optimize(&closed).unwrap();
        println!("closed seed: F = {:.6} after {} iters", seeded.final_fidelity(), seeded.iterations_run);
        seeded.pulse
    } else {
        flattop(tau, amp, 0.05 * tau, dt).unwrap()
    };

    let problem = OptimizationProblem {
        h0: h0.clone(),
        control: sys.control_operator(),
        objective: Objective::OpenStateToState {
            initial: sys.thermal_state(temp).unwrap(),
            target: bell.clone(),
            collapse: collapse.clone(),
        },
        guess,
        lambda_a: lambda,
        update_shape: windowed_shape(tau, open_s_start, s_rise, dt),
        max_iterations: iters,
        stop_tolerance: DEFAULT_TOL_OPEN,
    };
    let t0 = std::time::Instant::now();
    let res = match optimize(&problem) {
        Ok(r) => r,
        Err(e) => {
            println!("OPTIMIZATION FAILED: {e}");
            return;
        }
    };
    for (i, r) in res.trace.iter().enumerate() {
        if i % 20 == 0 || i == res.trace.len() - 1 {
            println!("iter {i:4}  J_T = {:.6e}  F = {:.6}  max|du| = {:.3e}", r.j_t, r.fidelity, r.max_update);
        }
    }
    // Final independent evaluation: fidelity + concurrence.
    let traj = lindblad_propagate(&h0, &sys.control_operator(), &res.pulse, &collapse, &sys.thermal_state(temp).unwrap()).unwrap();
    let rho_f = traj.final_state();
    let f = state_fidelity(rho_f, &bell);
    let c = concurrence(rho_f, Some(&dec)).unwrap();
    println!(
        "bell {which}: lambda={lambda} iters={iters} amp={amp} -> F = {f:.4}, C = {c:.4}, bound ok: {} ({:.1} s)",
        fidelity_concurrence_bound(f, c),
        t0.elapsed().as_secs_f64()
    );
}
