use spinctrl_core::krotov::*;
use spinctrl_core::metrics::{lab_frame_target, not_gate};
use spinctrl_core::operator::State;
use spinctrl_core::pulse::flattop;
use spinctrl_core::spin::SpinSystem;
use std::f64::consts::PI;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tau: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50.0);
    let dt: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let lambda: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let iters: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(600);
    let amp: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let j: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(5.0);

    let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, j);
    let h0 = sys.drift_hamiltonian();
    let dec = h0.eigh().unwrap();
    let gate = not_gate(&dec, 2, 1).unwrap();
    let target = lab_frame_target(&gate, &dec, tau);
    let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
    let problem = OptimizationProblem {
        h0,
        control: sys.control_operator(),
        objective: Objective::ClosedGate { basis, target },
        guess: flattop(tau, amp, 0.05 * tau, dt).unwrap(),
        lambda_a: lambda,
        update_shape: flattop(tau, 1.0, 0.05 * tau, dt).unwrap(),
        max_iterations: iters,
        stop_tolerance: DEFAULT_TOL_CLOSED,
    };
    let t0 = std::time::Instant::now();
    let res = optimize(&problem).unwrap();
    let dt_wall = t0.elapsed().as_secs_f64();
    for (i, r) in res.trace.iter().enumerate() {
        if i % 25 == 0 || i == res.trace.len() - 1 {
            println!("iter {i:4}  J_T = {:.6e}  F = {:.6}  max|du| = {:.3e}", r.j_t, r.fidelity, r.max_update);
        }
    }
    println!(
        "tau={tau} dt={dt} lambda={lambda} amp={amp} J={j}: final F = {:.6} after {} iters ({:.1} s)",
        res.final_fidelity(),
        res.iterations_run,
        dt_wall
    );
}
