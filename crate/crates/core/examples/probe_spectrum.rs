use spinctrl_core::krotov::*;
use spinctrl_core::metrics::{lab_frame_target, not_gate};
use spinctrl_core::operator::State;
use spinctrl_core::pulse::flattop;
use spinctrl_core::spectrum::spectrum;
use spinctrl_core::spin::{transition_frequencies, SpinSystem};
use std::f64::consts::PI;

fn main() {
    let tau = 50.0;
    let dt = 0.01;
    let sys = SpinSystem::two_qubit(20.0 * PI, 14.0 * PI, 5.0);
    let h0 = sys.drift_hamiltonian();
    let dec = h0.eigh().unwrap();
    let gate = not_gate(&dec, 2, 1).unwrap();
    let target = lab_frame_target(&gate, &dec, tau);
    let basis: Vec<State> = (0..4).map(|k| dec.eigenvector(k)).collect();
    let problem = OptimizationProblem {
        h0,
        control: sys.control_operator(),
        objective: Objective::ClosedGate { basis, target },
        guess: flattop(tau, 0.05, 0.05 * tau, dt).unwrap(),
        lambda_a: 10.0,
        update_shape: flattop(tau, 1.0, 0.05 * tau, dt).unwrap(),
        max_iterations: 600,
        stop_tolerance: DEFAULT_TOL_CLOSED,
    };
    let res = optimize(&problem).unwrap();
    println!("final F = {:.6}", res.final_fidelity());

    let spec = spectrum(&res.pulse).unwrap();
    let table = transition_frequencies(&sys);
    let expected: Vec<f64> = table.single_flips().iter().map(|t| t.frequency).collect();
    println!("single-flip frequencies: {:?}", expected);
    println!("resolution 2pi/tau = {:.4}, bin width = {:.5}", spec.resolution, spec.bin_width);
    for (hf, pf) in [(0.1, 0.05), (0.1, 0.1), (0.05, 0.05)] {
        let peaks = spec.find_peaks(hf, pf);
        println!("-- height>={hf} prominence>={pf}: {} peaks", peaks.len());
        for p in &peaks {
            let nearest = expected.iter().map(|e| (p.center - e).abs()).fold(f64::INFINITY, f64::min);
            println!(
                "   center {:8.4}  height {:9.4e}  fwhm {:?}  dist-to-flip {:.4} ({} bins of 2pi/tau)",
                p.center, p.height, p.fwhm.map(|w| (w * 1e4).round() / 1e4), nearest, (nearest / spec.resolution).round()
            );
        }
    }
    println!("max magnitude {:.4e} at low freq: {:.4e}", spec.max_magnitude(), spec.magnitudes[0]);
}
