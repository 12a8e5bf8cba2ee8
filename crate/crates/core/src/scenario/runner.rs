//! Scenario execution: wires systems, pulses, propagation, metrics, and the
//! optimizer into the catalog experiments and writes their artifacts.

use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

use super::config::{
    BellState, Experiment, GateKind, NoiseConfig, NoiseGridKind, OptimizerConfig, ScenarioConfig,
    SeedPolicy,
};
use super::output::{fmt, OutputSink, RunManifest};
use crate::error::{Error, Result};
use crate::krotov::{
    self, default_encoded_states, default_encoded_weights, Objective, OptimizationProblem,
    OptimizationResult,
};
use crate::metrics::{
    average_gate_fidelity, closed_gate_fidelity, cnot_gate, concurrence,
    fidelity_concurrence_bound, lab_frame_target, not_gate, propagate_liouville_basis,
    state_fidelity, FidelityBreakdown,
};
use crate::operator::{basis_ket, normalize, EigenDecomposition, Operator, State};
use crate::propagate::{
    bloch_vector, build_collapse_operators, lindblad_propagate, to_interaction_picture,
    trotter_trajectory, Trajectory,
};
use crate::pulse::{flattop, synchronize_rabi, SampledPulse, Tone, TonePulse};
use crate::spectrum::{spectrum, Spectrum};
use crate::spin::{rabi_sync_ratio, transition_frequencies, SpinSystem, TwoQubitAnalytic};

/// Run a scenario, writing its artifacts under `out_root/<name>/`.
pub fn run(config: &ScenarioConfig, out_root: &Path, threads: usize) -> Result<RunManifest> {
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(Error::Validation(diags.join("\n")));
    }
    let start = Instant::now();
    let mut sink = OutputSink::new(out_root, &config.name, &config.hash())?;
    let ctx = Context::new(config)?;

    match &config.experiment {
        Experiment::Transitions { amplitude, window_flips } => {
            run_transitions(&ctx, &mut sink, *amplitude, *window_flips)?
        }
        Experiment::RabiSyncSweep { amplitude, j_grid } => {
            run_rabi_sync_sweep(&ctx, &mut sink, *amplitude, &j_grid.points(), threads)?
        }
        Experiment::PhaseSweep { amplitude, phases } => {
            run_phase_sweep(&ctx, &mut sink, *amplitude, &phases.points(), threads)?
        }
        Experiment::ClosedGateOpt { gate, duration, optimizer } => {
            run_closed_gate(&ctx, &mut sink, *gate, *duration, optimizer)?
        }
        Experiment::ClosedBellPrep { target, duration, optimizer } => {
            run_closed_bell(&ctx, &mut sink, *target, *duration, optimizer)?
        }
        Experiment::BellPrep { duration, optimizer } => {
            run_bell_prep(&ctx, &mut sink, *duration, optimizer, threads)?
        }
        Experiment::BellMap { target, duration, optimizer, t1_grid, temperature_grid } => run_bell_map(
            &ctx,
            &mut sink,
            *target,
            *duration,
            optimizer,
            &t1_grid.points(),
            &temperature_grid.points(),
            threads,
        )?,
        Experiment::NoiseMapGate { gate, duration, optimizer, kind_grid, qubit1_grid, qubit2_grid } => {
            run_noise_map(
                &ctx,
                &mut sink,
                *gate,
                *duration,
                optimizer,
                *kind_grid,
                &qubit1_grid.points(),
                &qubit2_grid.points(),
                threads,
            )?
        }
        Experiment::SpectrumVsNoise { gate, duration, optimizer, kind_grid, time_grid, seed, seed_iterations } => {
            run_spectrum_vs_noise(
                &ctx,
                &mut sink,
                *gate,
                *duration,
                optimizer,
                *kind_grid,
                &time_grid.points(),
                *seed,
                *seed_iterations,
                threads,
            )?
        }
        Experiment::OpenGateFidelity { gate, duration, optimizer, seed_iterations, weights } => {
            run_open_gate_fidelity(&ctx, &mut sink, *gate, *duration, optimizer, *seed_iterations, weights)?
        }
        Experiment::NoiseInformedVsAgnostic { gate, duration, optimizer, t1_grid, seed_iterations } => {
            run_noise_informed(
                &ctx,
                &mut sink,
                *gate,
                *duration,
                optimizer,
                &t1_grid.points(),
                *seed_iterations,
                threads,
            )?
        }
    }

    sink.finish(&config.name, &config.anchor, start.elapsed().as_secs_f64(), threads)
}

/// Shared per-run pieces.
struct Context {
    config: ScenarioConfig,
    sys: SpinSystem,
    h0: Operator,
    control: Operator,
    dec: EigenDecomposition,
}

impl Context {
    fn new(config: &ScenarioConfig) -> Result<Self> {
        let sys = config.system.spin_system()?;
        let h0 = sys.drift_hamiltonian();
        let dec = h0.eigh()?;
        Ok(Self {
            config: config.clone(),
            sys: sys.clone(),
            h0,
            control: sys.control_operator(),
            dec,
        })
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn collapse_ops(&self, noise: &NoiseConfig) -> Result<Vec<Operator>> {
        let channels = noise.channels(&self.sys)?;
        build_collapse_operators(&channels, noise.collapse_basis, &self.h0)
    }

    fn gate_matrix(&self, gate: GateKind) -> Result<Operator> {
        let n = self.sys.n_qubits();
        match gate {
            GateKind::Not { qubit } => not_gate(&self.dec, n, qubit),
            GateKind::Cnot { control, target } => cnot_gate(&self.dec, n, control, target),
        }
    }

    fn eigenbasis(&self) -> Vec<State> {
        (0..self.sys.dim()).map(|k| self.dec.eigenvector(k)).collect()
    }

    /// Bell states in the printed eigenstate convention: Phi from the outer
    /// pair, Psi from the hybridized pair of the analytic forms.
    fn bell_state(&self, which: BellState) -> Result<State> {
        if self.sys.n_qubits() != 2 {
            return Err(Error::InvalidParameter("Bell states need a two-qubit system".into()));
        }
        let ana = TwoQubitAnalytic::new(self.sys.larmor[0], self.sys.larmor[1], self.sys.coupling[0][1])?;
        let (a, b, sign) = match which {
            BellState::PhiPlus => (0, 3, 1.0),
            BellState::PhiMinus => (0, 3, -1.0),
            BellState::PsiPlus => (1, 2, 1.0),
            BellState::PsiMinus => (1, 2, -1.0),
        };
        let mut v: State = ana.eigenstates[a].clone() + ana.eigenstates[b].mapv(|z| z * sign);
        normalize(&mut v);
        Ok(v)
    }

    fn guess(&self, tau: f64, opt: &OptimizerConfig) -> Result<SampledPulse> {
        flattop(tau, opt.guess_amplitude, opt.guess_rise, self.dt())
    }

    fn update_shape(&self, tau: f64, opt: &OptimizerConfig) -> Result<SampledPulse> {
        flattop(tau, 1.0, opt.update_shape_rise, self.dt())
    }

    /// Synchronized bichromatic NOT drive for the two-qubit system.
    fn sync_pulse(&self, amplitude: f64, tau: f64) -> Result<(TonePulse, f64)> {
        let ana = TwoQubitAnalytic::new(self.sys.larmor[0], self.sys.larmor[1], self.sys.coupling[0][1])?;
        let raw = TonePulse::bichromatic(amplitude, ana.omega_rf1(), amplitude, ana.omega_rf2(), tau)?;
        let synced = synchronize_rabi(&raw, &ana)?;
        let rate = crate::pulse::effective_rabi_rate(&synced, &ana);
        Ok((synced, rate))
    }
}

/// Drive both NOT transitions and record the best gate fidelity over time.
fn max_not_fidelity(ctx: &Context, pulse: &TonePulse) -> Result<(f64, f64)> {
    let sampled = pulse.sample(ctx.dt())?;
    let traj = trotter_trajectory(&ctx.h0, &ctx.control, &sampled)?;
    let gate = ctx.gate_matrix(GateKind::Not { qubit: 1 })?;
    let mut best = (0.0, 0.0);
    for (n, u) in traj.iter().enumerate() {
        let t = n as f64 * ctx.dt();
        let target = lab_frame_target(&gate, &ctx.dec, t);
        let f = closed_gate_fidelity(u, &target)?;
        if f > best.0 {
            best = (f, t);
        }
    }
    Ok(best)
}

fn run_transitions(ctx: &Context, sink: &mut OutputSink, amplitude: f64, window_flips: f64) -> Result<()> {
    let table = transition_frequencies(&ctx.sys);
    let rows: Vec<String> = table
        .transitions
        .iter()
        .map(|t| {
            format!(
                "{},{},{},{},{}",
                t.state_a,
                t.state_b,
                fmt(t.frequency),
                fmt(t.amplitude_factor),
                t.flipped_qubit.map(|q| q.to_string()).unwrap_or_default()
            )
        })
        .collect();
    sink.write_csv(
        "transitions.csv",
        "state_a,state_b,omega_rad_per_ns,amplitude_factor,flipped_qubit",
        &rows,
    )?;

    let ana = TwoQubitAnalytic::new(ctx.sys.larmor[0], ctx.sys.larmor[1], ctx.sys.coupling[0][1])?;
    let (synced, rate) = ctx.sync_pulse(amplitude, 1.0)?;
    let tau = window_flips * std::f64::consts::PI / rate;
    let tau = (tau / ctx.dt()).round() * ctx.dt();

    // Initial state (|00> + |10~>)/sqrt(2) watched under each single tone.
    let mut psi0: State = ctx.dec.eigenvector(0) + ctx.dec.eigenvector(2);
    normalize(&mut psi0);
    let rho0 = Operator::projector(&psi0, ctx.h0.dims())?;
    let single_tone = |freq: f64| -> Result<TonePulse> {
        TonePulse::new(
            vec![Tone { amplitude, frequency: freq, phase: 0.0 }],
            tau,
            crate::pulse::Envelope::None,
        )
    };
    for (name, pulse) in [
        ("bloch_tone_rf1.csv", single_tone(ana.omega_rf1())?),
        ("bloch_tone_rf2.csv", single_tone(ana.omega_rf2())?),
        ("bloch_synced.csv", {
            let mut p = synced.clone();
            p.duration = tau;
            p
        }),
    ] {
        let sampled = pulse.sample(ctx.dt())?;
        let traj = lindblad_propagate(&ctx.h0, &ctx.control, &sampled, &[], &rho0)?;
        let bloch = bloch_vector(&traj, 1)?;
        let rows: Vec<String> = traj
            .times
            .iter()
            .zip(&bloch)
            .step_by(5)
            .map(|(t, b)| format!("{},{},{},{}", fmt(*t), fmt(b[0]), fmt(b[1]), fmt(b[2])))
            .collect();
        sink.write_csv(name, "t_ns,sx,sy,sz", &rows)?;
    }

    // NOT fidelity vs time under the synchronized bichromatic drive.
    let mut synced_tau = synced;
    synced_tau.duration = tau;
    let sampled = synced_tau.sample(ctx.dt())?;
    let traj = trotter_trajectory(&ctx.h0, &ctx.control, &sampled)?;
    let gate = ctx.gate_matrix(GateKind::Not { qubit: 1 })?;
    let rows: Vec<String> = traj
        .iter()
        .enumerate()
        .step_by(5)
        .map(|(n, u)| {
            let t = n as f64 * ctx.dt();
            let target = lab_frame_target(&gate, &ctx.dec, t);
            Ok(format!("{},{}", fmt(t), fmt(closed_gate_fidelity(u, &target)?)))
        })
        .collect::<Result<_>>()?;
    sink.write_csv("not_fidelity_vs_time.csv", "t_ns,fidelity", &rows)?;

    #[derive(Serialize)]
    struct Summary {
        sync_ratio: f64,
        effective_rabi_rate: f64,
        tau_not_ns: f64,
    }
    sink.write_json(
        "summary.json",
        &Summary {
            sync_ratio: rabi_sync_ratio(&ana)?,
            effective_rabi_rate: rate,
            tau_not_ns: std::f64::consts::PI / rate,
        },
    )?;
    Ok(())
}

fn run_rabi_sync_sweep(
    ctx: &Context,
    sink: &mut OutputSink,
    amplitude: f64,
    j_values: &[f64],
    threads: usize,
) -> Result<()> {
    let results: Vec<Result<(f64, f64, f64)>> = pooled(threads, || {
        j_values
            .par_iter()
            .map(|&j| {
                let mut cfg = ctx.config.clone();
                cfg.system.coupling = vec![vec![0.0, j], vec![j, 0.0]];
                let local = Context::new(&cfg)?;
                let ana = TwoQubitAnalytic::new(local.sys.larmor[0], local.sys.larmor[1], local.sys.coupling[0][1])?;
                let raw = TonePulse::bichromatic(amplitude, ana.omega_rf1(), amplitude, ana.omega_rf2(), 1.0)?;
                let (synced, rate) = local.sync_pulse(amplitude, 1.0)?;
                let window = |p: &TonePulse, r: f64| -> Result<TonePulse> {
                    let tau = 1.3 * std::f64::consts::PI / r;
                    let mut p = p.clone();
                    p.duration = (tau / local.dt()).round() * local.dt();
                    Ok(p)
                };
                let raw_rate = amplitude * ana.factor1().min(ana.factor2());
                let (f_raw, _) = max_not_fidelity(&local, &window(&raw, raw_rate)?)?;
                let (f_sync, _) = max_not_fidelity(&local, &window(&synced, rate)?)?;
                Ok((j, f_raw, f_sync))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        let (j, f_raw, f_sync) = r?;
        rows.push(format!("{},{},{}", fmt(j), fmt(f_raw), fmt(f_sync)));
    }
    sink.write_csv("fidelity_vs_j.csv", "j,unsynchronized,synchronized", &rows)?;
    Ok(())
}

fn run_phase_sweep(
    ctx: &Context,
    sink: &mut OutputSink,
    amplitude: f64,
    phases: &[f64],
    threads: usize,
) -> Result<()> {
    let ana = TwoQubitAnalytic::new(ctx.sys.larmor[0], ctx.sys.larmor[1], ctx.sys.coupling[0][1])?;
    let rate = amplitude * ana.factor1().min(ana.factor2());
    let tau = (1.3 * std::f64::consts::PI / rate / ctx.dt()).round() * ctx.dt();
    let results: Vec<Result<(f64, f64)>> = pooled(threads, || {
        phases
            .par_iter()
            .map(|&dphi| {
                let pulse = TonePulse::new(
                    vec![
                        Tone { amplitude, frequency: ana.omega_rf1(), phase: 0.0 },
                        Tone { amplitude, frequency: ana.omega_rf2(), phase: dphi },
                    ],
                    tau,
                    crate::pulse::Envelope::None,
                )?;
                let (f, _) = max_not_fidelity(ctx, &pulse)?;
                Ok((dphi, f))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        let (dphi, f) = r?;
        rows.push(format!("{},{}", fmt(dphi), fmt(f)));
    }
    sink.write_csv("fidelity_vs_phase.csv", "delta_phi_rad,max_fidelity", &rows)?;
    Ok(())
}

/// Banded peak analysis settings shared by the optimization scenarios: the
/// drive band starts above the flattop pedestal, and maxima within one
/// cluster radius merge into their parent lobe.
pub const PEAK_BAND_MIN: f64 = 5.0;
pub const PEAK_CLUSTER_RADIUS: f64 = 1.0;
pub const PEAK_HEIGHT_FRAC: f64 = 0.1;

#[derive(Serialize)]
struct PeakRecord {
    center: f64,
    height: f64,
    fwhm: Option<f64>,
    nearest_transition: f64,
    offset_bins: f64,
}

fn peak_report(spec: &Spectrum, transitions: &[f64]) -> Vec<PeakRecord> {
    spec.banded_peak_clusters(PEAK_BAND_MIN, spec.nyquist(), PEAK_HEIGHT_FRAC, PEAK_CLUSTER_RADIUS)
        .into_iter()
        .map(|p| {
            let nearest = transitions
                .iter()
                .cloned()
                .min_by(|a, b| (p.center - a).abs().total_cmp(&(p.center - b).abs()))
                .unwrap_or(f64::NAN);
            PeakRecord {
                center: p.center,
                height: p.height,
                fwhm: p.fwhm,
                nearest_transition: nearest,
                offset_bins: (p.center - nearest).abs() / spec.resolution,
            }
        })
        .collect()
}

fn write_trace(sink: &mut OutputSink, name: &str, res: &OptimizationResult) -> Result<()> {
    let rows: Vec<String> = res
        .trace
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i},{},{},{}", fmt(r.j_t), fmt(r.fidelity), fmt(r.max_update)))
        .collect();
    sink.write_csv(name, "iteration,j_t,fidelity,max_update", &rows)
}

fn run_closed_gate(
    ctx: &Context,
    sink: &mut OutputSink,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
) -> Result<()> {
    let gate_matrix = ctx.gate_matrix(gate)?;
    let target = lab_frame_target(&gate_matrix, &ctx.dec, tau);
    let guess = ctx.guess(tau, opt)?;
    let problem = OptimizationProblem {
        h0: ctx.h0.clone(),
        control: ctx.control.clone(),
        objective: Objective::ClosedGate { basis: ctx.eigenbasis(), target: target.clone() },
        guess: guess.clone(),
        lambda_a: opt.lambda_a,
        update_shape: ctx.update_shape(tau, opt)?,
        max_iterations: opt.iterations,
        stop_tolerance: krotov::DEFAULT_TOL_CLOSED,
    };
    let res = krotov::optimize(&problem)?;

    sink.write_pulse_csv("pulse_guess.csv", &guess)?;
    sink.write_pulse_csv("pulse_optimal.csv", &res.pulse)?;
    write_trace(sink, "trace.csv", &res)?;

    let spec = spectrum(&res.pulse)?;
    sink.write_spectrum_csv("spectrum_optimal.csv", &spec)?;
    let table = transition_frequencies(&ctx.sys);
    let flips: Vec<f64> = table.single_flips().iter().map(|t| t.frequency).collect();
    let peaks = peak_report(&spec, &flips);

    // Fidelity vs time under the optimized pulse.
    let traj = trotter_trajectory(&ctx.h0, &ctx.control, &res.pulse)?;
    let rows: Vec<String> = traj
        .iter()
        .enumerate()
        .step_by(5)
        .map(|(n, u)| {
            let t = n as f64 * ctx.dt();
            let tgt = lab_frame_target(&gate_matrix, &ctx.dec, t);
            Ok(format!("{},{}", fmt(t), fmt(closed_gate_fidelity(u, &tgt)?)))
        })
        .collect::<Result<_>>()?;
    sink.write_csv("fidelity_vs_time.csv", "t_ns,fidelity", &rows)?;

    // Interaction-picture Bloch trajectories of qubit 2 for each eigenstate.
    for (k, psi) in ctx.eigenbasis().iter().enumerate() {
        let rho0 = Operator::projector(psi, ctx.h0.dims())?;
        let states: Vec<Operator> = traj.iter().map(|u| u.conjugate(&rho0)).collect();
        let times: Vec<f64> = (0..states.len()).map(|n| n as f64 * ctx.dt()).collect();
        let lab = Trajectory { times, states, frame: crate::propagate::Frame::Lab };
        let int = to_interaction_picture(&lab, &ctx.h0)?;
        let bloch = bloch_vector(&int, 1)?;
        let rows: Vec<String> = int
            .times
            .iter()
            .zip(&bloch)
            .step_by(10)
            .map(|(t, b)| format!("{},{},{},{}", fmt(*t), fmt(b[0]), fmt(b[1]), fmt(b[2])))
            .collect();
        sink.write_csv(&format!("bloch_qubit2_state{k}.csv"), "t_ns,sx,sy,sz", &rows)?;
    }

    #[derive(Serialize)]
    struct Summary {
        final_fidelity: f64,
        final_j_t: f64,
        iterations_run: usize,
        converged: bool,
        best_iteration: usize,
        single_flip_frequencies: Vec<f64>,
        peaks: Vec<PeakRecord>,
    }
    sink.write_json(
        "summary.json",
        &Summary {
            final_fidelity: res.final_fidelity(),
            final_j_t: res.final_j_t(),
            iterations_run: res.iterations_run,
            converged: res.converged,
            best_iteration: res.best_iteration(krotov::DEFAULT_TOL_CLOSED),
            single_flip_frequencies: flips,
            peaks,
        },
    )?;
    Ok(())
}

fn run_closed_bell(
    ctx: &Context,
    sink: &mut OutputSink,
    target: BellState,
    tau: f64,
    opt: &OptimizerConfig,
) -> Result<()> {
    let bell = ctx.bell_state(target)?;
    let guess = ctx.guess(tau, opt)?;
    let problem = OptimizationProblem {
        h0: ctx.h0.clone(),
        control: ctx.control.clone(),
        objective: Objective::ClosedStateToState {
            initial: basis_ket(ctx.sys.dim(), 0),
            target: bell.clone(),
        },
        guess: guess.clone(),
        lambda_a: opt.lambda_a,
        update_shape: ctx.update_shape(tau, opt)?,
        max_iterations: opt.iterations,
        stop_tolerance: krotov::DEFAULT_TOL_CLOSED,
    };
    let res = krotov::optimize(&problem)?;
    sink.write_pulse_csv("pulse_optimal.csv", &res.pulse)?;
    write_trace(sink, "trace.csv", &res)?;
    let spec = spectrum(&res.pulse)?;
    sink.write_spectrum_csv("spectrum_optimal.csv", &spec)?;

    // Populations, fidelity, and concurrence along the final trajectory.
    let traj = trotter_trajectory(&ctx.h0, &ctx.control, &res.pulse)?;
    let rho0 = Operator::projector(&basis_ket(ctx.sys.dim(), 0), ctx.h0.dims())?;
    let mut rows = Vec::new();
    for (n, u) in traj.iter().enumerate().step_by(5) {
        let t = n as f64 * ctx.dt();
        let rho = u.conjugate(&rho0);
        let pops: Vec<f64> = (0..ctx.sys.dim())
            .map(|k| {
                let v = ctx.dec.eigenvector(k);
                state_fidelity(&rho, &v)
            })
            .collect();
        let f = state_fidelity(&rho, &bell);
        let c = concurrence(&rho, Some(&ctx.dec))?;
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            fmt(t),
            fmt(pops[0]),
            fmt(pops[1]),
            fmt(pops[2]),
            fmt(pops[3]),
            fmt(f),
            fmt(c)
        ));
    }
    sink.write_csv("state_curves.csv", "t_ns,p1,p2,p3,p4,fidelity,concurrence", &rows)?;

    #[derive(Serialize)]
    struct Summary {
        target: String,
        final_fidelity: f64,
        iterations_run: usize,
        converged: bool,
    }
    sink.write_json(
        "summary.json",
        &Summary {
            target: target.label().into(),
            final_fidelity: res.final_fidelity(),
            iterations_run: res.iterations_run,
            converged: res.converged,
        },
    )?;
    Ok(())
}

/// One open-system Bell preparation; returns (result, final F, final C).
fn bell_prep_single(
    ctx: &Context,
    noise: &NoiseConfig,
    target: BellState,
    tau: f64,
    opt: &OptimizerConfig,
) -> Result<(OptimizationResult, f64, f64)> {
    let bell = ctx.bell_state(target)?;
    let collapse = ctx.collapse_ops(noise)?;
    let problem = OptimizationProblem {
        h0: ctx.h0.clone(),
        control: ctx.control.clone(),
        objective: Objective::OpenStateToState {
            initial: ctx.sys.thermal_state(noise.temperature)?,
            target: bell.clone(),
            collapse: collapse.clone(),
        },
        guess: ctx.guess(tau, opt)?,
        lambda_a: opt.lambda_a,
        update_shape: ctx.update_shape(tau, opt)?,
        max_iterations: opt.iterations,
        stop_tolerance: krotov::DEFAULT_TOL_OPEN,
    };
    let res = krotov::optimize(&problem)?;
    let traj = lindblad_propagate(
        &ctx.h0,
        &ctx.control,
        &res.pulse,
        &collapse,
        &ctx.sys.thermal_state(noise.temperature)?,
    )?;
    let f = state_fidelity(traj.final_state(), &bell);
    let c = concurrence(traj.final_state(), Some(&ctx.dec))?;
    Ok((res, f, c))
}

fn run_bell_prep(
    ctx: &Context,
    sink: &mut OutputSink,
    tau: f64,
    opt: &OptimizerConfig,
    threads: usize,
) -> Result<()> {
    let noise = ctx.config.noise.clone();
    let results: Vec<Result<(BellState, OptimizationResult, f64, f64)>> = pooled(threads, || {
        BellState::ALL
            .par_iter()
            .map(|&which| {
                let (res, f, c) = bell_prep_single(ctx, &noise, which, tau, opt)?;
                Ok((which, res, f, c))
            })
            .collect()
    });

    #[derive(Serialize)]
    struct Row {
        state: String,
        fidelity: f64,
        concurrence: f64,
        bound_satisfied: bool,
        iterations_run: usize,
    }
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    for r in results {
        let (which, res, f, c) = r?;
        write_trace(sink, &format!("trace_{}.csv", which.label()), &res)?;
        sink.write_pulse_csv(&format!("pulse_{}.csv", which.label()), &res.pulse)?;
        rows_csv.push(format!("{},{},{},{}", which.label(), fmt(f), fmt(c), fidelity_concurrence_bound(f, c)));
        rows_json.push(Row {
            state: which.label().into(),
            fidelity: f,
            concurrence: c,
            bound_satisfied: fidelity_concurrence_bound(f, c),
            iterations_run: res.iterations_run,
        });
    }
    let avg_f = rows_json.iter().map(|r| r.fidelity).sum::<f64>() / rows_json.len() as f64;
    let avg_c = rows_json.iter().map(|r| r.concurrence).sum::<f64>() / rows_json.len() as f64;
    rows_csv.push(format!("average,{},{},", fmt(avg_f), fmt(avg_c)));
    sink.write_csv("bell_table.csv", "state,fidelity,concurrence,bound_satisfied", &rows_csv)?;

    #[derive(Serialize)]
    struct Summary {
        rows: Vec<Row>,
        average_fidelity: f64,
        average_concurrence: f64,
    }
    sink.write_json(
        "summary.json",
        &Summary { rows: rows_json, average_fidelity: avg_f, average_concurrence: avg_c },
    )?;
    Ok(())
}

fn run_bell_map(
    ctx: &Context,
    sink: &mut OutputSink,
    target: BellState,
    tau: f64,
    opt: &OptimizerConfig,
    t1_values: &[f64],
    temps: &[f64],
    threads: usize,
) -> Result<()> {
    let points: Vec<(usize, usize, f64, f64)> = t1_values
        .iter()
        .enumerate()
        .flat_map(|(i, &t1)| temps.iter().enumerate().map(move |(j, &t)| (i, j, t1, t)))
        .collect();
    let results: Vec<Result<(usize, usize, f64, f64, f64, f64)>> = pooled(threads, || {
        points
            .par_iter()
            .map(|&(i, j, t1, temp)| {
                let mut noise = ctx.config.noise.with_t1(&[t1, t1]);
                noise.temperature = temp;
                let (_, f, c) = bell_prep_single(ctx, &noise, target, tau, opt)?;
                Ok((i, j, t1, temp, f, c))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        let (_, _, t1, temp, f, c) = r?;
        rows.push(format!("{},{},{},{}", fmt(t1), fmt(temp), fmt(f), fmt(c)));
    }
    sink.write_csv("bell_map.csv", "t1_ns,temperature_k,fidelity,concurrence", &rows)?;

    // Boltzmann populations of the drift eigenstates across temperature.
    let energies = ctx.dec.energies.to_vec();
    let mut rows = Vec::new();
    for &t in temps {
        let p = crate::spin::thermal_populations(&energies, t);
        rows.push(format!(
            "{},{},{},{},{},{}",
            fmt(t),
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(p[3]),
            fmt(p[0] - p[1] - p[2] - p[3])
        ));
    }
    sink.write_csv("boltzmann_vs_temperature.csv", "temperature_k,p1,p2,p3,p4,p1_minus_rest", &rows)?;
    Ok(())
}

/// Open-system gate optimization via the encoded-states functional; returns
/// the optimization plus the full average-gate-fidelity evaluation.
fn open_gate_optimize(
    ctx: &Context,
    noise: &NoiseConfig,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    weights: &[f64],
    guess: SampledPulse,
) -> Result<(OptimizationResult, FidelityBreakdown)> {
    let gate_matrix = ctx.gate_matrix(gate)?;
    let target = lab_frame_target(&gate_matrix, &ctx.dec, tau);
    let collapse = ctx.collapse_ops(noise)?;
    let basis = ctx.eigenbasis();
    let encoded = default_encoded_states(&basis, ctx.h0.dims())?;
    let problem = OptimizationProblem {
        h0: ctx.h0.clone(),
        control: ctx.control.clone(),
        objective: Objective::OpenGate {
            encoded,
            weights: weights.to_vec(),
            target: target.clone(),
            collapse: collapse.clone(),
        },
        guess,
        lambda_a: opt.lambda_a,
        update_shape: ctx.update_shape(tau, opt)?,
        max_iterations: opt.iterations,
        stop_tolerance: krotov::DEFAULT_TOL_OPEN,
    };
    let res = krotov::optimize(&problem)?;
    let map = propagate_liouville_basis(&ctx.h0, &ctx.control, &res.pulse, &collapse, &basis)?;
    let breakdown = average_gate_fidelity(&map, &target)?;
    Ok((res, breakdown))
}

/// Closed-system optimization used as a seed for open-system runs.
fn closed_seed(
    ctx: &Context,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    iterations: usize,
    guess: SampledPulse,
) -> Result<SampledPulse> {
    let gate_matrix = ctx.gate_matrix(gate)?;
    let target = lab_frame_target(&gate_matrix, &ctx.dec, tau);
    let problem = OptimizationProblem {
        h0: ctx.h0.clone(),
        control: ctx.control.clone(),
        objective: Objective::ClosedGate { basis: ctx.eigenbasis(), target },
        guess,
        lambda_a: opt.lambda_a.max(1.0),
        update_shape: ctx.update_shape(tau, opt)?,
        max_iterations: iterations,
        stop_tolerance: krotov::DEFAULT_TOL_CLOSED,
    };
    Ok(krotov::optimize(&problem)?.pulse)
}

fn seed_pulse(
    ctx: &Context,
    policy: SeedPolicy,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    seed_iterations: usize,
) -> Result<SampledPulse> {
    match policy {
        SeedPolicy::Flattop => ctx.guess(tau, opt),
        SeedPolicy::RabiSync => {
            let (synced, rate) = ctx.sync_pulse(opt.guess_amplitude.max(1e-3), tau)?;
            // Scale so one flip fits the window.
            let scale = std::f64::consts::PI / (rate * tau);
            let mut p = synced;
            for tone in p.tones.iter_mut() {
                tone.amplitude *= scale;
            }
            p.sample(ctx.dt())
        }
        SeedPolicy::ClosedOpt => {
            let guess = ctx.guess(tau, opt)?;
            closed_seed(ctx, gate, tau, opt, seed_iterations, guess)
        }
        SeedPolicy::ClosedOptFromSync => {
            let sync = seed_pulse(ctx, SeedPolicy::RabiSync, gate, tau, opt, 0)?;
            closed_seed(ctx, gate, tau, opt, seed_iterations, sync)
        }
    }
}

fn run_noise_map(
    ctx: &Context,
    sink: &mut OutputSink,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    kind: NoiseGridKind,
    grid1: &[f64],
    grid2: &[f64],
    threads: usize,
) -> Result<()> {
    let weights = default_encoded_weights();
    let points: Vec<(f64, f64)> = grid1
        .iter()
        .flat_map(|&a| grid2.iter().map(move |&b| (a, b)))
        .collect();
    let results: Vec<Result<(f64, f64, f64)>> = pooled(threads, || {
        points
            .par_iter()
            .map(|&(a, b)| {
                let noise = match kind {
                    NoiseGridKind::Relaxation => ctx.config.noise.with_t1(&[a, b]),
                    NoiseGridKind::Dephasing => ctx.config.noise.with_t_phi(&[a, b]),
                };
                let guess = ctx.guess(tau, opt)?;
                let (_, breakdown) = open_gate_optimize(ctx, &noise, gate, tau, opt, &weights, guess)?;
                Ok((a, b, breakdown.f_avg))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        let (a, b, f) = r?;
        rows.push(format!("{},{},{}", fmt(a), fmt(b), fmt(f)));
    }
    let header = match kind {
        NoiseGridKind::Relaxation => "t1_qubit1_ns,t1_qubit2_ns,f_avg",
        NoiseGridKind::Dephasing => "tphi_qubit1_ns,tphi_qubit2_ns,f_avg",
    };
    sink.write_csv("noise_map.csv", header, &rows)?;
    Ok(())
}

fn run_spectrum_vs_noise(
    ctx: &Context,
    sink: &mut OutputSink,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    kind: NoiseGridKind,
    times: &[f64],
    seed: SeedPolicy,
    seed_iterations: usize,
    threads: usize,
) -> Result<()> {
    let seed_pulse = seed_pulse(ctx, seed, gate, tau, opt, seed_iterations)?;
    sink.write_pulse_csv("pulse_seed.csv", &seed_pulse)?;
    let seed_spec = spectrum(&seed_pulse)?;
    sink.write_spectrum_csv("spectrum_seed.csv", &seed_spec)?;

    let ana = TwoQubitAnalytic::new(ctx.sys.larmor[0], ctx.sys.larmor[1], ctx.sys.coupling[0][1])?;
    let rf = [ana.omega_rf1(), ana.omega_rf2()];
    let weights = default_encoded_weights();
    let results: Vec<Result<(f64, SampledPulse, f64)>> = pooled(threads, || {
        times
            .par_iter()
            .map(|&tc| {
                let n = ctx.sys.n_qubits();
                let noise = match kind {
                    NoiseGridKind::Relaxation => ctx.config.noise.with_t1(&vec![tc; n]),
                    NoiseGridKind::Dephasing => ctx.config.noise.with_t_phi(&vec![tc; n]),
                };
                let (res, breakdown) =
                    open_gate_optimize(ctx, &noise, gate, tau, opt, &weights, seed_pulse.clone())?;
                Ok((tc, res.pulse, breakdown.f_avg))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for r in results {
        let (tc, pulse, f_avg) = r?;
        let spec = spectrum(&pulse)?;
        sink.write_pulse_csv(&format!("pulse_t{tc}.csv"), &pulse)?;
        sink.write_spectrum_csv(&format!("spectrum_t{tc}.csv"), &spec)?;
        let p1 = spec.peak_near(rf[0])?;
        let p2 = spec.peak_near(rf[1])?;
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt(tc),
            fmt(f_avg),
            fmt(p1.center),
            fmt(p1.height),
            p1.fwhm.map(fmt).unwrap_or_default(),
            fmt(p2.center),
            fmt(p2.height),
            p2.fwhm.map(fmt).unwrap_or_default(),
            fmt(spec.resolution),
        ));
    }
    sink.write_csv(
        "peaks_vs_time.csv",
        "coherence_time_ns,f_avg,rf1_center,rf1_height,rf1_fwhm,rf2_center,rf2_height,rf2_fwhm,resolution",
        &rows,
    )?;
    Ok(())
}

fn run_open_gate_fidelity(
    ctx: &Context,
    sink: &mut OutputSink,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    seed_iterations: usize,
    weights: &[f64],
) -> Result<()> {
    // Closed-system seed from the flattop guess.
    let seed = seed_pulse(ctx, SeedPolicy::ClosedOpt, gate, tau, opt, seed_iterations)?;
    sink.write_pulse_csv("pulse_seed.csv", &seed)?;

    let (res, breakdown) =
        open_gate_optimize(ctx, &ctx.config.noise, gate, tau, opt, weights, seed.clone())?;
    sink.write_pulse_csv("pulse_optimal.csv", &res.pulse)?;
    write_trace(sink, "trace.csv", &res)?;
    let spec = spectrum(&res.pulse)?;
    sink.write_spectrum_csv("spectrum_optimal.csv", &spec)?;
    sink.write_json("fidelity_breakdown.json", &breakdown)?;

    #[derive(Serialize)]
    struct Summary {
        f_avg: f64,
        f_coh_re: f64,
        f_dia: f64,
        iterations_run: usize,
        converged: bool,
    }
    sink.write_json(
        "summary.json",
        &Summary {
            f_avg: breakdown.f_avg,
            f_coh_re: breakdown.f_coh_re,
            f_dia: breakdown.f_dia,
            iterations_run: res.iterations_run,
            converged: res.converged,
        },
    )?;
    Ok(())
}

fn run_noise_informed(
    ctx: &Context,
    sink: &mut OutputSink,
    gate: GateKind,
    tau: f64,
    opt: &OptimizerConfig,
    t1_values: &[f64],
    seed_iterations: usize,
    threads: usize,
) -> Result<()> {
    let weights = default_encoded_weights();
    // Two closed-system-optimized pulses: one from the flattop guess, one
    // from the Rabi-synchronized guess.
    let agnostic_flattop = seed_pulse(ctx, SeedPolicy::ClosedOpt, gate, tau, opt, seed_iterations)?;
    let agnostic_sync = seed_pulse(ctx, SeedPolicy::ClosedOptFromSync, gate, tau, opt, seed_iterations)?;
    sink.write_pulse_csv("pulse_agnostic_flattop.csv", &agnostic_flattop)?;
    sink.write_pulse_csv("pulse_agnostic_sync.csv", &agnostic_sync)?;

    let gate_matrix = ctx.gate_matrix(gate)?;
    let target = lab_frame_target(&gate_matrix, &ctx.dec, tau);
    let basis = ctx.eigenbasis();

    let evaluate = |pulse: &SampledPulse, noise: &NoiseConfig| -> Result<f64> {
        let collapse = ctx.collapse_ops(noise)?;
        let map = propagate_liouville_basis(&ctx.h0, &ctx.control, pulse, &collapse, &basis)?;
        Ok(average_gate_fidelity(&map, &target)?.f_avg)
    };

    let results: Vec<Result<(f64, f64, f64, f64, f64)>> = pooled(threads, || {
        t1_values
            .par_iter()
            .map(|&t1| {
                let n = ctx.sys.n_qubits();
                let noise = ctx.config.noise.with_t1(&vec![t1; n]);
                let f_ag_flat = evaluate(&agnostic_flattop, &noise)?;
                let f_ag_sync = evaluate(&agnostic_sync, &noise)?;
                let (_, b1) = open_gate_optimize(
                    ctx,
                    &noise,
                    gate,
                    tau,
                    opt,
                    &weights,
                    agnostic_flattop.clone(),
                )?;
                let (_, b2) =
                    open_gate_optimize(ctx, &noise, gate, tau, opt, &weights, agnostic_sync.clone())?;
                Ok((t1, f_ag_flat, f_ag_sync, b1.f_avg, b2.f_avg))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        let (t1, ag_f, ag_s, inf_f, inf_s) = r?;
        rows.push(format!(
            "{},{},{},{},{}",
            fmt(t1),
            fmt(ag_f),
            fmt(ag_s),
            fmt(inf_f),
            fmt(inf_s)
        ));
    }
    sink.write_csv(
        "noise_informed_vs_agnostic.csv",
        "t1_ns,agnostic_flattop,agnostic_sync,informed_flattop,informed_sync",
        &rows,
    )?;
    Ok(())
}

/// Run a closure inside a rayon pool of the requested size (0 = default).
fn pooled<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
}
