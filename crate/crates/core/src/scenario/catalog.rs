//! Built-in scenario catalog: named, reproducible experiment presets.

use super::config::{
    BellState, Experiment, GateKind, Grid, NoiseConfig, NoiseGridKind, OptimizerConfig,
    ScenarioConfig, SeedPolicy, SystemConfig,
};
use crate::propagate::CollapseBasis;
use crate::spin::InteractionKind;

fn opt(lambda_a: f64, iterations: usize, guess_amplitude: f64, guess_rise: f64, update_shape_rise: f64) -> OptimizerConfig {
    OptimizerConfig { lambda_a, iterations, guess_amplitude, guess_rise, update_shape_rise }
}

fn base(name: &str, description: &str, anchor: &str, experiment: Experiment) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        description: description.into(),
        anchor: anchor.into(),
        dt: 0.01,
        system: SystemConfig::two_qubit_paper(),
        noise: NoiseConfig::none(),
        experiment,
    }
}

/// All built-in scenarios.
pub fn built_in_scenarios() -> Vec<ScenarioConfig> {
    let mut list = Vec::new();

    list.push(base(
        "fig1bcd_transitions",
        "Level diagram, single-tone spin traces, Rabi-synchronized traces, and NOT fidelity under bichromatic driving",
        "fig1bcd",
        Experiment::Transitions { amplitude: std::f64::consts::PI / 50.0, window_flips: 1.1 },
    ));

    list.push(base(
        "fig1e_rabi_sync",
        "Maximum NOT fidelity vs coupling strength with and without Rabi rate synchronization",
        "fig1e",
        Experiment::RabiSyncSweep {
            amplitude: std::f64::consts::PI / 50.0,
            j_grid: Grid::Values(vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]),
        },
    ));

    list.push(base(
        "fig2_closed_not",
        "Closed-system Krotov NOT gate: optimal pulse, spectrum, fidelity curve, Bloch trajectories, and J sweep",
        "fig2",
        Experiment::ClosedGateOpt {
            gate: GateKind::Not { qubit: 1 },
            duration: 50.0,
            optimizer: opt(10.0, 600, 0.05, 2.5, 2.5),
        },
    ));

    let mut fig3 = base(
        "fig3_noise_maps",
        "Optimal NOT fidelity over per-qubit relaxation and dephasing lifetime grids",
        "fig3",
        Experiment::NoiseMapGate {
            gate: GateKind::Not { qubit: 1 },
            duration: 10.0,
            optimizer: opt(0.5, 100, 0.1, 1.0, 1.0),
            kind_grid: NoiseGridKind::Relaxation,
            qubit1_grid: Grid::logarithmic(2.0, 200.0, 5),
            qubit2_grid: Grid::logarithmic(2.0, 200.0, 5),
        },
    );
    fig3.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(fig3);

    let mut fig4 = base(
        "fig4_bell_maps",
        "Bell-state fidelity and concurrence over relaxation-time and temperature grids, with Boltzmann populations",
        "fig4",
        Experiment::BellMap {
            target: BellState::PhiPlus,
            duration: 50.0,
            optimizer: opt(0.01, 200, 0.12, 2.5, 2.5),
            t1_grid: Grid::Values(vec![50.0, 150.0, 250.0, 375.0, 500.0]),
            temperature_grid: Grid::Values(vec![0.1, 0.4, 0.8, 1.4, 2.0]),
        },
    );
    fig4.noise = NoiseConfig {
        temperature: 0.4,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![150.0, 150.0],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(fig4);

    let mut table1 = base(
        "table1_bell",
        "Fidelity and concurrence of all four Bell states prepared from the thermal state",
        "table1",
        Experiment::BellPrep { duration: 50.0, optimizer: opt(0.01, 200, 0.12, 2.5, 2.5) },
    );
    table1.noise = NoiseConfig {
        temperature: 0.4,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![150.0, 150.0],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(table1);

    let mut fig5 = base(
        "fig5_spectrum_vs_noise",
        "Width and height of the optimized-pulse spectral peaks vs relaxation and dephasing times",
        "fig5",
        Experiment::SpectrumVsNoise {
            gate: GateKind::Not { qubit: 1 },
            duration: 30.0,
            optimizer: opt(0.5, 100, 0.1, 1.5, 1.5),
            kind_grid: NoiseGridKind::Relaxation,
            time_grid: Grid::Values(vec![5.0, 10.0, 30.0, 100.0]),
            seed: SeedPolicy::Flattop,
            seed_iterations: 0,
        },
    );
    fig5.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(fig5);

    let mut fig6 = base(
        "fig6_three_qubit_cnot",
        "Three-qubit CNOT on the remote qubits: average gate fidelity with coherent/diagonal panels for both lifetime schemes",
        "fig6",
        Experiment::OpenGateFidelity {
            gate: GateKind::Cnot { control: 1, target: 2 },
            duration: 12.5,
            optimizer: opt(0.1, 300, 0.1, 0.625, 0.625),
            seed_iterations: 500,
            weights: crate::krotov::default_encoded_weights(),
        },
    );
    fig6.system = SystemConfig {
        larmor: vec![17.0, 15.0, 13.0],
        coupling: vec![
            vec![0.0, 0.1, 0.6],
            vec![0.1, 0.0, 0.35],
            vec![0.6, 0.35, 0.0],
        ],
        interaction: InteractionKind::Heisenberg,
        angular: false,
    };
    fig6.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![1000.0, 1000.0, 1000.0],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(fig6);

    list.push(base(
        "figS1_phase",
        "Maximum NOT fidelity vs phase difference between the two drive tones",
        "figS1",
        Experiment::PhaseSweep {
            amplitude: std::f64::consts::PI / 25.0,
            phases: Grid::linear(-std::f64::consts::PI, std::f64::consts::PI, 25),
        },
    ));

    list.push(base(
        "figS2_cnot_closed",
        "Closed-system Krotov CNOT optimization with pulse spectrum",
        "figS2",
        Experiment::ClosedGateOpt {
            gate: GateKind::Cnot { control: 0, target: 1 },
            duration: 30.0,
            optimizer: opt(0.5, 300, 0.05, 1.5, 1.5),
        },
    ));

    list.push(base(
        "figS3_bell_closed",
        "Closed-system state transfer from |00> to a Bell state with population and entanglement curves",
        "figS3",
        Experiment::ClosedBellPrep {
            target: BellState::PhiPlus,
            duration: 50.0,
            optimizer: opt(0.5, 500, 0.05, 2.5, 2.5),
        },
    ));

    let mut figs4 = base(
        "figS4_ising_not",
        "Closed-system Krotov NOT gate for an Ising drift Hamiltonian",
        "figS4",
        Experiment::ClosedGateOpt {
            gate: GateKind::Not { qubit: 1 },
            duration: 30.0,
            optimizer: opt(0.5, 300, 0.05, 1.5, 1.5),
        },
    );
    figs4.system.interaction = InteractionKind::Ising;
    list.push(figs4);

    let mut figs5 = base(
        "figS5_lambda_sweep",
        "Spectral peak width and height vs relaxation time for a smaller Krotov step-size weight",
        "figS5",
        Experiment::SpectrumVsNoise {
            gate: GateKind::Not { qubit: 1 },
            duration: 30.0,
            optimizer: opt(0.1, 100, 0.1, 1.5, 1.5),
            kind_grid: NoiseGridKind::Relaxation,
            time_grid: Grid::Values(vec![5.0, 10.0, 30.0, 100.0]),
            seed: SeedPolicy::Flattop,
            seed_iterations: 0,
        },
    );
    figs5.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(figs5);

    let mut figs67 = base(
        "figS6_S7_seed_spectra",
        "Spectra of noise-adapted pulses seeded from closed-system optimizations of Rabi-sync and flattop guesses",
        "figS6_S7",
        Experiment::SpectrumVsNoise {
            gate: GateKind::Not { qubit: 1 },
            duration: 30.0,
            optimizer: opt(0.5, 100, 0.1, 1.5, 1.5),
            kind_grid: NoiseGridKind::Relaxation,
            time_grid: Grid::Values(vec![10.0, 30.0, 100.0, 300.0]),
            seed: SeedPolicy::ClosedOpt,
            seed_iterations: 500,
        },
    );
    figs67.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(figs67);

    let mut figs8 = base(
        "figS8_noise_informed_vs_agnostic",
        "Gate infidelity of closed-system-optimized pulses deployed under noise vs re-optimized on the open system",
        "figS8",
        Experiment::NoiseInformedVsAgnostic {
            gate: GateKind::Not { qubit: 1 },
            duration: 30.0,
            optimizer: opt(0.5, 100, 0.1, 1.5, 1.5),
            t1_grid: Grid::Values(vec![10.0, 30.0, 100.0, 300.0, 1000.0]),
            seed_iterations: 500,
        },
    );
    figs8.noise = NoiseConfig {
        temperature: 0.0,
        collapse_basis: CollapseBasis::Eigen,
        t1: vec![],
        t_phi: vec![],
        transition_energy: vec![],
    };
    list.push(figs8);

    list
}

/// Look up one built-in scenario by name.
pub fn find(name: &str) -> Option<ScenarioConfig> {
    built_in_scenarios().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_at_least_fourteen_scenarios() {
        assert!(built_in_scenarios().len() >= 14);
    }

    #[test]
    fn all_built_ins_validate_cleanly() {
        for cfg in built_in_scenarios() {
            let diags = cfg.validate();
            assert!(diags.is_empty(), "{}: {diags:?}", cfg.name);
        }
    }

    #[test]
    fn all_built_ins_have_anchors_and_unique_names() {
        let list = built_in_scenarios();
        let mut names: Vec<&str> = list.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), list.len());
        for cfg in &list {
            assert!(!cfg.anchor.is_empty(), "{} missing anchor", cfg.name);
        }
    }

    #[test]
    fn fig6_carries_quoted_parameters() {
        let cfg = find("fig6_three_qubit_cnot").unwrap();
        assert_eq!(cfg.system.larmor, vec![17.0, 15.0, 13.0]);
        assert!(!cfg.system.angular);
        assert_eq!(cfg.noise.t1, vec![1000.0, 1000.0, 1000.0]);
        assert!((cfg.noise.temperature - 0.0).abs() < 1e-12);
        match &cfg.experiment {
            Experiment::OpenGateFidelity { duration, .. } => {
                assert!((duration - 12.5).abs() < 1e-12)
            }
            other => panic!("unexpected experiment {other:?}"),
        }
    }

    #[test]
    fn table1_carries_quoted_parameters() {
        let cfg = find("table1_bell").unwrap();
        assert!((cfg.noise.temperature - 0.4).abs() < 1e-12);
        assert_eq!(cfg.noise.t1, vec![150.0, 150.0]);
        match &cfg.experiment {
            Experiment::BellPrep { duration, optimizer } => {
                assert!((duration - 50.0).abs() < 1e-12);
                assert!((optimizer.lambda_a - 0.01).abs() < 1e-12);
                assert_eq!(optimizer.iterations, 200);
            }
            other => panic!("unexpected experiment {other:?}"),
        }
    }

    #[test]
    fn round_trip_all_built_ins_through_toml() {
        for cfg in built_in_scenarios() {
            let text = cfg.to_toml().unwrap();
            let back = ScenarioConfig::from_toml(&text).unwrap();
            assert_eq!(cfg, back, "{} did not round-trip", cfg.name);
        }
    }
}
