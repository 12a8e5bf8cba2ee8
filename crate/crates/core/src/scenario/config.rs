//! Scenario configuration: serializable descriptions of named experiments.
//!
//! A scenario couples a spin system, an optional noise model, and one
//! experiment definition. Frequencies in config files are rad/ns when
//! `angular = true`, linear GHz (multiplied by 2*pi on load) otherwise.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::propagate::{default_transition_energies, CollapseBasis, CollapseChannel};
use crate::pulse::segments_for;
use crate::spin::{InteractionKind, SpinSystem};
use crate::units::ghz_to_rad_per_ns;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemConfig {
    /// Larmor frequencies, one per qubit.
    pub larmor: Vec<f64>,
    /// Full symmetric coupling matrix, zero diagonal.
    pub coupling: Vec<Vec<f64>>,
    pub interaction: InteractionKind,
    /// true: values are rad/ns as written; false: linear GHz, scaled by 2*pi.
    pub angular: bool,
}

impl SystemConfig {
    pub fn two_qubit_paper() -> Self {
        // 20*pi, 14*pi and J = 5, all rad/ns.
        Self {
            larmor: vec![20.0 * std::f64::consts::PI, 14.0 * std::f64::consts::PI],
            coupling: vec![vec![0.0, 5.0], vec![5.0, 0.0]],
            interaction: InteractionKind::Heisenberg,
            angular: true,
        }
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        let scale = |x: f64| if self.angular { x } else { ghz_to_rad_per_ns(x) };
        SpinSystem::new(
            self.larmor.iter().map(|&w| scale(w)).collect(),
            self.coupling
                .iter()
                .map(|row| row.iter().map(|&j| scale(j)).collect())
                .collect(),
            self.interaction,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseConfig {
    /// Kelvin.
    pub temperature: f64,
    pub collapse_basis: CollapseBasis,
    /// Per-qubit T1 in ns; omit or use 0 to disable a qubit's relaxation.
    #[serde(default)]
    pub t1: Vec<f64>,
    /// Per-qubit pure-dephasing time in ns; omit or 0 to disable.
    #[serde(default)]
    pub t_phi: Vec<f64>,
    /// Optional per-qubit transition energies (rad/ns) for the relaxation
    /// balance; defaults to each qubit's dominant single-flip frequency.
    #[serde(default)]
    pub transition_energy: Vec<f64>,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            temperature: 0.0,
            collapse_basis: CollapseBasis::Eigen,
            t1: Vec::new(),
            t_phi: Vec::new(),
            transition_energy: Vec::new(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.t1.iter().all(|&t| t <= 0.0 || t.is_infinite())
            && self.t_phi.iter().all(|&t| t <= 0.0 || t.is_infinite())
    }

    pub fn channels(&self, sys: &SpinSystem) -> Result<Vec<CollapseChannel>> {
        let defaults = default_transition_energies(sys);
        let mut out = Vec::new();
        for (q, &t1) in self.t1.iter().enumerate() {
            if t1 <= 0.0 || t1.is_infinite() {
                continue;
            }
            let de = self.transition_energy.get(q).copied().unwrap_or(defaults[q]);
            out.push(CollapseChannel::relaxation(q, t1, de, self.temperature));
        }
        for (q, &tp) in self.t_phi.iter().enumerate() {
            if tp <= 0.0 || tp.is_infinite() {
                continue;
            }
            out.push(CollapseChannel::dephasing(q, tp));
        }
        Ok(out)
    }

    /// Same noise with one qubit's T1 replaced.
    pub fn with_t1(&self, values: &[f64]) -> Self {
        let mut c = self.clone();
        c.t1 = values.to_vec();
        c
    }

    pub fn with_t_phi(&self, values: &[f64]) -> Self {
        let mut c = self.clone();
        c.t_phi = values.to_vec();
        c
    }
}

/// Gates addressable from configs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// NOT on one qubit (0-based).
    Not { qubit: usize },
    /// CNOT with control and target qubits (0-based).
    Cnot { control: usize, target: usize },
}

/// Bell states in the drift-eigenbasis convention.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi_plus",
            BellState::PhiMinus => "phi_minus",
            BellState::PsiPlus => "psi_plus",
            BellState::PsiMinus => "psi_minus",
        }
    }
}

/// Initial guess policy for open-system optimizations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// The raw flattop guess.
    Flattop,
    /// A Rabi-rate-synchronized bichromatic pulse.
    RabiSync,
    /// The result of a closed-system optimization from a flattop guess.
    ClosedOpt,
    /// The result of a closed-system optimization from a Rabi-sync guess.
    ClosedOptFromSync,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OptimizerConfig {
    pub lambda_a: f64,
    pub iterations: usize,
    /// Flattop guess amplitude in rad/ns.
    pub guess_amplitude: f64,
    /// Rise time of the guess flattop, ns.
    pub guess_rise: f64,
    /// Rise time of the update shape S(t), ns.
    pub update_shape_rise: f64,
}

/// Grid of values for a sweep axis: either explicit values or an evenly
/// spaced range (log-spaced when `log` is set).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Spaced {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn linear(min: f64, max: f64, count: usize) -> Self {
        Grid::Spaced { min, max, count, log: false }
    }

    pub fn logarithmic(min: f64, max: f64, count: usize) -> Self {
        Grid::Spaced { min, max, count, log: true }
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Spaced { min, max, count, log } => {
                if *count <= 1 {
                    return vec![*min];
                }
                let (lo, hi) = if *log { (min.ln(), max.ln()) } else { (*min, *max) };
                (0..*count)
                    .map(|k| {
                        let x = lo + (hi - lo) * k as f64 / (*count as f64 - 1.0);
                        if *log {
                            x.exp()
                        } else {
                            x
                        }
                    })
                    .collect()
            }
        }
    }
}

/// What the scenario computes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Level diagram, single-tone spin traces, synchronized traces, and the
    /// NOT-gate fidelity curve under bichromatic driving.
    Transitions {
        /// Tone amplitude in rad/ns (both tones before synchronization).
        amplitude: f64,
        /// Simulated window as a multiple of the nominal flip time.
        window_flips: f64,
    },
    /// Maximum NOT fidelity vs coupling strength, with and without Rabi
    /// rate synchronization. The J grid is in the system's frequency units.
    RabiSyncSweep { amplitude: f64, j_grid: Grid },
    /// Maximum NOT fidelity vs phase difference of the bichromatic tones.
    PhaseSweep { amplitude: f64, phases: Grid },
    /// Closed-system Krotov gate optimization with pulse spectrum analysis.
    ClosedGateOpt { gate: GateKind, duration: f64, optimizer: OptimizerConfig },
    /// Closed-system state transfer |00> -> Bell state.
    ClosedBellPrep { target: BellState, duration: f64, optimizer: OptimizerConfig },
    /// Open-system Bell preparation from the thermal state for all four
    /// Bell states (fidelity, concurrence, bound check per state).
    BellPrep { duration: f64, optimizer: OptimizerConfig },
    /// Open-system Bell preparation mapped over a (T1, temperature) grid.
    BellMap {
        target: BellState,
        duration: f64,
        optimizer: OptimizerConfig,
        t1_grid: Grid,
        temperature_grid: Grid,
    },
    /// Open-system gate optimization mapped over per-qubit lifetime grids.
    NoiseMapGate {
        gate: GateKind,
        duration: f64,
        optimizer: OptimizerConfig,
        kind_grid: NoiseGridKind,
        qubit1_grid: Grid,
        qubit2_grid: Grid,
    },
    /// Spectrum of noise-adapted pulses vs coherence time: peak positions,
    /// heights, and widths at the two NOT-gate transitions.
    SpectrumVsNoise {
        gate: GateKind,
        duration: f64,
        optimizer: OptimizerConfig,
        kind_grid: NoiseGridKind,
        time_grid: Grid,
        seed: SeedPolicy,
        /// Iterations of the closed-system seeding run (seed policies that
        /// start from a closed optimization).
        seed_iterations: usize,
    },
    /// Three-qubit CNOT through the encoded-states functional, evaluated as
    /// average gate fidelity with coherent/diagonal panels.
    OpenGateFidelity {
        gate: GateKind,
        duration: f64,
        optimizer: OptimizerConfig,
        seed_iterations: usize,
        weights: Vec<f64>,
    },
    /// Noise-informed vs noise-agnostic pulses over a T1 grid, from flattop
    /// and Rabi-sync seeds.
    NoiseInformedVsAgnostic {
        gate: GateKind,
        duration: f64,
        optimizer: OptimizerConfig,
        t1_grid: Grid,
        seed_iterations: usize,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NoiseGridKind {
    Relaxation,
    Dephasing,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    /// Identifier of the reference result this scenario regenerates.
    pub anchor: String,
    /// Propagation and control grid step, ns.
    pub dt: f64,
    pub system: SystemConfig,
    pub noise: NoiseConfig,
    pub experiment: Experiment,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("TOML encode error: {e}")))
    }

    /// Hash of the canonical JSON encoding; stamped into every output file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Human-readable diagnostics; empty means the config is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        if self.dt <= 0.0 {
            diags.push(format!("dt must be positive, got {}", self.dt));
        }
        let sys = match self.system.spin_system() {
            Ok(s) => Some(s),
            Err(e) => {
                diags.push(format!("system: {e}"));
                None
            }
        };
        if self.noise.temperature < 0.0 {
            diags.push(format!("temperature must be >= 0, got {}", self.noise.temperature));
        }
        for (q, &t) in self.noise.t1.iter().enumerate() {
            if t < 0.0 {
                diags.push(format!("t1[{q}] must be >= 0, got {t}"));
            }
        }
        for (q, &t) in self.noise.t_phi.iter().enumerate() {
            if t < 0.0 {
                diags.push(format!("t_phi[{q}] must be >= 0, got {t}"));
            }
        }
        if let Some(sys) = &sys {
            let n = sys.n_qubits();
            if self.noise.t1.len() > n || self.noise.t_phi.len() > n {
                diags.push("noise lists longer than the qubit count".into());
            }
        }
        let check_duration = |diags: &mut Vec<String>, tau: f64| {
            if let Err(e) = segments_for(tau, self.dt) {
                diags.push(e.to_string());
            }
        };
        let check_opt = |diags: &mut Vec<String>, opt: &OptimizerConfig, tau: f64| {
            if opt.lambda_a <= 0.0 {
                diags.push(format!("lambda_a must be positive, got {}", opt.lambda_a));
            }
            if opt.iterations == 0 {
                diags.push("iterations must be >= 1".into());
            }
            if opt.guess_amplitude < 0.0 {
                diags.push("guess amplitude must be >= 0".into());
            }
            for (label, rise) in [("guess_rise", opt.guess_rise), ("update_shape_rise", opt.update_shape_rise)] {
                if rise <= 0.0 || 2.0 * rise > tau {
                    diags.push(format!("{label} = {rise} ns invalid for duration {tau} ns"));
                }
            }
        };
        match &self.experiment {
            Experiment::Transitions { amplitude, window_flips } => {
                if *amplitude <= 0.0 || *window_flips <= 0.0 {
                    diags.push("transitions: amplitude and window must be positive".into());
                }
            }
            Experiment::RabiSyncSweep { amplitude, j_grid } => {
                if *amplitude <= 0.0 {
                    diags.push("sweep amplitude must be positive".into());
                }
                if j_grid.points().iter().any(|&j| j <= 0.0) {
                    diags.push("J grid must be strictly positive".into());
                }
            }
            Experiment::PhaseSweep { amplitude, phases } => {
                if *amplitude <= 0.0 {
                    diags.push("sweep amplitude must be positive".into());
                }
                if phases.points().is_empty() {
                    diags.push("phase grid is empty".into());
                }
            }
            Experiment::ClosedGateOpt { duration, optimizer, .. }
            | Experiment::ClosedBellPrep { duration, optimizer, .. }
            | Experiment::BellPrep { duration, optimizer } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
            }
            Experiment::BellMap { duration, optimizer, t1_grid, temperature_grid, .. } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
                if t1_grid.points().iter().any(|&t| t <= 0.0) {
                    diags.push("T1 grid must be positive".into());
                }
                if temperature_grid.points().iter().any(|&t| t < 0.0) {
                    diags.push("temperature grid must be >= 0".into());
                }
            }
            Experiment::NoiseMapGate { duration, optimizer, qubit1_grid, qubit2_grid, .. } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
                for g in [qubit1_grid, qubit2_grid] {
                    if g.points().iter().any(|&t| t <= 0.0) {
                        diags.push("lifetime grids must be positive".into());
                    }
                }
            }
            Experiment::SpectrumVsNoise { duration, optimizer, time_grid, .. } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
                if time_grid.points().iter().any(|&t| t <= 0.0) {
                    diags.push("coherence-time grid must be positive".into());
                }
            }
            Experiment::OpenGateFidelity { duration, optimizer, weights, .. } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
                let sum: f64 = weights.iter().sum();
                if weights.len() != 3 || (sum - 1.0).abs() > 1e-9 {
                    diags.push("encoded-state weights must be three values summing to 1".into());
                }
            }
            Experiment::NoiseInformedVsAgnostic { duration, optimizer, t1_grid, .. } => {
                check_duration(&mut diags, *duration);
                check_opt(&mut diags, optimizer, *duration);
                if t1_grid.points().iter().any(|&t| t <= 0.0) {
                    diags.push("T1 grid must be positive".into());
                }
            }
        }
        diags
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ScenarioConfig {
        ScenarioConfig {
            name: "sample".into(),
            description: "sample config".into(),
            anchor: "none".into(),
            dt: 0.01,
            system: SystemConfig::two_qubit_paper(),
            noise: NoiseConfig::none(),
            experiment: Experiment::Transitions { amplitude: 0.0628, window_flips: 1.5 },
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = sample_config();
        let text = cfg.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let cfg = sample_config();
        assert_eq!(cfg.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.dt = 0.02;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn validation_flags_bad_grid() {
        let mut cfg = sample_config();
        cfg.experiment = Experiment::ClosedGateOpt {
            gate: GateKind::Not { qubit: 1 },
            duration: 50.0,
            optimizer: OptimizerConfig {
                lambda_a: 10.0,
                iterations: 600,
                guess_amplitude: 0.05,
                guess_rise: 2.5,
                update_shape_rise: 2.5,
            },
        };
        cfg.dt = 0.013; // does not divide 50 ns
        let diags = cfg.validate();
        assert!(diags.iter().any(|d| d.contains("does not divide")), "{diags:?}");
    }

    #[test]
    fn validation_flags_negative_t1() {
        let mut cfg = sample_config();
        cfg.noise.t1 = vec![-5.0, 100.0];
        let diags = cfg.validate();
        assert!(diags.iter().any(|d| d.contains("t1[0]")), "{diags:?}");
    }

    #[test]
    fn valid_config_has_no_diagnostics() {
        assert!(sample_config().validate().is_empty());
    }

    #[test]
    fn angular_flag_scales_frequencies() {
        let mut cfg = SystemConfig::two_qubit_paper();
        cfg.angular = false;
        cfg.larmor = vec![17.0, 15.0];
        cfg.coupling = vec![vec![0.0, 0.1], vec![0.1, 0.0]];
        let sys = cfg.spin_system().unwrap();
        approx::assert_abs_diff_eq!(sys.larmor[0], 2.0 * std::f64::consts::PI * 17.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(sys.coupling[0][1], 2.0 * std::f64::consts::PI * 0.1, epsilon = 1e-12);
    }
}
