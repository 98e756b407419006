//! Run configuration: a single JSON document in the Γ = 1, λ = 1 units of the library.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use chiral_array::coupling::Polarization;
use chiral_array::lattice::Shape;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    G2,
    ChiralFit,
    Pulse,
    StoreRetrieve,
    Sort,
    NsGate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::G2 => "g2",
            Command::ChiralFit => "chiral-fit",
            Command::Pulse => "pulse",
            Command::StoreRetrieve => "store-retrieve",
            Command::Sort => "sort",
            Command::NsGate => "ns-gate",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub nside: usize,
    pub a: f64,
    pub shape: Shape,
    pub polarization: Polarization,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { nside: 7, a: 0.75, shape: Shape::Auto, polarization: Polarization::Circular }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub omega: f64,
    pub delta_r: f64,
    /// Intermediate detuning; the reduced-model resonance when absent.
    pub delta_e: Option<f64>,
    /// Rydberg principal quantum number, used for γ and C6.
    pub n: u32,
    /// Overrides the tabulated Rydberg decay rate.
    pub gamma: Option<f64>,
    pub omega_p: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig { omega: 8.0, delta_r: -10.0, delta_e: None, n: 100, gamma: None, omega_p: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    pub w0: f64,
    pub theta_deg: f64,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig { w0: 3.0, theta_deg: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    Vdw,
    HardBlockade,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub kind: InteractionKind,
    /// C6 in units of Γλ⁶; tabulated at drive.n when absent.
    pub c6: Option<f64>,
    /// Blockade radius in λ, required for hard-blockade.
    pub r_b: Option<f64>,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig { kind: InteractionKind::Vdw, c6: None, r_b: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points).map(|i| self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Δe grid; the default covers both Autler–Townes lines and the narrow resonance.
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Two,
    Three,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G2Config {
    pub level: Level,
    /// Extra Δe points for the g² table.
    pub delta_e: Vec<f64>,
}

impl Default for G2Config {
    fn default() -> Self {
        G2Config { level: Level::Two, delta_e: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Half-width of the δ grid in units of Γ̄c + γ.
    pub span: f64,
    pub points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { span: 10.0, points: 801 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    /// Γ̃τ, with Γ̃ from the amplitude fit.
    pub gamma_tau: f64,
    /// Carrier detuning from the collective resonance.
    pub delta0: f64,
    pub a_in: f64,
    /// Output samples per min(τ, 1/Γ̄c).
    pub samples: f64,
    /// Window end in units of 1/Γ̃ after 6τ.
    pub tail: f64,
    /// Also scatter off the fitted ideal emitter and report overlaps.
    pub compare: bool,
    pub write_psi2: bool,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig { gamma_tau: 2.24, delta0: 0.0, a_in: 1e-3, samples: 50.0, tail: 12.0, compare: true, write_psi2: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageConfig {
    /// Square storage pulse length.
    pub tau: f64,
    pub omega_max: f64,
    /// Ramp time in units of 1/Γc.
    pub ramp: f64,
    pub t_max: f64,
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig { tau: 10.0, omega_max: 4.0, ramp: 2.0, t_max: 500.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub m: usize,
    pub big_gamma_tilde: f64,
    pub gamma_tilde: f64,
    pub detuning: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { m: 2, big_gamma_tilde: 1.0, gamma_tilde: 0.0, detuning: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SortConfig {
    /// Fixed Γ̃τ; searched over [lo, hi] when absent.
    pub gamma_tau: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub samples_per_tau: f64,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig { gamma_tau: None, lo: 0.3, hi: 8.0, samples_per_tau: 50.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsGateConfig {
    /// (c0, c1, c2) as [re, im] pairs.
    pub coefficients: [[f64; 2]; 3],
}

impl Default for NsGateConfig {
    fn default() -> Self {
        let c = 1.0 / 3f64.sqrt();
        NsGateConfig { coefficients: [[c, 0.0]; 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub command: Command,
    /// Dotted path of a scalar field, e.g. "mode.w0".
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub interaction: InteractionConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Only deterministic runs exist; false is rejected.
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Rydberg-state table replacing the bundled one.
    #[serde(default)]
    pub atom_table: Option<PathBuf>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub g2: G2Config,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub sort: SortConfig,
    #[serde(default)]
    pub ns_gate: NsGateConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn positive(path: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(field(path, format!("must be a positive number, got {x}")))
    }
}

fn finite(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(field(path, "must be finite"))
    }
}

impl RunConfig {
    /// Parses a JSON document, reporting the failing field path and position.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(format!("{path}: {inner}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.deterministic {
            return Err(field("deterministic", "every computation is deterministic; false is not supported"));
        }
        let g = &self.geometry;
        if g.nside == 0 || g.nside % 2 == 0 {
            return Err(field("geometry.nside", format!("must be odd and positive, got {}", g.nside)));
        }
        positive("geometry.a", g.a)?;
        let d = &self.drive;
        if !(d.omega >= 0.0 && d.omega.is_finite()) {
            return Err(field("drive.omega", "must be non-negative"));
        }
        finite("drive.delta_r", d.delta_r)?;
        if let Some(de) = d.delta_e {
            finite("drive.delta_e", de)?;
            if de == 0.0 {
                return Err(field("drive.delta_e", "must be nonzero"));
            }
        }
        if let Some(gm) = d.gamma {
            if !(gm >= 0.0 && gm.is_finite()) {
                return Err(field("drive.gamma", "must be non-negative"));
            }
        }
        if !(d.omega_p > 0.0 && d.omega_p <= 0.01) {
            return Err(field("drive.omega_p", format!("must lie in (0, 0.01] for the weak-drive expansion, got {}", d.omega_p)));
        }
        positive("mode.w0", self.mode.w0)?;
        if !(self.mode.theta_deg.abs() < 90.0) {
            return Err(field("mode.theta_deg", "must satisfy |θ| < 90°"));
        }
        match self.interaction.kind {
            InteractionKind::HardBlockade => match self.interaction.r_b {
                Some(r) => positive("interaction.r_b", r)?,
                None => return Err(field("interaction.r_b", "required for hard-blockade")),
            },
            InteractionKind::Vdw => {
                if let Some(c6) = self.interaction.c6 {
                    finite("interaction.c6", c6)?;
                }
            }
            InteractionKind::None => {}
        }
        if self.threads == Some(0) {
            return Err(field("threads", "must be at least 1"));
        }
        if let Some(gs) = &self.spectrum.grid {
            finite("spectrum.grid.start", gs.start)?;
            finite("spectrum.grid.stop", gs.stop)?;
            if gs.points == 0 {
                return Err(field("spectrum.grid.points", "must be at least 1"));
            }
        }
        for (i, x) in self.g2.delta_e.iter().enumerate() {
            finite(&format!("g2.delta_e[{i}]"), *x)?;
        }
        positive("fit.span", self.fit.span)?;
        if self.fit.points < 8 {
            return Err(field("fit.points", "at least 8 points are needed"));
        }
        let p = &self.pulse;
        positive("pulse.gamma_tau", p.gamma_tau)?;
        finite("pulse.delta0", p.delta0)?;
        if !(p.a_in > 0.0 && p.a_in <= 0.01) {
            return Err(field("pulse.a_in", "must lie in (0, 0.01]"));
        }
        if !(p.samples >= 50.0) {
            return Err(field("pulse.samples", "at least 50 samples per shortest time scale are required"));
        }
        positive("pulse.tail", p.tail)?;
        let s = &self.storage;
        positive("storage.tau", s.tau)?;
        positive("storage.omega_max", s.omega_max)?;
        positive("storage.ramp", s.ramp)?;
        positive("storage.t_max", s.t_max)?;
        let c = &self.chain;
        if !(1..=2).contains(&c.m) {
            return Err(field("chain.m", "chains of 1 or 2 emitters are supported"));
        }
        positive("chain.big_gamma_tilde", c.big_gamma_tilde)?;
        if !(c.gamma_tilde >= 0.0) {
            return Err(field("chain.gamma_tilde", "must be non-negative"));
        }
        finite("chain.detuning", c.detuning)?;
        let so = &self.sort;
        if let Some(x) = so.gamma_tau {
            positive("sort.gamma_tau", x)?;
        }
        positive("sort.lo", so.lo)?;
        if !(so.hi > so.lo) {
            return Err(field("sort.hi", "must exceed sort.lo"));
        }
        if !(so.samples_per_tau >= 50.0) {
            return Err(field("sort.samples_per_tau", "must be at least 50"));
        }
        let norm: f64 = self.ns_gate.coefficients.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(field("ns_gate.coefficients", format!("must have unit norm, got Σ|c|² = {norm}")));
        }
        match (self.command, &self.sweep) {
            (Command::Sweep, None) => return Err(field("sweep", "required for the sweep command")),
            (Command::Sweep, Some(sw)) => {
                if sw.command == Command::Sweep {
                    return Err(field("sweep.command", "sweeps cannot be nested"));
                }
                if sw.axis.is_empty() {
                    return Err(field("sweep.axis", "must name a config field"));
                }
                for (i, v) in sw.values.iter().enumerate() {
                    finite(&format!("sweep.values[{i}]"), *v)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}
