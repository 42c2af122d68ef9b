//! Scenario configuration. A config file is TOML; any key it leaves out takes
//! the default of its scenario (see `print-default-config`).

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use madelung_core::analytic::WidthLaw;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FreeGaussian,
    HarmonicGround,
    HarmonicPerturbed,
    DiffusionGaussian,
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::FreeGaussian,
        ScenarioKind::HarmonicGround,
        ScenarioKind::HarmonicPerturbed,
        ScenarioKind::DiffusionGaussian,
        ScenarioKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FreeGaussian => "free_gaussian",
            ScenarioKind::HarmonicGround => "harmonic_ground",
            ScenarioKind::HarmonicPerturbed => "harmonic_perturbed",
            ScenarioKind::DiffusionGaussian => "diffusion_gaussian",
            ScenarioKind::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::FreeGaussian => "free Schrödinger Gaussian spreading from rest",
            ScenarioKind::HarmonicGround => "harmonic ground state, stationary density",
            ScenarioKind::HarmonicPerturbed => "harmonic trap, Gaussian with slightly detuned width",
            ScenarioKind::DiffusionGaussian => "Gaussian under Fickian diffusion (exact kernel)",
            ScenarioKind::Custom => "Gaussian with chosen chirp, potential and dynamics",
        }
    }

    pub fn is_quantum(self, custom: Option<&Custom>) -> bool {
        match self {
            ScenarioKind::DiffusionGaussian => false,
            ScenarioKind::Custom => custom.is_none_or(|c| c.dynamics == Dynamics::Schrodinger),
            _ => true,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown scenario `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub hbar: f64,
    pub mass: f64,
    pub k_b: f64,
    /// Initial width. Harmonic scenarios default to `sqrt(hbar / 2 m omega0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusivity: Option<f64>,
    /// Absolute width offset of the perturbed harmonic packet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub num_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evolution {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    /// Trap periods of stationary-state filtering applied to the initial
    /// state before the run; 0 starts from the analytic Gaussian as is.
    #[serde(default)]
    pub stationary_filter_periods: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthLawName {
    Published,
    Madelung,
}

impl From<WidthLawName> for WidthLaw {
    fn from(w: WidthLawName) -> Self {
        match w {
            WidthLawName::Published => WidthLaw::Published,
            WidthLawName::Madelung => WidthLaw::Madelung,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub enable_von_neumann: bool,
    pub vn_max_n: usize,
    /// Von Neumann entropy is evaluated on every `vn_stride`-th snapshot.
    pub vn_stride: usize,
    pub emit_fields: bool,
    /// Run the final state backwards and compare with the initial state.
    pub time_reversal: bool,
    /// Width equation for harmonic references.
    pub width_law: WidthLawName,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Schrodinger,
    Diffusion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Free,
    Harmonic,
}

/// Extra settings of the `custom` scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Custom {
    pub dynamics: Dynamics,
    pub potential: PotentialKind,
    /// Initial `d ln(sigma)/dt`, imprinted as a quadratic phase.
    pub log_width_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub physics: Physics,
    pub grid: GridConfig,
    pub evolution: Evolution,
    pub diagnostics: Diagnostics,
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<Custom>,
}

/// Longest run accepted, in time steps.
const MAX_STEPS: f64 = 1e9;
/// Longest harmonic run accepted, in radians of trap phase.
const MAX_TRAP_PHASE: f64 = 1e7;

/// Five trap periods at `omega0 = 1`.
const FIVE_PERIODS: f64 = 10.0 * PI;

impl ScenarioConfig {
    pub fn default_for(kind: ScenarioKind) -> Self {
        let physics = Physics {
            hbar: 1.0,
            mass: 1.0,
            k_b: 1.0,
            sigma0: Some(1.0),
            omega0: None,
            diffusivity: None,
            epsilon0: None,
        };
        let diagnostics = Diagnostics {
            enable_von_neumann: false,
            vn_max_n: madelung_core::entropy::DEFAULT_VN_MAX_POINTS,
            vn_stride: 10,
            emit_fields: false,
            time_reversal: true,
            width_law: WidthLawName::Published,
        };
        let output = Output {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        };
        let wide = GridConfig {
            half_width: 40.0,
            num_points: 1024,
        };
        let mut cfg = ScenarioConfig {
            scenario: kind,
            physics,
            grid: wide,
            evolution: Evolution {
                dt: 1e-3,
                t_final: 4.0,
                snapshot_stride: 10,
                stationary_filter_periods: 0.0,
            },
            diagnostics,
            output,
            custom: None,
        };
        match kind {
            ScenarioKind::FreeGaussian => {}
            ScenarioKind::HarmonicGround => {
                cfg.physics.sigma0 = None;
                cfg.physics.omega0 = Some(1.0);
                cfg.grid = GridConfig {
                    half_width: 8.0,
                    num_points: 64,
                };
                cfg.evolution = Evolution {
                    dt: 1e-3,
                    t_final: FIVE_PERIODS,
                    snapshot_stride: 100,
                    stationary_filter_periods: 5.0,
                };
            }
            ScenarioKind::HarmonicPerturbed => {
                cfg.physics.sigma0 = None;
                cfg.physics.omega0 = Some(1.0);
                cfg.physics.epsilon0 = Some(0.01 * 0.5f64.sqrt());
                cfg.grid = GridConfig {
                    half_width: 8.0,
                    num_points: 64,
                };
                cfg.evolution = Evolution {
                    dt: 1e-3,
                    t_final: FIVE_PERIODS,
                    snapshot_stride: 20,
                    stationary_filter_periods: 0.0,
                };
            }
            ScenarioKind::DiffusionGaussian => {
                cfg.physics.diffusivity = Some(0.5);
                // Coarser than the quantum runs: the Bohm force takes a third
                // derivative, which amplifies rounding as k^3.
                cfg.grid.num_points = 256;
                cfg.evolution.t_final = 2.0;
            }
            ScenarioKind::Custom => {
                cfg.evolution.t_final = 2.0;
                cfg.custom = Some(Custom {
                    dynamics: Dynamics::Schrodinger,
                    potential: PotentialKind::Free,
                    log_width_rate: 0.2,
                });
            }
        }
        cfg
    }

    /// Parses a TOML document over the defaults of its `scenario` and validates it.
    pub fn from_toml_str(text: &str) -> RunResult<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| RunError::config(e.to_string()))?;
        let kind = match user.get("scenario") {
            Some(toml::Value::String(s)) => s.parse::<ScenarioKind>().map_err(RunError::config)?,
            Some(_) => return Err(RunError::config("`scenario` must be a string")),
            None => return Err(RunError::config("missing `scenario`")),
        };
        let mut merged = toml::Table::try_from(Self::default_for(kind)).expect("defaults serialize");
        merge(&mut merged, user);
        let cfg: ScenarioConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| RunError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn is_quantum(&self) -> bool {
        self.scenario.is_quantum(self.custom.as_ref())
    }

    pub fn is_harmonic(&self) -> bool {
        match self.scenario {
            ScenarioKind::HarmonicGround | ScenarioKind::HarmonicPerturbed => true,
            ScenarioKind::Custom => self
                .custom
                .as_ref()
                .is_some_and(|c| c.potential == PotentialKind::Harmonic),
            _ => false,
        }
    }

    /// `sqrt(hbar / 2 m omega0)` when a trap frequency is set.
    pub fn stationary_width(&self) -> Option<f64> {
        let p = &self.physics;
        p.omega0.map(|w| (p.hbar / (2.0 * p.mass * w)).sqrt())
    }

    /// Initial width after harmonic defaults are applied.
    pub fn sigma0(&self) -> f64 {
        self.physics
            .sigma0
            .or_else(|| self.stationary_width())
            .unwrap_or(f64::NAN)
    }

    /// Diffusion coefficient, `hbar / 2m` unless set.
    pub fn diffusivity(&self) -> f64 {
        let p = &self.physics;
        p.diffusivity.unwrap_or(p.hbar / (2.0 * p.mass))
    }

    pub fn num_steps(&self) -> usize {
        (self.evolution.t_final / self.evolution.dt).round() as usize
    }

    /// Checks every constraint and reports all violations together.
    pub fn validate(&self) -> RunResult<()> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        let p = &self.physics;
        positive("physics.hbar", p.hbar);
        positive("physics.mass", p.mass);
        positive("physics.k_b", p.k_b);
        if let Some(s) = p.sigma0 {
            positive("physics.sigma0", s);
        }
        if let Some(w) = p.omega0 {
            positive("physics.omega0", w);
        }
        if let Some(d) = p.diffusivity {
            positive("physics.diffusivity", d);
        }
        positive("grid.half_width", self.grid.half_width);
        positive("evolution.dt", self.evolution.dt);
        let e = &self.evolution;
        if !(e.t_final.is_finite() && e.t_final >= 0.0) {
            bad.push(format!(
                "evolution.t_final must be finite and non-negative, got {}",
                e.t_final
            ));
        }
        let n = self.grid.num_points;
        if n < 8 || !n.is_multiple_of(2) {
            bad.push(format!("grid.num_points must be even and at least 8, got {n}"));
        }
        if e.snapshot_stride == 0 {
            bad.push("evolution.snapshot_stride must be at least 1".into());
        }
        if e.dt > 0.0 && e.t_final / e.dt > MAX_STEPS {
            bad.push(format!(
                "evolution.t_final / evolution.dt = {:.3e} steps exceeds the limit of {MAX_STEPS:.0e}",
                e.t_final / e.dt
            ));
        }
        if let Some(w) = p.omega0.filter(|_| self.is_harmonic()) {
            if w * e.t_final > MAX_TRAP_PHASE {
                bad.push(format!(
                    "omega0 * t_final = {:.3e} exceeds {MAX_TRAP_PHASE:.0e}; the reference width integration would not finish",
                    w * e.t_final
                ));
            }
        }
        let f = e.stationary_filter_periods;
        if !(f.is_finite() && f >= 0.0) {
            bad.push(format!(
                "evolution.stationary_filter_periods must be finite and non-negative, got {f}"
            ));
        } else if f > 0.0 && !self.is_harmonic() {
            bad.push("evolution.stationary_filter_periods needs a harmonic potential".into());
        }
        let d = &self.diagnostics;
        if d.vn_stride == 0 {
            bad.push("diagnostics.vn_stride must be at least 1".into());
        }
        if d.enable_von_neumann && n > d.vn_max_n {
            bad.push(format!(
                "von Neumann entropy is O(N^2): grid.num_points = {n} exceeds diagnostics.vn_max_n = {}; lower N or raise vn_max_n",
                d.vn_max_n
            ));
        }
        if d.enable_von_neumann && !self.is_quantum() {
            bad.push("von Neumann entropy needs a Schrödinger scenario".into());
        }
        if self.output.formats.is_empty() {
            bad.push("output.formats must name at least one of csv, json".into());
        }

        match (self.scenario, &self.custom) {
            (ScenarioKind::Custom, None) => bad.push("scenario `custom` needs a [custom] table".into()),
            (ScenarioKind::Custom, Some(c)) if !c.log_width_rate.is_finite() => {
                bad.push("custom.log_width_rate must be finite".into())
            }
            (ScenarioKind::Custom, Some(_)) => {}
            (_, Some(_)) => bad.push(format!(
                "[custom] is only read by scenario `custom`, not `{}`",
                self.scenario
            )),
            _ => {}
        }
        if self.is_harmonic() && p.omega0.is_none() {
            bad.push(format!("scenario `{}` needs physics.omega0", self.scenario));
        }
        if p.sigma0.is_none() && !self.is_harmonic() {
            bad.push(format!("scenario `{}` needs physics.sigma0", self.scenario));
        }
        if let (ScenarioKind::HarmonicGround | ScenarioKind::HarmonicPerturbed, Some(s), Some(eq)) =
            (self.scenario, p.sigma0, self.stationary_width())
        {
            if (s - eq).abs() > 1e-12 * eq {
                bad.push(format!(
                    "physics.sigma0 = {s} is not the ground-state width sqrt(hbar/2 m omega0) = {eq}; omit it or use scenario `custom`"
                ));
            }
        }
        match (self.scenario, p.epsilon0) {
            (ScenarioKind::HarmonicPerturbed, None) => {
                bad.push("scenario `harmonic_perturbed` needs physics.epsilon0".into())
            }
            (ScenarioKind::HarmonicPerturbed, Some(eps)) => {
                let ratio = eps / self.sigma0();
                if !(ratio.abs() < madelung_core::analytic::LINEAR_REGIME) || eps == 0.0 {
                    bad.push(format!(
                        "physics.epsilon0 / sigma0 = {ratio} must be non-zero with magnitude below {}",
                        madelung_core::analytic::LINEAR_REGIME
                    ));
                }
            }
            (_, Some(_)) => bad.push(format!(
                "physics.epsilon0 is only read by `harmonic_perturbed`, not `{}`",
                self.scenario
            )),
            _ => {}
        }

        if bad.is_empty() {
            self.check_resolution(&mut bad);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(RunError::Config(bad))
        }
    }

    /// The domain must hold the packet until `t_final` and the grid must
    /// resolve its momentum spread, both to about 1e-14 of the peak density.
    fn check_resolution(&self, bad: &mut Vec<String>) {
        // Gaussian tail exp(-z^2/2) < 1e-14 for z > 8.03.
        const TAIL: f64 = 8.03;
        let p = &self.physics;
        let sigma0 = self.sigma0();
        let eps = p.epsilon0.unwrap_or(0.0);
        let beta = self.custom.as_ref().map_or(0.0, |c| c.log_width_rate);
        let t = self.evolution.t_final;
        let widest = if self.is_harmonic() {
            // sigma(t)^2 is a quadratic form in (cos wt, sin wt); take its
            // largest eigenvalue.
            let s2 = self.stationary_width().unwrap_or(0.0).powi(2);
            let init = (sigma0 + eps).powi(2);
            let w = p.omega0.unwrap_or(1.0);
            let (a, c) = (init, init * beta / w);
            let b = init * (beta / w).powi(2) + s2 * s2 / init;
            (0.5 * (a + b) + (0.25 * (a - b).powi(2) + c * c).sqrt()).sqrt()
        } else if self.is_quantum() {
            let a = p.hbar / (2.0 * p.mass * sigma0);
            let grown = (sigma0 * (1.0 + beta * t)).powi(2) + (a * t).powi(2);
            grown.sqrt().max(sigma0)
        } else {
            (sigma0 * sigma0 + 2.0 * self.diffusivity() * t).sqrt()
        };
        if TAIL * widest > self.grid.half_width {
            bad.push(format!(
                "grid.half_width = {} is too small: the density reaches width {widest:.4} and needs |x| up to {:.4}",
                self.grid.half_width,
                TAIL * widest
            ));
        }
        if self.is_quantum() {
            let s = sigma0 + eps.min(0.0);
            let chirp = p.mass * beta * s / p.hbar;
            let momentum = (0.25 / (s * s) + chirp * chirp).sqrt();
            let kmax = PI * self.grid.num_points as f64 / (2.0 * self.grid.half_width);
            if TAIL * momentum > kmax {
                bad.push(format!(
                    "grid.num_points = {} under-resolves the packet: k_max = {kmax:.4} but the momentum spread needs {:.4}",
                    self.grid.num_points,
                    TAIL * momentum
                ));
            }
        }
    }
}

/// Recursively overlays `user` onto `base`.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
