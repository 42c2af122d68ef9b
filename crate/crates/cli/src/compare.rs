//! Quantum and classical spreading from the same initial density.
//!
//! Both start from `|psi0|^2` of a real Gaussian. The quantum width grows
//! quadratically in time, the diffusive one linearly, so their entropies
//! cross once: `ln(1 + a^2 t^2 / s^2)` overtakes `ln(1 + 2 D t / s^2)` at
//! `t* = 2 D / a^2` with `a = hbar / (2 m sigma0)`.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::time::Instant;

use madelung_core::analytic::{self, GaussianParams};
use madelung_core::diffusion::{self, DiffusionState};
use madelung_core::madelung::{self, QuantumState};
use madelung_core::schrodinger::{self, EvolutionConfig, Potential};
use madelung_core::{entropy, Grid};

use crate::config::ScenarioConfig;
use crate::error::{RunError, RunResult};
use crate::output;
use crate::report::{IdentityCheck, PlotPoint, Provenance, RunReport, Table};

pub const COMPARE_COLUMNS: [&str; 9] = [
    "t",
    "sigma2_quantum",
    "sigma2_diffusive",
    "ref_sigma2_quantum",
    "ref_sigma2_diffusive",
    "ent_quantum",
    "ent_diffusive",
    "rho_l1_distance",
    "quantum_fickian_defect",
];

const QUANTUM_WIDTH: f64 = 1e-3;
const DIFFUSIVE_WIDTH: f64 = 1e-10;
const INITIAL_DISTANCE: f64 = 1e-14;
/// Snapshots this close to the crossover (relative to `t*`) are not ranked.
const CROSSOVER_BAND: f64 = 0.05;

/// Time at which the free quantum entropy overtakes the diffusive one.
pub fn entropy_crossover(hbar: f64, mass: f64, sigma0: f64, diffusivity: f64) -> f64 {
    let a = hbar / (2.0 * mass * sigma0);
    2.0 * diffusivity / (a * a)
}

/// `int |J_quantum - J_Fick| dx` with `J_quantum = (hbar/m) Im(psi* psi')`
/// and `J_Fick = -D rho'`. Zero would mean the density obeys Fick's law.
fn fickian_defect(state: &QuantumState, diffusivity: f64) -> f64 {
    let grid = state.grid();
    let psi = state.psi().values();
    let dpsi = state.psi().derivative(1);
    let rho = madelung::density(state);
    let drho = rho.derivative(1);
    let scale = state.hbar() / state.mass();
    let gap: Vec<f64> = psi
        .iter()
        .zip(dpsi.values())
        .zip(drho.values())
        .map(|((p, dp), dr)| (scale * (p.conj() * dp).im + diffusivity * dr).abs())
        .collect();
    grid.integrate(&gap)
}

/// Runs both evolutions and compares them, without writing files.
pub fn simulate_comparison(cfg: &ScenarioConfig) -> RunResult<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let p = &cfg.physics;
    let e = &cfg.evolution;
    let grid = Grid::new(cfg.grid.half_width, cfg.grid.num_points)?;
    let sigma0 = cfg.sigma0();
    let d = cfg.diffusivity();

    let quantum0 = schrodinger::gaussian_packet(&grid, sigma0, 0.0, p.hbar, p.mass)?;
    let classical0 = DiffusionState::new(madelung::density(&quantum0), d, 0.0)?;
    let evolution = EvolutionConfig::new(e.dt, e.t_final, e.snapshot_stride)?;
    let quantum = schrodinger::evolve(&quantum0, &Potential::Free, &evolution).map_err(|err| match err {
        madelung_core::Error::NumericAbort { step } => RunError::NumericAbort {
            step,
            snapshot: step.div_ceil(e.snapshot_stride),
        },
        other => other.into(),
    })?;
    let classical = diffusion::evolve_diffusion(&classical0, e.dt, e.t_final, e.snapshot_stride)?;
    assert_eq!(quantum.len(), classical.len(), "both runs share the snapshot schedule");

    let free = GaussianParams::new(sigma0, p.hbar, p.mass)?;
    let k_b = p.k_b;
    let mut table = Table::new(&COMPARE_COLUMNS);
    let mut rows = Vec::with_capacity(quantum.len());
    let mut plot = Vec::new();
    for (q, c) in quantum.iter().zip(&classical) {
        let t = q.time();
        let rho_q = madelung::density(q);
        let gap: Vec<f64> = rho_q
            .values()
            .iter()
            .zip(c.rho().values())
            .map(|(a, b)| (a - b).abs())
            .collect();
        let ref_q = analytic::free_sigma(&free, t).powi(2);
        let ref_d = sigma0 * sigma0 + 2.0 * d * t;
        let row = [
            t,
            madelung::position_variance(&rho_q),
            madelung::position_variance(c.rho()),
            ref_q,
            ref_d,
            entropy::boltzmann_entropy(&rho_q, k_b),
            entropy::boltzmann_entropy(c.rho(), k_b),
            grid.integrate(&gap),
            fickian_defect(q, d),
        ];
        table.push(row.iter().map(|&v| Some(v)).collect());
        for (quantity, measured, reference) in [
            ("sigma2_quantum", row[1], ref_q),
            ("sigma2_diffusive", row[2], ref_d),
            ("ent_quantum", row[5], 0.5 * k_b * (2.0 * PI * E * ref_q).ln()),
            ("ent_diffusive", row[6], 0.5 * k_b * (2.0 * PI * E * ref_d).ln()),
        ] {
            plot.push(PlotPoint {
                t,
                quantity,
                measured,
                reference: Some(reference),
            });
        }
        rows.push(row);
    }

    let name = "compare";
    let mut identities = Vec::new();
    identities.push(IdentityCheck::new(
        name,
        "quantum_width",
        QUANTUM_WIDTH,
        rows.iter().map(|r| (r[1] - r[3]).abs() / r[3]).fold(0.0, f64::max),
        "relative error of quantum <x^2> against sigma0^2 + (hbar t / 2 m sigma0)^2",
    ));
    identities.push(IdentityCheck::new(
        name,
        "diffusive_width",
        DIFFUSIVE_WIDTH,
        rows.iter().map(|r| (r[2] - r[4]).abs()).fold(0.0, f64::max),
        "absolute error of diffusive <x^2> against sigma0^2 + 2 D t",
    ));
    identities.push(IdentityCheck::new(
        name,
        "initial_distance",
        INITIAL_DISTANCE,
        rows[0][7],
        "int |rho_quantum - rho_diffusive| at t = 0",
    ));
    let crossover = entropy_crossover(p.hbar, p.mass, sigma0, d);
    let misordered = rows
        .iter()
        .filter(|r| (r[0] - crossover).abs() > CROSSOVER_BAND * crossover)
        .filter(|r| (r[5] > r[6]) != (r[0] > crossover))
        .count();
    identities.push(IdentityCheck::new(
        name,
        "entropy_ordering",
        0.0,
        misordered as f64,
        format!("snapshots where Ent_quantum vs Ent_diffusive disagrees with crossover t* = {crossover:.6}"),
    ));

    let mut metrics = BTreeMap::new();
    metrics.insert("entropy_crossover_time".to_string(), crossover);
    metrics.insert(
        "max_fickian_defect".to_string(),
        rows.iter().map(|r| r[8]).fold(0.0, f64::max),
    );
    metrics.insert(
        "max_rho_l1_distance".to_string(),
        rows.iter().map(|r| r[7]).fold(0.0, f64::max),
    );
    if let Some(w) = rows.windows(2).find(|w| w[0][5] <= w[0][6] && w[1][5] > w[1][6]) {
        let (f0, f1) = (w[0][5] - w[0][6], w[1][5] - w[1][6]);
        let t = w[0][0] + (w[1][0] - w[0][0]) * f0 / (f0 - f1);
        metrics.insert("entropy_crossover_measured".to_string(), t);
    }

    Ok(RunReport {
        scenario: name.to_string(),
        table,
        identities,
        metrics,
        plot,
        fields: Vec::new(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
            seed: None,
        },
    })
}

/// [`simulate_comparison`] followed by writing the report files.
pub fn compare_quantum_diffusion(cfg: &ScenarioConfig) -> RunResult<RunReport> {
    let report = simulate_comparison(cfg)?;
    output::emit_timeseries(&report, &cfg.output.directory, &cfg.output.formats)?;
    Ok(report)
}
