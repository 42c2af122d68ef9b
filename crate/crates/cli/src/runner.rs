//! Scenario execution: evolve, evaluate diagnostics per snapshot, compare
//! with the analytic references, and collect identity checks.

use std::collections::BTreeMap;
use std::time::Instant;

use log::info;
use madelung_core::analytic::{self, DiffusionBranch, GaussianParams, HarmonicWidth, SigmaTrace, WidthLaw};
use madelung_core::diffusion::{self, DiffusionState};
use madelung_core::entropy::{entropy_report, EntropyReport, ReportFlags};
use madelung_core::madelung::{self, QuantumState};
use madelung_core::schrodinger::{self, EvolutionConfig, Potential, Propagator};
use madelung_core::{Grid, MaskedField, RealField};
use rayon::prelude::*;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::{RunError, RunResult};
use crate::output;
use crate::report::{
    DiagnosticsRow, FieldDump, IdentityCheck, PlotPoint, Provenance, RunReport, Table, DIAGNOSTIC_COLUMNS,
};
use crate::spectrum::dominant_sinusoid;

/// Tolerances of the asserted identities.
pub mod tol {
    pub const NORM_DRIFT: f64 = 1e-10;
    pub const ENERGY_DRIFT: f64 = 1e-5;
    pub const TIME_REVERSAL: f64 = 1e-8;
    pub const CORRELATION: f64 = 1e-6;
    /// Rates below this are too small for a relative comparison.
    pub const CORRELATION_FLOOR: f64 = 1e-6;
    pub const PRODUCTION_FD: f64 = 1e-2;
    pub const PRODUCTION_FD_THRESHOLD: f64 = 1e-3;
    pub const FOKKER_PLANCK: f64 = 1e-8;
    pub const ENTROPY_EQUATION: f64 = 1e-4;
    pub const FREE_SIGMA2: f64 = 1e-3;
    pub const FREE_ENTROPY: f64 = 1e-3;
    pub const FREE_DIVERGENCE: f64 = 1e-6;
    pub const GROUND_ENTROPY: f64 = 1e-6;
    pub const GROUND_VELOCITY: f64 = 1e-6;
    pub const GROUND_DENSITY: f64 = 1e-10;
    pub const BREATHING_FREQUENCY: f64 = 1e-2;
    pub const BREATHING_AMPLITUDE: f64 = 5e-2;
    pub const WIDTH_TRACE: f64 = 1e-4;
    pub const DIFFUSION_SIGMA2: f64 = 1e-12;
    pub const DIFFUSION_FISHER: f64 = 1e-12;
    pub const DIFFUSION_PRODUCTION: f64 = 1e-6;
    pub const DIFFUSION_ENTROPY: f64 = 1e-9;
    pub const DIFFUSION_FD: f64 = 1e-4;
    pub const BOHM_FORCE: f64 = 1e-3;
    /// The Bohm force is compared where `rho >= BOHM_CONDITIONING * max rho`.
    /// Below that the FFT rounding left in the kernel-evolved tail, blown up
    /// by the square root and a third derivative, dominates.
    pub const BOHM_CONDITIONING: f64 = 1e-6;
}

/// Evolves the scenario and evaluates every diagnostic, without touching the
/// filesystem.
pub fn simulate(cfg: &ScenarioConfig) -> RunResult<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = Grid::new(cfg.grid.half_width, cfg.grid.num_points)?;
    let mut report = if cfg.is_quantum() {
        run_quantum(cfg, &grid)?
    } else {
        run_diffusion(cfg, &grid)?
    };
    report.provenance.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// [`simulate`] followed by [`output::emit_timeseries`] into the configured
/// output directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunResult<RunReport> {
    let report = simulate(cfg)?;
    output::emit_timeseries(&report, &cfg.output.directory, &cfg.output.formats)?;
    Ok(report)
}

fn empty_report(cfg: &ScenarioConfig) -> RunReport {
    RunReport {
        scenario: cfg.scenario.name().to_string(),
        table: Table::new(&DIAGNOSTIC_COLUMNS),
        identities: Vec::new(),
        metrics: BTreeMap::new(),
        plot: Vec::new(),
        fields: Vec::new(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            seed: None,
        },
    }
}

/// Centered differences, one-sided at the two ends. Fewer than two samples
/// give no estimate.
pub fn centered_differences(times: &[f64], values: &[f64]) -> Vec<Option<f64>> {
    let n = times.len();
    if n < 2 {
        return vec![None; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            Some((values[b] - values[a]) / (times[b] - times[a]))
        })
        .collect()
}

/// Reference width history for a scenario: `(sigma, d ln sigma/dt)` at each
/// snapshot, or nothing when no closed form applies.
fn reference_widths(cfg: &ScenarioConfig, times: &[f64]) -> RunResult<Option<Vec<(f64, f64)>>> {
    let p = &cfg.physics;
    let sigma0 = cfg.sigma0();
    let params = GaussianParams::new(sigma0, p.hbar, p.mass)?;
    let beta = cfg.custom.as_ref().map_or(0.0, |c| c.log_width_rate);
    if !cfg.is_quantum() {
        let params = params.with_diffusivity(cfg.diffusivity())?;
        return times
            .iter()
            .map(|&t| {
                let r = analytic::diffusion_reference(&params, t, DiffusionBranch::Offset)?;
                Ok((r.sigma, r.production))
            })
            .collect::<RunResult<Vec<_>>>()
            .map(Some);
    }
    if !cfg.is_harmonic() {
        return Ok(Some(
            times
                .iter()
                .map(|&t| analytic::chirped_free_sigma(&params, beta, t))
                .collect(),
        ));
    }
    let omega0 = p.omega0.expect("validated");
    let eq = cfg.stationary_width().expect("validated");
    let params = GaussianParams::new(eq, p.hbar, p.mass)?
        .with_omega0(omega0)?
        .with_epsilon0(sigma0 + p.epsilon0.unwrap_or(0.0) - eq)?;
    let mut ctl = HarmonicWidth::defaults(&params, cfg.diagnostics.width_law.into())?;
    ctl.rate_init = beta * ctl.sigma_init;
    let trace: SigmaTrace = analytic::harmonic_sigma_with(&params, times, &ctl)?;
    Ok(Some(
        trace
            .sigma()
            .iter()
            .zip(trace.log_rate())
            .map(|(&s, &r)| (s, r))
            .collect(),
    ))
}

fn masked_column(field: &MaskedField) -> Vec<Option<f64>> {
    (0..field.values().len()).map(|i| field.get(i)).collect()
}

fn field_table(columns: &[&str], grid: &Grid, rho: &RealField, masked: &[&MaskedField]) -> Table {
    let mut table = Table::new(columns);
    let cols: Vec<Vec<Option<f64>>> = masked.iter().map(|f| masked_column(f)).collect();
    for i in 0..grid.num_points() {
        let mut row = vec![Some(grid.points()[i]), Some(rho.values()[i])];
        row.extend(cols.iter().map(|c| c[i]));
        table.push(row);
    }
    table
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN must not be swallowed by max.
    values
        .into_iter()
        .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

struct QuantumSample {
    entropy: EntropyReport,
    norm: f64,
    energy: f64,
    sigma2: f64,
    fokker_planck: f64,
    entropy_equation: f64,
    max_velocity: f64,
    density_drift: f64,
    fields: Option<Table>,
}

fn quantum_sample(
    cfg: &ScenarioConfig,
    index: usize,
    state: &QuantumState,
    potential: &Potential,
    propagator: &Propagator,
    rho0: &RealField,
) -> madelung_core::Result<QuantumSample> {
    let d = &cfg.diagnostics;
    let flags = ReportFlags {
        k_b: cfg.physics.k_b,
        von_neumann: d.enable_von_neumann && index.is_multiple_of(d.vn_stride),
        vn_max_points: d.vn_max_n,
    };
    let entropy = entropy_report(state, &flags)?;
    let rho = madelung::density(state);
    let after = propagator.step(state)?;
    let entropy_equation = diffusion::entropy_equation_residual(state, &after, state.quantum_diffusivity())?.max_abs();
    let fields = if d.emit_fields {
        let f = madelung::decompose(state)?;
        Some(field_table(
            &["x", "rho", "action", "u_advective", "u_diffusive", "bohm_potential"],
            state.grid(),
            &f.rho,
            &[&f.action_per_mass, &f.u_advective, &f.u_diffusive, &f.bohm_potential],
        ))
    } else {
        None
    };
    Ok(QuantumSample {
        norm: state.norm(),
        energy: schrodinger::energy(state, potential)?,
        sigma2: madelung::position_variance(&rho),
        fokker_planck: diffusion::fokker_planck_residual(state).max_abs(),
        entropy_equation,
        max_velocity: madelung::advective_velocity(state)?.max_abs(),
        density_drift: max_abs_diff(rho.values(), rho0.values()),
        entropy,
        fields,
    })
}

fn evolution_error(err: madelung_core::Error, stride: usize) -> RunError {
    match err {
        madelung_core::Error::NumericAbort { step } => RunError::NumericAbort {
            step,
            snapshot: step.div_ceil(stride),
        },
        other => RunError::Numeric(other),
    }
}

fn run_quantum(cfg: &ScenarioConfig, grid: &Grid) -> RunResult<RunReport> {
    let p = &cfg.physics;
    let name = cfg.scenario.name();
    let sigma_init = cfg.sigma0() + p.epsilon0.unwrap_or(0.0);
    let beta = cfg.custom.as_ref().map_or(0.0, |c| c.log_width_rate);
    let packet = schrodinger::gaussian_packet(grid, sigma_init, beta, p.hbar, p.mass)?;
    let potential = match p.omega0 {
        Some(w) if cfg.is_harmonic() => Potential::harmonic(w)?,
        _ => Potential::Free,
    };
    let e = &cfg.evolution;
    let mut filter_shift = None;
    let initial = match p.omega0 {
        Some(w) if e.stationary_filter_periods > 0.0 => {
            let window = e.stationary_filter_periods * 2.0 * std::f64::consts::PI / w;
            let filtered = schrodinger::stationary_state(&packet, &potential, e.dt, window)?;
            filter_shift = Some(max_abs_diff(
                madelung::density(&filtered).values(),
                madelung::density(&packet).values(),
            ));
            filtered
        }
        _ => packet,
    };
    let evolution = EvolutionConfig::new(e.dt, e.t_final, e.snapshot_stride)?;
    info!(
        "{name}: {} steps of dt = {} on N = {}",
        evolution.num_steps(),
        e.dt,
        grid.num_points()
    );
    let snapshots =
        schrodinger::evolve(&initial, &potential, &evolution).map_err(|err| evolution_error(err, e.snapshot_stride))?;
    let propagator = Propagator::for_state(&initial, &potential, e.dt)?;
    let rho0 = madelung::density(&initial);

    let samples = snapshots
        .par_iter()
        .enumerate()
        .map(|(i, s)| quantum_sample(cfg, i, s, &potential, &propagator, &rho0))
        .collect::<madelung_core::Result<Vec<_>>>()?;

    let times: Vec<f64> = snapshots.iter().map(|s| s.time()).collect();
    let entropies: Vec<f64> = samples.iter().map(|s| s.entropy.ent_boltzmann).collect();
    let fd = centered_differences(&times, &entropies);
    let references = reference_widths(cfg, &times)?;
    let k_b = p.k_b;

    let mut report = empty_report(cfg);
    for (i, s) in samples.iter().enumerate() {
        let reference = references.as_ref().map(|r| r[i]);
        let row = DiagnosticsRow {
            t: times[i],
            norm: s.norm,
            energy: Some(s.energy),
            sigma2_measured: s.sigma2,
            ent_boltzmann: s.entropy.ent_boltzmann,
            d_ent_b_dt_fd: fd[i],
            production_advective: s.entropy.production_advective,
            production_correlation: s.entropy.production_correlation,
            fisher: s.entropy.fisher_information,
            production_diffusive: None,
            ent_von_neumann: s.entropy.ent_von_neumann,
            ref_sigma2: reference.map(|r| r.0 * r.0),
            ref_entropy: reference.map(|r| analytic::gaussian_entropy(r.0, k_b)),
            ref_divergence: reference.map(|r| r.1),
        };
        push_plot(&mut report.plot, &row, k_b);
        report.table.push(row.cells());
    }
    report.fields = samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.fields.clone().map(|table| FieldDump {
                snapshot: i,
                t: times[i],
                table,
            })
        })
        .collect();

    // Conservation.
    let checks = &mut report.identities;
    let norm0 = samples[0].norm;
    checks.push(IdentityCheck::new(
        name,
        "norm_drift",
        tol::NORM_DRIFT,
        worst(samples.iter().map(|s| (s.norm - norm0).abs())),
        "max |N(t) - N(0)|",
    ));
    let energy0 = samples[0].energy;
    let scale = energy0.abs().max(f64::MIN_POSITIVE);
    checks.push(IdentityCheck::new(
        name,
        "energy_drift",
        tol::ENERGY_DRIFT,
        worst(samples.iter().map(|s| (s.energy - energy0).abs() / scale)),
        "max |E(t) - E(0)| / |E(0)|",
    ));
    if cfg.diagnostics.time_reversal {
        let last = snapshots.last().expect("at least the initial snapshot");
        let back = Propagator::for_state(last, &potential, -e.dt)?
            .advance(last, evolution.num_steps(), 0)
            .map_err(|err| evolution_error(err, e.snapshot_stride))?;
        let error = back
            .psi()
            .values()
            .iter()
            .zip(initial.psi().values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        checks.push(IdentityCheck::new(
            name,
            "time_reversal",
            tol::TIME_REVERSAL,
            error,
            "max |psi(backward(forward(psi0))) - psi0|",
        ));
    }

    // Entropy production.
    checks.push(IdentityCheck::new(
        name,
        "correlation_identity",
        tol::CORRELATION,
        worst(samples.iter().map(|s| {
            let a = s.entropy.production_advective.expect("quantum");
            let c = s.entropy.production_correlation.expect("quantum");
            (a - c).abs() / a.abs().max(tol::CORRELATION_FLOOR)
        })),
        format!(
            "k_B<div u_a> vs (2m/hbar) k_B<u_a u_d>, relative with floor {:.0e}",
            tol::CORRELATION_FLOOR
        ),
    ));
    let n = samples.len();
    let eligible: Vec<f64> = (1..n.saturating_sub(1))
        .filter_map(|i| {
            let a = samples[i].entropy.production_advective.expect("quantum");
            (a.abs() > tol::PRODUCTION_FD_THRESHOLD).then(|| (fd[i].expect("interior") - a).abs() / a.abs())
        })
        .collect();
    if !eligible.is_empty() {
        checks.push(IdentityCheck::new(
            name,
            "production_identity",
            tol::PRODUCTION_FD,
            worst(eligible.iter().copied()),
            format!(
                "centered dEnt_B/dt vs k_B<div u_a> on {} interior snapshots with rate > {:.0e}",
                eligible.len(),
                tol::PRODUCTION_FD_THRESHOLD
            ),
        ));
    }
    checks.push(IdentityCheck::new(
        name,
        "fokker_planck_residual",
        tol::FOKKER_PLANCK,
        worst(samples.iter().map(|s| s.fokker_planck)),
        "max |drho/dt + div[rho(u_a - u_d)] - (hbar/2m) lap rho|",
    ));
    checks.push(IdentityCheck::new(
        name,
        "entropy_equation_residual",
        tol::ENTROPY_EQUATION,
        worst(samples.iter().map(|s| s.entropy_equation)),
        "max local entropy balance residual over one step",
    ));

    if let Some(shift) = filter_shift {
        report.metrics.insert("stationary_filter_density_shift".into(), shift);
    }
    if let Some(refs) = &references {
        scenario_checks(cfg, &mut report, &samples, &times, refs)?;
    }
    Ok(report)
}

fn scenario_checks(
    cfg: &ScenarioConfig,
    report: &mut RunReport,
    samples: &[QuantumSample],
    times: &[f64],
    refs: &[(f64, f64)],
) -> RunResult<()> {
    let name = cfg.scenario.name();
    let k_b = cfg.physics.k_b;
    let sigma0 = cfg.sigma0();
    let checks = &mut report.identities;
    if !cfg.is_harmonic() {
        checks.push(IdentityCheck::new(
            name,
            "sigma2_reference",
            tol::FREE_SIGMA2,
            worst(
                samples
                    .iter()
                    .zip(refs)
                    .map(|(s, r)| (s.sigma2 - r.0 * r.0).abs() / (r.0 * r.0)),
            ),
            "relative error of <x^2> against the closed-form width",
        ));
        checks.push(IdentityCheck::new(
            name,
            "entropy_reference",
            tol::FREE_ENTROPY,
            worst(
                samples
                    .iter()
                    .zip(refs)
                    .map(|(s, r)| (s.entropy.ent_boltzmann - analytic::gaussian_entropy(r.0, k_b)).abs()),
            ),
            "absolute error of Ent_B against the closed form",
        ));
        checks.push(IdentityCheck::new(
            name,
            "divergence_reference",
            tol::FREE_DIVERGENCE,
            worst(
                samples
                    .iter()
                    .zip(refs)
                    .map(|(s, r)| (s.entropy.production_advective.expect("quantum") - k_b * r.1).abs()),
            ),
            "absolute error of k_B<div u_a> against k_B d(ln sigma)/dt",
        ));
        return Ok(());
    }

    let width_error = worst(
        samples
            .iter()
            .zip(refs)
            .map(|(s, r)| (s.sigma2.sqrt() - r.0).abs() / sigma0),
    );
    let law: WidthLaw = cfg.diagnostics.width_law.into();
    checks.push(IdentityCheck::new(
        name,
        "width_trace",
        tol::WIDTH_TRACE,
        width_error,
        format!("max |sigma_measured - sigma_RK4| / sigma0, {law:?} width law"),
    ));
    match cfg.scenario {
        ScenarioKind::HarmonicGround => {
            let ent0 = samples[0].entropy.ent_boltzmann;
            checks.push(IdentityCheck::new(
                name,
                "entropy_constancy",
                tol::GROUND_ENTROPY,
                worst(samples.iter().map(|s| (s.entropy.ent_boltzmann - ent0).abs())),
                "max |Ent_B(t) - Ent_B(0)|",
            ));
            checks.push(IdentityCheck::new(
                name,
                "advective_velocity",
                tol::GROUND_VELOCITY,
                worst(samples.iter().map(|s| s.max_velocity)),
                "max |u_a| on the valid mask",
            ));
            checks.push(IdentityCheck::new(
                name,
                "density_drift",
                tol::GROUND_DENSITY,
                worst(samples.iter().map(|s| s.density_drift)),
                "max |rho(t) - rho(0)|",
            ));
        }
        ScenarioKind::HarmonicPerturbed => {
            let entropies: Vec<f64> = samples.iter().map(|s| s.entropy.ent_boltzmann).collect();
            let omega0 = cfg.physics.omega0.expect("validated");
            let expected_omega = law.breathing_frequency(omega0);
            let eps = cfg.physics.epsilon0.expect("validated");
            let expected_amplitude = k_b * (eps / sigma0).abs();
            let fit = dominant_sinusoid(times, &entropies);
            let (omega, amplitude) = fit.map_or((f64::NAN, f64::NAN), |f| (f.omega, f.amplitude));
            report.metrics.insert("breathing_omega_fit".into(), omega);
            report.metrics.insert("breathing_amplitude_fit".into(), amplitude);
            report.metrics.insert("breathing_omega_expected".into(), expected_omega);
            checks.push(IdentityCheck::new(
                name,
                "breathing_frequency",
                tol::BREATHING_FREQUENCY,
                (omega - expected_omega).abs() / expected_omega,
                format!("Ent_B dominant frequency {omega:.6} vs {law:?} law {expected_omega:.6}"),
            ));
            checks.push(IdentityCheck::new(
                name,
                "breathing_amplitude",
                tol::BREATHING_AMPLITUDE,
                (amplitude - expected_amplitude).abs() / expected_amplitude,
                format!("Ent_B amplitude {amplitude:.6e} vs k_B eps0/sigma0 = {expected_amplitude:.6e}"),
            ));
        }
        _ => {}
    }
    Ok(())
}

fn push_plot(plot: &mut Vec<PlotPoint>, row: &DiagnosticsRow, k_b: f64) {
    let production_ref = row.ref_divergence.map(|d| k_b * d);
    plot.push(PlotPoint {
        t: row.t,
        quantity: "sigma2",
        measured: row.sigma2_measured,
        reference: row.ref_sigma2,
    });
    plot.push(PlotPoint {
        t: row.t,
        quantity: "ent_boltzmann",
        measured: row.ent_boltzmann,
        reference: row.ref_entropy,
    });
    if let Some(fd) = row.d_ent_b_dt_fd {
        plot.push(PlotPoint {
            t: row.t,
            quantity: "dEntB_dt_fd",
            measured: fd,
            reference: production_ref,
        });
    }
    for (quantity, value) in [
        ("production_advective", row.production_advective),
        ("production_correlation", row.production_correlation),
        ("production_diffusive", row.production_diffusive),
    ] {
        if let Some(measured) = value {
            plot.push(PlotPoint {
                t: row.t,
                quantity,
                measured,
                reference: production_ref,
            });
        }
    }
}

struct DiffusionSample {
    entropy: EntropyReport,
    norm: f64,
    sigma2: f64,
    /// Worst Bohm-force mismatch on the conditioned core and on the whole
    /// valid mask.
    force_gap: Option<(f64, f64)>,
    fields: Option<Table>,
}

fn diffusion_sample(
    cfg: &ScenarioConfig,
    snapshots: &[DiffusionState],
    index: usize,
) -> madelung_core::Result<DiffusionSample> {
    let state = &snapshots[index];
    let flags = ReportFlags {
        k_b: cfg.physics.k_b,
        ..ReportFlags::default()
    };
    let d = state.diffusivity();
    // Material acceleration from the two neighbours, centred on this snapshot.
    let force_gap = if index > 0 && index + 1 < snapshots.len() {
        let accel = diffusion::diffusive_acceleration(&snapshots[index - 1], &snapshots[index + 1])?;
        let force = diffusion::diffusive_bohm_gradient(state.rho(), d)?;
        let mask = accel.mask.and(&force.mask);
        let cut = tol::BOHM_CONDITIONING * state.rho().max();
        let gap = |i: usize| (accel.values()[i] - force.values()[i]).abs();
        Some((
            worst(mask.indices().filter(|&i| state.rho().values()[i] >= cut).map(gap)),
            worst(mask.indices().map(gap)),
        ))
    } else {
        None
    };
    let fields = if cfg.diagnostics.emit_fields {
        let u = madelung::diffusive_velocity(state.rho(), d)?;
        let q = madelung::diffusive_bohm_potential(state.rho(), d)?;
        Some(field_table(
            &["x", "rho", "u_diffusive", "diffusive_bohm_potential"],
            state.grid(),
            state.rho(),
            &[&u, &q],
        ))
    } else {
        None
    };
    Ok(DiffusionSample {
        entropy: entropy_report(state, &flags)?,
        norm: state.rho().integrate(),
        sigma2: madelung::position_variance(state.rho()),
        force_gap,
        fields,
    })
}

fn run_diffusion(cfg: &ScenarioConfig, grid: &Grid) -> RunResult<RunReport> {
    let name = cfg.scenario.name();
    let d = cfg.diffusivity();
    let k_b = cfg.physics.k_b;
    let e = &cfg.evolution;
    let initial = DiffusionState::gaussian(grid, cfg.sigma0(), d, 0.0)?;
    info!("{name}: exact kernel to t = {} with D = {d}", e.t_final);
    let snapshots = diffusion::evolve_diffusion(&initial, e.dt, e.t_final, e.snapshot_stride)?;
    let samples = (0..snapshots.len())
        .into_par_iter()
        .map(|i| diffusion_sample(cfg, &snapshots, i))
        .collect::<madelung_core::Result<Vec<_>>>()?;

    let times: Vec<f64> = snapshots.iter().map(|s| s.time()).collect();
    let entropies: Vec<f64> = samples.iter().map(|s| s.entropy.ent_boltzmann).collect();
    let fd = centered_differences(&times, &entropies);
    let refs = reference_widths(cfg, &times)?.expect("diffusion always has a reference");

    let mut report = empty_report(cfg);
    for (i, s) in samples.iter().enumerate() {
        let row = DiagnosticsRow {
            t: times[i],
            norm: s.norm,
            energy: None,
            sigma2_measured: s.sigma2,
            ent_boltzmann: s.entropy.ent_boltzmann,
            d_ent_b_dt_fd: fd[i],
            production_advective: None,
            production_correlation: None,
            fisher: s.entropy.fisher_information,
            production_diffusive: s.entropy.production_diffusive,
            ent_von_neumann: None,
            ref_sigma2: Some(refs[i].0 * refs[i].0),
            ref_entropy: Some(analytic::gaussian_entropy(refs[i].0, k_b)),
            ref_divergence: Some(refs[i].1),
        };
        push_plot(&mut report.plot, &row, k_b);
        report.table.push(row.cells());
    }
    report.fields = samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.fields.clone().map(|table| FieldDump {
                snapshot: i,
                t: times[i],
                table,
            })
        })
        .collect();

    let production = |s: &DiffusionSample| s.entropy.production_diffusive.expect("diffusion");
    let checks = &mut report.identities;
    checks.push(IdentityCheck::new(
        name,
        "norm_drift",
        tol::NORM_DRIFT,
        worst(samples.iter().map(|s| (s.norm - samples[0].norm).abs())),
        "max |int rho(t) - int rho(0)|",
    ));
    checks.push(IdentityCheck::new(
        name,
        "sigma2_reference",
        tol::DIFFUSION_SIGMA2,
        worst(samples.iter().zip(&refs).map(|(s, r)| (s.sigma2 - r.0 * r.0).abs())),
        "max |<x^2> - (sigma0^2 + 2 D t)|",
    ));
    checks.push(IdentityCheck::new(
        name,
        "production_fisher",
        tol::DIFFUSION_FISHER,
        worst(
            samples
                .iter()
                .map(|s| (production(s) - k_b * d * s.entropy.fisher_information).abs()),
        ),
        "max |production - k_B D Fisher|",
    ));
    checks.push(IdentityCheck::new(
        name,
        "production_reference",
        tol::DIFFUSION_PRODUCTION,
        worst(
            samples
                .iter()
                .zip(&refs)
                .map(|(s, r)| (production(s) - k_b * r.1).abs() / (k_b * r.1)),
        ),
        "relative error of production against k_B D / sigma^2",
    ));
    checks.push(IdentityCheck::new(
        name,
        "entropy_reference",
        tol::DIFFUSION_ENTROPY,
        worst(
            samples
                .iter()
                .zip(&refs)
                .map(|(s, r)| (s.entropy.ent_boltzmann - analytic::gaussian_entropy(r.0, k_b)).abs()),
        ),
        "absolute error of Ent_B against the closed form",
    ));
    let n = samples.len();
    if n > 2 {
        checks.push(IdentityCheck::new(
            name,
            "production_identity",
            tol::DIFFUSION_FD,
            worst(
                (1..n - 1)
                    .map(|i| (fd[i].expect("interior") - production(&samples[i])).abs() / production(&samples[i])),
            ),
            "centered dEnt_B/dt vs k_B D Fisher, relative, interior snapshots",
        ));
        checks.push(IdentityCheck::new(
            name,
            "bohm_force",
            tol::BOHM_FORCE,
            worst(samples.iter().filter_map(|s| s.force_gap.map(|g| g.0))),
            format!(
                "max |D u_d/Dt - grad Q_d| where rho >= {:.0e} max rho, interior snapshots",
                tol::BOHM_CONDITIONING
            ),
        ));
        report.metrics.insert(
            "bohm_force_full_mask".into(),
            worst(samples.iter().filter_map(|s| s.force_gap.map(|g| g.1))),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_at_the_ends_are_one_sided() {
        let t = [0.0, 1.0, 2.0, 4.0];
        let v = [0.0, 1.0, 4.0, 16.0];
        let d = centered_differences(&t, &v);
        assert_eq!(d, vec![Some(1.0), Some(2.0), Some(5.0), Some(6.0)]);
        assert_eq!(centered_differences(&[1.0], &[2.0]), vec![None]);
    }

    #[test]
    fn aborts_name_the_snapshot_being_built() {
        let err = evolution_error(madelung_core::Error::NumericAbort { step: 25 }, 10);
        assert!(matches!(err, RunError::NumericAbort { step: 25, snapshot: 3 }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn worst_keeps_nan() {
        assert!(worst([1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(worst([1.0, 3.0, 2.0]), 3.0);
        assert_eq!(worst(std::iter::empty()), 0.0);
    }

    #[test]
    fn small_free_run_passes() {
        let mut cfg = ScenarioConfig::default_for(ScenarioKind::FreeGaussian);
        cfg.evolution.t_final = 0.5;
        let report = simulate(&cfg).unwrap();
        assert_eq!(report.table.len(), 51);
        for c in &report.identities {
            assert!(c.passed, "{c}");
        }
        let vn = report.column("ent_von_neumann").unwrap();
        assert!(vn.iter().all(Option::is_none));
    }

    #[test]
    fn short_diffusion_run_passes() {
        let mut cfg = ScenarioConfig::default_for(ScenarioKind::DiffusionGaussian);
        cfg.evolution.t_final = 0.2;
        let report = simulate(&cfg).unwrap();
        for c in &report.identities {
            assert!(c.passed, "{c}");
        }
        assert!(report.column("energy").unwrap().iter().all(Option::is_none));
    }
}
