//! End-to-end acceptance checks. Prints one PASS/FAIL line per check.
//!
//! Two checks encode claims that the dynamics do not bear out: the breathing
//! frequency of a perturbed trapped packet and the time constancy of the
//! double-integral entropy. They are run as stated and reported as FAIL, but
//! do not fail the process. Any other FAIL does.

use std::f64::consts::{E, PI};
use std::process::ExitCode;

use madelung_core::analytic::uncertainty_relation;
use madelung_core::diffusion::{self, DiffusionState};
use madelung_core::entropy;
use madelung_core::madelung;
use madelung_core::schrodinger::{self, EvolutionConfig, Potential};
use madelung_core::Grid;
use madelung_lab::config::{ScenarioConfig, ScenarioKind, WidthLawName};
use madelung_lab::runner::simulate;
use madelung_lab::RunReport;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

struct Check {
    id: u32,
    title: &'static str,
    /// Why a FAIL is expected, for the two claims the physics contradicts.
    expected_failure: Option<&'static str>,
    run: fn(&mut Runs) -> Outcome,
}

/// Scenario reports shared between checks, computed on first use.
#[derive(Default)]
struct Runs {
    free: Option<RunReport>,
    ground: Option<RunReport>,
    perturbed: Option<RunReport>,
    custom: Option<RunReport>,
    diffusion: Option<RunReport>,
}

fn report(slot: &mut Option<RunReport>, cfg: impl FnOnce() -> ScenarioConfig) -> &RunReport {
    slot.get_or_insert_with(|| simulate(&cfg()).expect("scenario runs"))
}

impl Runs {
    fn free(&mut self) -> &RunReport {
        report(&mut self.free, || {
            ScenarioConfig::default_for(ScenarioKind::FreeGaussian)
        })
    }
    fn ground(&mut self) -> &RunReport {
        report(&mut self.ground, || {
            ScenarioConfig::default_for(ScenarioKind::HarmonicGround)
        })
    }
    fn perturbed(&mut self) -> &RunReport {
        report(&mut self.perturbed, || {
            let mut cfg = ScenarioConfig::default_for(ScenarioKind::HarmonicPerturbed);
            cfg.diagnostics.width_law = WidthLawName::Published;
            cfg
        })
    }
    fn custom(&mut self) -> &RunReport {
        report(&mut self.custom, || ScenarioConfig::default_for(ScenarioKind::Custom))
    }
    fn diffusion(&mut self) -> &RunReport {
        report(&mut self.diffusion, || {
            ScenarioConfig::default_for(ScenarioKind::DiffusionGaussian)
        })
    }
}

fn identity(report: &RunReport, name: &str) -> (bool, String) {
    let c = report
        .identity(name)
        .unwrap_or_else(|| panic!("{} reports {name}", report.scenario));
    (
        c.passed,
        format!("{}:{name} {:.2e}/{:.0e}", report.scenario, c.error, c.tolerance),
    )
}

fn identities(reports: &[&RunReport], names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for r in reports {
        for name in names {
            let (ok, text) = identity(r, name);
            passed &= ok;
            parts.push(text);
        }
    }
    Outcome::new(passed, parts.join(", "))
}

fn column(report: &RunReport, name: &str) -> Vec<f64> {
    report
        .column(name)
        .unwrap()
        .into_iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect()
}

fn row_at(report: &RunReport, t: f64) -> usize {
    column(report, "t")
        .iter()
        .position(|&s| (s - t).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no snapshot at t = {t}"))
}

fn free_spreading(runs: &mut Runs) -> Outcome {
    identities(&[runs.free()], &["sigma2_reference"])
}

fn entropy_trace(runs: &mut Runs) -> Outcome {
    // Independent closed form: Ent_B = 1/2 ln(2 pi e sigma^2) with
    // sigma^2 = 1 + t^2/4 at sigma0 = hbar = m = k_B = 1.
    let oracle = |t: f64| 0.5 * (2.0 * PI * E * (1.0 + 0.25 * t * t)).ln();
    let r = runs.free();
    let t = column(r, "t");
    let ent = column(r, "ent_boltzmann");
    let worst = t
        .iter()
        .zip(&ent)
        .map(|(&t, &s)| (s - oracle(t)).abs())
        .fold(0.0, f64::max);
    let at2 = ent[row_at(r, 2.0)];
    let passed = worst < 1e-3 && (at2 - oracle(2.0)).abs() < 1e-3;
    Outcome::new(
        passed,
        format!(
            "max |Ent_B - closed form| = {worst:.2e}; Ent_B(2) = {at2:.5} vs closed form {:.5} \
             (a quoted 2.11208 equals Ent_B0 + ln 2, not the formula)",
            oracle(2.0)
        ),
    )
}

fn production_identity(runs: &mut Runs) -> Outcome {
    let r = runs.free();
    let (ok, text) = identity(r, "production_identity");
    let i = row_at(r, 2.0);
    let fd = column(r, "dEntB_dt_fd")[i];
    let div = column(r, "production_advective")[i];
    let near = |v: f64| (v - 0.25).abs() / 0.25 < 1e-2;
    Outcome::new(
        ok && near(fd) && near(div),
        format!("{text}; at t=2 dEnt/dt = {fd:.6}, k_B<div u_a> = {div:.6}, expected 0.25"),
    )
}

fn correlation_identity(runs: &mut Runs) -> Outcome {
    runs.free();
    runs.ground();
    runs.perturbed();
    runs.custom();
    let all = [
        runs.free.as_ref().unwrap(),
        runs.ground.as_ref().unwrap(),
        runs.perturbed.as_ref().unwrap(),
        runs.custom.as_ref().unwrap(),
    ];
    identities(&all, &["correlation_identity"])
}

fn harmonic_ground(runs: &mut Runs) -> Outcome {
    let r = runs.ground();
    let mut out = identities(&[r], &["entropy_constancy", "advective_velocity", "density_drift"]);
    out.detail += &format!(
        "; initial state filtered to the splitting's stationary state, shift {:.1e} from the analytic Gaussian",
        r.metrics["stationary_filter_density_shift"]
    );
    out
}

fn harmonic_breathing(runs: &mut Runs) -> Outcome {
    let r = runs.perturbed();
    let omega = r.metrics["breathing_omega_fit"];
    let target = 2f64.sqrt();
    let freq_ok = (omega - target).abs() / target < 1e-2;
    let (amp_ok, amp) = identity(r, "breathing_amplitude");
    let (trace_ok, trace) = identity(r, "width_trace");
    Outcome::new(
        freq_ok && amp_ok && trace_ok,
        format!(
            "fitted omega {omega:.5} vs sqrt(2) omega0 = {target:.5} ({}); {amp}; {trace} against the sigma sigma'' = omega0^2 (s^2 - sigma^2) trace; \
             the Schrodinger width obeys sigma'' = omega0^2 (s^4/sigma^3 - sigma) and breathes at 2 omega0",
            if freq_ok { "ok" } else { "off" }
        ),
    )
}

fn diffusion_exactness(runs: &mut Runs) -> Outcome {
    let mut out = identities(&[runs.diffusion()], &["sigma2_reference", "production_fisher"]);
    // Point-source branch sigma^2 = 2 D t, started at t = 0.5 from its exact
    // density and carried to t = 4 by the kernel.
    let d = 0.5;
    let grid = Grid::new(40.0, 256).unwrap();
    let start = DiffusionState::gaussian(&grid, (2.0 * d * 0.5f64).sqrt(), d, 0.5).unwrap();
    let snaps = diffusion::evolve_diffusion(&start, 1e-3, 3.5, 50).unwrap();
    let worst = snaps
        .iter()
        .map(|s| (entropy::production_diffusive(s.rho(), d, 1.0) - 0.5 / s.time()).abs())
        .fold(0.0, f64::max);
    out.passed &= worst < 1e-3;
    out.detail += &format!("; point branch |production - 1/2t| max {worst:.2e}/1e-3 over t in [0.5, 4]");
    out
}

fn diffusive_bohm_force(_: &mut Runs) -> Outcome {
    // States on the sigma^2 = 2 D t branch sampled from the closed form at
    // t = 1 - h, 1, 1 + h.
    let (d, t, h) = (0.5, 1.0, 1e-2);
    let grid = Grid::new(40.0, 1024).unwrap();
    let at = |t: f64| DiffusionState::gaussian(&grid, (2.0 * d * t).sqrt(), d, t).unwrap();
    let accel = diffusion::diffusive_acceleration(&at(t - h), &at(t + h)).unwrap();
    let force = diffusion::diffusive_bohm_gradient(at(t).rho(), d).unwrap();
    let mask = accel.mask.and(&force.mask);
    let (mut gap, mut acc_ref, mut force_ref, mut count) = (0.0f64, 0.0f64, 0.0f64, 0);
    for i in mask.indices() {
        let x = grid.points()[i];
        let expected = -x / (4.0 * t * t);
        gap = gap.max((accel.values()[i] - force.values()[i]).abs());
        acc_ref = acc_ref.max((accel.values()[i] - expected).abs());
        force_ref = force_ref.max((force.values()[i] - expected).abs());
        count += 1;
    }
    let passed = gap < 1e-3 && acc_ref < 1e-3 && force_ref < 1e-3;
    Outcome::new(
        passed,
        format!(
            "on {count} valid points: |Du/Dt - grad Q_d| {gap:.2e}, |Du/Dt + x/4t^2| {acc_ref:.2e}, |grad Q_d + x/4t^2| {force_ref:.2e} (tol 1e-3)"
        ),
    )
}

/// `-int int a a' (ln a + ln a')` for a real state, by midpoint quadrature on
/// its own fine grid.
fn double_quadrature_oracle(sigma: f64) -> f64 {
    let (half, m) = (12.0 * sigma, 3000usize);
    let h = 2.0 * half / m as f64;
    let amp = |x: f64| (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp();
    let samples: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let a = amp(-half + (i as f64 + 0.5) * h);
            (a, a.ln())
        })
        .collect();
    let mut total = 0.0;
    for &(a, la) in &samples {
        for &(b, lb) in &samples {
            total += a * b * (la + lb);
        }
    }
    -total * h * h
}

fn von_neumann(_: &mut Runs) -> Outcome {
    let grid = Grid::new(20.0, 256).unwrap();
    let psi0 = schrodinger::gaussian_packet(&grid, 1.0, 0.0, 1.0, 1.0).unwrap();
    let snaps = schrodinger::evolve(&psi0, &Potential::Free, &EvolutionConfig::new(1e-3, 2.0, 250).unwrap()).unwrap();
    let values: Vec<f64> = snaps
        .iter()
        .map(|s| entropy::von_neumann_entropy(s, 256).unwrap())
        .collect();
    let v0 = values[0];
    let drift = values.iter().map(|v| (v - v0).abs() / v0.abs()).fold(0.0, f64::max);

    // The double sum runs over the valid mask, so the reduction does too;
    // the tails below the floor are worth a few parts in 1e6.
    let rho = madelung::density(&psi0);
    let amp: Vec<f64> = rho.values().iter().map(|r| r.sqrt()).collect();
    let dx = grid.spacing();
    let reduce = |points: &[usize]| {
        let int_a: f64 = points.iter().map(|&i| amp[i]).sum::<f64>() * dx;
        let int_a_ln_a: f64 = points.iter().map(|&i| amp[i] * amp[i].ln()).sum::<f64>() * dx;
        -2.0 * int_a * int_a_ln_a
    };
    let masked: Vec<usize> = madelung::valid_mask(&rho).indices().collect();
    let everywhere: Vec<usize> = (0..amp.len()).filter(|&i| amp[i] > 0.0).collect();
    let reduction = reduce(&masked);
    let full = reduce(&everywhere);
    let oracle = double_quadrature_oracle(1.0);
    let reduction_ok = (v0 - reduction).abs() < 1e-8;
    let oracle_ok = (v0 - oracle).abs() / oracle < 1e-4;
    let quoted_ok = (v0 - 9.6192).abs() / 9.6192 < 1e-4;
    Outcome::new(
        drift < 1e-3 && reduction_ok && oracle_ok && quoted_ok,
        format!(
            "drift over t in [0,2]: {drift:.3e} (values {v0:.4} -> {:.4}, tol 1e-3); static {v0:.9} vs masked reduction {reduction:.9} ({}, full grid {full:.6}) \
             vs double-quadrature oracle {oracle:.6} ({}) vs 9.6192 ({})",
            values.last().unwrap(),
            if reduction_ok { "ok" } else { "off" },
            if oracle_ok { "ok" } else { "off" },
            if quoted_ok { "ok" } else { "off" },
        ),
    )
}

fn residuals(runs: &mut Runs) -> Outcome {
    identities(&[runs.free()], &["fokker_planck_residual", "entropy_equation_residual"])
}

fn conservation(runs: &mut Runs) -> Outcome {
    runs.free();
    runs.ground();
    runs.perturbed();
    runs.custom();
    runs.diffusion();
    let quantum = [
        runs.free.as_ref().unwrap(),
        runs.ground.as_ref().unwrap(),
        runs.perturbed.as_ref().unwrap(),
        runs.custom.as_ref().unwrap(),
    ];
    let mut out = identities(&quantum, &["norm_drift", "energy_drift", "time_reversal"]);
    let (ok, text) = identity(runs.diffusion.as_ref().unwrap(), "norm_drift");
    out.passed &= ok;
    out.detail += &format!(", {text} (energy and reversal do not apply to diffusion)");
    out
}

fn uncertainty_bound(_: &mut Runs) -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_ulps = 0.0f64;
    let mut flagged = true;
    for _ in 0..10 {
        let hbar: f64 = rng.gen_range(0.1..10.0);
        let mass: f64 = rng.gen_range(0.1..10.0);
        let (value, ok) = uncertainty_relation(hbar / (2.0 * mass), mass, hbar);
        let bound = 0.5 * hbar;
        let ulp = f64::from_bits(bound.to_bits() + 1) - bound;
        worst_ulps = worst_ulps.max((value - bound).abs() / ulp);
        flagged &= ok;
    }
    Outcome::new(
        flagged && worst_ulps <= 1.0,
        format!("10 seeded (hbar, m) pairs: m D = hbar/2 within {worst_ulps} ulp, bound flag {flagged}"),
    )
}

fn main() -> ExitCode {
    let checks = [
        Check {
            id: 1,
            title: "free-particle spreading",
            expected_failure: None,
            run: free_spreading,
        },
        Check {
            id: 2,
            title: "free entropy trace",
            expected_failure: None,
            run: entropy_trace,
        },
        Check {
            id: 3,
            title: "entropy production identity",
            expected_failure: None,
            run: production_identity,
        },
        Check {
            id: 4,
            title: "velocity correlation identity",
            expected_failure: None,
            run: correlation_identity,
        },
        Check {
            id: 5,
            title: "harmonic ground state",
            expected_failure: None,
            run: harmonic_ground,
        },
        Check {
            id: 6,
            title: "perturbed harmonic breathing",
            expected_failure: Some("the evolved packet breathes at 2 omega0, not sqrt(2) omega0"),
            run: harmonic_breathing,
        },
        Check {
            id: 7,
            title: "diffusion exactness",
            expected_failure: None,
            run: diffusion_exactness,
        },
        Check {
            id: 8,
            title: "diffusive Bohm force",
            expected_failure: None,
            run: diffusive_bohm_force,
        },
        Check {
            id: 9,
            title: "double-integral entropy",
            expected_failure: Some("the functional is not conserved by free evolution"),
            run: von_neumann,
        },
        Check {
            id: 10,
            title: "Fokker-Planck and entropy residuals",
            expected_failure: None,
            run: residuals,
        },
        Check {
            id: 11,
            title: "conservation suite",
            expected_failure: None,
            run: conservation,
        },
        Check {
            id: 12,
            title: "uncertainty bound",
            expected_failure: None,
            run: uncertainty_bound,
        },
    ];
    let mut runs = Runs::default();
    let (mut passed, mut unexpected) = (0, Vec::new());
    for check in &checks {
        let outcome = (check.run)(&mut runs);
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        let note = match (outcome.passed, check.expected_failure) {
            (false, Some(why)) => format!(" [expected: {why}]"),
            _ => String::new(),
        };
        println!("{status} {:02} {}: {}{note}", check.id, check.title, outcome.detail);
        if outcome.passed {
            passed += 1;
        } else if check.expected_failure.is_none() {
            unexpected.push(check.id);
        }
    }
    println!("acceptance: {passed}/{} PASS", checks.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
