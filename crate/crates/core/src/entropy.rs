//! Entropy functionals and production rates.
//!
//! Expectation integrals `<f> = int rho f dx` use the valid mask of the
//! density: masked points contribute nothing (their weight `rho` is already
//! negligible). Time derivatives of entropies are not computed here.

use rayon::prelude::*;

use crate::diffusion::DiffusionState;
use crate::error::{Error, Result};
use crate::grid::{MaskedField, RealField};
use crate::madelung::{self, QuantumState};

/// Default largest grid accepted by [`von_neumann_entropy`].
pub const DEFAULT_VN_MAX_POINTS: usize = 512;

/// `-k_B int rho ln rho dx`, with masked points taken as `0 ln 0 = 0`.
pub fn boltzmann_entropy(rho: &RealField, k_b: f64) -> f64 {
    let mask = madelung::valid_mask(rho);
    let sum: f64 = mask
        .indices()
        .map(|i| {
            let r = rho.values()[i];
            r * r.ln()
        })
        .sum();
    -k_b * sum * rho.grid().spacing()
}

fn expectation(rho: &RealField, f: &MaskedField) -> f64 {
    let r = rho.values();
    let v = f.values();
    f.mask.indices().map(|i| r[i] * v[i]).sum::<f64>() * rho.grid().spacing()
}

/// `k_B <div u_a>`, the Boltzmann entropy production of a Schrödinger state.
pub fn production_advective(state: &QuantumState, k_b: f64) -> Result<f64> {
    let divergence = madelung::advective_divergence(state)?;
    Ok(k_b * expectation(&madelung::density(state), &divergence))
}

/// Fisher information `int (grad rho)^2 / rho dx` over the valid mask.
pub fn fisher_information(rho: &RealField) -> f64 {
    let mask = madelung::valid_mask(rho);
    let grad = rho.derivative(1);
    let (r, g) = (rho.values(), grad.values());
    mask.indices().map(|i| g[i] * g[i] / r[i]).sum::<f64>() * rho.grid().spacing()
}

/// `k_B D Fi`, the entropy production of Fickian diffusion. Never negative.
pub fn production_diffusive(rho: &RealField, diffusivity: f64, k_b: f64) -> f64 {
    k_b * diffusivity * fisher_information(rho)
}

/// `(hbar/2m)^{-1} k_B <u_a u_d>` with `u_d` taken at `D = hbar/2m`.
///
/// Equal to [`production_advective`] by integration by parts.
pub fn production_correlation(state: &QuantumState, k_b: f64) -> Result<f64> {
    let rho = madelung::density(state);
    let d = state.quantum_diffusivity();
    let ua = madelung::advective_velocity(state)?;
    let ud = madelung::diffusive_velocity(&rho, d)?;
    let product = MaskedField {
        field: ua.field.zip_with(&ud.field, |a, b| a * b)?,
        mask: ua.mask.and(&ud.mask),
    };
    Ok(k_b * expectation(&rho, &product) / d)
}

/// Double-integral entropy functional of a pure state,
///
/// `-int int sqrt(rho rho') [ln sqrt(rho rho') cos(dS/hbar) + (dS/hbar) sin(dS/hbar)] dx dx'`
///
/// with `dS = S(x) - S(x')` from the left-unwrapped action. Masked points
/// are left out of both sums. The value depends on the unwrap branch of `S`,
/// which is fixed by unwrapping from `x = -L`.
///
/// Costs O(N^2); grids larger than `max_points` are refused.
pub fn von_neumann_entropy(state: &QuantumState, max_points: usize) -> Result<f64> {
    let n = state.grid().num_points();
    if n > max_points {
        return Err(Error::BudgetExceeded {
            points: n,
            budget: max_points,
        });
    }
    let action = madelung::action_per_mass(state)?;
    let rho = madelung::density(state);
    let to_phase = state.mass() / state.hbar();
    let points: Vec<(f64, f64, f64)> = action
        .mask
        .indices()
        .map(|i| {
            let amp = rho.values()[i].sqrt();
            (amp, amp.ln(), to_phase * action.values()[i])
        })
        .collect();

    // Rows are summed sequentially and reduced in index order, so the result
    // does not depend on how rayon schedules them.
    let rows: Vec<f64> = points
        .par_iter()
        .map(|&(a, ln_a, phase)| {
            points
                .iter()
                .map(|&(b, ln_b, other)| {
                    let theta = phase - other;
                    a * b * ((ln_a + ln_b) * theta.cos() + theta * theta.sin())
                })
                .sum::<f64>()
        })
        .collect();
    let dx = state.grid().spacing();
    Ok(-rows.iter().sum::<f64>() * dx * dx)
}

/// Which diagnostics [`entropy_report`] fills in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportFlags {
    pub k_b: f64,
    pub von_neumann: bool,
    pub vn_max_points: usize,
}

impl Default for ReportFlags {
    fn default() -> Self {
        ReportFlags {
            k_b: 1.0,
            von_neumann: false,
            vn_max_points: DEFAULT_VN_MAX_POINTS,
        }
    }
}

/// Scalar entropy diagnostics of one snapshot. Absent entries do not apply
/// to the snapshot's dynamics or were not requested.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub k_b: f64,
    pub ent_boltzmann: f64,
    pub fisher_information: f64,
    pub production_advective: Option<f64>,
    pub production_correlation: Option<f64>,
    pub production_diffusive: Option<f64>,
    pub ent_von_neumann: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub enum Snapshot<'a> {
    Quantum(&'a QuantumState),
    Diffusion(&'a DiffusionState),
}

impl<'a> From<&'a QuantumState> for Snapshot<'a> {
    fn from(s: &'a QuantumState) -> Self {
        Snapshot::Quantum(s)
    }
}

impl<'a> From<&'a DiffusionState> for Snapshot<'a> {
    fn from(s: &'a DiffusionState) -> Self {
        Snapshot::Diffusion(s)
    }
}

pub fn entropy_report<'a>(snapshot: impl Into<Snapshot<'a>>, flags: &ReportFlags) -> Result<EntropyReport> {
    let k_b = flags.k_b;
    match snapshot.into() {
        Snapshot::Quantum(state) => {
            let rho = madelung::density(state);
            let ent_von_neumann = if flags.von_neumann {
                Some(von_neumann_entropy(state, flags.vn_max_points)?)
            } else {
                None
            };
            Ok(EntropyReport {
                k_b,
                ent_boltzmann: boltzmann_entropy(&rho, k_b),
                fisher_information: fisher_information(&rho),
                production_advective: Some(production_advective(state, k_b)?),
                production_correlation: Some(production_correlation(state, k_b)?),
                production_diffusive: None,
                ent_von_neumann,
            })
        }
        Snapshot::Diffusion(state) => {
            let rho = state.rho();
            Ok(EntropyReport {
                k_b,
                ent_boltzmann: boltzmann_entropy(rho, k_b),
                fisher_information: fisher_information(rho),
                production_advective: None,
                production_correlation: None,
                production_diffusive: Some(production_diffusive(rho, state.diffusivity(), k_b)),
                ent_von_neumann: None,
            })
        }
    }
}
