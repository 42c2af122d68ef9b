//! Strang split-step evolution of `i hbar dPsi/dt = (-hbar^2/2m d^2/dx^2 + U) Psi`.
//!
//! A step is a half kinetic propagation in Fourier space, a full potential
//! phase in real space, and another half kinetic propagation. Every factor
//! is unimodular, so the norm is preserved to rounding. Consecutive half
//! kinetic factors are fused when several steps are taken at once.

use std::f64::consts::PI;

use log::warn;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::madelung::QuantumState;

/// External potential, evaluated per unit mass (`U~ = U/m`).
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Free,
    /// `U = (m/2) (omega0 x)^2`.
    Harmonic {
        omega0: f64,
    },
    /// Sampled `U~` on the state's grid.
    Tabulated(RealField),
}

impl Potential {
    pub fn harmonic(omega0: f64) -> Result<Self> {
        if omega0.is_finite() && omega0 > 0.0 {
            Ok(Potential::Harmonic { omega0 })
        } else {
            Err(Error::param("omega0", format!("must be positive, got {omega0}")))
        }
    }

    /// `U~(x_j)` on `grid`.
    pub fn per_mass(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Potential::Free => Ok(vec![0.0; grid.num_points()]),
            Potential::Harmonic { omega0 } => Ok(grid.points().iter().map(|&x| 0.5 * (omega0 * x).powi(2)).collect()),
            Potential::Tabulated(field) => {
                if field.grid().same_as(grid) {
                    Ok(field.values().to_vec())
                } else {
                    Err(Error::GridMismatch)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64, snapshot_stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::param("t_final", format!("must be non-negative, got {t_final}")));
        }
        if snapshot_stride == 0 {
            return Err(Error::param("snapshot_stride", "must be at least 1"));
        }
        Ok(EvolutionConfig {
            dt,
            t_final,
            snapshot_stride,
        })
    }

    /// Number of steps whose end time is closest to `t_final`.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Multiplication by `e^{i theta}` written as three shears. The rounded
/// shears still compose to a map of determinant exactly one, so applying the
/// same factor 10^6 times keeps the modulus bounded. A rounded `cos + i sin`
/// is off unit modulus by up to an ulp and the error compounds every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct PhaseRotation {
    flip: bool,
    shear_x: f64,
    shear_y: f64,
}

impl PhaseRotation {
    pub(crate) fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(2.0 * PI);
        if t > PI {
            t -= 2.0 * PI;
        }
        // Keep |t| <= pi/2 so tan(t/2) stays bounded; the remaining half turn
        // is an exact sign flip.
        let flip = t.abs() > 0.5 * PI;
        if flip {
            t -= PI.copysign(t);
        }
        PhaseRotation {
            flip,
            shear_x: -(0.5 * t).tan(),
            shear_y: t.sin(),
        }
    }

    #[inline]
    pub(crate) fn apply(self, v: Complex64) -> Complex64 {
        let (mut x, mut y) = if self.flip { (-v.re, -v.im) } else { (v.re, v.im) };
        x += self.shear_x * y;
        y += self.shear_y * x;
        x += self.shear_x * y;
        Complex64::new(x, y)
    }
}

/// Precomputed split-step factors for one grid, potential and time step.
/// A negative `dt` propagates backwards.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: Grid,
    dt: f64,
    hbar: f64,
    mass: f64,
    half_kinetic: Vec<PhaseRotation>,
    full_kinetic: Vec<PhaseRotation>,
    potential_phase: Vec<PhaseRotation>,
}

impl Propagator {
    pub fn new(grid: &Grid, potential: &Potential, dt: f64, hbar: f64, mass: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::param("dt", format!("must be finite and non-zero, got {dt}")));
        }
        let kmax = grid.max_wavenumber();
        let fastest = dt.abs() * hbar * kmax * kmax / (2.0 * mass);
        if fastest >= PI {
            warn!("dt = {dt} under-resolves the fastest kinetic phase ({fastest:.3} rad per step)");
        }
        let kinetic = |tau: f64| -> Vec<PhaseRotation> {
            grid.wavenumbers()
                .iter()
                .map(|&k| PhaseRotation::new(-hbar * k * k * tau / (2.0 * mass)))
                .collect()
        };
        let potential_phase = potential
            .per_mass(grid)?
            .into_iter()
            .map(|u| PhaseRotation::new(-mass * u * dt / hbar))
            .collect();
        Ok(Propagator {
            grid: grid.clone(),
            dt,
            hbar,
            mass,
            half_kinetic: kinetic(0.5 * dt),
            full_kinetic: kinetic(dt),
            potential_phase,
        })
    }

    /// Propagator matching a state's constants.
    pub fn for_state(state: &QuantumState, potential: &Potential, dt: f64) -> Result<Self> {
        Self::new(state.grid(), potential, dt, state.hbar(), state.mass())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check_state(&self, state: &QuantumState) -> Result<()> {
        if !state.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        if state.hbar() != self.hbar || state.mass() != self.mass {
            return Err(Error::param("state", "hbar and mass must match the propagator"));
        }
        Ok(())
    }

    /// Takes `steps` Strang steps. `first_step` only labels abort errors.
    pub fn advance(&self, state: &QuantumState, steps: usize, first_step: usize) -> Result<QuantumState> {
        self.check_state(state)?;
        if steps == 0 {
            return Ok(state.clone());
        }
        let mut data = state.psi().values().to_vec();
        let multiply = |data: &mut [Complex64], factors: &[PhaseRotation]| {
            for (v, f) in data.iter_mut().zip(factors) {
                *v = f.apply(*v);
            }
        };
        self.grid.forward(&mut data);
        multiply(&mut data, &self.half_kinetic);
        self.grid.inverse(&mut data);
        for i in 0..steps {
            multiply(&mut data, &self.potential_phase);
            self.grid.forward(&mut data);
            let kinetic = if i + 1 == steps {
                &self.half_kinetic
            } else {
                &self.full_kinetic
            };
            multiply(&mut data, kinetic);
            self.grid.inverse(&mut data);
            if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::NumericAbort {
                    step: first_step + i + 1,
                });
            }
        }
        let psi = ComplexField::new(&self.grid, data)?;
        let time = state.time() + steps as f64 * self.dt;
        Ok(QuantumState::from_parts_unchecked(psi, self.hbar, self.mass, time))
    }

    pub fn step(&self, state: &QuantumState) -> Result<QuantumState> {
        self.advance(state, 1, 0)
    }
}

/// One Strang step of size `dt` (negative `dt` steps backwards).
pub fn step(state: &QuantumState, potential: &Potential, dt: f64) -> Result<QuantumState> {
    Propagator::for_state(state, potential, dt)?.step(state)
}

/// `steps` Strang steps of size `dt`.
pub fn propagate(state: &QuantumState, potential: &Potential, dt: f64, steps: usize) -> Result<QuantumState> {
    Propagator::for_state(state, potential, dt)?.advance(state, steps, 0)
}

/// Evolves to `t_final`, recording the initial state, every
/// `snapshot_stride`-th step, and the final state.
pub fn evolve(state: &QuantumState, potential: &Potential, cfg: &EvolutionConfig) -> Result<Vec<QuantumState>> {
    let propagator = Propagator::for_state(state, potential, cfg.dt)?;
    let total = cfg.num_steps();
    let mut snapshots = vec![state.clone()];
    let mut done = 0;
    let mut current = state.clone();
    while done < total {
        let chunk = cfg.snapshot_stride.min(total - done);
        current = propagator.advance(&current, chunk, done)?;
        done += chunk;
        snapshots.push(current.clone());
    }
    Ok(snapshots)
}

/// `<Psi| -hbar^2/2m d^2/dx^2 + U |Psi>` as a complex number; the imaginary
/// part is a discretization residue.
pub fn energy_expectation(state: &QuantumState, potential: &Potential) -> Result<Complex64> {
    let grid = state.grid();
    let u = potential.per_mass(grid)?;
    let psi = state.psi().values();
    let d2 = grid.differentiate(psi, 2);
    let (hbar, mass) = (state.hbar(), state.mass());
    let density: Complex64 = psi
        .iter()
        .zip(&d2)
        .zip(&u)
        .map(|((p, lap), &ut)| p.conj() * (-hbar * hbar / (2.0 * mass) * lap + mass * ut * p))
        .sum();
    Ok(density * grid.spacing())
}

/// Total energy (real part of [`energy_expectation`]).
pub fn energy(state: &QuantumState, potential: &Potential) -> Result<f64> {
    energy_expectation(state, potential).map(|e| e.re)
}

/// Gaussian packet of width `sigma` whose width grows at the logarithmic rate
/// `log_width_rate = d(ln sigma)/dt`, carried by the phase `m beta x^2 / 2 hbar`.
pub fn gaussian_packet(grid: &Grid, sigma: f64, log_width_rate: f64, hbar: f64, mass: f64) -> Result<QuantumState> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma0", format!("must be positive, got {sigma}")));
    }
    let chirp = mass * log_width_rate / (2.0 * hbar);
    let psi = ComplexField::from_fn(grid, |x| {
        Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), chirp * x * x)
    })?;
    QuantumState::normalized(psi, hbar, mass, 0.0)
}

/// Normalized plane wave `e^{ikx}/sqrt(2L)`.
pub fn plane_wave(grid: &Grid, k: f64, hbar: f64, mass: f64) -> Result<QuantumState> {
    plane_wave_superposition(grid, &[(Complex64::new(1.0, 0.0), k)], hbar, mass)
}

/// Normalized superposition `sum_n a_n e^{i k_n x}`.
pub fn plane_wave_superposition(grid: &Grid, modes: &[(Complex64, f64)], hbar: f64, mass: f64) -> Result<QuantumState> {
    if modes.is_empty() {
        return Err(Error::param("modes", "need at least one plane wave"));
    }
    let psi = ComplexField::from_fn(grid, |x| {
        modes.iter().map(|&(a, k)| a * Complex64::from_polar(1.0, k * x)).sum()
    })?;
    QuantumState::normalized(psi, hbar, mass, 0.0)
}

/// Harmonic ground state, `sigma0^2 = hbar / (2 m omega0)`.
pub fn harmonic_ground_state(grid: &Grid, omega0: f64, hbar: f64, mass: f64) -> Result<QuantumState> {
    Potential::harmonic(omega0)?;
    gaussian_packet(grid, (hbar / (2.0 * mass * omega0)).sqrt(), 0.0, hbar, mass)
}

/// Filters `state` towards a stationary state of the discrete propagator.
///
/// The one-step phase `theta = arg <psi|U psi>` tracks the dominant
/// eigenstate; `sum_k w_k e^{-i theta k} U^k psi` under a Hann window `w`
/// spanning `window` time units keeps that eigenstate and suppresses any
/// component whose energy differs by more than about `4 pi hbar / window`.
/// For a Gaussian near a trap's ground state this removes the `O(dt^2)`
/// mismatch between the continuum state and the splitting's own stationary
/// state, which would otherwise make the density breathe.
pub fn stationary_state(state: &QuantumState, potential: &Potential, dt: f64, window: f64) -> Result<QuantumState> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::param("window", format!("must be positive, got {window}")));
    }
    let propagator = Propagator::for_state(state, potential, dt)?;
    let steps = (window / dt.abs()).round() as usize;
    if steps < 2 {
        return Err(Error::param("window", "must span at least two steps"));
    }
    let next = propagator.step(state)?;
    let overlap: Complex64 = state
        .psi()
        .values()
        .iter()
        .zip(next.psi().values())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let rotate = Complex64::from_polar(1.0, -overlap.arg());

    let mut acc = vec![Complex64::new(0.0, 0.0); state.grid().num_points()];
    let mut current = state.clone();
    let mut phase = Complex64::new(1.0, 0.0);
    for k in 0..=steps {
        let w = (PI * k as f64 / steps as f64).sin().powi(2);
        for (a, v) in acc.iter_mut().zip(current.psi().values()) {
            *a += w * phase * v;
        }
        if k < steps {
            current = propagator.advance(&current, 1, k)?;
            phase *= rotate;
        }
    }
    let psi = ComplexField::new(state.grid(), acc)?;
    QuantumState::normalized(psi, state.hbar(), state.mass(), state.time())
}
