//! Hydrodynamic decomposition of a wavefunction.
//!
//! Writing `Psi = sqrt(rho) exp(i S / hbar)` turns the Schrödinger equation
//! into a continuity equation for `rho` transported by the advective velocity
//! `u_a = grad(S/m)`, plus a momentum equation carrying the Bohm potential.
//! All quantities here are per unit mass (`S~ = S/m`, `Q~ = Q/m`).
//!
//! Velocities come from the local ratio `grad(Psi)/Psi`, never from the
//! unwrapped phase. Pointwise quantities are only defined where the density
//! exceeds [`DENSITY_FLOOR`] times its maximum; elsewhere they are masked.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, Mask, MaskedComplexField, MaskedField, RealField};

/// Relative density floor below which pointwise fields are masked.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Allowed deviation of the norm from one when building a state.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// A normalized wavefunction with its physical constants.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    psi: ComplexField,
    hbar: f64,
    mass: f64,
    time: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {value}")))
    }
}

impl QuantumState {
    /// Wraps `psi`, which must already satisfy `int |psi|^2 dx = 1` within [`NORM_TOLERANCE`].
    pub fn new(psi: ComplexField, hbar: f64, mass: f64, time: f64) -> Result<Self> {
        check_positive("hbar", hbar)?;
        check_positive("mass", mass)?;
        if !time.is_finite() {
            return Err(Error::param("time", "must be finite"));
        }
        let norm = psi.abs_squared().integrate();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(QuantumState { psi, hbar, mass, time })
    }

    /// Rescales `psi` to unit norm before wrapping it.
    pub fn normalized(psi: ComplexField, hbar: f64, mass: f64, time: f64) -> Result<Self> {
        let norm = psi.abs_squared().integrate();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm));
        }
        let scale = norm.sqrt().recip();
        let grid = psi.grid().clone();
        let values = psi.into_values().into_iter().map(|v| v * scale).collect();
        Self::new(ComplexField::new(&grid, values)?, hbar, mass, time)
    }

    pub(crate) fn from_parts_unchecked(psi: ComplexField, hbar: f64, mass: f64, time: f64) -> Self {
        QuantumState { psi, hbar, mass, time }
    }

    pub fn psi(&self) -> &ComplexField {
        &self.psi
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// The diffusivity `hbar / 2m` that identifies `Im(v)` with Fick's drift.
    pub fn quantum_diffusivity(&self) -> f64 {
        self.hbar / (2.0 * self.mass)
    }

    /// `int |psi|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.psi.abs_squared().integrate()
    }

    /// The same state multiplied by the global phase `e^{i theta}`.
    pub fn with_global_phase(&self, theta: f64) -> QuantumState {
        let phase = Complex64::from_polar(1.0, theta);
        let values = self.psi.values().iter().map(|v| v * phase).collect();
        QuantumState {
            psi: ComplexField::new(self.grid(), values).expect("phase rotation keeps samples finite"),
            ..self.clone()
        }
    }

    /// Derivatives `(psi', psi'')`.
    pub(crate) fn spatial_derivatives(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let grid = self.grid();
        (
            grid.differentiate(self.psi.values(), 1),
            grid.differentiate(self.psi.values(), 2),
        )
    }
}

/// Mask of points where `rho >= DENSITY_FLOOR * max(rho)`.
pub fn valid_mask(rho: &RealField) -> Mask {
    let threshold = DENSITY_FLOOR * rho.max();
    Mask::new(rho.values().iter().map(|&r| r > 0.0 && r >= threshold).collect())
}

fn nonempty_mask(rho: &RealField) -> Result<Mask> {
    let mask = valid_mask(rho);
    if mask.none_valid() {
        Err(Error::AllMasked)
    } else {
        Ok(mask)
    }
}

fn check_nonnegative(rho: &RealField) -> Result<()> {
    match rho.values().iter().position(|&r| r < 0.0) {
        Some(index) => Err(Error::NegativeDensity {
            index,
            value: rho.values()[index],
        }),
        None => Ok(()),
    }
}

/// `rho = |psi|^2`.
pub fn density(state: &QuantumState) -> RealField {
    state.psi.abs_squared()
}

/// Second central moment of a density, `<x^2> - <x>^2` over `int rho dx`.
pub fn position_variance(rho: &RealField) -> f64 {
    let grid = rho.grid();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (&x, &r) in grid.points().iter().zip(rho.values()) {
        m0 += r;
        m1 += r * x;
        m2 += r * x * x;
    }
    let mean = m1 / m0;
    m2 / m0 - mean * mean
}

/// `v = -i (hbar/m) grad(Psi)/Psi`. The real part is the advective velocity,
/// the imaginary part equals `-(hbar/2m) grad(ln rho)`.
pub fn complex_velocity(state: &QuantumState) -> Result<MaskedComplexField> {
    let rho = density(state);
    let mask = nonempty_mask(&rho)?;
    let (d1, _) = state.spatial_derivatives();
    let scale = Complex64::new(0.0, -state.hbar / state.mass);
    let values = state
        .psi
        .values()
        .iter()
        .zip(&d1)
        .zip(mask.as_slice())
        .map(|((&psi, &dpsi), &valid)| {
            if valid {
                scale * dpsi / psi
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(MaskedComplexField {
        field: ComplexField::new(state.grid(), values)?,
        mask,
    })
}

/// `u_a = grad(S~)`, the real part of [`complex_velocity`].
pub fn advective_velocity(state: &QuantumState) -> Result<MaskedField> {
    complex_velocity(state).map(|v| v.real())
}

/// Local divergence of the advective velocity,
/// `(hbar/m) Im(psi''/psi - (psi'/psi)^2)`.
///
/// Evaluated pointwise because `u_a` is not periodic (it grows linearly in
/// the tails of a spreading packet).
pub fn advective_divergence(state: &QuantumState) -> Result<MaskedField> {
    let rho = density(state);
    let mask = nonempty_mask(&rho)?;
    let (d1, d2) = state.spatial_derivatives();
    let psi = state.psi.values();
    let scale = state.hbar / state.mass;
    MaskedField::from_fn(state.grid(), mask, |i| {
        let ratio = d1[i] / psi[i];
        scale * (d2[i] / psi[i] - ratio * ratio).im
    })
}

/// Fick drift `u_d = -D grad(ln rho)`, evaluated as `-2D grad(sqrt rho)/sqrt rho`.
pub fn diffusive_velocity(rho: &RealField, diffusivity: f64) -> Result<MaskedField> {
    check_positive("diffusivity", diffusivity)?;
    check_nonnegative(rho)?;
    let mask = nonempty_mask(rho)?;
    let amp = rho.map(f64::sqrt)?;
    let d_amp = amp.derivative(1);
    let (a, da) = (amp.values(), d_amp.values());
    MaskedField::from_fn(rho.grid(), mask, |i| -2.0 * diffusivity * da[i] / a[i])
}

/// `grad^2(sqrt rho) / sqrt rho` on the valid mask.
fn amplitude_curvature(rho: &RealField) -> Result<MaskedField> {
    check_nonnegative(rho)?;
    let mask = nonempty_mask(rho)?;
    let amp = rho.map(f64::sqrt)?;
    let d2 = amp.derivative(2);
    let (a, c) = (amp.values(), d2.values());
    MaskedField::from_fn(rho.grid(), mask, |i| c[i] / a[i])
}

/// Bohm potential per unit mass, `-(hbar^2 / 2m^2) grad^2(sqrt rho)/sqrt rho`.
pub fn bohm_potential(rho: &RealField, hbar: f64, mass: f64) -> Result<MaskedField> {
    check_positive("hbar", hbar)?;
    check_positive("mass", mass)?;
    let coeff = -hbar * hbar / (2.0 * mass * mass);
    scale_masked(amplitude_curvature(rho)?, coeff)
}

/// Diffusive Bohm potential `-2 D^2 grad^2(sqrt rho)/sqrt rho`. Coincides with
/// [`bohm_potential`] when `D = hbar/2m`.
pub fn diffusive_bohm_potential(rho: &RealField, diffusivity: f64) -> Result<MaskedField> {
    check_positive("diffusivity", diffusivity)?;
    scale_masked(amplitude_curvature(rho)?, -2.0 * diffusivity * diffusivity)
}

fn scale_masked(f: MaskedField, coeff: f64) -> Result<MaskedField> {
    Ok(MaskedField {
        field: f.field.map(|v| coeff * v)?,
        mask: f.mask,
    })
}

/// Action per unit mass `S~ = S/m`, with the phase unwrapped from `x = -L`.
///
/// Between adjacent valid points the 2π branch is chosen nearest to the
/// increment predicted by the local advective velocity; if that increment
/// alone exceeds π the grid cannot resolve the phase and the unwrap fails.
/// Across masked gaps only the wrapped difference is available. The result
/// is defined up to a global constant and is generally not periodic, so it
/// should be differentiated with local stencils, not spectrally.
pub fn action_per_mass(state: &QuantumState) -> Result<MaskedField> {
    let velocity = advective_velocity(state)?;
    let mask = velocity.mask.clone();
    let psi = state.psi.values();
    let u = velocity.values();
    let dx = state.grid().spacing();
    let to_phase = state.mass / state.hbar;

    let mut phase = vec![0.0; psi.len()];
    let mut previous: Option<usize> = None;
    for i in mask.indices() {
        phase[i] = match previous {
            None => psi[i].arg(),
            Some(p) => {
                let wrapped = (psi[i] / psi[p]).arg();
                if p + 1 == i {
                    let predicted = to_phase * 0.5 * (u[p] + u[i]) * dx;
                    if predicted.abs() > PI {
                        return Err(Error::UnwrapFailure { index: p });
                    }
                    let turns = ((predicted - wrapped) / (2.0 * PI)).round();
                    phase[p] + wrapped + 2.0 * PI * turns
                } else {
                    phase[p] + wrapped
                }
            }
        };
        previous = Some(i);
    }
    let to_action = state.hbar / state.mass;
    MaskedField::from_fn(state.grid(), mask, |i| to_action * phase[i])
}

/// Hydrodynamic fields of one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungFields {
    pub rho: RealField,
    pub action_per_mass: MaskedField,
    pub u_advective: MaskedField,
    pub u_diffusive: MaskedField,
    pub bohm_potential: MaskedField,
    pub valid_mask: Mask,
}

/// Full decomposition with `u_d` taken at `D = hbar/2m`.
pub fn decompose(state: &QuantumState) -> Result<MadelungFields> {
    let rho = density(state);
    let velocity = complex_velocity(state)?;
    let u_diffusive = diffusive_velocity(&rho, state.quantum_diffusivity())?;
    let bohm = bohm_potential(&rho, state.hbar, state.mass)?;
    Ok(MadelungFields {
        action_per_mass: action_per_mass(state)?,
        u_advective: velocity.real(),
        u_diffusive,
        bohm_potential: bohm,
        valid_mask: velocity.mask,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian_state(grid: &Grid, sigma: f64, hbar: f64, mass: f64) -> QuantumState {
        let psi = ComplexField::from_fn(grid, |x| Complex64::new((-x * x / (4.0 * sigma * sigma)).exp(), 0.0)).unwrap();
        QuantumState::normalized(psi, hbar, mass, 0.0).unwrap()
    }

    fn plane_wave(grid: &Grid, k: f64) -> QuantumState {
        let amp = (2.0 * grid.half_width()).sqrt().recip();
        let psi = ComplexField::from_fn(grid, |x| Complex64::from_polar(amp, k * x)).unwrap();
        QuantumState::new(psi, 1.0, 1.0, 0.0).unwrap()
    }

    fn index_of(grid: &Grid, x: f64) -> usize {
        grid.points()
            .iter()
            .position(|&p| (p - x).abs() < 1e-12)
            .expect("point on grid")
    }

    #[test]
    fn rejects_unnormalized_and_bad_constants() {
        let g = Grid::new(10.0, 64).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            QuantumState::new(psi.clone(), 1.0, 1.0, 0.0),
            Err(Error::NotNormalized(_))
        ));
        assert!(QuantumState::normalized(psi.clone(), 0.0, 1.0, 0.0).is_err());
        assert!(QuantumState::normalized(psi, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn plane_wave_density_is_uniform() {
        let g = Grid::new(10.0, 64).unwrap();
        let k = 3.0 * PI / g.half_width();
        let rho = density(&plane_wave(&g, k));
        for &r in rho.values() {
            assert_abs_diff_eq!(r, 1.0 / 20.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn gaussian_peak_density() {
        let g = Grid::new(40.0, 1024).unwrap();
        let rho = density(&gaussian_state(&g, 1.0, 1.0, 1.0));
        let mid = index_of(&g, 0.0);
        assert_abs_diff_eq!(rho.values()[mid], 0.398_942_280_401_432_7, epsilon = 1e-12);
    }

    #[test]
    fn plane_wave_velocity_is_hbar_k_over_m() {
        let g = Grid::new(10.0, 64).unwrap();
        let k = 2.0 * PI / g.half_width();
        let v = complex_velocity(&plane_wave(&g, k)).unwrap();
        assert_eq!(v.mask.count(), g.num_points());
        for c in v.field.values() {
            assert_abs_diff_eq!(c.re, k, epsilon = 1e-10);
            assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn real_gaussian_velocity() {
        // Oracle: v_i = -(hbar/2m) d/dx ln rho = hbar x / (2 m sigma^2).
        let g = Grid::new(32.0, 1024).unwrap();
        let v = complex_velocity(&gaussian_state(&g, 1.0, 1.0, 1.0)).unwrap();
        let at1 = v.get(index_of(&g, 1.0)).unwrap();
        assert_abs_diff_eq!(at1.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at1.im, 0.5, epsilon = 1e-10);
        let at0 = v.get(index_of(&g, 0.0)).unwrap();
        assert_abs_diff_eq!(at0.norm(), 0.0, epsilon = 1e-12);
        let ua = advective_velocity(&gaussian_state(&g, 1.0, 1.0, 1.0)).unwrap();
        assert!(ua.max_abs() < 1e-8);
    }

    #[test]
    fn diffusive_velocity_examples() {
        let g = Grid::new(32.0, 1024).unwrap();
        let uniform = RealField::constant(&g, 1.0 / 64.0).unwrap();
        assert!(diffusive_velocity(&uniform, 0.5).unwrap().max_abs() < 1e-12);

        // sigma^2 = 2 D t with D = 0.5, t = 1: u_d = x / 2t.
        let rho = density(&gaussian_state(&g, 1.0, 1.0, 1.0));
        let ud = diffusive_velocity(&rho, 0.5).unwrap();
        assert_abs_diff_eq!(ud.get(index_of(&g, 1.0)).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(ud.get(index_of(&g, -2.0)).unwrap(), -1.0, epsilon = 1e-10);
    }

    #[test]
    fn diffusive_velocity_rejects_bad_input() {
        let g = Grid::new(10.0, 16).unwrap();
        let zero = RealField::zeros(&g);
        assert_eq!(diffusive_velocity(&zero, 0.5).unwrap_err(), Error::AllMasked);
        let mut v = vec![0.05; 16];
        v[2] = -1e-3;
        let negative = RealField::new(&g, v).unwrap();
        assert!(matches!(
            diffusive_velocity(&negative, 0.5),
            Err(Error::NegativeDensity { index: 2, .. })
        ));
        let ok = RealField::constant(&g, 0.05).unwrap();
        assert!(diffusive_velocity(&ok, 0.0).is_err());
    }

    #[test]
    fn bohm_potential_of_unit_gaussian() {
        // Oracle: central differences of sqrt(rho) with h -> 0.
        let amp = |x: f64| (2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp();
        let fd = |x: f64| {
            let h = 1e-4;
            -0.5 * (amp(x + h) - 2.0 * amp(x) + amp(x - h)) / (h * h) / amp(x)
        };
        assert!((fd(0.0) - 0.25).abs() < 1e-6);
        assert!((fd(2.0) + 0.25).abs() < 1e-6);

        let g = Grid::new(32.0, 1024).unwrap();
        let rho = density(&gaussian_state(&g, 1.0, 1.0, 1.0));
        let q = bohm_potential(&rho, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(q.get(index_of(&g, 0.0)).unwrap(), 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(q.get(index_of(&g, 2.0)).unwrap(), -0.25, epsilon = 1e-10);

        let uniform = RealField::constant(&g, 1.0 / 64.0).unwrap();
        assert!(bohm_potential(&uniform, 1.0, 1.0).unwrap().max_abs() < 1e-12);
        assert!(diffusive_bohm_potential(&uniform, 0.5).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn diffusive_bohm_matches_quantum_at_hbar_over_2m() {
        let g = Grid::new(40.0, 1024).unwrap();
        let (hbar, mass) = (1.3, 0.7);
        let rho = density(&gaussian_state(&g, 1.0, hbar, mass));
        let q = bohm_potential(&rho, hbar, mass).unwrap();
        let qd = diffusive_bohm_potential(&rho, hbar / (2.0 * mass)).unwrap();
        assert_eq!(q.mask, qd.mask);
        for (a, b) in q.values().iter().zip(qd.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let qd_half = diffusive_bohm_potential(&density(&gaussian_state(&g, 1.0, 1.0, 1.0)), 0.5).unwrap();
        assert_abs_diff_eq!(qd_half.get(index_of(&g, 0.0)).unwrap(), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn bohm_potential_scales_with_hbar_squared() {
        let g = Grid::new(20.0, 256).unwrap();
        let rho = density(&gaussian_state(&g, 1.0, 1.0, 1.0));
        let q1 = bohm_potential(&rho, 1.0, 1.0).unwrap();
        let q2 = bohm_potential(&rho, 2.0, 1.0).unwrap();
        for i in q1.mask.indices() {
            assert!((q2.values()[i] - 4.0 * q1.values()[i]).abs() <= 1e-12 * q2.values()[i].abs().max(1.0));
        }
    }

    #[test]
    fn action_of_plane_wave_is_linear() {
        let g = Grid::new(10.0, 128).unwrap();
        let k = 4.0 * PI / g.half_width();
        let s = action_per_mass(&plane_wave(&g, k)).unwrap();
        let offset = s.values()[0] - k * g.points()[0];
        for (&x, &v) in g.points().iter().zip(s.values()) {
            assert_abs_diff_eq!(v, k * x + offset, epsilon = 1e-9);
        }
    }

    #[test]
    fn action_of_real_gaussian_is_constant() {
        let g = Grid::new(20.0, 256).unwrap();
        let s = action_per_mass(&gaussian_state(&g, 1.0, 1.0, 1.0)).unwrap();
        assert!(s.max_abs() < 1e-12);
    }

    #[test]
    fn unwrap_flags_under_resolved_phase() {
        // A near-node (x - x0 + i eps) with eps << dx: the phase turns by ~π
        // between neighbouring samples.
        let g = Grid::new(10.0, 128).unwrap();
        let x0 = g.points()[70];
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(x - x0, 1e-3) * (-x * x / 4.0).exp()).unwrap();
        let state = QuantumState::normalized(psi, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(action_per_mass(&state), Err(Error::UnwrapFailure { .. })));
    }

    #[test]
    fn variance_of_gaussian() {
        let g = Grid::new(40.0, 1024).unwrap();
        let rho = density(&gaussian_state(&g, 1.5, 1.0, 1.0));
        assert_abs_diff_eq!(position_variance(&rho), 2.25, epsilon = 1e-12);
    }
}
