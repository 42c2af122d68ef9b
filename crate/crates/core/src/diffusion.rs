//! Fickian diffusion `d rho/dt = D grad^2 rho` with an exact spectral heat
//! kernel, the diffusive "force" diagnostics, and the residuals of the
//! Fokker-Planck and entropy-balance identities of a Schrödinger state.
//!
//! Residuals are returned as whole fields so callers can see where an
//! identity degrades, not just by how much.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, MaskedField, RealField};
use crate::madelung::{self, QuantumState, NORM_TOLERANCE};

/// Negative samples smaller than this fraction of `max(rho)` are rounding
/// and get clipped to zero; anything more negative is an error.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState {
    rho: RealField,
    diffusivity: f64,
    time: f64,
}

impl DiffusionState {
    pub fn new(rho: RealField, diffusivity: f64, time: f64) -> Result<Self> {
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(Error::param(
                "diffusivity",
                format!("must be positive, got {diffusivity}"),
            ));
        }
        if !time.is_finite() {
            return Err(Error::param("time", "must be finite"));
        }
        if let Some(index) = rho.values().iter().position(|&r| r < 0.0) {
            return Err(Error::NegativeDensity {
                index,
                value: rho.values()[index],
            });
        }
        let mass = rho.integrate();
        if (mass - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(mass));
        }
        Ok(DiffusionState { rho, diffusivity, time })
    }

    /// Normalized Gaussian of width `sigma` centred at the origin.
    pub fn gaussian(grid: &Grid, sigma: f64, diffusivity: f64, time: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        let rho = RealField::from_fn(grid, |x| (-x * x / (2.0 * sigma * sigma)).exp())?;
        let mass = rho.integrate();
        Self::new(rho.map(|r| r / mass)?, diffusivity, time)
    }

    pub fn rho(&self) -> &RealField {
        &self.rho
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Advances by `dt` with the exact kernel: mode `k` is multiplied by
/// `exp(-D k^2 dt)`. The zero mode is untouched, so mass is conserved.
pub fn diffuse_step(state: &DiffusionState, dt: f64) -> Result<DiffusionState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let grid = state.grid();
    let d = state.diffusivity;
    let mut data: Vec<Complex64> = state.rho.values().iter().map(|&r| Complex64::new(r, 0.0)).collect();
    grid.apply_symbol(&mut data, |_, k| Complex64::new((-d * k * k * dt).exp(), 0.0));

    let floor = -NEGATIVITY_TOLERANCE * state.rho.max();
    let mut values = Vec::with_capacity(data.len());
    for (index, v) in data.iter().enumerate() {
        let r = v.re;
        if r < floor {
            return Err(Error::NegativeDensity { index, value: r });
        }
        values.push(r.max(0.0));
    }
    Ok(DiffusionState {
        rho: RealField::new(grid, values)?,
        diffusivity: d,
        time: state.time + dt,
    })
}

/// Snapshots at `0, stride dt, 2 stride dt, ...` up to `round(t_final/dt)`
/// steps. The kernel is exact, so each snapshot is one kernel application
/// to the initial state; chaining would only accumulate FFT rounding.
pub fn evolve_diffusion(state: &DiffusionState, dt: f64, t_final: f64, stride: usize) -> Result<Vec<DiffusionState>> {
    if !(dt.is_finite() && dt > 0.0) || !(t_final.is_finite() && t_final >= 0.0) || stride == 0 {
        return Err(Error::param("evolution", "need dt > 0, t_final >= 0 and stride >= 1"));
    }
    let total = (t_final / dt).round() as usize;
    let mut out = vec![state.clone()];
    let mut done = 0;
    while done < total {
        done += stride.min(total - done);
        let mut next = diffuse_step(state, done as f64 * dt)?;
        next.time = state.time + done as f64 * dt;
        out.push(next);
    }
    Ok(out)
}

/// `sqrt(rho)` and its first three spectral derivatives.
struct Amplitude {
    a: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Amplitude {
    fn of(rho: &RealField) -> Result<Self> {
        let amp = rho.map(f64::sqrt)?;
        let grid = rho.grid();
        Ok(Amplitude {
            d1: grid.differentiate_real(amp.values(), 1),
            d2: grid.differentiate_real(amp.values(), 2),
            d3: grid.differentiate_real(amp.values(), 3),
            a: amp.into_values(),
        })
    }

    /// `u_d = -2D a'/a`.
    fn velocity(&self, i: usize, d: f64) -> f64 {
        -2.0 * d * self.d1[i] / self.a[i]
    }

    /// `du_d/dx = -2D (a''/a - (a'/a)^2)`.
    fn velocity_gradient(&self, i: usize, d: f64) -> f64 {
        let r = self.d1[i] / self.a[i];
        -2.0 * d * (self.d2[i] / self.a[i] - r * r)
    }
}

fn nonempty(mask: Mask) -> Result<Mask> {
    if mask.none_valid() {
        Err(Error::AllMasked)
    } else {
        Ok(mask)
    }
}

/// Material acceleration `du_d/dt + u_d du_d/dx` between two snapshots.
///
/// The time derivative is the difference quotient of the two `u_d` fields;
/// the advective term uses the average of both snapshots, so the estimate is
/// centred at the midpoint time. Spatial derivatives are taken pointwise
/// from `sqrt(rho)` because `u_d` itself is not periodic.
pub fn diffusive_acceleration(before: &DiffusionState, after: &DiffusionState) -> Result<MaskedField> {
    if !before.grid().same_as(after.grid()) {
        return Err(Error::GridMismatch);
    }
    if before.diffusivity != after.diffusivity {
        return Err(Error::param("diffusivity", "snapshots must share D"));
    }
    let gap = after.time - before.time;
    if !(gap > 0.0) {
        return Err(Error::param("time", "`after` must be later than `before`"));
    }
    let mask = nonempty(madelung::valid_mask(&before.rho).and(&madelung::valid_mask(&after.rho)))?;
    let d = before.diffusivity;
    let (a0, a1) = (Amplitude::of(&before.rho)?, Amplitude::of(&after.rho)?);
    MaskedField::from_fn(before.grid(), mask, |i| {
        let (u0, u1) = (a0.velocity(i, d), a1.velocity(i, d));
        let du_dt = (u1 - u0) / gap;
        let u = 0.5 * (u0 + u1);
        let du_dx = 0.5 * (a0.velocity_gradient(i, d) + a1.velocity_gradient(i, d));
        du_dt + u * du_dx
    })
}

/// Pointwise `d Q~_d/dx` with `Q~_d = -2 D^2 a''/a`, `a = sqrt(rho)`.
pub fn diffusive_bohm_gradient(rho: &RealField, diffusivity: f64) -> Result<MaskedField> {
    if !(diffusivity.is_finite() && diffusivity > 0.0) {
        return Err(Error::param(
            "diffusivity",
            format!("must be positive, got {diffusivity}"),
        ));
    }
    let mask = nonempty(madelung::valid_mask(rho))?;
    let amp = Amplitude::of(rho)?;
    let c = -2.0 * diffusivity * diffusivity;
    MaskedField::from_fn(rho.grid(), mask, |i| {
        let a = amp.a[i];
        c * (amp.d3[i] / a - amp.d2[i] * amp.d1[i] / (a * a))
    })
}

/// `j = rho u_a = (hbar/m) Im(psi* psi')` and `rho u_d = -2D Re(psi* psi')`
/// at `D = hbar/2m`, both smooth and periodic.
fn currents(state: &QuantumState) -> (Vec<f64>, Vec<f64>, Vec<Complex64>) {
    let psi = state.psi().values();
    let d1 = state.grid().differentiate(psi, 1);
    let d = state.quantum_diffusivity();
    let scale = state.hbar() / state.mass();
    let mut advective = Vec::with_capacity(psi.len());
    let mut diffusive = Vec::with_capacity(psi.len());
    for (p, dp) in psi.iter().zip(&d1) {
        let c = p.conj() * dp;
        advective.push(scale * c.im);
        diffusive.push(-2.0 * d * c.re);
    }
    (advective, diffusive, d1)
}

/// `r = drho/dt + div[rho (u_a - u_d)] - (hbar/2m) grad^2 rho`, with `drho/dt`
/// taken from the continuity equation `-div(rho u_a)`. The identity holds
/// exactly, so `r` measures discretization error only.
pub fn fokker_planck_residual(state: &QuantumState) -> RealField {
    let grid = state.grid();
    let d = state.quantum_diffusivity();
    let (j_a, j_d, _) = currents(state);
    let rho = madelung::density(state);
    let drho_dt = grid.differentiate_real(&j_a, 1);
    let net: Vec<f64> = j_a.iter().zip(&j_d).map(|(a, b)| a - b).collect();
    let div_net = grid.differentiate_real(&net, 1);
    let lap = grid.differentiate_real(rho.values(), 2);
    let values = (0..grid.num_points())
        .map(|i| -drho_dt[i] + div_net[i] - d * lap[i])
        .collect();
    RealField::new(grid, values).expect("residual of a finite state is finite")
}

/// Terms of the local entropy balance for one snapshot: `s = -rho ln rho`,
/// `div[(s - rho) u_a]`, and `rho u_a u_d` with `u_d = -D grad ln rho`.
struct EntropyTerms {
    s: Vec<f64>,
    flux_divergence: Vec<f64>,
    source: Vec<f64>,
}

impl EntropyTerms {
    fn of(state: &QuantumState, diffusivity: f64) -> Self {
        let grid = state.grid();
        let (j_a, _, d1) = currents(state);
        let psi = state.psi().values();
        let rho = madelung::density(state);
        let ln_rho = |r: f64| if r > 0.0 { r.ln() } else { 0.0 };
        let s: Vec<f64> = rho.values().iter().map(|&r| -r * ln_rho(r)).collect();
        // (s - rho) u_a = -(ln rho + 1) j, with 0 ln 0 = 0.
        let flux: Vec<f64> = rho
            .values()
            .iter()
            .zip(&j_a)
            .map(|(&r, &j)| if r > 0.0 { -(r.ln() + 1.0) * j } else { 0.0 })
            .collect();
        let source = (0..psi.len())
            .map(|i| {
                if rho.values()[i] > 0.0 {
                    let u_d = -2.0 * diffusivity * (d1[i] / psi[i]).re;
                    j_a[i] * u_d
                } else {
                    0.0
                }
            })
            .collect();
        EntropyTerms {
            s,
            flux_divergence: grid.differentiate_real(&flux, 1),
            source,
        }
    }
}

/// `r = ds/dt + div[(s - rho) u_a] - (hbar/2m)^{-1} rho u_a u_d` between two
/// snapshots, on their joint valid mask.
///
/// `ds/dt` is the difference quotient; the spatial terms are averaged over
/// both snapshots, which centres the estimate at the midpoint time. With
/// `D = hbar/2m` the residual vanishes up to discretization error.
pub fn entropy_equation_residual(before: &QuantumState, after: &QuantumState, diffusivity: f64) -> Result<MaskedField> {
    if !before.grid().same_as(after.grid()) {
        return Err(Error::GridMismatch);
    }
    if !(diffusivity.is_finite() && diffusivity > 0.0) {
        return Err(Error::param(
            "diffusivity",
            format!("must be positive, got {diffusivity}"),
        ));
    }
    let gap = after.time() - before.time();
    let mask = nonempty(
        madelung::valid_mask(&madelung::density(before)).and(&madelung::valid_mask(&madelung::density(after))),
    )?;
    let (t0, t1) = (
        EntropyTerms::of(before, diffusivity),
        EntropyTerms::of(after, diffusivity),
    );
    let inv_d = 1.0 / before.quantum_diffusivity();
    MaskedField::from_fn(before.grid(), mask, |i| {
        let ds_dt = if gap != 0.0 { (t1.s[i] - t0.s[i]) / gap } else { 0.0 };
        let div = 0.5 * (t0.flux_divergence[i] + t1.flux_divergence[i]);
        let source = 0.5 * (t0.source[i] + t1.source[i]);
        ds_dt + div - inv_d * source
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::boltzmann_entropy;
    use crate::schrodinger::{gaussian_packet, harmonic_ground_state, plane_wave};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn index_of(grid: &Grid, x: f64) -> usize {
        grid.points().iter().position(|&p| (p - x).abs() < 1e-12).unwrap()
    }

    #[test]
    fn uniform_density_is_unchanged() {
        let g = Grid::new(10.0, 64).unwrap();
        let s = DiffusionState::new(RealField::constant(&g, 0.05).unwrap(), 0.5, 0.0).unwrap();
        let next = diffuse_step(&s, 0.7).unwrap();
        for &r in next.rho().values() {
            assert_abs_diff_eq!(r, 0.05, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(next.time(), 0.7);
    }

    #[test]
    fn gaussian_widens_exactly() {
        let g = Grid::new(32.0, 512).unwrap();
        let s = DiffusionState::gaussian(&g, 1.0, 0.5, 0.0).unwrap();
        let next = diffuse_step(&s, 1.0).unwrap();
        let var = madelung::position_variance(next.rho());
        assert_abs_diff_eq!(var, 2.0, epsilon = 1e-12);
        // Closed form peak 1/sqrt(2 pi sigma^2) with sigma^2 = 2.
        assert_abs_diff_eq!(
            next.rho().values()[index_of(&g, 0.0)],
            1.0 / (4.0 * PI).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(next.rho().integrate(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn unresolved_spike_reports_negativity() {
        let g = Grid::new(10.0, 64).unwrap();
        let mut v = vec![0.0; 64];
        v[32] = 1.0 / g.spacing();
        let s = DiffusionState::new(RealField::new(&g, v).unwrap(), 1.0, 0.0).unwrap();
        let dt = 1.0 / g.max_wavenumber().powi(2);
        assert!(matches!(diffuse_step(&s, dt), Err(Error::NegativeDensity { .. })));
        assert!(diffuse_step(&s, 0.0).is_err());
    }

    #[test]
    fn state_validation() {
        let g = Grid::new(10.0, 16).unwrap();
        assert!(DiffusionState::new(RealField::constant(&g, 0.05).unwrap(), 0.0, 0.0).is_err());
        assert!(matches!(
            DiffusionState::new(RealField::constant(&g, 0.1).unwrap(), 1.0, 0.0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn evolve_diffusion_snapshots() {
        let g = Grid::new(32.0, 256).unwrap();
        let s = DiffusionState::gaussian(&g, 1.0, 0.5, 0.0).unwrap();
        let snaps = evolve_diffusion(&s, 0.1, 1.0, 3).unwrap();
        let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
        assert_eq!(times.len(), 5);
        assert_abs_diff_eq!(times[4], 1.0, epsilon = 1e-12);
        let var = madelung::position_variance(snaps[4].rho());
        assert_abs_diff_eq!(var, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_grows_under_diffusion() {
        let g = Grid::new(32.0, 256).unwrap();
        let mut s = DiffusionState::gaussian(&g, 0.7, 0.5, 0.0).unwrap();
        let mut previous = boltzmann_entropy(s.rho(), 1.0);
        for _ in 0..50 {
            s = diffuse_step(&s, 0.02).unwrap();
            let e = boltzmann_entropy(s.rho(), 1.0);
            assert!(e - previous >= -1e-12);
            previous = e;
        }
    }

    /// Gaussian on the sigma^2 = 2 D t branch.
    fn branch_state(g: &Grid, d: f64, t: f64) -> DiffusionState {
        DiffusionState::gaussian(g, (2.0 * d * t).sqrt(), d, t).unwrap()
    }

    #[test]
    fn acceleration_of_the_diffusing_gaussian() {
        let g = Grid::new(32.0, 512).unwrap();
        let (d, h) = (0.5, 1e-3);
        let a = diffusive_acceleration(&branch_state(&g, d, 1.0 - h), &branch_state(&g, d, 1.0 + h)).unwrap();
        assert_abs_diff_eq!(a.get(index_of(&g, 1.0)).unwrap(), -0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(a.get(index_of(&g, 0.0)).unwrap(), 0.0, epsilon = 1e-12);

        let force = diffusive_bohm_gradient(branch_state(&g, d, 1.0).rho(), d).unwrap();
        let mask = a.mask.and(&force.mask);
        for i in mask.indices() {
            assert!(
                (a.values()[i] - force.values()[i]).abs() < 1e-3,
                "x = {}",
                g.points()[i]
            );
        }
        assert_abs_diff_eq!(force.get(index_of(&g, 1.0)).unwrap(), -0.25, epsilon = 1e-9);
    }

    #[test]
    fn acceleration_rejects_bad_ordering() {
        let g = Grid::new(32.0, 256).unwrap();
        let s = branch_state(&g, 0.5, 1.0);
        assert!(diffusive_acceleration(&s, &s).is_err());
    }

    #[test]
    fn fokker_planck_residual_vanishes() {
        let g = Grid::new(40.0, 1024).unwrap();
        let s = gaussian_packet(&g, 1.2, 0.2, 1.0, 1.0).unwrap();
        assert!(fokker_planck_residual(&s).max_abs() < 1e-8);
        let p = plane_wave(&g, 5.0 * PI / 40.0, 1.0, 1.0).unwrap();
        assert!(fokker_planck_residual(&p).max_abs() < 1e-14);
    }

    #[test]
    fn entropy_residual_of_ground_state() {
        let g = Grid::new(10.0, 128).unwrap();
        let s = harmonic_ground_state(&g, 1.0, 1.0, 1.0).unwrap();
        let r = entropy_equation_residual(&s, &s, s.quantum_diffusivity()).unwrap();
        assert!(r.max_abs() < 1e-12);
    }

    #[test]
    fn entropy_residual_of_free_gaussian() {
        // Exact free-Gaussian snapshots at t = 1 and t = 1 + 1e-3.
        let g = Grid::new(40.0, 1024).unwrap();
        let at = |t: f64| {
            let sigma = (1.0 + t * t / 4.0).sqrt();
            let state = gaussian_packet(&g, sigma, t / (4.0 + t * t), 1.0, 1.0).unwrap();
            QuantumState::new(state.psi().clone(), 1.0, 1.0, t).unwrap()
        };
        let r = entropy_equation_residual(&at(1.0), &at(1.001), 0.5).unwrap();
        assert!(r.max_abs() < 1e-4, "{}", r.max_abs());
    }
}
