//! Closed-form and ODE reference solutions for Gaussian packets.
//!
//! Everything here is a pure function of [`GaussianParams`]; the numerical
//! solvers are checked against these.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// Largest `|epsilon0| / sigma0` for which the linearized breathing formulas
/// are offered.
pub const LINEAR_REGIME: f64 = 0.05;

/// Parameters of a Gaussian packet and of the dynamics it is placed in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParams {
    sigma0: f64,
    hbar: f64,
    mass: f64,
    omega0: Option<f64>,
    diffusivity: Option<f64>,
    epsilon0: Option<f64>,
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must be positive, got {value}")))
    }
}

impl GaussianParams {
    pub fn new(sigma0: f64, hbar: f64, mass: f64) -> Result<Self> {
        Ok(GaussianParams {
            sigma0: positive("sigma0", sigma0)?,
            hbar: positive("hbar", hbar)?,
            mass: positive("mass", mass)?,
            omega0: None,
            diffusivity: None,
            epsilon0: None,
        })
    }

    pub fn with_omega0(mut self, omega0: f64) -> Result<Self> {
        self.omega0 = Some(positive("omega0", omega0)?);
        Ok(self)
    }

    pub fn with_diffusivity(mut self, diffusivity: f64) -> Result<Self> {
        self.diffusivity = Some(positive("diffusivity", diffusivity)?);
        Ok(self)
    }

    /// Initial width offset. May be negative but must leave a positive width.
    pub fn with_epsilon0(mut self, epsilon0: f64) -> Result<Self> {
        if !epsilon0.is_finite() || self.sigma0 + epsilon0 <= 0.0 {
            return Err(Error::param(
                "epsilon0",
                format!("sigma0 + epsilon0 must be positive, got {epsilon0}"),
            ));
        }
        self.epsilon0 = Some(epsilon0);
        Ok(self)
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega0(&self) -> Option<f64> {
        self.omega0
    }

    pub fn diffusivity(&self) -> Option<f64> {
        self.diffusivity
    }

    pub fn epsilon0(&self) -> Option<f64> {
        self.epsilon0
    }

    fn require_omega0(&self) -> Result<f64> {
        self.omega0
            .ok_or_else(|| Error::param("omega0", "required for harmonic references"))
    }

    fn require_diffusivity(&self) -> Result<f64> {
        self.diffusivity
            .ok_or_else(|| Error::param("diffusivity", "required for diffusion references"))
    }
}

/// Boltzmann entropy of a normal density of width `sigma`.
pub fn gaussian_entropy(sigma: f64, k_b: f64) -> f64 {
    k_b * (sigma * (2.0 * PI * E).sqrt()).ln()
}

/// Width of a free packet that starts unchirped at `t = 0`.
pub fn free_sigma(p: &GaussianParams, t: f64) -> f64 {
    let spread = p.hbar * t / (2.0 * p.mass * p.sigma0);
    (p.sigma0 * p.sigma0 + spread * spread).sqrt()
}

pub fn free_entropy(p: &GaussianParams, t: f64, k_b: f64) -> f64 {
    let tau = p.hbar * t / (2.0 * p.mass * p.sigma0 * p.sigma0);
    gaussian_entropy(p.sigma0, k_b) + 0.5 * k_b * (1.0 + tau * tau).ln()
}

/// `div u_a = d ln(sigma)/dt` for the free packet.
pub fn free_divergence(p: &GaussianParams, t: f64) -> f64 {
    let t0 = 2.0 * p.mass * p.sigma0 * p.sigma0 / p.hbar;
    t / (t0 * t0 + t * t)
}

/// Width and `d ln(sigma)/dt` of a free packet that has width `sigma0` and
/// logarithmic growth rate `beta` at `t = 0`.
pub fn chirped_free_sigma(p: &GaussianParams, beta: f64, t: f64) -> (f64, f64) {
    let a = p.hbar / (2.0 * p.mass * p.sigma0);
    let grow = 1.0 + beta * t;
    let s2 = p.sigma0 * p.sigma0 * grow * grow + a * a * t * t;
    (s2.sqrt(), (p.sigma0 * p.sigma0 * beta * grow + a * a * t) / s2)
}

/// Ordinary differential equation used for the width of a Gaussian in a
/// harmonic trap, with `s` the stationary width `sqrt(hbar / 2 m omega0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WidthLaw {
    /// `sigma sigma'' = omega0^2 (s^2 - sigma^2)`. Small oscillations have
    /// angular frequency `sqrt(2) omega0`.
    #[default]
    Published,
    /// `sigma'' = omega0^2 (s^4 / sigma^3 - sigma)`, which is what the
    /// Schrödinger equation gives for a Gaussian. Small oscillations have
    /// angular frequency `2 omega0`.
    Madelung,
}

impl WidthLaw {
    pub fn acceleration(self, omega0: f64, stationary: f64, sigma: f64) -> f64 {
        let w2 = omega0 * omega0;
        let s2 = stationary * stationary;
        match self {
            WidthLaw::Published => w2 * (s2 - sigma * sigma) / sigma,
            WidthLaw::Madelung => w2 * (s2 * s2 / (sigma * sigma * sigma) - sigma),
        }
    }

    /// Quantity conserved along exact solutions.
    pub fn first_integral(self, omega0: f64, stationary: f64, sigma: f64, rate: f64) -> f64 {
        let w2 = omega0 * omega0;
        let s2 = stationary * stationary;
        let potential = match self {
            WidthLaw::Published => sigma * sigma - 2.0 * s2 * sigma.ln(),
            WidthLaw::Madelung => sigma * sigma + s2 * s2 / (sigma * sigma),
        };
        rate * rate + w2 * potential
    }

    pub fn breathing_frequency(self, omega0: f64) -> f64 {
        match self {
            WidthLaw::Published => 2f64.sqrt() * omega0,
            WidthLaw::Madelung => 2.0 * omega0,
        }
    }
}

/// `sqrt(hbar / 2 m omega0)`, the width of the harmonic ground state.
pub fn stationary_width(p: &GaussianParams) -> Result<f64> {
    let omega0 = p.require_omega0()?;
    Ok((p.hbar / (2.0 * p.mass * omega0)).sqrt())
}

/// Sampled width history. `f` (the time-dependent part of the action) is
/// accumulated by the trapezoid rule at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaTrace {
    times: Vec<f64>,
    sigma: Vec<f64>,
    log_rate: Vec<f64>,
    phase: Vec<f64>,
    phase_scale: f64,
}

impl SigmaTrace {
    /// `times` strictly increasing, `sigma > 0`, `log_rate = d ln(sigma)/dt`.
    /// `hbar_over_2m` scales the action's time-dependent part.
    pub fn new(times: Vec<f64>, sigma: Vec<f64>, log_rate: Vec<f64>, hbar_over_2m: f64) -> Result<Self> {
        if times.is_empty() || times.len() != sigma.len() || times.len() != log_rate.len() {
            return Err(Error::param(
                "trace",
                "times, sigma and log_rate need equal nonzero length",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("trace", "times must be strictly increasing"));
        }
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::WidthCollapse {
                time: times[i],
                sigma: sigma[i],
            });
        }
        let c = -hbar_over_2m * hbar_over_2m;
        let mut phase = Vec::with_capacity(times.len());
        phase.push(0.0);
        for i in 1..times.len() {
            let step = 0.5 * (times[i] - times[i - 1]) * (sigma[i - 1].powi(-2) + sigma[i].powi(-2));
            phase.push(phase[i - 1] + c * step);
        }
        Ok(SigmaTrace {
            times,
            sigma,
            log_rate,
            phase,
            phase_scale: c,
        })
    }

    /// Closed-form free-particle trace sampled at `times`.
    pub fn free(p: &GaussianParams, times: &[f64]) -> Result<Self> {
        let sigma = times.iter().map(|&t| free_sigma(p, t)).collect();
        let rate = times.iter().map(|&t| free_divergence(p, t)).collect();
        Self::new(times.to_vec(), sigma, rate, p.hbar / (2.0 * p.mass))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn log_rate(&self) -> &[f64] {
        &self.log_rate
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interval index and fraction for `t`; exact nodes have fraction 0.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = (self.times[0], *self.times.last().expect("non-empty"));
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { time: t, start, end });
        }
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        if i + 1 >= self.times.len() {
            return Ok((self.times.len() - 1, 0.0));
        }
        Ok((i, (t - self.times[i]) / (self.times[i + 1] - self.times[i])))
    }

    /// Linear interpolation of `(sigma, d ln sigma/dt)` at `t`.
    pub fn sample(&self, t: f64) -> Result<(f64, f64)> {
        let (i, w) = self.locate(t)?;
        if w == 0.0 {
            return Ok((self.sigma[i], self.log_rate[i]));
        }
        let lerp = |v: &[f64]| v[i] + w * (v[i + 1] - v[i]);
        Ok((lerp(&self.sigma), lerp(&self.log_rate)))
    }

    /// `f(t) = -(hbar/2m)^2 int_{t0}^{t} dt'/sigma^2`, with `f(t0) = 0`.
    fn phase_at(&self, t: f64) -> Result<f64> {
        let (i, w) = self.locate(t)?;
        if w == 0.0 {
            return Ok(self.phase[i]);
        }
        // Partial trapezoid with 1/sigma^2 interpolated linearly.
        let a = self.sigma[i].powi(-2);
        let b = self.sigma[i + 1].powi(-2);
        let h = t - self.times[i];
        let mid = a + w * (b - a);
        Ok(self.phase[i] + self.phase_scale * 0.5 * h * (a + mid))
    }
}

/// Integration controls for [`harmonic_sigma_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicWidth {
    pub law: WidthLaw,
    pub sigma_init: f64,
    pub rate_init: f64,
    /// Upper bound on the RK4 step; defaults to `1 / (50 omega0)`.
    pub max_step: f64,
}

impl HarmonicWidth {
    /// `sigma(0) = sigma0 + epsilon0`, `sigma'(0) = 0`.
    pub fn defaults(p: &GaussianParams, law: WidthLaw) -> Result<Self> {
        let omega0 = p.require_omega0()?;
        Ok(HarmonicWidth {
            law,
            sigma_init: p.sigma0 + p.epsilon0.unwrap_or(0.0),
            rate_init: 0.0,
            max_step: 1.0 / (50.0 * omega0),
        })
    }
}

/// Integrates the width equation with fixed-step RK4 and records the state at
/// each entry of `t_grid`. Between grid entries the interval is split into
/// equal steps no larger than `min(grid spacing, 1/(50 omega0))`.
pub fn harmonic_sigma(p: &GaussianParams, t_grid: &[f64], law: WidthLaw) -> Result<SigmaTrace> {
    harmonic_sigma_with(p, t_grid, &HarmonicWidth::defaults(p, law)?)
}

pub fn harmonic_sigma_with(p: &GaussianParams, t_grid: &[f64], ctl: &HarmonicWidth) -> Result<SigmaTrace> {
    let omega0 = p.require_omega0()?;
    let s = stationary_width(p)?;
    if !(ctl.max_step.is_finite() && ctl.max_step > 0.0) {
        return Err(Error::param("max_step", "must be positive"));
    }
    if !(ctl.sigma_init.is_finite() && ctl.sigma_init > 0.0) || !ctl.rate_init.is_finite() {
        return Err(Error::param("sigma_init", "initial width must be positive and finite"));
    }
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must not be empty"));
    }
    let accel = |sigma: f64| ctl.law.acceleration(omega0, s, sigma);

    let mut state = (ctl.sigma_init, ctl.rate_init);
    let mut sigma = vec![state.0];
    let mut rates = vec![state.1];
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        if !(span > 0.0) {
            return Err(Error::param("t_grid", "must be strictly increasing"));
        }
        let n = (span / ctl.max_step).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for i in 0..n {
            let (y, v) = state;
            let k1 = (v, accel(y));
            let k2 = (v + 0.5 * h * k1.1, accel(y + 0.5 * h * k1.0));
            let k3 = (v + 0.5 * h * k2.1, accel(y + 0.5 * h * k2.0));
            let k4 = (v + h * k3.1, accel(y + h * k3.0));
            state = (
                y + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                v + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            );
            if !(state.0.is_finite() && state.0 > 0.0) {
                return Err(Error::WidthCollapse {
                    time: w[0] + (i + 1) as f64 * h,
                    sigma: state.0,
                });
            }
        }
        sigma.push(state.0);
        rates.push(state.1);
    }
    let log_rate = sigma.iter().zip(&rates).map(|(s, r)| r / s).collect();
    SigmaTrace::new(t_grid.to_vec(), sigma, log_rate, p.hbar / (2.0 * p.mass))
}

/// Small-amplitude breathing of the Boltzmann entropy: returns the value
/// `Ent_0 + k_B (eps0/sigma0) cos(w t)` and its rate, with `w` the law's
/// breathing frequency and `Ent_0` the entropy of the stationary width.
pub fn harmonic_entropy_linearized(p: &GaussianParams, t: f64, k_b: f64, law: WidthLaw) -> Result<(f64, f64)> {
    let omega0 = p.require_omega0()?;
    let eps = p.epsilon0.unwrap_or(0.0);
    let ratio = eps / p.sigma0;
    if ratio.abs() >= LINEAR_REGIME {
        return Err(Error::param(
            "epsilon0",
            format!("|epsilon0|/sigma0 = {} is outside the linear regime", ratio.abs()),
        ));
    }
    let w = law.breathing_frequency(omega0);
    let base = gaussian_entropy(stationary_width(p)?, k_b);
    Ok((base + k_b * ratio * (w * t).cos(), -k_b * w * ratio * (w * t).sin()))
}

/// Action per unit mass of a centred Gaussian,
/// `S(x, t) = (x^2/2) d ln(sigma)/dt + f(t)` with
/// `f(t) = -(hbar/2m)^2 int_{t0}^t dt'/sigma^2` and `f(t0) = 0`.
pub fn gaussian_action(trace: &SigmaTrace, x: f64, t: f64) -> Result<f64> {
    let (_, rate) = trace.sample(t)?;
    Ok(0.5 * x * x * rate + trace.phase_at(t)?)
}

/// Which spreading Gaussian the diffusion reference follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionBranch {
    /// `sigma^2 = 2 D t`, singular at `t = 0`.
    Point,
    /// `sigma^2 = sigma0^2 + 2 D t`.
    Offset,
}

/// Closed-form diffusing Gaussian at one instant. Rates are per unit `k_B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionReference {
    pub sigma: f64,
    pub diffusivity: f64,
    /// `D / sigma^2`, equal to `D` times the Fisher information.
    pub production: f64,
}

impl DiffusionReference {
    /// `u_d = -D d ln(rho)/dx = D x / sigma^2`.
    pub fn velocity(&self, x: f64) -> f64 {
        self.diffusivity * x / (self.sigma * self.sigma)
    }

    /// `du_d/dt + u_d du_d/dx = -D^2 x / sigma^4`.
    pub fn acceleration(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        -self.diffusivity * self.diffusivity * x / (s2 * s2)
    }
}

pub fn diffusion_reference(p: &GaussianParams, t: f64, branch: DiffusionBranch) -> Result<DiffusionReference> {
    let d = p.require_diffusivity()?;
    let variance = match branch {
        DiffusionBranch::Point if t > 0.0 => 2.0 * d * t,
        DiffusionBranch::Offset if t >= 0.0 => p.sigma0 * p.sigma0 + 2.0 * d * t,
        _ => return Err(Error::param("t", format!("{t} is outside the branch's domain"))),
    };
    if !variance.is_finite() {
        return Err(Error::param("t", "must be finite"));
    }
    Ok(DiffusionReference {
        sigma: variance.sqrt(),
        diffusivity: d,
        production: d / variance,
    })
}

/// Position at `t` of a fluid parcel that sits at `x0` at time `t0` and
/// moves with `u_d`. Parcels keep their place relative to the width.
pub fn parcel_position(p: &GaussianParams, branch: DiffusionBranch, x0: f64, t0: f64, t: f64) -> Result<f64> {
    let from = diffusion_reference(p, t0, branch)?;
    let to = diffusion_reference(p, t, branch)?;
    Ok(x0 * to.sigma / from.sigma)
}

/// Returns `l_x p_x = m D` and whether it equals `hbar/2`.
pub fn uncertainty_relation(diffusivity: f64, mass: f64, hbar: f64) -> (f64, bool) {
    let product = mass * diffusivity;
    let bound = 0.5 * hbar;
    (product, (product - bound).abs() <= 1e-12 * bound.abs().max(1.0))
}
