//! Uniform periodic grid, spectral differentiation and quadrature.
//!
//! Every field in the crate is sampled on a [`Grid`] covering `[-L, L)` with
//! `N` points. Derivatives are taken in Fourier space, integrals with the
//! rectangle rule, which is spectrally accurate for periodic (or decayed)
//! integrands.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridData {
    half_width: f64,
    num_points: usize,
    spacing: f64,
    points: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic lattice `x_j = -L + j dx`, `dx = 2L/N`, with wavenumbers in
/// standard FFT ordering. Cloning is cheap; clones share the FFT plans.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

impl Grid {
    pub fn new(half_width: f64, num_points: usize) -> Result<Self> {
        if num_points < 8 || !num_points.is_multiple_of(2) {
            return Err(Error::InvalidPointCount(num_points));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidHalfWidth(half_width));
        }
        let spacing = 2.0 * half_width / num_points as f64;
        let points = (0..num_points).map(|j| -half_width + j as f64 * spacing).collect();
        let dk = PI / half_width;
        let wavenumbers = (0..num_points)
            .map(|j| {
                if j < num_points / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - num_points as f64) * dk
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(num_points);
        let inverse = planner.plan_fft_inverse(num_points);
        Ok(Grid(Arc::new(GridData {
            half_width,
            num_points,
            spacing,
            points,
            wavenumbers,
            forward,
            inverse,
        })))
    }

    pub fn half_width(&self) -> f64 {
        self.0.half_width
    }

    pub fn num_points(&self) -> usize {
        self.0.num_points
    }

    pub fn spacing(&self) -> f64 {
        self.0.spacing
    }

    pub fn points(&self) -> &[f64] {
        &self.0.points
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.0.wavenumbers
    }

    /// Largest resolved |k| (the Nyquist wavenumber).
    pub fn max_wavenumber(&self) -> f64 {
        PI / self.0.spacing
    }

    /// Index of the Nyquist mode in FFT ordering.
    pub fn nyquist_index(&self) -> usize {
        self.0.num_points / 2
    }

    /// Grids are interchangeable when they share plans or describe the same lattice.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.num_points == other.0.num_points && self.0.half_width == other.0.half_width)
    }

    /// Rectangle-rule integral `dx * sum(v)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.0.spacing * values.iter().sum::<f64>()
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.0.forward.process(data);
    }

    /// In-place inverse transform, normalized so `inverse(forward(f)) == f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.0.inverse.process(data);
        let scale = 1.0 / self.0.num_points as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Transforms, multiplies mode `j` by `symbol(j, k_j)`, and transforms back.
    pub fn apply_symbol<F>(&self, data: &mut [Complex64], mut symbol: F)
    where
        F: FnMut(usize, f64) -> Complex64,
    {
        self.forward(data);
        for (j, (v, &k)) in data.iter_mut().zip(self.wavenumbers()).enumerate() {
            *v *= symbol(j, k);
        }
        self.inverse(data);
    }

    /// Spectral derivative of complex samples. For odd orders the Nyquist
    /// mode is dropped, since its derivative is not representable.
    pub fn differentiate(&self, values: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut data = values.to_vec();
        if order == 0 {
            return data;
        }
        let nyquist = self.nyquist_index();
        self.apply_symbol(&mut data, |j, k| {
            if order % 2 == 1 && j == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        });
        data
    }

    /// Spectral derivative of real samples. The symbol preserves Hermitian
    /// symmetry, so the imaginary part is rounding residue and is dropped.
    pub fn differentiate_real(&self, values: &[f64], order: u32) -> Vec<f64> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.differentiate(&complex, order).into_iter().map(|c| c.re).collect()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_width", &self.0.half_width)
            .field("num_points", &self.0.num_points)
            .field("spacing", &self.0.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

fn check_samples<T>(grid: &Grid, values: &[T], finite: impl Fn(&T) -> bool) -> Result<()> {
    if values.len() != grid.num_points() {
        return Err(Error::LengthMismatch {
            expected: grid.num_points(),
            actual: values.len(),
        });
    }
    match values.iter().position(|v| !finite(v)) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Real samples on a grid (density, action, velocities, potentials).
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_samples(grid, &values, |v| v.is_finite())?;
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.num_points()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![0.0; grid.num_points()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral derivative of the given order.
    pub fn derivative(&self, order: u32) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.grid.differentiate_real(&self.values, order),
        }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Pointwise map; fails if the map produces non-finite samples.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RealField> {
        RealField::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        RealField::new(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }
}

/// Complex samples on a grid (wavefunction, complex velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        check_samples(grid, &values, |v| v.re.is_finite() && v.im.is_finite())?;
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().iter().map(|&x| f(x)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn derivative(&self, order: u32) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.grid.differentiate(&self.values, order),
        }
    }

    pub fn integrate(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.spacing()
    }

    pub fn abs_squared(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn real(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn imag(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }
}

/// Marks grid points where the density is large enough for logarithmic and
/// Bohm-potential quantities to be well conditioned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn new(valid: Vec<bool>) -> Self {
        Mask(valid)
    }

    pub fn all(len: usize) -> Self {
        Mask(vec![true; len])
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn none_valid(&self) -> bool {
        !self.0.iter().any(|&v| v)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect())
    }

    /// Indices of valid points.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i)
    }
}

/// A real field defined only on a mask. Masked-out samples hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedField {
    pub field: RealField,
    pub mask: Mask,
}

impl MaskedField {
    pub(crate) fn from_fn(grid: &Grid, mask: Mask, f: impl Fn(usize) -> f64) -> Result<Self> {
        let values = (0..grid.num_points())
            .map(|i| if mask.is_valid(i) { f(i) } else { 0.0 })
            .collect();
        Ok(MaskedField {
            field: RealField::new(grid, values)?,
            mask,
        })
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// Value at `index`, or `None` when the point is masked out.
    pub fn get(&self, index: usize) -> Option<f64> {
        self.mask.is_valid(index).then(|| self.field.values()[index])
    }

    /// Largest |value| over valid points.
    pub fn max_abs(&self) -> f64 {
        self.mask
            .indices()
            .fold(0.0, |m, i| m.max(self.field.values()[i].abs()))
    }
}

/// A complex field defined only on a mask. Masked-out samples hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedComplexField {
    pub field: ComplexField,
    pub mask: Mask,
}

impl MaskedComplexField {
    pub fn get(&self, index: usize) -> Option<Complex64> {
        self.mask.is_valid(index).then(|| self.field.values()[index])
    }

    pub fn real(&self) -> MaskedField {
        MaskedField {
            field: self.field.real(),
            mask: self.mask.clone(),
        }
    }

    pub fn imag(&self) -> MaskedField {
        MaskedField {
            field: self.field.imag(),
            mask: self.mask.clone(),
        }
    }
}
