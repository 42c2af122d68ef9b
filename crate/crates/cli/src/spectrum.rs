//! Dominant-frequency fit of a sampled signal.

use std::f64::consts::PI;

/// `offset + amplitude cos(omega t + phase)`, least-squares fitted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidFit {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares `c + a cos(w t) + b sin(w t)` at fixed `w`; returns
/// `(c, a, b, residual sum of squares)`.
fn fit_at(times: &[f64], values: &[f64], omega: f64) -> Option<(f64, f64, f64, f64)> {
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&t, &y) in times.iter().zip(values) {
        let basis = [1.0, (omega * t).cos(), (omega * t).sin()];
        for i in 0..3 {
            r[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(m, r)?;
    let rss = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let e = y - coef[0] - coef[1] * (omega * t).cos() - coef[2] * (omega * t).sin();
            e * e
        })
        .sum();
    Some((coef[0], coef[1], coef[2], rss))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Finds the angular frequency whose sinusoid explains most of the signal.
///
/// Frequencies from half a cycle per record up to the Nyquist rate of the
/// mean spacing are scanned on a grid eight times finer than the Fourier
/// resolution, then the best one is refined by golden-section search.
/// Needs at least eight samples spanning a positive time.
pub fn dominant_sinusoid(times: &[f64], values: &[f64]) -> Option<SinusoidFit> {
    let n = times.len();
    if n < 8 || values.len() != n {
        return None;
    }
    let span = times[n - 1] - times[0];
    if !(span > 0.0) {
        return None;
    }
    let lo = PI / span;
    let hi = PI * (n - 1) as f64 / span;
    let step = PI / (8.0 * span);
    let rss = |w: f64| fit_at(times, values, w).map_or(f64::INFINITY, |f| f.3);

    let count = ((hi - lo) / step).floor() as usize;
    let (mut best, mut best_rss) = (lo, f64::INFINITY);
    for i in 0..=count {
        let w = lo + i as f64 * step;
        let e = rss(w);
        if e < best_rss {
            best = w;
            best_rss = e;
        }
    }

    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best - step).max(lo), best + step);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (rss(c), rss(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = rss(d);
        }
    }
    let omega = 0.5 * (a + b);
    let (offset, ca, sb, rss) = fit_at(times, values, omega)?;
    Some(SinusoidFit {
        omega,
        amplitude: ca.hypot(sb),
        phase: (-sb).atan2(ca),
        offset,
        residual: (rss / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, span: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        (t, y)
    }

    #[test]
    fn recovers_a_clean_sinusoid() {
        let (t, y) = samples(400, 30.0, |t| 1.4 + 0.01 * (2f64.sqrt() * t + 0.3).cos());
        let fit = dominant_sinusoid(&t, &y).unwrap();
        assert!((fit.omega - 2f64.sqrt()).abs() < 1e-8);
        assert!((fit.amplitude - 0.01).abs() < 1e-10);
        assert!((fit.phase - 0.3).abs() < 1e-6);
        assert!((fit.offset - 1.4).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn picks_the_stronger_line() {
        let (t, y) = samples(1000, 40.0, |t| 0.5 * (2.0 * t).cos() + 0.1 * (5.3 * t).sin());
        let fit = dominant_sinusoid(&t, &y).unwrap();
        assert!((fit.omega - 2.0).abs() < 1e-3, "{}", fit.omega);
        assert!((fit.amplitude - 0.5).abs() < 5e-3);
    }

    #[test]
    fn rejects_short_records() {
        assert!(dominant_sinusoid(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).is_none());
        assert!(dominant_sinusoid(&[0.0; 10], &[1.0; 10]).is_none());
    }
}
