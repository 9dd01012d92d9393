//! Natural cubic spline paths over unit-spaced knots.
//!
//! A window of `w` samples per channel becomes a piecewise cubic on
//! `[0, w − 1]` with knots at the integers. On interval `[i, i + 1]` with
//! `s = t − i` each channel is `a + b·s + c·s² + d·s³`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SplinePath {
    knots: usize,
    channels: usize,
    /// `channels × (knots − 1)` coefficient quadruples, channel-major.
    coeffs: Vec<[f64; 4]>,
}

impl SplinePath {
    /// Fits one spline per row of a `[channels, w]` tensor.
    pub fn fit(window: &Tensor) -> Result<Self> {
        if window.rank() != 2 {
            return Err(Error::shape("spline fit", format!("expected [channels, w], got {:?}", window.shape())));
        }
        Self::fit_rows(window.data(), window.shape()[0], window.shape()[1])
    }

    /// Fits splines to `channels` consecutive rows of `len` samples.
    pub fn fit_rows(samples: &[f64], channels: usize, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidArgument(format!(
                "spline needs at least 2 samples per channel, got {len}"
            )));
        }
        if samples.len() != channels * len {
            return Err(Error::shape(
                "spline fit",
                format!("{} samples for {channels} × {len}", samples.len()),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite spline sample".into()));
        }
        let mut coeffs = Vec::with_capacity(channels * (len - 1));
        let mut second = vec![0.0; len];
        let mut scratch = vec![0.0; len];
        for row in samples.chunks(len) {
            natural_second_derivatives(row, &mut second, &mut scratch);
            for i in 0..len - 1 {
                let (m0, m1) = (second[i], second[i + 1]);
                coeffs.push([
                    row[i],
                    row[i + 1] - row[i] - (2.0 * m0 + m1) / 6.0,
                    m0 / 2.0,
                    (m1 - m0) / 6.0,
                ]);
            }
        }
        Ok(Self {
            knots: len,
            channels,
            coeffs,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn knots(&self) -> usize {
        self.knots
    }

    /// Inclusive time span `[t_0, t_{w−1}]`.
    pub fn span(&self) -> (f64, f64) {
        (0.0, (self.knots - 1) as f64)
    }

    /// Coefficients `(a, b, c, d)` of every interval of `channel`.
    pub fn coefficients(&self, channel: usize) -> &[[f64; 4]] {
        let n = self.knots - 1;
        &self.coeffs[channel * n..(channel + 1) * n]
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.span();
        if !(lo..=hi).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside spline span [{lo}, {hi}]"
            )));
        }
        let i = (t.floor() as usize).min(self.knots - 2);
        Ok((i, t - i as f64))
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (i, s) = self.locate(t)?;
        let n = self.knots - 1;
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let [a, b, cc, d] = self.coeffs[c * n + i];
            *o = a + s * (b + s * (cc + s * d));
        }
        Ok(())
    }

    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.derivative_into(t, &mut out)?;
        Ok(out)
    }

    pub fn derivative_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (i, s) = self.locate(t)?;
        let n = self.knots - 1;
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let [_, b, cc, d] = self.coeffs[c * n + i];
            *o = b + s * (2.0 * cc + 3.0 * s * d);
        }
        Ok(())
    }

    /// Second derivative, used to check the natural boundary condition.
    pub fn eval_second_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let (i, s) = self.locate(t)?;
        let n = self.knots - 1;
        Ok((0..self.channels)
            .map(|c| {
                let [_, _, cc, d] = self.coeffs[c * n + i];
                2.0 * cc + 6.0 * s * d
            })
            .collect())
    }
}

/// Thomas solve of `M[i−1] + 4·M[i] + M[i+1] = 6·(y[i+1] − 2y[i] + y[i−1])`
/// with `M[0] = M[w−1] = 0`.
fn natural_second_derivatives(y: &[f64], m: &mut [f64], scratch: &mut [f64]) {
    let w = y.len();
    m.iter_mut().for_each(|v| *v = 0.0);
    if w < 3 {
        return;
    }
    // forward sweep over interior unknowns 1..w-2; scratch holds modified super-diagonal
    let interior = w - 2;
    let rhs = |i: usize| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for k in 0..interior {
        let i = k + 1;
        let denom = 4.0 - if k == 0 { 0.0 } else { prev_c };
        let c = if k + 1 < interior { 1.0 / denom } else { 0.0 };
        let d = (rhs(i) - if k == 0 { 0.0 } else { prev_d }) / denom;
        scratch[i] = c;
        m[i] = d;
        prev_c = c;
        prev_d = d;
    }
    for i in (1..w - 2).rev() {
        m[i] -= scratch[i] * m[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_samples_have_no_curvature() {
        let y: Vec<f64> = (0..7).map(|i| 2.5 * i as f64 - 1.0).collect();
        let path = SplinePath::fit_rows(&y, 1, 7).unwrap();
        for [_, b, c, d] in path.coefficients(0) {
            assert!((b - 2.5).abs() < 1e-10);
            assert!(c.abs() < 1e-10 && d.abs() < 1e-10);
        }
        assert!((path.eval(2.5).unwrap()[0] - 0.5 * (y[2] + y[3])).abs() < 1e-12);
        for t in [0.0, 1.3, 5.99, 6.0] {
            assert!((path.eval_derivative(t).unwrap()[0] - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_samples_have_zero_derivative() {
        let path = SplinePath::fit_rows(&[4.0; 5], 1, 5).unwrap();
        for t in [0.0, 0.7, 2.0, 3.9, 4.0] {
            assert_eq!(path.eval(t).unwrap()[0], 4.0);
            assert_eq!(path.eval_derivative(t).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn two_samples_give_a_line() {
        let path = SplinePath::fit_rows(&[1.0, 3.0], 1, 2).unwrap();
        assert_eq!(path.eval(0.5).unwrap()[0], 2.0);
        assert_eq!(path.eval_derivative(1.0).unwrap()[0], 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SplinePath::fit_rows(&[1.0], 1, 1).is_err());
        assert!(SplinePath::fit_rows(&[1.0, f64::NAN], 1, 2).is_err());
        let path = SplinePath::fit_rows(&[1.0, 2.0, 0.0], 1, 3).unwrap();
        assert!(path.eval(-0.1).is_err());
        assert!(path.eval_derivative(2.0001).is_err());
    }
}
