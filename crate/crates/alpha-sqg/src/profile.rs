//! Sampled radial functions with cubic-spline evaluation.
//!
//! A [`RadialProfile`] holds uniform samples of a function of the radius on
//! `[0, R_max]` together with a natural cubic spline interpolant, so values
//! and first/second derivatives can be read off anywhere. Profiles are the
//! common currency between the bump construction, the base-flow solve, the
//! phase/damping integrals and the experiment harness.

use crate::error::{Result, SqgError};

/// Uniformly sampled radial function with spline derivatives.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    /// Sample radii `0, h, 2h, …, R_max`.
    r_grid: Vec<f64>,
    /// Sample values.
    values: Vec<f64>,
    /// Spline second derivatives at the nodes (not-a-knot boundaries).
    second: Vec<f64>,
}

impl RadialProfile {
    /// Builds a profile from uniform samples on `[0, r_max]`.
    pub fn from_samples(values: Vec<f64>, r_max: f64) -> Result<Self> {
        if values.len() < 4 {
            return Err(SqgError::InvalidGeometry(format!(
                "need at least 4 samples, got {}",
                values.len()
            )));
        }
        if !(r_max > 0.0) {
            return Err(SqgError::InvalidGeometry(format!("r_max = {r_max} must be positive")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SqgError::InvalidGeometry("non-finite sample".into()));
        }
        let n = values.len();
        let r_grid: Vec<f64> = (0..n)
            .map(|i| r_max * i as f64 / (n - 1) as f64)
            .collect();
        let second = spline_second_derivatives(&values, r_max / (n - 1) as f64);
        Ok(RadialProfile {
            r_grid,
            values,
            second,
        })
    }

    /// Samples `f` at `n` uniform radii on `[0, r_max]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, n: usize, r_max: f64) -> Result<Self> {
        let values: Vec<f64> = (0..n)
            .map(|i| f(r_max * i as f64 / (n - 1) as f64))
            .collect();
        Self::from_samples(values, r_max)
    }

    /// Outer end of the sample grid.
    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    /// Sample radii.
    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    /// Sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True if the profile has no samples (never the case after construction).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spline value at `r`; `r` is clamped to `[0, R_max]`.
    pub fn eval(&self, r: f64) -> f64 {
        self.piece(r).0
    }

    /// Spline first derivative at `r` (clamped).
    pub fn deriv1(&self, r: f64) -> f64 {
        self.piece(r).1
    }

    /// Spline second derivative at `r` (clamped).
    pub fn deriv2(&self, r: f64) -> f64 {
        self.piece(r).2
    }

    /// Evaluates value, first and second derivative at once.
    fn piece(&self, r: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let h = self.r_grid[1];
        let r = r.clamp(0.0, self.r_max());
        let i = ((r / h) as usize).min(n - 2);
        let a = self.r_grid[i];
        let t = r - a;
        let (ya, yb) = (self.values[i], self.values[i + 1]);
        let (ma, mb) = (self.second[i], self.second[i + 1]);
        // Cubic on [a, a+h] written in terms of node values and second
        // derivatives of the natural spline.
        let u = h - t;
        let val = ma * u * u * u / (6.0 * h)
            + mb * t * t * t / (6.0 * h)
            + (ya / h - ma * h / 6.0) * u
            + (yb / h - mb * h / 6.0) * t;
        let d1 = -ma * u * u / (2.0 * h) + mb * t * t / (2.0 * h) + (yb - ya) / h
            - (mb - ma) * h / 6.0;
        let d2 = ma * u / h + mb * t / h;
        (val, d1, d2)
    }

    /// Maximum absolute sample value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// New profile with the same grid and values `f(r_i, y_i)`.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .r_grid
            .iter()
            .zip(&self.values)
            .map(|(&r, &y)| f(r, y))
            .collect();
        RadialProfile::from_samples(values, self.r_max()).expect("same geometry")
    }

    /// Pointwise linear combination `Σ cᵢ pᵢ` of profiles sharing a grid.
    pub fn linear_combination(profiles: &[&RadialProfile], coeffs: &[f64]) -> Result<Self> {
        assert_eq!(profiles.len(), coeffs.len());
        let first = profiles[0];
        let mut values = vec![0.0; first.len()];
        for (p, &c) in profiles.iter().zip(coeffs) {
            if p.len() != first.len() || (p.r_max() - first.r_max()).abs() > 1e-12 {
                return Err(SqgError::InvalidGeometry(
                    "profiles in a linear combination must share a grid".into(),
                ));
            }
            for (v, y) in values.iter_mut().zip(&p.values) {
                *v += c * y;
            }
        }
        RadialProfile::from_samples(values, first.r_max())
    }

    /// Serializes as `r,value` CSV lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value\n");
        for (r, v) in self.r_grid.iter().zip(&self.values) {
            out.push_str(&format!("{r:.17e},{v:.17e}\n"));
        }
        out
    }

    /// Parses the format produced by [`RadialProfile::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut r_max = 0.0;
        for line in text.lines().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (r, v) = line.split_once(',').ok_or_else(|| {
                SqgError::InvalidGeometry(format!("bad profile CSV line: {line}"))
            })?;
            let r: f64 = r
                .parse()
                .map_err(|_| SqgError::InvalidGeometry(format!("bad radius: {r}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| SqgError::InvalidGeometry(format!("bad value: {v}")))?;
            r_max = r;
            values.push(v);
        }
        RadialProfile::from_samples(values, r_max)
    }
}

/// Second derivatives of the cubic spline through uniform samples with
/// not-a-knot boundary conditions (third derivative continuous across the
/// first and last interior nodes, avoiding the natural-spline boundary
/// layer).
fn spline_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 4 {
        return m;
    }
    let d = |i: usize| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h);
    // Not-a-knot eliminates M₀ = 2M₁ - M₂ (and symmetrically on the right),
    // which reduces the first and last interior rows to identities.
    m[1] = d(1) / 6.0;
    m[n - 2] = d(n - 2) / 6.0;
    // Remaining unknowns M₂ … M_{n-3} satisfy the uniform tridiagonal system
    // M_{i-1} + 4 M_i + M_{i+1} = d_i with known boundary values.
    let k = n - 4; // number of unknowns
    if k > 0 {
        let mut diag = vec![4.0; k];
        let mut rhs = vec![0.0; k];
        for (j, r) in rhs.iter_mut().enumerate() {
            *r = d(j + 2);
        }
        rhs[0] -= m[1];
        rhs[k - 1] -= m[n - 2];
        for i in 1..k {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        m[k + 1] = rhs[k - 1] / diag[k - 1];
        for i in (1..k).rev() {
            m[i + 1] = (rhs[i - 1] - m[i + 2]) / diag[i - 1];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reproduces_samples_at_nodes() {
        let p = RadialProfile::from_fn(|r| (r * 1.7).sin(), 257, 4.0).unwrap();
        for (&r, &v) in p.r_grid().iter().zip(p.values()) {
            assert_abs_diff_eq!(p.eval(r), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolates_smooth_function() {
        let p = RadialProfile::from_fn(|r| (-r * r).exp(), 1025, 4.0).unwrap();
        for i in 0..200 {
            let r = 4.0 * (i as f64 + 0.37) / 200.0;
            assert_abs_diff_eq!(p.eval(r), (-r * r).exp(), epsilon = 1e-8);
            assert_abs_diff_eq!(p.deriv1(r), -2.0 * r * (-r * r).exp(), epsilon = 1e-5);
        }
    }

    #[test]
    fn second_derivative_accuracy_in_interior() {
        let p = RadialProfile::from_fn(|r| (2.0 * r).cos(), 4097, 4.0).unwrap();
        for i in 1..40 {
            let r = 0.5 + 3.0 * i as f64 / 40.0;
            assert_abs_diff_eq!(p.deriv2(r), -4.0 * (2.0 * r).cos(), epsilon = 1e-3);
        }
    }

    #[test]
    fn clamps_outside_grid() {
        let p = RadialProfile::from_fn(|r| r, 65, 2.0).unwrap();
        assert_abs_diff_eq!(p.eval(5.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(-1.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let p = RadialProfile::from_fn(|r| r * r - 1.0, 33, 3.0).unwrap();
        let q = RadialProfile::from_csv(&p.to_csv()).unwrap();
        assert_eq!(p.len(), q.len());
        for (a, b) in p.values().iter().zip(q.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_combination_is_pointwise() {
        let a = RadialProfile::from_fn(|r| r, 33, 1.0).unwrap();
        let b = RadialProfile::from_fn(|r| r * r, 33, 1.0).unwrap();
        let c = RadialProfile::linear_combination(&[&a, &b], &[2.0, -1.0]).unwrap();
        assert_abs_diff_eq!(c.eval(0.5), 2.0 * 0.5 - 0.25, epsilon = 1e-9);
    }

    #[test]
    fn rejects_tiny_sample_sets() {
        assert!(RadialProfile::from_samples(vec![1.0, 2.0], 1.0).is_err());
    }
}
