//! Periodized-plane spectral fields.
//!
//! The whole-plane problem is periodized onto the torus `[-L, L)²` with `n`
//! points per side. Fields are stored as Fourier coefficients `c_m` in the
//! convention `f(x) = Σ_m c_m e^{i k·x}`, `k = π m / L`, so every fractional
//! multiplier (`|k|^s`, `e^{-|k|^α t}`, Riesz transforms, derivatives) is an
//! exact coefficient-wise product.

use crate::error::{Result, SqgError};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

thread_local! {
    static FFT_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    FFT_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Uniform periodic grid on the box `[-L, L)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    l: f64,
}

impl Grid {
    /// Creates a grid with `n` points per side (even, `n >= 16`) on `[-L, L)²`.
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(SqgError::Config(format!("grid n = {n} must be even and >= 16")));
        }
        if !(l > 0.0) {
            return Err(SqgError::Config(format!("grid L = {l} must be positive")));
        }
        Ok(Grid { n, l })
    }

    /// Points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half box side length.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Grid spacing `2L/n`.
    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Signed integer mode for storage index `i`.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Wavenumber `k = π m / L` for storage index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI * self.mode(i) as f64 / self.l
    }

    /// Physical coordinate of sample index `i` (same for both axes).
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + self.dx() * i as f64
    }

    /// Largest resolved wavenumber magnitude per axis (below Nyquist).
    pub fn k_max(&self) -> f64 {
        PI * (self.n as f64 / 2.0 - 1.0) / self.l
    }
}

/// A real field stored as Fourier coefficients on a [`Grid`].
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    /// Row-major coefficients: index `i * n + j` holds mode `(m₁(i), m₂(j))`.
    coeffs: Vec<Complex64>,
}

/// In-place 2D FFT over rows and columns.
fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    // Rows.
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    // Columns, via a gather/scatter scratch buffer.
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

impl SpectralField {
    /// Zero field.
    pub fn zeros(grid: Grid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n * grid.n],
        }
    }

    /// Forward-transforms physical samples (row-major, `x₁` the slow index).
    pub fn from_physical(grid: Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.n * grid.n);
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut data, grid.n, false);
        let scale = 1.0 / (grid.n * grid.n) as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
        SpectralField { grid, coeffs: data }
    }

    /// Samples `f(x₁, x₂)` on the grid and transforms.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                values[i * n + j] = f(x1, grid.coord(j));
            }
        }
        Self::from_physical(grid, &values)
    }

    /// Wraps existing coefficients (used by checkpoint restore).
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.n * grid.n);
        SpectralField { grid, coeffs }
    }

    /// Inverse transform to physical samples (real parts; the imaginary
    /// residue of a conjugate-symmetric field is at rounding level).
    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft2(&mut data, self.grid.n, true);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Grid of this field.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Raw coefficients.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mean value (the `(0,0)` coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Applies a scalar symbol `σ(|k|)`. If `σ` is singular (non-finite) at
    /// `k = 0`, the field must be zero-mean and the zero mode maps to 0 by
    /// convention. Nyquist rows are zeroed to preserve realness.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64) -> f64) -> Result<SpectralField> {
        let singular = !symbol(0.0).is_finite();
        if singular && self.mean().abs() > 1e-12 {
            return Err(SqgError::NonzeroMeanWithSingularSymbol { mean: self.mean() });
        }
        self.apply_symbol(|k1, k2| {
            let k = (k1 * k1 + k2 * k2).sqrt();
            if k == 0.0 {
                if singular {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(symbol(0.0), 0.0)
                }
            } else {
                Complex64::new(symbol(k), 0.0)
            }
        })
    }

    /// Applies a general symbol `σ(k₁, k₂)`; the caller is responsible for
    /// keeping the symbol conjugate-compatible (`σ(-k) = conj σ(k)`).
    pub fn apply_symbol(&self, symbol: impl Fn(f64, f64) -> Complex64) -> Result<SpectralField> {
        let n = self.grid.n;
        let mut out = self.coeffs.clone();
        for i in 0..n {
            let m1 = self.grid.mode(i);
            let k1 = self.grid.wavenumber(i);
            for j in 0..n {
                let m2 = self.grid.mode(j);
                let idx = i * n + j;
                // Zero the Nyquist rows: they have no conjugate partner.
                if m1 == -(n as i64) / 2 || m2 == -(n as i64) / 2 {
                    out[idx] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let s = symbol(k1, self.grid.wavenumber(j));
                if !s.is_finite() {
                    return Err(SqgError::NonConvergence {
                        context: "symbol evaluated to non-finite value",
                        residual: f64::INFINITY,
                        tol: 0.0,
                    });
                }
                out[idx] *= s;
            }
        }
        Ok(SpectralField {
            grid: self.grid,
            coeffs: out,
        })
    }

    /// Partial derivative along axis 1 or 2 (multiplier `i k_axis`).
    pub fn derivative(&self, axis: usize) -> SpectralField {
        assert!(axis == 1 || axis == 2);
        self.apply_symbol(|k1, k2| {
            let k = if axis == 1 { k1 } else { k2 };
            Complex64::new(0.0, k)
        })
        .expect("derivative symbol is finite")
    }

    /// 2/3-rule dealiasing: zeroes modes with `max(|m₁|,|m₂|) > n/3`.
    pub fn dealias(&self) -> SpectralField {
        let n = self.grid.n;
        let cut = (n / 3) as i64;
        let mut out = self.coeffs.clone();
        for i in 0..n {
            let m1 = self.grid.mode(i).abs();
            for j in 0..n {
                if m1.max(self.grid.mode(j).abs()) > cut {
                    out[i * n + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        SpectralField {
            grid: self.grid,
            coeffs: out,
        }
    }

    /// Sobolev norm by Plancherel: homogeneous `‖Λ^s w‖₂`, or the sum
    /// `‖w‖₂ + ‖Λ^s w‖₂` in the inhomogeneous case.
    pub fn sobolev_norm(&self, s: f64, homogeneous: bool) -> Result<f64> {
        assert!((-2.0..=6.0).contains(&s), "s must lie in [-2, 6]");
        if s < 0.0 && self.mean().abs() > 1e-12 {
            return Err(SqgError::NonzeroMean { mean: self.mean() });
        }
        let n = self.grid.n;
        let area = (2.0 * self.grid.l).powi(2);
        let mut l2 = 0.0;
        let mut hs = 0.0;
        for i in 0..n {
            let k1 = self.grid.wavenumber(i);
            for j in 0..n {
                let k2 = self.grid.wavenumber(j);
                let e = self.coeffs[i * n + j].norm_sqr();
                l2 += e;
                let ksq = k1 * k1 + k2 * k2;
                if ksq > 0.0 {
                    hs += ksq.powf(s) * e;
                }
            }
        }
        let l2 = (area * l2).sqrt();
        let hs = (area * hs).sqrt();
        Ok(if homogeneous { hs } else { l2 + hs })
    }

    /// `L²` norm over the box.
    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0, true).expect("s = 0 never fails")
    }

    /// Maximum absolute physical value.
    pub fn max_abs_physical(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m: f64, &v| m.max(v.abs()))
    }

    /// Translates the field: output `(x₁, x₂) ↦ f(x₁ + d₁, x₂ + d₂)`.
    pub fn translate(&self, d1: f64, d2: f64) -> SpectralField {
        self.apply_symbol(|k1, k2| Complex64::from_polar(1.0, k1 * d1 + k2 * d2))
            .expect("translation symbol is finite")
    }

    /// Coefficient-wise sum.
    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// Coefficient-wise difference.
    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, c: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Pointwise physical-space product, re-transformed. The caller decides
    /// whether to dealias the result.
    pub fn multiply_physical(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid);
        let a = self.to_physical();
        let b = other.to_physical();
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        SpectralField::from_physical(self.grid, &prod)
    }

    /// Relative deviation from conjugate symmetry (0 for a real field).
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.grid.n;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ci = (n - i) % n;
                let cj = (n - j) % n;
                let a = self.coeffs[i * n + j];
                let b = self.coeffs[ci * n + cj].conj();
                num += (a - b).norm_sqr();
                den += a.norm_sqr();
            }
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Divergence-free velocity pair produced by [`riesz_velocity`].
#[derive(Debug, Clone)]
pub struct VelocityField {
    /// First component `v₁ = -R₂ w`.
    pub v1: SpectralField,
    /// Second component `v₂ = R₁ w`.
    pub v2: SpectralField,
}

impl VelocityField {
    /// Relative spectral divergence `‖i k·v̂‖₂ / ‖w‖`-style diagnostic.
    pub fn divergence_l2(&self) -> f64 {
        self.v1
            .derivative(1)
            .add(&self.v2.derivative(2))
            .l2_norm()
    }

    /// Maximum pointwise speed on the grid.
    pub fn max_speed(&self) -> f64 {
        let a = self.v1.to_physical();
        let b = self.v2.to_physical();
        a.iter()
            .zip(&b)
            .fold(0.0, |m: f64, (x, y)| m.max((x * x + y * y).sqrt()))
    }
}

/// Velocity `v = (-R₂ w, R₁ w)`: `v̂₁ = -i k₂/|k| ŵ`, `v̂₂ = i k₁/|k| ŵ`.
pub fn riesz_velocity(w: &SpectralField) -> Result<VelocityField> {
    if w.mean().abs() > 1e-12 {
        return Err(SqgError::NonzeroMean { mean: w.mean() });
    }
    let v1 = w.apply_symbol(|k1, k2| {
        let k = (k1 * k1 + k2 * k2).sqrt();
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -k2 / k)
        }
    })?;
    let v2 = w.apply_symbol(|k1, k2| {
        let k = (k1 * k1 + k2 * k2).sqrt();
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k1 / k)
        }
    })?;
    Ok(VelocityField { v1, v2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_zero_mean(grid: Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.n();
        let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = values.iter().sum::<f64>() / (n * n) as f64;
        let values: Vec<f64> = values.into_iter().map(|v| v - mean).collect();
        // Smooth it slightly so norms with s > 0 stay tame.
        SpectralField::from_physical(grid, &values)
            .apply_multiplier(|k| (-0.05 * k * k).exp())
            .unwrap()
    }

    #[test]
    fn plane_wave_multiplier_is_exact() {
        // w = cos(2 x₁) on L = π: |k| = 2 eigenmode of |k|^{1/2}.
        let grid = Grid::new(64, PI).unwrap();
        let w = SpectralField::from_fn(grid, |x1, _| (2.0 * x1).cos());
        let out = w.apply_multiplier(|k| k.sqrt()).unwrap();
        let expect = SpectralField::from_fn(grid, |x1, _| 2f64.sqrt() * (2.0 * x1).cos());
        let err = out.sub(&expect).max_abs_physical();
        assert!(err < 1e-12, "max error {err}");
    }

    #[test]
    fn identity_symbol_is_identity() {
        let grid = Grid::new(32, 2.0).unwrap();
        let w = random_zero_mean(grid, 1);
        let out = w.apply_multiplier(|_| 1.0).unwrap();
        // Nyquist rows are zeroed by convention; the smoothed random field
        // has negligible energy there.
        assert!(out.sub(&w).l2_norm() / w.l2_norm() < 1e-10);
    }

    #[test]
    fn two_mode_inverse_eigenvalue() {
        // w = cos(3x₁)cos(4x₂): product of modes gives |k| = 5 on L = π.
        let grid = Grid::new(64, PI).unwrap();
        let w = SpectralField::from_fn(grid, |x1, x2| (3.0 * x1).cos() * (4.0 * x2).cos());
        let out = w.apply_multiplier(|k| 1.0 / k).unwrap();
        let err = out.sub(&w.scale(0.2)).max_abs_physical();
        assert!(err < 1e-12, "max error {err}");
    }

    #[test]
    fn singular_symbol_rejects_nonzero_mean() {
        let grid = Grid::new(32, 1.0).unwrap();
        let w = SpectralField::from_fn(grid, |_, _| 1.0);
        assert!(matches!(
            w.apply_multiplier(|k| 1.0 / k),
            Err(SqgError::NonzeroMeanWithSingularSymbol { .. })
        ));
    }

    #[test]
    fn riesz_plane_waves() {
        let grid = Grid::new(64, PI).unwrap();
        let k = 3.0;
        // w = cos(k x₁) → ψ = cos(k x₁)/k → v = (0, -sin(k x₁)).
        let w = SpectralField::from_fn(grid, |x1, _| (k * x1).cos());
        let v = riesz_velocity(&w).unwrap();
        assert!(v.v1.max_abs_physical() < 1e-12);
        let expect = SpectralField::from_fn(grid, |x1, _| -(k * x1).sin());
        assert!(v.v2.sub(&expect).max_abs_physical() < 1e-12);
        // w = cos(k x₂) → v = (sin(k x₂), 0) by the same computation.
        let w = SpectralField::from_fn(grid, |_, x2| (k * x2).cos());
        let v = riesz_velocity(&w).unwrap();
        assert!(v.v2.max_abs_physical() < 1e-12);
        let expect = SpectralField::from_fn(grid, |_, x2| (k * x2).sin());
        assert!(v.v1.sub(&expect).max_abs_physical() < 1e-12);
    }

    #[test]
    fn riesz_is_divergence_free() {
        let grid = Grid::new(64, 2.0).unwrap();
        let w = random_zero_mean(grid, 7);
        let v = riesz_velocity(&w).unwrap();
        assert!(v.divergence_l2() / w.l2_norm() < 1e-10);
    }

    #[test]
    fn sobolev_single_mode() {
        // ‖cos 2x₁‖_{L²} = √(2π²) on [-π, π)²; Ḣ^s scales by 2^s.
        let grid = Grid::new(64, PI).unwrap();
        let w = SpectralField::from_fn(grid, |x1, _| (2.0 * x1).cos());
        let l2 = w.sobolev_norm(0.0, true).unwrap();
        assert_abs_diff_eq!(l2, (2.0 * PI * PI).sqrt(), epsilon = 1e-10);
        for &s in &[0.5, 1.0, 1.7] {
            let hs = w.sobolev_norm(s, true).unwrap();
            assert_abs_diff_eq!(hs, 2f64.powf(s) * l2, epsilon = 1e-9);
        }
        let inhom = w.sobolev_norm(1.0, false).unwrap();
        assert_abs_diff_eq!(inhom, 3.0 * l2, epsilon = 1e-9);
    }

    #[test]
    fn sobolev_two_modes_by_hand() {
        // Unit-energy modes at |k| = 1 and |k| = 2: ‖w‖²_{Ḣ¹} = E(1 + 4).
        let grid = Grid::new(64, PI).unwrap();
        let w = SpectralField::from_fn(grid, |x1, x2| x1.cos() + (2.0 * x2).cos());
        let e = SpectralField::from_fn(grid, |x1, _| x1.cos())
            .sobolev_norm(0.0, true)
            .unwrap()
            .powi(2);
        let h1 = w.sobolev_norm(1.0, true).unwrap();
        assert_abs_diff_eq!(h1 * h1, e * 5.0, epsilon = 1e-8);
    }

    #[test]
    fn parseval_random_field() {
        let grid = Grid::new(64, 3.0).unwrap();
        let w = random_zero_mean(grid, 11);
        let phys = w.to_physical();
        let dx = grid.dx();
        let phys_l2 = (phys.iter().map(|v| v * v).sum::<f64>() * dx * dx).sqrt();
        let rel = (phys_l2 - w.l2_norm()).abs() / phys_l2;
        assert!(rel < 1e-10, "Parseval relative error {rel}");
    }

    #[test]
    fn multiplier_round_trip() {
        let grid = Grid::new(64, 2.0).unwrap();
        let alpha = 0.6;
        let w = random_zero_mean(grid, 3);
        let back = w
            .apply_multiplier(|k| k.powf(alpha))
            .unwrap()
            .apply_multiplier(|k| k.powf(-alpha))
            .unwrap();
        assert!(back.sub(&w).l2_norm() / w.l2_norm() < 1e-10);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let grid = Grid::new(32, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = SpectralField::from_physical(grid, &values);
        let back = w.to_physical();
        let err: f64 = values
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(w.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn dealias_behaviour() {
        let grid = Grid::new(48, PI).unwrap();
        // Mode inside the retained ball: unchanged.
        let low = SpectralField::from_fn(grid, |x1, _| (4.0 * x1).cos());
        assert!(low.dealias().sub(&low).l2_norm() < 1e-14);
        // Single mode at m₁ = n/2 - 1 = 23: zeroed.
        let high = SpectralField::from_fn(grid, |x1, _| (23.0 * x1).cos());
        assert!(high.dealias().l2_norm() < 1e-12);
        // Idempotence, exactly.
        let w = random_zero_mean(grid, 9);
        let once = w.dealias();
        let twice = once.dealias();
        assert_eq!(once.coeffs(), twice.coeffs());
    }

    #[test]
    fn translation_shifts_samples() {
        let grid = Grid::new(64, PI).unwrap();
        let w = SpectralField::from_fn(grid, |x1, x2| (3.0 * x1).cos() * (x2).sin());
        let shifted = w.translate(0.5, -0.25);
        let expect =
            SpectralField::from_fn(grid, |x1, x2| (3.0 * (x1 + 0.5)).cos() * (x2 - 0.25).sin());
        assert!(shifted.sub(&expect).max_abs_physical() < 1e-11);
    }
}
