//! Local (pointwise) surrogates for the nonlocal operators acting on
//! oscillatory ansätze, plus empirical verification of their error rates and
//! the velocity commutator estimate.
//!
//! On a field `w = f(λr)·cos(N(θ + g(λr)) + p(λr))` the fractional Laplacian
//! and the Riesz velocity act, to leading order in `N`, like pointwise
//! multiplications by explicit functions of the local phase gradient. The
//! surrogates here implement those multiplications; the sweep drivers measure
//! how fast the surrogate/exact discrepancy decays as the angular frequency
//! `N` grows.

use crate::ansatz::{sample_ansatz, OscillatoryAnsatz};
use crate::error::{Result, SqgError};
use crate::profile::RadialProfile;
use crate::quad::linear_fit;
use crate::spectral::{riesz_velocity, Grid, SpectralField};
use num_complex::Complex64;

/// Squared magnitude of the local phase gradient `(N/r)² + N²·(dg(λr)/dr)²`
/// at physical radius `r` (the phase-offset profile `p` does not enter the
/// surrogate symbols; its gradient is lower order by one factor of `N`).
fn phase_gradient_sq(a: &OscillatoryAnsatz, r: f64) -> f64 {
    let n = f64::from(a.n_freq());
    let lambda = a.lambda();
    let gp = lambda * a.phase().deriv1(lambda * r);
    (n / r) * (n / r) + n * n * gp * gp
}

/// Samples `w` multiplied by a radial factor, restricted to the amplitude
/// support, and projects out the residual grid mean.
fn sample_scaled(
    a: &OscillatoryAnsatz,
    grid: Grid,
    factor: impl Fn(f64) -> f64,
) -> SpectralField {
    let lambda = a.lambda();
    let field = SpectralField::from_fn(grid, |x1, x2| {
        let r = x1.hypot(x2);
        if a.amplitude().eval(lambda * r) == 0.0 || r == 0.0 {
            return 0.0;
        }
        a.eval(x1, x2) * factor(r)
    });
    let mut coeffs = field.coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    SpectralField::from_coeffs(grid, coeffs)
}

/// Local surrogate `Λ̄^s` of the fractional Laplacian on an oscillatory
/// ansatz, for `s = exponent ∈ {-1} ∪ (-1,1)\{0}`.
///
/// The surrogate is the pointwise multiplication
/// `w · ((N/r)² + N²g'²)^{s/2}`: the oscillation has local spatial frequency
/// `|∇phase| = N·√(1/r² + g'²)`, and the Fourier multiplier `|k|^s` acts on
/// such a wave packet, to leading order in `N`, as multiplication by
/// `|∇phase|^s`. In the kernel (real-space) derivation of this fact the
/// truncated oscillatory integrals converge to `K_α` divided by the same
/// phase-gradient power; that `K_α` (see [`crate::constants::k_alpha`]) is
/// exactly the Fourier constant of the unnormalized kernel `|x|^{α-2}`, so
/// for the multiplier-normalized operator used here the constants cancel to
/// 1 (the cancellation identity is pinned by a test in `constants`). The
/// exponent `-1` case serves as the stream-function surrogate for the
/// velocity. The output vanishes outside the amplitude support.
pub fn bar_lambda(a: &OscillatoryAnsatz, grid: Grid, exponent: f64) -> Result<SpectralField> {
    assert!(
        exponent != 0.0 && exponent >= -1.0 && exponent < 1.0,
        "exponent must lie in {{-1}} ∪ (-1,1) \\ {{0}}, got {exponent}"
    );
    check_resolved(a, grid)?;
    Ok(sample_scaled(a, grid, |r| {
        phase_gradient_sq(a, r).powf(0.5 * exponent)
    }))
}

/// Local surrogate of the radial velocity component on an oscillatory
/// ansatz: `f·sin(N(θ+g)+p) / |1 + r²·(g' + p'/N)²|^{1/2}` with all
/// profiles evaluated at the scaled radius `λr`.
///
/// As with [`bar_lambda`], the kernel-derivation constant `C₀ = 2π` cancels
/// against the Riesz-transform normalization `Γ(3/2)/π^{3/2} = 1/(2π)`, so
/// the surrogate for the multiplier-normalized velocity carries constant 1.
pub fn bar_v_r(a: &OscillatoryAnsatz, grid: Grid) -> Result<SpectralField> {
    check_resolved(a, grid)?;
    let n = f64::from(a.n_freq());
    let lambda = a.lambda();
    let field = SpectralField::from_fn(grid, |x1, x2| {
        let r = x1.hypot(x2);
        let rho = lambda * r;
        let amp = a.amplitude().eval(rho);
        if amp == 0.0 || r == 0.0 {
            return 0.0;
        }
        let theta = x2.atan2(x1);
        let phase = n * (theta + a.phase().eval(rho)) + a.phase_offset().eval(rho);
        let slope = lambda * (a.phase().deriv1(rho) + a.phase_offset().deriv1(rho) / n);
        amp * phase.sin() / (1.0 + r * r * slope * slope).sqrt()
    });
    let mut coeffs = field.coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    Ok(SpectralField::from_coeffs(grid, coeffs))
}

fn check_resolved(a: &OscillatoryAnsatz, grid: Grid) -> Result<()> {
    // Delegate to the sampling precondition; the sampled field is discarded.
    sample_ansatz(a, grid).map(|_| ())
}

/// Which surrogate/exact pair a rate sweep compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// `Λ̄^{-α}` vs the spectral multiplier `|k|^{-α}`.
    LambdaMinusAlpha,
    /// `Λ̄^{α}` vs the spectral multiplier `|k|^{α}`.
    LambdaPlusAlpha,
    /// `(-∂_{x₂}Λ̄^{-1}w, ∂_{x₁}Λ̄^{-1}w)` vs the exact Riesz velocity.
    Velocity,
    /// The pointwise radial-velocity surrogate vs the projected exact one.
    RadialVelocity,
}

/// A fitted log-log decay rate `error ≈ e^{intercept}·N^{slope}`.
#[derive(Debug, Clone)]
pub struct RateFit {
    /// Angular frequencies of the sweep, strictly increasing.
    pub n_values: Vec<u32>,
    /// Measured L² errors, one per frequency.
    pub errors: Vec<f64>,
    /// Fitted log-log slope.
    pub slope: f64,
    /// Fitted log-log intercept.
    pub intercept: f64,
    /// Goodness of fit of the straight line.
    pub r2: f64,
}

impl RateFit {
    /// Fits a straight line through `(ln N, ln error)`.
    ///
    /// Errors at the machine-precision floor (below `1e-12` of the largest
    /// error) are excluded so roundoff plateaus do not corrupt the slope.
    /// Fails with `DegenerateFit` when fewer than 4 points survive or the
    /// fit quality drops below `r² = 0.9`.
    pub fn fit(n_values: Vec<u32>, errors: Vec<f64>) -> Result<RateFit> {
        assert_eq!(n_values.len(), errors.len());
        assert!(n_values.windows(2).all(|w| w[0] < w[1]));
        let floor = 1e-12 * errors.iter().cloned().fold(0.0f64, f64::max);
        let kept: Vec<(f64, f64)> = n_values
            .iter()
            .zip(&errors)
            .filter(|&(_, &e)| e > floor)
            .map(|(&n, &e)| (f64::from(n).ln(), e.ln()))
            .collect();
        if kept.len() < 4 {
            return Err(SqgError::DegenerateFit { r2: 0.0, min_r2: 0.9 });
        }
        let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        if r2 < 0.9 {
            return Err(SqgError::DegenerateFit { r2, min_r2: 0.9 });
        }
        Ok(RateFit {
            n_values,
            errors,
            slope,
            intercept,
            r2,
        })
    }

    /// Serializes the sweep as CSV rows `N,error,slope,r2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,error,slope,r2\n");
        for (n, e) in self.n_values.iter().zip(&self.errors) {
            out.push_str(&format!("{n},{e:.12e},{:.6},{:.6}\n", self.slope, self.r2));
        }
        out
    }
}

/// Measures the L² discrepancy between a local surrogate and the exact
/// spectral operator across a frequency sweep and fits its decay rate.
///
/// `family` maps an angular frequency to the ansatz to test (fixed profiles
/// and scale, varying `N`); `alpha` is the fractional exponent used by the
/// `Λ̄^{±α}` kinds (ignored by the velocity kinds).
pub fn approximation_rate_sweep(
    family: &dyn Fn(u32) -> Result<OscillatoryAnsatz>,
    grid: Grid,
    n_values: &[u32],
    which: SweepKind,
    alpha: f64,
) -> Result<RateFit> {
    let mut errors = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let a = family(n)?;
        let w = sample_ansatz(&a, grid)?;
        let err = match which {
            SweepKind::LambdaMinusAlpha => {
                let exact = w.apply_multiplier(|k| if k == 0.0 { 0.0 } else { k.powf(-alpha) })?;
                bar_lambda(&a, grid, -alpha)?.sub(&exact).l2_norm()
            }
            SweepKind::LambdaPlusAlpha => {
                let exact = w.apply_multiplier(|k| k.powf(alpha))?;
                bar_lambda(&a, grid, alpha)?.sub(&exact).l2_norm()
            }
            SweepKind::Velocity => {
                let exact = riesz_velocity(&w)?;
                let psi = bar_lambda(&a, grid, -1.0)?;
                let s1 = psi.derivative(2).scale(-1.0);
                let s2 = psi.derivative(1);
                let e1 = s1.sub(&exact.v1).l2_norm();
                let e2 = s2.sub(&exact.v2).l2_norm();
                e1.hypot(e2)
            }
            SweepKind::RadialVelocity => {
                let exact = riesz_velocity(&w)?;
                let vr = radial_component(&exact.v1, &exact.v2);
                bar_v_r(&a, grid)?.sub(&vr).l2_norm()
            }
        };
        errors.push(err);
    }
    RateFit::fit(n_values.to_vec(), errors)
}

/// Pointwise radial projection `v_r = v₁·cos θ + v₂·sin θ`.
pub fn radial_component(v1: &SpectralField, v2: &SpectralField) -> SpectralField {
    let grid = v1.grid();
    let p1 = v1.to_physical();
    let p2 = v2.to_physical();
    let n = grid.n();
    let mut vals = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x1, x2) = (grid.coord(i), grid.coord(j));
            let r = x1.hypot(x2);
            if r == 0.0 {
                continue;
            }
            let idx = i * n + j;
            vals[idx] = (p1[idx] * x1 + p2[idx] * x2) / r;
        }
    }
    SpectralField::from_physical(grid, &vals)
}

/// Which angular factor multiplies the envelope in [`commutator_defect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    /// `sin θ` factor.
    Sin,
    /// `cos θ` factor.
    Cos,
}

/// L² norm of the velocity commutator
/// `v_i(E·w) - E·v_i(w)` where `E(x) = envelope(r)·trig(θ)`.
///
/// The envelope is expected to be supported in `[λ^{-1}, 4λ^{-1}]` (checked
/// loosely: nonzero samples outside `(0.5λ^{-1}, 8λ^{-1})` are rejected).
pub fn commutator_defect(
    w: &OscillatoryAnsatz,
    envelope: &RadialProfile,
    trig: Trig,
    axis: usize,
    grid: Grid,
) -> Result<f64> {
    assert!(axis < 2);
    let lambda = w.lambda();
    let floor = 1e-8 * envelope.max_abs().max(1e-300);
    for (&r, &v) in envelope.r_grid().iter().zip(envelope.values()) {
        if v.abs() > floor && !(0.5 / lambda < r && r < 8.0 / lambda) {
            return Err(SqgError::InvalidGeometry(format!(
                "envelope support leaks outside [λ⁻¹, 4λ⁻¹] at r = {r}"
            )));
        }
    }
    let wf = sample_ansatz(w, grid)?;
    let env = SpectralField::from_fn(grid, |x1, x2| {
        let r = x1.hypot(x2);
        if r == 0.0 {
            return 0.0;
        }
        let theta = x2.atan2(x1);
        envelope.eval(r)
            * match trig {
                Trig::Sin => theta.sin(),
                Trig::Cos => theta.cos(),
            }
    });
    let product = project_mean(env.multiply_physical(&wf));
    let v_of_product = riesz_velocity(&product)?;
    let v_of_w = riesz_velocity(&wf)?;
    let (vp, vw) = match axis {
        0 => (v_of_product.v1, v_of_w.v1),
        _ => (v_of_product.v2, v_of_w.v2),
    };
    let defect = vp.sub(&env.multiply_physical(&vw));
    Ok(defect.l2_norm())
}

/// Zeroes the mean mode (the sampled products carry a tiny grid mean that
/// the Riesz velocity rejects).
fn project_mean(f: SpectralField) -> SpectralField {
    let grid = f.grid();
    let mut coeffs = f.coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    SpectralField::from_coeffs(grid, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::bump_profile;
    use crate::ansatz::PROFILE_R_MAX;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn zero_profile() -> RadialProfile {
        RadialProfile::from_samples(vec![0.0; 65], PROFILE_R_MAX).unwrap()
    }

    fn plain_ansatz(n: u32) -> Result<OscillatoryAnsatz> {
        let f = bump_profile(1.0, 0.4, 0.5)?;
        OscillatoryAnsatz::new(f, zero_profile(), zero_profile(), n, 1.0)
    }

    /// Ansatz with a nontrivial radial phase, to exercise the `g'` terms.
    fn phased_ansatz(n: u32) -> Result<OscillatoryAnsatz> {
        let f = bump_profile(1.0, 0.4, 0.5)?;
        // Smooth phase: g(ρ) = 0.2·sin(ρ), moderate slope everywhere.
        let g = RadialProfile::from_fn(|r| 0.2 * r.sin(), 513, PROFILE_R_MAX)?;
        OscillatoryAnsatz::new(f, g, zero_profile(), n, 1.0)
    }

    fn test_grid() -> Grid {
        Grid::new(256, 6.0).unwrap()
    }

    #[test]
    fn bar_lambda_reduces_to_power_law_when_phase_flat() {
        // g' = 0: the surrogate is (N/r)^α·w pointwise.
        let a = plain_ansatz(8).unwrap();
        let grid = test_grid();
        let out = bar_lambda(&a, grid, 0.5).unwrap().to_physical();
        let n = grid.n();
        let mut checked = 0usize;
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = (grid.coord(i), grid.coord(j));
                let r = x1.hypot(x2);
                if !(0.8..=1.2).contains(&r) {
                    continue;
                }
                let expected = a.eval(x1, x2) * (8.0f64 / r).sqrt();
                assert_abs_diff_eq!(out[i * n + j], expected, epsilon = 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn bar_lambda_round_trip_is_identity_on_support() {
        let a = phased_ansatz(16).unwrap();
        let grid = test_grid();
        let w = sample_ansatz(&a, grid).unwrap().to_physical();
        // Multiplying the two pointwise factors composes exactly, so the
        // round trip equals w wherever the amplitude is nonzero.
        let plus = bar_lambda(&a, grid, 0.5).unwrap().to_physical();
        // Apply the -α factor to the +α output by direct pointwise
        // multiplication (the surrogate is a pointwise operator).
        let n = grid.n();
        let mut both_factors = plus;
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = (grid.coord(i), grid.coord(j));
                let r = x1.hypot(x2);
                if r == 0.0 {
                    continue;
                }
                both_factors[i * n + j] *= phase_gradient_sq(&a, r).powf(-0.25);
            }
        }
        let mut max_err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = (grid.coord(i), grid.coord(j));
                if a.amplitude().eval(x1.hypot(x2)) == 0.0 {
                    continue;
                }
                max_err = max_err.max((both_factors[i * n + j] - w[i * n + j]).abs());
            }
        }
        // Both sides are exact up to the tiny residual grid mean that the
        // sampling projects out (~1e-6 of the amplitude), which enters once
        // per sampled field.
        assert!(max_err < 1e-5, "round-trip error {max_err}");
    }

    #[test]
    fn bar_v_r_flat_phase_is_scaled_sine() {
        let a = plain_ansatz(8).unwrap();
        let grid = test_grid();
        let out = bar_v_r(&a, grid).unwrap().to_physical();
        let n = grid.n();
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(7) {
                let (x1, x2) = (grid.coord(i), grid.coord(j));
                let r = x1.hypot(x2);
                let expected = if a.amplitude().eval(r) == 0.0 || r == 0.0 {
                    0.0
                } else {
                    let theta = x2.atan2(x1);
                    a.amplitude().eval(r) * (8.0 * theta).sin()
                };
                assert_abs_diff_eq!(out[i * n + j], expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn radial_velocity_surrogate_tracks_exact_velocity() {
        // Single mid-frequency check that the surrogate is close in relative
        // L² (the rate sweep in the acceptance tests measures the decay).
        let a = plain_ansatz(24).unwrap();
        let grid = Grid::new(512, 5.0).unwrap();
        let w = sample_ansatz(&a, grid).unwrap();
        let exact = riesz_velocity(&w).unwrap();
        let vr = radial_component(&exact.v1, &exact.v2);
        let err = bar_v_r(&a, grid).unwrap().sub(&vr).l2_norm() / w.l2_norm();
        assert!(err < 0.2, "relative surrogate error {err}");
    }

    #[test]
    fn minus_alpha_rate_sweep_matches_expected_slope() {
        let grid = Grid::new(512, 5.0).unwrap();
        let fit = approximation_rate_sweep(
            &plain_ansatz,
            grid,
            &[8, 16, 32, 64],
            SweepKind::LambdaMinusAlpha,
            0.5,
        )
        .unwrap();
        assert!(fit.r2 >= 0.9, "r2 = {}", fit.r2);
        assert!(fit.slope <= -1.2, "slope = {}", fit.slope);
    }

    #[test]
    fn velocity_surrogate_rate_sweep() {
        let grid = Grid::new(512, 5.0).unwrap();
        let fit = approximation_rate_sweep(
            &plain_ansatz,
            grid,
            &[8, 16, 32, 64],
            SweepKind::Velocity,
            0.5,
        )
        .unwrap();
        assert!(fit.slope <= -0.7, "slope = {}", fit.slope);
    }

    #[test]
    fn radial_velocity_rate_sweep() {
        let grid = Grid::new(512, 5.0).unwrap();
        let fit = approximation_rate_sweep(
            &plain_ansatz,
            grid,
            &[8, 16, 32, 64],
            SweepKind::RadialVelocity,
            0.5,
        )
        .unwrap();
        assert!(fit.slope <= -0.7, "slope = {}", fit.slope);
    }

    #[test]
    fn rate_fit_rejects_scatter() {
        let res = RateFit::fit(vec![8, 16, 32, 64], vec![1.0, 2.0, 0.5, 1.5]);
        assert!(matches!(res, Err(SqgError::DegenerateFit { .. })));
    }

    #[test]
    fn rate_fit_recovers_power_law() {
        let ns = vec![8u32, 16, 32, 64];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * f64::from(n).powf(-1.5)).collect();
        let fit = RateFit::fit(ns, errs).unwrap();
        assert_abs_diff_eq!(fit.slope, -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn commutator_defect_zero_for_zero_field() {
        let f_zero = RadialProfile::from_samples(vec![0.0; 65], PROFILE_R_MAX).unwrap();
        let w = OscillatoryAnsatz::new(f_zero, zero_profile(), zero_profile(), 8, 1.0);
        // A zero amplitude leaves no support; the constructor accepts it.
        let w = w.unwrap();
        let env = bump_profile(2.0, 1.5, 0.5).unwrap();
        let grid = test_grid();
        let d = commutator_defect(&w, &env, Trig::Sin, 0, grid).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn commutator_defect_decays_in_frequency() {
        let grid = Grid::new(512, 5.0).unwrap();
        let env = bump_profile(2.0, 1.5, 0.5).unwrap();
        let mut prev = f64::INFINITY;
        let mut slopes = Vec::new();
        for &n in &[8u32, 16, 32, 64] {
            let w = plain_ansatz(n).unwrap();
            let d = commutator_defect(&w, &env, Trig::Sin, 0, grid).unwrap();
            slopes.push(d);
            prev = prev.min(d);
        }
        let ns: Vec<u32> = vec![8, 16, 32, 64];
        let fit = RateFit::fit(ns, slopes).unwrap();
        assert!(fit.slope <= -0.7, "commutator slope {}", fit.slope);
        let _ = prev;
    }

    #[test]
    fn commutator_defect_scale_invariant() {
        // λ-rescaled inputs give comparable normalized defects across
        // λ ∈ {1, 1.5, 2} (larger λ at this frequency would exceed the
        // resolvable bandwidth of the test grid).
        let grid = Grid::new(512, 5.0).unwrap();
        let mut normalized = Vec::new();
        for &lambda in &[1.0f64, 1.5, 2.0] {
            let f = bump_profile(1.0, 0.4, 0.5).unwrap();
            let w =
                OscillatoryAnsatz::new(f, zero_profile(), zero_profile(), 32, lambda).unwrap();
            let env = RadialProfile::from_fn(
                |r| {
                    let rho = lambda * r;
                    if (1.2..=3.2).contains(&rho) {
                        (PI * (rho - 1.2) / 2.0).sin().powi(4)
                    } else {
                        0.0
                    }
                },
                4097,
                PROFILE_R_MAX,
            )
            .unwrap();
            let wf = sample_ansatz(&w, grid).unwrap();
            let env_c1 = env.max_abs()
                + env
                    .r_grid()
                    .iter()
                    .map(|&r| env.deriv1(r).abs())
                    .fold(0.0f64, f64::max);
            let d = commutator_defect(&w, &env, Trig::Sin, 0, grid).unwrap();
            normalized.push(d / (env_c1 * wf.l2_norm()));
        }
        let max = normalized.iter().cloned().fold(0.0f64, f64::max);
        let min = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min < 4.0,
            "normalized defects vary too much: {normalized:?}"
        );
    }
}
