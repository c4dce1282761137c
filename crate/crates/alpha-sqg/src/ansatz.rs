//! Structured fields: smooth radial bumps, the radial base flow with
//! prescribed angular-velocity derivatives, and oscillatory fields of the
//! form `f(λr)·cos(N(θ + g(λr)) + p(λr))`.
//!
//! The angular velocity `v_θ(h)(r)` of a radial scalar `h` is evaluated from
//! its principal-value kernel; the angular integral is done in closed form
//! with complete elliptic integrals, leaving a one-dimensional radial
//! quadrature with only a logarithmic kink on the diagonal.

use crate::error::{Result, SqgError};
use crate::jet::Jet;
use crate::profile::RadialProfile;
use crate::quad::{elliptic_ke_mc, gauss_legendre, integrate_gl};
use crate::spectral::{Grid, SpectralField};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Outer radius of the default radial sample grid.
pub const PROFILE_R_MAX: f64 = 4.0;
/// Default number of radial samples (4096 intervals).
pub const PROFILE_SAMPLES: usize = 4097;
/// Default radial-frequency cutoff of the high-pass filter used by the base
/// flow construction.
pub const BASE_CUTOFF: f64 = 0.5;
/// Outer radius of the extended grid used for base flows: high-passed
/// profiles have slow spatial tails, and truncating them too early would leak
/// energy back below the cutoff frequency.
pub const BASE_R_MAX: f64 = 16.0;
/// Samples of the extended base-flow grid (same spacing as the default grid).
pub const BASE_SAMPLES: usize = 16385;
/// Amplitudes below this are treated as "outside the support".
pub const SUPPORT_FLOOR: f64 = 1e-8;

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, strictly increasing between.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / x - 1.0 / (1.0 - x)).exp())
    }
}

/// Taylor-jet version of [`smooth_step`]. Near the endpoints every derivative
/// is far below f64 resolution, so a constant jet is returned there to avoid
/// overflow in the intermediate `1/x` powers.
fn smooth_step_jet(x: Jet) -> Jet {
    if x.value() <= 2e-3 {
        return Jet::constant(0.0);
    }
    if x.value() >= 1.0 - 2e-3 {
        return Jet::constant(1.0);
    }
    let sa = (-x.recip()).exp();
    let sb = (-((Jet::constant(1.0) - x).recip())).exp();
    let den = sa + sb;
    sa / den
}

/// Smooth frequency-cutoff window: 0 for `u ≤ 1`, 1 for `u ≥ 2`.
fn cutoff_window(u: f64) -> f64 {
    smooth_step(u - 1.0)
}

/// Closed-form `C^∞` bump: 1 on the plateau, support
/// `[center - half_width, center + half_width]`, values in `[0, 1]`.
///
/// Exists alongside the sampled [`RadialProfile`] form because the base-flow
/// construction needs analytically exact 2nd and 4th derivatives.
#[derive(Debug, Clone, Copy)]
pub struct SmoothBump {
    center: f64,
    half_width: f64,
    plateau_fraction: f64,
}

impl SmoothBump {
    /// Validates the geometry: `0 < plateau_fraction < 1`,
    /// `0 < half_width < center`.
    pub fn new(center: f64, half_width: f64, plateau_fraction: f64) -> Result<Self> {
        if !(plateau_fraction > 0.0 && plateau_fraction < 1.0) {
            return Err(SqgError::InvalidGeometry(format!(
                "plateau fraction {plateau_fraction} not in (0,1)"
            )));
        }
        if !(half_width > 0.0 && half_width < center) {
            return Err(SqgError::InvalidGeometry(format!(
                "need 0 < half_width < center, got {half_width} vs {center}"
            )));
        }
        Ok(SmoothBump {
            center,
            half_width,
            plateau_fraction,
        })
    }

    /// Support interval `[center - half_width, center + half_width]`.
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// Plateau interval where the bump equals 1.
    pub fn plateau(&self) -> (f64, f64) {
        let w = self.plateau_fraction * self.half_width;
        (self.center - w, self.center + w)
    }

    /// Bump value at `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let (a, d) = self.support();
        let (b, c) = self.plateau();
        if r <= a || r >= d {
            0.0
        } else if r < b {
            smooth_step((r - a) / (b - a))
        } else if r <= c {
            1.0
        } else {
            smooth_step((d - r) / (d - c))
        }
    }

    /// Taylor jet of the bump at `r` (derivatives up to order 6).
    pub fn jet(&self, r: f64) -> Jet {
        let (a, d) = self.support();
        let (b, c) = self.plateau();
        if r <= a || r >= d {
            Jet::constant(0.0)
        } else if r < b {
            let arg = (Jet::variable(r) - Jet::constant(a)) * (1.0 / (b - a));
            smooth_step_jet(arg)
        } else if r <= c {
            Jet::constant(1.0)
        } else {
            let arg = (Jet::constant(d) - Jet::variable(r)) * (1.0 / (d - c));
            smooth_step_jet(arg)
        }
    }
}

/// Degree-13 polynomial step (the `C⁶` member of the smootherstep family):
/// 0 at 0, 1 at 1, with six vanishing derivatives at both ends.
///
/// Exists alongside the `C^∞` step because the base-flow construction needs
/// *fourth* derivatives of its bump sampled on a uniform grid: the
/// exponential step's high derivatives develop enormous boundary spikes that
/// no practical grid resolves, while this step's are low-degree polynomials.
fn poly_step_jet(x: Jet) -> Jet {
    if x.value() <= 0.0 {
        return Jet::constant(0.0);
    }
    if x.value() >= 1.0 {
        return Jet::constant(1.0);
    }
    // Horner form of x⁷(1716 - 9009x + 20020x² - 24024x³ + 16380x⁴
    //                  - 6006x⁵ + 924x⁶).
    let mut acc = Jet::constant(924.0);
    for &c in &[-6006.0, 16380.0, -24024.0, 20020.0, -9009.0, 1716.0] {
        acc = acc * x + Jet::constant(c);
    }
    let x7 = x * x * x * x * x * x * x;
    acc * x7
}

/// Bump built from the polynomial step: same geometry as [`SmoothBump`] but
/// only `C⁶`, with grid-representable high derivatives.
#[derive(Debug, Clone, Copy)]
struct PolyBump {
    center: f64,
    half_width: f64,
    plateau_fraction: f64,
}

impl PolyBump {
    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    fn plateau(&self) -> (f64, f64) {
        let w = self.plateau_fraction * self.half_width;
        (self.center - w, self.center + w)
    }

    fn eval(&self, r: f64) -> f64 {
        self.jet_at(r, false).value()
    }

    fn jet(&self, r: f64) -> Jet {
        self.jet_at(r, true)
    }

    fn jet_at(&self, r: f64, full: bool) -> Jet {
        let (a, d) = self.support();
        let (b, c) = self.plateau();
        let var = |v: f64| if full { Jet::variable(v) } else { Jet::constant(v) };
        if r <= a || r >= d {
            Jet::constant(0.0)
        } else if r < b {
            poly_step_jet((var(r) - Jet::constant(a)) * (1.0 / (b - a)))
        } else if r <= c {
            Jet::constant(1.0)
        } else {
            poly_step_jet((Jet::constant(d) - var(r)) * (1.0 / (d - c)))
        }
    }
}

/// Samples a `C^∞` bump onto the default radial grid: value 1 on the plateau,
/// support `[center - half_width, center + half_width]`, values in `[0, 1]`.
pub fn bump_profile(center: f64, half_width: f64, plateau_fraction: f64) -> Result<RadialProfile> {
    let bump = SmoothBump::new(center, half_width, plateau_fraction)?;
    if center + half_width > PROFILE_R_MAX {
        return Err(SqgError::InvalidGeometry(format!(
            "support reaches {} beyond the radial grid end {PROFILE_R_MAX}",
            center + half_width
        )));
    }
    RadialProfile::from_fn(|r| bump.eval(r), PROFILE_SAMPLES, PROFILE_R_MAX)
}

/// Angular integral `∫_{-π}^{π} (r - r'cosθ)/(r² + r'² - 2rr'cosθ)^{3/2} dθ`
/// in closed form: `2E(m)/(r(r-r')) + 2K(m)/(r(r+r'))` with
/// `m = 4rr'/(r+r')²`.
fn angular_kernel(r: f64, rp: f64) -> f64 {
    let diff = r - rp;
    let sum = r + rp;
    // Complementary parameter computed directly to keep precision near the
    // diagonal, where m -> 1.
    let mc = (diff * diff) / (sum * sum);
    let (kk, ee) = elliptic_ke_mc(mc);
    2.0 * (ee / (r * diff) + kk / (r * sum))
}

/// Angular component of the velocity induced by a radial scalar `h`:
/// the principal-value integral
/// `∫ r'(r - r'cosθ')/(r² + r'² - 2rr'cosθ')^{3/2} (h(r') - h(r)) dθ' dr'`.
///
/// The subtraction `h(r') - h(r)` cancels the kernel's `1/(r - r')` pole, so
/// after the closed-form angular integral the radial integrand is bounded
/// with a logarithmic kink at `r' = r`; dyadically graded Gauss-Legendre
/// panels toward the diagonal resolve it. Node counts are doubled until the
/// result changes by less than 1e-8.
pub fn v_theta_radial(h: &RadialProfile, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(SqgError::InvalidGeometry(format!(
            "evaluation radius {r} must be positive"
        )));
    }
    let rmax = h.r_max();
    let dr = h.r_grid()[1];
    let hr = h.eval(r);

    // Effective support of the samples, padded so the spline's geometrically
    // decaying ringing outside the data is still integrated.
    let nonzero: Vec<usize> = h
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(i, _)| i)
        .collect();
    if nonzero.is_empty() {
        return Ok(0.0);
    }
    let pad = 64.0 * dr;
    let supp_lo = h.r_grid()[*nonzero.first().unwrap()] - pad;
    let supp_hi = h.r_grid()[*nonzero.last().unwrap()] + pad;

    // Breakpoints: every spline node (the integrand is only piecewise smooth
    // across them) plus dyadic refinement toward the singular radius.
    let mut bps: Vec<f64> = h.r_grid().to_vec();
    let center = r.min(rmax);
    let (w_left, w_right) = (center, rmax - center);
    for j in 0..=45 {
        let d = 2f64.powi(-j);
        if w_left > 0.0 {
            bps.push(center - w_left * d);
        }
        if w_right > 0.0 {
            bps.push(center + w_right * d);
        }
    }
    bps.retain(|&x| (0.0..=rmax).contains(&x));
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-300);

    let mut integrand = |rp: f64| -> f64 {
        if (rp - r).abs() < 1e-14 * (1.0 + r) {
            return 0.0;
        }
        rp * angular_kernel(r, rp) * (h.eval(rp) - hr)
    };
    // Node count grows toward the singular radius, where the kernel varies
    // fastest; a second pass with more nodes verifies convergence. The L1
    // mass of the segment integrals is tracked because for profiles whose
    // velocity is a tiny residue of enormous oscillating samples, the
    // achievable absolute accuracy is set by f64 roundoff on that mass.
    let mut run_pass = |boost: usize| -> (f64, f64) {
        let mut total = 0.0;
        let mut l1 = 0.0;
        for pair in bps.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 1e-15 || (a < r && r < b) {
                continue; // the vanishing central gap around the pole
            }
            if hr == 0.0 && (b < supp_lo || a > supp_hi) {
                continue; // integrand identically zero far outside support
            }
            let d = (0.5 * (a + b) - r).abs();
            let nodes = if d < 0.05 {
                14
            } else if d < 0.5 {
                8
            } else {
                4
            } + boost;
            let piece = integrate_gl(&mut integrand, a, b, nodes);
            total += piece;
            l1 += piece.abs();
        }
        (total, l1)
    };
    let (coarse, _) = run_pass(0);
    let (fine, l1) = run_pass(4);
    let tol = (1e-7 * (1.0 + fine.abs())).max(1e-12 * l1);
    if (fine - coarse).abs() <= tol {
        Ok(fine)
    } else {
        Err(SqgError::NonConvergence {
            context: "angular-velocity radial quadrature",
            residual: (fine - coarse).abs(),
            tol,
        })
    }
}

/// Finite-difference step of the derivative stencils below.
const STENCIL_H: f64 = 0.05;

/// First, second and third derivatives of `r ↦ v_θ(h)(r)/r` at `r0`,
/// measured with 7-point high-order stencils on the quadrature values.
pub fn v_theta_over_r_derivatives(h: &RadialProfile, r0: f64) -> Result<[f64; 3]> {
    let hs = STENCIL_H;
    let mut d = [0.0f64; 7];
    for (idx, slot) in d.iter_mut().enumerate() {
        let r = r0 + (idx as f64 - 3.0) * hs;
        *slot = v_theta_radial(h, r)? / r;
    }
    let d1 = (-d[0] + 9.0 * d[1] - 45.0 * d[2] + 45.0 * d[4] - 9.0 * d[5] + d[6]) / (60.0 * hs);
    let d2 = (2.0 * d[0] - 27.0 * d[1] + 270.0 * d[2] - 490.0 * d[3] + 270.0 * d[4]
        - 27.0 * d[5]
        + 2.0 * d[6])
        / (180.0 * hs * hs);
    let d3 =
        (d[0] - 8.0 * d[1] + 13.0 * d[2] - 13.0 * d[4] + 8.0 * d[5] - d[6]) / (8.0 * hs * hs * hs);
    Ok([d1, d2, d3])
}

/// Step of the narrow slope stencil used near the shaping annuli, where the
/// velocity varies on scales (~0.04) that the wide stencil cannot resolve.
const SLOPE_STENCIL_H: f64 = 0.01;

/// First derivative of `r ↦ v_θ(h)(r)/r` at `r0`, measured with a narrow
/// 7-point stencil.
///
/// [`v_theta_over_r_derivatives`] uses a wide step for noise robustness in
/// the second and third derivatives, but its slope estimate averages over
/// ±0.15 in radius and is badly biased where the profile has structure on a
/// finer scale (the shaping annuli of the base-flow construction). This
/// estimator trades a little noise for locality.
pub fn v_theta_over_r_slope(h: &RadialProfile, r0: f64) -> Result<f64> {
    let hs = SLOPE_STENCIL_H;
    let mut d = [0.0f64; 7];
    for (idx, slot) in d.iter_mut().enumerate() {
        let r = r0 + (idx as f64 - 3.0) * hs;
        *slot = v_theta_radial(h, r)? / r;
    }
    Ok((-d[0] + 9.0 * d[1] - 45.0 * d[2] + 45.0 * d[4] - 9.0 * d[5] + d[6]) / (60.0 * hs))
}

/// Series evaluation of the Bessel function `J₀`. Alternating-series
/// cancellation limits the usable range; the radial Fourier transforms here
/// keep `k·s ≤ 2c·R ≤ 16`, where the series still carries ~11 digits.
fn bessel_j0(x: f64) -> f64 {
    assert!(x.abs() < 20.0, "J0 series argument too large: {x}");
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=80 {
        term *= q / ((m * m) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Radius range `[lo, hi]` outside which the *spline* is negligible: the
/// nonzero-sample range padded by 64 grid steps, because the interpolant's
/// ringing beyond the data decays only geometrically (factor ~0.27 per node)
/// and carries non-negligible integrals when the samples are enormous.
/// Returns `None` for an identically zero profile.
fn sample_support(h: &RadialProfile) -> Option<(f64, f64)> {
    let first = h.values().iter().position(|v| v.abs() > 0.0)?;
    let last = h.values().iter().rposition(|v| v.abs() > 0.0).unwrap();
    let pad = 64.0 * h.r_grid()[1];
    Some((
        (h.r_grid()[first] - pad).max(0.0),
        (h.r_grid()[last] + pad).min(h.r_max()),
    ))
}

/// Radial (2D Fourier) transform `ĥ(k) = 2π ∫ h(s) J₀(ks) s ds`.
///
/// One Gauss-Legendre rule per spline segment of the support: the integrand
/// is a cubic times the entire function `s·J₀(ks)`, so each segment is
/// resolved to machine precision even for profiles whose transform is the
/// tiny residue of enormous oscillating samples.
pub fn radial_fourier_transform(h: &RadialProfile, k: f64) -> f64 {
    let Some((lo, hi)) = sample_support(h) else {
        return 0.0;
    };
    let (nodes, weights) = gauss_legendre(6);
    let mut total = 0.0;
    for pair in h.r_grid().windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b < lo || a > hi {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter().zip(&weights) {
            let s = mid + half * x;
            total += w * half * h.eval(s) * bessel_j0(k * s) * s;
        }
    }
    2.0 * PI * total
}

/// High-pass filter: removes the radial-frequency content below the smooth
/// cutoff window (0 below `c`, 1 above `2c`). Implemented by subtracting the
/// low-frequency complement, reconstructed from the radial Fourier transform
/// on `[0, 2c]`, so the result keeps the full radial sample resolution.
pub fn high_pass(h: &RadialProfile, c: f64) -> Result<RadialProfile> {
    if !(c > 0.0) {
        return Err(SqgError::InvalidGeometry(format!(
            "cutoff {c} must be positive"
        )));
    }
    let (nodes, weights) = gauss_legendre(96);
    // Quadrature nodes on k in [0, 2c] and the transform evaluated there.
    let half = c;
    let mid = c;
    let kn: Vec<f64> = nodes.iter().map(|x| mid + half * x).collect();
    let hk: Vec<f64> = kn.iter().map(|&k| radial_fourier_transform(h, k)).collect();
    let values: Vec<f64> = h
        .r_grid()
        .iter()
        .zip(h.values())
        .map(|(&r, &v)| {
            let mut low = 0.0;
            for ((&k, &w), &t) in kn.iter().zip(&weights).zip(&hk) {
                low += w * half * (1.0 - cutoff_window(k / c)) * t * bessel_j0(k * r) * k;
            }
            v - low / (2.0 * PI)
        })
        .collect();
    RadialProfile::from_samples(values, h.r_max())
}

/// Fraction of the field's energy carried by radial frequencies below `c`.
pub fn low_frequency_energy_fraction(h: &RadialProfile, c: f64) -> f64 {
    let mut low = integrate_gl(
        &mut |k: f64| {
            let t = radial_fourier_transform(h, k);
            t * t * k
        },
        0.0,
        c,
        48,
    );
    // Total energy by composite Simpson over the sample grid itself, so
    // features narrower than any fixed quadrature rule are still captured.
    let dr = h.r_grid()[1];
    let mut energy = 0.0;
    for (i, (&r, &v)) in h.r_grid().iter().zip(h.values()).enumerate() {
        let w = if i == 0 || i == h.len() - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        energy += w * v * v * r;
    }
    let total = (2.0 * PI).powi(2) * energy * dr / 3.0;
    if total == 0.0 {
        return 0.0;
    }
    low = low.max(0.0);
    low / total
}

/// Result of the base-flow construction: the combined profile plus the
/// diagnostics of the construction (concentration scale, basis coefficients,
/// measured derivative triples).
#[derive(Debug, Clone)]
pub struct BaseFlow {
    /// The combined high-passed radial profile.
    pub profile: RadialProfile,
    /// Concentration scale chosen from the geometric ladder.
    pub lambda_h: f64,
    /// Coefficients of the three basis flows.
    pub coefficients: [f64; 3],
    /// Measured derivative triples of `v_θ/r` at r = 1 for each basis flow.
    pub basis_triples: [[f64; 3]; 3],
    /// Measured derivative triple of the combined profile at r = 1.
    pub measured: [f64; 3],
    /// Coefficients of the three annulus shaping profiles that enforce the
    /// slope-gap inequality away from r = 1.
    pub shaping: [f64; 3],
    /// Measured slope excess `∂_r(v_θ/r)(r₀) - ∂_r(v_θ/r)(1)` at each of
    /// [`SLOPE_CHECK_RADII`].
    pub slope_excess: [f64; 4],
}

/// Radii at which the slope-gap inequality
/// `∂_r(v_θ/r)(r₀) - ∂_r(v_θ/r)(1) ≥ (1/10)(1-r₀)²` is verified.
pub const SLOPE_CHECK_RADII: [f64; 4] = [0.8, 0.9, 1.1, 1.2];

/// Radius beyond which [`construct_experiment_flow`] profiles vanish exactly
/// (the taper ramps down over the unit interval ending here).
pub const EXPERIMENT_SUPPORT_RADIUS: f64 = 3.5;

/// Lower bound required of the slope excess at radius `r0`.
pub fn slope_gap_requirement(r0: f64) -> f64 {
    0.1 * (1.0 - r0) * (1.0 - r0)
}

/// Ideal derivative triples of `v_θ/r` at r = 1 for the three concentrated
/// basis flows, i.e. the derivatives of `2π/r³`, `3π/r⁵` and `(135π/4) r⁻⁷`.
pub const IDEAL_BASIS_TRIPLES: [[f64; 3]; 3] = [
    [-6.0 * PI, 24.0 * PI, -120.0 * PI],
    [-15.0 * PI, 90.0 * PI, -630.0 * PI],
    [-945.0 * PI / 4.0, 1890.0 * PI, -17010.0 * PI],
];

/// Integral `∫ s^p h(s) ds` of the spline interpolant, exact per segment
/// (4-point Gauss-Legendre on a cubic times `s^p`, `p ≤ 4`).
fn spline_moment(h: &RadialProfile, p: i32) -> f64 {
    let mut f = |s: f64| s.powi(p) * h.eval(s);
    let mut total = 0.0;
    for pair in h.r_grid().windows(2) {
        total += integrate_gl(&mut f, pair[0], pair[1], 4);
    }
    total
}

/// Pins the radial moments `∫ s^p h ds` (for the listed odd powers `p`) of a
/// sampled profile to prescribed target values by adding small multiples of
/// the given smooth annulus profiles.
///
/// The continuum derived profiles have these moments exactly (the low ones
/// vanish as perfect derivatives; the leading nonzero one has a closed form),
/// and the far-field angular velocity is the small residue of that
/// cancellation. Grid sampling only preserves the moments to ~1e-5 relative
/// of the enormous sample values, which would swamp the residue entirely.
fn enforce_moments(
    h: &RadialProfile,
    basis: &[&RadialProfile],
    powers: &[i32],
    targets: &[f64],
) -> Result<RadialProfile> {
    let k = powers.len();
    assert_eq!(basis.len(), k);
    assert_eq!(targets.len(), k);
    // Solve the k×k system  Σ_j a_j M_p(basis_j) = target_p - M_p(h).
    let mut m = vec![vec![0.0f64; k + 1]; k];
    for (i, &p) in powers.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            m[i][j] = spline_moment(b, p);
        }
        m[i][k] = targets[i] - spline_moment(h, p);
    }
    let mut scale = 0.0f64;
    for row in &m {
        for &v in &row[..k] {
            scale = scale.max(v.abs());
        }
    }
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot_row);
        let pivot = m[col][col];
        if pivot.abs() < 1e-10 * scale {
            return Err(SqgError::SingularSystem {
                cond: scale / pivot.abs().max(f64::MIN_POSITIVE),
            });
        }
        for row in 0..k {
            if row != col {
                let f = m[row][col] / pivot;
                for idx in col..=k {
                    m[row][idx] -= f * m[col][idx];
                }
            }
        }
    }
    let mut profiles: Vec<&RadialProfile> = vec![h];
    let mut coeffs: Vec<f64> = vec![1.0];
    for (j, b) in basis.iter().enumerate() {
        profiles.push(b);
        coeffs.push(m[j][k] / m[j][j]);
    }
    RadialProfile::linear_combination(&profiles, &coeffs)
}

/// Narrow smooth annulus at scaled center `c/lh`, used as a moment-correction
/// basis profile.
fn annulus(center: f64, lh: f64) -> Result<RadialProfile> {
    let bump = PolyBump {
        center,
        half_width: 0.045,
        plateau_fraction: 0.4,
    };
    RadialProfile::from_fn(
        |r| lh * lh * bump.eval(lh * r),
        BASE_SAMPLES,
        BASE_R_MAX,
    )
}

/// Builds a radial base flow whose angular velocity satisfies
/// `∂^j_r (v_θ(g)/r)(1) = targets_j` for `j = 1, 2, 3`, with all radial
/// frequency content above [`BASE_CUTOFF`].
///
/// Three basis flows are formed from a normalized bump `h₁` supported in
/// `(1/4, 1/2)` and its derived profiles `(1/r)∂²_r(r h₁)`, `(1/r)∂⁴_r(r h₁)`,
/// concentrated by the smallest scale in a geometric ladder for which the
/// measured derivative triples are within 5% of the ideal inverse-power laws,
/// then high-passed and combined by a 3×3 solve.
pub fn construct_base_flow(targets: [f64; 3]) -> Result<BaseFlow> {
    let bump = PolyBump {
        center: 0.375,
        half_width: 0.125,
        plateau_fraction: 0.4,
    };
    let mass = integrate_gl(&mut |s: f64| s * bump.eval(s), 0.25, 0.5, 64);
    let amp = 1.0 / mass;

    // h2/h3 via exact jets of r*h1; only nonzero on the bump support.
    let derived = |u: f64, order: usize| -> f64 {
        if u <= 0.2 || u >= 0.55 {
            return 0.0;
        }
        let t = Jet::variable(u) * bump.jet(u);
        t.derivative(order) / u
    };

    let mut chosen: Option<(f64, [RadialProfile; 3], [[f64; 3]; 3])> = None;
    let mut last_miss = (0usize, 0.0f64, 0.0f64);
    for &lh in &[2.0f64, 4.0, 8.0, 16.0] {
        // The extended grid keeps the slow spatial tail of the high-passed
        // profiles, which otherwise re-introduces low-frequency energy.
        let g1 = RadialProfile::from_fn(
            |r| amp * lh * lh * bump.eval(lh * r),
            BASE_SAMPLES,
            BASE_R_MAX,
        )?;
        let g2 = RadialProfile::from_fn(
            |r| amp * lh.powi(4) * derived(lh * r, 2),
            BASE_SAMPLES,
            BASE_R_MAX,
        )?;
        let g3 = RadialProfile::from_fn(
            |r| amp * lh.powi(6) * derived(lh * r, 4),
            BASE_SAMPLES,
            BASE_R_MAX,
        )?;
        // Grid samples lose the exact moment structure of the derived
        // profiles; restore it before anything downstream sees the data. The
        // low moments vanish (the profiles are perfect derivatives) and the
        // leading nonzero ones have closed forms from integration by parts:
        // ∫s³ h₂-type = 2·∫s h₁ and ∫s⁵ h₃-type = 24·∫s h₁, which the unit
        // normalization turns into the constants 2 and 24. Correction basis:
        // three annuli at staggered radii so the moment system is
        // well-conditioned.
        let b_in = annulus(0.3, lh)?;
        let b_out = annulus(0.45, lh)?;
        let g2 = enforce_moments(&g2, &[&b_in, &b_out], &[1, 3], &[0.0, 2.0])?;
        let g3 = enforce_moments(
            &g3,
            &[&b_in, &g1, &b_out],
            &[1, 3, 5],
            &[0.0, 0.0, 24.0],
        )?;
        let filtered = [
            high_pass(&g1, BASE_CUTOFF)?,
            high_pass(&g2, BASE_CUTOFF)?,
            high_pass(&g3, BASE_CUTOFF)?,
        ];
        let mut triples = [[0.0; 3]; 3];
        let mut ok = true;
        'basis: for (i, f) in filtered.iter().enumerate() {
            triples[i] = v_theta_over_r_derivatives(f, 1.0)?;
            for j in 0..3 {
                let ideal = IDEAL_BASIS_TRIPLES[i][j];
                if (triples[i][j] - ideal).abs() > 0.05 * ideal.abs() {
                    last_miss = (3 * i + j, triples[i][j], ideal);
                    ok = false;
                    break 'basis;
                }
            }
        }
        if ok {
            chosen = Some((lh, filtered, triples));
            break;
        }
    }
    let (lambda_h, filtered, basis_triples) = chosen.ok_or(SqgError::TargetMiss {
        component: last_miss.0,
        measured: last_miss.1,
        target: last_miss.2,
    })?;

    // The three concentrated flows pin the derivative triple at r = 1 but
    // leave the slope of v_θ/r away from r = 1 essentially determined by the
    // inverse-power tails, which violates the slope-gap inequality beyond a
    // narrow neighborhood of 1. Three additional moderate-amplitude annulus
    // profiles (two inside the unit circle at radii ≈ 0.55 and 0.7, away from
    // the concentrated core, and one outside at ≈ 1.35, beyond the check
    // radii) contribute independent slope shapes on [0.8, 1.2]; the outer
    // annulus in particular raises the slope on the far side of 1 while its
    // interior velocity is analytic there, so it barely perturbs the third
    // derivative at 1. Coefficients are chosen to maximize the worst ratio of
    // measured slope excess to the required gap, with the 3×3 solve re-run
    // per candidate so the triple targets stay exact, under budget bounds on
    // the concentrated-flow weights: the quadrature noise floor of the
    // velocity evaluation is proportional to those weights, so letting them
    // grow would push the measured triple outside its tolerance.
    let shaping_profiles = high_passed_annuli(&[
        PolyBump { center: 0.55, half_width: 0.07, plateau_fraction: 0.4 },
        PolyBump { center: 0.70, half_width: 0.06, plateau_fraction: 0.4 },
        PolyBump { center: 1.35, half_width: 0.07, plateau_fraction: 0.4 },
    ])?;
    finish_base_flow(
        &filtered,
        &basis_triples,
        &shaping_profiles,
        targets,
        lambda_h,
        &|c123: &[f64; 3]| c123[2].abs() <= 0.001 && c123[0].abs() <= 3.0,
        &ShapingObjective::MaxMinRatio { cap: 50.0 },
    )
}

/// Samples each bump on the base grid and removes its low radial frequencies.
fn high_passed_annuli(bumps: &[PolyBump]) -> Result<Vec<RadialProfile>> {
    let mut out = Vec::with_capacity(bumps.len());
    for b in bumps {
        let raw = RadialProfile::from_fn(|r| b.eval(r), BASE_SAMPLES, BASE_R_MAX)?;
        out.push(high_pass(&raw, BASE_CUTOFF)?);
    }
    Ok(out)
}

/// How the shaping-coefficient search scores a candidate.
enum ShapingObjective {
    /// Maximize the worst ratio of measured slope excess to the required
    /// slope gap, capped so that ample margins stop attracting larger
    /// coefficients.
    MaxMinRatio { cap: f64 },
    /// Track prescribed slope-excess values at the design radii (candidates
    /// whose excess drops below the required gap anywhere are rejected).
    /// Used when downstream consumers care about the *size* of the slope
    /// excess, not just its sign: the oscillation phase transported by the
    /// base flow has radial gradient proportional to the slope, and an
    /// unnecessarily steep profile inflates the grid resolution needed to
    /// sample it.
    TrackExcess { targets: [f64; 8] },
}

/// Shared tail of the base-flow constructors: searches the three shaping
/// coefficients, re-solving the 3×3 triple system per candidate, then
/// combines, verifies the derivative triple, and records the slope excesses.
fn finish_base_flow(
    filtered: &[RadialProfile; 3],
    basis_triples: &[[f64; 3]; 3],
    shaping_profiles: &[RadialProfile],
    targets: [f64; 3],
    lambda_h: f64,
    weights_ok: &dyn Fn(&[f64; 3]) -> bool,
    objective: &ShapingObjective,
) -> Result<BaseFlow> {
    let design_radii = [0.8, 0.85, 0.9, 0.95, 1.05, 1.1, 1.15, 1.2];
    assert_eq!(shaping_profiles.len(), 3);
    let mut all: Vec<&RadialProfile> = filtered.iter().collect();
    for p in shaping_profiles {
        all.push(p);
    }
    // Rows: derivative triples at 1 and slope excesses at the design radii,
    // per basis profile.
    let zero_targets = targets.iter().all(|&t| t == 0.0);
    let mut triple_rows = [[0.0f64; 3]; 6];
    let mut excess_rows = [[0.0f64; 8]; 6];
    if !zero_targets {
        for (i, p) in all.iter().enumerate() {
            triple_rows[i] = if i < 3 {
                basis_triples[i]
            } else {
                v_theta_over_r_derivatives(p, 1.0)?
            };
            let slope_at_one = v_theta_over_r_slope(p, 1.0)?;
            for (k, &r) in design_radii.iter().enumerate() {
                excess_rows[i][k] = v_theta_over_r_slope(p, r)? - slope_at_one;
            }
        }
    }

    let mut shaping = [0.0f64; 3];
    let mut coefficients = solve_3x3(basis_triples, targets)?;
    if !zero_targets {
        // Deterministic coarse-to-fine search over the three shaping
        // coefficients; the score is the worst excess/requirement ratio over
        // the design radii, capped so that once the inequality holds with
        // ample margin, smaller coefficients win. Candidates whose induced
        // triple-solve weights fail the caller's budget are rejected
        // outright.
        let score_of = |c: [f64; 3]| -> Option<(f64, [f64; 3])> {
            let mut rhs = [0.0f64; 3];
            for j in 0..3 {
                rhs[j] = targets[j]
                    - c[0] * triple_rows[3][j]
                    - c[1] * triple_rows[4][j]
                    - c[2] * triple_rows[5][j];
            }
            let c123 = solve_3x3(basis_triples, rhs).ok()?;
            if !weights_ok(&c123) {
                return None;
            }
            let mut excess = [0.0f64; 8];
            for (k, &_r) in design_radii.iter().enumerate() {
                for i in 0..3 {
                    excess[k] += c123[i] * excess_rows[i][k] + c[i] * excess_rows[3 + i][k];
                }
            }
            let penalty = 1e-4 * (c[0].abs() + c[1].abs() + c[2].abs());
            let score = match objective {
                ShapingObjective::MaxMinRatio { cap } => {
                    let mut worst = f64::INFINITY;
                    for (k, &r) in design_radii.iter().enumerate() {
                        worst = worst.min(excess[k] / slope_gap_requirement(r));
                    }
                    worst.min(*cap)
                }
                ShapingObjective::TrackExcess { targets } => {
                    for (k, &r) in design_radii.iter().enumerate() {
                        if excess[k] < slope_gap_requirement(r) {
                            return None;
                        }
                    }
                    let mut dev = 0.0;
                    for k in 0..8 {
                        dev += (excess[k] - targets[k]) * (excess[k] - targets[k]);
                    }
                    -dev
                }
            };
            Some((score - penalty, c123))
        };
        let mut center = [0.0f64; 3];
        let mut span = 90.0f64;
        let mut best: Option<(f64, [f64; 3], [f64; 3])> = None;
        for _ in 0..4 {
            let step = span / 15.0;
            for i in -15..=15i32 {
                for j in -15..=15i32 {
                    for l in -15..=15i32 {
                        let c = [
                            center[0] + f64::from(i) * step,
                            center[1] + f64::from(j) * step,
                            center[2] + f64::from(l) * step,
                        ];
                        if let Some((s, c123)) = score_of(c) {
                            if best.is_none() || s > best.as_ref().unwrap().0 {
                                best = Some((s, c, c123));
                            }
                        }
                    }
                }
            }
            let b = best.as_ref().ok_or(SqgError::NonConvergence {
                context: "shaping-coefficient search",
                residual: f64::INFINITY,
                tol: 0.0,
            })?;
            center = b.1;
            span = 2.0 * step;
        }
        let (_, c, c123) = best.unwrap();
        shaping = c;
        coefficients = c123;
    }

    let weights = [
        coefficients[0],
        coefficients[1],
        coefficients[2],
        shaping[0],
        shaping[1],
        shaping[2],
    ];
    let profile = RadialProfile::linear_combination(&all, &weights)?;
    let measured = v_theta_over_r_derivatives(&profile, 1.0)?;
    for j in 0..3 {
        let tol = 0.02 * targets[j].abs().max(1.0);
        if (measured[j] - targets[j]).abs() > tol {
            return Err(SqgError::TargetMiss {
                component: j,
                measured: measured[j],
                target: targets[j],
            });
        }
    }
    let mut slope_excess = [0.0f64; 4];
    let slope_at_one = v_theta_over_r_slope(&profile, 1.0)?;
    for (k, &r) in SLOPE_CHECK_RADII.iter().enumerate() {
        slope_excess[k] = v_theta_over_r_slope(&profile, r)? - slope_at_one;
    }
    Ok(BaseFlow {
        profile,
        lambda_h,
        coefficients,
        basis_triples: *basis_triples,
        measured,
        shaping,
        slope_excess,
    })
}

/// Builds a moderate-amplitude radial base flow with the same measured
/// derivative triple and slope-gap margin as [`construct_base_flow`], for use
/// as time-evolution initial data.
///
/// The concentrated inverse-power basis of [`construct_base_flow`] reaches
/// peak amplitudes around `1e13` near the origin. Those samples are fine for
/// static derivative measurements, but as initial data for a double-precision
/// evolution they bury any order-one perturbation below roundoff and force an
/// impractical advective time step. This constructor instead measures the
/// derivative triples of three smooth order-one annuli inside the unit circle
/// and solves the same 3×3 system against them, so the combined profile keeps
/// every property downstream code reads — the triple at `r = 1` and the
/// slope-gap inequality at the check radii — at amplitudes of order one. The
/// returned flow reports `lambda_h = 0` to mark the smooth basis.
///
/// Every basis profile is additionally tapered to vanish beyond
/// [`EXPERIMENT_SUPPORT_RADIUS`] (high-passing leaves a slowly decaying
/// far-field tail): evolution experiments need initial data that fits a
/// periodic box, and the radial-decay measurement needs an exactly compact
/// initial support. The taper is applied *before* the derivative rows are
/// measured, so the reported triple and slope excesses hold for the tapered
/// profile exactly.
pub fn construct_experiment_flow(targets: [f64; 3]) -> Result<BaseFlow> {
    let taper = |p: &RadialProfile| {
        p.map(|r, y| y * (1.0 - smooth_step(r - (EXPERIMENT_SUPPORT_RADIUS - 1.0))))
    };
    let basis = high_passed_annuli(&[
        PolyBump { center: 0.30, half_width: 0.10, plateau_fraction: 0.4 },
        PolyBump { center: 0.45, half_width: 0.10, plateau_fraction: 0.4 },
        PolyBump { center: 0.60, half_width: 0.10, plateau_fraction: 0.4 },
    ])?;
    let filtered: [RadialProfile; 3] = [taper(&basis[0]), taper(&basis[1]), taper(&basis[2])];
    let mut basis_triples = [[0.0f64; 3]; 3];
    for (i, p) in filtered.iter().enumerate() {
        basis_triples[i] = v_theta_over_r_derivatives(p, 1.0)?;
    }
    let shaping_profiles: Vec<RadialProfile> = high_passed_annuli(&[
        PolyBump { center: 0.70, half_width: 0.05, plateau_fraction: 0.4 },
        PolyBump { center: 1.35, half_width: 0.07, plateau_fraction: 0.4 },
        PolyBump { center: 1.55, half_width: 0.08, plateau_fraction: 0.4 },
    ])?
    .iter()
    .map(taper)
    .collect();
    // Excess targets grow quadratically away from r = 1: big enough that a
    // phase constant K of order one makes the accumulated damping minimal at
    // the center (the damping comparison pits the slope excess against the
    // radial variation of 1/r²), small enough that the transported phase
    // gradient stays within reach of moderate grids.
    let design_radii = [0.8, 0.85, 0.9, 0.95, 1.05, 1.1, 1.15, 1.2];
    let mut excess_targets = [0.0f64; 8];
    for (k, &r) in design_radii.iter().enumerate() {
        excess_targets[k] = 15.0 * (1.0 - r) * (1.0 - r);
    }
    finish_base_flow(
        &filtered,
        &basis_triples,
        &shaping_profiles,
        targets,
        0.0,
        &|c123: &[f64; 3]| c123.iter().all(|c| c.abs() <= 300.0),
        &ShapingObjective::TrackExcess { targets: excess_targets },
    )
}

/// Convenience wrapper returning only the combined profile.
pub fn construct_base_radial(targets: (f64, f64, f64)) -> Result<RadialProfile> {
    construct_base_flow([targets.0, targets.1, targets.2]).map(|b| b.profile)
}

/// Solves `M c = rhs` where column `i` of `M` is `triples[i]`.
fn solve_3x3(triples: &[[f64; 3]; 3], rhs: [f64; 3]) -> Result<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    let mut scale = 0.0f64;
    for (i, t) in triples.iter().enumerate() {
        for j in 0..3 {
            m[j][i] = t[j];
            scale = scale.max(t[j].abs());
        }
    }
    for j in 0..3 {
        m[j][3] = rhs[j];
    }
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot_row);
        let pivot = m[col][col];
        if pivot.abs() < 1e-10 * scale {
            return Err(SqgError::SingularSystem {
                cond: scale / pivot.abs().max(f64::MIN_POSITIVE),
            });
        }
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / pivot;
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Ok([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Oscillatory field `w(r,θ) = f(λr)·cos(N(θ + g(λr)) + p(λr))`: radial
/// amplitude `f` supported in the annulus `(1/2, 3/2)` of the scaled radius,
/// angular frequency `N`, radial phase `g` and phase offset `p`.
#[derive(Debug, Clone)]
pub struct OscillatoryAnsatz {
    f: RadialProfile,
    g_phase: RadialProfile,
    p_offset: RadialProfile,
    n_freq: u32,
    lambda: f64,
}

impl OscillatoryAnsatz {
    /// Validates the support (amplitude confined to scaled radii in
    /// `(1/2, 3/2)`), `N ≥ 1` and `λ ≥ 1`.
    pub fn new(
        f: RadialProfile,
        g_phase: RadialProfile,
        p_offset: RadialProfile,
        n_freq: u32,
        lambda: f64,
    ) -> Result<Self> {
        if n_freq == 0 {
            return Err(SqgError::InvalidGeometry("angular frequency N must be >= 1".into()));
        }
        if !(lambda >= 1.0) {
            return Err(SqgError::InvalidGeometry(format!(
                "scale lambda = {lambda} must be >= 1"
            )));
        }
        let floor = SUPPORT_FLOOR * f.max_abs().max(1e-300);
        for (&r, &v) in f.r_grid().iter().zip(f.values()) {
            if v.abs() > floor && !(0.5 < r && r < 1.5) {
                return Err(SqgError::InvalidGeometry(format!(
                    "amplitude support leaks outside the (1/2, 3/2) annulus at scaled radius {r}"
                )));
            }
        }
        Ok(OscillatoryAnsatz {
            f,
            g_phase,
            p_offset,
            n_freq,
            lambda,
        })
    }

    /// Amplitude profile (function of the scaled radius).
    pub fn amplitude(&self) -> &RadialProfile {
        &self.f
    }

    /// Radial phase profile.
    pub fn phase(&self) -> &RadialProfile {
        &self.g_phase
    }

    /// Phase-offset profile.
    pub fn phase_offset(&self) -> &RadialProfile {
        &self.p_offset
    }

    /// Angular frequency `N`.
    pub fn n_freq(&self) -> u32 {
        self.n_freq
    }

    /// Radial concentration scale `λ`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Support `(inner, outer)` of the amplitude in *physical* radius.
    pub fn support_radii(&self) -> (f64, f64) {
        let floor = SUPPORT_FLOOR * self.f.max_abs().max(1e-300);
        let mut inner = f64::INFINITY;
        let mut outer = 0.0f64;
        for (&rho, &v) in self.f.r_grid().iter().zip(self.f.values()) {
            if v.abs() > floor {
                inner = inner.min(rho);
                outer = outer.max(rho);
            }
        }
        if inner.is_infinite() {
            (0.0, 0.0)
        } else {
            (inner / self.lambda, outer / self.lambda)
        }
    }

    /// Pointwise value at Cartesian `(x1, x2)`.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let r = x1.hypot(x2);
        let rho = self.lambda * r;
        let amp = self.f.eval(rho);
        if amp == 0.0 {
            return 0.0;
        }
        let theta = x2.atan2(x1);
        amp * (self.n_freq as f64 * (theta + self.g_phase.eval(rho)) + self.p_offset.eval(rho))
            .cos()
    }

    /// Largest local wavenumber over the support: the pointwise magnitude of
    /// the phase gradient `((N/r)², (N λ g'(λr) + λ p'(λr))²)^{1/2}` plus the
    /// amplitude-envelope bandwidth `λ·max|f'|/max|f|`.
    pub fn max_wavenumber(&self) -> f64 {
        let floor = SUPPORT_FLOOR * self.f.max_abs().max(1e-300);
        let n = self.n_freq as f64;
        let mut kappa = 0.0f64;
        let mut max_df = 0.0f64;
        for (&rho, &v) in self.f.r_grid().iter().zip(self.f.values()) {
            if v.abs() <= floor || rho == 0.0 {
                continue;
            }
            let r = rho / self.lambda;
            let k_theta = n / r;
            let k_r = n * self.lambda * self.g_phase.deriv1(rho)
                + self.lambda * self.p_offset.deriv1(rho);
            kappa = kappa.max(k_theta.hypot(k_r));
            max_df = max_df.max(self.f.deriv1(rho).abs());
        }
        kappa + self.lambda * max_df / self.f.max_abs().max(1e-300)
    }
}

/// Samples an oscillatory field onto a grid and transforms it, after checking
/// that the grid resolves the field's largest local wavenumber (with a safety
/// factor of 0.8 against the Nyquist limit). The tiny residual grid mean of
/// the sampled cosine is projected out, so the result is exactly zero-mean.
pub fn sample_ansatz(a: &OscillatoryAnsatz, grid: Grid) -> Result<SpectralField> {
    let nyquist = PI / grid.dx();
    let needed = a.max_wavenumber();
    let available = 0.8 * nyquist;
    if needed > available {
        return Err(SqgError::UnderResolved {
            n: grid.n(),
            l: grid.l(),
            needed,
            available,
        });
    }
    let field = SpectralField::from_fn(grid, |x1, x2| a.eval(x1, x2));
    let mut coeffs = field.coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    Ok(SpectralField::from_coeffs(grid, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::OnceLock;

    #[test]
    fn bump_plateau_and_support_values() {
        let eps = 0.2;
        let f = bump_profile(1.0, eps, 0.5).unwrap();
        assert_abs_diff_eq!(f.eval(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.eval(1.0 - eps / 4.0), 1.0, epsilon = 1e-12);
        assert!(f.eval(1.0 + eps).abs() < 1e-12);
        assert!(f.eval(1.0 - eps).abs() < 1e-12);
        assert!(f.values().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn bump_is_c5_bounded_under_refinement() {
        let bump = SmoothBump::new(1.0, 0.2, 0.5).unwrap();
        // Jet derivatives stay finite through the transition regions.
        let mut max5 = 0.0f64;
        for i in 0..400 {
            let r = 0.79 + 0.42 * i as f64 / 400.0;
            let j = bump.jet(r);
            assert!(j.derivative(5).is_finite());
            max5 = max5.max(j.derivative(5).abs());
        }
        assert!(max5 > 0.0);
        // Grid doubling changes the sampled profile by far less than 1%.
        let coarse = RadialProfile::from_fn(|r| bump.eval(r), 2049, PROFILE_R_MAX).unwrap();
        let fine = RadialProfile::from_fn(|r| bump.eval(r), 4097, PROFILE_R_MAX).unwrap();
        let mut max_diff = 0.0f64;
        for i in 0..1000 {
            let r = 0.75 + 0.5 * i as f64 / 1000.0;
            max_diff = max_diff.max((coarse.eval(r) - fine.eval(r)).abs());
        }
        assert!(max_diff < 0.01, "refinement change {max_diff}");
    }

    #[test]
    fn bump_rejects_bad_geometry() {
        assert!(SmoothBump::new(0.1, 0.2, 0.5).is_err());
        assert!(SmoothBump::new(1.0, 0.2, 1.5).is_err());
    }

    #[test]
    fn angular_kernel_matches_direct_quadrature() {
        for &(r, rp) in &[(1.0f64, 0.3f64), (1.0, 0.95), (0.7, 1.4)] {
            // Direct θ quadrature with panels graded toward θ = 0.
            let mut direct = 0.0;
            let mut a = 0.0;
            for j in (0..40).rev() {
                let b = PI * 2f64.powi(-j);
                direct += 2.0
                    * integrate_gl(
                        &mut |t: f64| {
                            (r - rp * t.cos())
                                / (r * r + rp * rp - 2.0 * r * rp * t.cos()).powf(1.5)
                        },
                        a,
                        b,
                        24,
                    );
                a = b;
            }
            assert_abs_diff_eq!(angular_kernel(r, rp), direct, epsilon = 1e-9 * direct.abs());
        }
    }

    #[test]
    fn v_theta_of_zero_profile_vanishes() {
        let zero = RadialProfile::from_samples(vec![0.0; 64], 2.0).unwrap();
        assert_abs_diff_eq!(v_theta_radial(&zero, 1.0).unwrap(), 0.0, epsilon = 1e-14);
    }

    /// A concentrated annulus of unit radial mass `∫ s h ds = 1`.
    fn concentrated_annulus() -> RadialProfile {
        let bump = SmoothBump::new(0.05, 0.02, 0.5).unwrap();
        let mass = integrate_gl(&mut |s: f64| s * bump.eval(s), 0.03, 0.07, 64);
        RadialProfile::from_fn(|r| bump.eval(r) / mass, 4097, 1.0).unwrap()
    }

    #[test]
    fn v_theta_concentrated_annulus_inverse_square_law() {
        let h = concentrated_annulus();
        let v1 = v_theta_radial(&h, 1.0).unwrap();
        assert_abs_diff_eq!(v1, 2.0 * PI, epsilon = 0.02 * 2.0 * PI);
        let v15 = v_theta_radial(&h, 1.5).unwrap();
        assert_abs_diff_eq!(v15, 2.0 * PI / 2.25, epsilon = 0.02 * 2.0 * PI / 2.25);
    }

    #[test]
    fn derivative_stencil_matches_inverse_cube_law() {
        // For a concentrated annulus v_θ/r = 2π/r³, whose first three
        // derivatives at r = 1 are (-6π, 24π, -120π).
        let h = concentrated_annulus();
        let d = v_theta_over_r_derivatives(&h, 1.0).unwrap();
        assert_abs_diff_eq!(d[0], -6.0 * PI, epsilon = 0.04 * 6.0 * PI);
        assert_abs_diff_eq!(d[1], 24.0 * PI, epsilon = 0.05 * 24.0 * PI);
        assert_abs_diff_eq!(d[2], -120.0 * PI, epsilon = 0.06 * 120.0 * PI);
    }

    #[test]
    fn bessel_j0_reference_values() {
        assert_abs_diff_eq!(bessel_j0(0.0), 1.0, epsilon = 1e-15);
        // J0(1) and J0(5) reference values.
        assert_abs_diff_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-12);
        assert_abs_diff_eq!(bessel_j0(5.0), -0.177_596_771_314_338_3, epsilon = 1e-11);
    }

    #[test]
    fn high_pass_with_tiny_cutoff_is_near_identity() {
        let g = RadialProfile::from_fn(
            |r| 4.0 * SmoothBump::new(0.375, 0.125, 0.4).unwrap().eval(2.0 * r),
            4097,
            PROFILE_R_MAX,
        )
        .unwrap();
        let filtered = high_pass(&g, 0.02).unwrap();
        let mut max_diff = 0.0f64;
        for (a, b) in g.values().iter().zip(filtered.values()) {
            max_diff = max_diff.max((a - b).abs());
        }
        assert!(max_diff < 0.01 * g.max_abs(), "high-pass drift {max_diff}");
    }

    #[test]
    fn high_pass_removes_low_frequency_energy() {
        // The extended grid keeps the filtered profile's slow spatial tail.
        let g = RadialProfile::from_fn(
            |r| 4.0 * SmoothBump::new(0.375, 0.125, 0.4).unwrap().eval(2.0 * r),
            BASE_SAMPLES,
            BASE_R_MAX,
        )
        .unwrap();
        let before = low_frequency_energy_fraction(&g, BASE_CUTOFF);
        let filtered = high_pass(&g, BASE_CUTOFF).unwrap();
        let after = low_frequency_energy_fraction(&filtered, BASE_CUTOFF);
        assert!(before > 1e-3, "unfiltered low-frequency fraction {before}");
        assert!(after < 1e-6, "filtered low-frequency fraction {after}");
    }

    fn standard_base() -> &'static BaseFlow {
        static BASE: OnceLock<BaseFlow> = OnceLock::new();
        BASE.get_or_init(|| construct_base_flow([1.0, 0.0, 1.0]).unwrap())
    }

    #[test]
    fn base_flow_basis_triples_near_ideal_laws() {
        let base = standard_base();
        for i in 0..3 {
            for j in 0..3 {
                let ideal = IDEAL_BASIS_TRIPLES[i][j];
                assert!(
                    (base.basis_triples[i][j] - ideal).abs() <= 0.05 * ideal.abs(),
                    "basis {i} derivative {j}: {} vs ideal {ideal}",
                    base.basis_triples[i][j]
                );
            }
        }
    }

    #[test]
    fn base_flow_hits_derivative_targets() {
        let base = standard_base();
        assert!((base.measured[0] - 1.0).abs() <= 0.02);
        assert!(base.measured[1].abs() <= 0.02);
        assert!((base.measured[2] - 1.0).abs() <= 0.02);
    }

    #[test]
    fn base_flow_slope_minimum_inequality() {
        // The slope of v_θ/r at radii near 1 exceeds the slope at 1 by at
        // least (1/10)(1-r0)², with 10% slack.
        let base = standard_base();
        let at_one = v_theta_over_r_slope(&base.profile, 1.0).unwrap();
        for (k, &r0) in SLOPE_CHECK_RADII.iter().enumerate() {
            let at_r0 = v_theta_over_r_slope(&base.profile, r0).unwrap();
            let excess = at_r0 - at_one;
            let need = slope_gap_requirement(r0);
            assert!(
                excess >= 0.9 * need,
                "slope excess at {r0}: {excess} vs {need}"
            );
            // The constructor's own record agrees with the re-measurement.
            assert!((base.slope_excess[k] - excess).abs() < 1e-6);
        }
    }

    #[test]
    fn base_flow_spectrum_above_cutoff() {
        let base = standard_base();
        let fraction = low_frequency_energy_fraction(&base.profile, BASE_CUTOFF);
        assert!(fraction < 1e-6, "low-frequency fraction {fraction}");
    }

    #[test]
    fn base_flow_zero_targets_gives_zero_profile() {
        let base = construct_base_flow([0.0, 0.0, 0.0]).unwrap();
        assert!(base.coefficients.iter().all(|&c| c.abs() < 1e-12));
        assert!(base.profile.max_abs() < 1e-10);
    }

    fn test_ansatz(n_freq: u32, lambda: f64) -> OscillatoryAnsatz {
        let f = bump_profile(1.0, 0.4, 0.5).unwrap();
        let zero = RadialProfile::from_samples(vec![0.0; 65], PROFILE_R_MAX).unwrap();
        OscillatoryAnsatz::new(f, zero.clone(), zero, n_freq, lambda).unwrap()
    }

    #[test]
    fn sample_matches_direct_evaluation_and_is_zero_mean() {
        let a = test_ansatz(8, 1.0);
        let grid = Grid::new(128, 2.0).unwrap();
        let field = sample_ansatz(&a, grid).unwrap();
        assert!(field.mean().abs() < 1e-14);
        let phys = field.to_physical();
        let n = grid.n();
        let mut direct = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                direct[i * n + j] = a.eval(grid.coord(i), grid.coord(j));
            }
        }
        // Sampling only projects out the (tiny but nonzero) grid mean of the
        // function; everything else must match to roundoff.
        let grid_mean = direct.iter().sum::<f64>() / (n * n) as f64;
        assert!(grid_mean.abs() < 1e-5, "grid mean {grid_mean}");
        let mut max_err = 0.0f64;
        for (p, d) in phys.iter().zip(&direct) {
            max_err = max_err.max((p - (d - grid_mean)).abs());
        }
        assert!(max_err < 1e-10, "sampling error {max_err}");
    }

    #[test]
    fn rotation_by_angular_period_is_a_symmetry() {
        let a = test_ansatz(8, 1.0);
        let dtheta = 2.0 * PI / 8.0;
        for i in 0..200 {
            let r = 0.55 + 0.9 * i as f64 / 200.0;
            let theta = 2.4 * i as f64 / 200.0;
            let (x1, y1) = (r * theta.cos(), r * theta.sin());
            let (x2, y2) = (r * (theta + dtheta).cos(), r * (theta + dtheta).sin());
            assert_abs_diff_eq!(a.eval(x1, y1), a.eval(x2, y2), epsilon = 1e-9);
        }
    }

    #[test]
    fn sampled_l2_norm_matches_radial_quadrature() {
        let a = test_ansatz(8, 1.0);
        let grid = Grid::new(256, 2.0).unwrap();
        let field = sample_ansatz(&a, grid).unwrap();
        // ∫ f(r)²cos²(8θ) r dr dθ = π ∫ f² r dr.
        let radial =
            integrate_gl(&mut |r: f64| a.amplitude().eval(r).powi(2) * r, 0.5, 1.5, 128);
        let expected = (PI * radial).sqrt();
        assert_abs_diff_eq!(field.l2_norm(), expected, epsilon = 1e-3 * expected);
    }

    #[test]
    fn unresolvable_frequency_is_rejected() {
        let a = test_ansatz(500, 1.0);
        let grid = Grid::new(64, 2.0).unwrap();
        match sample_ansatz(&a, grid) {
            Err(SqgError::UnderResolved { needed, available, .. }) => {
                assert!(needed > available);
            }
            other => panic!("expected UnderResolved, got {other:?}"),
        }
    }

    #[test]
    fn amplitude_support_outside_annulus_is_rejected() {
        let f = bump_profile(2.0, 0.4, 0.5).unwrap();
        let zero = RadialProfile::from_samples(vec![0.0; 65], PROFILE_R_MAX).unwrap();
        assert!(OscillatoryAnsatz::new(f, zero.clone(), zero, 8, 1.0).is_err());
    }
}
