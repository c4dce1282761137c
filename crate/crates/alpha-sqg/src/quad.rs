//! Small quadrature toolbox: Gauss–Legendre rules, composite panels and
//! adaptive Simpson integration. All rules operate on `f64` integrands.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are found by Newton iteration on the Legendre polynomial `P_n`
/// starting from Chebyshev-type initial guesses; accuracy is close to machine
/// precision for the orders used in this crate (`n <= 256`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Tricomi approximation).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - if n == 1 { 1.0 } else { p0 }) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates `f` on `[a, b]` with a single `n`-point Gauss–Legendre rule.
pub fn integrate_gl(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let d = 0.5 * (a + b);
    let mut sum = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        sum += wi * f(c * xi + d);
    }
    c * sum
}

/// Integrates `f` on `[a, b]` split into `panels` equal panels, each handled
/// by an `n`-point Gauss–Legendre rule. Useful for mildly oscillatory
/// integrands where one panel per half-period suffices.
pub fn integrate_gl_panels(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let c = 0.5 * h;
    let mut total = 0.0;
    for p in 0..panels {
        let d = a + (p as f64 + 0.5) * h;
        let mut sum = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            sum += wi * f(c * xi + d);
        }
        total += c * sum;
    }
    total
}

/// Adaptive Simpson integration with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &mut dyn FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Complete elliptic integrals `(K(m), E(m))` with the *complementary*
/// parameter `mc = 1 - m` supplied directly, computed by the arithmetic-
/// geometric mean iteration. Passing `mc` instead of `m` keeps full precision
/// near `m = 1`, where `K` diverges logarithmically.
pub fn elliptic_ke_mc(mc: f64) -> (f64, f64) {
    assert!(mc > 0.0 && mc <= 1.0, "complementary parameter out of range: {mc}");
    let mut a = 1.0f64;
    let mut b = mc.sqrt();
    let mut c = (1.0 - mc).max(0.0).sqrt();
    // E/K = 1 - sum over 2^{n-1} c_n^2 starting at c_0 = k.
    let mut sum = 0.5 * c * c;
    let mut pow2 = 0.5;
    for _ in 0..60 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        pow2 *= 2.0;
        sum += pow2 * c * c;
        if c.abs() < 1e-17 {
            break;
        }
    }
    let k = std::f64::consts::PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// Complete elliptic integrals `(K(m), E(m))` in the parameter `m = k²`.
pub fn elliptic_ke(m: f64) -> (f64, f64) {
    elliptic_ke_mc(1.0 - m)
}

/// Least-squares straight-line fit `y = slope * x + intercept`, returning
/// `(slope, intercept, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // n-point GL is exact for degree 2n-1.
        let val = integrate_gl(&mut |x| x.powi(7) + 3.0 * x.powi(2), -1.0, 1.0, 4);
        assert_abs_diff_eq!(val, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gl_high_order_nodes_are_symmetric() {
        let (x, w) = gauss_legendre(64);
        for i in 0..32 {
            assert_abs_diff_eq!(x[i], -x[63 - i], epsilon = 1e-14);
            assert_abs_diff_eq!(w[i], w[63 - i], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn panel_rule_handles_oscillation() {
        // One panel per half period of sin on [0, 20*pi].
        let val = integrate_gl_panels(&mut |x| x.sin().powi(2), 0.0, 20.0 * PI, 40, 8);
        assert_abs_diff_eq!(val, 10.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn elliptic_integrals_match_reference_values() {
        let (k0, e0) = elliptic_ke(0.0);
        assert_abs_diff_eq!(k0, PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e0, PI / 2.0, epsilon = 1e-15);
        // Reference values for parameter m = 1/2 (Abramowitz & Stegun 17.3).
        let (k, e) = elliptic_ke(0.5);
        assert_abs_diff_eq!(k, 1.854_074_677_301_37, epsilon = 1e-13);
        assert_abs_diff_eq!(e, 1.350_643_881_047_68, epsilon = 1e-13);
    }

    #[test]
    fn elliptic_integrals_match_quadrature() {
        for &m in &[0.1, 0.35, 0.77, 0.95] {
            let kq = integrate_gl(
                &mut |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(),
                0.0,
                PI / 2.0,
                64,
            );
            let eq = integrate_gl(
                &mut |t: f64| (1.0 - m * t.sin().powi(2)).sqrt(),
                0.0,
                PI / 2.0,
                64,
            );
            let (k, e) = elliptic_ke(m);
            assert_abs_diff_eq!(k, kq, epsilon = 1e-12);
            assert_abs_diff_eq!(e, eq, epsilon = 1e-12);
        }
    }

    #[test]
    fn elliptic_k_log_divergence_near_one() {
        // K(m) ~ ln(4/sqrt(mc)) as mc -> 0.
        let mc = 1e-10;
        let (k, e) = elliptic_ke_mc(mc);
        assert_abs_diff_eq!(k, (4.0 / mc.sqrt()).ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_simpson_smooth() {
        let val = adaptive_simpson(&mut |x| x.exp(), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(val, std::f64::consts::E - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, b, r2) = linear_fit(&x, &y);
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }
}
