//! Truncated Taylor-series arithmetic ("jets") of fixed order.
//!
//! A [`Jet`] carries the Taylor coefficients `a_k = f^{(k)}(x)/k!` of a
//! function at a point, up to order [`JET_ORDER`]. Arithmetic on jets
//! propagates derivatives exactly (to machine precision), which is how
//! closed-form bump profiles are differentiated to fourth and fifth order
//! without noisy finite differencing.

/// Highest derivative order carried by a [`Jet`].
pub const JET_ORDER: usize = 6;

const LEN: usize = JET_ORDER + 1;

/// Taylor jet: value and derivatives up to order [`JET_ORDER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    /// Taylor coefficients `a_k = f^{(k)}/k!`.
    pub coeffs: [f64; LEN],
}

impl Jet {
    /// Constant jet (all derivatives zero).
    pub fn constant(c: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = c;
        Jet { coeffs }
    }

    /// The identity function `x ↦ x` expanded at `x`.
    pub fn variable(x: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = x;
        coeffs[1] = 1.0;
        Jet { coeffs }
    }

    /// Value of the function.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative (`k <= JET_ORDER`).
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= JET_ORDER);
        let mut fact = 1.0;
        for j in 1..=k {
            fact *= j as f64;
        }
        self.coeffs[k] * fact
    }

    /// Multiplicative inverse `1/f`; requires `f != 0`.
    pub fn recip(&self) -> Self {
        assert!(self.coeffs[0] != 0.0, "jet reciprocal of zero");
        let mut out = [0.0; LEN];
        out[0] = 1.0 / self.coeffs[0];
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.coeffs[j] * out[k - j];
            }
            out[k] = -acc / self.coeffs[0];
        }
        Jet { coeffs: out }
    }

    /// Exponential `exp(f)`, via `(e^f)' = f' e^f`.
    pub fn exp(&self) -> Self {
        let mut out = [0.0; LEN];
        out[0] = self.coeffs[0].exp();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * self.coeffs[j] * out[k - j];
            }
            out[k] = acc / k as f64;
        }
        Jet { coeffs: out }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = self.coeffs;
        for (o, r) in out.iter_mut().zip(&rhs.coeffs) {
            *o += r;
        }
        Jet { coeffs: out }
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let mut out = self.coeffs;
        for (o, r) in out.iter_mut().zip(&rhs.coeffs) {
            *o -= r;
        }
        Jet { coeffs: out }
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = [0.0; LEN];
        for i in 0..LEN {
            for j in 0..LEN - i {
                out[i + j] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        Jet { coeffs: out }
    }
}

impl std::ops::Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl std::ops::Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        let mut out = self.coeffs;
        for o in out.iter_mut() {
            *o *= rhs;
        }
        Jet { coeffs: out }
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}
