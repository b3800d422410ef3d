use serde::{Deserialize, Serialize};

/// Scalar functions used as `Phi` in convexity identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    /// `slope * z`
    Linear { slope: f64 },
    /// `coeff * z^exponent`
    Power { coeff: f64, exponent: u32 },
    /// Smoothed `(z - level)_+`:
    /// `(ln(1 + e^{k(z - level)}) - ln(1 + e^{-k level})) / k`, vanishing at 0.
    Softplus { level: f64, sharpness: f64 },
    /// `-Phi`
    Negated { inner: Box<ScalarFn> },
    /// `Phi + offset`
    Offset { inner: Box<ScalarFn>, offset: f64 },
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ScalarFn {
    pub fn square() -> Self {
        ScalarFn::Power { coeff: 1.0, exponent: 2 }
    }

    pub fn half_square() -> Self {
        ScalarFn::Power { coeff: 0.5, exponent: 2 }
    }

    pub fn negated(self) -> Self {
        ScalarFn::Negated { inner: Box::new(self) }
    }

    pub fn value(&self, z: f64) -> f64 {
        match self {
            ScalarFn::Linear { slope } => slope * z,
            ScalarFn::Power { coeff, exponent } => coeff * z.powi(*exponent as i32),
            ScalarFn::Softplus { level, sharpness: k } => {
                (softplus(k * (z - level)) - softplus(-k * level)) / k
            }
            ScalarFn::Negated { inner } => -inner.value(z),
            ScalarFn::Offset { inner, offset } => inner.value(z) + offset,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            ScalarFn::Linear { slope } => *slope,
            ScalarFn::Power { coeff, exponent } => match exponent {
                0 => 0.0,
                e => coeff * *e as f64 * z.powi(*e as i32 - 1),
            },
            ScalarFn::Softplus { level, sharpness: k } => logistic(k * (z - level)),
            ScalarFn::Negated { inner } => -inner.derivative(z),
            ScalarFn::Offset { inner, .. } => inner.derivative(z),
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        match self {
            ScalarFn::Linear { .. } => 0.0,
            ScalarFn::Power { coeff, exponent } => match exponent {
                0 | 1 => 0.0,
                e => coeff * (*e as f64) * (*e as f64 - 1.0) * z.powi(*e as i32 - 2),
            },
            ScalarFn::Softplus { level, sharpness: k } => {
                let p = logistic(k * (z - level));
                k * p * (1.0 - p)
            }
            ScalarFn::Negated { inner } => -inner.second_derivative(z),
            ScalarFn::Offset { inner, .. } => inner.second_derivative(z),
        }
    }

    /// True when `Phi'' >= 0` at `samples` points of `[lo, hi]` and at both ends.
    pub fn is_convex_on(&self, lo: f64, hi: f64, samples: usize) -> bool {
        let n = samples.max(2);
        (0..=n).all(|i| {
            let z = lo + (hi - lo) * i as f64 / n as f64;
            let c = self.second_derivative(z);
            c >= -1e-14 * (1.0 + self.derivative(z).abs())
        })
    }

    /// Smallest even power giving a band-limited `w Phi(b)` for polynomial `Phi`.
    pub(crate) fn polynomial_degree(&self) -> Option<u32> {
        match self {
            ScalarFn::Linear { .. } => Some(1),
            ScalarFn::Power { exponent, .. } => Some(*exponent),
            ScalarFn::Softplus { .. } => None,
            ScalarFn::Negated { inner } | ScalarFn::Offset { inner, .. } => inner.polynomial_degree(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScalarFn::Linear { slope } => format!("linear({slope})"),
            ScalarFn::Power { coeff, exponent } => format!("power({coeff}*z^{exponent})"),
            ScalarFn::Softplus { level, sharpness } => format!("softplus(B={level},k={sharpness})"),
            ScalarFn::Negated { inner } => format!("neg[{}]", inner.name()),
            ScalarFn::Offset { inner, offset } => format!("{}+{offset}", inner.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softplus_vanishes_at_zero_and_tracks_ramp() {
        let f = ScalarFn::Softplus { level: 1.0, sharpness: 40.0 };
        assert!(f.value(0.0).abs() < 1e-300);
        assert!((f.value(3.0) - 2.0).abs() < 1e-12);
        assert!(f.value(0.5) < 1e-8);
    }

    #[test]
    fn convexity_checks() {
        assert!(ScalarFn::square().is_convex_on(-3.0, 3.0, 50));
        assert!(!ScalarFn::square().negated().is_convex_on(-3.0, 3.0, 50));
        let cubic = ScalarFn::Power { coeff: 1.0, exponent: 3 };
        assert!(cubic.is_convex_on(0.0, 2.0, 50));
        assert!(!cubic.is_convex_on(-1.0, 2.0, 50));
    }

    #[test]
    fn serde_round_trip() {
        let f = ScalarFn::Softplus { level: 1.5, sharpness: 20.0 }.negated();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<ScalarFn>(&s).unwrap(), f);
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(z in -3.0f64..3.0, level in 0.0f64..2.0, k in 1.0f64..30.0) {
            let h = 1e-5;
            for f in [ScalarFn::Softplus { level, sharpness: k }, ScalarFn::Power { coeff: 0.7, exponent: 4 }] {
                let d = (f.value(z + h) - f.value(z - h)) / (2.0 * h);
                prop_assert!((d - f.derivative(z)).abs() < 1e-6 * (1.0 + d.abs()));
                let dd = (f.derivative(z + h) - f.derivative(z - h)) / (2.0 * h);
                prop_assert!((dd - f.second_derivative(z)).abs() < 1e-5 * (1.0 + dd.abs()));
            }
        }
    }
}
