//! Rational recognition of floating-point results via continued-fraction
//! convergents, and digit-agreement measurement between computed and
//! reference values.

use rug::{Float, Integer, Rational};

/// A float recognized as a rational of bounded height.
#[derive(Clone, Debug, PartialEq)]
pub struct RecognizedRational {
    pub num: Integer,
    pub den: Integer,
    /// |x - num/den| at the input's precision.
    pub residual: Float,
    /// max(|num|, den)
    pub height: Integer,
}

impl RecognizedRational {
    pub fn value(&self) -> Rational {
        Rational::from((self.num.clone(), self.den.clone()))
    }
}

impl std::fmt::Display for RecognizedRational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// First continued-fraction convergent p/q of `x` with q <= max_height and
/// |x - p/q| < tol, or None. Deterministic; convergents are enumerated in
/// denominator order, so the cutoff is on the denominator while the reported
/// height is max(|p|, q).
pub fn recognize_rational(x: &Float, max_height: u64, tol: &Float) -> Option<RecognizedRational> {
    if !x.is_finite() {
        return None;
    }
    // Binary floats are exact rationals; run the continued fraction exactly.
    let exact = x.to_rational()?;
    let mut rem = exact.clone();
    // convergents p_{-1}/q_{-1} = 1/0, p_0/q_0 = a_0/1
    let mut p_prev = Integer::from(1);
    let mut q_prev = Integer::from(0);
    let mut first = true;
    let mut p_cur = Integer::new();
    let mut q_cur = Integer::new();
    let max_h = Integer::from(max_height);
    loop {
        let (fract, floor) = rem.clone().fract_floor(Integer::new());
        let (p_new, q_new) = if first {
            (floor.clone(), Integer::from(1))
        } else {
            (
                Integer::from(&floor * &p_cur) + &p_prev,
                Integer::from(&floor * &q_cur) + &q_prev,
            )
        };
        if q_new > max_h {
            return None;
        }
        let cand = Rational::from((p_new.clone(), q_new.clone()));
        let diff = Rational::from(&exact - &cand);
        let residual = Float::with_val(x.prec(), &diff).abs();
        if residual < *tol {
            let height = if p_new.clone().abs() > q_new {
                p_new.clone().abs()
            } else {
                q_new.clone()
            };
            return Some(RecognizedRational {
                num: p_new,
                den: q_new,
                residual,
                height,
            });
        }
        if first {
            p_cur = p_new;
            q_cur = q_new;
            first = false;
        } else {
            p_prev = std::mem::replace(&mut p_cur, p_new);
            q_prev = std::mem::replace(&mut q_cur, q_new);
        }
        if fract == 0 {
            // exact rational exhausted without meeting tol
            return None;
        }
        rem = fract.recip();
    }
}

/// floor(-log10(|a - b| / max(|b|, 1e-300))), capped at the working precision
/// when the difference vanishes. Symmetric within one digit.
pub fn digits_agreement(a: &Float, b: &Float) -> i64 {
    let prec_digits = (a.prec().min(b.prec()) as f64 / std::f64::consts::LOG2_10) as i64;
    let bits = a.prec().max(b.prec());
    let diff = Float::with_val(bits, a - b).abs();
    if diff.is_zero() {
        return prec_digits;
    }
    let mut scale = Float::with_val(bits, b).abs();
    let floor_abs = Float::with_val(bits, Float::parse("1e-300").unwrap());
    if scale < floor_abs {
        scale = floor_abs;
    }
    let ratio = Float::with_val(bits, &diff / &scale);
    // nudge before flooring so a decimal-exact difference like 1e-7, rounded
    // in binary, still counts its full digits
    let d = (-(ratio.log10()) + Float::with_val(bits, 1e-20)).floor().to_f64();
    if d.is_finite() {
        (d as i64).min(prec_digits)
    } else {
        prec_digits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::pow10;
    use proptest::prelude::*;

    fn f(bits: u32, s: &str) -> Float {
        Float::with_val(bits, Float::parse(s).unwrap())
    }

    #[test]
    fn recognizes_half() {
        let x = f(192, "0.5");
        let r = recognize_rational(&x, 1000, &pow10(192, -30)).unwrap();
        assert_eq!(r.num, 1);
        assert_eq!(r.den, 2);
    }

    #[test]
    fn recognizes_deligne_ratio() {
        // -2401/32 = -75.03125 exactly
        let x = f(256, "-75.03125");
        let r = recognize_rational(&x, 1_000_000, &pow10(256, -30)).unwrap();
        assert_eq!(r.num, -2401);
        assert_eq!(r.den, 32);
        assert_eq!(r.height, 2401);
    }

    #[test]
    fn pi_is_not_recognized_at_tight_tolerance() {
        let pi = Float::with_val(256, rug::float::Constant::Pi);
        assert!(recognize_rational(&pi, 1000, &pow10(256, -20)).is_none());
    }

    #[test]
    fn negative_integer() {
        let x = f(128, "-3");
        let r = recognize_rational(&x, 10, &pow10(128, -20)).unwrap();
        assert_eq!(r.num, -3);
        assert_eq!(r.den, 1);
    }

    #[test]
    fn digits_agreement_examples() {
        let a = f(192, "1.0000001");
        let b = f(192, "1");
        assert_eq!(digits_agreement(&a, &b), 7);
        let same = digits_agreement(&b, &b);
        assert!(same >= 50, "equal values cap at working precision, got {same}");
    }

    #[test]
    fn exhaustive_small_grid() {
        // all reduced p/q with |p|, q <= 120 recover exactly
        let bits = 256;
        let tol = pow10(bits, -30);
        for q in 1i64..=120 {
            for p in -120i64..=120 {
                if rug::Integer::from(p).gcd(&rug::Integer::from(q)) != 1 {
                    continue;
                }
                let x = Float::with_val(bits, Rational::from((p, q)));
                let r = recognize_rational(&x, 10_000, &tol)
                    .unwrap_or_else(|| panic!("failed at {p}/{q}"));
                assert_eq!(r.num, p, "{p}/{q}");
                assert_eq!(r.den, q, "{p}/{q}");
            }
        }
    }

    proptest! {
        // random sample of the 10^4 grid from the spec-level contract
        #[test]
        fn random_grid_recovery(p in -10_000i64..10_000, q in 1i64..10_000) {
            let g = rug::Integer::from(p).gcd(&rug::Integer::from(q)).to_i64().unwrap();
            let (p, q) = (p / g, q / g);
            let bits = 256;
            let x = Float::with_val(bits, Rational::from((p, q)));
            let r = recognize_rational(&x, 10_000, &pow10(bits, -30)).unwrap();
            prop_assert_eq!(r.num, p);
            prop_assert_eq!(r.den, q);
        }

        // monotonicity: shrinking tol never changes a success into a different rational
        #[test]
        fn tol_monotonicity(p in -500i64..500, q in 1i64..500, d1 in 5u32..15, d2 in 15u32..40) {
            let bits = 256;
            let x = Float::with_val(bits, Rational::from((p, q)));
            let loose = recognize_rational(&x, 10_000, &pow10(bits, -(d1 as i32)));
            let tight = recognize_rational(&x, 10_000, &pow10(bits, -(d2 as i32)));
            if let (Some(a), Some(b)) = (loose, tight) {
                // a tighter tolerance may only refine toward the same value or fail
                if a.residual.is_zero() {
                    prop_assert_eq!(a.value(), b.value());
                }
            }
        }
    }
}
