//! Arbitrary-precision scalar layer: complex numbers over MPFR floats,
//! decimal-digit precision bookkeeping, and cached transcendental constants.
//!
//! Precision is tracked in decimal digits at the API surface; internally every
//! pipeline adds [`GUARD_DIGITS`] working digits before converting to bits.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use std::fmt;

/// Extra working digits carried beyond the requested precision. Absorbs the
/// accumulation over a few hundred Taylor steps without formal error bounds.
pub const GUARD_DIGITS: u32 = 15;

/// Bits needed to represent `digits` decimal digits, with headroom.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

/// Working-precision bits for a request of `prec` decimal digits.
pub fn working_bits(prec: u32) -> u32 {
    bits_for_digits(prec + GUARD_DIGITS)
}

/// 10^(-digits) as a float at `bits` working precision.
pub fn pow10(bits: u32, digits: i32) -> Float {
    Float::with_val(bits, 10).pow(digits)
}

/// A complex number over a pair of MPFR floats of equal precision.
#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Float,
    pub im: Float,
}

impl Complex {
    pub fn new(bits: u32) -> Self {
        Complex {
            re: Float::new(bits),
            im: Float::new(bits),
        }
    }

    pub fn with_val<T>(bits: u32, re: T) -> Self
    where
        Float: rug::Assign<T>,
    {
        let mut r = Float::new(bits);
        rug::Assign::assign(&mut r, re);
        Complex {
            re: r,
            im: Float::new(bits),
        }
    }

    pub fn from_parts(re: Float, im: Float) -> Self {
        debug_assert_eq!(re.prec(), im.prec());
        Complex { re, im }
    }

    pub fn from_rational(bits: u32, r: &Rational) -> Self {
        Complex::from_parts(Float::with_val(bits, r), Float::new(bits))
    }

    pub fn zero(bits: u32) -> Self {
        Complex::new(bits)
    }

    pub fn one(bits: u32) -> Self {
        Complex::with_val(bits, 1)
    }

    /// The imaginary unit.
    pub fn i(bits: u32) -> Self {
        Complex::from_parts(Float::new(bits), Float::with_val(bits, 1))
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Complex {
            re: self.re.clone(),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    pub fn neg(&self) -> Self {
        let p = self.prec();
        Complex::from_parts(
            Float::with_val(p, -&self.re),
            Float::with_val(p, -&self.im),
        )
    }

    pub fn add(&self, rhs: &Complex) -> Self {
        let p = self.prec().max(rhs.prec());
        Complex::from_parts(
            Float::with_val(p, &self.re + &rhs.re),
            Float::with_val(p, &self.im + &rhs.im),
        )
    }

    pub fn sub(&self, rhs: &Complex) -> Self {
        let p = self.prec().max(rhs.prec());
        Complex::from_parts(
            Float::with_val(p, &self.re - &rhs.re),
            Float::with_val(p, &self.im - &rhs.im),
        )
    }

    pub fn mul(&self, rhs: &Complex) -> Self {
        let p = self.prec().max(rhs.prec());
        let mut re = Float::with_val(p, &self.re * &rhs.re);
        re -= Float::with_val(p, &self.im * &rhs.im);
        let mut im = Float::with_val(p, &self.re * &rhs.im);
        im += Float::with_val(p, &self.im * &rhs.re);
        Complex::from_parts(re, im)
    }

    pub fn div(&self, rhs: &Complex) -> Self {
        let p = self.prec().max(rhs.prec());
        let mut den = Float::with_val(p, &rhs.re * &rhs.re);
        den += Float::with_val(p, &rhs.im * &rhs.im);
        let mut re = Float::with_val(p, &self.re * &rhs.re);
        re += Float::with_val(p, &self.im * &rhs.im);
        re /= &den;
        let mut im = Float::with_val(p, &self.im * &rhs.re);
        im -= Float::with_val(p, &self.re * &rhs.im);
        im /= &den;
        Complex::from_parts(re, im)
    }

    pub fn recip(&self) -> Self {
        Complex::one(self.prec()).div(self)
    }

    pub fn scale(&self, c: &Float) -> Self {
        let p = self.prec();
        Complex::from_parts(
            Float::with_val(p, &self.re * c),
            Float::with_val(p, &self.im * c),
        )
    }

    pub fn scale_rational(&self, q: &Rational) -> Self {
        let p = self.prec();
        self.scale(&Float::with_val(p, q))
    }

    pub fn scale_i64(&self, n: i64) -> Self {
        let p = self.prec();
        Complex::from_parts(
            Float::with_val(p, &self.re * n),
            Float::with_val(p, &self.im * n),
        )
    }

    /// Multiply by the imaginary unit.
    pub fn mul_i(&self) -> Self {
        let p = self.prec();
        Complex::from_parts(Float::with_val(p, -&self.im), self.re.clone())
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let mut n = Float::with_val(p, &self.re * &self.re);
        n += Float::with_val(p, &self.im * &self.im);
        n
    }

    pub fn abs(&self) -> Float {
        self.norm_sqr().sqrt()
    }

    /// Principal argument in (-pi, pi]; arg(-x) = +pi for x > 0 real.
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    /// Principal logarithm: log|z| + i arg(z), so log(-1) = +i*pi.
    pub fn ln(&self) -> Self {
        Complex::from_parts(self.abs().ln(), self.arg())
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        let (s, c) = Float::with_val(p, &self.im).sin_cos(Float::new(p));
        Complex::from_parts(Float::with_val(p, &m * &c), Float::with_val(p, &m * &s))
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Complex::one(self.prec());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn from_f64_pair(bits: u32, re: f64, im: f64) -> Self {
        Complex::from_parts(Float::with_val(bits, re), Float::with_val(bits, im))
    }
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e} + {:e}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (self.prec() as f64 / std::f64::consts::LOG2_10) as usize;
        write!(
            f,
            "{} {}",
            self.re.to_string_radix(10, Some(digits)),
            self.im.to_string_radix(10, Some(digits))
        )
    }
}

macro_rules! forward_binop {
    ($t:ident, $m:ident) => {
        impl std::ops::$t<&Complex> for &Complex {
            type Output = Complex;
            fn $m(self, rhs: &Complex) -> Complex {
                Complex::$m(self, rhs)
            }
        }
        impl std::ops::$t<Complex> for Complex {
            type Output = Complex;
            fn $m(self, rhs: Complex) -> Complex {
                Complex::$m(&self, &rhs)
            }
        }
        impl std::ops::$t<&Complex> for Complex {
            type Output = Complex;
            fn $m(self, rhs: &Complex) -> Complex {
                Complex::$m(&self, rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl std::ops::Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex::neg(self)
    }
}

/// Per-precision cache of pi and powers of 2*pi*i. Powers of 2*pi*i dominate
/// the normalization formulas, so they are computed once per context.
pub struct Consts {
    bits: u32,
    pi: Float,
    two_pi_i_pows: Vec<Complex>, // index k -> (2*pi*i)^k, k = 0..=12
}

impl Consts {
    pub fn new(bits: u32) -> Self {
        let pi = Float::with_val(bits, Constant::Pi);
        let two_pi_i = Complex::from_parts(Float::new(bits), Float::with_val(bits, 2 * &pi));
        let mut pows = Vec::with_capacity(13);
        pows.push(Complex::one(bits));
        for k in 1..=12 {
            let prev = pows[k - 1].clone();
            pows.push(prev.mul(&two_pi_i));
        }
        Consts {
            bits,
            pi,
            two_pi_i_pows: pows,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn pi(&self) -> &Float {
        &self.pi
    }

    /// (2*pi*i)^k for -12 <= k <= 12.
    pub fn two_pi_i_pow(&self, k: i32) -> Complex {
        assert!(k.unsigned_abs() <= 12, "cached power range exceeded");
        if k >= 0 {
            self.two_pi_i_pows[k as usize].clone()
        } else {
            self.two_pi_i_pows[(-k) as usize].recip()
        }
    }

    pub fn pi_pow(&self, k: u32) -> Float {
        Float::with_val(self.bits, (&self.pi).pow(k))
    }
}

/// Exact conversion helpers between rug integers and machine ints.
pub fn int(n: i64) -> Integer {
    Integer::from(n)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_field_ops() {
        let b = 128;
        let a = Complex::from_f64_pair(b, 3.0, 4.0);
        let c = Complex::from_f64_pair(b, 1.0, -2.0);
        let prod = a.mul(&c);
        assert_eq!(prod.to_f64_pair(), (11.0, -2.0));
        let q = a.div(&c);
        let back = q.mul(&c);
        assert!((back.sub(&a)).abs().to_f64() < 1e-30);
        assert_eq!(a.abs().to_f64(), 5.0);
    }

    #[test]
    fn principal_log_of_minus_one_is_plus_i_pi() {
        let b = 128;
        let z = Complex::from_f64_pair(b, -1.0, 0.0);
        let l = z.ln();
        assert!(l.re.to_f64().abs() < 1e-30);
        assert!((l.im.to_f64() - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn exp_log_roundtrip() {
        let b = 192;
        let z = Complex::from_f64_pair(b, 0.3, -1.7);
        let w = z.ln().exp();
        assert!(w.sub(&z).abs().to_f64() < 1e-50);
    }

    #[test]
    fn two_pi_i_powers() {
        let c = Consts::new(192);
        // (2*pi*i)^2 = -4*pi^2
        let p2 = c.two_pi_i_pow(2);
        let expect = -4.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((p2.re.to_f64() - expect).abs() < 1e-10);
        assert!(p2.im.to_f64().abs() < 1e-30);
        // (2*pi*i)^3 * (2*pi*i)^-3 = 1
        let one = c.two_pi_i_pow(3).mul(&c.two_pi_i_pow(-3));
        assert!((one.re.to_f64() - 1.0).abs() < 1e-30);
    }
}
