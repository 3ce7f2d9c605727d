//! Prepotential / mirror-symmetry data and the transition matrix S between
//! the integral symplectic period vector and the canonical period vector:
//!
//! ```text
//! S = lambda (2 pi i)^3 [ -Y000/3   -Y001/2   0        Y111/6 ]
//!                       [ -Y001/2   -Y011    -Y111/2   0      ]
//!                       [  1         0        0        0      ]
//!                       [  0         1        0        0      ]
//! ```
//!
//! so that z_0 = lambda (2 pi i)^3 varpi_0 and z_1 = lambda (2 pi i)^3 varpi_1.

use crate::continuation::StateMatrix;
use crate::linalg::CMat4;
use crate::num::{pow10, working_bits, Complex, Consts};
use crate::pf_core::{eval_canonical, BranchedPoint, CanonicalBasis, PfError};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MirrorError {
    #[error("mirror-data parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("lambda must be a nonzero rational")]
    ZeroLambda,
    #[error("Y111 must be a positive integer (got {0})")]
    BadY111(Integer),
    #[error("varpi_0 vanishes at the evaluation point")]
    VanishingPeriod,
    #[error(transparent)]
    Pf(#[from] PfError),
}

/// Y000 is either a rational multiple of zeta(3)/(2 pi i)^3 or derived from
/// the Euler characteristic via Y000 = -3 chi zeta(3)/(2 pi i)^3.
#[derive(Clone, Debug, PartialEq)]
pub enum Y000Spec {
    Zeta3Multiple(Rational),
    Rational(Rational),
    FromEuler,
}

/// The prepotential numbers (Y111, Y011, Y001, Y000, lambda) and optional
/// (euler characteristic, k) tags.
#[derive(Clone, Debug)]
pub struct MirrorData {
    pub y111: Integer,
    pub y011: Rational,
    pub y001: Rational,
    pub y000: Y000Spec,
    pub euler: Option<i64>,
    pub lambda: Rational,
    pub k: Option<u32>,
}

impl MirrorData {
    pub fn validate(&self) -> Result<(), MirrorError> {
        if self.y111 <= 0 {
            return Err(MirrorError::BadY111(self.y111.clone()));
        }
        if self.lambda == 0 {
            return Err(MirrorError::ZeroLambda);
        }
        if matches!(self.y000, Y000Spec::FromEuler) && self.euler.is_none() {
            return Err(MirrorError::Parse {
                line: 0,
                msg: "Y000 requested from euler but no euler value given".into(),
            });
        }
        Ok(())
    }

    /// Evaluate Y000 at working precision.
    pub fn y000_value(&self, consts: &Consts) -> Complex {
        match &self.y000 {
            Y000Spec::Rational(q) => Complex::from_rational(consts.bits(), q),
            Y000Spec::Zeta3Multiple(q) => {
                let z3 = zeta3_bits(consts.bits());
                consts
                    .two_pi_i_pow(-3)
                    .scale(&z3)
                    .scale_rational(q)
            }
            Y000Spec::FromEuler => y000_from_euler_bits(self.euler.unwrap(), consts),
        }
    }

    /// Parse the key-value mirror-data file format. `Y000` accepts the
    /// grammar `<rational>` or `<rational>*zeta3/(2*pi*i)^3`.
    pub fn parse(text: &str) -> Result<MirrorData, MirrorError> {
        let mut y111 = None;
        let mut y011 = None;
        let mut y001 = None;
        let mut y000 = None;
        let mut euler = None;
        let mut lambda = None;
        let mut k = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (key, val) = l.split_once(char::is_whitespace).ok_or(MirrorError::Parse {
                line,
                msg: "expected `key value`".into(),
            })?;
            let val = val.trim();
            let parse_rat = |v: &str| -> Result<Rational, MirrorError> {
                v.parse::<Rational>().map_err(|e| MirrorError::Parse {
                    line,
                    msg: format!("bad rational `{v}`: {e}"),
                })
            };
            match key {
                "Y111" => y111 = Some(parse_rat(val)?),
                "Y011" => y011 = Some(parse_rat(val)?),
                "Y001" => y001 = Some(parse_rat(val)?),
                "Y000" => {
                    let normalized = val.replace(' ', "");
                    if let Some(prefix) = normalized.strip_suffix("*zeta3/(2*pi*i)^3") {
                        y000 = Some(Y000Spec::Zeta3Multiple(parse_rat(prefix)?));
                    } else if normalized == "from_euler" {
                        y000 = Some(Y000Spec::FromEuler);
                    } else {
                        y000 = Some(Y000Spec::Rational(parse_rat(&normalized)?));
                    }
                }
                "euler" => {
                    euler = Some(val.parse::<i64>().map_err(|e| MirrorError::Parse {
                        line,
                        msg: format!("bad integer `{val}`: {e}"),
                    })?)
                }
                "lambda" => lambda = Some(parse_rat(val)?),
                "k" => {
                    k = Some(val.parse::<u32>().map_err(|e| MirrorError::Parse {
                        line,
                        msg: format!("bad integer `{val}`: {e}"),
                    })?)
                }
                other => {
                    return Err(MirrorError::Parse {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let y111 = y111.ok_or(MirrorError::Parse {
            line: 0,
            msg: "missing Y111".into(),
        })?;
        if y111.denom() != &1 {
            return Err(MirrorError::Parse {
                line: 0,
                msg: "Y111 must be an integer".into(),
            });
        }
        let md = MirrorData {
            y111: y111.numer().clone(),
            y011: y011.unwrap_or_default(),
            y001: y001.unwrap_or_default(),
            y000: y000.unwrap_or(Y000Spec::FromEuler),
            euler,
            lambda: lambda.unwrap_or_else(|| Rational::from(1)),
            k,
        };
        md.validate()?;
        Ok(md)
    }

    /// Bundled AESZ34 mirror data for k = 1 or k = 2.
    pub fn aesz34(k: u32) -> MirrorData {
        let text = match k {
            1 => include_str!("../data/aesz34_k1.mirror"),
            2 => include_str!("../data/aesz34_k2.mirror"),
            _ => panic!("AESZ34 data is tagged k = 1 or k = 2"),
        };
        MirrorData::parse(text).expect("bundled mirror data parses")
    }
}

/// zeta(3) to `prec` decimal digits by the alternating central-binomial
/// series zeta(3) = (5/2) sum_{n>=1} (-1)^(n-1) / (n^3 binom(2n, n)).
pub fn zeta3(prec: u32) -> Float {
    zeta3_bits(working_bits(prec))
}

pub(crate) fn zeta3_bits(bits: u32) -> Float {
    // terms shrink like 4^-n: n_max ~ bits/2 plus slack
    let nmax = bits / 2 + 16;
    let mut sum = Rational::new();
    for n in 1..=nmax {
        let b = Integer::from(2 * n).binomial(n);
        let mut den = Integer::from(n).pow(3u32);
        den *= &b;
        let term = Rational::from((Integer::from(1), den));
        if n % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum *= Rational::from((5, 2));
    Float::with_val(bits, sum)
}

/// Second, independent route: the accelerated alternating series
/// zeta(3) = (1/4) sum_{n>=1} (-1)^(n-1) (56 n^2 - 32 n + 5)
///           / (2n-1)^2 * ((n-1)!)^3 / (3n)!.
/// Used to cross-check `zeta3`.
pub fn zeta3_alt(prec: u32) -> Float {
    let bits = working_bits(prec);
    // terms shrink like 27^-n
    let nmax = (bits / 4 + 12) as u64;
    let mut sum = Rational::new();
    let mut fact_nm1 = Integer::from(1); // (n-1)!
    for n in 1..=nmax {
        if n > 1 {
            fact_nm1 *= n - 1;
        }
        let num = Integer::from(56 * n * n - 32 * n + 5) * fact_nm1.clone().pow(3u32);
        let mut den = Integer::from((2 * n - 1) * (2 * n - 1));
        den *= Integer::from(Integer::factorial(3 * n as u32));
        let term = Rational::from((num, den));
        if n % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum /= 4;
    Float::with_val(bits, sum)
}

/// Y000 = -3 chi zeta(3) / (2 pi i)^3.
pub fn y000_from_euler(chi: i64, prec: u32) -> Complex {
    let consts = Consts::new(working_bits(prec));
    y000_from_euler_bits(chi, &consts)
}

fn y000_from_euler_bits(chi: i64, consts: &Consts) -> Complex {
    let z3 = zeta3_bits(consts.bits());
    consts
        .two_pi_i_pow(-3)
        .scale(&z3)
        .scale_i64(-3 * chi)
}

/// The transition matrix S at working precision.
#[derive(Clone, Debug)]
pub struct SMatrix {
    pub entries: CMat4,
    pub lambda_used: Rational,
}

pub fn build_s(md: &MirrorData, prec: u32) -> Result<SMatrix, MirrorError> {
    md.validate()?;
    let bits = working_bits(prec);
    let consts = Consts::new(bits);
    build_s_with(md, &consts)
}

pub fn build_s_with(md: &MirrorData, consts: &Consts) -> Result<SMatrix, MirrorError> {
    md.validate()?;
    let bits = consts.bits();
    let y000 = md.y000_value(consts);
    let y111 = Rational::from((md.y111.clone(), Integer::from(1)));
    let mut rows = CMat4::new(bits);
    // row 0: -Y000/3, -Y001/2, 0, Y111/6
    rows.m[0][0] = y000.scale_rational(&Rational::from((-1, 3)));
    rows.m[0][1] = Complex::from_rational(bits, &(Rational::from((-1, 2)) * &md.y001));
    rows.m[0][3] = Complex::from_rational(bits, &(Rational::from((1, 6)) * &y111));
    // row 1: -Y001/2, -Y011, -Y111/2, 0
    rows.m[1][0] = Complex::from_rational(bits, &(Rational::from((-1, 2)) * &md.y001));
    rows.m[1][1] = Complex::from_rational(bits, &-md.y011.clone());
    rows.m[1][2] = Complex::from_rational(bits, &(Rational::from((-1, 2)) * &y111));
    // rows 2, 3: identity block
    rows.m[2][0] = Complex::one(bits);
    rows.m[3][1] = Complex::one(bits);
    let scale = consts.two_pi_i_pow(3).scale_rational(&md.lambda);
    for i in 0..4 {
        for j in 0..4 {
            rows.m[i][j] = rows.m[i][j].mul(&scale);
        }
    }
    Ok(SMatrix {
        entries: rows,
        lambda_used: md.lambda.clone(),
    })
}

/// The mirror map t_c = varpi_1 / varpi_0 at a branched point.
pub fn mirror_map(
    basis: &CanonicalBasis,
    at: &BranchedPoint,
    prec: u32,
) -> Result<Complex, MirrorError> {
    let w = eval_canonical(basis, at, prec)?;
    mirror_map_from_state(&w)
}

pub fn mirror_map_from_state(w: &StateMatrix) -> Result<Complex, MirrorError> {
    let bits = w.entries.prec();
    let denom = &w.entries.m[0][0];
    if denom.abs() < pow10(bits, -((bits / 8) as i32)) {
        return Err(MirrorError::VanishingPeriod);
    }
    Ok(w.entries.m[1][0].div(denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GUARD_DIGITS;
    use crate::pf_core::{frobenius_adaptive, Operator};

    #[test]
    fn zeta3_two_series_agree() {
        for prec in [10u32, 50] {
            let a = zeta3(prec);
            let b = zeta3_alt(prec);
            let diff = Float::with_val(a.prec(), &a - &b).abs();
            assert!(diff < pow10(a.prec(), -(prec as i32 + 5)), "prec {prec}");
        }
        // spot value
        let z = zeta3(10);
        assert!((z.to_f64() - 1.2020569031595942).abs() < 1e-10);
    }

    #[test]
    fn zeta3_partial_sums_bracket() {
        // alternating acceleration: consecutive partial sums bracket the limit
        let bits = 128;
        let limit = zeta3_bits(256);
        let mut sum = Rational::new();
        let mut below = Vec::new();
        let mut above = Vec::new();
        for n in 1..=12u32 {
            let b = Integer::from(2 * n).binomial(n);
            let den = Integer::from(n).pow(3u32) * b;
            let term = Rational::from((Integer::from(5), den * 2));
            if n % 2 == 1 {
                sum += term;
                above.push(Float::with_val(bits, &sum));
            } else {
                sum -= term;
                below.push(Float::with_val(bits, &sum));
            }
        }
        for a in above {
            assert!(a > limit);
        }
        for b in below {
            assert!(b < limit);
        }
    }

    #[test]
    fn zeta3_self_consistent_across_precision() {
        let a = zeta3(50);
        let b = zeta3(60);
        let diff = Float::with_val(256, &a - &b).abs();
        assert!(diff < pow10(256, -50));
        // cross-check against the MPFR builtin
        let mpfr = Float::with_val(a.prec(), 3u32).zeta();
        assert!(Float::with_val(a.prec(), &a - &mpfr).abs() < pow10(a.prec(), -60));
    }

    #[test]
    fn y000_examples() {
        let prec = 40;
        assert!(y000_from_euler(0, prec).abs().is_zero());
        // chi = -8 gives Y000 = 24 zeta3/(2 pi i)^3: matches k = 1 data
        let consts = Consts::new(working_bits(prec));
        let via_chi = y000_from_euler(-8, prec);
        let md = MirrorData::aesz34(1);
        let direct = md.y000_value(&consts);
        assert!(via_chi.sub(&direct).abs() < pow10(consts.bits(), -(prec as i32)));
        // purely imaginary: conj(Y000) + Y000 = 0
        assert!(via_chi.re.clone().abs() < pow10(consts.bits(), -(prec as i32)));
        assert!(via_chi.conj().add(&via_chi).abs() < pow10(consts.bits(), -(prec as i32)));
    }

    #[test]
    fn y000_linear_in_chi() {
        let prec = 35;
        let a = y000_from_euler(4, prec);
        let b = y000_from_euler(-12, prec);
        let scaled = a.scale_i64(-3);
        assert!(scaled.sub(&b).abs() < pow10(a.prec(), -(prec as i32)));
    }

    #[test]
    fn parse_bundled_mirror_files() {
        let k1 = MirrorData::aesz34(1);
        assert_eq!(k1.y111, 12);
        assert_eq!(k1.y011, 0);
        assert_eq!(k1.y001, Rational::from(-1));
        assert_eq!(k1.lambda, 1);
        assert_eq!(k1.y000, Y000Spec::Zeta3Multiple(Rational::from(24)));
        let k2 = MirrorData::aesz34(2);
        assert_eq!(k2.y111, 24);
        assert_eq!(k2.y001, Rational::from(-2));
        assert_eq!(k2.y000, Y000Spec::Zeta3Multiple(Rational::from(48)));
    }

    #[test]
    fn s_matrix_k1_structure() {
        let prec = 40;
        let md = MirrorData::aesz34(1);
        let s = build_s(&md, prec).unwrap();
        let bits = s.entries.prec();
        let consts = Consts::new(bits);
        let c3 = consts.two_pi_i_pow(3);
        // rows 2 and 3 are lambda (2 pi i)^3 identity rows
        for (row, col) in [(2usize, 0usize), (3, 1)] {
            let diff = s.entries.m[row][col].sub(&c3).abs();
            assert!(diff < pow10(bits, -(prec as i32)));
            for j in 0..4 {
                if j != col {
                    assert!(s.entries.m[row][j].abs() < pow10(bits, -(prec as i32)));
                }
            }
        }
        // S / (2 pi i)^3 entry (0,1) = 1/2, (0,3) = 2, (1,2) = -6
        for (i, j, num, den) in [(0usize, 1usize, 1i64, 2i64), (0, 3, 2, 1), (1, 2, -6, 1)] {
            let v = s.entries.m[i][j].div(&c3);
            let expect = Complex::from_rational(bits, &Rational::from((num, den)));
            assert!(v.sub(&expect).abs() < pow10(bits, -(prec as i32)), "({i},{j})");
        }
        // (0,0) entry = -8 zeta3 / (2 pi i)^3 * (2 pi i)^3 = -8 zeta3
        let v = s.entries.m[0][0].clone();
        let expect = Complex::with_val(bits, -8).scale(&zeta3_bits(bits));
        assert!(v.sub(&expect).abs() < pow10(bits, -(prec as i32)));
    }

    #[test]
    fn s_matrix_sparsity_y111_only() {
        let md = MirrorData {
            y111: Integer::from(6),
            y011: Rational::new(),
            y001: Rational::new(),
            y000: Y000Spec::Rational(Rational::new()),
            euler: None,
            lambda: Rational::from(1),
            k: None,
        };
        let s = build_s(&md, 30).unwrap();
        let mut nonzero = 0;
        for i in 0..2 {
            for j in 0..4 {
                if !s.entries.m[i][j].is_zero() {
                    nonzero += 1;
                }
            }
        }
        assert_eq!(nonzero, 2, "only Y111/6 and -Y111/2 entries in rows 0-1");
    }

    #[test]
    fn s_matrix_determinant_formula() {
        // det S = lambda^4 (2 pi i)^12 Y111^2 / 12
        let prec = 40;
        for k in [1u32, 2] {
            let md = MirrorData::aesz34(k);
            let s = build_s(&md, prec).unwrap();
            let bits = s.entries.prec();
            let consts = Consts::new(bits);
            let det = s.entries.det();
            let y111 = 12i64 * k as i64;
            let expect = consts
                .two_pi_i_pow(12)
                .scale_rational(&Rational::from((y111 * y111, 12)));
            let rel = det.sub(&expect).abs() / expect.abs();
            assert!(rel.to_f64() < 1e-30, "k={k}");
        }
    }

    #[test]
    fn s_preserves_symplectic_form_up_to_scale() {
        // S^T Sigma S is antisymmetric at working precision
        let prec = 40;
        let md = MirrorData::aesz34(1);
        let s = build_s(&md, prec).unwrap();
        let bits = s.entries.prec();
        let sigma = crate::deligne::gram_matrix().0;
        let mut sig = crate::linalg::CMat4::new(bits);
        for i in 0..4 {
            for j in 0..4 {
                sig.m[i][j] = Complex::with_val(bits, sigma[i][j]);
            }
        }
        // transpose of S
        let mut st = crate::linalg::CMat4::new(bits);
        for i in 0..4 {
            for j in 0..4 {
                st.m[i][j] = s.entries.m[j][i].clone();
            }
        }
        let prod = st.mul(&sig).mul(&s.entries);
        let scale = prod.max_abs_entry();
        for i in 0..4 {
            for j in 0..4 {
                let sym = prod.m[i][j].add(&prod.m[j][i]).abs();
                assert!(
                    sym / &scale < pow10(bits, -(prec as i32)),
                    "entry ({i},{j}) breaks antisymmetry"
                );
            }
        }
    }

    #[test]
    fn zero_lambda_rejected() {
        let mut md = MirrorData::aesz34(1);
        md.lambda = Rational::new();
        assert!(matches!(build_s(&md, 30), Err(MirrorError::ZeroLambda)));
    }

    #[test]
    fn mirror_map_leading_term_and_monodromy() {
        let op = Operator::aesz34();
        let prec = 40;
        let basis = frobenius_adaptive(&op, 1e-3, prec).unwrap();
        let bits = working_bits(prec);
        let consts = Consts::new(bits);
        let at = BranchedPoint::from_rational(&Rational::from((1, 1000)), bits);
        let tc = mirror_map(&basis, &at, prec).unwrap();
        // t_c - log(phi)/(2 pi i) -> 0 as phi -> 0+
        let lead = at.log_value.mul(&consts.two_pi_i_pow(-1));
        assert!(tc.sub(&lead).abs().to_f64() < 1e-2);
        // monodromy log -> log + 2 pi i sends t_c -> t_c + 1
        let shifted = BranchedPoint::new(
            at.value.clone(),
            at.log_value.add(&consts.two_pi_i_pow(1)),
        );
        let tc2 = mirror_map(&basis, &shifted, prec).unwrap();
        let one = Complex::one(bits);
        assert!(
            tc2.sub(&tc).sub(&one).abs() < pow10(bits, -(prec as i32 - 2)),
            "t_c shift"
        );
        // Im t_c > 0 on small rays
        assert!(tc.im.to_f64() > 0.0);
        let at_neg = BranchedPoint::from_rational(&Rational::from((-1, 1000)), bits);
        let tcn = mirror_map(&basis, &at_neg, prec).unwrap();
        assert!(tcn.im.to_f64() > 0.0);
        let _ = GUARD_DIGITS;
    }
}
