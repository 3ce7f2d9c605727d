//! The complex-conjugation involution F_infinity on degree-3 cohomology, its
//! integer eigenbases, symplectic pairings of the holomorphic threeform
//! against eigenvectors, and the periods c+/c- with the Tate-twist factor.
//!
//! Conventions, in the basis beta = (beta^0, beta^1, alpha^0, alpha^1):
//!
//! * the cup-product Gram matrix is Sigma with Sigma[alpha^a][beta^b] =
//!   delta_ab and antisymmetry;
//! * the coefficient vector of Omega^(n) is S * W[:, n];
//! * the pairing carries the Tate normalization (2 pi i)^-3;
//! * F_infinity = S W conj(W)^-1 conj(S)^-1 and squares to the identity.

use crate::continuation::{rationalize_matrix, StateMatrix};
use crate::linalg::{det4_int, CMat4, QMat4};
use crate::mirror::{zeta3_bits, SMatrix};
use crate::num::{pow10, Complex, Consts};
use crate::recognition::RecognizedRational;
use rug::{Float, Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeligneError {
    #[error("F_infinity is singular (conjugated state not invertible)")]
    Singular,
    #[error("rationalized F_infinity does not square to the identity; wrong branch or path")]
    NotInvolution,
    #[error("eigenspace dimensions are {plus} and {minus}, expected 2 and 2")]
    EigenspaceDims { plus: usize, minus: usize },
    #[error("F_infinity entries were not rationalized; cannot take integer eigenbases")]
    NotRationalized,
    #[error("degenerate pairing determinant (possible non-generic fiber)")]
    DegenerateDeterminant,
    #[error("weight is even and no F_infinity split of the middle Hodge piece was given")]
    MissingDiagonalData,
    #[error("critical set is unbounded for this Hodge data")]
    UnboundedCriticalSet,
    #[error("inconsistent Hodge data: {0}")]
    BadHodge(String),
}

/// The exact integer Gram matrix of the cup product in basis order
/// (beta^0, beta^1, alpha^0, alpha^1).
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(pub [[i64; 4]; 4]);

pub fn gram_matrix() -> GramMatrix {
    GramMatrix([
        [0, 0, -1, 0],
        [0, 0, 0, -1],
        [1, 0, 0, 0],
        [0, 1, 0, 0],
    ])
}

/// F_infinity as floats plus (when recognized) exact rationals.
#[derive(Clone, Debug)]
pub struct Involution {
    pub float_entries: CMat4,
    pub rational_entries: Option<QMat4>,
    pub residual: Float,
}

/// F_infinity = S W conj(W)^-1 conj(S)^-1.
///
/// Entries are rationalized with the half-precision tolerance; a successful
/// rationalization is verified to square to the identity exactly and to have
/// trace zero, otherwise the branch/path conventions are inconsistent.
pub fn f_infinity(s: &SMatrix, w: &StateMatrix) -> Result<Involution, DeligneError> {
    let wbar_inv = w.entries.conj().inverse().ok_or(DeligneError::Singular)?;
    let sbar_inv = s.entries.conj().inverse().ok_or(DeligneError::Singular)?;
    let f = s.entries.mul(&w.entries).mul(&wbar_inv).mul(&sbar_inv);
    let (rational, residual) = rationalize_matrix(&f, w.precision);
    if let Some(q) = &rational {
        if !q.mul(q).is_identity() || q.trace() != 0 {
            return Err(DeligneError::NotInvolution);
        }
    }
    Ok(Involution {
        float_entries: f,
        rational_entries: rational,
        residual,
    })
}

/// Primitive integer bases of ker(F - I) and ker(F + I).
///
/// Each kernel is parametrized by its free coordinates in ascending order
/// (the free coordinate entry is +1 before integer scaling), which makes the
/// bases deterministic. The minus pair is then swapped, if necessary, so that
/// det[plus_0 plus_1 minus_0 minus_1] < 0; this orientation pins the sign of
/// c- consistently with the closed forms at small positive phi.
pub fn eigenspace_bases(
    f: &Involution,
) -> Result<([[Integer; 4]; 2], [[Integer; 4]; 2]), DeligneError> {
    let q = f
        .rational_entries
        .as_ref()
        .ok_or(DeligneError::NotRationalized)?;
    let plus = q.add_identity_scaled(-1).kernel_basis();
    let minus = q.add_identity_scaled(1).kernel_basis();
    if plus.len() != 2 || minus.len() != 2 {
        return Err(DeligneError::EigenspaceDims {
            plus: plus.len(),
            minus: minus.len(),
        });
    }
    let mut plus: [[Integer; 4]; 2] = [plus[0].clone(), plus[1].clone()];
    let mut minus: [[Integer; 4]; 2] = [minus[0].clone(), minus[1].clone()];
    let ordered = det4_int(&[
        plus[0].clone(),
        plus[1].clone(),
        minus[0].clone(),
        minus[1].clone(),
    ]);
    if ordered > 0 {
        minus.swap(0, 1);
    }
    let _ = &mut plus;
    Ok((plus, minus))
}

/// <u, gamma> = (2 pi i)^-3 u^T Sigma gamma, where u is an Omega-coefficient
/// vector in the beta basis and gamma an integer cohomology vector.
pub fn pair(u: &[Complex; 4], gamma: &[Integer; 4], consts: &Consts) -> Complex {
    let bits = consts.bits();
    let sigma = gram_matrix().0;
    let mut acc = Complex::zero(bits);
    for (i, ui) in u.iter().enumerate() {
        for (j, s) in sigma[i].iter().enumerate() {
            if *s != 0 && gamma[j] != 0 {
                let c = Integer::from(*s) * &gamma[j];
                acc = acc.add(&ui.scale(&Float::with_val(bits, &c)));
            }
        }
    }
    acc.mul(&consts.two_pi_i_pow(-3))
}

fn pairing_determinant(
    s: &SMatrix,
    w: &StateMatrix,
    basis: &[[Integer; 4]; 2],
    consts: &Consts,
) -> Result<Complex, DeligneError> {
    // Omega^(n) coefficients = S * (column n of W), n = 0 (value), 1 (derivative)
    let u0 = s.entries.mul_vec(&w.entries.col(0));
    let u1 = s.entries.mul_vec(&w.entries.col(1));
    let a = pair(&u0, &basis[0], consts);
    let b = pair(&u0, &basis[1], consts);
    let c = pair(&u1, &basis[0], consts);
    let d = pair(&u1, &basis[1], consts);
    let det = a.mul(&d).sub(&b.mul(&c));
    let scale = a.abs().max(&b.abs()).max(&c.abs()).max(&d.abs());
    if det.abs() < scale * pow10(consts.bits(), -((w.precision / 2) as i32)) {
        return Err(DeligneError::DegenerateDeterminant);
    }
    Ok(det)
}

/// c+ = det of the 2x2 matrix of pairings of (Omega, Omega') against the
/// plus eigenbasis. Depends on the basis only up to a nonzero rational.
pub fn c_plus(
    s: &SMatrix,
    w: &StateMatrix,
    plus_basis: &[[Integer; 4]; 2],
    consts: &Consts,
) -> Result<Complex, DeligneError> {
    pairing_determinant(s, w, plus_basis, consts)
}

/// c- against the minus eigenbasis.
pub fn c_minus(
    s: &SMatrix,
    w: &StateMatrix,
    minus_basis: &[[Integer; 4]; 2],
    consts: &Consts,
) -> Result<Complex, DeligneError> {
    pairing_determinant(s, w, minus_basis, consts)
}

/// Tate twist by n: multiplies by (2 pi i)^(2n), one factor (2 pi i)^2 per
/// basis vector of the rank-2 eigenspace.
pub fn tate_twist(c: &Complex, n: i32, consts: &Consts) -> Complex {
    c.mul(&consts.two_pi_i_pow(2 * n))
}

/// Reference normalization for c+ at the AESZ34 target fiber:
/// pi^4 det [[varpi_0, -varpi_1 + varpi_2], [varpi_0', -varpi_1' + varpi_2']].
/// Its ratio against L(f2,1) L(f4,2) is the rational -2401/32.
pub fn reference_c_plus(w: &StateMatrix) -> Complex {
    let bits = w.entries.prec();
    let consts = Consts::new(bits);
    let m = &w.entries.m;
    let col0 = m[2][0].sub(&m[1][0]); // -varpi_1 + varpi_2, value
    let col1 = m[2][1].sub(&m[1][1]); // derivative
    let det = m[0][0].mul(&col1).sub(&col0.mul(&m[0][1]));
    det.scale(&consts.pi_pow(4))
}

/// Reference normalization for c-: the determinant of the displayed
/// combination, carrying the pi^6 that survives from the (2 pi i)^6 of the
/// raw cup-product pairings after the rational factor is dropped. Its ratio
/// against pi^3 L(f4,1) L(f2,1) / v_perp is the rational 1029/32.
pub fn reference_c_minus(w: &StateMatrix) -> Complex {
    let bits = w.entries.prec();
    let consts = Consts::new(bits);
    let z3 = zeta3_bits(bits);
    // coefficient 32 zeta(3)/(2 pi i)^3 - 1
    let coef = consts
        .two_pi_i_pow(-3)
        .scale(&z3)
        .scale(&Float::with_val(bits, 32))
        .sub(&Complex::one(bits));
    let m = &w.entries.m;
    let combo = |j: usize| -> Complex {
        coef.mul(&m[0][j])
            .sub(&m[1][j].scale(&Float::with_val(bits, 2)))
            .add(&m[2][j].scale(&Float::with_val(bits, 12)))
            .sub(&m[3][j].scale(&Float::with_val(bits, 8)))
    };
    let u0 = combo(0);
    let u1 = combo(1);
    let v0 = m[1][0].scale(&Float::with_val(bits, 2)).sub(&m[0][0]);
    let v1 = m[1][1].scale(&Float::with_val(bits, 2)).sub(&m[0][1]);
    let det = u0.mul(&v1).sub(&v0.mul(&u1));
    det.scale(&consts.pi_pow(6))
}

/// Hodge data as a list of (p, q, h^{p,q}) entries for a pure structure.
pub type Hodge = Vec<(i64, i64, u64)>;

/// Antidiagonal shorthand: weight w and the list h^{w,0}, h^{w-1,1}, ...
pub fn hodge_from_diagonal(weight: i64, hs: &[u64]) -> Hodge {
    hs.iter()
        .enumerate()
        .map(|(i, &h)| (weight - i as i64, i as i64, h))
        .collect()
}

/// All Tate twists n for which the twisted structure is critical: neither
/// archimedean factor of the structure nor of its dual at 1-s has a pole at
/// s = 0. Off-diagonal pairs (p, q), p > q, each constrain n to the interval
/// [q+1, p]; for even weight the middle piece additionally needs the
/// F_infinity split (dim H^{w/2,+}, dim H^{w/2,-}).
pub fn critical_twists(
    hodge: &Hodge,
    f_inf_split: Option<(u64, u64)>,
) -> Result<Vec<i64>, DeligneError> {
    if hodge.is_empty() {
        return Ok(Vec::new());
    }
    let w = hodge[0].0 + hodge[0].1;
    for (p, q, _) in hodge {
        if p + q != w {
            return Err(DeligneError::BadHodge(format!(
                "mixed weights: ({p},{q}) vs weight {w}"
            )));
        }
    }
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    let mut has_offdiag = false;
    let mut diag_dim = 0u64;
    for &(p, q, h) in hodge {
        if h == 0 {
            continue;
        }
        if p == q {
            diag_dim += h;
            continue;
        }
        has_offdiag = true;
        let (hi_p, lo_q) = if p > q { (p, q) } else { (q, p) };
        lo = lo.max(lo_q + 1);
        hi = hi.min(hi_p);
    }
    if w % 2 == 0 && diag_dim > 0 {
        let (dp, dm) = f_inf_split.ok_or(DeligneError::MissingDiagonalData)?;
        if !has_offdiag {
            return Err(DeligneError::UnboundedCriticalSet);
        }
        let mut out = Vec::new();
        for n in lo..=hi {
            if diagonal_condition_holds(w, n, dp, dm) {
                out.push(n);
            }
        }
        return Ok(out);
    }
    if !has_offdiag {
        // odd weight with no entries of positive dimension
        return Ok(Vec::new());
    }
    Ok((lo..=hi).collect())
}

/// Even-weight middle piece: after twisting by n, F_infinity must act as +1
/// on all of H^{p,p} when p < 0 and as -1 when p >= 0.
fn diagonal_condition_holds(w: i64, n: i64, dim_plus: u64, dim_minus: u64) -> bool {
    let p_twisted = w / 2 - n;
    // F_infinity acts as (-1)^{w/2} on the + part, (-1)^{w/2+1} on the -
    // part; the twist multiplies both by (-1)^n.
    let sign_plus = if (w / 2 + n) % 2 == 0 { 1 } else { -1 };
    let sign_minus = -sign_plus;
    let need = if p_twisted < 0 { 1 } else { -1 };
    (dim_plus == 0 || sign_plus == need) && (dim_minus == 0 || sign_minus == need)
}

/// Everything the verification pipeline produces for one fiber.
pub struct DeligneReport {
    pub operator: String,
    pub k: Option<u32>,
    pub lambda: Rational,
    pub precision: u32,
    pub base: String,
    pub target: String,
    pub f_infinity: Involution,
    pub plus_basis: [[Integer; 4]; 2],
    pub minus_basis: [[Integer; 4]; 2],
    pub c_plus: Complex,
    pub c_minus: Complex,
    pub c_plus_twisted: Complex,
    pub reference_c_plus: Complex,
    pub reference_c_minus: Complex,
    pub l_f2_1: Float,
    pub l_f4_1: Float,
    pub l_f4_2: Float,
    pub v_perp: Float,
    pub ratio_plus_float: Float,
    pub ratio_minus_float: Float,
    pub ratio_plus: Option<RecognizedRational>,
    pub ratio_minus: Option<RecognizedRational>,
    pub digits_plus: i64,
    pub digits_minus: i64,
}

impl DeligneReport {
    pub fn verified(&self) -> bool {
        matches!(&self.ratio_plus, Some(r) if r.num == -2401 && r.den == 32)
            && matches!(&self.ratio_minus, Some(r) if r.num == 1029 && r.den == 32)
    }

    fn fmt_float(x: &Float, digits: usize) -> String {
        x.to_string_radix(10, Some(digits))
    }

    fn fmt_vec(v: &[Integer; 4]) -> String {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Stable `key value` lines; field list documented in docs/report-schema.md.
    pub fn to_kv(&self) -> String {
        let d = self.precision as usize;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push(' ');
            out.push_str(&v);
            out.push('\n');
        };
        kv("operator", self.operator.clone());
        kv("k", self.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()));
        kv("lambda", self.lambda.to_string());
        kv("precision", self.precision.to_string());
        kv("base", self.base.clone());
        kv("target", self.target.clone());
        match &self.f_infinity.rational_entries {
            Some(q) => {
                kv("f_infinity_rational", "1".into());
                for i in 0..4 {
                    for j in 0..4 {
                        kv(&format!("f_inf_{i}{j}"), q.m[i][j].to_string());
                    }
                }
            }
            None => kv("f_infinity_rational", "0".into()),
        }
        kv(
            "f_infinity_residual",
            Self::fmt_float(&self.f_infinity.residual, 8),
        );
        kv("plus_basis_0", Self::fmt_vec(&self.plus_basis[0]));
        kv("plus_basis_1", Self::fmt_vec(&self.plus_basis[1]));
        kv("minus_basis_0", Self::fmt_vec(&self.minus_basis[0]));
        kv("minus_basis_1", Self::fmt_vec(&self.minus_basis[1]));
        kv("c_plus_re", Self::fmt_float(&self.c_plus.re, d));
        kv("c_plus_im", Self::fmt_float(&self.c_plus.im, d));
        kv("c_minus_re", Self::fmt_float(&self.c_minus.re, d));
        kv("c_minus_im", Self::fmt_float(&self.c_minus.im, d));
        kv("c_plus_twisted_re", Self::fmt_float(&self.c_plus_twisted.re, d));
        kv("c_plus_twisted_im", Self::fmt_float(&self.c_plus_twisted.im, d));
        kv("c_plus_ref_re", Self::fmt_float(&self.reference_c_plus.re, d));
        kv("c_plus_ref_im", Self::fmt_float(&self.reference_c_plus.im, d));
        kv("c_minus_ref_re", Self::fmt_float(&self.reference_c_minus.re, d));
        kv("c_minus_ref_im", Self::fmt_float(&self.reference_c_minus.im, d));
        kv("L_f2_1", Self::fmt_float(&self.l_f2_1, d));
        kv("L_f4_1", Self::fmt_float(&self.l_f4_1, d));
        kv("L_f4_2", Self::fmt_float(&self.l_f4_2, d));
        kv("v_perp", Self::fmt_float(&self.v_perp, d));
        kv("ratio_plus_float", Self::fmt_float(&self.ratio_plus_float, d));
        kv("ratio_minus_float", Self::fmt_float(&self.ratio_minus_float, d));
        match &self.ratio_plus {
            Some(r) => {
                kv("ratio_plus_num", r.num.to_string());
                kv("ratio_plus_den", r.den.to_string());
                kv("ratio_plus_height", r.height.to_string());
                kv("ratio_plus_residual", Self::fmt_float(&r.residual, 8));
            }
            None => kv("ratio_plus_num", "unrecognized".into()),
        }
        match &self.ratio_minus {
            Some(r) => {
                kv("ratio_minus_num", r.num.to_string());
                kv("ratio_minus_den", r.den.to_string());
                kv("ratio_minus_height", r.height.to_string());
                kv("ratio_minus_residual", Self::fmt_float(&r.residual, 8));
            }
            None => kv("ratio_minus_num", "unrecognized".into()),
        }
        kv("digits_agreement_plus", self.digits_plus.to_string());
        kv("digits_agreement_minus", self.digits_minus.to_string());
        kv("verified", if self.verified() { "1" } else { "0" }.into());
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "operator {} (k = {}), lambda = {}, precision {} digits\n",
            self.operator,
            self.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            self.lambda,
            self.precision
        ));
        s.push_str(&format!("continued {} -> {}\n\n", self.base, self.target));
        match &self.f_infinity.rational_entries {
            Some(q) => {
                s.push_str("F_infinity (rationalized):\n");
                for i in 0..4 {
                    let row: Vec<String> = (0..4).map(|j| q.m[i][j].to_string()).collect();
                    s.push_str(&format!("  [ {} ]\n", row.join("  ")));
                }
                s.push_str(&format!(
                    "  residual {}\n",
                    Self::fmt_float(&self.f_infinity.residual, 6)
                ));
            }
            None => s.push_str("F_infinity: NOT rationalized (float only)\n"),
        }
        s.push_str(&format!(
            "\nplus eigenbasis:  ({}), ({})\n",
            Self::fmt_vec(&self.plus_basis[0]),
            Self::fmt_vec(&self.plus_basis[1])
        ));
        s.push_str(&format!(
            "minus eigenbasis: ({}), ({})\n\n",
            Self::fmt_vec(&self.minus_basis[0]),
            Self::fmt_vec(&self.minus_basis[1])
        ));
        let show = 40.min(self.precision as usize);
        s.push_str(&format!(
            "c_plus (reference) = {}\n",
            Self::fmt_float(&self.reference_c_plus.re, show)
        ));
        s.push_str(&format!(
            "c_minus (reference) = {}\n",
            Self::fmt_float(&self.reference_c_minus.re, show)
        ));
        s.push_str(&format!("L(f2,1) = {}\n", Self::fmt_float(&self.l_f2_1, show)));
        s.push_str(&format!("L(f4,1) = {}\n", Self::fmt_float(&self.l_f4_1, show)));
        s.push_str(&format!("L(f4,2) = {}\n\n", Self::fmt_float(&self.l_f4_2, show)));
        match &self.ratio_plus {
            Some(r) => s.push_str(&format!(
                "ratio_plus = c_plus / (L(f2,1) L(f4,2)) = {} ({} digits)\n",
                r, self.digits_plus
            )),
            None => s.push_str(&format!(
                "ratio_plus unrecognized: {}\n",
                Self::fmt_float(&self.ratio_plus_float, show)
            )),
        }
        match &self.ratio_minus {
            Some(r) => s.push_str(&format!(
                "ratio_minus = c_minus v_perp / (pi^3 L(f4,1) L(f2,1)) = {} ({} digits)\n",
                r, self.digits_minus
            )),
            None => s.push_str(&format!(
                "ratio_minus unrecognized: {}\n",
                Self::fmt_float(&self.ratio_minus_float, show)
            )),
        }
        s.push_str(&format!(
            "\nverdict: {}\n",
            if self.verified() { "VERIFIED" } else { "NOT VERIFIED" }
        ));
        s
    }
}
