//! Picard-Fuchs operators in theta form, singular-point detection, and the
//! canonical Frobenius basis at the large complex structure limit phi = 0.
//!
//! The canonical solutions are
//!
//! ```text
//! varpi_0 = f0
//! varpi_1 = (2 pi i)^-1 (f0 log phi + f1)
//! varpi_2 = (2 pi i)^-2 (f0 log^2 phi + 2 f1 log phi + f2)
//! varpi_3 = (2 pi i)^-3 (f0 log^3 phi + 3 f1 log^2 phi + 3 f2 log phi + f3)
//! ```
//!
//! with f0(0) = 1 and f1(0) = f2(0) = f3(0) = 0, which pins them uniquely.
//! The series coefficients are exact rationals; floats only enter at
//! evaluation time.

use crate::continuation::StateMatrix;
use crate::num::{working_bits, Complex};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported operator: theta-order must be exactly 4 (found {found})")]
    UnsupportedOrder { found: usize },
    #[error("phi = 0 is not a MUM point: the indicial polynomial at 0 is not rho^4")]
    NotMum,
    #[error("point at |phi| = {at} lies outside the guaranteed convergence disc (radius {radius})")]
    OutOfDisc { at: f64, radius: f64 },
    #[error("truncation order {have} supports only {supported} digits at this radius; need about N = {need} for {want} digits")]
    InsufficientTruncation {
        have: usize,
        supported: u32,
        want: u32,
        need: usize,
    },
    #[error("truncation order must be at least 8 (got {0})")]
    TruncationTooSmall(usize),
}

/// A Fuchsian operator sum C[i][j] phi^i theta^j with exact integer
/// coefficients, theta = phi d/dphi.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    pub name: String,
    pub variable: String,
    /// coeffs[i][j] = coefficient of phi^i theta^j
    pub coeffs: Vec<[Integer; 5]>,
}

impl Operator {
    pub fn new(name: String, variable: String, coeffs: Vec<[Integer; 5]>) -> Result<Self, PfError> {
        let mut coeffs = coeffs;
        while coeffs
            .last()
            .map(|row| row.iter().all(|c| *c == 0))
            .unwrap_or(false)
        {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs[0][4] == 0 {
            // a MUM point at 0 needs the theta^4 leading term at phi = 0
            let found = coeffs
                .iter()
                .flat_map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0)
                        .map(|(j, _)| j)
                })
                .max()
                .unwrap_or(0);
            return Err(PfError::UnsupportedOrder { found });
        }
        Ok(Operator {
            name,
            variable,
            coeffs,
        })
    }

    /// Parse the line-oriented operator file format:
    /// `name <label>` / `variable <symbol>` / `c <i> <j> <integer>` lines.
    pub fn parse(text: &str) -> Result<Self, PfError> {
        let mut name = None;
        let mut variable = None;
        let mut entries: Vec<(usize, usize, Integer)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut it = l.split_whitespace();
            match it.next() {
                Some("name") => {
                    name = Some(it.collect::<Vec<_>>().join(" "));
                }
                Some("variable") => {
                    variable = Some(it.collect::<Vec<_>>().join(" "));
                }
                Some("c") => {
                    let parse_usize = |s: Option<&str>, what: &str| {
                        s.ok_or_else(|| PfError::Parse {
                            line,
                            msg: format!("missing {what}"),
                        })
                        .and_then(|v| {
                            v.parse::<usize>().map_err(|_| PfError::Parse {
                                line,
                                msg: format!("bad {what}: {v}"),
                            })
                        })
                    };
                    let i = parse_usize(it.next(), "phi power")?;
                    let j = parse_usize(it.next(), "theta power")?;
                    let c = it
                        .next()
                        .ok_or_else(|| PfError::Parse {
                            line,
                            msg: "missing coefficient".into(),
                        })?
                        .parse::<Integer>()
                        .map_err(|e| PfError::Parse {
                            line,
                            msg: format!("bad coefficient: {e}"),
                        })?;
                    if j > 4 {
                        return Err(PfError::UnsupportedOrder { found: j });
                    }
                    entries.push((i, j, c));
                }
                Some(other) => {
                    return Err(PfError::Parse {
                        line,
                        msg: format!("unknown directive `{other}`"),
                    })
                }
                None => unreachable!(),
            }
        }
        let dmax = entries.iter().map(|(i, _, _)| *i).max().unwrap_or(0);
        let mut coeffs: Vec<[Integer; 5]> = (0..=dmax)
            .map(|_| std::array::from_fn(|_| Integer::new()))
            .collect();
        for (i, j, c) in entries {
            coeffs[i][j] += c;
        }
        Operator::new(
            name.unwrap_or_else(|| "unnamed".into()),
            variable.unwrap_or_else(|| "phi".into()),
            coeffs,
        )
    }

    /// Canonical serialization; `parse(serialize(op))` reproduces `op`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name {}\n", self.name));
        out.push_str(&format!("variable {}\n", self.variable));
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if *c != 0 {
                    out.push_str(&format!("c {} {} {}\n", i, j, c));
                }
            }
        }
        out
    }

    pub fn phi_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True when the indicial equation at 0 is rho^4 = 0.
    pub fn is_mum_at_zero(&self) -> bool {
        self.coeffs[0][..4].iter().all(|c| *c == 0) && self.coeffs[0][4] != 0
    }

    /// R4(phi): the theta^4 coefficient polynomial.
    pub fn leading_theta_poly(&self) -> Vec<Integer> {
        self.coeffs.iter().map(|row| row[4].clone()).collect()
    }

    /// The bundled AESZ34 operator.
    pub fn aesz34() -> Operator {
        Operator::parse(include_str!("../data/aesz34.op")).expect("bundled operator parses")
    }
}

/// An exact or numerically isolated singular point of the operator.
#[derive(Clone, Debug)]
pub enum SingularPoint {
    Rational(Rational),
    /// Irrational root isolated to working precision.
    Approximate(Complex),
    Infinity,
}

impl SingularPoint {
    pub fn to_f64_pair(&self) -> Option<(f64, f64)> {
        match self {
            SingularPoint::Rational(q) => Some((q.to_f64(), 0.0)),
            SingularPoint::Approximate(z) => Some(z.to_f64_pair()),
            SingularPoint::Infinity => None,
        }
    }
}

/// Finite singular points are 0 together with the roots of R4; infinity is
/// always included last. Rational roots come out exact.
pub fn singular_points(op: &Operator, bits: u32) -> Vec<SingularPoint> {
    let mut out = vec![SingularPoint::Rational(Rational::new())];
    let r4 = op.leading_theta_poly();
    let (rational, residual) = rational_roots(&r4);
    for r in rational {
        if r != 0 {
            out.push(SingularPoint::Rational(r));
        }
    }
    for z in numeric_roots(&residual, bits) {
        out.push(SingularPoint::Approximate(z));
    }
    out.push(SingularPoint::Infinity);
    out
}

/// Extract all rational roots of an integer polynomial (with multiplicity),
/// returning them together with the deflated residual polynomial.
fn rational_roots(poly: &[Integer]) -> (Vec<Rational>, Vec<Integer>) {
    let mut p: Vec<Integer> = poly.to_vec();
    while p.last().map(|c| *c == 0).unwrap_or(false) {
        p.pop();
    }
    let mut roots = Vec::new();
    if p.is_empty() {
        return (roots, p);
    }
    // strip powers of x (root 0)
    while p.first().map(|c| *c == 0).unwrap_or(false) {
        roots.push(Rational::new());
        p.remove(0);
    }
    'outer: while p.len() > 1 {
        let lead = p.last().unwrap().clone();
        let cons = p[0].clone();
        for num in divisors_signed(&cons) {
            for den in divisors(&lead) {
                let cand = Rational::from((num.clone(), den.clone()));
                if eval_int_poly(&p, &cand) == 0 {
                    roots.push(cand.clone());
                    p = deflate(&p, &cand);
                    continue 'outer;
                }
            }
        }
        break;
    }
    if p.len() == 1 {
        p.clear();
    }
    (roots, p)
}

fn divisors(n: &Integer) -> Vec<Integer> {
    let n = n.clone().abs();
    let mut out = Vec::new();
    let mut d = Integer::from(1);
    while Integer::from(&d * &d) <= n {
        if n.is_divisible(&d) {
            out.push(d.clone());
            let q = Integer::from(&n / &d);
            if q != d {
                out.push(q);
            }
        }
        d += 1;
    }
    out.sort();
    out
}

fn divisors_signed(n: &Integer) -> Vec<Integer> {
    let mut out = Vec::new();
    for d in divisors(n) {
        out.push(d.clone());
        out.push(-d);
    }
    out
}

fn eval_int_poly(p: &[Integer], x: &Rational) -> Rational {
    let mut acc = Rational::new();
    for c in p.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

/// Exact synthetic division of p by (x - r); caller guarantees p(r) = 0.
/// Output is integer after clearing the root's denominator structure.
fn deflate(p: &[Integer], r: &Rational) -> Vec<Integer> {
    // divide in rationals, then the quotient of a primitive polynomial by an
    // exact root factor has rational coefficients with bounded denominators;
    // clear them by content normalization.
    let n = p.len();
    let mut q: Vec<Rational> = vec![Rational::new(); n - 1];
    let mut carry = Rational::new();
    for i in (1..n).rev() {
        carry = Rational::from(&carry * r) + Rational::from(&p[i]);
        q[i - 1] = carry.clone();
    }
    let mut lcm = Integer::from(1);
    for c in &q {
        lcm = lcm.lcm(c.denom());
    }
    q.iter()
        .map(|c| Integer::from(c.numer() * &lcm) / c.denom())
        .collect()
}

/// Durand-Kerner in f64, polished by bigfloat Newton. Good enough to isolate
/// roots for path clearance.
fn numeric_roots(p: &[Integer], bits: u32) -> Vec<Complex> {
    let deg = p.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let coeffs: Vec<f64> = p.iter().map(|c| c.to_f64()).collect();
    let lead = coeffs[deg];
    let evalc = |z: (f64, f64)| -> (f64, f64) {
        let mut acc = (0.0f64, 0.0f64);
        for c in coeffs.iter().rev() {
            acc = (acc.0 * z.0 - acc.1 * z.1 + c, acc.0 * z.1 + acc.1 * z.0);
        }
        acc
    };
    let mut roots: Vec<(f64, f64)> = (0..deg)
        .map(|k| {
            let ang = 0.4 + 2.0 * std::f64::consts::PI * k as f64 / deg as f64;
            (ang.cos(), ang.sin())
        })
        .collect();
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let zi = roots[i];
            let mut den = (lead, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    let d = (zi.0 - zj.0, zi.1 - zj.1);
                    den = (den.0 * d.0 - den.1 * d.1, den.0 * d.1 + den.1 * d.0);
                }
            }
            let v = evalc(zi);
            let n2 = den.0 * den.0 + den.1 * den.1;
            if n2 == 0.0 {
                continue;
            }
            let delta = (
                (v.0 * den.0 + v.1 * den.1) / n2,
                (v.1 * den.0 - v.0 * den.1) / n2,
            );
            roots[i] = (zi.0 - delta.0, zi.1 - delta.1);
            moved += delta.0.abs() + delta.1.abs();
        }
        if moved < 1e-14 {
            break;
        }
    }
    // Newton polish at full precision
    roots
        .into_iter()
        .map(|r| {
            let mut z = Complex::from_f64_pair(bits, r.0, r.1);
            for _ in 0..(bits / 40 + 4) {
                let (v, d) = eval_poly_and_deriv(p, &z);
                if d.is_zero() {
                    break;
                }
                z = z.sub(&v.div(&d));
            }
            z
        })
        .collect()
}

fn eval_poly_and_deriv(p: &[Integer], z: &Complex) -> (Complex, Complex) {
    let bits = z.prec();
    let mut v = Complex::zero(bits);
    let mut d = Complex::zero(bits);
    for c in p.iter().rev() {
        d = d.mul(z).add(&v);
        v = v.mul(z).add(&Complex::with_val(bits, c));
    }
    (v, d)
}

/// theta^k = sum_j S(k,j) phi^j (d/dphi)^j; Stirling numbers of the second
/// kind for k <= 4.
const STIRLING2: [[i64; 5]; 5] = [
    [1, 0, 0, 0, 0],
    [0, 1, 0, 0, 0],
    [0, 1, 1, 0, 0],
    [0, 1, 3, 1, 0],
    [0, 1, 7, 6, 1],
];

/// The same operator in d/dphi form: sum_j P_j(phi) (d/dphi)^j.
#[derive(Clone, Debug, PartialEq)]
pub struct DOperator {
    /// coeffs[j] = integer polynomial P_j, index = phi power
    pub coeffs: [Vec<Integer>; 5],
}

pub fn theta_to_d(op: &Operator) -> DOperator {
    let d = op.phi_degree();
    let coeffs = std::array::from_fn(|j| {
        let mut poly = vec![Integer::new(); d + j + 1];
        for (i, row) in op.coeffs.iter().enumerate() {
            let mut s = Integer::new();
            for (k, c) in row.iter().enumerate().skip(j) {
                s += Integer::from(c * STIRLING2[k][j]);
            }
            poly[i + j] = s;
        }
        while poly.last().map(|c| *c == 0).unwrap_or(false) && poly.len() > 1 {
            poly.pop();
        }
        poly
    });
    DOperator { coeffs }
}

impl DOperator {
    pub fn leading_poly(&self) -> &[Integer] {
        &self.coeffs[4]
    }
}

/// The four Frobenius solutions at the MUM point, as exact rational series.
#[derive(Clone, Debug)]
pub struct CanonicalBasis {
    pub truncation_order: usize,
    /// f[0..4]: coefficient sequences of f0..f3, length truncation_order + 1
    pub f: [Vec<Rational>; 4],
    /// Distance from 0 to the nearest other singular point (convergence radius).
    pub radius: f64,
}

type QJet = [Rational; 4];

fn qjet_mul(a: &QJet, b: &QJet) -> QJet {
    let mut out: QJet = std::array::from_fn(|_| Rational::new());
    for i in 0..4 {
        if a[i] == 0 {
            continue;
        }
        for j in 0..4 - i {
            out[i + j] += Rational::from(&a[i] * &b[j]);
        }
    }
    out
}

/// Build the canonical basis to truncation order N by the epsilon-jet form of
/// the Frobenius recurrence (coefficients in Q[eps]/eps^4).
pub fn frobenius_mum(op: &Operator, n: usize) -> Result<CanonicalBasis, PfError> {
    if !op.is_mum_at_zero() {
        return Err(PfError::NotMum);
    }
    if n < 8 {
        return Err(PfError::TruncationTooSmall(n));
    }
    let d = op.phi_degree();
    let c04 = Rational::from(&op.coeffs[0][4]);
    let mut a: Vec<QJet> = Vec::with_capacity(n + 1);
    a.push([
        Rational::from(1),
        Rational::new(),
        Rational::new(),
        Rational::new(),
    ]);
    for m in 1..=n {
        let mut rhs: QJet = std::array::from_fn(|_| Rational::new());
        for i in 1..=d.min(m) {
            let pj = p_jet(op, i, (m - i) as i64);
            let t = qjet_mul(&pj, &a[m - i]);
            for r in 0..4 {
                rhs[r] -= &t[r];
            }
        }
        // divide by P0(m + eps) = c04 * (m + eps)^4
        let minv = Rational::from((1, m as i64));
        let m4 = Rational::from(&minv * &minv);
        let m4 = Rational::from(&m4 * &m4); // m^-4
        let inv: QJet = [
            m4.clone(),
            Rational::from(&m4 * &minv) * Rational::from(-4),
            Rational::from(&m4 * &Rational::from(&minv * &minv)) * Rational::from(10),
            Rational::from(&m4 * &Rational::from(&Rational::from(&minv * &minv) * &minv))
                * Rational::from(-20),
        ];
        let mut jet = qjet_mul(&inv, &rhs);
        for r in jet.iter_mut() {
            *r /= &c04;
        }
        a.push(jet);
    }
    let f = [
        a.iter().map(|j| j[0].clone()).collect(),
        a.iter().map(|j| j[1].clone()).collect(),
        a.iter().map(|j| Rational::from(2) * &j[2]).collect(),
        a.iter().map(|j| Rational::from(6) * &j[3]).collect(),
    ];
    let radius = convergence_radius(op);
    Ok(CanonicalBasis {
        truncation_order: n,
        f,
        radius,
    })
}

/// P_i(x + eps) as an eps-jet of rationals, x an integer.
fn p_jet(op: &Operator, i: usize, x: i64) -> QJet {
    // sum_j C[i][j] (x + eps)^j via binomial expansion
    let mut out: QJet = std::array::from_fn(|_| Rational::new());
    for j in 0..=4u32 {
        let c = &op.coeffs[i][j as usize];
        if *c == 0 {
            continue;
        }
        for r in 0..=j.min(3) {
            // binom(j, r) x^(j-r) eps^r
            let b = Integer::from(j).binomial(r);
            let xp = Integer::from(x).pow(j - r);
            out[r as usize] += Rational::from(Integer::from(c * &b) * xp);
        }
    }
    out
}

fn convergence_radius(op: &Operator) -> f64 {
    let sings = singular_points(op, 64);
    let mut best = f64::INFINITY;
    for s in &sings {
        if let Some((re, im)) = s.to_f64_pair() {
            let d = (re * re + im * im).sqrt();
            if d > 0.0 && d < best {
                best = d;
            }
        }
    }
    best
}

impl CanonicalBasis {
    /// Decimal digits the truncation supports at radius r, from the crude
    /// geometric tail bound |c_N| r^N / (1 - r/rho).
    pub fn precision_hint(&self, r: f64) -> u32 {
        if r <= 0.0 {
            return u32::MAX;
        }
        if r >= self.radius {
            return 0;
        }
        let n = self.truncation_order;
        // magnitude of the largest series coefficient at order N
        let bits = 128;
        let mut tail = Float::with_val(bits, 0);
        for series in &self.f {
            let m = Float::with_val(bits, &series[n]).abs();
            if m > tail {
                tail = m;
            }
        }
        let rf = Float::with_val(bits, r);
        tail *= rf.pow(n as u32);
        tail /= Float::with_val(bits, 1.0 - r / self.radius);
        if tail.is_zero() {
            return u32::MAX;
        }
        let digits = -tail.log10().to_f64();
        if digits <= 10.0 {
            0
        } else {
            (digits - 10.0) as u32
        }
    }

    /// Truncation order needed for `prec` digits at radius `r` (crude bound,
    /// same form as `precision_hint`).
    pub fn suggest_truncation(radius: f64, r: f64, prec: u32) -> usize {
        let ratio = radius / r;
        if ratio <= 1.0 {
            return usize::MAX;
        }
        // coefficients grow like rho^-n, so terms shrink like (r/rho)^n
        let need = ((prec as f64 + 20.0) * std::f64::consts::LN_10 / ratio.ln()).ceil() as usize;
        need + 16
    }
}

/// Adaptive-truncation construction for evaluations at radius <= `r`.
pub fn frobenius_adaptive(op: &Operator, r: f64, prec: u32) -> Result<CanonicalBasis, PfError> {
    let radius = convergence_radius(op);
    if r >= radius {
        return Err(PfError::OutOfDisc { at: r, radius });
    }
    let mut n = CanonicalBasis::suggest_truncation(radius, r, prec).max(8);
    loop {
        let basis = frobenius_mum(op, n)?;
        if basis.precision_hint(r) >= prec {
            return Ok(basis);
        }
        n += n / 2 + 16;
        if n > 1_000_000 {
            return Err(PfError::InsufficientTruncation {
                have: n,
                supported: 0,
                want: prec,
                need: n,
            });
        }
    }
}

/// AESZ34-specific independent oracle for the holomorphic period:
/// a_n = sum over i+j+k+l+m = n of (n! / (i! j! k! l! m!))^2.
pub fn holomorphic_coefficient(n: usize) -> Integer {
    let fact: Vec<Integer> = {
        let mut f = vec![Integer::from(1)];
        for i in 1..=n {
            let last = Integer::from(&f[i - 1] * i as u64);
            f.push(last);
        }
        f
    };
    let mut total = Integer::new();
    for i in 0..=n {
        for j in 0..=n - i {
            for k in 0..=n - i - j {
                for l in 0..=n - i - j - k {
                    let m = n - i - j - k - l;
                    let mut den = Integer::from(&fact[i] * &fact[j]);
                    den *= &fact[k];
                    den *= &fact[l];
                    den *= &fact[m];
                    let q = Integer::from(&fact[n] / &den);
                    total += q.square();
                }
            }
        }
    }
    total
}

/// A point together with its chosen branch of log.
#[derive(Clone, Debug)]
pub struct BranchedPoint {
    pub value: Complex,
    pub log_value: Complex,
}

impl BranchedPoint {
    /// Principal branch: log(-x) = ln x + i pi for x > 0.
    pub fn principal(value: Complex) -> Self {
        let log_value = value.ln();
        BranchedPoint { value, log_value }
    }

    pub fn from_rational(q: &Rational, bits: u32) -> Self {
        BranchedPoint::principal(Complex::from_rational(bits, q))
    }

    pub fn new(value: Complex, log_value: Complex) -> Self {
        BranchedPoint { value, log_value }
    }

    /// exp(log_value) = value, checked to roughly the working precision.
    pub fn is_consistent(&self) -> bool {
        let bits = self.value.prec();
        let back = self.log_value.exp();
        let scale = self.value.abs().max(&Float::with_val(bits, 1e-300));
        let tol = Float::with_val(bits, 0.5f64).pow(bits.saturating_sub(24));
        self.value.sub(&back).abs() / scale < tol
    }
}

type CJet = [Complex; 4];

fn cjet_mul(a: &CJet, b: &CJet) -> CJet {
    let bits = a[0].prec();
    let mut out: CJet = std::array::from_fn(|_| Complex::zero(bits));
    for i in 0..4 {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..4 - i {
            out[i + j] = out[i + j].add(&a[i].mul(&b[j]));
        }
    }
    out
}

/// Evaluate the canonical basis and its first three phi-derivatives at a
/// branched point inside the convergence disc. Rows are varpi_0..varpi_3,
/// columns derivative orders 0..3 (all derivatives are d/dphi).
pub fn eval_canonical(
    basis: &CanonicalBasis,
    at: &BranchedPoint,
    prec: u32,
) -> Result<StateMatrix, PfError> {
    let r = at.value.abs().to_f64();
    if r >= basis.radius {
        return Err(PfError::OutOfDisc {
            at: r,
            radius: basis.radius,
        });
    }
    let supported = basis.precision_hint(r);
    if supported < prec {
        return Err(PfError::InsufficientTruncation {
            have: basis.truncation_order,
            supported,
            want: prec,
            need: CanonicalBasis::suggest_truncation(basis.radius, r, prec),
        });
    }
    let bits = working_bits(prec);
    let phi = resize(&at.value, bits);
    let log = resize(&at.log_value, bits);
    // order-3 Taylor jets in h around phi: phi + h and log(phi + h)
    let one = Complex::one(bits);
    let phij: CJet = [
        phi.clone(),
        one.clone(),
        Complex::zero(bits),
        Complex::zero(bits),
    ];
    let inv = phi.recip();
    let inv2 = inv.mul(&inv);
    let logj: CJet = [
        log,
        inv.clone(),
        inv2.scale_rational(&Rational::from((-1, 2))),
        inv2.mul(&inv).scale_rational(&Rational::from((1, 3))),
    ];
    // f_m as jets via Horner
    let fj: Vec<CJet> = basis
        .f
        .iter()
        .map(|series| {
            let mut acc: CJet = std::array::from_fn(|_| Complex::zero(bits));
            for c in series.iter().rev() {
                acc = cjet_mul(&acc, &phij);
                acc[0] = acc[0].add(&Complex::from_rational(bits, c));
            }
            acc
        })
        .collect();
    let consts = crate::num::Consts::new(bits);
    let mut w = crate::linalg::CMat4::new(bits);
    for i in 0..4 {
        // sum_m binom(i,m) f_m L^(i-m), accumulated from m = i down to 0
        let mut acc: CJet = std::array::from_fn(|_| Complex::zero(bits));
        let mut lp: CJet = [
            Complex::one(bits),
            Complex::zero(bits),
            Complex::zero(bits),
            Complex::zero(bits),
        ];
        for m in (0..=i).rev() {
            let b = Integer::from(i as u32).binomial(m as u32);
            let term = cjet_mul(&fj[m], &lp);
            for (slot, t) in acc.iter_mut().zip(term.iter()) {
                *slot = slot.add(&t.scale(&Float::with_val(bits, &b)));
            }
            if m > 0 {
                lp = cjet_mul(&lp, &logj);
            }
        }
        let pref = consts.two_pi_i_pow(-(i as i32));
        let mut fact = Float::with_val(bits, 1);
        for j in 0..4 {
            w.m[i][j] = pref.mul(&acc[j]).scale(&fact);
            fact *= (j + 1) as u32;
        }
    }
    Ok(StateMatrix {
        at: BranchedPoint {
            value: phi,
            log_value: resize(&at.log_value, bits),
        },
        entries: w,
        precision: prec,
    })
}

pub(crate) fn resize(z: &Complex, bits: u32) -> Complex {
    Complex::from_parts(
        Float::with_val(bits, &z.re),
        Float::with_val(bits, &z.im),
    )
}

/// Apply the exact operator to the truncated log-ansatz of solution `sol`
/// (scaled by (2 pi i)^sol to clear prefactors) and return the residual as
/// log-power coefficient series. Used by the recurrence-consistency checks.
pub fn log_ansatz_residual(op: &Operator, basis: &CanonicalBasis, sol: usize) -> [Vec<Rational>; 4] {
    let n = basis.truncation_order;
    let d = op.phi_degree();
    let len = n + d + 1;
    // g[m] = coefficient series of log^m in (2 pi i)^sol varpi_sol
    let mut g: [Vec<Rational>; 4] = std::array::from_fn(|_| vec![Rational::new(); len]);
    for m in 0..=sol {
        let b = Integer::from(sol as u32).binomial(m as u32);
        // term binom(sol, m) f_m log^(sol - m)
        for (idx, c) in basis.f[m].iter().enumerate() {
            g[sol - m][idx] += Rational::from(&b * c);
        }
    }
    let mut out: [Vec<Rational>; 4] = std::array::from_fn(|_| vec![Rational::new(); len]);
    for (i, row) in op.coeffs.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            // theta^j applied to the log-vector
            let mut t = g.clone();
            for _ in 0..j {
                t = theta_log_vector(&t);
            }
            // multiply by C[i][j] phi^i and accumulate
            for (m, series) in t.iter().enumerate() {
                for (idx, v) in series.iter().enumerate() {
                    if idx + i < len && *v != 0 {
                        out[m][idx + i] += Rational::from(c * v);
                    }
                }
            }
        }
    }
    out
}

/// theta acting on sum_m g_m(phi) log(phi)^m:
/// new g_m = theta(g_m) + (m+1) g_{m+1}.
fn theta_log_vector(g: &[Vec<Rational>; 4]) -> [Vec<Rational>; 4] {
    std::array::from_fn(|m| {
        let len = g[m].len();
        let mut out = vec![Rational::new(); len];
        for (idx, v) in g[m].iter().enumerate() {
            if *v != 0 {
                out[idx] = v.clone() * Rational::from(idx as u64);
            }
        }
        if m + 1 < 4 {
            for (idx, v) in g[m + 1].iter().enumerate() {
                out[idx] += v.clone() * Rational::from((m + 1) as u64);
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::pow10;

    fn theta4_only() -> Operator {
        let mut row: [Integer; 5] = std::array::from_fn(|_| Integer::new());
        row[4] = Integer::from(1);
        Operator::new("theta4".into(), "phi".into(), vec![row]).unwrap()
    }

    #[test]
    fn parse_aesz34_headline_coefficients() {
        let op = Operator::aesz34();
        assert_eq!(op.coeffs[0][4], 1);
        assert_eq!(op.coeffs[1][4], -35);
        assert_eq!(op.coeffs[1][0], -5);
        assert_eq!(op.name, "AESZ34");
    }

    #[test]
    fn aesz34_degree_two_row_matches_expansion_oracle() {
        // (t+1)^2 (259 t^2 + 518 t + 285) expanded symbolically
        let a = [Integer::from(1), Integer::from(2), Integer::from(1)]; // (t+1)^2
        let b = [Integer::from(285), Integer::from(518), Integer::from(259)];
        let mut prod = vec![Integer::new(); 5];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                prod[i + j] += Integer::from(ai * bj);
            }
        }
        let op = Operator::aesz34();
        for j in 0..5 {
            assert_eq!(op.coeffs[2][j], prod[j], "theta^{j} coefficient");
        }
        // and the degree-3 row is -225 (t+1)^2 (t+2)^2
        let c = [Integer::from(4), Integer::from(12), Integer::from(13), Integer::from(6), Integer::from(1)];
        for j in 0..5 {
            assert_eq!(op.coeffs[3][j], Integer::from(-225) * &c[j], "deg-3 theta^{j}");
        }
    }

    #[test]
    fn parse_round_trip() {
        let op = Operator::aesz34();
        let again = Operator::parse(&op.serialize()).unwrap();
        assert_eq!(op, again);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Operator::parse("name x\nc 0 4 oops\n").unwrap_err();
        match err {
            PfError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = Operator::parse("c 0 5 1\n").unwrap_err();
        assert!(matches!(err, PfError::UnsupportedOrder { found: 5 }));
    }

    #[test]
    fn trivial_operator_parses() {
        let op = Operator::parse("name t4\nvariable phi\nc 0 4 1\n").unwrap();
        assert_eq!(op.coeffs.len(), 1);
        assert_eq!(op.coeffs[0][4], 1);
        assert!(op.coeffs[0][..4].iter().all(|c| *c == 0));
    }

    #[test]
    fn singular_points_aesz34() {
        let op = Operator::aesz34();
        let pts = singular_points(&op, 128);
        let mut rats: Vec<Rational> = pts
            .iter()
            .filter_map(|p| match p {
                SingularPoint::Rational(q) => Some(q.clone()),
                _ => None,
            })
            .collect();
        rats.sort();
        assert_eq!(
            rats,
            vec![
                Rational::new(),
                Rational::from((1, 25)),
                Rational::from((1, 9)),
                Rational::from(1)
            ]
        );
        assert!(matches!(pts.last(), Some(SingularPoint::Infinity)));
        assert_eq!(pts.len(), 5);
    }

    #[test]
    fn aesz34_leading_poly_factors() {
        // (1 - phi)(1 - 9 phi)(1 - 25 phi) = 1 - 35 phi + 259 phi^2 - 225 phi^3
        let op = Operator::aesz34();
        let r4 = op.leading_theta_poly();
        let factors = [[1i64, -1], [1, -9], [1, -25]];
        let mut prod = vec![Integer::from(1)];
        for f in factors {
            let mut next = vec![Integer::new(); prod.len() + 1];
            for (i, c) in prod.iter().enumerate() {
                next[i] += Integer::from(c * f[0]);
                next[i + 1] += Integer::from(c * f[1]);
            }
            prod = next;
        }
        assert_eq!(r4, prod);
    }

    #[test]
    fn singular_points_theta4() {
        let pts = singular_points(&theta4_only(), 128);
        assert_eq!(pts.len(), 2); // {0, infinity}
    }

    #[test]
    fn stirling_conversion_theta_powers() {
        // theta -> phi D and theta^2 -> phi D + phi^2 D^2
        for (j, expect) in [
            (1usize, vec![vec![0i64, 1]]),
            (2, vec![vec![0, 1], vec![0, 0, 1]]),
        ] {
            let mut row: [Integer; 5] = std::array::from_fn(|_| Integer::new());
            row[j] = Integer::from(1);
            let op = Operator {
                name: "t".into(),
                variable: "phi".into(),
                coeffs: vec![row],
            };
            let d = theta_to_d(&op);
            for (order, poly) in expect.iter().enumerate() {
                let got: Vec<i64> = d.coeffs[order + 1].iter().map(|c| c.to_i64().unwrap()).collect();
                assert_eq!(&got, poly, "theta^{j}, D^{}", order + 1);
            }
        }
    }

    #[test]
    fn stirling_conversion() {
        // theta^4 -> phi D + 7 phi^2 D^2 + 6 phi^3 D^3 + phi^4 D^4
        let d = theta_to_d(&theta4_only());
        assert_eq!(d.coeffs[1], vec![Integer::new(), Integer::from(1)]);
        assert_eq!(d.coeffs[2], vec![Integer::new(), Integer::new(), Integer::from(7)]);
        assert_eq!(
            d.coeffs[3],
            vec![Integer::new(), Integer::new(), Integer::new(), Integer::from(6)]
        );
        assert_eq!(
            d.coeffs[4],
            vec![
                Integer::new(),
                Integer::new(),
                Integer::new(),
                Integer::new(),
                Integer::from(1)
            ]
        );
    }

    #[test]
    fn stirling_conversion_on_monomials() {
        // theta-form and D-form agree on phi^m exactly for m <= 12
        let op = Operator::aesz34();
        let dop = theta_to_d(&op);
        for m in 0..=12i64 {
            // theta-form: sum_{i,j} C[i][j] m^j phi^(m+i)
            let mut theta_val = vec![Rational::new(); op.phi_degree() + m as usize + 1];
            for (i, row) in op.coeffs.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    let v = Rational::from(c * Integer::from(m).pow(j as u32));
                    theta_val[m as usize + i] += v;
                }
            }
            // D-form: sum_j P_j(phi) m!/(m-j)! phi^(m-j)
            let mut d_val = vec![Rational::new(); op.phi_degree() + m as usize + 5];
            for (j, poly) in dop.coeffs.iter().enumerate() {
                if m < j as i64 {
                    continue;
                }
                let mut fall = Integer::from(1);
                for q in (m - j as i64 + 1)..=m {
                    fall *= q;
                }
                for (i, c) in poly.iter().enumerate() {
                    if *c != 0 {
                        d_val[(m as usize - j) + i] += Rational::from(c * &fall);
                    }
                }
            }
            for (i, tv) in theta_val.iter().enumerate() {
                assert_eq!(*tv, d_val[i], "m={m} power {i}");
            }
        }
    }

    #[test]
    fn frobenius_leading_coefficients() {
        let op = Operator::aesz34();
        let basis = frobenius_mum(&op, 12).unwrap();
        let f0: Vec<i64> = basis.f[0][..6].iter().map(|q| q.to_f64() as i64).collect();
        assert_eq!(f0, vec![1, 5, 45, 545, 7885, 127905]);
        for i in 1..4 {
            assert_eq!(basis.f[i][0], 0, "boundary condition f{i}(0) = 0");
        }
        assert_eq!(basis.f[0][0], 1);
    }

    #[test]
    fn frobenius_matches_multinomial_oracle() {
        let op = Operator::aesz34();
        let basis = frobenius_mum(&op, 10).unwrap();
        for n in 0..=10 {
            let expect = holomorphic_coefficient(n);
            assert_eq!(basis.f[0][n], Rational::from(&expect), "a_{n}");
        }
    }

    #[test]
    fn holomorphic_coefficient_small_values() {
        assert_eq!(holomorphic_coefficient(0), 1);
        assert_eq!(holomorphic_coefficient(1), 5);
        assert_eq!(holomorphic_coefficient(2), 45);
    }

    #[test]
    fn non_mum_is_rejected() {
        // theta^4 + 1 has indicial polynomial rho^4 + 1 at 0
        let mut row: [Integer; 5] = std::array::from_fn(|_| Integer::new());
        row[4] = Integer::from(1);
        row[0] = Integer::from(1);
        let op = Operator::new("bad".into(), "phi".into(), vec![row]).unwrap();
        assert!(matches!(frobenius_mum(&op, 10), Err(PfError::NotMum)));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
        #[test]
        fn ode_residual_vanishes_through_n_minus_4(n in 20usize..=60) {
            let op = Operator::aesz34();
            let basis = frobenius_mum(&op, n).unwrap();
            for sol in 0..4 {
                let res = log_ansatz_residual(&op, &basis, sol);
                for (m, series) in res.iter().enumerate() {
                    for (idx, v) in series.iter().enumerate().take(n.saturating_sub(4) + 1) {
                        proptest::prop_assert!(
                            *v == 0,
                            "solution {}: residual at log^{} phi^{} (N = {})", sol, m, idx, n
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn quintic_operator_reproduces_factorial_periods() {
        // the order-4 MUM operator with R4 = 1 - 3125 phi has holomorphic
        // period sum (5n)!/(n!)^5 phi^n: an independent closed form
        let op = Operator::parse(
            "name quintic\nvariable phi\nc 0 4 1\nc 1 4 -3125\nc 1 3 -6250\nc 1 2 -4375\nc 1 1 -1250\nc 1 0 -120\n",
        )
        .unwrap();
        let pts = singular_points(&op, 128);
        let rats: Vec<Rational> = pts
            .iter()
            .filter_map(|p| match p {
                SingularPoint::Rational(q) => Some(q.clone()),
                _ => None,
            })
            .collect();
        assert!(rats.contains(&Rational::from((1, 3125))));
        assert_eq!(pts.len(), 3); // {0, 1/3125, infinity}
        let basis = frobenius_mum(&op, 8).unwrap();
        for n in 0..=6u32 {
            let num = Integer::from(Integer::factorial(5 * n));
            let den = Integer::from(Integer::factorial(n)).pow(5u32);
            let expect = Rational::from((num, den));
            assert_eq!(basis.f[0][n as usize], expect, "n = {n}");
        }
        for i in 1..4 {
            assert_eq!(basis.f[i][0], 0);
        }
    }

    #[test]
    fn eval_canonical_limit_structure() {
        // at small positive phi: varpi_1 / varpi_0 - log(phi)/(2 pi i) -> O(phi)
        let op = Operator::aesz34();
        let prec = 40;
        let basis = frobenius_adaptive(&op, 1e-3, prec).unwrap();
        let bits = working_bits(prec);
        let at = BranchedPoint::from_rational(&Rational::from((1, 1000)), bits);
        let w = eval_canonical(&basis, &at, prec).unwrap();
        let consts = crate::num::Consts::new(bits);
        // row 0 tends to (1, ...) as phi -> 0+
        let one = Complex::one(bits);
        assert!(w.entries.m[0][0].sub(&one).abs().to_f64() < 0.01);
        let tc = w.entries.m[1][0].div(&w.entries.m[0][0]);
        let lead = at.log_value.mul(&consts.two_pi_i_pow(-1));
        let diff = tc.sub(&lead).abs();
        assert!(diff.to_f64() < 1e-2, "diff = {}", diff.to_f64());
        assert!(diff.to_f64() > 1e-5, "correction term should be O(phi log phi)");
    }

    #[test]
    fn eval_canonical_conjugation_symmetry() {
        // at small positive rational phi: conj(W) = diag(1,-1,1,-1) W
        let op = Operator::aesz34();
        let prec = 45;
        let basis = frobenius_adaptive(&op, 0.01, prec).unwrap();
        let bits = working_bits(prec);
        let at = BranchedPoint::from_rational(&Rational::from((1, 100)), bits);
        let w = eval_canonical(&basis, &at, prec).unwrap();
        let signs = [1.0, -1.0, 1.0, -1.0];
        for i in 0..4 {
            for j in 0..4 {
                let lhs = w.entries.m[i][j].conj();
                let rhs = w.entries.m[i][j].scale(&Float::with_val(bits, signs[i]));
                assert!(
                    lhs.sub(&rhs).abs() < pow10(bits, -(prec as i32)),
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn eval_canonical_wronskian_nonzero() {
        let op = Operator::aesz34();
        let prec = 40;
        let basis = frobenius_adaptive(&op, 0.02, prec).unwrap();
        let bits = working_bits(prec);
        for q in [Rational::from((1, 100)), Rational::from((-1, 50)), Rational::from((1, 64))] {
            let at = BranchedPoint::from_rational(&q, bits);
            let w = eval_canonical(&basis, &at, prec).unwrap();
            assert!(w.entries.det().abs().to_f64() > 1e-10, "at {q}");
        }
    }

    #[test]
    fn eval_canonical_rejects_out_of_disc() {
        let op = Operator::aesz34();
        let basis = frobenius_mum(&op, 40).unwrap();
        let bits = working_bits(30);
        let at = BranchedPoint::from_rational(&Rational::from((1, 10)), bits);
        assert!(matches!(
            eval_canonical(&basis, &at, 30),
            Err(PfError::OutOfDisc { .. })
        ));
    }

    #[test]
    fn eval_canonical_reports_needed_truncation() {
        let op = Operator::aesz34();
        let basis = frobenius_mum(&op, 12).unwrap();
        let bits = working_bits(60);
        let at = BranchedPoint::from_rational(&Rational::from((-1, 50)), bits);
        match eval_canonical(&basis, &at, 60) {
            Err(PfError::InsufficientTruncation { need, .. }) => {
                assert!(need > 12, "need = {need}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn branched_point_consistency() {
        let bits = 256;
        let bp = BranchedPoint::from_rational(&Rational::from((-1, 50)), bits);
        assert!(bp.is_consistent());
        assert!(bp.log_value.im.to_f64() > 3.14);
        let bad = BranchedPoint::new(
            Complex::from_f64_pair(bits, 1.0, 0.0),
            Complex::from_f64_pair(bits, 0.5, 0.0),
        );
        assert!(!bad.is_consistent());
    }
}
