//! Small dense matrix kernels: 4x4 complex matrices at working precision and
//! exact rational 4x4 matrices (involution checks, eigenspace extraction).

use crate::num::Complex;
use rug::{Float, Integer, Rational};

/// 4x4 matrix of arbitrary-precision complex entries.
#[derive(Clone, Debug)]
pub struct CMat4 {
    pub m: [[Complex; 4]; 4],
}

impl CMat4 {
    pub fn new(bits: u32) -> Self {
        CMat4 {
            m: std::array::from_fn(|_| std::array::from_fn(|_| Complex::zero(bits))),
        }
    }

    pub fn identity(bits: u32) -> Self {
        let mut out = CMat4::new(bits);
        for i in 0..4 {
            out.m[i][i] = Complex::one(bits);
        }
        out
    }

    pub fn prec(&self) -> u32 {
        self.m[0][0].prec()
    }

    pub fn from_rational_entries(bits: u32, q: &[[Rational; 4]; 4]) -> Self {
        let mut out = CMat4::new(bits);
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] = Complex::from_rational(bits, &q[i][j]);
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        CMat4 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j].conj())),
        }
    }

    pub fn mul(&self, rhs: &CMat4) -> Self {
        let bits = self.prec();
        let mut out = CMat4::new(bits);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Complex::zero(bits);
                for k in 0..4 {
                    acc = acc.add(&self.m[i][k].mul(&rhs.m[k][j]));
                }
                out.m[i][j] = acc;
            }
        }
        out
    }

    pub fn sub(&self, rhs: &CMat4) -> Self {
        CMat4 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j].sub(&rhs.m[i][j]))),
        }
    }

    pub fn col(&self, j: usize) -> [Complex; 4] {
        std::array::from_fn(|i| self.m[i][j].clone())
    }

    pub fn mul_vec(&self, v: &[Complex; 4]) -> [Complex; 4] {
        let bits = self.prec();
        std::array::from_fn(|i| {
            let mut acc = Complex::zero(bits);
            for k in 0..4 {
                acc = acc.add(&self.m[i][k].mul(&v[k]));
            }
            acc
        })
    }

    /// Gauss-Jordan inverse with partial pivoting. Returns None when the
    /// pivot collapses below the working precision.
    pub fn inverse(&self) -> Option<CMat4> {
        let bits = self.prec();
        let mut a: Vec<Vec<Complex>> = (0..4)
            .map(|i| {
                let mut row: Vec<Complex> = self.m[i].to_vec();
                for j in 0..4 {
                    row.push(if i == j {
                        Complex::one(bits)
                    } else {
                        Complex::zero(bits)
                    });
                }
                row
            })
            .collect();
        for col in 0..4 {
            let mut piv = col;
            let mut best = a[col][col].abs();
            for r in col + 1..4 {
                let v = a[r][col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return None;
            }
            a.swap(col, piv);
            let inv = a[col][col].recip();
            for j in 0..8 {
                a[col][j] = a[col][j].mul(&inv);
            }
            for r in 0..4 {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for j in 0..8 {
                        a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                    }
                }
            }
        }
        let mut out = CMat4::new(bits);
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] = a[i][4 + j].clone();
            }
        }
        Some(out)
    }

    /// Determinant by elimination with partial pivoting.
    pub fn det(&self) -> Complex {
        let bits = self.prec();
        let mut a: Vec<Vec<Complex>> = (0..4).map(|i| self.m[i].to_vec()).collect();
        let mut det = Complex::one(bits);
        for col in 0..4 {
            let mut piv = col;
            let mut best = a[col][col].abs();
            for r in col + 1..4 {
                let v = a[r][col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return Complex::zero(bits);
            }
            if piv != col {
                a.swap(col, piv);
                det = det.neg();
            }
            det = det.mul(&a[col][col]);
            let inv = a[col][col].recip();
            for r in col + 1..4 {
                if !a[r][col].is_zero() {
                    let f = a[r][col].mul(&inv);
                    for j in col..4 {
                        a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                    }
                }
            }
        }
        det
    }

    pub fn max_abs_entry(&self) -> Float {
        let mut best = Float::new(self.prec());
        for i in 0..4 {
            for j in 0..4 {
                let v = self.m[i][j].abs();
                if v > best {
                    best = v;
                }
            }
        }
        best
    }

    /// Largest entry-wise |self - rhs|.
    pub fn max_abs_diff(&self, rhs: &CMat4) -> Float {
        self.sub(rhs).max_abs_entry()
    }
}

/// 4x4 matrix of exact rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct QMat4 {
    pub m: [[Rational; 4]; 4],
}

impl QMat4 {
    pub fn zero() -> Self {
        QMat4 {
            m: std::array::from_fn(|_| std::array::from_fn(|_| Rational::new())),
        }
    }

    pub fn identity() -> Self {
        let mut out = QMat4::zero();
        for i in 0..4 {
            out.m[i][i] = Rational::from(1);
        }
        out
    }

    pub fn from_i64(rows: [[i64; 4]; 4]) -> Self {
        QMat4 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| Rational::from(rows[i][j]))),
        }
    }

    pub fn mul(&self, rhs: &QMat4) -> Self {
        let mut out = QMat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Rational::new();
                for k in 0..4 {
                    acc += Rational::from(&self.m[i][k] * &rhs.m[k][j]);
                }
                out.m[i][j] = acc;
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == QMat4::identity()
    }

    pub fn sub(&self, rhs: &QMat4) -> Self {
        QMat4 {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| Rational::from(&self.m[i][j] - &rhs.m[i][j]))
            }),
        }
    }

    pub fn add_identity_scaled(&self, s: i64) -> Self {
        let mut out = self.clone();
        for i in 0..4 {
            out.m[i][i] += Rational::from(s);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().flatten().all(|x| *x == 0)
    }

    pub fn trace(&self) -> Rational {
        let mut t = Rational::new();
        for i in 0..4 {
            t += &self.m[i][i];
        }
        t
    }

    /// Exact kernel basis via row reduction, parametrized by free variables in
    /// ascending coordinate order: the basis vector for free column f has
    /// entry +1 at f (before integer scaling) and zeros at the other free
    /// columns. Vectors are returned as primitive integer vectors with the
    /// free coordinate positive.
    pub fn kernel_basis(&self) -> Vec<[Integer; 4]> {
        let mut a: Vec<[Rational; 4]> = self.m.to_vec();
        let mut pivot_cols: Vec<usize> = Vec::new();
        let mut row = 0;
        for col in 0..4 {
            let piv = (row..4).find(|&r| a[r][col] != 0);
            let Some(piv) = piv else { continue };
            a.swap(row, piv);
            let inv = a[row][col].clone().recip();
            for j in 0..4 {
                a[row][j] *= &inv;
            }
            for r in 0..4 {
                if r != row && a[r][col] != 0 {
                    let f = a[r][col].clone();
                    for j in 0..4 {
                        let sub = Rational::from(&f * &a[row][j]);
                        a[r][j] -= sub;
                    }
                }
            }
            pivot_cols.push(col);
            row += 1;
            if row == 4 {
                break;
            }
        }
        let free_cols: Vec<usize> = (0..4).filter(|c| !pivot_cols.contains(c)).collect();
        let mut basis = Vec::new();
        for &f in &free_cols {
            let mut v: [Rational; 4] = std::array::from_fn(|_| Rational::new());
            v[f] = Rational::from(1);
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = Rational::from(-&a[r][f]);
            }
            basis.push(primitive_integer(&v, f));
        }
        basis
    }
}

/// Scale a rational vector to a primitive integer vector with positive entry
/// at the distinguished coordinate.
fn primitive_integer(v: &[Rational; 4], positive_at: usize) -> [Integer; 4] {
    let mut lcm = Integer::from(1);
    for x in v.iter() {
        lcm = lcm.lcm(x.denom());
    }
    let mut ints: [Integer; 4] =
        std::array::from_fn(|i| Integer::from(v[i].numer() * &lcm) / v[i].denom());
    let mut gcd = Integer::new();
    for x in ints.iter() {
        gcd = gcd.gcd(x);
    }
    if gcd != 0 {
        for x in ints.iter_mut() {
            *x /= &gcd;
        }
    }
    if ints[positive_at] < 0 {
        for x in ints.iter_mut() {
            *x = Integer::from(-&*x);
        }
    }
    ints
}

/// Integer 4x4 determinant by cofactor expansion (columns given as vectors).
pub fn det4_int(cols: &[[Integer; 4]; 4]) -> Integer {
    let a = |i: usize, j: usize| &cols[j][i]; // entry (row i, col j)
    let det3 = |r: [usize; 3], c: [usize; 3]| -> Integer {
        let m = |i: usize, j: usize| a(r[i], c[j]);
        let mut d = Integer::from(m(0, 0) * &Integer::from(m(1, 1) * m(2, 2)));
        d -= Integer::from(m(0, 0) * &Integer::from(m(1, 2) * m(2, 1)));
        d -= Integer::from(m(0, 1) * &Integer::from(m(1, 0) * m(2, 2)));
        d += Integer::from(m(0, 1) * &Integer::from(m(1, 2) * m(2, 0)));
        d += Integer::from(m(0, 2) * &Integer::from(m(1, 0) * m(2, 1)));
        d -= Integer::from(m(0, 2) * &Integer::from(m(1, 1) * m(2, 0)));
        d
    };
    let mut det = Integer::new();
    let rows = [0usize, 1, 2, 3];
    for (k, &r0) in rows.iter().enumerate() {
        let minor_rows: [usize; 3] = {
            let mut it = rows.iter().copied().filter(|&r| r != r0);
            [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
        };
        let term = Integer::from(a(r0, 0) * &det3(minor_rows, [1, 2, 3]));
        if k % 2 == 0 {
            det += term;
        } else {
            det -= term;
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Complex;

    #[test]
    fn inverse_roundtrip() {
        let bits = 192;
        let mut a = CMat4::identity(bits);
        a.m[0][1] = Complex::from_f64_pair(bits, 2.0, 1.0);
        a.m[1][3] = Complex::from_f64_pair(bits, -0.5, 3.0);
        a.m[2][0] = Complex::from_f64_pair(bits, 1.5, 0.0);
        a.m[3][2] = Complex::from_f64_pair(bits, 0.0, -2.0);
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv);
        let diff = prod.max_abs_diff(&CMat4::identity(bits));
        assert!(diff.to_f64() < 1e-45, "diff = {}", diff.to_f64());
    }

    #[test]
    fn det_of_diagonal() {
        let bits = 128;
        let mut a = CMat4::identity(bits);
        a.m[1][1] = Complex::from_f64_pair(bits, 3.0, 0.0);
        a.m[2][2] = Complex::from_f64_pair(bits, 0.0, 1.0);
        let d = a.det();
        assert!((d.re.to_f64()).abs() < 1e-30);
        assert!((d.im.to_f64() - 3.0).abs() < 1e-30);
    }

    #[test]
    fn kernel_of_diag() {
        // F = diag(1,1,-1,-1): ker(F - I) = {e0, e1}
        let f = QMat4::from_i64([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]]);
        let shifted = f.add_identity_scaled(-1);
        let basis = shifted.kernel_basis();
        assert_eq!(basis.len(), 2);
        assert_eq!(basis[0], std::array::from_fn(|i| Integer::from((i == 0) as i64)));
        assert_eq!(basis[1], std::array::from_fn(|i| Integer::from((i == 1) as i64)));
    }

    #[test]
    fn kernel_with_relation() {
        // rows of (F - I) for the paper-style involution at k=1
        let f = QMat4::from_i64([[1, 1, -3, 6], [0, -1, 6, -12], [0, 0, -1, 0], [0, 0, -1, 1]]);
        let plus = f.add_identity_scaled(-1).kernel_basis();
        assert_eq!(plus.len(), 2);
        assert_eq!(plus[0].clone().map(|x| x.to_i64().unwrap()), [1, 0, 0, 0]);
        assert_eq!(plus[1].clone().map(|x| x.to_i64().unwrap()), [0, -6, 0, 1]);
        let minus = f.add_identity_scaled(1).kernel_basis();
        assert_eq!(minus.len(), 2);
        assert_eq!(minus[0].clone().map(|x| x.to_i64().unwrap()), [-1, 2, 0, 0]);
        assert_eq!(minus[1].clone().map(|x| x.to_i64().unwrap()), [0, 0, 2, 1]);
    }

    #[test]
    fn det4_int_permanent_check() {
        let cols: [[Integer; 4]; 4] = [
            [1, 0, 0, 0].map(Integer::from),
            [0, 2, 0, 0].map(Integer::from),
            [0, 0, 3, 0].map(Integer::from),
            [0, 0, 0, 4].map(Integer::from),
        ];
        assert_eq!(det4_int(&cols), 24);
    }
}
