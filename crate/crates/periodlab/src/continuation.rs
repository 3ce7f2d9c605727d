//! Analytic continuation of the 4-dimensional solution space by recentered
//! Taylor stepping along singularity-avoiding polylines, with monodromy
//! around singular points.
//!
//! A state is the 4x4 matrix of the four tracked solutions (rows) and their
//! derivatives of order 0..3 (columns). Transport seeds with the canonical
//! basis inside the convergence disc of the MUM point, then chains Taylor
//! steps of length at most half the local distance to the singular locus,
//! tracking the branch of log continuously.

use crate::linalg::CMat4;
use crate::num::{pow10, working_bits, Complex, GUARD_DIGITS};
use crate::pf_core::{
    self, eval_canonical, resize, BranchedPoint, CanonicalBasis, DOperator, Operator, PfError,
    SingularPoint,
};
use crate::recognition::recognize_rational;
use rug::{Float, Rational};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("endpoint within clearance {delta} of a singular point")]
    Clearance { delta: f64 },
    #[error("no clearance-respecting detour found")]
    NoDetour,
    #[error("taylor step of length {step} exceeds half the singular distance {dist}")]
    StepTooLarge { step: f64, dist: f64 },
    #[error("leading coefficient vanished during a step (hidden singularity)")]
    SingularStep,
    #[error("state matrix is singular along the path")]
    SingularState,
    #[error("achieved only about {achieved} digits of {requested} requested")]
    PrecisionShortfall { achieved: u32, requested: u32 },
    #[error(transparent)]
    Pf(#[from] PfError),
}

/// A polyline through the phi-plane, with a clearance guarantee.
#[derive(Clone, Debug)]
pub struct PathPlan {
    pub waypoints: Vec<Complex>,
    pub clearance: f64,
    /// Singularity encircled by this plan, for monodromy loops; it is exempt
    /// from the clearance requirement.
    pub around: Option<(f64, f64)>,
}

impl PathPlan {
    pub fn is_empty(&self) -> bool {
        self.waypoints.len() < 2
    }
}

/// The tracked solution matrix at a branched point.
#[derive(Clone, Debug)]
pub struct StateMatrix {
    pub at: BranchedPoint,
    /// rows = solutions varpi_0..varpi_3, columns = d/dphi orders 0..3
    pub entries: CMat4,
    /// requested decimal digits this state is good for
    pub precision: u32,
}

impl StateMatrix {
    pub fn wronskian(&self) -> Complex {
        self.entries.det()
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from segment [a, b] to point p.
fn segment_dist(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return dist2(a, p);
    }
    let t = ((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2;
    let t = t.clamp(0.0, 1.0);
    dist2((a.0 + t * vx, a.1 + t * vy), p)
}

fn finite_sing_f64(singular: &[SingularPoint]) -> Vec<(f64, f64)> {
    singular.iter().filter_map(|s| s.to_f64_pair()).collect()
}

fn polyline_clearance(points: &[(f64, f64)], sing: &[(f64, f64)], skip: Option<(f64, f64)>) -> f64 {
    let mut best = f64::INFINITY;
    for w in points.windows(2) {
        for s in sing {
            if let Some(sk) = skip {
                if dist2(*s, sk) < 1e-12 {
                    continue;
                }
            }
            best = best.min(segment_dist(w[0], w[1], *s));
        }
    }
    best
}

/// Plan a path from `from` to `to` keeping distance >= delta from every
/// finite singular point: the straight segment when it clears, otherwise a
/// deterministic polyline detour via perpendicular offsets at the midpoint of
/// the worst segment.
pub fn plan_path(
    from: &Complex,
    to: &Complex,
    singular: &[SingularPoint],
    delta: f64,
) -> Result<PathPlan, ContinuationError> {
    let sing = finite_sing_f64(singular);
    let a = from.to_f64_pair();
    let b = to.to_f64_pair();
    for s in &sing {
        if dist2(a, *s) < delta || dist2(b, *s) < delta {
            return Err(ContinuationError::Clearance { delta });
        }
    }
    if dist2(a, b) == 0.0 {
        return Ok(PathPlan {
            waypoints: vec![from.clone()],
            clearance: delta,
            around: None,
        });
    }
    let mut pts: Vec<(f64, f64)> = vec![a, b];
    for _round in 0..16 {
        if polyline_clearance(&pts, &sing, None) >= delta {
            let bits = from.prec();
            let mut waypoints = vec![from.clone()];
            for p in &pts[1..pts.len() - 1] {
                waypoints.push(Complex::from_f64_pair(bits, p.0, p.1));
            }
            waypoints.push(to.clone());
            return Ok(PathPlan {
                waypoints,
                clearance: delta,
                around: None,
            });
        }
        // find the worst segment and insert a perpendicular offset midpoint
        let mut worst = (0usize, f64::INFINITY);
        for (i, w) in pts.windows(2).enumerate() {
            let c = sing
                .iter()
                .map(|s| segment_dist(w[0], w[1], *s))
                .fold(f64::INFINITY, f64::min);
            if c < worst.1 {
                worst = (i, c);
            }
        }
        let (i, _) = worst;
        let (p, q) = (pts[i], pts[i + 1]);
        let mid = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
        let len = dist2(p, q).max(1e-300);
        let u = (-(q.1 - p.1) / len, (q.0 - p.0) / len); // left-hand perpendicular
        let mut inserted = false;
        let mut h = 2.0 * delta;
        while h < 1e6 * delta {
            // candidates on both sides; prefer the better clearance, ties
            // resolved toward the upper half plane
            let c1 = (mid.0 + h * u.0, mid.1 + h * u.1);
            let c2 = (mid.0 - h * u.0, mid.1 - h * u.1);
            let cl1 = polyline_clearance(&[p, c1, q], &sing, None);
            let cl2 = polyline_clearance(&[p, c2, q], &sing, None);
            let pick = if (cl1 - cl2).abs() < 1e-12 {
                if c1.1 >= c2.1 {
                    (c1, cl1)
                } else {
                    (c2, cl2)
                }
            } else if cl1 > cl2 {
                (c1, cl1)
            } else {
                (c2, cl2)
            };
            if pick.1 >= delta {
                pts.insert(i + 1, pick.0);
                inserted = true;
                break;
            }
            h *= 2.0;
        }
        if !inserted {
            return Err(ContinuationError::NoDetour);
        }
    }
    Err(ContinuationError::NoDetour)
}

/// One recentered Taylor step of the D-form operator. The step must satisfy
/// |target - state.at| <= half the distance to the nearest singularity.
pub fn taylor_step(
    dop: &DOperator,
    state: &StateMatrix,
    target: &Complex,
    singular: &[SingularPoint],
) -> Result<StateMatrix, ContinuationError> {
    let sing = finite_sing_f64(singular);
    let at64 = state.at.value.to_f64_pair();
    let dist = sing
        .iter()
        .map(|s| dist2(at64, *s))
        .fold(f64::INFINITY, f64::min);
    let h64 = dist2(at64, target.to_f64_pair());
    if h64 > 0.5 * dist * (1.0 + 1e-9) {
        return Err(ContinuationError::StepTooLarge {
            step: h64,
            dist,
        });
    }
    if h64 == 0.0 {
        return Ok(state.clone());
    }
    let bits = state.entries.prec();
    let phi0 = &state.at.value;
    let target = resize(target, bits);
    let h = target.sub(phi0);

    // shifted coefficients b[j][m] = coeff of h^m in P_j(phi0 + h)
    let shifted: Vec<Vec<Complex>> = dop
        .coeffs
        .iter()
        .map(|poly| {
            let deg = poly.len().saturating_sub(1);
            let mut b = vec![Complex::zero(bits); deg + 1];
            let mut pow = vec![Complex::one(bits)];
            for _ in 1..=deg {
                let last = pow.last().unwrap().mul(phi0);
                pow.push(last);
            }
            for (i, c) in poly.iter().enumerate() {
                if *c == 0 {
                    continue;
                }
                for m in 0..=i {
                    let bin = rug::Integer::from(i as u32).binomial(m as u32);
                    let term = pow[i - m].scale(&Float::with_val(bits, &bin));
                    b[m] = b[m].add(&term.scale(&Float::with_val(bits, c)));
                }
            }
            b
        })
        .collect();
    let lead = shifted[4][0].clone();
    if lead.abs() < pow10(bits, -((bits / 4) as i32)) {
        return Err(ContinuationError::SingularStep);
    }
    let lead_inv = lead.recip();

    // term threshold: stop once trailing terms are negligible for value and
    // third derivative alike
    let tol = pow10(bits, -(state.precision as i32 + GUARD_DIGITS as i32 + 5));
    let habs = h.abs();
    let max_terms = (working_bits(state.precision) as usize) * 2 + 64;

    let mut out = CMat4::new(bits);
    for row in 0..4 {
        // Taylor coefficients around phi0: c_j = y^(j)/j!
        let mut c: Vec<Complex> = Vec::with_capacity(max_terms);
        let mut fact = Float::with_val(bits, 1);
        for j in 0..4 {
            c.push(state.entries.m[row][j].scale(&fact.clone().recip()));
            fact *= (j + 1) as u32;
        }
        // generate until the tail (weighted for the third derivative) is quiet
        let mut hp = Float::with_val(bits, 1);
        let mut scale_max = Float::new(bits);
        let mut quiet = 0usize;
        let mut t = 0usize;
        loop {
            if t >= c.len() {
                // recurrence for c_t at s = t - 4:
                // c_{s+4} = -(sum over (j,m) != (4,0), s >= m of
                //            b_{jm} c_{s-m+j} (s-m+j)!/(s-m)!) / (b_40 (s+4)!/s!)
                let s = t - 4;
                let mut acc = Complex::zero(bits);
                for (j, b) in shifted.iter().enumerate() {
                    for (m, bjm) in b.iter().enumerate() {
                        if (j, m) == (4, 0) || bjm.is_zero() || s < m {
                            continue;
                        }
                        let idx = s + j - m;
                        debug_assert!(idx < c.len());
                        // falling factorial idx!/(idx-j)!
                        let mut fall = Float::with_val(bits, 1);
                        for q in (idx + 1 - j)..=idx {
                            fall *= q as u32;
                        }
                        acc = acc.add(&bjm.mul(&c[idx]).scale(&fall));
                    }
                }
                let mut fall4 = Float::with_val(bits, (s + 4) as u32);
                fall4 *= (s + 3) as u32;
                fall4 *= (s + 2) as u32;
                fall4 *= (s + 1) as u32;
                let new = acc.neg().mul(&lead_inv).scale(&fall4.recip());
                c.push(new);
            }
            let mag = Float::with_val(bits, c[t].abs() * &hp);
            if mag > scale_max {
                scale_max = mag.clone();
            }
            // weight by (t+1)^3 to cover the third-derivative sum
            let weight = Float::with_val(bits, ((t as u32) + 1).pow(3u32));
            let weighted = Float::with_val(bits, &mag * &weight);
            let floor = Float::with_val(bits, &scale_max * &tol);
            if t > 8 && weighted < floor {
                quiet += 1;
                if quiet >= 6 {
                    break;
                }
            } else {
                quiet = 0;
            }
            hp *= &habs;
            t += 1;
            if t > max_terms {
                return Err(ContinuationError::PrecisionShortfall {
                    achieved: 0,
                    requested: state.precision,
                });
            }
        }
        // Horner evaluation of y^(j)(target) = sum_t c_t t!/(t-j)! h^(t-j)
        let nterms = c.len();
        for j in 0..4usize {
            let mut acc = Complex::zero(bits);
            for t in (j..nterms).rev() {
                let mut fall = Float::with_val(bits, 1);
                for q in (t + 1 - j)..=t {
                    fall *= q as u32;
                }
                acc = acc.mul(&h).add(&c[t].scale(&fall));
            }
            out.m[row][j] = acc;
        }
    }
    let log_value = state.at.log_value.add(&target.div(phi0).ln());
    Ok(StateMatrix {
        at: BranchedPoint::new(target, log_value),
        entries: out,
        precision: state.precision,
    })
}

/// Continue an existing state along a polyline, sub-stepping automatically at
/// half the local clearance.
pub fn continue_state(
    dop: &DOperator,
    state: &StateMatrix,
    waypoints: &[Complex],
    singular: &[SingularPoint],
) -> Result<StateMatrix, ContinuationError> {
    let sing = finite_sing_f64(singular);
    let mut cur = state.clone();
    for wp in waypoints {
        loop {
            let at64 = cur.at.value.to_f64_pair();
            let remaining = dist2(at64, wp.to_f64_pair());
            if remaining == 0.0 {
                break;
            }
            let dist = sing
                .iter()
                .map(|s| dist2(at64, *s))
                .fold(f64::INFINITY, f64::min);
            let step = 0.5 * dist;
            let next = if remaining <= step {
                resize(wp, cur.entries.prec())
            } else {
                // advance along the segment toward wp
                let dir = wp.sub(&cur.at.value);
                let scale = Float::with_val(cur.entries.prec(), step / remaining);
                cur.at.value.add(&dir.scale(&scale))
            };
            cur = taylor_step(dop, &cur, &next, singular)?;
        }
    }
    Ok(cur)
}

/// Transport the canonical basis along a path plan; seeds by direct series
/// evaluation at the first waypoint.
pub fn transport(
    op: &Operator,
    basis: &CanonicalBasis,
    path: &PathPlan,
    prec: u32,
) -> Result<StateMatrix, ContinuationError> {
    let singular = pf_core::singular_points(op, 128);
    let start = path
        .waypoints
        .first()
        .ok_or(ContinuationError::NoDetour)?;
    let seed_at = BranchedPoint::principal(start.clone());
    let seed = eval_canonical(basis, &seed_at, prec)?;
    if seed.wronskian().is_zero() {
        return Err(ContinuationError::SingularState);
    }
    if path.waypoints.len() == 1 {
        return Ok(seed);
    }
    let dop = pf_core::theta_to_d(op);
    continue_state(&dop, &seed, &path.waypoints[1..], &singular)
}

/// A counterclockwise loop plan through `base` around `center`, with a
/// clearance check against every other finite singularity.
pub fn circle_plan(
    base: &Complex,
    center: (f64, f64),
    singular: &[SingularPoint],
) -> Result<PathPlan, ContinuationError> {
    let bits = base.prec();
    let base64 = base.to_f64_pair();
    let r = dist2(base64, center);
    let theta0 = (base64.1 - center.1).atan2(base64.0 - center.0);
    let nseg = 16usize;
    let mut clearance = f64::INFINITY;
    for s in finite_sing_f64(singular) {
        if dist2(s, center) < 1e-12 {
            continue;
        }
        let gap = (dist2(s, center) - r).abs();
        if gap < r * 0.25 {
            return Err(ContinuationError::Clearance { delta: r * 0.25 });
        }
        clearance = clearance.min(gap);
    }
    let mut waypoints = Vec::with_capacity(nseg + 1);
    waypoints.push(base.clone());
    for k in 1..=nseg {
        let ang = theta0 + 2.0 * std::f64::consts::PI * k as f64 / nseg as f64;
        if k == nseg {
            waypoints.push(base.clone());
        } else {
            waypoints.push(Complex::from_f64_pair(
                bits,
                center.0 + r * ang.cos(),
                center.1 + r * ang.sin(),
            ));
        }
    }
    Ok(PathPlan {
        waypoints,
        clearance,
        around: Some(center),
    })
}

/// Transport a state counterclockwise around `center` once, starting and
/// ending at `base` (which must lie on the loop), and solve
/// W_loop = M W_base. Entries of M are rationalized when possible.
pub struct Monodromy {
    pub float_entries: CMat4,
    pub rational_entries: Option<crate::linalg::QMat4>,
    pub residual: Float,
}

pub fn monodromy(
    op: &Operator,
    base: &Rational,
    center: &SingularPoint,
    prec: u32,
) -> Result<Monodromy, ContinuationError> {
    let bits = working_bits(prec);
    let singular = pf_core::singular_points(op, 128);
    let center_pair = match center {
        SingularPoint::Infinity => None,
        s => s.to_f64_pair(),
    };
    let base_c = Complex::from_rational(bits, base);
    let base64 = base_c.to_f64_pair();

    // seed the canonical basis at the base point (must lie inside the disc)
    let basis = pf_core::frobenius_adaptive(
        op,
        (base64.0 * base64.0 + base64.1 * base64.1).sqrt(),
        prec,
    )?;
    let seed = eval_canonical(&basis, &BranchedPoint::principal(base_c.clone()), prec)?;
    let dop = pf_core::theta_to_d(op);

    // counterclockwise circle through base around center
    let c = center_pair.unwrap_or((0.0, 0.0));
    let plan = circle_plan(&base_c, c, &singular)?;
    let looped = continue_state(&dop, &seed, &plan.waypoints[1..], &singular)?;
    let base_inv = seed
        .entries
        .inverse()
        .ok_or(ContinuationError::SingularState)?;
    let m = looped.entries.mul(&base_inv);
    let (rational, residual) = rationalize_matrix(&m, prec);
    Ok(Monodromy {
        float_entries: m,
        rational_entries: rational,
        residual,
    })
}

/// Entry-wise rational recognition of a matrix with tolerance 10^(-prec/2)
/// and height cap 10^6. Returns the max residual either way.
pub fn rationalize_matrix(m: &CMat4, prec: u32) -> (Option<crate::linalg::QMat4>, Float) {
    let bits = m.prec();
    let tol = pow10(bits, -((prec / 2) as i32));
    let mut out = crate::linalg::QMat4::zero();
    let mut residual = Float::new(bits);
    let mut ok = true;
    for i in 0..4 {
        for j in 0..4 {
            let z = &m.m[i][j];
            if z.im.clone().abs() > tol {
                ok = false;
                continue;
            }
            match recognize_rational(&z.re, 1_000_000, &tol) {
                Some(r) => {
                    let approx = Complex::from_rational(bits, &r.value());
                    let d = z.sub(&approx).abs();
                    if d > residual {
                        residual = d;
                    }
                    out.m[i][j] = r.value();
                }
                None => ok = false,
            }
        }
    }
    if ok {
        (Some(out), residual)
    } else {
        (None, residual)
    }
}
