//! Exact rational rotation vectors and the lattice geometry of their orbits.
//!
//! Rotation vectors are pairs `(p/q, r/q)` over big integers with a shared
//! denominator. All rotation arithmetic (differences, perturbations, orbit
//! lattices, covering radii) is exact; floating point appears only when a
//! value is handed to map evaluation.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RotationError {
    #[error("horizontal speed p/q is zero; the auxiliary flow has no first return")]
    ZeroHorizontalSpeed,
    #[error("denominator must be positive")]
    BadDenominator,
}

/// Rational rotation vector `α = (p/q, r/q)` with `gcd(p, r, q) = 1`,
/// canonicalized to `p, r ∈ [0, q)`.
///
/// Serializes as decimal strings so denominators of any size survive JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationVector {
    pub p: BigInt,
    pub r: BigInt,
    pub q: BigInt,
}

impl Serialize for RotationVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RotationVector", 3)?;
        st.serialize_field("p", &self.p.to_string())?;
        st.serialize_field("r", &self.r.to_string())?;
        st.serialize_field("q", &self.q.to_string())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for RotationVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p: String,
            r: String,
            q: String,
        }
        let raw = Raw::deserialize(d)?;
        let parse = |s: &str| s.parse::<BigInt>().map_err(serde::de::Error::custom);
        RotationVector::new(parse(&raw.p)?, parse(&raw.r)?, parse(&raw.q)?)
            .map_err(serde::de::Error::custom)
    }
}

impl RotationVector {
    pub fn new(p: impl Into<BigInt>, r: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self, RotationError> {
        let (mut p, mut r, q): (BigInt, BigInt, BigInt) = (p.into(), r.into(), q.into());
        if q <= BigInt::zero() {
            return Err(RotationError::BadDenominator);
        }
        p = p.mod_floor(&q);
        r = r.mod_floor(&q);
        let g = p.gcd(&r).gcd(&q);
        Ok(Self { p: &p / &g, r: &r / &g, q: &q / &g })
    }

    pub fn from_u64(p: u64, r: u64, q: u64) -> Self {
        Self::new(BigInt::from(p), BigInt::from(r), BigInt::from(q)).expect("positive denominator")
    }

    pub fn x(&self) -> BigRational {
        BigRational::new(self.p.clone(), self.q.clone())
    }

    pub fn y(&self) -> BigRational {
        BigRational::new(self.r.clone(), self.q.clone())
    }

    pub fn as_f64(&self) -> (f64, f64) {
        (self.x().to_f64().unwrap(), self.y().to_f64().unwrap())
    }

    /// `k·α mod 1`, exactly, then rounded once to f64 per coordinate.
    pub fn multiple_mod1(&self, k: &BigInt) -> (f64, f64) {
        let px = (k * &self.p).mod_floor(&self.q);
        let py = (k * &self.r).mod_floor(&self.q);
        (
            BigRational::new(px, self.q.clone()).to_f64().unwrap(),
            BigRational::new(py, self.q.clone()).to_f64().unwrap(),
        )
    }

    /// `α + (1/(k·q·2^(n+1)))·(1,1)` in lowest common form.
    pub fn perturbed(&self, k: u64, n: u32) -> Self {
        let d: BigInt = &self.q * BigInt::from(k) * (BigInt::one() << (n + 1));
        // α + (1,1)/d over the common denominator d (q divides d).
        let scale = &d / &self.q;
        Self::new(&self.p * &scale + 1, &self.r * &scale + 1, d).expect("positive denominator")
    }

    /// Exact coordinate differences `|α.x − β.x|, |α.y − β.y|`.
    pub fn abs_diff(&self, other: &Self) -> (BigRational, BigRational) {
        ((self.x() - other.x()).abs(), (self.y() - other.y()).abs())
    }
}

/// Period of the first-return rotation of the auxiliary linear flow on a
/// vertical circle.
///
/// The first return of the flow `(x, y) + t(p/q, r/q + p·b)` to `{x} × T¹` is
/// the time `q/p` map, a vertical rotation by `r/p + q·b ≡ r/p (mod 1)`. Its
/// period is `p / gcd(r mod p, p)`, independent of the integer `b`.
pub fn return_period(alpha: &RotationVector) -> Result<u64, RotationError> {
    if alpha.p.is_zero() {
        return Err(RotationError::ZeroHorizontalSpeed);
    }
    let rp = alpha.r.mod_floor(&alpha.p);
    let g = rp.gcd(&alpha.p);
    Ok((&alpha.p / g).to_u64().expect("period fits in u64"))
}

/// Reference oracle: simulates the first-return rotation with exact rational
/// arithmetic until the starting point recurs, for a given shear integer `b`.
pub fn return_period_oracle(alpha: &RotationVector, b: i64) -> Result<u64, RotationError> {
    if alpha.p.is_zero() {
        return Err(RotationError::ZeroHorizontalSpeed);
    }
    // Vertical displacement of the time-(q/p) map: r/p + q·b, reduced mod 1.
    let step = BigRational::new(alpha.r.clone(), alpha.p.clone())
        + BigRational::from_integer(alpha.q.clone()) * BigRational::from_integer(BigInt::from(b));
    let cap = alpha.p.to_u64().expect("p fits in u64");
    let mut y = BigRational::zero();
    for k in 1..=cap {
        y += &step;
        y -= y.floor();
        if y.is_zero() {
            return Ok(k);
        }
    }
    unreachable!("the first-return rotation has period dividing p");
}

/// Integer lattice spanned by `(p, r)`, `(q, 0)`, `(0, q)`: the orbit of the
/// rotation, scaled by `q`.
fn orbit_lattice_basis(alpha: &RotationVector) -> ((BigInt, BigInt), (BigInt, BigInt)) {
    let (p, r, q) = (&alpha.p, &alpha.r, &alpha.q);
    let g = p.gcd(q);
    // v1 = (g, k0·r mod q) where k0·(p/g) ≡ 1 (mod q/g); v2 = (0, h).
    let (pg, qg) = (p / &g, q / &g);
    let k0 = mod_inverse(&pg, &qg).expect("p/g and q/g are coprime");
    let v1 = (g.clone(), (&k0 * r).mod_floor(q));
    let h = q.gcd(&(&qg * r));
    let v2 = (BigInt::zero(), h);
    (v1, v2)
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    if m.is_one() {
        return Some(BigInt::zero());
    }
    let e = a.extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

fn dot(a: &(BigInt, BigInt), b: &(BigInt, BigInt)) -> BigInt {
    &a.0 * &b.0 + &a.1 * &b.1
}

fn round_div(num: &BigInt, den: &BigInt) -> BigInt {
    // Round-to-nearest integer division, ties toward even via floor((2n+d)/(2d)).
    let two = BigInt::from(2);
    (&two * num + den).div_floor(&(&two * den))
}

/// Covering radius of the orbit `{k·α mod 1}` as a subset of the torus,
/// returned as its exact square.
///
/// The orbit together with `Z²` forms a lattice; the covering radius is the
/// circumradius of the fundamental Delaunay triangle of a Gauss-reduced
/// basis. Everything is computed in exact rational arithmetic.
pub fn covering_radius(alpha: &RotationVector) -> BigRational {
    let (mut b1, mut b2) = orbit_lattice_basis(alpha);
    // Gauss–Lagrange reduction.
    loop {
        if dot(&b1, &b1) > dot(&b2, &b2) {
            std::mem::swap(&mut b1, &mut b2);
        }
        let t = round_div(&dot(&b1, &b2), &dot(&b1, &b1));
        if t.is_zero() {
            break;
        }
        b2 = (&b2.0 - &t * &b1.0, &b2.1 - &t * &b1.1);
    }
    if dot(&b1, &b2).is_negative() {
        b2 = (-b2.0, -b2.1);
    }
    // Circumradius² of the (acute) triangle (0, b1, b2):
    // R² = |u|²|v|²|u−v|² / (4 (u×v)²), scaled by 1/q².
    let u2 = dot(&b1, &b1);
    let v2 = dot(&b2, &b2);
    let w = (&b1.0 - &b2.0, &b1.1 - &b2.1);
    let w2 = dot(&w, &w);
    let cross = &b1.0 * &b2.1 - &b1.1 * &b2.0;
    let num = &u2 * &v2 * &w2;
    let den = BigInt::from(4) * &cross * &cross * &alpha.q * &alpha.q;
    BigRational::new(num, den)
}

/// Covering radius as f64 for reports.
pub fn covering_radius_f64(alpha: &RotationVector) -> f64 {
    covering_radius(alpha).to_f64().unwrap().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes_and_reduces() {
        let a = RotationVector::new(12, 6, 10).unwrap();
        // (12, 6, 10) → mod 10 → (2, 6, 10) → gcd 2 → (1, 3, 5)
        assert_eq!(a, RotationVector::from_u64(1, 3, 5));
    }

    #[test]
    fn return_period_examples() {
        // (2/5, 1/5): return rotation 1/2, period 2.
        assert_eq!(return_period(&RotationVector::from_u64(2, 1, 5)).unwrap(), 2);
        // (1/3, 1/3): r/p = 1 ≡ 0, period 1.
        assert_eq!(return_period(&RotationVector::from_u64(1, 1, 3)).unwrap(), 1);
        // (3/7, 2/7): return rotation 2/3, period 3.
        assert_eq!(return_period(&RotationVector::from_u64(3, 2, 7)).unwrap(), 3);
    }

    #[test]
    fn zero_horizontal_speed_is_an_error() {
        let a = RotationVector::from_u64(0, 1, 4);
        assert!(matches!(return_period(&a), Err(RotationError::ZeroHorizontalSpeed)));
    }

    #[test]
    fn period_matches_oracle_and_ignores_b() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let q = rng.gen_range(2u64..=100);
            let p = rng.gen_range(1u64..q.max(2));
            let r = rng.gen_range(0u64..q);
            let a = RotationVector::new(BigInt::from(p), BigInt::from(r), BigInt::from(q)).unwrap();
            if a.p.is_zero() {
                continue;
            }
            let m = return_period(&a).unwrap();
            for b in [1i64, 13] {
                assert_eq!(m, return_period_oracle(&a, b).unwrap(), "alpha = {p}/{q}, {r}/{q}");
            }
        }
    }

    #[test]
    fn perturbation_shrinks_with_k() {
        let a = RotationVector::from_u64(2, 1, 5);
        let b = a.perturbed(3, 0);
        let (dx, dy) = b.abs_diff(&a);
        let expect = BigRational::new(BigInt::one(), BigInt::from(30));
        assert_eq!(dx, expect);
        assert_eq!(dy, expect);
    }

    #[test]
    fn covering_radius_of_five_point_lattice() {
        // Orbit of (2/5, 1/5): 5 points; reduced basis is orthogonal with
        // |b1|² = |b2|² = 5, so μ = √10/10.
        let a = RotationVector::from_u64(2, 1, 5);
        let mu2 = covering_radius(&a);
        assert_eq!(mu2, BigRational::new(BigInt::from(1), BigInt::from(10)));
    }

    #[test]
    fn covering_radius_matches_brute_force() {
        for (p, r, q) in [(2u64, 1, 5), (3, 2, 7), (1, 4, 9), (5, 3, 16), (7, 2, 31)] {
            let a = RotationVector::from_u64(p, r, q);
            let mu = covering_radius_f64(&a);
            // Brute force: max over a fine grid of distance to nearest orbit
            // point (torus metric).
            let pts: Vec<(f64, f64)> = (0..q)
                .map(|k| a.multiple_mod1(&BigInt::from(k)))
                .collect();
            let g = 64usize;
            let mut worst: f64 = 0.0;
            for i in 0..g {
                for j in 0..g {
                    let z = (i as f64 / g as f64, j as f64 / g as f64);
                    let d = pts
                        .iter()
                        .map(|&(x, y)| {
                            let dx = (z.0 - x) - (z.0 - x).round();
                            let dy = (z.1 - y) - (z.1 - y).round();
                            (dx * dx + dy * dy).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max(d);
                }
            }
            // Grid sees at most the true covering radius and misses it by at
            // most the grid diagonal.
            assert!(worst <= mu + 1e-9, "({p},{r},{q}): brute {worst} vs exact {mu}");
            assert!(worst >= mu - 1.5 / g as f64, "({p},{r},{q}): brute {worst} vs exact {mu}");
        }
    }

    #[test]
    fn multiple_mod1_is_exact() {
        let a = RotationVector::from_u64(2, 1, 5);
        let (x, y) = a.multiple_mod1(&BigInt::from(7));
        // 7·(2,1)/5 = (14/5, 7/5) ≡ (4/5, 2/5)
        assert_eq!(x, 0.8);
        assert_eq!(y, 0.4);
    }
}
