//! Stage machinery: the auxiliary linear flow, the orbit-constant function
//! `Θ`, the volume-preserving shear it defines, and the lazily evaluated
//! conjugacy stack `H_n = h_n ∘ … ∘ h_1`.
//!
//! Rotation arithmetic is exact; the only floating-point surfaces are map
//! evaluations. The phase `ω_x = x·(r/p + q·b) mod 1/m` is computed with an
//! exact product split so that the large integer part cancels without
//! rounding; without this the displacement slope amplifies the phase noise
//! past the composition tolerances.

use crate::rotation::{return_period, RotationError, RotationVector};
use crate::theta::CircleMap;
use num::bigint::BigInt;
use num::{Integer, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Rotation(#[from] RotationError),
    #[error("shear phase numerator m·(r + q·b·p) = {0:.3e} exceeds the exact-f64 range")]
    PrecisionBudget(f64),
    #[error("theta period {theta_m} does not match the return period {m}")]
    PeriodMismatch { theta_m: u32, m: u64 },
}

/// Point of the torus, coordinates normalized to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: norm(x), y: norm(y) }
    }

    pub fn dist(&self, other: &Self) -> f64 {
        let dx = torus_diff(self.x, other.x);
        let dy = torus_diff(self.y, other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Point of the universal cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftPoint {
    pub x: f64,
    pub y: f64,
}

fn norm(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed distance of two circle coordinates, in `[-1/2, 1/2]`.
pub fn torus_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    let lo = f64::mul_add(a, b, -hi);
    (hi, lo)
}

/// The periodic linear flow `(x, y) + t·α + t·(0, p·b)`.
pub fn flow(alpha: &RotationVector, b: u64, t: f64, z: TorusPoint) -> TorusPoint {
    let (ax, ay) = alpha.as_f64();
    let p = alpha.p.to_f64().unwrap();
    TorusPoint::new(z.x + t * ax, z.y + t * (ay + p * b as f64))
}

/// Direction of a shear application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShearDirection {
    Forward,
    Inverse,
}

/// The shear `h` determined by a base rotation `α`, a speed integer `b` and a
/// circle map `θ` whose displacement period matches the first-return period
/// of the flow.
///
/// `h(z) = φ(−Θ(z)/(p·b), z)`, which expands to
/// `h(x, y) = (x − Θ/(q·b), y − Θ·(1 + r/(p·q·b)))`; the inverse adds the
/// same displacements because `Θ` is constant along flow orbits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Shear {
    pub alpha: RotationVector,
    pub b: u64,
    pub m: u64,
    pub theta: CircleMap,
    w_num_m: f64,
    p_f: f64,
    c_x: f64,
    c_y: f64,
}

impl Shear {
    pub fn new(alpha: RotationVector, b: u64, theta: CircleMap) -> Result<Self, StageError> {
        let m = return_period(&alpha)?;
        if theta.m as u64 != m {
            return Err(StageError::PeriodMismatch { theta_m: theta.m, m });
        }
        let p = alpha.p.to_f64().unwrap();
        let q = alpha.q.to_f64().unwrap();
        let r = alpha.r.to_f64().unwrap();
        // W = r/p + q·b; the phase numerator m·(r + q·b·p) must stay exactly
        // representable for the split product to be exact.
        let w_num_m = m as f64 * (r + q * b as f64 * p);
        if w_num_m.abs() >= 2f64.powi(52) {
            return Err(StageError::PrecisionBudget(w_num_m));
        }
        let c_x = 1.0 / (q * b as f64);
        let c_y = 1.0 + r / (p * q * b as f64);
        Ok(Self { alpha, b, m, theta, w_num_m, p_f: p, c_x, c_y })
    }

    /// `(x·W mod 1/m)·m ∈ [0, 1)` with the integer part cancelled exactly.
    fn omega_frac(&self, x: f64) -> f64 {
        let (hi, lo) = two_prod(x, self.w_num_m);
        let d = self.p_f;
        let mut k = ((hi + lo) / d).floor();
        let mut r = (hi - k * d) + lo;
        if r < 0.0 {
            k -= 1.0;
            r = (hi - k * d) + lo;
        }
        if r >= d {
            k += 1.0;
            r = (hi - k * d) + lo;
        }
        r / d
    }

    /// The orbit-constant function `Θ(x, y) = θ(y − ω_x) − (y − ω_x)`.
    pub fn theta_big(&self, z: TorusPoint) -> f64 {
        let omega = self.omega_frac(z.x) / (self.m as f64);
        let u = z.y - omega;
        self.theta.eval_g(reduce_period(u, self.theta.period()))
    }

    /// `Θ` evaluated through the series path of the polynomial backend.
    pub fn theta_big_series(&self, z: TorusPoint) -> f64 {
        let omega = self.omega_frac(z.x) / (self.m as f64);
        let u = z.y - omega;
        self.theta.eval_g_series(reduce_period(u, self.theta.period()))
    }

    pub fn apply(&self, dir: ShearDirection, z: TorusPoint) -> TorusPoint {
        let th = self.theta_big(z);
        let s = match dir {
            ShearDirection::Forward => -1.0,
            ShearDirection::Inverse => 1.0,
        };
        TorusPoint::new(z.x + s * th * self.c_x, z.y + s * th * self.c_y)
    }

    /// Same map through the series evaluation path.
    pub fn apply_series(&self, dir: ShearDirection, z: TorusPoint) -> TorusPoint {
        let th = self.theta_big_series(z);
        let s = match dir {
            ShearDirection::Forward => -1.0,
            ShearDirection::Inverse => 1.0,
        };
        TorusPoint::new(z.x + s * th * self.c_x, z.y + s * th * self.c_y)
    }

    /// Forward map evaluated literally as the time `−Θ/(p·b)` flow map; must
    /// agree with `apply(Forward, ·)` to rounding.
    pub fn apply_flow_formula(&self, z: TorusPoint) -> TorusPoint {
        let th = self.theta_big(z);
        let p = self.p_f;
        flow(&self.alpha, self.b, -th / (p * self.b as f64), z)
    }

    /// Lift of the shear (no reduction mod 1).
    pub fn apply_lift(&self, dir: ShearDirection, z: LiftPoint) -> LiftPoint {
        let th = self.theta_big(TorusPoint::new(z.x, z.y));
        let s = match dir {
            ShearDirection::Forward => -1.0,
            ShearDirection::Inverse => 1.0,
        };
        LiftPoint { x: z.x + s * th * self.c_x, y: z.y + s * th * self.c_y }
    }

    /// Sup of `|Θ|` from the certified skeleton.
    pub fn sup_theta_big(&self) -> f64 {
        self.theta.sup_g()
    }

    /// Displacement coefficients `(1/(q·b), 1 + r/(p·q·b))`.
    pub fn coefficients(&self) -> (f64, f64) {
        (self.c_x, self.c_y)
    }

    /// Phase slope `W = r/p + q·b`: the rate at which `ω_x` sweeps the circle
    /// as `x` advances.
    pub fn omega_slope(&self) -> f64 {
        self.w_num_m / (self.m as f64 * self.p_f)
    }

    /// `ω_x` itself, in `[0, 1/m)`.
    pub fn omega_at(&self, x: f64) -> f64 {
        self.omega_frac(x) / self.m as f64
    }
}

fn reduce_period(u: f64, period: f64) -> f64 {
    let w = u.rem_euclid(1.0);
    let mut r = w - (w / period).floor() * period;
    if r < 0.0 {
        r += period;
    }
    if r >= period {
        r -= period;
    }
    r
}

/// Ordered shears `h_1 … h_n` composing to `H_n`, evaluated lazily.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConjugacyStack {
    pub shears: Vec<Shear>,
}

impl ConjugacyStack {
    pub fn depth(&self) -> usize {
        self.shears.len()
    }

    /// `H_n = h_n ∘ … ∘ h_1`.
    pub fn apply(&self, mut z: TorusPoint) -> TorusPoint {
        for s in &self.shears {
            z = s.apply(ShearDirection::Forward, z);
        }
        z
    }

    /// `H_n⁻¹ = h_1⁻¹ ∘ … ∘ h_n⁻¹`.
    pub fn apply_inv(&self, mut z: TorusPoint) -> TorusPoint {
        for s in self.shears.iter().rev() {
            z = s.apply(ShearDirection::Inverse, z);
        }
        z
    }

    pub fn apply_lift(&self, mut z: LiftPoint) -> LiftPoint {
        for s in &self.shears {
            z = s.apply_lift(ShearDirection::Forward, z);
        }
        z
    }

    pub fn apply_inv_lift(&self, mut z: LiftPoint) -> LiftPoint {
        for s in self.shears.iter().rev() {
            z = s.apply_lift(ShearDirection::Inverse, z);
        }
        z
    }

    /// `f = H⁻¹ ∘ R_α ∘ H`.
    pub fn f_eval(&self, alpha: &RotationVector, z: TorusPoint) -> TorusPoint {
        let (ax, ay) = alpha.as_f64();
        let u = self.apply(z);
        let rotated = TorusPoint::new(u.x + ax, u.y + ay);
        self.apply_inv(rotated)
    }

    /// `f^k = H⁻¹ ∘ R_{kα} ∘ H` with `k·α` reduced exactly; this is the lazy
    /// composition contract, free of iteration drift.
    pub fn f_pow(&self, alpha: &RotationVector, k: &BigInt, z: TorusPoint) -> TorusPoint {
        let (ax, ay) = alpha.multiple_mod1(k);
        let u = self.apply(z);
        let rotated = TorusPoint::new(u.x + ax, u.y + ay);
        self.apply_inv(rotated)
    }

    /// Lift of `f^k` displaced by the exact lift of `k·α`: the lift rotation
    /// adds `k·α` un-reduced, tracked as floor multiples plus the reduced
    /// fractional part.
    pub fn f_pow_lift(&self, alpha: &RotationVector, k: &BigInt, z: LiftPoint) -> LiftPoint {
        let (fx, fy) = alpha.multiple_mod1(k);
        let kp = (k * &alpha.p).div_floor(&alpha.q).to_f64().unwrap();
        let kr = (k * &alpha.r).div_floor(&alpha.q).to_f64().unwrap();
        let u = self.apply_lift(z);
        let rotated = LiftPoint { x: u.x + fx + kp, y: u.y + fy + kr };
        self.apply_inv_lift(rotated)
    }

    /// `p = π₁ ∘ H`.
    pub fn p_eval(&self, z: TorusPoint) -> f64 {
        self.apply(z).x
    }

    /// Lift of `p`.
    pub fn p_eval_lift(&self, z: LiftPoint) -> f64 {
        self.apply_lift(z).x
    }
}

/// All data of one verified construction stage: the shear parameters that
/// produced it and the resulting chain size, strip width and rotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageParams {
    /// Stage index (1 for the first constructed stage).
    pub index: u32,
    /// Rotation of the previous stage; the shear commutes with it.
    pub alpha_prev: RotationVector,
    /// Rotation selected for this stage.
    pub alpha: RotationVector,
    /// Shear speed integer.
    pub b: u64,
    /// First-return period of the flow of `alpha_prev`.
    pub m: u64,
    /// The crooked circle map driving the shear.
    pub theta: CircleMap,
    /// Chain size of this stage.
    pub n_chain: usize,
    /// Strip half-width of this stage.
    pub eps_strip: f64,
}

impl StageParams {
    pub fn shear(&self) -> Result<Shear, StageError> {
        Shear::new(self.alpha_prev.clone(), self.b, self.theta.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::{build_grid_theta, build_theta, CircleMapBackend};
    use std::sync::OnceLock;

    fn alpha25() -> RotationVector {
        RotationVector::from_u64(2, 1, 5)
    }

    fn small_shear() -> &'static Shear {
        static CELL: OnceLock<Shear> = OnceLock::new();
        CELL.get_or_init(|| {
            let th = build_grid_theta(4, 2, 10_000_000).unwrap();
            Shear::new(alpha25(), 13, th).unwrap()
        })
    }

    fn identity_theta(m: u32) -> CircleMap {
        // Degenerate test stub: θ = Id, zero displacement.
        CircleMap {
            m,
            backend: CircleMapBackend::PiecewiseLinear {
                knots_t: vec![0.0, 1.0 / m as f64],
                knots_v: vec![0.0, 0.0],
                cells: Default::default(),
            },
            skeleton: crate::crooked::PiecewiseMonotone::new(
                vec![0.0, 1.0 / m as f64],
                vec![0.0, 1.0 / m as f64],
            ),
            eps_cert: f64::INFINITY,
            delta_f: 0.0,
            certs: vec![],
        }
    }

    #[test]
    fn flow_time_zero_and_one() {
        let a = alpha25();
        let z = TorusPoint::new(0.3, 0.7);
        let z0 = flow(&a, 7, 0.0, z);
        assert_eq!(z0, z);
        let z1 = flow(&a, 7, 1.0, z);
        let (ax, ay) = a.as_f64();
        assert!(z1.dist(&TorusPoint::new(z.x + ax, z.y + ay)) < 1e-12);
    }

    #[test]
    fn flow_first_return_preserves_x() {
        let a = alpha25();
        let z = TorusPoint::new(0.3, 0.7);
        let q_over_p = 5.0 / 2.0;
        let back = flow(&a, 3, q_over_p, z);
        assert!(torus_diff(back.x, z.x).abs() < 1e-12);
    }

    #[test]
    fn theta_big_on_base_circle_is_displacement() {
        let sh = small_shear();
        for i in 0..50 {
            let y = i as f64 / 50.0;
            let th = sh.theta_big(TorusPoint::new(0.0, y));
            let expect = sh.theta.eval(y) - y;
            assert!(
                (th - expect).abs() < 1e-12,
                "y = {y}: theta_big {th} vs eval {expect}"
            );
        }
    }

    #[test]
    fn theta_big_is_flow_invariant() {
        let sh = small_shear();
        let z = TorusPoint::new(0.37, 0.81);
        let v0 = sh.theta_big(z);
        for t in [0.13, 1.7, 2.5, 11.25] {
            let w = flow(&sh.alpha, sh.b, t, z);
            let v1 = sh.theta_big(w);
            assert!((v1 - v0).abs() < 1e-9, "t = {t}: {v0} vs {v1}");
        }
    }

    #[test]
    fn identity_theta_gives_identity_shear() {
        let sh = Shear::new(alpha25(), 5, identity_theta(2)).unwrap();
        let z = TorusPoint::new(0.21, 0.84);
        assert_eq!(sh.apply(ShearDirection::Forward, z), z);
        assert_eq!(sh.apply(ShearDirection::Inverse, z), z);
    }

    #[test]
    fn shear_inverse_roundtrip() {
        let sh = small_shear();
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let z = TorusPoint::new(i as f64 / 64.0, j as f64 / 64.0);
                let w = sh.apply(ShearDirection::Inverse, sh.apply(ShearDirection::Forward, z));
                worst = worst.max(w.dist(&z));
            }
        }
        assert!(worst < 1e-9, "roundtrip error {worst}");
    }

    #[test]
    fn shear_commutes_with_rotation() {
        let sh = small_shear();
        let (ax, ay) = sh.alpha.as_f64();
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let z = TorusPoint::new(i as f64 / 64.0, j as f64 / 64.0);
                let a = sh.apply(ShearDirection::Forward, TorusPoint::new(z.x + ax, z.y + ay));
                let b = sh.apply(ShearDirection::Forward, z);
                let b = TorusPoint::new(b.x + ax, b.y + ay);
                worst = worst.max(a.dist(&b));
            }
        }
        assert!(worst < 1e-9, "commutator {worst}");
    }

    #[test]
    fn flow_formula_matches_closed_form() {
        let sh = small_shear();
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let z = TorusPoint::new(i as f64 / 64.0, j as f64 / 64.0);
                let a = sh.apply(ShearDirection::Forward, z);
                let b = sh.apply_flow_formula(z);
                worst = worst.max(a.dist(&b));
            }
        }
        assert!(worst < 1e-12, "formula mismatch {worst}");
    }

    #[test]
    fn first_coordinate_displacement_is_bounded() {
        let sh = small_shear();
        let q = 5.0;
        let bound = sh.sup_theta_big() / (q * sh.b as f64) + 1e-12;
        assert!(bound <= 2.0 / (q * sh.b as f64) + 1e-9);
        for i in 0..40 {
            for j in 0..40 {
                let z = TorusPoint::new(i as f64 / 40.0, j as f64 / 40.0);
                let w = sh.apply(ShearDirection::Forward, z);
                assert!(torus_diff(w.x, z.x).abs() <= bound);
            }
        }
    }

    #[test]
    fn empty_stack_is_rotation_and_projection() {
        let stack = ConjugacyStack::default();
        let a = alpha25();
        let z = TorusPoint::new(0.11, 0.93);
        let f = stack.f_eval(&a, z);
        let (ax, ay) = a.as_f64();
        assert!(f.dist(&TorusPoint::new(z.x + ax, z.y + ay)) < 1e-15);
        assert_eq!(stack.p_eval(z), z.x);
    }

    #[test]
    fn semiconjugacy_identity_one_stage() {
        let sh = small_shear().clone();
        let stack = ConjugacyStack { shears: vec![sh] };
        let a = alpha25();
        let (ax, _) = a.as_f64();
        let mut worst: f64 = 0.0;
        for i in 0..48 {
            for j in 0..48 {
                let z = TorusPoint::new(i as f64 / 48.0, j as f64 / 48.0);
                let lhs = stack.p_eval(stack.f_eval(&a, z));
                let rhs = stack.p_eval(z) + ax;
                worst = worst.max(torus_diff(lhs, rhs).abs());
            }
        }
        assert!(worst < 1e-9, "semiconjugacy defect {worst}");
    }

    #[test]
    fn f_pow_matches_iteration_for_small_k() {
        let sh = small_shear().clone();
        let stack = ConjugacyStack { shears: vec![sh] };
        let a = alpha25();
        let z0 = TorusPoint::new(0.41, 0.27);
        let mut z = z0;
        for k in 1..=40u32 {
            z = stack.f_eval(&a, z);
            let direct = stack.f_pow(&a, &BigInt::from(k), z0);
            assert!(z.dist(&direct) < 1e-7, "k = {k}: {}", z.dist(&direct));
        }
    }

    #[test]
    fn f_pow_period_is_identity() {
        let sh = small_shear().clone();
        let stack = ConjugacyStack { shears: vec![sh] };
        let a = alpha25();
        for i in 0..32 {
            let z = TorusPoint::new(i as f64 / 32.0, (i as f64 * 0.61) % 1.0);
            let back = stack.f_pow(&a, &BigInt::from(5), z);
            assert!(back.dist(&z) < 1e-7);
        }
    }

    #[test]
    fn precision_budget_is_enforced() {
        // r = 0 gives return period 1; the phase numerator q·b·p still
        // overflows the exact range and must be refused.
        let a = RotationVector::new(
            BigInt::from(1000003u64),
            BigInt::from(0u32),
            BigInt::from(10000019u64),
        )
        .unwrap();
        assert_eq!(return_period(&a).unwrap(), 1);
        let th = identity_theta(1);
        assert!(matches!(
            Shear::new(a, 1 << 20, th),
            Err(StageError::PrecisionBudget(_))
        ));
    }
}
