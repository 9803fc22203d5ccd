//! Degree-one circle maps `θ` whose displacement `θ − Id` is periodic of
//! period `1/m`, in two certified representations:
//!
//! * a trigonometric polynomial obtained by Fourier projection of a crooked
//!   piecewise-linear prototype, re-certified after smoothing;
//! * a certified piecewise-linear map whose turning values sit on the grid
//!   `Z/N` of a target covering, built for the chain-crookedness checks where
//!   polynomial degrees would be astronomically infeasible.
//!
//! Both satisfy `θ(0) = 0`, `θ(1/(2m)) = 2`, `θ(1/m) = 1/m` with ranges
//! `[0, 2]` and `[1/m, 2]` on the two half-periods (exactly for the
//! piecewise-linear backend, within the recorded smoothing tolerance for the
//! polynomial backend).

use crate::crooked::{
    build_zigzag, is_eps_crooked, CrookedCertificate, CrookedError, PiecewiseMonotone,
};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

/// Default cap on the number of retained frequencies.
pub const DEFAULT_FREQ_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum ThetaError {
    #[error(transparent)]
    Crooked(#[from] CrookedError),
    #[error(
        "Fourier truncation needs more than {cap} frequencies to reach sup error {target:.3e} \
         (best achieved {achieved:.3e} at degree {degree})"
    )]
    FreqBudget { cap: usize, target: f64, achieved: f64, degree: usize },
    #[error("re-certification of the smoothed map failed at eps {eps}: window {pair:?}")]
    CertificationFailed { eps: f64, pair: Option<(f64, f64)> },
    #[error("invalid request: {0}")]
    BadRequest(String),
}

/// Evaluation backend of a circle map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CircleMapBackend {
    /// `θ(x) − x = mean + Σ_k cos[k−1]·cos(2πkmx) + sin[k−1]·sin(2πkmx)`.
    Poly {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
        #[serde(skip)]
        table: OnceLock<EvalTable>,
    },
    /// Displacement knots over one period `[0, 1/m]`; exact evaluation.
    PiecewiseLinear {
        knots_t: Vec<f64>,
        knots_v: Vec<f64>,
        #[serde(skip)]
        cells: OnceLock<CellIndex>,
    },
}

/// Degree-one circle map with a certified crookedness skeleton.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleMap {
    /// Period count: `θ − Id` has period `1/m`.
    pub m: u32,
    pub backend: CircleMapBackend,
    /// Extrema of `θ` over one period `[0, 1/m]` (equal to the knots for the
    /// piecewise-linear backend; located numerically for the polynomial one).
    pub skeleton: PiecewiseMonotone,
    /// Crookedness budget the skeleton is certified at, per half-period.
    pub eps_cert: f64,
    /// Sup distance between the evaluated map and the crooked prototype
    /// (zero for the piecewise-linear backend).
    pub delta_f: f64,
    /// Certificates for the two half-periods.
    pub certs: Vec<CrookedCertificate>,
}

/// Uniform sample table of the displacement over one period, for fast
/// interpolated evaluation of the polynomial backend.
#[derive(Debug, Clone, Default)]
pub struct EvalTable {
    pub vals: Vec<f64>,
}

/// Uniform cell index over the knots of the piecewise-linear backend.
#[derive(Debug, Clone, Default)]
pub struct CellIndex {
    pub start: Vec<u32>,
    pub n_cells: usize,
}

impl CircleMap {
    /// Period length of the displacement.
    pub fn period(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Number of retained frequencies (0 for the piecewise-linear backend).
    pub fn degree(&self) -> usize {
        match &self.backend {
            CircleMapBackend::Poly { cos, .. } => cos.len(),
            CircleMapBackend::PiecewiseLinear { .. } => 0,
        }
    }

    /// Displacement `θ(x) − x` at the reduced argument `u ∈ [0, period)`.
    pub fn eval_g(&self, u: f64) -> f64 {
        match &self.backend {
            CircleMapBackend::Poly { mean, cos, sin, table } => {
                let t = table.get_or_init(|| build_table(*mean, cos, sin));
                let n = t.vals.len();
                let pos = u * self.m as f64 * n as f64;
                // Catmull-Rom on the periodic table.
                let i1 = (pos.floor() as isize).rem_euclid(n as isize) as usize;
                let fr = pos - pos.floor();
                let i0 = (i1 + n - 1) % n;
                let i2 = (i1 + 1) % n;
                let i3 = (i1 + 2) % n;
                let (p0, p1, p2, p3) = (t.vals[i0], t.vals[i1], t.vals[i2], t.vals[i3]);
                let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
                let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
                let c = -0.5 * p0 + 0.5 * p2;
                ((a * fr + b) * fr + c) * fr + p1
            }
            CircleMapBackend::PiecewiseLinear { knots_t, knots_v, cells } => {
                let idx = cells.get_or_init(|| build_cells(knots_t));
                let period = self.period();
                let pos = (u / period * idx.n_cells as f64) as usize;
                let pos = pos.min(idx.n_cells - 1);
                let mut k = idx.start[pos] as usize;
                while k + 2 < knots_t.len() && knots_t[k + 1] <= u {
                    k += 1;
                }
                let (t0, t1) = (knots_t[k], knots_t[k + 1]);
                let (v0, v1) = (knots_v[k], knots_v[k + 1]);
                v0 + (v1 - v0) * (u - t0) / (t1 - t0)
            }
        }
    }

    /// Displacement via direct series summation (polynomial backend) for
    /// precision-sensitive probes; identical to `eval_g` for the
    /// piecewise-linear backend.
    pub fn eval_g_series(&self, u: f64) -> f64 {
        match &self.backend {
            CircleMapBackend::Poly { mean, cos, sin, .. } => {
                let phi = std::f64::consts::TAU * self.m as f64 * u;
                let (s1, c1) = phi.sin_cos();
                let (mut sk, mut ck) = (s1, c1);
                let mut acc = *mean;
                for k in 0..cos.len() {
                    acc += cos[k] * ck + sin[k] * sk;
                    let s_next = sk * c1 + ck * s1;
                    let c_next = ck * c1 - sk * s1;
                    sk = s_next;
                    ck = c_next;
                }
                acc
            }
            CircleMapBackend::PiecewiseLinear { .. } => self.eval_g(u),
        }
    }

    fn reduce(&self, x: f64) -> f64 {
        let period = self.period();
        let u = x.rem_euclid(1.0);
        let mut r = u - (u / period).floor() * period;
        if r < 0.0 {
            r += period;
        }
        if r >= period {
            r -= period;
        }
        r
    }

    /// `θ(x)`; degree one holds exactly because only the reduced argument is
    /// passed to the displacement.
    pub fn eval(&self, x: f64) -> f64 {
        x + self.eval_g(self.reduce(x))
    }

    /// Series-precision evaluation of `θ(x)`.
    pub fn eval_series(&self, x: f64) -> f64 {
        x + self.eval_g_series(self.reduce(x))
    }

    /// Vectorized evaluation; same values as `eval` in any order.
    pub fn eval_band(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Knots of the displacement for the piecewise-linear backend.
    pub fn pl_knots(&self) -> Option<(&[f64], &[f64])> {
        match &self.backend {
            CircleMapBackend::PiecewiseLinear { knots_t, knots_v, .. } => {
                Some((knots_t, knots_v))
            }
            _ => None,
        }
    }

    /// Upper bound on `|G'|` (slope of the displacement).
    pub fn lip_g(&self) -> f64 {
        match &self.backend {
            CircleMapBackend::Poly { cos, sin, .. } => {
                let mut acc = 0.0;
                for k in 0..cos.len() {
                    let w = std::f64::consts::TAU * self.m as f64 * (k + 1) as f64;
                    acc += w * (cos[k].abs() + sin[k].abs());
                }
                acc
            }
            CircleMapBackend::PiecewiseLinear { knots_t, knots_v, .. } => {
                let mut acc: f64 = 0.0;
                for k in 0..knots_t.len() - 1 {
                    acc = acc.max(((knots_v[k + 1] - knots_v[k]) / (knots_t[k + 1] - knots_t[k])).abs());
                }
                acc
            }
        }
    }

    /// Sup of `|G|` over the stored structure.
    pub fn sup_g(&self) -> f64 {
        self.skeleton
            .knots_t
            .iter()
            .zip(&self.skeleton.knots_v)
            .map(|(&t, &v)| (v - t).abs())
            .fold(0.0, f64::max)
    }
}

fn build_cells(knots_t: &[f64]) -> CellIndex {
    let n_cells = (4 * knots_t.len()).next_power_of_two();
    let t0 = knots_t[0];
    let t1 = *knots_t.last().unwrap();
    let w = (t1 - t0) / n_cells as f64;
    let mut start = vec![0u32; n_cells];
    let mut k = 0usize;
    for (c, s) in start.iter_mut().enumerate() {
        let cell_lo = t0 + c as f64 * w;
        while k + 2 < knots_t.len() && knots_t[k + 1] <= cell_lo {
            k += 1;
        }
        *s = k as u32;
    }
    CellIndex { start, n_cells }
}

fn build_table(mean: f64, cos: &[f64], sin: &[f64]) -> EvalTable {
    let d = cos.len();
    let n = ((32 * (d + 1)).next_power_of_two()).clamp(1 << 16, 1 << 22);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[0] = Complex64::new(mean, 0.0);
    for k in 1..=d.min(n / 2 - 1) {
        let c = Complex64::new(cos[k - 1] / 2.0, -sin[k - 1] / 2.0);
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    fft.process(&mut spec);
    EvalTable { vals: spec.into_iter().map(|z| z.re).collect() }
}

/// Exact Fourier coefficients of a periodic piecewise-linear displacement:
/// `c_k = m ∫₀^{1/m} G(t) e^{−2πikmt} dt`, integrated segment by segment.
fn pl_fourier_coeffs(knots_t: &[f64], knots_v: &[f64], m: u32, degree: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let period = 1.0 / m as f64;
    let mut mean = 0.0;
    for k in 0..knots_t.len() - 1 {
        mean += 0.5 * (knots_v[k] + knots_v[k + 1]) * (knots_t[k + 1] - knots_t[k]);
    }
    mean /= period;
    let mut cos = vec![0.0; degree];
    let mut sin = vec![0.0; degree];
    for (kc, (cv, sv)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
        let w = std::f64::consts::TAU * m as f64 * (kc + 1) as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..knots_t.len() - 1 {
            let (t0, t1) = (knots_t[s], knots_t[s + 1]);
            let (v0, v1) = (knots_v[s], knots_v[s + 1]);
            let slope = (v1 - v0) / (t1 - t0);
            // ∫ (v0 + slope (t − t0)) e^{−iwt} dt
            //   = e^{−iwt} (i f(t)/w + slope/w²) evaluated t0 → t1.
            let e0 = Complex64::from_polar(1.0, -w * t0);
            let e1 = Complex64::from_polar(1.0, -w * t1);
            let f0 = Complex64::new(slope / (w * w), v0 / w);
            let f1 = Complex64::new(slope / (w * w), v1 / w);
            acc += e1 * f1 - e0 * f0;
        }
        let ck = acc * (m as f64);
        *cv = 2.0 * ck.re;
        *sv = -2.0 * ck.im;
    }
    (mean, cos, sin)
}

/// Sup distance between the synthesized polynomial and the prototype on a
/// dense grid, with a Lipschitz slack covering the gaps between samples.
fn sup_distance(
    mean: f64,
    cos: &[f64],
    sin: &[f64],
    m: u32,
    proto_t: &[f64],
    proto_v: &[f64],
) -> f64 {
    let table = build_table(mean, cos, sin);
    let n = table.vals.len();
    let period = 1.0 / m as f64;
    let proto = PiecewiseMonotone::new(proto_t.to_vec(), proto_v.to_vec());
    let mut worst: f64 = 0.0;
    for (j, &pv) in table.vals.iter().enumerate() {
        let t = period * j as f64 / n as f64;
        worst = worst.max((pv - proto.eval(t)).abs());
    }
    let lip_proto = proto.max_slope();
    let lip_poly: f64 = cos
        .iter()
        .zip(sin)
        .enumerate()
        .map(|(k, (a, b))| std::f64::consts::TAU * m as f64 * (k + 1) as f64 * (a.abs() + b.abs()))
        .sum();
    worst + 0.5 * (lip_proto + lip_poly.min(1e9)) * period / n as f64
}

/// Locates the extrema of `θ(t) = t + G(t)` over one period from a dense
/// derivative table, refining each sign change by bisection on the sampled
/// values.
fn poly_skeleton(mean: f64, cos: &[f64], sin: &[f64], m: u32) -> PiecewiseMonotone {
    let d = cos.len();
    let n = ((16 * (d + 1)).next_power_of_two()).clamp(1 << 12, 1 << 22);
    // Derivative spectrum: G' has coefficients (k w) rotated by 90°.
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=d.min(n / 2 - 1) {
        let w = std::f64::consts::TAU * m as f64 * k as f64;
        let c = Complex64::new(cos[k - 1] / 2.0, -sin[k - 1] / 2.0);
        // d/dt of c e^{iwt} + conj: multiply by iw.
        spec[k] = c * Complex64::new(0.0, w);
        spec[n - k] = spec[k].conj();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    fft.process(&mut spec);
    let deriv: Vec<f64> = spec.iter().map(|z| 1.0 + z.re).collect();

    let period = 1.0 / m as f64;
    let g_map = CircleMap {
        m,
        backend: CircleMapBackend::Poly {
            mean,
            cos: cos.to_vec(),
            sin: sin.to_vec(),
            table: OnceLock::new(),
        },
        skeleton: PiecewiseMonotone::new(vec![0.0, 1.0], vec![0.0, 0.0]),
        eps_cert: 0.0,
        delta_f: 0.0,
        certs: vec![],
    };
    let theta_at = |t: f64| t + g_map.eval_g_series(t.rem_euclid(period));

    let mut t_out = vec![0.0];
    let mut v_out = vec![theta_at(0.0)];
    for j in 0..n {
        let d0 = deriv[j];
        let d1 = deriv[(j + 1) % n];
        if d0 == 0.0 || d0.signum() == d1.signum() {
            continue;
        }
        // Bisect the sign change of θ' inside the sample cell.
        let (mut lo, mut hi) = (period * j as f64 / n as f64, period * (j + 1) as f64 / n as f64);
        let eval_d = |t: f64| {
            let h = period / (n as f64 * 64.0);
            (theta_at(t + h) - theta_at(t - h)) / (2.0 * h)
        };
        let mut flo = eval_d(lo);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let fm = eval_d(mid);
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let t_ext = 0.5 * (lo + hi);
        if t_ext > *t_out.last().unwrap() + 1e-15 && t_ext < period - 1e-15 {
            t_out.push(t_ext);
            v_out.push(theta_at(t_ext));
        }
    }
    t_out.push(period);
    v_out.push(theta_at(period));
    PiecewiseMonotone::new(t_out, v_out)
}

/// Builds a trigonometric-polynomial circle map certified ε-crooked on both
/// half-periods.
///
/// Pipeline: crooked piecewise-linear prototype from two zigzags, exact
/// Fourier projection with the truncation degree doubled until the sup error
/// is within `eps/10`, then re-certification of the polynomial's own extrema
/// skeleton at the tightened budget `eps − 2·δ_F`. Fails loudly when either
/// budget is exceeded; the breakpoint budget is exponential in `1/eps`, so
/// small budgets are structurally out of reach (see `required_leaves`).
pub fn build_theta(eps: f64, m: u32, bp_cap: u64, freq_cap: usize) -> Result<CircleMap, ThetaError> {
    if m == 0 {
        return Err(ThetaError::BadRequest("m must be positive".into()));
    }
    if !(eps > 0.0) {
        return Err(ThetaError::BadRequest("eps must be positive".into()));
    }
    let period = 1.0 / m as f64;
    let half = 0.5 * period;
    let delta_f = eps / 10.0;
    // The prototype must survive smoothing (±δ_F) and skeleton slack while
    // still certifying at ε − 2δ_F, so build it at 0.55·ε.
    let eps_build = 0.55 * eps;
    let z1 = build_zigzag(eps_build, 0.0, half, 0.0, 2.0, bp_cap)?;
    let z2 = build_zigzag(eps_build, half, period, 2.0, period, bp_cap)?;
    let mut theta_t = z1.knots_t.clone();
    let mut theta_v = z1.knots_v.clone();
    theta_t.extend_from_slice(&z2.knots_t[1..]);
    theta_v.extend_from_slice(&z2.knots_v[1..]);
    let g_v: Vec<f64> = theta_t.iter().zip(&theta_v).map(|(&t, &v)| v - t).collect();

    // Fourier projection with degree doubling.
    let mut degree = 64usize;
    let (mean, cos, sin);
    let mut achieved;
    loop {
        let (m0, c, s) = pl_fourier_coeffs(&theta_t, &g_v, m, degree);
        achieved = sup_distance(m0, &c, &s, m, &theta_t, &g_v);
        if achieved <= delta_f {
            mean = m0;
            cos = c;
            sin = s;
            break;
        }
        if degree >= freq_cap {
            return Err(ThetaError::FreqBudget { cap: freq_cap, target: delta_f, achieved, degree });
        }
        degree = (degree * 2).min(freq_cap);
    }

    let skeleton = poly_skeleton(mean, &cos, &sin, m);
    let eps_check = eps - 2.0 * delta_f;
    let cert1 = is_eps_crooked(&skeleton, eps_check, 0.0, half);
    let cert2 = is_eps_crooked(&skeleton, eps_check, half, period);
    if !cert1.verified {
        return Err(ThetaError::CertificationFailed { eps: eps_check, pair: cert1.failure_pair });
    }
    if !cert2.verified {
        return Err(ThetaError::CertificationFailed { eps: eps_check, pair: cert2.failure_pair });
    }
    Ok(CircleMap {
        m,
        backend: CircleMapBackend::Poly { mean, cos, sin, table: OnceLock::new() },
        skeleton,
        eps_cert: eps,
        delta_f: achieved,
        certs: vec![cert1, cert2],
    })
}

/// Crooked turning sequence between integer levels with doubling-back to
/// within one unit of both window ends at every scale; spans of at most 4
/// units stay monotone.
fn crook_targets(a: i64, b: i64, out: &mut Vec<i64>) {
    if (b - a).abs() <= 4 {
        out.push(b);
        return;
    }
    if b > a {
        crook_targets(a, b - 1, out);
        crook_targets(b - 1, a + 1, out);
        crook_targets(a + 1, b, out);
    } else {
        crook_targets(a, b + 1, out);
        crook_targets(b + 1, a - 1, out);
        crook_targets(a - 1, b, out);
    }
}

/// Leaf count of `crook_targets`, saturating.
pub fn grid_crook_leaves(span: u64) -> u64 {
    if span <= 4 {
        return 1;
    }
    if span > 130 {
        return u64::MAX;
    }
    let (mut a, mut b) = (1u64, 1u64); // C(3), C(4)
    for _ in 5..=span {
        let next = b.saturating_mul(2).saturating_add(a);
        a = b;
        b = next;
    }
    b
}

/// Builds the certified piecewise-linear circle map whose crook pattern is
/// anchored to the grid `Z/n_outer`: every turning value is an exact multiple
/// of `1/n_outer`, which is what makes image chains over the standard
/// covering of size `n_outer` double back within one index for every shift.
pub fn build_grid_theta(n_outer: usize, m: u32, bp_cap: u64) -> Result<CircleMap, ThetaError> {
    if m == 0 || n_outer < 4 {
        return Err(ThetaError::BadRequest(format!(
            "need m ≥ 1 and n_outer ≥ 4, got m = {m}, n_outer = {n_outer}"
        )));
    }
    let n = n_outer as i64;
    let period = 1.0 / m as f64;
    let half = 0.5 * period;
    // Up leg: θ rises from 0 to 2, i.e. grid levels 0 → 2N.
    // Down leg: θ falls from 2 to 1/m, i.e. levels 2N → N/m (pinned exactly
    // to 1/m afterwards when m does not divide N).
    let down_end_level = ((n_outer as f64 / m as f64).round() as i64).clamp(1, 2 * n - 1);
    let up_leaves = grid_crook_leaves(2 * n as u64);
    let down_leaves = grid_crook_leaves((2 * n - down_end_level).unsigned_abs());
    if up_leaves.saturating_add(down_leaves) > bp_cap {
        return Err(ThetaError::Crooked(CrookedError::BreakpointBudget {
            required: up_leaves.saturating_add(down_leaves),
            cap: bp_cap,
            span: 2.0,
            eps: 1.0 / n as f64,
            min_feasible_eps: f64::NAN,
        }));
    }

    let mut up = vec![0i64];
    crook_targets(0, 2 * n, &mut up);
    let mut down = Vec::new();
    crook_targets(2 * n, down_end_level, &mut down);

    let nf = n as f64;
    let mut theta_v: Vec<f64> = up.iter().map(|&i| i as f64 / nf).collect();
    theta_v.extend(down.iter().map(|&i| i as f64 / nf));
    // Pin the period endpoint to exactly 1/m.
    let last = theta_v.len() - 1;
    theta_v[last] = period;

    // Equal slope per leg.
    let up_knots = up.len();
    let mut theta_t = Vec::with_capacity(theta_v.len());
    let up_tv: f64 = theta_v[..up_knots].windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let mut acc = 0.0;
    theta_t.push(0.0);
    for w in theta_v[..up_knots].windows(2) {
        acc += (w[1] - w[0]).abs();
        theta_t.push(half * acc / up_tv);
    }
    theta_t[up_knots - 1] = half;
    let down_tv: f64 =
        theta_v[up_knots - 1..].windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    acc = 0.0;
    for w in theta_v[up_knots - 1..].windows(2) {
        acc += (w[1] - w[0]).abs();
        theta_t.push(half + half * acc / down_tv);
    }
    *theta_t.last_mut().unwrap() = period;
    assert_eq!(theta_t.len(), theta_v.len());

    // Flatten every turning point into a short plateau: covering intervals
    // that straddle an extremum then read the exact grid value instead of
    // overshooting by half their image length, which is what keeps the
    // doubling-back within one covering index for every shift.
    let frac = 1.0 / 6.0;
    let n_knots = theta_t.len();
    let mut tt = Vec::with_capacity(2 * n_knots);
    let mut vv = Vec::with_capacity(2 * n_knots);
    for k in 0..n_knots {
        let v = theta_v[k];
        if k > 0 {
            let wl = frac * (theta_t[k] - theta_t[k - 1]);
            tt.push(theta_t[k] - wl);
            vv.push(v);
        } else {
            tt.push(theta_t[0]);
            vv.push(v);
        }
        if k + 1 < n_knots {
            let wr = frac * (theta_t[k + 1] - theta_t[k]);
            tt.push(theta_t[k] + wr);
            vv.push(v);
        } else {
            tt.push(theta_t[k]);
            vv.push(v);
        }
    }
    // The two endpoint pushes duplicated the boundary knots; clean up any
    // zero-length steps.
    let mut theta_t = Vec::with_capacity(tt.len());
    let mut theta_v = Vec::with_capacity(tt.len());
    for (t, v) in tt.into_iter().zip(vv) {
        if theta_t.last().map_or(true, |&lt: &f64| t > lt) {
            theta_t.push(t);
            theta_v.push(v);
        }
    }

    let g_v: Vec<f64> = theta_t.iter().zip(&theta_v).map(|(&t, &v)| v - t).collect();
    let skeleton = PiecewiseMonotone::new(theta_t.clone(), theta_v.clone());

    // Certify at the coarsest budget the leaf structure admits: monotone
    // leaves span up to 4/N so any certificate needs eps > 2/N; returns land
    // within 1/N of window ends. Try a short ladder and keep the first pass.
    let mut eps_cert = 0.0;
    let mut certs = Vec::new();
    for cand in [3.5 / nf, 4.5 / nf, 6.0 / nf, 2.0] {
        let c1 = is_eps_crooked(&skeleton, cand, 0.0, half);
        let c2 = is_eps_crooked(&skeleton, cand, half, period);
        if c1.verified && c2.verified {
            eps_cert = cand;
            certs = vec![c1, c2];
            break;
        }
    }
    if certs.is_empty() {
        return Err(ThetaError::CertificationFailed { eps: 2.0, pair: None });
    }

    Ok(CircleMap {
        m,
        backend: CircleMapBackend::PiecewiseLinear {
            knots_t: theta_t,
            knots_v: g_v,
            cells: OnceLock::new(),
        },
        skeleton,
        eps_cert,
        delta_f: 0.0,
        certs,
    })
}

/// Exact range of the displacement `G` over `[lo, hi]` for piecewise-linear
/// maps, handling period wrap.
pub struct GRange<'a> {
    knots_t: &'a [f64],
    tree_vals: crate::crooked::RangeTable,
    period: f64,
    values: Vec<f64>,
}

impl<'a> GRange<'a> {
    /// `values[k] = base[k] + c·g[k]` evaluated at the knots: ranges of any
    /// function that is linear over the same knots.
    pub fn new(knots_t: &'a [f64], values: Vec<f64>, period: f64) -> Self {
        let tree_vals = crate::crooked::RangeTable::new(&values);
        Self { knots_t, tree_vals, period, values }
    }

    fn eval_local(&self, u: f64) -> f64 {
        let n = self.knots_t.len();
        let mut i = self.knots_t.partition_point(|&x| x <= u);
        i = i.clamp(1, n - 1);
        let (t0, t1) = (self.knots_t[i - 1], self.knots_t[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (u - t0) / (t1 - t0)
    }

    fn range_local(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut rlo = self.eval_local(lo).min(self.eval_local(hi));
        let mut rhi = self.eval_local(lo).max(self.eval_local(hi));
        let i0 = self.knots_t.partition_point(|&x| x <= lo);
        let i1 = self.knots_t.partition_point(|&x| x < hi);
        if i0 < i1 {
            let (a, b) = self.tree_vals.range(i0, i1 - 1);
            rlo = rlo.min(a);
            rhi = rhi.max(b);
        }
        (rlo, rhi)
    }

    /// Range of the quasi-periodic extension `V(u + k·period) = V(u) + k·shift`.
    pub fn range(&self, lo: f64, hi: f64, shift: f64) -> (f64, f64) {
        assert!(hi >= lo);
        let mut k = (lo / self.period).floor();
        let (mut rlo, mut rhi) = (f64::INFINITY, f64::NEG_INFINITY);
        loop {
            let base = k * self.period;
            let a = lo.max(base);
            let b = hi.min(base + self.period);
            if a < b {
                let (x, y) = self.range_local(a - base, b - base);
                rlo = rlo.min(x + k * shift);
                rhi = rhi.max(y + k * shift);
            }
            k += 1.0;
            if base + self.period >= hi {
                break;
            }
        }
        (rlo, rhi)
    }
}
