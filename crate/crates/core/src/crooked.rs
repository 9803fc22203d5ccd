//! ε-crooked piecewise-linear prototypes and the decision procedure for
//! ε-crookedness.
//!
//! A continuous map `g` on an interval is ε-crooked when every sub-window
//! `(a, b)` contains points `a < c < d < b` with `|g(c) − g(b)| < ε` and
//! `|g(d) − g(a)| < ε`. Crooked maps of large span are intrinsically
//! expensive: the number of monotone pieces obeys `T(k) = 2T(k−1) + T(k−2)`
//! in units of `ε/2`, so it grows like `(1 + √2)^(2·span/ε)`. The builders
//! therefore take hard breakpoint budgets and refuse infeasible requests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default hard cap on zigzag breakpoints.
pub const DEFAULT_BREAKPOINT_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum CrookedError {
    #[error(
        "crooked prototype needs about {required} monotone pieces for span {span} at eps {eps}, \
         above the cap of {cap}; smallest feasible eps for this span is about {min_feasible_eps:.6}"
    )]
    BreakpointBudget { required: u64, cap: u64, span: f64, eps: f64, min_feasible_eps: f64 },
    #[error("invalid zigzag request: {0}")]
    BadRequest(String),
}

/// Continuous piecewise-linear function given by its knot sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMonotone {
    pub knots_t: Vec<f64>,
    pub knots_v: Vec<f64>,
}

impl PiecewiseMonotone {
    pub fn new(knots_t: Vec<f64>, knots_v: Vec<f64>) -> Self {
        assert_eq!(knots_t.len(), knots_v.len());
        assert!(knots_t.len() >= 2, "need at least two knots");
        assert!(
            knots_t.windows(2).all(|w| w[0] < w[1]),
            "knot positions must be strictly increasing"
        );
        Self { knots_t, knots_v }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots_t[0], *self.knots_t.last().unwrap())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots_t.len();
        if t <= self.knots_t[0] {
            return self.knots_v[0];
        }
        if t >= self.knots_t[n - 1] {
            return self.knots_v[n - 1];
        }
        let mut i = self.knots_t.partition_point(|&x| x <= t);
        i = i.clamp(1, n - 1);
        let (t0, t1) = (self.knots_t[i - 1], self.knots_t[i]);
        let (v0, v1) = (self.knots_v[i - 1], self.knots_v[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn total_variation(&self) -> f64 {
        self.knots_v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn max_slope(&self) -> f64 {
        self.knots_t
            .windows(2)
            .zip(self.knots_v.windows(2))
            .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Knots with the monotone direction of each run; collinear interior
    /// knots are dropped so the remaining knots are genuine extrema.
    pub fn extrema(&self) -> PiecewiseMonotone {
        let n = self.knots_t.len();
        let mut t = vec![self.knots_t[0]];
        let mut v = vec![self.knots_v[0]];
        for i in 1..n - 1 {
            let prev = *v.last().unwrap();
            let cur = self.knots_v[i];
            let next = self.knots_v[i + 1];
            if (cur - prev).signum() != (next - cur).signum() || (cur - prev) == 0.0 {
                t.push(self.knots_t[i]);
                v.push(cur);
            }
        }
        t.push(self.knots_t[n - 1]);
        v.push(self.knots_v[n - 1]);
        PiecewiseMonotone::new(t, v)
    }
}

/// Number of monotone leaves the recursive crook produces for `span` at `eps`,
/// saturating. Follows `T(k) = 2T(k−1) + T(k−2)` with `k = ⌊2·span/eps⌋`.
pub fn required_leaves(span: f64, eps: f64) -> u64 {
    if !(span > 0.0) || !(eps > 0.0) {
        return 1;
    }
    let k = (2.0 * span / eps).floor();
    if k >= 180.0 {
        return u64::MAX;
    }
    let k = k as u32;
    let (mut a, mut b) = (1u64, 1u64); // T(0), T(1)
    for _ in 2..=k {
        let next = b.saturating_mul(2).saturating_add(a);
        a = b;
        b = next;
    }
    b
}

/// Largest eps (to 1%) whose crook for `span` stays within `cap` leaves —
/// i.e. the smallest feasible crookedness budget.
pub fn min_feasible_eps(span: f64, cap: u64) -> f64 {
    let mut k = 2u64;
    while required_leaves(span, 2.0 * span / (k as f64 + 0.5)) <= cap {
        k += 1;
        if k > 10_000 {
            break;
        }
    }
    2.0 * span / (k as f64 - 0.5)
}

/// Builds the standard recursive crook from `y0` to `y1` over `[a, b]`.
///
/// Each monotone stretch is replaced by: run to within `eps/2` of `y1`,
/// return to within `eps/2` of `y0`, then proceed to `y1`, recursing until
/// every stretch spans less than `eps`. Time is allotted proportionally to
/// value span, so the slope is constant. The range is exactly
/// `[min(y0,y1), max(y0,y1)]`.
pub fn build_zigzag(
    eps: f64,
    a: f64,
    b: f64,
    y0: f64,
    y1: f64,
    cap: u64,
) -> Result<PiecewiseMonotone, CrookedError> {
    if !(eps > 0.0) {
        return Err(CrookedError::BadRequest(format!("eps must be positive, got {eps}")));
    }
    if !(a < b) {
        return Err(CrookedError::BadRequest(format!("need a < b, got [{a}, {b}]")));
    }
    if y0 == y1 {
        return Err(CrookedError::BadRequest("y0 and y1 must differ".into()));
    }
    let span = (y1 - y0).abs();
    let required = required_leaves(span, eps);
    if required > cap {
        return Err(CrookedError::BreakpointBudget {
            required,
            cap,
            span,
            eps,
            min_feasible_eps: min_feasible_eps(span, cap),
        });
    }

    // Emit the value turning sequence first, then lay out time by span.
    let mut turns: Vec<f64> = vec![y0];
    fn crook(y0: f64, y1: f64, eps: f64, out: &mut Vec<f64>) {
        let span = (y1 - y0).abs();
        if span < eps {
            out.push(y1);
            return;
        }
        let sgn = (y1 - y0).signum();
        let p1 = y1 - sgn * eps / 2.0;
        let p2 = y0 + sgn * eps / 2.0;
        crook(y0, p1, eps, out);
        crook(p1, p2, eps, out);
        crook(p2, y1, eps, out);
    }
    crook(y0, y1, eps, &mut turns);
    // A sub-span hitting eps (exactly or up to rounding) produces a middle
    // leg of zero or sub-ulp length; merge those turns.
    let tol = 1e-12 * span;
    turns.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let tv: f64 = turns.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let mut knots_t = Vec::with_capacity(turns.len());
    let mut acc = 0.0;
    knots_t.push(a);
    for w in turns.windows(2) {
        acc += (w[1] - w[0]).abs();
        knots_t.push(a + (b - a) * acc / tv);
    }
    // Pin the endpoint exactly.
    *knots_t.last_mut().unwrap() = b;
    Ok(PiecewiseMonotone::new(knots_t, turns))
}

/// ε-crookedness certificate for one function on one interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrookedCertificate {
    pub eps: f64,
    pub interval: (f64, f64),
    pub verified: bool,
    /// Worst witness slack over all checked windows (≥ 0 when verified).
    pub margin: f64,
    pub failure_pair: Option<(f64, f64)>,
    pub windows_checked: u64,
}

/// Range min/max table over a value array.
#[derive(Debug, Clone)]
pub struct RangeTable {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    size: usize,
}

impl RangeTable {
    pub fn new(vals: &[f64]) -> Self {
        let mut size = 1;
        while size < vals.len().max(1) {
            size *= 2;
        }
        let mut mins = vec![f64::INFINITY; 2 * size];
        let mut maxs = vec![f64::NEG_INFINITY; 2 * size];
        for (i, &v) in vals.iter().enumerate() {
            mins[size + i] = v;
            maxs[size + i] = v;
        }
        for i in (1..size).rev() {
            mins[i] = mins[2 * i].min(mins[2 * i + 1]);
            maxs[i] = maxs[2 * i].max(maxs[2 * i + 1]);
        }
        Self { mins, maxs, size }
    }

    /// Inclusive range `[from, to]`; empty ranges return an inverted hull.
    pub fn range(&self, from: usize, to: usize) -> (f64, f64) {
        if from > to {
            return (f64::INFINITY, f64::NEG_INFINITY);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut l, mut r) = (from + self.size, to + self.size + 1);
        while l < r {
            if l & 1 == 1 {
                lo = lo.min(self.mins[l]);
                hi = hi.max(self.maxs[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                lo = lo.min(self.mins[r]);
                hi = hi.max(self.maxs[r]);
            }
            l /= 2;
            r /= 2;
        }
        (lo, hi)
    }
}

/// Decides ε-crookedness of a piecewise-linear function on `[a0, b0]`.
///
/// Window endpoints range over the knots restricted to the interval (plus the
/// interval endpoints). Each window `(a, b)` is decided exactly on the linear
/// structure: any valid witness pair `(c, d)` has `c` no earlier than the
/// first entry of `f` into the open ε-ball of `f(b)`, so the window passes
/// iff the values available strictly after that entry come ε-close to
/// `f(a)`. For each window end the start is swept leftward while the entry
/// pointer and the reachable-value hull are maintained incrementally, giving
/// O(B²) total work.
pub fn is_eps_crooked(f: &PiecewiseMonotone, eps: f64, a0: f64, b0: f64) -> CrookedCertificate {
    use rayon::prelude::*;
    let restricted = restrict(f, a0, b0);
    let t = &restricted.knots_t;
    let v = &restricted.knots_v;
    let n = t.len();

    // Per window end: worst slack and first failing start, swept leftward.
    let sweep = |ib: usize| -> (f64, Option<usize>, u64) {
        let b_val = v[ib];
        let (blo, bhi) = (b_val - eps, b_val + eps);
        // Invariants: `e` is the first band-touching segment index ≥ ia (the
        // segment ending at b always touches, so it exists); the hull covers
        // knot values over [k_after ..= ib].
        let mut e = ib - 1;
        let mut k_after = ib + 1;
        let (mut hull_lo, mut hull_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut margin = f64::INFINITY;
        let mut windows = 0u64;
        for ia in (0..ib).rev() {
            let (seg_lo, seg_hi) = (v[ia].min(v[ia + 1]), v[ia].max(v[ia + 1]));
            if seg_lo < bhi && seg_hi > blo {
                e = ia;
            }
            let inside = v[ia] > blo && v[ia] < bhi;
            let ka = if inside { ia + 1 } else { e + 1 };
            while k_after > ka {
                k_after -= 1;
                hull_lo = hull_lo.min(v[k_after]);
                hull_hi = hull_hi.max(v[k_after]);
            }
            // Value at which the band is first reached: the band edge on the
            // approach side, or f(a) itself when already inside.
            let contact = if inside {
                v[ia]
            } else if v[e] <= blo {
                blo
            } else {
                bhi
            };
            let a_val = v[ia];
            let (rlo, rhi) = (hull_lo.min(contact), hull_hi.max(contact));
            let dist = if a_val < rlo {
                rlo - a_val
            } else if a_val > rhi {
                a_val - rhi
            } else {
                0.0
            };
            windows += 1;
            if dist < eps {
                margin = margin.min(eps - dist);
            } else {
                return (margin, Some(ia), windows);
            }
        }
        (margin, None, windows)
    };

    let results: Vec<(usize, f64, Option<usize>, u64)> = (1..n)
        .into_par_iter()
        .map(|ib| {
            let (m, fail, w) = sweep(ib);
            (ib, m, fail, w)
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut windows = 0u64;
    let mut failure: Option<(usize, usize)> = None;
    for (ib, m, fail, w) in results {
        margin = margin.min(m);
        windows += w;
        if let Some(ia) = fail {
            let better = match failure {
                None => true,
                Some((fa, fb)) => (ia, ib) < (fa, fb),
            };
            if better {
                failure = Some((ia, ib));
            }
        }
    }
    if let Some((ia, ib)) = failure {
        return CrookedCertificate {
            eps,
            interval: (a0, b0),
            verified: false,
            margin: 0.0,
            failure_pair: Some((t[ia], t[ib])),
            windows_checked: windows,
        };
    }
    CrookedCertificate {
        eps,
        interval: (a0, b0),
        verified: true,
        margin: if margin.is_finite() { margin } else { eps },
        failure_pair: None,
        windows_checked: windows,
    }
}

fn restrict(f: &PiecewiseMonotone, a0: f64, b0: f64) -> PiecewiseMonotone {
    let (da, db) = f.domain();
    let a0 = a0.max(da);
    let b0 = b0.min(db);
    assert!(a0 < b0, "empty restriction interval");
    let mut t = vec![a0];
    let mut v = vec![f.eval(a0)];
    for i in 0..f.knots_t.len() {
        if f.knots_t[i] > a0 && f.knots_t[i] < b0 {
            t.push(f.knots_t[i]);
            v.push(f.knots_v[i]);
        }
    }
    t.push(b0);
    v.push(f.eval(b0));
    PiecewiseMonotone::new(t, v)
}

/// Dense-grid reference for ε-crookedness: window endpoints enumerate a
/// uniform grid of resolution `(b0−a0)/(8B)`; the inner witness search stays
/// exact on the linear structure.
pub fn is_eps_crooked_grid_oracle(
    f: &PiecewiseMonotone,
    eps: f64,
    a0: f64,
    b0: f64,
) -> CrookedCertificate {
    let restricted = restrict(f, a0, b0);
    let b_knots = restricted.knots_t.len();
    let grid_n = 8 * b_knots;
    let mut pts: Vec<f64> = (0..=grid_n)
        .map(|i| a0 + (b0 - a0) * i as f64 / grid_n as f64)
        .collect();
    pts.extend_from_slice(&restricted.knots_t);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    // Build a refined piecewise-linear function sampled at all points; knots
    // of the original are included so this is the same function.
    let vals: Vec<f64> = pts.iter().map(|&t| restricted.eval(t)).collect();
    let refined = PiecewiseMonotone::new(pts, vals);
    is_eps_crooked(&refined, eps, a0, b0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn leaf_counts_follow_recurrence() {
        // span 2 at eps 1/2: T(8) = 577 monotone pieces.
        assert_eq!(required_leaves(2.0, 0.5), 577);
        assert_eq!(required_leaves(2.0, 1.0), 17);
        // span below eps is a single segment
        assert_eq!(required_leaves(0.3, 0.5), 1);
        // the infeasible regime saturates
        assert_eq!(required_leaves(2.0, 1.0 / 32.0), u64::MAX);
    }

    #[test]
    fn zigzag_below_eps_is_single_segment() {
        let z = build_zigzag(0.5, 0.0, 1.0, 0.0, 0.3, DEFAULT_BREAKPOINT_CAP).unwrap();
        assert_eq!(z.knots_t.len(), 2);
        let cert = is_eps_crooked(&z, 0.5, 0.0, 1.0);
        assert!(cert.verified);
    }

    #[test]
    fn zigzag_first_level_pattern() {
        let z = build_zigzag(0.5, 0.0, 1.0, 0.0, 2.0, DEFAULT_BREAKPOINT_CAP).unwrap();
        // The construction visits 2 − ε/2 = 1.75 and ε/2 = 0.25 once each at
        // the top recursion level, and the range is exactly [0, 2].
        assert!(z.knots_v.iter().any(|&v| (v - 1.75).abs() < 1e-12));
        assert!(z.knots_v.iter().any(|&v| (v - 0.25).abs() < 1e-12));
        let lo = z.knots_v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = z.knots_v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 2.0);
        // The recurrence bounds the leaf count from above; exact grid hits
        // collapse some middle legs.
        let n = z.knots_v.len() as u64 - 1;
        assert!(n <= required_leaves(2.0, 0.5) && n > 100, "got {n} leaves");
    }

    #[test]
    fn zigzag_is_certified_at_build_eps() {
        let z = build_zigzag(0.5, 0.0, 1.0, 0.0, 2.0, DEFAULT_BREAKPOINT_CAP).unwrap();
        let cert = is_eps_crooked(&z, 0.5, 0.0, 1.0);
        assert!(cert.verified, "failure at {:?}", cert.failure_pair);
        assert!(cert.margin > 0.0);
        // The same zigzag tested far below its construction scale fails.
        let tight = is_eps_crooked(&z, 0.05, 0.0, 1.0);
        assert!(!tight.verified);
    }

    #[test]
    fn infeasible_eps_is_refused_loudly() {
        let err = build_zigzag(1.0 / 32.0, 0.0, 1.0, 0.0, 2.0, DEFAULT_BREAKPOINT_CAP).unwrap_err();
        match err {
            CrookedError::BreakpointBudget { required, cap, min_feasible_eps, .. } => {
                assert_eq!(required, u64::MAX);
                assert_eq!(cap, DEFAULT_BREAKPOINT_CAP);
                assert!(min_feasible_eps > 1.0 / 32.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn constant_function_is_always_crooked() {
        let f = PiecewiseMonotone::new(vec![0.0, 1.0], vec![0.7, 0.7]);
        for eps in [1e-6, 0.1, 2.0] {
            assert!(is_eps_crooked(&f, eps, 0.0, 1.0).verified);
        }
    }

    #[test]
    fn monotone_function_fails_below_half_variation() {
        let f = PiecewiseMonotone::new(vec![0.0, 1.0], vec![0.0, 1.0]);
        // Total variation 1: fails for eps ≤ 1/2, passes above.
        assert!(!is_eps_crooked(&f, 0.4, 0.0, 1.0).verified);
        let fail = is_eps_crooked(&f, 0.4, 0.0, 1.0);
        assert_eq!(fail.failure_pair, Some((0.0, 1.0)));
        assert!(is_eps_crooked(&f, 0.6, 0.0, 1.0).verified);
    }

    fn random_pl(seed: u64, max_knots: usize) -> PiecewiseMonotone {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..max_knots.max(4));
        let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        if t.len() < 2 {
            t = vec![0.0, 1.0];
        }
        let v: Vec<f64> = (0..t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        PiecewiseMonotone::new(t, v)
    }

    #[test]
    fn checker_agrees_with_dense_grid_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut disagreements = 0;
        for seed in 0..100u64 {
            let f = random_pl(seed, 200);
            let eps = rng.gen_range(0.05..1.5);
            let (a0, b0) = f.domain();
            let fast = is_eps_crooked(&f, eps, a0, b0);
            let oracle = is_eps_crooked_grid_oracle(&f, eps, a0, b0);
            if fast.verified != oracle.verified {
                disagreements += 1;
                // Disagreements are only tolerable at hairline margins where
                // open-interval strictness is below grid resolution.
                assert!(
                    fast.margin.min(oracle.margin) < 1e-9,
                    "seed {seed}: fast {} oracle {} margins {} {}",
                    fast.verified,
                    oracle.verified,
                    fast.margin,
                    oracle.margin
                );
            }
        }
        assert_eq!(disagreements, 0, "non-hairline disagreements");
    }

    #[test]
    fn zigzag_feasible_example_at_two_fifths_scale() {
        // span 2 at eps 0.4 stays within budget: at most T(10) leaves.
        let z = build_zigzag(0.4, 0.0, 1.0, 0.0, 2.0, DEFAULT_BREAKPOINT_CAP).unwrap();
        let n = z.knots_v.len() as u64 - 1;
        assert!(n <= required_leaves(2.0, 0.4) && n > 500, "got {n} leaves");
        let cert = is_eps_crooked(&z, 0.4, 0.0, 1.0);
        assert!(cert.verified);
        assert!(cert.margin > 0.0);
    }
}
