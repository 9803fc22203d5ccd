//! Circular chains of intervals and product rectangles, their lifts to the
//! universal cover, chain maps, and the combinatorial crooked-inside check.
//!
//! All interval geometry is done on lifts with an explicit tolerance
//! [`TAU_CHAIN`] treated as strict-inequality slack: coincidences thinner than
//! the tolerance are regarded as perturbed away.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used for open-interval overlap/containment decisions on lifts.
pub const TAU_CHAIN: f64 = 1e-12;

/// Windows of a chain map trigger the crookedness condition when the lifted
/// index span exceeds this value.
pub const CROOK_SPAN_TRIGGER: i64 = 4;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain is empty")]
    Empty,
    #[error("adjacency invariant fails at element pair ({0}, {1})")]
    NotCircular(usize, usize),
    #[error("chain of {n} elements admits no consistent lift: {reason}")]
    NoLift { n: usize, reason: String },
    #[error("inner element {0} is contained in no outer element")]
    NoContainment(usize),
    #[error("homotopy types differ: inner {inner:?}, outer {outer:?}")]
    HomotopyMismatch { inner: Vec<i64>, outer: Vec<i64> },
    #[error("chain requires at least 4 elements, got {0}")]
    TooSmall(usize),
    #[error("element {index} has diameter {diam} >= 1/4; lift is not defined")]
    TooWide { index: usize, diam: f64 },
}

/// Open interval `(lo, hi)` on the lift, projecting to an arc of `T¹ = R/Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl CircleInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "interval endpoints out of order: ({lo}, {hi})");
        assert!(hi - lo < 1.0, "interval ({lo}, {hi}) is not a proper arc");
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn translated(&self, by: f64) -> Self {
        Self { lo: self.lo + by, hi: self.hi + by }
    }

    /// Overlap length of the two arcs on the circle (max over integer shifts).
    pub fn circle_overlap(&self, other: &Self) -> f64 {
        let mut best: f64 = 0.0;
        let base = (other.lo - self.hi).floor() as i64;
        let top = (other.hi - self.lo).ceil() as i64;
        for n in base..=top {
            let lo = self.lo.max(other.lo - n as f64);
            let hi = self.hi.min(other.hi - n as f64);
            best = best.max(hi - lo);
        }
        best
    }

    /// Overlap length of the two intervals as subsets of the lift (no shifts).
    pub fn lift_overlap(&self, other: &Self) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    /// Containment on the lift, forgiving up to the chain tolerance.
    pub fn lift_contains(&self, inner: &Self) -> bool {
        self.lo <= inner.lo + TAU_CHAIN && inner.hi <= self.hi + TAU_CHAIN
    }
}

/// One chain element: an arc of the circle or a product rectangle of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChainElement {
    Arc(CircleInterval),
    Rect { x: CircleInterval, y: CircleInterval },
}

impl ChainElement {
    fn overlaps(&self, other: &Self) -> bool {
        match (self, other) {
            (ChainElement::Arc(a), ChainElement::Arc(b)) => a.circle_overlap(b) > TAU_CHAIN,
            (ChainElement::Rect { x: ax, y: ay }, ChainElement::Rect { x: bx, y: by }) => {
                ax.circle_overlap(bx) > TAU_CHAIN && ay.circle_overlap(by) > TAU_CHAIN
            }
            _ => false,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ChainElement::Arc(a) => a.len(),
            ChainElement::Rect { x, y } => (x.len().powi(2) + y.len().powi(2)).sqrt(),
        }
    }
}

/// Finite family indexed by `Z/NZ` in which only cyclically adjacent members
/// are allowed to intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularChain {
    pub elements: Vec<ChainElement>,
}

impl CircularChain {
    pub fn from_arcs(arcs: Vec<CircleInterval>) -> Self {
        Self { elements: arcs.into_iter().map(ChainElement::Arc).collect() }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Serializes as `{"n": N, "elements": …, "homotopy": v}` with every float
    /// printed to 17 significant digits.
    pub fn to_json(&self, homotopy: &[i64]) -> String {
        let mut out = String::new();
        out.push_str(&format!("{{\"n\": {}, \"elements\": [", self.len()));
        for (k, e) in self.elements.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            match e {
                ChainElement::Arc(a) => {
                    out.push_str(&format!("[{}, {}]", fmt17(a.lo), fmt17(a.hi)));
                }
                ChainElement::Rect { x, y } => {
                    out.push_str(&format!(
                        "[{}, {}, {}, {}]",
                        fmt17(x.lo),
                        fmt17(x.hi),
                        fmt17(y.lo),
                        fmt17(y.hi)
                    ));
                }
            }
        }
        let v = homotopy.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        out.push_str(&format!("], \"homotopy\": [{v}]}}"));
        out
    }
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// The covering of the circle by `N` arcs `B_i = ((i - 5/4)/N, (i + 1/4)/N)`.
///
/// Arcs have length `3/(2N)`, consecutive arcs overlap in length `1/(2N)`,
/// and non-consecutive arcs are disjoint.
pub fn standard_chain(n: usize) -> Result<CircularChain, ChainError> {
    if n < 4 {
        return Err(ChainError::TooSmall(n));
    }
    let nf = n as f64;
    let arcs = (0..n)
        .map(|i| {
            let i = i as f64;
            CircleInterval::new((i - 1.25) / nf, (i + 0.25) / nf)
        })
        .collect();
    Ok(CircularChain::from_arcs(arcs))
}

/// The standard arc `B_i` of the lifted covering, for any integer index.
pub fn standard_arc(n: usize, i: i64) -> CircleInterval {
    let nf = n as f64;
    CircleInterval::new((i as f64 - 1.25) / nf, (i as f64 + 0.25) / nf)
}

/// Torus chain of product rectangles `strip × B_i` over the standard covering.
pub fn strip_chain(strip: CircleInterval, n: usize) -> Result<CircularChain, ChainError> {
    if n < 4 {
        return Err(ChainError::TooSmall(n));
    }
    let elements = (0..n)
        .map(|i| ChainElement::Rect { x: strip, y: standard_arc(n, i as i64) })
        .collect();
    Ok(CircularChain { elements })
}

/// Checks the adjacency invariant: element `k` meets element `ℓ` iff
/// `k − ℓ ∈ {−1, 0, 1} mod N`. Returns the lexicographically first violating
/// pair on failure.
pub fn is_circular_chain(chain: &CircularChain) -> Result<Result<(), (usize, usize)>, ChainError> {
    let n = chain.len();
    if n == 0 {
        return Err(ChainError::Empty);
    }
    for i in 0..n {
        for j in i..n {
            let adjacent = j == i || j == i + 1 || (i == 0 && j == n - 1);
            let meets = chain.elements[i].overlaps(&chain.elements[j]);
            if meets != adjacent {
                return Ok(Err((i, j)));
            }
        }
    }
    Ok(Ok(()))
}

/// A lift of a circular chain: one bi-infinite periodic family of elements in
/// the cover, represented by one period plus the homotopy translation `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainLift {
    /// Lift of each base element, `k = 0 … N−1`; element `k + N` is element
    /// `k` translated by `v`.
    pub lifted: Vec<ChainElement>,
    /// Homotopy type: integer translation carrying element `k` to `k + N`.
    /// One component for arc chains, two for torus chains.
    pub v: Vec<i64>,
}

impl ChainLift {
    pub fn n(&self) -> usize {
        self.lifted.len()
    }

    /// Lifted y-interval of element `k` for any integer `k` (arc chains use
    /// the single coordinate).
    pub fn arc_at(&self, k: i64) -> CircleInterval {
        let n = self.n() as i64;
        let q = k.div_euclid(n);
        let r = k.rem_euclid(n) as usize;
        let shift = match &self.lifted[r] {
            ChainElement::Arc(_) => self.v[0] as f64 * q as f64,
            ChainElement::Rect { .. } => *self.v.last().unwrap() as f64 * q as f64,
        };
        match &self.lifted[r] {
            ChainElement::Arc(a) => a.translated(shift),
            ChainElement::Rect { y, .. } => y.translated(shift),
        }
    }
}

fn lift_1d(intervals: &[CircleInterval]) -> Result<(Vec<CircleInterval>, i64), ChainError> {
    let n = intervals.len();
    let mut lifted = Vec::with_capacity(n);
    lifted.push(intervals[0]);
    let mut total_shift = 0i64;
    for k in 1..=n {
        let base = intervals[k % n];
        let prev: &CircleInterval = &lifted[k - 1];
        // The unique integer translate overlapping the previous lifted element.
        let center = 0.5 * (prev.lo + prev.hi) - 0.5 * (base.lo + base.hi);
        let mut found = None;
        for cand in [center.round() as i64 - 1, center.round() as i64, center.round() as i64 + 1] {
            let t = base.translated(cand as f64);
            if t.lift_overlap(prev) > TAU_CHAIN {
                if found.is_some() {
                    return Err(ChainError::NoLift {
                        n,
                        reason: format!("element {} overlaps two translates of its successor", k - 1),
                    });
                }
                found = Some((cand, t));
            }
        }
        let (shift, t) = found.ok_or_else(|| ChainError::NoLift {
            n,
            reason: format!("elements {} and {} do not meet", k - 1, k % n),
        })?;
        if k == n {
            total_shift = shift;
        } else {
            lifted.push(t);
        }
    }
    Ok((lifted, total_shift))
}

/// Lifts a valid circular chain to the cover, anchoring element 0 at its
/// stored lift coordinates, and computes the homotopy type.
pub fn lift_chain(chain: &CircularChain) -> Result<ChainLift, ChainError> {
    let n = chain.len();
    if n == 0 {
        return Err(ChainError::Empty);
    }
    for (i, e) in chain.elements.iter().enumerate() {
        let d = match e {
            ChainElement::Arc(a) => a.len(),
            ChainElement::Rect { x, y } => x.len().max(y.len()),
        };
        if d >= 0.25 {
            return Err(ChainError::TooWide { index: i, diam: d });
        }
    }
    let lift = match &chain.elements[0] {
        ChainElement::Arc(_) => {
            let arcs: Vec<CircleInterval> = chain
                .elements
                .iter()
                .map(|e| match e {
                    ChainElement::Arc(a) => *a,
                    _ => unreachable!("mixed chain"),
                })
                .collect();
            let (lifted, v) = lift_1d(&arcs)?;
            ChainLift { lifted: lifted.into_iter().map(ChainElement::Arc).collect(), v: vec![v] }
        }
        ChainElement::Rect { .. } => {
            let (xs, ys): (Vec<_>, Vec<_>) = chain
                .elements
                .iter()
                .map(|e| match e {
                    ChainElement::Rect { x, y } => (*x, *y),
                    _ => unreachable!("mixed chain"),
                })
                .unzip();
            let (lx, vx) = lift_1d(&xs)?;
            let (ly, vy) = lift_1d(&ys)?;
            let lifted = lx
                .into_iter()
                .zip(ly)
                .map(|(x, y)| ChainElement::Rect { x, y })
                .collect();
            ChainLift { lifted, v: vec![vx, vy] }
        }
    };
    // Lift adjacency: element k meets element ℓ iff |k − ℓ| ≤ 1. The walk
    // guarantees consecutive overlaps; re-check separation of k and k+2.
    for k in 0..n as i64 {
        let a = lift.arc_at(k);
        let b = lift.arc_at(k + 2);
        if n > 4 && a.lift_overlap(&b) > TAU_CHAIN {
            return Err(ChainError::NoLift {
                n,
                reason: format!("lifted elements {} and {} intersect", k, k + 2),
            });
        }
    }
    Ok(lift)
}

/// A chain map `ℓ: Z/N'Z → Z/NZ` together with its lift `ℓ̂: Z → Z`
/// satisfying `ℓ̂(i + N') = ℓ̂(i) + N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMap {
    pub n_inner: usize,
    pub n_outer: usize,
    /// ℓ̂ over one inner period.
    pub lift: Vec<i64>,
}

impl ChainMap {
    pub fn lift_at(&self, i: i64) -> i64 {
        let n = self.n_inner as i64;
        let q = i.div_euclid(n);
        let r = i.rem_euclid(n) as usize;
        self.lift[r] + q * self.n_outer as i64
    }

    pub fn class_at(&self, i: i64) -> usize {
        self.lift_at(i).rem_euclid(self.n_outer as i64) as usize
    }
}

/// Builds the chain map from lifted inner intervals into a lifted outer chain.
///
/// `inner[i]` must be contained in some outer lifted element; ties are broken
/// toward the smallest admissible lift index. `inner_wrap` is the value shift
/// of `inner[i + N']` relative to `inner[i]` and must equal the outer homotopy
/// (otherwise no lift of the map exists).
pub fn chain_map_lifted(
    inner: &[CircleInterval],
    inner_wrap: i64,
    outer: &ChainLift,
) -> Result<ChainMap, ChainError> {
    let n_outer = outer.n();
    let v_outer = match &outer.lifted[0] {
        ChainElement::Arc(_) => outer.v[0],
        ChainElement::Rect { .. } => *outer.v.last().unwrap(),
    };
    if v_outer != inner_wrap {
        return Err(ChainError::HomotopyMismatch { inner: vec![inner_wrap], outer: outer.v.clone() });
    }
    if v_outer == 0 {
        return Err(ChainError::NoLift { n: n_outer, reason: "outer chain has trivial homotopy".into() });
    }
    let mut lift = Vec::with_capacity(inner.len());
    for (i, e) in inner.iter().enumerate() {
        // Outer arcs ordered by index with translation v per period: locate by
        // scanning candidates near the predicted index.
        let mid = 0.5 * (e.lo + e.hi);
        let per = v_outer as f64;
        let guess = ((mid - 0.5 * (outer.arc_at(0).lo + outer.arc_at(0).hi)) / per * n_outer as f64)
            .round() as i64;
        let mut best: Option<i64> = None;
        let window = 2 * n_outer as i64;
        for cand in (guess - window)..=(guess + window) {
            if outer.arc_at(cand).lift_contains(e) {
                best = Some(cand);
                break;
            }
        }
        let idx = best.ok_or(ChainError::NoContainment(i))?;
        lift.push(idx);
    }
    Ok(ChainMap { n_inner: inner.len(), n_outer, lift })
}

/// Chain map between two circular chains of arcs; both are lifted internally.
pub fn chain_map(inner: &CircularChain, outer: &CircularChain) -> Result<ChainMap, ChainError> {
    let inner_lift = lift_chain(inner)?;
    let outer_lift = lift_chain(outer)?;
    let arcs: Vec<CircleInterval> = (0..inner_lift.n() as i64).map(|k| inner_lift.arc_at(k)).collect();
    let wrap = match &inner_lift.lifted[0] {
        ChainElement::Arc(_) => inner_lift.v[0],
        ChainElement::Rect { .. } => *inner_lift.v.last().unwrap(),
    };
    chain_map_lifted(&arcs, wrap, &outer_lift)
}

/// Outcome of the crooked-inside decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrookedVerdict {
    pub crooked: bool,
    /// First violating window `(i, j)` in scan order when not crooked.
    pub counterexample: Option<(i64, i64)>,
    /// Sample of confirmed windows `(i, j, u, v)`.
    pub witnesses: Vec<(i64, i64, i64, i64)>,
}

/// Doubled-period view of ℓ̂ with a segment tree for value-window queries.
struct LiftIndex {
    vals: Vec<i64>,
    mins: Vec<i64>,
    maxs: Vec<i64>,
    size: usize,
}

impl LiftIndex {
    fn new(map: &ChainMap) -> Self {
        let n = map.n_inner;
        let vals: Vec<i64> = (0..2 * n as i64).map(|i| map.lift_at(i)).collect();
        let mut size = 1;
        while size < vals.len() {
            size *= 2;
        }
        let mut mins = vec![i64::MAX; 2 * size];
        let mut maxs = vec![i64::MIN; 2 * size];
        for (i, &v) in vals.iter().enumerate() {
            mins[size + i] = v;
            maxs[size + i] = v;
        }
        for i in (1..size).rev() {
            mins[i] = mins[2 * i].min(mins[2 * i + 1]);
            maxs[i] = maxs[2 * i].max(maxs[2 * i + 1]);
        }
        Self { vals, mins, maxs, size }
    }

    /// First position in `[from, to]` whose value lies in `[lo, hi]`.
    fn first_in_window(&self, from: usize, to: usize, lo: i64, hi: i64) -> Option<usize> {
        if from > to || to >= self.vals.len() {
            return None;
        }
        self.descend(1, 0, self.size - 1, from, to, lo, hi)
    }

    fn descend(
        &self,
        node: usize,
        nl: usize,
        nr: usize,
        from: usize,
        to: usize,
        lo: i64,
        hi: i64,
    ) -> Option<usize> {
        if nr < from || nl > to || self.mins[node] > hi || self.maxs[node] < lo {
            return None;
        }
        if node >= self.size {
            return Some(node - self.size);
        }
        let mid = (nl + nr) / 2;
        self.descend(2 * node, nl, mid, from, to, lo, hi)
            .or_else(|| self.descend(2 * node + 1, mid + 1, nr, from, to, lo, hi))
    }
}

/// Decides whether the inner chain is crooked inside the outer chain along
/// the given chain map.
///
/// For every lifted window `i < j < i + N'` whose intermediate values all lie
/// in the integer interval bounded by `ℓ̂(i)` and `ℓ̂(j)` and whose span
/// exceeds [`CROOK_SPAN_TRIGGER`] while staying below the outer size `N`,
/// there must exist `i < u < v < j` with `|ℓ̂(u) − ℓ̂(j)| ≤ 1` and
/// `|ℓ̂(v) − ℓ̂(i)| ≤ 1`. The upper bound is forced by the cyclic form of the
/// condition: an interval of `Z/NZ` bounded by two classes is a proper arc,
/// so no window can span a full outer turn. Scanning prunes a start index as
/// soon as its intermediates escape every possible window hull.
pub fn is_crooked_inside(map: &ChainMap) -> CrookedVerdict {
    let n = map.n_inner;
    let n_outer = map.n_outer as i64;
    let idx = LiftIndex::new(map);

    // Run compression: within a constant-value run, the hardest window start
    // is the run's last position (its witnesses serve every earlier start of
    // the same value) and the hardest window end is a run's first position.
    // Scanning run representatives therefore decides every window.
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (start, end) inclusive
    {
        let mut s = 0usize;
        for k in 1..idx.vals.len() {
            if idx.vals[k] != idx.vals[s] {
                runs.push((s, k - 1));
                s = k;
            }
        }
        runs.push((s, idx.vals.len() - 1));
    }

    let mut witnesses = Vec::new();
    for (ri, &(_, i_end)) in runs.iter().enumerate() {
        if i_end >= n {
            break;
        }
        let i = i_end;
        let li = idx.vals[i];
        let mut inter_min = i64::MAX;
        let mut inter_max = i64::MIN;
        for &(j_start, _) in &runs[ri + 1..] {
            let j = j_start;
            if j >= i + n {
                break;
            }
            let lj = idx.vals[j];
            let no_inter = inter_min == i64::MAX;
            let contained = if lj >= li {
                no_inter || (inter_min >= li && inter_max <= lj)
            } else {
                no_inter || (inter_max <= li && inter_min >= lj)
            };
            if contained && (lj - li).abs() > CROOK_SPAN_TRIGGER && (lj - li).abs() < n_outer {
                match find_witness(&idx, i, j, li, lj) {
                    Some((u, v)) => {
                        if witnesses.len() < 32 {
                            witnesses.push((i as i64, j as i64, u as i64, v as i64));
                        }
                    }
                    None => {
                        return CrookedVerdict {
                            crooked: false,
                            counterexample: Some((i as i64, j as i64)),
                            witnesses,
                        };
                    }
                }
            }
            inter_min = inter_min.min(lj);
            inter_max = inter_max.max(lj);
            if inter_min < li && inter_max > li {
                break;
            }
        }
    }
    CrookedVerdict { crooked: true, counterexample: None, witnesses }
}

fn find_witness(idx: &LiftIndex, i: usize, j: usize, li: i64, lj: i64) -> Option<(usize, usize)> {
    if j - i < 3 {
        return None;
    }
    let u = idx.first_in_window(i + 1, j - 1, lj - 1, lj + 1)?;
    let v = idx.first_in_window(u + 1, j - 1, li - 1, li + 1)?;
    Some((u, v))
}

/// Reference checker: enumerates every window without pruning.
///
/// Exact but quadratic-with-rescans; intended for cross-checking the pruned
/// implementation on small chains.
pub fn is_crooked_inside_brute(map: &ChainMap) -> CrookedVerdict {
    let n = map.n_inner as i64;
    let n_outer = map.n_outer as i64;
    let mut witnesses = Vec::new();
    for i in 0..n {
        for j in (i + 1)..(i + n) {
            let li = map.lift_at(i);
            let lj = map.lift_at(j);
            let (wlo, whi) = (li.min(lj), li.max(lj));
            let contained = ((i + 1)..j).all(|k| {
                let lk = map.lift_at(k);
                lk >= wlo && lk <= whi
            });
            if !contained
                || (lj - li).abs() <= CROOK_SPAN_TRIGGER
                || (lj - li).abs() >= n_outer
            {
                continue;
            }
            let mut ok = None;
            'outer: for u in (i + 1)..j {
                if (map.lift_at(u) - lj).abs() <= 1 {
                    for v in (u + 1)..j {
                        if (map.lift_at(v) - li).abs() <= 1 {
                            ok = Some((u, v));
                            break 'outer;
                        }
                    }
                }
            }
            match ok {
                Some((u, v)) => {
                    if witnesses.len() < 32 {
                        witnesses.push((i, j, u, v));
                    }
                }
                None => {
                    return CrookedVerdict { crooked: false, counterexample: Some((i, j)), witnesses };
                }
            }
        }
    }
    CrookedVerdict { crooked: true, counterexample: None, witnesses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_chain_matches_covering_formula() {
        let c = standard_chain(4).unwrap();
        let ChainElement::Arc(b0) = c.elements[0] else { panic!() };
        let ChainElement::Arc(b1) = c.elements[1] else { panic!() };
        assert!((b0.lo - (-5.0 / 16.0)).abs() < 1e-15);
        assert!((b0.hi - (1.0 / 16.0)).abs() < 1e-15);
        assert!((b1.lo - (-1.0 / 16.0)).abs() < 1e-15);
        assert!((b1.hi - (5.0 / 16.0)).abs() < 1e-15);
        // Consecutive overlap has length 1/(2N) = 1/8.
        assert!((b0.lift_overlap(&b1) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn standard_chain_b0_b2_disjoint() {
        let c = standard_chain(4).unwrap();
        let ChainElement::Arc(b0) = c.elements[0] else { panic!() };
        let ChainElement::Arc(b2) = c.elements[2] else { panic!() };
        assert_eq!(b0.circle_overlap(&b2), 0.0);
    }

    #[test]
    fn standard_chains_are_circular() {
        for n in 4..=1024 {
            let c = standard_chain(n).unwrap();
            assert_eq!(is_circular_chain(&c).unwrap(), Ok(()), "N = {n}");
        }
    }

    #[test]
    fn rejects_tiny_chain() {
        assert!(matches!(standard_chain(3), Err(ChainError::TooSmall(3))));
    }

    #[test]
    fn empty_chain_is_an_error() {
        let c = CircularChain { elements: vec![] };
        assert!(matches!(is_circular_chain(&c), Err(ChainError::Empty)));
    }

    #[test]
    fn disjoint_family_reports_first_pair() {
        let arcs = (0..5)
            .map(|i| CircleInterval::new(i as f64 * 0.2, i as f64 * 0.2 + 0.05))
            .collect();
        let c = CircularChain::from_arcs(arcs);
        assert_eq!(is_circular_chain(&c).unwrap(), Err((0, 1)));
    }

    #[test]
    fn widened_element_reports_violating_pair() {
        let mut c = standard_chain(8).unwrap();
        // Widen element 3 until it reaches into element 5.
        let ChainElement::Arc(a3) = c.elements[3] else { panic!() };
        c.elements[3] = ChainElement::Arc(CircleInterval::new(a3.lo, a3.hi + 2.5 / 8.0));
        assert_eq!(is_circular_chain(&c).unwrap(), Err((3, 5)));
    }

    #[test]
    fn lift_of_standard_chain_wraps_once() {
        for n in [8usize, 16, 64] {
            let lift = lift_chain(&standard_chain(n).unwrap()).unwrap();
            assert_eq!(lift.v, vec![1], "N = {n}");
        }
    }

    #[test]
    fn lift_rejects_wide_elements() {
        let c = standard_chain(4).unwrap(); // arcs of length 3/8 ≥ 1/4
        assert!(matches!(lift_chain(&c), Err(ChainError::TooWide { .. })));
    }

    #[test]
    fn reversed_chain_has_negative_homotopy() {
        let mut arcs: Vec<CircleInterval> = (0..8)
            .map(|i| standard_arc(8, i as i64))
            .collect();
        arcs[1..].reverse();
        let lift = lift_chain(&CircularChain::from_arcs(arcs)).unwrap();
        assert_eq!(lift.v, vec![-1]);
    }

    #[test]
    fn vertical_strip_chain_wraps_vertically() {
        let strip = CircleInterval::new(0.3, 0.35);
        let lift = lift_chain(&strip_chain(strip, 8).unwrap()).unwrap();
        assert_eq!(lift.v, vec![0, 1]);
    }

    #[test]
    fn lift_projects_back_to_base() {
        let c = standard_chain(16).unwrap();
        let lift = lift_chain(&c).unwrap();
        for k in 0..16i64 {
            let a = lift.arc_at(k);
            let ChainElement::Arc(b) = c.elements[k as usize] else { panic!() };
            let d = (a.lo - b.lo) - (a.lo - b.lo).round();
            assert!(d.abs() < 1e-12);
            // And the periodic copy is the translate by v = 1.
            let a2 = lift.arc_at(k + 16);
            assert!((a2.lo - a.lo - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_map_identity() {
        let c = standard_chain(8).unwrap();
        let m = chain_map(&c, &c).unwrap();
        for i in 0..8 {
            assert_eq!(m.class_at(i as i64), i);
        }
    }

    #[test]
    fn chain_map_refinement_is_periodic() {
        let inner = standard_chain(64).unwrap();
        let outer = standard_chain(8).unwrap();
        let m = chain_map(&inner, &outer).unwrap();
        for i in 0..64i64 {
            assert_eq!(m.lift_at(i + 64), m.lift_at(i) + 8);
        }
    }

    #[test]
    fn chain_map_rejects_oversized_inner_element() {
        let mut arcs: Vec<CircleInterval> = (0..64).map(|i| standard_arc(64, i)).collect();
        arcs[10] = CircleInterval::new(arcs[10].lo, arcs[10].lo + 0.5);
        let inner = CircularChain::from_arcs(arcs);
        let outer = standard_chain(8).unwrap();
        assert!(chain_map(&inner, &outer).is_err());
    }

    #[test]
    fn small_spans_are_vacuously_crooked() {
        // Slow monotone map into a 4-chain: every admissible window has span
        // at most 4, so the condition never triggers.
        let lift: Vec<i64> = (0..16).map(|i| 4 * i as i64 / 16).collect();
        let map = ChainMap { n_inner: 16, n_outer: 4, lift };
        assert!(is_crooked_inside(&map).crooked);
        assert!(is_crooked_inside_brute(&map).crooked);
    }

    /// A reported counterexample window must genuinely violate the condition.
    fn assert_genuine_violation(map: &ChainMap, i: i64, j: i64) {
        let li = map.lift_at(i);
        let lj = map.lift_at(j);
        let span = (lj - li).abs();
        assert!(span > CROOK_SPAN_TRIGGER && span < map.n_outer as i64, "span {span}");
        let (wlo, whi) = (li.min(lj), li.max(lj));
        assert!(((i + 1)..j).all(|k| (wlo..=whi).contains(&map.lift_at(k))));
        let mut has = false;
        for u in (i + 1)..j {
            if (map.lift_at(u) - lj).abs() <= 1 {
                for v in (u + 1)..j {
                    if (map.lift_at(v) - li).abs() <= 1 {
                        has = true;
                    }
                }
            }
        }
        assert!(!has, "window ({i}, {j}) actually has witnesses");
    }

    #[test]
    fn monotone_refinement_is_not_crooked() {
        let lift: Vec<i64> = (0..64).map(|i| 8 * i as i64 / 64).collect();
        let map = ChainMap { n_inner: 64, n_outer: 8, lift };
        let verdict = is_crooked_inside(&map);
        assert!(!verdict.crooked);
        let (i, j) = verdict.counterexample.unwrap();
        assert_genuine_violation(&map, i, j);
        let brute = is_crooked_inside_brute(&map);
        assert!(!brute.crooked);
        let (bi, bj) = brute.counterexample.unwrap();
        assert_genuine_violation(&map, bi, bj);
    }

    fn random_walk_map(seed: u64, n_inner: usize, n_outer: usize) -> ChainMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut lift = Vec::with_capacity(n_inner);
        let mut cur = 0i64;
        for i in 0..n_inner {
            lift.push(cur);
            let remaining = (n_inner - i) as i64;
            let target = n_outer as i64;
            let step = rng.gen_range(-2i64..=2);
            cur += step;
            // Steer back toward completing one wrap.
            if cur < target - remaining * 2 {
                cur += 2;
            }
            if cur > target + remaining * 2 {
                cur -= 2;
            }
        }
        ChainMap { n_inner, n_outer, lift }
    }

    #[test]
    fn pruned_checker_agrees_with_brute_force() {
        for seed in 0..200u64 {
            let n_inner = 8 + (seed as usize * 7) % 57; // ≤ 64
            let n_outer = 5 + (seed as usize) % 12;
            let map = random_walk_map(seed, n_inner, n_outer);
            let fast = is_crooked_inside(&map);
            let brute = is_crooked_inside_brute(&map);
            assert_eq!(fast.crooked, brute.crooked, "seed {seed}");
            if let Some((i, j)) = fast.counterexample {
                assert_genuine_violation(&map, i, j);
            }
            if let Some((i, j)) = brute.counterexample {
                assert_genuine_violation(&map, i, j);
            }
        }
    }

    proptest! {
        #[test]
        fn crooked_verdict_invariant_under_rotation(seed in 0u64..500, c in 0usize..20) {
            let map = random_walk_map(seed, 24, 6);
            let n = map.n_inner;
            let c = c % n;
            // Re-index i → i + c; the lift re-anchors but verdicts agree.
            let rotated: Vec<i64> = (0..n).map(|i| map.lift_at((i + c) as i64)).collect();
            let rot = ChainMap { n_inner: n, n_outer: map.n_outer, lift: rotated };
            prop_assert_eq!(is_crooked_inside(&map).crooked, is_crooked_inside(&rot).crooked);
        }

        #[test]
        fn lift_roundtrip_random_standard(n in 7usize..128) {
            let c = standard_chain(n).unwrap();
            let lift = lift_chain(&c).unwrap();
            prop_assert_eq!(lift.v.clone(), vec![1]);
            for k in 0..n as i64 {
                let a = lift.arc_at(k);
                let ChainElement::Arc(b) = c.elements[k as usize] else { panic!() };
                let d = (a.lo - b.lo) - (a.lo - b.lo).round();
                prop_assert!(d.abs() < 1e-12);
            }
        }
    }
}
