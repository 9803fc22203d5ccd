//! Machine checks of the inductive properties of a built run: chain
//! crookedness and nesting, rotation closeness and orbit density, map and
//! projection closeness, the hypotheses of the nested-chain limit theorem,
//! and the deviation diagnostics.
//!
//! Every report records the grids, samples and measured quantities it used,
//! so re-running against persisted data reproduces it bit for bit.

use crate::chain::{
    is_crooked_inside, lift_chain, strip_chain, ChainMap, CircleInterval,
    CrookedVerdict,
};
use crate::rotation::{covering_radius, RotationVector};
use crate::stage::{torus_diff, ConjugacyStack, LiftPoint, Shear, StageParams, TorusPoint};
use crate::theta::{CircleMap, GRange};
use num::bigint::BigInt;
use num::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Outcome of one property check. `pass == true` means every measured
/// quantity satisfied its recorded threshold; `inconclusive` marks checks
/// whose certified margins could not be established at the configured
/// sampling budget (distinct from failure).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyReport {
    pub id: String,
    pub pass: bool,
    pub inconclusive: bool,
    pub measured: BTreeMap<String, f64>,
    pub counterexample: Option<String>,
    pub notes: Vec<String>,
}

impl PropertyReport {
    fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            pass: true,
            inconclusive: false,
            measured: BTreeMap::new(),
            counterexample: None,
            notes: Vec::new(),
        }
    }

    fn put(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    fn require(&mut self, key: &str, value: f64, threshold: f64) {
        self.put(key, value);
        self.put(&format!("{key}.threshold"), threshold);
        if !(value < threshold) {
            self.pass = false;
            if self.counterexample.is_none() {
                self.counterexample = Some(format!("{key} = {value} ≥ {threshold}"));
            }
        }
    }
}

/// Verdict of the image-chain crookedness check for one shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimSample {
    pub omega: f64,
    pub crooked: bool,
    pub counterexample: Option<(i64, i64)>,
}

/// Checks that the image chain `{θ(B − ω) + ω, B ∈ B(n_inner)}` is crooked
/// inside `B(n_outer)` for each shift, building the chain map on the lift
/// with exact piecewise-linear range arithmetic.
///
/// The image family is treated through its containment map only: as circle
/// subsets the image intervals overlap wildly (the map doubles back), but the
/// crookedness condition reads the lifted index pattern, which is what the
/// product chains of the stage construction inherit.
pub fn claim_check(
    theta: &CircleMap,
    n_outer: usize,
    n_inner: usize,
    omegas: &[f64],
) -> Result<Vec<ClaimSample>, String> {
    let (knots_t, _) = theta
        .pl_knots()
        .ok_or_else(|| "claim check requires the piecewise-linear backend".to_string())?;
    let period = theta.period();
    let theta_vals: Vec<f64> = knots_t.iter().map(|&t| theta.eval(t)).collect();
    let grange = GRange::new(knots_t, theta_vals, period);
    let samples: Vec<ClaimSample> = omegas
        .par_iter()
        .map(|&omega| {
            let map = match image_chain_map(&grange, period, omega, n_outer, n_inner) {
                Ok(m) => m,
                Err(_) => {
                    return ClaimSample { omega, crooked: false, counterexample: None };
                }
            };
            let verdict: CrookedVerdict = is_crooked_inside(&map);
            ClaimSample { omega, crooked: verdict.crooked, counterexample: verdict.counterexample }
        })
        .collect();
    Ok(samples)
}

/// Chain map of the image family into the standard covering, or an error
/// naming the first interval that fits in no covering arc. The range table is
/// over θ values, which are quasi-periodic with shift equal to the period
/// (degree one).
fn image_chain_map(
    grange: &GRange,
    period: f64,
    omega: f64,
    n_outer: usize,
    n_inner: usize,
) -> Result<ChainMap, usize> {
    let nf_in = n_inner as f64;
    let lift: Vec<i64> = (0..n_inner)
        .map(|i| {
            let lo = (i as f64 - 1.25) / nf_in - omega;
            let hi = (i as f64 + 0.25) / nf_in - omega;
            let (ylo, yhi) = grange.range(lo, hi, period);
            smallest_covering_index(ylo + omega, yhi + omega, n_outer).ok_or(i)
        })
        .collect::<Result<_, _>>()?;
    Ok(ChainMap { n_inner, n_outer, lift })
}

/// Smallest lifted index `ℓ` with `(ylo, yhi) ⊆ B̂_ℓ = ((ℓ−5/4)/N, (ℓ+1/4)/N)`,
/// with the chain tolerance as strict-inequality slack.
pub fn smallest_covering_index(ylo: f64, yhi: f64, n: usize) -> Option<i64> {
    let nf = n as f64;
    let tau = crate::chain::TAU_CHAIN;
    let lo_idx = (nf * yhi - 0.25 - tau).ceil() as i64;
    let hi_idx = (nf * ylo + 1.25 + tau).floor() as i64;
    if lo_idx <= hi_idx {
        Some(lo_idx)
    } else {
        None
    }
}

/// Exact bounding rectangle of `h⁻¹((x ± eps') × B)` for the first stage,
/// where the geometry is piecewise linear: the vertical image is
/// `ψ(u) + ω` with `ψ(u) = u + c_y·G(u)` over `u ∈ B − ω`, and the
/// horizontal displacement is `c_x·G(u)`.
pub struct ShearImageGeometry<'a> {
    pub shear: &'a Shear,
    psi: GRange<'a>,
    g: GRange<'a>,
    period: f64,
}

impl<'a> ShearImageGeometry<'a> {
    pub fn new(shear: &'a Shear) -> Result<Self, String> {
        let (knots_t, knots_g) = shear
            .theta
            .pl_knots()
            .ok_or_else(|| "image geometry requires the piecewise-linear backend".to_string())?;
        let (_, c_y) = shear.coefficients();
        let psi_vals: Vec<f64> = knots_t.iter().zip(knots_g).map(|(&t, &g)| t + c_y * g).collect();
        let period = shear.theta.period();
        Ok(Self {
            shear,
            psi: GRange::new(knots_t, psi_vals, period),
            g: GRange::new(knots_t, knots_g.to_vec(), period),
            period,
        })
    }

    /// Hull `[x-interval] × [y-interval]` of the image of `(x ± epsp) × B`.
    /// The hull is exact in `u` and conservative in the phase sweep
    /// `ω ∈ [ω(x) ± epsp·W]`; the slack is bounded by `psi` oscillation over
    /// the sweep width and is reported by [`Self::hull_slack`].
    pub fn image_hull(&self, x: f64, epsp: f64, b_arc: CircleInterval) -> (CircleInterval, CircleInterval) {
        let w = self.shear.omega_slope();
        let omega = self.shear.omega_at(x);
        let (om_lo, om_hi) = (omega - epsp * w, omega + epsp * w);
        let (u_lo, u_hi) = (b_arc.lo - om_hi, b_arc.hi - om_lo);
        let (psi_lo, psi_hi) = self.psi.range(u_lo, u_hi, self.period);
        let (g_lo, g_hi) = self.g.range(u_lo, u_hi, 0.0);
        let (c_x, _) = self.shear.coefficients();
        let x_iv = CircleInterval::new(x - epsp + c_x * g_lo, x + epsp + c_x * g_hi);
        let y_iv = CircleInterval::new(psi_lo + om_lo, psi_hi + om_hi);
        (x_iv, y_iv)
    }

    /// Upper bound on the hull conservativeness from the phase sweep.
    pub fn hull_slack(&self, epsp: f64) -> f64 {
        let w = self.shear.omega_slope();
        2.0 * epsp * w * (1.0 + self.shear.theta.lip_g() * self.shear.coefficients().1.abs())
    }
}

/// Verifies the crooked-nesting property for the transition onto `stage`:
/// the stage chain is crooked inside the previous chain, the annulus is
/// strictly nested, and element diameters are below `1/(index + 1)`.
///
/// The check runs in the coordinates of the previous conjugacy, where the
/// previous chain is the literal product chain; for the first stage these are
/// torus coordinates and the hulls are exact.
pub fn verify_p1(
    prev_n: usize,
    prev_eps: f64,
    stage: &StageParams,
    x_samples: usize,
) -> Result<PropertyReport, String> {
    let mut rep = PropertyReport::new("P1");
    let shear = stage.shear().map_err(|e| e.to_string())?;
    let geom = ShearImageGeometry::new(&shear)?;
    let diam_threshold = 1.0 / (stage.index as f64 + 1.0);
    let slack = geom.hull_slack(stage.eps_strip);
    rep.put("hull_slack", slack);

    let per_x: Vec<Result<(f64, f64, Option<String>, bool), String>> = (0..x_samples)
        .into_par_iter()
        .map(|ix| {
            let x = (2.0 * ix as f64 + 1.0) / (2.0 * x_samples as f64);
            let nf_in = stage.n_chain as f64;
            let mut max_diam: f64 = 0.0;
            let mut x_extent = (f64::INFINITY, f64::NEG_INFINITY);
            let mut lift = Vec::with_capacity(stage.n_chain);
            for i in 0..stage.n_chain {
                let b_arc = CircleInterval::new((i as f64 - 1.25) / nf_in, (i as f64 + 0.25) / nf_in);
                let (x_iv, y_iv) = geom.image_hull(x, stage.eps_strip, b_arc);
                max_diam = max_diam.max((x_iv.len().powi(2) + y_iv.len().powi(2)).sqrt());
                x_extent.0 = x_extent.0.min(x_iv.lo);
                x_extent.1 = x_extent.1.max(x_iv.hi);
                // Containment into the outer product chain: x-hull inside the
                // strip, y-hull inside a covering arc.
                if x_iv.lo < x - prev_eps - crate::chain::TAU_CHAIN
                    || x_iv.hi > x + prev_eps + crate::chain::TAU_CHAIN
                {
                    return Ok((
                        max_diam,
                        x_extent.1 - x_extent.0,
                        Some(format!("x = {x}: element {i} x-hull escapes the strip")),
                        false,
                    ));
                }
                match smallest_covering_index(y_iv.lo, y_iv.hi, prev_n) {
                    Some(l) => lift.push(l),
                    None => {
                        return Ok((
                            max_diam,
                            x_extent.1 - x_extent.0,
                            Some(format!("x = {x}: element {i} fits in no outer arc")),
                            false,
                        ));
                    }
                }
            }
            let map = ChainMap { n_inner: stage.n_chain, n_outer: prev_n, lift };
            let verdict = is_crooked_inside(&map);
            if !verdict.crooked {
                return Ok((
                    max_diam,
                    x_extent.1 - x_extent.0,
                    Some(format!("x = {x}: window {:?} not crooked", verdict.counterexample)),
                    false,
                ));
            }
            Ok((max_diam, x_extent.1 - x_extent.0, None, true))
        })
        .collect();

    let mut max_diam: f64 = 0.0;
    let mut max_x_extent: f64 = 0.0;
    for r in per_x {
        let (d, xe, counter, ok) = r?;
        max_diam = max_diam.max(d);
        max_x_extent = max_x_extent.max(xe);
        if !ok {
            rep.pass = false;
            if rep.counterexample.is_none() {
                rep.counterexample = counter;
            }
        }
    }
    rep.require("max_element_diameter", max_diam, diam_threshold);
    // A_{n+1,x} ⊂ int A_{n,x}: the x-extent of the image annulus stays
    // strictly inside the previous strip.
    let annulus_margin = prev_eps - 0.5 * max_x_extent;
    rep.put("annulus_margin", annulus_margin);
    if annulus_margin <= 0.0 {
        rep.pass = false;
        if rep.counterexample.is_none() {
            rep.counterexample = Some(format!("annulus margin {annulus_margin} ≤ 0"));
        }
    }
    rep.put("x_samples", x_samples as f64);
    rep.notes.push(
        "chain adjacency of the image family is inherited from the product chain through the \
         shear homeomorphism"
            .to_string(),
    );
    Ok(rep)
}

/// Properties on the rotation choice: coordinatewise closeness at denominator
/// scale, exact orbit covering radius of the new rotation, and density of the
/// conjugated orbits.
pub fn verify_p2_p3(
    alpha_prev: &RotationVector,
    stage: &StageParams,
    stack: &ConjugacyStack,
    seeds: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::new("P2P3");
    let n = stage.index - 1; // properties are indexed by the transition n → n+1
    if stage.alpha == *alpha_prev {
        rep.pass = false;
        rep.counterexample = Some("alpha_{n+1} equals alpha_n".to_string());
    }
    let (dx, dy) = stage.alpha.abs_diff(alpha_prev);
    let qn = alpha_prev.q.to_f64().unwrap();
    let bound = 1.0 / (2f64.powi(n as i32 + 1) * qn);
    rep.require("alpha_dx", dx.to_f64().unwrap(), bound);
    rep.require("alpha_dy", dy.to_f64().unwrap(), bound);

    // Orbit density of the plain rotation: exact covering radius.
    let mu = covering_radius(&stage.alpha).to_f64().unwrap().sqrt();
    rep.require("rotation_covering_radius", mu, 1.0 / 2f64.powi(n as i32 + 1));

    // Orbit density of the conjugated map: every orbit is the H⁻¹-image of a
    // rotation orbit. Threshold 1/(n+1); for the first stage this exceeds the
    // torus diameter and is vacuous, which is recorded rather than sampled.
    let dens_threshold = 1.0 / (stage.index as f64);
    let torus_diam = 0.5f64 * 2.0f64.sqrt();
    if dens_threshold > torus_diam {
        rep.put("f_orbit_density_bound", torus_diam);
        rep.put("f_orbit_density_threshold", dens_threshold);
        rep.notes.push("density threshold exceeds the torus diameter; vacuous".to_string());
    } else {
        // Sampled density of conjugated orbits through seed points.
        let q = stage.alpha.q.to_u64().unwrap_or(u64::MAX);
        let cap = 200_000u64.min(q);
        let mut worst: f64 = 0.0;
        for s in 0..seeds {
            let z0 = TorusPoint::new(
                (s as f64 + 0.5) / seeds as f64,
                ((s as f64) * 0.618_033_988_749_895) % 1.0,
            );
            let pts: Vec<TorusPoint> = (0..cap)
                .map(|k| stack.f_pow(&stage.alpha, &BigInt::from(k), z0))
                .collect();
            worst = worst.max(covering_radius_sampled(&pts, 64));
        }
        if cap < q {
            rep.inconclusive = true;
            rep.notes.push(format!("orbit truncated at {cap} of {q} points"));
        }
        rep.require("f_orbit_density", worst, dens_threshold);
    }
    rep
}

fn covering_radius_sampled(pts: &[TorusPoint], grid: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let z = TorusPoint::new((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
            let d = pts.iter().map(|p| p.dist(&z)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Closeness of the new map and projection to the previous stage on the
/// evaluation grid: iterate distances, the rotation-set stand-in bound
/// `η_n = 1/(100·q_n²)`, and the projection distance.
pub fn verify_p4_p5(
    prev_stack: &ConjugacyStack,
    alpha_prev: &RotationVector,
    stage: &StageParams,
    stack: &ConjugacyStack,
    grid: usize,
    prev_iterate_distances: Option<&[f64]>,
) -> PropertyReport {
    let mut rep = PropertyReport::new("P4P5");
    let n = stage.index as i32 - 1;
    let qn = alpha_prev.q.to_u64().unwrap();
    let qn_f = qn as f64;

    // d0(f_{n+1}^i, f_n^i) for i = 1..q_n over the grid, both directions.
    let iters = qn.min(64);
    let mut dists = Vec::with_capacity(iters as usize);
    for i in 1..=iters {
        let k = BigInt::from(i);
        let km = BigInt::from(-(i as i64));
        let d: f64 = (0..grid)
            .into_par_iter()
            .map(|gx| {
                let mut worst: f64 = 0.0;
                for gy in 0..grid {
                    let z = TorusPoint::new(
                        (gx as f64 + 0.5) / grid as f64,
                        (gy as f64 + 0.5) / grid as f64,
                    );
                    let a = stack.f_pow(&stage.alpha, &k, z);
                    let b = stack.f_pow(alpha_prev, &k, z);
                    worst = worst.max(a.dist(&b));
                    let ai = stack.f_pow(&stage.alpha, &km, z);
                    let bi = stack.f_pow(alpha_prev, &km, z);
                    worst = worst.max(ai.dist(&bi));
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        dists.push(d);
    }
    if qn > iters {
        rep.notes.push(format!("iterate distances sampled for i ≤ {iters} of q_n = {qn}"));
    }
    let max_dist = dists.iter().cloned().fold(0.0, f64::max);
    rep.put("max_iterate_distance", max_dist);
    if n >= 1 {
        let bound = 1.0 / n as f64;
        rep.require("max_iterate_distance_vs_1_over_n", max_dist, bound);
        if let Some(prev) = prev_iterate_distances {
            for (i, (&d, &pd)) in dists.iter().zip(prev).enumerate() {
                if !(d < 0.5 * pd) {
                    rep.pass = false;
                    rep.counterexample =
                        Some(format!("iterate {}: distance {d} not below half of previous {pd}", i + 1));
                    break;
                }
            }
        }
    } else {
        rep.notes.push("halving and 1/n clauses are vacuous at the first transition".to_string());
    }

    // η-clause with the explicit stand-in η_n = 1/(100·q_n²).
    let eta = 1.0 / (100.0 * qn_f * qn_f);
    rep.require("d0_f", dists[0], eta / 2.0);
    rep.put("eta_n", eta);

    // Rotation-set spot check: Birkhoff averages of the lift displacement.
    let mut worst_dev: f64 = 0.0;
    let k_birkhoff = BigInt::from(10_000u32);
    let (ax, ay) = stage.alpha.as_f64();
    let kb_f = 10_000f64;
    for s in 0..20 {
        let z = LiftPoint {
            x: (s as f64 + 0.3) / 20.0,
            y: ((s as f64) * 0.381_966_011_250_105) % 1.0,
        };
        let w = stack.f_pow_lift(&stage.alpha, &k_birkhoff, z);
        let dev_x = (w.x - z.x) / kb_f - ax;
        let dev_y = (w.y - z.y) / kb_f - ay;
        worst_dev = worst_dev.max(dev_x.hypot(dev_y));
    }
    rep.require("birkhoff_deviation", worst_dev, 10.0 / stage.alpha.q.to_f64().unwrap().min(1e18) + 1e-9);

    // P5: projection distance on the grid.
    let p_dist: f64 = (0..grid)
        .into_par_iter()
        .map(|gx| {
            let mut worst: f64 = 0.0;
            for gy in 0..grid {
                let z = TorusPoint::new(
                    (gx as f64 + 0.5) / grid as f64,
                    (gy as f64 + 0.5) / grid as f64,
                );
                let a = stack.p_eval(z);
                let b = prev_stack.p_eval(z);
                worst = worst.max(torus_diff(a, b).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    rep.require("p_distance", p_dist, 1.0 / 2f64.powi(n));
    rep.put("grid", grid as f64);
    rep
}

/// Hypotheses of the nested crooked-chain limit: crooked nesting per stage,
/// closure containment, shrinking diameters, and a single non-trivial
/// homotopy type for every stage chain.
pub fn verify_bf(
    stage0_n: usize,
    stage0_eps: f64,
    stages: &[StageParams],
    p1_reports: &[PropertyReport],
) -> PropertyReport {
    let mut rep = PropertyReport::new("BF");
    for (i, p1) in p1_reports.iter().enumerate() {
        if !p1.pass {
            rep.pass = false;
            rep.counterexample = Some(format!("stage {}: crooked nesting failed", i + 1));
        }
        if let Some(m) = p1.measured.get("annulus_margin") {
            rep.put(&format!("closure_margin_stage_{}", i + 1), *m);
            if *m <= 0.0 {
                rep.pass = false;
            }
        }
    }
    // Diameter schedule strictly decreasing.
    let mut diams = vec![(4.0 * stage0_eps * stage0_eps
        + (1.5 / stage0_n as f64) * (1.5 / stage0_n as f64))
        .sqrt()];
    for p1 in p1_reports {
        if let Some(d) = p1.measured.get("max_element_diameter") {
            diams.push(*d);
        }
    }
    for (i, w) in diams.windows(2).enumerate() {
        rep.put(&format!("diameter_stage_{i}"), w[0]);
        rep.put(&format!("diameter_stage_{}", i + 1), w[1]);
        if !(w[1] < w[0]) {
            rep.pass = false;
            rep.counterexample = Some(format!(
                "diameters not decreasing at stage {}: {} → {}",
                i + 1,
                w[0],
                w[1]
            ));
        }
    }
    // Homotopy type of every stage chain in its own conjugated coordinates:
    // the product chains are strips crossed with the standard covering, and
    // the conjugacies are isotopic to the identity, so the type is read off
    // the product chain lift.
    let check_homotopy = |n: usize, eps: f64, label: &str, rep: &mut PropertyReport| {
        let strip = CircleInterval::new(0.5 - eps, 0.5 + eps);
        match strip_chain(strip, n).and_then(|c| lift_chain(&c)) {
            Ok(lift) => {
                if lift.v != vec![0, 1] {
                    rep.pass = false;
                    rep.counterexample =
                        Some(format!("{label}: homotopy type {:?} ≠ (0, 1)", lift.v));
                }
            }
            Err(e) => {
                rep.pass = false;
                rep.counterexample = Some(format!("{label}: chain does not lift: {e}"));
            }
        }
    };
    check_homotopy(stage0_n, stage0_eps, "stage 0", &mut rep);
    for st in stages {
        check_homotopy(st.n_chain, st.eps_strip, &format!("stage {}", st.index), &mut rep);
    }
    rep.put("stages", stages.len() as f64);
    rep
}

/// Deviation growth table: `sup_z |⟨F^k(z) − z − k·ρ, v⟩|` over the seeds for
/// a sample of iterate counts up to `n_max`. Diagnostic only.
pub fn estimate_deviations(
    stack: &ConjugacyStack,
    alpha: &RotationVector,
    v: (f64, f64),
    n_max: u64,
    seeds: usize,
) -> Vec<(u64, f64)> {
    let ks = sample_iterates(n_max);
    let seeds: Vec<LiftPoint> = (0..seeds)
        .map(|s| LiftPoint {
            x: (s as f64 + 0.25) / seeds.max(1) as f64,
            y: ((s as f64) * 0.702_129_518) % 1.0,
        })
        .collect();
    let (ax, ay) = alpha.as_f64();
    ks.par_iter()
        .map(|&k| {
            let kb = BigInt::from(k);
            let mut worst: f64 = 0.0;
            for z in &seeds {
                let w = stack.f_pow_lift(alpha, &kb, *z);
                // k·ρ with the integer part exact.
                let kx = exact_k_alpha(&kb, &alpha.p, &alpha.q, ax);
                let ky = exact_k_alpha(&kb, &alpha.r, &alpha.q, ay);
                let dev = (w.x - z.x - kx) * v.0 + (w.y - z.y - ky) * v.1;
                worst = worst.max(dev.abs());
            }
            (k, worst)
        })
        .collect()
}

fn exact_k_alpha(k: &BigInt, num: &BigInt, den: &BigInt, _approx: f64) -> f64 {
    use num::Integer;
    let prod = k * num;
    let (q, r) = prod.div_mod_floor(den);
    q.to_f64().unwrap() + r.to_f64().unwrap() / den.to_f64().unwrap()
}

fn sample_iterates(n_max: u64) -> Vec<u64> {
    let mut ks: Vec<u64> = (0..=n_max.min(2048)).collect();
    if n_max > 2048 {
        let mut k = 2048f64;
        while (k as u64) < n_max {
            k *= 1.1;
            ks.push((k as u64).min(n_max));
        }
        ks.push(n_max);
        ks.dedup();
    }
    ks
}

/// Sup of `|π₁∘H − π₁|` over a grid: the projection oscillation used by the
/// deviation bound.
pub fn projection_oscillation(stack: &ConjugacyStack, grid: usize) -> f64 {
    (0..grid)
        .into_par_iter()
        .map(|gx| {
            let mut worst: f64 = 0.0;
            for gy in 0..grid {
                let z = TorusPoint::new(
                    (gx as f64 + 0.5) / grid as f64,
                    (gy as f64 + 0.5) / grid as f64,
                );
                worst = worst.max(torus_diff(stack.p_eval(z), z.x).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Semi-conjugacy defect `p(f(z)) − (p(z) + p/q)` and the period identity
/// `f^q = id`, measured over grids; the acceptance identities.
pub fn semiconjugacy_report(
    stack: &ConjugacyStack,
    alpha: &RotationVector,
    grid: usize,
    period_samples: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::new("semiconjugacy");
    let (ax, _) = alpha.as_f64();
    let defect: f64 = (0..grid)
        .into_par_iter()
        .map(|gx| {
            let mut worst: f64 = 0.0;
            for gy in 0..grid {
                let z = TorusPoint::new(
                    (gx as f64 + 0.5) / grid as f64,
                    (gy as f64 + 0.5) / grid as f64,
                );
                let lhs = stack.p_eval(stack.f_eval(alpha, z));
                let rhs = stack.p_eval(z) + ax;
                worst = worst.max(torus_diff(lhs, rhs).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    rep.require("semiconjugacy_defect", defect, 1e-9);

    let depth = stack.depth().max(1) as f64;
    let mut worst_period: f64 = 0.0;
    for s in 0..period_samples {
        let z = TorusPoint::new(
            (s as f64 + 0.5) / period_samples as f64,
            ((s as f64) * 0.618_033_988_749_895 + 0.17) % 1.0,
        );
        let back = stack.f_pow(alpha, &alpha.q.clone(), z);
        worst_period = worst_period.max(back.dist(&z));
    }
    rep.require("period_identity", worst_period, depth * 1e-7);
    rep.put("grid", grid as f64);
    rep.put("period_samples", period_samples as f64);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::standard_arc;
    use crate::theta::build_grid_theta;

    #[test]
    fn covering_index_matches_direct_scan() {
        for n in [4usize, 8, 16] {
            let nf = n as f64;
            for k in 0..200 {
                let ylo = -1.0 + k as f64 * 0.017;
                let yhi = ylo + 0.4 / nf;
                let direct = (-(3 * n as i64)..(3 * n as i64)).find(|&l| {
                    standard_arc(n, l).lift_contains(&CircleInterval::new(ylo, yhi))
                });
                assert_eq!(smallest_covering_index(ylo, yhi, n), direct, "n={n} ylo={ylo}");
            }
        }
    }

    #[test]
    fn claim_holds_for_grid_theta_small() {
        // Outer size 6 is the smallest with non-vacuous windows (spans 5).
        let n_outer = 6usize;
        let th = build_grid_theta(n_outer, 1, 10_000_000).unwrap();
        let n_inner =
            (6 * n_outer * ((th.lip_g() + 2.0).ceil() as usize)).next_power_of_two();
        let omegas: Vec<f64> =
            (0..8).map(|j| (2 * j + 1) as f64 / (16.0 * n_outer as f64)).collect();
        let samples = claim_check(&th, n_outer, n_inner, &omegas).unwrap();
        for s in &samples {
            assert!(s.crooked, "omega = {}: counterexample {:?}", s.omega, s.counterexample);
        }
    }

    #[test]
    fn claim_fails_for_identity_stub() {
        // θ = Id has a monotone pattern; the crookedness must fail once the
        // window spans more than the trigger.
        use crate::theta::{CircleMap, CircleMapBackend};
        let th = CircleMap {
            m: 1,
            backend: CircleMapBackend::PiecewiseLinear {
                knots_t: vec![0.0, 1.0],
                knots_v: vec![0.0, 0.0],
                cells: Default::default(),
            },
            skeleton: crate::crooked::PiecewiseMonotone::new(vec![0.0, 1.0], vec![0.0, 1.0]),
            eps_cert: f64::INFINITY,
            delta_f: 0.0,
            certs: vec![],
        };
        let samples = claim_check(&th, 8, 64, &[0.01]).unwrap();
        assert!(!samples[0].crooked);
    }
}
