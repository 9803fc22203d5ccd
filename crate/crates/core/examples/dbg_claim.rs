use pseudocircle::theta::{build_grid_theta, GRange};
use pseudocircle::chain::{ChainMap, is_crooked_inside};
use pseudocircle::verify::smallest_covering_index;

fn main() {
    let n_outer = 6usize;
    let th = build_grid_theta(n_outer, 1, 10_000_000).unwrap();
    let n_inner = (6 * n_outer * ((th.lip_g() + 2.0).ceil() as usize)).next_power_of_two();
    eprintln!("lip_g = {}, n_inner = {}, knots = {}", th.lip_g(), n_inner, th.pl_knots().unwrap().0.len());
    let omega = 0.010416666666666666;
    let (knots_t, _) = th.pl_knots().unwrap();
    let theta_vals: Vec<f64> = knots_t.iter().map(|&t| th.eval(t)).collect();
    let grange = GRange::new(knots_t, theta_vals, th.period());
    let nf_in = n_inner as f64;
    let t0 = std::time::Instant::now();
    let mut lift = Vec::new();
    for i in 0..n_inner {
        let lo = (i as f64 - 1.25) / nf_in - omega;
        let hi = (i as f64 + 0.25) / nf_in - omega;
        let (ylo, yhi) = grange.range(lo, hi, th.period());
        lift.push(smallest_covering_index(ylo + omega, yhi + omega, n_outer).unwrap());
    }
    eprintln!("chain build: {:?}", t0.elapsed());
    let map = ChainMap { n_inner, n_outer, lift };
    let t1 = std::time::Instant::now();
    let verdict = is_crooked_inside(&map);
    eprintln!("check: {:?} crooked = {}", t1.elapsed(), verdict.crooked);
}
