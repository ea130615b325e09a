//! Oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use kramers::noise::{Mat3, RngStream};

/// Composite Simpson rule with `n` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Step covariance from the Itô isometry: with `r` the time left in the
/// step, the integrands of `(dB, dxi_x, dxi_v)` are
/// `1`, `1 - e^{-βr}` and `β e^{-βr}`.
pub fn quadrature_covariance(beta: f64, h: f64, nodes: usize) -> Mat3 {
    let g: [Box<dyn Fn(f64) -> f64>; 3] = [
        Box::new(|_| 1.0),
        Box::new(move |r: f64| -(-beta * r).exp_m1()),
        Box::new(move |r: f64| beta * (-beta * r).exp()),
    ];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = simpson(|r| g[i](r) * g[j](r), 0.0, h, nodes);
        }
    }
    c
}

/// Monte-Carlo samples of `I₁(t)²` via Euler-Maruyama on
/// `dI = -βI dt - dW` with `βΔ ≤ 0.01`, from an independent seed domain.
pub fn fine_grid_i1_squares(beta: f64, t: f64, n_paths: usize, seed: u64) -> Vec<f64> {
    let n = ((100.0 * beta * t).ceil() as usize).max(100);
    let dt = t / n as f64;
    let sd = dt.sqrt();
    (0..n_paths as u64)
        .map(|p| {
            let mut i1 = 0.0;
            let mut z = [0.0; 4];
            for k in 0..n {
                if k % 4 == 0 {
                    z = RngStream::new(seed, p, (k / 4) as u64).normals();
                }
                i1 += -beta * i1 * dt - sd * z[k % 4];
            }
            i1 * i1
        })
        .collect()
}
