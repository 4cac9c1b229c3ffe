//! Independent oracles shared by the integration suites. Nothing here calls
//! the Newton solver or the analytic derivatives it checks.
#![allow(dead_code)]

use std::path::PathBuf;

use crn_core::{EquilibriumState, Reaction, ReactionNetwork, StepProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// S = [[-1,0],[-2,1],[1,-1],[0,2]]: X1 + 2 X2 <=> X3, X3 <=> X2 + 2 X4.
pub fn four_species(kp: [f64; 2], km: [f64; 2]) -> ReactionNetwork {
    ReactionNetwork::new(
        names(4),
        vec![
            Reaction::new(vec![1, 2, 0, 0], vec![0, 0, 1, 0], kp[0], km[0]),
            Reaction::new(vec![0, 0, 1, 0], vec![0, 1, 0, 2], kp[1], km[1]),
        ],
    )
    .unwrap()
}

pub fn isomerization(kp: f64, km: f64) -> ReactionNetwork {
    ReactionNetwork::new(names(2), vec![Reaction::new(vec![1, 0], vec![0, 1], kp, km)]).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let h = rel_h * x[k].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[k] += h;
            dn[k] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a vector function; column k is d g / d x_k.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], rel_h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for k in 0..n {
        let h = rel_h * x[k].abs().max(1.0);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[k] += h;
        dn[k] -= h;
        let (gu, gd) = (g(&up), g(&dn));
        for l in 0..n {
            jac[l][k] = (gu[l] - gd[l]) / (2.0 * h);
        }
    }
    jac
}

/// Uniformly samples points where every concentration and every
/// `R_l - R^n_l + a_l` is at least `margin`.
pub fn sample_admissible(
    problem: &StepProblem<'_>,
    lo: &[f64],
    hi: &[f64],
    margin: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..*h)).collect();
        let c = problem.concentrations(&r);
        let u_ok = r
            .iter()
            .zip(&problem.ctx.r_n)
            .zip(&problem.ctx.a)
            .all(|((r, rn), a)| r - rn + a >= margin);
        if u_ok && c.iter().all(|&v| v >= margin) {
            out.push(r);
        }
    }
    out
}

/// Brute-force minimum of the step objective over a uniform grid on
/// `[lo, hi]^2`; inadmissible nodes are skipped.
pub fn grid_minimize_2d(problem: &StepProblem<'_>, lo: [f64; 2], hi: [f64; 2], nodes: usize) -> ([f64; 2], [f64; 2]) {
    let h = [(hi[0] - lo[0]) / (nodes - 1) as f64, (hi[1] - lo[1]) / (nodes - 1) as f64];
    let mut best = f64::INFINITY;
    let mut arg = [f64::NAN; 2];
    for i in 0..nodes {
        let r1 = lo[0] + i as f64 * h[0];
        for j in 0..nodes {
            let r2 = lo[1] + j as f64 * h[1];
            if let Ok(v) = problem.objective(&[r1, r2]) {
                if v < best {
                    best = v;
                    arg = [r1, r2];
                }
            }
        }
    }
    (arg, h)
}

/// Root of an increasing scalar function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "bracket does not straddle the root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest eigenvalue of a symmetric 2x2 or general symmetric matrix via
/// Jacobi rotations, independent of the solver's factorizations.
pub fn min_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

/// `S^T diag(w) S` assembled directly from the integer matrix.
pub fn weighted_gram(stoich: &[Vec<i64>], w: &[f64]) -> Vec<Vec<f64>> {
    let m = stoich[0].len();
    let mut g = vec![vec![0.0; m]; m];
    for (row, &wi) in stoich.iter().zip(w) {
        for l in 0..m {
            for k in 0..m {
                g[l][k] += (row[l] * row[k]) as f64 * wi;
            }
        }
    }
    g
}

pub fn equilibrium(net: &ReactionNetwork) -> EquilibriumState {
    net.solve_equilibrium().unwrap()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
