//! Brute-force oracles and instance generators shared by integration tests.
//!
//! Nothing here calls into the solver or verifier code paths it is used to
//! check; only problem containers and plain geometry are borrowed.

#![allow(dead_code)]

pub mod checks;

use freenav::geometry::{rotation, ConvexBody, ConvexRegion, Halfspace, Point};
use freenav::solvers::{LinearProgram, QuadraticProgram};
use freenav::trajectory::{BezierCurve, PoseTrajectory};
use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// PD quadratic, a few random cuts through the box `[-1, 1]^n` that keep a
/// random interior point feasible.
pub fn random_qp(r: &mut ChaCha8Rng) -> QuadraticProgram {
    let n = r.random_range(2..=6);
    let m = r.random_range(0..=8);
    let mm = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let h = mm.transpose() * &mm + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| r.random_range(-3.0..3.0));
    let center = DVector::from_fn(n, |_, _| r.random_range(-0.5..0.5));
    let c = DMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
    let d = DVector::from_fn(m, |i, _| {
        (c.row(i) * &center)[0] + r.random_range(0.05..0.8)
    });
    QuadraticProgram::new(h, g)
        .with_inequalities(c, d)
        .with_bounds(vec![(-1.0, 1.0); n])
}

pub fn random_lp(r: &mut ChaCha8Rng) -> LinearProgram {
    let n = r.random_range(2..=4);
    let m = r.random_range(1..=8);
    let cost = DVector::from_fn(n, |_, _| r.random_range(-2.0..2.0));
    let center = DVector::from_fn(n, |_, _| r.random_range(-0.5..0.5));
    let a = DMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |i, _| (a.row(i) * &center)[0] + r.random_range(0.05..0.8));
    LinearProgram::new(cost, a, b).with_bounds(vec![(-2.0, 2.0); n])
}

fn feasible(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
    (a * x - b).iter().all(|&v| v <= tol)
}

/// Zooming grid search over the bounding box; returns the best feasible
/// objective value found.
pub fn grid_qp_oracle(qp: &QuadraticProgram, refinements: usize) -> f64 {
    let n = qp.n();
    let (a, b) = qp.combined_inequalities();
    let bounds = qp.bounds.clone().expect("grid oracle needs a box");
    let k: usize = match n {
        2 => 61,
        3 => 25,
        4 => 13,
        5 => 8,
        _ => 6,
    };
    let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let mut best = f64::INFINITY;
    let mut best_x = DVector::zeros(n);
    for _ in 0..=refinements {
        let steps: Vec<f64> = (0..n).map(|j| (hi[j] - lo[j]) / (k - 1) as f64).collect();
        let mut idx = vec![0usize; n];
        loop {
            let x = DVector::from_fn(n, |j, _| lo[j] + steps[j] * idx[j] as f64);
            if feasible(&a, &b, &x, 0.0) {
                let f = qp.objective(&x);
                if f < best {
                    best = f;
                    best_x = x;
                }
            }
            let mut j = 0;
            loop {
                if j == n {
                    break;
                }
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
        for j in 0..n {
            let w = 2.0 * steps[j];
            lo[j] = (best_x[j] - w).max(bounds[j].0);
            hi[j] = (best_x[j] + w).min(bounds[j].1);
        }
    }
    best
}

fn subsets(m: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_size {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for i in start..m {
                let mut t: Vec<usize> = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Exact minimum of a strictly convex QP by enumerating candidate active sets
/// and solving each equality-constrained KKT system directly.
pub fn enumerate_qp_oracle(qp: &QuadraticProgram) -> f64 {
    let n = qp.n();
    let (a, b) = qp.combined_inequalities();
    let mut best = f64::INFINITY;
    for s in subsets(a.nrows(), n) {
        let k = s.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&qp.linear));
        for (r, &i) in s.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = a[(i, j)];
                kkt[(j, n + r)] = a[(i, j)];
            }
            rhs[n + r] = b[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        if x.iter().all(|v| v.is_finite()) && feasible(&a, &b, &x, 1e-9) {
            best = best.min(qp.objective(&x));
        }
    }
    best
}

/// Maximum of an LP over all feasible intersections of `n` constraint rows.
pub fn vertex_lp_oracle(lp: &LinearProgram) -> f64 {
    let n = lp.n();
    let (a, b) = lp.combined_inequalities();
    let mut best = f64::NEG_INFINITY;
    for s in subsets(a.nrows(), n).into_iter().filter(|s| s.len() == n) {
        let sub = DMatrix::from_fn(n, n, |r, j| a[(s[r], j)]);
        let rhs = DVector::from_fn(n, |r, _| b[s[r]]);
        if sub.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = sub.lu().solve(&rhs) else { continue };
        if feasible(&a, &b, &x, 1e-9) {
            best = best.max(lp.cost.dot(&x));
        }
    }
    best
}

/// Dense grid over the square, looking for a point strictly inside every row.
pub fn grid_has_interior(rows: &[Halfspace], half: f64, k: usize) -> bool {
    for i in 0..k {
        for j in 0..k {
            let p = Point::new(
                -half + 2.0 * half * i as f64 / (k - 1) as f64,
                -half + 2.0 * half * j as f64 / (k - 1) as f64,
            );
            if rows.iter().all(|h| h.normal.dot(&p) < h.offset - 1e-9 * h.norm()) {
                return true;
            }
        }
    }
    false
}

/// Direct violation `max_k [a_k·p(t) + max_j a_k·R(θ(t)) v_j - b_k]` with the
/// curves evaluated by explicit Bernstein sums.
pub fn direct_violation(traj: &PoseTrajectory, region: &ConvexRegion, body: &ConvexBody, t: f64) -> f64 {
    let p = bernstein_eval_2d(&traj.position, t);
    let th = bernstein_eval_1d(&traj.yaw, t);
    let r = rotation(th);
    region
        .halfspaces()
        .iter()
        .map(|h| {
            let sup = body
                .vertices()
                .iter()
                .map(|v| h.normal.dot(&(r * v)))
                .fold(f64::NEG_INFINITY, f64::max);
            h.normal.dot(&p) + sup - h.offset
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn bernstein_eval_2d(c: &BezierCurve<2>, t: f64) -> Vector2<f64> {
    let k = c.degree();
    c.control_points()
        .iter()
        .enumerate()
        .fold(Vector2::zeros(), |acc, (i, p)| {
            acc + Vector2::new(p[0], p[1])
                * (binomial(k, i) * t.powi(i as i32) * (1.0 - t).powi((k - i) as i32))
        })
}

pub fn bernstein_eval_1d(c: &BezierCurve<1>, t: f64) -> f64 {
    let k = c.degree();
    c.control_points().iter().enumerate().fold(0.0, |acc, (i, p)| {
        acc + p[0] * binomial(k, i) * t.powi(i as i32) * (1.0 - t).powi((k - i) as i32)
    })
}

/// Max of `g` over a uniform grid with step `dt` (both endpoints included).
pub fn dense_max(f: impl Fn(f64) -> f64, dt: f64) -> (f64, f64) {
    let n = (1.0 / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            (f(t), t)
        })
        .fold((f64::NEG_INFINITY, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
}

pub fn random_body(r: &mut ChaCha8Rng) -> ConvexBody {
    loop {
        let n = r.random_range(3..7);
        let mut angles: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<Point> = angles
            .iter()
            .map(|&t| {
                let rad = r.random_range(0.05..0.4);
                Point::new(rad * t.cos(), rad * t.sin())
            })
            .collect();
        if let Ok(b) = ConvexBody::new(verts) {
            return b;
        }
    }
}

/// Random polygonal region around the origin: `n` halfspaces with random
/// (non-unit) normals at distance 0.8..2.5.
pub fn random_region(r: &mut ChaCha8Rng) -> ConvexRegion {
    let n = r.random_range(3..9);
    let mut hs = Vec::new();
    for k in 0..n {
        let ang = std::f64::consts::TAU * (k as f64 + r.random_range(0.0..0.8)) / n as f64;
        let scale = r.random_range(0.3..3.0);
        let normal = Vector2::new(ang.cos(), ang.sin()) * scale;
        let dist = r.random_range(0.8..2.5);
        hs.push(Halfspace::new(normal, dist * scale).unwrap());
    }
    ConvexRegion::new(hs).unwrap()
}
