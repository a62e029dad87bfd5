//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use hardcoreboost::FeatureMatrix;
use rand::Rng;

/// Solves a small dense square system; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Row-reduces `rows` and returns a maximal linearly independent subset.
pub fn independent_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for b in &basis {
            let lead = b.iter().position(|x| x.abs() > 1e-12).unwrap();
            let f = v[lead] / b[lead];
            for (x, y) in v.iter_mut().zip(b) {
                *x -= f * y;
            }
        }
        if v.iter().any(|x| x.abs() > 1e-9) {
            basis.push(v);
            kept.push(r.clone());
        }
    }
    kept
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Vertices of `{x : A x = b, lo ≤ x ≤ hi}` (finite bounds), found by fixing
/// all but `rank(A)` coordinates at a bound and solving for the rest.
pub fn polytope_vertices(a: &[Vec<f64>], b: &[f64], lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    let aug: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    let rows: Vec<Vec<f64>> = independent_rows(&aug);
    let k = rows.len();
    let mut out = Vec::new();
    for free in combinations(n, k) {
        let fixed: Vec<usize> = (0..n).filter(|j| !free.contains(j)).collect();
        for mask in 0..(1u64 << fixed.len()) {
            let mut x = vec![0.0; n];
            for (bit, &j) in fixed.iter().enumerate() {
                x[j] = if mask >> bit & 1 == 1 { hi[j] } else { lo[j] };
            }
            let mat: Vec<Vec<f64>> = rows.iter().map(|r| free.iter().map(|&j| r[j]).collect()).collect();
            let rhs: Vec<f64> = rows
                .iter()
                .map(|r| r[n] - fixed.iter().map(|&j| r[j] * x[j]).sum::<f64>())
                .collect();
            let sol = if k == 0 { Some(Vec::new()) } else { solve_square(mat, rhs) };
            let Some(sol) = sol else { continue };
            for (&j, v) in free.iter().zip(sol) {
                x[j] = v;
            }
            let inside = (0..n).all(|j| x[j] >= lo[j] - 1e-9 && x[j] <= hi[j] + 1e-9);
            let feasible = a
                .iter()
                .zip(b)
                .all(|(r, &v)| (r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - v).abs() < 1e-7);
            if inside && feasible {
                out.push(x);
            }
        }
    }
    out
}

/// Decorrelation matrix `A_ij = y_j h_i(x_j)`.
pub fn decorrelation_matrix(fm: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..fm.cols())
        .map(|i| (0..fm.rows()).map(|j| fm.labels()[j] * fm.get(j, i)).collect())
        .collect()
}

/// Hard core as the union of vertex supports of `{p ∈ [0,1]^m : A p = 0}`.
pub fn core_by_vertices(fm: &FeatureMatrix) -> Vec<usize> {
    let m = fm.rows();
    let a = decorrelation_matrix(fm);
    let verts = polytope_vertices(&a, &vec![0.0; a.len()], &vec![0.0; m], &vec![1.0; m]);
    (0..m).filter(|&j| verts.iter().any(|v| v[j] > 1e-9)).collect()
}

/// Hard core as the points that no integer weighting in `{-2..2}^n` with all
/// margins nonnegative makes strictly positive.
pub fn core_by_sign_patterns(fm: &FeatureMatrix) -> Vec<usize> {
    let n = fm.cols();
    let m = fm.rows();
    let mut positive = vec![false; m];
    let total = 5usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let lambda: Vec<f64> = (0..n)
            .map(|_| {
                let v = (c % 5) as f64 - 2.0;
                c /= 5;
                v
            })
            .collect();
        let margins = fm.margins(&lambda).unwrap();
        if margins.iter().all(|&v| v >= -1e-12) {
            for (flag, &v) in positive.iter_mut().zip(&margins) {
                *flag |= v > 1e-12;
            }
        }
    }
    (0..m).filter(|&j| !positive[j]).collect()
}

/// Random problem with `m ≤ 8`, `n ≤ 3` and entries in `{-1, 0, 1}`.
pub fn random_ternary_problem(rng: &mut impl Rng) -> FeatureMatrix {
    let m = rng.random_range(1..=8);
    let n = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| f64::from(rng.random_range(-1i32..=1))).collect())
        .collect();
    let labels: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    FeatureMatrix::from_rows(&rows, &labels).unwrap()
}

/// Random problem with continuous features in `[-1, 1]`.
pub fn random_continuous_problem(rng: &mut impl Rng, m: usize, n: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let labels: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    FeatureMatrix::from_rows(&rows, &labels).unwrap()
}

/// Grid search for `min R(λ)` over `[-r, r]^n`, `n ≤ 2`, refined once around
/// the coarse minimizer.
pub fn grid_minimum(f: impl Fn(&[f64]) -> f64, n: usize, r: f64) -> f64 {
    assert!(n <= 2);
    let scan = |center: &[f64], half: f64, steps: i32| -> (Vec<f64>, f64) {
        let mut best = (center.to_vec(), f64::INFINITY);
        let h = half / f64::from(steps);
        let range: Vec<f64> = (-steps..=steps).map(|k| f64::from(k) * h).collect();
        let second: Vec<f64> = if n == 2 { range.clone() } else { vec![0.0] };
        for &a in &range {
            for &b in &second {
                let mut l = vec![center[0] + a];
                if n == 2 {
                    l.push(center[1] + b);
                }
                let v = f(&l);
                if v < best.1 {
                    best = (l, v);
                }
            }
        }
        best
    };
    let (coarse, _) = scan(&vec![0.0; n], r, 200);
    let (_, fine) = scan(&coarse, 2.0 * r / 200.0, 100);
    fine
}
