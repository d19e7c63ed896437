//! Small one-dimensional solvers shared by the numerical paths.

use nalgebra::{DMatrix, DVector};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 300 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    // the endpoints are candidates too when the maximum sits on the boundary
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Solves `f(x) = target` for nondecreasing `f` on a bracket with
/// `f(lo) <= target <= f(hi)`.
pub fn bisect_increasing(
    f: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grows `[lo, hi]` around `start` until a nondecreasing `f` brackets
/// `target`. Gives up after a fixed number of doublings.
pub fn bracket_increasing(f: impl Fn(f64) -> f64, target: f64, start: f64) -> Option<(f64, f64)> {
    let mut step = 1.0;
    let (mut lo, mut hi) = (start - step, start + step);
    for _ in 0..80 {
        let (flo, fhi) = (f(lo), f(hi));
        if flo <= target && target <= fhi {
            return Some((lo, hi));
        }
        step *= 2.0;
        if flo > target {
            lo = start - step;
        }
        if fhi < target {
            hi = start + step;
        }
    }
    None
}

/// Solves the square system `a x = b`; `None` when singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let x = m.lu().solve(&DVector::from_column_slice(b))?;
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + b).collect()
}

/// `log(sum(exp(z)))` without overflow.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `x ln x` with the continuous extension at 0.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), -2.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
    }

    #[test]
    fn golden_handles_boundary_peak() {
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn bisection_inverts_monotone_map() {
        let x = bisect_increasing(|x| x.powi(3), 8.0, 0.0, 10.0, 1e-13);
        assert!((x - 2.0).abs() < 1e-12);
        let (lo, hi) = bracket_increasing(|x| x, 1e6, 0.0).unwrap();
        assert!(lo <= 1e6 && 1e6 <= hi);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let p = softmax(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }
}
