//! Simpson quadrature.

/// Composite Simpson rule on `[a, b]` with `intervals` subintervals (rounded up to even).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Composite Simpson from precomputed samples on an even number of equal intervals.
pub fn simpson_samples(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let mut acc = samples[0] + samples[n - 1];
    for (k, &y) in samples.iter().enumerate().take(n - 1).skip(1) {
        acc += if k % 2 == 1 { 4.0 * y } else { 2.0 * y };
    }
    acc * h / 3.0
}

/// Adaptive Simpson with absolute tolerance `tol` and recursion depth limit.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_is_exact() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 2);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        let ys: Vec<f64> = (0..=4).map(|k| (k as f64 * 0.5).powi(3)).collect();
        assert_abs_diff_eq!(simpson_samples(&ys, 0.5), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn exponential() {
        let exact = 1f64.exp() - 1.0;
        assert_abs_diff_eq!(simpson(f64::exp, 0.0, 1.0, 64), exact, epsilon = 1e-9);
        assert_abs_diff_eq!(
            adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12),
            exact,
            epsilon = 1e-11
        );
    }

    #[test]
    fn empty_interval() {
        assert_eq!(simpson(|x| x, 1.0, 1.0, 4), 0.0);
        assert_eq!(adaptive_simpson(|x| x, 2.0, 1.0, 1e-9), 0.0);
    }
}
