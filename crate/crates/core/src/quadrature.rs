//! Quadrature of sampled functions.

/// Composite Simpson rule on (possibly non-uniform) samples.
///
/// Panels are taken in pairs; a leftover odd panel, or a pair whose widths
/// differ by more than a factor of two (the shortened final step of a
/// fixed-step trajectory), falls back to the trapezoid rule.
pub fn simpson(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len(), "sample count mismatch");
    let n = times.len();
    if n < 2 {
        return 0.0;
    }
    let trap = |i: usize| 0.5 * (times[i + 1] - times[i]) * (values[i] + values[i + 1]);
    let mut sum = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h0 = times[i + 1] - times[i];
        let h1 = times[i + 2] - times[i + 1];
        let ratio = h1 / h0;
        if (0.5..=2.0).contains(&ratio) {
            let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
            let hs = h0 + h1;
            sum += hs / 6.0 * ((2.0 - ratio) * f0 + hs * hs / (h0 * h1) * f1 + (2.0 - 1.0 / ratio) * f2);
        } else {
            sum += trap(i) + trap(i + 1);
        }
        i += 2;
    }
    if i + 1 < n {
        sum += trap(i);
    }
    sum
}

/// Simpson quadrature of `f` over `[a, b]` with `n` (rounded up to even)
/// uniform panels.
pub fn simpson_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let interior: f64 = (1..n)
        .map(|k| {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + k as f64 * h)
        })
        .sum();
    h / 3.0 * (f(a) + interior + f(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exact_for_cubics() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| x * x * x - x).collect();
        assert!((simpson(&t, &v) - (0.25 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn non_uniform_pairs_are_exact_for_quadratics() {
        let t = [0.0, 0.3, 0.5, 1.1, 1.6];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x * x + 1.0).collect();
        assert!((simpson(&t, &v) - (1.6f64.powi(3) + 1.6)).abs() < 1e-13);
    }

    #[test]
    fn odd_panel_and_short_tail() {
        // 2π/1e-3 is not an integer: the grid ends with a short panel
        let h = 1e-3;
        let mut t: Vec<f64> = (0..).map(|k| k as f64 * h).take_while(|&x| x < 2.0 * PI).collect();
        t.push(2.0 * PI);
        let v: Vec<f64> = t.iter().map(|x| x.sin().powi(2)).collect();
        assert!((simpson(&t, &v) - PI).abs() < 1e-9);
        let ones = vec![1.0; t.len()];
        assert!((simpson(&t, &ones) - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(simpson(&[], &[]), 0.0);
        assert_eq!(simpson(&[1.0], &[5.0]), 0.0);
        assert_eq!(simpson(&[0.0, 2.0], &[1.0, 3.0]), 4.0);
    }

    #[test]
    fn function_rule() {
        assert!((simpson_fn(|x| x.exp(), 0.0, 1.0, 101) - (1f64.exp() - 1.0)).abs() < 1e-10);
    }
}
