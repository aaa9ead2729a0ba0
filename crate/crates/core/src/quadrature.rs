//! Composite Simpson rules on uniform grids over `[a, b]`.

/// Rounds an interval count up to the next even number (Simpson needs pairs).
pub fn even_intervals(n: usize) -> usize {
    n + (n & 1)
}

/// Uniform nodes `a + i h`, `i = 0..=n`.
pub fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| if i == n { b } else { a + i as f64 * h })
        .collect()
}

/// Composite Simpson weights for `n` (even) intervals on `[a, b]`.
pub fn simpson_weights(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Composite Simpson integral of samples on a uniform grid of spacing `h`.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        if i % 2 == 1 {
            odd += values[i];
        } else {
            even += values[i];
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

/// Integral of `g` over `[a, b]` with `n` (rounded to even) Simpson intervals.
pub fn integrate<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, n: usize) -> f64 {
    let n = even_intervals(n.max(2));
    let h = (b - a) / n as f64;
    let vals: Vec<f64> = nodes(a, b, n).into_iter().map(g).collect();
    simpson(&vals, h)
}

/// Running integral `C_i = ∫_{x_0}^{x_i} g` from uniform samples.
///
/// Even nodes use composite Simpson over pairs; each odd node adds the
/// three-point single-interval rule `h/12 (5g₀ + 8g₁ - g₂)` to the previous
/// even node. Needs an even interval count.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let mut out = vec![0.0; n + 1];
    let mut acc = 0.0;
    for m in (0..n).step_by(2) {
        let (g0, g1, g2) = (values[m], values[m + 1], values[m + 2]);
        out[m + 1] = acc + h / 12.0 * (5.0 * g0 + 8.0 * g1 - g2);
        acc += h / 3.0 * (g0 + 4.0 * g1 + g2);
        out[m + 2] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = integrate(|x| 4.0 * x * x * x - x + 2.0, 0.0, 1.0, 8);
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let n = 64;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = nodes(0.0, 1.0, n).iter().map(|x| x.exp()).collect();
        let c = cumulative_simpson(&vals, h);
        for (i, x) in nodes(0.0, 1.0, n).iter().enumerate() {
            // odd nodes carry the O(h⁴) single-interval error
            assert!((c[i] - (x.exp() - 1.0)).abs() < 1e-8, "node {i}");
        }
    }

    #[test]
    fn weights_sum_to_length() {
        let w = simpson_weights(0.0, 2.0, 10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
