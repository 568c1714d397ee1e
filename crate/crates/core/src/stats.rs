//! Small numeric kernels: quantiles, the regularized incomplete gamma
//! function, and the chi-squared quantile it induces.

/// Linear-interpolation quantile of an ascending slice. `q` in [0, 1].
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
    if xs.len() == 1 {
        return xs[0];
    }
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    xs[lo] + (xs[hi] - xs[lo]) * frac
}

/// Sorts a copy; convenience for callers holding unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&v, q)
}

/// Lanczos log-gamma (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// continued fraction for the complement otherwise.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series: P(a,x) = x^a e^-x / Gamma(a) * sum x^n / (a)_{n+1}
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (a * x.ln() - x - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction for Q(a,x)
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / f64::MIN_POSITIVE;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < f64::MIN_POSITIVE {
                d = f64::MIN_POSITIVE;
            }
            c = b + an / c;
            if c.abs() < f64::MIN_POSITIVE {
                c = f64::MIN_POSITIVE;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (a * x.ln() - x - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Chi-squared CDF with `dof` degrees of freedom.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    regularized_gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Chi-squared quantile: the x with CDF(x) = p, via bracketed Newton on the
/// regularized incomplete gamma. Relative error well below 1e-8.
pub fn chi2_quantile(dof: usize, p: f64) -> f64 {
    assert!(dof >= 1, "dof must be positive");
    assert!((0.0..1.0).contains(&p), "probability {p} outside [0, 1)");
    if p == 0.0 {
        return 0.0;
    }
    let a = dof as f64 / 2.0;
    // expand bracket
    let mut hi = dof as f64 + 10.0;
    while chi2_cdf(dof, hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut x = dof as f64 * (1.0 - 2.0 / (9.0 * dof as f64)).powi(3).max(0.01); // Wilson-Hilferty start
    if !(lo..=hi).contains(&x) {
        x = 0.5 * hi;
    }
    for _ in 0..200 {
        let f = chi2_cdf(dof, x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // chi2 pdf at x
        let ln_pdf = (a - 1.0) * x.ln() - x / 2.0 - a * 2.0f64.ln() - ln_gamma(a);
        let pdf = ln_pdf.exp();
        let step = if pdf > 0.0 { f / pdf } else { 0.0 };
        let mut next = x - step;
        if !(next > lo && next < hi) || step == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert_eq!(quantile_sorted(&xs, 0.25), 1.5);
        assert_eq!(quantile_sorted(&xs, 1.0), 3.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(2.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-11);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
    }

    #[test]
    fn chi2_dof2_closed_form() {
        // dof 2: CDF(x) = 1 - exp(-x/2); quantile(p) = -2 ln(1-p)
        for p in [0.1, 0.5, 0.9, 0.95, 0.99] {
            let x = chi2_quantile(2, p);
            assert!((x + 2.0 * (1.0 - p).ln()).abs() < 1e-10, "p={p} x={x}");
        }
        assert!((chi2_quantile(2, 0.95) - 5.991464547107979).abs() < 1e-8);
    }

    #[test]
    fn chi2_quantile_round_trips_through_cdf() {
        for dof in [1usize, 2, 3, 5, 10, 50, 200] {
            for p in [0.01, 0.1, 0.5, 0.9, 0.975, 0.999] {
                let x = chi2_quantile(dof, p);
                let back = chi2_cdf(dof, x);
                assert!((back - p).abs() < 1e-8, "dof={dof} p={p} back={back}");
            }
        }
    }

    #[test]
    fn chi2_quantile_zero() {
        assert_eq!(chi2_quantile(7, 0.0), 0.0);
    }
}
