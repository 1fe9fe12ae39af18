//! Moments `I_k(c, h) = ∫₀^h u^k e^{−cu} du` for `k = 0, 1, 2`.

/// Below this value of `c·h` the power series replaces the recursion, whose
/// terms cancel when the exponent is small.
const SERIES_CUTOFF: f64 = 0.5;

pub fn exp_moments(c: f64, h: f64) -> [f64; 3] {
    let x = c * h;
    if x.abs() < SERIES_CUTOFF {
        // I_k = h^{k+1} Σ_m (−x)^m / (m! (k+m+1))
        let mut out = [0.0; 3];
        let mut term = 1.0;
        for m in 0..60 {
            let mf = m as f64;
            for (k, o) in out.iter_mut().enumerate() {
                *o += term / (k as f64 + mf + 1.0);
            }
            term *= -x / (mf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        [out[0] * h, out[1] * h * h, out[2] * h * h * h]
    } else {
        recursion(c, h)
    }
}

/// `I_k = (k·I_{k−1} − h^k e^{−ch}) / c`
fn recursion(c: f64, h: f64) -> [f64; 3] {
    let e = (-c * h).exp();
    let i0 = -(-c * h).exp_m1() / c;
    let i1 = (i0 - h * e) / c;
    let i2 = (2.0 * i1 - h * h * e) / c;
    [i0, i1, i2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(k: i32, c: f64, h: f64) -> f64 {
        // composite Simpson with many panels
        let m = 20000;
        let dx = h / m as f64;
        let f = |u: f64| u.powi(k) * (-c * u).exp();
        let mut s = f(0.0) + f(h);
        for i in 1..m {
            s += f(i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dx / 3.0
    }

    #[test]
    fn matches_numerical_integration() {
        for &(c, h) in &[(1.1, 0.01), (2.2, 0.2), (0.1, 3.0), (5.0, 2.0), (1e-8, 1.0), (10.0, 0.04999)] {
            let m = exp_moments(c, h);
            for k in 0..3 {
                let b = brute(k as i32, c, h);
                assert!((m[k] - b).abs() <= 1e-11 * b.abs().max(1e-300), "k={k} c={c} h={h}: {} vs {b}", m[k]);
            }
        }
    }

    #[test]
    fn continuous_across_cutoff() {
        let h = SERIES_CUTOFF * (1.0 - 1e-12);
        let series = exp_moments(1.0, h);
        let rec = recursion(1.0, h);
        for k in 0..3 {
            assert!((series[k] - rec[k]).abs() < 1e-14 * rec[k]);
        }
    }

    #[test]
    fn zero_width() {
        assert_eq!(exp_moments(1.0, 0.0), [0.0; 3]);
    }
}
