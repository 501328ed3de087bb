//! One-dimensional derivative-free minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`, assuming the
/// function is unimodal there. Returns `(x, f(x))` for the best point seen.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
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
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Evaluates `f` on `n` evenly spaced points of `[a, b]` and refines the best
/// bracket with golden-section search. Ties on the grid go to the larger
/// abscissa; the refined point only replaces the grid winner if it is strictly better.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize, tol: f64) -> (f64, f64) {
    let n = n.max(3);
    let step = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| if i == n - 1 { b } else { a + step * i as f64 }).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for i in 1..n {
        if vals[i] <= vals[best] {
            best = i;
        }
    }
    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(n - 1)];
    let (x, fx) = golden_section(&mut f, lo, hi, tol);
    if fx < vals[best] {
        (x, fx)
    } else {
        (xs[best], vals[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_prefers_larger_on_ties() {
        let (x, _) = grid_then_golden(|_| 1.0, 0.0, 1.0, 11, 1e-6);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn boundary_minimum() {
        let (x, fx) = grid_then_golden(|x| 2.0 - x, 0.0, 1.0, 11, 1e-9);
        assert_eq!(x, 1.0);
        assert_eq!(fx, 1.0);
    }
}
