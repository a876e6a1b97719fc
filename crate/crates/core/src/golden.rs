//! Golden-section search for a maximum on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (√5 − 1) / 2

/// Best point seen while golden-section searching `f` on `[lo, hi]` for
/// `iters` iterations. Returns `(argmax, max)`. Errors from `f` abort the
/// search.
pub fn maximize<F, E>(mut f: F, lo: f64, hi: f64, iters: usize) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };

    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = maximize(
            |x| Ok::<_, Infallible>(-(x - 1.3) * (x - 1.3)),
            0.0,
            4.0,
            60,
        )
        .unwrap();
        assert!((x - 1.3).abs() < 1e-8);
        assert!(fx <= 0.0 && fx > -1e-15);
    }

    #[test]
    fn interior_optimum_of_overpaying_proportional_bidder() {
        // U(b) = 4b/(b+4) − 0.5b peaks at b = √32 − 4
        let (x, _) = maximize(
            |b| Ok::<_, Infallible>(4.0 * b / (b + 4.0) - 0.5 * b),
            1.0,
            2.0,
            80,
        )
        .unwrap();
        assert!((x - (32f64.sqrt() - 4.0)).abs() < 1e-7);
    }

    #[test]
    fn propagates_errors() {
        let r: Result<(f64, f64), &str> = maximize(|_| Err("boom"), 0.0, 1.0, 5);
        assert_eq!(r, Err("boom"));
    }
}
