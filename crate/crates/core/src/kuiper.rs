//! Kuiper two-sample distance and its asymptotic p-value.

use crate::error::{Error, Result};
use crate::series::ReturnSeries;

/// Kuiper distance D+ + D- between the empirical CDFs of two samples,
/// computed exactly by a merge over the pooled order statistics. CDF values
/// are formed as count/n so the result matches a brute-force sup evaluation
/// bit for bit.
pub fn kuiper_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    while ia < xa.len() || ib < xb.len() {
        let x = match (xa.get(ia), xb.get(ib)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while ia < xa.len() && xa[ia] <= x {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] <= x {
            ib += 1;
        }
        let diff = ia as f64 / na - ib as f64 / nb;
        if diff > d_plus {
            d_plus = diff;
        }
        if -diff > d_minus {
            d_minus = -diff;
        }
    }
    Ok(d_plus + d_minus)
}

/// Tail probability of the Kuiper limit distribution:
/// P(V > v) = 2 * sum_j (4 j^2 lambda^2 - 1) exp(-2 j^2 lambda^2),
/// truncated once terms drop below 1e-10.
pub fn kuiper_tail(lambda: f64) -> f64 {
    if lambda < 0.4 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=1000 {
        let jl = (j * j) as f64 * lambda * lambda;
        let term = (4.0 * jl - 1.0) * (-2.0 * jl).exp();
        sum += term;
        if term.abs() < 1e-10 && j > 1 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Gain/loss asymmetry: Kuiper distance between the positive returns and
/// the absolute negative returns, with the asymptotic p-value at effective
/// size n+ n- / (n+ + n-).
pub fn kuiper_asymmetry(r: &ReturnSeries) -> Result<(f64, f64)> {
    let pos: Vec<f64> = r.values().iter().copied().filter(|v| *v > 0.0).collect();
    let neg: Vec<f64> = r
        .values()
        .iter()
        .filter(|v| **v < 0.0)
        .map(|v| -v)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid(
            "kuiper_asymmetry needs both positive and negative returns",
        ));
    }
    let v = kuiper_distance(&pos, &neg)?;
    let ne = pos.len() as f64 * neg.len() as f64 / (pos.len() + neg.len()) as f64;
    let p = kuiper_tail(v * ne.sqrt());
    Ok((v, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use crate::series::ReturnKind;
    use rand_distr::{Distribution, StandardNormal};

    /// Brute force: evaluate F_a - F_b at every pooled point by counting.
    fn kuiper_brute(a: &[f64], b: &[f64]) -> f64 {
        let mut pool: Vec<f64> = a.iter().chain(b).copied().collect();
        pool.sort_by(f64::total_cmp);
        let (mut dp, mut dm) = (0.0f64, 0.0f64);
        for &x in &pool {
            let fa = a.iter().filter(|v| **v <= x).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|v| **v <= x).count() as f64 / b.len() as f64;
            if fa - fb > dp {
                dp = fa - fb;
            }
            if fb - fa > dm {
                dm = fb - fa;
            }
        }
        dp + dm
    }

    #[test]
    fn identical_samples_zero() {
        let a = vec![0.3, -1.0, 2.5, 0.3];
        assert_eq!(kuiper_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_one_sided() {
        let d = kuiper_distance(&[0.0], &[1.0]).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn merge_matches_brute_force() {
        for seed in 0..100u64 {
            let mut rng = rng_for(seed, &[0x6b]);
            let a: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let fast = kuiper_distance(&a, &b).unwrap();
            let brute = kuiper_brute(&a, &b);
            assert_eq!(fast, brute, "seed {seed}");
        }
    }

    #[test]
    fn handles_ties_across_samples() {
        let a = vec![1.0, 1.0, 2.0];
        let b = vec![1.0, 3.0, 3.0];
        assert_eq!(kuiper_distance(&a, &b).unwrap(), kuiper_brute(&a, &b));
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = rng_for(5, &[]);
        let a: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_eq!(
            kuiper_distance(&a, &b).unwrap(),
            kuiper_distance(&b, &a).unwrap()
        );
    }

    #[test]
    fn invariant_under_increasing_transform() {
        let mut rng = rng_for(6, &[]);
        let a: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = |v: f64| (v * 0.5).exp() + 3.0 * v;
        let ta: Vec<f64> = a.iter().map(|v| t(*v)).collect();
        let tb: Vec<f64> = b.iter().map(|v| t(*v)).collect();
        assert_eq!(
            kuiper_distance(&a, &b).unwrap(),
            kuiper_distance(&ta, &tb).unwrap()
        );
    }

    #[test]
    fn tail_reference_values() {
        // 2 * sum (4j^2-1) e^{-2j^2} at lambda = 1
        assert!((kuiper_tail(1.0) - 0.822077).abs() < 1e-5);
        assert!(kuiper_tail(0.1) == 1.0);
        assert!(kuiper_tail(3.0) < 1e-5);
        // the DAX-scale case: V = 0.0290 at Ne ~ 14026/4 gives p ~ 0.059
        let lambda = 0.0290 * (14026.0_f64 / 4.0).sqrt();
        assert!((kuiper_tail(lambda) - 0.0593).abs() < 0.001);
    }

    #[test]
    fn mirrored_series_zero_distance() {
        let mut vals = Vec::new();
        for i in 1..50 {
            vals.push(i as f64 * 0.01);
            vals.push(-(i as f64) * 0.01);
        }
        let r = ReturnSeries::new(vals, None, "m", 0, ReturnKind::Simple).unwrap();
        let (d, p) = kuiper_asymmetry(&r).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn one_signed_errors() {
        let r = ReturnSeries::new(vec![0.1, 0.2, 0.3], None, "p", 0, ReturnKind::Simple).unwrap();
        assert!(kuiper_asymmetry(&r).is_err());
    }
}
