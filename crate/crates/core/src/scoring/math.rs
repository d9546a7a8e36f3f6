//! Probability arithmetic over label-word distributions. Entropies are in
//! nats.

use crate::error::{Error, Result};

/// Floor applied to prior components before dividing by them.
pub const PRIOR_FLOOR: f64 = 1e-12;

/// Numerically stable softmax over label-word logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("logits"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogit);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Divides `o` by the prompt prior `q` componentwise and renormalizes.
/// Prior components are floored at [`PRIOR_FLOOR`].
pub fn calibrate(o: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    calibrate_impl(o, q, true)
}

/// Like [`calibrate`] but without flooring; a prior component below
/// [`PRIOR_FLOOR`] is reported as [`Error::DegeneratePrior`].
pub fn calibrate_unfloored(o: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    calibrate_impl(o, q, false)
}

fn calibrate_impl(o: &[f64], q: &[f64], floor: bool) -> Result<Vec<f64>> {
    if o.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: o.len(),
            right: q.len(),
        });
    }
    if o.is_empty() {
        return Err(Error::EmptyInput("probability vector"));
    }
    let mut scaled = Vec::with_capacity(o.len());
    for (i, (&oi, &qi)) in o.iter().zip(q).enumerate() {
        let qi = if floor {
            qi.max(PRIOR_FLOOR)
        } else if qi < PRIOR_FLOOR || qi.is_nan() {
            return Err(Error::DegeneratePrior { index: i, value: qi });
        } else {
            qi
        };
        scaled.push(oi / qi);
    }
    normalize(scaled)
}

/// L1 renormalization.
pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NonFiniteLogit);
    }
    for x in &mut v {
        *x /= total;
    }
    Ok(v)
}

/// Index of the largest component; ties go to the lowest index.
pub fn predict(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Entropy reduction from the prompt prior `q` to the instance
/// distribution `p`.
pub fn mutual_information(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    Ok(entropy(q) - entropy(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_values() {
        assert!(close(&softmax(&[2.0, 0.0]).unwrap(), &[0.88080, 0.11920], 1e-5));
        for c in [-50.0, 0.0, 3.5, 700.0] {
            let p = softmax(&[c, c, c]).unwrap();
            assert!(close(&p, &[1.0 / 3.0; 3], 1e-15));
        }
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFiniteLogit)));
        assert!(matches!(softmax(&[f64::INFINITY, 0.0]), Err(Error::NonFiniteLogit)));
    }

    #[test]
    fn calibration_examples() {
        let p = calibrate(&[0.6, 0.4], &[0.75, 0.25]).unwrap();
        assert!(close(&p, &[1.0 / 3.0, 2.0 / 3.0], 1e-12));
        assert_eq!(predict(&p), 1);

        let o = [0.2, 0.5, 0.3];
        assert!(close(&calibrate(&o, &[1.0 / 3.0; 3]).unwrap(), &o, 1e-12));
        let q = [0.7, 0.2, 0.1];
        assert!(close(&calibrate(&q, &q).unwrap(), &[1.0 / 3.0; 3], 1e-12));
    }

    #[test]
    fn calibration_errors() {
        assert!(matches!(
            calibrate(&[0.5, 0.5], &[1.0]),
            Err(Error::DimensionMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(
            calibrate_unfloored(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::DegeneratePrior { index: 1, .. })
        ));
        // the floored variant tolerates an exact zero
        let p = calibrate(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(predict(&p), 1);
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(predict(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(predict(&[0.5, 0.5]), 0);
        assert_eq!(predict(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.5, 0.5]) - LN2).abs() < 1e-12);
        // -0.9 ln 0.9 - 0.1 ln 0.1
        assert!((entropy(&[0.9, 0.1]) - 0.325083).abs() < 1e-5);
    }

    #[test]
    fn mutual_information_values() {
        assert!((mutual_information(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - LN2).abs() < 1e-12);
        assert_eq!(mutual_information(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((mutual_information(&[0.5, 0.5], &[0.9, 0.1]).unwrap() - 0.368064).abs() < 1e-5);
        assert!(mutual_information(&[0.5, 0.5], &[1.0]).is_err());
    }

    fn prob_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn pair_of_vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..8).prop_flat_map(|n| (prob_vec(n), prob_vec(n)))
    }

    proptest! {
        #[test]
        fn calibrated_vectors_are_distributions((o, q) in pair_of_vecs()) {
            let p = calibrate(&o, &q).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn uniform_prior_is_idempotent((o, q) in pair_of_vecs()) {
            let p = calibrate(&o, &q).unwrap();
            let uniform = vec![1.0 / p.len() as f64; p.len()];
            let again = calibrate(&p, &uniform).unwrap();
            prop_assert!(close(&again, &p, 1e-12));
        }

        #[test]
        fn argmax_is_scale_invariant((o, q) in pair_of_vecs(), scale in 1e-3f64..1e3) {
            let scaled: Vec<f64> = o.iter().map(|x| x * scale).collect();
            let a = predict(&calibrate(&o, &q).unwrap());
            let b = predict(&calibrate(&normalize(scaled).unwrap(), &q).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn mutual_information_is_antisymmetric_and_bounded((q, p) in pair_of_vecs()) {
            let i = mutual_information(&q, &p).unwrap();
            let j = mutual_information(&p, &q).unwrap();
            prop_assert_eq!(i, -j);
            let bound = (q.len() as f64).ln();
            prop_assert!(i >= -bound - 1e-12 && i <= bound + 1e-12);
        }

        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-30.0f64..30.0, 2..10)) {
            let p = softmax(&logits).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
        }
    }
}
