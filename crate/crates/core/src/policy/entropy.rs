//! First-token action entropy.

use super::PolicyError;

/// Shannon entropy `-Σ p ln p` of a distribution over actions, and the same
/// value divided by `ln(len)`.
pub fn action_entropy(dist: &[f64]) -> Result<(f64, f64), PolicyError> {
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || dist.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(PolicyError::NotNormalized(sum));
    }
    let raw: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    let raw = raw.max(0.0);
    let norm = if dist.len() > 1 {
        (raw / (dist.len() as f64).ln()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok((raw, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let (r, n) = action_entropy(&[0.2; 5]).unwrap();
        assert!((r - 5f64.ln()).abs() < 1e-12);
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(action_entropy(&[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), (0.0, 0.0));
        let (r, n) = action_entropy(&[0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((r - 2f64.ln()).abs() < 1e-12);
        assert!((n - 0.4307).abs() < 1e-4);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(action_entropy(&[0.5, 0.4, 0.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(w in prop::collection::vec(0.0f64..1.0, 5), rot in 0usize..5) {
            let s: f64 = w.iter().sum::<f64>() + 1e-9;
            let p: Vec<f64> = w.iter().map(|x| (x + 1e-9 / 5.0) / s).collect();
            let mut q = p.clone();
            q.rotate_left(rot);
            q.swap(0, 4);
            let (a, na) = action_entropy(&p).unwrap();
            let (b, _) = action_entropy(&q).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= 5f64.ln() + 1e-12 && na <= 1.0);
            let uniform = p.iter().all(|x| (x - 0.2).abs() < 1e-9);
            if !uniform {
                prop_assert!(a < 5f64.ln());
            }
        }
    }
}
