use rand::Rng;

use crate::mdp::ActionId;
use crate::{Error, Result};

/// Boltzmann probabilities `exp(h_a / tau) / sum_b exp(h_b / tau)` with max
/// subtraction, written into `out`.
pub fn softmax_probs(preferences: &[f64], temperature: f64, out: &mut Vec<f64>) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::usage(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if preferences.is_empty() {
        return Err(Error::usage("softmax over an empty preference vector"));
    }
    if let Some(bad) = preferences.iter().find(|h| !h.is_finite()) {
        return Err(Error::Numeric(format!("non-finite preference {bad}")));
    }
    let max = preferences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(preferences.iter().map(|h| ((h - max) / temperature).exp()));
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

/// Samples an action from the Boltzmann distribution over `preferences`.
pub fn softmax_select<R: Rng + ?Sized>(
    preferences: &[f64],
    temperature: f64,
    rng: &mut R,
) -> Result<ActionId> {
    let mut probs = Vec::with_capacity(preferences.len());
    softmax_probs(preferences, temperature, &mut probs)?;
    Ok(sample(&probs, rng))
}

pub(crate) fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> ActionId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ActionId(i);
        }
    }
    // rounding left u above the running sum; take the last action with mass
    ActionId(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_for_equal_preferences() {
        let mut p = Vec::new();
        softmax_probs(&[0.3; 4], 1.0, &mut p).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn no_overflow_on_large_preferences() {
        let mut p = Vec::new();
        softmax_probs(&[1000.0, 0.0], 1.0, &mut p).unwrap();
        // exp(-1000) underflows to 0 in f64, so p0 = 1 exactly and p1 = exp(-1000) ~ 0
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-300);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = Vec::new();
        assert!(matches!(
            softmax_probs(&[f64::NAN, 0.0], 1.0, &mut p),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            softmax_probs(&[0.0, 0.0], 0.0, &mut p),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| softmax_select(&[0.1, 0.5, 0.2, 0.0], 0.5, &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn empirical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prefs = [0.0, 1.0, 2.0];
        let mut counts = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            counts[softmax_select(&prefs, 1.0, &mut rng).unwrap().0] += 1;
        }
        let z: f64 = prefs.iter().map(|h: &f64| h.exp()).sum();
        for (i, c) in counts.iter().enumerate() {
            let expect = prefs[i].exp() / z;
            assert!((*c as f64 / n as f64 - expect).abs() < 0.005);
        }
    }
}
