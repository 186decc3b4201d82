use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Trailing moving average; the first `window - 1` entries average the prefix.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::usage("smoothing window must be at least 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        let mean = if window == 1 { v } else { sum / n as f64 };
        out.push(mean.clamp(min_of(&series[i + 1 - n..=i]), max_of(&series[i + 1 - n..=i])));
    }
    Ok(out)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Episode at which a threshold was first met.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeToThreshold {
    /// 1-based episode index, or `episodes + 1` when censored.
    pub episode: usize,
    pub censored: bool,
}

/// Smallest 1-based index with `series[i] <= threshold`.
pub fn time_to_threshold(series: &[f64], threshold: f64) -> TimeToThreshold {
    match series.iter().position(|&v| v <= threshold) {
        Some(i) => TimeToThreshold {
            episode: i + 1,
            censored: false,
        },
        None => TimeToThreshold {
            episode: series.len() + 1,
            censored: true,
        },
    }
}

/// Mean of the last `tail` entries.
pub fn asymptotic_performance(series: &[f64], tail: usize) -> Result<f64> {
    if tail == 0 || tail > series.len() {
        return Err(Error::usage(format!(
            "asymptotic tail {tail} must be between 1 and the series length {}",
            series.len()
        )));
    }
    let last = &series[series.len() - tail..];
    Ok(last.iter().sum::<f64>() / tail as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[10.0, 20.0], 2).unwrap(), vec![10.0, 15.0]);
        assert_eq!(smooth(&[3.0, 1.0, 4.0], 1).unwrap(), vec![3.0, 1.0, 4.0]);
        assert_eq!(smooth(&[7.0; 5], 3).unwrap(), vec![7.0; 5]);
        assert_eq!(
            smooth(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(),
            vec![1.0, 1.5, 2.5, 3.5]
        );
        assert!(matches!(smooth(&[1.0], 0), Err(Error::Usage(_))));
    }

    #[test]
    fn threshold_examples() {
        let s = [600.0, 450.0, 300.0, 100.0];
        assert_eq!(time_to_threshold(&s, 500.0).episode, 2);
        assert_eq!(time_to_threshold(&s, 600.0).episode, 1);
        let never = time_to_threshold(&s, 50.0);
        assert_eq!(
            never,
            TimeToThreshold {
                episode: 5,
                censored: true
            }
        );
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(asymptotic_performance(&[30.0; 20], 10).unwrap(), 30.0);
        assert_eq!(asymptotic_performance(&[1.0, 2.0, 3.0, 6.0], 4).unwrap(), 3.0);
        assert!(asymptotic_performance(&[1.0], 2).is_err());
    }
}
