use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_SEED: u64 = 20240476;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub n_resamples: usize,
    pub ci_level: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            n_resamples: DEFAULT_RESAMPLES,
            ci_level: 0.95,
            alpha: 0.05,
            seed: DEFAULT_SEED,
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_resamples == 0 {
            return Err(EvalError::InvalidConfig(
                "n_resamples must be at least 1".into(),
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "ci_level {} outside (0, 1)",
                self.ci_level
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Binary scores of one condition, aligned to dataset item order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub condition_name: String,
    pub item_ids: Vec<String>,
    pub scores: Vec<u8>,
}

impl ScoreVector {
    pub fn new(
        condition_name: impl Into<String>,
        item_ids: Vec<String>,
        scores: Vec<u8>,
    ) -> Result<Self, EvalError> {
        if item_ids.len() != scores.len() {
            return Err(EvalError::LengthMismatch {
                a: item_ids.len(),
                b: scores.len(),
            });
        }
        if let Some(bad) = scores.iter().find(|&&s| s > 1) {
            return Err(EvalError::InvalidGrade(format!(
                "score {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            condition_name: condition_name.into(),
            item_ids,
            scores,
        })
    }

    /// Item ids `0..n` as strings; for ad-hoc vectors.
    pub fn anonymous(
        condition_name: impl Into<String>,
        scores: Vec<u8>,
    ) -> Result<Self, EvalError> {
        let ids = (0..scores.len()).map(|i| i.to_string()).collect();
        Self::new(condition_name, ids, scores)
    }

    /// `correct` ones followed by `n - correct` zeros.
    pub fn from_counts(
        condition_name: impl Into<String>,
        correct: usize,
        n: usize,
    ) -> Result<Self, EvalError> {
        if correct > n {
            return Err(EvalError::InvalidGrade(format!(
                "{correct} correct out of {n}"
            )));
        }
        Self::anonymous(
            condition_name,
            (0..n).map(|i| u8::from(i < correct)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn correct(&self) -> usize {
        self.scores.iter().map(|&s| s as usize).sum()
    }
}

pub fn accuracy(scores: &ScoreVector) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    Ok(scores.correct() as f64 / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Mean of the resample accuracies.
    pub mean: f64,
    /// Population standard deviation of the resample accuracies.
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Linear interpolation between closest ranks (numpy's default) on sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resample sums of `n_resamples` draws of n indices with replacement,
/// one index multiset per resample, applied to each of `vectors`.
fn resample_sums(vectors: &[&[u8]], cfg: &StatsConfig) -> Vec<Vec<i64>> {
    let n = vectors[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![Vec::with_capacity(cfg.n_resamples); vectors.len()];
    for _ in 0..cfg.n_resamples {
        let mut sums = vec![0i64; vectors.len()];
        for _ in 0..n {
            let idx = rng.random_range(0..n);
            for (s, v) in sums.iter_mut().zip(vectors) {
                *s += v[idx] as i64;
            }
        }
        for (o, s) in out.iter_mut().zip(sums) {
            o.push(s);
        }
    }
    out
}

pub fn bootstrap_summary(
    scores: &ScoreVector,
    cfg: &StatsConfig,
) -> Result<BootstrapSummary, EvalError> {
    cfg.validate()?;
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let n = scores.len() as f64;
    let sums = resample_sums(&[&scores.scores], cfg).remove(0);
    let mut accs: Vec<f64> = sums.into_iter().map(|s| s as f64 / n).collect();
    let b = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / b;
    let sd = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / b).sqrt();
    accs.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.ci_level) / 2.0;
    Ok(BootstrapSummary {
        mean,
        sd,
        ci_low: percentile(&accs, tail),
        ci_high: percentile(&accs, 1.0 - tail),
    })
}

/// Two-sided paired bootstrap p-value for mean(a) − mean(b).
///
/// Each resample draws one index multiset and applies it to both vectors;
/// p = 2·min(#(d* ≤ 0) + 1, #(d* ≥ 0) + 1) / (B + 1), capped at 1.
pub fn paired_bootstrap_test(
    a: &ScoreVector,
    b: &ScoreVector,
    cfg: &StatsConfig,
) -> Result<f64, EvalError> {
    cfg.validate()?;
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.item_ids != b.item_ids {
        return Err(EvalError::Misaligned {
            a: a.condition_name.clone(),
            b: b.condition_name.clone(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let sums = resample_sums(&[&a.scores, &b.scores], cfg);
    let (mut le, mut ge) = (0usize, 0usize);
    // equal n on both sides, so comparing sums compares means exactly
    for (sa, sb) in sums[0].iter().zip(&sums[1]) {
        let d = sa - sb;
        le += usize::from(d <= 0);
        ge += usize::from(d >= 0);
    }
    let p = 2.0 * (le.min(ge) + 1) as f64 / (cfg.n_resamples + 1) as f64;
    Ok(p.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrResult {
    pub adjusted: Vec<f64>,
    pub rejected: Vec<bool>,
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<FdrResult, EvalError> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(EvalError::PValueOutOfRange(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let candidate = m as f64 * p_values[i] / (rank + 1) as f64;
        running = running.min(candidate);
        adjusted[i] = running.min(1.0);
    }
    let rejected = adjusted.iter().map(|&q| q < alpha).collect();
    Ok(FdrResult { adjusted, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(scores: &[u8]) -> ScoreVector {
        ScoreVector::anonymous("v", scores.to_vec()).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(
            accuracy(&ScoreVector::from_counts("c", 59, 80).unwrap()).unwrap(),
            0.7375
        );
        assert_eq!(accuracy(&vector(&[1, 1, 1])).unwrap(), 1.0);
        assert_eq!(accuracy(&vector(&[0, 0])).unwrap(), 0.0);
        assert!(matches!(
            accuracy(&vector(&[])),
            Err(EvalError::EmptyScores)
        ));
        assert!(ScoreVector::anonymous("bad", vec![2]).is_err());
    }

    #[test]
    fn constant_vector_has_degenerate_interval() {
        let s = bootstrap_summary(&vector(&[1; 10]), &StatsConfig::default()).unwrap();
        assert_eq!((s.mean, s.sd, s.ci_low, s.ci_high), (1.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn three_item_sd_matches_exhaustive_enumeration() {
        // all 27 equally likely redraws of [1, 0, 1]
        let v = [1u8, 0, 1];
        let mut accs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    accs.push((v[i] + v[j] + v[k]) as f64 / 3.0);
                }
            }
        }
        let mean = accs.iter().sum::<f64>() / 27.0;
        let sd = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 27.0).sqrt();
        let cfg = StatsConfig {
            n_resamples: 100_000,
            ..StatsConfig::default()
        };
        let s = bootstrap_summary(&vector(&v), &cfg).unwrap();
        assert!((s.sd - sd).abs() < 0.003, "{} vs {sd}", s.sd);
        assert!((s.mean - mean).abs() < 0.003);
    }

    #[test]
    fn same_seed_same_numbers() {
        let v = ScoreVector::from_counts("c", 30, 50).unwrap();
        let cfg = StatsConfig::default();
        assert_eq!(
            bootstrap_summary(&v, &cfg).unwrap(),
            bootstrap_summary(&v, &cfg).unwrap()
        );
        let other = StatsConfig { seed: 1, ..cfg };
        assert_ne!(
            bootstrap_summary(&v, &cfg).unwrap(),
            bootstrap_summary(&v, &other).unwrap()
        );
    }

    #[test]
    fn percentile_interpolates_like_numpy() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&data, 0.0), 1.0);
        assert_eq!(percentile(&data, 0.5), 2.5);
        assert_eq!(percentile(&data, 1.0), 4.0);
        assert!((percentile(&data, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn paired_test_edge_cases() {
        let cfg = StatsConfig::default();
        let a = vector(&[1, 0, 1, 1, 0]);
        assert_eq!(paired_bootstrap_test(&a, &a, &cfg).unwrap(), 1.0);
        let ones = vector(&[1; 8]);
        let zeros = vector(&[0; 8]);
        assert!(paired_bootstrap_test(&ones, &zeros, &cfg).unwrap() <= 0.01);
        assert!(matches!(
            paired_bootstrap_test(&a, &ones, &cfg),
            Err(EvalError::LengthMismatch { .. })
        ));
        let shifted = ScoreVector::new(
            "s",
            (1..=5).map(|i| i.to_string()).collect(),
            vec![1, 0, 1, 1, 0],
        )
        .unwrap();
        assert!(matches!(
            paired_bootstrap_test(&a, &shifted, &cfg),
            Err(EvalError::Misaligned { .. })
        ));
    }

    #[test]
    fn paired_test_is_symmetric() {
        let cfg = StatsConfig::default();
        let a = vector(&[1, 1, 0, 1, 0, 1, 1, 0, 1, 1]);
        let b = vector(&[0, 1, 0, 0, 0, 1, 1, 0, 0, 1]);
        assert_eq!(
            paired_bootstrap_test(&a, &b, &cfg).unwrap(),
            paired_bootstrap_test(&b, &a, &cfg).unwrap()
        );
    }

    #[test]
    fn bh_reference_values() {
        let r = bh_fdr(&[0.01, 0.02, 0.04], 0.05).unwrap();
        assert_eq!(r.adjusted, [0.03, 0.03, 0.04]);
        assert_eq!(r.rejected, [true, true, true]);
        let r = bh_fdr(&[1.0], 0.05).unwrap();
        assert_eq!((r.adjusted, r.rejected), (vec![1.0], vec![false]));
        // input order is preserved
        let r = bh_fdr(&[0.04, 0.01, 0.02], 0.05).unwrap();
        assert_eq!(r.adjusted, [0.04, 0.03, 0.03]);
        assert!(bh_fdr(&[0.5, 1.2], 0.05).is_err());
        assert!(bh_fdr(&[f64::NAN], 0.05).is_err());
        assert!(bh_fdr(&[], 0.05).unwrap().adjusted.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(StatsConfig {
            n_resamples: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StatsConfig {
            ci_level: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StatsConfig::default().validate().is_ok());
    }
}
