//! Black-box lower bound on epsilon from repeated end-to-end runs.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::DistAuditError;
use crate::exec::{map_indexed, Execution};
use crate::rng::DpRng;

const BLACKBOX_STREAM: u64 = 0xB1AC_B0C5;

/// Which side of the threshold is guessed to be the second dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackboxConfig {
    pub runs: usize,
    pub delta: f64,
    /// Total miss probability of the two confidence bounds.
    pub gamma: f64,
    pub seed: u64,
    /// Thresholds tried on the selection half.
    pub candidates: usize,
}

impl BlackboxConfig {
    pub fn new(runs: usize, delta: f64, gamma: f64, seed: u64) -> Self {
        Self { runs, delta, gamma, seed, candidates: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxResult {
    #[serde(with = "crate::float_repr")]
    pub eps_lower: f64,
    #[serde(with = "crate::float_repr")]
    pub threshold: f64,
    pub direction: Direction,
    pub alpha_upper: f64,
    pub beta_upper: f64,
    /// Every run produced the same score.
    pub degenerate: bool,
}

/// One-sided Clopper-Pearson upper bound on a binomial rate after `x` successes in `n` trials.
pub fn clopper_pearson_upper(x: usize, n: usize, miss: f64) -> f64 {
    if n == 0 || x >= n {
        return 1.0;
    }
    if x == 0 {
        return 1.0 - miss.powf(1.0 / n as f64);
    }
    let (a, b) = ((x + 1) as f64, (n - x) as f64);
    let (mut lo, mut hi) = (x as f64 / n as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < 1.0 - miss {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

/// `max(ln((1 - a - d) / b), ln((1 - b - d) / a), 0)`, skipping terms with a non-positive numerator.
pub fn epsilon_from_errors(alpha_ub: f64, beta_ub: f64, delta: f64) -> f64 {
    let term = |num: f64, den: f64| if num > 0.0 { (num / den).ln() } else { f64::NEG_INFINITY };
    term(1.0 - alpha_ub - delta, beta_ub).max(term(1.0 - beta_ub - delta, alpha_ub)).max(0.0)
}

struct Counts {
    false_pos: usize,
    negatives: usize,
    false_neg: usize,
    positives: usize,
}

fn count(runs: &[(bool, f64)], t: f64, dir: Direction) -> Counts {
    let mut c = Counts { false_pos: 0, negatives: 0, false_neg: 0, positives: 0 };
    for &(bit, s) in runs {
        let guess = match dir {
            Direction::Above => s > t,
            Direction::Below => s < t,
        };
        if bit {
            c.positives += 1;
            c.false_neg += usize::from(!guess);
        } else {
            c.negatives += 1;
            c.false_pos += usize::from(guess);
        }
    }
    c
}

fn bound(c: &Counts, cfg: &BlackboxConfig) -> (f64, f64, f64) {
    let a = clopper_pearson_upper(c.false_pos, c.negatives, cfg.gamma / 2.0);
    let b = clopper_pearson_upper(c.false_neg, c.positives, cfg.gamma / 2.0);
    (epsilon_from_errors(a, b, cfg.delta), a, b)
}

/// Runs `mechanism(bit, seed)` `runs` times with a fair random bit choosing
/// the dataset, picks a threshold on the first half and bounds its errors on
/// the second half.
pub fn blackbox_audit<F>(mechanism: F, cfg: &BlackboxConfig, exec: Execution) -> Result<BlackboxResult, DistAuditError>
where
    F: Fn(bool, u64) -> Result<f64, String> + Sync + Send,
{
    if cfg.runs < 100 {
        return Err(DistAuditError::InvalidConfig(format!("runs = {} (need at least 100)", cfg.runs)));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(DistAuditError::InvalidConfig(format!("gamma = {}", cfg.gamma)));
    }
    let runs: Vec<(bool, f64)> = map_indexed(cfg.runs, exec, |r| {
        let mut rng = DpRng::child(cfg.seed, BLACKBOX_STREAM, r as u64);
        let bit = rng.uniform() < 0.5;
        let score = mechanism(bit, rng.next_u64())?;
        Ok((bit, score))
    })
    .into_iter()
    .collect::<Result<_, String>>()
    .map_err(DistAuditError::Pipeline)?;
    if runs.iter().any(|r| r.1.is_nan()) {
        return Err(DistAuditError::Scoring("NaN rank score".into()));
    }
    let first = runs[0].1;
    if runs.iter().all(|r| r.1.to_bits() == first.to_bits()) {
        log::warn!("all {} black-box runs produced the same score; no signal", runs.len());
        return Ok(BlackboxResult {
            eps_lower: 0.0,
            threshold: first,
            direction: Direction::Above,
            alpha_upper: 1.0,
            beta_upper: 1.0,
            degenerate: true,
        });
    }
    let (select, evaluate) = runs.split_at(runs.len() / 2);
    let mut sorted: Vec<f64> = select.iter().map(|r| r.1).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut thresholds: Vec<f64> = if sorted.len() < 2 {
        vec![sorted[0]]
    } else {
        let gaps = sorted.len() - 1;
        let picks = cfg.candidates.min(gaps).max(1);
        (0..picks)
            .map(|i| {
                let g = i * gaps / picks;
                0.5 * (sorted[g] + sorted[g + 1])
            })
            .collect()
    };
    thresholds.dedup();
    let mut best = (f64::NEG_INFINITY, thresholds[0], Direction::Above);
    for &t in &thresholds {
        for dir in [Direction::Above, Direction::Below] {
            let (eps, _, _) = bound(&count(select, t, dir), cfg);
            if eps > best.0 {
                best = (eps, t, dir);
            }
        }
    }
    let (_, t, dir) = best;
    let (eps, a, b) = bound(&count(evaluate, t, dir), cfg);
    Ok(BlackboxResult { eps_lower: eps, threshold: t, direction: dir, alpha_upper: a, beta_upper: b, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_zero_errors_closed_form() {
        let u = clopper_pearson_upper(0, 250, 0.025);
        assert!((u - (1.0 - 0.025f64.powf(1.0 / 250.0))).abs() < 1e-15);
        assert_eq!(clopper_pearson_upper(5, 5, 0.05), 1.0);
    }

    #[test]
    fn constant_mechanism_gives_zero() {
        let r = blackbox_audit(|_, _| Ok(3.0), &BlackboxConfig::new(200, 0.0, 0.05, 1), Execution::Sequential).unwrap();
        assert_eq!(r.eps_lower, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn bit_leak_gives_large_bound() {
        let r = blackbox_audit(|b, _| Ok(f64::from(u8::from(b))), &BlackboxConfig::new(1000, 0.0, 0.05, 7), Execution::Sequential)
            .unwrap();
        assert!(r.eps_lower >= 4.0, "{}", r.eps_lower);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(blackbox_audit(|_, _| Ok(0.0), &BlackboxConfig::new(10, 0.0, 0.05, 1), Execution::Sequential).is_err());
        assert!(blackbox_audit(|_, _| Ok(0.0), &BlackboxConfig::new(100, 0.0, 1.5, 1), Execution::Sequential).is_err());
    }
}
