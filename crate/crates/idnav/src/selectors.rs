//! Probabilistic baseline selectors R1-R9.
//!
//! Each scheme reuses the antigenic antibody alpha computed by the immune
//! machinery and then, with scheme-specific probabilities, swaps it for an
//! alternative antibody mu: uniformly (R1), by roulette over RL scores (R2),
//! or by rank against the dominant antigen (R3-R9). R6 branches on whether
//! the previous antibody was judged successful; R7-R9 branch on stall
//! conditions (antigen 5 or 6 presented this step or last).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("unknown scheme {0:?} (expected r1..r9)")]
    UnknownScheme(String),
    #[error("empty selection log")]
    EmptyLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
}

impl SchemeId {
    pub const ALL: [SchemeId; 9] = [
        SchemeId::R1,
        SchemeId::R2,
        SchemeId::R3,
        SchemeId::R4,
        SchemeId::R5,
        SchemeId::R6,
        SchemeId::R7,
        SchemeId::R8,
        SchemeId::R9,
    ];
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = Self::ALL.iter().position(|s| s == self).unwrap() + 1;
        write!(f, "r{n}")
    }
}

impl FromStr for SchemeId {
    type Err = SelectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.to_string() == lower)
            .ok_or_else(|| SelectorError::UnknownScheme(s.to_string()))
    }
}

/// RL verdict on the previously executed antibody (drives R6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrevOutcome {
    Success,
    Failure,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelectorContext {
    pub previous_outcome: PrevOutcome,
    /// Antigen 5 or 6 presented on the current or previous step.
    pub stall_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankUsed {
    Alpha,
    Second,
    Third,
    Fourth,
    Roulette,
    Uniform,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionOutcome {
    pub chosen: usize,
    pub was_mu: bool,
    pub rank_used: RankUsed,
}

/// Antibody indices ordered by RL score against the dominant antigen,
/// descending, ties to the lowest index.
pub fn rank_candidates(paratope: &Matrix, dominant: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..paratope.rows()).collect();
    order.sort_by(|&a, &b| {
        paratope
            .get(b, dominant)
            .partial_cmp(&paratope.get(a, dominant))
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// Roulette draw proportional to the paratope column for the dominant
/// antigen, re-drawn until the result differs from `exclude`. Falls back to
/// a uniform non-excluded draw when every other score is zero.
pub fn roulette_by_score<R: Rng>(
    paratope: &Matrix,
    dominant: usize,
    exclude: usize,
    rng: &mut R,
) -> usize {
    let n = paratope.rows();
    debug_assert!(n >= 2, "roulette needs an alternative to exclude");
    let scores: Vec<f64> = (0..n).map(|i| paratope.get(i, dominant)).collect();
    let total: f64 = scores.iter().sum();
    let alt_total: f64 = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != exclude)
        .map(|(_, &s)| s)
        .sum();
    if alt_total <= 0.0 {
        log::debug!("degenerate roulette column; uniform over non-alpha");
        return uniform_excluding(n, exclude, rng);
    }
    loop {
        let mut pick = rng.gen_range(0.0..total);
        for (i, &s) in scores.iter().enumerate() {
            if pick < s {
                if i != exclude {
                    return i;
                }
                break;
            }
            pick -= s;
        }
        // Excluded index drawn (or a boundary edge case): repeat.
    }
}

fn uniform_excluding<R: Rng>(n: usize, exclude: usize, rng: &mut R) -> usize {
    let k = rng.gen_range(0..n - 1);
    if k >= exclude {
        k + 1
    } else {
        k
    }
}

/// Probability of choosing the 2nd, 3rd and 4th ranked antibodies for the
/// rank-based schemes, per context branch.
fn rank_probabilities(scheme: SchemeId, ctx: &SelectorContext) -> (f64, f64, f64) {
    match scheme {
        SchemeId::R3 => (0.20, 0.0, 0.0),
        SchemeId::R4 => (0.10, 0.10, 0.0),
        SchemeId::R5 => (0.10, 0.05, 0.05),
        SchemeId::R6 => match ctx.previous_outcome {
            PrevOutcome::Failure => (0.14, 0.07, 0.07),
            // No verdict yet is treated like success (the cautious branch).
            PrevOutcome::Success | PrevOutcome::None => (0.07, 0.035, 0.035),
        },
        SchemeId::R7 => {
            if ctx.stall_window {
                (0.165, 0.0825, 0.0825)
            } else {
                (0.075, 0.0375, 0.0375)
            }
        }
        SchemeId::R8 => {
            if ctx.stall_window {
                (0.25, 0.125, 0.125)
            } else {
                (0.065, 0.0325, 0.0325)
            }
        }
        SchemeId::R9 => {
            if ctx.stall_window {
                (0.375, 0.1875, 0.1875)
            } else {
                (0.01, 0.005, 0.005)
            }
        }
        SchemeId::R1 | SchemeId::R2 => unreachable!("not rank-based"),
    }
}

/// Apply one scheme for one control step.
pub fn select_scheme<R: Rng>(
    scheme: SchemeId,
    paratope: &Matrix,
    dominant: usize,
    alpha: usize,
    ctx: &SelectorContext,
    rng: &mut R,
) -> SelectionOutcome {
    let n = paratope.rows();
    let outcome = |chosen: usize, rank_used: RankUsed| SelectionOutcome {
        chosen,
        was_mu: chosen != alpha,
        rank_used,
    };
    if n < 2 {
        return outcome(alpha, RankUsed::Alpha);
    }
    match scheme {
        SchemeId::R1 => {
            if rng.gen::<f64>() < 0.20 {
                outcome(uniform_excluding(n, alpha, rng), RankUsed::Uniform)
            } else {
                outcome(alpha, RankUsed::Alpha)
            }
        }
        SchemeId::R2 => {
            if rng.gen::<f64>() < 0.20 {
                outcome(roulette_by_score(paratope, dominant, alpha, rng), RankUsed::Roulette)
            } else {
                outcome(alpha, RankUsed::Alpha)
            }
        }
        _ => {
            let (p2, p3, p4) = rank_probabilities(scheme, ctx);
            let u = rng.gen::<f64>();
            let rank = if u < p2 {
                Some((1, RankUsed::Second))
            } else if u < p2 + p3 {
                Some((2, RankUsed::Third))
            } else if u < p2 + p3 + p4 {
                Some((3, RankUsed::Fourth))
            } else {
                None
            };
            match rank {
                Some((pos, used)) => {
                    let order = rank_candidates(paratope, dominant);
                    // With fewer than five antibodies, deeper ranks fold onto
                    // the deepest available one.
                    let pos = if pos >= n {
                        log::debug!("rank {pos} folded onto deepest available ({})", n - 1);
                        n - 1
                    } else {
                        pos
                    };
                    outcome(order[pos], used)
                }
                None => outcome(alpha, RankUsed::Alpha),
            }
        }
    }
}

/// Fraction of logged selections that rejected alpha.
pub fn observed_mu_rate(log: &[SelectionOutcome]) -> Result<f64, SelectorError> {
    if log.is_empty() {
        return Err(SelectorError::EmptyLog);
    }
    let mu = log.iter().filter(|o| o.was_mu).count();
    Ok(mu as f64 / log.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::matrix::Matrix;

    fn column(vals: &[f64]) -> Matrix {
        Matrix::from_rows(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("r1".parse::<SchemeId>().unwrap(), SchemeId::R1);
        assert_eq!("R9".parse::<SchemeId>().unwrap(), SchemeId::R9);
        assert!("r10".parse::<SchemeId>().is_err());
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_candidates(&column(&[0.1, 0.9, 0.5]), 0), vec![1, 2, 0]);
        assert_eq!(rank_candidates(&column(&[0.5, 0.5, 0.5]), 0), vec![0, 1, 2]);
        assert_eq!(rank_candidates(&column(&[0.3]), 0), vec![0]);
    }

    #[test]
    fn roulette_distribution() {
        let p = column(&[0.5, 0.3, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            counts[roulette_by_score(&p, 0, 0, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        let f1 = counts[1] as f64 / draws as f64;
        let f2 = counts[2] as f64 / draws as f64;
        assert!((f1 - 0.6).abs() < 0.01, "f1={f1}");
        assert!((f2 - 0.4).abs() < 0.01, "f2={f2}");
    }

    #[test]
    fn roulette_degenerate_uniform() {
        let p = column(&[1.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[roulette_by_score(&p, 0, 0, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!((counts[1] as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn roulette_two_antibodies() {
        let p = column(&[0.9, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(roulette_by_score(&p, 0, 0, &mut rng), 1);
        }
    }

    fn empirical(scheme: SchemeId, ctx: &SelectorContext, draws: usize) -> Vec<f64> {
        let p = column(&[0.9, 0.8, 0.7, 0.6, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; 5];
        for _ in 0..draws {
            let o = select_scheme(scheme, &p, 0, 0, ctx, &mut rng);
            counts[o.chosen] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn r8_stall_branch_probabilities() {
        let ctx = SelectorContext {
            stall_window: true,
            ..Default::default()
        };
        let f = empirical(SchemeId::R8, &ctx, 100_000);
        assert!((f[0] - 0.50).abs() < 0.01);
        assert!((f[1] - 0.25).abs() < 0.01);
        assert!((f[2] - 0.125).abs() < 0.01);
        assert!((f[3] - 0.125).abs() < 0.01);
    }

    #[test]
    fn r1_overall_mu_rate() {
        let f = empirical(SchemeId::R1, &SelectorContext::default(), 100_000);
        assert!((f[0] - 0.80).abs() < 0.005, "alpha freq {}", f[0]);
    }

    #[test]
    fn r9_calm_branch_alpha_rate() {
        let f = empirical(SchemeId::R9, &SelectorContext::default(), 100_000);
        assert!((f[0] - 0.98).abs() < 0.005);
    }

    #[test]
    fn r3_alternative_is_deterministic() {
        let p = column(&[0.2, 0.9, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let o = select_scheme(SchemeId::R3, &p, 0, 1, &SelectorContext::default(), &mut rng);
            if o.was_mu {
                assert_eq!(o.chosen, 2); // 2nd best by score
                assert_eq!(o.rank_used, RankUsed::Second);
            } else {
                assert_eq!(o.chosen, 1);
            }
        }
    }

    #[test]
    fn rank_folding_small_system() {
        let p = column(&[0.9, 0.1]);
        let ctx = SelectorContext {
            stall_window: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let o = select_scheme(SchemeId::R9, &p, 0, 0, &ctx, &mut rng);
            assert!(o.chosen < 2);
        }
    }

    #[test]
    fn mu_rate_counts() {
        let mk = |was_mu| SelectionOutcome {
            chosen: usize::from(was_mu),
            was_mu,
            rank_used: RankUsed::Alpha,
        };
        let mut log = vec![mk(false); 80];
        log.extend(vec![mk(true); 20]);
        assert!((observed_mu_rate(&log).unwrap() - 0.20).abs() < 1e-12);
        assert_eq!(observed_mu_rate(&vec![mk(false); 10]).unwrap(), 0.0);
        assert!(observed_mu_rate(&[]).is_err());
    }

    #[test]
    fn rank_scale_invariance() {
        let a = column(&[0.1, 0.9, 0.5]);
        let b = column(&[0.3, 2.7, 1.5]);
        assert_eq!(rank_candidates(&a, 0), rank_candidates(&b, 0));
    }
}
