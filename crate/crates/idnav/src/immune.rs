//! Reduced idiotypic immune network.
//!
//! Antibodies carry an RL-learned paratope row (match scores against each
//! antigen) and a fixed idiotope row (disallowed antibody-antigen
//! combinations). Each control step the antigenic antibody `alpha` with the
//! best raw match is found, suppression and stimulation between `alpha` and
//! the competing antibodies adjust every antibody's global strength, the
//! concentrations are updated and renormalized, and the antibody `beta` with
//! the highest concentration is executed. When the idiotope is active,
//! `beta` differs from `alpha` part of the time; that difference is the
//! behaviour-arbitration mechanism under study.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::Matrix;

/// Default concentration floor; antibodies are never removed, so they must
/// stay recoverable under strong suppression.
pub const CONCENTRATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ImmuneError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid presentation: {0}")]
    Presentation(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("idiotope values must be 0, 0.5 or 1 (got {0})")]
    IdiotopeValue(f64),
}

/// How concentrations are rescaled after each update.
///
/// `TotalN` keeps the total clone count at N (every concentration starts and
/// averages 1.00); `TotalOne` is the literal sum-to-one normalization. Beta
/// selection is scale invariant, so both give the same argmax after a single
/// update, but the products C(x_i)C(x_alpha) feeding suppression and
/// stimulation differ in magnitude. `TotalN` is the default operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    TotalN,
    TotalOne,
}

#[derive(Debug, Clone, Copy)]
pub struct ImmuneParams {
    /// Rate constant b.
    pub b: f64,
    /// Suppression balance k1 in [0, 1].
    pub k1: f64,
    /// Death rate k2 in (0, 1).
    pub k2: f64,
    pub num_antibodies: usize,
    pub num_antigens: usize,
    pub normalization: Normalization,
    /// Concentration floor epsilon.
    pub floor: f64,
}

impl Default for ImmuneParams {
    fn default() -> Self {
        ImmuneParams {
            b: 80.0,
            k1: 0.65,
            k2: 0.05,
            num_antibodies: 16,
            num_antigens: 8,
            normalization: Normalization::TotalN,
            floor: CONCENTRATION_FLOOR,
        }
    }
}

impl ImmuneParams {
    pub fn validate(&self) -> Result<(), ImmuneError> {
        if self.b <= 0.0
            || !(0.0..=1.0).contains(&self.k1)
            || self.k2 <= 0.0
            || self.k2 >= 1.0
            || self.num_antibodies == 0
            || self.num_antigens == 0
            || self.floor < 0.0
        {
            return Err(ImmuneError::Dimension(format!(
                "bad parameters: b={} k1={} k2={} N={} L={}",
                self.b, self.k1, self.k2, self.num_antibodies, self.num_antigens
            )));
        }
        Ok(())
    }
}

/// The presenting antigen set for one control step, with the dominant index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntigenPresentation {
    presenting: Vec<usize>,
    dominant: Option<usize>,
}

impl AntigenPresentation {
    pub fn new(presenting: &[usize], dominant: usize) -> Result<Self, ImmuneError> {
        let mut p = presenting.to_vec();
        p.sort_unstable();
        p.dedup();
        if !p.contains(&dominant) {
            return Err(ImmuneError::Presentation(format!(
                "dominant antigen {dominant} not in presenting set {p:?}"
            )));
        }
        Ok(AntigenPresentation {
            presenting: p,
            dominant: Some(dominant),
        })
    }

    pub fn empty() -> Self {
        AntigenPresentation {
            presenting: Vec::new(),
            dominant: None,
        }
    }

    pub fn presenting(&self) -> &[usize] {
        &self.presenting
    }

    pub fn dominant(&self) -> Option<usize> {
        self.dominant
    }

    pub fn contains(&self, antigen: usize) -> bool {
        self.presenting.binary_search(&antigen).is_ok()
    }
}

/// Antigen weight array G: 2 for the dominant antigen when the antibody has a
/// nonzero paratope score against it (0 otherwise), 0.25 for every other
/// presenting antigen, 0 for non-presenting antigens.
pub fn antigen_weights(presentation: &AntigenPresentation, paratope: &Matrix) -> Matrix {
    let (n, l) = (paratope.rows(), paratope.cols());
    let mut g = Matrix::zeros(n, l);
    for &j in presentation.presenting() {
        for i in 0..n {
            let w = if Some(j) == presentation.dominant() {
                if paratope.get(i, j) > 0.0 {
                    2.0
                } else {
                    0.0
                }
            } else {
                0.25
            };
            g.set(i, j, w);
        }
    }
    g
}

/// Raw strength of match S1 per antibody: sum over antigens of P * G.
pub fn match_strength_s1(paratope: &Matrix, weights: &Matrix) -> Vec<f64> {
    let (n, l) = (paratope.rows(), paratope.cols());
    assert_eq!((weights.rows(), weights.cols()), (n, l), "shape mismatch");
    (0..n)
        .map(|i| (0..l).map(|j| paratope.get(i, j) * weights.get(i, j)).sum())
        .collect()
}

/// Antigenic antibody alpha: argmax of S1, ties to the lowest index.
/// Returns `(index, degenerate)` where degenerate flags an all-zero S1.
pub fn select_alpha(s1: &[f64]) -> (usize, bool) {
    let alpha = argmax(s1);
    let degenerate = s1.iter().all(|&v| v == 0.0);
    if degenerate {
        log::debug!("degenerate all-zero S1; alpha falls back to index 0");
    }
    (alpha, degenerate)
}

/// Competing antibodies H: every antibody other than alpha with a nonzero
/// paratope match to the presenting antigen set.
pub fn competing_set(
    paratope: &Matrix,
    presentation: &AntigenPresentation,
    alpha: usize,
) -> Vec<bool> {
    (0..paratope.rows())
        .map(|i| {
            i != alpha
                && presentation
                    .presenting()
                    .iter()
                    .map(|&j| paratope.get(i, j))
                    .sum::<f64>()
                    > 0.0
        })
        .collect()
}

/// Suppression S2 of each competing antibody by alpha's paratope against the
/// antibody's own idiotope.
pub fn suppression_s2(
    paratope: &Matrix,
    idiotope: &Matrix,
    alpha: usize,
    competing: &[bool],
    concentrations: &[f64],
) -> Vec<f64> {
    let (n, l) = (paratope.rows(), paratope.cols());
    let c_alpha = concentrations[alpha];
    (0..n)
        .map(|i| {
            if !competing[i] {
                return 0.0;
            }
            let sum: f64 = (0..l)
                .map(|m| paratope.get(alpha, m) * idiotope.get(i, m))
                .sum();
            sum * concentrations[i] * c_alpha
        })
        .collect()
}

/// Stimulation S3 of each competing antibody from alpha's idiotope against
/// the antibody's paratope mismatch (1 - P).
pub fn stimulation_s3(
    paratope: &Matrix,
    idiotope: &Matrix,
    alpha: usize,
    competing: &[bool],
    concentrations: &[f64],
) -> Vec<f64> {
    let (n, l) = (paratope.rows(), paratope.cols());
    let c_alpha = concentrations[alpha];
    (0..n)
        .map(|i| {
            if !competing[i] {
                return 0.0;
            }
            let sum: f64 = (0..l)
                .map(|p| (1.0 - paratope.get(i, p)) * idiotope.get(alpha, p))
                .sum();
            sum * concentrations[i] * c_alpha
        })
        .collect()
}

/// Global strength of match: Sg = S1 - k1*S2 + S3.
pub fn global_strength(s1: &[f64], s2: &[f64], s3: &[f64], k1: f64) -> Vec<f64> {
    s1.iter()
        .zip(s2)
        .zip(s3)
        .map(|((&a, &b), &c)| a - k1 * b + c)
        .collect()
}

/// Discrete concentration update: C' = C + b*Sg - k2*C, clamped at the floor.
pub fn update_concentrations(
    concentrations: &[f64],
    sg: &[f64],
    params: &ImmuneParams,
) -> Result<Vec<f64>, ImmuneError> {
    if sg.iter().any(|v| !v.is_finite()) {
        return Err(ImmuneError::NonFinite("global strength"));
    }
    Ok(concentrations
        .iter()
        .zip(sg)
        .map(|(&c, &g)| (c + params.b * g - params.k2 * c).max(params.floor))
        .collect())
}

/// Rescale concentrations so they sum to the configured target (N or 1).
pub fn normalize(concentrations: &[f64], params: &ImmuneParams) -> Vec<f64> {
    let target = match params.normalization {
        Normalization::TotalN => concentrations.len() as f64,
        Normalization::TotalOne => 1.0,
    };
    let sum: f64 = concentrations.iter().sum();
    if sum <= 0.0 {
        // Unreachable with a positive floor; kept so a zero-floor
        // configuration cannot divide by zero.
        log::warn!("concentration sum non-positive; resetting to ones");
        return vec![target / concentrations.len() as f64; concentrations.len()];
    }
    concentrations.iter().map(|&c| target * c / sum).collect()
}

/// Executed antibody beta: highest normalized concentration, ties to the
/// lowest index.
pub fn select_beta(concentrations: &[f64]) -> usize {
    argmax(concentrations)
}

/// RL paratope update for the executed antibody against the dominant
/// antigen: P[selected][d] = max(0, P[selected][d] + tau).
pub fn reinforce(paratope: &mut Matrix, selected: usize, dominant: usize, tau: f64) {
    let v = (paratope.get(selected, dominant) + tau).max(0.0);
    paratope.set(selected, dominant, v);
}

fn argmax(values: &[f64]) -> usize {
    assert!(!values.is_empty());
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The fixed 16x8 idiotope: 0.50 for the antibody-antigen pairs
/// 0-0, 0-2, 10-0, 10-2, 14-0, 14-2, 15-0, 15-2 and 1.00 for
/// 1-2, 2-0, 3-1, 4-0, 5-2, 6-2, 7-0, 8-0, 9-2, 11-5, 12-5, 13-5.
pub fn default_idiotope() -> Matrix {
    let mut m = Matrix::zeros(16, 8);
    for &(i, j) in &[
        (0, 0),
        (0, 2),
        (10, 0),
        (10, 2),
        (14, 0),
        (14, 2),
        (15, 0),
        (15, 2),
    ] {
        m.set(i, j, 0.5);
    }
    for &(i, j) in &[
        (1, 2),
        (2, 0),
        (3, 1),
        (4, 0),
        (5, 2),
        (6, 2),
        (7, 0),
        (8, 0),
        (9, 2),
        (11, 5),
        (12, 5),
        (13, 5),
    ] {
        m.set(i, j, 1.0);
    }
    m
}

pub fn validate_idiotope(m: &Matrix) -> Result<(), ImmuneError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            if v != 0.0 && v != 0.5 && v != 1.0 {
                return Err(ImmuneError::IdiotopeValue(v));
            }
        }
    }
    Ok(())
}

/// Random initial paratope with entries uniform in [0.50, 0.75],
/// deterministic per seed.
pub fn random_paratope(n: usize, l: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(0.50, 0.75);
    let mut m = Matrix::zeros(n, l);
    for i in 0..n {
        for j in 0..l {
            m.set(i, j, dist.sample(&mut rng));
        }
    }
    m
}

/// One full idiotypic step's outcome.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub alpha: usize,
    pub beta: usize,
    /// Whether alpha differed from beta (an idiotypic difference).
    pub differed: bool,
    /// Alpha came from the all-zero-S1 fallback.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ImmuneState {
    pub paratope: Matrix,
    pub idiotope: Matrix,
    pub concentrations: Vec<f64>,
    pub params: ImmuneParams,
}

impl ImmuneState {
    pub fn new(paratope: Matrix, idiotope: Matrix, params: ImmuneParams) -> Result<Self, ImmuneError> {
        params.validate()?;
        validate_idiotope(&idiotope)?;
        if paratope.rows() != params.num_antibodies
            || paratope.cols() != params.num_antigens
            || idiotope.rows() != params.num_antibodies
            || idiotope.cols() != params.num_antigens
        {
            return Err(ImmuneError::Dimension(format!(
                "paratope {}x{}, idiotope {}x{}, params {}x{}",
                paratope.rows(),
                paratope.cols(),
                idiotope.rows(),
                idiotope.cols(),
                params.num_antibodies,
                params.num_antigens
            )));
        }
        let concentrations = vec![1.0; params.num_antibodies];
        Ok(ImmuneState {
            paratope,
            idiotope,
            concentrations,
            params,
        })
    }

    /// Seed a default 16x8 system: Table-fixed idiotope, random paratope.
    pub fn seeded(paratope_seed: u64, params: ImmuneParams) -> Result<Self, ImmuneError> {
        let paratope = random_paratope(params.num_antibodies, params.num_antigens, paratope_seed);
        let idiotope = if (params.num_antibodies, params.num_antigens) == (16, 8) {
            default_idiotope()
        } else {
            Matrix::zeros(params.num_antibodies, params.num_antigens)
        };
        ImmuneState::new(paratope, idiotope, params)
    }

    /// Run the full arbitration chain for one presentation and update the
    /// concentrations in place.
    pub fn step(&mut self, presentation: &AntigenPresentation) -> Result<StepReport, ImmuneError> {
        let g = antigen_weights(presentation, &self.paratope);
        let s1 = match_strength_s1(&self.paratope, &g);
        let (mut alpha, degenerate) = select_alpha(&s1);
        if degenerate {
            alpha = self.degenerate_alpha(presentation);
        }
        let h = competing_set(&self.paratope, presentation, alpha);
        let s2 = suppression_s2(&self.paratope, &self.idiotope, alpha, &h, &self.concentrations);
        let s3 = stimulation_s3(&self.paratope, &self.idiotope, alpha, &h, &self.concentrations);
        let sg = global_strength(&s1, &s2, &s3, self.params.k1);
        let updated = update_concentrations(&self.concentrations, &sg, &self.params)?;
        self.concentrations = normalize(&updated, &self.params);
        let beta = select_beta(&self.concentrations);
        Ok(StepReport {
            alpha,
            beta,
            differed: alpha != beta,
            degenerate,
        })
    }

    // Lowest-index antibody with a nonzero paratope against the dominant
    // antigen, else 0.
    fn degenerate_alpha(&self, presentation: &AntigenPresentation) -> usize {
        if let Some(d) = presentation.dominant() {
            for i in 0..self.paratope.rows() {
                if self.paratope.get(i, d) > 0.0 {
                    return i;
                }
            }
        }
        0
    }
}
