//! Weighted input sampling under the three strategies: standard (the
//! orthogonality measure itself), asymptotic (uniform ball for Hermite,
//! coordinate-wise Chebyshev for Legendre), and coherence-optimal
//! (independence Metropolis-Hastings targeting the density proportional to
//! `f * B^2`).
//!
//! Every sampler is a pure function of `(basis, N, seed)` and produces
//! bit-identical output on identical inputs. Batches drawn with the same
//! seed are prefix-consistent: the first `n` points of a larger request
//! equal the smaller request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::basis::{Family, PcBasis, RowEvaluator};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which sampling strategy produced a batch; carries no configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// Draws from the orthogonality measure with unit weights.
    Standard,
    /// Draws suggested by large-order asymptotics, with compensating weights.
    Asymptotic,
    /// Markov chain targeting the density proportional to `f * B^2`,
    /// with weights `1/B`.
    CoherenceOptimal,
}

impl StrategyKind {
    /// Lowercase name used in CSV output and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Standard => "standard",
            StrategyKind::Asymptotic => "asymptotic",
            StrategyKind::CoherenceOptimal => "coherence-optimal",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Proposal distribution for the coherence-optimal chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Propose from the orthogonality measure.
    Standard,
    /// Propose from the asymptotic sampler (ball or Chebyshev).
    Asymptotic,
}

/// Configuration of the coherence-optimal Metropolis-Hastings chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McmcConfig {
    /// Leading chain states discarded before any sample is kept.
    pub burn_in: usize,
    /// Chain steps taken between kept samples; 1 keeps every state.
    pub thinning: usize,
    /// Proposal distribution; `None` picks Standard when `p <= d` and
    /// Asymptotic otherwise.
    pub proposal: Option<Proposal>,
    /// Restart the chain from scratch for every kept sample, giving fully
    /// independent draws at burn-in cost per sample.
    pub independent_restarts: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 1000,
            thinning: 10,
            proposal: None,
            independent_restarts: false,
        }
    }
}

impl McmcConfig {
    /// The proposal that will actually run for the given basis shape.
    pub fn resolved_proposal(&self, d: usize, p: usize) -> Proposal {
        self.proposal
            .unwrap_or(if p <= d { Proposal::Standard } else { Proposal::Asymptotic })
    }

    fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::InvalidParameter {
                name: "thinning",
                reason: "thinning must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Sampling strategy selector, carrying the chain configuration when the
/// coherence-optimal sampler is requested.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingStrategy {
    /// Orthogonality measure, unit weights.
    Standard,
    /// Uniform ball (Hermite) or Chebyshev (Legendre) with compensating
    /// weights.
    Asymptotic,
    /// Metropolis-Hastings chain targeting `f * B^2`, weights `1/B`.
    CoherenceOptimal(McmcConfig),
}

impl SamplingStrategy {
    /// Coherence-optimal sampling with the default chain configuration.
    pub fn coherence_optimal() -> Self {
        SamplingStrategy::CoherenceOptimal(McmcConfig::default())
    }

    /// The bare strategy kind.
    pub fn kind(&self) -> StrategyKind {
        match self {
            SamplingStrategy::Standard => StrategyKind::Standard,
            SamplingStrategy::Asymptotic => StrategyKind::Asymptotic,
            SamplingStrategy::CoherenceOptimal(_) => StrategyKind::CoherenceOptimal,
        }
    }
}

/// N weighted input points produced by one sampling strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch<T> {
    points: Vec<T>,
    weights: Vec<T>,
    d: usize,
    kind: StrategyKind,
    seed: u64,
    acceptance_rate: Option<f64>,
    lag1_autocorr: Option<f64>,
}

impl<T: Real> SampleBatch<T> {
    /// Builds a batch from flat row-major points and per-point weights,
    /// for example when reading a sample file back in. Weights must be
    /// strictly positive and finite; points must be finite.
    pub fn from_parts(
        points: Vec<T>,
        weights: Vec<T>,
        d: usize,
        kind: StrategyKind,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if points.len() != weights.len() * d {
            return Err(Error::LengthMismatch {
                name: "points",
                expected: weights.len() * d,
                got: points.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "a batch needs at least one point".into(),
            });
        }
        for (i, &x) in points.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::OutsideDomain {
                    index: i / d,
                    value: x.to_f64_lossy(),
                });
            }
        }
        for &w in &weights {
            if !(w.is_finite() && w > T::zero()) {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: "weights must be positive and finite".into(),
                });
            }
        }
        Ok(SampleBatch {
            points,
            weights,
            d,
            kind,
            seed,
            acceptance_rate: None,
            lag1_autocorr: None,
        })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the batch holds no points; samplers never produce this.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Input dimension.
    pub fn dimension(&self) -> usize {
        self.d
    }

    /// The i-th point as a slice of length `d`.
    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Iterator over the points in draw order.
    pub fn iter_points(&self) -> impl Iterator<Item = &[T]> {
        self.points.chunks_exact(self.d)
    }

    /// Per-point weights, strictly positive and finite.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Strategy that produced the batch.
    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Seed the batch was drawn with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Post-burn-in acceptance rate of the chain; `None` for non-MCMC
    /// strategies.
    pub fn acceptance_rate(&self) -> Option<f64> {
        self.acceptance_rate
    }

    /// Lag-1 autocorrelation of the envelope `B` along the kept samples, a
    /// residual-dependence diagnostic; `None` for non-MCMC strategies and
    /// for degenerate chains (fewer than two samples or constant `B`).
    pub fn lag1_autocorr(&self) -> Option<f64> {
        self.lag1_autocorr
    }

    /// The first `n` points as their own batch. Samplers draw point by
    /// point, so this equals the batch a direct size-`n` request produces.
    pub fn prefix(&self, n: usize) -> SampleBatch<T> {
        assert!(n <= self.len(), "prefix length exceeds batch size");
        SampleBatch {
            points: self.points[..n * self.d].to_vec(),
            weights: self.weights[..n].to_vec(),
            d: self.d,
            kind: self.kind,
            seed: self.seed,
            acceptance_rate: self.acceptance_rate,
            lag1_autocorr: self.lag1_autocorr,
        }
    }
}

/// Deterministic seed derivation for named substreams: replications, grid
/// cells, and strategy lanes each get an independent stream from one root
/// seed. Built on splitmix64 so the map is stable across platforms.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = root;
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn require_positive_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "sample count must be at least 1".into(),
        });
    }
    Ok(())
}

/// Draws from the orthogonality measure: d-variate standard normal for
/// Hermite, uniform on `[-1,1]^d` for Legendre. All weights are 1.
pub fn sample_standard<T: Real>(basis: &PcBasis<T>, n: usize, seed: u64) -> Result<SampleBatch<T>> {
    require_positive_n(n)?;
    let d = basis.dimension();
    let mut rng = rng_for(seed);
    let mut points = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..d {
            points.push(draw_base_coordinate(basis.family(), &mut rng));
        }
    }
    Ok(SampleBatch {
        points,
        weights: vec![T::one(); n],
        d,
        kind: StrategyKind::Standard,
        seed,
        acceptance_rate: None,
        lag1_autocorr: None,
    })
}

fn draw_base_coordinate<T: Real, R: Rng>(family: Family, rng: &mut R) -> T {
    match family {
        Family::Hermite => T::standard_normal(rng),
        Family::Legendre => {
            let two = T::from_f64_lossy(2.0);
            two * T::unit_uniform(rng) - T::one()
        }
    }
}

/// N points uniform in the d-dimensional ball of radius `r`, as a flat
/// row-major `N x d` buffer. Each point is `(Z/||Z||) * r * U^(1/d)` with Z
/// standard normal and U uniform.
pub fn sample_ball<T: Real>(d: usize, r: T, n: usize, seed: u64) -> Result<Vec<T>> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "ball radius must be positive".into(),
        });
    }
    require_positive_n(n)?;
    let mut rng = rng_for(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut z = vec![T::zero(); d];
    for _ in 0..n {
        ball_point(d, r, &mut rng, &mut z);
        points.extend_from_slice(&z);
    }
    Ok(points)
}

fn ball_point<T: Real, R: Rng>(d: usize, r: T, rng: &mut R, out: &mut [T]) {
    loop {
        let mut norm_sq = T::zero();
        for slot in out.iter_mut() {
            let g = T::standard_normal(rng);
            *slot = g;
            norm_sq = norm_sq + g * g;
        }
        if norm_sq > T::zero() {
            let u = T::unit_uniform(rng);
            let exponent = T::from_f64_lossy(1.0 / d as f64);
            let scale = r * u.powf(exponent) / norm_sq.sqrt();
            for slot in out.iter_mut() {
                *slot = *slot * scale;
            }
            return;
        }
    }
}

/// Radius of the Hermite asymptotic sampling ball, `sqrt(2(2p+1))`.
pub fn hermite_ball_radius(p: usize) -> f64 {
    (2.0 * (2.0 * p as f64 + 1.0)).sqrt()
}

/// Asymptotic sampling: uniform ball of radius `sqrt(2(2p+1))` with weights
/// `exp(-||xi||^2/4)` for Hermite; coordinate-wise Chebyshev draws
/// `cos(pi U)` with weights `prod (1-xi_i^2)^(1/4)` for Legendre.
pub fn sample_asymptotic<T: Real>(
    basis: &PcBasis<T>,
    n: usize,
    seed: u64,
) -> Result<SampleBatch<T>> {
    sample_asymptotic_with_scale(basis, n, T::one(), seed)
}

/// Asymptotic sampling with the Hermite ball radius multiplied by `scale`.
/// The default multiplier 1 reproduces the nominal radius; the knob exists
/// because the optimal inflation is an open methodological question.
/// Ignored for Legendre.
pub fn sample_asymptotic_with_scale<T: Real>(
    basis: &PcBasis<T>,
    n: usize,
    scale: T,
    seed: u64,
) -> Result<SampleBatch<T>> {
    require_positive_n(n)?;
    if !(scale > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: "radius multiplier must be positive".into(),
        });
    }
    let d = basis.dimension();
    match basis.family() {
        Family::Hermite => {
            if basis.order() == 0 {
                return Err(Error::InvalidParameter {
                    name: "p",
                    reason: "asymptotic Hermite sampling needs order p >= 1".into(),
                });
            }
            let r = T::from_f64_lossy(hermite_ball_radius(basis.order())) * scale;
            let points = sample_ball(d, r, n, seed)?;
            let quarter = T::from_f64_lossy(0.25);
            let weights = points
                .chunks_exact(d)
                .map(|point| {
                    let norm_sq = point.iter().fold(T::zero(), |acc, &x| acc + x * x);
                    (-(norm_sq) * quarter).exp()
                })
                .collect();
            Ok(SampleBatch {
                points,
                weights,
                d,
                kind: StrategyKind::Asymptotic,
                seed,
                acceptance_rate: None,
                lag1_autocorr: None,
            })
        }
        Family::Legendre => {
            let mut rng = rng_for(seed);
            let mut points = Vec::with_capacity(n * d);
            let mut weights = Vec::with_capacity(n);
            let mut coord_buf = vec![T::zero(); d];
            for _ in 0..n {
                let w = chebyshev_point(&mut rng, &mut coord_buf);
                points.extend_from_slice(&coord_buf);
                weights.push(w);
            }
            Ok(SampleBatch {
                points,
                weights,
                d,
                kind: StrategyKind::Asymptotic,
                seed,
                acceptance_rate: None,
                lag1_autocorr: None,
            })
        }
    }
}

/// Fills `out` with one Chebyshev draw per coordinate and returns the
/// weight `prod (1-x_i^2)^(1/4)`. Draws that land exactly on a cube corner
/// coordinate (measure zero, but reachable in floating point) are redrawn
/// so weights stay strictly positive.
fn chebyshev_point<T: Real, R: Rng>(rng: &mut R, out: &mut [T]) -> T {
    let pi = T::from_f64_lossy(std::f64::consts::PI);
    let quarter = T::from_f64_lossy(0.25);
    let mut weight = T::one();
    for slot in out.iter_mut() {
        loop {
            let u = T::unit_uniform(rng);
            let x = (pi * u).cos();
            let one_minus_sq = T::one() - x * x;
            if one_minus_sq > T::zero() {
                *slot = x;
                weight = weight * one_minus_sq.powf(quarter);
                break;
            }
        }
    }
    weight
}

/// Independence Metropolis-Hastings targeting the density proportional to
/// `f(xi) B^2(xi)` on the proposal's support, keeping every `thinning`-th
/// post-burn-in state. Weights are `1/B`.
pub fn sample_coherence_optimal<T: Real>(
    basis: &PcBasis<T>,
    n: usize,
    config: &McmcConfig,
    seed: u64,
) -> Result<SampleBatch<T>> {
    require_positive_n(n)?;
    config.validate()?;
    let d = basis.dimension();
    let proposal = config.resolved_proposal(d, basis.order());
    if proposal == Proposal::Asymptotic
        && basis.family() == Family::Hermite
        && basis.order() == 0
    {
        return Err(Error::InvalidParameter {
            name: "proposal",
            reason: "asymptotic Hermite proposal needs order p >= 1".into(),
        });
    }

    let mut rng = rng_for(seed);
    let mut chain = Chain::new(basis, proposal, &mut rng);
    let mut points = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    let mut envelopes = Vec::with_capacity(n);
    let mut accepted: u64 = 0;
    let mut proposed: u64 = 0;

    if config.independent_restarts {
        for _ in 0..n {
            chain.restart(&mut rng);
            for _ in 0..config.burn_in {
                accepted += u64::from(chain.step(&mut rng));
                proposed += 1;
            }
            chain.record(&mut points, &mut weights, &mut envelopes);
        }
    } else {
        for _ in 0..config.burn_in {
            chain.step(&mut rng);
        }
        for _ in 0..n {
            for _ in 0..config.thinning {
                accepted += u64::from(chain.step(&mut rng));
                proposed += 1;
            }
            chain.record(&mut points, &mut weights, &mut envelopes);
        }
    }

    let acceptance_rate = if proposed == 0 {
        1.0
    } else {
        accepted as f64 / proposed as f64
    };
    Ok(SampleBatch {
        points,
        weights,
        d,
        kind: StrategyKind::CoherenceOptimal,
        seed,
        acceptance_rate: Some(acceptance_rate),
        lag1_autocorr: lag1_autocorrelation(&envelopes),
    })
}

/// One Metropolis-Hastings state: the point, its envelope, and the part of
/// the log acceptance ratio that depends on the point, namely
/// `log target - log proposal` with all constants dropped.
struct Chain<'a, T> {
    basis: &'a PcBasis<T>,
    evaluator: RowEvaluator<'a, T>,
    proposal: Proposal,
    state: Vec<T>,
    candidate: Vec<T>,
    log_score: T,
    envelope: T,
}

impl<'a, T: Real> Chain<'a, T> {
    fn new<R: Rng>(basis: &'a PcBasis<T>, proposal: Proposal, rng: &mut R) -> Self {
        let d = basis.dimension();
        let mut chain = Chain {
            basis,
            evaluator: RowEvaluator::new(basis),
            proposal,
            state: vec![T::zero(); d],
            candidate: vec![T::zero(); d],
            log_score: T::zero(),
            envelope: T::one(),
        };
        chain.restart(rng);
        chain
    }

    fn restart<R: Rng>(&mut self, rng: &mut R) {
        self.draw_proposal_into_candidate(rng);
        self.state.copy_from_slice(&self.candidate);
        let state = std::mem::take(&mut self.state);
        let (score, envelope) = self.score(&state);
        self.state = state;
        self.log_score = score;
        self.envelope = envelope;
    }

    fn draw_proposal_into_candidate<R: Rng>(&mut self, rng: &mut R) {
        match (self.proposal, self.basis.family()) {
            (Proposal::Standard, family) => {
                for slot in self.candidate.iter_mut() {
                    *slot = draw_base_coordinate(family, rng);
                }
            }
            (Proposal::Asymptotic, Family::Hermite) => {
                let r = T::from_f64_lossy(hermite_ball_radius(self.basis.order()));
                ball_point(self.basis.dimension(), r, rng, &mut self.candidate);
            }
            (Proposal::Asymptotic, Family::Legendre) => {
                chebyshev_point(rng, &mut self.candidate);
            }
        }
    }

    /// `log target - log proposal` at `point`, up to an additive constant,
    /// along with the envelope value. The base-measure factors cancel
    /// analytically wherever possible so that the constant-basis chain
    /// accepts with probability exactly 1.
    fn score(&mut self, point: &[T]) -> (T, T) {
        let b_sq = self
            .evaluator
            .envelope_squared(point)
            .expect("proposal draws stay inside the basis domain");
        let log_b_sq = b_sq.ln();
        let half = T::from_f64_lossy(0.5);
        let score = match (self.proposal, self.basis.family()) {
            // Target f*B^2 over proposal f leaves B^2.
            (Proposal::Standard, _) => log_b_sq,
            // Uniform-ball proposal leaves the Gaussian factor in place.
            (Proposal::Asymptotic, Family::Hermite) => {
                let norm_sq = point.iter().fold(T::zero(), |acc, &x| acc + x * x);
                log_b_sq - half * norm_sq
            }
            // Chebyshev proposal contributes prod (1-x^2)^(1/2).
            (Proposal::Asymptotic, Family::Legendre) => {
                let log_cheb = point
                    .iter()
                    .fold(T::zero(), |acc, &x| acc + (T::one() - x * x).ln());
                log_b_sq + half * log_cheb
            }
        };
        (score, b_sq.sqrt())
    }

    /// One Metropolis-Hastings transition; returns whether the proposal was
    /// accepted.
    fn step<R: Rng>(&mut self, rng: &mut R) -> bool {
        self.draw_proposal_into_candidate(rng);
        let (candidate_score, candidate_envelope) = {
            let candidate = std::mem::take(&mut self.candidate);
            let result = self.score(&candidate);
            self.candidate = candidate;
            result
        };
        let log_alpha = candidate_score - self.log_score;
        let accept = if log_alpha >= T::zero() {
            true
        } else {
            T::unit_uniform(rng).ln() < log_alpha
        };
        if accept {
            std::mem::swap(&mut self.state, &mut self.candidate);
            self.log_score = candidate_score;
            self.envelope = candidate_envelope;
        }
        accept
    }

    fn record(&self, points: &mut Vec<T>, weights: &mut Vec<T>, envelopes: &mut Vec<T>) {
        points.extend_from_slice(&self.state);
        weights.push(T::one() / self.envelope);
        envelopes.push(self.envelope);
    }
}

fn lag1_autocorrelation<T: Real>(series: &[T]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let n = series.len() as f64;
    let values: Vec<f64> = series.iter().map(|v| v.to_f64_lossy()).collect();
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if variance <= 0.0 {
        return None;
    }
    let covariance = values
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>()
        / n;
    Some(covariance / variance)
}

/// Dispatches to the sampler selected by `strategy`.
pub fn sample<T: Real>(
    basis: &PcBasis<T>,
    strategy: &SamplingStrategy,
    n: usize,
    seed: u64,
) -> Result<SampleBatch<T>> {
    match strategy {
        SamplingStrategy::Standard => sample_standard(basis, n, seed),
        SamplingStrategy::Asymptotic => sample_asymptotic(basis, n, seed),
        SamplingStrategy::CoherenceOptimal(config) => {
            sample_coherence_optimal(basis, n, config, seed)
        }
    }
}

/// The un-normalized weight the strategy assigns to a point of its support:
/// 1 for standard sampling, `exp(-||xi||^2/4)` or `prod (1-x_i^2)^(1/4)`
/// for asymptotic Hermite and Legendre, and `1/B` for coherence-optimal
/// sampling.
pub fn weight_for<T: Real>(
    basis: &PcBasis<T>,
    kind: StrategyKind,
    point: &[T],
) -> Result<T> {
    basis.validate_point(point)?;
    match (kind, basis.family()) {
        (StrategyKind::Standard, _) => Ok(T::one()),
        (StrategyKind::Asymptotic, Family::Hermite) => {
            if basis.order() == 0 {
                return Err(Error::InvalidParameter {
                    name: "p",
                    reason: "asymptotic Hermite sampling needs order p >= 1".into(),
                });
            }
            let norm_sq = point.iter().fold(T::zero(), |acc, &x| acc + x * x);
            let r = T::from_f64_lossy(hermite_ball_radius(basis.order()));
            if norm_sq.sqrt() > r {
                return Err(Error::OutsideSupport {
                    reason: format!(
                        "point norm {} exceeds the sampling ball radius {}",
                        norm_sq.sqrt().to_f64_lossy(),
                        r.to_f64_lossy()
                    ),
                });
            }
            let quarter = T::from_f64_lossy(0.25);
            Ok((-norm_sq * quarter).exp())
        }
        (StrategyKind::Asymptotic, Family::Legendre) => {
            let quarter = T::from_f64_lossy(0.25);
            let mut weight = T::one();
            for &x in point {
                let one_minus_sq = T::one() - x * x;
                if !(one_minus_sq > T::zero()) {
                    return Err(Error::OutsideSupport {
                        reason: format!(
                            "coordinate {} lies on the cube boundary where the weight vanishes",
                            x.to_f64_lossy()
                        ),
                    });
                }
                weight = weight * one_minus_sq.powf(quarter);
            }
            Ok(weight)
        }
        (StrategyKind::CoherenceOptimal, _) => Ok(T::one() / basis.envelope(point)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_rule;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn legendre(d: usize, p: usize) -> PcBasis<f64> {
        PcBasis::new(Family::Legendre, d, p).unwrap()
    }

    fn hermite(d: usize, p: usize) -> PcBasis<f64> {
        PcBasis::new(Family::Hermite, d, p).unwrap()
    }

    #[test]
    fn standard_legendre_stays_in_the_cube_with_unit_weights() {
        let basis = legendre(3, 2);
        let batch = sample_standard(&basis, 500, 42).unwrap();
        assert_eq!(batch.len(), 500);
        assert_eq!(batch.dimension(), 3);
        for point in batch.iter_points() {
            assert!(point.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        }
        assert!(batch.weights().iter().all(|&w| w == 1.0));
        assert_eq!(batch.acceptance_rate(), None);
    }

    #[test]
    fn standard_hermite_mean_is_within_the_clt_band() {
        let basis = hermite(1, 2);
        let n = 100_000;
        let batch = sample_standard(&basis, n, 7).unwrap();
        let mean: f64 = batch.points.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ball_points_respect_the_radius() {
        let points = sample_ball::<f64>(3, 2.5, 2000, 9).unwrap();
        for point in points.chunks_exact(3) {
            let norm = point.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= 2.5 + 1e-12);
        }
    }

    #[test]
    fn ball_in_one_dimension_is_uniform_by_kolmogorov_smirnov() {
        let n = 10_000;
        let mut points = sample_ball::<f64>(1, 1.0, n, 31).unwrap();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in points.iter().enumerate() {
            let cdf = (x + 1.0) / 2.0;
            let hi = (i + 1) as f64 / n as f64;
            let lo = i as f64 / n as f64;
            ks = ks.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn ball_radial_mass_matches_the_area_law() {
        let n = 100_000;
        let points = sample_ball::<f64>(2, 1.0, n, 17).unwrap();
        let inside = points
            .chunks_exact(2)
            .filter(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.5)
            .count();
        let fraction = inside as f64 / n as f64;
        assert!((fraction - 0.25).abs() <= 0.006, "fraction {fraction}");

        for s in [0.3f64, 0.7] {
            let expect = s * s;
            let got = points
                .chunks_exact(2)
                .filter(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt() <= s)
                .count() as f64
                / n as f64;
            let band = 4.0 * (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((got - expect).abs() <= band, "s={s}: {got} vs {expect}");
        }
    }

    #[test]
    fn hermite_ball_radius_matches_the_closed_form() {
        assert_relative_eq!(hermite_ball_radius(30), 122.0f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(hermite_ball_radius(30), 11.045361, max_relative = 1e-6);
        assert_relative_eq!(hermite_ball_radius(1), 6.0f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn asymptotic_hermite_weights_match_the_gaussian_quarter_exponent() {
        let basis = hermite(2, 4);
        let batch = sample_asymptotic(&basis, 200, 5).unwrap();
        let r = hermite_ball_radius(4);
        for (point, &w) in batch.iter_points().zip(batch.weights()) {
            let norm_sq: f64 = point.iter().map(|x| x * x).sum();
            assert!(norm_sq.sqrt() <= r + 1e-12);
            assert_relative_eq!(w, (-norm_sq / 4.0).exp(), max_relative = 1e-14);
            assert!(w > 0.0);
        }
    }

    #[test]
    fn asymptotic_hermite_requires_first_order() {
        let basis = hermite(2, 0);
        assert!(matches!(
            sample_asymptotic(&basis, 10, 1),
            Err(Error::InvalidParameter { name: "p", .. })
        ));
    }

    #[test]
    fn asymptotic_legendre_weights_match_the_chebyshev_formula() {
        let basis = legendre(3, 2);
        let batch = sample_asymptotic(&basis, 500, 23).unwrap();
        for (point, &w) in batch.iter_points().zip(batch.weights()) {
            let expect: f64 = point.iter().map(|x| (1.0 - x * x).powf(0.25)).product();
            assert!(point.iter().all(|&x| x.abs() < 1.0));
            assert_relative_eq!(w, expect, max_relative = 1e-13);
            assert!(w > 0.0);
        }
    }

    #[test]
    fn weight_for_matches_the_documented_formulas() {
        let basis = legendre(2, 3);
        assert_eq!(
            weight_for(&basis, StrategyKind::Standard, &[0.3, -0.8]).unwrap(),
            1.0
        );
        assert_relative_eq!(
            weight_for(&basis, StrategyKind::Asymptotic, &[0.0, 0.0]).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(matches!(
            weight_for(&basis, StrategyKind::Asymptotic, &[1.0, 0.0]),
            Err(Error::OutsideSupport { .. })
        ));

        let constant = legendre(2, 0);
        assert_eq!(
            weight_for(&constant, StrategyKind::CoherenceOptimal, &[0.1, 0.2]).unwrap(),
            1.0
        );

        let h = hermite(2, 1);
        assert_relative_eq!(
            weight_for(&h, StrategyKind::Asymptotic, &[0.0, 0.0]).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(matches!(
            weight_for(&h, StrategyKind::Asymptotic, &[100.0, 0.0]),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn constant_basis_chain_accepts_every_proposal() {
        for family in [Family::Hermite, Family::Legendre] {
            let basis = PcBasis::<f64>::new(family, 2, 0).unwrap();
            let config = McmcConfig {
                burn_in: 50,
                thinning: 2,
                ..McmcConfig::default()
            };
            let batch = sample_coherence_optimal(&basis, 2000, &config, 3).unwrap();
            assert_eq!(batch.acceptance_rate(), Some(1.0));
            assert!(batch.weights().iter().all(|&w| w == 1.0));
            if family == Family::Hermite {
                let mean: f64 =
                    batch.points.iter().sum::<f64>() / batch.points.len() as f64;
                assert!(mean.abs() < 4.0 / (batch.points.len() as f64).sqrt() * 1.5);
            }
        }
    }

    #[test]
    fn coherence_optimal_weights_invert_the_envelope() {
        let basis = legendre(2, 4);
        let batch =
            sample_coherence_optimal(&basis, 300, &McmcConfig::default(), 11).unwrap();
        for (point, &w) in batch.iter_points().zip(batch.weights()) {
            let row = basis.eval_basis_row(point).unwrap();
            let weighted_sum: f64 = row.iter().map(|psi| (w * psi).powi(2)).sum();
            assert_relative_eq!(weighted_sum, 1.0, max_relative = 1e-12);
        }
        let rate = batch.acceptance_rate().unwrap();
        assert!(rate > 0.0 && rate <= 1.0);
        assert!(batch.lag1_autocorr().is_some());
    }

    /// Chi-squared goodness of fit of the d=1 Legendre chain against the
    /// closed-form target density B^2(x) / (2 (p+1)), on 50 equal-width
    /// bins. The 1% critical value of chi-squared with 49 degrees of
    /// freedom is 74.919.
    fn chi_squared_statistic(p: usize, seed: u64) -> f64 {
        chi_squared_with(p, &McmcConfig::default(), 100_000, seed)
    }

    fn chi_squared_with(p: usize, config: &McmcConfig, n: usize, seed: u64) -> f64 {
        let basis = legendre(1, p);
        let batch = sample_coherence_optimal(&basis, n, config, seed).unwrap();
        let bins = 50;
        let mut observed = vec![0usize; bins];
        for point in batch.iter_points() {
            let idx = (((point[0] + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
            observed[idx] += 1;
        }
        let rule = gauss_rule::<f64>(Family::Legendre, 4).unwrap();
        let p_card = (p + 1) as f64;
        let mut statistic = 0.0;
        for (idx, &obs) in observed.iter().enumerate() {
            let a = -1.0 + 2.0 * idx as f64 / bins as f64;
            let b = a + 2.0 / bins as f64;
            // Expected bin probability: integral over [a, b] of
            // (1/2) B^2 / P, using the density-normalized Gauss rule
            // mapped onto the bin.
            let prob = (b - a)
                * rule.integrate(|t| {
                    let x = a + (t + 1.0) / 2.0 * (b - a);
                    let b_sq: f64 = basis
                        .eval_basis_row(&[x])
                        .unwrap()
                        .iter()
                        .map(|v| v * v)
                        .sum();
                    b_sq / (2.0 * p_card)
                });
            let expected = prob * n as f64;
            statistic += (obs as f64 - expected).powi(2) / expected;
        }
        statistic
    }

    #[test]
    fn chain_marginals_match_the_target_density() {
        for (p, seed) in [(1, 101), (2, 102), (3, 103)] {
            let statistic = chi_squared_statistic(p, seed);
            assert!(
                statistic < 74.919,
                "chi-squared {statistic} at p={p} exceeds the 1% critical value"
            );
        }
    }

    #[test]
    fn restarted_chains_draw_distinct_states_from_the_target() {
        let config = McmcConfig {
            independent_restarts: true,
            ..McmcConfig::default()
        };
        let n = 10_000;
        let batch = sample_coherence_optimal(&legendre(1, 2), n, &config, 207).unwrap();
        let mut seen: Vec<u64> = batch.iter_points().map(|q| q[0].to_bits()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), n, "kept states must not repeat");
        let lag1 = batch.lag1_autocorr().unwrap();
        assert!(lag1.abs() < 0.05, "lag-1 autocorrelation {lag1} not near zero");

        let statistic = chi_squared_with(2, &config, n, 207);
        assert!(
            statistic < 74.919,
            "chi-squared {statistic} exceeds the 1% critical value"
        );
    }

    #[test]
    fn batches_are_reproducible_and_prefix_consistent() {
        let basis = legendre(2, 3);
        for strategy in [
            SamplingStrategy::Standard,
            SamplingStrategy::Asymptotic,
            SamplingStrategy::coherence_optimal(),
            SamplingStrategy::CoherenceOptimal(McmcConfig {
                independent_restarts: true,
                ..McmcConfig::default()
            }),
        ] {
            let a = sample(&basis, &strategy, 200, 99).unwrap();
            let b = sample(&basis, &strategy, 200, 99).unwrap();
            assert_eq!(a, b, "identical seeds must give identical batches");

            let longer = sample(&basis, &strategy, 300, 99).unwrap();
            let prefix = longer.prefix(200);
            assert_eq!(a.points, prefix.points, "prefix property on points");
            assert_eq!(a.weights, prefix.weights, "prefix property on weights");

            let other = sample(&basis, &strategy, 200, 100).unwrap();
            assert_ne!(a.points, other.points, "different seeds must differ");
        }
    }

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        let a = derive_seed(7, &[1, 2, 3]);
        assert_eq!(a, derive_seed(7, &[1, 2, 3]));
        assert_ne!(a, derive_seed(7, &[1, 2, 4]));
        assert_ne!(a, derive_seed(8, &[1, 2, 3]));
        assert_ne!(a, derive_seed(7, &[1, 2]));
    }

    #[test]
    fn f32_sampling_works_at_small_order() {
        let basis = PcBasis::<f32>::new(Family::Legendre, 2, 2).unwrap();
        let batch = sample(&basis, &SamplingStrategy::coherence_optimal(), 50, 4).unwrap();
        assert!(batch.weights().iter().all(|w| w.is_finite() && *w > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_batch_has_positive_finite_weights_inside_the_support(
            seed in 0u64..1000,
            n in 1usize..40,
            p in 0usize..4,
            strategy_idx in 0usize..3,
            family_idx in 0usize..2,
        ) {
            let family = if family_idx == 0 { Family::Hermite } else { Family::Legendre };
            let basis = PcBasis::<f64>::new(family, 2, p.max(1)).unwrap();
            let strategy = match strategy_idx {
                0 => SamplingStrategy::Standard,
                1 => SamplingStrategy::Asymptotic,
                _ => SamplingStrategy::CoherenceOptimal(McmcConfig {
                    burn_in: 20,
                    thinning: 2,
                    ..McmcConfig::default()
                }),
            };
            let batch = sample(&basis, &strategy, n, seed).unwrap();
            prop_assert_eq!(batch.len(), n);
            for &w in batch.weights() {
                prop_assert!(w.is_finite() && w > 0.0);
            }
            for point in batch.iter_points() {
                prop_assert!(basis.validate_point(point).is_ok());
            }
            let again = sample(&basis, &strategy, n, seed).unwrap();
            prop_assert_eq!(batch, again);
        }
    }
}
