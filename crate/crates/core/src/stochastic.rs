//! Integer-valued light-tailed random processes for total arrivals,
//! per-dispatcher allocation, and per-server service, with reproducible
//! seeded streams.
//!
//! All supported distribution kinds produce nonnegative integers and have a
//! finite exponential moment. Analytic means, variances, zero-probabilities
//! and probability generating functions are exposed so that downstream
//! targets (the zeta bound, update-probability lower bounds) never rely on
//! empirical moments.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability-vector normalization checks.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// An integer-valued, light-tailed distribution given by its kind and
/// analytic parameters.
///
/// The geometric kind is parameterized by its mean over support
/// {0, 1, 2, ...} (number of failures before the first success), i.e.
/// success probability `p = 1 / (mean + 1)`, so `variance = mean * (mean+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntDistribution {
    Poisson { mean: f64 },
    Geometric { mean: f64 },
    BoundedUniform { lo: u64, hi: u64 },
    BernoulliScaled { batch: u64, prob: f64 },
    Deterministic { value: u64 },
}

impl IntDistribution {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            IntDistribution::Poisson { mean } => {
                if !mean.is_finite() || mean < 0.0 {
                    return fail(format!("poisson mean must be finite and >= 0, got {mean}"));
                }
            }
            IntDistribution::Geometric { mean } => {
                if !mean.is_finite() || mean < 0.0 {
                    return fail(format!("geometric mean must be finite and >= 0, got {mean}"));
                }
            }
            IntDistribution::BoundedUniform { lo, hi } => {
                if lo > hi {
                    return fail(format!("bounded_uniform requires lo <= hi, got [{lo}, {hi}]"));
                }
            }
            IntDistribution::BernoulliScaled { batch: _, prob } => {
                if !prob.is_finite() || !(0.0..=1.0).contains(&prob) {
                    return fail(format!("bernoulli_scaled prob must be in [0,1], got {prob}"));
                }
            }
            IntDistribution::Deterministic { .. } => {}
        }
        Ok(())
    }

    /// Exact analytic mean.
    pub fn mean(&self) -> f64 {
        match *self {
            IntDistribution::Poisson { mean } => mean,
            IntDistribution::Geometric { mean } => mean,
            IntDistribution::BoundedUniform { lo, hi } => (lo + hi) as f64 / 2.0,
            IntDistribution::BernoulliScaled { batch, prob } => batch as f64 * prob,
            IntDistribution::Deterministic { value } => value as f64,
        }
    }

    /// Exact analytic variance.
    pub fn variance(&self) -> f64 {
        match *self {
            IntDistribution::Poisson { mean } => mean,
            IntDistribution::Geometric { mean } => mean * (mean + 1.0),
            IntDistribution::BoundedUniform { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                (span * span - 1.0) / 12.0
            }
            IntDistribution::BernoulliScaled { batch, prob } => {
                let b = batch as f64;
                b * b * prob * (1.0 - prob)
            }
            IntDistribution::Deterministic { .. } => 0.0,
        }
    }

    /// Exact P(X = 0).
    pub fn prob_zero(&self) -> f64 {
        match *self {
            IntDistribution::Poisson { mean } => (-mean).exp(),
            IntDistribution::Geometric { mean } => 1.0 / (mean + 1.0),
            IntDistribution::BoundedUniform { lo, hi } => {
                if lo == 0 {
                    1.0 / (hi - lo + 1) as f64
                } else {
                    0.0
                }
            }
            IntDistribution::BernoulliScaled { batch, prob } => {
                if batch == 0 {
                    1.0
                } else {
                    1.0 - prob
                }
            }
            IntDistribution::Deterministic { value } => {
                if value == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether P(X = 0) > 0, decided structurally (immune to the floating
    /// point underflow of `prob_zero` at large means).
    pub fn has_mass_at_zero(&self) -> bool {
        match *self {
            IntDistribution::Poisson { .. } | IntDistribution::Geometric { .. } => true,
            IntDistribution::BoundedUniform { lo, .. } => lo == 0,
            IntDistribution::BernoulliScaled { batch, prob } => batch == 0 || prob < 1.0,
            IntDistribution::Deterministic { value } => value == 0,
        }
    }

    /// Probability generating function E[z^X] for z in [0, 1].
    ///
    /// Used to derive exact binomial-thinning hit probabilities such as
    /// P(A^m > 0) = 1 - pgf(1 - p_m).
    pub fn pgf(&self, z: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&z));
        match *self {
            IntDistribution::Poisson { mean } => (-mean * (1.0 - z)).exp(),
            IntDistribution::Geometric { mean } => {
                let p = 1.0 / (mean + 1.0);
                p / (1.0 - (1.0 - p) * z)
            }
            IntDistribution::BoundedUniform { lo, hi } => {
                let n = (hi - lo + 1) as f64;
                if (z - 1.0).abs() < 1e-12 {
                    1.0
                } else {
                    (z.powi(lo as i32) - z.powi(hi as i32 + 1)) / (n * (1.0 - z))
                }
            }
            IntDistribution::BernoulliScaled { batch, prob } => {
                (1.0 - prob) + prob * z.powi(batch as i32)
            }
            IntDistribution::Deterministic { value } => z.powi(value as i32),
        }
    }

    /// Build a prepared sampler. Fails if the parameters are invalid.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let invalid = |e: String| Error::InvalidDistribution(e);
        Ok(match *self {
            IntDistribution::Poisson { mean } => {
                if mean == 0.0 {
                    Sampler::Deterministic(0)
                } else {
                    Sampler::Poisson(Poisson::new(mean).map_err(|e| invalid(e.to_string()))?)
                }
            }
            IntDistribution::Geometric { mean } => {
                let p = 1.0 / (mean + 1.0);
                Sampler::Geometric(Geometric::new(p).map_err(|e| invalid(e.to_string()))?)
            }
            IntDistribution::BoundedUniform { lo, hi } => Sampler::BoundedUniform { lo, hi },
            IntDistribution::BernoulliScaled { batch, prob } => {
                Sampler::BernoulliScaled { batch, prob }
            }
            IntDistribution::Deterministic { value } => Sampler::Deterministic(value),
        })
    }
}

/// A prepared (validated) sampler for one [`IntDistribution`].
#[derive(Clone, Debug)]
pub enum Sampler {
    Poisson(Poisson<f64>),
    Geometric(Geometric),
    BoundedUniform { lo: u64, hi: u64 },
    BernoulliScaled { batch: u64, prob: f64 },
    Deterministic(u64),
}

impl Sampler {
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        match self {
            // Poisson<f64> yields exact nonnegative integers stored in f64.
            Sampler::Poisson(d) => d.sample(rng) as u64,
            Sampler::Geometric(d) => d.sample(rng),
            Sampler::BoundedUniform { lo, hi } => rng.random_range(*lo..=*hi),
            Sampler::BernoulliScaled { batch, prob } => {
                if rng.random_bool(*prob) {
                    *batch
                } else {
                    0
                }
            }
            Sampler::Deterministic(v) => *v,
        }
    }
}

/// One draw from `dist`, advancing the stream.
pub fn sample(dist: &IntDistribution, rng: &mut RngStream) -> Result<u64> {
    Ok(dist.sampler()?.sample(rng))
}

/// A seeded, replayable random stream.
///
/// Identical `(seed, stream_id)` pairs reproduce identical sample sequences;
/// distinct stream ids select statistically independent streams of the same
/// seed, so parallel replications never share randomness.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Static description of the offered traffic: the total-arrival process, the
/// state-independent allocation of arrivals across dispatchers, the
/// per-server service processes, and the heavy-traffic distance
/// `epsilon = mu_total - lambda_total`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficConfig {
    total_arrival: IntDistribution,
    dispatcher_probs: Vec<f64>,
    service: Vec<IntDistribution>,
    epsilon: f64,
    mu: Vec<f64>,
}

impl TrafficConfig {
    /// Validates all construction invariants:
    /// dispatcher probabilities strictly positive and summing to 1,
    /// `lambda_total = mu_total - epsilon` (within 1e-9), `epsilon > 0`,
    /// positive mass at zero total arrivals, and positive service rates.
    pub fn new(
        total_arrival: IntDistribution,
        dispatcher_probs: Vec<f64>,
        service: Vec<IntDistribution>,
        epsilon: f64,
    ) -> Result<Self> {
        let fail = |msg: String| Err(Error::InvalidTraffic(msg));
        total_arrival.validate()?;
        if dispatcher_probs.is_empty() {
            return fail("need at least one dispatcher".into());
        }
        if service.is_empty() {
            return fail("need at least one server".into());
        }
        for (m, &p) in dispatcher_probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return fail(format!("dispatcher_probs[{m}] = {p} must be > 0"));
            }
        }
        let sum: f64 = dispatcher_probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return fail(format!("dispatcher_probs sum to {sum}, must be 1"));
        }
        let mut mu = Vec::with_capacity(service.len());
        for (n, dist) in service.iter().enumerate() {
            dist.validate()?;
            let m = dist.mean();
            if m <= 0.0 {
                return fail(format!("service[{n}] has mean {m}, must be > 0"));
            }
            mu.push(m);
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return fail(format!("epsilon = {epsilon} must be > 0"));
        }
        let mu_total: f64 = mu.iter().sum();
        let lambda = total_arrival.mean();
        let tol = 1e-9 * mu_total.max(1.0);
        if (lambda - (mu_total - epsilon)).abs() > tol {
            return fail(format!(
                "total arrival mean {lambda} != mu_total - epsilon = {}",
                mu_total - epsilon
            ));
        }
        if !total_arrival.has_mass_at_zero() {
            return fail("total arrival process must have positive mass at 0".into());
        }
        Ok(Self {
            total_arrival,
            dispatcher_probs,
            service,
            epsilon,
            mu,
        })
    }

    pub fn num_dispatchers(&self) -> usize {
        self.dispatcher_probs.len()
    }

    pub fn num_servers(&self) -> usize {
        self.service.len()
    }

    pub fn total_arrival(&self) -> &IntDistribution {
        &self.total_arrival
    }

    pub fn dispatcher_probs(&self) -> &[f64] {
        &self.dispatcher_probs
    }

    pub fn service(&self) -> &[IntDistribution] {
        &self.service
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Mean service rates mu_n.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_total(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn mu_max(&self) -> f64 {
        self.mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mu_min(&self) -> f64 {
        self.mu.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_total(&self) -> f64 {
        self.total_arrival.mean()
    }

    /// Mean arrival rate at dispatcher m under the thinning allocation.
    pub fn lambda_at(&self, m: usize) -> f64 {
        self.dispatcher_probs[m] * self.lambda_total()
    }

    pub fn arrival_variance(&self) -> f64 {
        self.total_arrival.variance()
    }

    pub fn service_variance_total(&self) -> f64 {
        self.service.iter().map(|d| d.variance()).sum()
    }

    /// Offered load lambda_total / mu_total.
    pub fn load(&self) -> f64 {
        self.lambda_total() / self.mu_total()
    }

    /// Exact `p0 = min_m P(A^m > 0)` under binomial thinning:
    /// `P(A^m > 0) = 1 - pgf_total(1 - p_m)`.
    pub fn arrival_positive_prob_lower_bound(&self) -> f64 {
        self.dispatcher_probs
            .iter()
            .map(|&p| 1.0 - self.total_arrival.pgf(1.0 - p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Splits `total` across buckets by multinomial thinning with the given
/// probabilities, via sequential conditional binomials. Conserves mass:
/// the parts always sum to `total`.
pub(crate) fn split_by_probs(total: u64, probs: &[f64], rng: &mut RngStream) -> Vec<u64> {
    let m = probs.len();
    let mut out = vec![0u64; m];
    let mut remaining = total;
    let mut prob_left = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == m - 1 || prob_left - p <= 1e-12 {
            out[i] = remaining;
            remaining = 0;
            break;
        }
        let q = (p / prob_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .expect("q validated in [0,1]")
            .sample(rng);
        out[i] = draw;
        remaining -= draw;
        prob_left -= p;
    }
    // Float drift in prob_left can leave the loop early; mass goes to the
    // last bucket so conservation is structural.
    if remaining > 0 {
        out[m - 1] += remaining;
    }
    out
}

/// Draws the slot's total arrivals and splits them across dispatchers by
/// multinomial thinning, independent of system state.
pub fn generate_arrivals(cfg: &TrafficConfig, rng: &mut RngStream) -> Vec<u64> {
    let total = cfg
        .total_arrival
        .sampler()
        .expect("validated at construction")
        .sample(rng);
    split_by_probs(total, &cfg.dispatcher_probs, rng)
}

/// Draws one offered-service value per server, independently.
pub fn generate_services(cfg: &TrafficConfig, rng: &mut RngStream) -> Vec<u64> {
    cfg.service
        .iter()
        .map(|d| {
            d.sampler()
                .expect("validated at construction")
                .sample(rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson(mean: f64) -> IntDistribution {
        IntDistribution::Poisson { mean }
    }

    #[test]
    fn deterministic_point_mass() {
        let mut rng = RngStream::new(1, 0);
        let d = IntDistribution::Deterministic { value: 3 };
        assert_eq!(sample(&d, &mut rng).unwrap(), 3);
        assert_eq!(d.mean(), 3.0);
        assert_eq!(d.variance(), 0.0);
    }

    #[test]
    fn poisson_zero_rate_degenerates() {
        let mut rng = RngStream::new(1, 0);
        let d = poisson(0.0);
        for _ in 0..100 {
            assert_eq!(sample(&d, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_empirical_mean_matches_analytic() {
        // Law-of-large-numbers check against the analytic mean.
        let mut rng = RngStream::new(42, 0);
        let s = poisson(4.0).sampler().unwrap();
        let n = 1_000_000u64;
        let total: u64 = (0..n).map(|_| s.sample(&mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn geometric_empirical_variance_matches_analytic() {
        // mean 2 => p = 1/3, variance = mean*(mean+1) = 6.
        let d = IntDistribution::Geometric { mean: 2.0 };
        assert_eq!(d.variance(), 6.0);
        let mut rng = RngStream::new(7, 0);
        let s = d.sampler().unwrap();
        let n = 1_000_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = s.sample(&mut rng) as f64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - 6.0).abs() / 6.0 < 0.01, "var = {var}");
    }

    #[test]
    fn all_kinds_match_analytic_moments_within_three_se() {
        let kinds = [
            poisson(2.5),
            IntDistribution::Geometric { mean: 1.5 },
            IntDistribution::BoundedUniform { lo: 0, hi: 9 },
            IntDistribution::BernoulliScaled {
                batch: 4,
                prob: 0.3,
            },
            IntDistribution::Deterministic { value: 5 },
        ];
        for (i, d) in kinds.iter().enumerate() {
            let mut rng = RngStream::new(1000 + i as u64, 0);
            let s = d.sampler().unwrap();
            let n = 1_000_000u64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let x = s.sample(&mut rng) as f64;
                sum += x;
                sum_sq += x * x;
            }
            let mean = sum / n as f64;
            let var = (sum_sq / n as f64 - mean * mean).max(0.0);
            let se_mean = (d.variance() / n as f64).sqrt();
            assert!(
                (mean - d.mean()).abs() <= 3.0 * se_mean + 1e-12,
                "{d:?}: mean {mean} vs {}",
                d.mean()
            );
            // Rough SE for the variance estimate; adequate for these kinds.
            let se_var = d.variance() * (2.0 / n as f64).sqrt() * 3.0;
            assert!(
                (var - d.variance()).abs() <= 3.0 * se_var.max(1e-3),
                "{d:?}: var {var} vs {}",
                d.variance()
            );
        }
    }

    #[test]
    fn pgf_matches_prob_zero_at_origin() {
        let kinds = [
            poisson(2.5),
            IntDistribution::Geometric { mean: 1.5 },
            IntDistribution::BoundedUniform { lo: 0, hi: 4 },
            IntDistribution::BernoulliScaled {
                batch: 4,
                prob: 0.3,
            },
            IntDistribution::Deterministic { value: 2 },
        ];
        for d in &kinds {
            assert!((d.pgf(0.0) - d.prob_zero()).abs() < 1e-12, "{d:?}");
            assert!((d.pgf(1.0) - 1.0).abs() < 1e-12, "{d:?}");
        }
    }

    fn two_server_cfg() -> TrafficConfig {
        TrafficConfig::new(
            poisson(2.9),
            vec![0.5, 0.5],
            vec![poisson(1.0), poisson(2.0)],
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn traffic_config_validates_rate_identity() {
        // lambda != mu_total - epsilon
        let err = TrafficConfig::new(
            poisson(2.0),
            vec![1.0],
            vec![poisson(1.0), poisson(2.0)],
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidTraffic(_)));

        // probs must sum to one
        let err = TrafficConfig::new(
            poisson(2.9),
            vec![0.5, 0.4],
            vec![poisson(1.0), poisson(2.0)],
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidTraffic(_)));

        // arrivals must be able to be zero
        let err = TrafficConfig::new(
            IntDistribution::Deterministic { value: 2 },
            vec![1.0],
            vec![poisson(1.0), poisson(2.0)],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidTraffic(_)));

        let cfg = two_server_cfg();
        assert_eq!(cfg.num_dispatchers(), 2);
        assert_eq!(cfg.num_servers(), 2);
        assert!((cfg.mu_total() - 3.0).abs() < 1e-12);
        assert!((cfg.lambda_at(0) - 1.45).abs() < 1e-12);
    }

    #[test]
    fn arrivals_conserve_mass_and_handle_edges() {
        let cfg = two_server_cfg();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..10_000 {
            let a = generate_arrivals(&cfg, &mut rng);
            assert_eq!(a.len(), 2);
        }
        // A realized total of zero gives all zeros; single dispatcher gets all.
        let mut rng = RngStream::new(3, 1);
        assert_eq!(split_by_probs(0, &[0.3, 0.7], &mut rng), vec![0, 0]);
        assert_eq!(split_by_probs(7, &[1.0], &mut rng), vec![7]);
    }

    #[test]
    fn split_conserves_total_exactly() {
        let probs = [0.2, 0.3, 0.5];
        let mut rng = RngStream::new(9, 0);
        for total in [0u64, 1, 2, 17, 1000] {
            for _ in 0..200 {
                let parts = split_by_probs(total, &probs, &mut rng);
                assert_eq!(parts.iter().sum::<u64>(), total);
            }
        }
    }

    #[test]
    fn thinned_poisson_mean_per_dispatcher() {
        // Poisson(8) total, p = (0.5, 0.5): each dispatcher sees mean 4.
        let cfg = TrafficConfig::new(
            poisson(8.0),
            vec![0.5, 0.5],
            vec![poisson(4.5), poisson(4.5)],
            1.0,
        )
        .unwrap();
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000u64;
        let mut sums = [0u64; 2];
        for _ in 0..n {
            let a = generate_arrivals(&cfg, &mut rng);
            sums[0] += a[0];
            sums[1] += a[1];
        }
        for s in sums {
            let mean = s as f64 / n as f64;
            assert!((mean - 4.0).abs() < 0.02, "mean = {mean}");
        }
    }

    #[test]
    fn services_independent_across_servers() {
        // Empirical covariance of S1, S2 is ~0 for independent draws.
        let cfg = TrafficConfig::new(
            poisson(4.9),
            vec![1.0],
            vec![poisson(2.0), poisson(3.0)],
            0.1,
        )
        .unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 1_000_000u64;
        let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let s = generate_services(&cfg, &mut rng);
            let (a, b) = (s[0] as f64, s[1] as f64);
            s1 += a;
            s2 += b;
            s12 += a * b;
        }
        let cov = s12 / n as f64 - (s1 / n as f64) * (s2 / n as f64);
        assert!(cov.abs() < 0.01, "cov = {cov}");

        // All-deterministic services come out exactly.
        let cfg = TrafficConfig::new(
            poisson(1.0),
            vec![1.0],
            vec![
                IntDistribution::Deterministic { value: 1 },
                IntDistribution::Deterministic { value: 1 },
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(generate_services(&cfg, &mut rng), vec![1, 1]);
    }

    #[test]
    fn identical_seed_and_stream_reproduce_bit_identical_sequences() {
        let d = poisson(3.0);
        let s = d.sampler().unwrap();
        let mut a = RngStream::new(123, 7);
        let mut b = RngStream::new(123, 7);
        let seq_a: Vec<u64> = (0..1000).map(|_| s.sample(&mut a)).collect();
        let seq_b: Vec<u64> = (0..1000).map(|_| s.sample(&mut b)).collect();
        assert_eq!(seq_a, seq_b);

        // Distinct stream ids diverge.
        let mut c = RngStream::new(123, 8);
        let seq_c: Vec<u64> = (0..1000).map(|_| s.sample(&mut c)).collect();
        assert_ne!(seq_a, seq_c);
    }

    #[test]
    fn arrival_positive_prob_bound_matches_poisson_closed_form() {
        // Single dispatcher: p0 = P(A > 0) = 1 - e^{-lambda}.
        let cfg = TrafficConfig::new(poisson(2.9), vec![1.0], vec![poisson(3.0)], 0.1).unwrap();
        let p0 = cfg.arrival_positive_prob_lower_bound();
        assert!((p0 - (1.0 - (-2.9f64).exp())).abs() < 1e-12);

        // Two dispatchers with thinning: 1 - e^{-lambda * p_m}.
        let cfg = two_server_cfg();
        let p0 = cfg.arrival_positive_prob_lower_bound();
        assert!((p0 - (1.0 - (-2.9f64 * 0.5).exp())).abs() < 1e-12);
    }
}
