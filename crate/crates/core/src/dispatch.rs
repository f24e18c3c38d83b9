//! Dispatching strategies as pure maps from a dispatcher's local estimates
//! (and service rates) to a routing distribution, plus the
//! dispatching-preference analyzer and the tilted / delta-tilted certifiers.
//!
//! A strategy's *preference* reorders its per-server probability bias
//! `beta_n = P_n - mu_n / mu_total` by ascending local estimate. Preference
//! depends only on the relative order of estimates, never their values. A
//! strategy is *tilted* when no negative bias precedes a positive one in that
//! order, and *delta-tilted* when additionally the shortest-estimate rank
//! gets at least `delta` extra mass and the longest loses at least `delta`.
//!
//! Tied estimates are handled two ways, on purpose:
//! - the sampling law ([`StrategyKind::routing_probs`]) splits rank mass
//!   uniformly within a tie group, which is exactly the law of "break ties
//!   uniformly at random";
//! - preference evaluation ([`StrategyKind::preference`]) assigns rank mass
//!   along the realized stable permutation (estimate, then server index), so
//!   certificates quantify over realized orders rather than averaging them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::RngStream;

/// Tolerance for the sum-to-one check on routing distributions.
pub const ROUTING_SUM_TOLERANCE: f64 = 1e-9;

/// Magnitudes at or below this count as zero in tilt sign checks.
pub const SIGN_TOLERANCE: f64 = 1e-12;

/// Per-dispatcher probability vector over servers for the current slot.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingDistribution {
    probs: Vec<f64>,
}

impl RoutingDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < -ROUTING_SUM_TOLERANCE || p > 1.0 + ROUTING_SUM_TOLERANCE {
                return Err(Error::InvalidStrategy(format!(
                    "routing probability {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROUTING_SUM_TOLERANCE {
            return Err(Error::RoutingNotNormalized {
                sum,
                tolerance: ROUTING_SUM_TOLERANCE,
            });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Samples a server index from this distribution.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let mut target = rng.random::<f64>();
        for (i, &p) in self.probs.iter().enumerate() {
            if target < p {
                return i;
            }
            target -= p;
        }
        // Rounding can push the target past the last positive entry.
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.probs.len() - 1)
    }
}

/// Dispatching preference: the probability bias vector reordered by
/// ascending estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceVector {
    delta: Vec<f64>,
    sort_perm: Vec<usize>,
}

impl PreferenceVector {
    /// Bias toward the rank-i shortest estimate, `delta[i] = beta[perm[i]]`.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// The realized permutation: `sort_perm[i]` is the server with the
    /// i-th shortest estimate (stable in server index on ties).
    pub fn sort_perm(&self) -> &[usize] {
        &self.sort_perm
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// Dispatching strategy selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Random routing weighted by service rate; zero preference.
    WeightedRandom,
    /// Join the server with the shortest local estimate.
    Ljsq,
    /// Join a rate-weighted random server whose estimate is at or below the
    /// average estimate.
    Ljba,
    /// Sample d distinct servers, join the shortest-estimate one among them.
    #[serde(rename = "lpod")]
    LPod { d: usize },
    /// Explicit probability table over estimate ranks (shortest first).
    Custom { rank_probs: Vec<f64> },
}

impl StrategyKind {
    pub fn validate(&self, num_servers: usize) -> Result<()> {
        if num_servers == 0 {
            return Err(Error::InvalidStrategy("no servers".into()));
        }
        match self {
            StrategyKind::WeightedRandom | StrategyKind::Ljsq | StrategyKind::Ljba => Ok(()),
            StrategyKind::LPod { d } => {
                if *d < 2 || *d > num_servers {
                    Err(Error::InvalidStrategy(format!(
                        "lpod requires 2 <= d <= N, got d = {d}, N = {num_servers}"
                    )))
                } else {
                    Ok(())
                }
            }
            StrategyKind::Custom { rank_probs } => {
                if rank_probs.len() != num_servers {
                    return Err(Error::InvalidStrategy(format!(
                        "custom table has {} entries for {num_servers} servers",
                        rank_probs.len()
                    )));
                }
                RoutingDistribution::new(rank_probs.clone()).map(|_| ())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            StrategyKind::WeightedRandom => "weighted_random".into(),
            StrategyKind::Ljsq => "ljsq".into(),
            StrategyKind::Ljba => "ljba".into(),
            StrategyKind::LPod { d } => format!("lpod{d}"),
            StrategyKind::Custom { .. } => "custom".into(),
        }
    }

    /// Probability over *ranks* (shortest estimate first) for rank-based
    /// strategies; `None` for value-based ones (weighted random, L-JBA).
    fn rank_law(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            StrategyKind::Ljsq => {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                Some(v)
            }
            StrategyKind::LPod { d } => Some(rank_selection_probs(n, *d)),
            StrategyKind::Custom { rank_probs } => Some(rank_probs.clone()),
            StrategyKind::WeightedRandom | StrategyKind::Ljba => None,
        }
    }

    /// The routing law actually sampled from: rank mass is split uniformly
    /// within tie groups (the distribution of a uniform tie-break).
    pub fn routing_probs(&self, estimates: &[u64], mu: &[f64]) -> Result<RoutingDistribution> {
        match self {
            StrategyKind::WeightedRandom => weighted_random_probs(mu),
            StrategyKind::Ljsq => Ok(ljsq_probs(estimates)),
            StrategyKind::Ljba => ljba_probs(estimates, mu),
            StrategyKind::LPod { d } => lpod_probs(estimates, *d),
            StrategyKind::Custom { rank_probs } => {
                rank_probs_to_server_probs(estimates, rank_probs, true)
            }
        }
    }

    /// The routing law along the realized stable permutation: rank i's mass
    /// goes wholly to the server at sorted position i. Identical to
    /// [`Self::routing_probs`] on states without ties.
    pub fn realized_probs(&self, estimates: &[u64], mu: &[f64]) -> Result<RoutingDistribution> {
        match self.rank_law(estimates.len()) {
            Some(law) => rank_probs_to_server_probs(estimates, &law, false),
            None => self.routing_probs(estimates, mu),
        }
    }

    /// Samples a server directly, without materializing the distribution.
    /// Distributionally identical to `routing_probs(..).sample(..)`.
    pub fn sample_server(
        &self,
        estimates: &[u64],
        mu: &[f64],
        rng: &mut RngStream,
    ) -> Result<usize> {
        let n = estimates.len();
        match self {
            StrategyKind::WeightedRandom => {
                let total: f64 = mu.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidStrategy("zero total service rate".into()));
                }
                Ok(categorical(mu, total, rng))
            }
            StrategyKind::Ljsq => Ok(argmin_uniform(estimates, rng)),
            StrategyKind::Ljba => {
                let (members, total) = below_average_set(estimates, mu);
                let mut target = rng.random::<f64>() * total;
                for &i in &members {
                    if target < mu[i] {
                        return Ok(i);
                    }
                    target -= mu[i];
                }
                Ok(*members.last().expect("below-average set is never empty"))
            }
            StrategyKind::LPod { d } => {
                self.validate(n)?;
                let picks = rand::seq::index::sample(rng, n, *d);
                let mut best = usize::MAX;
                let mut best_val = u64::MAX;
                let mut ties = 0u64;
                for i in picks {
                    match estimates[i].cmp(&best_val) {
                        std::cmp::Ordering::Less => {
                            best = i;
                            best_val = estimates[i];
                            ties = 1;
                        }
                        std::cmp::Ordering::Equal => {
                            ties += 1;
                            if rng.random_range(0..ties) == 0 {
                                best = i;
                            }
                        }
                        std::cmp::Ordering::Greater => {}
                    }
                }
                Ok(best)
            }
            StrategyKind::Custom { rank_probs } => {
                self.validate(n)?;
                let total: f64 = rank_probs.iter().sum();
                let rank = categorical(rank_probs, total, rng);
                let perm = stable_sort_perm(estimates);
                // Uniform refinement: any member of the tie group covering
                // this sorted position is equally likely to hold the rank.
                let (lo, hi) = tie_group_bounds(estimates, &perm, rank);
                Ok(perm[rng.random_range(lo..hi)])
            }
        }
    }

    /// Preference of this strategy at the given estimate state, evaluated on
    /// the realized permutation.
    pub fn preference(&self, estimates: &[u64], mu: &[f64]) -> Result<PreferenceVector> {
        let probs = self.realized_probs(estimates, mu)?;
        Ok(compute_preference(&probs, estimates, mu))
    }
}

fn categorical(weights: &[f64], total: f64, rng: &mut RngStream) -> usize {
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Uniformly random member of the argmin set, in a single pass.
fn argmin_uniform(values: &[u64], rng: &mut RngStream) -> usize {
    let mut best = 0usize;
    let mut best_val = values[0];
    let mut ties = 1u64;
    for (i, &v) in values.iter().enumerate().skip(1) {
        match v.cmp(&best_val) {
            std::cmp::Ordering::Less => {
                best = i;
                best_val = v;
                ties = 1;
            }
            std::cmp::Ordering::Equal => {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = i;
                }
            }
            std::cmp::Ordering::Greater => {}
        }
    }
    best
}

/// Servers whose estimate is at or below the average estimate, with their
/// total service rate. Membership is exact: `q <= sum/N  <=>  q*N <= sum`.
fn below_average_set(estimates: &[u64], mu: &[f64]) -> (Vec<usize>, f64) {
    let n = estimates.len() as u128;
    let sum: u128 = estimates.iter().map(|&q| q as u128).sum();
    let mut members = Vec::new();
    let mut total = 0.0;
    for (i, &q) in estimates.iter().enumerate() {
        if (q as u128) * n <= sum {
            members.push(i);
            total += mu[i];
        }
    }
    (members, total)
}

/// Stable permutation sorting estimates ascending, ties by server index.
fn stable_sort_perm(estimates: &[u64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..estimates.len()).collect();
    perm.sort_by_key(|&i| estimates[i]);
    perm
}

/// Bounds `[lo, hi)` of the tie group containing sorted position `pos`.
fn tie_group_bounds(estimates: &[u64], perm: &[usize], pos: usize) -> (usize, usize) {
    let v = estimates[perm[pos]];
    let mut lo = pos;
    while lo > 0 && estimates[perm[lo - 1]] == v {
        lo -= 1;
    }
    let mut hi = pos + 1;
    while hi < perm.len() && estimates[perm[hi]] == v {
        hi += 1;
    }
    (lo, hi)
}

/// Maps a rank law onto servers through the sorted order of estimates.
/// With `average_ties`, each tie group shares its ranks' combined mass
/// equally (the uniform tie-break law); otherwise mass follows the realized
/// stable permutation.
fn rank_probs_to_server_probs(
    estimates: &[u64],
    rank_probs: &[f64],
    average_ties: bool,
) -> Result<RoutingDistribution> {
    if rank_probs.len() != estimates.len() {
        return Err(Error::InvalidStrategy(format!(
            "rank table has {} entries for {} servers",
            rank_probs.len(),
            estimates.len()
        )));
    }
    let perm = stable_sort_perm(estimates);
    let n = perm.len();
    let mut probs = vec![0.0; n];
    if average_ties {
        let mut start = 0;
        while start < n {
            let (_, end) = tie_group_bounds(estimates, &perm, start);
            let mass: f64 = rank_probs[start..end].iter().sum();
            let share = mass / (end - start) as f64;
            for &server in &perm[start..end] {
                probs[server] = share;
            }
            start = end;
        }
    } else {
        for (rank, &server) in perm.iter().enumerate() {
            probs[server] = rank_probs[rank];
        }
    }
    RoutingDistribution::new(probs)
}

/// Routing proportional to service rates: `P_n = mu_n / mu_total`.
pub fn weighted_random_probs(mu: &[f64]) -> Result<RoutingDistribution> {
    let total: f64 = mu.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidStrategy("zero total service rate".into()));
    }
    RoutingDistribution::new(mu.iter().map(|&m| m / total).collect())
}

/// Mass 1 on the shortest estimate, split uniformly among tied minima.
pub fn ljsq_probs(estimates: &[u64]) -> RoutingDistribution {
    let min = *estimates.iter().min().expect("nonempty");
    let ties = estimates.iter().filter(|&&q| q == min).count();
    let share = 1.0 / ties as f64;
    let probs = estimates
        .iter()
        .map(|&q| if q == min { share } else { 0.0 })
        .collect();
    RoutingDistribution::new(probs).expect("normalized by construction")
}

/// Rate-weighted routing restricted to servers at or below the average
/// estimate. The set is never empty (the minimum is at most the mean).
pub fn ljba_probs(estimates: &[u64], mu: &[f64]) -> Result<RoutingDistribution> {
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidStrategy(
            "ljba requires strictly positive service rates".into(),
        ));
    }
    let (members, total) = below_average_set(estimates, mu);
    let mut probs = vec![0.0; estimates.len()];
    for &i in &members {
        probs[i] = mu[i] / total;
    }
    RoutingDistribution::new(probs)
}

/// The law induced by sampling a uniform d-subset and joining its
/// shortest-estimate member, ties split uniformly.
pub fn lpod_probs(estimates: &[u64], d: usize) -> Result<RoutingDistribution> {
    let n = estimates.len();
    StrategyKind::LPod { d }.validate(n)?;
    rank_probs_to_server_probs(estimates, &rank_selection_probs(n, d), true)
}

/// Probability that the rank-i shortest of n distinct values is the minimum
/// of a uniform d-subset: `C(n-i, d-1) / C(n, d)` for i = 1..n (1-based).
pub fn rank_selection_probs(n: usize, d: usize) -> Vec<f64> {
    let total = choose(n as u64, d as u64);
    (1..=n)
        .map(|i| choose((n - i) as u64, d as u64 - 1) / total)
        .collect()
}

fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Sorts estimates ascending (stable on ties) and reorders the probability
/// bias `beta_n = P_n - mu_n / mu_total` accordingly.
pub fn compute_preference(
    probs: &RoutingDistribution,
    estimates: &[u64],
    mu: &[f64],
) -> PreferenceVector {
    let mu_total: f64 = mu.iter().sum();
    let perm = stable_sort_perm(estimates);
    let delta = perm
        .iter()
        .map(|&s| probs.probs()[s] - mu[s] / mu_total)
        .collect();
    PreferenceVector {
        delta,
        sort_perm: perm,
    }
}

/// Whether the preference satisfies the tilt sign pattern: some boundary
/// `k in {2..N}` with `delta_i >= 0` before it and `delta_i <= 0` from it
/// on (zero means |delta| <= SIGN_TOLERANCE). Returns the smallest witness.
pub fn check_tilted(pref: &PreferenceVector) -> (bool, Option<usize>) {
    let delta = pref.delta();
    let n = delta.len();
    if n == 0 {
        return (false, None);
    }
    if n == 1 {
        // A single server always receives everything; zero preference.
        return (delta[0].abs() <= SIGN_TOLERANCE, None);
    }
    // delta_i >= 0 must hold strictly before the boundary, delta_i <= 0 from
    // the boundary on.
    let mut nonneg_prefix = vec![false; n + 1];
    nonneg_prefix[0] = true;
    for i in 0..n {
        nonneg_prefix[i + 1] = nonneg_prefix[i] && delta[i] >= -SIGN_TOLERANCE;
    }
    let mut nonpos_suffix = vec![false; n + 1];
    nonpos_suffix[n] = true;
    for i in (0..n).rev() {
        nonpos_suffix[i] = nonpos_suffix[i + 1] && delta[i] <= SIGN_TOLERANCE;
    }
    for k in 2..=n {
        if nonneg_prefix[k - 1] && nonpos_suffix[k - 1] {
            return (true, Some(k));
        }
    }
    (false, None)
}

/// Whether the preference is tilted with margin: `delta_1 >= delta_min` and
/// `delta_N <= -delta_min`. Requires `delta_min > 0`.
pub fn check_delta_tilted(pref: &PreferenceVector, delta_min: f64) -> bool {
    debug_assert!(delta_min > 0.0);
    let (tilted, _) = check_tilted(pref);
    let delta = pref.delta();
    tilted
        && delta.first().is_some_and(|&d| d >= delta_min - SIGN_TOLERANCE)
        && delta.last().is_some_and(|&d| d <= -(delta_min - SIGN_TOLERANCE))
}

/// Result of evaluating a strategy's preference over sampled and corner
/// estimate states.
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    /// Tilt sign pattern held on every evaluated state.
    pub tilted_on_all: bool,
    /// Largest margin delta for which the delta-tilt check passes on every
    /// evaluated state: `min over states of min(delta_1, -delta_N)`, clamped
    /// at zero.
    pub max_certified_delta: f64,
    pub states_checked: usize,
}

/// Evaluates the strategy on `trials` random estimate states plus
/// adversarial corner states (all-equal, one-hot, sorted, reverse-sorted).
pub fn certify_strategy(
    kind: &StrategyKind,
    mu: &[f64],
    trials: usize,
    rng: &mut RngStream,
) -> Result<Certification> {
    let n = mu.len();
    kind.validate(n)?;
    let mut states: Vec<Vec<u64>> = vec![
        vec![5; n],                                               // all equal
        (0..n).map(|i| if i == 0 { 9 } else { 0 }).collect(),     // one-hot high
        (0..n).map(|i| if i == 0 { 0 } else { 9 }).collect(),     // one-hot low
        (0..n).map(|i| i as u64).collect(),                       // sorted
        (0..n).map(|i| (n - i) as u64).collect(),                 // reverse sorted
    ];
    for t in 0..trials {
        // Half wide-range states, half tie-rich narrow-range states.
        let hi = if t % 2 == 0 { 1000 } else { 3 };
        states.push((0..n).map(|_| rng.random_range(0..=hi)).collect());
    }

    let mut tilted_on_all = true;
    let mut margin = f64::INFINITY;
    for s in &states {
        let pref = kind.preference(s, mu)?;
        let (tilted, _) = check_tilted(&pref);
        tilted_on_all &= tilted;
        let d = pref.delta();
        let state_margin = d[0].min(-d[n - 1]);
        margin = margin.min(state_margin);
    }
    Ok(Certification {
        tilted_on_all,
        max_certified_delta: margin.max(0.0),
        states_checked: states.len(),
    })
}
