//! TASEP on the ring `Z_N` with reproducible per-site Poisson clocks.
//!
//! Each of the N sites carries an independent rate-1 Poisson clock. When the
//! clock at site x rings and x holds a particle while x+1 (cyclically) is
//! empty, the particle jumps to x+1; otherwise nothing happens. Driving
//! several copies with the same clocks is the canonical coupling. The
//! disagreement process of a coupled pair differing in exactly two sites
//! carries two second-class particles (label 2); they annihilate when
//! adjacent and the shared clock between them rings, and that instant is the
//! coalescence time τ.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::rng;
use crate::{Error, Result};

/// Occupancy of `Z_N` with exactly k particles, 1 ≤ k ≤ N−1.
/// Sites are indexed 0..N with cyclic wraparound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingConfig {
    occ: Vec<bool>,
}

impl RingConfig {
    pub fn new(occupancy: Vec<bool>) -> Result<Self> {
        let n = occupancy.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 sites, got {n}")));
        }
        let k = occupancy.iter().filter(|&&b| b).count();
        if k == 0 || k == n {
            return Err(Error::InvalidConfig(format!(
                "particle count must satisfy 1 <= k <= N-1, got k={k}, N={n}"
            )));
        }
        Ok(Self { occ: occupancy })
    }

    pub fn from_occupied_sites(n: usize, sites: &[usize]) -> Result<Self> {
        let mut occ = vec![false; n];
        for &s in sites {
            if s >= n {
                return Err(Error::InvalidConfig(format!("site {s} out of range for N={n}")));
            }
            if occ[s] {
                return Err(Error::InvalidConfig(format!("site {s} listed twice")));
            }
            occ[s] = true;
        }
        Self::new(occ)
    }

    /// Parse from a 0/1 string like "1100".
    pub fn from_bits(bits: &str) -> Result<Self> {
        let occ = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfig(format!("bad occupancy char {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::new(occ)
    }

    pub fn n_sites(&self) -> usize {
        self.occ.len()
    }

    pub fn k(&self) -> usize {
        self.occ.iter().filter(|&&b| b).count()
    }

    pub fn occupied(&self, site: usize) -> bool {
        self.occ[site % self.occ.len()]
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occ
    }

    /// Rotate so that site x of `self` becomes site x+r of the result.
    pub fn rotated(&self, r: i64) -> Self {
        let n = self.occ.len() as i64;
        let mut occ = vec![false; self.occ.len()];
        for (x, &b) in self.occ.iter().enumerate() {
            occ[(x as i64 + r).rem_euclid(n) as usize] = b;
        }
        Self { occ }
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        self.occ
            .iter()
            .zip(&other.occ)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// A uniformly random configuration with k particles (Fisher–Yates on
    /// the site list, driven by the counter-keyed RNG).
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        let mut sites: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng::key_hash(seed, i as u64, 0, 0xf15e) % (i as u64 + 1)) as usize;
            sites.swap(i, j);
        }
        Self::from_occupied_sites(n, &sites[..k])
    }
}

/// Immutable source of per-site Exponential(1) inter-arrival times.
///
/// The stream at a site is a pure function of (seed, site, counter), so two
/// simulations sharing a `ClockSource` see identical ring times at identical
/// sites. `rotated(r)` relabels streams so that site x+r reads what site x
/// read before, matching `RingConfig::rotated`.
#[derive(Debug, Clone, Copy)]
pub struct ClockSource {
    seed: u64,
    shift: i64,
}

const CLOCK_TAG: u64 = 0xc10c;

impl ClockSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, shift: 0 }
    }

    pub fn rotated(&self, r: i64) -> Self {
        Self {
            seed: self.seed,
            shift: self.shift + r,
        }
    }

    /// The `counter`-th inter-arrival time of the clock at `site` on a ring
    /// of `n` sites.
    #[inline]
    pub fn inter_arrival(&self, n: usize, site: usize, counter: u64) -> f64 {
        let s = (site as i64 - self.shift).rem_euclid(n as i64) as u64;
        rng::exp1(self.seed, s, counter, CLOCK_TAG)
    }
}

/// One clock ring: `applied` is true exactly when the ring moved a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: u32,
    pub applied: bool,
}

/// A realized trajectory: initial state plus the time-ordered ring events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: RingConfig,
    pub events: Vec<Event>,
}

impl Trajectory {
    /// State after replaying all events up to and including time t.
    pub fn config_at(&self, t: f64) -> RingConfig {
        let n = self.initial.n_sites();
        let mut occ = self.initial.occ.clone();
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            if ev.applied {
                let x = ev.site as usize;
                occ.swap(x, (x + 1) % n);
            }
        }
        RingConfig { occ }
    }

    pub fn final_config(&self) -> RingConfig {
        self.config_at(f64::INFINITY)
    }
}

/// Min-heap over (time, site) with times encoded as sortable bits
/// (nonnegative floats order like their bit patterns). Ties break toward the
/// smaller site index, which the Reverse ordering gives us for free.
type EventQueue = BinaryHeap<Reverse<(u64, u32)>>;

fn seed_queue(n: usize, clocks: &ClockSource, counters: &mut [u64]) -> EventQueue {
    let mut queue = EventQueue::with_capacity(n);
    for site in 0..n {
        let t = clocks.inter_arrival(n, site, 0);
        counters[site] = 1;
        queue.push(Reverse((t.to_bits(), site as u32)));
    }
    queue
}

/// Run the TASEP from `initial` until `horizon`, recording every clock ring.
pub fn simulate(initial: &RingConfig, clocks: &ClockSource, horizon: f64) -> Trajectory {
    let n = initial.n_sites();
    let mut occ = initial.occ.clone();
    let mut counters = vec![0u64; n];
    let mut queue = seed_queue(n, clocks, &mut counters);
    let mut events = Vec::new();
    while let Some(Reverse((bits, site))) = queue.pop() {
        let t = f64::from_bits(bits);
        if t > horizon {
            break;
        }
        let x = site as usize;
        let y = (x + 1) % n;
        let applied = occ[x] && !occ[y];
        if applied {
            occ.swap(x, y);
        }
        events.push(Event { time: t, site, applied });
        let next = t + clocks.inter_arrival(n, x, counters[x]);
        counters[x] += 1;
        queue.push(Reverse((next.to_bits(), site)));
    }
    Trajectory {
        initial: initial.clone(),
        events,
    }
}

/// Drive several copies with the identical clock stream (canonical coupling).
pub fn couple(initials: &[RingConfig], clocks: &ClockSource, horizon: f64) -> Result<Vec<Trajectory>> {
    let n = match initials.first() {
        Some(c) => c.n_sites(),
        None => return Ok(Vec::new()),
    };
    for c in initials {
        if c.n_sites() != n {
            return Err(Error::MismatchedSize(n, c.n_sites()));
        }
    }
    let mut occs: Vec<Vec<bool>> = initials.iter().map(|c| c.occ.clone()).collect();
    let mut counters = vec![0u64; n];
    let mut queue = seed_queue(n, clocks, &mut counters);
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); initials.len()];
    while let Some(Reverse((bits, site))) = queue.pop() {
        let t = f64::from_bits(bits);
        if t > horizon {
            break;
        }
        let x = site as usize;
        let y = (x + 1) % n;
        for (occ, evs) in occs.iter_mut().zip(events.iter_mut()) {
            let applied = occ[x] && !occ[y];
            if applied {
                occ.swap(x, y);
            }
            evs.push(Event { time: t, site, applied });
        }
        let next = t + clocks.inter_arrival(n, x, counters[x]);
        counters[x] += 1;
        queue.push(Reverse((next.to_bits(), site)));
    }
    Ok(initials
        .iter()
        .zip(events)
        .map(|(c, evs)| Trajectory {
            initial: c.clone(),
            events: evs,
        })
        .collect())
}

/// Labels of the disagreement process ξ: 1 where both copies hold a
/// particle, 2 where they differ, 0 where both are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisagreementConfig {
    labels: Vec<u8>,
}

impl DisagreementConfig {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidConfig("need at least 2 sites".into()));
        }
        if labels.iter().any(|&l| l > 2) {
            return Err(Error::InvalidConfig("labels must be in {0,1,2}".into()));
        }
        let twos = labels.iter().filter(|&&l| l == 2).count();
        if twos != 0 && twos != 2 {
            return Err(Error::InvalidConfig(format!(
                "second-class particle count must be 0 or 2, got {twos}"
            )));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_sites(&self) -> usize {
        self.labels.len()
    }

    pub fn second_class_sites(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&x| self.labels[x] == 2).collect()
    }
}

/// Build the disagreement labels of a coupled pair.
pub fn disagreement(a: &RingConfig, b: &RingConfig) -> Result<DisagreementConfig> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::MismatchedSize(a.n_sites(), b.n_sites()));
    }
    if a.k() != b.k() {
        return Err(Error::MismatchedCount(a.k(), b.k()));
    }
    let labels = a
        .occ
        .iter()
        .zip(&b.occ)
        .map(|(&x, &y)| if x != y { 2 } else { u8::from(x) })
        .collect();
    DisagreementConfig::new(labels)
}

/// Jump priority: first-class particles push everything, second-class
/// particles push only vacancies.
#[inline]
fn priority(label: u8) -> u8 {
    match label {
        1 => 2,
        2 => 1,
        _ => 0,
    }
}

/// Apply a clock ring at site x to the labels. Returns true when the ring
/// annihilated the two second-class particles.
#[inline]
fn ring_labels(labels: &mut [u8], x: usize) -> bool {
    let n = labels.len();
    let y = (x + 1) % n;
    let (a, b) = (labels[x], labels[y]);
    if a == 2 && b == 2 {
        labels[x] = 0;
        labels[y] = 1;
        true
    } else {
        if priority(a) > priority(b) {
            labels[x] = b;
            labels[y] = a;
        }
        false
    }
}

/// Evolve the disagreement process until `horizon`. Returns the final labels
/// and the coalescence time τ, if the two second-class particles annihilated
/// within the horizon.
pub fn evolve_disagreement(
    initial: &DisagreementConfig,
    clocks: &ClockSource,
    horizon: f64,
) -> Result<(DisagreementConfig, Option<f64>)> {
    if initial.second_class_sites().len() != 2 {
        return Err(Error::InvalidConfig(
            "disagreement evolution needs exactly two second-class particles".into(),
        ));
    }
    let n = initial.n_sites();
    let mut labels = initial.labels.clone();
    let mut counters = vec![0u64; n];
    let mut queue = seed_queue(n, clocks, &mut counters);
    let mut tau = None;
    while let Some(Reverse((bits, site))) = queue.pop() {
        let t = f64::from_bits(bits);
        if t > horizon {
            break;
        }
        let x = site as usize;
        if ring_labels(&mut labels, x) {
            tau = Some(t);
        }
        let next = t + clocks.inter_arrival(n, x, counters[x]);
        counters[x] += 1;
        queue.push(Reverse((next.to_bits(), site)));
    }
    Ok((DisagreementConfig { labels }, tau))
}

/// Result of a capped coalescence run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoalescenceOutcome {
    Coalesced(f64),
    Censored,
}

/// Check membership in the two-site disagreement family: same N, same k,
/// Hamming distance exactly 2.
pub fn validate_pair(a: &RingConfig, b: &RingConfig) -> Result<()> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::MismatchedSize(a.n_sites(), b.n_sites()));
    }
    if a.k() != b.k() {
        return Err(Error::MismatchedCount(a.k(), b.k()));
    }
    let d = a.hamming_distance(b);
    if d != 2 {
        return Err(Error::NotDisagreementPair(format!(
            "Hamming distance is {d}, need exactly 2"
        )));
    }
    Ok(())
}

/// Coalescence time of a coupled pair differing in exactly two sites,
/// stopping early at annihilation. Censored if τ exceeds `cap`.
pub fn coalescence_time(
    pair: (&RingConfig, &RingConfig),
    clocks: &ClockSource,
    cap: f64,
) -> Result<CoalescenceOutcome> {
    validate_pair(pair.0, pair.1)?;
    let xi = disagreement(pair.0, pair.1)?;
    let n = xi.n_sites();
    let mut labels = xi.labels;
    let mut counters = vec![0u64; n];
    let mut queue = seed_queue(n, clocks, &mut counters);
    while let Some(Reverse((bits, site))) = queue.pop() {
        let t = f64::from_bits(bits);
        if t > cap {
            break;
        }
        let x = site as usize;
        if ring_labels(&mut labels, x) {
            return Ok(CoalescenceOutcome::Coalesced(t));
        }
        let next = t + clocks.inter_arrival(n, x, counters[x]);
        counters[x] += 1;
        queue.push(Reverse((next.to_bits(), site)));
    }
    Ok(CoalescenceOutcome::Censored)
}
