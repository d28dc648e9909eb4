//! Exact finite-N mixing analysis.
//!
//! For N and k small enough to enumerate all C(N,k) configurations, the
//! generator is a sparse matrix with unit off-diagonal rates (one per
//! particle-vacancy adjacency). Transient distributions come from
//! uniformization: e^{tQ} = Σ_m Pois_{Λt}(m) P^m with P = I + Q/Λ, which
//! needs only sparse matrix-vector products and is numerically benign.
//!
//! The worst initial state over total variation is found by sweeping one
//! representative per rotation class: the dynamics and the uniform measure
//! are invariant under rotating the ring, so TV from η at time t equals TV
//! from any rotation of η. This makes the full worst-case sweep exact at a
//! fraction of the cost.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

pub const DEFAULT_STATE_CAP: u64 = 200_000;

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All C(N,k) ring configurations as bitmasks (bit x = site x occupied), in
/// ascending (lexicographic) order, with the inverse index map.
#[derive(Debug)]
pub struct StateSpace {
    n: usize,
    k: usize,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl StateSpace {
    pub fn enumerate(n: usize, k: usize, cap: u64) -> Result<Self> {
        if n < 2 || k == 0 || k >= n || n > 63 {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k < N and N <= 63, got N={n}, k={k}"
            )));
        }
        let size = binomial(n as u64, k as u64);
        if size > cap as u128 {
            return Err(Error::CapExceeded(size.min(u64::MAX as u128) as u64, cap));
        }
        let mut states = Vec::with_capacity(size as usize);
        // Gosper's hack: next bitmask with the same popcount
        let mut m: u64 = (1 << k) - 1;
        let limit: u64 = 1 << n;
        while m < limit {
            states.push(m);
            let c = m & m.wrapping_neg();
            let r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
        }
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(Self { n, k, states, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> u64 {
        self.states[i]
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    fn rotate(&self, mask: u64, r: usize) -> u64 {
        let n = self.n;
        ((mask << r) | (mask >> (n - r))) & ((1u64 << n) - 1)
    }

    /// One representative per rotation class: the states that are minimal
    /// among their own rotations.
    pub fn rotation_class_reps(&self) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &m)| (1..self.n).all(|r| self.rotate(m, r) >= m))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Sparse generator: unit rate from each state to each single-jump
/// neighbor; diagonal is minus the number of particle-vacancy adjacencies.
#[derive(Debug)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<u32>>,
    exit: Vec<u32>,
    lambda: u32,
}

impl GeneratorMatrix {
    /// Unit-rate targets of state i.
    pub fn targets(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    /// Exit rate of state i (equals the number of outgoing transitions).
    pub fn exit_rate(&self, i: usize) -> u32 {
        self.exit[i]
    }

    /// Uniformization rate: the maximum exit rate.
    pub fn lambda(&self) -> u32 {
        self.lambda
    }
}

/// Enumerate the state space and assemble the generator.
pub fn build(n: usize, k: usize) -> Result<(StateSpace, GeneratorMatrix)> {
    build_capped(n, k, DEFAULT_STATE_CAP)
}

pub fn build_capped(n: usize, k: usize, cap: u64) -> Result<(StateSpace, GeneratorMatrix)> {
    let ss = StateSpace::enumerate(n, k, cap)?;
    let mut rows = Vec::with_capacity(ss.len());
    let mut exit = Vec::with_capacity(ss.len());
    for i in 0..ss.len() {
        let m = ss.state(i);
        let mut targets = Vec::new();
        for x in 0..n {
            let y = (x + 1) % n;
            if m & (1 << x) != 0 && m & (1 << y) == 0 {
                let m2 = (m & !(1 << x)) | (1 << y);
                targets.push(ss.index_of(m2).expect("jump stays in the state space") as u32);
            }
        }
        exit.push(targets.len() as u32);
        rows.push(targets);
    }
    let lambda = exit.iter().copied().max().unwrap();
    Ok((ss, GeneratorMatrix { rows, exit, lambda }))
}

/// Evolve a distribution to time t by uniformization; the truncated Poisson
/// tail mass is below tol, so the output sums to 1 within tol.
pub fn transient(dist0: &[f64], gm: &GeneratorMatrix, t: f64, tol: f64) -> Result<Vec<f64>> {
    if dist0.len() != gm.rows.len() {
        return Err(Error::MismatchedSize(dist0.len(), gm.rows.len()));
    }
    if t < 0.0 || tol <= 0.0 {
        return Err(Error::InvalidParameter("need t >= 0 and tol > 0".into()));
    }
    let lam = gm.lambda as f64;
    let a = lam * t;
    if a == 0.0 {
        return Ok(dist0.to_vec());
    }
    let size = dist0.len();
    let mut v = dist0.to_vec();
    let mut out = vec![0.0f64; size];
    let mut acc = vec![0.0f64; size];
    let mut cum = 0.0f64;
    let mut m = 0u64;
    let max_terms = (10.0 * a) as u64 + 2000;
    while cum < 1.0 - tol {
        let w = (-a + m as f64 * a.ln() - ln_gamma(m as f64 + 1.0)).exp();
        if w > 0.0 {
            for (o, &x) in out.iter_mut().zip(&v) {
                *o += w * x;
            }
            cum += w;
        }
        // v <- v P, P = I + Q/lambda (row-vector convention)
        acc.iter_mut().for_each(|x| *x = 0.0);
        for (i, targets) in gm.rows.iter().enumerate() {
            let share = v[i] / lam;
            for &j in targets {
                acc[j as usize] += share;
            }
        }
        for i in 0..size {
            v[i] = v[i] * (1.0 - gm.exit[i] as f64 / lam) + acc[i];
        }
        m += 1;
        if m > max_terms {
            return Err(Error::InvalidParameter(format!(
                "uniformization did not converge within {max_terms} terms (t={t})"
            )));
        }
    }
    Ok(out)
}

/// Total variation distance to the uniform distribution.
pub fn tv_to_uniform(dist: &[f64]) -> f64 {
    let u = 1.0 / dist.len() as f64;
    0.5 * dist.iter().map(|&p| (p - u).abs()).sum::<f64>()
}

/// Worst-case-over-initial-states TV to uniform at time t, computed exactly
/// via one representative per rotation class.
pub fn worst_tv(ss: &StateSpace, gm: &GeneratorMatrix, t: f64, tol: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for rep in ss.rotation_class_reps() {
        let mut d0 = vec![0.0; ss.len()];
        d0[rep] = 1.0;
        let d = transient(&d0, gm, t, tol)?;
        worst = worst.max(tv_to_uniform(&d));
    }
    Ok(worst)
}

/// Worst-case TV on a time grid.
#[derive(Debug, Clone)]
pub struct TVCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn tv_curve(ss: &StateSpace, gm: &GeneratorMatrix, times: &[f64], tol: f64) -> Result<TVCurve> {
    let values = times
        .iter()
        .map(|&t| worst_tv(ss, gm, t, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(TVCurve {
        times: times.to_vec(),
        values,
    })
}

/// ε-mixing time by bisection on the worst-case TV, to absolute accuracy
/// tol in time. The bracket starts at [0, 10 N²] and doubles if needed.
pub fn mixing_time(n: usize, k: usize, eps: f64, tol: f64) -> Result<f64> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::InvalidParameter("epsilon must be in (0,1)".into()));
    }
    let (ss, gm) = build(n, k)?;
    mixing_time_with(&ss, &gm, eps, tol)
}

pub fn mixing_time_with(ss: &StateSpace, gm: &GeneratorMatrix, eps: f64, tol: f64) -> Result<f64> {
    let dist_tol = (tol * 1e-3).min(1e-10);
    let mut lo = 0.0f64;
    let mut hi = 10.0 * (ss.n() * ss.n()) as f64;
    let mut tries = 0;
    while worst_tv(ss, gm, hi, dist_tol)? >= eps {
        hi *= 2.0;
        tries += 1;
        if tries > 20 {
            return Err(Error::InvalidParameter("mixing-time bracket expansion failed".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if worst_tv(ss, gm, mid, dist_tol)? < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact stationary law of the particle count in a window of the first
/// `window_len` sites, by enumerating all configurations. Returns the pmf
/// indexed by count 0..=window_len.
pub fn window_count_law(n: usize, k: usize, window_len: usize) -> Result<Vec<f64>> {
    if window_len == 0 || window_len > n {
        return Err(Error::InvalidParameter("window must satisfy 1 <= len <= N".into()));
    }
    let ss = StateSpace::enumerate(n, k, DEFAULT_STATE_CAP)?;
    let mut counts = vec![0u64; window_len + 1];
    let wmask = (1u64 << window_len) - 1;
    for i in 0..ss.len() {
        counts[(ss.state(i) & wmask).count_ones() as usize] += 1;
    }
    let total = ss.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Hypergeometric pmf P(Z = z) for a size-`window_len` sample from N sites
/// containing k particles, via exact binomials. Reference law for
/// [`window_count_law`].
pub fn hypergeometric_pmf(n: usize, k: usize, window_len: usize, z: usize) -> f64 {
    let num = binomial(window_len as u64, z as u64)
        * binomial((n - window_len) as u64, (k as i64 - z as i64).max(0) as u64);
    if z > k || k - z > n - window_len {
        return 0.0;
    }
    num as f64 / binomial(n as u64, k as u64) as f64
}

/// One row of the cutoff diagnostic: the late/early mixing-time ratio
/// t_mix(ε) / t_mix(1−ε) ≥ 1; cutoff would force it to 1 as N → ∞.
#[derive(Debug, Clone)]
pub struct NoCutoffRow {
    pub n: usize,
    pub k: usize,
    pub t_late: f64,
    pub t_early: f64,
    pub ratio: f64,
}

pub fn no_cutoff_profile(pairs: &[(usize, usize)], eps: f64, tol: f64) -> Result<Vec<NoCutoffRow>> {
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::InvalidParameter("epsilon must be in (0, 1/2)".into()));
    }
    pairs
        .iter()
        .map(|&(n, k)| {
            let (ss, gm) = build(n, k)?;
            let t_late = mixing_time_with(&ss, &gm, eps, tol)?;
            let t_early = mixing_time_with(&ss, &gm, 1.0 - eps, tol)?;
            Ok(NoCutoffRow {
                n,
                k,
                t_late,
                t_early,
                ratio: t_late / t_early,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analytic law of the single-particle chain: position displacement is
    /// Poisson(t) folded mod N.
    fn folded_poisson(n: usize, t: f64) -> Vec<f64> {
        let mut p = vec![0.0f64; n];
        let mut term = (-t).exp();
        let mut m = 0usize;
        loop {
            p[m % n] += term;
            m += 1;
            term *= t / m as f64;
            if term < 1e-18 && m as f64 > t {
                break;
            }
        }
        p
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 4), 210);
        assert_eq!(binomial(20, 10), 184756);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn tiny_chains() {
        let (ss, gm) = build(3, 1).unwrap();
        assert_eq!(ss.len(), 3);
        for i in 0..3 {
            assert_eq!(gm.exit_rate(i), 1);
            assert_eq!(gm.targets(i).len(), 1);
        }
        let (ss, gm) = build(4, 2).unwrap();
        assert_eq!(ss.len(), 6);
        let i = ss.index_of(0b0011).unwrap(); // particles at sites 0,1
        assert_eq!(gm.exit_rate(i), 1);
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            build_capped(30, 15, 1000),
            Err(Error::CapExceeded(_, 1000))
        ));
    }

    #[test]
    fn uniform_is_exactly_stationary() {
        // in-degree equals out-degree for every state, as integers
        let (ss, gm) = build(8, 3).unwrap();
        let mut indeg = vec![0u32; ss.len()];
        for i in 0..ss.len() {
            for &j in gm.targets(i) {
                indeg[j as usize] += 1;
            }
        }
        for i in 0..ss.len() {
            assert_eq!(indeg[i], gm.exit_rate(i), "state {i}");
        }
    }

    #[test]
    fn transient_time_zero() {
        let (ss, gm) = build(5, 2).unwrap();
        let mut d0 = vec![0.0; ss.len()];
        d0[3] = 1.0;
        assert_eq!(transient(&d0, &gm, 0.0, 1e-12).unwrap(), d0);
    }

    #[test]
    fn transient_matches_folded_poisson() {
        let (ss, gm) = build(3, 1).unwrap();
        let start = ss.index_of(0b001).unwrap();
        let mut d0 = vec![0.0; 3];
        d0[start] = 1.0;
        let d = transient(&d0, &gm, 1.0, 1e-12).unwrap();
        let p = folded_poisson(3, 1.0);
        // state with particle at site (0 + j) mod 3 has mass p[j]
        for j in 0..3 {
            let idx = ss.index_of(1 << (j % 3)).unwrap();
            assert!((d[idx] - p[j]).abs() < 1e-10, "j={j}: {} vs {}", d[idx], p[j]);
        }
    }

    #[test]
    fn uniform_stays_uniform() {
        let (ss, gm) = build(6, 3).unwrap();
        let u = vec![1.0 / ss.len() as f64; ss.len()];
        let d = transient(&u, &gm, 2.5, 1e-12).unwrap();
        for &x in &d {
            assert!((x - u[0]).abs() < 1e-11);
        }
        let mass: f64 = d.iter().sum();
        assert!((mass - 1.0).abs() < 1e-11);
        assert!(d.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn tv_curve_non_increasing() {
        let (ss, gm) = build(6, 2).unwrap();
        let times: Vec<f64> = (0..12).map(|i| i as f64 * 1.5).collect();
        let curve = tv_curve(&ss, &gm, &times, 1e-10).unwrap();
        for w in curve.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert!(curve.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((curve.values[0] - (1.0 - 1.0 / ss.len() as f64)).abs() < 1e-12);
    }

    #[test]
    fn rotation_reduction_is_exact() {
        // worst TV over rotation-class representatives equals the full sweep
        let (ss, gm) = build(6, 2).unwrap();
        let t = 3.0;
        let mut full = 0.0f64;
        for i in 0..ss.len() {
            let mut d0 = vec![0.0; ss.len()];
            d0[i] = 1.0;
            full = full.max(tv_to_uniform(&transient(&d0, &gm, t, 1e-12).unwrap()));
        }
        let reduced = worst_tv(&ss, &gm, t, 1e-12).unwrap();
        assert!((full - reduced).abs() < 1e-12);
    }

    #[test]
    fn single_particle_mixing_time_oracle() {
        // root-find on the analytic folded-Poisson TV, independently of the
        // matrix machinery
        let n = 3;
        let tv = |t: f64| {
            let p = folded_poisson(n, t);
            0.5 * p.iter().map(|&x| (x - 1.0 / n as f64).abs()).sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0f64, 100.0f64);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if tv(mid) < 0.25 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let want = 0.5 * (lo + hi);
        let got = mixing_time(3, 1, 0.25, 1e-6).unwrap();
        assert!((got - want).abs() < 1e-5, "got {got}, want {want}");
    }

    #[test]
    fn particle_hole_symmetry() {
        let t = mixing_time(5, 2, 0.25, 1e-4).unwrap();
        let t2 = mixing_time(5, 3, 0.25, 1e-4).unwrap();
        assert!((t - t2).abs() < 2e-4, "{t} vs {t2}");
        // full curve agreement
        let (ss1, gm1) = build(6, 2).unwrap();
        let (ss2, gm2) = build(6, 4).unwrap();
        for &t in &[0.5, 2.0, 5.0, 12.0] {
            let a = worst_tv(&ss1, &gm1, t, 1e-11).unwrap();
            let b = worst_tv(&ss2, &gm2, t, 1e-11).unwrap();
            assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn mixing_time_monotone_in_epsilon() {
        let (ss, gm) = build(6, 3).unwrap();
        let t1 = mixing_time_with(&ss, &gm, 0.1, 1e-4).unwrap();
        let t2 = mixing_time_with(&ss, &gm, 0.3, 1e-4).unwrap();
        assert!(t1 >= t2 - 1e-3, "{t1} < {t2}");
    }

    #[test]
    fn window_law_is_hypergeometric() {
        let pmf = window_count_law(10, 4, 2).unwrap();
        assert!((pmf[0] - 1.0 / 3.0).abs() < 1e-12);
        for n in [6usize, 10, 15, 20] {
            for k in [1usize, n / 3, n / 2] {
                if k == 0 || k >= n {
                    continue;
                }
                let w = n / 5 + 1;
                let pmf = window_count_law(n, k, w).unwrap();
                let mut mean = 0.0;
                let mut var = 0.0;
                for (z, &p) in pmf.iter().enumerate() {
                    assert!(
                        (p - hypergeometric_pmf(n, k, w, z)).abs() < 1e-12,
                        "N={n} k={k} w={w} z={z}"
                    );
                    mean += z as f64 * p;
                }
                for (z, &p) in pmf.iter().enumerate() {
                    var += (z as f64 - mean).powi(2) * p;
                }
                let expect = k as f64 * w as f64 / n as f64;
                assert!((mean - expect).abs() < 1e-12);
                assert!(var <= expect + 1e-12, "variance bound");
            }
        }
    }

    #[test]
    fn cutoff_ratio_single_particle_oracle() {
        // N=6, k=1: the chain is the folded Poisson walk; compute both
        // mixing times analytically and compare the ratio
        let n = 6usize;
        let tv = |t: f64| {
            let p = folded_poisson(n, t);
            0.5 * p.iter().map(|&x| (x - 1.0 / n as f64).abs()).sum::<f64>()
        };
        let solve = |eps: f64| {
            let (mut lo, mut hi) = (0.0f64, 400.0f64);
            while hi - lo > 1e-8 {
                let mid = 0.5 * (lo + hi);
                if tv(mid) < eps {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        // note 1 - eps must stay below the initial TV 1 - 1/6, else the
        // early mixing time degenerates to zero
        let want = solve(0.2) / solve(0.8);
        let rows = no_cutoff_profile(&[(6, 1)], 0.2, 1e-5).unwrap();
        let rel = (rows[0].ratio - want).abs() / want;
        assert!(rel < 1e-3, "{} vs {want}", rows[0].ratio);
        assert!(rows[0].ratio >= 1.0);
    }
}
