//! Exponential last passage percolation on `Z²`.
//!
//! Weights are iid Exponential(1), or `(N,k)`-periodic: invariant under the
//! shift `(N−k, −k)`, which is the LPP encoding of a ring of `N` sites with
//! `k` particles. Last passage times use the endpoint-exclusion convention
//! (the weight at the target cell is not counted), which makes concatenation
//! along a path exactly additive.
//!
//! The module also carries the discrete-geometry vocabulary used around
//! geodesics: lines `L_{m,ℓ}` of rational slope, segments, parallelograms,
//! corridors, transversal fluctuations, periodic translates, and the best
//! path to a periodic translate of a target.

use crate::rng;
use crate::{Error, Result};

/// Lattice site, ordered coordinatewise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub v1: i64,
    pub v2: i64,
}

pub const E1: Cell = Cell { v1: 1, v2: 0 };
pub const E2: Cell = Cell { v1: 0, v2: 1 };

impl Cell {
    pub const fn new(v1: i64, v2: i64) -> Self {
        Self { v1, v2 }
    }

    /// Coordinatewise partial order u ⪯ v.
    pub fn le(&self, other: &Cell) -> bool {
        self.v1 <= other.v1 && self.v2 <= other.v2
    }

    pub fn plus(&self, other: Cell) -> Cell {
        Cell::new(self.v1 + other.v1, self.v2 + other.v2)
    }

    pub fn minus(&self, other: Cell) -> Cell {
        Cell::new(self.v1 - other.v1, self.v2 - other.v2)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.v1, self.v2)
    }
}

fn order_check(u: Cell, v: Cell) -> Result<()> {
    if u.le(&v) {
        Ok(())
    } else {
        Err(Error::NotComparable(u.v1, u.v2, v.v1, v.v2))
    }
}

/// Anything that assigns a positive weight to every cell. Implemented by
/// [`Environment`] and by the strip-coupled field used to compare periodic
/// and iid geodesics.
pub trait WeightField {
    fn weight(&self, v: Cell) -> f64;
}

const WEIGHT_TAG: u64 = 0x3e16;

/// Exponential(1) weight field, iid or (N,k)-periodic, lazily generated:
/// the weight of a cell is a pure function of (seed, canonical cell).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Environment {
    Iid { seed: u64 },
    Periodic { n: usize, k: usize, seed: u64 },
}

impl Environment {
    pub fn iid(seed: u64) -> Self {
        Environment::Iid { seed }
    }

    pub fn periodic(n: usize, k: usize, seed: u64) -> Result<Self> {
        if n < 2 || k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "periodic environment needs 1 <= k <= N-1, got N={n}, k={k}"
            )));
        }
        Ok(Environment::Periodic { n, k, seed })
    }

    /// Period vector (N−k, −k) for periodic environments.
    pub fn period(&self) -> Option<Cell> {
        match self {
            Environment::Iid { .. } => None,
            Environment::Periodic { n, k, .. } => Some(Cell::new((n - k) as i64, -(*k as i64))),
        }
    }

    /// Reduce a cell to the representative with v2 ∈ {0,…,k−1} (periodic)
    /// or itself (iid).
    pub fn canonical(&self, v: Cell) -> Cell {
        match self {
            Environment::Iid { .. } => v,
            Environment::Periodic { n, k, .. } => {
                let k = *k as i64;
                let i = v.v2.div_euclid(k);
                Cell::new(v.v1 + i * (*n as i64 - k), v.v2 - i * k)
            }
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Environment::Iid { seed } => *seed,
            Environment::Periodic { seed, .. } => *seed,
        }
    }
}

impl WeightField for Environment {
    #[inline]
    fn weight(&self, v: Cell) -> f64 {
        let c = self.canonical(v);
        rng::exp1(self.seed(), c.v1 as u64, c.v2 as u64, WEIGHT_TAG)
    }
}

/// Up-right lattice path (consecutive differences are e1 or e2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    cells: Vec<Cell>,
}

impl LatticePath {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidParameter("empty lattice path".into()));
        }
        for w in cells.windows(2) {
            let d = w[1].minus(w[0]);
            if d != E1 && d != E2 {
                return Err(Error::InvalidParameter(format!(
                    "non up-right step {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        *self.cells.last().unwrap()
    }

    /// Total weight along the path with the endpoint excluded — the quantity
    /// a geodesic maximizes.
    pub fn weight_excluding_end<W: WeightField>(&self, field: &W) -> f64 {
        self.cells[..self.cells.len() - 1]
            .iter()
            .map(|&c| field.weight(c))
            .sum()
    }

    /// Geodesic ordering: self ⪰ other iff the paths never cross, i.e. at
    /// every shared column both endpoints of self's vertical span weakly
    /// dominate the corresponding endpoints of other's span. Geodesics may
    /// merge and share cells, which this ordering allows.
    pub fn lies_above(&self, other: &LatticePath) -> bool {
        // both paths are up-right, so per column the occupied rows form an
        // interval; compare interval endpoints componentwise
        let span = |p: &LatticePath, x: i64| -> Option<(i64, i64)> {
            if x < p.start().v1 || x > p.end().v1 {
                return None;
            }
            let lo = p
                .cells
                .iter()
                .filter(|c| c.v1 == x)
                .map(|c| c.v2)
                .min()
                .unwrap();
            let hi = p
                .cells
                .iter()
                .filter(|c| c.v1 == x)
                .map(|c| c.v2)
                .max()
                .unwrap();
            Some((lo, hi))
        };
        let lo_x = self.start().v1.max(other.start().v1);
        let hi_x = self.end().v1.min(other.end().v1);
        for x in lo_x..=hi_x {
            if let (Some((alo, ahi)), Some((blo, bhi))) = (span(self, x), span(other, x)) {
                if alo < blo || ahi < bhi {
                    return false;
                }
            }
        }
        true
    }
}

/// Last passage time T_{u,v}: max over up-right paths u → v of the weights
/// along the path, excluding the weight at v. Rolling-row DP, O(width) memory.
pub fn lpt<W: WeightField>(field: &W, u: Cell, v: Cell) -> Result<f64> {
    order_check(u, v)?;
    let dx = (v.v1 - u.v1) as usize;
    let dy = (v.v2 - u.v2) as usize;
    let mut row = vec![0.0f64; dx + 1];
    let mut wrow = vec![0.0f64; dx + 1];
    // bottom row: forced e1 steps
    for x in 0..=dx {
        wrow[x] = field.weight(Cell::new(u.v1 + x as i64, u.v2));
        if x > 0 {
            row[x] = row[x - 1] + wrow[x - 1];
        }
    }
    for y in 1..=dy {
        // wrow holds the weights of row y-1 (the "below" predecessors)
        let mut left_f = row[0] + wrow[0];
        let mut left_w = field.weight(Cell::new(u.v1, u.v2 + y as i64));
        row[0] = left_f;
        wrow[0] = left_w;
        for x in 1..=dx {
            let below = row[x] + wrow[x];
            let here_w = field.weight(Cell::new(u.v1 + x as i64, u.v2 + y as i64));
            let f = (left_f + left_w).max(below);
            row[x] = f;
            wrow[x] = here_w;
            left_f = f;
            left_w = here_w;
        }
    }
    Ok(row[dx])
}

/// Full DP grid for backtracking. F[y][x] = T_{u, u+(x,y)}.
fn lpt_grid<W: WeightField>(field: &W, u: Cell, v: Cell) -> (Vec<f64>, usize, usize) {
    let dx = (v.v1 - u.v1) as usize;
    let dy = (v.v2 - u.v2) as usize;
    let w = dx + 1;
    let mut grid = vec![0.0f64; w * (dy + 1)];
    let mut wrow = vec![0.0f64; w];
    for x in 0..=dx {
        wrow[x] = field.weight(Cell::new(u.v1 + x as i64, u.v2));
        if x > 0 {
            grid[x] = grid[x - 1] + wrow[x - 1];
        }
    }
    for y in 1..=dy {
        let (prev, cur) = grid.split_at_mut(w * y);
        let prev = &prev[w * (y - 1)..];
        let cur = &mut cur[..w];
        let mut left_w = field.weight(Cell::new(u.v1, u.v2 + y as i64));
        cur[0] = prev[0] + wrow[0];
        wrow[0] = left_w;
        for x in 1..=dx {
            let below = prev[x] + wrow[x];
            let here_w = field.weight(Cell::new(u.v1 + x as i64, u.v2 + y as i64));
            cur[x] = (cur[x - 1] + left_w).max(below);
            wrow[x] = here_w;
            left_w = here_w;
        }
    }
    (grid, dx, dy)
}

/// The geodesic attaining `lpt(field, u, v)`. On exact float ties the e2
/// predecessor is preferred, making the path deterministic.
pub fn geodesic<W: WeightField>(field: &W, u: Cell, v: Cell) -> Result<LatticePath> {
    order_check(u, v)?;
    let (grid, dx, dy) = lpt_grid(field, u, v);
    let w = dx + 1;
    let mut cells = Vec::with_capacity(dx + dy + 1);
    let (mut x, mut y) = (dx, dy);
    cells.push(v);
    while x > 0 || y > 0 {
        let from_below = y > 0 && {
            let p = Cell::new(u.v1 + x as i64, u.v2 + y as i64 - 1);
            x == 0 || grid[w * (y - 1) + x] + field.weight(p)
                >= grid[w * y + x - 1] + field.weight(Cell::new(u.v1 + x as i64 - 1, u.v2 + y as i64))
        };
        if from_below {
            y -= 1;
        } else {
            x -= 1;
        }
        cells.push(Cell::new(u.v1 + x as i64, u.v2 + y as i64));
    }
    cells.reverse();
    Ok(LatticePath { cells })
}

/// Set-to-set last passage time: max of T_{a,b} over comparable pairs,
/// with an attaining pair. Multi-source DP over the bounding rectangle.
pub fn lpt_sets<W: WeightField>(
    field: &W,
    a: &[Cell],
    b: &[Cell],
) -> Result<(f64, (Cell, Cell))> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoComparablePair);
    }
    let lo = Cell::new(
        a.iter().map(|c| c.v1).min().unwrap(),
        a.iter().map(|c| c.v2).min().unwrap(),
    );
    let hi = Cell::new(
        b.iter().map(|c| c.v1).max().unwrap(),
        b.iter().map(|c| c.v2).max().unwrap(),
    );
    if !lo.le(&hi) {
        return Err(Error::NoComparablePair);
    }
    let w = (hi.v1 - lo.v1 + 1) as usize;
    let h = (hi.v2 - lo.v2 + 1) as usize;
    let mut f = vec![f64::NEG_INFINITY; w * h];
    let mut src = vec![u32::MAX; w * h];
    let at = |c: Cell| -> Option<usize> {
        if lo.le(&c) && c.le(&hi) {
            Some(((c.v2 - lo.v2) as usize) * w + (c.v1 - lo.v1) as usize)
        } else {
            None
        }
    };
    let mut sources = vec![Vec::new(); w * h];
    for (i, &c) in a.iter().enumerate() {
        if let Some(idx) = at(c) {
            sources[idx].push(i as u32);
        }
    }
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let mut best = f64::NEG_INFINITY;
            let mut who = u32::MAX;
            let cell = Cell::new(lo.v1 + x as i64, lo.v2 + y as i64);
            if x > 0 && f[idx - 1].is_finite() {
                let cand = f[idx - 1] + field.weight(Cell::new(cell.v1 - 1, cell.v2));
                if cand > best {
                    best = cand;
                    who = src[idx - 1];
                }
            }
            if y > 0 && f[idx - w].is_finite() {
                let cand = f[idx - w] + field.weight(Cell::new(cell.v1, cell.v2 - 1));
                if cand > best {
                    best = cand;
                    who = src[idx - w];
                }
            }
            if !sources[idx].is_empty() && best < 0.0 {
                best = 0.0;
                who = sources[idx][0];
            }
            f[idx] = best;
            src[idx] = who;
        }
    }
    let mut out: Option<(f64, (Cell, Cell))> = None;
    for &t in b {
        if let Some(idx) = at(t) {
            if f[idx].is_finite() {
                let pair = (a[src[idx] as usize], t);
                match out {
                    Some((cur, _)) if cur >= f[idx] => {}
                    _ => out = Some((f[idx], pair)),
                }
            }
        }
    }
    out.ok_or(Error::NoComparablePair)
}

/// Rational slope m = num/den in lowest terms, den > 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slope {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Slope {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("slope with zero denominator".into()));
        }
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    // b > 0
    a.div_euclid(b) + i128::from(a.rem_euclid(b) != 0)
}

/// Membership in the discrete line L_{m,ℓ} = {(x, ⌊m·x + ℓ⌋)} (exact
/// rational arithmetic).
pub fn line_contains(m: Slope, ell: i64, v: Cell) -> bool {
    let y = floor_div(
        m.num as i128 * v.v1 as i128 + ell as i128 * m.den as i128,
        m.den as i128,
    );
    v.v2 as i128 == y
}

/// The unique integer shift ℓ with v ∈ L_{m,ℓ}: ℓ = ⌈v2 − m·v1⌉.
pub fn line_index(m: Slope, v: Cell) -> i64 {
    ceil_div(
        v.v2 as i128 * m.den as i128 - m.num as i128 * v.v1 as i128,
        m.den as i128,
    ) as i64
}

/// Geometric regions of Z² used around geodesics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Discrete line of slope m and integer shift ℓ.
    Line { m: Slope, ell: i64 },
    /// Lattice segment from u to v: {(⌊u1+x·d1⌋, ⌊u2+x·d2⌋) : x ∈ [0,1]}.
    Segment { u: Cell, v: Cell },
    /// Sites with 0 ≤ v1 ≤ n between L_{m,−ℓ/2} and L_{m,ℓ/2} (real
    /// inequalities, ℓ/2 exact).
    Parallelogram { n: i64, m: Slope, ell: i64 },
    /// Open strip strictly between L_{m,−ℓ} and L_{m,ℓ}, touching neither.
    Corridor { m: Slope, ell: i64 },
}

impl Region {
    pub fn contains(&self, v: Cell) -> bool {
        match *self {
            Region::Line { m, ell } => line_contains(m, ell, v),
            Region::Segment { u, v: w } => segment_cells(u, w).contains(&v),
            Region::Parallelogram { n, m, ell } => {
                if v.v1 < 0 || v.v1 > n {
                    return false;
                }
                let lhs = 2 * m.num as i128 * v.v1 as i128;
                let mid = 2 * m.den as i128 * v.v2 as i128;
                let half = ell as i128 * m.den as i128;
                lhs - half <= mid && mid <= lhs + half
            }
            Region::Corridor { m, ell } => {
                let i = line_index(m, v);
                -ell < i && i < ell
            }
        }
    }
}

/// Enumerate the cells of the segment S(u,v), in order of the parameter x.
///
/// The floors are piecewise constant in x; we evaluate at every breakpoint
/// (where either coordinate crosses an integer) and at midpoints between
/// consecutive breakpoints, with exact rational arithmetic, which covers all
/// attained values for either sign of the direction.
pub fn segment_cells(u: Cell, v: Cell) -> Vec<Cell> {
    let d1 = v.v1 - u.v1;
    let d2 = v.v2 - u.v2;
    // candidate x values as exact fractions (num, den) in [0,1]
    let mut xs: Vec<(i64, i64)> = vec![(0, 1), (1, 1)];
    for d in [d1.abs(), d2.abs()] {
        for j in 1..d {
            xs.push((j, d));
        }
    }
    xs.sort_by(|a, b| (a.0 as i128 * b.1 as i128).cmp(&(b.0 as i128 * a.1 as i128)));
    xs.dedup_by(|a, b| a.0 as i128 * b.1 as i128 == b.0 as i128 * a.1 as i128);
    // insert midpoints between consecutive breakpoints
    let mut samples: Vec<(i64, i64)> = Vec::with_capacity(2 * xs.len());
    for w in xs.windows(2) {
        let (an, ad) = w[0];
        let (bn, bd) = w[1];
        samples.push((an, ad));
        samples.push((an * bd + bn * ad, 2 * ad * bd));
    }
    samples.push(*xs.last().unwrap());
    let mut cells = Vec::new();
    for (num, den) in samples {
        let c = Cell::new(
            (u.v1 as i128 + floor_div(num as i128 * d1 as i128, den as i128)) as i64,
            (u.v2 as i128 + floor_div(num as i128 * d2 as i128, den as i128)) as i64,
        );
        if cells.last() != Some(&c) {
            cells.push(c);
        }
    }
    cells
}

/// Restricted last passage time: paths from u to v whose cells avoid both
/// L_{m,ℓ} and L_{m,−ℓ}. `None` when no admissible path exists.
pub fn restricted_lpt<W: WeightField>(
    field: &W,
    u: Cell,
    v: Cell,
    m: Slope,
    ell: i64,
) -> Result<Option<f64>> {
    order_check(u, v)?;
    let forbidden = |c: Cell| {
        let i = line_index(m, c);
        (i == ell || i == -ell) && line_contains(m, i, c)
    };
    let dx = (v.v1 - u.v1) as usize;
    let dy = (v.v2 - u.v2) as usize;
    let mut row = vec![f64::NEG_INFINITY; dx + 1];
    let mut wrow = vec![0.0f64; dx + 1];
    for x in 0..=dx {
        let c = Cell::new(u.v1 + x as i64, u.v2);
        wrow[x] = field.weight(c);
        let pred = if x == 0 {
            0.0
        } else if row[x - 1].is_finite() {
            row[x - 1] + wrow[x - 1]
        } else {
            f64::NEG_INFINITY
        };
        row[x] = if forbidden(c) { f64::NEG_INFINITY } else { pred };
    }
    for y in 1..=dy {
        let mut left_f = f64::NEG_INFINITY;
        let mut left_w = 0.0;
        for x in 0..=dx {
            let c = Cell::new(u.v1 + x as i64, u.v2 + y as i64);
            let below = if row[x].is_finite() {
                row[x] + wrow[x]
            } else {
                f64::NEG_INFINITY
            };
            let left = if left_f.is_finite() {
                left_f + left_w
            } else {
                f64::NEG_INFINITY
            };
            let here_w = field.weight(c);
            let f = if forbidden(c) {
                f64::NEG_INFINITY
            } else {
                left.max(below)
            };
            row[x] = f;
            left_f = f;
            left_w = here_w;
            wrow[x] = here_w;
        }
    }
    Ok(row[dx].is_finite().then_some(row[dx]))
}

/// Transversal fluctuation of a path relative to the slope-m line through
/// its start: max |j − m·i| over path cells start+(i,j). Exact rational max,
/// returned as a float.
pub fn transversal_fluctuation(path: &LatticePath, m: Slope) -> f64 {
    let v = path.start();
    let mut best: i128 = 0;
    for c in path.cells() {
        let i = (c.v1 - v.v1) as i128;
        let j = (c.v2 - v.v2) as i128;
        best = best.max((j * m.den as i128 - i * m.num as i128).abs());
    }
    best as f64 / m.den as f64
}

/// The (N,k)-periodic translates v + (i(N−k), −ik) for i in the range.
pub fn translates(v: Cell, n: usize, k: usize, range: std::ops::RangeInclusive<i64>) -> Vec<Cell> {
    let p = Cell::new((n - k) as i64, -(k as i64));
    range
        .map(|i| Cell::new(v.v1 + i * p.v1, v.v2 + i * p.v2))
        .collect()
}

/// Best path from u to the periodic translates of v: the geodesic to the
/// translate w* maximizing T_{u,w}. The admissible translate interval is
/// computed exactly; `search_range` must contain it.
pub fn periodic_best_path(
    env: &Environment,
    u: Cell,
    v: Cell,
    search_range: std::ops::RangeInclusive<i64>,
) -> Result<(LatticePath, Cell)> {
    let (n, k) = match env {
        Environment::Periodic { n, k, .. } => (*n as i64, *k as i64),
        Environment::Iid { .. } => return Err(Error::NotPeriodic),
    };
    // w = v + (i(N−k), −ik) ⪰ u bounds i from both sides
    let need_lo = ceil_div((u.v1 - v.v1) as i128, (n - k) as i128) as i64;
    let need_hi = floor_div((v.v2 - u.v2) as i128, k as i128) as i64;
    if need_lo > need_hi {
        return Err(Error::NoAdmissibleTranslate);
    }
    if *search_range.start() > need_lo || *search_range.end() < need_hi {
        return Err(Error::TruncatedRange {
            given_lo: *search_range.start(),
            given_hi: *search_range.end(),
            need_lo,
            need_hi,
        });
    }
    let mut best: Option<(f64, Cell)> = None;
    for i in need_lo..=need_hi {
        let w = Cell::new(v.v1 + i * (n - k), v.v2 - i * k);
        let t = lpt(env, u, w)?;
        if best.map_or(true, |(bt, _)| t > bt) {
            best = Some((t, w));
        }
    }
    let (_, w) = best.unwrap();
    Ok((geodesic(env, u, w)?, w))
}
