//! The dictionary between the ring TASEP and periodic LPP.
//!
//! A ring configuration is encoded as a bi-infinite periodic staircase: site
//! s contributes the step e1 when empty and −e2 when occupied. A particle
//! jump at site s flips the down-right corner at vertex s+1 up by (1,1),
//! filling one lattice cell; the waiting time of each corner is the
//! environment weight at the cell it fills. Running this corner growth in an
//! (N,k)-periodic environment *is* the TASEP, pathwise.
//!
//! Occupation times: the time cell v gets filled satisfies
//! `Occ(v) = ω(v) + max(Occ(v−e1), Occ(v−e2))`, where predecessors on or
//! below the initial staircase count as 0. Equivalently `Occ(v)` is the
//! set-to-set last passage time from the first layer of fill cells (one per
//! initial valley) to v, plus ω(v); this identity is exact, including float
//! arithmetic, and is asserted in tests.
//!
//! Competition interfaces: splitting the initial staircase at two peak
//! vertices j < j̃ two-colors every filled cell by the side its growth
//! lineage is rooted in, and the two color boundaries φ, φ̃ trace the two
//! second-class particles of the disagreement process (after expanding each
//! second-class particle into a (0,1) site pair).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::periodic_lpp::{lpt_sets, Cell, Environment, WeightField};
use crate::ring_tasep::{DisagreementConfig, RingConfig};
use crate::{Error, Result};

/// One staircase step; `Right` = e1 (empty site), `Down` = −e2 (particle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Right,
    Down,
}

/// Periodic growth staircase: vertex 0 at `anchor`, then one step per ring
/// site, extended bi-infinitely by the period offset (N−k, −k).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthInterface {
    anchor: Cell,
    steps: Vec<Step>,
}

impl GrowthInterface {
    pub fn new(anchor: Cell, steps: Vec<Step>) -> Result<Self> {
        let k = steps.iter().filter(|&&s| s == Step::Down).count();
        if steps.len() < 2 || k == 0 || k == steps.len() {
            return Err(Error::InvalidConfig(
                "staircase needs both step kinds present".into(),
            ));
        }
        Ok(Self { anchor, steps })
    }

    /// Encode a ring configuration: step s is Down iff site s is occupied.
    pub fn from_config(eta: &RingConfig, anchor: Cell) -> Self {
        let steps = eta
            .occupancy()
            .iter()
            .map(|&b| if b { Step::Down } else { Step::Right })
            .collect();
        Self { anchor, steps }
    }

    /// Decode back to the ring configuration.
    pub fn to_config(&self) -> RingConfig {
        RingConfig::new(self.steps.iter().map(|&s| s == Step::Down).collect())
            .expect("validated at construction")
    }

    pub fn n(&self) -> usize {
        self.steps.len()
    }

    pub fn k(&self) -> usize {
        self.steps.iter().filter(|&&s| s == Step::Down).count()
    }

    pub fn anchor(&self) -> Cell {
        self.anchor
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Displacement of one full period: (N−k, −k).
    pub fn period_offset(&self) -> Cell {
        Cell::new((self.n() - self.k()) as i64, -(self.k() as i64))
    }

    fn step_delta(s: Step) -> Cell {
        match s {
            Step::Right => Cell::new(1, 0),
            Step::Down => Cell::new(0, -1),
        }
    }

    /// Vertex g^i for any integer index (periodic extension).
    pub fn vertex(&self, i: i64) -> Cell {
        let p = self.n() as i64;
        let q = i.div_euclid(p);
        let r = i.rem_euclid(p) as usize;
        let off = self.period_offset();
        let mut v = Cell::new(self.anchor.v1 + q * off.v1, self.anchor.v2 + q * off.v2);
        for &s in &self.steps[..r] {
            v = v.plus(Self::step_delta(s));
        }
        v
    }

    #[inline]
    fn step_at(&self, i: i64) -> Step {
        self.steps[i.rem_euclid(self.n() as i64) as usize]
    }

    /// Valley vertex indices in 0..N: down-then-right corners, i.e. the
    /// corners that can grow.
    pub fn valleys(&self) -> Vec<usize> {
        (0..self.n() as i64)
            .filter(|&w| self.step_at(w - 1) == Step::Down && self.step_at(w) == Step::Right)
            .map(|w| w as usize)
            .collect()
    }

    /// Peak vertex indices in 0..N: right-then-down corners (the shape
    /// required of the competition split indices).
    pub fn peaks(&self) -> Vec<usize> {
        (0..self.n() as i64)
            .filter(|&w| self.step_at(w - 1) == Step::Right && self.step_at(w) == Step::Down)
            .map(|w| w as usize)
            .collect()
    }

    /// The fill cells of the initial valleys: g^w + (1,1) per valley w.
    pub fn first_layer(&self) -> Vec<Cell> {
        self.valleys()
            .iter()
            .map(|&w| self.vertex(w as i64).plus(Cell::new(1, 1)))
            .collect()
    }

    /// Re-index so that vertex 0 is the unique vertex on the main diagonal
    /// (v1 − v2 increases by exactly one per step along the bi-infinite
    /// staircase, so every diagonal is hit by exactly one vertex).
    pub fn reanchored_to_diagonal(&self) -> GrowthInterface {
        let p = self.n() as i64;
        // v1 - v2 at vertex i equals (anchor.v1 - anchor.v2) + i
        let i0 = -(self.anchor.v1 - self.anchor.v2);
        let anchor = self.vertex(i0);
        let steps = (0..p)
            .map(|s| self.step_at(i0 + s))
            .collect();
        GrowthInterface { anchor, steps }
    }
}

/// Which side of the competition split a growth lineage is rooted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy)]
struct Fill {
    time: f64,
    side: Side,
}

/// A recorded growth event: the corner at vertex index `vertex` (mod N)
/// flipped at `time`, filling `cell` (one periodic representative of it).
/// The corresponding ring jump is at site `vertex − 1 mod N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEvent {
    pub time: f64,
    pub vertex: u32,
    pub cell: Cell,
}

/// Event-driven corner growth in a periodic environment.
///
/// Because weights and dynamics are exactly periodic, all periodic copies of
/// a corner flip simultaneously; one period with cyclic vertex indices is
/// simulated. Fill times and colors are recorded per canonical cell.
#[derive(Debug)]
pub struct PeriodicGrowth {
    env: Environment,
    steps: Vec<Step>,
    vert: Vec<Cell>,
    last_time: Vec<f64>,
    last_side: Vec<Side>,
    split: Option<(usize, usize)>,
    queue: BinaryHeap<Reverse<(u64, u32)>>,
    fills: HashMap<Cell, Fill>,
    events: Vec<GrowthEvent>,
    time: f64,
}

impl PeriodicGrowth {
    /// `split = Some((j, j̃))` enables competition coloring with G_+ the
    /// vertex arc {j, …, j̃} (peak shape required at both).
    pub fn new(env: Environment, g0: &GrowthInterface, split: Option<(usize, usize)>) -> Result<Self> {
        match env {
            Environment::Periodic { n, k, .. } if n == g0.n() && k == g0.k() => {}
            Environment::Periodic { n, k, .. } => {
                return Err(Error::InvalidParameter(format!(
                    "environment period ({n},{k}) does not match interface ({}, {})",
                    g0.n(),
                    g0.k()
                )))
            }
            Environment::Iid { .. } => return Err(Error::NotPeriodic),
        }
        if let Some((j, jt)) = split {
            if j >= jt || jt >= g0.n() {
                return Err(Error::InvalidParameter(format!(
                    "split indices must satisfy j < j̃ < N, got ({j}, {jt})"
                )));
            }
            for &w in &[j, jt] {
                let peak = g0.step_at(w as i64 - 1) == Step::Right && g0.step_at(w as i64) == Step::Down;
                if !peak {
                    return Err(Error::ShapeCondition(w as i64));
                }
            }
        }
        let p = g0.n();
        let vert: Vec<Cell> = (0..p as i64).map(|i| g0.vertex(i)).collect();
        let mut sim = Self {
            env,
            steps: g0.steps.clone(),
            vert,
            last_time: vec![0.0; p],
            last_side: vec![Side::Plus; p],
            split,
            queue: BinaryHeap::new(),
            fills: HashMap::new(),
            events: Vec::new(),
            time: 0.0,
        };
        for w in g0.valleys() {
            sim.schedule(w as u32, 0.0);
        }
        Ok(sim)
    }

    fn p(&self) -> usize {
        self.steps.len()
    }

    /// Fill cell of the corner at vertex w, at its current position.
    fn corner_cell(&self, w: usize) -> Cell {
        self.vert[w].plus(Cell::new(1, 1))
    }

    fn schedule(&mut self, w: u32, enabled_at: f64) {
        let cell = self.corner_cell(w as usize);
        let t = enabled_at + self.env.weight(cell);
        self.queue.push(Reverse((t.to_bits(), w)));
    }

    fn root_side(&self, w: usize) -> Side {
        match self.split {
            Some((j, jt)) if w >= j && w <= jt => Side::Plus,
            _ => Side::Minus,
        }
    }

    /// Time of the next corner flip without applying it.
    pub fn peek_time(&self) -> f64 {
        self.queue
            .peek()
            .map(|Reverse((bits, _))| f64::from_bits(*bits))
            .expect("a valid staircase always has a growable corner")
    }

    /// Apply the next corner flip and return it.
    pub fn step(&mut self) -> GrowthEvent {
        let Reverse((bits, w)) = self.queue.pop().expect("queue never empties");
        let t = f64::from_bits(bits);
        let p = self.p();
        let wi = w as usize;
        let cell = self.corner_cell(wi);

        // color: the enabling predecessors are the two neighboring vertices;
        // never-flipped neighbors sit on the initial staircase (time 0)
        let prev = (wi + p - 1) % p;
        let next = (wi + 1) % p;
        let (tp, tn) = (self.last_time[prev], self.last_time[next]);
        let side = if tp == 0.0 && tn == 0.0 {
            self.root_side(wi)
        } else if tp > tn {
            self.last_side[prev]
        } else {
            self.last_side[next]
        };

        // flip the corner: steps (Down, Right) around w become (Right, Down)
        self.steps[prev] = Step::Right;
        self.steps[wi] = Step::Down;
        self.vert[wi] = self.vert[wi].plus(Cell::new(1, 1));
        self.last_time[wi] = t;
        self.last_side[wi] = side;
        self.time = t;
        self.fills.insert(self.env.canonical(cell), Fill { time: t, side });
        let ev = GrowthEvent { time: t, vertex: w, cell };
        self.events.push(ev);

        // newly growable corners next door
        if self.steps[(wi + p - 2) % p] == Step::Down {
            self.schedule(prev as u32, t);
        }
        if self.steps[next] == Step::Right {
            self.schedule(next as u32, t);
        }
        ev
    }

    /// Advance through all flips with time ≤ t.
    pub fn run_until(&mut self, t: f64) {
        while self.peek_time() <= t {
            self.step();
        }
        self.time = t;
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> &[GrowthEvent] {
        &self.events
    }

    /// Current staircase.
    pub fn interface(&self) -> GrowthInterface {
        GrowthInterface {
            anchor: self.vert[0],
            steps: self.steps.clone(),
        }
    }

    /// Current ring configuration (site s occupied iff step s is Down).
    pub fn config(&self) -> RingConfig {
        self.interface().to_config()
    }

    /// Fill time of a cell, if it was grown within the simulated horizon.
    pub fn fill_time(&self, cell: Cell) -> Option<f64> {
        self.fills.get(&self.env.canonical(cell)).map(|f| f.time)
    }

    /// Competition color of a filled cell.
    pub fn fill_side(&self, cell: Cell) -> Option<Side> {
        self.fills.get(&self.env.canonical(cell)).map(|f| f.side)
    }
}

/// Evolve the staircase to time t by corner growth (Markov dynamics of the
/// interface; the TASEP seen through the staircase encoding).
pub fn evolve_interface(env: &Environment, g0: &GrowthInterface, t: f64) -> Result<GrowthInterface> {
    let mut sim = PeriodicGrowth::new(*env, g0, None)?;
    sim.run_until(t);
    Ok(sim.interface())
}

/// The TASEP realized by corner growth: ring configurations at the given
/// sample times (must be non-decreasing).
pub fn lpp_driven_tasep(
    env: &Environment,
    eta0: &RingConfig,
    sample_times: &[f64],
) -> Result<Vec<RingConfig>> {
    let g0 = GrowthInterface::from_config(eta0, Cell::new(0, 0));
    let mut sim = PeriodicGrowth::new(*env, &g0, None)?;
    let mut out = Vec::with_capacity(sample_times.len());
    let mut last = 0.0f64;
    for &t in sample_times {
        if t < last {
            return Err(Error::InvalidParameter("sample times must be non-decreasing".into()));
        }
        last = t;
        sim.run_until(t);
        out.push(sim.config());
    }
    Ok(out)
}

/// Test oracle for the growth ↔ TASEP correspondence, written in ring terms:
/// per-site jump scheduling where an enabled jump at site s waits the
/// environment weight of the cell its corner would fill. Produces the exact
/// same event stream as [`PeriodicGrowth`] when fed the same environment;
/// kept as an independent implementation for cross-validation.
pub fn weight_driven_ring_oracle(
    env: &Environment,
    eta0: &RingConfig,
    horizon: f64,
) -> Result<Vec<(f64, u32)>> {
    match env {
        Environment::Periodic { n, k, .. } if *n == eta0.n_sites() && *k == eta0.k() => {}
        Environment::Periodic { .. } => {
            return Err(Error::InvalidParameter("environment period mismatch".into()))
        }
        Environment::Iid { .. } => return Err(Error::NotPeriodic),
    }
    let n = eta0.n_sites();
    let g0 = GrowthInterface::from_config(eta0, Cell::new(0, 0));
    // base vertex above each site: jumps at site s flip vertex s+1
    let base: Vec<Cell> = (0..n).map(|s| g0.vertex(s as i64 + 1)).collect();
    let mut occ: Vec<bool> = eta0.occupancy().to_vec();
    let mut jumps = vec![0u64; n];
    let cell_of = |s: usize, done: u64| {
        base[s].plus(Cell::new(done as i64 + 1, done as i64 + 1))
    };
    let mut queue: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    for s in 0..n {
        if occ[s] && !occ[(s + 1) % n] {
            let t = env.weight(cell_of(s, 0));
            queue.push(Reverse((t.to_bits(), s as u32)));
        }
    }
    let mut out = Vec::new();
    while let Some(Reverse((bits, s))) = queue.pop() {
        let t = f64::from_bits(bits);
        if t > horizon {
            break;
        }
        let s = s as usize;
        let right = (s + 1) % n;
        occ[s] = false;
        occ[right] = true;
        jumps[s] += 1;
        out.push((t, s as u32));
        let left = (s + n - 1) % n;
        if occ[left] {
            let tt = t + env.weight(cell_of(left, jumps[left]));
            queue.push(Reverse((tt.to_bits(), left as u32)));
        }
        if !occ[(right + 1) % n] {
            let tt = t + env.weight(cell_of(right, jumps[right]));
            queue.push(Reverse((tt.to_bits(), right as u32)));
        }
    }
    Ok(out)
}

/// Competition coloring of the grown region up to a time horizon.
#[derive(Debug)]
pub struct CompetitionState {
    g0: GrowthInterface,
    env: Environment,
    colors: HashMap<Cell, Fill>,
    j: usize,
    j_tilde: usize,
    horizon: f64,
}

/// Color every cell grown by `horizon` by the side of its lineage root,
/// splitting the staircase at peak vertices j < j̃ (G_+ = arc {j,…,j̃}).
pub fn competition_labels(
    env: &Environment,
    g0: &GrowthInterface,
    j: usize,
    j_tilde: usize,
    horizon: f64,
) -> Result<CompetitionState> {
    let mut sim = PeriodicGrowth::new(*env, g0, Some((j, j_tilde)))?;
    sim.run_until(horizon);
    Ok(CompetitionState {
        g0: g0.clone(),
        env: *env,
        colors: sim.fills,
        j,
        j_tilde,
        horizon,
    })
}

impl CompetitionState {
    pub fn side_of(&self, v: Cell) -> Option<Side> {
        self.colors.get(&self.env.canonical(v)).map(|f| f.side)
    }

    pub fn fill_time(&self, v: Cell) -> Option<f64> {
        self.colors.get(&self.env.canonical(v)).map(|f| f.time)
    }

    pub fn in_plus(&self, v: Cell) -> bool {
        self.side_of(v) == Some(Side::Plus)
    }

    pub fn in_minus(&self, v: Cell) -> bool {
        self.side_of(v) == Some(Side::Minus)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// One competition interface: the visited sites, each with the time the
/// interface reached it (the fill time of the cell at that position; the
/// interface jumps exactly when the peak corner it tracks flips). The first
/// entry is the start vertex at time 0.
pub type InterfacePath = Vec<(Cell, f64)>;

/// Walk both competition interfaces for `steps` jumps each. φ starts at
/// g^j and moves up when the cell diagonally above is Plus, right when
/// Minus; φ̃ starts at g^j̃ with the roles swapped. Errors when the grown
/// region is exhausted before `steps` jumps.
pub fn competition_interfaces(
    state: &CompetitionState,
    steps: usize,
) -> Result<(InterfacePath, InterfacePath)> {
    let walk = |start: Cell, up_side: Side| -> Result<InterfacePath> {
        let mut path = vec![(start, 0.0)];
        let mut cur = start;
        for _ in 0..steps {
            let probe = cur.plus(Cell::new(1, 1));
            let Some(side) = state.side_of(probe) else {
                return Err(Error::RegionExhausted);
            };
            cur = if side == up_side {
                cur.plus(Cell::new(0, 1))
            } else {
                cur.plus(Cell::new(1, 0))
            };
            let Some(t) = state.fill_time(cur) else {
                return Err(Error::RegionExhausted);
            };
            path.push((cur, t));
        }
        Ok(path)
    };
    let phi = walk(state.g0.vertex(state.j as i64), Side::Plus)?;
    let phi_tilde = walk(state.g0.vertex(state.j_tilde as i64), Side::Minus)?;
    Ok((phi, phi_tilde))
}

/// Static occupation-time field over a window: fill times of all in-domain
/// cells comparable-below the given targets, with lineage back-pointers.
#[derive(Debug)]
pub struct OccField {
    lo: Cell,
    width: usize,
    height: usize,
    f: Vec<f64>,
    parent: Vec<u8>, // 0 = root, 1 = west, 2 = south, 255 = out of domain
    root_vertex: Vec<i64>,
}

const OUT: u8 = 255;

impl OccField {
    /// Compute the field for an initial staircase, covering every in-domain
    /// cell u with u ⪯ t for some target t.
    pub fn build(env: &Environment, g0: &GrowthInterface, targets: &[Cell]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("no targets".into()));
        }
        let hi = Cell::new(
            targets.iter().map(|c| c.v1).max().unwrap(),
            targets.iter().map(|c| c.v2).max().unwrap(),
        );
        // vertex index range: everything that could dominate a cell ⪯ hi
        let mut j_min: i64 = 0;
        while g0.vertex(j_min - 1).v2 <= hi.v2 - 1 {
            j_min -= 1;
        }
        let mut j_max: i64 = 0;
        while g0.vertex(j_max).v1 <= hi.v1 - 1 {
            j_max += 1;
        }
        let lo = Cell::new(g0.vertex(j_min).v1 + 1, g0.vertex(j_max).v2 + 1);
        if !lo.le(&hi) {
            return Err(Error::InvalidParameter("targets below the staircase".into()));
        }
        let width = (hi.v1 - lo.v1 + 1) as usize;
        let height = (hi.v2 - lo.v2 + 1) as usize;
        // bottom(x): lowest vertex ordinate among vertices with v1 <= x
        let mut bottom = vec![i64::MAX; width + 1]; // indexed by x - (lo.v1 - 1)
        for j in j_min..=j_max {
            let v = g0.vertex(j);
            let col = v.v1 - (lo.v1 - 1);
            if (0..bottom.len() as i64).contains(&col) {
                let c = col as usize;
                bottom[c] = bottom[c].min(v.v2);
            }
        }
        // forward-fill: bottom is non-increasing in x over the covered range
        for x in 1..bottom.len() {
            if bottom[x] == i64::MAX {
                bottom[x] = bottom[x - 1];
            } else if bottom[x - 1] != i64::MAX {
                bottom[x] = bottom[x].min(bottom[x - 1]);
            }
        }
        let in_domain = |c: Cell| -> bool {
            let col = c.v1 - 1 - (lo.v1 - 1);
            if col < 0 {
                return false;
            }
            let b = bottom[col as usize];
            b != i64::MAX && c.v2 >= b + 1
        };
        let mut f = vec![f64::NEG_INFINITY; width * height];
        let mut parent = vec![OUT; width * height];
        let mut root_vertex = vec![i64::MIN; width * height];
        // vertex index lookup for roots: v1 - v2 increases by one per step
        let diag0 = g0.anchor().v1 - g0.anchor().v2;
        for y in 0..height {
            for x in 0..width {
                let c = Cell::new(lo.v1 + x as i64, lo.v2 + y as i64);
                if !in_domain(c) {
                    continue;
                }
                let idx = y * width + x;
                let west = Cell::new(c.v1 - 1, c.v2);
                let south = Cell::new(c.v1, c.v2 - 1);
                let w_val = if in_domain(west) {
                    if x == 0 {
                        // lineage would leave the window; window invariant
                        // guarantees this cell is not ⪯ any target
                        continue;
                    }
                    f[idx - 1]
                } else {
                    0.0
                };
                let s_val = if in_domain(south) {
                    if y == 0 {
                        continue;
                    }
                    f[idx - width]
                } else {
                    0.0
                };
                let own = env.weight(c);
                if w_val == 0.0 && s_val == 0.0 && !in_domain(west) && !in_domain(south) {
                    f[idx] = own;
                    parent[idx] = 0;
                    // root vertex is c - (1,1); v1 - v2 increases by one per
                    // step along the staircase, so the index is the diagonal
                    // offset relative to the anchor
                    root_vertex[idx] = ((c.v1 - 1) - (c.v2 - 1)) - diag0;
                } else if s_val >= w_val {
                    f[idx] = own + s_val;
                    parent[idx] = 2;
                    root_vertex[idx] = root_vertex[idx - width];
                } else {
                    f[idx] = own + w_val;
                    parent[idx] = 1;
                    root_vertex[idx] = root_vertex[idx - 1];
                }
            }
        }
        Ok(Self {
            lo,
            width,
            height,
            f,
            parent,
            root_vertex,
        })
    }

    fn idx(&self, c: Cell) -> Option<usize> {
        let x = c.v1 - self.lo.v1;
        let y = c.v2 - self.lo.v2;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some(y as usize * self.width + x as usize)
    }

    /// Fill time Occ(c) (weight at c included), if c is in the computed
    /// domain.
    pub fn occ(&self, c: Cell) -> Option<f64> {
        let i = self.idx(c)?;
        (self.parent[i] != OUT).then_some(self.f[i])
    }

    /// Time at which the corner for c became growable: Occ(c) − ω(c), i.e.
    /// the endpoint-excluded passage time from the staircase.
    pub fn enable_time(&self, env: &Environment, c: Cell) -> Option<f64> {
        self.occ(c).map(|t| t - env.weight(c))
    }

    /// The growth lineage of c: cells from the root fill cell up to c.
    pub fn lineage(&self, c: Cell) -> Option<Vec<Cell>> {
        let mut i = self.idx(c)?;
        if self.parent[i] == OUT {
            return None;
        }
        let mut cells = vec![c];
        let mut cur = c;
        loop {
            match self.parent[i] {
                0 => break,
                1 => cur = Cell::new(cur.v1 - 1, cur.v2),
                2 => cur = Cell::new(cur.v1, cur.v2 - 1),
                _ => unreachable!(),
            }
            i = self.idx(cur).unwrap();
            cells.push(cur);
        }
        cells.reverse();
        Some(cells)
    }

    /// Index of the staircase vertex rooting c's lineage (the root fill cell
    /// minus (1,1) is the valley vertex).
    pub fn root_vertex_index(&self, c: Cell) -> Option<i64> {
        let i = self.idx(c)?;
        (self.parent[i] != OUT).then_some(self.root_vertex[i])
    }
}

/// The geodesic-coalescence criterion. In an (N+2, k+1)-periodic
/// environment whose staircase encodes a disagreement state with the two
/// second-class particles expanded to (0,1) pairs:
///
/// * `holds`: every growth lineage to g^i + v (interior indices
///   i = 1..P−1, P = N+2) shares a cell with the lineage to g^0 + v or the
///   one to g^P + v (the periodic translate of index 0);
/// * `bound`: max over one period of the endpoint-excluded passage time
///   from the staircase to g^i + v.
///
/// When `holds` is true, the coalescence time τ of the coupled disagreement
/// process in the same environment satisfies τ ≤ bound.
pub fn coalescence_criterion(
    env: &Environment,
    g0: &GrowthInterface,
    v: Cell,
) -> Result<(bool, f64)> {
    if v.v1 < 1 || v.v2 < 1 {
        return Err(Error::InvalidParameter("offset v must have positive coordinates".into()));
    }
    let p = g0.n() as i64;
    let targets: Vec<Cell> = (0..=p).map(|i| g0.vertex(i).plus(v)).collect();
    let field = OccField::build(env, g0, &targets)?;
    let as_set = |cells: Vec<Cell>| -> std::collections::HashSet<Cell> { cells.into_iter().collect() };
    let ref_a = as_set(field.lineage(targets[0]).ok_or(Error::RegionExhausted)?);
    let ref_b = as_set(field.lineage(targets[p as usize]).ok_or(Error::RegionExhausted)?);
    let mut holds = true;
    for t in &targets[1..p as usize] {
        let lin = field.lineage(*t).ok_or(Error::RegionExhausted)?;
        if !lin.iter().any(|c| ref_a.contains(c) || ref_b.contains(c)) {
            holds = false;
            break;
        }
    }
    let bound = targets
        .iter()
        .map(|&t| field.enable_time(env, t).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((holds, bound))
}

/// Expand a disagreement configuration: each second-class particle becomes
/// a (0,1) site pair. Returns the expanded ring configuration (N+2 sites,
/// k+1 particles, where k counts first-class particles plus one) and the
/// expanded positions of the two pair holes.
pub fn expand_disagreement(xi: &DisagreementConfig) -> Result<(RingConfig, [usize; 2])> {
    let twos = xi.second_class_sites();
    if twos.len() != 2 {
        return Err(Error::InvalidConfig("need exactly two second-class particles".into()));
    }
    let mut occ = Vec::with_capacity(xi.n_sites() + 2);
    let mut holes = Vec::with_capacity(2);
    for &l in xi.labels() {
        match l {
            0 => occ.push(false),
            1 => occ.push(true),
            _ => {
                holes.push(occ.len());
                occ.push(false);
                occ.push(true);
            }
        }
    }
    Ok((RingConfig::new(occ)?, [holes[0], holes[1]]))
}

/// A pathwise run of the expanded growth dynamics with the two (0,1) pairs
/// tracked until annihilation.
#[derive(Debug)]
pub struct PairedRun {
    /// cumulative ξ-displacement of the pair started at the smaller hole
    /// position, recorded after each of its moves
    pub moves_a: Vec<(f64, i64)>,
    /// same for the pair started at the larger hole position
    pub moves_b: Vec<(f64, i64)>,
    /// annihilation time, if reached within the horizon
    pub tau: Option<f64>,
    /// competition split indices (peak vertices above the two holes)
    pub j: usize,
    pub j_tilde: usize,
}

/// Drive the expanded corner growth and track the two second-class pairs.
/// The pair at the smaller initial hole index is "a" (its peak vertex is the
/// split index j); requires both pairs strictly inside the period (no wrap),
/// which callers arrange by rotating the initial state.
pub fn paired_growth_run(
    env: &Environment,
    xi0: &DisagreementConfig,
    horizon: f64,
) -> Result<(PairedRun, PeriodicGrowth)> {
    let (expanded, holes) = expand_disagreement(xi0)?;
    let p = expanded.n_sites();
    let (ha, hb) = (holes[0].min(holes[1]), holes[0].max(holes[1]));
    if ha == 0 || hb + 1 >= p {
        return Err(Error::InvalidParameter(
            "second-class pairs must not touch the period boundary; rotate the initial state".into(),
        ));
    }
    let (j, j_tilde) = (ha + 1, hb + 1);
    let g0 = GrowthInterface::from_config(&expanded, Cell::new(0, 0));
    let mut sim = PeriodicGrowth::new(*env, &g0, Some((j, j_tilde)))?;
    let mut pa = ha; // current hole position of pair a
    let mut pb = hb;
    let (mut xa, mut xb) = (0i64, 0i64);
    let mut moves_a = Vec::new();
    let mut moves_b = Vec::new();
    let mut tau = None;
    while tau.is_none() && sim.peek_time() <= horizon {
        let ev = sim.step();
        let s = (ev.vertex as usize + p - 1) % p; // ring jump site
        let target = (s + 1) % p;
        if target == pa {
            if s == (pb + 1) % p {
                tau = Some(ev.time);
            } else {
                pa = (pa + p - 1) % p;
                xa -= 1;
                moves_a.push((ev.time, xa));
            }
        } else if target == pb {
            if s == (pa + 1) % p {
                tau = Some(ev.time);
            } else {
                pb = (pb + p - 1) % p;
                xb -= 1;
                moves_b.push((ev.time, xb));
            }
        } else if s == (pa + 1) % p {
            pa = (pa + 1) % p;
            xa += 1;
            moves_a.push((ev.time, xa));
        } else if s == (pb + 1) % p {
            pb = (pb + 1) % p;
            xb += 1;
            moves_b.push((ev.time, xb));
        }
    }
    Ok((
        PairedRun {
            moves_a,
            moves_b,
            tau,
            j,
            j_tilde,
        },
        sim,
    ))
}

/// Exact float identity between occupation times and set-to-set passage
/// times from the first fill layer: Occ(v) = T_{FirstLayer, v} + ω(v).
/// Exposed for tests and diagnostics.
pub fn occ_identity_residual(
    env: &Environment,
    g0: &GrowthInterface,
    field: &OccField,
    v: Cell,
    periods: i64,
) -> Option<f64> {
    let occ = field.occ(v)?;
    let mut layer = Vec::new();
    for q in -periods..=periods {
        for &w in &g0.valleys() {
            let cell = g0.vertex(w as i64 + q * g0.n() as i64).plus(Cell::new(1, 1));
            if cell.le(&v) {
                layer.push(cell);
            }
        }
    }
    let (t, _) = lpt_sets(env, &layer, &[v]).ok()?;
    Some(occ - (t + env.weight(v)))
}
