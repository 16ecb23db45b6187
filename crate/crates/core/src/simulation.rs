//! Synthetic two-group precision matrices with known differences, and
//! Gaussian sampling from them.
//!
//! Three regimes are provided:
//!
//! * **sim1**: banded `0.5^|i−j|` precision for X; Y additionally sets the
//!   band `|i−j| = ⌊p/4⌋` to 0.9.
//! * **sim2**: 50×50 blocks with scale-free supports; Y flips the sign of
//!   the connections of each block's two largest hubs.
//! * **sim3**: dense random 100×100 blocks; Y adds a sparse symmetric
//!   perturbation with 100 nonzero entries.
//!
//! Every generator is a pure function of its arguments.

use std::collections::BTreeSet;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::{Group, ObservationMatrix};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Margin added above the most negative eigenvalue when restoring positive definiteness.
pub const PD_MARGIN: f64 = 0.05;
const PD_FLOOR: f64 = 1e-8;

const SIM2_BLOCK: usize = 50;
const SIM3_BLOCK: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Sim1,
    Sim2,
    Sim3,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Sim1 => "sim1",
            Scenario::Sim2 => "sim2",
            Scenario::Sim3 => "sim3",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sim1" | "1" => Ok(Scenario::Sim1),
            "sim2" | "2" => Ok(Scenario::Sim2),
            "sim3" | "3" => Ok(Scenario::Sim3),
            other => Err(format!("unknown scenario '{other}' (expected sim1, sim2 or sim3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub scenario: Scenario,
    pub p: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 4 {
            return Err(Error::precondition(format!("p must be at least 4, got {}", self.p)));
        }
        match self.scenario {
            Scenario::Sim1 if self.p < 8 => {
                return Err(Error::precondition(format!("sim1 needs p >= 8, got {}", self.p)))
            }
            Scenario::Sim2 if self.p % SIM2_BLOCK != 0 => {
                return Err(Error::precondition(format!(
                    "sim2 needs p to be a multiple of {SIM2_BLOCK}, got {}",
                    self.p
                )))
            }
            Scenario::Sim3 if self.p % SIM3_BLOCK != 0 => {
                return Err(Error::precondition(format!(
                    "sim3 needs p to be a multiple of {SIM3_BLOCK}, got {}",
                    self.p
                )))
            }
            _ => {}
        }
        if self.n_x < 2 || self.n_y < 2 {
            return Err(Error::precondition("sample sizes must be at least 2"));
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        self.validate()?;
        match self.scenario {
            Scenario::Sim1 => gen_sim1(self.p),
            Scenario::Sim2 => gen_sim2(self.p, self.seed),
            Scenario::Sim3 => gen_sim3(self.p, self.seed),
        }
    }

    /// Draws both groups' samples for `truth` using streams derived from the seed.
    pub fn sample(&self, truth: &GroundTruth) -> Result<(ObservationMatrix, ObservationMatrix)> {
        let x = sample_gaussian(&truth.omega_x, self.n_x, derive_seed(self.seed, 1), Group::X)?;
        let y = sample_gaussian(&truth.omega_y, self.n_y, derive_seed(self.seed, 2), Group::Y)?;
        Ok((x, y))
    }
}

/// SplitMix64 finalizer over `(base, stream)`; used to give every random
/// consumer its own independent seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Precisions of both groups and their exact difference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub omega_x: SymMatrix,
    pub omega_y: SymMatrix,
    /// `Ω_Y − Ω_X`
    pub delta_star: SymMatrix,
    /// Nonzero positions of `delta_star`, row-major, both triangles.
    pub support: Vec<(usize, usize)>,
}

impl GroundTruth {
    /// Shifts both diagonals jointly when either precision is not positive
    /// definite, then records `Ω_Y − Ω_X` and its support.
    fn from_precisions(mut omega_x: DMatrix<f64>, mut omega_y: DMatrix<f64>) -> Result<Self> {
        let min_x = SymMatrix::from_symmetric_unchecked(omega_x.clone()).min_eigenvalue();
        let min_y = SymMatrix::from_symmetric_unchecked(omega_y.clone()).min_eigenvalue();
        let min = min_x.min(min_y);
        if min <= PD_FLOOR {
            let shift = min.abs() + PD_MARGIN;
            for i in 0..omega_x.nrows() {
                omega_x[(i, i)] += shift;
                omega_y[(i, i)] += shift;
            }
        }
        Ok(Self::assemble(omega_x, omega_y))
    }

    fn assemble(omega_x: DMatrix<f64>, omega_y: DMatrix<f64>) -> Self {
        let delta = &omega_y - &omega_x;
        let p = delta.nrows();
        let support = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| delta[(i, j)] != 0.0)
            .collect();
        GroundTruth {
            omega_x: SymMatrix::from_symmetric_unchecked(omega_x),
            omega_y: SymMatrix::from_symmetric_unchecked(omega_y),
            delta_star: SymMatrix::from_symmetric_unchecked(delta),
            support,
        }
    }

    pub fn dim(&self) -> usize {
        self.omega_x.dim()
    }
}

/// Banded regime: `Ω_X[i][j] = 0.5^|i−j|`; `Ω_Y` equal except 0.9 on `|i−j| = ⌊p/4⌋`.
pub fn gen_sim1(p: usize) -> Result<GroundTruth> {
    if p < 8 {
        return Err(Error::precondition(format!("sim1 needs p >= 8, got {p}")));
    }
    let band = p / 4;
    let omega_x = DMatrix::from_fn(p, p, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    let omega_y = DMatrix::from_fn(p, p, |i, j| {
        if i.abs_diff(j) == band {
            0.9
        } else {
            omega_x[(i, j)]
        }
    });
    GroundTruth::from_precisions(omega_x, omega_y)
}

/// Undirected scale-free graph on `n` nodes with exactly `edges` edges.
///
/// Preferential attachment: a complete seed graph on `m + 1` nodes, then
/// each new node attaches to `m = edges / (n − 1)` distinct existing nodes
/// chosen proportionally to degree; remaining budget is filled with edges
/// whose endpoints are both drawn proportionally to degree.
pub fn scale_free_graph(n: usize, edges: usize, rng: &mut impl Rng) -> BTreeSet<(usize, usize)> {
    let max_edges = n * n.saturating_sub(1) / 2;
    let edges = edges.min(max_edges);
    let mut set = BTreeSet::new();
    if n < 2 || edges == 0 {
        return set;
    }
    let m = (edges / (n - 1)).max(1);
    let seed_nodes = (m + 1).min(n);
    // endpoint multiset: each node appears once per incident edge
    let mut ends: Vec<usize> = Vec::new();
    let add = |set: &mut BTreeSet<(usize, usize)>, ends: &mut Vec<usize>, a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        if a != b && set.insert(key) {
            ends.push(a);
            ends.push(b);
            true
        } else {
            false
        }
    };
    'seed: for a in 0..seed_nodes {
        for b in (a + 1)..seed_nodes {
            if set.len() == edges {
                break 'seed;
            }
            add(&mut set, &mut ends, a, b);
        }
    }
    for v in seed_nodes..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m.min(v) && set.len() + targets.len() < edges {
            targets.insert(ends[rng.random_range(0..ends.len())]);
        }
        for t in targets {
            add(&mut set, &mut ends, v, t);
        }
    }
    while set.len() < edges {
        let a = ends[rng.random_range(0..ends.len())];
        let b = ends[rng.random_range(0..ends.len())];
        add(&mut set, &mut ends, a, b);
    }
    set
}

fn degrees(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    let mut deg = vec![0; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg
}

/// Indices of the two largest-degree nodes, ties broken toward lower index.
pub fn top_two_hubs(deg: &[usize]) -> [usize; 2] {
    let mut order: Vec<usize> = (0..deg.len()).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    [order[0], order[1]]
}

/// Scale-free block regime with 50×50 blocks; hub connections negated in Y.
pub fn gen_sim2(p: usize, seed: u64) -> Result<GroundTruth> {
    if p == 0 || p % SIM2_BLOCK != 0 {
        return Err(Error::precondition(format!(
            "sim2 needs p to be a positive multiple of {SIM2_BLOCK}, got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5132));
    let mut omega_x = DMatrix::zeros(p, p);
    let mut omega_y = DMatrix::zeros(p, p);
    let budget = SIM2_BLOCK * (SIM2_BLOCK - 1) / 10;

    for block in 0..p / SIM2_BLOCK {
        let off = block * SIM2_BLOCK;
        let graph = scale_free_graph(SIM2_BLOCK, budget, &mut rng);
        let mut raw = DMatrix::<f64>::zeros(SIM2_BLOCK, SIM2_BLOCK);
        for &(a, b) in &graph {
            for (i, j) in [(a, b), (b, a)] {
                let magnitude = rng.random_range(0.2..=0.5);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                raw[(i, j)] = sign * magnitude;
            }
        }
        raw /= 3.0;
        raw.fill_diagonal(1.0);
        let sym = (&raw + raw.transpose()) * 0.5;

        let hubs = top_two_hubs(&degrees(SIM2_BLOCK, &graph));
        for i in 0..SIM2_BLOCK {
            for j in 0..SIM2_BLOCK {
                let v = sym[(i, j)];
                omega_x[(off + i, off + j)] = v;
                let flip = i != j && (hubs.contains(&i) || hubs.contains(&j));
                omega_y[(off + i, off + j)] = if flip { -v } else { v };
            }
        }
    }
    GroundTruth::from_precisions(omega_x, omega_y)
}

/// Options for the dense-block regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3Options {
    /// Fraction of each block's upper triangle that is nonzero in `Ω_X`.
    pub density: f64,
    /// Number of symmetric pairs in the difference (nonzero entries = 2×).
    pub delta_pairs: usize,
    /// Magnitudes of difference entries are uniform on `[min_abs, max_abs)`
    /// with a random sign; `(0, 0.5)` is `U(−0.5, 0.5)`.
    pub min_abs: f64,
    pub max_abs: f64,
}

impl Default for Sim3Options {
    fn default() -> Self {
        Sim3Options {
            density: 0.6,
            delta_pairs: 50,
            min_abs: 0.0,
            max_abs: 0.5,
        }
    }
}

/// Dense random 100×100 blocks plus a sparse symmetric difference.
pub fn gen_sim3(p: usize, seed: u64) -> Result<GroundTruth> {
    gen_sim3_with(p, seed, &Sim3Options::default())
}

pub fn gen_sim3_with(p: usize, seed: u64, opts: &Sim3Options) -> Result<GroundTruth> {
    if p == 0 || p % SIM3_BLOCK != 0 {
        return Err(Error::precondition(format!(
            "sim3 needs p to be a positive multiple of {SIM3_BLOCK}, got {p}"
        )));
    }
    if !(0.0..=1.0).contains(&opts.density) || !(0.0 <= opts.min_abs && opts.min_abs < opts.max_abs) {
        return Err(Error::precondition("invalid sim3 options"));
    }
    let upper_pairs = |n: usize| -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
    };
    if opts.delta_pairs > p * (p - 1) / 2 {
        return Err(Error::precondition("too many difference entries for p"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5133));
    let mut omega_x = DMatrix::zeros(p, p);
    let block_pairs = upper_pairs(SIM3_BLOCK);
    let chosen = (opts.density * block_pairs.len() as f64).round() as usize;
    for block in 0..p / SIM3_BLOCK {
        let off = block * SIM3_BLOCK;
        let mut picks = index::sample(&mut rng, block_pairs.len(), chosen).into_vec();
        picks.sort_unstable();
        for k in picks {
            let (i, j) = block_pairs[k];
            let v = rng.random_range(-0.1..0.1);
            omega_x[(off + i, off + j)] = v;
            omega_x[(off + j, off + i)] = v;
        }
    }

    let all_pairs = upper_pairs(p);
    let mut picks = index::sample(&mut rng, all_pairs.len(), opts.delta_pairs).into_vec();
    picks.sort_unstable();
    let mut omega_y = omega_x.clone();
    for k in picks {
        let (i, j) = all_pairs[k];
        let v = loop {
            let v = if opts.min_abs == 0.0 {
                rng.random_range(-opts.max_abs..opts.max_abs)
            } else {
                let m = rng.random_range(opts.min_abs..opts.max_abs);
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            };
            if v != 0.0 {
                break v;
            }
        };
        omega_y[(i, j)] += v;
        omega_y[(j, i)] += v;
    }

    let min_x = SymMatrix::from_symmetric_unchecked(omega_x.clone()).min_eigenvalue();
    let min_y = SymMatrix::from_symmetric_unchecked(omega_y.clone()).min_eigenvalue();
    let shift = 0f64.max(-min_x).max(-min_y) + PD_MARGIN;
    for i in 0..p {
        omega_x[(i, i)] += shift;
        omega_y[(i, i)] += shift;
    }
    Ok(GroundTruth::assemble(omega_x, omega_y))
}

/// `n` i.i.d. draws from `N(0, Ω⁻¹)`.
///
/// With `Ω = L Lᵀ`, `x = L⁻ᵀ z` for standard normal `z` has covariance `Ω⁻¹`.
pub fn sample_gaussian(omega: &SymMatrix, n: usize, seed: u64, group: Group) -> Result<ObservationMatrix> {
    let p = omega.dim();
    let chol = omega
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            name: format!("precision of group {group}"),
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::<f64>::zeros(p, n);
    for s in 0..n {
        for j in 0..p {
            z[(j, s)] = rng.sample(StandardNormal);
        }
    }
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Factorization {
            name: format!("Cholesky factor of group {group}"),
        })?;
    ObservationMatrix::new(x.transpose(), group)
}
