//! Lattice points on spheres and their cluster/separation structure.
//!
//! Everything that decides membership or separation is computed in exact
//! integer arithmetic: a point is on the shell iff its squared norm equals
//! `r2` exactly, and distance comparisons against a real threshold `rho`
//! are performed as integer squared distance vs. the exact dyadic value of
//! `rho^2` (an `f64` is a dyadic rational, so this is a strict comparison
//! of exact rationals).

use std::cmp::Ordering;
use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`, kept as exact integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub coords: Vec<i64>,
}

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Exact squared Euclidean norm.
    pub fn norm2(&self) -> i64 {
        self.coords.iter().map(|&c| c * c).sum()
    }

    /// Exact squared distance to another point.
    pub fn dist2(&self, other: &Self) -> u128 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| {
                let d = (a as i128) - (b as i128);
                (d * d) as u128
            })
            .sum()
    }

    /// Euclidean distance as a float (for reporting only).
    pub fn dist(&self, other: &Self) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    /// Coordinates as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64).collect()
    }
}

/// The set `E_R = {xi in Z^d : |xi|^2 = r2}`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeShell {
    pub d: usize,
    pub r2: i64,
    pub points: Vec<LatticePoint>,
}

impl LatticeShell {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Radius `R = sqrt(r2)`.
    pub fn radius(&self) -> f64 {
        (self.r2 as f64).sqrt()
    }

    /// Exact membership test.
    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.d && p.norm2() == self.r2 && self.points.binary_search(p).is_ok()
    }

    /// Index of a point, if present.
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }
}

/// Exact integer square root (floor).
pub fn isqrt(n: i64) -> i64 {
    if n < 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt() as i64;
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    while s * s > n {
        s -= 1;
    }
    s
}

fn is_square(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let s = isqrt(n);
    (s * s == n).then_some(s)
}

/// Default budget on candidate visits for shell enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 100_000_000;

/// Enumerate the full shell with the default resource budget.
pub fn enumerate_shell(d: usize, r2: i64) -> Result<LatticeShell> {
    enumerate_shell_with_budget(d, r2, DEFAULT_ENUMERATION_BUDGET)
}

/// Enumerate `{xi in Z^d : |xi|^2 = r2}` by recursive coordinate bounding.
///
/// The first `d-1` coordinates range over `|n_i| <= isqrt(remaining)`; the
/// last coordinate is solved exactly from the residual squared radius. The
/// result is complete, duplicate-free and lexicographically sorted by
/// construction. Errors with [`Error::ResourceLimit`] once more than
/// `budget` candidates have been visited.
pub fn enumerate_shell_with_budget(d: usize, r2: i64, budget: u64) -> Result<LatticeShell> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} < 2")));
    }
    if r2 < 1 {
        return Err(Error::InvalidArgument(format!("r2 {r2} < 1")));
    }
    let mut points = Vec::new();
    let mut prefix = vec![0i64; d];
    let mut visited = 0u64;
    fn rec(
        depth: usize,
        d: usize,
        rem: i64,
        prefix: &mut Vec<i64>,
        points: &mut Vec<LatticePoint>,
        visited: &mut u64,
        budget: u64,
    ) -> Result<()> {
        *visited += 1;
        if *visited > budget {
            return Err(Error::ResourceLimit { visited: *visited, budget });
        }
        if depth == d - 1 {
            if let Some(s) = is_square(rem) {
                if s == 0 {
                    prefix[depth] = 0;
                    points.push(LatticePoint::new(prefix.clone()));
                } else {
                    prefix[depth] = -s;
                    points.push(LatticePoint::new(prefix.clone()));
                    prefix[depth] = s;
                    points.push(LatticePoint::new(prefix.clone()));
                }
            }
            return Ok(());
        }
        let m = isqrt(rem);
        for n in -m..=m {
            prefix[depth] = n;
            rec(depth + 1, d, rem - n * n, prefix, points, visited, budget)?;
        }
        Ok(())
    }
    rec(0, d, r2, &mut prefix, &mut points, &mut visited, budget)?;
    debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
    Ok(LatticeShell { d, r2, points })
}

/// Exact dyadic comparison of integer squared distances against `rho^2`.
///
/// An `f64` value `rho = m * 2^e` is exact, so `rho^2 = m^2 * 2^(2e)` is an
/// exact rational with a power-of-two denominator. `cmp_d2(d2)` returns the
/// ordering of `d2` relative to `rho^2` with no rounding.
#[derive(Debug, Clone, Copy)]
pub struct ExactThreshold {
    m2: u128,
    e2: i32,
}

impl ExactThreshold {
    /// Threshold at `rho`; requires `rho > 0` finite.
    pub fn from_rho(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidArgument(format!("rho {rho} must be positive finite")));
        }
        let bits = rho.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        let m = m as u128;
        Ok(Self { m2: m * m, e2: 2 * e })
    }

    /// Ordering of `d2` (an exact integer) relative to `rho^2`.
    pub fn cmp_d2(&self, d2: u128) -> Ordering {
        if self.m2 == 0 {
            return d2.cmp(&0);
        }
        if self.e2 >= 0 {
            let shift = self.e2 as u32;
            if shift >= 128 || self.m2.leading_zeros() < shift {
                // rho^2 exceeds u128 range; any representable d2 is smaller.
                return Ordering::Less;
            }
            d2.cmp(&(self.m2 << shift))
        } else {
            let shift = (-self.e2) as u32;
            if d2 == 0 {
                return 0u128.cmp(&self.m2);
            }
            if shift >= 128 || d2.leading_zeros() < shift {
                return Ordering::Greater;
            }
            (d2 << shift).cmp(&self.m2)
        }
    }

    /// `d2 <= rho^2` exactly.
    pub fn le(&self, d2: u128) -> bool {
        self.cmp_d2(d2) != Ordering::Greater
    }

    /// `d2 > rho^2` exactly.
    pub fn gt(&self, d2: u128) -> bool {
        self.cmp_d2(d2) == Ordering::Greater
    }

    /// `d2 < rho^2` exactly.
    pub fn lt(&self, d2: u128) -> bool {
        self.cmp_d2(d2) == Ordering::Less
    }
}

/// Recursion for the cluster constants:
/// `c(2) = 0`, `delta(2) = delta2`, and for `d >= 3`
/// `c(d) = 2 max(c(d-1), d/delta(d-1))`, `delta(d) = 1/(2(d+1)(1+c(d)))`.
///
/// All values are exact rationals.
pub fn recursion_constants(d: usize, delta2: &BigRational) -> Result<(BigRational, BigRational)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} < 2")));
    }
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    if !(delta2 > &BigRational::zero() && delta2 < &third) {
        return Err(Error::InvalidArgument(format!("delta2 {delta2} outside (0, 1/3)")));
    }
    let mut c = BigRational::zero();
    let mut delta = delta2.clone();
    for dim in 3..=d {
        let ratio = BigRational::from_integer(BigInt::from(dim)) / &delta;
        let mx = if c > ratio { c.clone() } else { ratio };
        c = BigRational::from_integer(BigInt::from(2)) * mx;
        let denom = BigRational::from_integer(BigInt::from(2 * (dim as i64 + 1)))
            * (BigRational::one() + &c);
        delta = denom.recip();
    }
    Ok((c, delta))
}

/// Cluster-decomposition parameters: the exact constants `c(d)`, `delta(d)`
/// and the separation scale `rho`.
#[derive(Debug, Clone)]
pub struct ClusterParams {
    pub d: usize,
    pub delta2: BigRational,
    pub c: BigRational,
    pub delta: BigRational,
    pub rho: f64,
}

impl ClusterParams {
    /// Build params for dimension `d` with the given `delta2` and `rho`.
    pub fn new(d: usize, delta2: BigRational, rho: f64) -> Result<Self> {
        let (c, delta) = recursion_constants(d, &delta2)?;
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidArgument(format!("rho {rho} must be positive finite")));
        }
        Ok(Self { d, delta2, c, delta, rho })
    }

    /// Default `delta2 = 1/4`.
    pub fn with_default_delta2(d: usize, rho: f64) -> Result<Self> {
        Self::new(d, BigRational::new(BigInt::one(), BigInt::from(4)), rho)
    }

    /// `rho^(1 + c(d))` as a float; may be infinite for large `c(d)`.
    pub fn seed_radius(&self) -> f64 {
        let c = rational_to_f64(&self.c);
        self.rho.powf(1.0 + c)
    }

    /// Whether the hypothesis `rho < R^(delta(d))` of the separation
    /// proposition holds for the shell radius `R`. Reported, not enforced.
    pub fn hypothesis_holds(&self, r2: i64) -> bool {
        let exponent = rational_to_f64(&self.delta);
        self.rho < (r2 as f64).sqrt().powf(exponent)
    }
}

/// Float approximation of an exact rational (reporting only).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = bigint_to_f64(r.numer());
    let d = bigint_to_f64(r.denom());
    n / d
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    // Good enough for reporting: exact for |x| < 2^53, otherwise rounded.
    let s = x.to_string();
    s.parse::<f64>().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Result of the greedy cluster decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    /// Disjoint index sets partitioning the shell, each sorted ascending.
    pub clusters: Vec<Vec<usize>>,
    pub rho: f64,
    /// Euclidean diameter of each cluster.
    pub diameters: Vec<f64>,
    /// Minimal Euclidean distance between points of distinct clusters
    /// (infinite when there is a single cluster).
    pub min_intercluster_distance: f64,
}

/// Grow a seed set to the fixed point of
/// `F_i = F ∪ {x in E : dist(x, F_{i-1}) <= rho}`.
///
/// The returned set `T` contains the seed and satisfies
/// `dist(T, E \ T) > rho` exactly. Monotone on a finite set, so it
/// terminates; growing the output again returns it unchanged.
pub fn grow_overset(shell: &LatticeShell, seed: &[usize], rho: f64) -> Result<Vec<usize>> {
    let universe: Vec<usize> = (0..shell.len()).collect();
    grow_within(&shell.points, &universe, seed, &ExactThreshold::from_rho(rho)?)
}

fn grow_within(
    points: &[LatticePoint],
    universe: &[usize],
    seed: &[usize],
    thr: &ExactThreshold,
) -> Result<Vec<usize>> {
    let mut in_set = vec![false; points.len()];
    let mut member = vec![false; points.len()];
    for &i in universe {
        member[i] = true;
    }
    let mut frontier: Vec<usize> = Vec::new();
    for &i in seed {
        if i >= points.len() || !member[i] {
            return Err(Error::InvalidArgument(format!("seed index {i} outside universe")));
        }
        if !in_set[i] {
            in_set[i] = true;
            frontier.push(i);
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &j in universe {
            if in_set[j] {
                continue;
            }
            if frontier.iter().any(|&i| thr.le(points[i].dist2(&points[j]))) {
                in_set[j] = true;
                next.push(j);
            }
        }
        frontier = next;
    }
    Ok(universe.iter().copied().filter(|&i| in_set[i]).collect())
}

/// Greedy cluster decomposition of an arbitrary point list (indices into
/// `points`): take the lexicographically smallest remaining point, seed
/// with the ball of radius `rho^(1+c(d))` around it, grow to a fixed point
/// inside the remaining set, emit, repeat.
pub fn cluster_decompose_points(
    points: &[LatticePoint],
    params: &ClusterParams,
) -> Result<Vec<Vec<usize>>> {
    let thr = ExactThreshold::from_rho(params.rho)?;
    let seed_radius = params.seed_radius();
    let seed_thr = if seed_radius.is_finite() && seed_radius > 0.0 {
        Some(ExactThreshold::from_rho(seed_radius)?)
    } else {
        None // rho^(1+c) overflowed; the seed ball covers everything.
    };

    let n = points.len();
    let order = {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| points[a].cmp(&points[b]));
        idx
    };
    let mut assigned = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    loop {
        let Some(&x1) = order.iter().find(|&&i| !assigned[i]) else { break };
        let remaining: Vec<usize> = (0..n).filter(|&i| !assigned[i]).collect();
        let seed: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| match &seed_thr {
                Some(t) => t.le(points[x1].dist2(&points[i])),
                None => true,
            })
            .collect();
        let cluster = grow_within(points, &remaining, &seed, &thr)?;
        for &i in &cluster {
            assigned[i] = true;
        }
        clusters.push(cluster);
    }
    Ok(clusters)
}

/// [`cluster_decompose_points`] over a full shell, with diameters and the
/// minimal inter-cluster distance filled in.
pub fn cluster_decompose(shell: &LatticeShell, params: &ClusterParams) -> Result<ClusterDecomposition> {
    let clusters = cluster_decompose_points(&shell.points, params)?;

    let diameters = clusters
        .iter()
        .map(|cl| {
            let mut max2 = 0u128;
            for (k, &i) in cl.iter().enumerate() {
                for &j in &cl[k + 1..] {
                    max2 = max2.max(shell.points[i].dist2(&shell.points[j]));
                }
            }
            (max2 as f64).sqrt()
        })
        .collect();

    let mut min2: Option<u128> = None;
    for (a, ca) in clusters.iter().enumerate() {
        for cb in clusters.iter().skip(a + 1) {
            for &i in ca {
                for &j in cb {
                    let d2 = shell.points[i].dist2(&shell.points[j]);
                    min2 = Some(min2.map_or(d2, |m| m.min(d2)));
                }
            }
        }
    }
    let min_intercluster_distance = min2.map_or(f64::INFINITY, |m| (m as f64).sqrt());

    Ok(ClusterDecomposition {
        clusters,
        rho: params.rho,
        diameters,
        min_intercluster_distance,
    })
}

/// Indices of shell points inside the Euclidean cap
/// `{xi : |xi - R*center| < radius}`.
pub fn cap_points(shell: &LatticeShell, center: &[f64], radius: f64) -> Result<Vec<usize>> {
    if center.len() != shell.d {
        return Err(Error::InvalidArgument("cap center has wrong dimension".into()));
    }
    let norm: f64 = center.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("cap center norm {norm} is not 1")));
    }
    if radius < 0.0 {
        return Err(Error::InvalidArgument("cap radius must be nonnegative".into()));
    }
    let r = shell.radius();
    Ok((0..shell.len())
        .filter(|&i| {
            let d2: f64 = shell.points[i]
                .coords
                .iter()
                .zip(center)
                .map(|(&c, &u)| {
                    let d = c as f64 - r * u;
                    d * d
                })
                .sum();
            d2.sqrt() < radius
        })
        .collect())
}

/// Dimension of the affine span of a point set, via exact integer rank of
/// the matrix of differences.
pub fn affine_rank(points: &[LatticePoint]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("affine_rank of empty set".into()));
    }
    let base = &points[0];
    let rows: Vec<Vec<BigInt>> = points[1..]
        .iter()
        .map(|p| {
            p.coords
                .iter()
                .zip(&base.coords)
                .map(|(&a, &b)| BigInt::from(a) - BigInt::from(b))
                .collect()
        })
        .collect();
    Ok(integer_rank(rows))
}

/// Exact rank by fraction-free elimination.
fn integer_rank(mut rows: Vec<Vec<BigInt>>) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..ncols {
        let Some(p) = (row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(row, p);
        let pivot = rows[row][col].clone();
        for r in row + 1..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = rows[r][col].clone();
            for c in col..ncols {
                let val = &rows[r][c] * &pivot - &rows[row][c] * &factor;
                rows[r][c] = val;
            }
        }
        rank += 1;
        row += 1;
        if row == rows.len() {
            break;
        }
    }
    rank
}

/// A cap whose lattice points fail to lie on an affine hyperplane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JarnikViolation {
    pub center_index: usize,
    pub member_indices: Vec<usize>,
    pub affine_rank: usize,
}

/// Report from scanning every point-centered cap of a shell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JarnikReport {
    pub cap_radius: f64,
    pub caps_scanned: usize,
    pub largest_cap: usize,
    pub violations: Vec<JarnikViolation>,
}

/// For every shell point as cap center, collect the lattice points within
/// Euclidean distance `cap_radius` (exact integer-vs-dyadic comparison) and
/// record the caps whose affine rank exceeds `d - 1`. For `d = 2` this is
/// precisely a cap with three or more non-collinear points.
pub fn jarnik_scan(shell: &LatticeShell, cap_radius: f64) -> Result<JarnikReport> {
    let thr = ExactThreshold::from_rho(cap_radius)?;
    let mut violations = Vec::new();
    let mut largest = 0;
    for i in 0..shell.len() {
        let members: Vec<usize> = (0..shell.len())
            .filter(|&j| thr.lt(shell.points[i].dist2(&shell.points[j])))
            .collect();
        largest = largest.max(members.len());
        if members.len() < 2 {
            continue;
        }
        let pts: Vec<LatticePoint> = members.iter().map(|&j| shell.points[j].clone()).collect();
        let rank = affine_rank(&pts)?;
        if rank > shell.d - 1 {
            violations.push(JarnikViolation {
                center_index: i,
                member_indices: members,
                affine_rank: rank,
            });
        }
    }
    Ok(JarnikReport {
        cap_radius,
        caps_scanned: shell.len(),
        largest_cap: largest,
        violations,
    })
}

/// Maximal graph-metric eccentricity over components of the rho-proximity
/// graph: a certified lower bound for the longest rho-chain of distinct
/// points (longest-path itself is infeasible).
pub fn max_chain_length(shell: &LatticeShell, rho: f64) -> Result<usize> {
    let thr = ExactThreshold::from_rho(rho)?;
    let n = shell.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if thr.le(shell.points[i].dist2(&shell.points[j])) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut best = 0;
    for start in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    best = best.max(dist[v]);
                    q.push_back(v);
                }
            }
        }
    }
    Ok(best)
}

/// Serializable document bundling a shell with a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellDocument {
    pub d: usize,
    pub r2: i64,
    pub points: Vec<Vec<i64>>,
    pub clusters: Vec<Vec<usize>>,
    pub rho: f64,
    pub constants: ShellConstants,
}

/// The exact rationals `c(d)`, `delta(d)` rendered as `numer/denom` strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellConstants {
    pub c: String,
    pub delta: String,
}

impl ShellDocument {
    pub fn new(shell: &LatticeShell, decomp: &ClusterDecomposition, params: &ClusterParams) -> Self {
        Self {
            d: shell.d,
            r2: shell.r2,
            points: shell.points.iter().map(|p| p.coords.clone()).collect(),
            clusters: decomp.clusters.clone(),
            rho: decomp.rho,
            constants: ShellConstants {
                c: params.c.to_string(),
                delta: params.delta.to_string(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: scan the full grid `|n_i| <= isqrt(r2)`.
    fn brute_force_shell(d: usize, r2: i64) -> Vec<LatticePoint> {
        let m = isqrt(r2);
        let mut out = Vec::new();
        let mut coords = vec![-m; d];
        'outer: loop {
            let p = LatticePoint::new(coords.clone());
            if p.norm2() == r2 {
                out.push(p);
            }
            for i in (0..d).rev() {
                if coords[i] < m {
                    coords[i] += 1;
                    continue 'outer;
                }
                coords[i] = -m;
                if i == 0 {
                    break 'outer;
                }
            }
        }
        out.sort();
        out
    }

    /// Union-find oracle for proximity components.
    fn proximity_components(shell: &LatticeShell, rho: f64) -> Vec<Vec<usize>> {
        let thr = ExactThreshold::from_rho(rho).unwrap();
        let n = shell.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for i in 0..n {
            for j in i + 1..n {
                if thr.le(shell.points[i].dist2(&shell.points[j])) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut comps: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            comps.entry(r).or_default().push(i);
        }
        comps.into_values().collect()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn recursion_constants_match_hand_values() {
        let quarter = rat(1, 4);
        let (c2, d2) = recursion_constants(2, &quarter).unwrap();
        assert_eq!(c2, rat(0, 1));
        assert_eq!(d2, quarter);
        // c(3) = 2*max(0, 3/(1/4)) = 24, delta(3) = 1/(2*4*25) = 1/200
        let (c3, d3) = recursion_constants(3, &quarter).unwrap();
        assert_eq!(c3, rat(24, 1));
        assert_eq!(d3, rat(1, 200));
        // c(4) = 2*max(24, 4*200) = 1600, delta(4) = 1/(2*5*1601) = 1/16010
        let (c4, d4) = recursion_constants(4, &quarter).unwrap();
        assert_eq!(c4, rat(1600, 1));
        assert_eq!(d4, rat(1, 16010));
    }

    #[test]
    fn recursion_constants_reject_bad_input() {
        assert!(recursion_constants(1, &rat(1, 4)).is_err());
        assert!(recursion_constants(3, &rat(1, 3)).is_err());
        assert!(recursion_constants(3, &rat(0, 1)).is_err());
        assert!(recursion_constants(3, &rat(-1, 4)).is_err());
    }

    #[test]
    fn shell_examples() {
        let s = enumerate_shell(2, 1).unwrap();
        assert_eq!(s.len(), 4);
        let s = enumerate_shell(2, 25).unwrap();
        assert_eq!(s.len(), 12);
        let s = enumerate_shell(2, 3).unwrap();
        assert_eq!(s.len(), 0);
        let s = enumerate_shell(3, 2).unwrap();
        assert_eq!(s.len(), 12);
        for p in &s.points {
            let mut abs: Vec<i64> = p.coords.iter().map(|c| c.abs()).collect();
            abs.sort();
            assert_eq!(abs, vec![0, 1, 1]);
        }
    }

    #[test]
    fn shell_matches_brute_force() {
        for (d, r2) in [(2, 25), (2, 18), (2, 100), (3, 9), (3, 14), (4, 6)] {
            let s = enumerate_shell(d, r2).unwrap();
            assert_eq!(s.points, brute_force_shell(d, r2), "d={d} r2={r2}");
        }
    }

    #[test]
    fn shell_budget_is_enforced() {
        match enumerate_shell_with_budget(4, 1_000_000, 100) {
            Err(Error::ResourceLimit { .. }) => {}
            other => panic!("expected resource limit, got {other:?}"),
        }
    }

    #[test]
    fn exact_threshold_matches_rational_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let rho: f64 = rng.gen_range(1e-3..1e4f64);
            let d2: u128 = rng.gen_range(0..10_000_000u128);
            let thr = ExactThreshold::from_rho(rho).unwrap();
            let rho_rat = BigRational::from_float(rho).unwrap();
            let rho2 = &rho_rat * &rho_rat;
            let d2_rat = BigRational::from_integer(BigInt::from(d2));
            assert_eq!(thr.cmp_d2(d2), d2_rat.cmp(&rho2), "rho={rho} d2={d2}");
        }
        // Exact boundary: rho = 3 gives rho^2 = 9 exactly.
        let thr = ExactThreshold::from_rho(3.0).unwrap();
        assert_eq!(thr.cmp_d2(9), Ordering::Equal);
        assert!(thr.le(9) && !thr.lt(9) && !thr.gt(9));
    }

    #[test]
    fn cap_points_examples() {
        let s = enumerate_shell(2, 25).unwrap();
        assert!(cap_points(&s, &[1.0, 0.0], 0.0).unwrap().is_empty());
        let all = cap_points(&s, &[1.0, 0.0], 2.0 * s.radius() + 1.0).unwrap();
        assert_eq!(all.len(), 12);
        let idx = cap_points(&s, &[1.0, 0.0], 1.5).unwrap();
        let pts: Vec<_> = idx.iter().map(|&i| s.points[i].coords.clone()).collect();
        assert_eq!(pts, vec![vec![5, 0]]);
        assert!(cap_points(&s, &[0.9, 0.1], 1.0).is_err());
    }

    #[test]
    fn affine_rank_examples() {
        let p = |c: &[i64]| LatticePoint::new(c.to_vec());
        assert_eq!(affine_rank(&[p(&[5, 0])]).unwrap(), 0);
        assert_eq!(affine_rank(&[p(&[5, 0]), p(&[-5, 0])]).unwrap(), 1);
        assert_eq!(affine_rank(&[p(&[5, 0]), p(&[3, 4]), p(&[0, 5])]).unwrap(), 2);
        // Collinear triple on a line.
        assert_eq!(affine_rank(&[p(&[0, 0]), p(&[1, 1]), p(&[2, 2])]).unwrap(), 1);
    }

    #[test]
    fn jarnik_scan_examples() {
        let s = enumerate_shell(2, 25).unwrap();
        let rep = jarnik_scan(&s, 0.5).unwrap();
        assert!(rep.violations.is_empty());
        assert_eq!(rep.largest_cap, 1);
        // Small multiple of r2^(1/6).
        let rep = jarnik_scan(&s, 0.5 * (25f64).powf(1.0 / 6.0)).unwrap();
        assert!(rep.violations.is_empty());
        // A huge cap on a 3d shell with >= 4 points in general position.
        let s3 = enumerate_shell(3, 2).unwrap();
        let rep = jarnik_scan(&s3, 10.0).unwrap();
        assert!(!rep.violations.is_empty());
    }

    #[test]
    fn grow_overset_examples() {
        let s = enumerate_shell(2, 25).unwrap();
        let all: Vec<usize> = (0..s.len()).collect();
        assert_eq!(grow_overset(&s, &all, 1.0).unwrap(), all);
        // rho below the minimal pairwise distance: seed unchanged.
        assert_eq!(grow_overset(&s, &[0], 1.0).unwrap(), vec![0]);
        // Seed {(5,0)} with rho = 3: (4,3) and (4,-3) are at distance
        // sqrt(10) > 3, so the seed is already a fixed point.
        let i50 = s.index_of(&LatticePoint::new(vec![5, 0])).unwrap();
        assert_eq!(grow_overset(&s, &[i50], 3.0).unwrap(), vec![i50]);
        // Direct fixed-point oracle at rho = 3.2 (sqrt(10) <= 3.2): the
        // cluster of (5,0) picks up (4,3) and (4,-3), whose further
        // neighbours (3,4), (3,-4) are at sqrt(2), and so on.
        let grown = grow_overset(&s, &[i50], 3.2).unwrap();
        let comps = proximity_components(&s, 3.2);
        let expected = comps.into_iter().find(|c| c.contains(&i50)).unwrap();
        assert_eq!(grown, expected);
    }

    #[test]
    fn grow_overset_monotone_idempotent_separated() {
        let s = enumerate_shell(2, 325).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let rho: f64 = rng.gen_range(0.5..12.0);
            let k = rng.gen_range(1..=s.len());
            let mut seed: Vec<usize> = (0..s.len()).collect();
            for i in (1..seed.len()).rev() {
                seed.swap(i, rng.gen_range(0..=i));
            }
            seed.truncate(k);
            seed.sort();
            let grown = grow_overset(&s, &seed, rho).unwrap();
            for i in &seed {
                assert!(grown.contains(i), "monotone: seed inside output");
            }
            let again = grow_overset(&s, &grown, rho).unwrap();
            assert_eq!(again, grown, "idempotent");
            // Exact separation from the complement.
            let thr = ExactThreshold::from_rho(rho).unwrap();
            for &i in &grown {
                for j in 0..s.len() {
                    if !grown.contains(&j) {
                        assert!(thr.gt(s.points[i].dist2(&s.points[j])));
                    }
                }
            }
        }
    }

    #[test]
    fn cluster_decompose_examples() {
        let s = enumerate_shell(2, 25).unwrap();
        // rho below min pairwise distance: all singletons.
        let params = ClusterParams::with_default_delta2(2, 1.0).unwrap();
        let dec = cluster_decompose(&s, &params).unwrap();
        assert_eq!(dec.clusters.len(), 12);
        // rho at least the diameter: single cluster.
        let params = ClusterParams::with_default_delta2(2, 11.0).unwrap();
        let dec = cluster_decompose(&s, &params).unwrap();
        assert_eq!(dec.clusters.len(), 1);
        assert!(dec.min_intercluster_distance.is_infinite());
        // rho = 2, c(2) = 0: clusters match proximity components exactly
        // here (seed radius = rho), verified against the union-find oracle.
        let params = ClusterParams::with_default_delta2(2, 2.0).unwrap();
        let dec = cluster_decompose(&s, &params).unwrap();
        let comps = proximity_components(&s, 2.0);
        assert_eq!(dec.clusters.len(), comps.len());
        for comp in &comps {
            let holder: Vec<&Vec<usize>> =
                dec.clusters.iter().filter(|c| comp.iter().any(|i| c.contains(i))).collect();
            assert_eq!(holder.len(), 1, "each component lies in one cluster");
        }
    }

    #[test]
    fn cluster_partition_and_separation_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (d, r2) = if rng.gen_bool(0.5) {
                (2usize, rng.gen_range(2..2000i64))
            } else {
                (3usize, rng.gen_range(2..200i64))
            };
            let s = enumerate_shell(d, r2).unwrap();
            if s.is_empty() {
                continue;
            }
            for _ in 0..3 {
                let rho: f64 = rng.gen_range(0.4..3.0f64) * (1.0 + rng.gen_range(0.0..2.0));
                let params = ClusterParams::with_default_delta2(d, rho).unwrap();
                let dec = cluster_decompose(&s, &params).unwrap();
                // Partition: disjoint cover.
                let mut seen = vec![false; s.len()];
                for c in &dec.clusters {
                    for &i in c {
                        assert!(!seen[i], "clusters are disjoint");
                        seen[i] = true;
                    }
                }
                assert!(seen.iter().all(|&b| b), "clusters cover the shell");
                // Exact separation between clusters.
                let thr = ExactThreshold::from_rho(rho).unwrap();
                for (a, ca) in dec.clusters.iter().enumerate() {
                    for cb in dec.clusters.iter().skip(a + 1) {
                        for &i in ca {
                            for &j in cb {
                                assert!(thr.gt(s.points[i].dist2(&s.points[j])));
                            }
                        }
                    }
                }
                // Each proximity component lies inside a single cluster.
                for comp in proximity_components(&s, rho) {
                    let first = dec.clusters.iter().position(|c| c.contains(&comp[0])).unwrap();
                    for i in &comp[1..] {
                        assert!(dec.clusters[first].contains(i));
                    }
                }
            }
        }
    }

    #[test]
    fn max_chain_examples() {
        let s = enumerate_shell(2, 25).unwrap();
        assert_eq!(max_chain_length(&s, 0.5).unwrap(), 0);
        // sqrt(2)-neighbours (3,4)-(4,3) exist, so rho = 1.5 gives 1.
        assert_eq!(max_chain_length(&s, 1.5).unwrap(), 1);
        // BFS oracle at rho = 3: components are pairs, eccentricity 1.
        assert_eq!(max_chain_length(&s, 3.0).unwrap(), 1);
        // At rho = 3.2, (5,0)-(4,3)-(3,4)-(0,5) chains up: the component
        // covering the quarter-circle has graph diameter 3.
        let comps = proximity_components(&s, 3.2);
        assert!(comps.iter().any(|c| c.len() >= 4));
        assert!(max_chain_length(&s, 3.2).unwrap() >= 3);
    }

    #[test]
    fn shell_document_roundtrip() {
        let s = enumerate_shell(2, 25).unwrap();
        let params = ClusterParams::with_default_delta2(2, 2.0).unwrap();
        let dec = cluster_decompose(&s, &params).unwrap();
        let doc = ShellDocument::new(&s, &dec, &params);
        let json = serde_json::to_string(&doc).unwrap();
        let back: ShellDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.points, doc.points);
        assert_eq!(back.constants.delta, "1/4");
    }

    #[test]
    fn hypothesis_report() {
        let params = ClusterParams::with_default_delta2(2, 2.0).unwrap();
        // rho = 2 < (10^6)^(1/4*1/2)... R^(1/4) with R = 1000: 5.6 > 2.
        assert!(params.hypothesis_holds(1_000_000));
        assert!(!params.hypothesis_holds(25));
    }
}
