//! Toral Laplace eigenfunctions as sparse trigonometric polynomials
//! `phi(x) = sum a_xi exp(2 pi i <xi, x>)` with all frequencies on one
//! lattice shell, together with their holomorphic extensions.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticeShell};

/// `exp(2 pi i s)` with argument reduction mod 1 before scaling by 2 pi,
/// so accuracy is uniform for large frequency dot products.
pub fn e2pi(s: f64) -> Complex64 {
    let f = s - s.round();
    let a = 2.0 * std::f64::consts::PI * f;
    Complex64::new(a.cos(), a.sin())
}

/// `exp(2 pi i w)` for complex `w`.
pub fn e2pi_c(w: Complex64) -> Complex64 {
    e2pi(w.re) * (-2.0 * std::f64::consts::PI * w.im).exp()
}

/// Default bound on `|Im Z|` for holomorphic evaluation; beyond this the
/// factor `exp(2 pi lambda |Im Z|)` is numerically useless.
pub const DEFAULT_MAX_IM: f64 = 10.0;

/// A sparse eigenfunction supported on the shell of squared radius `r2`.
///
/// Coefficients are keyed by the exact integer frequency and kept in
/// lexicographic order, so all sums run in a fixed deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub d: usize,
    pub r2: i64,
    coeffs: BTreeMap<LatticePoint, Complex64>,
}

impl Eigenfunction {
    /// Build from raw coefficients; every key must satisfy
    /// `|xi|^2 = r2` exactly and the result is L^2-normalized.
    pub fn new(d: usize, r2: i64, coeffs: Vec<(LatticePoint, Complex64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (xi, a) in coeffs {
            if xi.dim() != d {
                return Err(Error::InvalidArgument(format!(
                    "frequency {:?} has dimension {} != {d}",
                    xi.coords,
                    xi.dim()
                )));
            }
            if xi.norm2() != r2 {
                return Err(Error::OffShell(xi.coords.clone(), r2));
            }
            if a != Complex64::from(0.0) {
                *map.entry(xi).or_insert(Complex64::from(0.0)) += a;
            }
        }
        let norm2: f64 = map.values().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidArgument("eigenfunction has no nonzero coefficients".into()));
        }
        let scale = norm2.sqrt().recip();
        for a in map.values_mut() {
            *a *= scale;
        }
        Ok(Self { d, r2, coeffs: map })
    }

    /// Frequency `lambda = sqrt(r2)`.
    pub fn lambda(&self) -> f64 {
        (self.r2 as f64).sqrt()
    }

    /// Number of frequencies in the support.
    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Sorted iterator over `(frequency, coefficient)`.
    pub fn coeffs(&self) -> impl Iterator<Item = (&LatticePoint, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, xi: &LatticePoint) -> Complex64 {
        self.coeffs.get(xi).copied().unwrap_or(Complex64::from(0.0))
    }

    /// Whether `a_{-xi} = conj(a_xi)` for every frequency (tolerance 1e-12),
    /// which makes the function real-valued.
    pub fn is_real_valued(&self) -> bool {
        self.coeffs.iter().all(|(xi, a)| {
            let neg = LatticePoint::new(xi.coords.iter().map(|c| -c).collect());
            (self.coeff(&neg) - a.conj()).norm() <= 1e-12
        })
    }

    /// `sum a_xi exp(2 pi i <xi, x>)`; 1-periodic in each coordinate.
    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(xi, a)| {
                let s: f64 = xi.coords.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum();
                a * e2pi(s)
            })
            .sum()
    }

    /// Holomorphic extension `phi^C(Z) = sum a_xi exp(2 pi i <xi, Z>)`.
    ///
    /// Rejects `|Im Z| > max_im` to keep `exp(2 pi lambda |Im Z|)` sane.
    pub fn evaluate_complex_with_bound(&self, z: &[Complex64], max_im: f64) -> Result<Complex64> {
        let im_norm: f64 = z.iter().map(|w| w.im * w.im).sum::<f64>().sqrt();
        if im_norm > max_im {
            return Err(Error::InvalidArgument(format!(
                "|Im Z| = {im_norm} exceeds the evaluation bound {max_im}"
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .map(|(xi, a)| {
                let w: Complex64 =
                    xi.coords.iter().zip(z).map(|(&k, &v)| Complex64::from(k as f64) * v).sum();
                a * e2pi_c(w)
            })
            .sum())
    }

    /// [`Self::evaluate_complex_with_bound`] with the default bound.
    pub fn evaluate_complex(&self, z: &[Complex64]) -> Result<Complex64> {
        self.evaluate_complex_with_bound(z, DEFAULT_MAX_IM)
    }

    /// Complex gradient `(d phi^C / dz_j)_j = sum a_xi (2 pi i xi_j) e(...)`.
    pub fn gradient_complex(&self, z: &[Complex64]) -> Vec<Complex64> {
        let tau = 2.0 * std::f64::consts::PI;
        let mut out = vec![Complex64::from(0.0); self.d];
        for (xi, a) in &self.coeffs {
            let w: Complex64 =
                xi.coords.iter().zip(z).map(|(&k, &v)| Complex64::from(k as f64) * v).sum();
            let e = a * e2pi_c(w);
            for (j, &k) in xi.coords.iter().enumerate() {
                out[j] += Complex64::new(0.0, tau * k as f64) * e;
            }
        }
        out
    }

    /// Complex Hessian `d^2 phi^C / dz_i dz_j`.
    pub fn hessian_complex(&self, z: &[Complex64]) -> Vec<Vec<Complex64>> {
        let tau = 2.0 * std::f64::consts::PI;
        let mut out = vec![vec![Complex64::from(0.0); self.d]; self.d];
        for (xi, a) in &self.coeffs {
            let w: Complex64 =
                xi.coords.iter().zip(z).map(|(&k, &v)| Complex64::from(k as f64) * v).sum();
            let e = a * e2pi_c(w);
            for (i, &ki) in xi.coords.iter().enumerate() {
                for (j, &kj) in xi.coords.iter().enumerate() {
                    out[i][j] += Complex64::from(-(tau * ki as f64) * (tau * kj as f64)) * e;
                }
            }
        }
        out
    }

    /// Translate on the torus: `phi(. + shift)`, i.e. multiply each
    /// coefficient by `exp(2 pi i <xi, shift>)`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d {
            return Err(Error::InvalidArgument("shift has wrong dimension".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(xi, a)| {
                let s: f64 = xi.coords.iter().zip(shift).map(|(&k, &b)| k as f64 * b).sum();
                (xi.clone(), a * e2pi(s))
            })
            .collect();
        Self::new(self.d, self.r2, coeffs)
    }

    /// Relabel coordinates: new coordinate `j` is old coordinate `perm[j]`.
    pub fn permute_coords(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.d];
        for &p in perm {
            if p >= self.d || seen[p] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[p] = true;
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(xi, a)| {
                let coords: Vec<i64> = perm.iter().map(|&p| xi.coords[p]).collect();
                (LatticePoint::new(coords), *a)
            })
            .collect();
        Self::new(self.d, self.r2, coeffs)
    }

    /// Seeded random eigenfunction on a subset of the shell.
    ///
    /// Picks `min(max_support, #E)` frequencies (all of them when
    /// `max_support = 0`) with coefficients uniform in the unit square;
    /// `real_valued` closes the support under negation with conjugate
    /// coefficients.
    pub fn random(shell: &LatticeShell, seed: u64, max_support: usize, real_valued: bool) -> Result<Self> {
        if shell.is_empty() {
            return Err(Error::InvalidArgument("cannot sample from an empty shell".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let take = if max_support == 0 { shell.len() } else { max_support.min(shell.len()) };
        let mut order: Vec<usize> = (0..shell.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut coeffs: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
        for &i in order.iter().take(take) {
            let xi = shell.points[i].clone();
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if real_valued {
                let neg = LatticePoint::new(xi.coords.iter().map(|c| -c).collect());
                coeffs.insert(neg, a.conj());
            }
            coeffs.insert(xi, a);
        }
        Self::new(shell.d, shell.r2, coeffs.into_iter().collect())
    }

    pub fn to_document(&self) -> EigenfunctionDoc {
        EigenfunctionDoc {
            d: self.d,
            r2: self.r2,
            coeffs: self
                .coeffs
                .iter()
                .map(|(xi, a)| CoeffDoc { xi: xi.coords.clone(), re: a.re, im: a.im })
                .collect(),
        }
    }

    pub fn from_document(doc: &EigenfunctionDoc) -> Result<Self> {
        Self::new(
            doc.d,
            doc.r2,
            doc.coeffs
                .iter()
                .map(|c| (LatticePoint::new(c.xi.clone()), Complex64::new(c.re, c.im)))
                .collect(),
        )
    }
}

/// JSON form: `{d, r2, coeffs: [{xi, re, im}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenfunctionDoc {
    pub d: usize,
    pub r2: i64,
    pub coeffs: Vec<CoeffDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffDoc {
    pub xi: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// The distinguished frequency `xi0` and the direction `v0 = -xi0/|xi0|`.
#[derive(Debug, Clone)]
pub struct ShiftFrame {
    pub xi0: LatticePoint,
    pub v0: Vec<f64>,
}

impl ShiftFrame {
    pub fn new(xi0: LatticePoint) -> Result<Self> {
        let n2 = xi0.norm2();
        if n2 == 0 {
            return Err(Error::InvalidArgument("xi0 must be nonzero".into()));
        }
        let lambda = (n2 as f64).sqrt();
        let v0 = xi0.coords.iter().map(|&c| -(c as f64) / lambda).collect();
        Ok(Self { xi0, v0 })
    }

    pub fn r2(&self) -> i64 {
        self.xi0.norm2()
    }

    pub fn lambda(&self) -> f64 {
        (self.r2() as f64).sqrt()
    }
}

/// Default short-sum threshold `D = ceil((log lambda)^2)` scaled by a
/// configurable multiplier.
pub fn default_cap_threshold(r2: i64, multiplier: f64) -> f64 {
    let lambda = (r2 as f64).sqrt();
    multiplier * lambda.ln().powi(2).ceil().max(1.0)
}

/// The linear height `A(xi) = <xi - xi0, v0>`, computed from the exact
/// integer identity `A(xi) = (r2 - <xi, xi0>) / lambda`.
///
/// `A(xi0) = 0` and `A(xi) > 0` for every other shell point, since two
/// distinct points of a sphere cannot lie on the same positive ray.
pub fn shift_height(frame: &ShiftFrame, xi: &LatticePoint) -> Result<f64> {
    let r2 = frame.r2();
    if xi.dim() != frame.xi0.dim() || xi.norm2() != r2 {
        return Err(Error::OffShell(xi.coords.clone(), r2));
    }
    let dot: i64 = xi.coords.iter().zip(&frame.xi0.coords).map(|(&a, &b)| a * b).sum();
    Ok((r2 - dot) as f64 / frame.lambda())
}

/// The short support `E' = {xi : A(xi) < D}` with its cap-size report.
#[derive(Debug, Clone)]
pub struct ShortSupport {
    pub frequencies: Vec<LatticePoint>,
    /// Max Euclidean distance `|xi - xi0|` over the selected frequencies.
    pub max_distance: f64,
    /// The containment radius `sqrt(2 lambda D)`: `|xi - xi0|^2 = 2 lambda
    /// A(xi)`, so `A(xi) < D` confines `E'` to this cap around `xi0`.
    pub cap_bound: f64,
}

/// Frequencies of `phi` with `A(xi) < D` (strict).
pub fn short_support(phi: &Eigenfunction, frame: &ShiftFrame, d_threshold: f64) -> Result<ShortSupport> {
    if d_threshold <= 0.0 {
        return Err(Error::InvalidArgument("threshold D must be positive".into()));
    }
    let mut freqs = Vec::new();
    let mut max_distance: f64 = 0.0;
    for (xi, _) in phi.coeffs() {
        let a = shift_height(frame, xi)?;
        if a < d_threshold {
            max_distance = max_distance.max(xi.dist(&frame.xi0));
            freqs.push(xi.clone());
        }
    }
    let cap_bound = (2.0 * frame.lambda() * d_threshold).sqrt();
    Ok(ShortSupport { frequencies: freqs, max_distance, cap_bound })
}

/// A short sum over `A(xi) <= D` together with the tail certificate
/// `(#E)^(1/2) exp(-2 pi tau D)` bounding the discarded frequencies.
#[derive(Debug, Clone)]
pub struct ShortSum {
    pub value: Complex64,
    pub tail_bound: f64,
    /// The slab height `t = |Im Z|` of the evaluation point.
    pub t: f64,
}

/// Evaluate `sum_{A(xi) <= D} a_xi e(<xi - xi0, X>) exp(-2 pi t A(xi))` at
/// a point `Z` of the slab `T(v0; tau)` (i.e. `Im Z = t v0`, `tau < t <
/// 2 tau`, validated to 1e-9).
pub fn short_sum_with_tail(
    phi: &Eigenfunction,
    frame: &ShiftFrame,
    z: &[Complex64],
    tau: f64,
    d_threshold: f64,
) -> Result<ShortSum> {
    if z.len() != phi.d {
        return Err(Error::InvalidArgument("evaluation point has wrong dimension".into()));
    }
    let t: f64 = z.iter().map(|w| w.im * w.im).sum::<f64>().sqrt();
    let slab_gap: f64 = z
        .iter()
        .zip(&frame.v0)
        .map(|(w, &v)| (w.im - t * v) * (w.im - t * v))
        .sum::<f64>()
        .sqrt();
    if slab_gap > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Im Z is not parallel to v0 (gap {slab_gap:.3e})"
        )));
    }
    if !(t > tau && t < 2.0 * tau) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside the slab ({tau}, {})",
            2.0 * tau
        )));
    }
    let mut value = Complex64::from(0.0);
    for (xi, a) in phi.coeffs() {
        let height = shift_height(frame, xi)?;
        if height <= d_threshold {
            let s: f64 = xi
                .coords
                .iter()
                .zip(&frame.xi0.coords)
                .zip(z)
                .map(|((&k, &k0), w)| (k - k0) as f64 * w.re)
                .sum();
            value += a * e2pi(s) * (-2.0 * std::f64::consts::PI * t * height).exp();
        }
    }
    let tail_bound =
        (phi.support_len() as f64).sqrt() * (-2.0 * std::f64::consts::PI * tau * d_threshold).exp();
    Ok(ShortSum { value, tail_bound, t })
}

/// The full shifted evaluation `phi^C(Z) exp(-2 pi i <xi0, Z>)`, computed
/// stably as `sum a_xi exp(2 pi i <xi - xi0, Z>)`.
pub fn shifted_evaluation(phi: &Eigenfunction, frame: &ShiftFrame, z: &[Complex64]) -> Complex64 {
    phi.coeffs()
        .map(|(xi, a)| {
            let w: Complex64 = xi
                .coords
                .iter()
                .zip(&frame.xi0.coords)
                .zip(z)
                .map(|((&k, &k0), v)| Complex64::from((k - k0) as f64) * v)
                .sum();
            a * e2pi_c(w)
        })
        .sum()
}

/// `sin(2 pi n (<xi, x> - c))` as a normalized eigenfunction: it vanishes
/// identically on the closed totally geodesic hyperplane `<xi, x> = c` and
/// has eigenvalue parameter `r2 = n^2 |xi|^2`.
pub fn make_geodesic_vanisher(xi: &LatticePoint, c: f64, n: u32) -> Result<Eigenfunction> {
    if xi.norm2() == 0 {
        return Err(Error::InvalidArgument("xi must be nonzero".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let nn = n as i64;
    let plus = LatticePoint::new(xi.coords.iter().map(|&v| nn * v).collect());
    let minus = LatticePoint::new(xi.coords.iter().map(|&v| -nn * v).collect());
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
    let phase = e2pi(-(n as f64) * c);
    let coeffs = vec![(plus, half_i * phase), (minus, -half_i * phase.conj())];
    Eigenfunction::new(xi.dim(), nn * nn * xi.norm2(), coeffs)
}

/// Lift a planar eigenfunction to `T^3` as `phi0(x, y) cos(2 pi n z)`,
/// with eigenvalue parameter `r2 = lambda0^2 + n^2`. The nodal set
/// contains the cylinder `S0 x S^1` over any nodal piece `S0` of `phi0`.
pub fn make_cylinder(phi0: &Eigenfunction, n: u32) -> Result<Eigenfunction> {
    if phi0.d != 2 {
        return Err(Error::InvalidArgument("cylinder construction starts from T^2".into()));
    }
    let nn = n as i64;
    let mut coeffs = Vec::new();
    for (xi, a) in phi0.coeffs() {
        if n == 0 {
            coeffs.push((LatticePoint::new(vec![xi.coords[0], xi.coords[1], 0]), *a));
        } else {
            let half = a * Complex64::from(0.5);
            coeffs.push((LatticePoint::new(vec![xi.coords[0], xi.coords[1], nn]), half));
            coeffs.push((LatticePoint::new(vec![xi.coords[0], xi.coords[1], -nn]), half));
        }
    }
    Eigenfunction::new(3, phi0.r2 + nn * nn, coeffs)
}

/// The nodal line family `{x : <xi - xi', x> in alpha + Z}` of the
/// two-frequency eigenfunction `e(<xi, x>) - e(alpha) e(<xi', x>)`.
#[derive(Debug, Clone)]
pub struct LineFamily {
    pub normal: LatticePoint,
    pub offset: f64,
}

impl LineFamily {
    /// Distance from `<normal, x> - offset` to the nearest integer.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let s: f64 =
            self.normal.coords.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum::<f64>() - self.offset;
        (s - s.round()).abs()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.residual(x) < tol
    }
}

/// Build the line family and its vanishing eigenfunction witness.
pub fn two_frequency_nodal(
    xi: &LatticePoint,
    xi_prime: &LatticePoint,
    alpha: f64,
) -> Result<(LineFamily, Eigenfunction)> {
    if xi == xi_prime {
        return Err(Error::InvalidArgument("xi and xi' must be distinct".into()));
    }
    if xi.norm2() != xi_prime.norm2() || xi.dim() != xi_prime.dim() {
        return Err(Error::InvalidArgument("xi and xi' must lie on a common shell".into()));
    }
    let normal = LatticePoint::new(
        xi.coords.iter().zip(&xi_prime.coords).map(|(&a, &b)| a - b).collect(),
    );
    let phi = Eigenfunction::new(
        xi.dim(),
        xi.norm2(),
        vec![
            (xi.clone(), Complex64::from(1.0)),
            (xi_prime.clone(), -e2pi(alpha)),
        ],
    )?;
    Ok((LineFamily { normal, offset: alpha }, phi))
}
