//! Exact Legendre polynomial checks, the Laurent-polynomial bridge from
//! planar eigenfunctions, and the abc-bound arithmetic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::eigenfun::{e2pi, Eigenfunction, ShiftFrame};
use crate::error::{Error, Result};

/// Polynomial with exact rational coefficients, ascending degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPoly {
    coeffs: Vec<BigRational>,
}

impl RationalPoly {
    /// Build from ascending coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![BigRational::one()] }
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self { coeffs: vec![BigRational::zero(), BigRational::one()] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + crate::lattice::rational_to_f64(c);
        }
        acc
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Leading coefficient scaled to 1 (zero polynomial unchanged).
    pub fn monic(&self) -> Self {
        match self.coeffs.last() {
            None => Self::zero(),
            Some(lead) => self.scale(&lead.recip()),
        }
    }

    /// Exact antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k + 1] = c / BigRational::from_integer(BigInt::from(k as i64 + 1));
        }
        Self::new(out)
    }

    /// Exact `integral_{-1}^{1}` of the polynomial.
    pub fn integrate_unit_interval(&self) -> BigRational {
        let f = self.antiderivative();
        let one = BigRational::one();
        f.eval(&one) - f.eval(&(-one))
    }

    /// Remainder of `self` modulo `divisor`.
    fn rem(&self, divisor: &Self) -> Self {
        assert!(!divisor.is_zero());
        let mut r = self.clone();
        let dlead = divisor.coeffs.last().unwrap().clone();
        while !r.is_zero() && r.degree() >= divisor.degree() {
            let shift = r.degree() - divisor.degree();
            let factor = r.coeffs.last().unwrap() / &dlead;
            let mut sub = vec![BigRational::zero(); shift];
            sub.extend(divisor.coeffs.iter().map(|c| c * &factor));
            r = r.sub(&Self::new(sub));
        }
        r
    }
}

/// Monic exact gcd by the Euclidean algorithm.
pub fn poly_gcd(a: &RationalPoly, b: &RationalPoly) -> RationalPoly {
    let mut a = a.clone();
    let mut b = b.clone();
    while !b.is_zero() {
        let r = a.rem(&b).monic();
        a = b;
        b = r;
    }
    a.monic()
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut out = BigInt::one();
    for i in 0..k.min(n - k) {
        out = out * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    out
}

/// Legendre polynomial from the closed formula
/// `P_n(x) = 2^{-n} sum_j (-1)^j C(n, j) C(2n - 2j, n - 2j) x^{n - 2j}`.
pub fn legendre(n: usize) -> RationalPoly {
    let nn = n as u64;
    let mut coeffs = vec![BigRational::zero(); n + 1];
    let denom = BigInt::from(2).pow(n as u32);
    for j in 0..=(nn / 2) {
        let mut c = binomial(nn, j) * binomial(2 * nn - 2 * j, nn - 2 * j);
        if j % 2 == 1 {
            c = -c;
        }
        coeffs[(nn - 2 * j) as usize] = BigRational::new(c, denom.clone());
    }
    RationalPoly::new(coeffs)
}

/// Independent oracle: the three-term recurrence
/// `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}`.
pub fn legendre_from_recurrence(n: usize) -> RationalPoly {
    let mut p0 = RationalPoly::one();
    if n == 0 {
        return p0;
    }
    let mut p1 = RationalPoly::x();
    for k in 1..n {
        let kk = BigRational::from_integer(BigInt::from(k as i64));
        let a = BigRational::from_integer(BigInt::from(2 * k as i64 + 1));
        let next = RationalPoly::x()
            .mul(&p1)
            .scale(&a)
            .sub(&p0.scale(&kk))
            .scale(&BigRational::from_integer(BigInt::from(k as i64 + 1)).recip());
        p0 = p1;
        p1 = next;
    }
    p1
}

/// Split a pure-parity polynomial as `x^p Q(x^2)` (p = degree parity).
fn compress_parity(p: &RationalPoly) -> Option<(usize, RationalPoly)> {
    if p.is_zero() {
        return Some((0, RationalPoly::zero()));
    }
    let parity = p.degree() % 2;
    let mut q = Vec::new();
    for (k, c) in p.coeffs().iter().enumerate() {
        if k % 2 != parity {
            if !c.is_zero() {
                return None;
            }
        } else {
            q.push(c.clone());
        }
    }
    Some((parity, RationalPoly::new(q)))
}

/// Substitute `y -> x^2` into `q`.
fn expand_square(q: &RationalPoly) -> RationalPoly {
    let mut out = vec![BigRational::zero(); 2 * q.coeffs().len()];
    for (k, c) in q.coeffs().iter().enumerate() {
        out[2 * k] = c.clone();
    }
    RationalPoly::new(out)
}

/// Exact monic `gcd(P_m, P_n)`. Both polynomials have pure parity, so the
/// gcd is computed on the half-degree even parts: `gcd = G(x^2) x^e` with
/// `e = 1` exactly when `m` and `n` are both odd.
pub fn common_roots(m: usize, n: usize) -> Result<RationalPoly> {
    if m == n {
        return Err(Error::InvalidArgument("common_roots needs m != n".into()));
    }
    let pm = legendre(m);
    let pn = legendre(n);
    let (par_m, qm) = compress_parity(&pm).expect("Legendre polynomials have pure parity");
    let (par_n, qn) = compress_parity(&pn).expect("Legendre polynomials have pure parity");
    let g = poly_gcd(&qm, &qn);
    let mut out = expand_square(&g);
    if par_m == 1 && par_n == 1 {
        out = out.mul(&RationalPoly::x());
    }
    Ok(out.monic())
}

/// Sign of `P(x)` at an exact rational point, via the integer-cleared
/// evaluation `sum (c_j q^deg) p^j q^{deg-j}`.
fn sign_at(p: &RationalPoly, x: &BigRational) -> i32 {
    let v = p.eval(x);
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

/// Colatitudes `theta_{n,j} = arccos(x_{n,j})` of the `n` simple roots of
/// `P_n` in `(-1, 1)`, ascending. Roots are bracketed by exact sign
/// changes on a refining grid (so the count is certified) and pinned by
/// 60 exact bisection steps before conversion to `f64`.
pub fn zonal_parallels(n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidArgument("zonal_parallels needs n >= 1".into()));
    }
    let p = legendre(n);
    // Find exactly n sign-change brackets, refining the grid as needed.
    let mut grid = 4 * n as i64;
    let brackets = loop {
        let mut found = Vec::new();
        let mut prev_x = BigRational::new(BigInt::from(-grid + 1), BigInt::from(grid));
        let mut prev_s = sign_at(&p, &prev_x);
        for k in (-grid + 2)..grid {
            let x = BigRational::new(BigInt::from(k), BigInt::from(grid));
            let s = sign_at(&p, &x);
            if s == 0 {
                // Grid point hit a root exactly (x = 0 for odd n); treat
                // as a degenerate bracket.
                found.push((x.clone(), x.clone()));
            } else if prev_s != 0 && s != prev_s {
                found.push((prev_x.clone(), x.clone()));
            }
            prev_x = x;
            prev_s = s;
        }
        if found.len() == n {
            break found;
        }
        grid *= 2;
        if grid > (1 << 24) {
            return Err(Error::NumericalFailure(format!(
                "could not isolate {n} Legendre roots"
            )));
        }
    };
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut roots: Vec<f64> = brackets
        .into_iter()
        .map(|(mut a, mut b)| {
            if a == b {
                return crate::lattice::rational_to_f64(&a);
            }
            let mut sa = sign_at(&p, &a);
            for _ in 0..60 {
                let mid = (&a + &b) * &half;
                let sm = sign_at(&p, &mid);
                if sm == 0 {
                    a = mid.clone();
                    b = mid;
                    break;
                }
                if sm == sa {
                    a = mid;
                    sa = sm;
                } else {
                    b = mid;
                }
            }
            crate::lattice::rational_to_f64(&((&a + &b) * &half))
        })
        .collect();
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let thetas: Vec<f64> = roots.iter().rev().map(|x| x.clamp(-1.0, 1.0).acos()).collect();
    Ok(thetas)
}

/// A Laurent polynomial in two variables with the shift normalization
/// `F(z) = P(z) / (z1^{a1} z2^{a2})`.
#[derive(Debug, Clone)]
pub struct LaurentPoly2 {
    /// Exponent -> coefficient of the numerator polynomial `P`.
    pub terms: BTreeMap<(i64, i64), Complex64>,
    /// Nonnegative shifts `(a1, a2)`.
    pub shifts: (i64, i64),
}

impl LaurentPoly2 {
    /// Evaluate the numerator `P(z1, z2)`.
    pub fn eval_p(&self, z1: Complex64, z2: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(n1, n2), &a)| a * z1.powi(n1 as i32) * z2.powi(n2 as i32))
            .sum()
    }

    /// Max over sample points of
    /// `|P(e(x), e(y)) e(-(a1 x + a2 y)) - phi(x, y)|`.
    pub fn consistency_error(&self, phi: &Eigenfunction, samples: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x: f64 = rng.gen_range(0.0..1.0);
            let y: f64 = rng.gen_range(0.0..1.0);
            let z1 = e2pi(x);
            let z2 = e2pi(y);
            let lhs = self.eval_p(z1, z2)
                * e2pi(-(self.shifts.0 as f64 * x + self.shifts.1 as f64 * y));
            let rhs = phi.evaluate(&[x, y]);
            worst = worst.max((lhs - rhs).norm());
        }
        worst
    }

    pub fn to_document(&self) -> LaurentDoc {
        LaurentDoc {
            shifts: vec![self.shifts.0, self.shifts.1],
            terms: self
                .terms
                .iter()
                .map(|(&(n1, n2), &a)| LaurentTermDoc { n: vec![n1, n2], re: a.re, im: a.im })
                .collect(),
        }
    }
}

/// JSON form of a Laurent polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaurentDoc {
    pub shifts: Vec<i64>,
    pub terms: Vec<LaurentTermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaurentTermDoc {
    pub n: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// Associate the Laurent polynomial `F(z) = sum a_xi z^xi` to a planar
/// eigenfunction and clear denominators: shifts `a_i = max(0, -min n_i)`,
/// numerator exponents `xi + a`.
pub fn to_laurent(phi: &Eigenfunction) -> Result<LaurentPoly2> {
    if phi.d != 2 {
        return Err(Error::InvalidArgument("to_laurent needs a planar eigenfunction".into()));
    }
    let min1 = phi.coeffs().map(|(xi, _)| xi.coords[0]).min().unwrap_or(0);
    let min2 = phi.coeffs().map(|(xi, _)| xi.coords[1]).min().unwrap_or(0);
    let shifts = ((-min1).max(0), (-min2).max(0));
    let terms = phi
        .coeffs()
        .map(|(xi, &a)| ((xi.coords[0] + shifts.0, xi.coords[1] + shifts.1), a))
        .collect();
    Ok(LaurentPoly2 { terms, shifts })
}

/// The abc-theorem height bound `m(m-1)/2 * (2 genus - 2 + s)`.
pub fn abc_bound(m: i64, genus: i64, s: i64) -> Result<i64> {
    if m < 2 || genus < 0 || s < 0 {
        return Err(Error::InvalidArgument(
            "abc_bound needs m >= 2, genus >= 0, s >= 0".into(),
        ));
    }
    Ok(m * (m - 1) / 2 * (2 * genus - 2 + s))
}

/// Report of the frequency-box consequence of the abc bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyBoxReport {
    /// Number of frequencies `r`.
    pub r: usize,
    /// `max_{xi != xi0} |xi - xi0|_inf`.
    pub observed: i64,
    /// `(1/c_s) * abc_bound(r - 1, genus, s)`, when defined.
    pub bound: Option<f64>,
    pub pass: Option<bool>,
    /// Set when `r < 3`, where the unit-equation argument needs more
    /// than two frequencies.
    pub note: Option<String>,
}

/// Check `max |xi - xi0|_inf <= (1/c_s) abc_bound(r - 1, genus, s)` for
/// user-supplied curve invariants.
pub fn frequency_box_check(
    phi: &Eigenfunction,
    frame: &ShiftFrame,
    genus: i64,
    s: i64,
    c_s: f64,
) -> Result<FrequencyBoxReport> {
    if !(c_s > 0.0) {
        return Err(Error::InvalidArgument("c_s must be positive".into()));
    }
    let r = phi.support_len();
    let observed = phi
        .coeffs()
        .filter(|(xi, _)| *xi != &frame.xi0)
        .map(|(xi, _)| {
            xi.coords
                .iter()
                .zip(&frame.xi0.coords)
                .map(|(&a, &b)| (a - b).abs())
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    if r < 3 {
        return Ok(FrequencyBoxReport {
            r,
            observed,
            bound: None,
            pass: None,
            note: Some("the unit-equation argument needs r >= 3 frequencies".into()),
        });
    }
    let bound = abc_bound(r as i64 - 1, genus, s)? as f64 / c_s;
    Ok(FrequencyBoxReport {
        r,
        observed,
        bound: Some(bound),
        pass: Some(observed as f64 <= bound),
        note: None,
    })
}

/// Verdict of the closed-geodesic segment test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeodesicVerdict {
    /// Fits a line with rational direction `(p, q)` within tolerance.
    Yes { direction: (i64, i64) },
    No { reason: String },
}

/// Total-least-squares line fit plus continued-fraction slope
/// reconstruction: samples lie on a closed-geodesic segment iff the
/// perpendicular residual is below `tol` and the direction admits a
/// rational slope with denominator at most `max_denominator`.
pub fn is_closed_geodesic_segment(
    samples: &[[f64; 2]],
    tol: f64,
    max_denominator: i64,
) -> Result<GeodesicVerdict> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 samples".into()));
    }
    let n = samples.len() as f64;
    let cx: f64 = samples.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy: f64 = samples.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in samples {
        let dx = p[0] - cx;
        let dy = p[1] - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy < 1e-24 {
        return Err(Error::DegenerateInput("all samples coincide".into()));
    }
    // Principal direction of the 2x2 covariance.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let dir = if sxy.abs() > 1e-18 {
        let v = [lam - syy, sxy];
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / norm, v[1] / norm]
    } else if sxx >= syy {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let max_residual = |d: [f64; 2]| -> f64 {
        let normal = [-d[1], d[0]];
        samples
            .iter()
            .map(|p| ((p[0] - cx) * normal[0] + (p[1] - cy) * normal[1]).abs())
            .fold(0.0, f64::max)
    };
    let residual = max_residual(dir);
    if residual >= tol {
        return Ok(GeodesicVerdict::No {
            reason: format!("line-fit residual {residual:.3e} exceeds {tol:.3e}"),
        });
    }
    // Rational direction (p, q): slope = q/p with direction (p, q).
    let (p, q) = if dir[0].abs() < 1e-12 {
        (0i64, 1i64)
    } else {
        let slope = dir[1] / dir[0];
        let (num, den) = best_rational(slope, max_denominator);
        (den, num)
    };
    let norm = ((p * p + q * q) as f64).sqrt();
    let rat_dir = [p as f64 / norm, q as f64 / norm];
    let rat_residual = max_residual(rat_dir);
    if rat_residual < tol {
        Ok(GeodesicVerdict::Yes { direction: (p, q) })
    } else {
        Ok(GeodesicVerdict::No {
            reason: format!(
                "no rational slope with denominator <= {max_denominator} fits: best ({q}/{p}) leaves residual {rat_residual:.3e}"
            ),
        })
    }
}

/// Best rational approximation `num/den` to `x` with `den <=
/// max_denominator`, by continued-fraction convergents.
fn best_rational(x: f64, max_denominator: i64) -> (i64, i64) {
    let negative = x < 0.0;
    let mut x = x.abs();
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    for _ in 0..64 {
        let a = x.floor() as i64;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_denominator {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    (if negative { -h1 } else { h1 }, k1)
}

/// Colatitude report row for the zonal nodal sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelsDoc {
    pub n: usize,
    pub thetas: Vec<f64>,
}

pub fn parallels_doc(n: usize) -> Result<ParallelsDoc> {
    Ok(ParallelsDoc { n, thetas: zonal_parallels(n)? })
}
