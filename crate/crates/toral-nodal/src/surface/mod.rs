//! Graph hypersurfaces `gamma(x) = (x, f(x))`, their curvature machinery,
//! the admissible direction cap, and the tangency function `h` whose zero
//! set cuts out the complexified patches `Sigma(v, tau)`.

mod patch;

pub use patch::{
    build_patch, flat_control_patch, BumpSpec, ComplexPatch, PatchDocument, PatchNode,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::eigenfun::Eigenfunction;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::restriction::Cap;

/// Value, gradient and Hessian of the graph function `F` at one complex
/// point of its parameter domain.
#[derive(Debug, Clone)]
pub struct SurfaceJet {
    pub val: Complex64,
    pub grad: Vec<Complex64>,
    pub hess: Vec<Vec<Complex64>>,
}

/// A hypersurface patch `gamma(x) = (x, f(x))`, `|x| < delta`, whose graph
/// function extends holomorphically to complex arguments.
pub trait ComplexSurface: Send + Sync {
    /// Ambient dimension `d`; the parameter domain has dimension `d - 1`.
    fn ambient_dim(&self) -> usize;

    /// Domain radius `delta`.
    fn domain_radius(&self) -> f64;

    /// `F`, `F'`, `F''` at a complex parameter point.
    fn jet2(&self, z: &[Complex64]) -> Result<SurfaceJet>;

    /// `F` and `F'` only; override when a cheaper path exists.
    fn jet1(&self, z: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
        let j = self.jet2(z)?;
        Ok((j.val, j.grad))
    }

    /// `F(z)` alone.
    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.jet1(z)?.0)
    }
}

/// Graph surface given by a closed-form real-analytic expression.
#[derive(Debug, Clone)]
pub struct AnalyticGraph {
    pub d: usize,
    pub f: Expr,
    pub domain_radius: f64,
}

impl AnalyticGraph {
    /// `f` must use at most `d - 1` variables.
    pub fn new(d: usize, f: Expr, domain_radius: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument("ambient dimension must be >= 2".into()));
        }
        if f.nvars() > d - 1 {
            return Err(Error::InvalidArgument(format!(
                "f uses {} variables but the parameter domain has dimension {}",
                f.nvars(),
                d - 1
            )));
        }
        if !(domain_radius > 0.0) {
            return Err(Error::InvalidArgument("domain radius must be positive".into()));
        }
        Ok(Self { d, f, domain_radius })
    }
}

impl ComplexSurface for AnalyticGraph {
    fn ambient_dim(&self) -> usize {
        self.d
    }

    fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    fn jet2(&self, z: &[Complex64]) -> Result<SurfaceJet> {
        let j = self.f.jet2(z);
        Ok(SurfaceJet { val: j.val, grad: j.grad, hess: j.hess })
    }

    fn jet1(&self, z: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
        Ok(self.f.jet1(z))
    }

    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.f.eval(z))
    }
}

/// A nodal-set graph: the curve `{phi = 0}` of a real-valued planar
/// eigenfunction, solved as `x2 = g(x1)` near a base point, optionally
/// extended as a cylinder `(u1, u2) -> (u1, u2, g(u1))` into `T^3`.
///
/// The eigenfunction is translated so that the base point becomes the
/// origin; `g` then satisfies `g(0) = 0`, and extends holomorphically by
/// the implicit function theorem applied to `phi^C(z1, w) = 0`, which is
/// solved here by damped complex Newton iteration.
pub struct NodalGraph {
    /// The translated eigenfunction (vanishing at the parameter origin).
    pub phi: Eigenfunction,
    cylinder: bool,
    domain_radius: f64,
    slope0: Complex64,
}

impl NodalGraph {
    /// Build from a real-valued `phi0` on `T^2` and a base point on its
    /// nodal set with `d(phi0)/dx2 != 0`.
    pub fn from_eigenfunction(
        phi0: &Eigenfunction,
        base: [f64; 2],
        domain_radius: f64,
        cylinder: bool,
    ) -> Result<Self> {
        if phi0.d != 2 {
            return Err(Error::InvalidArgument("nodal graphs start from T^2".into()));
        }
        if !phi0.is_real_valued() {
            return Err(Error::InvalidArgument("nodal graphs need a real-valued eigenfunction".into()));
        }
        let v0 = phi0.evaluate(&base).norm();
        if v0 > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "base point is not on the nodal set (|phi| = {v0:.3e})"
            )));
        }
        // Translate: psi(x) = phi0(x + base) has coefficients
        // a_xi * e(2 pi i <xi, base>).
        let coeffs = phi0
            .coeffs()
            .map(|(xi, a)| {
                let s: f64 = xi.coords.iter().zip(&base).map(|(&k, &b)| k as f64 * b).sum();
                (xi.clone(), a * crate::eigenfun::e2pi(s))
            })
            .collect();
        let phi = Eigenfunction::new(2, phi0.r2, coeffs)?;
        let origin = [Complex64::from(0.0), Complex64::from(0.0)];
        let g = phi.gradient_complex(&origin);
        if g[1].norm() < 1e-8 {
            return Err(Error::InvalidArgument(
                "d(phi)/dx2 vanishes at the base point; the nodal set is not a graph here".into(),
            ));
        }
        let slope0 = -g[0] / g[1];
        Ok(Self { phi, cylinder, domain_radius, slope0 })
    }

    /// Solve `phi^C(z1, w) = 0` for `w = g(z1)` by damped Newton from the
    /// linearization at the origin.
    fn solve_height(&self, z1: Complex64) -> Result<Complex64> {
        let mut w = self.slope0 * z1;
        for _ in 0..60 {
            let z = [z1, w];
            let val = self.phi.evaluate_complex(&z)?;
            if val.norm() < 1e-13 {
                return Ok(w);
            }
            let grad = self.phi.gradient_complex(&z);
            if grad[1].norm() < 1e-12 {
                break;
            }
            let mut step = -val / grad[1];
            // Step halving against divergence.
            let mut improved = false;
            for _ in 0..30 {
                let cand = w + step;
                let v2 = self.phi.evaluate_complex(&[z1, cand])?;
                if v2.norm() < val.norm() {
                    w = cand;
                    improved = true;
                    break;
                }
                step *= Complex64::from(0.5);
            }
            if !improved {
                break;
            }
        }
        let res = self.phi.evaluate_complex(&[z1, w])?.norm();
        if res < 1e-11 {
            Ok(w)
        } else {
            Err(Error::NumericalFailure(format!(
                "implicit nodal solve stalled at |phi| = {res:.3e} for z1 = {z1}"
            )))
        }
    }
}

impl ComplexSurface for NodalGraph {
    fn ambient_dim(&self) -> usize {
        if self.cylinder {
            3
        } else {
            2
        }
    }

    fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    fn jet2(&self, z: &[Complex64]) -> Result<SurfaceJet> {
        let z1 = z[0];
        let w = self.solve_height(z1)?;
        let point = [z1, w];
        let grad = self.phi.gradient_complex(&point);
        let hess = self.phi.hessian_complex(&point);
        // Implicit differentiation of phi(z1, g(z1)) = 0.
        let gp = -grad[0] / grad[1];
        let gpp = -(hess[0][0]
            + Complex64::from(2.0) * hess[0][1] * gp
            + hess[1][1] * gp * gp)
            / grad[1];
        let n = z.len();
        let mut out_grad = vec![Complex64::from(0.0); n];
        let mut out_hess = vec![vec![Complex64::from(0.0); n]; n];
        out_grad[0] = gp;
        out_hess[0][0] = gpp;
        Ok(SurfaceJet { val: w, grad: out_grad, hess: out_hess })
    }

    fn jet1(&self, z: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
        let z1 = z[0];
        let w = self.solve_height(z1)?;
        let grad = self.phi.gradient_complex(&[z1, w]);
        let mut out = vec![Complex64::from(0.0); z.len()];
        out[0] = -grad[0] / grad[1];
        Ok((w, out))
    }

    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        self.solve_height(z[0])
    }
}

fn complexify(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::from(v)).collect()
}

/// `f(x)` for real `x`.
pub fn f_real(s: &dyn ComplexSurface, x: &[f64]) -> Result<f64> {
    Ok(s.eval(&complexify(x))?.re)
}

/// `grad f(x)` for real `x`.
pub fn grad_real(s: &dyn ComplexSurface, x: &[f64]) -> Result<Vec<f64>> {
    let (_, g) = s.jet1(&complexify(x))?;
    Ok(g.iter().map(|c| c.re).collect())
}

/// Hessian `D^2 f(x)` for real `x`.
pub fn hess_real(s: &dyn ComplexSurface, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let j = s.jet2(&complexify(x))?;
    Ok(j.hess.iter().map(|row| row.iter().map(|c| c.re).collect()).collect())
}

/// Unit normal `(-grad f(x), 1) / sqrt(1 + |grad f|^2)`.
pub fn unit_normal(s: &dyn ComplexSurface, x: &[f64]) -> Result<Vec<f64>> {
    check_in_domain(s, x)?;
    let g = grad_real(s, x)?;
    let norm = (1.0 + g.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut n: Vec<f64> = g.iter().map(|v| -v / norm).collect();
    n.push(1.0 / norm);
    Ok(n)
}

fn check_in_domain(s: &dyn ComplexSurface, x: &[f64]) -> Result<()> {
    if x.len() != s.ambient_dim() - 1 {
        return Err(Error::InvalidArgument("parameter point has wrong dimension".into()));
    }
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r >= s.domain_radius() {
        return Err(Error::InvalidArgument(format!(
            "|x| = {r} outside the domain of radius {}",
            s.domain_radius()
        )));
    }
    Ok(())
}

/// Curvature data of the graph at a parameter point.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub normal: Vec<f64>,
    /// Second fundamental form `II_ij = f_ij / sqrt(1 + |grad f|^2)`.
    pub second_form: Vec<Vec<f64>>,
    /// Shape operator `S = I^{-1} II` (first fundamental form
    /// `I = id + grad f grad f^T`).
    pub shape: Vec<Vec<f64>>,
    /// Eigenvalues of the shape operator, ascending.
    pub principal_curvatures: Vec<f64>,
    /// `det(shape)`.
    pub gauss_kronecker: f64,
}

/// Compute normal, second fundamental form, shape operator, principal
/// curvatures and Gauss-Kronecker curvature at `x`.
pub fn curvature_data(s: &dyn ComplexSurface, x: &[f64]) -> Result<CurvatureData> {
    check_in_domain(s, x)?;
    let m = s.ambient_dim() - 1;
    let g = grad_real(s, x)?;
    let h = hess_real(s, x)?;
    let scale = (1.0 + g.iter().map(|v| v * v).sum::<f64>()).sqrt();

    let second = DMatrix::from_fn(m, m, |i, j| h[i][j] / scale);
    let first = DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta + g[i] * g[j]
    });
    let chol = nalgebra::Cholesky::new(first.clone())
        .ok_or_else(|| Error::NumericalFailure("first fundamental form not SPD".into()))?;
    // Condition estimate from the eigenvalues of I (SPD).
    let eigs_first = first.clone().symmetric_eigen().eigenvalues;
    let (mut emin, mut emax) = (f64::INFINITY, 0.0f64);
    for &e in eigs_first.iter() {
        emin = emin.min(e);
        emax = emax.max(e);
    }
    if emin <= 0.0 || emax / emin > 1e12 {
        return Err(Error::NumericalFailure(format!(
            "first fundamental form condition number {:.3e} too large",
            emax / emin
        )));
    }
    let shape = chol.solve(&second);
    // Shape is similar to the symmetric L^{-1} II L^{-T}, so its
    // eigenvalues are real; compute them from the symmetrized matrix.
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("Cholesky factor not invertible".into()))?;
    let sym = &linv * &second * linv.transpose();
    let mut pcs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    pcs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gk = shape.determinant();

    Ok(CurvatureData {
        normal: unit_normal(s, x)?,
        second_form: matrix_rows(&second),
        shape: matrix_rows(&shape),
        principal_curvatures: pcs,
        gauss_kronecker: gk,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Normal curvature in the tangent direction with parameter vector
/// `omega`: `k = (omega^T D^2 f omega) / (sqrt(1 + |grad f|^2) (|omega|^2
/// + (grad f . omega)^2))`.
pub fn normal_curvature(s: &dyn ComplexSurface, x: &[f64], omega: &[f64]) -> Result<f64> {
    check_in_domain(s, x)?;
    let w2: f64 = omega.iter().map(|v| v * v).sum();
    if w2 == 0.0 {
        return Err(Error::InvalidArgument("omega must be nonzero".into()));
    }
    let g = grad_real(s, x)?;
    let h = hess_real(s, x)?;
    let quad: f64 = (0..omega.len())
        .map(|i| (0..omega.len()).map(|j| omega[i] * h[i][j] * omega[j]).sum::<f64>())
        .sum();
    let gdotw: f64 = g.iter().zip(omega).map(|(a, b)| a * b).sum();
    let scale = (1.0 + g.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(quad / (scale * (w2 + gdotw * gdotw)))
}

/// Whether `omega` points into the asymptotic cone at `x`:
/// `|omega^T D^2 f omega| <= tol |omega|^2`.
pub fn is_asymptotic(s: &dyn ComplexSurface, x: &[f64], omega: &[f64], tol: f64) -> Result<bool> {
    check_in_domain(s, x)?;
    let h = hess_real(s, x)?;
    let quad: f64 = (0..omega.len())
        .map(|i| (0..omega.len()).map(|j| omega[i] * h[i][j] * omega[j]).sum::<f64>())
        .sum();
    let w2: f64 = omega.iter().map(|v| v * v).sum();
    Ok(quad.abs() <= tol * w2)
}

/// A direction in the admissible cap together with its tangency witness.
#[derive(Debug, Clone)]
pub struct DirectionWitness {
    pub v: Vec<f64>,
    /// Point with `grad f(x) . omega = w_d` (Newton-refined).
    pub x: Vec<f64>,
    pub tangency_residual: f64,
    /// `|omega^T D^2 f(x) omega|` at the witness.
    pub curvature: f64,
}

/// The admissible cap `Omega_S` with per-direction witnesses.
#[derive(Debug, Clone)]
pub struct AdmissibleCap {
    pub cap: Cap,
    pub witnesses: Vec<DirectionWitness>,
    pub curvature_floor: f64,
}

/// Tuning knobs for [`find_admissible_cap`].
#[derive(Debug, Clone)]
pub struct AdmissibleCapParams {
    pub x_samples: usize,
    pub omega_samples: usize,
    pub curvature_floor: f64,
    pub min_angle: f64,
    pub test_directions: usize,
}

impl Default for AdmissibleCapParams {
    fn default() -> Self {
        Self {
            x_samples: 9,
            omega_samples: 32,
            curvature_floor: 1e-4,
            min_angle: 1e-3,
            test_directions: 100,
        }
    }
}

/// Find a cap of unit directions `v = (omega, w_d)` that are tangent to
/// the graph somewhere (`grad f(x) . omega = w_d`) and nowhere asymptotic
/// (`|omega^T D^2 f omega|` bounded below). Directions are mapped through
/// `V(x, omega) = (omega, grad f(x) . omega)` normalized; the cap angle is
/// the largest (up to a 0.9 margin) for which every probe direction admits
/// a Newton-refined witness.
pub fn find_admissible_cap(
    s: &dyn ComplexSurface,
    params: &AdmissibleCapParams,
) -> Result<AdmissibleCap> {
    let m = s.ambient_dim() - 1;
    let delta = s.domain_radius();
    let xs = sample_ball(m, delta * 0.85, params.x_samples);
    let omegas = sample_unit_sphere(m, params.omega_samples);

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None; // (curvature, x, omega)
    let mut any_hessian = false;
    for x in &xs {
        let h = hess_real(s, x)?;
        let hnorm: f64 = h.iter().flatten().map(|v| v.abs()).sum();
        if hnorm > 1e-12 {
            any_hessian = true;
        }
        for w in &omegas {
            let quad: f64 = (0..m)
                .map(|i| (0..m).map(|j| w[i] * h[i][j] * w[j]).sum::<f64>())
                .sum();
            if quad.abs() >= params.curvature_floor
                && best.as_ref().is_none_or(|(q, _, _)| quad.abs() > *q)
            {
                best = Some((quad.abs(), x.clone(), w.clone()));
            }
        }
    }
    if !any_hessian {
        return Err(Error::FlatSurface);
    }
    let Some((_, x_best, omega_best)) = best else {
        return Err(Error::CapNotFound(params.min_angle));
    };

    let g = grad_real(s, &x_best)?;
    let mut center: Vec<f64> = omega_best.clone();
    center.push(g.iter().zip(&omega_best).map(|(a, b)| a * b).sum());
    let norm: f64 = center.iter().map(|v| v * v).sum::<f64>().sqrt();
    for c in &mut center {
        *c /= norm;
    }

    // Binary search for the largest feasible angle.
    let feasible = |angle: f64| -> bool {
        let probes = sample_cap(&center, angle, params.test_directions);
        probes.iter().all(|v| witness_for(s, v, &x_best, params.curvature_floor).is_some())
    };
    let mut lo = 0.0f64;
    let mut hi = std::f64::consts::FRAC_PI_2;
    if !feasible(params.min_angle) {
        return Err(Error::CapNotFound(params.min_angle));
    }
    lo = lo.max(params.min_angle);
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let angle = 0.9 * lo;
    let cap = Cap::new(center, angle)?;
    let witnesses = sample_cap(&cap.center, angle, params.test_directions)
        .into_iter()
        .map(|v| witness_for(s, &v, &x_best, params.curvature_floor).expect("feasible angle"))
        .collect();
    Ok(AdmissibleCap { cap, witnesses, curvature_floor: params.curvature_floor })
}

/// Newton-refine a tangency witness for direction `v = (omega, w_d)`:
/// solve `grad f(x) . omega = w_d` by minimal-norm Newton steps.
fn witness_for(
    s: &dyn ComplexSurface,
    v: &[f64],
    seed: &[f64],
    curvature_floor: f64,
) -> Option<DirectionWitness> {
    let m = s.ambient_dim() - 1;
    let omega = &v[..m];
    let wd = v[m];
    let mut x = seed.to_vec();
    for _ in 0..50 {
        let g = grad_real(s, &x).ok()?;
        let res: f64 = g.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - wd;
        if res.abs() < 1e-10 {
            break;
        }
        let h = hess_real(s, &x).ok()?;
        // grad of the tangency residual is H omega.
        let dir: Vec<f64> = (0..m).map(|i| (0..m).map(|j| h[i][j] * omega[j]).sum()).collect();
        let dn2: f64 = dir.iter().map(|v| v * v).sum();
        if dn2 < 1e-16 {
            return None;
        }
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi -= res * di / dn2;
        }
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= s.domain_radius() {
            return None;
        }
    }
    let g = grad_real(s, &x).ok()?;
    let res = (g.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - wd).abs();
    if res >= 1e-9 {
        return None;
    }
    let h = hess_real(s, &x).ok()?;
    let quad: f64 = (0..m)
        .map(|i| (0..m).map(|j| omega[i] * h[i][j] * omega[j]).sum::<f64>())
        .sum();
    let w2: f64 = omega.iter().map(|v| v * v).sum();
    if quad.abs() < curvature_floor * w2 {
        return None;
    }
    Some(DirectionWitness { v: v.to_vec(), x, tangency_residual: res, curvature: quad.abs() })
}

/// Deterministic samples of the ball of radius `r` in `R^m` (tensor grid,
/// clipped to the ball).
fn sample_ball(m: usize, r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let steps: Vec<f64> = (0..per_axis)
        .map(|i| -r + 2.0 * r * (i as f64 + 0.5) / per_axis as f64)
        .collect();
    let mut idx = vec![0usize; m];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| steps[i]).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < r * r {
            out.push(x);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == m {
                return out;
            }
        }
    }
}

/// Deterministic samples of the unit sphere in `R^m`.
fn sample_unit_sphere(m: usize, n: usize) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Seeded normalized Gaussian-ish directions; deterministic.
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            (0..n)
                .map(|_| {
                    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                    for x in &mut v {
                        *x /= norm;
                    }
                    v
                })
                .collect()
        }
    }
}

/// Deterministic probe directions inside `Cap(center, angle)` in `R^d`.
pub(crate) fn sample_cap(center: &[f64], angle: f64, n: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let basis = orthonormal_complement(center);
    let mut out = Vec::with_capacity(n);
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    for k in 0..n {
        let u = (k as f64 + 0.5) / n as f64;
        let alpha = angle * u.sqrt();
        let tangent: Vec<f64> = if d == 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            basis[0].iter().map(|b| sign * b).collect()
        } else {
            let phi = golden * k as f64;
            let mut t = vec![0.0; d];
            for (j, b) in basis.iter().enumerate() {
                // Rotate through the complement with golden-angle azimuths.
                let c = if j == 0 { phi.cos() } else { phi.sin() };
                if j < 2 {
                    for (ti, bi) in t.iter_mut().zip(b) {
                        *ti += c * bi;
                    }
                }
            }
            let norm: f64 = t.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            t.iter().map(|x| x / norm).collect()
        };
        let v: Vec<f64> = center
            .iter()
            .zip(&tangent)
            .map(|(&c, &t)| alpha.cos() * c + alpha.sin() * t)
            .collect();
        out.push(v);
    }
    out
}

/// Orthonormal basis of the complement of `v` in `R^d`.
pub(crate) fn orthonormal_complement(v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_column_slice(v)];
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        for b in &basis {
            let proj = b.dot(&e);
            e -= b * proj;
        }
        let n = e.norm();
        if n > 1e-8 {
            basis.push(e / n);
        }
        if basis.len() == d {
            break;
        }
    }
    basis[1..].iter().map(|b| b.iter().copied().collect()).collect()
}

/// The tangency function of the slab construction:
/// `h(x, t) = Im F(x + i t omega) / t - w_d` for `t != 0`, and
/// `h(x, 0) = grad f(x) . omega - w_d` (its analytic continuation).
pub fn h_eval(s: &dyn ComplexSurface, v: &[f64], x: &[f64], t: f64) -> Result<f64> {
    let m = s.ambient_dim() - 1;
    if v.len() != m + 1 || x.len() != m {
        return Err(Error::InvalidArgument("dimension mismatch in h_eval".into()));
    }
    let omega = &v[..m];
    let wd = v[m];
    if t == 0.0 {
        let g = grad_real(s, x)?;
        return Ok(g.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - wd);
    }
    let z: Vec<Complex64> = x
        .iter()
        .zip(omega)
        .map(|(&xr, &w)| Complex64::new(xr, t * w))
        .collect();
    Ok(s.eval(&z)?.im / t - wd)
}

/// Validated gradient of `h` at `(x, 0)`.
#[derive(Debug, Clone)]
pub struct HGradient {
    /// `grad_x h(x, 0) = D^2 f(x) omega`.
    pub grad: Vec<f64>,
    /// Max deviation from a centered finite difference of `h_eval` at
    /// small `t`.
    pub fd_error: f64,
    /// `|h(x, t) - h(x, -t)|` at small `t` (evenness in `t` forces
    /// `dh/dt(x, 0) = 0`).
    pub dt_residual: f64,
}

/// Compute `grad_x h(x, 0) = D^2 f(x) omega` and cross-check it against
/// finite differences of `h_eval`. Requires approximate tangency
/// `h(x, 0) = 0` at `x`.
pub fn h_gradient(s: &dyn ComplexSurface, v: &[f64], x: &[f64]) -> Result<HGradient> {
    let m = s.ambient_dim() - 1;
    let omega = &v[..m];
    let tangency = h_eval(s, v, x, 0.0)?;
    if tangency.abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "x is not a tangency point: h(x, 0) = {tangency:.3e}"
        )));
    }
    let h = hess_real(s, x)?;
    let grad: Vec<f64> = (0..m).map(|i| (0..m).map(|j| h[i][j] * omega[j]).sum()).collect();

    let t = 1e-4;
    let step = 1e-5;
    let mut fd_error: f64 = 0.0;
    for j in 0..m {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let fd = (h_eval(s, v, &xp, t)? - h_eval(s, v, &xm, t)?) / (2.0 * step);
        fd_error = fd_error.max((fd - grad[j]).abs());
    }
    let dt_residual = (h_eval(s, v, x, t)? - h_eval(s, v, x, -t)?).abs();
    Ok(HGradient { grad, fd_error, dt_residual })
}

/// Shared handle used by patches so they can rebuild themselves on a
/// refined grid.
pub type SurfaceHandle = Arc<dyn ComplexSurface>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn unit_normal_examples() {
        // Linear graph: constant normal (-b, 1)/sqrt(1 + |b|^2).
        let s = fixtures::linear_graph(3, 0.2, &[0.5, -1.0]);
        let n = unit_normal(&s, &[0.1, 0.05]).unwrap();
        let scale = (1.0f64 + 0.25 + 1.0).sqrt();
        assert_relative_eq!(n[0], -0.5 / scale, epsilon = 1e-12);
        assert_relative_eq!(n[1], 1.0 / scale, epsilon = 1e-12);
        assert_relative_eq!(n[2], 1.0 / scale, epsilon = 1e-12);
        // Paraboloid at the origin: straight up.
        let s = fixtures::paraboloid(3);
        let n = unit_normal(&s, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(n[2], 1.0, epsilon = 1e-12);
        // Unit length.
        let n = unit_normal(&s, &[0.21, -0.1]).unwrap();
        assert_relative_eq!(n.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = fixtures::exp_graph();
        let x = [0.12, -0.07];
        let g = grad_real(&s, &x).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (f_real(&s, &xp).unwrap() - f_real(&s, &xm).unwrap()) / (2.0 * h);
            assert!((g[j] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn curvature_examples() {
        // Linear: shape = 0, GK = 0.
        let s = fixtures::linear_graph(3, 0.3, &[0.4, 0.4]);
        let c = curvature_data(&s, &[0.0, 0.0]).unwrap();
        assert!(c.gauss_kronecker.abs() < 1e-14);
        assert!(c.shape.iter().flatten().all(|v| v.abs() < 1e-14));
        // Paraboloid at origin: shape = id, GK = 1.
        let s = fixtures::paraboloid(3);
        let c = curvature_data(&s, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(c.gauss_kronecker, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.shape[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.shape[1][1], 1.0, epsilon = 1e-12);
        // Saddle at origin: principal curvatures {-1, 1}, GK = -1.
        let s = fixtures::saddle();
        let c = curvature_data(&s, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(c.principal_curvatures[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(c.principal_curvatures[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.gauss_kronecker, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn curvature_consistency_invariants() {
        for s in fixtures::curvature_suite() {
            for x in [[0.0, 0.0], [0.1, -0.12], [0.2, 0.05]] {
                let c = curvature_data(s.as_ref(), &x).unwrap();
                // GK = product of principal curvatures.
                let prod: f64 = c.principal_curvatures.iter().product();
                let scale = c.gauss_kronecker.abs().max(1e-9);
                assert!((prod - c.gauss_kronecker).abs() / scale < 1e-9);
                // Self-adjointness wrt the first fundamental form:
                // I * S = II is symmetric.
                let m = c.shape.len();
                for i in 0..m {
                    for j in 0..m {
                        assert!((c.second_form[i][j] - c.second_form[j][i]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn normal_curvature_examples() {
        let s = fixtures::paraboloid(3);
        let k = normal_curvature(&s, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-12);
        let saddle = fixtures::saddle();
        let k = normal_curvature(&saddle, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(k.abs() < 1e-14, "asymptotic direction");
        // Sign flips under f -> -f.
        let neg = AnalyticGraph::new(
            3,
            -((Expr::var(0).powi(2) + Expr::var(1).powi(2)).scale(0.5)),
            0.3,
        )
        .unwrap();
        let kneg = normal_curvature(&neg, &[0.1, 0.0], &[1.0, 0.0]).unwrap();
        let kpos = normal_curvature(&s, &[0.1, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(kneg, -kpos, epsilon = 1e-12);
        assert!(normal_curvature(&s, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn asymptotic_examples() {
        let saddle = fixtures::saddle();
        assert!(is_asymptotic(&saddle, &[0.0, 0.0], &[1.0, 1.0], 1e-12).unwrap());
        assert!(is_asymptotic(&saddle, &[0.0, 0.0], &[1.0, -1.0], 1e-12).unwrap());
        let s = fixtures::paraboloid(3);
        assert!(!is_asymptotic(&s, &[0.0, 0.0], &[1.0, 0.3], 1e-9).unwrap());
        let lin = fixtures::linear_graph(3, 0.3, &[1.0, 2.0]);
        assert!(is_asymptotic(&lin, &[0.0, 0.0], &[0.3, -0.7], 1e-12).unwrap());
    }

    #[test]
    fn admissible_cap_on_paraboloid() {
        let s = fixtures::paraboloid(3);
        let found = find_admissible_cap(&s, &AdmissibleCapParams::default()).unwrap();
        assert!(found.cap.angle > 0.0);
        assert_eq!(found.witnesses.len(), 100);
        for w in &found.witnesses {
            assert!(w.tangency_residual < 1e-9);
            assert!(w.curvature >= found.curvature_floor);
            // The witness indeed satisfies grad f . omega = w_d.
            let g = grad_real(&s, &w.x).unwrap();
            let res: f64 =
                g.iter().zip(&w.v[..2]).map(|(a, b)| a * b).sum::<f64>() - w.v[2];
            assert!(res.abs() < 1e-9);
        }
        // If v is admissible then so is -v: the same witness works.
        let minus: Vec<f64> = found.cap.center.iter().map(|c| -c).collect();
        let w = witness_for(&s, &minus, &[0.0, 0.0], found.curvature_floor);
        assert!(w.is_some());
    }

    #[test]
    fn admissible_cap_flat_is_rejected() {
        let lin = fixtures::linear_graph(3, 0.3, &[0.5, 0.1]);
        match find_admissible_cap(&lin, &AdmissibleCapParams::default()) {
            Err(Error::FlatSurface) => {}
            other => panic!("expected FlatSurface, got {other:?}"),
        }
    }

    #[test]
    fn h_closed_form_for_parabola() {
        // d = 2, f = x^2/2: F(z) = z^2/2, Im F(x + i t w) = x t w, so
        // h(x, t) = x w - w_d for every t.
        let s = fixtures::parabola();
        let v = [0.8, 0.6];
        for t in [0.0, 0.01, 0.1, -0.07] {
            for x in [-0.2, 0.0, 0.15] {
                let h = h_eval(&s, &v, &[x], t).unwrap();
                assert_relative_eq!(h, x * 0.8 - 0.6, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn h_limit_and_evenness() {
        let s = fixtures::paraboloid(3);
        let v = [0.6, 0.64, 0.48];
        let x = [0.11, -0.06];
        let h0 = h_eval(&s, &v, &x, 0.0).unwrap();
        let ht = h_eval(&s, &v, &x, 1e-4).unwrap();
        assert!((ht - h0).abs() < 1e-6, "continuity at t = 0");
        for t in [0.05, 0.11, 0.2] {
            let plus = h_eval(&s, &v, &x, t).unwrap();
            let minus = h_eval(&s, &v, &x, -t).unwrap();
            assert!((plus - minus).abs() < 1e-9, "evenness in t");
        }
        let e = fixtures::exp_graph();
        for t in [0.05, 0.13] {
            let plus = h_eval(&e, &v, &x, t).unwrap();
            let minus = h_eval(&e, &v, &x, -t).unwrap();
            assert!((plus - minus).abs() < 1e-9);
        }
    }

    #[test]
    fn h_gradient_examples() {
        // Paraboloid: D^2 f = id so grad_x h = omega; pick a tangent v at
        // x: grad f(x) = x, w_d = x . omega.
        let s = fixtures::paraboloid(3);
        let x = [0.2, -0.1];
        let omega = [0.6, 0.8];
        let wd: f64 = x[0] * omega[0] + x[1] * omega[1];
        let norm = (1.0 + wd * wd).sqrt();
        let v = [omega[0] / norm, omega[1] / norm, wd / norm];
        let hg = h_gradient(&s, &v, &x).unwrap();
        assert_relative_eq!(hg.grad[0], v[0], epsilon = 1e-12);
        assert_relative_eq!(hg.grad[1], v[1], epsilon = 1e-12);
        assert!(hg.fd_error < 1e-6);
        assert!(hg.dt_residual < 1e-9);
        // Saddle with omega = (1, 0): grad_x h = H omega = (1, 0).
        let saddle = fixtures::saddle();
        let x = [0.05, 0.0];
        let omega = [1.0, 0.0];
        let wd: f64 = x[0]; // grad f = (x1, -x2)
        let norm = (1.0 + wd * wd).sqrt();
        let v = [omega[0] / norm, omega[1] / norm, wd / norm];
        let hg = h_gradient(&saddle, &v, &x).unwrap();
        assert_relative_eq!(hg.grad[0], v[0], epsilon = 1e-10);
        assert!(hg.grad[1].abs() < 1e-10);
    }

    #[test]
    fn nodal_graph_follows_the_nodal_set() {
        let (phi0, base) = fixtures::curved_nodal_fixture();
        let g = NodalGraph::from_eigenfunction(&phi0, base, 0.08, false).unwrap();
        // Real points of the graph are zeros of the translated function.
        for k in 0..20 {
            let u = -0.06 + 0.006 * k as f64;
            let w = f_real(&g, &[u]).unwrap();
            let val = g.phi.evaluate(&[u, w]).norm();
            assert!(val < 1e-10, "phi on graph: {val}");
            assert!(w.abs() < 0.5, "graph height stays local");
        }
        // Reality: F(conj z) = conj F(z).
        let z = [Complex64::new(0.01, 0.02)];
        let zc = [z[0].conj()];
        let a = g.eval(&z).unwrap();
        let b = g.eval(&zc).unwrap();
        assert!((b - a.conj()).norm() < 1e-10);
        // Derivatives match finite differences.
        let x = [0.013];
        let (_, grad) = g.jet1(&complexify(&x)).unwrap();
        let h = 1e-6;
        let fp = f_real(&g, &[x[0] + h]).unwrap();
        let fm = f_real(&g, &[x[0] - h]).unwrap();
        assert!((grad[0].re - (fp - fm) / (2.0 * h)).abs() < 1e-6);
        let j2 = g.jet2(&complexify(&x)).unwrap();
        let f0 = f_real(&g, &x).unwrap();
        let second = (fp - 2.0 * f0 + fm) / (h * h);
        assert!((j2.hess[0][0].re - second).abs() < 1e-3);
        // The fixture is genuinely curved.
        assert!(j2.hess[0][0].re.abs() > 1e-2);
    }
}
