//! Discretized complex patches `Sigma(v, tau)`: grids over `(t, xhat)`
//! with the remaining coordinate Newton-solved from `h(x, t) = 0`, points
//! `Z = gamma^C(x + i t omega)`, and quadrature weights from a smooth bump.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{grad_real, ComplexSurface, SurfaceHandle};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// A compactly supported product bump on `(t, xhat)` space.
///
/// Along each axis `psi(s) = exp(-1 / (1 - s^2)^p)` in the scaled
/// coordinate `s = (u - center) / radius`, zero outside `|s| < 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpSpec {
    /// Center in `(t, xhat_1, ..., xhat_{d-2})`.
    pub center: Vec<f64>,
    /// Half-widths per axis; the support is the product of open intervals.
    pub radii: Vec<f64>,
    /// Cutoff profile exponent `p >= 1`.
    pub exponent: i32,
}

impl BumpSpec {
    /// Bump centered in the slab: `t`-support `[1.05 tau, 1.95 tau]` and
    /// `xhat`-support 90% of the domain ball, per axis.
    pub fn centered(tau: f64, d: usize, delta: f64) -> Self {
        let mut center = vec![1.5 * tau];
        let mut radii = vec![0.45 * tau];
        let naxes = d.saturating_sub(2);
        // Keep the product box inside the ball |xhat| < delta.
        let per_axis = 0.9 * delta / (naxes.max(1) as f64).sqrt();
        for _ in 0..naxes {
            center.push(0.0);
            radii.push(per_axis);
        }
        Self { center, radii, exponent: 1 }
    }

    pub fn dims(&self) -> usize {
        self.center.len()
    }

    fn profile(&self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            return 0.0;
        }
        (-1.0 / (1.0 - s * s).powi(self.exponent)).exp()
    }

    /// `psi(t, xhat)`.
    pub fn eval(&self, t: f64, xhat: &[f64]) -> f64 {
        let mut value = self.profile((t - self.center[0]) / self.radii[0]);
        for (k, &x) in xhat.iter().enumerate() {
            value *= self.profile((x - self.center[k + 1]) / self.radii[k + 1]);
        }
        value
    }

    /// Per-axis support intervals.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .zip(&self.radii)
            .map(|(&c, &r)| (c - r, c + r))
            .collect()
    }

    fn shrunk(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            radii: self.radii.iter().map(|r| r * factor).collect(),
            exponent: self.exponent,
        }
    }

    fn validate(&self, tau: f64, delta: f64, d: usize) -> Result<()> {
        if self.dims() != d - 1 || self.radii.len() != self.dims() {
            return Err(Error::InvalidArgument(format!(
                "bump has {} axes, expected {}",
                self.dims(),
                d - 1
            )));
        }
        if self.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidArgument("bump radii must be positive".into()));
        }
        let (t_lo, t_hi) = (self.center[0] - self.radii[0], self.center[0] + self.radii[0]);
        if t_lo < tau || t_hi > 2.0 * tau {
            return Err(Error::InvalidArgument(format!(
                "bump t-support [{t_lo}, {t_hi}] escapes the slab ({tau}, {})",
                2.0 * tau
            )));
        }
        let corner: f64 = self.center[1..]
            .iter()
            .zip(&self.radii[1..])
            .map(|(&c, &r)| (c.abs() + r) * (c.abs() + r))
            .sum::<f64>()
            .sqrt();
        if corner >= delta {
            return Err(Error::InvalidArgument(format!(
                "bump xhat-support (corner radius {corner}) escapes the ball of radius {delta}"
            )));
        }
        Ok(())
    }
}

/// One quadrature node of a discretized patch.
#[derive(Debug, Clone)]
pub struct PatchNode {
    pub t: f64,
    pub xhat: Vec<f64>,
    /// The solved coordinate value.
    pub x1: f64,
    /// Ambient complex point `Z = (x + i t omega, F(x + i t omega))`.
    pub z: Vec<Complex64>,
    /// `psi(t, xhat)` times the tensor quadrature weight.
    pub weight: f64,
}

impl PatchNode {
    /// Full parameter vector with the solved coordinate put back in place.
    pub fn param(&self, solved_axis: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.xhat.len() + 1);
        let mut it = self.xhat.iter();
        for k in 0..=self.xhat.len() {
            if k == solved_axis {
                x.push(self.x1);
            } else {
                x.push(*it.next().unwrap());
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PatchKind {
    /// `x1` solved from `h = 0`; the field is the solved axis.
    Solved(usize),
    /// Flat control: `h` vanishes identically, `x1` pinned to 0.
    FlatControl,
}

/// A discretized `Sigma(v, tau)` over the support of its bump.
pub struct ComplexPatch {
    pub v: Vec<f64>,
    pub tau: f64,
    pub bump: BumpSpec,
    pub nodes: Vec<PatchNode>,
    /// Quadrature orders per axis `(t, xhat...)`.
    pub grid_sizes: Vec<usize>,
    /// Which parameter coordinate is solved for.
    pub solved_axis: usize,
    /// Max over nodes of `|Im Z - t v|` (the defining property).
    pub max_im_deviation: f64,
    surface: SurfaceHandle,
    kind: PatchKind,
}

impl ComplexPatch {
    /// Total measure `integral psi dt dxhat`.
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn ambient_dim(&self) -> usize {
        self.v.len()
    }

    pub fn surface(&self) -> &SurfaceHandle {
        &self.surface
    }

    /// Euclidean diameter of the bump support box, used to pick
    /// oscillation-resolving quadrature orders.
    pub fn domain_diameter(&self) -> f64 {
        self.bump.radii.iter().map(|r| 4.0 * r * r).sum::<f64>().sqrt()
    }

    /// Rebuild the same patch with different per-axis orders.
    pub fn with_orders(&self, orders: &[usize]) -> Result<ComplexPatch> {
        match self.kind {
            PatchKind::Solved(_) => build_patch(
                self.surface.clone(),
                &self.v,
                self.tau,
                self.bump.clone(),
                orders,
            ),
            PatchKind::FlatControl => flat_control_patch(
                self.surface.clone(),
                &self.v,
                self.tau,
                self.bump.clone(),
                orders,
            ),
        }
    }

    /// Rebuild with all orders scaled by `factor` (rounded up).
    pub fn refined(&self, factor: f64) -> Result<ComplexPatch> {
        let orders: Vec<usize> = self
            .grid_sizes
            .iter()
            .map(|&n| ((n as f64 * factor).ceil() as usize).max(n + 1))
            .collect();
        self.with_orders(&orders)
    }

    pub fn to_document(&self) -> PatchDocument {
        PatchDocument {
            v: self.v.clone(),
            tau: self.tau,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDocument {
                    t: n.t,
                    xhat: n.xhat.clone(),
                    x1: n.x1,
                    z_re: n.z.iter().map(|c| c.re).collect(),
                    z_im: n.z.iter().map(|c| c.im).collect(),
                    w: n.weight,
                })
                .collect(),
        }
    }
}

/// JSON form `{v, tau, nodes: [{t, xhat, x1, Z_re, Z_im, w}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchDocument {
    pub v: Vec<f64>,
    pub tau: f64,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDocument {
    pub t: f64,
    pub xhat: Vec<f64>,
    pub x1: f64,
    pub z_re: Vec<f64>,
    pub z_im: Vec<f64>,
    pub w: f64,
}

fn validate_direction(s: &dyn ComplexSurface, v: &[f64]) -> Result<()> {
    if v.len() != s.ambient_dim() {
        return Err(Error::InvalidArgument("direction v has wrong dimension".into()));
    }
    let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("|v| = {norm} is not 1")));
    }
    Ok(())
}

/// Build `Sigma(v, tau)` on a tensor Gauss-Legendre grid over the bump
/// support. Per `xhat` column the solved coordinate is continued in `t`
/// from the real tangency solution at `t = 0` by damped Newton on
/// `h((x1, xhat), t) = 0` (tolerance 1e-12, 50 iterations).
///
/// Every node is checked for the defining property `|Im Z - t v| <= 1e-8`
/// and the bump support is verified to avoid the discretized stationary
/// locus; on overlap the bump is shrunk once and the check repeated.
pub fn build_patch(
    surface: SurfaceHandle,
    v: &[f64],
    tau: f64,
    bump: BumpSpec,
    grid_sizes: &[usize],
) -> Result<ComplexPatch> {
    validate_direction(surface.as_ref(), v)?;
    let d = surface.ambient_dim();
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    bump.validate(tau, surface.domain_radius(), d)?;
    if grid_sizes.len() != d - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} grid orders, got {}",
            d - 1,
            grid_sizes.len()
        )));
    }
    let axis = select_solved_axis(surface.as_ref(), v)?;
    match try_build(&surface, v, tau, &bump, grid_sizes, axis) {
        Ok(p) => Ok(p),
        Err(Error::BumpOverlapsStationarySet(_)) => {
            // One automatic shrink, then give up.
            try_build(&surface, v, tau, &bump.shrunk(0.5), grid_sizes, axis)
        }
        Err(e) => Err(e),
    }
}

/// Pick the solved coordinate: the axis along which `dh/dx` is largest at
/// the central tangency point (coordinates are permuted when the default
/// first axis degenerates).
fn select_solved_axis(s: &dyn ComplexSurface, v: &[f64]) -> Result<usize> {
    let m = s.ambient_dim() - 1;
    let omega = &v[..m];
    let mut best = (0usize, -1.0f64);
    for axis in 0..m {
        if let Ok(x0) = tangency_solution(s, v, axis, &vec![0.0; m - 1]) {
            let mut x = place(axis, x0, &vec![0.0; m - 1]);
            let h = super::hess_real(s, &x)?;
            let dh: f64 = (0..m).map(|j| h[axis][j] * omega[j]).sum();
            if dh.abs() > best.1 {
                best = (axis, dh.abs());
            }
            x.clear();
        }
    }
    if best.1 <= 1e-10 {
        return Err(Error::InvalidArgument(
            "dh/dx vanishes along every axis at the tangency point".into(),
        ));
    }
    Ok(best.0)
}

fn place(axis: usize, x1: f64, xhat: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(xhat.len() + 1);
    let mut it = xhat.iter();
    for k in 0..=xhat.len() {
        if k == axis {
            x.push(x1);
        } else {
            x.push(*it.next().unwrap());
        }
    }
    x
}

/// Solve the real tangency `grad f(x) . omega = w_d` for the `axis`
/// coordinate at fixed `xhat`, returning the root nearest the domain
/// center.
fn tangency_solution(s: &dyn ComplexSurface, v: &[f64], axis: usize, xhat: &[f64]) -> Result<f64> {
    let m = s.ambient_dim() - 1;
    let omega = &v[..m];
    let wd = v[m];
    let delta = s.domain_radius();
    let g = |x1: f64| -> Result<f64> {
        let x = place(axis, x1, xhat);
        let grad = grad_real(s, &x)?;
        Ok(grad.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - wd)
    };
    let n_scan = 64;
    let lim = 0.97 * delta;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev = g(-lim)?;
    let mut prev_x = -lim;
    for k in 1..=n_scan {
        let x1 = -lim + 2.0 * lim * k as f64 / n_scan as f64;
        let cur = g(x1)?;
        if prev == 0.0 {
            roots.push(prev_x);
        } else if prev * cur < 0.0 {
            // Bisection refinement.
            let (mut a, mut b) = (prev_x, x1);
            let (mut fa, _) = (prev, cur);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let fm = g(mid)?;
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
        prev_x = x1;
    }
    roots
        .into_iter()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .ok_or_else(|| Error::NewtonDivergence {
            t: 0.0,
            xhat: xhat.to_vec(),
            residual: f64::NAN,
        })
}

fn try_build(
    surface: &SurfaceHandle,
    v: &[f64],
    tau: f64,
    bump: &BumpSpec,
    grid_sizes: &[usize],
    axis: usize,
) -> Result<ComplexPatch> {
    let s = surface.as_ref();
    let d = s.ambient_dim();
    let m = d - 1;
    let omega = &v[..m];
    let wd = v[m];

    let support = bump.support();
    let (t_nodes, t_weights) = gauss_legendre_on(grid_sizes[0], support[0].0, support[0].1);
    let mut xhat_axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for k in 1..support.len() {
        xhat_axes.push(gauss_legendre_on(grid_sizes[k], support[k].0, support[k].1));
    }

    let columns = xhat_columns(&xhat_axes);
    let mut nodes = Vec::with_capacity(columns.len() * t_nodes.len());
    let mut max_dev: f64 = 0.0;
    let mut stationary_hits = 0usize;

    for (xhat, wx) in &columns {
        let mut x1 = tangency_solution(s, v, axis, xhat)?;
        for (ti, &t) in t_nodes.iter().enumerate() {
            x1 = newton_x1(s, omega, wd, axis, xhat, t, x1)?;
            let x = place(axis, x1, xhat);
            let z_param: Vec<Complex64> = x
                .iter()
                .zip(omega)
                .map(|(&xr, &w)| Complex64::new(xr, t * w))
                .collect();
            let (fval, fgrad) = s.jet1(&z_param)?;
            let mut z = z_param.clone();
            z.push(fval);
            // Defining property: only the graphed coordinate can deviate.
            let dev = (fval.im - t * wd).abs();
            max_dev = max_dev.max(dev);
            let psi = bump.eval(t, xhat);
            let weight = psi * t_weights[ti] * wx;
            if psi > 0.0 {
                // Stationary locus of the phase (both residuals small).
                let du: Complex64 =
                    fgrad.iter().zip(omega).map(|(f, &w)| f * Complex64::from(w)).sum();
                let r1 = du.re - wd;
                let r2 = du.im;
                if r1.abs() < 1e-3 && r2.abs() < 1e-3 {
                    stationary_hits += 1;
                }
            }
            nodes.push(PatchNode { t, xhat: xhat.clone(), x1, z, weight });
        }
    }

    if stationary_hits > 0 {
        return Err(Error::BumpOverlapsStationarySet(stationary_hits));
    }
    if max_dev > 1e-8 {
        return Err(Error::NumericalFailure(format!(
            "patch violates |Im Z - t v| <= 1e-8 (max deviation {max_dev:.3e})"
        )));
    }

    Ok(ComplexPatch {
        v: v.to_vec(),
        tau,
        bump: bump.clone(),
        nodes,
        grid_sizes: grid_sizes.to_vec(),
        solved_axis: axis,
        max_im_deviation: max_dev,
        surface: surface.clone(),
        kind: PatchKind::Solved(axis),
    })
}

/// All `(xhat, weight)` combinations of the tensor axes (the empty product
/// for `d = 2`).
fn xhat_columns(axes: &[(Vec<f64>, Vec<f64>)]) -> Vec<(Vec<f64>, f64)> {
    let mut columns = vec![(Vec::new(), 1.0)];
    for (nodes, weights) in axes {
        let mut next = Vec::with_capacity(columns.len() * nodes.len());
        for (xs, w) in &columns {
            for (x, wn) in nodes.iter().zip(weights) {
                let mut xs2 = xs.clone();
                xs2.push(*x);
                next.push((xs2, w * wn));
            }
        }
        columns = next;
    }
    columns
}

/// Damped Newton for `h((x1, xhat), t) = 0` in the solved coordinate.
fn newton_x1(
    s: &dyn ComplexSurface,
    omega: &[f64],
    wd: f64,
    axis: usize,
    xhat: &[f64],
    t: f64,
    seed: f64,
) -> Result<f64> {
    let eval_h = |x1: f64| -> Result<(f64, f64)> {
        let x = place(axis, x1, xhat);
        let z: Vec<Complex64> = x
            .iter()
            .zip(omega)
            .map(|(&xr, &w)| Complex64::new(xr, t * w))
            .collect();
        let (fval, fgrad) = s.jet1(&z)?;
        let h = fval.im / t - wd;
        let dh = fgrad[axis].im / t;
        Ok((h, dh))
    };
    let mut x1 = seed;
    let (mut h, mut dh) = eval_h(x1)?;
    for _ in 0..50 {
        if h.abs() < 1e-12 {
            return Ok(x1);
        }
        if dh.abs() < 1e-14 {
            break;
        }
        let mut step = -h / dh;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = x1 + step;
            let (hc, dhc) = eval_h(cand)?;
            if hc.abs() < h.abs() {
                x1 = cand;
                h = hc;
                dh = dhc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if h.abs() < 1e-12 {
        Ok(x1)
    } else {
        Err(Error::NewtonDivergence { t, xhat: xhat.to_vec(), residual: h.abs() })
    }
}

/// Control patch for a flat graph: `h` vanishes identically when `v` is
/// tangent to the affine graph, so the solved coordinate is pinned at 0
/// and `Im Z = t v` holds exactly. Used as the zero-curvature contrast in
/// decay experiments; [`build_patch`] itself has no admissible `v` here.
pub fn flat_control_patch(
    surface: SurfaceHandle,
    v: &[f64],
    tau: f64,
    bump: BumpSpec,
    grid_sizes: &[usize],
) -> Result<ComplexPatch> {
    let s = surface.as_ref();
    validate_direction(s, v)?;
    let d = s.ambient_dim();
    let m = d - 1;
    bump.validate(tau, s.domain_radius(), d)?;
    if grid_sizes.len() != d - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} grid orders, got {}",
            d - 1,
            grid_sizes.len()
        )));
    }
    let omega = &v[..m];
    let wd = v[m];
    // The graph must be tangent to v everywhere: h constant zero.
    for probe in [-0.5, 0.0, 0.4] {
        let xhat = vec![0.0; m - 1];
        let x = place(0, probe * s.domain_radius(), &xhat);
        let g = grad_real(s, &x)?;
        let res: f64 = g.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - wd;
        if res.abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "flat control requires v tangent to the graph (residual {res:.3e})"
            )));
        }
    }

    let support = bump.support();
    let (t_nodes, t_weights) = gauss_legendre_on(grid_sizes[0], support[0].0, support[0].1);
    let mut xhat_axes = Vec::new();
    for k in 1..support.len() {
        xhat_axes.push(gauss_legendre_on(grid_sizes[k], support[k].0, support[k].1));
    }
    let columns = xhat_columns(&xhat_axes);
    let mut nodes = Vec::new();
    let mut max_dev: f64 = 0.0;
    for (xhat, wx) in &columns {
        for (ti, &t) in t_nodes.iter().enumerate() {
            let x = place(0, 0.0, xhat);
            let z_param: Vec<Complex64> = x
                .iter()
                .zip(omega)
                .map(|(&xr, &w)| Complex64::new(xr, t * w))
                .collect();
            let fval = s.eval(&z_param)?;
            let mut z = z_param;
            z.push(fval);
            max_dev = max_dev.max((fval.im - t * wd).abs());
            let weight = bump.eval(t, xhat) * t_weights[ti] * wx;
            nodes.push(PatchNode { t, xhat: xhat.clone(), x1: 0.0, z, weight });
        }
    }
    if max_dev > 1e-8 {
        return Err(Error::NumericalFailure(format!(
            "flat control violates |Im Z - t v| <= 1e-8 ({max_dev:.3e})"
        )));
    }
    Ok(ComplexPatch {
        v: v.to_vec(),
        tau,
        bump,
        nodes,
        grid_sizes: grid_sizes.to_vec(),
        solved_axis: 0,
        max_im_deviation: max_dev,
        surface,
        kind: PatchKind::FlatControl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::surface::{find_admissible_cap, AdmissibleCapParams};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn parabola_patch_has_constant_x1() {
        // d = 2, f = x^2/2: x1(t) = w_d / omega for every t.
        let s: SurfaceHandle = Arc::new(fixtures::parabola());
        let v = [0.9822, 0.1879]; // tangent at x = w_d/omega ~ 0.191
        let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|c| c / norm).collect();
        let tau = 0.05;
        let bump = BumpSpec::centered(tau, 2, 0.3);
        let patch = build_patch(s, &v, tau, bump, &[24]).unwrap();
        let expect = v[1] / v[0];
        for n in &patch.nodes {
            assert_relative_eq!(n.x1, expect, epsilon = 1e-10);
        }
        // Im Z = t v exactly here (h is exactly zero at the solution).
        assert!(patch.max_im_deviation < 1e-12);
        assert!(patch.mass() > 0.0);
    }

    #[test]
    fn paraboloid_patch_defining_property() {
        let s: SurfaceHandle = Arc::new(fixtures::paraboloid(3));
        let cap = find_admissible_cap(s.as_ref(), &AdmissibleCapParams::default()).unwrap();
        let tau = 0.05;
        let bump = BumpSpec::centered(tau, 3, 0.3);
        let patch = build_patch(s, &cap.cap.center, tau, bump, &[16, 16]).unwrap();
        assert!(patch.max_im_deviation < 1e-10, "dev {}", patch.max_im_deviation);
        assert_eq!(patch.nodes.len(), 16 * 16);
        // All nodes in the slab, weights nonnegative.
        for n in &patch.nodes {
            assert!(n.t > tau && n.t < 2.0 * tau);
            assert!(n.weight >= 0.0);
        }
        // Refinement rebuilds on a finer grid.
        let fine = patch.refined(1.5).unwrap();
        assert!(fine.nodes.len() > patch.nodes.len());
        assert_relative_eq!(fine.mass(), patch.mass(), max_relative = 1e-4);
    }

    #[test]
    fn bump_respects_slab_and_ball() {
        let bump = BumpSpec::centered(0.05, 3, 0.3);
        assert!(bump.validate(0.05, 0.3, 3).is_ok());
        assert!(bump.validate(0.04, 0.3, 3).is_err()); // escapes (tau, 2tau)
        let wide = BumpSpec { center: vec![0.075, 0.25], radii: vec![0.02, 0.2], exponent: 1 };
        assert!(wide.validate(0.05, 0.3, 3).is_err()); // escapes the ball
        // The profile vanishes outside its support and is positive inside.
        assert_eq!(bump.eval(0.0499, &[0.0]), 0.0);
        assert!(bump.eval(0.075, &[0.0]) > 0.0);
    }

    #[test]
    fn flat_control_patch_builds() {
        let s: SurfaceHandle = Arc::new(fixtures::linear_graph(2, 0.3, &[0.25]));
        // Tangent direction of the line x -> 0.25 x: (1, 0.25)/norm.
        let norm = (1.0f64 + 0.0625).sqrt();
        let v = [1.0 / norm, 0.25 / norm];
        let bump = BumpSpec::centered(0.01, 2, 0.3);
        let patch = flat_control_patch(s, &v, 0.01, bump, &[20]).unwrap();
        assert!(patch.max_im_deviation < 1e-14);
        // A non-tangent direction is rejected.
        let s2: SurfaceHandle = Arc::new(fixtures::linear_graph(2, 0.3, &[0.25]));
        let bad = [0.6, 0.8];
        assert!(flat_control_patch(s2, &bad, 0.01, BumpSpec::centered(0.01, 2, 0.3), &[20]).is_err());
    }

    #[test]
    fn nodal_graph_patch_builds() {
        let (phi0, base) = fixtures::curved_nodal_fixture();
        let g = crate::surface::NodalGraph::from_eigenfunction(&phi0, base, 0.05, false).unwrap();
        let s: SurfaceHandle = Arc::new(g);
        let cap = find_admissible_cap(
            s.as_ref(),
            &AdmissibleCapParams { curvature_floor: 1e-3, ..Default::default() },
        )
        .unwrap();
        let tau = 0.01;
        let bump = BumpSpec::centered(tau, 2, 0.05);
        let patch = build_patch(s, &cap.cap.center, tau, bump, &[20]).unwrap();
        assert!(patch.max_im_deviation <= 1e-8);
        assert!(patch.mass() > 0.0);
    }

    #[test]
    fn cylinder_patch_builds_on_the_canonical_frame() {
        let (graph, _, frame) = fixtures::cylinder_fixture(3).unwrap();
        let s: SurfaceHandle = Arc::new(graph);
        let tau = 0.02;
        let bump = BumpSpec::centered(tau, 3, 0.025);
        let patch = build_patch(s, &frame.v0, tau, bump, &[12, 8]).unwrap();
        assert!(patch.max_im_deviation <= 1e-8, "dev {}", patch.max_im_deviation);
        assert!(patch.mass() > 0.0);
    }

    #[test]
    fn patch_document_shape() {
        let s: SurfaceHandle = Arc::new(fixtures::parabola());
        let v = [0.9822, 0.1879];
        let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|c| c / norm).collect();
        let patch = build_patch(s, &v, 0.05, BumpSpec::centered(0.05, 2, 0.3), &[8]).unwrap();
        let doc = patch.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let back: PatchDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.nodes.len(), 8);
        assert_eq!(back.v.len(), 2);
        assert_eq!(back.nodes[0].z_re.len(), 2);
    }
}
