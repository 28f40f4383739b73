//! Quadrature of the oscillatory integrals
//! `J_{xi,xi'} = integral over Sigma(v0, tau) of
//! e(2 pi i (<xi - xi0, Z> - <xi' - xi0, conj Z>)) d mu(Z)`
//! and decay diagnostics for them.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::eigenfun::{e2pi, e2pi_c, shift_height, ShiftFrame};
use crate::error::{Error, Result};
use crate::lattice::LatticePoint;
use crate::quadrature::gauss_legendre_on;
use crate::surface::{ComplexPatch, ComplexSurface};

/// One evaluated oscillatory integral.
#[derive(Debug, Clone)]
pub struct OscillatoryResult {
    /// Value from the finer grid (direct form).
    pub value: Complex64,
    /// The same integral in the factored form
    /// `e(2 pi i <xi - xi', G>) e(-2 pi t (A(xi) + A(xi'))) psi`;
    /// agreement with `value` is an algebraic identity given `Im Z = t v`.
    pub factored: Complex64,
    /// `|fine - coarse|` between the two grid resolutions.
    pub refinement_error: f64,
    pub xi: LatticePoint,
    pub xi_prime: LatticePoint,
    pub separation: f64,
}

/// Check that the patch was built for `v0 = -xi0/|xi0|`.
fn check_frame(patch: &ComplexPatch, frame: &ShiftFrame) -> Result<()> {
    let gap: f64 = patch
        .v
        .iter()
        .zip(&frame.v0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if gap > 1e-9 {
        return Err(Error::MismatchedFrame(gap));
    }
    Ok(())
}

/// Direct and factored quadrature of `J` on the given node set.
fn j_on_nodes(patch: &ComplexPatch, frame: &ShiftFrame, xi: &LatticePoint, xi_prime: &LatticePoint) -> Result<(Complex64, Complex64)> {
    let a_xi = shift_height(frame, xi)?;
    let a_xip = shift_height(frame, xi_prime)?;
    let dxi: Vec<f64> = xi
        .coords
        .iter()
        .zip(&frame.xi0.coords)
        .map(|(&k, &k0)| (k - k0) as f64)
        .collect();
    let dxip: Vec<f64> = xi_prime
        .coords
        .iter()
        .zip(&frame.xi0.coords)
        .map(|(&k, &k0)| (k - k0) as f64)
        .collect();
    let diff: Vec<f64> = xi
        .coords
        .iter()
        .zip(&xi_prime.coords)
        .map(|(&a, &b)| (a - b) as f64)
        .collect();
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut direct = Complex64::from(0.0);
    let mut factored = Complex64::from(0.0);
    for node in &patch.nodes {
        if node.weight == 0.0 {
            continue;
        }
        // <xi - xi0, Z> - <xi' - xi0, conj Z>
        let mut w = Complex64::from(0.0);
        for (j, z) in node.z.iter().enumerate() {
            w += Complex64::from(dxi[j]) * z - Complex64::from(dxip[j]) * z.conj();
        }
        direct += e2pi_c(w) * node.weight;
        // e(<xi - xi', G>) e(-2 pi t (A + A')) with G = Re Z.
        let phase: f64 = diff.iter().zip(&node.z).map(|(&c, z)| c * z.re).sum();
        factored +=
            e2pi(phase) * (-two_pi * node.t * (a_xi + a_xip)).exp() * node.weight;
    }
    Ok((direct, factored))
}

/// Per-axis quadrature orders that resolve the oscillation
/// `e(2 pi i |xi - xi'| <u, G>)`: `max(base, 6 ceil(sep * width))`,
/// rounded up to a multiple of 8 so refinements can be cached.
pub fn orders_for_separation(patch: &ComplexPatch, separation: f64) -> Vec<usize> {
    patch
        .bump
        .radii
        .iter()
        .zip(&patch.grid_sizes)
        .map(|(&r, &base)| {
            let need = (6.0 * (separation * 2.0 * r).ceil()) as usize;
            let n = base.max(20).max(need);
            n.div_ceil(8) * 8
        })
        .collect()
}

/// Evaluates `J` integrals against one patch, caching order-adjusted
/// rebuilds of the grid so batches over many pairs stay cheap.
pub struct JIntegrator<'a> {
    base: &'a ComplexPatch,
    cache: BTreeMap<Vec<usize>, Arc<ComplexPatch>>,
}

impl<'a> JIntegrator<'a> {
    pub fn new(base: &'a ComplexPatch) -> Self {
        Self { base, cache: BTreeMap::new() }
    }

    /// The cached patch at exactly these orders.
    pub fn patch_at(&mut self, orders: &[usize]) -> Result<Arc<ComplexPatch>> {
        if orders == self.base.grid_sizes.as_slice() {
            // The base patch itself; clone-from-cache path below would
            // rebuild it needlessly.
        }
        if let Some(p) = self.cache.get(orders) {
            return Ok(p.clone());
        }
        let patch = Arc::new(self.base.with_orders(orders)?);
        self.cache.insert(orders.to_vec(), patch.clone());
        Ok(patch)
    }

    /// `J_{xi, xi'}` with a one-step grid refinement for the error bar.
    pub fn j_integral(
        &mut self,
        frame: &ShiftFrame,
        xi: &LatticePoint,
        xi_prime: &LatticePoint,
    ) -> Result<OscillatoryResult> {
        check_frame(self.base, frame)?;
        let separation = xi.dist(xi_prime);
        let orders = orders_for_separation(self.base, separation);
        let fine_orders: Vec<usize> = orders.iter().map(|&n| (n * 3).div_ceil(2)).collect();
        let coarse = self.patch_at(&orders)?;
        let fine = self.patch_at(&fine_orders)?;
        let (dc, _) = j_on_nodes(&coarse, frame, xi, xi_prime)?;
        let (df, ff) = j_on_nodes(&fine, frame, xi, xi_prime)?;
        Ok(OscillatoryResult {
            value: df,
            factored: ff,
            refinement_error: (df - dc).norm(),
            xi: xi.clone(),
            xi_prime: xi_prime.clone(),
            separation,
        })
    }
}

/// One-shot [`JIntegrator::j_integral`].
pub fn j_integral(
    patch: &ComplexPatch,
    frame: &ShiftFrame,
    xi: &LatticePoint,
    xi_prime: &LatticePoint,
) -> Result<OscillatoryResult> {
    JIntegrator::new(patch).j_integral(frame, xi, xi_prime)
}

/// Minimum over bump-support nodes of `|grad_(t, xhat) <u, G(t, xhat)>|`,
/// the quantity that certifies the integration-by-parts constant.
///
/// The Jacobian of `G = (x, Re F)` follows from implicit differentiation
/// of `h((x1, xhat), t) = 0`.
pub fn phase_gradient_min(patch: &ComplexPatch, u: &[f64]) -> Result<f64> {
    let d = patch.ambient_dim();
    if u.len() != d {
        return Err(Error::InvalidArgument("direction u has wrong dimension".into()));
    }
    let norm: f64 = u.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("u must be a unit vector".into()));
    }
    let m = d - 1;
    let omega = &patch.v[..m];
    let axis = patch.solved_axis;
    let surface = patch.surface().clone();
    let mut min_grad = f64::INFINITY;
    for node in &patch.nodes {
        if node.weight == 0.0 {
            continue;
        }
        let g = phase_gradient_at(surface.as_ref(), node.z[..m].to_vec(), node.t, omega, axis, u)?;
        min_grad = min_grad.min(g);
    }
    Ok(min_grad)
}

fn phase_gradient_at(
    surface: &dyn ComplexSurface,
    z_param: Vec<Complex64>,
    t: f64,
    omega: &[f64],
    axis: usize,
    u: &[f64],
) -> Result<f64> {
    let m = z_param.len();
    let jet = surface.jet2(&z_param)?;
    let fgrad = &jet.grad;
    let fdotw: Complex64 = fgrad.iter().zip(omega).map(|(f, &w)| f * Complex64::from(w)).sum();
    // h partials: h_{x_j} = Im F_j / t, h_t = (t Re<F', omega> - Im F)/t^2.
    let h_x: Vec<f64> = fgrad.iter().map(|f| f.im / t).collect();
    let h_t = (t * fdotw.re - jet.val.im) / (t * t);
    let pinned = h_x[axis].abs() < 1e-12;
    let dx1_dt = if pinned { 0.0 } else { -h_t / h_x[axis] };

    // Column t of DG.
    let mut grad_phi = Vec::with_capacity(m);
    let d_re_f_dt = fgrad[axis].re * dx1_dt - fdotw.im;
    let mut col_t = 0.0;
    col_t += u[axis] * dx1_dt;
    col_t += u[m] * d_re_f_dt;
    grad_phi.push(col_t);
    // Columns for the free parameters.
    for p in (0..m).filter(|&p| p != axis) {
        let dx1_dp = if pinned { 0.0 } else { -h_x[p] / h_x[axis] };
        let d_re_f = (fgrad[p] + fgrad[axis] * Complex64::from(dx1_dp)).re;
        let mut col = u[p];
        col += u[axis] * dx1_dp;
        col += u[m] * d_re_f;
        grad_phi.push(col);
    }
    Ok(grad_phi.iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// One row of a decay table.
#[derive(Debug, Clone)]
pub struct DecayRow {
    pub separation: f64,
    pub j_abs: f64,
    pub refinement_error: f64,
}

/// Least-squares decay fit of `log |J|` against `log |xi - xi'|`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub rows: Vec<DecayRow>,
}

/// Evaluate `J` on each pair and fit the log-log slope. Requires at least
/// three distinct separations spanning a factor of 4.
pub fn decay_fit(
    patch: &ComplexPatch,
    frame: &ShiftFrame,
    pairs: &[(LatticePoint, LatticePoint)],
) -> Result<DecayFit> {
    let mut integrator = JIntegrator::new(patch);
    let mut rows = Vec::with_capacity(pairs.len());
    for (xi, xip) in pairs {
        if xi == xip {
            return Err(Error::InvalidArgument("pairs must be distinct".into()));
        }
        let r = integrator.j_integral(frame, xi, xip)?;
        rows.push(DecayRow {
            separation: r.separation,
            j_abs: r.value.norm(),
            refinement_error: r.refinement_error,
        });
    }
    let mut seps: Vec<f64> = rows.iter().map(|r| r.separation).collect();
    seps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if seps.len() < 3 {
        return Err(Error::DegenerateFit(seps.len()));
    }
    if seps[seps.len() - 1] / seps[0] < 4.0 {
        return Err(Error::InvalidArgument(format!(
            "separations span only a factor of {:.2}, need 4",
            seps[seps.len() - 1] / seps[0]
        )));
    }
    // Least squares on (ln sep, ln |J|).
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.j_abs > 0.0)
        .map(|r| (r.separation.ln(), r.j_abs.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateFit(seps.len()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(DecayFit { slope, intercept, rows })
}

/// A surface-carried measure: the pullback of a cap bump under the Gauss
/// map, discretized on the parameter grid.
pub struct GaussPullbackMeasure {
    /// `(gamma(x), density * quadrature weight)` per node.
    pub nodes: Vec<(Vec<f64>, f64)>,
    pub cap_center: Vec<f64>,
    pub cap_angle: f64,
    pub mass: f64,
}

/// Discretize the pullback measure `mu_u` on the patch where the unit
/// normal lies in `Cap(u, delta0)`. Errors with `GaussMapNotInjective`
/// when sampled normals at distinct parameters collide (angular gap below
/// 1e-6).
pub fn gauss_pullback_measure(
    surface: &dyn ComplexSurface,
    u: &[f64],
    delta0: f64,
    order: usize,
) -> Result<GaussPullbackMeasure> {
    let d = surface.ambient_dim();
    if u.len() != d {
        return Err(Error::InvalidArgument("cap center has wrong dimension".into()));
    }
    let m = d - 1;
    let half = 0.95 * surface.domain_radius() / (m as f64).sqrt();
    let (nodes1, weights1) = gauss_legendre_on(order, -half, half);
    // Tensor over m axes.
    let mut params = vec![(Vec::new(), 1.0)];
    for _ in 0..m {
        let mut next = Vec::with_capacity(params.len() * order);
        for (xs, w) in &params {
            for (x, wn) in nodes1.iter().zip(&weights1) {
                let mut xs2 = xs.clone();
                xs2.push(*x);
                next.push((xs2, w * wn));
            }
        }
        params = next;
    }
    let bump = |s: f64| if s.abs() < 1.0 { (-1.0 / (1.0 - s * s)).exp() } else { 0.0 };
    let mut out = Vec::new();
    let mut normals: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (param, normal)
    let mut mass = 0.0;
    for (x, w) in &params {
        let n = crate::surface::unit_normal(surface, x)?;
        let cosang: f64 = n.iter().zip(u).map(|(a, b)| a * b).sum();
        let ang = cosang.clamp(-1.0, 1.0).acos();
        let density = bump(ang / delta0);
        if density > 0.0 {
            let mut gamma = x.clone();
            gamma.push(crate::surface::f_real(surface, x)?);
            mass += density * w;
            out.push((gamma, density * w));
            normals.push((x.clone(), n));
        }
    }
    // Injectivity of the Gauss map on the support (sampled).
    let mut min_gap = f64::INFINITY;
    let spacing = 2.0 * half / order as f64;
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            let pd: f64 = normals[i]
                .0
                .iter()
                .zip(&normals[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if pd < 0.5 * spacing {
                continue;
            }
            let cosang: f64 =
                normals[i].1.iter().zip(&normals[j].1).map(|(a, b)| a * b).sum();
            let gap = cosang.clamp(-1.0, 1.0).acos();
            min_gap = min_gap.min(gap);
            if gap < 1e-6 {
                return Err(Error::GaussMapNotInjective(gap));
            }
        }
    }
    if mass <= 0.0 {
        return Err(Error::InvalidArgument(
            "the Gauss map misses the cap: the pullback measure is empty".into(),
        ));
    }
    Ok(GaussPullbackMeasure { nodes: out, cap_center: u.to_vec(), cap_angle: delta0, mass })
}

/// The Fourier transform `mu_u^(y) = integral e(-2 pi i <y, x>) d mu_u(x)`.
pub fn surface_measure_ft(measure: &GaussPullbackMeasure, y: &[f64]) -> Complex64 {
    measure
        .nodes
        .iter()
        .map(|(x, w)| {
            let s: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            e2pi(-s) * *w
        })
        .sum()
}

/// Per-ray result of the non-stationary decay probe.
#[derive(Debug, Clone)]
pub struct RayDecay {
    pub ray: Vec<f64>,
    /// `(radius, |mu^(r ray)|)` rows.
    pub values: Vec<(f64, f64)>,
    /// Smallest radius after which every doubling halves the transform.
    pub threshold: Option<f64>,
}

/// Report of [`nonstationary_decay_check`].
#[derive(Debug, Clone)]
pub struct NonstationaryReport {
    pub rays: Vec<RayDecay>,
    pub failures: Vec<usize>,
}

/// Tabulate `|mu^(r ray)|` for rays outside the doubled cap and check the
/// superpolynomial-decay surrogate: beyond some tabulated radius, doubling
/// `r` at least halves the transform.
pub fn nonstationary_decay_check(
    measure: &GaussPullbackMeasure,
    rays: &[Vec<f64>],
    radii: &[f64],
) -> Result<NonstationaryReport> {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for (ri, ray) in rays.iter().enumerate() {
        let norm: f64 = ray.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("rays must be unit vectors".into()));
        }
        let cosang: f64 = ray.iter().zip(&measure.cap_center).map(|(a, b)| a * b).sum();
        let ang = cosang.clamp(-1.0, 1.0).acos();
        if ang <= 2.0 * measure.cap_angle {
            return Err(Error::InvalidArgument(format!(
                "ray {ri} lies inside the doubled cap (angle {ang:.4})"
            )));
        }
        let values: Vec<(f64, f64)> = radii
            .iter()
            .map(|&r| {
                let y: Vec<f64> = ray.iter().map(|c| c * r).collect();
                (r, surface_measure_ft(measure, &y).norm())
            })
            .collect();
        // Doubling criterion: find the earliest threshold.
        let mut threshold = None;
        'search: for start in 0..values.len() {
            for w in values[start..].windows(2) {
                if (w[1].0 / w[0].0 - 2.0).abs() < 1e-9 && w[1].1 > 0.5 * w[0].1 {
                    continue 'search;
                }
            }
            threshold = Some(values[start].0);
            break;
        }
        if threshold.is_none() {
            failures.push(ri);
        }
        out.push(RayDecay { ray: ray.clone(), values, threshold });
    }
    Ok(NonstationaryReport { rays: out, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lattice::enumerate_shell;
    use crate::surface::{build_patch, BumpSpec, SurfaceHandle};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// Patch on the plane parabola matched to xi0 = (-73, -14) on the
    /// shell (2, 5525): v0 = (73, 14)/lambda is tangent at x ~ 0.19.
    fn parabola_patch(tau: f64, order: usize) -> (ComplexPatch, ShiftFrame) {
        let s: SurfaceHandle = Arc::new(fixtures::parabola());
        let frame = ShiftFrame::new(LatticePoint::new(vec![-73, -14])).unwrap();
        let bump = BumpSpec::centered(tau, 2, 0.3);
        let patch = build_patch(s, &frame.v0, tau, bump, &[order]).unwrap();
        (patch, frame)
    }

    #[test]
    fn j_at_xi0_is_the_bump_mass() {
        let (patch, frame) = parabola_patch(0.05, 32);
        let xi0 = frame.xi0.clone();
        let r = j_integral(&patch, &frame, &xi0, &xi0).unwrap();
        // Phase 1, amplitude psi: a real positive integral equal to the
        // bump mass of whichever grid it is computed on.
        assert!(r.value.im.abs() < 1e-12);
        assert!((r.value.re - patch.mass()).abs() <= r.refinement_error + 1e-12);
        assert_relative_eq!(r.value.re, patch.mass(), max_relative = 1e-6);
    }

    #[test]
    fn j_diagonal_is_damped_mass() {
        // xi = xi' != xi0: phase cancels, J = integral e(-4 pi t A) psi.
        let (patch, frame) = parabola_patch(0.05, 48);
        let xi = LatticePoint::new(vec![-74, -7]);
        let a = shift_height(&frame, &xi).unwrap();
        let r = j_integral(&patch, &frame, &xi, &xi).unwrap();
        let expect: f64 = patch
            .nodes
            .iter()
            .map(|n| (-4.0 * std::f64::consts::PI * n.t * a).exp() * n.weight)
            .sum();
        assert!(r.value.im.abs() < 1e-12);
        assert_relative_eq!(r.value.re, expect, max_relative = 1e-6);
        assert!(r.value.re > 0.0);
    }

    #[test]
    fn direct_and_factored_agree() {
        let (patch, frame) = parabola_patch(0.05, 40);
        let shell = enumerate_shell(2, 5525).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut integrator = JIntegrator::new(&patch);
        // Random pairs from the cap A(xi) < 12 around xi0.
        let cap: Vec<&LatticePoint> = shell
            .points
            .iter()
            .filter(|p| shift_height(&frame, p).unwrap() < 12.0)
            .collect();
        assert!(cap.len() >= 4, "cap has {} points", cap.len());
        for _ in 0..20 {
            let i = rng.gen_range(0..cap.len());
            let j = rng.gen_range(0..cap.len());
            let r = integrator.j_integral(&frame, cap[i], cap[j]).unwrap();
            let denom = r.value.norm().max(r.factored.norm()).max(1e-300);
            assert!(
                (r.value - r.factored).norm() / denom < 1e-9,
                "identity violated at pair {:?} {:?}: rel {}",
                cap[i].coords,
                cap[j].coords,
                (r.value - r.factored).norm() / denom
            );
        }
    }

    #[test]
    fn j_conjugation_symmetry() {
        let (patch, frame) = parabola_patch(0.05, 40);
        let xi = LatticePoint::new(vec![-74, -7]);
        let xip = LatticePoint::new(vec![-71, -22]);
        let a = j_integral(&patch, &frame, &xi, &xip).unwrap();
        let b = j_integral(&patch, &frame, &xip, &xi).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-9 * a.value.norm().max(1.0));
    }

    #[test]
    fn mismatched_frame_is_rejected() {
        let (patch, _) = parabola_patch(0.05, 16);
        let other = ShiftFrame::new(LatticePoint::new(vec![5, 0])).unwrap();
        let xi0 = other.xi0.clone();
        match j_integral(&patch, &other, &xi0, &xi0) {
            Err(Error::MismatchedFrame(_)) => {}
            other => panic!("expected MismatchedFrame, got {other:?}"),
        }
    }

    #[test]
    fn phase_gradient_positive_orthogonal_to_v0() {
        let (patch, frame) = parabola_patch(0.05, 32);
        // d = 2: the unique direction orthogonal to v0.
        let u = [-frame.v0[1], frame.v0[0]];
        let g = phase_gradient_min(&patch, &u).unwrap();
        assert!(g > 0.0, "gradient min {g}");
        // Oracle: brute-force min over a 10x refined grid.
        let fine = patch.refined(10.0).unwrap();
        let g_fine = phase_gradient_min(&fine, &u).unwrap();
        assert!((g - g_fine).abs() <= 0.05 * g_fine.max(1e-12), "{g} vs {g_fine}");
    }

    #[test]
    fn phase_gradient_zero_on_flat_control() {
        let s: SurfaceHandle = Arc::new(fixtures::linear_graph(2, 0.3, &[0.25]));
        let norm = (1.0f64 + 0.0625).sqrt();
        let v = [1.0 / norm, 0.25 / norm];
        let bump = BumpSpec::centered(0.01, 2, 0.3);
        let patch = crate::surface::flat_control_patch(s, &v, 0.01, bump, &[20]).unwrap();
        let u = [-v[1], v[0]];
        let g = phase_gradient_min(&patch, &u).unwrap();
        assert!(g < 1e-12, "flat phase gradient {g}");
    }

    #[test]
    fn decay_fit_reports_slope_and_errors() {
        let (patch, frame) = parabola_patch(0.1, 24);
        let xi0 = frame.xi0.clone();
        let partners = [
            LatticePoint::new(vec![-74, -7]),
            LatticePoint::new(vec![-71, -22]),
            LatticePoint::new(vec![-70, -25]),
            LatticePoint::new(vec![-74, 7]),
            LatticePoint::new(vec![-73, 14]),
            LatticePoint::new(vec![-62, -41]),
        ];
        let pairs: Vec<(LatticePoint, LatticePoint)> =
            partners.iter().map(|p| (xi0.clone(), p.clone())).collect();
        let fit = decay_fit(&patch, &frame, &pairs).unwrap();
        assert_eq!(fit.rows.len(), 6);
        assert!(fit.slope < 0.0, "slope {}", fit.slope);
        // Too few separations is degenerate.
        let short: Vec<_> = pairs[..2].to_vec();
        assert!(matches!(
            decay_fit(&patch, &frame, &short),
            Err(Error::DegenerateFit(_)) | Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gauss_measure_and_ft_basics() {
        let s = fixtures::paraboloid(3);
        let u = [0.0, 0.0, 1.0];
        let measure = gauss_pullback_measure(&s, &u, 0.12, 32).unwrap();
        // y = 0: positive mass.
        let m0 = surface_measure_ft(&measure, &[0.0, 0.0, 0.0]);
        assert!(m0.re > 0.0 && m0.im.abs() < 1e-14);
        assert_relative_eq!(m0.re, measure.mass, epsilon = 1e-12);
        // Reality: |mu^(-y)| = |conj mu^(y)|.
        let y = [3.0, -1.0, 2.0];
        let plus = surface_measure_ft(&measure, &y);
        let minus = surface_measure_ft(&measure, &[-3.0, 1.0, -2.0]);
        assert!((minus - plus.conj()).norm() < 1e-12);
    }

    #[test]
    fn nonstationary_rays_decay() {
        let s = fixtures::paraboloid(3);
        let u = [0.0, 0.0, 1.0];
        let measure = gauss_pullback_measure(&s, &u, 0.1, 48).unwrap();
        let rays = vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]];
        let radii: Vec<f64> = (3..=8).map(|k| 2f64.powi(k)).collect();
        let rep = nonstationary_decay_check(&measure, &rays, &radii).unwrap();
        assert!(rep.failures.is_empty(), "failures: {:?}", rep.failures);
        for ray in &rep.rays {
            assert!(ray.threshold.is_some());
        }
        // A ray inside the doubled cap is rejected by the precondition.
        let inside = vec![vec![0.05, 0.0, (1.0f64 - 0.0025).sqrt()]];
        assert!(nonstationary_decay_check(&measure, &inside, &radii).is_err());
    }
}

