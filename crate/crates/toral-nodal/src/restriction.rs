//! Mean-square restriction quantities on complex patches, the cluster
//! lower-bound certificate, real-curve restriction experiments, and the
//! reflection/cap-propagation engine.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigenfun::{
    default_cap_threshold, e2pi_c, shift_height, short_support, Eigenfunction, ShiftFrame,
};
use crate::error::{Error, Result};
use crate::lattice::{affine_rank, cluster_decompose_points, ClusterParams, LatticePoint};
use crate::oscillatory::{orders_for_separation, JIntegrator};
use crate::quadrature::gauss_legendre_on;
use crate::surface::ComplexPatch;

/// A spherical cap of directions within `angle` of `center`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cap {
    pub center: Vec<f64>,
    pub angle: f64,
}

impl Cap {
    pub fn new(center: Vec<f64>, angle: f64) -> Result<Self> {
        let norm: f64 = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("cap center norm {norm} is not 1")));
        }
        if !(angle > 0.0 && angle <= std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!("cap angle {angle} outside (0, pi]")));
        }
        Ok(Self { center, angle })
    }

    /// Membership: `<y, center> >= cos(angle)`.
    pub fn contains(&self, y: &[f64]) -> bool {
        let dot: f64 = y.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        dot >= self.angle.cos()
    }

    /// Angle between `y` and the center.
    pub fn angular_distance(&self, y: &[f64]) -> f64 {
        let dot: f64 = y.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// The shell point whose direction `-xi/|xi|` lies deepest inside the
/// cap, if any: the natural choice of `xi0` when probing a surface whose
/// admissible directions are `cap`.
pub fn frame_in_cap(
    shell: &crate::lattice::LatticeShell,
    cap: &Cap,
) -> Option<ShiftFrame> {
    let lambda = shell.radius();
    let mut best: Option<(f64, &LatticePoint)> = None;
    for p in &shell.points {
        let v: Vec<f64> = p.coords.iter().map(|&c| -(c as f64) / lambda).collect();
        let ang = cap.angular_distance(&v);
        if ang <= cap.angle && best.as_ref().is_none_or(|(a, _)| ang < *a) {
            best = Some((ang, p));
        }
    }
    best.map(|(_, p)| ShiftFrame::new(p.clone()).expect("shell points are nonzero"))
}

/// Reflection in the hyperplane orthogonal to the unit vector `u`:
/// `tau_u(x) = x - 2 <x, u> u`. Involutive and norm-preserving.
pub fn reflect(u: &[f64], x: &[f64]) -> Vec<f64> {
    let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
    x.iter().zip(u).map(|(&xi, &ui)| xi - 2.0 * dot * ui).collect()
}

fn unit_check(v: &[f64], name: &str) -> Result<()> {
    let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{name} has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Whether `y` belongs to the reflected set `{tau_u w : u in Cap(u0,
/// delta)}`. For `y != w` the unique reflectors are `+-(w - y)/|w - y|`,
/// so membership is an exact conic test.
fn in_reflected_set(u0: &[f64], delta: f64, w: &[f64], y: &[f64]) -> bool {
    let diff: Vec<f64> = w.iter().zip(y).map(|(a, b)| a - b).collect();
    let n: f64 = diff.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n < 1e-12 {
        // tau_u w = w exactly when <w, u> = 0; the great circle normal to
        // w meets the cap iff u0 is within delta of it.
        let dot: f64 = u0.iter().zip(w).map(|(a, b)| a * b).sum();
        let gap = (std::f64::consts::FRAC_PI_2 - dot.clamp(-1.0, 1.0).acos()).abs();
        return gap <= delta;
    }
    let cos_delta = delta.cos();
    let dot: f64 = diff.iter().zip(u0).map(|(a, b)| a * b).sum::<f64>() / n;
    dot >= cos_delta || -dot >= cos_delta
}

/// Result of [`estimate_epsilon`].
#[derive(Debug, Clone)]
pub struct EpsilonEstimate {
    /// Center of the inscribed cap: normalized spherical mean of the
    /// sampled reflected points.
    pub w1: Vec<f64>,
    /// Largest probe-verified inscribed cap radius.
    pub epsilon: f64,
}

/// Sample `u` over `Cap(u0, delta)`, collect the reflected points
/// `tau_u w`, and return the largest cap around their spherical mean that
/// a dense angular probe verifies to be inside the reflected set.
pub fn estimate_epsilon(u0: &[f64], delta: f64, w: &[f64]) -> Result<EpsilonEstimate> {
    unit_check(u0, "u0")?;
    unit_check(w, "w")?;
    if !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, pi/2)")));
    }
    let samples = crate::surface::sample_cap(u0, delta, 256);
    let mut mean = vec![0.0; w.len()];
    for u in &samples {
        let p = reflect(u, w);
        for (m, v) in mean.iter_mut().zip(&p) {
            *m += v;
        }
    }
    let norm: f64 = mean.iter().map(|c| c * c).sum::<f64>().sqrt();
    let w1: Vec<f64> = if norm > 1e-9 {
        mean.iter().map(|c| c / norm).collect()
    } else {
        reflect(u0, w)
    };

    let feasible = |eps: f64| -> bool {
        crate::surface::sample_cap(&w1, eps, 512)
            .iter()
            .all(|y| in_reflected_set(u0, delta, w, y))
    };
    if !in_reflected_set(u0, delta, w, &w1) {
        return Ok(EpsilonEstimate { w1, epsilon: 0.0 });
    }
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::PI);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(EpsilonEstimate { w1, epsilon: lo })
}

/// Minimum over `u in Cap(u0, delta)` of the angle between `tau_u y` and
/// `target`: for `d = 2` in closed form, otherwise by a zooming grid
/// search over the cap parameters.
fn reflected_min_angle(u0: &[f64], delta: f64, y: &[f64], target: &[f64]) -> f64 {
    let d = u0.len();
    let objective = |u: &[f64]| -> f64 {
        let p = reflect(u, y);
        let dot: f64 = p.iter().zip(target).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0).acos()
    };
    if d == 2 {
        // Reflecting y (angle beta_y) across the line normal to u (angle
        // psi) lands at 2 psi + pi - beta_y; minimize distance to the
        // target angle over psi in [psi0 - delta, psi0 + delta].
        let psi0 = u0[1].atan2(u0[0]);
        let beta_y = y[1].atan2(y[0]);
        let beta_t = target[1].atan2(target[0]);
        let wrap = |a: f64| {
            let mut a = a % (2.0 * std::f64::consts::PI);
            if a > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
            }
            if a < -std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
            }
            a
        };
        let center_gap = wrap(2.0 * psi0 + std::f64::consts::PI - beta_y - beta_t);
        return (center_gap.abs() - 2.0 * delta).max(0.0);
    }
    // Zooming grid over (alpha, azimuth) around u0.
    let basis = crate::surface::orthonormal_complement(u0);
    let point = |alpha: f64, phi: f64| -> Vec<f64> {
        let mut t = vec![0.0; d];
        for (ti, (b0, b1)) in t.iter_mut().zip(basis[0].iter().zip(&basis[1])) {
            *ti = phi.cos() * b0 + phi.sin() * b1;
        }
        u0.iter()
            .zip(&t)
            .map(|(&c, &ti)| alpha.cos() * c + alpha.sin() * ti)
            .collect()
    };
    let mut best = objective(u0);
    let mut center = (0.0f64, 0.0f64);
    let mut spread_a = delta;
    let mut spread_p = std::f64::consts::PI;
    for _round in 0..4 {
        let mut best_local = (center.0, center.1);
        for i in 0..9 {
            for j in 0..12 {
                let alpha = (center.0 + spread_a * (i as f64 / 8.0 * 2.0 - 1.0))
                    .clamp(0.0, delta);
                let phi = center.1 + spread_p * (j as f64 / 12.0 * 2.0 - 1.0);
                let val = objective(&point(alpha, phi));
                if val < best {
                    best = val;
                    best_local = (alpha, phi);
                }
            }
        }
        center = best_local;
        spread_a /= 4.0;
        spread_p /= 4.0;
    }
    best
}

/// One step of the cap-propagation flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapStep {
    pub center: Vec<f64>,
    pub angle: f64,
    pub epsilon: f64,
    pub growth: f64,
    pub uncovered_probes: usize,
}

/// Outcome of [`cap_propagate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapFlow {
    pub steps: Vec<CapStep>,
    pub reached_full_sphere: bool,
}

/// Options for the propagation probe sizes.
#[derive(Debug, Clone)]
pub struct PropagateOptions {
    pub coverage_probes: usize,
    pub epsilon_probe_ws: usize,
    pub max_steps: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { coverage_probes: 10_000, epsilon_probe_ws: 24, max_steps: 0 }
    }
}

/// Grow `Omega_0` by reflecting across normals: each step replaces
/// `Cap(w_k, theta_k)` by a cap around the reflected-set center `w_{k+1}`
/// with angle `theta_k - 5 delta_0 + 0.95 epsilon_k >= theta_k + delta_0`.
/// Requires `delta_0 < delta_1/2` and `delta_0 < epsilon_d(delta_1/2)/6`
/// (measured over a probe grid of base points). Terminates at a full
/// sphere or after `ceil(pi/delta_0)` steps; coverage of every claimed cap
/// is probe-verified against the union of reflected caps.
pub fn cap_propagate(
    omega0: &Cap,
    u0: &[f64],
    delta1: f64,
    delta0: f64,
    options: &PropagateOptions,
) -> Result<CapFlow> {
    unit_check(u0, "u0")?;
    if !(delta0 > 0.0 && delta0 < delta1 / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < delta0 ({delta0}) < delta1/2 ({})",
            delta1 / 2.0
        )));
    }
    if omega0.angle <= 5.0 * delta0 {
        return Err(Error::InvalidArgument(
            "the seed cap must be wider than 5 delta0".into(),
        ));
    }
    let half = delta1 / 2.0;
    // Measured uniform epsilon over a probe grid of base directions.
    let mut eps_min = f64::INFINITY;
    for w in probe_directions(u0.len(), options.epsilon_probe_ws, u0) {
        let est = estimate_epsilon(u0, half, &w)?;
        eps_min = eps_min.min(est.epsilon);
    }
    if delta0 >= eps_min / 6.0 {
        return Err(Error::PreconditionViolated { delta0, epsilon: eps_min });
    }

    let hard_cap = (std::f64::consts::PI / delta0).ceil() as usize + 2;
    let max_steps = if options.max_steps == 0 { hard_cap } else { options.max_steps };
    let mut center = omega0.center.clone();
    let mut theta = omega0.angle;
    let mut steps = Vec::new();
    let mut full = false;
    for _ in 0..max_steps {
        let est = estimate_epsilon(u0, half, &center)?;
        if 0.95 * est.epsilon < 6.0 * delta0 {
            return Err(Error::PreconditionViolated { delta0, epsilon: est.epsilon });
        }
        let margin = theta - 5.0 * delta0;
        let next_theta = (margin + 0.95 * est.epsilon).min(std::f64::consts::PI);
        // Probe-verify: every direction of the claimed next cap lies in
        // some reflected cap tau_u Cap(center, theta - 5 delta0).
        let probes = crate::surface::sample_cap(&est.w1, next_theta, options.coverage_probes);
        let uncovered = probes
            .iter()
            .filter(|y| reflected_min_angle(u0, half, y, &center) > margin + 1e-9)
            .count();
        let growth = next_theta - theta;
        steps.push(CapStep {
            center: est.w1.clone(),
            angle: next_theta,
            epsilon: est.epsilon,
            growth,
            uncovered_probes: uncovered,
        });
        center = est.w1;
        theta = next_theta;
        if theta >= std::f64::consts::PI {
            full = true;
            break;
        }
    }
    Ok(CapFlow { steps, reached_full_sphere: full })
}

/// Deterministic direction probes including the poles and equator
/// relative to `u0`.
fn probe_directions(d: usize, n: usize, u0: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![u0.to_vec(), u0.iter().map(|c| -c).collect()];
    let basis = crate::surface::orthonormal_complement(u0);
    for b in &basis {
        out.push(b.clone());
    }
    // Mixed directions at several latitudes.
    let latitudes = [0.25, 0.5, 0.75];
    let mut k = 0usize;
    while out.len() < n.max(4) {
        let lat = latitudes[k % latitudes.len()];
        let b = &basis[k % basis.len()];
        let alpha = lat * std::f64::consts::FRAC_PI_2;
        let v: Vec<f64> = u0
            .iter()
            .zip(b)
            .map(|(&c, &t)| alpha.cos() * c + alpha.sin() * t)
            .collect();
        out.push(v);
        k += 1;
        let _ = d;
    }
    out
}

/// Mean square with its quadrature error bar.
#[derive(Debug, Clone)]
pub struct MeanSquare {
    pub value: f64,
    pub refinement_error: f64,
}

/// `integral |phi^C(Z) e(-2 pi i <xi0, Z>)|^2 d mu(Z)` over the patch,
/// computed stably as the shifted sum `sum a_xi e(2 pi i <xi - xi0, Z>)`
/// per node, with quadrature orders chosen to resolve the largest
/// frequency separation present.
pub fn mean_square(
    patch: &ComplexPatch,
    phi: &Eigenfunction,
    frame: &ShiftFrame,
) -> Result<MeanSquare> {
    let mut integrator = JIntegrator::new(patch);
    mean_square_with(&mut integrator, patch, phi, frame)
}

fn mean_square_with(
    integrator: &mut JIntegrator,
    patch: &ComplexPatch,
    phi: &Eigenfunction,
    frame: &ShiftFrame,
) -> Result<MeanSquare> {
    check_patch_frame(patch, frame)?;
    let freqs: Vec<&LatticePoint> = phi.coeffs().map(|(xi, _)| xi).collect();
    let mut max_sep: f64 = 0.0;
    for (i, a) in freqs.iter().enumerate() {
        for b in &freqs[i + 1..] {
            max_sep = max_sep.max(a.dist(b));
        }
    }
    let orders = orders_for_separation(patch, max_sep);
    let fine_orders: Vec<usize> = orders.iter().map(|&n| (n * 3).div_ceil(2)).collect();
    let coarse = integrator.patch_at(&orders)?;
    let fine = integrator.patch_at(&fine_orders)?;
    let vc = mean_square_on_nodes(&coarse, phi, frame);
    let vf = mean_square_on_nodes(&fine, phi, frame);
    Ok(MeanSquare { value: vf, refinement_error: (vf - vc).abs() })
}

fn mean_square_on_nodes(patch: &ComplexPatch, phi: &Eigenfunction, frame: &ShiftFrame) -> f64 {
    patch
        .nodes
        .iter()
        .map(|node| {
            if node.weight == 0.0 {
                return 0.0;
            }
            let mut val = Complex64::from(0.0);
            for (xi, a) in phi.coeffs() {
                let w: Complex64 = xi
                    .coords
                    .iter()
                    .zip(&frame.xi0.coords)
                    .zip(&node.z)
                    .map(|((&k, &k0), z)| Complex64::from((k - k0) as f64) * z)
                    .sum();
                val += a * e2pi_c(w);
            }
            val.norm_sqr() * node.weight
        })
        .sum()
}

fn check_patch_frame(patch: &ComplexPatch, frame: &ShiftFrame) -> Result<()> {
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

/// A parametrized sample of a real curve or surface with quadrature
/// weights, for restriction experiments on the torus itself.
#[derive(Debug, Clone)]
pub struct SurfaceSampling {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SurfaceSampling {
    /// Circle arc `center + radius (cos t, sin t)`, `t in [theta0,
    /// theta1]`, with arclength weights.
    pub fn circle_arc(center: [f64; 2], radius: f64, theta0: f64, theta1: f64, order: usize) -> Self {
        let (ts, ws) = gauss_legendre_on(order, theta0, theta1);
        let points = ts
            .iter()
            .map(|&t| vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()])
            .collect();
        let weights = ws.iter().map(|w| w * radius).collect();
        Self { points, weights }
    }

    /// Straight segment from `a` to `b` with arclength weights.
    pub fn line_segment(a: &[f64], b: &[f64], order: usize) -> Self {
        let (ts, ws) = gauss_legendre_on(order, 0.0, 1.0);
        let len: f64 = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (y - x) * (y - x))
            .sum::<f64>()
            .sqrt();
        let points = ts
            .iter()
            .map(|&t| a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect())
            .collect();
        let weights = ws.iter().map(|w| w * len).collect();
        Self { points, weights }
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `integral_Sigma |phi|^2 d sigma` by quadrature on the sampling.
pub fn real_restriction_norm(sampling: &SurfaceSampling, phi: &Eigenfunction) -> f64 {
    sampling
        .points
        .iter()
        .zip(&sampling.weights)
        .map(|(x, w)| phi.evaluate(x).norm_sqr() * w)
        .sum()
}

/// Sup of `|phi|` over the sampling points (vanishing probe).
pub fn restriction_sup(sampling: &SurfaceSampling, phi: &Eigenfunction) -> f64 {
    sampling
        .points
        .iter()
        .map(|x| phi.evaluate(x).norm())
        .fold(0.0, f64::max)
}

/// Two-frequency base-case data: the directly evaluated mean square and
/// the certified lower bound from measured phase-variation mass.
#[derive(Debug, Clone)]
pub struct BaseCaseBound {
    /// Direct quadrature of the two-term mean square.
    pub direct: f64,
    /// Largest certified constant `C = max_delta delta * mass(S_delta)`.
    pub constant: f64,
    /// `C (|a|^2 e^{-8 pi tau A} + |a'|^2 e^{-8 pi tau A'})`.
    pub certified: f64,
    /// The `delta` achieving the constant.
    pub delta: f64,
}

/// Evaluate the two-frequency (or single-frequency) base case on the
/// patch. For two distinct frequencies the certified constant comes from
/// the measured mass of `S_delta = {cos 2 pi phase >= -1 + delta}` over a
/// `delta`-grid; for a single frequency the constant is the bump mass.
pub fn base_case_bound(
    patch: &ComplexPatch,
    frame: &ShiftFrame,
    xi: &LatticePoint,
    a: Complex64,
    other: Option<(&LatticePoint, Complex64)>,
) -> Result<BaseCaseBound> {
    check_patch_frame(patch, frame)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let tau = patch.tau;
    let a_height = shift_height(frame, xi)?;
    let floor = |height: f64, amp2: f64| amp2 * (-8.0 * std::f64::consts::PI * tau * height).exp();

    let Some((xi_p, a_p)) = other else {
        let mass = patch.mass();
        return Ok(BaseCaseBound {
            direct: patch
                .nodes
                .iter()
                .map(|n| {
                    a.norm_sqr() * (-2.0 * two_pi * n.t * a_height).exp() * n.weight
                })
                .sum(),
            constant: mass,
            certified: mass * floor(a_height, a.norm_sqr()),
            delta: 0.0,
        });
    };
    if xi == xi_p {
        return Err(Error::InvalidArgument("base case needs distinct frequencies".into()));
    }
    let b_height = shift_height(frame, xi_p)?;
    let dphase = a.arg() - a_p.arg();
    let diff: Vec<f64> = xi
        .coords
        .iter()
        .zip(&xi_p.coords)
        .map(|(&x, &y)| (x - y) as f64)
        .collect();

    let mut direct = 0.0;
    let mut masses = [0.0f64; 9]; // S_delta masses for delta = 0.1 .. 0.9
    for node in &patch.nodes {
        if node.weight == 0.0 {
            continue;
        }
        // Direct two-term value from the actual node Z.
        let term = |xi: &LatticePoint, a: Complex64| -> Complex64 {
            let w: Complex64 = xi
                .coords
                .iter()
                .zip(&frame.xi0.coords)
                .zip(&node.z)
                .map(|((&k, &k0), z)| Complex64::from((k - k0) as f64) * z)
                .sum();
            a * e2pi_c(w)
        };
        direct += (term(xi, a) + term(xi_p, a_p)).norm_sqr() * node.weight;
        // Phase-mass bookkeeping on G = Re Z.
        let g_dot: f64 = diff.iter().zip(&node.z).map(|(&c, z)| c * z.re).sum();
        let cosph = (dphase + two_pi * g_dot).cos();
        for (k, mass) in masses.iter_mut().enumerate() {
            let delta = 0.1 * (k + 1) as f64;
            if cosph >= -1.0 + delta {
                *mass += node.weight;
            }
        }
    }
    let mut constant = 0.0;
    let mut best_delta = 0.0;
    for (k, &mass) in masses.iter().enumerate() {
        let delta = 0.1 * (k + 1) as f64;
        if delta * mass > constant {
            constant = delta * mass;
            best_delta = delta;
        }
    }
    let certified = constant * (floor(a_height, a.norm_sqr()) + floor(b_height, a_p.norm_sqr()));
    Ok(BaseCaseBound { direct, constant, certified, delta: best_delta })
}

/// Serializable cluster-tree record of a certificate run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterTreeNode {
    pub frequencies: Vec<Vec<i64>>,
    pub affine_rank: usize,
    pub rho: f64,
    pub leaf_constant: Option<f64>,
    pub offdiag_here: f64,
    pub children: Vec<ClusterTreeNode>,
}

/// The lower-bound certificate of the cluster induction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    /// `sum_{xi in E'} |a_xi|^2 e^{-8 pi tau A(xi)}`.
    pub diagonal_sum: f64,
    /// Accumulated cross-cluster mass `sum |a||a'| (|J| + err)` plus the
    /// short-sum tail slack.
    pub offdiag_bound: f64,
    /// The part of `offdiag_bound` charged to discarded tail frequencies.
    pub tail_slack: f64,
    /// Minimal certified base-case constant over the leaves.
    pub constant: f64,
    /// `constant * diagonal_sum - offdiag_bound`.
    pub verdict: f64,
    pub cluster_tree: ClusterTreeNode,
    pub short_support_size: usize,
}

/// Parameters of the certificate run.
#[derive(Debug, Clone)]
pub struct CertificateParams {
    pub cluster: ClusterParams,
    /// Short-sum threshold `D`; `None` selects `ceil((log lambda)^2)`.
    pub d_threshold: Option<f64>,
}

/// Recursive lower-bound certificate: partition the short support by the
/// greedy cluster decomposition (halving `rho` whenever a level refuses
/// to split), recurse into clusters, and certify leaves of affine rank
/// <= 1 with the two-frequency base case. Off-diagonal cross terms are
/// accumulated as `|a_xi||a_xi'| (|J| + refinement error)`.
pub fn lower_bound_certificate(
    patch: &ComplexPatch,
    phi: &Eigenfunction,
    frame: &ShiftFrame,
    params: &CertificateParams,
) -> Result<Certificate> {
    check_patch_frame(patch, frame)?;
    let d_threshold = params
        .d_threshold
        .unwrap_or_else(|| default_cap_threshold(frame.r2(), 1.0));
    let support = short_support(phi, frame, d_threshold)?;
    let freqs = support.frequencies.clone();
    let coeffs: Vec<Complex64> = freqs.iter().map(|xi| phi.coeff(xi)).collect();
    let tau = patch.tau;

    let mut diagonal_sum = 0.0;
    for (xi, a) in freqs.iter().zip(&coeffs) {
        let h = shift_height(frame, xi)?;
        diagonal_sum += a.norm_sqr() * (-8.0 * std::f64::consts::PI * tau * h).exp();
    }

    let mut integrator = JIntegrator::new(patch);
    let mut min_constant = f64::INFINITY;
    let mut offdiag = 0.0;
    let indices: Vec<usize> = (0..freqs.len()).collect();
    let tree = certify_node(
        patch,
        frame,
        &freqs,
        &coeffs,
        &indices,
        params.cluster.rho,
        &mut integrator,
        &mut min_constant,
        &mut offdiag,
    )?;

    // Slack for the discarded tail: per node the tail sup is at most
    // sqrt(#tail) e^{-2 pi tau D} by Cauchy-Schwarz.
    let n_tail = phi.support_len() - freqs.len();
    let tail_slack = if n_tail == 0 {
        0.0
    } else {
        let tail_sup =
            (n_tail as f64).sqrt() * (-2.0 * std::f64::consts::PI * tau * d_threshold).exp();
        let short_sup: f64 = coeffs.iter().map(|a| a.norm()).sum();
        patch.mass() * (2.0 * short_sup * tail_sup + tail_sup * tail_sup)
    };

    let constant = if min_constant.is_finite() { min_constant } else { 0.0 };
    let offdiag_bound = offdiag + tail_slack;
    Ok(Certificate {
        diagonal_sum,
        offdiag_bound,
        tail_slack,
        constant,
        verdict: constant * diagonal_sum - offdiag_bound,
        cluster_tree: tree,
        short_support_size: freqs.len(),
    })
}

#[allow(clippy::too_many_arguments)]
fn certify_node(
    patch: &ComplexPatch,
    frame: &ShiftFrame,
    freqs: &[LatticePoint],
    coeffs: &[Complex64],
    indices: &[usize],
    rho: f64,
    integrator: &mut JIntegrator,
    min_constant: &mut f64,
    offdiag: &mut f64,
) -> Result<ClusterTreeNode> {
    let points: Vec<LatticePoint> = indices.iter().map(|&i| freqs[i].clone()).collect();
    let rank = if points.is_empty() { 0 } else { affine_rank(&points)? };
    let mut node = ClusterTreeNode {
        frequencies: points.iter().map(|p| p.coords.clone()).collect(),
        affine_rank: rank,
        rho,
        leaf_constant: None,
        offdiag_here: 0.0,
        children: Vec::new(),
    };
    if points.is_empty() {
        return Ok(node);
    }
    if rank <= 1 {
        // A line meets the sphere in at most two points.
        if points.len() > 2 {
            return Err(Error::BaseCaseFailure(points.len()));
        }
        let bound = if points.len() == 1 {
            base_case_bound(patch, frame, &points[0], coeffs[indices[0]], None)?
        } else {
            base_case_bound(
                patch,
                frame,
                &points[0],
                coeffs[indices[0]],
                Some((&points[1], coeffs[indices[1]])),
            )?
        };
        *min_constant = min_constant.min(bound.constant);
        node.leaf_constant = Some(bound.constant);
        return Ok(node);
    }

    // Split; halve rho until the decomposition separates the set (the
    // minimal pairwise distance is >= 1, so this terminates).
    let mut rho_cur = rho;
    let clusters = loop {
        let params = ClusterParams::with_default_delta2(frame.xi0.dim(), rho_cur)?;
        let clusters = cluster_decompose_points(&points, &params)?;
        if clusters.len() > 1 {
            break clusters;
        }
        rho_cur *= 0.5;
        if rho_cur < 0.5 {
            break vec![(0..points.len()).collect::<Vec<usize>>()];
        }
    };
    if clusters.len() == 1 {
        return Err(Error::BaseCaseFailure(points.len()));
    }
    node.rho = rho_cur;

    // Cross-cluster off-diagonal mass.
    for (ci, ca) in clusters.iter().enumerate() {
        for cb in clusters.iter().skip(ci + 1) {
            for &local_a in ca {
                for &local_b in cb {
                    let (gi, gj) = (indices[local_a], indices[local_b]);
                    let amp = coeffs[gi].norm() * coeffs[gj].norm();
                    if amp == 0.0 {
                        continue;
                    }
                    let r = integrator.j_integral(frame, &freqs[gi], &freqs[gj])?;
                    // The expansion has both (xi, xi') and (xi', xi); J
                    // swaps to its conjugate, so charge the pair twice.
                    node.offdiag_here += 2.0 * amp * (r.value.norm() + r.refinement_error);
                }
            }
        }
    }
    *offdiag += node.offdiag_here;

    for cluster in clusters {
        let child_indices: Vec<usize> = cluster.iter().map(|&l| indices[l]).collect();
        node.children.push(certify_node(
            patch,
            frame,
            freqs,
            coeffs,
            &child_indices,
            rho_cur,
            integrator,
            min_constant,
            offdiag,
        )?);
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfun::make_geodesic_vanisher;
    use crate::fixtures;
    use crate::lattice::enumerate_shell;
    use crate::surface::{build_patch, BumpSpec, SurfaceHandle};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn cap_membership_and_rotation_invariance() {
        let cap = Cap::new(vec![0.0, 0.0, 1.0], 0.5).unwrap();
        assert!(cap.contains(&[0.0, 0.0, 1.0]));
        assert!(!cap.contains(&[1.0, 0.0, 0.0]));
        // Rotating center and point together preserves membership.
        let th: f64 = 0.7;
        let rot = |v: &[f64]| vec![v[0], v[1] * th.cos() - v[2] * th.sin(), v[1] * th.sin() + v[2] * th.cos()];
        let y = [0.3, 0.1, (1.0f64 - 0.1).sqrt()];
        let cap2 = Cap::new(rot(&cap.center), cap.angle).unwrap();
        assert_eq!(cap.contains(&y), cap2.contains(&rot(&y)));
    }

    #[test]
    fn reflect_examples() {
        let u = [0.6, 0.8];
        assert!(reflect(&u, &u).iter().zip(&u).all(|(a, b)| (a + b).abs() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: f64 = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            u.iter_mut().for_each(|c| *c /= n);
            let twice = reflect(&u, &reflect(&u, &x));
            for (a, b) in twice.iter().zip(&x) {
                assert!((a - b).abs() < 1e-14, "involution");
            }
            let norm_before: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            let rx = reflect(&u, &x);
            let norm_after: f64 = rx.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((norm_before - norm_after).abs() < 1e-14, "isometry");
        }
    }

    #[test]
    fn composed_reflections_rotate_by_twice_the_angle() {
        // In the plane spanned by u and u1, tau_{u1} o tau_u is a rotation
        // by twice the angle between them.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let b: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let u = [a.cos(), a.sin()];
            let u1 = [b.cos(), b.sin()];
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let composed = reflect(&u1, &reflect(&u, &x));
            let phi = 2.0 * (b - a);
            let rotated = [
                x[0] * phi.cos() - x[1] * phi.sin(),
                x[0] * phi.sin() + x[1] * phi.cos(),
            ];
            for (p, q) in composed.iter().zip(&rotated) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_closed_form_in_the_plane() {
        // The reflected set of an arc of radius delta is an arc of radius
        // 2 delta, so epsilon = 2 delta exactly.
        let u0 = [1.0, 0.0];
        for delta in [0.1, 0.2, 0.4] {
            for beta in [0.3, 1.2, 2.5] {
                let w = [f64::cos(beta), f64::sin(beta)];
                let est = estimate_epsilon(&u0, delta, &w).unwrap();
                assert!(
                    (est.epsilon - 2.0 * delta).abs() < 0.02 * 2.0 * delta,
                    "epsilon {} vs {}",
                    est.epsilon,
                    2.0 * delta
                );
            }
        }
        // delta -> 0 forces epsilon -> 0.
        let est = estimate_epsilon(&u0, 1e-4, &[0.0, 1.0]).unwrap();
        assert!(est.epsilon < 1e-3);
    }

    #[test]
    fn epsilon_independent_of_base_point() {
        let w = [0.0, 0.0, 1.0];
        let e1 = estimate_epsilon(&[1.0, 0.0, 0.0], 0.5, &w).unwrap();
        let s = 0.5f64.sin();
        let c = 0.5f64.cos();
        let e2 = estimate_epsilon(&[c, s, 0.0], 0.5, &w).unwrap();
        let rel = (e1.epsilon - e2.epsilon).abs() / e1.epsilon.max(1e-9);
        assert!(rel < 0.1, "{} vs {}", e1.epsilon, e2.epsilon);
    }

    #[test]
    fn cap_propagation_reaches_full_circle() {
        let u0 = [1.0, 0.0];
        let delta1 = 0.8;
        // epsilon_2(delta1/2) = 2 * 0.4 = 0.8; pick delta0 well below /6.
        let delta0 = 0.1;
        let omega0 = Cap::new(vec![0.0, 1.0], 0.9).unwrap();
        let opts = PropagateOptions { coverage_probes: 2000, ..Default::default() };
        let flow = cap_propagate(&omega0, &u0, delta1, delta0, &opts).unwrap();
        assert!(flow.reached_full_sphere);
        assert!(flow.steps.len() <= (std::f64::consts::PI / delta0).ceil() as usize);
        for step in &flow.steps {
            assert!(step.growth >= delta0 - 1e-12 || step.angle >= std::f64::consts::PI);
            assert_eq!(step.uncovered_probes, 0);
        }
        // Violating the smallness condition is rejected: epsilon_2(0.4)
        // is 0.8, so delta0 = 0.15 >= 0.8/6.
        let too_big = cap_propagate(&omega0, &u0, delta1, 0.15, &opts);
        assert!(matches!(too_big, Err(Error::PreconditionViolated { .. })));
    }

    fn parabola_patch(tau: f64, order: usize) -> (ComplexPatch, ShiftFrame) {
        let s: SurfaceHandle = Arc::new(fixtures::parabola());
        let frame = ShiftFrame::new(LatticePoint::new(vec![-73, -14])).unwrap();
        let bump = BumpSpec::centered(tau, 2, 0.3);
        let patch = build_patch(s, &frame.v0, tau, bump, &[order]).unwrap();
        (patch, frame)
    }

    #[test]
    fn mean_square_of_single_frequency_is_the_mass() {
        let (patch, frame) = parabola_patch(0.05, 24);
        let phi = Eigenfunction::new(
            2,
            5525,
            vec![(frame.xi0.clone(), Complex64::from(1.0))],
        )
        .unwrap();
        let ms = mean_square(&patch, &phi, &frame).unwrap();
        assert!((ms.value - patch.mass()).abs() <= ms.refinement_error + 1e-12);
        assert_relative_eq!(ms.value, patch.mass(), max_relative = 1e-6);
    }

    #[test]
    fn mean_square_monotone_in_leading_weight() {
        // Diagonal-dominant two-coefficient sweep: growing |a_xi0|^2 at
        // fixed partner grows the integral.
        let (patch, frame) = parabola_patch(0.05, 32);
        let partner = LatticePoint::new(vec![-74, -7]);
        let mut last = -1.0;
        for k in 1..=5 {
            let amp = k as f64;
            let phi = Eigenfunction::new(
                2,
                5525,
                vec![
                    (frame.xi0.clone(), Complex64::from(amp)),
                    (partner.clone(), Complex64::from(0.3)),
                ],
            )
            .unwrap();
            // Undo the normalization to keep the sweep monotone in the
            // unnormalized leading weight: scale by the norm.
            let scale = (amp * amp + 0.09).sqrt();
            let ms = mean_square(&patch, &phi, &frame).unwrap();
            let unnormalized = ms.value * scale * scale;
            assert!(unnormalized > last, "sweep {k}: {unnormalized} vs {last}");
            last = unnormalized;
        }
    }

    #[test]
    fn restriction_norm_examples() {
        // The geodesic vanisher is zero on its line.
        let phi = make_geodesic_vanisher(&LatticePoint::new(vec![1, 0]), 0.0, 1).unwrap();
        let line = SurfaceSampling::line_segment(&[0.0, 0.1], &[0.0, 0.9], 40);
        assert!(real_restriction_norm(&line, &phi) < 1e-24);
        // On a curved arc, random eigenfunctions keep a positive share of
        // their mass.
        let shell = enumerate_shell(2, 1105).unwrap();
        let arc = SurfaceSampling::circle_arc([0.5, 0.5], 0.23, 0.4, 2.1, 220);
        let mut min_ratio = f64::INFINITY;
        for seed in 0..10 {
            let phi = Eigenfunction::random(&shell, seed, 0, false).unwrap();
            let ratio = real_restriction_norm(&arc, &phi); // ||phi||^2 = 1
            min_ratio = min_ratio.min(ratio);
        }
        assert!(min_ratio > 1e-6, "min ratio {min_ratio}");
        // No eigenfunction vanishes on an irrational-slope segment: the
        // sup over the segment stays positive for every sampled phi.
        let slope = std::f64::consts::SQRT_2;
        let seg = SurfaceSampling::line_segment(&[0.1, 0.2], &[0.35, 0.2 + 0.25 * slope], 60);
        for seed in 0..20 {
            let phi = Eigenfunction::random(&shell, seed, 4, false).unwrap();
            assert!(restriction_sup(&seg, &phi) > 1e-6);
        }
    }

    #[test]
    fn base_case_single_frequency_reduces_to_mass() {
        let (patch, frame) = parabola_patch(0.05, 24);
        let b = base_case_bound(&patch, &frame, &frame.xi0.clone(), Complex64::from(0.8), None)
            .unwrap();
        assert_relative_eq!(b.constant, patch.mass(), max_relative = 1e-12);
        assert_relative_eq!(b.certified, 0.64 * patch.mass(), max_relative = 1e-12);
        assert_relative_eq!(b.direct, 0.64 * patch.mass(), max_relative = 1e-12);
    }

    #[test]
    fn base_case_certified_below_direct() {
        let (patch, frame) = parabola_patch(0.05, 48);
        let xi = LatticePoint::new(vec![-74, -7]);
        let xip = LatticePoint::new(vec![-71, -22]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let bc = base_case_bound(&patch, &frame, &xi, a, Some((&xip, b))).unwrap();
            assert!(
                bc.direct >= bc.certified - 1e-9,
                "direct {} < certified {}",
                bc.direct,
                bc.certified
            );
            assert!(bc.constant > 0.0);
        }
    }

    #[test]
    fn certificate_single_frequency() {
        let (patch, frame) = parabola_patch(0.05, 24);
        let phi =
            Eigenfunction::new(2, 5525, vec![(frame.xi0.clone(), Complex64::from(1.0))]).unwrap();
        let params = CertificateParams {
            cluster: ClusterParams::with_default_delta2(2, 2.0).unwrap(),
            d_threshold: Some(4.0 * frame.lambda()),
        };
        let cert = lower_bound_certificate(&patch, &phi, &frame, &params).unwrap();
        assert_eq!(cert.short_support_size, 1);
        assert_relative_eq!(cert.constant, patch.mass(), max_relative = 1e-12);
        assert!(cert.offdiag_bound == 0.0);
        assert!(cert.verdict > 0.0);
        // Soundness at the acceptance tolerance (the verdict and the
        // mean square live on different grid refinements).
        let ms = mean_square(&patch, &phi, &frame).unwrap();
        assert!(ms.value >= cert.verdict - 1e-6);
    }

    #[test]
    fn certificate_soundness_on_random_eigenfunctions() {
        let (patch, frame) = parabola_patch(0.05, 24);
        let shell = enumerate_shell(2, 5525).unwrap();
        for seed in 0..5 {
            let phi = Eigenfunction::random(&shell, seed, 6, false).unwrap();
            let params = CertificateParams {
                cluster: ClusterParams::with_default_delta2(2, 3.0).unwrap(),
                d_threshold: Some(4.0 * frame.lambda()),
            };
            let cert = lower_bound_certificate(&patch, &phi, &frame, &params).unwrap();
            let ms = mean_square(&patch, &phi, &frame).unwrap();
            assert!(
                ms.value >= cert.verdict - 1e-6,
                "seed {seed}: mean square {} < verdict {}",
                ms.value,
                cert.verdict
            );
            // Leaves never hold more than two frequencies.
            fn check(node: &ClusterTreeNode) {
                if node.children.is_empty() {
                    assert!(node.frequencies.len() <= 2);
                } else {
                    node.children.iter().for_each(check);
                }
            }
            check(&cert.cluster_tree);
        }
    }
}
