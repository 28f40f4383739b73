//! Named surface and eigenfunction fixtures shared by experiments, the
//! CLI and the test suites.

use std::sync::Arc;

use num_complex::Complex64;

use crate::eigenfun::{make_cylinder, Eigenfunction};
use crate::error::Result;
use crate::expr::Expr;
use crate::lattice::LatticePoint;
use crate::surface::{AnalyticGraph, ComplexSurface, NodalGraph};

/// `f(x) = x^2 / 2` in the plane (`d = 2`), domain radius 0.3.
pub fn parabola() -> AnalyticGraph {
    AnalyticGraph::new(2, Expr::var(0).powi(2).scale(0.5), 0.3).unwrap()
}

/// `f(x) = |x|^2 / 2` in ambient dimension `d`, domain radius 0.3.
pub fn paraboloid(d: usize) -> AnalyticGraph {
    let mut f = Expr::var(0).powi(2);
    for i in 1..d - 1 {
        f = f + Expr::var(i).powi(2);
    }
    AnalyticGraph::new(d, f.scale(0.5), 0.3).unwrap()
}

/// `f(x) = (x_1^2 - x_2^2) / 2` in `d = 3`.
pub fn saddle() -> AnalyticGraph {
    let f = (Expr::var(0).powi(2) - Expr::var(1).powi(2)).scale(0.5);
    AnalyticGraph::new(3, f, 0.3).unwrap()
}

/// `f(x) = 0.15 exp(x_1) + 0.1 x_2^2` in `d = 3`: positive curvature with
/// an exponential factor in the expression class.
pub fn exp_graph() -> AnalyticGraph {
    let f = Expr::var(0).exp().scale(0.15) + Expr::var(1).powi(2).scale(0.1);
    AnalyticGraph::new(3, f, 0.3).unwrap()
}

/// Affine graph `f(x) = <b, x>`.
pub fn linear_graph(d: usize, delta: f64, b: &[f64]) -> AnalyticGraph {
    let mut f = Expr::constant(0.0);
    for (i, &c) in b.iter().enumerate() {
        f = f + Expr::var(i).scale(c);
    }
    AnalyticGraph::new(d, f, delta).unwrap()
}

/// The three curved fixtures of the geometry suite.
pub fn curvature_suite() -> Vec<Arc<dyn ComplexSurface>> {
    vec![Arc::new(paraboloid(3)), Arc::new(saddle()), Arc::new(exp_graph())]
}

/// A real-valued eigenfunction on the shell `(2, 25)` with a genuinely
/// curved nodal curve, together with a base point `(0, y*)` on that curve
/// where the curve is a graph `y = g(x)` with `g'' != 0`.
pub fn curved_nodal_fixture() -> (Eigenfunction, [f64; 2]) {
    // cos(2 pi (3x + 4y)) + 0.8 cos(2 pi (4x + 3y)) + 0.6 sin(2 pi 5x)
    let half = Complex64::from(0.5);
    let coeffs = vec![
        (LatticePoint::new(vec![3, 4]), half),
        (LatticePoint::new(vec![-3, -4]), half),
        (LatticePoint::new(vec![4, 3]), half * Complex64::from(0.8)),
        (LatticePoint::new(vec![-4, -3]), half * Complex64::from(0.8)),
        (LatticePoint::new(vec![5, 0]), Complex64::new(0.0, -0.3)),
        (LatticePoint::new(vec![-5, 0]), Complex64::new(0.0, 0.3)),
    ];
    let phi = Eigenfunction::new(2, 25, coeffs).unwrap();
    // At x = 0 the section y -> phi(0, y) changes sign on (0, 0.125);
    // bisect for the root.
    let f = |y: f64| phi.evaluate(&[0.0, y]).re;
    let (mut a, mut b) = (0.0, 0.125);
    assert!(f(a) > 0.0 && f(b) < 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if f(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    (phi, [0.0, 0.5 * (a + b)])
}

/// Base point of the cylinder fixture: the point of the nodal curve of
/// [`curved_nodal_fixture`] where the graph slope `g' = -phi_x/phi_y`
/// equals exactly `-3/4`. At that slope the directions
/// `v0 = (4, n, -3)/sqrt(25 + n^2)` are tangent to the cylinder for every
/// `n`, i.e. `xi0 = (-4, -n, 3)` is an admissible frame on the matched
/// shell.
pub fn cylinder_base() -> (Eigenfunction, [f64; 2]) {
    let (phi, base0) = curved_nodal_fixture();
    let grad = |x: f64, y: f64| -> (f64, f64) {
        let g = phi.gradient_complex(&[Complex64::from(x), Complex64::from(y)]);
        (g[0].re, g[1].re)
    };
    let trace = |x: f64, mut y: f64| -> f64 {
        for _ in 0..60 {
            let v = phi.evaluate(&[x, y]).re;
            let (_, fy) = grad(x, y);
            let step = v / fy;
            y -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        y
    };
    let slope = |x: f64, y: f64| -> f64 {
        let (fx, fy) = grad(x, y);
        -fx / fy
    };
    // The slope decreases through -3/4 on this x-window of the branch.
    let (mut lo, mut hi) = (0.0f64, 0.045f64);
    let mut y = base0[1];
    let mut slo = slope(lo, trace(lo, y)) + 0.75;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        y = trace(mid, y);
        let sm = slope(mid, y) + 0.75;
        if (sm > 0.0) == (slo > 0.0) {
            lo = mid;
            slo = sm;
        } else {
            hi = mid;
        }
    }
    let x_star = 0.5 * (lo + hi);
    let y_star = trace(x_star, y);
    (phi, [x_star, y_star])
}

/// The cylinder fixture: the hypersurface `S0 x S^1` in `T^3` over the
/// curved nodal piece `S0` of [`curved_nodal_fixture`], presented as a
/// graph in permuted coordinates `(x, z, y)`, together with the matching
/// eigenfunction `phi0(x, y) cos(2 pi n z)` translated to those
/// coordinates and the canonical admissible frame `xi0 = (-4, -n, 3)`.
/// The eigenfunction vanishes identically on the graph.
pub fn cylinder_fixture(
    n: u32,
) -> Result<(NodalGraph, Eigenfunction, crate::eigenfun::ShiftFrame)> {
    let (phi0, base) = cylinder_base();
    let graph = NodalGraph::from_eigenfunction(&phi0, base, 0.025, true)?;
    let phi_n = make_cylinder(&phi0, n)?;
    // Parameter coordinates are (x, z) and the graphed coordinate is y:
    // relabel (x, y, z) -> (x, z, y), then translate the base to the
    // parameter origin.
    let permuted = phi_n.permute_coords(&[0, 2, 1])?;
    let matched = permuted.translate(&[base[0], 0.0, base[1]])?;
    let frame =
        crate::eigenfun::ShiftFrame::new(LatticePoint::new(vec![-4, -(n as i64), 3]))?;
    Ok((graph, matched, frame))
}
