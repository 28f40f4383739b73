//! Real-analytic expressions with mechanical complex evaluation and
//! forward-mode differentiation to second order.
//!
//! The expression class is compositions of `{+, -, *, scalar, x_i, exp,
//! sin, cos, integer powers}` with real coefficients. Such an expression
//! extends holomorphically to all of `C^(d-1)` by evaluating the same tree
//! at complex arguments, and real coefficients force `F(conj z) = conj
//! F(z)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

/// An expression tree in `nvars` variables `x_0 .. x_{nvars-1}`.
#[derive(Clone)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Powi(Arc<Expr>, u32),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Arc::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Arc::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Arc::new(self))
    }

    pub fn powi(self, n: u32) -> Self {
        Expr::Powi(Arc::new(self), n)
    }

    pub fn scale(self, c: f64) -> Self {
        Expr::Mul(Arc::new(Expr::Const(c)), Arc::new(self))
    }

    /// Largest variable index used, plus one.
    pub fn nvars(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.nvars().max(b.nvars()),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.nvars(),
            Expr::Powi(a, _) => a.nvars(),
        }
    }

    /// Plain evaluation at a complex point.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        match self {
            Expr::Const(c) => Complex64::new(*c, 0.0),
            Expr::Var(i) => z[*i],
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Neg(a) => -a.eval(z),
            Expr::Sin(a) => a.eval(z).sin(),
            Expr::Cos(a) => a.eval(z).cos(),
            Expr::Exp(a) => a.eval(z).exp(),
            Expr::Powi(a, n) => a.eval(z).powu(*n),
        }
    }

    /// Evaluation at a real point (imaginary parts zero).
    pub fn eval_real(&self, x: &[f64]) -> f64 {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.eval(&z).re
    }

    /// Value, gradient and Hessian at a complex point by forward-mode
    /// propagation of second-order jets.
    pub fn jet2(&self, z: &[Complex64]) -> Jet2 {
        let n = z.len();
        match self {
            Expr::Const(c) => Jet2::constant(Complex64::new(*c, 0.0), n),
            Expr::Var(i) => Jet2::variable(z[*i], *i, n),
            Expr::Add(a, b) => a.jet2(z).add(&b.jet2(z)),
            Expr::Sub(a, b) => a.jet2(z).sub(&b.jet2(z)),
            Expr::Mul(a, b) => a.jet2(z).mul(&b.jet2(z)),
            Expr::Neg(a) => a.jet2(z).neg(),
            Expr::Sin(a) => a.jet2(z).chain(|v| (v.sin(), v.cos(), -v.sin())),
            Expr::Cos(a) => a.jet2(z).chain(|v| (v.cos(), -v.sin(), -v.cos())),
            Expr::Exp(a) => a.jet2(z).chain(|v| {
                let e = v.exp();
                (e, e, e)
            }),
            Expr::Powi(a, nn) => {
                let n_ = *nn;
                a.jet2(z).chain(move |v| {
                    let f = v.powu(n_);
                    let df = if n_ >= 1 { Complex64::from(n_ as f64) * v.powu(n_ - 1) } else { Complex64::from(0.0) };
                    let ddf = if n_ >= 2 {
                        Complex64::from((n_ * (n_ - 1)) as f64) * v.powu(n_ - 2)
                    } else {
                        Complex64::from(0.0)
                    };
                    (f, df, ddf)
                })
            }
        }
    }

    /// Value and gradient only (first-order jet), cheaper than [`Self::jet2`].
    pub fn jet1(&self, z: &[Complex64]) -> (Complex64, Vec<Complex64>) {
        let n = z.len();
        match self {
            Expr::Const(c) => (Complex64::new(*c, 0.0), vec![Complex64::from(0.0); n]),
            Expr::Var(i) => {
                let mut g = vec![Complex64::from(0.0); n];
                g[*i] = Complex64::from(1.0);
                (z[*i], g)
            }
            Expr::Add(a, b) => {
                let (va, ga) = a.jet1(z);
                let (vb, gb) = b.jet1(z);
                (va + vb, ga.iter().zip(&gb).map(|(x, y)| x + y).collect())
            }
            Expr::Sub(a, b) => {
                let (va, ga) = a.jet1(z);
                let (vb, gb) = b.jet1(z);
                (va - vb, ga.iter().zip(&gb).map(|(x, y)| x - y).collect())
            }
            Expr::Mul(a, b) => {
                let (va, ga) = a.jet1(z);
                let (vb, gb) = b.jet1(z);
                (va * vb, ga.iter().zip(&gb).map(|(x, y)| x * vb + va * y).collect())
            }
            Expr::Neg(a) => {
                let (va, ga) = a.jet1(z);
                (-va, ga.iter().map(|x| -x).collect())
            }
            Expr::Sin(a) => {
                let (va, ga) = a.jet1(z);
                let c = va.cos();
                (va.sin(), ga.iter().map(|x| x * c).collect())
            }
            Expr::Cos(a) => {
                let (va, ga) = a.jet1(z);
                let s = -va.sin();
                (va.cos(), ga.iter().map(|x| x * s).collect())
            }
            Expr::Exp(a) => {
                let (va, ga) = a.jet1(z);
                let e = va.exp();
                (e, ga.iter().map(|x| x * e).collect())
            }
            Expr::Powi(a, n_) => {
                let (va, ga) = a.jet1(z);
                let df = if *n_ >= 1 {
                    Complex64::from(*n_ as f64) * va.powu(*n_ - 1)
                } else {
                    Complex64::from(0.0)
                };
                (va.powu(*n_), ga.iter().map(|x| x * df).collect())
            }
        }
    }

    /// Complex gradient `(dF/dz_j)_j`.
    pub fn gradient(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.jet2(z).grad
    }

    /// Complex Hessian `(d^2 F / dz_i dz_j)`.
    pub fn hessian(&self, z: &[Complex64]) -> Vec<Vec<Complex64>> {
        self.jet2(z).hess
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Arc::new(self), Arc::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Arc::new(self), Arc::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Arc::new(self), Arc::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Arc::new(self))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Expr::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Expr::Mul(a, b) => write!(f, "({a:?} * {b:?})"),
            Expr::Neg(a) => write!(f, "-({a:?})"),
            Expr::Sin(a) => write!(f, "sin({a:?})"),
            Expr::Cos(a) => write!(f, "cos({a:?})"),
            Expr::Exp(a) => write!(f, "exp({a:?})"),
            Expr::Powi(a, n) => write!(f, "({a:?})^{n}"),
        }
    }
}

/// Second-order jet: value, gradient and full symmetric Hessian.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub val: Complex64,
    pub grad: Vec<Complex64>,
    pub hess: Vec<Vec<Complex64>>,
}

impl Jet2 {
    fn constant(v: Complex64, n: usize) -> Self {
        Self {
            val: v,
            grad: vec![Complex64::from(0.0); n],
            hess: vec![vec![Complex64::from(0.0); n]; n],
        }
    }

    fn variable(v: Complex64, i: usize, n: usize) -> Self {
        let mut j = Self::constant(v, n);
        j.grad[i] = Complex64::from(1.0);
        j
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.grad.len();
        let mut out = Self::constant(self.val + o.val, n);
        for i in 0..n {
            out.grad[i] = self.grad[i] + o.grad[i];
            for j in 0..n {
                out.hess[i][j] = self.hess[i][j] + o.hess[i][j];
            }
        }
        out
    }

    fn sub(&self, o: &Self) -> Self {
        let n = self.grad.len();
        let mut out = Self::constant(self.val - o.val, n);
        for i in 0..n {
            out.grad[i] = self.grad[i] - o.grad[i];
            for j in 0..n {
                out.hess[i][j] = self.hess[i][j] - o.hess[i][j];
            }
        }
        out
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.grad.len();
        let mut out = Self::constant(self.val * o.val, n);
        for i in 0..n {
            out.grad[i] = self.grad[i] * o.val + self.val * o.grad[i];
            for j in 0..n {
                out.hess[i][j] = self.hess[i][j] * o.val
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.val * o.hess[i][j];
            }
        }
        out
    }

    fn neg(&self) -> Self {
        let n = self.grad.len();
        let mut out = Self::constant(-self.val, n);
        for i in 0..n {
            out.grad[i] = -self.grad[i];
            for j in 0..n {
                out.hess[i][j] = -self.hess[i][j];
            }
        }
        out
    }

    /// Unary chain rule from `(f, f', f'')` at the inner value.
    fn chain(&self, f: impl Fn(Complex64) -> (Complex64, Complex64, Complex64)) -> Self {
        let (fv, dfv, ddfv) = f(self.val);
        let n = self.grad.len();
        let mut out = Self::constant(fv, n);
        for i in 0..n {
            out.grad[i] = dfv * self.grad[i];
            for j in 0..n {
                out.hess[i][j] = ddfv * self.grad[i] * self.grad[j] + dfv * self.hess[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paraboloid2() -> Expr {
        (Expr::var(0).powi(2) + Expr::var(1).powi(2)).scale(0.5)
    }

    /// Central finite-difference oracle for the complex gradient.
    fn fd_gradient(e: &Expr, z: &[Complex64], h: f64) -> Vec<Complex64> {
        (0..z.len())
            .map(|i| {
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += Complex64::from(h);
                zm[i] -= Complex64::from(h);
                (e.eval(&zp) - e.eval(&zm)) / Complex64::from(2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_and_hessian_match_hand_values() {
        let e = paraboloid2();
        let z = [Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.0)];
        let j = e.jet2(&z);
        assert_relative_eq!(j.val.re, 0.5 * (0.09 + 0.04), epsilon = 1e-15);
        assert_relative_eq!(j.grad[0].re, 0.3, epsilon = 1e-15);
        assert_relative_eq!(j.grad[1].re, -0.2, epsilon = 1e-15);
        assert_relative_eq!(j.hess[0][0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(j.hess[0][1].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jets_match_finite_differences() {
        // exp/sin/cos composition, complex arguments.
        let e = (Expr::var(0) * Expr::var(1)).sin() + (Expr::var(0).powi(3)).scale(0.25)
            + (Expr::var(1).scale(0.5)).exp()
            + (Expr::var(0) - Expr::var(1)).cos();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = [
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3)),
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3)),
            ];
            let j = e.jet2(&z);
            let fd = fd_gradient(&e, &z, 1e-6);
            for i in 0..2 {
                assert!((j.grad[i] - fd[i]).norm() < 1e-8, "grad {i}");
            }
            // Hessian row i = gradient of dF/dz_i; reuse the jet gradient
            // under finite differences.
            for i in 0..2 {
                for k in 0..2 {
                    let mut zp = z.to_vec();
                    let mut zm = z.to_vec();
                    zp[k] += Complex64::from(1e-5);
                    zm[k] -= Complex64::from(1e-5);
                    let hp = e.jet2(&zp).grad[i];
                    let hm = e.jet2(&zm).grad[i];
                    let fd2 = (hp - hm) / Complex64::from(2e-5);
                    assert!((j.hess[i][k] - fd2).norm() < 1e-7, "hess {i}{k}");
                }
            }
        }
    }

    #[test]
    fn real_coefficients_give_conjugate_symmetry() {
        let e = (Expr::var(0).powi(2) - Expr::var(1)).exp() + Expr::var(1).sin();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let z = [
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)),
            ];
            let zc: Vec<Complex64> = z.iter().map(|w| w.conj()).collect();
            let diff = (e.eval(&zc) - e.eval(&z).conj()).norm();
            assert!(diff < 1e-10, "F(conj z) = conj F(z), diff {diff}");
        }
    }

    #[test]
    fn cauchy_riemann_residuals_are_small() {
        // Holomorphy check: dF/dx = -i dF/dy by centered differences.
        let e = (Expr::var(0) * Expr::var(1)).cos() + Expr::var(0).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-5;
        for _ in 0..100 {
            let z = [
                Complex64::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)),
                Complex64::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)),
            ];
            for i in 0..2 {
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += Complex64::from(h);
                zm[i] -= Complex64::from(h);
                let ddx = (e.eval(&zp) - e.eval(&zm)) / Complex64::from(2.0 * h);
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += Complex64::new(0.0, h);
                zm[i] -= Complex64::new(0.0, h);
                let ddy = (e.eval(&zp) - e.eval(&zm)) / Complex64::from(2.0 * h);
                let residual = (ddx - ddy / Complex64::i()).norm();
                assert!(residual < 1e-6, "CR residual {residual}");
            }
        }
    }
}

