//! Smooth functions of the patch parameters `(u, v)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::numerics::diff1;
use crate::scalar::{default_step, lit, Real};

pub type PlaneFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Scaled step for differentiation in the parameters at `(u, v)`.
pub fn param_step<T: Real>(h: T, u: T, v: T) -> T {
    h * T::one().max(u.abs()).max(v.abs())
}

/// Canonical compactly supported test function
/// `amp * exp(-1 / (1 - rho^2))` with `rho^2 = ((u - cu)/ru)^2 + ((v - cv)/rv)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump<T> {
    pub center: (T, T),
    pub radii: (T, T),
    pub amp: T,
}

impl<T: Real> Bump<T> {
    pub fn new(center: (T, T), radii: (T, T), amp: T) -> Result<Self> {
        if !(radii.0 > T::zero() && radii.1 > T::zero()) {
            return Err(CalcError::InvalidArgument("bump radii must be positive".into()));
        }
        Ok(Self { center, radii, amp })
    }

    fn rho2(&self, u: T, v: T) -> (T, T, T) {
        let a = (u - self.center.0) / self.radii.0;
        let b = (v - self.center.1) / self.radii.1;
        (a * a + b * b, a, b)
    }

    pub fn eval(&self, u: T, v: T) -> T {
        let (r2, _, _) = self.rho2(u, v);
        if r2 >= T::one() {
            return T::zero();
        }
        self.amp * (-T::one() / (T::one() - r2)).exp()
    }

    /// Exact gradient `(d/du, d/dv)`.
    pub fn gradient(&self, u: T, v: T) -> (T, T) {
        let (r2, a, b) = self.rho2(u, v);
        if r2 >= T::one() {
            return (T::zero(), T::zero());
        }
        let s = T::one() - r2;
        let f = self.amp * (-T::one() / s).exp();
        // d/d(r2) of exp(-1/(1-r2)) is -exp(..)/(1-r2)^2
        let g = -f / (s * s);
        let two: T = lit(2.0);
        (g * two * a / self.radii.0, g * two * b / self.radii.1)
    }

    /// Whether the closed support lies inside `[u0,u1] x [v0,v1]` with the given margin.
    pub fn inside(&self, domain: [T; 4], margin: T) -> bool {
        self.center.0 - self.radii.0 >= domain[0] + margin
            && self.center.0 + self.radii.0 <= domain[1] - margin
            && self.center.1 - self.radii.1 >= domain[2] + margin
            && self.center.1 + self.radii.1 <= domain[3] - margin
    }
}

/// Function of `(u, v)`: an exact expression, a bump, or an arbitrary closure.
#[derive(Clone)]
pub enum SurfaceFunction<T> {
    Expr(Expr<T>),
    Bump(Bump<T>),
    Closure(PlaneFn<T>),
}

impl<T> fmt::Debug for SurfaceFunction<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expr(e) => f.debug_tuple("Expr").field(e).finish(),
            Self::Bump(b) => f.debug_tuple("Bump").field(b).finish(),
            Self::Closure(_) => f.write_str("Closure(..)"),
        }
    }
}

impl<T: Real> SurfaceFunction<T> {
    pub fn constant(c: T) -> Self {
        Self::Expr(Expr::constant(2, c))
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn from_fn(f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        Self::Closure(Arc::new(f))
    }

    /// Parses an expression in `u` and `v`.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::Expr(Expr::parse(src, &["u", "v"])?))
    }

    pub fn eval(&self, u: T, v: T) -> T {
        match self {
            Self::Expr(e) => e.eval(&[u, v]),
            Self::Bump(b) => b.eval(u, v),
            Self::Closure(f) => f(u, v),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Expr(e) => e.num.terms().is_empty(),
            Self::Bump(b) => b.amp == T::zero(),
            Self::Closure(_) => false,
        }
    }

    /// Partial derivative in `u` (`var = 0`) or `v` (`var = 1`).
    pub fn partial(&self, var: usize) -> Self {
        assert!(var < 2, "surface functions depend on (u, v) only");
        match self {
            Self::Expr(e) => Self::Expr(e.derivative(var)),
            Self::Bump(b) => {
                let b = *b;
                Self::from_fn(move |u, v| {
                    let g = b.gradient(u, v);
                    if var == 0 {
                        g.0
                    } else {
                        g.1
                    }
                })
            }
            Self::Closure(f) => {
                let f = f.clone();
                Self::from_fn(move |u, v| {
                    let h = param_step(default_step::<T>(), u, v);
                    let d = if var == 0 {
                        diff1(|s| Ok(f(u + s, v)), h)
                    } else {
                        diff1(|s| Ok(f(u, v + s)), h)
                    };
                    d.unwrap_or_else(|_| T::nan())
                })
            }
        }
    }

    /// `(f_u, f_v)` at a point.
    pub fn gradient(&self, u: T, v: T) -> (T, T) {
        match self {
            Self::Expr(e) => (e.derivative(0).eval(&[u, v]), e.derivative(1).eval(&[u, v])),
            Self::Bump(b) => b.gradient(u, v),
            Self::Closure(f) => {
                let h = param_step(default_step::<T>(), u, v);
                let du = diff1(|s| Ok(f(u + s, v)), h).unwrap_or_else(|_| T::nan());
                let dv = diff1(|s| Ok(f(u, v + s)), h).unwrap_or_else(|_| T::nan());
                (du, dv)
            }
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        if let (Self::Expr(a), Self::Expr(b)) = (self, other) {
            return Self::Expr(a.mul(b));
        }
        let (a, b) = (self.clone(), other.clone());
        Self::from_fn(move |u, v| a.eval(u, v) * b.eval(u, v))
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        if let (Self::Expr(a), Self::Expr(b)) = (self, other) {
            return Self::Expr(a.add(b));
        }
        let (a, b) = (self.clone(), other.clone());
        Self::from_fn(move |u, v| a.eval(u, v) + b.eval(u, v))
    }

    pub fn scale(&self, c: T) -> Self {
        match self {
            Self::Expr(e) => Self::Expr(e.scale(c)),
            Self::Bump(b) => Self::Bump(Bump { amp: b.amp * c, ..*b }),
            Self::Closure(f) => {
                let f = f.clone();
                Self::from_fn(move |u, v| c * f(u, v))
            }
        }
    }
}
