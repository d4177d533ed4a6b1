//! Horizontal derivatives of ambient scalar fields.
//!
//! Fields are evaluated in exponential coordinates. Derivatives along the frame
//! are obtained from the coordinate gradient and Hessian, which come either from
//! analytic callbacks or from Richardson-refined central differences.

use std::fmt;
use std::sync::Arc;

use crate::carnot_group::{GroupKind, StratifiedGroup};
use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::numerics::{diff1, diff2, finite};
use crate::scalar::{default_step, dot, lit, max_abs, nested_step, Real};

pub type PointFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Scalar field on a group, with optional exact first and second coordinate derivatives.
#[derive(Clone)]
pub struct ScalarField<T> {
    dim: usize,
    eval: PointFn<T>,
    gradient: Option<VectorFn<T>>,
    hessian: Option<VectorFn<T>>,
}

impl<T> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(dim: usize, eval: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self { dim, eval: Arc::new(eval), gradient: None, hessian: None }
    }

    /// Attaches an exact coordinate gradient after checking it against central differences at `samples`.
    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        samples: &[Vec<T>],
    ) -> Result<Self> {
        let gradient: VectorFn<T> = Arc::new(gradient);
        let fd = DerivativeEngine::finite_difference();
        for g in samples {
            let exact = gradient(g);
            let approx = coordinate_gradient(&self, g, &fd)?;
            self.check_callback("gradient", g, &exact, &approx)?;
        }
        self.gradient = Some(gradient);
        Ok(self)
    }

    /// Attaches an exact row-major coordinate Hessian after checking it at `samples`.
    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        samples: &[Vec<T>],
    ) -> Result<Self> {
        let hessian: VectorFn<T> = Arc::new(hessian);
        let fd = DerivativeEngine::finite_difference();
        for g in samples {
            let exact = hessian(g);
            let approx = coordinate_hessian(&self, g, &fd)?;
            self.check_callback("hessian", g, &exact, &approx)?;
        }
        self.hessian = Some(hessian);
        Ok(self)
    }

    fn check_callback(&self, what: &str, g: &[T], exact: &[T], approx: &[T]) -> Result<()> {
        let expected_len = if what == "gradient" { self.dim } else { self.dim * self.dim };
        if exact.len() != expected_len {
            return Err(CalcError::InvalidArgument(format!(
                "{what} callback returned {} entries, expected {expected_len}",
                exact.len()
            )));
        }
        let scale = T::one().max(max_abs(approx));
        let tol = lit::<T>(1e-5) * scale;
        if exact.iter().zip(approx).any(|(&a, &b)| !((a - b).abs() <= tol)) {
            return Err(CalcError::InvalidArgument(format!(
                "{what} callback disagrees with finite differences at {g:?}"
            )));
        }
        Ok(())
    }

    /// Field given by a rational expression in the coordinates, with exact derivatives.
    pub fn from_expr(expr: Expr<T>) -> Self {
        let n = expr.nvars();
        let grad: Vec<Expr<T>> = (0..n).map(|a| expr.derivative(a)).collect();
        let hess: Vec<Expr<T>> =
            (0..n * n).map(|k| grad[k / n].derivative(k % n)).collect();
        let e = expr.clone();
        Self {
            dim: n,
            eval: Arc::new(move |g| e.eval(g)),
            gradient: Some(Arc::new(move |g| grad.iter().map(|d| d.eval(g)).collect())),
            hessian: Some(Arc::new(move |g| hess.iter().map(|d| d.eval(g)).collect())),
        }
    }

    /// Coordinate function `g -> g[idx]`.
    pub fn coordinate(dim: usize, idx: usize) -> Result<Self> {
        if idx >= dim {
            return Err(CalcError::IndexOutOfRange(format!("coordinate {idx} in dimension {dim}")));
        }
        Ok(Self {
            dim,
            eval: Arc::new(move |g| g[idx]),
            gradient: Some(Arc::new(move |g| {
                let mut e = vec![T::zero(); g.len()];
                e[idx] = T::one();
                e
            })),
            hessian: Some(Arc::new(move |g| vec![T::zero(); g.len() * g.len()])),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    fn check_dim(&self, g: &[T]) -> Result<()> {
        if g.len() != self.dim {
            return Err(CalcError::InvalidArgument(format!(
                "field of dimension {} evaluated at a point with {} coordinates",
                self.dim,
                g.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, g: &[T]) -> Result<T> {
        self.check_dim(g)?;
        finite((self.eval)(g), "field value")
    }
}

/// How derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Use the field's callbacks; missing callbacks fall back to finite differences.
    Analytic,
    FiniteDifference,
}

/// Derivative settings. Steps are relative to `max(1, |g|_inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEngine<T> {
    pub mode: DerivativeMode,
    pub h1: T,
    pub h2: T,
}

impl<T: Real> DerivativeEngine<T> {
    pub fn new(mode: DerivativeMode, h1: T, h2: T) -> Result<Self> {
        if !(h1 > T::zero() && h2 > T::zero()) || !h1.is_finite() || !h2.is_finite() {
            return Err(CalcError::InvalidArgument("derivative steps must be positive".into()));
        }
        Ok(Self { mode, h1, h2 })
    }

    pub fn finite_difference() -> Self {
        Self { mode: DerivativeMode::FiniteDifference, h1: default_step(), h2: nested_step() }
    }

    pub fn analytic() -> Self {
        Self { mode: DerivativeMode::Analytic, ..Self::finite_difference() }
    }
}

impl<T: Real> Default for DerivativeEngine<T> {
    fn default() -> Self {
        Self::analytic()
    }
}

/// Step scaled to the size of the point.
pub fn scaled_step<T: Real>(h: T, g: &[T]) -> T {
    h * T::one().max(max_abs(g))
}

/// Derivative at `g` of `f` along the coordinate vector `dir`.
pub fn directional<T: Real, F>(f: F, g: &[T], dir: &[T], h: T) -> Result<T>
where
    F: Fn(&[T]) -> Result<T>,
{
    let mut buf = g.to_vec();
    diff1(
        |s| {
            for (b, (&x, &d)) in buf.iter_mut().zip(g.iter().zip(dir)) {
                *b = x + s * d;
            }
            f(&buf)
        },
        scaled_step(h, g),
    )
}

/// `X_i f` at `g` for an arbitrary closure, by differentiation along the frame column.
pub fn frame_derivative<T: Real, F>(group: &StratifiedGroup<T>, i: usize, f: F, g: &[T], h: T) -> Result<T>
where
    F: Fn(&[T]) -> Result<T>,
{
    check_index(group, i)?;
    directional(f, g, &group.frame_column(g, i), h)
}

fn check_index<T: Real>(group: &StratifiedGroup<T>, i: usize) -> Result<()> {
    if i >= group.dim() {
        return Err(CalcError::IndexOutOfRange(format!("frame index {i} (N = {})", group.dim())));
    }
    Ok(())
}

/// Coordinate gradient of `f` at `g`.
pub fn coordinate_gradient<T: Real>(f: &ScalarField<T>, g: &[T], engine: &DerivativeEngine<T>) -> Result<Vec<T>> {
    f.check_dim(g)?;
    if engine.mode == DerivativeMode::Analytic {
        if let Some(grad) = &f.gradient {
            let out = grad(g);
            for &x in &out {
                finite(x, "gradient")?;
            }
            return Ok(out);
        }
    }
    let n = g.len();
    let h = scaled_step(engine.h1, g);
    let mut buf = g.to_vec();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let d = diff1(
            |s| {
                buf[a] = g[a] + s;
                f.eval(&buf)
            },
            h,
        )?;
        buf[a] = g[a];
        out.push(d);
    }
    Ok(out)
}

/// Row-major coordinate Hessian of `f` at `g`.
pub fn coordinate_hessian<T: Real>(f: &ScalarField<T>, g: &[T], engine: &DerivativeEngine<T>) -> Result<Vec<T>> {
    f.check_dim(g)?;
    if engine.mode == DerivativeMode::Analytic {
        if let Some(hess) = &f.hessian {
            let out = hess(g);
            for &x in &out {
                finite(x, "hessian")?;
            }
            return Ok(out);
        }
    }
    let n = g.len();
    let h = scaled_step(engine.h2, g);
    let mut buf = g.to_vec();
    let mut second = |da: &[(usize, T)]| -> Result<T> {
        diff2(
            |s| {
                buf.copy_from_slice(g);
                for &(a, w) in da {
                    buf[a] = g[a] + w * s;
                }
                f.eval(&buf)
            },
            h,
        )
    };
    let mut out = vec![T::zero(); n * n];
    for a in 0..n {
        out[a * n + a] = second(&[(a, T::one())])?;
    }
    // Polarisation: f_ab = (f_vv - f_ww) / 4 with v = e_a + e_b, w = e_a - e_b.
    let quarter: T = lit(0.25);
    for a in 0..n {
        for b in a + 1..n {
            let plus = second(&[(a, T::one()), (b, T::one())])?;
            let minus = second(&[(a, T::one()), (b, -T::one())])?;
            let v = quarter * (plus - minus);
            out[a * n + b] = v;
            out[b * n + a] = v;
        }
    }
    Ok(out)
}

/// `X_i f(g)` for frame field `i` (0-based over the whole frame).
pub fn x_derivative<T: Real>(
    group: &StratifiedGroup<T>,
    f: &ScalarField<T>,
    i: usize,
    g: &[T],
    engine: &DerivativeEngine<T>,
) -> Result<T> {
    check_index(group, i)?;
    let grad = coordinate_gradient(f, g, engine)?;
    Ok(dot(&group.frame_column(g, i), &grad))
}

/// Horizontal gradient, symmetrised horizontal Hessian, sub-Laplacian and infinity-Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalJet<T> {
    pub grad_h: Vec<T>,
    /// Row-major `m x m`.
    pub hess_h: Vec<T>,
    pub lap_h: T,
    pub inf_h: T,
}

impl<T: Real> HorizontalJet<T> {
    pub fn hess(&self, i: usize, j: usize) -> T {
        self.hess_h[i * self.grad_h.len() + j]
    }
}

pub fn horizontal_jet<T: Real>(
    group: &StratifiedGroup<T>,
    f: &ScalarField<T>,
    g: &[T],
    engine: &DerivativeEngine<T>,
) -> Result<HorizontalJet<T>> {
    let n = group.dim();
    let m = group.horizontal_dim();
    let grad = coordinate_gradient(f, g, engine)?;
    let hess = coordinate_hessian(f, g, engine)?;
    let cols: Vec<Vec<T>> = (0..m).map(|i| group.frame_column(g, i)).collect();
    let grad_h: Vec<T> = cols.iter().map(|c| dot(c, &grad)).collect();
    // X_i X_j f = X_i^T H X_j + (D_{X_i} X_j) . grad f; the first term is already symmetric.
    let half: T = lit(0.5);
    let mut hess_h = vec![T::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let mut quad = T::zero();
            for a in 0..n {
                for b in 0..n {
                    quad = quad + cols[i][a] * hess[a * n + b] * cols[j][b];
                }
            }
            let dij = group.frame_column_derivative(g, &cols[i], j);
            let dji = group.frame_column_derivative(g, &cols[j], i);
            let drift = half * (dot(&dij, &grad) + dot(&dji, &grad));
            hess_h[i * m + j] = quad + drift;
            hess_h[j * m + i] = quad + drift;
        }
    }
    let lap_h = (0..m).fold(T::zero(), |a, i| a + hess_h[i * m + i]);
    let mut inf_h = T::zero();
    for i in 0..m {
        for j in 0..m {
            inf_h = inf_h + hess_h[i * m + j] * grad_h[i] * grad_h[j];
        }
    }
    Ok(HorizontalJet { grad_h, hess_h, lap_h: finite(lap_h, "sub-Laplacian")?, inf_h: finite(inf_h, "infinity-Laplacian")? })
}

/// Names of the coordinates used when parsing polynomial fields.
pub fn coordinate_names<T: Real>(group: &StratifiedGroup<T>) -> Vec<String> {
    match group.kind() {
        GroupKind::Heisenberg(1) => vec!["x".into(), "y".into(), "t".into()],
        GroupKind::Engel => vec!["x".into(), "y".into(), "t".into(), "s".into()],
        _ => (1..=group.dim()).map(|k| format!("x{k}")).collect(),
    }
}

/// Field catalog.
///
/// * `x1`, `x2`, ...: first-layer coordinates (`x`, `y` also accepted on the low-dimensional presets)
/// * `t`: first coordinate of the second layer; `s`: first coordinate of the third layer
/// * `gauge:<p>`: the gauge raised to the power `p`
/// * `poly:<expr>`: polynomial or quotient in the coordinate names
pub fn field_by_id<T: Real>(group: &StratifiedGroup<T>, id: &str) -> Result<ScalarField<T>> {
    let n = group.dim();
    let layer_start = |layer: usize| -> Result<usize> {
        if group.step() < layer {
            return Err(CalcError::InvalidArgument(format!("group has no layer {layer} for field {id:?}")));
        }
        Ok(group.layer_dims()[..layer - 1].iter().sum())
    };
    match id {
        "x" => return ScalarField::coordinate(n, 0),
        "y" if group.horizontal_dim() >= 2 => return ScalarField::coordinate(n, 1),
        "t" => return ScalarField::coordinate(n, layer_start(2)?),
        "s" => return ScalarField::coordinate(n, layer_start(3)?),
        _ => {}
    }
    if let Some(rest) = id.strip_prefix("poly:") {
        let names = coordinate_names(group);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        return Ok(ScalarField::from_expr(Expr::parse(rest, &refs)?));
    }
    if let Some(rest) = id.strip_prefix("gauge:") {
        let p: f64 = rest.trim().parse().map_err(|_| CalcError::Parse(format!("bad gauge power in {id:?}")))?;
        let gr = group.clone();
        let p: T = lit(p);
        return Ok(ScalarField::new(n, move |g| gr.gauge_norm(g).powf(p)));
    }
    if let Some(k) = id.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
        if k == 0 || k > group.horizontal_dim() {
            return Err(CalcError::IndexOutOfRange(format!("horizontal coordinate {id:?}")));
        }
        return ScalarField::coordinate(n, k - 1);
    }
    Err(CalcError::InvalidArgument(format!("unknown field id {id:?}")))
}
