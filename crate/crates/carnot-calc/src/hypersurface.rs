//! Hypersurfaces: level sets, parametric patches of the first Heisenberg group and intrinsic graphs.
//!
//! The Riemannian normal is expressed in the left-invariant frame,
//! `N = sum p_j X_j + sum omega_s T_s`, with `W = |(p_j)|` the angle function.
//! On Heisenberg surfaces the tangent frame is `Z = qbar X1 - pbar X2` together with
//! `D = T - obar Y`, where `Y = pbar X1 + qbar X2` is the horizontal normal.

use crate::carnot_group::{build_group, GroupKind, Preset, StratifiedGroup};
use crate::error::{CalcError, Result};
use crate::field_calculus::{coordinate_gradient, directional, DerivativeEngine, ScalarField};
use crate::numerics::{diff1, finite, mat_inverse, mat_mul};
use crate::scalar::{default_step, dot, lit, max_abs, norm, Real};
use crate::surface_function::{param_step, SurfaceFunction};

/// Relative threshold below which a point counts as characteristic.
pub const CHARACTERISTIC_REL_TOL: f64 = 1e-8;

/// Normalised quantities, available away from the characteristic set.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFrame<T> {
    pub pbar: Vec<T>,
    pub obar: Vec<T>,
    /// Horizontal Gauss map in ambient coordinates.
    pub nu_h: Vec<T>,
    /// `Z = (nu_H)^perp` in ambient coordinates; Heisenberg `H^1` only.
    pub z: Option<Vec<T>>,
}

/// Frame data of a hypersurface at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFrame<T> {
    pub point: Vec<T>,
    /// Horizontal components `p_j = <N, X_j>`.
    pub p: Vec<T>,
    /// Components of `N` on the remaining frame fields.
    pub omega: Vec<T>,
    pub w: T,
    pub normal_norm: T,
    pub tau: T,
    unit: Option<UnitFrame<T>>,
}

impl<T: Real> SurfaceFrame<T> {
    /// Assembles the frame from the components of `N` at `point`.
    pub fn new(group: &StratifiedGroup<T>, point: Vec<T>, p: Vec<T>, omega: Vec<T>) -> Result<Self> {
        let w = norm(&p);
        let normal_norm = (w * w + omega.iter().fold(T::zero(), |a, &x| a + x * x)).sqrt();
        finite(normal_norm, "normal")?;
        let scale = T::one().max(max_abs(&point));
        if normal_norm <= lit::<T>(1e-14) * scale {
            return Err(CalcError::DegenerateSurface(format!("vanishing normal at {point:?}")));
        }
        let tau = lit::<T>(CHARACTERISTIC_REL_TOL) * T::one().max(normal_norm);
        let unit = if w > tau {
            let pbar: Vec<T> = p.iter().map(|&x| x / w).collect();
            let obar: Vec<T> = omega.iter().map(|&x| x / w).collect();
            let m = p.len();
            let mut nu_h = vec![T::zero(); point.len()];
            for (j, &c) in pbar.iter().enumerate() {
                for (k, x) in group.frame_column(&point, j).into_iter().enumerate() {
                    nu_h[k] = nu_h[k] + c * x;
                }
            }
            let z = (group.kind() == GroupKind::Heisenberg(1) && m == 2).then(|| {
                let x1 = group.frame_column(&point, 0);
                let x2 = group.frame_column(&point, 1);
                (0..3).map(|k| pbar[1] * x1[k] - pbar[0] * x2[k]).collect()
            });
            Some(UnitFrame { pbar, obar, nu_h, z })
        } else {
            None
        };
        Ok(Self { point, p, omega, w, normal_norm, tau, unit })
    }

    pub fn is_characteristic(&self) -> bool {
        self.unit.is_none()
    }

    pub fn unit(&self) -> Result<&UnitFrame<T>> {
        self.unit.as_ref().ok_or_else(|| CalcError::CharacteristicPoint {
            w: self.w.to_f64().unwrap_or(f64::NAN),
            tau: self.tau.to_f64().unwrap_or(f64::NAN),
        })
    }

    /// `p = <N, X1>`.
    pub fn p(&self) -> T {
        self.p[0]
    }

    /// `q = <N, X2>`.
    pub fn q(&self) -> T {
        self.p[1]
    }

    /// `omega = <N, T>` (first vertical component).
    pub fn omega(&self) -> T {
        self.omega[0]
    }

    pub fn pbar(&self) -> Result<T> {
        Ok(self.unit()?.pbar[0])
    }

    pub fn qbar(&self) -> Result<T> {
        Ok(self.unit()?.pbar[1])
    }

    pub fn obar(&self) -> Result<T> {
        Ok(self.unit()?.obar[0])
    }

    /// Components of `N` in the full frame.
    pub fn normal_components(&self) -> Vec<T> {
        self.p.iter().chain(&self.omega).copied().collect()
    }

    /// `N` in ambient coordinates.
    pub fn normal_ambient(&self, group: &StratifiedGroup<T>) -> Vec<T> {
        let f = group.frame_at(&self.point).to_row_major();
        mat_mul(self.point.len(), self.point.len(), 1, &f, &self.normal_components())
    }
}

/// Hypersurface `{phi = const}` oriented by `N = grad phi`.
#[derive(Debug, Clone)]
pub struct LevelSetSurface<T> {
    group: StratifiedGroup<T>,
    phi: ScalarField<T>,
    engine: DerivativeEngine<T>,
}

impl<T: Real> LevelSetSurface<T> {
    pub fn new(group: StratifiedGroup<T>, phi: ScalarField<T>, engine: DerivativeEngine<T>) -> Result<Self> {
        if phi.dim() != group.dim() {
            return Err(CalcError::InvalidArgument(format!(
                "defining function has dimension {}, group has {}",
                phi.dim(),
                group.dim()
            )));
        }
        Ok(Self { group, phi, engine })
    }

    pub fn group(&self) -> &StratifiedGroup<T> {
        &self.group
    }

    pub fn phi(&self) -> &ScalarField<T> {
        &self.phi
    }

    pub fn engine(&self) -> &DerivativeEngine<T> {
        &self.engine
    }

    /// Frame at `g` (the point need not lie on the zero set: every level set is a leaf).
    pub fn frame(&self, g: &[T]) -> Result<SurfaceFrame<T>> {
        let grad = coordinate_gradient(&self.phi, g, &self.engine)?;
        let m = self.group.horizontal_dim();
        let comps: Vec<T> = (0..self.group.dim()).map(|j| dot(&self.group.frame_column(g, j), &grad)).collect();
        SurfaceFrame::new(&self.group, g.to_vec(), comps[..m].to_vec(), comps[m..].to_vec())
    }

    fn require_h1(&self) -> Result<()> {
        if self.group.kind() != GroupKind::Heisenberg(1) {
            return Err(CalcError::Unsupported("the Z, Y, T frame is defined on the first Heisenberg group".into()));
        }
        Ok(())
    }

    /// Ambient vector fields `Z`, `Y`, `T` at `g`, in coordinates.
    pub fn zyt_vectors(&self, g: &[T]) -> Result<[Vec<T>; 3]> {
        self.require_h1()?;
        let fr = self.frame(g)?;
        let u = fr.unit()?;
        Ok([u.z.clone().expect("H1 frame carries Z"), u.nu_h.clone(), vec![T::zero(), T::zero(), T::one()]])
    }

    /// `Zf`, `Yf`, `Tf` of an ambient function at `g`, differentiating with step `h`.
    pub fn zyt_of<F>(&self, f: F, g: &[T], h: T) -> Result<[T; 3]>
    where
        F: Fn(&[T]) -> Result<T>,
    {
        let [z, y, t] = self.zyt_vectors(g)?;
        Ok([directional(&f, g, &z, h)?, directional(&f, g, &y, h)?, directional(&f, g, &t, h)?])
    }
}

/// `Z`, `Y`, `T` and `D = T - obar Y` derivatives of a surface function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDerivatives<T> {
    pub z: T,
    pub y: T,
    pub t: T,
    pub d: T,
}

/// Geometry of a patch at one parameter point, enough to convert `(f_u, f_v)` into frame derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGeometry<T> {
    pub u: T,
    pub v: T,
    pub frame: SurfaceFrame<T>,
    pub theta_u: [T; 3],
    pub theta_v: [T; 3],
    /// `B_u, B_v`: coefficients of `Zf` in `f_u, f_v`.
    pub b: [T; 2],
    /// `C_u, C_v`: coefficients of `Df` in `f_u, f_v`.
    pub c: [T; 2],
    pub det: T,
}

impl<T: Real> PatchGeometry<T> {
    /// Frame derivatives of a function with parameter partials `(fu, fv)`, extended off the
    /// surface so that it is constant along `N`.
    pub fn frame_derivatives(&self, fu: T, fv: T) -> Result<FrameDerivatives<T>> {
        let z = (fu * self.c[1] - fv * self.c[0]) / self.det;
        let d = (self.b[0] * fv - self.b[1] * fu) / self.det;
        let ob = self.frame.obar()?;
        let t = d / (T::one() + ob * ob);
        Ok(FrameDerivatives { z, y: -ob * t, t, d })
    }

    pub fn pbar(&self) -> T {
        self.frame.pbar().expect("geometry is built at noncharacteristic points")
    }

    pub fn qbar(&self) -> T {
        self.frame.qbar().expect("geometry is built at noncharacteristic points")
    }

    pub fn obar(&self) -> T {
        self.frame.obar().expect("geometry is built at noncharacteristic points")
    }

    pub fn w(&self) -> T {
        self.frame.w
    }
}

/// Parametrised patch `theta(u, v) = (x, y, t)` in the first Heisenberg group, oriented by `theta_u ^ theta_v`.
#[derive(Debug, Clone)]
pub struct ParamPatch<T> {
    group: StratifiedGroup<T>,
    comps: [SurfaceFunction<T>; 3],
    du: [SurfaceFunction<T>; 3],
    dv: [SurfaceFunction<T>; 3],
    domain: [T; 4],
    grid: (usize, usize),
}

/// Smallest grid accepted for patches.
pub const MIN_GRID: usize = 8;

impl<T: Real> ParamPatch<T> {
    pub fn new(
        x: SurfaceFunction<T>,
        y: SurfaceFunction<T>,
        t: SurfaceFunction<T>,
        domain: [T; 4],
        grid: (usize, usize),
    ) -> Result<Self> {
        check_domain(domain)?;
        check_grid(grid)?;
        let comps = [x, y, t];
        let du = [comps[0].partial(0), comps[1].partial(0), comps[2].partial(0)];
        let dv = [comps[0].partial(1), comps[1].partial(1), comps[2].partial(1)];
        Ok(Self { group: build_group(&Preset::Heisenberg(1))?, comps, du, dv, domain, grid })
    }

    /// Patch with caller-supplied partial derivatives of the components.
    pub fn from_parts(
        comps: [SurfaceFunction<T>; 3],
        du: [SurfaceFunction<T>; 3],
        dv: [SurfaceFunction<T>; 3],
        domain: [T; 4],
        grid: (usize, usize),
    ) -> Result<Self> {
        check_domain(domain)?;
        check_grid(grid)?;
        Ok(Self { group: build_group(&Preset::Heisenberg(1))?, comps, du, dv, domain, grid })
    }

    /// Patch from three expressions in `u`, `v`.
    pub fn from_exprs(x: &str, y: &str, t: &str, domain: [T; 4], grid: (usize, usize)) -> Result<Self> {
        Self::new(SurfaceFunction::parse(x)?, SurfaceFunction::parse(y)?, SurfaceFunction::parse(t)?, domain, grid)
    }

    pub fn group(&self) -> &StratifiedGroup<T> {
        &self.group
    }

    pub fn components(&self) -> &[SurfaceFunction<T>; 3] {
        &self.comps
    }

    pub fn domain(&self) -> [T; 4] {
        self.domain
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn with_domain(mut self, domain: [T; 4]) -> Result<Self> {
        check_domain(domain)?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: (usize, usize)) -> Result<Self> {
        check_grid(grid)?;
        self.grid = grid;
        Ok(self)
    }

    pub fn contains(&self, u: T, v: T) -> bool {
        let d = self.domain;
        let slack = lit::<T>(1e-12) * T::one().max(d[1] - d[0]).max(d[3] - d[2]);
        u >= d[0] - slack && u <= d[1] + slack && v >= d[2] - slack && v <= d[3] + slack
    }

    pub fn point(&self, u: T, v: T) -> [T; 3] {
        [self.comps[0].eval(u, v), self.comps[1].eval(u, v), self.comps[2].eval(u, v)]
    }

    pub fn tangents(&self, u: T, v: T) -> ([T; 3], [T; 3]) {
        (
            [self.du[0].eval(u, v), self.du[1].eval(u, v), self.du[2].eval(u, v)],
            [self.dv[0].eval(u, v), self.dv[1].eval(u, v), self.dv[2].eval(u, v)],
        )
    }

    /// `(p, q, omega)` at `(u, v)` without a domain check.
    pub fn normal_components(&self, u: T, v: T) -> [T; 3] {
        let [x, y, _] = self.point(u, v);
        let (a, b) = self.tangents(u, v);
        normal_from_tangents(x, y, a, b)
    }

    /// Frame at `(u, v)`, which must lie in the domain.
    pub fn frame(&self, u: T, v: T) -> Result<SurfaceFrame<T>> {
        if !self.contains(u, v) {
            return Err(CalcError::InvalidArgument(format!("({u}, {v}) lies outside the patch domain")));
        }
        self.frame_unchecked(u, v)
    }

    /// Frame at `(u, v)`; used by difference stencils that step slightly past the boundary.
    pub fn frame_unchecked(&self, u: T, v: T) -> Result<SurfaceFrame<T>> {
        let pt = self.point(u, v);
        let [p, q, w] = self.normal_components(u, v);
        for c in pt.iter().chain(&[p, q, w]) {
            finite(*c, "patch evaluation")?;
        }
        SurfaceFrame::new(&self.group, pt.to_vec(), vec![p, q], vec![w])
    }

    /// Geometry needed for frame derivatives at `(u, v)`.
    pub fn geometry(&self, u: T, v: T) -> Result<PatchGeometry<T>> {
        let frame = self.frame_unchecked(u, v)?;
        let (pb, qb) = {
            let un = frame.unit()?;
            (un.pbar[0], un.pbar[1])
        };
        let (a, b) = self.tangents(u, v);
        let (x, y) = (frame.point[0], frame.point[1]);
        let half: T = lit(0.5);
        let bz = |t: &[T; 3]| t[0] * qb - t[1] * pb;
        let cd = |t: &[T; 3]| t[2] + half * (y * t[0] - x * t[1]);
        let bb = [bz(&a), bz(&b)];
        let cc = [cd(&a), cd(&b)];
        let det = bb[0] * cc[1] - bb[1] * cc[0];
        if !(det.abs() > lit::<T>(1e-12) * frame.w.max(T::min_positive_value())) {
            return Err(CalcError::NumericFailure(format!("singular chain-rule system at ({u}, {v})")));
        }
        Ok(PatchGeometry { u, v, frame, theta_u: a, theta_v: b, b: bb, c: cc, det })
    }

    /// Frame derivatives of `f` at `(u, v)` (parameter step relative to `max(1, |u|, |v|)`).
    pub fn zy_derivative_step<F>(&self, f: F, u: T, v: T, h: T) -> Result<FrameDerivatives<T>>
    where
        F: Fn(T, T) -> Result<T>,
    {
        let geo = self.geometry(u, v)?;
        let hh = param_step(h, u, v);
        let fu = diff1(|s| f(u + s, v), hh)?;
        let fv = diff1(|s| f(u, v + s), hh)?;
        geo.frame_derivatives(fu, fv)
    }

    pub fn zy_derivative<F>(&self, f: F, u: T, v: T) -> Result<FrameDerivatives<T>>
    where
        F: Fn(T, T) -> Result<T>,
    {
        self.zy_derivative_step(f, u, v, default_step())
    }

    /// Frame derivatives of a surface function (exact partials when available).
    pub fn zy_of(&self, f: &SurfaceFunction<T>, u: T, v: T) -> Result<FrameDerivatives<T>> {
        let (fu, fv) = f.gradient(u, v);
        self.geometry(u, v)?.frame_derivatives(fu, fv)
    }

    /// Image of the patch under the affine map `g -> A g + b` (row-major `A`).
    pub fn affine_image(&self, a: [[T; 3]; 3], b: [T; 3]) -> Result<Self> {
        let comps = self.comps.clone();
        let mut out = Vec::with_capacity(3);
        for r in 0..3 {
            let mut acc = SurfaceFunction::constant(b[r]);
            for (c, comp) in comps.iter().enumerate() {
                if a[r][c] != T::zero() {
                    acc = acc.add(&comp.scale(a[r][c]));
                }
            }
            out.push(acc);
        }
        let t = out.pop().unwrap();
        let y = out.pop().unwrap();
        let x = out.pop().unwrap();
        Self::new(x, y, t, self.domain, self.grid)
    }

    /// `delta_lambda o theta`.
    pub fn dilate(&self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(CalcError::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        let z = T::zero();
        self.affine_image([[lambda, z, z], [z, lambda, z], [z, z, lambda * lambda]], [z; 3])
    }

    /// Left translation `g0 * theta` by the group law.
    pub fn left_translate(&self, g0: [T; 3]) -> Result<Self> {
        let z = T::zero();
        let half: T = lit(0.5);
        // g0 * g = (x0 + x, y0 + y, t0 + t + (x0 y - y0 x) / 2)
        self.affine_image(
            [[T::one(), z, z], [z, T::one(), z], [-half * g0[1], half * g0[0], T::one()]],
            g0,
        )
    }
}

fn check_domain<T: Real>(d: [T; 4]) -> Result<()> {
    if !(d[0] < d[1] && d[2] < d[3]) || d.iter().any(|x| !x.is_finite()) {
        return Err(CalcError::InvalidArgument(format!("invalid parameter rectangle {d:?}")));
    }
    Ok(())
}

fn check_grid(g: (usize, usize)) -> Result<()> {
    if g.0 < MIN_GRID || g.1 < MIN_GRID {
        return Err(CalcError::InvalidArgument(format!("grid {g:?} is below {MIN_GRID} x {MIN_GRID}")));
    }
    Ok(())
}

/// `(p, q, omega)` of `theta_u ^ theta_v` at a point with first-layer coordinates `(x, y)`.
pub fn normal_from_tangents<T: Real>(x: T, y: T, a: [T; 3], b: [T; 3]) -> [T; 3] {
    let half: T = lit(0.5);
    let omega = a[0] * b[1] - b[0] * a[1];
    let p = a[1] * b[2] - b[1] * a[2] - half * y * omega;
    let q = b[0] * a[2] - a[0] * b[2] + half * x * omega;
    [p, q, omega]
}

/// Intrinsic `X1`-graph `(phi(u,v), u, v - u phi / 2)`.
#[derive(Debug, Clone)]
pub struct IntrinsicGraph<T> {
    phi: SurfaceFunction<T>,
    domain: [T; 4],
    grid: (usize, usize),
}

impl<T: Real> IntrinsicGraph<T> {
    pub fn new(phi: SurfaceFunction<T>, domain: [T; 4], grid: (usize, usize)) -> Result<Self> {
        check_domain(domain)?;
        check_grid(grid)?;
        Ok(Self { phi, domain, grid })
    }

    pub fn phi(&self) -> &SurfaceFunction<T> {
        &self.phi
    }

    pub fn domain(&self) -> [T; 4] {
        self.domain
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    /// Burgers operator `B(F) = F_u + phi F_v`.
    pub fn burgers(&self, f: &SurfaceFunction<T>, u: T, v: T) -> T {
        let (fu, fv) = f.gradient(u, v);
        fu + self.phi.eval(u, v) * fv
    }

    /// `B(F)` as a surface function.
    pub fn burgers_fn(&self, f: &SurfaceFunction<T>) -> SurfaceFunction<T> {
        let fu = f.partial(0);
        let fv = f.partial(1);
        let phi = self.phi.clone();
        if let (SurfaceFunction::Expr(a), SurfaceFunction::Expr(b), SurfaceFunction::Expr(c)) = (&fu, &fv, &phi) {
            return SurfaceFunction::Expr(a.add(&c.mul(b)));
        }
        SurfaceFunction::from_fn(move |u, v| fu.eval(u, v) + phi.eval(u, v) * fv.eval(u, v))
    }

    pub fn to_patch(&self) -> Result<ParamPatch<T>> {
        let u = SurfaceFunction::parse("u")?;
        let v = SurfaceFunction::parse("v")?;
        let t = v.add(&u.mul(&self.phi).scale(lit(-0.5)));
        ParamPatch::new(self.phi.clone(), u, t, self.domain, self.grid)
    }

    /// Defining function `x - phi(y, t + x y / 2)` of the same surface as a level set.
    pub fn level_set_function(&self) -> ScalarField<T> {
        let phi = self.phi.clone();
        let half: T = lit(0.5);
        let base = ScalarField::new(3, move |g: &[T]| g[0] - phi.eval(g[1], g[2] + half * g[0] * g[1]));
        if let SurfaceFunction::Expr(e) = &self.phi {
            // Substitute u = y, v = t + x y / 2 into the expression to keep exact derivatives.
            let y = crate::expr::Expr::variable(3, 1);
            let vv = crate::expr::Expr::variable(3, 2)
                .add(&crate::expr::Expr::variable(3, 0).mul(&crate::expr::Expr::variable(3, 1)).scale(half));
            if let Some(sub) = substitute(e, &y, &vv) {
                return ScalarField::from_expr(crate::expr::Expr::variable(3, 0).add(&sub.scale(-T::one())));
            }
        }
        base
    }
}

/// Substitutes `u -> a`, `v -> b` into a rational expression in `(u, v)`.
fn substitute<T: Real>(e: &crate::expr::Expr<T>, a: &crate::expr::Expr<T>, b: &crate::expr::Expr<T>) -> Option<crate::expr::Expr<T>> {
    use crate::expr::Expr;
    let poly = |p: &crate::expr::Polynomial<T>| -> Expr<T> {
        let mut acc = Expr::constant(3, T::zero());
        for m in p.terms() {
            let mut term = Expr::constant(3, m.coef);
            for _ in 0..m.exps[0] {
                term = term.mul(a);
            }
            for _ in 0..m.exps[1] {
                term = term.mul(b);
            }
            acc = acc.add(&term);
        }
        acc
    };
    if e.nvars() != 2 {
        return None;
    }
    let num = poly(&e.num);
    Some(match &e.den {
        None => num,
        Some(d) => {
            let den = poly(d);
            if den.den.is_some() {
                return None;
            }
            Expr { num: num.num, den: Some(den.num) }
        }
    })
}

/// Residuals of the equations cutting out the horizontal plane through `g0`; all vanish iff `g` lies on it.
pub fn horizontal_plane_residual<T: Real>(group: &StratifiedGroup<T>, g0: &[T], g: &[T]) -> Result<Vec<T>> {
    let n = group.dim();
    if g0.len() != n || g.len() != n {
        return Err(CalcError::InvalidArgument("points must match the group dimension".into()));
    }
    let m = group.horizontal_dim();
    let half: T = lit(0.5);
    match (group.kind(), group.step()) {
        (_, 1) => Ok(Vec::new()),
        (_, 2) => Ok((0..group.vertical_dim())
            .map(|s| {
                let mut acc = g[m + s] - g0[m + s];
                for i in 0..m {
                    for j in 0..m {
                        acc = acc - half * group.horizontal_constant(s, i, j) * g0[i] * g[j];
                    }
                }
                acc
            })
            .collect()),
        (GroupKind::Engel, _) => {
            let (x0, y0, t0, s0) = (g0[0], g0[1], g0[2], g0[3]);
            let (x, y, t, s) = (g[0], g[1], g[2], g[3]);
            let six: T = lit(6.0);
            let psi1 = t - t0 + half * (x * y0 - x0 * y);
            let psi2 = s - s0 + (x * (six * t0 + x0 * y0) - x0 * x0 * y - six * x0 * t0) / lit(12.0);
            Ok(vec![psi1, psi2])
        }
        _ => {
            // Non-horizontal components of g - g0 in the frame at g0.
            let f = group.frame_at(g0).to_row_major();
            let inv = mat_inverse(n, &f)?;
            let diff: Vec<T> = g.iter().zip(g0).map(|(&a, &b)| a - b).collect();
            Ok(mat_mul(n, n, 1, &inv, &diff)[m..].to_vec())
        }
    }
}
