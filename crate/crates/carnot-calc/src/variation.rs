//! Deformations `S -> S + lambda X` of patches in `H^1`, numeric and closed-form first and second
//! variations of the H-perimeter, and the stability form of H-minimal surfaces.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{geometry_aux_param, hmc_param};
use crate::error::{CalcError, Result};
use crate::hypersurface::{IntrinsicGraph, ParamPatch, PatchGeometry};
use crate::measure::{check_support, integrate_nodes, integrate_on_support, perimeter_value, IntegralResult, Node, QuadratureGrid};
use crate::numerics::{diff1, diff2, pairwise_sum, richardson};
use crate::scalar::{lit, Real};
use crate::surface_function::{Bump, SurfaceFunction};

/// Largest `|H|` accepted on the support by the geometric second variation and the stability scan.
pub const MINIMALITY_TOL: f64 = 1e-6;
/// Largest `|B(B phi)|` accepted by the intrinsic stability form.
pub const INTRINSIC_MINIMALITY_TOL: f64 = 1e-8;

/// `X = a X1 + b X2 + k T` with coefficients on the patch parameters.
#[derive(Debug, Clone)]
pub struct DeformationField<T> {
    pub a: SurfaceFunction<T>,
    pub b: SurfaceFunction<T>,
    pub k: SurfaceFunction<T>,
    /// Bump whose support contains the supports of `a`, `b`, `k`.
    pub support: Option<Bump<T>>,
}

impl<T: Real> DeformationField<T> {
    pub fn new(a: SurfaceFunction<T>, b: SurfaceFunction<T>, k: SurfaceFunction<T>, support: Option<Bump<T>>) -> Self {
        Self { a, b, k, support }
    }

    pub fn zero() -> Self {
        Self::new(SurfaceFunction::zero(), SurfaceFunction::zero(), SurfaceFunction::zero(), None)
    }

    /// `(ca a0, cb a0, ck a0)` for a bump `a0`.
    pub fn from_bump(bump: Bump<T>, coeffs: [T; 3]) -> Self {
        let f = |c: T| SurfaceFunction::Bump(bump).scale(c);
        Self::new(f(coeffs[0]), f(coeffs[1]), f(coeffs[2]), Some(bump))
    }

    /// `F nu_H` for a bump `F`, so that the normal component of the field is `F`.
    pub fn normal(p: &ParamPatch<T>, f: Bump<T>) -> Self {
        let a = frame_weighted(p, f, |fr| fr.pbar());
        let b = frame_weighted(p, f, |fr| fr.qbar());
        Self::new(a, b, SurfaceFunction::zero(), Some(f))
    }

    /// `s Z` for a bump `s`: tangential to the surface, so the normal component vanishes.
    pub fn tangential(p: &ParamPatch<T>, s: Bump<T>) -> Self {
        let a = frame_weighted(p, s, |fr| fr.qbar());
        let b = frame_weighted(p, s, |fr| fr.pbar().map(|x| -x));
        Self::new(a, b, SurfaceFunction::zero(), Some(s))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.k.is_zero()
    }

    pub fn values(&self, u: T, v: T) -> [T; 3] {
        [self.a.eval(u, v), self.b.eval(u, v), self.k.eval(u, v)]
    }

    /// Normal component `F = pbar a + qbar b + obar k`.
    pub fn normal_component(&self, geo: &PatchGeometry<T>) -> T {
        let [a, b, k] = self.values(geo.u, geo.v);
        geo.pbar() * a + geo.qbar() * b + geo.obar() * k
    }

    fn require_support(&self, p: &ParamPatch<T>, grid: &QuadratureGrid) -> Result<Bump<T>> {
        let b = self
            .support
            .ok_or_else(|| CalcError::Support("the deformation field carries no compact support".into()))?;
        check_support(&b, p.domain(), grid)?;
        Ok(b)
    }
}

/// `bump * g(frame)`, skipping the frame outside the support.
fn frame_weighted<T: Real>(
    p: &ParamPatch<T>,
    bump: Bump<T>,
    g: impl Fn(&crate::hypersurface::SurfaceFrame<T>) -> Result<T> + Send + Sync + 'static,
) -> SurfaceFunction<T> {
    let p = p.clone();
    SurfaceFunction::from_fn(move |u, v| {
        let f = bump.eval(u, v);
        if f == T::zero() {
            return T::zero();
        }
        f * p.frame_unchecked(u, v).and_then(|fr| g(&fr)).unwrap_or(T::nan())
    })
}

/// `Z` and `D = T - obar Y` derivatives of the three coefficients at a node.
struct CoeffJet<T> {
    val: [T; 3],
    z: [T; 3],
    d: [T; 3],
}

fn coeff_jet<T: Real>(x: &DeformationField<T>, geo: &PatchGeometry<T>) -> Result<CoeffJet<T>> {
    let (u, v) = (geo.u, geo.v);
    let mut z = [T::zero(); 3];
    let mut d = [T::zero(); 3];
    for (i, f) in [&x.a, &x.b, &x.k].into_iter().enumerate() {
        let (fu, fv) = f.gradient(u, v);
        let fd = geo.frame_derivatives(fu, fv)?;
        z[i] = fd.z;
        d[i] = fd.d;
    }
    Ok(CoeffJet { val: x.values(u, v), z, d })
}

/// `theta + lambda (a, b, k + (b x - a y)/2)`, with tangents from the product rule.
pub fn deform_patch<T: Real>(p: &ParamPatch<T>, x: &DeformationField<T>, lambda: T) -> Result<ParamPatch<T>> {
    if lambda == T::zero() || x.is_zero() {
        return Ok(p.clone());
    }
    let [cx, cy, ct] = p.components().clone();
    let half: T = lit(0.5);
    let fa = Arc::new([x.a.clone(), x.b.clone(), x.k.clone()]);
    let dc = |var: usize| [cx.partial(var), cy.partial(var), ct.partial(var)];
    let da = |var: usize| Arc::new([x.a.partial(var), x.b.partial(var), x.k.partial(var)]);
    let comps = {
        let (cx, cy, ct, f) = (cx.clone(), cy.clone(), ct.clone(), fa.clone());
        let (cx2, f2) = (cx.clone(), f.clone());
        let (cy2, f3) = (cy.clone(), f.clone());
        [
            SurfaceFunction::from_fn(move |u, v| cx2.eval(u, v) + lambda * f2[0].eval(u, v)),
            SurfaceFunction::from_fn(move |u, v| cy2.eval(u, v) + lambda * f3[1].eval(u, v)),
            SurfaceFunction::from_fn(move |u, v| {
                let (xx, yy) = (cx.eval(u, v), cy.eval(u, v));
                let (a, b, k) = (f[0].eval(u, v), f[1].eval(u, v), f[2].eval(u, v));
                ct.eval(u, v) + lambda * (k + half * (b * xx - a * yy))
            }),
        ]
    };
    let partials = |var: usize| -> [SurfaceFunction<T>; 3] {
        let [xd, yd, td] = dc(var);
        let fd = da(var);
        let (cx, cy, f) = (cx.clone(), cy.clone(), fa.clone());
        let (xd2, fd2) = (xd.clone(), fd.clone());
        let (yd2, fd3) = (yd.clone(), fd.clone());
        [
            SurfaceFunction::from_fn(move |u, v| xd2.eval(u, v) + lambda * fd2[0].eval(u, v)),
            SurfaceFunction::from_fn(move |u, v| yd2.eval(u, v) + lambda * fd3[1].eval(u, v)),
            SurfaceFunction::from_fn(move |u, v| {
                let (xx, yy) = (cx.eval(u, v), cy.eval(u, v));
                let (xs, ys) = (xd.eval(u, v), yd.eval(u, v));
                let (a, b) = (f[0].eval(u, v), f[1].eval(u, v));
                let (as_, bs, ks) = (fd[0].eval(u, v), fd[1].eval(u, v), fd[2].eval(u, v));
                td.eval(u, v) + lambda * (ks + half * (bs * xx + b * xs - as_ * yy - a * ys))
            }),
        ]
    };
    let out = ParamPatch::from_parts(comps, partials(0), partials(1), p.domain(), p.grid())?;
    check_nondegenerate(&out)?;
    Ok(out)
}

fn check_nondegenerate<T: Real>(p: &ParamPatch<T>) -> Result<()> {
    let d = p.domain();
    let (nu, nv) = p.grid();
    for i in 0..=nu {
        for j in 0..=nv {
            let u = d[0] + (d[1] - d[0]) * lit::<T>(i as f64) / lit::<T>(nu as f64);
            let v = d[2] + (d[3] - d[2]) * lit::<T>(j as f64) / lit::<T>(nv as f64);
            p.frame_unchecked(u, v)
                .map_err(|e| CalcError::DegenerateSurface(format!("deformed patch at ({u}, {v}): {e}")))?;
        }
    }
    Ok(())
}

/// Derivative in `lambda` at 0 of the perimeter of the deformed patch: order 1 by the central
/// four-point stencil, order 2 by the five-point stencil with one Richardson level.
pub fn numeric_variation<T: Real>(
    p: &ParamPatch<T>,
    x: &DeformationField<T>,
    order: u32,
    dl: T,
    grid: &QuadratureGrid,
) -> Result<T> {
    if !(dl > T::zero()) {
        return Err(CalcError::InvalidArgument(format!("lambda step must be positive, got {dl}")));
    }
    if x.is_zero() {
        return Ok(T::zero());
    }
    let per = |l: T| -> Result<T> { perimeter_value(&deform_patch(p, x, l)?, grid) };
    match order {
        1 => diff1(per, dl),
        2 => {
            let coarse = diff2(per, dl)?;
            let fine = diff2(per, dl * lit(0.5))?;
            Ok(richardson(coarse, fine, 4))
        }
        _ => Err(CalcError::InvalidArgument(format!("variation order must be 1 or 2, got {order}"))),
    }
}

/// `int H F dsigma_H`.
pub fn first_variation_analytic<T: Real>(p: &ParamPatch<T>, x: &DeformationField<T>, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    if x.is_zero() {
        return Ok(IntegralResult { value: T::zero(), error_estimate: T::zero(), excluded_mass: T::zero() });
    }
    let sup = x.require_support(p, grid)?;
    integrate_on_support(p, &sup, grid, |geo| Ok(hmc_param(p, geo.u, geo.v)?.h * x.normal_component(geo)))
}

/// Integrand of the full second variation at a node, in terms of `a, b, k` and their `Z`, `D` derivatives.
fn second_variation_density<T: Real>(geo: &PatchGeometry<T>, j: &CoeffJet<T>) -> T {
    let two: T = lit(2.0);
    let (pb, qb, ob) = (geo.pbar(), geo.qbar(), geo.obar());
    let [a, b, _] = j.val;
    let [za, zb, zk] = j.z;
    let [da, db, dk] = j.d;
    let s = qb * za - pb * zb;
    let n = a * pb + b * qb;
    let m = a * qb - b * pb;
    two * s * dk + da * (-two * qb * zk - qb * n - pb * m) + db * (two * pb * zk + pb * n - qb * m)
        + two * m * s * ob
        + (za + pb * ob * zk).powi(2)
        + (zb + qb * ob * zk).powi(2)
        + (a * a + b * b) * ob * ob
        + two * ob * (a * za + b * zb)
        + two * ob * ob * n * zk
        - (s + m * ob).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondVariationMode {
    Full,
    Geometric,
}

/// Second variation: the full formula in `(a, b, k)`, or on H-minimal surfaces the form
/// `int (Z F)^2 + (2 A - obar^2) F^2 dsigma_H`.
pub fn second_variation<T: Real>(
    p: &ParamPatch<T>,
    x: &DeformationField<T>,
    mode: SecondVariationMode,
    grid: &QuadratureGrid,
) -> Result<IntegralResult<T>> {
    if x.is_zero() {
        return Ok(IntegralResult { value: T::zero(), error_estimate: T::zero(), excluded_mass: T::zero() });
    }
    let sup = x.require_support(p, grid)?;
    match mode {
        SecondVariationMode::Full => integrate_on_support(p, &sup, grid, |geo| Ok(second_variation_density(geo, &coeff_jet(x, geo)?))),
        SecondVariationMode::Geometric => {
            let tol: T = lit(MINIMALITY_TOL);
            integrate_on_support(p, &sup, grid, |geo| {
                let (u, v) = (geo.u, geo.v);
                let h = hmc_param(p, u, v)?.h;
                if h.abs() > tol {
                    return Err(CalcError::NotMinimal { max_h: h.abs().to_f64().unwrap_or(f64::NAN), tol: MINIMALITY_TOL });
                }
                let f = x.normal_component(geo);
                let zf = p
                    .zy_derivative(|s, t| Ok(x.normal_component(&p.geometry(s, t)?)), u, v)?
                    .z;
                let aux = geometry_aux_param(p, u, v)?;
                let a = aux.a.expect("patches live in H^1");
                let ob = geo.obar();
                Ok(zf * zf + (lit::<T>(2.0) * a - ob * ob) * f * f)
            })
        }
    }
}

/// Every route that applies to one deformation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport<T> {
    pub v1_numeric: Option<T>,
    pub v1_analytic: Option<T>,
    pub v2_numeric: Option<T>,
    pub v2_full: Option<T>,
    pub v2_geometric: Option<T>,
    /// `int F^2 dsigma_H`.
    pub f_norm: Option<T>,
}

/// Routes requested from [`variation_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VariationRoutes {
    pub v1_numeric: bool,
    pub v1_analytic: bool,
    pub v2_numeric: bool,
    pub v2_full: bool,
    pub v2_geometric: bool,
}

impl VariationRoutes {
    pub fn all() -> Self {
        Self { v1_numeric: true, v1_analytic: true, v2_numeric: true, v2_full: true, v2_geometric: true }
    }
}

pub const FIRST_VARIATION_STEP: f64 = 1e-4;
pub const SECOND_VARIATION_STEP: f64 = 1e-2;

pub fn variation_report<T: Real>(
    p: &ParamPatch<T>,
    x: &DeformationField<T>,
    routes: VariationRoutes,
    grid: &QuadratureGrid,
) -> Result<VariationReport<T>> {
    let f_norm = if x.is_zero() {
        T::zero()
    } else {
        let sup = x.require_support(p, grid)?;
        integrate_on_support(p, &sup, grid, |geo| Ok(x.normal_component(geo).powi(2)))?.value
    };
    let opt = |on: bool, f: &dyn Fn() -> Result<T>| -> Result<Option<T>> { if on { f().map(Some) } else { Ok(None) } };
    Ok(VariationReport {
        v1_numeric: opt(routes.v1_numeric, &|| numeric_variation(p, x, 1, lit(FIRST_VARIATION_STEP), grid))?,
        v1_analytic: opt(routes.v1_analytic, &|| Ok(first_variation_analytic(p, x, grid)?.value))?,
        v2_numeric: opt(routes.v2_numeric, &|| numeric_variation(p, x, 2, lit(SECOND_VARIATION_STEP), grid))?,
        v2_full: opt(routes.v2_full, &|| Ok(second_variation(p, x, SecondVariationMode::Full, grid)?.value))?,
        v2_geometric: opt(routes.v2_geometric, &|| Ok(second_variation(p, x, SecondVariationMode::Geometric, grid)?.value))?,
        f_norm: Some(f_norm),
    })
}

/// Closed forms for `dp/dlambda`, `dq/dlambda` and `p dp + q dq` at `lambda = 0`, next to their
/// values from differentiating the deformed patch in `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DlsReport<T> {
    pub dp_closed: T,
    pub dp_numeric: T,
    pub dq_closed: T,
    pub dq_numeric: T,
    pub pdp_qdq_closed: T,
    pub pdp_qdq_numeric: T,
}

impl<T: Real> DlsReport<T> {
    pub fn max_residual(&self) -> T {
        (self.dp_closed - self.dp_numeric)
            .abs()
            .max((self.dq_closed - self.dq_numeric).abs())
            .max((self.pdp_qdq_closed - self.pdp_qdq_numeric).abs())
    }
}

pub fn dls_check<T: Real>(p: &ParamPatch<T>, x: &DeformationField<T>, u: T, v: T) -> Result<DlsReport<T>> {
    let geo = p.geometry(u, v)?;
    let j = coeff_jet(x, &geo)?;
    let (pb, qb, ob, w) = (geo.pbar(), geo.qbar(), geo.obar(), geo.w());
    let [a, b, _] = j.val;
    let [za, zb, zk] = j.z;
    let dk = j.d[2];
    let dp_closed = w * (-(zb + b * ob) - qb * ob * zk + pb * dk);
    let dq_closed = w * ((za + a * ob) + pb * ob * zk + qb * dk);
    let pdq_closed = w * w * (dk + (qb * za - pb * zb) + (qb * a - pb * b) * ob);
    let comp = |i: usize| -> Result<T> {
        diff1(|l| Ok(deform_patch(p, x, l)?.normal_components(u, v)[i]), lit(1e-3))
    };
    let (dp_numeric, dq_numeric) = (comp(0)?, comp(1)?);
    let pdq_numeric = diff1(
        |l| {
            let [a, b, _] = deform_patch(p, x, l)?.normal_components(u, v);
            Ok(lit::<T>(0.5) * (a * a + b * b))
        },
        lit(1e-3),
    )?;
    Ok(DlsReport {
        dp_closed,
        dp_numeric,
        dq_closed,
        dq_numeric,
        pdp_qdq_closed: pdq_closed,
        pdp_qdq_numeric: pdq_numeric,
    })
}

/// First variation along the Riemannian normal, `X = zeta N / |N|^2`: the derivative of the
/// perimeter next to `int zeta H du dv`.
pub fn normal_first_variation<T: Real>(p: &ParamPatch<T>, zeta: Bump<T>, grid: &QuadratureGrid) -> Result<(T, T)> {
    check_support(&zeta, p.domain(), grid)?;
    let comp = |i: usize| {
        let pp = p.clone();
        SurfaceFunction::from_fn(move |u, v| {
            let n = pp.normal_components(u, v);
            zeta.eval(u, v) * n[i] / (n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
        })
    };
    let x = DeformationField::new(comp(0), comp(1), comp(2), Some(zeta));
    let numeric = numeric_variation(p, &x, 1, lit(FIRST_VARIATION_STEP), grid)?;
    let analytic = integrate_nodes(p.domain(), grid, |u, v| {
        let z = zeta.eval(u, v);
        if z == T::zero() {
            return Ok(Node::Value(T::zero()));
        }
        Ok(Node::Value(z * hmc_param(p, u, v)?.h))
    })?
    .value;
    Ok((numeric, analytic))
}

/// Per-node data of the stability form `Q(F) = int (Z F)^2 + (2 A - obar^2) F^2 dsigma_H`, so that
/// many candidates can be evaluated cheaply on one H-minimal patch.
#[derive(Debug, Clone)]
pub struct StabilityForm<T> {
    domain: [T; 4],
    grid: QuadratureGrid,
    /// Rows of `(u, v, weight * W, Z coefficients on (F_u, F_v), 2 A - obar^2)`.
    rows: Vec<Vec<(T, T, T, T, T, T)>>,
    max_h: T,
}

impl<T: Real> StabilityForm<T> {
    /// Precomputes the form; fails unless `|H| <= 1e-6` at every node.
    pub fn new(p: &ParamPatch<T>, grid: &QuadratureGrid) -> Result<Self> {
        let tol: T = lit(MINIMALITY_TOL);
        let d = p.domain();
        let us = grid.nodes(d[0], d[1], grid.nu);
        let vs = grid.nodes(d[2], d[3], grid.nv);
        let rows: Vec<(Vec<_>, T)> = vs
            .par_iter()
            .map(|&(v, wv)| {
                let mut row = Vec::with_capacity(us.len());
                let mut mh = T::zero();
                for &(u, wu) in &us {
                    let geo = p.geometry(u, v)?;
                    let h = hmc_param(p, u, v)?.h;
                    mh = mh.max(h.abs());
                    let a = geometry_aux_param(p, u, v)?.a.expect("patches live in H^1");
                    let ob = geo.obar();
                    // Z f = (f_u C_v - f_v C_u) / det
                    let (cu, cv) = (geo.c[1] / geo.det, -geo.c[0] / geo.det);
                    row.push((u, v, wu * wv * geo.w(), cu, cv, lit::<T>(2.0) * a - ob * ob));
                }
                Ok((row, mh))
            })
            .collect::<Result<_>>()?;
        let max_h = rows.iter().fold(T::zero(), |m, r| m.max(r.1));
        if max_h > tol {
            return Err(CalcError::NotMinimal { max_h: max_h.to_f64().unwrap_or(f64::NAN), tol: MINIMALITY_TOL });
        }
        Ok(Self { domain: d, grid: *grid, rows: rows.into_iter().map(|r| r.0).collect(), max_h })
    }

    pub fn max_h(&self) -> T {
        self.max_h
    }

    /// `Q(F)` for a bump `F`.
    pub fn q(&self, f: &Bump<T>) -> Result<T> {
        check_support(f, self.domain, &self.grid)?;
        let sums: Vec<T> = self
            .rows
            .iter()
            .map(|row| {
                let vals: Vec<T> = row
                    .iter()
                    .map(|&(u, v, w, cu, cv, c0)| {
                        let fv = f.eval(u, v);
                        if fv == T::zero() {
                            return T::zero();
                        }
                        let (gu, gv) = f.gradient(u, v);
                        let zf = gu * cu + gv * cv;
                        w * (zf * zf + c0 * fv * fv)
                    })
                    .collect();
                pairwise_sum(&vals)
            })
            .collect();
        Ok(pairwise_sum(&sums))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow<T> {
    pub index: usize,
    pub center: (T, T),
    pub radii: (T, T),
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<T> {
    pub min_value: T,
    pub argmin: usize,
    /// First candidate, in lattice order, with a negative value.
    pub witness: Option<usize>,
    pub table: Vec<ScanRow<T>>,
}

/// `Q(F)` over a family of bumps on an H-minimal patch.
pub fn stability_scan<T: Real>(p: &ParamPatch<T>, family: &[Bump<T>], grid: &QuadratureGrid) -> Result<ScanReport<T>> {
    if family.is_empty() {
        return Err(CalcError::InvalidArgument("empty candidate family".into()));
    }
    let form = StabilityForm::new(p, grid)?;
    let values: Vec<T> = family.par_iter().map(|f| form.q(f)).collect::<Result<_>>()?;
    let table: Vec<ScanRow<T>> = family
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(index, (f, &value))| ScanRow { index, center: f.center, radii: f.radii, value })
        .collect();
    let mut argmin = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[argmin] {
            argmin = i;
        }
    }
    let witness = values.iter().position(|v| *v < T::zero());
    Ok(ScanReport { min_value: values[argmin], argmin, witness, table })
}

/// `5 x 5 x 5` lattice of bumps `b((u - u_mid)/s1, (v - c)/s2)`: `s1 = 0.16 k half_u`, `s2 = 0.16 l half_v`
/// for `k, l = 1..5`, and `c = v_mid + 0.04 j half_v` for `j = -2..2`.
pub fn bump_lattice<T: Real>(domain: [T; 4]) -> Vec<Bump<T>> {
    let half: T = lit(0.5);
    let (um, vm) = (half * (domain[0] + domain[1]), half * (domain[2] + domain[3]));
    let (hu, hv) = (half * (domain[1] - domain[0]), half * (domain[3] - domain[2]));
    let mut out = Vec::with_capacity(125);
    for j in -2i32..=2 {
        for k in 1..=5 {
            for l in 1..=5 {
                let c = vm + lit::<T>(0.04 * j as f64) * hv;
                let s1 = lit::<T>(0.16 * k as f64) * hu;
                let s2 = lit::<T>(0.16 * l as f64) * hv;
                out.push(Bump { center: (um, c), radii: (s1, s2), amp: T::one() });
            }
        }
    }
    out
}

/// Both sides of the stability inequality of an H-minimal intrinsic graph; stability holds iff `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntrinsicForm<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> IntrinsicForm<T> {
    /// `Q(F) = rhs - lhs`.
    pub fn q(&self) -> T {
        self.rhs - self.lhs
    }
}

pub fn intrinsic_stability_form<T: Real>(gr: &IntrinsicGraph<T>, f: &Bump<T>, grid: &QuadratureGrid) -> Result<IntrinsicForm<T>> {
    let d = gr.domain();
    check_support(f, d, grid)?;
    let phi = gr.phi();
    let bphi = gr.burgers_fn(phi);
    let phi_v = phi.partial(1);
    let ff = SurfaceFunction::Bump(*f);
    let tol: T = lit(INTRINSIC_MINIMALITY_TOL);
    let side = |left: bool| -> Result<T> {
        Ok(integrate_nodes(d, grid, |u, v| {
            let fv = f.eval(u, v);
            if fv == T::zero() {
                return Ok(Node::Value(T::zero()));
            }
            let bb = gr.burgers(&bphi, u, v);
            if bb.abs() > tol {
                return Err(CalcError::NotMinimal { max_h: bb.abs().to_f64().unwrap_or(f64::NAN), tol: INTRINSIC_MINIMALITY_TOL });
            }
            let b = bphi.eval(u, v);
            let root = (T::one() + b * b).sqrt();
            Ok(Node::Value(if left {
                let pv = phi_v.eval(u, v);
                (pv * pv + lit::<T>(2.0) * gr.burgers(&phi_v, u, v)) * fv * fv / root
            } else {
                gr.burgers(&ff, u, v).powi(2) / root
            }))
        })?
        .value)
    };
    Ok(IntrinsicForm { lhs: side(true)?, rhs: side(false)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn patch(x: &str, y: &str, t: &str, d: [f64; 4]) -> ParamPatch<f64> {
        ParamPatch::from_exprs(x, y, t, d, (16, 16)).unwrap()
    }

    fn paraboloid() -> ParamPatch<f64> {
        patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5])
    }

    #[test]
    fn deformations() {
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let b = Bump::new((0.5, 0.5), (0.3, 0.3), 1.0).unwrap();
        let x = DeformationField::from_bump(b, [1.0, 0.0, 0.0]);
        let d = deform_patch(&vp, &x, 0.1).unwrap();
        for &(u, v) in &[(0.5, 0.5), (0.6, 0.4), (0.9, 0.9)] {
            let pt = d.point(u, v);
            assert!((pt[0] - 0.1 * b.eval(u, v)).abs() < 1e-15);
            assert_eq!(pt[1], u);
        }
        let par = paraboloid();
        let xk = DeformationField::from_bump(Bump::new((1.0, 1.0), (0.3, 0.3), 1.0).unwrap(), [0.0, 0.0, 1.0]);
        let dk = deform_patch(&par, &xk, 0.2).unwrap();
        let (a, bb) = (par.point(1.1, 0.9), dk.point(1.1, 0.9));
        assert_eq!((a[0], a[1]), (bb[0], bb[1]));
        assert!(bb[2] > a[2]);
        let same = deform_patch(&par, &xk, 0.0).unwrap();
        assert_eq!(same.point(0.7, 0.8), par.point(0.7, 0.8));
        // exact tangents of the deformed patch agree with differences of its points
        let xg = DeformationField::from_bump(Bump::new((1.0, 1.0), (0.4, 0.3), 1.0).unwrap(), [0.5, -0.3, 0.8]);
        let dg = deform_patch(&par, &xg, 0.3).unwrap();
        let (tu, _) = dg.tangents(1.1, 0.95);
        for i in 0..3 {
            let fd = diff1(|s| Ok(dg.point(1.1 + s, 0.95)[i]), 1e-4).unwrap();
            assert!((fd - tu[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dls_and_pdpqdq() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let surfaces = [paraboloid(), patch("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0])];
        for p in &surfaces {
            let d = p.domain();
            let c = (0.5 * (d[0] + d[1]), 0.5 * (d[2] + d[3]));
            let r = 0.35 * (d[1] - d[0]);
            let b = Bump::new(c, (r, r), 1.0).unwrap();
            let x = DeformationField::new(
                SurfaceFunction::Bump(b).mul(&SurfaceFunction::parse("1 + u").unwrap()),
                SurfaceFunction::Bump(b).scale(-0.7),
                SurfaceFunction::Bump(b).mul(&SurfaceFunction::parse("v^2 - u").unwrap()),
                Some(b),
            );
            for _ in 0..10 {
                let u = c.0 + rng.gen_range(-0.8..0.8) * r;
                let v = c.1 + rng.gen_range(-0.8..0.8) * r;
                let rep = dls_check(p, &x, u, v).unwrap();
                assert!(rep.max_residual() < 1e-6, "{rep:?}");
            }
        }
    }

    #[test]
    fn first_variation_routes() {
        let g = QuadratureGrid::simpson(128).unwrap();
        let par = paraboloid();
        let b = Bump::new((1.0, 1.0), (0.35, 0.3), 1.0).unwrap();
        let x = DeformationField::from_bump(b, [0.4, -0.2, 0.7]);
        let num = numeric_variation(&par, &x, 1, 1e-4, &g).unwrap();
        let ana = first_variation_analytic(&par, &x, &g).unwrap().value;
        assert!(ana.abs() > 1e-4);
        assert!((num - ana).abs() < 1e-6, "{num} {ana}");
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let xv = DeformationField::from_bump(Bump::new((0.5, 0.5), (0.3, 0.3), 1.0).unwrap(), [1.0, 0.3, 0.2]);
        assert!(numeric_variation(&vp, &xv, 1, 1e-4, &g).unwrap().abs() < 1e-9);
        assert_eq!(numeric_variation(&par, &DeformationField::zero(), 2, 1e-2, &g).unwrap(), 0.0);
        let tang = DeformationField::tangential(&par, b);
        assert!(first_variation_analytic(&par, &tang, &g).unwrap().value.abs() < 1e-12);
        let wide = DeformationField::tangential(&par, Bump::new((1.0, 1.0), (0.45, 0.45), 1.0).unwrap());
        // tangential motion only reparametrises: the variation vanishes as the grid is refined
        let coarse = numeric_variation(&par, &wide, 1, 1e-4, &QuadratureGrid::simpson(64).unwrap()).unwrap();
        let fine = numeric_variation(&par, &wide, 1, 1e-4, &g).unwrap();
        assert!(fine.abs() < 1e-6 && fine.abs() < coarse.abs() / 16.0, "{coarse} {fine}");
        assert!(numeric_variation(&par, &x, 3, 1e-4, &g).is_err());
        assert!(numeric_variation(&par, &x, 1, 0.0, &g).is_err());
    }

    #[test]
    fn normal_deformation() {
        let g = QuadratureGrid::simpson(128).unwrap();
        let par = paraboloid();
        let (num, ana) = normal_first_variation(&par, Bump::new((1.0, 1.0), (0.3, 0.35), 1.0).unwrap(), &g).unwrap();
        assert!(ana.abs() > 1e-3);
        assert!((num - ana).abs() < 1e-6, "{num} {ana}");
    }

    #[test]
    fn second_variation_on_vertical_plane() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let f = Bump::new((0.5, 0.5), (0.3, 0.35), 1.0).unwrap();
        let x = DeformationField::normal(&vp, f);
        let geo = second_variation(&vp, &x, SecondVariationMode::Geometric, &g).unwrap().value;
        let full = second_variation(&vp, &x, SecondVariationMode::Full, &g).unwrap().value;
        // On x = 0 with this orientation Z = -d/du, so Q(F) = int F_u^2.
        let direct = integrate_nodes([0.0, 1.0, 0.0, 1.0], &g, |u, v| Ok(Node::Value(f.gradient(u, v).0.powi(2)))).unwrap().value;
        assert!(geo > 0.0);
        assert!((geo - direct).abs() < 1e-6 * direct);
        assert!((full - geo).abs() < 1e-4);
    }

    #[test]
    fn second_variation_routes_on_xyt() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let xyt = patch("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0]);
        let b = Bump::new((0.1, -0.05), (0.6, 0.55), 1.0).unwrap();
        let x = DeformationField::from_bump(b, [0.6, -0.4, 0.9]);
        let full = second_variation(&xyt, &x, SecondVariationMode::Full, &g).unwrap().value;
        let num = numeric_variation(&xyt, &x, 2, 1e-2, &g).unwrap();
        let geo = second_variation(&xyt, &x, SecondVariationMode::Geometric, &g).unwrap().value;
        assert!((num - full).abs() < 1e-2 * full.abs(), "{num} {full}");
        assert!((geo - full).abs() < 1e-3 * full.abs(), "{geo} {full}");
        assert!(matches!(
            second_variation(&paraboloid(), &DeformationField::from_bump(Bump::new((1.0, 1.0), (0.3, 0.3), 1.0).unwrap(), [1.0, 0.0, 0.0]), SecondVariationMode::Geometric, &g),
            Err(CalcError::NotMinimal { .. })
        ));
    }

    #[test]
    fn stability_form_matches_geometric_variation() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let xyt = patch("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0]);
        let f = Bump::new((0.1, 0.2), (0.6, 0.5), 1.0).unwrap();
        let form = StabilityForm::new(&xyt, &g).unwrap();
        let geo = second_variation(&xyt, &DeformationField::normal(&xyt, f), SecondVariationMode::Geometric, &g).unwrap().value;
        assert!((form.q(&f).unwrap() - geo).abs() < 1e-6 * geo.abs().max(1.0));
        assert!(StabilityForm::new(&paraboloid(), &g).is_err());
    }

    #[test]
    fn vertical_plane_is_stable_and_xyt_is_not() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let vp = patch("0", "u", "v", [-1.0, 1.0, -1.0, 1.0]);
        let rep = stability_scan(&vp, &bump_lattice(vp.domain()), &g).unwrap();
        assert!(rep.min_value > 0.0 && rep.witness.is_none());
        let xyt = patch("u v", "u", "v", [-5.0, 5.0, -2.5, 2.5]);
        let rep = stability_scan(&xyt, &bump_lattice(xyt.domain()), &QuadratureGrid::simpson(128).unwrap()).unwrap();
        assert_eq!(rep.table.len(), 125);
        assert!(rep.min_value < -1e-6, "{}", rep.min_value);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn intrinsic_forms() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let d = [-1.0, 1.0, -1.0, 1.0];
        let f = Bump::new((0.0, 0.1), (0.7, 0.6), 1.0).unwrap();
        let zero = IntrinsicGraph::new(SurfaceFunction::<f64>::zero(), d, (16, 16)).unwrap();
        let r = intrinsic_stability_form(&zero, &f, &g).unwrap();
        let fu2 = integrate_nodes(d, &g, |u, v| Ok(Node::Value(f.gradient(u, v).0.powi(2)))).unwrap().value;
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - fu2).abs() < 1e-14);
        let lin = IntrinsicGraph::new(SurfaceFunction::parse("0.8 u").unwrap(), d, (16, 16)).unwrap();
        let r = intrinsic_stability_form(&lin, &f, &g).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.rhs > 0.0);
        let patch = lin.to_patch().unwrap();
        let geo = second_variation(&patch, &DeformationField::normal(&patch, f), SecondVariationMode::Geometric, &g).unwrap().value;
        assert!((geo - r.q()).abs() < 1e-6, "{geo} {}", r.q());
        // v / u is H-minimal with phi_v != 0
        let vu = IntrinsicGraph::<f64>::new(SurfaceFunction::parse("v/u").unwrap(), [1.0, 2.0, -0.5, 0.5], (16, 16)).unwrap();
        let fb = Bump::new((1.5, 0.0), (0.35, 0.35), 1.0).unwrap();
        let r = intrinsic_stability_form(&vu, &fb, &g).unwrap();
        let patch = vu.to_patch().unwrap();
        let geo = second_variation(&patch, &DeformationField::normal(&patch, fb), SecondVariationMode::Geometric, &g).unwrap().value;
        assert!(r.lhs != 0.0);
        assert!((geo - r.q()).abs() < 1e-6, "{geo} {}", r.q());
        let uv = IntrinsicGraph::new(SurfaceFunction::parse("u v").unwrap(), d, (16, 16)).unwrap();
        assert!(matches!(intrinsic_stability_form(&uv, &f, &g), Err(CalcError::NotMinimal { .. })));
    }
}
