//! Quadrature of the H-perimeter measure `dsigma_H = W du dv` on patches and the integral identities
//! built on it: regularised areas, dilation scaling, integration by parts, Stokes and the flow identity.
//!
//! Node values are summed row by row with pairwise reduction and the row totals are reduced the same
//! way, so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{geometry_aux_levelset, hmc_levelset, hmc_param};
use crate::error::{CalcError, Result};
use crate::field_calculus::{horizontal_jet, ScalarField};
use crate::hypersurface::{LevelSetSurface, ParamPatch, PatchGeometry};
use crate::numerics::pairwise_sum;
use crate::scalar::{count, dot, lit, Real};
use crate::surface_function::{Bump, SurfaceFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    Midpoint,
    Simpson,
}

/// Tensor-product rule on the parameter rectangle with `nu x nv` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadratureGrid {
    pub rule: QuadratureRule,
    pub nu: usize,
    pub nv: usize,
}

pub const DEFAULT_CELLS: usize = 128;

impl QuadratureGrid {
    pub fn new(rule: QuadratureRule, nu: usize, nv: usize) -> Result<Self> {
        if nu < 8 || nv < 8 {
            return Err(CalcError::InvalidArgument(format!("quadrature grid {nu} x {nv} is below 8 x 8")));
        }
        if rule == QuadratureRule::Simpson && (nu % 2 != 0 || nv % 2 != 0) {
            return Err(CalcError::InvalidArgument(format!("Simpson needs even cell counts, got {nu} x {nv}")));
        }
        Ok(Self { rule, nu, nv })
    }

    pub fn simpson(n: usize) -> Result<Self> {
        Self::new(QuadratureRule::Simpson, n, n)
    }

    /// Simpson on the patch's own grid metadata (rounded up to even counts).
    pub fn for_patch<T: Real>(p: &ParamPatch<T>) -> Self {
        let (a, b) = p.grid();
        Self { rule: QuadratureRule::Simpson, nu: a + a % 2, nv: b + b % 2 }
    }

    /// Coarser companion grid used for the error estimate.
    fn coarse(&self) -> Self {
        let half = |n: usize| match self.rule {
            QuadratureRule::Simpson => (n / 2 + (n / 2) % 2).max(2),
            QuadratureRule::Midpoint => (n / 2).max(1),
        };
        Self { rule: self.rule, nu: half(self.nu), nv: half(self.nv) }
    }

    fn order(&self) -> i32 {
        match self.rule {
            QuadratureRule::Simpson => 4,
            QuadratureRule::Midpoint => 2,
        }
    }

    /// Abscissae and weights along one axis.
    pub fn nodes<T: Real>(&self, a: T, b: T, n: usize) -> Vec<(T, T)> {
        let h = (b - a) / count::<T>(n);
        match self.rule {
            QuadratureRule::Midpoint => (0..n).map(|i| (a + (count::<T>(i) + lit(0.5)) * h, h)).collect(),
            QuadratureRule::Simpson => (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    // The last node sits exactly on the boundary.
                    let x = if i == n { b } else { a + count::<T>(i) * h };
                    (x, lit::<T>(w) * h / lit(3.0))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult<T> {
    pub value: T,
    /// Richardson estimate from the grid and its coarse companion; never negative.
    pub error_estimate: T,
    /// `W`-mass of nodes skipped as characteristic.
    pub excluded_mass: T,
}

/// Value of the integrand at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node<T> {
    /// Integrand times the density.
    Value(T),
    /// Characteristic node; carries its `W` so the skipped mass is reported.
    Excluded(T),
}

/// Returns `(value, excluded mass, number of included nodes)`.
fn sum_grid<T, F>(domain: [T; 4], grid: &QuadratureGrid, f: &F) -> Result<(T, T, usize)>
where
    T: Real,
    F: Fn(T, T) -> Result<Node<T>> + Sync,
{
    let us = grid.nodes(domain[0], domain[1], grid.nu);
    let vs = grid.nodes(domain[2], domain[3], grid.nv);
    let rows: Vec<(T, T, usize)> = vs
        .par_iter()
        .map(|&(v, wv)| {
            let mut vals = Vec::with_capacity(us.len());
            let mut excl = Vec::new();
            for &(u, wu) in &us {
                match f(u, v)? {
                    Node::Value(x) => vals.push(wu * x),
                    Node::Excluded(w) => excl.push(wu * w),
                }
            }
            Ok((wv * pairwise_sum(&vals), wv * pairwise_sum(&excl), vals.len()))
        })
        .collect::<Result<_>>()?;
    let value = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let excluded = pairwise_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    if !value.is_finite() {
        return Err(CalcError::NumericFailure("non-finite quadrature value".into()));
    }
    Ok((value, excluded, rows.iter().map(|r| r.2).sum()))
}

/// Integrates node values over a rectangle, with a Richardson error estimate from a coarser grid.
pub fn integrate_nodes<T, F>(domain: [T; 4], grid: &QuadratureGrid, f: F) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(T, T) -> Result<Node<T>> + Sync,
{
    let (fine, excluded, included) = sum_grid(domain, grid, &f)?;
    if included == 0 {
        return Err(CalcError::DegenerateSurface("every quadrature node is characteristic".into()));
    }
    let cg = grid.coarse();
    let (coarse, _, _) = sum_grid(domain, &cg, &f)?;
    let ratio = count::<T>(grid.nu) / count::<T>(cg.nu);
    let err = (fine - coarse).abs() / (ratio.powi(grid.order()) - T::one());
    Ok(IntegralResult { value: fine, error_estimate: err, excluded_mass: excluded })
}

/// `int f(geometry) dsigma_H` over the patch; characteristic nodes are excluded and their mass reported.
pub fn integrate_density<T, F>(p: &ParamPatch<T>, grid: &QuadratureGrid, f: F) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(&PatchGeometry<T>) -> Result<T> + Sync,
{
    integrate_nodes(p.domain(), grid, |u, v| {
        let fr = p.frame_unchecked(u, v)?;
        if fr.is_characteristic() {
            return Ok(Node::Excluded(fr.w));
        }
        let geo = p.geometry(u, v)?;
        Ok(Node::Value(f(&geo)? * fr.w))
    })
}

/// `int f dsigma_H`; with `f = 1` this is the H-perimeter of the patch.
pub fn integrate_sigma_h<T: Real>(p: &ParamPatch<T>, f: &SurfaceFunction<T>, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    integrate_nodes(p.domain(), grid, |u, v| {
        let fr = p.frame_unchecked(u, v)?;
        if fr.is_characteristic() {
            return Ok(Node::Excluded(fr.w));
        }
        Ok(Node::Value(f.eval(u, v) * fr.w))
    })
}

pub fn perimeter<T: Real>(p: &ParamPatch<T>, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    integrate_sigma_h(p, &SurfaceFunction::constant(T::one()), grid)
}

/// Perimeter value on the given grid only, without the coarse companion pass.
pub(crate) fn perimeter_value<T: Real>(p: &ParamPatch<T>, grid: &QuadratureGrid) -> Result<T> {
    let (value, _, included) = sum_grid(p.domain(), grid, &|u, v| {
        let fr = p.frame_unchecked(u, v)?;
        Ok(if fr.is_characteristic() { Node::Excluded(fr.w) } else { Node::Value(fr.w) })
    })?;
    if included == 0 {
        return Err(CalcError::DegenerateSurface("every quadrature node is characteristic".into()));
    }
    Ok(value)
}

/// Riemannian regularisation `int sqrt(p^2 + q^2 + eps omega^2) du dv`.
pub fn eps_area<T: Real>(p: &ParamPatch<T>, eps: T, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    if !(eps >= T::zero()) {
        return Err(CalcError::InvalidArgument(format!("epsilon must be nonnegative, got {eps}")));
    }
    if eps == T::zero() {
        return perimeter(p, grid);
    }
    integrate_nodes(p.domain(), grid, |u, v| {
        let [a, b, c] = p.normal_components(u, v);
        Ok(Node::Value((a * a + b * b + eps * c * c).sqrt()))
    })
}

/// `P_H(delta_lambda S) / P_H(S)`.
pub fn scaling_ratio<T: Real>(p: &ParamPatch<T>, lambda: T, grid: &QuadratureGrid) -> Result<T> {
    let d = p.dilate(lambda)?;
    Ok(perimeter(&d, grid)?.value / perimeter(p, grid)?.value)
}

/// Rejects test functions whose support is not at least one cell inside the rectangle.
pub fn check_support<T: Real>(b: &Bump<T>, domain: [T; 4], grid: &QuadratureGrid) -> Result<()> {
    if b.amp == T::zero() {
        return Ok(());
    }
    let hu = (domain[1] - domain[0]) / count::<T>(grid.nu);
    let hv = (domain[3] - domain[2]) / count::<T>(grid.nv);
    let ok = b.center.0 - b.radii.0 >= domain[0] + hu
        && b.center.0 + b.radii.0 <= domain[1] - hu
        && b.center.1 - b.radii.1 >= domain[2] + hv
        && b.center.1 + b.radii.1 <= domain[3] - hv;
    if !ok {
        return Err(CalcError::Support(format!(
            "bump centred at ({}, {}) with radii ({}, {}) reaches the patch boundary",
            b.center.0, b.center.1, b.radii.0, b.radii.1
        )));
    }
    Ok(())
}

/// Integrates `f` over the patch where the bump is supported; nodes outside the support contribute 0.
/// A characteristic node inside the support is an error.
pub(crate) fn integrate_on_support<T, F>(p: &ParamPatch<T>, b: &Bump<T>, grid: &QuadratureGrid, f: F) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(&PatchGeometry<T>) -> Result<T> + Sync,
{
    check_support(b, p.domain(), grid)?;
    integrate_nodes(p.domain(), grid, |u, v| {
        if b.eval(u, v) == T::zero() {
            return Ok(Node::Value(T::zero()));
        }
        let fr = p.frame_unchecked(u, v)?;
        if fr.is_characteristic() {
            return Err(CalcError::Support(format!("test function is nonzero at the characteristic point ({u}, {v})")));
        }
        let geo = p.geometry(u, v)?;
        Ok(Node::Value(f(&geo)? * fr.w))
    })
}

/// Integration-by-parts identity to test.
#[derive(Debug, Clone)]
pub enum IbpKind<T> {
    /// `int Z zeta + int zeta obar = 0`.
    Z { zeta: Bump<T> },
    /// `int f D zeta + int zeta D f - int f zeta obar H = 0` with `D = T - obar Y`.
    TY { f: SurfaceFunction<T>, zeta: Bump<T> },
    /// `int nabla^{H,S}_i u - int u (H nu_i - c_i) = 0`, `i` in `{0, 1}`.
    General { i: usize, u: Bump<T> },
}

/// Signed quadrature value of the identity; the residual is its absolute value.
pub fn ibp_residual<T: Real>(p: &ParamPatch<T>, kind: &IbpKind<T>, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    match kind {
        IbpKind::Z { zeta } => integrate_on_support(p, zeta, grid, |geo| {
            let (zu, zv) = zeta.gradient(geo.u, geo.v);
            let d = geo.frame_derivatives(zu, zv)?;
            Ok(d.z + zeta.eval(geo.u, geo.v) * geo.obar())
        }),
        IbpKind::TY { f, zeta } => integrate_on_support(p, zeta, grid, |geo| {
            let (u, v) = (geo.u, geo.v);
            let (zu, zv) = zeta.gradient(u, v);
            let dz = geo.frame_derivatives(zu, zv)?.d;
            let (fu, fv) = f.gradient(u, v);
            let df = geo.frame_derivatives(fu, fv)?.d;
            let h = hmc_param(p, u, v)?.h;
            let (fval, zval) = (f.eval(u, v), zeta.eval(u, v));
            Ok(fval * dz + zval * df - fval * zval * geo.obar() * h)
        }),
        IbpKind::General { i, u: bump } => {
            if *i > 1 {
                return Err(CalcError::IndexOutOfRange(format!("horizontal index {i} on a surface in H^1")));
            }
            let i = *i;
            integrate_on_support(p, bump, grid, |geo| {
                let (u, v) = (geo.u, geo.v);
                let (gu, gv) = bump.gradient(u, v);
                let zf = geo.frame_derivatives(gu, gv)?.z;
                let (pb, qb, ob) = (geo.pbar(), geo.qbar(), geo.obar());
                let zi = if i == 0 { qb } else { -pb };
                let nu_i = if i == 0 { pb } else { qb };
                let h = hmc_param(p, u, v)?.h;
                Ok(zi * zf - bump.eval(u, v) * (h * nu_i - ob * zi))
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianVariant {
    Plain,
    Hat,
}

/// Tangential horizontal Laplacian of `u` on a level set, from any extension `u` of the surface data:
/// `lap_H u - <hess_H u nu, nu> - <grad_H u, nu> H`, plus `<c^{H,S}, grad_H u>` for the hat variant.
pub fn tangential_laplacian<T: Real>(s: &LevelSetSurface<T>, u: &ScalarField<T>, g: &[T], variant: LaplacianVariant) -> Result<T> {
    let fr = s.frame(g)?;
    let nu = fr.unit()?.pbar.clone();
    let jet = horizontal_jet(s.group(), u, g, s.engine())?;
    let m = nu.len();
    let mut hnn = T::zero();
    for i in 0..m {
        for j in 0..m {
            hnn = hnn + jet.hess(i, j) * nu[i] * nu[j];
        }
    }
    let h = hmc_levelset(s, g)?.h;
    let mut out = jet.lap_h - hnn - dot(&jet.grad_h, &nu) * h;
    if variant == LaplacianVariant::Hat {
        let aux = geometry_aux_levelset(s, g)?;
        out = out + dot(&aux.c_hs, &jet.grad_h);
    }
    Ok(out)
}

/// Tangential horizontal Laplacian on a patch: `Z(Z f)`, plus `obar Z f` for the hat variant.
pub fn tangential_laplacian_patch<T: Real>(
    p: &ParamPatch<T>,
    f: &SurfaceFunction<T>,
    u: T,
    v: T,
    variant: LaplacianVariant,
) -> Result<T> {
    let geo = p.geometry(u, v)?;
    let (fu, fv) = f.gradient(u, v);
    let zf = geo.frame_derivatives(fu, fv)?.z;
    let zzf = p.zy_derivative(|a, b| p.zy_of(f, a, b).map(|d| d.z), u, v)?.z;
    Ok(match variant {
        LaplacianVariant::Plain => zzf,
        LaplacianVariant::Hat => zzf + geo.obar() * zf,
    })
}

/// `|int hat-Laplacian(u) dsigma_H|` for a bump `u`.
pub fn stokes_residual<T: Real>(p: &ParamPatch<T>, u: &Bump<T>, grid: &QuadratureGrid) -> Result<IntegralResult<T>> {
    let f = SurfaceFunction::Bump(*u);
    let mut r = integrate_on_support(p, u, grid, |geo| tangential_laplacian_patch(p, &f, geo.u, geo.v, LaplacianVariant::Hat))?;
    r.value = r.value.abs();
    Ok(r)
}

/// Residual `|<Lap_{H,S} F, N> + H W|` of the flow identity, with the Laplacians of the coordinate
/// functions computed on the patch and converted to the frame by `aX1 + bX2 + cT = (a, b, c + (bx - ay)/2)`.
pub fn mcf_residual<T: Real>(p: &ParamPatch<T>, u: T, v: T) -> Result<T> {
    let fr = p.frame(u, v)?;
    fr.unit()?;
    let comps = p.components();
    let lap = |k: usize| tangential_laplacian_patch(p, &comps[k], u, v, LaplacianVariant::Plain);
    let (lx, ly, lt) = (lap(0)?, lap(1)?, lap(2)?);
    let (x, y) = (fr.point[0], fr.point[1]);
    let half: T = lit(0.5);
    let c = lt + half * (y * lx - x * ly);
    let lhs = lx * fr.p() + ly * fr.q() + c * fr.omega();
    let h = hmc_param(p, u, v)?.h;
    Ok((lhs + h * fr.w).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_calculus::{field_by_id, DerivativeEngine};
    use crate::carnot_group::{build_group, Preset};
    use rand::{Rng, SeedableRng};

    fn patch(x: &str, y: &str, t: &str, d: [f64; 4]) -> ParamPatch<f64> {
        ParamPatch::from_exprs(x, y, t, d, (16, 16)).unwrap()
    }

    /// Reference 2-D Gauss-Legendre quadrature (8 points per panel) used as an independent oracle.
    fn gauss_ref(d: [f64; 4], panels: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        const X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
        const W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
        let nodes: Vec<(f64, f64)> = X.iter().zip(W).flat_map(|(&x, w)| [(-x, w), (x, w)]).collect();
        let axis = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let h = (b - a) / panels as f64;
            (0..panels)
                .flat_map(|k| {
                    let c = a + (k as f64 + 0.5) * h;
                    nodes.iter().map(move |&(x, w)| (c + 0.5 * h * x, 0.5 * h * w)).collect::<Vec<_>>()
                })
                .collect()
        };
        let (us, vs) = (axis(d[0], d[1]), axis(d[2], d[3]));
        let mut s = 0.0;
        for &(v, wv) in &vs {
            for &(u, wu) in &us {
                s += wu * wv * f(u, v);
            }
        }
        s
    }

    #[test]
    fn grid_validation() {
        assert!(QuadratureGrid::simpson(7).is_err());
        assert!(QuadratureGrid::simpson(10).is_ok());
        assert!(QuadratureGrid::new(QuadratureRule::Simpson, 9, 10).is_err());
        assert!(QuadratureGrid::new(QuadratureRule::Midpoint, 9, 10).is_ok());
    }

    #[test]
    fn perimeters_of_simple_patches() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let x0 = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let r = perimeter(&x0, &g).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert_eq!(r.excluded_mass, 0.0);
        let t0 = patch("u", "v", "0", [1.0, 2.0, 0.0, 1.0]);
        let reference = gauss_ref([1.0, 2.0, 0.0, 1.0], 16, |u, v| (u * u + v * v).sqrt() / 2.0);
        assert!((perimeter(&t0, &g).unwrap().value - reference).abs() < 1e-10);
        let xyt = patch("u v", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let reference = gauss_ref([0.0, 1.0, 0.0, 1.0], 16, |u, v| (1.0 + u * u / 2.0).abs() * (1.0 + v * v).sqrt());
        let coarse = perimeter(&xyt, &g).unwrap();
        let r = perimeter(&xyt, &QuadratureGrid::simpson(256).unwrap()).unwrap();
        assert!((r.value - reference).abs() < 1e-11, "{} {reference}", r.value);
        assert!(coarse.error_estimate > 0.0 && coarse.error_estimate < 1e-8);
        assert!((coarse.value - reference).abs() < 10.0 * coarse.error_estimate);
    }

    #[test]
    fn simpson_convergence() {
        let t0 = patch("u", "v", "u^2 - v", [1.0, 2.0, 0.0, 1.0]);
        let reference = gauss_ref([1.0, 2.0, 0.0, 1.0], 32, |u, v| t0.frame_unchecked(u, v).unwrap().w);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| (perimeter(&t0, &QuadratureGrid::simpson(n).unwrap()).unwrap().value - reference).abs())
            .collect();
        assert!(errs[0] / errs[1] >= 3.0 && errs[1] / errs[2] >= 3.0, "{errs:?}");
    }

    #[test]
    fn characteristic_nodes_are_reported() {
        let t0 = patch("u", "v", "0", [-1.0, 1.0, -1.0, 1.0]);
        let r = perimeter(&t0, &QuadratureGrid::simpson(16).unwrap()).unwrap();
        assert_eq!(r.excluded_mass, 0.0);
        assert!(r.value > 0.0);
        let line = patch("u", "0", "0", [-1.0, 1.0, -1.0, 1.0]);
        assert!(perimeter(&line, &QuadratureGrid::simpson(8).unwrap()).is_err());
    }

    #[test]
    fn eps_area_behaviour() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let t0 = patch("u", "v", "0", [1.0, 2.0, 0.0, 1.0]);
        let base = perimeter(&t0, &g).unwrap().value;
        assert_eq!(eps_area(&t0, 0.0, &g).unwrap().value, base);
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let a = eps_area(&t0, eps, &g).unwrap().value;
            assert!(a >= base && a <= prev);
            prev = a;
        }
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(eps_area(&vp, 0.3, &g).unwrap().value, eps_area(&vp, 0.0, &g).unwrap().value);
        assert!(eps_area(&vp, -1.0, &g).is_err());
    }

    #[test]
    fn dilation_and_translation() {
        let g = QuadratureGrid::simpson(32).unwrap();
        let par = patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5]);
        for lambda in [0.5f64, 2.0, 5.0] {
            let r = scaling_ratio(&par, lambda, &g).unwrap();
            assert!((r / lambda.powi(3) - 1.0).abs() < 1e-12);
        }
        let a = perimeter(&par, &g).unwrap().value;
        let b = perimeter(&par.left_translate([0.3, -2.0, 1.5]).unwrap(), &g).unwrap().value;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn determinism_across_pools() {
        let g = QuadratureGrid::simpson(64).unwrap();
        let par = patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5]);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| perimeter(&par, &g).unwrap());
        let b = four.install(|| perimeter(&par, &g).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn ibp_identities() {
        let g = QuadratureGrid::simpson(128).unwrap();
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        let bump = Bump::new((0.5, 0.45), (0.3, 0.35), 1.0).unwrap();
        let r = ibp_residual(&vp, &IbpKind::Z { zeta: bump }, &g).unwrap();
        assert!(r.value.abs() < 1e-6);
        let zero = Bump::new((0.5, 0.5), (0.2, 0.2), 0.0).unwrap();
        assert_eq!(ibp_residual(&vp, &IbpKind::Z { zeta: zero }, &g).unwrap().value, 0.0);
        let par = patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5]);
        let b2 = Bump::new((1.0, 1.05), (0.35, 0.3), 1.0).unwrap();
        for kind in [
            IbpKind::Z { zeta: b2 },
            IbpKind::TY { f: SurfaceFunction::parse("1 + u v^2").unwrap(), zeta: b2 },
            IbpKind::General { i: 0, u: b2 },
            IbpKind::General { i: 1, u: b2 },
        ] {
            let r = ibp_residual(&par, &kind, &g).unwrap();
            assert!(r.value.abs() < 1e-4, "{kind:?}: {}", r.value);
        }
        let edge = Bump::new((0.55, 1.0), (0.3, 0.3), 1.0).unwrap();
        assert!(matches!(ibp_residual(&par, &IbpKind::Z { zeta: edge }, &g), Err(CalcError::Support(_))));
        let t0 = patch("u", "v", "0", [-1.0, 1.0, -1.0, 1.0]);
        let over_origin = Bump::new((0.0, 0.0), (0.5, 0.5), 1.0).unwrap();
        assert!(matches!(ibp_residual(&t0, &IbpKind::Z { zeta: over_origin }, &g), Err(CalcError::Support(_))));
    }

    #[test]
    fn stokes() {
        let g = QuadratureGrid::simpson(128).unwrap();
        let t0 = patch("u", "v", "0", [0.5, 1.5, -0.5, 0.5]);
        let b = Bump::new((1.0, 0.0), (0.4, 0.4), 1.0).unwrap();
        assert!(stokes_residual(&t0, &b, &g).unwrap().value < 1e-4);
        let zero = Bump::new((1.0, 0.0), (0.4, 0.4), 0.0).unwrap();
        assert_eq!(stokes_residual(&t0, &zero, &g).unwrap().value, 0.0);
    }

    #[test]
    fn tangential_laplacians_of_coordinates() {
        let g = build_group::<f64>(&Preset::Heisenberg(1)).unwrap();
        let phi = field_by_id(&g, "poly:t - x^2 - y^2").unwrap();
        let s = LevelSetSurface::new(g.clone(), phi, DerivativeEngine::analytic()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (x, y): (f64, f64) = (rng.gen_range(0.4..1.5), rng.gen_range(-1.5..1.5));
            let pt = [x, y, x * x + y * y];
            let fr = s.frame(&pt).unwrap();
            let h = hmc_levelset(&s, &pt).unwrap().h;
            let (pb, qb) = (fr.pbar().unwrap(), fr.qbar().unwrap());
            let lx = tangential_laplacian(&s, &ScalarField::coordinate(3, 0).unwrap(), &pt, LaplacianVariant::Plain).unwrap();
            let ly = tangential_laplacian(&s, &ScalarField::coordinate(3, 1).unwrap(), &pt, LaplacianVariant::Plain).unwrap();
            let lt = tangential_laplacian(&s, &ScalarField::coordinate(3, 2).unwrap(), &pt, LaplacianVariant::Plain).unwrap();
            assert!((lx + pb * h).abs() < 1e-10);
            assert!((ly + qb * h).abs() < 1e-10);
            assert!((lt + 0.5 * (x * qb - y * pb) * h).abs() < 1e-10);
            let one = ScalarField::new(3, |_| 2.5);
            assert!(tangential_laplacian(&s, &one, &pt, LaplacianVariant::Hat).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn patch_laplacian_matches_levelset() {
        let g = build_group::<f64>(&Preset::Heisenberg(1)).unwrap();
        let phi = field_by_id(&g, "poly:t - x^2 - y^2").unwrap();
        let s = LevelSetSurface::new(g, phi, DerivativeEngine::analytic()).unwrap();
        let par = patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5]);
        let f = SurfaceFunction::parse("u^2 v").unwrap();
        let ext = ScalarField::from_expr(crate::expr::Expr::parse("x^2 y", &["x", "y", "t"]).unwrap());
        for &(u, v) in &[(0.8, 1.2), (1.3, 0.6)] {
            for variant in [LaplacianVariant::Plain, LaplacianVariant::Hat] {
                let a = tangential_laplacian_patch(&par, &f, u, v, variant).unwrap();
                let b = tangential_laplacian(&s, &ext, &par.point(u, v), variant).unwrap();
                assert!((a - b).abs() < 1e-6, "{a} {b}");
            }
        }
    }

    #[test]
    fn flow_identity() {
        let vp = patch("0", "u", "v", [0.0, 1.0, 0.0, 1.0]);
        assert!(mcf_residual(&vp, 0.3, 0.6).unwrap() < 1e-12);
        let par = patch("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5]);
        let xyt = patch("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0]);
        for &(u, v) in &[(0.7, 0.9), (1.2, 1.4), (0.55, 1.3)] {
            assert!(mcf_residual(&par, u, v).unwrap() < 1e-4);
            assert!(mcf_residual(&xyt, u - 0.6, v - 0.8).unwrap() < 1e-5);
        }
    }
}
