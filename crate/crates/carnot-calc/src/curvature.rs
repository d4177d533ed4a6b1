//! Horizontal mean curvature by independent routes, and the auxiliary quantities
//! `c^{H,S}`, `A = -Z obar` and the pseudo-hermitian check.
//!
//! Sign convention: `H = X1 pbar + X2 qbar`, the horizontal divergence of the unit
//! horizontal normal. Every other route is checked against it.

use serde::Serialize;

use crate::carnot_group::GroupKind;
use crate::error::{CalcError, Result};
use crate::field_calculus::{frame_derivative, horizontal_jet};
use crate::hypersurface::{IntrinsicGraph, LevelSetSurface, ParamPatch};
use crate::scalar::{default_step, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureRoute {
    LevelSet,
    Divergence,
    Param,
    Pauls,
    Intrinsic,
}

/// Sub-terms of the level-set formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetTerms<T> {
    pub lap_h: T,
    pub inf_h: T,
    pub grad_h_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport<T> {
    pub h: T,
    pub route: CurvatureRoute,
    pub w: T,
    pub terms: Option<LevelSetTerms<T>>,
}

/// `H = (|grad_H phi|^2 lap_H phi - inf_H phi) / |grad_H phi|^3`.
pub fn hmc_levelset<T: Real>(s: &LevelSetSurface<T>, g: &[T]) -> Result<CurvatureReport<T>> {
    let frame = s.frame(g)?;
    frame.unit()?;
    let jet = horizontal_jet(s.group(), s.phi(), g, s.engine())?;
    let n2 = jet.grad_h.iter().fold(T::zero(), |a, &x| a + x * x);
    let n = n2.sqrt();
    let h = (n2 * jet.lap_h - jet.inf_h) / (n2 * n);
    Ok(CurvatureReport {
        h,
        route: CurvatureRoute::LevelSet,
        w: frame.w,
        terms: Some(LevelSetTerms { lap_h: jet.lap_h, inf_h: jet.inf_h, grad_h_norm: n }),
    })
}

/// `H = sum_i X_i pbar_i` with `pbar_i = X_i phi / |grad_H phi|` as an ambient field.
pub fn hmc_divergence<T: Real>(s: &LevelSetSurface<T>, g: &[T]) -> Result<CurvatureReport<T>> {
    let frame = s.frame(g)?;
    frame.unit()?;
    let h_step = default_step();
    let mut h = T::zero();
    for i in 0..s.group().horizontal_dim() {
        let pbar_i = |x: &[T]| -> Result<T> { Ok(s.frame(x)?.unit()?.pbar[i]) };
        h = h + frame_derivative(s.group(), i, pbar_i, g, h_step)?;
    }
    Ok(CurvatureReport { h, route: CurvatureRoute::Divergence, w: frame.w, terms: None })
}

/// `H = qbar Z pbar - pbar Z qbar` on a patch.
pub fn hmc_param<T: Real>(p: &ParamPatch<T>, u: T, v: T) -> Result<CurvatureReport<T>> {
    let frame = p.frame(u, v)?;
    let (pb, qb) = (frame.pbar()?, frame.qbar()?);
    let zp = p.zy_derivative(|a, b| p.frame_unchecked(a, b)?.pbar(), u, v)?.z;
    let zq = p.zy_derivative(|a, b| p.frame_unchecked(a, b)?.qbar(), u, v)?.z;
    Ok(CurvatureReport { h: qb * zp - pb * zq, route: CurvatureRoute::Param, w: frame.w, terms: None })
}

/// Riemannian approximations `H^eps` and their extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PaulsReport<T> {
    pub eps: Vec<T>,
    pub values: Vec<T>,
    pub limit: T,
}

/// `H^eps = X1(a pbar) + X2(a qbar) + eps T(a obar)` with `a = W / sqrt(W^2 + eps omega^2)`.
pub fn hmc_pauls<T: Real>(s: &LevelSetSurface<T>, g: &[T], eps_list: &[T]) -> Result<PaulsReport<T>> {
    if s.group().kind() != GroupKind::Heisenberg(1) {
        return Err(CalcError::Unsupported("Riemannian approximations are implemented on the first Heisenberg group".into()));
    }
    if eps_list.is_empty()
        || eps_list.iter().any(|&e| !(e > T::zero()))
        || eps_list.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(CalcError::InvalidArgument("epsilon list must be positive and strictly decreasing".into()));
    }
    s.frame(g)?.unit()?;
    let h_step = default_step();
    let mut values = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let comp = |k: usize| {
            move |x: &[T]| -> Result<T> {
                let fr = s.frame(x)?;
                let u = fr.unit()?;
                let alpha = fr.w / (fr.w * fr.w + eps * fr.omega() * fr.omega()).sqrt();
                Ok(alpha * if k < 2 { u.pbar[k] } else { u.obar[0] })
            }
        };
        let v = frame_derivative(s.group(), 0, comp(0), g, h_step)?
            + frame_derivative(s.group(), 1, comp(1), g, h_step)?
            + eps * frame_derivative(s.group(), 2, comp(2), g, h_step)?;
        values.push(v);
    }
    let limit = extrapolate_to_zero(eps_list, &values);
    Ok(PaulsReport { eps: eps_list.to_vec(), values, limit })
}

/// Polynomial extrapolation to 0 through the (up to) three smallest abscissae.
fn extrapolate_to_zero<T: Real>(x: &[T], y: &[T]) -> T {
    let k = x.len().min(3);
    let xs = &x[x.len() - k..];
    let ys = &y[y.len() - k..];
    let mut acc = T::zero();
    for i in 0..k {
        let mut w = T::one();
        for j in 0..k {
            if i != j {
                w = w * xs[j] / (xs[j] - xs[i]);
            }
        }
        acc = acc + w * ys[i];
    }
    acc
}

/// `-H = B(B phi / sqrt(1 + (B phi)^2))`, with `B F = F_u + phi F_v`.
pub fn hmc_intrinsic<T: Real>(gr: &IntrinsicGraph<T>, u: T, v: T) -> Result<CurvatureReport<T>> {
    let bphi = gr.burgers_fn(gr.phi());
    let b = bphi.eval(u, v);
    let (bu, bv) = bphi.gradient(u, v);
    let s = T::one() + b * b;
    let h = -(bu + gr.phi().eval(u, v) * bv) / (s * s.sqrt());
    if !h.is_finite() {
        return Err(CalcError::NumericFailure(format!("non-finite curvature at ({u}, {v})")));
    }
    Ok(CurvatureReport { h, route: CurvatureRoute::Intrinsic, w: s.sqrt(), terms: None })
}

/// `B(B phi)` at a point; it vanishes identically exactly on H-minimal intrinsic graphs.
pub fn burgers_minimality<T: Real>(gr: &IntrinsicGraph<T>, u: T, v: T) -> T {
    let bphi = gr.burgers_fn(gr.phi());
    gr.burgers(&bphi, u, v)
}

/// Auxiliary geometric quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxGeometry<T> {
    /// `c^{H,S}` on the horizontal frame.
    pub c_hs: Vec<T>,
    /// `A = -Z obar`; Heisenberg `H^1` only.
    pub a: Option<T>,
    pub obar: Vec<T>,
}

/// `c_i = sum_s sum_j b^s_ij pbar_j obar_s` and, on `H^1`, `A = -Z obar`, on a level set.
pub fn geometry_aux_levelset<T: Real>(s: &LevelSetSurface<T>, g: &[T]) -> Result<AuxGeometry<T>> {
    let group = s.group();
    let fr = s.frame(g)?;
    let unit = fr.unit()?;
    let m = group.horizontal_dim();
    let k = group.vertical_dim();
    let c_hs = (0..m)
        .map(|i| {
            let mut acc = T::zero();
            for sidx in 0..k {
                for j in 0..m {
                    acc = acc + group.horizontal_constant(sidx, i, j) * unit.pbar[j] * unit.obar[sidx];
                }
            }
            acc
        })
        .collect();
    let a = if group.kind() == GroupKind::Heisenberg(1) {
        let obar = |x: &[T]| -> Result<T> { s.frame(x)?.obar() };
        Some(-s.zyt_of(obar, g, default_step())?[0])
    } else {
        None
    };
    Ok(AuxGeometry { c_hs, a, obar: unit.obar.clone() })
}

/// `c^{H,S} = obar (qbar, -pbar)` and `A = -Z obar` on a patch.
pub fn geometry_aux_param<T: Real>(p: &ParamPatch<T>, u: T, v: T) -> Result<AuxGeometry<T>> {
    let fr = p.frame(u, v)?;
    let (pb, qb, ob) = (fr.pbar()?, fr.qbar()?, fr.obar()?);
    let a = -p.zy_derivative(|x, y| p.frame_unchecked(x, y)?.obar(), u, v)?.z;
    Ok(AuxGeometry { c_hs: vec![ob * qb, -ob * pb], a: Some(a), obar: vec![ob] })
}

/// Residual `|nabla^H_{e1} e1 + H e2|` with `e1 = Z`, `e2 = nu_H`, from the horizontal Koszul identity
/// `<nabla_{e1} e1, X_k> = e1 <e1, X_k> - <[e1, X_k]_H, e1>`.
pub fn pseudo_hermitian_check<T: Real>(p: &ParamPatch<T>, u: T, v: T) -> Result<T> {
    let fr = p.frame(u, v)?;
    let (pb, qb) = (fr.pbar()?, fr.qbar()?);
    let dp = p.zy_derivative(|a, b| p.frame_unchecked(a, b)?.pbar(), u, v)?;
    let dq = p.zy_derivative(|a, b| p.frame_unchecked(a, b)?.qbar(), u, v)?;
    // X1 = pbar Y + qbar Z, X2 = qbar Y - pbar Z
    let x1 = |d: &crate::hypersurface::FrameDerivatives<T>| pb * d.y + qb * d.z;
    let x2 = |d: &crate::hypersurface::FrameDerivatives<T>| qb * d.y - pb * d.z;
    // [e1, X_k]_H = (-X_k qbar, X_k pbar), paired with e1 = (qbar, -pbar).
    let k1 = -(qb * x1(&dq) + pb * x1(&dp));
    let k2 = -(qb * x2(&dq) + pb * x2(&dp));
    let nabla = [dq.z - k1, -dp.z - k2];
    let h = qb * dp.z - pb * dq.z;
    let r0 = nabla[0] + h * pb;
    let r1 = nabla[1] + h * qb;
    Ok((r0 * r0 + r1 * r1).sqrt())
}

/// Planar curvature of `{h(x, y) = 0}` oriented by `grad h`, for checking vertical cylinders.
pub fn planar_curvature<T: Real>(hx: T, hy: T, hxx: T, hxy: T, hyy: T) -> T {
    let n2 = hx * hx + hy * hy;
    let two: T = lit(2.0);
    (hxx * hy * hy - two * hxy * hx * hy + hyy * hx * hx) / (n2 * n2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carnot_group::{build_group, Preset, StratifiedGroup};
    use crate::field_calculus::{field_by_id, DerivativeEngine};
    use crate::surface_function::SurfaceFunction;
    use rand::{Rng, SeedableRng};

    fn h1() -> StratifiedGroup<f64> {
        build_group(&Preset::Heisenberg(1)).unwrap()
    }

    fn level(id: &str, engine: DerivativeEngine<f64>) -> LevelSetSurface<f64> {
        let g = h1();
        let phi = field_by_id(&g, id).unwrap();
        LevelSetSurface::new(g, phi, engine).unwrap()
    }

    #[test]
    fn planes_are_minimal() {
        for id in ["poly:0.3 x + 0.8 y - 0.2", "t"] {
            let s = level(id, DerivativeEngine::analytic());
            for pt in [[0.5, -0.4, 0.3], [1.2, 0.7, -2.0]] {
                assert!(hmc_levelset(&s, &pt).unwrap().h.abs() < 1e-12);
                assert!(hmc_divergence(&s, &pt).unwrap().h.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn divergence_matches_levelset_on_saddle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (engine, tol) in [(DerivativeEngine::analytic(), 1e-8), (DerivativeEngine::finite_difference(), 1e-6)] {
            let s = level("poly:t - x y", engine);
            let mut n = 0;
            while n < 100 {
                let (x, y): (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                if x.hypot(y) < 0.25 {
                    continue;
                }
                let pt = [x, y, x * y];
                let a = hmc_levelset(&s, &pt).unwrap().h;
                let b = hmc_divergence(&s, &pt).unwrap().h;
                assert!((a - b).abs() < tol, "{a} {b} at {pt:?}");
                n += 1;
            }
        }
    }

    #[test]
    fn xyt_is_minimal() {
        let s = level("poly:x - y t", DerivativeEngine::analytic());
        let p = ParamPatch::from_exprs("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0], (8, 8)).unwrap();
        for &(u, v) in &[(0.3, -0.2), (-0.8, 0.9), (0.5, 0.5)] {
            let pt = p.point(u, v);
            assert!(hmc_levelset(&s, &pt).unwrap().h.abs() < 1e-12);
            assert!(hmc_divergence(&s, &pt).unwrap().h.abs() < 1e-8);
            assert!(hmc_param(&p, u, v).unwrap().h.abs() < 1e-6);
        }
    }

    #[test]
    fn paraboloid_param_matches_levelset() {
        let s = level("poly:t - x^2 - y^2", DerivativeEngine::analytic());
        let p = ParamPatch::from_exprs("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5], (8, 8)).unwrap();
        for &(u, v) in &[(0.6, 1.1), (1.4, 0.7), (1.0, 1.0)] {
            let a = hmc_param(&p, u, v).unwrap().h;
            let b = hmc_levelset(&s, &p.point(u, v)).unwrap().h;
            assert!((a - b).abs() < 1e-5, "{a} {b}");
            assert!(b.abs() > 0.1);
        }
    }

    #[test]
    fn characteristic_points_error() {
        let s = level("t", DerivativeEngine::analytic());
        assert!(matches!(hmc_levelset(&s, &[0.0, 0.0, 0.0]), Err(CalcError::CharacteristicPoint { .. })));
        assert!(hmc_divergence(&s, &[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn pauls_sequence() {
        let plane = level("poly:x + 2 y", DerivativeEngine::analytic());
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let r = hmc_pauls(&plane, &[0.3, 0.1, 0.5], &eps).unwrap();
        assert!(r.values.iter().all(|v| v.abs() < 1e-9));
        let s = level("poly:t - x^2", DerivativeEngine::analytic());
        let pt = [0.7, 0.4, 0.2];
        let h = hmc_levelset(&s, &pt).unwrap().h;
        let r = hmc_pauls(&s, &pt, &eps).unwrap();
        let errs: Vec<f64> = r.values.iter().map(|v| (v - h).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!((r.limit - h).abs() < 1e-6);
        assert!(hmc_pauls(&s, &pt, &[1e-2, 1e-1]).is_err());
        assert!(hmc_pauls(&s, &pt, &[]).is_err());
    }

    #[test]
    fn intrinsic_examples() {
        let dom = [0.5, 1.5, -1.0, 1.0];
        let c = IntrinsicGraph::new(SurfaceFunction::<f64>::constant(0.4), dom, (8, 8)).unwrap();
        assert_eq!(hmc_intrinsic(&c, 1.0, 0.0).unwrap().h, 0.0);
        let lin = IntrinsicGraph::new(SurfaceFunction::parse("0.7 u").unwrap(), dom, (8, 8)).unwrap();
        assert!(hmc_intrinsic(&lin, 1.2, 0.3).unwrap().h.abs() < 1e-15);
        let uv = IntrinsicGraph::new(SurfaceFunction::parse("u v").unwrap(), dom, (8, 8)).unwrap();
        let patch = uv.to_patch().unwrap();
        for &(u, v) in &[(0.8, 0.4), (1.3, -0.6)] {
            let bb = burgers_minimality(&uv, u, v);
            assert!((bb - (2.0 * u * v + u * v * (1.0 + u * u))).abs() < 1e-12);
            let a = hmc_intrinsic(&uv, u, v).unwrap().h;
            let b = hmc_param(&patch, u, v).unwrap().h;
            assert!(a.abs() > 1e-2);
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
        let vu = IntrinsicGraph::new(SurfaceFunction::parse("v/u").unwrap(), dom, (8, 8)).unwrap();
        assert!(burgers_minimality(&vu, 0.9, 0.3).abs() < 1e-14);
        assert!(hmc_intrinsic(&vu, 0.9, 0.3).unwrap().h.abs() < 1e-14);
    }

    #[test]
    fn aux_geometry() {
        let cyl = level("poly:x^2 + y^2 - 1", DerivativeEngine::analytic());
        let aux = geometry_aux_levelset(&cyl, &[0.6, 0.8, 0.3]).unwrap();
        assert!(aux.c_hs.iter().all(|c| c.abs() < 1e-15));
        let tp = level("t", DerivativeEngine::analytic());
        let fr = tp.frame(&[1.0, 0.0, 0.0]).unwrap();
        let aux = geometry_aux_levelset(&tp, &[1.0, 0.0, 0.0]).unwrap();
        assert!((aux.obar[0] - 2.0).abs() < 1e-15);
        let (pb, qb) = (fr.pbar().unwrap(), fr.qbar().unwrap());
        assert!((aux.c_hs[0] - 2.0 * qb).abs() < 1e-15 && (aux.c_hs[1] + 2.0 * pb).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pt: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = level("poly:t - x^2 + x y^2", DerivativeEngine::analytic());
            let fr = s.frame(&pt).unwrap();
            let aux = geometry_aux_levelset(&s, &pt).unwrap();
            let u = fr.unit().unwrap();
            let inner = aux.c_hs[0] * u.pbar[0] + aux.c_hs[1] * u.pbar[1];
            assert!(inner.abs() < 1e-12);
        }
        // Heisenberg H^2: c equals obar times the rotated normal (qbar-type components).
        let g2 = build_group::<f64>(&Preset::Heisenberg(2)).unwrap();
        let phi = field_by_id(&g2, "poly:x5 - x1^2 + x2 x3").unwrap();
        let s2 = LevelSetSurface::new(g2, phi, DerivativeEngine::analytic()).unwrap();
        let pt = [0.3, -0.5, 0.9, 0.2, 0.1];
        let fr = s2.frame(&pt).unwrap();
        let u = fr.unit().unwrap();
        let aux = geometry_aux_levelset(&s2, &pt).unwrap();
        let ob = u.obar[0];
        let expected = [ob * u.pbar[2], ob * u.pbar[3], -ob * u.pbar[0], -ob * u.pbar[1]];
        for k in 0..4 {
            assert!((aux.c_hs[k] - expected[k]).abs() < 1e-14);
        }
        assert!(aux.a.is_none());
    }

    #[test]
    fn aux_param_matches_levelset() {
        let s = level("poly:t - x^2 - y^2", DerivativeEngine::analytic());
        let p = ParamPatch::from_exprs("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5], (8, 8)).unwrap();
        let (u, v) = (0.9, 1.3);
        let a = geometry_aux_param(&p, u, v).unwrap();
        let b = geometry_aux_levelset(&s, &p.point(u, v)).unwrap();
        assert!((a.a.unwrap() - b.a.unwrap()).abs() < 1e-6);
        for k in 0..2 {
            assert!((a.c_hs[k] - b.c_hs[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_hermitian() {
        let plane = ParamPatch::<f64>::from_exprs("0", "u", "v", [0.0, 1.0, 0.0, 1.0], (8, 8)).unwrap();
        assert_eq!(pseudo_hermitian_check(&plane, 0.5, 0.5).unwrap(), 0.0);
        let xyt = ParamPatch::<f64>::from_exprs("u v", "u", "v", [-1.0, 1.0, -1.0, 1.0], (8, 8)).unwrap();
        assert!(pseudo_hermitian_check(&xyt, 0.4, -0.3).unwrap() < 1e-5);
        let par = ParamPatch::<f64>::from_exprs("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5], (8, 8)).unwrap();
        assert!(pseudo_hermitian_check(&par, 0.9, 1.2).unwrap() < 1e-4);
    }

    #[test]
    fn vertical_cylinders_reduce_to_planar_curvature() {
        let s = level("poly:x^2 + 2 y^2 + x y - 1", DerivativeEngine::analytic());
        for pt in [[0.5, 0.4, 0.0], [-0.2, 0.6, 3.0]] {
            let (x, y) = (pt[0], pt[1]);
            let k = planar_curvature(2.0 * x + y, 4.0 * y + x, 2.0, 1.0, 4.0);
            assert!((hmc_levelset(&s, &pt).unwrap().h - k).abs() < 1e-6);
        }
    }

    #[test]
    fn dilation_covariance() {
        let p = ParamPatch::<f64>::from_exprs("u", "v", "u^2 + v^2", [0.5, 1.5, 0.5, 1.5], (8, 8)).unwrap();
        for lambda in [0.5, 2.0, 3.0] {
            let d = p.dilate(lambda).unwrap();
            for &(u, v) in &[(0.7, 0.9), (1.3, 1.1)] {
                let a = hmc_param(&d, u, v).unwrap().h;
                let b = hmc_param(&p, u, v).unwrap().h / lambda;
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
