//! Pointwise residuals of the geometric identities satisfied by the `Z, Y, T` frame of a surface
//! in the first Heisenberg group, evaluated by finite differences.
//!
//! Two evaluators are provided. The ambient one works on a level set, where `pbar`, `qbar`, `obar`
//! and `H` extend off the surface through the neighbouring leaves, so `Y` and `T` derivatives make
//! sense on their own. The patch one only uses derivatives along the surface: `Z` and
//! `D = T - obar Y`, so it checks the identities that are stated in those terms.

use serde::Serialize;

use crate::catalog::{sample_params, CatalogSurface};
use crate::curvature::{hmc_levelset, hmc_param};
use crate::error::{CalcError, Result};
use crate::field_calculus::directional;
use crate::hypersurface::{LevelSetSurface, ParamPatch};
use crate::scalar::{default_step, lit, Real};

/// Pointwise tolerance of the battery.
pub const IDENTITY_TOL: f64 = 1e-4;

/// Samples per surface in the battery.
pub const BATTERY_SAMPLES: usize = 50;

/// Where an identity was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityRoute {
    Ambient,
    Patch,
}

impl IdentityRoute {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ambient => "ambient",
            Self::Patch => "patch",
        }
    }
}

/// Identities checked by the ambient evaluator.
pub const AMBIENT_IDENTITIES: &[&str] =
    &["zeroder", "perp", "zp-zq", "surprise", "comm", "comm-t", "zob", "mixedcomm", "za", "zcomm", "zcomm2"];

/// Identities checked by the patch evaluator.
pub const PATCH_IDENTITIES: &[&str] = &["zeroder", "perp", "zp-zq", "surprise", "zob", "mixedcomm", "za"];

type AmbientFn<'a, T> = &'a dyn Fn(&[T]) -> Result<T>;

/// Smooth bounded test function for commutator identities.
pub fn ambient_test_function<T: Real>(g: &[T]) -> Result<T> {
    let (x, y, t) = (g[0], g[1], g[2]);
    let third: T = lit(1.0 / 3.0);
    Ok((x + y + y).sin() + (t - x * y * third).cos())
}

/// Test function of the parameters for commutator identities on patches.
pub fn patch_test_function<T: Real>(u: T, v: T) -> Result<T> {
    let half: T = lit(0.5);
    Ok((u - v * half).sin() + (u * v * half).cos())
}

struct Ambient<'a, T> {
    s: &'a LevelSetSurface<T>,
    h: T,
}

impl<'a, T: Real> Ambient<'a, T> {
    /// Derivative of `f` at `g` along `Z` (`k = 0`), `Y` (`k = 1`) or `T` (`k = 2`).
    fn d(&self, f: AmbientFn<'_, T>, g: &[T], k: usize) -> Result<T> {
        let dir = self.s.zyt_vectors(g)?;
        directional(f, g, &dir[k], self.h)
    }

    fn pbar(&self, g: &[T]) -> Result<T> {
        self.s.frame(g)?.pbar()
    }

    fn qbar(&self, g: &[T]) -> Result<T> {
        self.s.frame(g)?.qbar()
    }

    fn obar(&self, g: &[T]) -> Result<T> {
        self.s.frame(g)?.obar()
    }

    fn hmc(&self, g: &[T]) -> Result<T> {
        Ok(hmc_levelset(self.s, g)?.h)
    }

    /// `qbar X pbar - pbar X qbar` for `X = Z, Y, T`.
    fn twist(&self, g: &[T], k: usize) -> Result<T> {
        let xp = self.d(&|x| self.pbar(x), g, k)?;
        let xq = self.d(&|x| self.qbar(x), g, k)?;
        Ok(self.qbar(g)? * xp - self.pbar(g)? * xq)
    }

    fn a_coef(&self, g: &[T]) -> Result<T> {
        Ok(-self.d(&|x| self.obar(x), g, 0)?)
    }

    fn residuals(&self, g: &[T], f: AmbientFn<'_, T>) -> Result<Vec<(&'static str, T)>> {
        let (pb, qb, ob) = (self.pbar(g)?, self.qbar(g)?, self.obar(g)?);
        let hm = self.hmc(g)?;
        let pbf = |x: &[T]| self.pbar(x);
        let qbf = |x: &[T]| self.qbar(x);
        let [zp, yp, tp] = [0, 1, 2].map(|k| self.d(&pbf, g, k));
        let [zq, yq, tq] = [0, 1, 2].map(|k| self.d(&qbf, g, k));
        let (zp, yp, tp, zq, yq, tq) = (zp?, yp?, tp?, zq?, yq?, tq?);
        let twist_y = qb * yp - pb * yq;
        let twist_t = qb * tp - pb * tq;
        let a = self.a_coef(g)?;
        let [zf, yf, tf] = [0, 1, 2].map(|k| self.d(f, g, k));
        let (zf, yf, tf) = (zf?, yf?, tf?);
        let three: T = lit(3.0);

        let zeroder = max3(pb * zp + qb * zq, pb * yp + qb * yq, pb * tp + qb * tq);
        let perp = max3(yq * zp - yp * zq, tq * zp - tp * zq, tq * yp - tp * yq);
        let zpzq = (zp - qb * hm).abs().max((zq + pb * hm).abs());
        let surprise = (zp * zp + zq * zq - hm * hm).abs();

        // [Z, Y] f = T f + H Z f + (qbar Y pbar - pbar Y qbar) Y f
        let zyf = self.d(&|x| self.d(f, x, 1), g, 0)?;
        let yzf = self.d(&|x| self.d(f, x, 0), g, 1)?;
        let comm = (zyf - yzf - (tf + hm * zf + twist_y * yf)).abs();
        // [Z, T] f = (qbar T pbar - pbar T qbar) Y f
        let ztf = self.d(&|x| self.d(f, x, 2), g, 0)?;
        let tzf = self.d(&|x| self.d(f, x, 0), g, 2)?;
        let comm_t = (ztf - tzf - twist_t * yf).abs();

        let zob_a = (pb * tq - qb * tp) + ob * twist_y + ob * ob;
        let zob_b = pb * (tq - ob * yq) - qb * (tp - ob * yp) + ob * ob;
        let zob = (a - zob_a).abs().max((a - zob_b).abs());

        // [T - obar Y, Z] f = obar {(T - obar Y) f + H Z f}
        let dfun = |x: &[T]| -> Result<T> { Ok(self.d(f, x, 2)? - self.obar(x)? * self.d(f, x, 1)?) };
        let dzf = self.d(&|x| self.d(f, x, 0), g, 2)? - ob * self.d(&|x| self.d(f, x, 0), g, 1)?;
        let zdf = self.d(&dfun, g, 0)?;
        let mixed = (dzf - zdf - ob * (dfun(g)? + hm * zf)).abs();

        // Z A = obar (obar^2 - 3 A + H^2) - (T - obar Y) H
        let za_lhs = self.d(&|x| self.a_coef(x), g, 0)?;
        let hf = |x: &[T]| self.hmc(x);
        let dh = self.d(&hf, g, 2)? - ob * self.d(&hf, g, 1)?;
        let za = (za_lhs - ob * (ob * ob - three * a + hm * hm) + dh).abs();

        let z_twist_y = self.d(&|x| self.twist(x, 1), g, 0)?;
        let zcomm = (z_twist_y - twist_y * twist_y - twist_t - self.d(&hf, g, 1)? - hm * hm).abs();
        let z_twist_t = self.d(&|x| self.twist(x, 2), g, 0)?;
        let zcomm2 = (z_twist_t - self.d(&hf, g, 2)? - twist_t * twist_y).abs();

        Ok(vec![
            ("zeroder", zeroder),
            ("perp", perp),
            ("zp-zq", zpzq),
            ("surprise", surprise),
            ("comm", comm),
            ("comm-t", comm_t),
            ("zob", zob),
            ("mixedcomm", mixed),
            ("za", za),
            ("zcomm", zcomm),
            ("zcomm2", zcomm2),
        ])
    }
}

fn max3<T: Real>(a: T, b: T, c: T) -> T {
    a.abs().max(b.abs()).max(c.abs())
}

/// Residuals of every ambient identity at `g`, using the surface through `g` of the foliation by
/// level sets and the test function `f` for the commutator identities.
pub fn ambient_residuals<T: Real>(
    s: &LevelSetSurface<T>,
    g: &[T],
    f: &dyn Fn(&[T]) -> Result<T>,
) -> Result<Vec<(&'static str, T)>> {
    if !s.group().is_heisenberg() || s.group().dim() != 3 {
        return Err(CalcError::Unsupported("frame identities are stated on the first Heisenberg group".into()));
    }
    s.frame(g)?.unit()?;
    Ambient { s, h: default_step() }.residuals(g, f)
}

/// Residuals of the tangential identities at `(u, v)`. `hmc` supplies the mean curvature as a
/// function of the parameters; pass `None` to use the patch formula.
pub fn patch_residuals<T: Real>(
    p: &ParamPatch<T>,
    u: T,
    v: T,
    hmc: Option<&dyn Fn(T, T) -> Result<T>>,
    f: &dyn Fn(T, T) -> Result<T>,
) -> Result<Vec<(&'static str, T)>> {
    let own = |a: T, b: T| -> Result<T> { Ok(hmc_param(p, a, b)?.h) };
    let hf: &dyn Fn(T, T) -> Result<T> = hmc.unwrap_or(&own);
    let fr = p.frame(u, v)?;
    let (pb, qb, ob) = (fr.pbar()?, fr.qbar()?, fr.obar()?);
    let hm = hf(u, v)?;
    let pbf = |a: T, b: T| p.frame_unchecked(a, b)?.pbar();
    let qbf = |a: T, b: T| p.frame_unchecked(a, b)?.qbar();
    let obf = |a: T, b: T| p.frame_unchecked(a, b)?.obar();
    let dp = p.zy_derivative(pbf, u, v)?;
    let dq = p.zy_derivative(qbf, u, v)?;
    let a_of = |a: T, b: T| -> Result<T> { Ok(-p.zy_derivative(obf, a, b)?.z) };
    let a = a_of(u, v)?;
    let three: T = lit(3.0);

    let zeroder = (pb * dp.z + qb * dq.z).abs().max((pb * dp.d + qb * dq.d).abs());
    let perp = (dq.d * dp.z - dp.d * dq.z).abs();
    let zpzq = (dp.z - qb * hm).abs().max((dq.z + pb * hm).abs());
    let surprise = (dp.z * dp.z + dq.z * dq.z - hm * hm).abs();
    let zob = (a - (pb * dq.d - qb * dp.d + ob * ob)).abs();

    let df = p.zy_derivative(f, u, v)?;
    let dzf = p.zy_derivative(|x, y| Ok(p.zy_derivative(f, x, y)?.z), u, v)?.d;
    let zdf = p.zy_derivative(|x, y| Ok(p.zy_derivative(f, x, y)?.d), u, v)?.z;
    let mixed = (dzf - zdf - ob * (df.d + hm * df.z)).abs();

    let za_lhs = p.zy_derivative(a_of, u, v)?.z;
    let dh = p.zy_derivative(hf, u, v)?.d;
    let za = (za_lhs - ob * (ob * ob - three * a + hm * hm) + dh).abs();

    Ok(vec![
        ("zeroder", zeroder),
        ("perp", perp),
        ("zp-zq", zpzq),
        ("surprise", surprise),
        ("zob", zob),
        ("mixedcomm", mixed),
        ("za", za),
    ])
}

/// One line of the battery report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryRow {
    pub identity_id: String,
    pub surface_id: String,
    pub grid: usize,
    pub residual: f64,
    pub pass: bool,
}

/// Maximum residual of every identity over `samples` noncharacteristic points of an `n x n`
/// sampling lattice. Ambient rows are produced when the surface has a level-set description;
/// the patch route takes `H` from the level set when there is one, so `zp-zq` compares routes.
pub fn identity_battery<T: Real>(s: &CatalogSurface<T>, n: usize, samples: usize) -> Result<Vec<BatteryRow>> {
    let pts = sample_params(&s.patch, n, samples)?;
    let mut rows: Vec<BatteryRow> = Vec::new();
    let push = |route: IdentityRoute, res: &[(&'static str, T)], rows: &mut Vec<BatteryRow>| {
        for &(id, r) in res {
            let r = r.to_f64().unwrap_or(f64::NAN);
            let name = format!("{}/{}", route.as_str(), id);
            match rows.iter_mut().find(|row| row.identity_id == name) {
                Some(row) => row.residual = worst(row.residual, r),
                None => rows.push(BatteryRow { identity_id: name, surface_id: s.id.clone(), grid: n, residual: r, pass: false }),
            }
        }
    };
    let ls_h = s.level_set.as_ref().map(|ls| {
        let p = &s.patch;
        move |u: T, v: T| -> Result<T> { Ok(hmc_levelset(ls, &p.point(u, v))?.h) }
    });
    for &(u, v) in &pts {
        let hf = ls_h.as_ref().map(|f| f as &dyn Fn(T, T) -> Result<T>);
        let res = patch_residuals(&s.patch, u, v, hf, &patch_test_function)?;
        push(IdentityRoute::Patch, &res, &mut rows);
        if let Some(ls) = &s.level_set {
            let res = ambient_residuals(ls, &s.patch.point(u, v), &ambient_test_function)?;
            push(IdentityRoute::Ambient, &res, &mut rows);
        }
    }
    for row in &mut rows {
        row.pass = row.residual <= IDENTITY_TOL;
    }
    Ok(rows)
}

/// Larger of two residuals, with NaN dominating.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{standard_surfaces, surface_by_id};

    #[test]
    fn battery_passes_on_catalog() {
        for s in standard_surfaces::<f64>().unwrap() {
            let rows = identity_battery(&s, 32, 12).unwrap();
            assert_eq!(rows.len(), AMBIENT_IDENTITIES.len() + PATCH_IDENTITIES.len());
            for r in &rows {
                assert!(r.pass, "{} on {}: {}", r.identity_id, r.surface_id, r.residual);
            }
        }
    }

    #[test]
    fn za_needs_the_curvature_derivative() {
        // Dropping the D H term from Z A breaks the identity on a surface with varying curvature.
        let s = surface_by_id::<f64>("paraboloid").unwrap();
        let ls = s.level_set.as_ref().unwrap();
        let (u, v) = (1.1, 0.8);
        let g = s.patch.point(u, v);
        let hf = |x: &[f64]| Ok(hmc_levelset(ls, x)?.h);
        let amb = Ambient { s: ls, h: default_step() };
        let ob = amb.obar(&g).unwrap();
        let dh = amb.d(&hf, &g, 2).unwrap() - ob * amb.d(&hf, &g, 1).unwrap();
        assert!(dh.abs() > 1e-2, "{dh}");
        let res = ambient_residuals(ls, &g, &ambient_test_function).unwrap();
        assert!(res.iter().find(|r| r.0 == "za").unwrap().1 < 1e-6);
    }

    #[test]
    fn patch_and_ambient_agree_on_shared_quantities() {
        let s = surface_by_id::<f64>("xyt-graph").unwrap();
        let ls = s.level_set.as_ref().unwrap();
        for &(u, v) in &[(0.7, -0.4), (-2.0, 1.5), (3.0, 0.2)] {
            let g = s.patch.point(u, v);
            let a_patch = crate::curvature::geometry_aux_param(&s.patch, u, v).unwrap().a.unwrap();
            let a_amb = crate::curvature::geometry_aux_levelset(ls, &g).unwrap().a.unwrap();
            assert!((a_patch - a_amb).abs() < 1e-8, "{a_patch} {a_amb}");
        }
    }

    #[test]
    fn rejects_characteristic_and_other_groups() {
        let s = surface_by_id::<f64>("t-plane").unwrap();
        assert!(matches!(
            patch_residuals(&s.patch, 0.0, 0.0, None, &patch_test_function),
            Err(CalcError::CharacteristicPoint { .. })
        ));
        let g = crate::carnot_group::build_group::<f64>(&crate::carnot_group::Preset::Heisenberg(2)).unwrap();
        let phi = crate::field_calculus::ScalarField::coordinate(5, 0).unwrap();
        let ls = LevelSetSurface::new(g, phi, crate::field_calculus::DerivativeEngine::analytic()).unwrap();
        assert!(ambient_residuals(&ls, &[0.1; 5], &|_| Ok(0.0)).is_err());
    }
}
