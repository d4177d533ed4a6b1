//! Named test surfaces of the first Heisenberg group.
//!
//! Every entry carries a parametrised patch together with a defining function whose gradient
//! induces the same orientation, so patch and level-set routes can be compared directly.
//!
//! * `vertical-plane:a,b,c`: the plane `a x + b y = c`
//! * `t-graph:<expr in x, y>`: the graph `t = P(x, y)`; `t-plane` and `paraboloid` are shorthands
//! * `xyt-graph`: the entire H-minimal graph `x = y t`
//! * `intrinsic:<expr in u, v>`: the intrinsic `X1`-graph of `phi(u, v)`

use crate::carnot_group::{build_group, Preset};
use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::field_calculus::{DerivativeEngine, ScalarField};
use crate::hypersurface::{IntrinsicGraph, LevelSetSurface, ParamPatch};
use crate::scalar::{lit, Real};
use crate::surface_function::SurfaceFunction;

/// Metadata grid given to catalog patches; quadrature grids are chosen per call.
pub const CATALOG_GRID: (usize, usize) = (16, 16);

/// Ids accepted by [`surface_by_id`], with a placeholder where a parameter is expected.
pub const SURFACE_IDS: &[&str] = &[
    "vertical-plane:<a>,<b>,<c>",
    "t-plane",
    "paraboloid",
    "t-graph:<expr in x, y>",
    "xyt-graph",
    "intrinsic:<expr in u, v>",
];

/// A catalog surface: a patch, and when available the same surface as a level set.
#[derive(Debug, Clone)]
pub struct CatalogSurface<T> {
    pub id: String,
    pub patch: ParamPatch<T>,
    pub level_set: Option<LevelSetSurface<T>>,
    /// Known to be H-minimal on its whole domain.
    pub minimal: bool,
    pub intrinsic: Option<IntrinsicGraph<T>>,
}

impl<T: Real> CatalogSurface<T> {
    /// Same surface over another parameter rectangle.
    pub fn with_domain(mut self, domain: [T; 4]) -> Result<Self> {
        self.patch = self.patch.with_domain(domain)?;
        if let Some(gr) = self.intrinsic.take() {
            self.intrinsic = Some(IntrinsicGraph::new(gr.phi().clone(), domain, gr.grid())?);
        }
        Ok(self)
    }
}

fn level_set<T: Real>(phi: ScalarField<T>) -> Result<LevelSetSurface<T>> {
    LevelSetSurface::new(build_group(&Preset::Heisenberg(1))?, phi, DerivativeEngine::analytic())
}

fn xyt_expr<T: Real>(src: &str) -> Result<ScalarField<T>> {
    Ok(ScalarField::from_expr(Expr::parse(src, &["x", "y", "t"])?))
}

fn parse_plane<T: Real>(args: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CalcError::Parse(format!("vertical plane needs a,b,c, got {args:?}")));
    }
    let mut out = [T::zero(); 3];
    for (o, s) in out.iter_mut().zip(&parts) {
        let v: f64 = s.parse().map_err(|_| CalcError::Parse(format!("bad plane coefficient {s:?}")))?;
        *o = lit(v);
    }
    if out[0] == T::zero() && out[1] == T::zero() {
        return Err(CalcError::InvalidArgument("vertical plane needs (a, b) != 0".into()));
    }
    Ok(out)
}

/// `a x + b y = c` as `(c a / r^2 - b u, c b / r^2 + a u, v)`.
fn vertical_plane<T: Real>(id: &str, args: &str) -> Result<CatalogSurface<T>> {
    let [a, b, c] = parse_plane::<T>(args)?;
    let r2 = a * a + b * b;
    let u = Expr::variable(2, 0);
    let x = Expr::constant(2, c * a / r2).add(&u.scale(-b));
    let y = Expr::constant(2, c * b / r2).add(&u.scale(a));
    let patch = ParamPatch::new(
        SurfaceFunction::Expr(x),
        SurfaceFunction::Expr(y),
        SurfaceFunction::Expr(Expr::variable(2, 1)),
        [-1.0, 1.0, -1.0, 1.0].map(lit),
        CATALOG_GRID,
    )?;
    let x3 = Expr::variable(3, 0).scale(a).add(&Expr::variable(3, 1).scale(b)).add(&Expr::constant(3, -c));
    Ok(CatalogSurface {
        id: id.into(),
        patch,
        level_set: Some(level_set(ScalarField::from_expr(x3))?),
        minimal: true,
        intrinsic: None,
    })
}

/// `t = P(x, y)` as `(u, v, P(u, v))`, level set `t - P`.
fn t_graph<T: Real>(id: &str, poly: &str, domain: [f64; 4], minimal: bool) -> Result<CatalogSurface<T>> {
    let p2 = Expr::parse(poly, &["x", "y"])?;
    let p3 = Expr::parse(poly, &["x", "y", "t"])?;
    let patch = ParamPatch::new(
        SurfaceFunction::parse("u")?,
        SurfaceFunction::parse("v")?,
        SurfaceFunction::Expr(p2),
        domain.map(lit),
        CATALOG_GRID,
    )?;
    let phi = Expr::variable(3, 2).add(&p3.scale(-T::one()));
    Ok(CatalogSurface {
        id: id.into(),
        patch,
        level_set: Some(level_set(ScalarField::from_expr(phi))?),
        minimal,
        intrinsic: None,
    })
}

fn intrinsic<T: Real>(id: &str, phi: &str) -> Result<CatalogSurface<T>> {
    let f = SurfaceFunction::<T>::parse(phi)?;
    let gr = IntrinsicGraph::new(f, [-1.0, 1.0, -1.0, 1.0].map(lit), CATALOG_GRID)?;
    // Minimal exactly when B(B phi) vanishes; sampled on a lattice of the default rectangle.
    let bb = gr.burgers_fn(&gr.burgers_fn(gr.phi()));
    let minimal = (-4..=4).all(|i| {
        (-4..=4).all(|j| bb.eval(lit(0.25 * i as f64), lit(0.25 * j as f64)).abs() <= lit(1e-12))
    });
    Ok(CatalogSurface {
        id: id.into(),
        patch: gr.to_patch()?,
        level_set: Some(level_set(gr.level_set_function())?),
        minimal,
        intrinsic: Some(gr),
    })
}

/// Looks up a catalog surface by id.
pub fn surface_by_id<T: Real>(id: &str) -> Result<CatalogSurface<T>> {
    let id = id.trim();
    if let Some(args) = id.strip_prefix("vertical-plane:") {
        return vertical_plane(id, args);
    }
    if let Some(poly) = id.strip_prefix("t-graph:") {
        return t_graph(id, poly, [-1.0, 1.0, -1.0, 1.0], false);
    }
    if let Some(phi) = id.strip_prefix("intrinsic:") {
        return intrinsic(id, phi);
    }
    match id {
        "t-plane" => t_graph(id, "0", [-1.0, 1.0, -1.0, 1.0], true),
        "paraboloid" => t_graph(id, "x^2 + y^2", [0.5, 1.5, 0.5, 1.5], false),
        "xyt-graph" => {
            let patch = ParamPatch::from_exprs("u v", "u", "v", [-5.0, 5.0, -2.5, 2.5].map(lit), CATALOG_GRID)?;
            Ok(CatalogSurface {
                id: id.into(),
                patch,
                level_set: Some(level_set(xyt_expr("x - y t")?)?),
                minimal: true,
                intrinsic: None,
            })
        }
        _ => Err(CalcError::InvalidArgument(format!("unknown surface id {id:?}"))),
    }
}

/// Patch points below this value of `W / |N|` are not used as samples.
pub const SAMPLE_MIN_ANGLE: f64 = 0.1;

/// `count` parameter points taken at evenly spread cell centres of an `n x n` lattice over the
/// patch domain, skipping cells where the surface is too close to characteristic.
pub fn sample_params<T: Real>(p: &ParamPatch<T>, n: usize, count: usize) -> Result<Vec<(T, T)>> {
    if n < crate::hypersurface::MIN_GRID || count == 0 || count > n * n {
        return Err(CalcError::InvalidArgument(format!("cannot take {count} samples from a {n} x {n} lattice")));
    }
    let [u0, u1, v0, v1] = p.domain();
    let cell = |i: usize, lo: T, hi: T| lo + (hi - lo) * (lit::<T>(i as f64) + lit(0.5)) / lit(n as f64);
    let total = n * n;
    // A stride coprime to n * n visits every cell once while scattering consecutive samples.
    let mut stride = (total as f64 / count as f64 * 0.618).max(1.0) as usize;
    while gcd(stride, total) != 1 {
        stride += 1;
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..total {
        let idx = (k * stride) % total;
        let (u, v) = (cell(idx % n, u0, u1), cell(idx / n, v0, v1));
        let [a, b, c] = p.normal_components(u, v);
        let w = (a * a + b * b).sqrt();
        if w > lit::<T>(SAMPLE_MIN_ANGLE) * (w * w + c * c).sqrt() {
            out.push((u, v));
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(CalcError::DegenerateSurface(format!("only {} of {count} samples are away from characteristic points", out.len())))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The fixed set of surfaces used by batteries and acceptance runs.
pub fn standard_surfaces<T: Real>() -> Result<Vec<CatalogSurface<T>>> {
    ["vertical-plane:1,0,0", "vertical-plane:1,2,0.5", "t-plane", "paraboloid", "xyt-graph", "intrinsic:0.8 u"]
        .iter()
        .map(|id| surface_by_id(id))
        .collect()
}
