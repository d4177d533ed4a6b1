use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use carnot_calc::catalog::{sample_params, standard_surfaces, surface_by_id, CatalogSurface, CATALOG_GRID};
use carnot_calc::curvature::{geometry_aux_param, hmc_levelset, hmc_param};
use carnot_calc::expr::Expr;
use carnot_calc::hypersurface::ParamPatch;
use carnot_calc::identities::{identity_battery, BATTERY_SAMPLES, IDENTITY_TOL};
use carnot_calc::measure::{eps_area, mcf_residual, QuadratureGrid, DEFAULT_CELLS};
use carnot_calc::surface_function::{Bump, SurfaceFunction};
use carnot_calc::variation::{
    bump_lattice, first_variation_analytic, numeric_variation, second_variation, stability_scan, variation_report,
    DeformationField, SecondVariationMode, VariationRoutes, FIRST_VARIATION_STEP, SECOND_VARIATION_STEP,
};

use crate::config::Config;
use crate::report::{num, render_json, residual_table, write_output, Cell, Format, ReportRow, Table};
use crate::{Cli, CliError, SurfaceArgs, Verb};

/// Curvature routes must agree to this absolute tolerance.
pub const CURVATURE_TOL: f64 = 1e-5;
/// Known H-minimal surfaces must have `|H|` below this.
pub const MINIMAL_TOL: f64 = 1e-6;
/// Mean-curvature-flow residual tolerance.
pub const FLOW_TOL: f64 = 1e-4;
pub const DEFAULT_POINTS: usize = 50;

const GLOBAL_KEYS: &[&str] = &["output", "format"];

struct Ctx<'a> {
    cli: &'a Cli,
    config: Config,
}

impl Ctx<'_> {
    fn allow(&self, keys: &[&str]) -> Result<(), CliError> {
        let all: Vec<&str> = GLOBAL_KEYS.iter().chain(keys).copied().collect();
        self.config.check_keys(&all)
    }

    fn format(&self, default: Format) -> Result<Format, CliError> {
        Ok(self.config.pick(self.cli.format, "format")?.unwrap_or(default))
    }

    fn write(&self, text: &str) -> Result<(), CliError> {
        let out = self.config.pick(self.cli.output.clone(), "output")?;
        write_output(text, out.as_deref()).map_err(|e| CliError::Failure(e.to_string()))
    }

    fn surface(&self, args: &SurfaceArgs) -> Result<CatalogSurface<f64>, CliError> {
        let id: String = self
            .config
            .pick(args.surface.clone(), "surface")?
            .ok_or_else(|| CliError::Usage("--surface is required".into()))?;
        let s = match id.strip_prefix("patch:") {
            Some(path) => user_patch(&id, Path::new(path))?,
            None => surface_by_id::<f64>(&id)?,
        };
        match self.config.pick(args.domain.clone(), "domain")? {
            Some(d) => Ok(s.with_domain(parse_list::<4>(&d, "domain")?)?),
            None => Ok(s),
        }
    }
}

pub(crate) fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx { cli, config };
    match &cli.verb {
        Verb::Curvature(a) => curvature(&ctx, &a.surface, a.points),
        Verb::Measure(a) => measure(&ctx, &a.surface, a.grid, a.eps),
        Verb::Identities(a) => identities(&ctx, &a.surface, a.grid, a.samples),
        Verb::Variation(a) => variation(&ctx, &a.surface, a.field.clone(), a.mode.clone(), a.grid),
        Verb::Stability(a) => stability(&ctx, &a.surface, a.family.clone(), a.grid),
        Verb::FlowCheck(a) => flow_check(&ctx, &a.surface, a.points),
        Verb::Catalog => catalog(&ctx),
    }
}

fn parse_list<const N: usize>(s: &str, what: &str) -> Result<[f64; N], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(CliError::Usage(format!("{what} needs {N} comma-separated numbers, got {s:?}")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| CliError::Usage(format!("bad number {p:?} in {what}")))?;
    }
    Ok(out)
}

/// `{x, y, t, domain, grid}` with components as expressions in `u, v` (text or coefficient lists).
fn user_patch(id: &str, path: &Path) -> Result<CatalogSurface<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read patch {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed patch {}: {e}", path.display())))?;
    let comp = |k: &str| -> Result<SurfaceFunction<f64>, CliError> {
        let e = v.get(k).ok_or_else(|| CliError::Usage(format!("patch file lacks {k:?}")))?;
        Ok(SurfaceFunction::Expr(Expr::from_json(e, &["u", "v"])?))
    };
    let domain: [f64; 4] = serde_json::from_value(v.get("domain").cloned().unwrap_or(Value::Null))
        .map_err(|_| CliError::Usage("patch domain must be [u0, u1, v0, v1]".into()))?;
    let grid = match v.get("grid") {
        None => CATALOG_GRID,
        Some(Value::Number(n)) => {
            let n = n.as_u64().ok_or_else(|| CliError::Usage("patch grid must be a positive integer".into()))? as usize;
            (n, n)
        }
        Some(g) => serde_json::from_value(g.clone()).map_err(|_| CliError::Usage("patch grid must be n or [nu, nv]".into()))?,
    };
    let patch = ParamPatch::new(comp("x")?, comp("y")?, comp("t")?, domain, grid)?;
    Ok(CatalogSurface { id: id.into(), patch, level_set: None, minimal: false, intrinsic: None })
}

fn lattice_for(points: usize) -> usize {
    let side = (points as f64).sqrt().ceil() as usize;
    (2 * side).max(8)
}

fn curvature(ctx: &Ctx, sa: &SurfaceArgs, points: Option<usize>) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "points"])?;
    let s = ctx.surface(sa)?;
    let points = ctx.config.pick(points, "points")?.unwrap_or(DEFAULT_POINTS);
    let mut t = Table::new(&["u", "v", "p", "q", "omega", "W", "H_param", "H_levelset", "A", "obar", "pass"]);
    let mut all = true;
    for (u, v) in sample_params(&s.patch, lattice_for(points), points)? {
        let fr = s.patch.frame(u, v)?;
        let hp = hmc_param(&s.patch, u, v)?.h;
        let hl = match &s.level_set {
            Some(ls) => Some(hmc_levelset(ls, &s.patch.point(u, v))?.h),
            None => None,
        };
        let aux = geometry_aux_param(&s.patch, u, v)?;
        let mut pass = hl.is_none_or(|h| (h - hp).abs() <= CURVATURE_TOL);
        if s.minimal {
            pass &= hp.abs() <= MINIMAL_TOL && hl.is_none_or(|h| h.abs() <= MINIMAL_TOL);
        }
        all &= pass;
        t.push(vec![
            u.into(),
            v.into(),
            fr.p().into(),
            fr.q().into(),
            fr.omega().into(),
            fr.w.into(),
            hp.into(),
            hl.into(),
            aux.a.into(),
            aux.obar[0].into(),
            pass.into(),
        ]);
    }
    ctx.write(&t.render(ctx.format(Format::Csv)?))?;
    Ok(all)
}

fn measure(ctx: &Ctx, sa: &SurfaceArgs, grid: Option<usize>, eps: Option<f64>) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "grid", "eps"])?;
    let s = ctx.surface(sa)?;
    let n = ctx.config.pick(grid, "grid")?.unwrap_or(DEFAULT_CELLS);
    let eps = ctx.config.pick(eps, "eps")?.unwrap_or(0.0);
    let r = eps_area(&s.patch, eps, &QuadratureGrid::simpson(n)?)?;
    let text = match ctx.format(Format::Json)? {
        Format::Json => render_json(&json!({
            "value": num(r.value),
            "error_estimate": num(r.error_estimate),
            "excluded_mass": num(r.excluded_mass),
            "grid": n,
        })),
        Format::Csv => {
            let mut t = Table::new(&["value", "error_estimate", "excluded_mass", "grid"]);
            t.push(vec![r.value.into(), r.error_estimate.into(), r.excluded_mass.into(), n.into()]);
            t.to_csv()
        }
    };
    ctx.write(&text)?;
    Ok(true)
}

fn identities(ctx: &Ctx, sa: &SurfaceArgs, grid: Option<usize>, samples: Option<usize>) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "grid", "samples"])?;
    let n = ctx.config.pick(grid, "grid")?.unwrap_or(DEFAULT_CELLS);
    let samples = ctx.config.pick(samples, "samples")?.unwrap_or(BATTERY_SAMPLES);
    let surfaces = match ctx.config.pick(sa.surface.clone(), "surface")?.as_deref() {
        Some("all") => standard_surfaces::<f64>()?,
        _ => vec![ctx.surface(sa)?],
    };
    let mut rows = Vec::new();
    for s in &surfaces {
        let inputs = format!("identities|{}|{:?}|{n}|{samples}", s.id, s.patch.domain());
        rows.extend(
            identity_battery(s, n, samples)?
                .into_iter()
                .map(|r| ReportRow::residual(&r.identity_id, &r.surface_id, r.grid, &inputs, r.residual, IDENTITY_TOL)),
        );
    }
    let all = rows.iter().all(|r| r.pass);
    let text = match ctx.format(Format::Csv)? {
        Format::Csv => residual_table(&rows).to_csv(),
        Format::Json => render_json(&serde_json::to_value(&rows).expect("rows serialise")),
    };
    ctx.write(&text)?;
    Ok(all)
}

fn parse_bump(s: &str) -> Result<Bump<f64>, CliError> {
    let [cu, cv, ru, rv] = parse_list::<4>(s, "bump")?;
    Ok(Bump::new((cu, cv), (ru, rv), 1.0)?)
}

/// Default deformation: normal component a bump at the centre of the domain.
fn default_field_spec(domain: [f64; 4]) -> String {
    let (cu, cv) = (0.5 * (domain[0] + domain[1]), 0.5 * (domain[2] + domain[3]));
    let (ru, rv) = (0.3 * (domain[1] - domain[0]), 0.3 * (domain[3] - domain[2]));
    format!("normal:{cu},{cv},{ru},{rv}")
}

fn parse_field(spec: &str, patch: &ParamPatch<f64>) -> Result<DeformationField<f64>, CliError> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| CliError::Usage(format!("bad field spec {spec:?}")))?;
    match kind {
        "normal" => Ok(DeformationField::normal(patch, parse_bump(rest)?)),
        "tangential" => Ok(DeformationField::tangential(patch, parse_bump(rest)?)),
        "bump" => {
            let (b, c) = rest.split_once(':').ok_or_else(|| CliError::Usage("bump field needs cu,cv,ru,rv:a,b,k".into()))?;
            Ok(DeformationField::from_bump(parse_bump(b)?, parse_list::<3>(c, "bump coefficients")?))
        }
        _ => Err(CliError::Usage(format!("unknown field kind {kind:?}"))),
    }
}

fn variation(
    ctx: &Ctx,
    sa: &SurfaceArgs,
    field: Option<String>,
    mode: Option<String>,
    grid: Option<usize>,
) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "field", "mode", "grid"])?;
    let s = ctx.surface(sa)?;
    let n = ctx.config.pick(grid, "grid")?.unwrap_or(DEFAULT_CELLS);
    let g = QuadratureGrid::simpson(n)?;
    let spec = ctx.config.pick(field, "field")?.unwrap_or_else(|| default_field_spec(s.patch.domain()));
    let mode = ctx.config.pick(mode, "mode")?.unwrap_or_else(|| "v1".into());
    let x = parse_field(&spec, &s.patch)?;
    let p = &s.patch;
    let mut routes: Vec<(&str, f64)> = Vec::new();
    let mut checks: Vec<ReportRow> = Vec::new();
    let inputs = format!("variation|{}|{:?}|{spec}|{mode}|{n}", s.id, p.domain());
    match mode.as_str() {
        "v1" => routes.push(("v1", first_variation_analytic(p, &x, &g)?.value)),
        "v2-full" => routes.push(("v2-full", second_variation(p, &x, SecondVariationMode::Full, &g)?.value)),
        "v2-geom" => routes.push(("v2-geom", second_variation(p, &x, SecondVariationMode::Geometric, &g)?.value)),
        "numeric:1" => routes.push(("numeric:1", numeric_variation(p, &x, 1, FIRST_VARIATION_STEP, &g)?)),
        "numeric:2" => routes.push(("numeric:2", numeric_variation(p, &x, 2, SECOND_VARIATION_STEP, &g)?)),
        "all" => {
            let r = variation_report(p, &x, VariationRoutes { v2_geometric: s.minimal, ..VariationRoutes::all() }, &g)?;
            let (v1n, v1a, v2n, v2f) = (r.v1_numeric.unwrap(), r.v1_analytic.unwrap(), r.v2_numeric.unwrap(), r.v2_full.unwrap());
            routes.extend([("numeric:1", v1n), ("v1", v1a), ("numeric:2", v2n), ("v2-full", v2f)]);
            checks.push(ReportRow::value("v1-routes", &s.id, n, &inputs, v1n, v1a, 1e-4));
            checks.push(ReportRow::value("v2-routes", &s.id, n, &inputs, v2n, v2f, 1e-2 * v2f.abs()));
            if let Some(v2g) = r.v2_geometric {
                routes.push(("v2-geom", v2g));
                checks.push(ReportRow::value("v2-geometric", &s.id, n, &inputs, v2g, v2f, 1e-3 * v2f.abs()));
            }
        }
        m => return Err(CliError::Usage(format!("unknown mode {m:?}"))),
    }
    let all = checks.iter().all(|c| c.pass);
    let text = match ctx.format(Format::Json)? {
        Format::Json => {
            let vals: serde_json::Map<String, Value> = routes.iter().map(|(k, v)| (k.to_string(), num(*v))).collect();
            render_json(&json!({
                "surface_id": s.id,
                "field": spec,
                "mode": mode,
                "grid": n,
                "values": vals,
                "checks": checks,
                "pass": all,
            }))
        }
        Format::Csv => {
            let mut t = Table::new(&["route", "value", "pass"]);
            for (k, v) in &routes {
                t.push(vec![(*k).into(), (*v).into(), Cell::Empty]);
            }
            for c in &checks {
                t.push(vec![c.id.clone().into(), c.value.into(), c.pass.into()]);
            }
            t.to_csv()
        }
    };
    ctx.write(&text)?;
    Ok(all)
}

fn stability(ctx: &Ctx, sa: &SurfaceArgs, family: Option<String>, grid: Option<usize>) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "family", "grid"])?;
    let s = ctx.surface(sa)?;
    let n = ctx.config.pick(grid, "grid")?.unwrap_or(DEFAULT_CELLS);
    let family = ctx.config.pick(family, "family")?.unwrap_or_else(|| "bump-lattice".into());
    let cands = match family.as_str() {
        "bump-lattice" => bump_lattice(s.patch.domain()),
        f => return Err(CliError::Usage(format!("unknown family {f:?}"))),
    };
    let rep = stability_scan(&s.patch, &cands, &QuadratureGrid::simpson(n)?)?;
    let row_json = |i: usize| {
        let r = &rep.table[i];
        json!({"index": r.index, "center": [num(r.center.0), num(r.center.1)], "radii": [num(r.radii.0), num(r.radii.1)], "value": num(r.value)})
    };
    let text = match ctx.format(Format::Json)? {
        Format::Json => render_json(&json!({
            "surface_id": s.id,
            "family": family,
            "grid": n,
            "candidates": rep.table.len(),
            "min_value": num(rep.min_value),
            "argmin": row_json(rep.argmin),
            "witness": rep.witness.map(&row_json),
            "table": (0..rep.table.len()).map(row_json).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut t = Table::new(&["index", "cu", "cv", "ru", "rv", "value"]);
            for r in &rep.table {
                t.push(vec![r.index.into(), r.center.0.into(), r.center.1.into(), r.radii.0.into(), r.radii.1.into(), r.value.into()]);
            }
            t.to_csv()
        }
    };
    ctx.write(&text)?;
    Ok(true)
}

fn flow_check(ctx: &Ctx, sa: &SurfaceArgs, points: Option<usize>) -> Result<bool, CliError> {
    ctx.allow(&["surface", "domain", "points"])?;
    let s = ctx.surface(sa)?;
    let points = ctx.config.pick(points, "points")?.unwrap_or(DEFAULT_POINTS);
    let mut t = Table::new(&["u", "v", "residual", "pass"]);
    let mut all = true;
    for (u, v) in sample_params(&s.patch, lattice_for(points), points)? {
        let r = mcf_residual(&s.patch, u, v)?;
        let pass = r <= FLOW_TOL;
        all &= pass;
        t.push(vec![u.into(), v.into(), r.into(), pass.into()]);
    }
    ctx.write(&t.render(ctx.format(Format::Csv)?))?;
    Ok(all)
}

fn catalog(ctx: &Ctx) -> Result<bool, CliError> {
    ctx.allow(&[])?;
    let entries: &[(&str, &str, &str)] = &[
        ("surface", "vertical-plane:<a>,<b>,<c>", "plane a x + b y = c (H-minimal)"),
        ("surface", "t-plane", "plane t = 0 (H-minimal, characteristic at the origin)"),
        ("surface", "paraboloid", "t = x^2 + y^2 over [0.5,1.5]^2"),
        ("surface", "t-graph:<expr in x, y>", "graph t = P(x, y)"),
        ("surface", "xyt-graph", "entire H-minimal graph x = y t, unstable"),
        ("surface", "intrinsic:<expr in u, v>", "intrinsic X1-graph (phi, u, v - u phi / 2)"),
        ("surface", "patch:<file.json>", "user patch {x, y, t, domain, grid} in u, v"),
        ("field", "normal:cu,cv,ru,rv", "deformation with normal component a bump"),
        ("field", "tangential:cu,cv,ru,rv", "tangential deformation along Z"),
        ("field", "bump:cu,cv,ru,rv:a,b,k", "bump times constant horizontal and vertical coefficients"),
        ("family", "bump-lattice", "5 x 5 x 5 lattice of bump centres and radii"),
    ];
    let mut t = Table::new(&["kind", "id", "description"]);
    for (k, id, d) in entries {
        t.push(vec![(*k).into(), (*id).into(), (*d).into()]);
    }
    ctx.write(&t.render(ctx.format(Format::Csv)?))?;
    Ok(true)
}
