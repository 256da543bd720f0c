use std::fs;
use std::path::{Path, PathBuf};

use fracperim::cylinder::{
    cylinder_window, graph_area_asymptotics, local_part_bound, nonlocal_divergence_scan,
    sector_divergence_scan, solve_cylinder, tail_slope, vertical_confinement_check, DivergenceRow,
    SubgraphSet,
};
use fracperim::functional::{
    coarea_check, decomposition_check, divergence_probe_1d, perimeter, strip_scan,
};
use fracperim::grid::{
    boundary_measure, CellSet, DomainWindow, FieldExterior, GridSpec, ScalarField,
};
use fracperim::io::{self, Shape};
use fracperim::kernel::{build_table, InteractionTable, KernelParams};
use fracperim::minimize::{brute_force_minimum, solve, MinimizationProblem};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{csv, json_doc, At, Cell, Failure, Report};

pub struct Context {
    pub config: Value,
    pub table_cache: Option<PathBuf>,
}

impl Context {
    fn table(&self, spec: &GridSpec, s: f64) -> Result<InteractionTable, Failure> {
        let params = KernelParams::new(s, spec.dim()).at("s")?;
        match &self.table_cache {
            Some(path) => io::cached_table(path, spec, params).at("table-cache"),
            None => build_table(spec, params, 0).at("s"),
        }
    }
}

fn shape(src: &str, spec: &GridSpec, field: &str) -> Result<Shape, Failure> {
    let (text, dir) = match src.strip_prefix('@') {
        Some(path) => {
            let path = Path::new(path);
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(field, format!("{}: {e}", path.display())))?;
            (
                text,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            )
        }
        None => (src.to_string(), PathBuf::from(".")),
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::config(field, e))?;
    Shape::from_json(&value, spec, &dir).at(field)
}

fn window(src: Option<&str>, spec: &GridSpec, field: &str) -> Result<DomainWindow, Failure> {
    match src {
        None => Ok(DomainWindow::full(spec.clone())),
        Some(src) => shape(src, spec, field)?.to_window(spec).at(field),
    }
}

fn load_set(args: &SetArgs) -> Result<CellSet, Failure> {
    let (spec, mask) = io::read_grid(&args.grid).at("grid")?;
    let model = shape(&args.exterior, &spec, "exterior")?
        .exterior_model(&spec)
        .at("exterior")?;
    CellSet::new(spec, mask, model).at("exterior")
}

fn load_graph(args: &GraphArgs) -> Result<(ScalarField, DomainWindow), Failure> {
    let (base, heights) = io::read_field(&args.heights).at("heights")?;
    let v = ScalarField::new(
        base.clone(),
        heights,
        FieldExterior::Constant(args.farfield),
    )
    .at("heights")?;
    let omega = window(args.omega.as_deref(), &base, "omega")?;
    Ok((v, omega))
}

fn sup_abs(v: &ScalarField, farfield: f64) -> f64 {
    v.values.iter().fold(farfield.abs(), |m, x| m.max(x.abs()))
}

/// Subgraph of `v` gridded on `(-half, half)`.
fn subgraph(v: &ScalarField, half: f64) -> Result<SubgraphSet, Failure> {
    SubgraphSet::new(v.clone(), (-half, half)).at("heights")
}

fn divergence_rows(rows: &[DivergenceRow]) -> Vec<Vec<Cell>> {
    rows.iter()
        .map(|r| vec![Cell::F(r.t), Cell::F(r.lower_bound), Cell::F(r.value)])
        .collect()
}

fn check_divergence(report: &mut Report, rows: &[DivergenceRow]) {
    report.check(
        rows.windows(2).all(|w| w[1].value > w[0].value),
        "scan is not strictly increasing in T",
    );
    report.check(
        rows.iter().all(|r| r.lower_bound <= r.value),
        "lower bound a_T exceeds the computed value",
    );
}

pub fn compute(ctx: &Context, a: &ComputeArgs) -> Result<Report, Failure> {
    let e = load_set(&a.set)?;
    let w = window(a.omega.as_deref(), &e.spec, "omega")?;
    let table = ctx.table(&e.spec, a.s)?;
    let b = perimeter(&e, &w, &table).at("omega")?;
    Ok(Report::new(json_doc(
        &ctx.config,
        json!({
            "s": a.s,
            "local": b.local,
            "nonlocal": b.nonlocal,
            "total": b.total,
            "truncation_error_bound": b.truncation_error_bound,
            "degenerate": b.degenerate,
        }),
    )))
}

pub fn approx(ctx: &Context, a: &ApproxArgs) -> Result<Report, Failure> {
    let e = load_set(&a.set)?;
    let windows = if a.windows.is_empty() {
        vec![DomainWindow::full(e.spec.clone())]
    } else {
        a.windows
            .iter()
            .map(|w| window(Some(w), &e.spec, "window"))
            .collect::<Result<Vec<_>, _>>()?
    };
    let table = ctx.table(&e.spec, a.s)?;
    let steps = if a.lipschitz {
        fracperim::approx::approximate_set_lipschitz(&e, &windows, &a.eps, &table)
    } else {
        fracperim::approx::approximate_set(&e, &windows, &a.eps, &table)
    }
    .at("eps")?;
    let mut header = vec!["eps".to_string(), "threshold".to_string()];
    header.extend((0..windows.len()).map(|k| format!("perimeter_{k}")));
    header.push("boundary_in_neighborhood".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<Cell>> = steps
        .iter()
        .map(|st| {
            let mut row = vec![Cell::F(st.eps), Cell::F(st.threshold)];
            row.extend(st.perimeters.iter().map(|p| Cell::F(p.total)));
            row.push(Cell::B(st.boundary_in_neighborhood));
            row
        })
        .collect();
    let mut report = Report::new(csv(&ctx.config, &header, &rows));
    for st in &steps {
        report.check(
            st.boundary_in_neighborhood,
            format!("boundary containment fails at eps = {}", st.eps),
        );
    }
    Ok(report)
}

pub fn minimize(ctx: &Context, a: &MinimizeArgs) -> Result<Report, Failure> {
    let e0 = load_set(&a.set)?;
    let w = window(Some(&a.omega), &e0.spec, "omega")?;
    let table = ctx.table(&e0.spec, a.s)?;
    let p = MinimizationProblem::new(w, e0, &table).at("omega")?;
    let r = solve(&p, a.tol, a.max_iter).at("max-iter")?;
    if let Some(path) = &a.minimizer_out {
        io::write_grid(path, &r.minimizer.spec, &r.minimizer.inside).at("minimizer-out")?;
    }
    let mut body = json!({
        "relaxed_energy": r.relaxed_energy,
        "threshold": r.threshold,
        "energy": r.energy,
        "iterations": r.iterations,
        "kkt_residual": r.kkt_residual,
        "minimizer_cells": r.minimizer.count(),
    });
    let mut violations = Vec::new();
    if r.energy > r.relaxed_energy + 1e-9 * (1.0 + r.relaxed_energy.abs()) {
        violations.push("thresholded energy exceeds the relaxed energy".to_string());
    }
    if a.oracle {
        let (_, min) = brute_force_minimum(&p).at("omega")?;
        body["oracle_energy"] = json!(min);
        if r.energy > min + 1e-9 * (1.0 + min.abs()) {
            violations.push("solver energy exceeds the exhaustive minimum".into());
        }
    }
    Ok(Report {
        text: json_doc(&ctx.config, body),
        violations,
    })
}

pub fn coarea(ctx: &Context, a: &CoareaArgs) -> Result<Report, Failure> {
    let (spec, values) = io::read_field(&a.field).at("field")?;
    let u = ScalarField::new(
        spec.clone(),
        values,
        FieldExterior::Constant(a.exterior_value),
    )
    .at("field")?;
    let w = window(a.omega.as_deref(), &spec, "omega")?;
    let table = ctx.table(&spec, a.s)?;
    let (lhs, rhs) = coarea_check(&u, &w, &table).at("field")?;
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        0.0
    };
    let mut report = Report::new(json_doc(
        &ctx.config,
        json!({"relaxed_energy": lhs, "level_set_sum": rhs, "relative_residual": residual}),
    ));
    report.check(
        residual <= a.tol,
        format!("coarea residual {residual:e} above {:e}", a.tol),
    );
    Ok(report)
}

pub fn decomposition(ctx: &Context, a: &DecompositionArgs) -> Result<Report, Failure> {
    let e = load_set(&a.set)?;
    let inner = window(Some(&a.inner), &e.spec, "inner")?;
    let outer = window(a.outer.as_deref(), &e.spec, "outer")?;
    let table = ctx.table(&e.spec, a.s)?;
    let residual = decomposition_check(&e, &inner, &outer, &table).at("inner")?;
    let total = perimeter(&e, &outer, &table).at("outer")?.total;
    let mut report = Report::new(json_doc(
        &ctx.config,
        json!({"residual": residual, "outer_perimeter": total}),
    ));
    report.check(
        residual <= a.tol * (1.0 + total.abs()),
        format!("decomposition residual {residual:e} above tolerance"),
    );
    Ok(report)
}

pub fn strip(ctx: &Context, a: &StripArgs) -> Result<Report, Failure> {
    let (spec, mask) = io::read_grid(&a.grid).at("grid")?;
    let w = DomainWindow::new(spec.clone(), mask).at("grid")?;
    let table = ctx.table(&spec, a.s)?;
    let level_area = a.level_area.unwrap_or_else(|| boundary_measure(&w));
    let scan = strip_scan(&w, &a.deltas, level_area, &table).at("deltas")?;
    let rows: Vec<Vec<Cell>> = scan
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.delta),
                Cell::F(r.value),
                Cell::F(r.bound),
                Cell::F(scan.exponent),
            ]
        })
        .collect();
    let mut report = Report::new(csv(
        &ctx.config,
        &["delta", "value", "bound", "exponent"],
        &rows,
    ));
    report.check(
        (scan.exponent - (1.0 - a.s)).abs() <= a.exponent_tol,
        format!(
            "fitted exponent {:.4} is not within {} of {}",
            scan.exponent,
            a.exponent_tol,
            1.0 - a.s
        ),
    );
    report.check(
        scan.rows.iter().all(|r| r.value <= r.bound),
        "strip interaction exceeds the bound line",
    );
    Ok(report)
}

/// Smallest whole number of cells at least `x`.
fn cell_height(x: f64, h: f64) -> f64 {
    (x / h - 1e-9).ceil() * h
}

pub fn cylinder_scan(ctx: &Context, a: &CylinderArgs) -> Result<Report, Failure> {
    let (v, omega) = load_graph(&a.graph)?;
    let h = v.spec.h();
    let half = cell_height(sup_abs(&v, a.graph.farfield).max(a.k as f64) + 1.0, h);
    let sg = subgraph(&v, half)?;
    let spec = sg.spec().at("heights")?;
    let table = ctx.table(&spec, a.s)?;
    let rows = nonlocal_divergence_scan(&v, &omega, &a.t, &table).at("t")?;
    let e = sg.to_cellset().at("heights")?;
    let lb = local_part_bound(&e, &omega, a.k, &table).at("k")?;
    let slope = tail_slope(&rows);
    let mut text = csv(
        &ctx.config,
        &["t", "lower_bound", "value"],
        &divergence_rows(&rows),
    );
    text += &format!(
        "# summary {}\n",
        json!({"tail_slope": slope, "local_part": lb.total, "local_part_bound": lb.bound})
    );
    let mut report = Report::new(text);
    check_divergence(&mut report, &rows);
    report.check(lb.total <= lb.bound, "local part exceeds its bound");
    if v.spec.dim() == 1 {
        report.check(
            (slope - (1.0 - a.s)).abs() <= 0.1,
            format!("tail slope {slope:.4} is not within 0.1 of {}", 1.0 - a.s),
        );
    }
    Ok(report)
}

pub fn sector_scan(ctx: &Context, a: &SectorArgs) -> Result<Report, Failure> {
    let (v, omega) = load_graph(&a.graph)?;
    let h = v.spec.h();
    let half = cell_height(sup_abs(&v, a.graph.farfield) + 1.0, h);
    let sg = subgraph(&v, half)?;
    let table = ctx.table(&sg.spec().at("heights")?, a.s)?;
    let rows = sector_divergence_scan(&v, &omega, a.sigma, a.bound, &a.t, &table).at("t")?;
    let mut text = csv(
        &ctx.config,
        &["t", "lower_bound", "value"],
        &divergence_rows(&rows),
    );
    text += &format!("# summary {}\n", json!({"tail_slope": tail_slope(&rows)}));
    let mut report = Report::new(text);
    check_divergence(&mut report, &rows);
    Ok(report)
}

pub fn confinement(ctx: &Context, a: &ConfinementArgs) -> Result<Report, Failure> {
    let (v, omega) = load_graph(&a.graph)?;
    let h = v.spec.h();
    let top = a.k0 + a.extra as f64;
    let half = cell_height(top.max(sup_abs(&v, a.graph.farfield)) + 1.0, h);
    let sg = subgraph(&v, half)?;
    let spec = sg.spec().at("heights")?;
    let table = ctx.table(&spec, a.s)?;
    let inner = cylinder_window(&spec, &omega, a.k0).at("k0")?;
    let mut rows = Vec::new();
    let mut first: Option<Vec<bool>> = None;
    let mut m = f64::NAN;
    let mut all_same = true;
    for j in 0..=a.extra {
        let k = a.k0 + j as f64;
        let r = solve_cylinder(&sg, &omega, k, &table, a.tol, a.max_iter).at("k0")?;
        if j == 0 {
            m = vertical_confinement_check(&r.minimizer, &v, &omega)
                .at("k0")?
                .m;
            if let Some(path) = &a.minimizer_out {
                io::write_grid(path, &spec, &r.minimizer.inside).at("minimizer-out")?;
            }
        }
        let mask: Vec<bool> = inner
            .omega
            .iter()
            .zip(&r.minimizer.inside)
            .map(|(&w, &b)| w && b)
            .collect();
        let same = first.as_ref().map_or(true, |f| *f == mask);
        all_same &= same;
        first.get_or_insert(mask);
        rows.push(vec![
            Cell::F(k),
            Cell::F(r.energy),
            Cell::F(r.relaxed_energy),
            Cell::U(r.iterations),
            Cell::F(m),
            Cell::B(same),
        ]);
    }
    let header = [
        "k",
        "energy",
        "relaxed_energy",
        "iterations",
        "m",
        "identical_inside_k0",
    ];
    let mut report = Report::new(csv(&ctx.config, &header, &rows));
    report.check(all_same, "minimizers differ inside the smallest cylinder");
    report.check(
        m < a.k0,
        format!("measured confinement height {m} is not below k0 = {}", a.k0),
    );
    Ok(report)
}

pub fn davila(ctx: &Context, a: &DavilaArgs) -> Result<Report, Failure> {
    let (v, omega) = load_graph(&a.graph)?;
    let rows = graph_area_asymptotics(&v, &omega, &a.s_list, &a.refinements).at("refinements")?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.s),
                Cell::F(r.h),
                Cell::F(r.scaled_local),
                Cell::F(r.area_term),
                Cell::F(r.ratio),
            ]
        })
        .collect();
    let mut text = csv(
        &ctx.config,
        &["s", "h", "scaled_local", "area_term", "ratio"],
        &cells,
    );
    // monotonicity in refinement is reported, not enforced
    let ns = a.s_list.len();
    let flagged: Vec<f64> = (0..ns)
        .filter(|&j| {
            let ratios: Vec<f64> = rows
                .iter()
                .skip(j)
                .step_by(ns)
                .map(|r| (r.ratio - 1.0).abs())
                .collect();
            !ratios.windows(2).all(|w| w[1] < w[0])
        })
        .map(|j| a.s_list[j])
        .collect();
    text += &format!(
        "# summary {}\n",
        json!({"not_monotone_in_refinement": flagged})
    );
    Ok(Report::new(text))
}

pub fn diverge(ctx: &Context, a: &DivergeArgs) -> Result<Report, Failure> {
    let beta: Box<dyn Fn(usize) -> f64 + Sync> = match a.beta.as_str() {
        "log-squared" => Box::new(|k: usize| {
            let k = k as f64;
            1.0 / (k * (k + 1.0).ln().powi(2))
        }),
        other => {
            let p: f64 = other
                .strip_prefix("power:")
                .and_then(|p| p.parse().ok())
                .filter(|p: &f64| *p > 0.0)
                .ok_or_else(|| Failure::config("beta", format!("unknown sequence `{other}`")))?;
            Box::new(move |k: usize| (k as f64).powf(-p))
        }
    };
    KernelParams::new(a.s, 1).at("s")?;
    let rows =
        a.m.iter()
            .map(|&m| {
                Ok(vec![
                    Cell::U(m),
                    Cell::F(divergence_probe_1d(&beta, m, a.s).at("m")?),
                ])
            })
            .collect::<Result<Vec<_>, Failure>>()?;
    Ok(Report::new(csv(&ctx.config, &["m", "value"], &rows)))
}
