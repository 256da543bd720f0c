//! Subgraphs in a cylinder `Ω × ℝ`: the local part stays finite, the
//! nonlocal part diverges like `T^{1-s}`, minimizers are vertically confined,
//! and `(1 - s)` times the local part approaches `ω_n` times the area.
//!
//! The base has dimension `n`; every gridded set here lives on an
//! `(n + 1)`-dimensional grid whose last axis is vertical.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::functional::{interaction, perimeter, PerimeterBreakdown};
use crate::grid::{
    CellSet, DomainWindow, ExteriorModel, FieldExterior, GridSpec, Lattice, ScalarField, Subgraph,
};
use crate::kernel::{build_table, tail_mass, unit_ball_volume, InteractionTable, KernelParams};
use crate::minimize::{solve, MinimizationProblem, SolverReport};
use crate::quad;
use crate::sum::Accumulator;
use crate::{Error, Result};

const FACE_TOL: f64 = 1e-9;

/// `Sg(v) = {(x, t) : t < v(x)}` with `v` tabulated on a base grid and equal
/// to a constant beyond it, gridded on `vertical`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphSet {
    pub base_spec: GridSpec,
    pub v: ScalarField,
    pub vertical: (f64, f64),
    pub farfield: f64,
}

impl SubgraphSet {
    pub fn new(v: ScalarField, vertical: (f64, f64)) -> Result<Self> {
        let farfield = match v.exterior {
            FieldExterior::Constant(c) => c,
            FieldExterior::Indicator(_) => {
                return Err(Error::HypothesisViolated(
                    "graph heights need a constant far field".into(),
                ))
            }
        };
        if v.values.iter().chain([&farfield]).any(|x| !x.is_finite()) {
            return Err(Error::HypothesisViolated(
                "graph heights must be finite".into(),
            ));
        }
        let h = v.spec.h();
        let rows = (vertical.1 - vertical.0) / h;
        if !(rows >= 1.0) || (rows - rows.round()).abs() > FACE_TOL {
            return Err(Error::InvalidGrid(
                "vertical window must be a whole number of cells".into(),
            ));
        }
        Ok(Self {
            base_spec: v.spec.clone(),
            v,
            vertical,
            farfield,
        })
    }

    /// The `(n + 1)`-dimensional grid.
    pub fn spec(&self) -> Result<GridSpec> {
        lift(&self.base_spec, self.vertical)
    }

    pub fn exterior(&self) -> Result<ExteriorModel> {
        Ok(ExteriorModel::Subgraph(Subgraph::new(
            self.base_spec.clone(),
            self.v.values.clone(),
            self.farfield,
        )?))
    }

    pub fn to_cellset(&self) -> Result<CellSet> {
        let spec = self.spec()?;
        let model = self.exterior()?;
        let dim = spec.dim();
        CellSet::from_fn(spec, model.clone(), |p| model.contains(p, dim))
    }
}

fn lift(base: &GridSpec, vertical: (f64, f64)) -> Result<GridSpec> {
    let n = base.dim();
    if n > 2 {
        return Err(Error::InvalidGrid("base dimension must be 1 or 2".into()));
    }
    let h = base.h();
    let rows = ((vertical.1 - vertical.0) / h).round() as usize;
    let mut origin = base.origin().to_vec();
    origin.push(vertical.0);
    let mut extent = base.extent().to_vec();
    extent.push(rows);
    GridSpec::new(&origin, &extent, h)
}

fn check_base(spec: &GridSpec, omega_base: &DomainWindow) -> Result<()> {
    if spec.dim() < 2 || spec.base()? != omega_base.spec {
        return Err(Error::SpecMismatch);
    }
    Ok(())
}

fn top(spec: &GridSpec) -> f64 {
    let n = spec.dim() - 1;
    spec.origin()[n] + spec.extent()[n] as f64 * spec.h()
}

/// Base cell index of an `(n + 1)`-dimensional cell.
fn column(spec: &GridSpec, base: &GridSpec, i: usize) -> usize {
    let c = spec.coords(i);
    let mut b = c;
    b[spec.dim() - 1] = 0;
    base.index(b).expect("lateral coordinates lie in the base")
}

/// `Ω^k = Ω × (-k, k)` as a window on `spec`.
pub fn cylinder_window(spec: &GridSpec, omega_base: &DomainWindow, k: f64) -> Result<DomainWindow> {
    check_base(spec, omega_base)?;
    let n = spec.dim() - 1;
    let base = &omega_base.spec;
    let omega = (0..spec.num_cells())
        .map(|i| {
            let t = spec.center(i)[n];
            omega_base.omega[column(spec, base, i)] && t > -k && t < k
        })
        .collect();
    DomainWindow::new(spec.clone(), omega)
}

fn check_coverage(spec: &GridSpec, reach: f64) -> Result<()> {
    let n = spec.dim() - 1;
    let available = (-spec.origin()[n]).min(top(spec));
    if available < reach - FACE_TOL {
        return Err(Error::WindowTooShort {
            needed: reach,
            available,
        });
    }
    Ok(())
}

/// `P_s(E, Ω^k)`; the grid must cover `(-k-1, k+1)`.
pub fn truncated_cylinder_perimeter(
    e: &CellSet,
    omega_base: &DomainWindow,
    k: f64,
    table: &InteractionTable,
) -> Result<PerimeterBreakdown> {
    check_base(&e.spec, omega_base)?;
    check_coverage(&e.spec, k + 1.0)?;
    let window = cylinder_window(&e.spec, omega_base, k)?;
    perimeter(e, &window, table)
}

/// `G(r, g) = ∫_g^∞ (u - g)(r² + u²)^{-q/2} du` with `q = n + 1 + s`: the
/// interaction of two vertical half-lines at horizontal distance `r` whose
/// ends are `g` apart.
pub fn half_line_pair(r: f64, g: f64, n: usize, s: f64) -> f64 {
    let q = n as f64 + 1.0 + s;
    if r == 0.0 {
        return g.powf(2.0 - q) * (1.0 / (q - 2.0) - 1.0 / (q - 1.0));
    }
    let rho2 = r * r + g * g;
    let j1 = rho2.powf(1.0 - q / 2.0) / (q - 2.0);
    let a = (q - 1.0) / 2.0;
    let j0 = r.powf(1.0 - q) * 0.5 * beta(a, 0.5) * beta_reg(a, 0.5, r * r / rho2);
    j1 - g * j0
}

/// `∫_d^∞ (r² + u²)^{-q/2} du`.
fn half_line_point(r: f64, d: f64, n: usize, s: f64) -> f64 {
    let q = n as f64 + 1.0 + s;
    if r == 0.0 {
        return d.powf(1.0 - q) / (q - 1.0);
    }
    let a = (q - 1.0) / 2.0;
    r.powf(1.0 - q) * 0.5 * beta(a, 0.5) * beta_reg(a, 0.5, r * r / (r * r + d * d))
}

/// Gauss points `(x, weight)` covering the base cells of `Ω`.
fn base_points(omega_base: &DomainWindow) -> Vec<([f64; 2], f64)> {
    let spec = &omega_base.spec;
    let h = spec.h();
    let mut out = Vec::new();
    for i in omega_base.cells() {
        let c = spec.center(i);
        let xs: Vec<(f64, f64)> = quad::nodes(8, c[0] - h / 2.0, c[0] + h / 2.0).collect();
        if spec.dim() == 1 {
            out.extend(xs.iter().map(|&(x, w)| ([x, 0.0], w)));
        } else {
            for (y, wy) in quad::nodes(8, c[1] - h / 2.0, c[1] + h / 2.0) {
                out.extend(xs.iter().map(|&(x, w)| ([x, y], w * wy)));
            }
        }
    }
    out
}

/// Radius of the smallest centered ball containing `Ω`.
fn enclosing_radius(omega_base: &DomainWindow) -> f64 {
    let spec = &omega_base.spec;
    let h = spec.h();
    let n = spec.dim();
    omega_base
        .cells()
        .into_iter()
        .map(|i| {
            let c = spec.center(i);
            (0..n)
                .map(|a| (c[a].abs() + h / 2.0).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Directions `Σ ⊂ S^{n-1}` as a fraction of the sphere: both rays or `+e₁`
/// in 1D, the arc `[0, 2πσ)` in 2D.
fn check_sector(n: usize, sigma: f64) -> Result<()> {
    let ok = if n == 1 {
        sigma == 1.0 || sigma == 0.5
    } else {
        sigma > 0.0 && sigma <= 1.0
    };
    if !ok {
        return Err(Error::HypothesisViolated(format!(
            "unsupported sector fraction {sigma}"
        )));
    }
    Ok(())
}

fn in_sector(p: &[f64], n: usize, sigma: f64) -> bool {
    if n == 1 {
        sigma == 1.0 || p[0] > 0.0
    } else {
        let phi = p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI);
        phi < 2.0 * std::f64::consts::PI * sigma
    }
}

/// `L_s(Ω × (-∞, -T), S × (T, ∞))` with `S = {rω : r ∈ (r₀, T), ω ∈ Σ}`.
fn column_interaction(omega_base: &DomainWindow, r0: f64, t: f64, sigma: f64, s: f64) -> f64 {
    let n = omega_base.spec.dim();
    let pts = base_points(omega_base);
    let g = 2.0 * t;
    let panels = 16;
    let parts: Vec<f64> = pts
        .par_iter()
        .map(|&(x, wx)| {
            let v = if n == 1 {
                let right = quad::integrate(
                    |y| half_line_pair((y - x[0]).abs(), g, 1, s),
                    r0,
                    t,
                    panels,
                    12,
                );
                let left = if sigma == 1.0 {
                    quad::integrate(
                        |y| half_line_pair((y - x[0]).abs(), g, 1, s),
                        -t,
                        -r0,
                        panels,
                        12,
                    )
                } else {
                    0.0
                };
                right + left
            } else {
                let arc = 2.0 * std::f64::consts::PI * sigma;
                quad::integrate(
                    |rho| {
                        rho * quad::integrate(
                            |phi| {
                                let d = ((rho * phi.cos() - x[0]).powi(2)
                                    + (rho * phi.sin() - x[1]).powi(2))
                                .sqrt();
                                half_line_pair(d, g, 2, s)
                            },
                            0.0,
                            arc,
                            8,
                            12,
                        )
                    },
                    r0,
                    t,
                    8,
                    12,
                )
            };
            wx * v
        })
        .collect();
    crate::sum::sum(parts)
}

/// One row of a divergence scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub t: f64,
    /// Closed-form lower bound `a_T`.
    pub lower_bound: f64,
    pub value: f64,
}

fn sup_abs(v: &ScalarField) -> Result<f64> {
    let far = match v.exterior {
        FieldExterior::Constant(c) => c,
        FieldExterior::Indicator(_) => {
            return Err(Error::HypothesisViolated(
                "v needs a constant far field".into(),
            ))
        }
    };
    let m = v.values.iter().fold(far.abs(), |m, x| m.max(x.abs()));
    if !m.is_finite() {
        return Err(Error::HypothesisViolated("v is unbounded".into()));
    }
    Ok(m)
}

fn check_schedule(ts: &[f64], t0: f64) -> Result<()> {
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSchedule);
    }
    if let Some(&t) = ts.first() {
        if !(t > t0) {
            return Err(Error::HypothesisViolated(format!(
                "T = {t} does not exceed T0 = {t0}"
            )));
        }
    }
    Ok(())
}

fn lower_bound(omega_area: f64, region: f64, t: f64, n: usize, s: f64) -> f64 {
    let nf = n as f64;
    omega_area / (2f64.powf((nf + 1.0 + s) / 2.0) * (nf + s) * (nf - 1.0 + s)) * region
        / (2.0 * t).powf(nf - 1.0 + s)
}

fn exponent(table: &InteractionTable, n: usize) -> Result<f64> {
    if table.params().dim != n + 1 {
        return Err(Error::SpecMismatch);
    }
    Ok(table.params().s)
}

/// `L_s(Ω × (-∞, -T), (B_T ∖ B_R) × (T, ∞))` for each `T`, with the
/// closed-form lower bound `a_T`.
pub fn nonlocal_divergence_scan(
    v: &ScalarField,
    omega_base: &DomainWindow,
    t_schedule: &[f64],
    table: &InteractionTable,
) -> Result<Vec<DivergenceRow>> {
    if v.spec != omega_base.spec {
        return Err(Error::SpecMismatch);
    }
    let n = v.spec.dim();
    let s = exponent(table, n)?;
    let k = sup_abs(v)?;
    let r = enclosing_radius(omega_base);
    check_schedule(t_schedule, k.max(r))?;
    let area = omega_base.count() as f64 * omega_base.spec.cell_volume();
    Ok(t_schedule
        .iter()
        .map(|&t| DivergenceRow {
            t,
            lower_bound: lower_bound(
                area,
                unit_ball_volume(n) * (t.powi(n as i32) - r.powi(n as i32)),
                t,
                n,
                s,
            ),
            value: column_interaction(omega_base, r, t, 1.0, s),
        })
        .collect())
}

/// The divergence scan restricted to directions in a sector of fraction
/// `sigma`, for `u` with `|u| ≤ M` on `Ω` and `u ≤ M` (or `u ≥ -M`) along
/// the sector beyond `r₀`. `r₀` is the smallest radius past which the sector
/// condition holds on the tabulated base.
pub fn sector_divergence_scan(
    u: &ScalarField,
    omega_base: &DomainWindow,
    sigma: f64,
    m: f64,
    t_schedule: &[f64],
    table: &InteractionTable,
) -> Result<Vec<DivergenceRow>> {
    if u.spec != omega_base.spec {
        return Err(Error::SpecMismatch);
    }
    let n = u.spec.dim();
    let s = exponent(table, n)?;
    check_sector(n, sigma)?;
    sup_abs(u)?;
    if omega_base.cells().iter().any(|&i| u.values[i].abs() > m) {
        return Err(Error::HypothesisViolated(
            "|u| exceeds M on the base domain".into(),
        ));
    }
    let far = match u.exterior {
        FieldExterior::Constant(c) => c,
        FieldExterior::Indicator(_) => unreachable!("checked by sup_abs"),
    };
    let spec = &u.spec;
    let h = spec.h();
    let mut r0 = [f64::NEG_INFINITY; 2];
    for side in 0..2 {
        let bad = |x: f64| if side == 0 { x > m } else { x < -m };
        if bad(far) {
            r0[side] = f64::INFINITY;
            continue;
        }
        for i in 0..spec.num_cells() {
            let c = spec.center(i);
            if in_sector(&c[..n], n, sigma) && bad(u.values[i]) {
                let rad = (0..n)
                    .map(|a| (c[a].abs() + h / 2.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r0[side] = r0[side].max(rad);
            }
        }
    }
    let r0 = r0[0].min(r0[1]).max(0.0);
    if !r0.is_finite() {
        return Err(Error::HypothesisViolated(
            "u is not one-sided bounded along the sector".into(),
        ));
    }
    let r = enclosing_radius(omega_base);
    let t0 = m.max(r).max(r0);
    check_schedule(t_schedule, t0)?;
    let area = omega_base.count() as f64 * omega_base.spec.cell_volume();
    let sphere = sigma * n as f64 * unit_ball_volume(n);
    Ok(t_schedule
        .iter()
        .map(|&t| {
            let region = sphere / n as f64 * (t.powi(n as i32) - t0.powi(n as i32));
            DivergenceRow {
                t,
                lower_bound: lower_bound(area, region, t, n, s),
                value: column_interaction(omega_base, t0, t, sigma, s),
            }
        })
        .collect())
}

/// Least-squares slope of `log value` against `log t` over the last half of
/// the rows.
pub fn tail_slope(rows: &[DivergenceRow]) -> f64 {
    let tail = &rows[rows.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.value.ln()).collect();
    least_squares_slope(&xs, &ys)
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `P_s^L(E, Ω^∞)` against the explicit three-term bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPartBound {
    /// `P_s^L(E, Ω^{k+1})` on the grid.
    pub window_local: f64,
    /// Interactions involving the columns beyond `Ω^{k+1}`.
    pub tails: f64,
    pub total: f64,
    pub bound: f64,
}

const COLUMN_DEPTH: i64 = 256;

/// Interaction of one cell with the base columns of `Ω` over the vertical
/// rows `< row` (`below`) or `≥ row`.
fn column_mass(
    table: &InteractionTable,
    omega_base: &DomainWindow,
    cell: Lattice,
    row: i64,
    below: bool,
) -> f64 {
    let spec = table.spec();
    let base = &omega_base.spec;
    let n = base.dim();
    let h = spec.h();
    let s = table.params().s;
    let centre = spec.lattice_center(cell);
    let mut acc = Accumulator::new();
    for col in omega_base.cells() {
        let bc = base.coords(col);
        let mut delta = [0i64; 3];
        for a in 0..n {
            delta[a] = bc[a] - cell[a];
        }
        for m in 0..COLUMN_DEPTH {
            let r = if below { row - 1 - m } else { row + m };
            delta[n] = r - cell[n];
            acc.add(table.weight(delta));
        }
        let bcen = base.center(col);
        let lateral = (0..n)
            .map(|a| (bcen[a] - centre[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let face = spec.origin()[n]
            + h * (if below {
                row - COLUMN_DEPTH
            } else {
                row + COLUMN_DEPTH
            }) as f64;
        let d = (centre[n] - face).abs();
        acc.add(h.powi(2 * n as i32 + 1) * half_line_point(lateral, d, n, s));
    }
    acc.value()
}

/// Assemble `P_s^L(E, Ω^∞)` for `E` with `Ω × (-∞, -k] ⊂ E ∩ Ω^∞ ⊂ Ω × (-∞, k]`
/// and compare it with the bound built from `(n+1)ω_{n+1}/s · (2k+1)|Ω|` and
/// `|Ω|² / ((n+s)(n-1+s)) · (2k+2)^{-(n-1+s)}`.
pub fn local_part_bound(
    e: &CellSet,
    omega_base: &DomainWindow,
    k: usize,
    table: &InteractionTable,
) -> Result<LocalPartBound> {
    let spec = &e.spec;
    check_base(spec, omega_base)?;
    let kf = k as f64;
    check_coverage(spec, kf + 1.0)?;
    let n = omega_base.spec.dim();
    let h = spec.h();
    let s = table.params().s;
    let lo_row = ((-kf - 1.0 - spec.origin()[n]) / h).round() as i64;
    let hi_row = ((kf + 1.0 - spec.origin()[n]) / h).round() as i64;
    if ((-kf - 1.0 - spec.origin()[n]) / h - lo_row as f64).abs() > FACE_TOL {
        return Err(Error::InvalidGrid("±(k+1) must be cell faces".into()));
    }
    let window = cylinder_window(spec, omega_base, kf + 1.0)?;
    for i in window.cells() {
        let t = spec.center(i)[n];
        if (t < -kf && !e.inside[i]) || (t > kf && e.inside[i]) {
            return Err(Error::HypothesisViolated(
                "set is not sandwiched between -k and k".into(),
            ));
        }
    }
    let inside: Vec<bool> = window
        .omega
        .iter()
        .zip(&e.inside)
        .map(|(&w, &b)| w && b)
        .collect();
    let outside: Vec<bool> = window
        .omega
        .iter()
        .zip(&e.inside)
        .map(|(&w, &b)| w && !b)
        .collect();
    let window_local = interaction(&inside, &outside, table)?;
    let cells = window.cells();
    let cross: Vec<f64> = cells
        .par_iter()
        .map(|&i| {
            let c = spec.coords(i);
            if e.inside[i] {
                column_mass(table, omega_base, c, hi_row, false)
            } else {
                column_mass(table, omega_base, c, lo_row, true)
            }
        })
        .collect();
    let pts = base_points(omega_base);
    let gap = 2.0 * kf + 2.0;
    let far: Vec<f64> = pts
        .par_iter()
        .map(|&(x, wx)| {
            let mut acc = Accumulator::new();
            for &(y, wy) in &pts {
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                acc.add(wy * half_line_pair(r, gap, n, s));
            }
            wx * acc.value()
        })
        .collect();
    let tails = crate::sum::sum(cross) + crate::sum::sum(far);
    let area = omega_base.count() as f64 * omega_base.spec.cell_volume();
    let nf = n as f64;
    let tm = tail_mass(1.0, table.params())?;
    let bound = window_local
        + 2.0 * tm * (2.0 * kf + 1.0) * area
        + area * area / ((nf + s) * (nf - 1.0 + s)) / gap.powf(nf - 1.0 + s);
    Ok(LocalPartBound {
        window_local,
        tails,
        total: window_local + tails,
        bound,
    })
}

/// Outcome of the vertical sandwich measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confinement {
    /// Smallest `M` with `Ω × (-∞, -M] ⊂ E ∩ Ω^∞ ⊂ Ω × (-∞, M]`.
    pub m: f64,
    /// Every column of `Ω` is a bottom segment.
    pub subgraph: bool,
    /// `(column centre, top of the set in the column, v beyond ∂Ω)` for
    /// columns touching `∂Ω`.
    pub traces: Vec<(f64, f64, f64)>,
}

/// Measure the vertical extent of `E` over `Ω`.
pub fn vertical_confinement_check(
    e: &CellSet,
    v: &ScalarField,
    omega_base: &DomainWindow,
) -> Result<Confinement> {
    let spec = &e.spec;
    check_base(spec, omega_base)?;
    if v.spec != omega_base.spec {
        return Err(Error::SpecMismatch);
    }
    let n = omega_base.spec.dim();
    let base = &omega_base.spec;
    let rows = spec.extent()[n] as i64;
    let h = spec.h();
    let z0 = spec.origin()[n];
    let mut m = 0f64;
    let mut subgraph = true;
    let mut traces = Vec::new();
    for col in omega_base.cells() {
        let bc = base.coords(col);
        let phase = |r: i64| {
            let mut c = bc;
            c[n] = r;
            e.inside[spec.index(c).expect("row in range")]
        };
        if phase(rows - 1) || !phase(0) {
            return Err(Error::ConfinementUndetermined);
        }
        let top_in = (0..rows)
            .rev()
            .find(|&r| phase(r))
            .map(|r| z0 + h * (r + 1) as f64);
        let low_out = (0..rows).find(|&r| !phase(r)).map(|r| z0 + h * r as f64);
        let (top_in, low_out) = (
            top_in.unwrap_or(f64::NEG_INFINITY),
            low_out.unwrap_or(f64::INFINITY),
        );
        subgraph &= (top_in - low_out).abs() < 0.5 * h;
        m = m.max(top_in).max(-low_out);
        let mut outer = None;
        for nb in base.face_neighbors(bc) {
            let beyond = base.index(nb).is_none_or(|j| !omega_base.omega[j]);
            if beyond && outer.is_none() {
                outer = Some(v.value_at_lattice(nb));
            }
        }
        if let Some(vo) = outer {
            traces.push((base.center(col)[0], top_in, vo));
        }
    }
    Ok(Confinement {
        m,
        subgraph,
        traces,
    })
}

/// Minimization problem on `Ω^k` with exterior data `Sg(v)`.
pub fn cylinder_problem<'a>(
    sg: &SubgraphSet,
    omega_base: &DomainWindow,
    k: f64,
    table: &'a InteractionTable,
) -> Result<MinimizationProblem<'a>> {
    let e0 = sg.to_cellset()?;
    if &e0.spec != table.spec() {
        return Err(Error::SpecMismatch);
    }
    let window = cylinder_window(&e0.spec, omega_base, k)?;
    MinimizationProblem::new(window, e0, table)
}

pub fn solve_cylinder(
    sg: &SubgraphSet,
    omega_base: &DomainWindow,
    k: f64,
    table: &InteractionTable,
    tol: f64,
    max_iter: usize,
) -> Result<SolverReport> {
    solve(&cylinder_problem(sg, omega_base, k, table)?, tol, max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub s: f64,
    pub h: f64,
    /// `(1 - s) · P_s^L(Sg(u), Ω^{k+1})`.
    pub scaled_local: f64,
    /// `ω_n · A(u, Ω)`.
    pub area_term: f64,
    pub ratio: f64,
}

/// `∫_Ω √(1 + |∇u|²)` with central differences on the base grid.
pub fn classical_area(u: &ScalarField, omega_base: &DomainWindow) -> f64 {
    let spec = &u.spec;
    let n = spec.dim();
    let h = spec.h();
    let mut acc = Accumulator::new();
    for i in omega_base.cells() {
        let c = spec.coords(i);
        let mut g2 = 0.0;
        for a in 0..n {
            let (mut lo, mut hi) = (c, c);
            lo[a] -= 1;
            hi[a] += 1;
            let d = (u.value_at_lattice(hi) - u.value_at_lattice(lo)) / (2.0 * h);
            g2 += d * d;
        }
        acc.add(spec.cell_volume() * (1.0 + g2).sqrt());
    }
    acc.value()
}

/// `(1 - s) P_s^L(Sg(u), Ω^{k+1})` against `ω_n A(u, Ω)` for each `s` and
/// each refinement factor (cells of the base split `r` ways per axis).
pub fn graph_area_asymptotics(
    u: &ScalarField,
    omega_base: &DomainWindow,
    s_schedule: &[f64],
    refinements: &[usize],
) -> Result<Vec<AsymptoticsRow>> {
    if u.spec != omega_base.spec {
        return Err(Error::SpecMismatch);
    }
    let n = u.spec.dim();
    let cells = omega_base.cells();
    if cells.is_empty() {
        return Err(Error::DegenerateDomain);
    }
    let sup = cells.iter().fold(0f64, |m, &i| m.max(u.values[i].abs()));
    let k = sup.ceil() + 1.0;
    let area = classical_area(u, omega_base);
    let base = &u.spec;
    // bounding box of Ω in base lattice units
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for &i in &cells {
        let c = base.coords(i);
        for a in 0..n {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let mut rows = Vec::new();
    for &r in refinements {
        if r == 0 {
            return Err(Error::InvalidGrid(
                "refinement factor must be positive".into(),
            ));
        }
        let h = base.h() / r as f64;
        let rows_v = 2.0 * k / h;
        if (rows_v - rows_v.round()).abs() > FACE_TOL {
            return Err(Error::InvalidGrid(
                "vertical window is not a whole number of cells".into(),
            ));
        }
        let mut origin = Vec::new();
        let mut extent = Vec::new();
        for a in 0..n {
            origin.push(base.origin()[a] + lo[a] as f64 * base.h());
            extent.push((hi[a] - lo[a] + 1) as usize * r);
        }
        origin.push(-k);
        extent.push(rows_v.round() as usize);
        let spec = GridSpec::new(&origin, &extent, h)?;
        let mut window = vec![false; spec.num_cells()];
        let mut inside = vec![false; spec.num_cells()];
        for i in 0..spec.num_cells() {
            let p = spec.center(i);
            let bc = base.locate(&p[..n]);
            let bi = base.index(bc).expect("within the bounding box");
            window[i] = omega_base.omega[bi];
            inside[i] = window[i] && p[n] < u.values[bi];
        }
        let outside: Vec<bool> = window.iter().zip(&inside).map(|(&w, &b)| w && !b).collect();
        for &s in s_schedule {
            let table = build_table(&spec, KernelParams::new(s, n + 1)?, spec.max_offset())?;
            let local = interaction(&inside, &outside, &table)?;
            let scaled_local = (1.0 - s) * local;
            let area_term = unit_ball_volume(n) * area;
            rows.push(AsymptoticsRow {
                s,
                h,
                scaled_local,
                area_term,
                ratio: scaled_local / area_term,
            });
        }
    }
    Ok(rows)
}
