//! Interaction functionals, s-perimeters and the relaxed energy.
//!
//! All energies are assembled per source cell in parallel and reduced in
//! cell order with compensated summation, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exterior::{masses, Masses};
use crate::grid::{CellSet, DomainWindow, ExteriorModel, FieldExterior, ScalarField};
use crate::kernel::{interval_pair_exact, InteractionTable};
use crate::sum::Accumulator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerimeterBreakdown {
    pub local: f64,
    pub nonlocal: f64,
    pub total: f64,
    pub truncation_error_bound: f64,
    /// Set when the window has no cells, so every contribution is vacuous.
    pub degenerate: bool,
}

fn check_len(table: &InteractionTable, len: usize) -> Result<()> {
    if table.spec().num_cells() != len {
        return Err(Error::SpecMismatch);
    }
    Ok(())
}

/// `L_s(A, B) = Σ_{i∈A, j∈B} w(j - i)` over box cells.
///
/// Pairs are visited in a fixed order independent of argument order, so the
/// result is bitwise symmetric in `(A, B)`.
pub fn interaction(a: &[bool], b: &[bool], table: &InteractionTable) -> Result<f64> {
    check_len(table, a.len())?;
    check_len(table, b.len())?;
    if a.iter().zip(b).any(|(&x, &y)| x && y) {
        return Err(Error::NotDisjoint);
    }
    let spec = table.spec();
    let n = spec.num_cells();
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !a[i] && !b[i] {
                return 0.0;
            }
            let mut acc = Accumulator::new();
            for j in i + 1..n {
                if (a[i] && b[j]) || (b[i] && a[j]) {
                    acc.add(table.weight(spec.offset(i, j)));
                }
            }
            acc.value()
        })
        .collect();
    Ok(crate::sum::sum(parts))
}

/// How each window cell couples to values beyond the box.
pub(crate) enum Coupling {
    /// Exterior is a set: `e|v - 1| + c|v|`.
    Set(Masses),
    /// Exterior is a constant `level`: `e|v - level|`.
    Constant(Masses, f64),
}

impl Coupling {
    pub(crate) fn new(
        table: &InteractionTable,
        ext: &FieldExterior,
        window: &DomainWindow,
    ) -> Result<Self> {
        Ok(match ext {
            FieldExterior::Indicator(m) => {
                Coupling::Set(masses(table, m, &window.omega, window.policy)?)
            }
            FieldExterior::Constant(v) => Coupling::Constant(
                masses(table, &ExteriorModel::Full, &window.omega, window.policy)?,
                *v,
            ),
        })
    }

    #[inline]
    pub(crate) fn term(&self, i: usize, v: f64) -> f64 {
        match self {
            Coupling::Set(m) => m.e[i] * (v - 1.0).abs() + m.c[i] * v.abs(),
            Coupling::Constant(m, level) => m.e[i] * (v - level).abs(),
        }
    }

    pub(crate) fn bound(&self) -> f64 {
        match self {
            Coupling::Set(m) | Coupling::Constant(m, _) => m.bound,
        }
    }
}

/// `(local, nonlocal)` parts of `F(u, Ω)`.
pub(crate) fn energy_parts(
    values: &[f64],
    omega: &[bool],
    coupling: &Coupling,
    table: &InteractionTable,
) -> (f64, f64) {
    let spec = table.spec();
    let n = spec.num_cells();
    let parts: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !omega[i] {
                return (0.0, 0.0);
            }
            let ui = values[i];
            let mut local = Accumulator::new();
            let mut nonlocal = Accumulator::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (ui - values[j]).abs();
                if d == 0.0 {
                    continue;
                }
                if omega[j] {
                    if j > i {
                        local.add(table.weight(spec.offset(i, j)) * d);
                    }
                } else {
                    nonlocal.add(table.weight(spec.offset(i, j)) * d);
                }
            }
            nonlocal.add(coupling.term(i, ui));
            (local.value(), nonlocal.value())
        })
        .collect();
    let mut local = Accumulator::new();
    let mut nonlocal = Accumulator::new();
    for (l, nl) in parts {
        local.add(l);
        nonlocal.add(nl);
    }
    (local.value(), nonlocal.value())
}

/// Repeated perimeter evaluation of sets sharing one exterior model and window.
pub(crate) struct PerimeterEvaluator<'a> {
    table: &'a InteractionTable,
    window: &'a DomainWindow,
    coupling: Coupling,
}

impl<'a> PerimeterEvaluator<'a> {
    pub(crate) fn new(
        table: &'a InteractionTable,
        model: &ExteriorModel,
        window: &'a DomainWindow,
    ) -> Result<Self> {
        if &window.spec != table.spec() {
            return Err(Error::SpecMismatch);
        }
        let coupling = Coupling::new(table, &FieldExterior::Indicator(model.clone()), window)?;
        Ok(Self {
            table,
            window,
            coupling,
        })
    }

    pub(crate) fn evaluate(&self, inside: &[bool]) -> PerimeterBreakdown {
        let values: Vec<f64> = inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let (local, nonlocal) =
            energy_parts(&values, &self.window.omega, &self.coupling, self.table);
        PerimeterBreakdown {
            local,
            nonlocal,
            total: local + nonlocal,
            truncation_error_bound: self.coupling.bound(),
            degenerate: self.window.count() == 0,
        }
    }
}

fn check_specs(field: &ScalarField, window: &DomainWindow, table: &InteractionTable) -> Result<()> {
    if field.spec != window.spec || &window.spec != table.spec() {
        return Err(Error::SpecMismatch);
    }
    Ok(())
}

/// `F(u, Ω)` split into its local and nonlocal parts.
pub fn relaxed_breakdown(
    u: &ScalarField,
    window: &DomainWindow,
    table: &InteractionTable,
) -> Result<PerimeterBreakdown> {
    check_specs(u, window, table)?;
    let coupling = Coupling::new(table, &u.exterior, window)?;
    let (local, nonlocal) = energy_parts(&u.values, &window.omega, &coupling, table);
    Ok(PerimeterBreakdown {
        local,
        nonlocal,
        total: local + nonlocal,
        truncation_error_bound: coupling.bound(),
        degenerate: window.count() == 0,
    })
}

/// `F(u, Ω) = ½ Σ_{i,j∈Ω} w|u_i - u_j| + Σ_{i∈Ω, j∉Ω} w|u_i - u_j|`.
pub fn relaxed_energy(
    u: &ScalarField,
    window: &DomainWindow,
    table: &InteractionTable,
) -> Result<f64> {
    Ok(relaxed_breakdown(u, window, table)?.total)
}

/// `P_s(E, Ω)` with its local/nonlocal split.
pub fn perimeter(
    e: &CellSet,
    window: &DomainWindow,
    table: &InteractionTable,
) -> Result<PerimeterBreakdown> {
    relaxed_breakdown(&ScalarField::indicator(e), window, table)
}

/// Residual of `P(E,Ω) = P(E,Ω') + L(E∩S, ∁E∖Ω') + L(E∖Ω, ∁E∩S)` with
/// `S = Ω∖Ω'`.
pub fn decomposition_check(
    e: &CellSet,
    inner: &DomainWindow,
    outer: &DomainWindow,
    table: &InteractionTable,
) -> Result<f64> {
    if !outer.contains(inner) {
        return Err(Error::NotNested);
    }
    if inner.spec != outer.spec || inner.policy != outer.policy {
        return Err(Error::SpecMismatch);
    }
    let p_outer = perimeter(e, outer, table)?;
    let p_inner = perimeter(e, inner, table)?;
    let spec = table.spec();
    let n = spec.num_cells();
    let strip: Vec<bool> = (0..n).map(|i| outer.omega[i] && !inner.omega[i]).collect();
    let m = masses(table, &e.exterior, &strip, outer.policy)?;
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !strip[i] {
                return 0.0;
            }
            let mut acc = Accumulator::new();
            if e.inside[i] {
                // partners in ∁E∖Ω'
                for j in 0..n {
                    if !e.inside[j] && !inner.omega[j] {
                        acc.add(table.weight(spec.offset(i, j)));
                    }
                }
                acc.add(m.c[i]);
            } else {
                // partners in E∖Ω
                for j in 0..n {
                    if e.inside[j] && !outer.omega[j] {
                        acc.add(table.weight(spec.offset(i, j)));
                    }
                }
                acc.add(m.e[i]);
            }
            acc.value()
        })
        .collect();
    let cross = crate::sum::sum(parts);
    Ok((p_outer.total - p_inner.total - cross).abs())
}

/// `L_s(Ω_{-δ}, Ω ∖ Ω_{-δ})`: the interaction between the inner parallel set
/// and the boundary strip of width `δ`.
pub fn strip_interaction(
    window: &DomainWindow,
    delta: f64,
    table: &InteractionTable,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidRadius(delta));
    }
    let spec = &window.spec;
    // padded so that a window filling the grid is measured from the grid edge
    let d = crate::grid::signed_distance_padded(spec, 1, |c| {
        spec.index(c).is_some_and(|i| window.omega[i])
    });
    let inner: Vec<bool> = d.iter().map(|&v| v < -delta).collect();
    let strip: Vec<bool> = window
        .omega
        .iter()
        .zip(&inner)
        .map(|(&o, &i)| o && !i)
        .collect();
    interaction(&inner, &strip, table)
}

/// `n ω_n / (s (1 - s)) · A`, where `A` bounds the `(n-1)`-measure of the
/// level sets of `d̄_Ω` near `∂Ω`; the strip interaction is at most this
/// times `δ^{1-s}`.
pub fn strip_constant(n: usize, s: f64, level_area: f64) -> f64 {
    n as f64 * crate::kernel::unit_ball_volume(n) / (s * (1.0 - s)) * level_area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripRow {
    pub delta: f64,
    pub value: f64,
    /// `C δ^{1-s}`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripScan {
    pub rows: Vec<StripRow>,
    pub constant: f64,
    /// Least-squares slope of `log value` against `log δ`.
    pub exponent: f64,
}

/// [`strip_interaction`] over `deltas` with the bound line and fitted exponent.
pub fn strip_scan(
    window: &DomainWindow,
    deltas: &[f64],
    level_area: f64,
    table: &InteractionTable,
) -> Result<StripScan> {
    if deltas.len() < 2 {
        return Err(Error::InvalidSchedule);
    }
    let n = window.spec.dim();
    let s = table.params().s;
    let constant = strip_constant(n, s, level_area);
    let rows = deltas
        .iter()
        .map(|&delta| {
            let value = strip_interaction(window, delta, table)?;
            if !(value > 0.0) {
                return Err(Error::HypothesisViolated(format!(
                    "δ = {delta} leaves no inner cells"
                )));
            }
            Ok(StripRow {
                delta,
                value,
                bound: constant * delta.powf(1.0 - s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
    Ok(StripScan {
        rows,
        constant,
        exponent: crate::cylinder::least_squares_slope(&xs, &ys),
    })
}

/// `Σ_k (t_{k+1} - t_k) P({u > t_k}, Ω)` over the distinct values of `u`,
/// including its exterior values.
pub fn coarea_check(
    u: &ScalarField,
    window: &DomainWindow,
    table: &InteractionTable,
) -> Result<(f64, f64)> {
    let lhs = relaxed_energy(u, window, table)?;
    let mut levels: Vec<f64> = u.values.clone();
    match &u.exterior {
        FieldExterior::Constant(c) => levels.push(*c),
        FieldExterior::Indicator(_) => levels.extend([0.0, 1.0]),
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let mut acc = Accumulator::new();
    for k in 0..levels.len().saturating_sub(1) {
        let t = levels[k];
        let set = CellSet::new(
            u.spec.clone(),
            u.values.iter().map(|&v| v > t).collect(),
            u.exterior.superlevel(t),
        )?;
        acc.add((levels[k + 1] - t) * perimeter(&set, window, table)?.total);
    }
    Ok((lhs, acc.value()))
}

/// Generator of a positive non-increasing sequence `β_1, β_2, …`.
pub trait Sequence: Sync {
    fn term(&self, k: usize) -> f64;
}

impl<F: Fn(usize) -> f64 + Sync> Sequence for F {
    fn term(&self, k: usize) -> f64 {
        self(k)
    }
}

/// `E_m = ∪_{j≤m} I_{2j}` with `I_k = (σ_k, σ_{k+1})`, `σ_k = β_1 + … + β_k`,
/// together with `M = σ_N` for `N = max(terms, 2m + 1)`.
#[derive(Debug, Clone)]
pub struct IntervalUnion {
    pub intervals: Vec<(f64, f64)>,
    pub total_length: f64,
}

pub fn interval_union<S: Sequence + ?Sized>(
    beta: &S,
    m: usize,
    terms: usize,
) -> Result<IntervalUnion> {
    let terms = terms.max(2 * m + 1);
    let mut edges = Vec::with_capacity(terms + 1);
    let mut acc = Accumulator::new();
    edges.push(0.0);
    let mut prev = f64::INFINITY;
    for k in 1..=terms {
        let b = beta.term(k);
        if !(b > 0.0 && b.is_finite()) || b > prev {
            return Err(Error::InvalidSequence(k));
        }
        prev = b;
        acc.add(b);
        edges.push(acc.value());
    }
    let intervals = (1..=m).map(|j| (edges[2 * j], edges[2 * j + 1])).collect();
    Ok(IntervalUnion {
        intervals,
        total_length: acc.value(),
    })
}

/// Number of terms used to approximate `M = Σ β_k` in [`divergence_probe_1d`].
pub const PROBE_TERMS: usize = 1 << 16;

/// `P_s(E, Ω)` for `E` a finite union of disjoint intervals and `Ω` an
/// interval, in exact closed form.
pub fn interval_union_perimeter(
    intervals: &[(f64, f64)],
    omega: (f64, f64),
    s: f64,
) -> Result<f64> {
    let (lo, hi) = omega;
    // Breakpoints of E and Ω split the line into pieces with constant phase
    // and constant membership in Ω.
    let mut cuts: Vec<f64> = vec![lo, hi];
    for &(a, b) in intervals {
        cuts.push(a);
        cuts.push(b);
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let in_e = |x: f64| intervals.iter().any(|&(a, b)| a <= x && x < b);
    let in_omega = |x: f64| lo <= x && x < hi;
    struct Piece {
        a: f64,
        b: f64,
        e: bool,
        omega: bool,
    }
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        pieces.push(Piece {
            a: w[0],
            b: w[1],
            e: in_e(mid),
            omega: in_omega(mid),
        });
    }
    let first = cuts[0];
    let last = *cuts.last().unwrap();
    let left_e = in_e(first - 1.0);
    let right_e = in_e(last + 1.0);
    if left_e || right_e {
        return Err(Error::HypothesisViolated(
            "intervals must be bounded".into(),
        ));
    }
    let mut acc = Accumulator::new();
    for (p, x) in pieces.iter().enumerate() {
        for y in &pieces[p + 1..] {
            if x.e != y.e && (x.omega || y.omega) {
                acc.add(interval_pair_exact(x.a, x.b, y.a, y.b, s)?);
            }
        }
        // both unbounded ends lie in ∁E ∖ Ω
        if x.e && x.omega {
            acc.add(crate::kernel::interval_halfline(x.a, x.b, last, s));
            acc.add(crate::kernel::interval_halfline(-x.b, -x.a, -first, s));
        }
    }
    Ok(acc.value())
}

/// `P_s(E_m, (0, M))` for the interval union built from `beta`.
pub fn divergence_probe_1d<S: Sequence + ?Sized>(beta: &S, m: usize, s: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidSequence(0));
    }
    let u = interval_union(beta, m, PROBE_TERMS)?;
    interval_union_perimeter(&u.intervals, (0.0, u.total_length), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::kernel::{build_table, KernelParams};

    fn table_1d(n: usize, s: f64) -> InteractionTable {
        let spec = GridSpec::new(&[0.0], &[n], 1.0).unwrap();
        build_table(&spec, KernelParams::new(s, 1).unwrap(), n).unwrap()
    }

    #[test]
    fn interaction_one_dimension() {
        let t = table_1d(4, 0.5);
        let a = [true, false, false, false];
        let b = [false, false, true, false];
        let v = interaction(&a, &b, &t).unwrap();
        assert_eq!(v, interval_pair_exact(0.0, 1.0, 2.0, 3.0, 0.5).unwrap());
        assert_eq!(interaction(&b, &a, &t).unwrap(), v);
        assert_eq!(interaction(&[false; 4], &b, &t).unwrap(), 0.0);
        assert!(matches!(interaction(&a, &a, &t), Err(Error::NotDisjoint)));
    }

    #[test]
    fn perimeter_1d_brute_force() {
        let s = 0.5;
        let t = table_1d(4, s);
        let e = CellSet::new(
            t.spec().clone(),
            vec![true, true, false, false],
            ExteriorModel::Empty,
        )
        .unwrap();
        let w = DomainWindow::full(t.spec().clone());
        let p = perimeter(&e, &w, &t).unwrap();
        // E = [0,2); ∁E = (-∞,0) ∪ [2,∞), Ω = [0,4)
        let expect = interval_pair_exact(0.0, 2.0, 2.0, 4.0, s).unwrap()
            + crate::kernel::interval_halfline(0.0, 2.0, 4.0, s)
            + crate::kernel::interval_halfline(-2.0, 0.0, 0.0, s);
        assert!((p.total - expect).abs() < 1e-12 * expect);
        assert_eq!(p.total, p.local + p.nonlocal);
        assert_eq!(p.truncation_error_bound, 0.0);
        let q = perimeter(&e.complement(), &w, &t).unwrap();
        assert_eq!(p.total, q.total);
    }

    #[test]
    fn empty_and_full_sets_have_zero_perimeter() {
        let spec = GridSpec::cube(2, 0.0, 4, 0.5).unwrap();
        let t = build_table(&spec, KernelParams::new(0.5, 2).unwrap(), 4).unwrap();
        let w = DomainWindow::full(spec.clone());
        let empty = CellSet::new(spec.clone(), vec![false; 16], ExteriorModel::Empty).unwrap();
        assert_eq!(perimeter(&empty, &w, &t).unwrap().total, 0.0);
        assert_eq!(perimeter(&empty.complement(), &w, &t).unwrap().total, 0.0);
    }

    #[test]
    fn interval_union_matches_grid() {
        // E = [1,3) in Ω = [0,5): grid with h = 1 and exact intervals agree.
        let s = 0.3;
        let t = table_1d(5, s);
        let e = CellSet::new(
            t.spec().clone(),
            vec![false, true, true, false, false],
            ExteriorModel::Empty,
        )
        .unwrap();
        let grid = perimeter(&e, &DomainWindow::full(t.spec().clone()), &t)
            .unwrap()
            .total;
        let exact = interval_union_perimeter(&[(1.0, 3.0)], (0.0, 5.0), s).unwrap();
        assert!((grid - exact).abs() < 1e-12 * exact, "{grid} vs {exact}");
    }

    #[test]
    fn divergence_probe_single_interval() {
        let beta = |k: usize| 1.0 / (k as f64 * ((k + 1) as f64).ln().powi(2));
        let u = interval_union(&beta, 1, PROBE_TERMS).unwrap();
        let (a, b) = u.intervals[0];
        let m = u.total_length;
        let s = 0.5;
        let expect = interval_pair_exact(0.0, a, a, b, s).unwrap()
            + interval_pair_exact(a, b, b, m, s).unwrap()
            + crate::kernel::interval_halfline(a, b, m, s)
            + crate::kernel::interval_halfline(-b, -a, 0.0, s);
        let v = divergence_probe_1d(&beta, 1, s).unwrap();
        assert!((v - expect).abs() < 1e-12 * expect);
        assert!(divergence_probe_1d(&|k: usize| k as f64, 3, s).is_err());
    }
}
