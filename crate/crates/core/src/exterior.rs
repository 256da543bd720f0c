//! Interaction mass between box cells and the part of space beyond the box.

use rayon::prelude::*;

use crate::grid::{ComplementPolicy, ExteriorModel, GridSpec, Lattice, Subgraph};
use crate::kernel::{hyperplane_constant, tail_mass, InteractionTable};
use crate::sum::Accumulator;
use crate::Result;

/// Per-cell masses toward the exterior part of `E` (`e`) and of `∁E` (`c`).
#[derive(Debug, Clone)]
pub(crate) struct Masses {
    pub e: Vec<f64>,
    pub c: Vec<f64>,
    pub bound: f64,
}

impl Masses {
    fn swap(self) -> Masses {
        Masses {
            e: self.c,
            c: self.e,
            bound: self.bound,
        }
    }
}

fn box_sum<F: Fn(usize) -> bool>(table: &InteractionTable, i: usize, pred: F) -> f64 {
    let spec = table.spec();
    let mut acc = Accumulator::new();
    for j in 0..spec.num_cells() {
        if j != i && pred(j) {
            acc.add(table.weight(spec.offset(i, j)));
        }
    }
    acc.value()
}

/// Lattice index of the first cell along `axis` whose center is not below `level`.
fn snap(spec: &GridSpec, axis: usize, level: f64) -> i64 {
    ((level - spec.origin()[axis]) / spec.h() - 0.5).ceil() as i64
}

/// Mass between cell `i` and `{x_axis < ℓ}` minus the cell itself, where
/// `ℓ = origin + k·h` is a lattice face.
fn halfspace_mass(table: &InteractionTable, i: usize, axis: usize, k: i64) -> f64 {
    let spec = table.spec();
    let p = table.params();
    let n = p.dim;
    let s = p.s;
    let h = spec.h();
    let ci = spec.coords(i)[axis];
    let cnst = h.powi(n as i32 - 1) * hyperplane_constant(n, s) / (s * (1.0 - s));
    // distances from the face, in length units, of the near and far cell faces
    let beta = 1.0 - s;
    if ci >= k {
        let a = (ci - k) as f64 * h;
        cnst * ((a + h).powf(beta) - a.powf(beta))
    } else {
        let a = (k - ci - 1) as f64 * h;
        let other = cnst * ((a + h).powf(beta) - a.powf(beta));
        table.cell_perimeter().0 - other
    }
}

fn subgraph_corrections(table: &InteractionTable, sg: &Subgraph) -> Vec<(Lattice, f64)> {
    let spec = table.spec();
    let n = spec.dim();
    let h = spec.h();
    let last = n - 1;
    let kf = snap(spec, last, sg.farfield);
    let mut shift = [0i64; 3];
    for a in 0..n - 1 {
        shift[a] = ((sg.base.origin()[a] - spec.origin()[a]) / h).round() as i64;
    }
    let mut out = Vec::new();
    for col in 0..sg.base.num_cells() {
        let kv = snap(spec, last, sg.heights[col]);
        if kv == kf {
            continue;
        }
        let bc = sg.base.coords(col);
        let sign = if kv > kf { 1.0 } else { -1.0 };
        for k in kv.min(kf)..kv.max(kf) {
            let mut c = [0i64; 3];
            for a in 0..n - 1 {
                c[a] = bc[a] + shift[a];
            }
            c[last] = k;
            if spec.index(c).is_none() {
                out.push((c, sign));
            }
        }
    }
    out
}

fn lattice_weight(table: &InteractionTable, i: usize, c: Lattice) -> f64 {
    let ci = table.spec().coords(i);
    table.weight([c[0] - ci[0], c[1] - ci[1], c[2] - ci[2]])
}

fn analytic(
    table: &InteractionTable,
    model: &ExteriorModel,
    cells: &[usize],
    total: &[f64],
) -> Vec<f64> {
    let spec = table.spec();
    match model {
        ExteriorModel::Empty => vec![0.0; cells.len()],
        ExteriorModel::Full => total.to_vec(),
        ExteriorModel::HalfSpace { axis, level } => {
            let k = snap(spec, *axis, *level);
            cells
                .par_iter()
                .map(|&i| {
                    let all = halfspace_mass(table, i, *axis, k);
                    let inner = box_sum(table, i, |j| spec.coords(j)[*axis] < k);
                    all - inner
                })
                .collect()
        }
        ExteriorModel::Subgraph(sg) => {
            let base = ExteriorModel::HalfSpace {
                axis: spec.dim() - 1,
                level: sg.farfield,
            };
            let mut e = analytic(table, &base, cells, total);
            let corr = subgraph_corrections(table, sg);
            let extra: Vec<f64> = cells
                .par_iter()
                .map(|&i| {
                    let mut acc = Accumulator::new();
                    for &(c, sign) in &corr {
                        acc.add(sign * lattice_weight(table, i, c));
                    }
                    acc.value()
                })
                .collect();
            for (v, x) in e.iter_mut().zip(extra) {
                *v += x;
            }
            e
        }
        ExteriorModel::Complement(m) => {
            let inner = analytic(table, m, cells, total);
            inner.iter().zip(total).map(|(v, t)| t - v).collect()
        }
    }
}

fn truncated(
    table: &InteractionTable,
    model: &ExteriorModel,
    cells: &[usize],
    radius: f64,
) -> Result<Masses> {
    let spec = table.spec();
    let n = spec.dim();
    let h = spec.h();
    let reach = (radius / h).ceil() as i64 + 1;
    let parts: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&i| {
            let ci = spec.coords(i);
            let pi = spec.center(i);
            let mut e = Accumulator::new();
            let mut c = Accumulator::new();
            let range = |a: usize| if a < n { -reach..=reach } else { 0..=0 };
            for dz in range(2) {
                for dy in range(1) {
                    for dx in range(0) {
                        let lc = [ci[0] + dx, ci[1] + dy, ci[2] + dz];
                        if spec.index(lc).is_some() {
                            continue;
                        }
                        let p = spec.lattice_center(lc);
                        let d2: f64 = (0..n).map(|a| (p[a] - pi[a]).powi(2)).sum();
                        if d2.sqrt() > radius {
                            continue;
                        }
                        let w = table.weight([dx, dy, dz]);
                        if model.contains(&p, n) {
                            e.add(w);
                        } else {
                            c.add(w);
                        }
                    }
                }
            }
            (e.value(), c.value())
        })
        .collect();
    let gap = radius - (n as f64).sqrt() * h;
    let per_cell = if gap > 0.0 {
        spec.cell_volume() * tail_mass(gap, table.params())?
    } else {
        f64::INFINITY
    };
    let mut e = vec![0.0; spec.num_cells()];
    let mut c = vec![0.0; spec.num_cells()];
    for (&i, (ev, cv)) in cells.iter().zip(parts) {
        e[i] = ev;
        c[i] = cv;
    }
    Ok(Masses {
        e,
        c,
        bound: per_cell * cells.len() as f64,
    })
}

/// Exterior masses for the cells marked in `mask`.
pub(crate) fn masses(
    table: &InteractionTable,
    model: &ExteriorModel,
    mask: &[bool],
    policy: ComplementPolicy,
) -> Result<Masses> {
    let spec = table.spec();
    let cells: Vec<usize> = (0..spec.num_cells()).filter(|&i| mask[i]).collect();
    if let ComplementPolicy::TruncateAtRadius(r) = policy {
        return truncated(table, model, &cells, r);
    }
    if let ExteriorModel::Complement(m) = model {
        return Ok(masses(table, m, mask, policy)?.swap());
    }
    let (pcell, pbound) = table.cell_perimeter();
    let total: Vec<f64> = cells
        .par_iter()
        .map(|&i| pcell - box_sum(table, i, |_| true))
        .collect();
    let ein = analytic(table, model, &cells, &total);
    let mut e = vec![0.0; spec.num_cells()];
    let mut c = vec![0.0; spec.num_cells()];
    for (k, &i) in cells.iter().enumerate() {
        let ev = ein[k].max(0.0);
        e[i] = ev;
        c[i] = (total[k] - ev).max(0.0);
    }
    let bound = if cells.is_empty() {
        0.0
    } else {
        pbound * cells.len() as f64
    };
    Ok(Masses { e, c, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_table, interval_halfline, KernelParams};

    #[test]
    fn one_dimensional_halfspace_matches_closed_form() {
        let spec = GridSpec::new(&[0.0], &[6], 0.5).unwrap();
        let table = build_table(&spec, KernelParams::new(0.4, 1).unwrap(), 8).unwrap();
        let model = ExteriorModel::HalfSpace {
            axis: 0,
            level: 0.0,
        };
        let m = masses(&table, &model, &[true; 6], ComplementPolicy::AnalyticTail).unwrap();
        for i in 0..6 {
            let a = i as f64 * 0.5;
            // mass to (-∞, 0): by reflection, [a, a+h] against [0, ∞) mirrored
            let e = interval_halfline(-a - 0.5, -a, 0.0, 0.4);
            assert!((m.e[i] - e).abs() < 1e-12 * e, "{i}");
            let c = interval_halfline(a, a + 0.5, 3.0, 0.4);
            assert!(
                (m.c[i] - c).abs() < 1e-12 * c.max(1.0),
                "{i}: {} vs {c}",
                m.c[i]
            );
        }
        assert_eq!(m.bound, 0.0);
    }

    #[test]
    fn complement_swaps_masses() {
        let spec = GridSpec::cube(2, 0.0, 4, 1.0).unwrap();
        let table = build_table(&spec, KernelParams::new(0.5, 2).unwrap(), 4).unwrap();
        let model = ExteriorModel::HalfSpace {
            axis: 1,
            level: 1.7,
        };
        let mask = vec![true; 16];
        let a = masses(&table, &model, &mask, ComplementPolicy::AnalyticTail).unwrap();
        let b = masses(
            &table,
            &model.complement(),
            &mask,
            ComplementPolicy::AnalyticTail,
        )
        .unwrap();
        assert_eq!(a.e, b.c);
        assert_eq!(a.c, b.e);
    }

    #[test]
    fn truncation_converges_to_analytic() {
        let spec = GridSpec::cube(2, 0.0, 3, 1.0).unwrap();
        let table = build_table(&spec, KernelParams::new(0.5, 2).unwrap(), 3).unwrap();
        let model = ExteriorModel::HalfSpace {
            axis: 0,
            level: 1.5,
        };
        let mask = vec![true; 9];
        let exact = masses(&table, &model, &mask, ComplementPolicy::AnalyticTail).unwrap();
        let cut = masses(
            &table,
            &model,
            &mask,
            ComplementPolicy::TruncateAtRadius(40.0),
        )
        .unwrap();
        for i in 0..9 {
            let gap = (exact.e[i] + exact.c[i]) - (cut.e[i] + cut.c[i]);
            assert!(gap >= -1e-9 && gap <= cut.bound / 9.0, "{i}: {gap}");
            let ge = exact.e[i] - cut.e[i];
            assert!(ge >= -1e-9 && ge <= gap + 1e-9, "{i}: {ge}");
        }
    }

    #[test]
    fn subgraph_equal_to_farfield_is_halfspace() {
        let spec = GridSpec::cube(2, 0.0, 4, 1.0).unwrap();
        let table = build_table(&spec, KernelParams::new(0.3, 2).unwrap(), 4).unwrap();
        let base = GridSpec::new(&[-2.0], &[8], 1.0).unwrap();
        let flat = Subgraph::new(base.clone(), vec![2.0; 8], 2.0).unwrap();
        let mut bumped = flat.clone();
        bumped.heights[0] = 9.0;
        let mask = vec![true; 16];
        let hs = ExteriorModel::HalfSpace {
            axis: 1,
            level: 2.0,
        };
        let a = masses(&table, &hs, &mask, ComplementPolicy::AnalyticTail).unwrap();
        let b = masses(
            &table,
            &ExteriorModel::Subgraph(flat),
            &mask,
            ComplementPolicy::AnalyticTail,
        )
        .unwrap();
        assert_eq!(a.e, b.e);
        let c = masses(
            &table,
            &ExteriorModel::Subgraph(bumped),
            &mask,
            ComplementPolicy::AnalyticTail,
        )
        .unwrap();
        assert!(c.e.iter().zip(&a.e).all(|(x, y)| x > y));
    }
}
