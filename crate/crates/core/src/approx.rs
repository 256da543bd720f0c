//! Mollification, superlevel sets and approximation of sets by
//! superlevel sets of mollified indicators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::functional::{PerimeterBreakdown, PerimeterEvaluator};
use crate::grid::{signed_distance_padded, CellSet, DomainWindow, GridSpec, Lattice, ScalarField};
use crate::kernel::InteractionTable;
use crate::sum::Accumulator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// `(1 - r²)³` on the unit ball.
    PolynomialBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub eps: f64,
    pub profile: Profile,
}

impl MollifierSpec {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            profile: Profile::PolynomialBump,
        }
    }
}

/// Offsets with center distance `< eps` and their normalized weights.
fn stencil(spec: &GridSpec, m: &MollifierSpec) -> Result<Vec<(Lattice, f64)>> {
    let h = spec.h();
    if !(m.eps >= h) {
        return Err(Error::EpsilonBelowResolution { eps: m.eps, h });
    }
    let n = spec.dim();
    let reach = (m.eps / h).ceil() as i64;
    let range = |a: usize| if a < n { -reach..=reach } else { 0..=0 };
    let mut out = Vec::new();
    for dz in range(2) {
        for dy in range(1) {
            for dx in range(0) {
                let r = ((dx * dx + dy * dy + dz * dz) as f64).sqrt() * h / m.eps;
                if r < 1.0 {
                    let w = match m.profile {
                        Profile::PolynomialBump => (1.0 - r * r).powi(3),
                    };
                    out.push(([dx, dy, dz], w));
                }
            }
        }
    }
    let total: f64 = crate::sum::sum(out.iter().map(|x| x.1));
    for x in &mut out {
        x.1 /= total;
    }
    Ok(out)
}

fn convolve<F: Fn(Lattice) -> f64 + Sync>(
    spec: &GridSpec,
    st: &[(Lattice, f64)],
    value: F,
) -> Vec<f64> {
    (0..spec.num_cells())
        .into_par_iter()
        .map(|i| {
            let c = spec.coords(i);
            let mut acc = Accumulator::new();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(d, w) in st {
                let v = value([c[0] + d[0], c[1] + d[1], c[2] + d[2]]);
                lo = lo.min(v);
                hi = hi.max(v);
                acc.add(w * v);
            }
            // constant neighbourhoods reproduce the constant exactly
            if lo == hi {
                lo
            } else {
                acc.value().clamp(lo, hi)
            }
        })
        .collect()
}

/// `u * η_ε` sampled at cell centers; beyond the box `u` follows its exterior.
pub fn mollify(u: &ScalarField, m: &MollifierSpec) -> Result<ScalarField> {
    let st = stencil(&u.spec, m)?;
    let values = convolve(&u.spec, &st, |c| u.value_at_lattice(c));
    ScalarField::new(u.spec.clone(), values, u.exterior.clone())
}

pub fn mollify_set(e: &CellSet, m: &MollifierSpec) -> Result<ScalarField> {
    mollify(&ScalarField::indicator(e), m)
}

/// `{u > t}`.
pub fn superlevel(u: &ScalarField, t: f64) -> CellSet {
    CellSet {
        spec: u.spec.clone(),
        inside: u.values.iter().map(|&v| v > t).collect(),
        exterior: u.exterior.superlevel(t),
    }
}

/// `d̄_E` at every box cell, looking `pad` cells beyond the box.
fn set_signed_distance(e: &CellSet, pad: usize) -> Vec<f64> {
    signed_distance_padded(&e.spec, pad, |c| e.contains_lattice(c))
}

/// Whether every cell in `cells` satisfies `|dist| < rho`.
fn contained(cells: &[bool], dist: &[f64], rho: f64) -> bool {
    cells.iter().zip(dist).all(|(&b, d)| !b || d.abs() < rho)
}

/// Boundary cells are face-connected and no 2×2 block in any coordinate
/// plane is a checkerboard.
pub fn is_grid_smooth(e: &CellSet) -> bool {
    let spec = &e.spec;
    let n = spec.dim();
    for i in 0..spec.num_cells() {
        let c = spec.coords(i);
        for a in 0..n {
            for b in a + 1..n {
                let mut q = [c; 4];
                q[1][a] += 1;
                q[2][b] += 1;
                q[3][a] += 1;
                q[3][b] += 1;
                let p: Vec<bool> = q.iter().map(|&x| e.contains_lattice(x)).collect();
                if p[0] == p[3] && p[1] == p[2] && p[0] != p[1] {
                    return false;
                }
            }
        }
    }
    let boundary = e.boundary_cells();
    let Some(start) = boundary.iter().position(|&b| b) else {
        return true;
    };
    let mut seen = vec![false; boundary.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for nb in spec.face_neighbors(spec.coords(i)) {
            if let Some(j) = spec.index(nb) {
                if boundary[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    boundary.iter().zip(&seen).all(|(&b, &s)| !b || s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxStep {
    pub eps: f64,
    pub threshold: f64,
    pub set: CellSet,
    /// `P_s(E_ε, Ω')` for each requested window, in order.
    pub perimeters: Vec<PerimeterBreakdown>,
    pub boundary_in_neighborhood: bool,
}

fn check_schedule(schedule: &[f64], h: f64) -> Result<()> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidSchedule);
    }
    if let Some(&eps) = schedule.iter().find(|&&e| !(e >= h)) {
        return Err(Error::EpsilonBelowResolution { eps, h });
    }
    Ok(())
}

/// Candidate thresholds `0.01, 0.02, …, 0.99`.
fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..100).map(|k| k as f64 / 100.0)
}

/// Threshold minimising `|P({u > t}, Ω') - target|` on the reference window,
/// ties broken toward `1/2`; returns `(t, set)`.
fn pick_threshold(u: &ScalarField, eval: &PerimeterEvaluator, target: f64) -> (f64, CellSet) {
    let mut best: Option<(f64, f64, CellSet)> = None;
    let mut cache: Vec<(Vec<bool>, f64)> = Vec::new();
    for t in threshold_grid() {
        let set = superlevel(u, t);
        let p = match cache.iter().find(|(m, _)| *m == set.inside) {
            Some((_, p)) => *p,
            None => {
                let p = eval.evaluate(&set.inside).total;
                cache.push((set.inside.clone(), p));
                p
            }
        };
        let dev = (p - target).abs();
        let better = match &best {
            None => true,
            Some((bt, bd, _)) => dev < *bd || (dev == *bd && (t - 0.5).abs() < (bt - 0.5).abs()),
        };
        if better {
            best = Some((t, dev, set));
        }
    }
    let (t, _, set) = best.expect("nonempty threshold grid");
    (t, set)
}

fn run_pipeline<F>(
    e: &CellSet,
    windows: &[DomainWindow],
    schedule: &[f64],
    table: &InteractionTable,
    field_for: F,
    check: &(dyn Fn(&CellSet, f64) -> bool + Sync),
) -> Result<Vec<ApproxStep>>
where
    F: Fn(f64) -> Result<ScalarField> + Sync,
{
    let spec = &e.spec;
    if windows.is_empty() {
        return Err(Error::InvalidGrid("at least one window is required".into()));
    }
    if windows.iter().any(|w| &w.spec != spec) || table.spec() != spec {
        return Err(Error::SpecMismatch);
    }
    check_schedule(schedule, spec.h())?;
    let evals: Vec<PerimeterEvaluator> = windows
        .iter()
        .map(|w| PerimeterEvaluator::new(table, &e.exterior, w))
        .collect::<Result<_>>()?;
    let target = evals[0].evaluate(&e.inside).total;
    schedule
        .iter()
        .map(|&eps| {
            let u = field_for(eps)?;
            let (t, mut set) = pick_threshold(&u, &evals[0], target);
            set.exterior = e.exterior.clone();
            let perimeters = evals.iter().map(|ev| ev.evaluate(&set.inside)).collect();
            let ok = check(&set, eps);
            Ok(ApproxStep {
                eps,
                threshold: t,
                set,
                perimeters,
                boundary_in_neighborhood: ok,
            })
        })
        .collect()
}

/// Mollify `χ_E` at each `ε`, threshold, and report perimeters on `windows`
/// (the first is the reference for the threshold choice) together with the
/// check `∂E_ε ⊆ N_ε(∂E)`.
pub fn approximate_set(
    e: &CellSet,
    windows: &[DomainWindow],
    schedule: &[f64],
    table: &InteractionTable,
) -> Result<Vec<ApproxStep>> {
    let h = e.spec.h();
    let max_eps = schedule.iter().cloned().fold(h, f64::max);
    let dist = set_signed_distance(e, (max_eps / h).ceil() as usize + 1);
    let field = |eps: f64| mollify_set(e, &MollifierSpec::new(eps));
    let check = |set: &CellSet, eps: f64| contained(&set.boundary_cells(), &dist, eps);
    run_pipeline(e, windows, schedule, table, field, &check)
}

/// `χ_E · (1 - χ_{|d̄_Ω| < δ})` as a function on the lattice, with `d̄_Ω`
/// computed on a lattice padded by `pad` cells (cells beyond the box are
/// outside `Ω`).
fn cutoff_values(
    e: &CellSet,
    window: &DomainWindow,
    delta: f64,
    pad: usize,
) -> Result<(GridSpec, Vec<f64>)> {
    let spec = &e.spec;
    let h = spec.h();
    let n = spec.dim();
    let origin: Vec<f64> = spec.origin().iter().map(|o| o - pad as f64 * h).collect();
    let extent: Vec<usize> = spec.extent().iter().map(|x| x + 2 * pad).collect();
    let padded = GridSpec::new(&origin, &extent, h)?;
    let shift = |c: Lattice| -> Lattice {
        let mut o = c;
        for v in o.iter_mut().take(n) {
            *v -= pad as i64;
        }
        o
    };
    let in_omega = |c: Lattice| spec.index(c).is_some_and(|i| window.omega[i]);
    let d = signed_distance_padded(&padded, 1, |c| in_omega(shift(c)));
    let values = (0..padded.num_cells())
        .map(|p| {
            let c = shift(padded.coords(p));
            if d[p].abs() < delta || !e.contains_lattice(c) {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    Ok((padded, values))
}

/// The cut-off field `χ_E φ_δ` restricted to the box.
pub fn cutoff_field(e: &CellSet, window: &DomainWindow, delta: f64) -> Result<ScalarField> {
    let h = e.spec.h();
    let pad = (delta / h).ceil() as usize + 1;
    let (padded, vals) = cutoff_values(e, window, delta, pad)?;
    let values = (0..e.spec.num_cells())
        .map(|i| {
            let mut c = e.spec.coords(i);
            for v in c.iter_mut().take(e.spec.dim()) {
                *v += pad as i64;
            }
            vals[padded.index(c).unwrap()]
        })
        .collect();
    ScalarField::new(e.spec.clone(), values, ScalarField::indicator(e).exterior)
}

/// Variant for bounded windows: `χ_E` is multiplied by the cut-off
/// `1 - χ_{|d̄_Ω| < 2ε}` before mollifying, and boundary containment is only
/// required away from `∂Ω`. The containment radius for both neighbourhoods is
/// `2δ = 4ε`.
pub fn approximate_set_lipschitz(
    e: &CellSet,
    windows: &[DomainWindow],
    schedule: &[f64],
    table: &InteractionTable,
) -> Result<Vec<ApproxStep>> {
    let spec = &e.spec;
    let h = spec.h();
    let window = windows.first().ok_or(Error::InvalidSchedule)?;
    let max_eps = schedule.iter().cloned().fold(h, f64::max);
    let reach = (4.0 * max_eps / h).ceil() as usize + 1;
    let dist_e = set_signed_distance(e, reach);
    let omega_set = CellSet::new(
        spec.clone(),
        window.omega.clone(),
        crate::grid::ExteriorModel::Empty,
    )?;
    let dist_omega = set_signed_distance(&omega_set, reach);
    let field = |eps: f64| -> Result<ScalarField> {
        let delta = 2.0 * eps;
        let pad = ((delta + eps) / h).ceil() as usize + 2;
        let (padded, vals) = cutoff_values(e, window, delta, pad)?;
        let st = stencil(spec, &MollifierSpec::new(eps))?;
        let n = spec.dim();
        let values = convolve(spec, &st, |c| {
            let mut p = c;
            for v in p.iter_mut().take(n) {
                *v += pad as i64;
            }
            match padded.index(p) {
                Some(k) => vals[k],
                None => {
                    if e.contains_lattice(c) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        });
        ScalarField::new(spec.clone(), values, ScalarField::indicator(e).exterior)
    };
    let check = |set: &CellSet, eps: f64| {
        let rho = 4.0 * eps;
        let relevant: Vec<bool> = set
            .boundary_cells()
            .iter()
            .zip(&dist_omega)
            .map(|(&b, d)| b && d.abs() >= rho)
            .collect();
        contained(&relevant, &dist_e, rho)
    };
    run_pipeline(e, windows, schedule, table, field, &check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ExteriorModel, FieldExterior};
    use crate::kernel::{build_table, KernelParams};

    fn square(n: usize) -> GridSpec {
        GridSpec::cube(2, 0.0, n, 1.0).unwrap()
    }

    #[test]
    fn constant_field_is_preserved() {
        let spec = square(6);
        let u = ScalarField::new(spec, vec![1.0; 36], FieldExterior::Constant(1.0)).unwrap();
        let v = mollify(&u, &MollifierSpec::new(2.5)).unwrap();
        assert!(v.values.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn rejects_sub_cell_radius() {
        let spec = square(3);
        let u = ScalarField::new(spec, vec![0.0; 9], FieldExterior::Constant(0.0)).unwrap();
        assert!(matches!(
            mollify(&u, &MollifierSpec::new(0.5)),
            Err(Error::EpsilonBelowResolution { .. })
        ));
    }

    #[test]
    fn radius_h_is_identity() {
        let spec = square(5);
        let e = CellSet::from_fn(spec, ExteriorModel::Empty, |p| p[0] + 0.3 * p[1] < 2.2).unwrap();
        let u = mollify_set(&e, &MollifierSpec::new(1.0)).unwrap();
        assert_eq!(u.values, ScalarField::indicator(&e).values);
    }

    #[test]
    fn halfspace_profile_is_monotone() {
        let spec = square(12);
        let model = ExteriorModel::HalfSpace {
            axis: 0,
            level: 6.0,
        };
        let e = CellSet::from_model(spec.clone(), model).unwrap();
        let u = mollify_set(&e, &MollifierSpec::new(3.0)).unwrap();
        for y in 0..12 {
            let row: Vec<f64> = (0..12).map(|x| u.values[x + 12 * y]).collect();
            assert!(row.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(row[0], 1.0);
            assert_eq!(row[11], 0.0);
        }
    }

    #[test]
    fn superlevels_are_nested() {
        let spec = square(4);
        let u = ScalarField::new(
            spec,
            (0..16).map(|k| k as f64 / 16.0).collect(),
            FieldExterior::Constant(0.0),
        )
        .unwrap();
        let a = superlevel(&u, 0.3);
        let b = superlevel(&u, 0.6);
        assert!(b.inside.iter().zip(&a.inside).all(|(&x, &y)| !x || y));
        assert!(superlevel(&u, -1.0).inside.iter().all(|&b| b));
    }

    #[test]
    fn halfspace_pipeline_keeps_boundary_close() {
        let spec = square(10);
        let e = CellSet::from_model(
            spec.clone(),
            ExteriorModel::HalfSpace {
                axis: 1,
                level: 4.6,
            },
        )
        .unwrap();
        let table = build_table(&spec, KernelParams::new(0.5, 2).unwrap(), 10).unwrap();
        let w = DomainWindow::full(spec);
        let steps = approximate_set(&e, &[w], &[3.0, 2.0, 1.0], &table).unwrap();
        assert!(steps.iter().all(|s| s.boundary_in_neighborhood));
        assert_eq!(steps[2].set.inside, e.inside);
        assert!(approximate_set(
            &e,
            &[DomainWindow::full(e.spec.clone())],
            &[1.0, 2.0],
            &table
        )
        .is_err());
    }

    #[test]
    fn cutoff_changes_fewer_cells_as_delta_shrinks() {
        let spec = square(12);
        let e = CellSet::from_fn(spec.clone(), ExteriorModel::Empty, |p| p[0] < 7.0).unwrap();
        let w = DomainWindow::from_fn(spec, |p| {
            (2.0..10.0).contains(&p[0]) && (2.0..10.0).contains(&p[1])
        })
        .unwrap();
        let changed = |d: f64| {
            let f = cutoff_field(&e, &w, d).unwrap();
            f.values
                .iter()
                .zip(&e.inside)
                .filter(|(&v, &b)| (v == 1.0) != b)
                .count()
        };
        assert!(changed(3.0) > changed(2.0));
        assert!(changed(2.0) > changed(1.0));
    }

    #[test]
    fn smoothness_predicate() {
        let spec = square(6);
        let disk = CellSet::from_fn(spec.clone(), ExteriorModel::Empty, |p| {
            (p[0] - 3.0).hypot(p[1] - 3.0) < 2.0
        })
        .unwrap();
        assert!(is_grid_smooth(&disk));
        let checker = CellSet::from_fn(spec, ExteriorModel::Empty, |p| {
            ((p[0] + p[1]) as i64) % 2 == 0
        })
        .unwrap();
        assert!(!is_grid_smooth(&checker));
    }
}
