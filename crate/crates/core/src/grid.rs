//! Uniform-grid geometry.
//!
//! A [`GridSpec`] is a box of `extent[0] × … × extent[dim-1]` cubic cells of
//! side `h`. Cells are stored with axis 0 varying fastest. Sets are cell
//! bitmasks plus an [`ExteriorModel`] describing the set outside the box; a
//! cell belongs to a set iff its center does.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lattice coordinates relative to the grid origin; may lie outside the box.
pub type Lattice = [i64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    origin: [f64; 3],
    extent: [usize; 3],
    h: f64,
}

impl GridSpec {
    pub fn new(origin: &[f64], extent: &[usize], h: f64) -> Result<Self> {
        let dim = extent.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if origin.len() != dim {
            return Err(Error::InvalidGrid(
                "origin and extent lengths differ".into(),
            ));
        }
        if extent.iter().any(|&e| e == 0) {
            return Err(Error::InvalidGrid("every extent must be at least 1".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell size must be positive, got {h}"
            )));
        }
        let mut o = [0.0; 3];
        let mut e = [1; 3];
        o[..dim].copy_from_slice(origin);
        e[..dim].copy_from_slice(extent);
        Ok(Self {
            dim,
            origin: o,
            extent: e,
            h,
        })
    }

    /// Grid covering `[lo, lo + n·h]` along every axis.
    pub fn cube(dim: usize, lo: f64, n: usize, h: f64) -> Result<Self> {
        Self::new(&vec![lo; dim], &vec![n; dim], h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent[..self.dim]
    }

    pub fn num_cells(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Largest `|Δ|∞` between two cells of the box.
    pub fn max_offset(&self) -> usize {
        self.extent().iter().map(|&e| e - 1).max().unwrap_or(0)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> Lattice {
        let x = idx % self.extent[0];
        let rest = idx / self.extent[0];
        let y = rest % self.extent[1];
        let z = rest / self.extent[1];
        [x as i64, y as i64, z as i64]
    }

    #[inline]
    pub fn index(&self, c: Lattice) -> Option<usize> {
        for a in 0..3 {
            if c[a] < 0 || c[a] >= self.extent[a] as i64 {
                return None;
            }
        }
        Some(c[0] as usize + self.extent[0] * (c[1] as usize + self.extent[1] * c[2] as usize))
    }

    /// Center of the lattice cell `c` (which may lie outside the box).
    #[inline]
    pub fn lattice_center(&self, c: Lattice) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.h;
        }
        p
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        self.lattice_center(self.coords(idx))
    }

    /// Offset `j - i` in lattice units.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> Lattice {
        let a = self.coords(i);
        let b = self.coords(j);
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }

    /// Lattice index of the cell containing `p` (no bounds check).
    pub fn locate(&self, p: &[f64]) -> Lattice {
        let mut c = [0; 3];
        for a in 0..self.dim {
            c[a] = ((p[a] - self.origin[a]) / self.h).floor() as i64;
        }
        c
    }

    /// Face-adjacent lattice neighbours of `c`.
    pub fn face_neighbors(&self, c: Lattice) -> impl Iterator<Item = Lattice> + '_ {
        (0..self.dim).flat_map(move |a| {
            [-1i64, 1].into_iter().map(move |d| {
                let mut n = c;
                n[a] += d;
                n
            })
        })
    }

    /// The `(dim - 1)`-dimensional base grid obtained by dropping the last axis.
    pub fn base(&self) -> Result<GridSpec> {
        if self.dim < 2 {
            return Err(Error::InvalidGrid("a 1D grid has no base".into()));
        }
        GridSpec::new(
            &self.origin[..self.dim - 1],
            &self.extent[..self.dim - 1],
            self.h,
        )
    }
}

/// Heights of a subgraph `{x_last < v(x')}` tabulated on a base lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    /// Base grid (dimension `dim - 1`) on which `heights` are tabulated.
    pub base: GridSpec,
    pub heights: Vec<f64>,
    /// Value of `v` outside the tabulated base box.
    pub farfield: f64,
}

impl Subgraph {
    pub fn new(base: GridSpec, heights: Vec<f64>, farfield: f64) -> Result<Self> {
        if heights.len() != base.num_cells() {
            return Err(Error::InvalidGrid(
                "heights do not match the base grid".into(),
            ));
        }
        if heights.iter().chain([&farfield]).any(|v| !v.is_finite()) {
            return Err(Error::HypothesisViolated(
                "subgraph heights must be finite".into(),
            ));
        }
        Ok(Self {
            base,
            heights,
            farfield,
        })
    }

    pub fn height_at(&self, p: &[f64]) -> f64 {
        let c = self.base.locate(p);
        match self.base.index(c) {
            Some(i) => self.heights[i],
            None => self.farfield,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.heights
            .iter()
            .fold(self.farfield.abs(), |m, v| m.max(v.abs()))
    }
}

/// Description of a set outside the grid box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExteriorModel {
    Empty,
    Full,
    /// `{x : x[axis] < level}`.
    HalfSpace {
        axis: usize,
        level: f64,
    },
    /// `{x : x[last] < v(x')}`.
    Subgraph(Subgraph),
    Complement(Box<ExteriorModel>),
}

impl ExteriorModel {
    pub fn contains(&self, p: &[f64; 3], dim: usize) -> bool {
        match self {
            ExteriorModel::Empty => false,
            ExteriorModel::Full => true,
            ExteriorModel::HalfSpace { axis, level } => p[*axis] < *level,
            ExteriorModel::Subgraph(sg) => p[dim - 1] < sg.height_at(&p[..dim - 1]),
            ExteriorModel::Complement(m) => !m.contains(p, dim),
        }
    }

    pub fn complement(&self) -> ExteriorModel {
        match self {
            ExteriorModel::Empty => ExteriorModel::Full,
            ExteriorModel::Full => ExteriorModel::Empty,
            ExteriorModel::Complement(m) => (**m).clone(),
            other => ExteriorModel::Complement(Box::new(other.clone())),
        }
    }

    fn validate(&self, spec: &GridSpec) -> Result<()> {
        match self {
            ExteriorModel::HalfSpace { axis, level } => {
                if *axis >= spec.dim() || !level.is_finite() {
                    return Err(Error::InvalidGrid("half-space axis out of range".into()));
                }
            }
            ExteriorModel::Subgraph(sg) => {
                if spec.dim() < 2 || sg.base.dim() + 1 != spec.dim() {
                    return Err(Error::InvalidGrid(
                        "subgraph base must have dimension dim - 1".into(),
                    ));
                }
                if (sg.base.h() - spec.h()).abs() > 1e-12 * spec.h() {
                    return Err(Error::InvalidGrid(
                        "subgraph base must share the cell size".into(),
                    ));
                }
                for a in 0..sg.base.dim() {
                    let shift = (sg.base.origin()[a] - spec.origin()[a]) / spec.h();
                    if (shift - shift.round()).abs() > 1e-9 {
                        return Err(Error::InvalidGrid(
                            "subgraph base must be lattice aligned".into(),
                        ));
                    }
                }
            }
            ExteriorModel::Complement(m) => m.validate(spec)?,
            _ => {}
        }
        Ok(())
    }
}

/// A set `E`: cell bitmask inside the box plus its exterior model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub spec: GridSpec,
    pub inside: Vec<bool>,
    pub exterior: ExteriorModel,
}

impl CellSet {
    pub fn new(spec: GridSpec, inside: Vec<bool>, exterior: ExteriorModel) -> Result<Self> {
        if inside.len() != spec.num_cells() {
            return Err(Error::InvalidGrid(
                "bitmask length does not match the grid".into(),
            ));
        }
        exterior.validate(&spec)?;
        Ok(Self {
            spec,
            inside,
            exterior,
        })
    }

    /// Cells whose centers satisfy `pred`.
    pub fn from_fn<F: Fn(&[f64; 3]) -> bool>(
        spec: GridSpec,
        exterior: ExteriorModel,
        pred: F,
    ) -> Result<Self> {
        let inside = (0..spec.num_cells())
            .map(|i| pred(&spec.center(i)))
            .collect();
        Self::new(spec, inside, exterior)
    }

    /// Set whose box cells and exterior both follow `model`.
    pub fn from_model(spec: GridSpec, model: ExteriorModel) -> Result<Self> {
        let dim = spec.dim();
        let inside = (0..spec.num_cells())
            .map(|i| model.contains(&spec.center(i), dim))
            .collect();
        Self::new(spec, inside, model)
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            spec: self.spec.clone(),
            inside: self.inside.iter().map(|b| !b).collect(),
            exterior: self.exterior.complement(),
        }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Phase of any lattice cell, inside or outside the box.
    pub fn contains_lattice(&self, c: Lattice) -> bool {
        match self.spec.index(c) {
            Some(i) => self.inside[i],
            None => self
                .exterior
                .contains(&self.spec.lattice_center(c), self.spec.dim()),
        }
    }

    /// Cells with a face neighbour (possibly outside the box) of opposite phase.
    pub fn boundary_cells(&self) -> Vec<bool> {
        (0..self.spec.num_cells())
            .map(|i| {
                let c = self.spec.coords(i);
                let me = self.inside[i];
                self.spec
                    .face_neighbors(c)
                    .any(|n| self.contains_lattice(n) != me)
            })
            .collect()
    }
}

/// Values of a field outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldExterior {
    Constant(f64),
    Indicator(ExteriorModel),
}

impl FieldExterior {
    /// Exterior of the superlevel set `{u > t}`.
    pub fn superlevel(&self, t: f64) -> ExteriorModel {
        match self {
            FieldExterior::Constant(c) => {
                if *c > t {
                    ExteriorModel::Full
                } else {
                    ExteriorModel::Empty
                }
            }
            FieldExterior::Indicator(m) => {
                if t < 0.0 {
                    ExteriorModel::Full
                } else if t >= 1.0 {
                    ExteriorModel::Empty
                } else {
                    m.clone()
                }
            }
        }
    }

    pub fn value_at(&self, p: &[f64; 3], dim: usize) -> f64 {
        match self {
            FieldExterior::Constant(c) => *c,
            FieldExterior::Indicator(m) => {
                if m.contains(p, dim) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub exterior: FieldExterior,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>, exterior: FieldExterior) -> Result<Self> {
        if values.len() != spec.num_cells() {
            return Err(Error::InvalidGrid(
                "field length does not match the grid".into(),
            ));
        }
        if let FieldExterior::Indicator(m) = &exterior {
            m.validate(&spec)?;
        }
        Ok(Self {
            spec,
            values,
            exterior,
        })
    }

    pub fn indicator(set: &CellSet) -> ScalarField {
        ScalarField {
            spec: set.spec.clone(),
            values: set
                .inside
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
            exterior: FieldExterior::Indicator(set.exterior.clone()),
        }
    }

    pub fn value_at_lattice(&self, c: Lattice) -> f64 {
        match self.spec.index(c) {
            Some(i) => self.values[i],
            None => self
                .exterior
                .value_at(&self.spec.lattice_center(c), self.spec.dim()),
        }
    }
}

/// How the part of the complement of `Ω` beyond the box is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComplementPolicy {
    /// Drop interactions farther than the radius and report a bound for them.
    TruncateAtRadius(f64),
    /// Closed forms and lattice tails for all far-field mass.
    AnalyticTail,
}

/// `Ω ∩ box` as a bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainWindow {
    pub spec: GridSpec,
    pub omega: Vec<bool>,
    pub policy: ComplementPolicy,
}

impl DomainWindow {
    pub fn new(spec: GridSpec, omega: Vec<bool>) -> Result<Self> {
        if omega.len() != spec.num_cells() {
            return Err(Error::InvalidGrid(
                "window length does not match the grid".into(),
            ));
        }
        Ok(Self {
            spec,
            omega,
            policy: ComplementPolicy::AnalyticTail,
        })
    }

    pub fn from_fn<F: Fn(&[f64; 3]) -> bool>(spec: GridSpec, pred: F) -> Result<Self> {
        let omega = (0..spec.num_cells())
            .map(|i| pred(&spec.center(i)))
            .collect();
        Self::new(spec, omega)
    }

    /// Every cell of the box.
    pub fn full(spec: GridSpec) -> Self {
        let n = spec.num_cells();
        Self {
            spec,
            omega: vec![true; n],
            policy: ComplementPolicy::AnalyticTail,
        }
    }

    pub fn with_policy(mut self, policy: ComplementPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn count(&self) -> usize {
        self.omega.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&i| self.omega[i]).collect()
    }

    pub fn contains(&self, other: &DomainWindow) -> bool {
        other.omega.iter().zip(&self.omega).all(|(&o, &s)| !o || s)
    }
}

// ---------------------------------------------------------------------------
// Signed distance
// ---------------------------------------------------------------------------

/// Gap between a point at the center of lattice cell 0 and the closed cell `k`
/// along one axis, in cell units.
#[inline]
fn axis_gap(k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k.unsigned_abs() as f64 - 0.5
    }
}

/// Squared distance (cell units) from every center of the padded lattice to
/// the union of closed cells marked in `target` (same padded layout).
///
/// The squared distance to a union of cells is separable across axes, so it
/// is computed with one exact minimisation pass per axis.
fn separable_distance(ext: [usize; 3], dim: usize, target: &[bool]) -> Vec<f64> {
    let n: usize = ext.iter().product();
    let idx = |c: [usize; 3]| c[0] + ext[0] * (c[1] + ext[1] * c[2]);
    let mut cur: Vec<f64> = target
        .iter()
        .map(|&t| if t { 0.0 } else { f64::INFINITY })
        .collect();
    let mut line_in = Vec::new();
    let mut line_out = Vec::new();
    for axis in 0..dim {
        let len = ext[axis];
        let mut next = vec![f64::INFINITY; n];
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for u in 0..ext[others[0]] {
            for v in 0..ext[others[1]] {
                line_in.clear();
                for k in 0..len {
                    let mut c = [0; 3];
                    c[axis] = k;
                    c[others[0]] = u;
                    c[others[1]] = v;
                    line_in.push(cur[idx(c)]);
                }
                line_out.clear();
                for x in 0..len {
                    let mut best = f64::INFINITY;
                    for (j, &g) in line_in.iter().enumerate() {
                        if g.is_finite() {
                            let d = axis_gap(x as i64 - j as i64);
                            let val = d * d + g;
                            if val < best {
                                best = val;
                            }
                        }
                    }
                    line_out.push(best);
                }
                for (k, &val) in line_out.iter().enumerate() {
                    let mut c = [0; 3];
                    c[axis] = k;
                    c[others[0]] = u;
                    c[others[1]] = v;
                    next[idx(c)] = val;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Signed distance of the cell centers of `spec` to the boundary of the set
/// whose phase on the lattice is `phase`, looking `pad` cells beyond the box.
///
/// Values are exact whenever the nearest opposite-phase point lies within the
/// padded lattice; otherwise they overestimate.
pub(crate) fn signed_distance_padded<F: Fn(Lattice) -> bool>(
    spec: &GridSpec,
    pad: usize,
    phase: F,
) -> Vec<f64> {
    let dim = spec.dim();
    let mut ext = [1usize; 3];
    for a in 0..dim {
        ext[a] = spec.extent()[a] + 2 * pad;
    }
    let n: usize = ext.iter().product();
    let to_lattice = |p: usize| -> Lattice {
        let x = p % ext[0];
        let rest = p / ext[0];
        let mut c = [x as i64, (rest % ext[1]) as i64, (rest / ext[1]) as i64];
        for a in 0..dim {
            c[a] -= pad as i64;
        }
        c
    };
    let phases: Vec<bool> = (0..n).map(|p| phase(to_lattice(p))).collect();
    let neg: Vec<bool> = phases.iter().map(|b| !b).collect();
    let to_in = separable_distance(ext, dim, &phases);
    let to_out = separable_distance(ext, dim, &neg);
    let h = spec.h();
    (0..spec.num_cells())
        .map(|i| {
            let mut c = spec.coords(i);
            for a in 0..dim {
                c[a] += pad as i64;
            }
            let p = c[0] as usize + ext[0] * (c[1] as usize + ext[1] * c[2] as usize);
            if phases[p] {
                -to_out[p].sqrt() * h
            } else {
                to_in[p].sqrt() * h
            }
        })
        .collect()
}

fn check_nondegenerate(window: &DomainWindow) -> Result<()> {
    let k = window.count();
    if k == 0 || k == window.omega.len() {
        return Err(Error::DegenerateDomain);
    }
    Ok(())
}

/// `d(x, Ω) - d(x, ∁Ω)` at every cell center; the exterior of the box counts
/// as complement.
pub fn signed_distance(window: &DomainWindow) -> Result<ScalarField> {
    check_nondegenerate(window)?;
    let spec = &window.spec;
    let values = signed_distance_padded(spec, 1, |c| {
        spec.index(c).map_or(false, |i| window.omega[i])
    });
    ScalarField::new(spec.clone(), values, FieldExterior::Constant(f64::INFINITY))
}

/// Reference implementation of [`signed_distance`]: distance from each center
/// to every face separating an `Ω` cell from a non-`Ω` cell.
pub fn signed_distance_brute(window: &DomainWindow) -> Result<ScalarField> {
    check_nondegenerate(window)?;
    let spec = &window.spec;
    let dim = spec.dim();
    let h = spec.h();
    let inside = |c: Lattice| spec.index(c).map_or(false, |i| window.omega[i]);
    // (cell center, axis, sign) of every boundary face, seen from the Ω side.
    let mut faces = Vec::new();
    for i in 0..spec.num_cells() {
        if !window.omega[i] {
            continue;
        }
        let c = spec.coords(i);
        for a in 0..dim {
            for d in [-1i64, 1] {
                let mut n = c;
                n[a] += d;
                if !inside(n) {
                    faces.push((spec.center(i), a, d as f64));
                }
            }
        }
    }
    let values = (0..spec.num_cells())
        .map(|i| {
            let p = spec.center(i);
            let dist = faces
                .iter()
                .map(|(fc, a, d)| {
                    let mut sq = 0.0;
                    for b in 0..dim {
                        let g = if b == *a {
                            p[b] - (fc[b] + d * 0.5 * h)
                        } else {
                            ((p[b] - fc[b]).abs() - 0.5 * h).max(0.0)
                        };
                        sq += g * g;
                    }
                    sq
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if window.omega[i] {
                -dist
            } else {
                dist
            }
        })
        .collect();
    ScalarField::new(spec.clone(), values, FieldExterior::Constant(f64::INFINITY))
}

/// `Ω_r = {d̄_Ω < r}`.
pub fn sublevel_window(window: &DomainWindow, r: f64) -> Result<DomainWindow> {
    let d = signed_distance(window)?;
    Ok(DomainWindow {
        spec: window.spec.clone(),
        omega: d.values.iter().map(|&v| v < r).collect(),
        policy: window.policy,
    })
}

/// `(n-1)`-measure of `∂Ω` by face counting; cells beyond the box count as
/// outside.
pub fn boundary_measure(window: &DomainWindow) -> f64 {
    let spec = &window.spec;
    let faces: usize = window
        .cells()
        .into_iter()
        .map(|i| {
            spec.face_neighbors(spec.coords(i))
                .filter(|&c| !spec.index(c).is_some_and(|j| window.omega[j]))
                .count()
        })
        .sum();
    faces as f64 * spec.h().powi(spec.dim() as i32 - 1)
}

/// `N_ρ(∂Ω) = {|d̄_Ω| < ρ}` as a bitmask.
pub fn tubular_neighborhood(window: &DomainWindow, rho: f64) -> Result<Vec<bool>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidRadius(rho));
    }
    let d = signed_distance(window)?;
    Ok(d.values.iter().map(|v| v.abs() < rho).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, h: f64) -> GridSpec {
        GridSpec::new(&[0.0], &[n], h).unwrap()
    }

    #[test]
    fn boundary_measure_of_square_and_interval() {
        let sq = DomainWindow::full(GridSpec::cube(2, 0.0, 8, 0.125).unwrap());
        assert!((boundary_measure(&sq) - 4.0).abs() < 1e-12);
        let w =
            DomainWindow::new(line(6, 0.5), vec![false, true, true, false, true, false]).unwrap();
        assert_eq!(boundary_measure(&w), 4.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(&[0.0, 0.0], &[2, 0], 1.0).is_err());
        assert!(GridSpec::new(&[0.0], &[2], 0.0).is_err());
        assert!(GridSpec::new(&[0.0; 4], &[1; 4], 1.0).is_err());
        assert!(GridSpec::new(&[0.0], &[2, 2], 1.0).is_err());
    }

    #[test]
    fn centers_sit_at_half_cells() {
        let g = GridSpec::new(&[1.0, -2.0], &[3, 2], 0.5).unwrap();
        assert_eq!(g.center(0), [1.25, -1.75, 0.0]);
        assert_eq!(g.center(5), [2.25, -1.25, 0.0]);
        assert_eq!(g.index([2, 1, 0]), Some(5));
        assert_eq!(g.index([3, 0, 0]), None);
    }

    #[test]
    fn signed_distance_middle_cells() {
        let spec = line(4, 0.25);
        let w = DomainWindow::new(spec, vec![false, true, true, false]).unwrap();
        let d = signed_distance(&w).unwrap();
        assert_eq!(d.values, vec![0.125, -0.125, -0.125, 0.125]);
        assert_eq!(signed_distance_brute(&w).unwrap().values, d.values);
    }

    #[test]
    fn corner_cell_outside() {
        let spec = GridSpec::cube(2, 0.0, 4, 1.0).unwrap();
        let mut omega = vec![true; 16];
        omega[0] = false;
        let w = DomainWindow::new(spec, omega).unwrap();
        let d = signed_distance(&w).unwrap();
        assert_eq!(d.values[0], 0.5);
        assert_eq!(d.values[1], -0.5);
        assert!((d.values[5] + 0.5f64.hypot(0.5)).abs() < 1e-15);
        assert_eq!(d.values[10], -1.5);
    }

    #[test]
    fn degenerate_windows_rejected() {
        let spec = line(3, 1.0);
        let w = DomainWindow::new(spec.clone(), vec![false; 3]).unwrap();
        assert!(matches!(signed_distance(&w), Err(Error::DegenerateDomain)));
        let w = DomainWindow::full(spec);
        assert!(matches!(signed_distance(&w), Err(Error::DegenerateDomain)));
    }

    #[test]
    fn sublevel_at_zero_is_identity_and_deep_is_empty() {
        let spec = GridSpec::cube(2, 0.0, 6, 0.5).unwrap();
        let w =
            DomainWindow::from_fn(spec, |p| (p[0] - 1.5).abs() + (p[1] - 1.2).abs() < 1.3).unwrap();
        assert_eq!(sublevel_window(&w, 0.0).unwrap().omega, w.omega);
        assert_eq!(sublevel_window(&w, -30.0).unwrap().count(), 0);
    }

    #[test]
    fn tube_in_one_dimension() {
        let spec = line(4, 0.25);
        let w = DomainWindow::new(spec, vec![false, true, true, false]).unwrap();
        let t = tubular_neighborhood(&w, 0.2).unwrap();
        assert_eq!(t, vec![true, true, true, true]);
        let t = tubular_neighborhood(&w, 1e9).unwrap();
        assert!(t.iter().all(|&b| b));
        assert!(tubular_neighborhood(&w, 0.0).is_err());
    }

    #[test]
    fn boundary_cells_see_the_exterior() {
        let spec = line(4, 1.0);
        let set = CellSet::new(spec, vec![true, true, false, false], ExteriorModel::Empty).unwrap();
        assert_eq!(set.boundary_cells(), vec![true, true, true, false]);
        let set = CellSet::new(set.spec.clone(), set.inside.clone(), ExteriorModel::Full).unwrap();
        assert_eq!(set.boundary_cells(), vec![false, true, true, true]);
    }

    #[test]
    fn subgraph_model_phase() {
        let base = GridSpec::new(&[0.0], &[2], 1.0).unwrap();
        let sg = Subgraph::new(base, vec![0.5, -1.0], 2.0).unwrap();
        let m = ExteriorModel::Subgraph(sg);
        assert!(m.contains(&[0.5, 0.2, 0.0], 2));
        assert!(!m.contains(&[1.5, -0.5, 0.0], 2));
        assert!(m.contains(&[5.0, 1.5, 0.0], 2));
        assert!(!m.complement().contains(&[5.0, 1.5, 0.0], 2));
    }
}
