//! Cell-pair quadrature of the kernel `|x - y|^{-n-s}`.
//!
//! Weights are computed for unit cells and scaled by `h^{n-s}`. In one
//! dimension every weight is a closed form. In higher dimensions a pair of
//! cells at lattice offset `Δ` interacts through
//!
//! ```text
//! W(Δ) = ∫_{[-1,1]^n} Π_a (1 - |u_a|) |Δ + u|^{-n-s} du,
//! ```
//!
//! which is smooth for `|Δ|∞ ≥ 3` and evaluated by Gauss-Legendre on each
//! orthant, or by a curvature-corrected midpoint rule far away. Adjacent and
//! next-adjacent pairs are singular; halving the cells gives
//!
//! ```text
//! W(Δ) = 2^{s-n} Σ_{e ∈ {-1,0,1}^n} Π_a (2 - |e_a|) W(2Δ + e),
//! ```
//!
//! and the near weights are the fixed point of that subdivision.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::grid::{GridSpec, Lattice};
use crate::sum::Accumulator;
use crate::{quad, Error, Result};

/// Offsets beyond this use the corrected midpoint rule.
const TENT_RULE_LIMIT: i64 = 24;
const TENT_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub s: f64,
    pub dim: usize,
    /// Depth of the dyadic subdivision used for near pairs.
    pub near_field_order: usize,
}

impl KernelParams {
    pub fn new(s: f64, dim: usize) -> Result<Self> {
        Self::with_order(s, dim, 8)
    }

    pub fn with_order(s: f64, dim: usize, near_field_order: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidExponent(s));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if near_field_order == 0 {
            return Err(Error::InvalidGrid(
                "near_field_order must be at least 1".into(),
            ));
        }
        Ok(Self {
            s,
            dim,
            near_field_order,
        })
    }

    fn alpha(&self) -> f64 {
        self.dim as f64 + self.s
    }
}

/// Volume of the unit ball in `ℝ^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(half + 1.0)
}

/// `x^β - y^β` without cancellation when `x ≈ y`.
fn pow_diff(x: f64, y: f64, beta: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return x.powf(beta) - y.powf(beta);
    }
    y.powf(beta) * (beta * ((x - y) / y).ln_1p()).exp_m1()
}

/// `∫_a^b ∫_c^d |x - y|^{-1-s} dy dx` for `a < b ≤ c < d`.
pub fn interval_pair_exact(a: f64, b: f64, c: f64, d: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidExponent(s));
    }
    if !(a < b && b <= c && c < d) || [a, b, c, d].iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInterval { a, b, c, d });
    }
    let beta = 1.0 - s;
    // [(d-b)^β - (d-a)^β] - [(c-b)^β - (c-a)^β]
    let upper = pow_diff(d - b, d - a, beta);
    let lower = pow_diff(c - b, c - a, beta);
    Ok((upper - lower) / (s * beta))
}

/// `∫_a^b ∫_c^∞ |x - y|^{-1-s} dy dx` for `a < b ≤ c`.
pub fn interval_halfline(a: f64, b: f64, c: f64, s: f64) -> f64 {
    let beta = 1.0 - s;
    pow_diff(c - a, c - b, beta) / (s * beta)
}

/// Unit-cell weight in one dimension at offset `d ≥ 1`.
fn unit_weight_1d(d: u64, s: f64) -> f64 {
    let beta = 1.0 - s;
    if d < 4 {
        let d = d as f64;
        return interval_pair_exact(0.0, 1.0, d, d + 1.0, s).expect("valid unit intervals");
    }
    // (1+x)^β + (1-x)^β - 2 = 2 Σ_{k≥1} C(β,2k) x^{2k}
    let x = 1.0 / d as f64;
    let x2 = x * x;
    let mut coef = 1.0;
    let mut xp = 1.0;
    let mut series = 0.0;
    let mut k = 0.0;
    loop {
        coef *= (beta - k) * (beta - k - 1.0) / ((k + 1.0) * (k + 2.0));
        xp *= x2;
        let term = coef * xp;
        series += term;
        k += 2.0;
        if term.abs() <= 1e-18 * series.abs() {
            break;
        }
    }
    -(d as f64).powf(beta) * 2.0 * series / (s * beta)
}

/// Tent-form weight by Gauss-Legendre on each orthant; accurate for `|Δ|∞ ≥ 3`.
fn tent_rule(delta: [f64; 3], dim: usize, alpha: f64, points: usize) -> f64 {
    let g: Vec<(f64, f64)> = quad::nodes(points, 0.0, 1.0)
        .map(|(t, w)| (t, w * (1.0 - t)))
        .collect();
    let mut acc = Accumulator::new();
    let half_exp = -0.5 * alpha;
    for orthant in 0..(1usize << dim) {
        let sign = |a: usize| if orthant >> a & 1 == 1 { -1.0 } else { 1.0 };
        match dim {
            1 => {
                for &(t, w) in &g {
                    let x = delta[0] + sign(0) * t;
                    acc.add(w * (x * x).powf(half_exp));
                }
            }
            2 => {
                for &(t0, w0) in &g {
                    let x = delta[0] + sign(0) * t0;
                    for &(t1, w1) in &g {
                        let y = delta[1] + sign(1) * t1;
                        acc.add(w0 * w1 * (x * x + y * y).powf(half_exp));
                    }
                }
            }
            _ => {
                for &(t0, w0) in &g {
                    let x = delta[0] + sign(0) * t0;
                    for &(t1, w1) in &g {
                        let y = delta[1] + sign(1) * t1;
                        let r2 = x * x + y * y;
                        for &(t2, w2) in &g {
                            let z = delta[2] + sign(2) * t2;
                            acc.add(w0 * w1 * w2 * (r2 + z * z).powf(half_exp));
                        }
                    }
                }
            }
        }
    }
    acc.value()
}

/// Tent-form weight with each axis graded toward the point nearest the
/// singularity. Used for touching offsets.
fn tent_rule_graded(delta: [f64; 3], dim: usize, alpha: f64) -> f64 {
    const LEVELS: usize = 40;
    let mut acc = Accumulator::new();
    let half_exp = -0.5 * alpha;
    for orthant in 0..(1usize << dim) {
        let axes: Vec<Vec<(f64, f64)>> = (0..dim)
            .map(|a| {
                let sign = if orthant >> a & 1 == 1 { -1.0 } else { 1.0 };
                let toward_one = -sign * delta[a] >= 0.5;
                quad::graded_nodes(12, LEVELS, toward_one)
                    .into_iter()
                    .map(|(t, w)| (delta[a] + sign * t, w * (1.0 - t)))
                    .collect()
            })
            .collect();
        match dim {
            1 => {
                for &(x, w) in &axes[0] {
                    acc.add(w * (x * x).powf(half_exp));
                }
            }
            2 => {
                for &(x, w0) in &axes[0] {
                    for &(y, w1) in &axes[1] {
                        acc.add(w0 * w1 * (x * x + y * y).powf(half_exp));
                    }
                }
            }
            _ => {
                for &(x, w0) in &axes[0] {
                    for &(y, w1) in &axes[1] {
                        let r2 = x * x + y * y;
                        for &(z, w2) in &axes[2] {
                            acc.add(w0 * w1 * w2 * (r2 + z * z).powf(half_exp));
                        }
                    }
                }
            }
        }
    }
    acc.value()
}

fn inf_norm(d: Lattice) -> i64 {
    d.iter().map(|v| v.abs()).max().unwrap_or(0)
}

/// Unit weight for a non-near offset (`|Δ|∞ ≥ 3`, or any offset in 1D).
fn far_unit_weight(delta: Lattice, p: &KernelParams) -> f64 {
    let n = p.dim;
    let mut delta = delta.map(i64::abs);
    delta[..n].sort_unstable_by(|a, b| b.cmp(a));
    if n == 1 {
        return unit_weight_1d(delta[0].unsigned_abs(), p.s);
    }
    let alpha = p.alpha();
    if inf_norm(delta) <= TENT_RULE_LIMIT {
        let d = [delta[0] as f64, delta[1] as f64, delta[2] as f64];
        return tent_rule(d, n, alpha, TENT_POINTS);
    }
    let r2: f64 = delta.iter().map(|&v| (v * v) as f64).sum();
    r2.powf(-0.5 * alpha) * (1.0 + alpha * (alpha + 2.0 - n as f64) / (12.0 * r2))
}

/// Abs offsets `[0..=2]^n ∖ {0}` indexed densely in base 3.
fn near_index(abs: Lattice, dim: usize) -> Option<usize> {
    if inf_norm(abs) > 2 {
        return None;
    }
    let mut idx = 0;
    for a in (0..dim).rev() {
        idx = idx * 3 + abs[a] as usize;
    }
    Some(idx)
}

fn near_offset(idx: usize, dim: usize) -> Lattice {
    let mut d = [0; 3];
    let mut r = idx;
    for v in d.iter_mut().take(dim) {
        *v = (r % 3) as i64;
        r /= 3;
    }
    d
}

/// Affine map `x ↦ A x + b` of one subdivision step on the near offsets.
fn subdivision_operator(p: &KernelParams) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.dim;
    let m = 3usize.pow(n as u32);
    let factor = 2f64.powf(p.s - n as f64);
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for i in 1..m {
        let delta = near_offset(i, n);
        for e_idx in 0..m {
            let mut child = [0i64; 3];
            let mut mult = factor;
            let mut r = e_idx;
            for ax in 0..n {
                let e = (r % 3) as i64 - 1;
                r /= 3;
                child[ax] = (2 * delta[ax] + e).abs();
                mult *= (2 - e.abs()) as f64;
            }
            match near_index(child, n) {
                Some(j) => a[(i, j)] += mult,
                None => b[i] += mult * far_unit_weight(child, p),
            }
        }
    }
    (a, b)
}

/// Exact near-field unit weights: the fixed point of the subdivision.
fn near_field_fixed_point(p: &KernelParams) -> Vec<f64> {
    let (a, b) = subdivision_operator(p);
    let m = b.len();
    // Row/column 0 (zero offset) is unused; pin it to 0.
    let mut sys = DMatrix::identity(m, m) - a;
    for k in 0..m {
        sys[(0, k)] = if k == 0 { 1.0 } else { 0.0 };
        sys[(k, 0)] = if k == 0 { 1.0 } else { 0.0 };
    }
    let mut rhs = b;
    rhs[0] = 0.0;
    let x = sys
        .lu()
        .solve(&rhs)
        .expect("subdivision system is a contraction");
    x.iter().copied().collect()
}

/// Near-field unit weight from `depth` literal subdivision steps starting at
/// a graded Gauss-Legendre estimate. Converges to the table value as
/// `depth → ∞`.
pub fn near_field_recursive(delta: Lattice, params: &KernelParams, depth: usize) -> f64 {
    let n = params.dim;
    let abs = [delta[0].abs(), delta[1].abs(), delta[2].abs()];
    let Some(target) = near_index(abs, n).filter(|&i| i > 0) else {
        return far_unit_weight(abs, params);
    };
    let (a, b) = subdivision_operator(params);
    let mut x = DVector::from_fn(b.len(), |i, _| {
        if i == 0 {
            return 0.0;
        }
        let d = near_offset(i, n);
        tent_rule_graded([d[0] as f64, d[1] as f64, d[2] as f64], n, params.alpha())
    });
    for _ in 0..depth {
        x = &a * &x + &b;
        x[0] = 0.0;
    }
    x[target]
}

/// Unit weights for every abs offset in `[0..=k]^n` (zero at the origin).
fn unit_weights(params: &KernelParams, k: usize) -> Vec<f64> {
    let n = params.dim;
    let side = k + 1;
    let total = side.pow(n as u32);
    let near = if n >= 2 {
        near_field_fixed_point(params)
    } else {
        Vec::new()
    };
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut d = [0i64; 3];
            let mut r = idx;
            for v in d.iter_mut().take(n) {
                *v = (r % side) as i64;
                r /= side;
            }
            d[..n].sort_unstable_by(|a, b| b.cmp(a));
            if idx == 0 {
                0.0
            } else if n >= 2 && inf_norm(d) <= 2 {
                near[near_index(d, n).unwrap()]
            } else {
                far_unit_weight(d, params)
            }
        })
        .collect()
}

/// `I_n(σ) = (2n/σ) ∫_{[-1,1]^{n-1}} (1 + |w|²)^{-(n+σ)/2} dw`, which equals
/// `∫_{|y|∞ > 1} |y|^{-n-σ} dy`.
fn cube_exterior_integral(n: usize, sigma: f64) -> f64 {
    let e = -0.5 * (n as f64 + sigma);
    let face = match n {
        1 => 1.0,
        2 => quad::integrate(|w| (1.0 + w * w).powf(e), -1.0, 1.0, 4, 20),
        _ => quad::integrate(
            |w1| quad::integrate(|w2| (1.0 + w1 * w1 + w2 * w2).powf(e), -1.0, 1.0, 4, 20),
            -1.0,
            1.0,
            4,
            20,
        ),
    };
    2.0 * n as f64 / sigma * face
}

/// s-perimeter of the unit cube, `L(Q, ∁Q)`, with an error estimate.
///
/// Exact in 1D. Otherwise a lattice sum over `|Δ|∞ ≤ K` plus the exterior of
/// the cube of half-width `K + 1/2`, expanded to second order.
pub fn unit_cell_perimeter(params: &KernelParams) -> (f64, f64) {
    let s = params.s;
    let n = params.dim;
    if n == 1 {
        return (2.0 / (s * (1.0 - s)), 0.0);
    }
    let k = if n == 2 { 128 } else { 48 };
    let w = unit_weights(params, k);
    let side = k + 1;
    let mut acc = Accumulator::new();
    for (idx, &v) in w.iter().enumerate() {
        let mut r = idx;
        let mut mult = 1.0;
        for _ in 0..n {
            if r % side != 0 {
                mult *= 2.0;
            }
            r /= side;
        }
        acc.add(mult * v);
    }
    let radius = k as f64 + 0.5;
    let alpha = params.alpha();
    let lead = radius.powf(-s) * cube_exterior_integral(n, s);
    let corr = alpha * (alpha + 2.0 - n as f64) / 24.0
        * radius.powf(-s - 2.0)
        * cube_exterior_integral(n, s + 2.0);
    acc.add(lead);
    acc.add(corr);
    (acc.value(), corr.abs())
}

/// `∫_{∁B_R(x)} |x - y|^{-n-s} dy = n ω_n / (s R^s)`.
pub fn tail_mass(radius: f64, params: &KernelParams) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidRadius(radius));
    }
    let n = params.dim;
    Ok(n as f64 * unit_ball_volume(n) / (params.s * radius.powf(params.s)))
}

/// `∫_{ℝ^{n-1}} (t² + |z|²)^{-(n+s)/2} dz = t^{-1-s} · C` — returns `C`.
pub(crate) fn hyperplane_constant(n: usize, s: f64) -> f64 {
    std::f64::consts::PI.powf((n as f64 - 1.0) / 2.0) * gamma((1.0 + s) / 2.0)
        / gamma((n as f64 + s) / 2.0)
}

/// Precomputed pair weights for a grid.
#[derive(Debug, Clone)]
pub struct InteractionTable {
    spec: GridSpec,
    params: KernelParams,
    max_offset: usize,
    /// Unit weights on abs offsets `[0..=max_offset]^n`, axis 0 fastest.
    unit: Vec<f64>,
    scale: f64,
    cell_perimeter: f64,
    cell_perimeter_bound: f64,
}

/// Build the table for every offset with `|Δ|∞ ≤ max_offset`.
///
/// `max_offset` is raised to the grid diameter if smaller.
pub fn build_table(
    spec: &GridSpec,
    params: KernelParams,
    max_offset: usize,
) -> Result<InteractionTable> {
    if params.dim != spec.dim() {
        return Err(Error::SpecMismatch);
    }
    let k = max_offset.max(spec.max_offset()).max(2);
    let unit = unit_weights(&params, k);
    Ok(InteractionTable::assemble(spec.clone(), params, k, unit))
}

impl InteractionTable {
    fn assemble(spec: GridSpec, params: KernelParams, max_offset: usize, unit: Vec<f64>) -> Self {
        let scale = spec.h().powf(params.dim as f64 - params.s);
        let (cell_perimeter, cell_perimeter_bound) = unit_cell_perimeter(&params);
        Self {
            spec,
            params,
            max_offset,
            unit,
            scale,
            cell_perimeter,
            cell_perimeter_bound,
        }
    }

    /// Rebuild from stored unit weights (see [`crate::io`]).
    pub fn from_unit_weights(
        spec: GridSpec,
        params: KernelParams,
        max_offset: usize,
        unit: Vec<f64>,
    ) -> Result<Self> {
        if params.dim != spec.dim() {
            return Err(Error::SpecMismatch);
        }
        if unit.len() != (max_offset + 1).pow(params.dim as u32) || max_offset < spec.max_offset() {
            return Err(Error::Parse(
                "weight count does not match max_offset".into(),
            ));
        }
        Ok(Self::assemble(spec, params, max_offset, unit))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn max_offset(&self) -> usize {
        self.max_offset
    }

    /// Unit-cell weights in lexicographic abs-offset order.
    pub fn unit_weights(&self) -> &[f64] {
        &self.unit
    }

    /// `h^{n-s}`: factor from unit cells to cells of side `h`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Weight of the pair at lattice offset `delta`; zero for `delta = 0`.
    #[inline]
    pub fn weight(&self, delta: Lattice) -> f64 {
        let k = self.max_offset as i64;
        let side = k + 1;
        let (a, b, c) = (delta[0].abs(), delta[1].abs(), delta[2].abs());
        if a <= k && b <= k && c <= k {
            self.unit[(a + side * (b + side * c)) as usize] * self.scale
        } else {
            far_unit_weight([a, b, c], &self.params) * self.scale
        }
    }

    /// `L(Q, ∁Q)` for one cell `Q`, and its quadrature error estimate.
    pub fn cell_perimeter(&self) -> (f64, f64) {
        (
            self.cell_perimeter * self.scale,
            self.cell_perimeter_bound * self.scale,
        )
    }
}
