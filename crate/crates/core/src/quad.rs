//! Gauss-Legendre helpers on arbitrary intervals.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

fn rule(points: usize) -> &'static [(f64, f64)] {
    static R8: OnceLock<GaussLegendre> = OnceLock::new();
    static R12: OnceLock<GaussLegendre> = OnceLock::new();
    static R20: OnceLock<GaussLegendre> = OnceLock::new();
    let make = |n: usize| GaussLegendre::new(NonZeroUsize::new(n).unwrap());
    match points {
        8 => R8.get_or_init(|| make(8)).as_node_weight_pairs(),
        12 => R12.get_or_init(|| make(12)).as_node_weight_pairs(),
        20 => R20.get_or_init(|| make(20)).as_node_weight_pairs(),
        _ => panic!("unsupported Gauss-Legendre order {points}"),
    }
}

/// Nodes and weights mapped to `[a, b]`.
pub(crate) fn nodes(points: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule(points)
        .iter()
        .map(move |&(x, w)| (mid + half * x, half * w))
}

/// `∫_a^b f` with a composite rule of `panels` equal panels.
pub(crate) fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    points: usize,
) -> f64 {
    let mut acc = crate::sum::Accumulator::new();
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + width * p as f64;
        for (x, w) in nodes(points, lo, lo + width) {
            acc.add(w * f(x));
        }
    }
    acc.value()
}

/// Nodes and weights on `[0, 1]`, geometrically graded toward 0 or 1.
pub(crate) fn graded_nodes(points: usize, levels: usize, toward_one: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(points * (levels + 1));
    let mut hi = 1.0;
    for level in 0..=levels {
        let lo = if level == levels { 0.0 } else { 0.5 * hi };
        for (x, w) in nodes(points, lo, hi) {
            out.push((if toward_one { 1.0 - x } else { x }, w));
        }
        hi = lo;
    }
    out
}

/// `∫_a^b f` on geometrically graded panels clustered toward `a`.
///
/// Suitable for integrands that are smooth on `(a, b]` but vary on the scale
/// of the distance to `a`.
#[cfg(test)]
pub(crate) fn integrate_graded<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    levels: usize,
    points: usize,
) -> f64 {
    let mut acc = crate::sum::Accumulator::new();
    for (t, w) in graded_nodes(points, levels, false) {
        acc.add((b - a) * w * f(a + (b - a) * t));
    }
    acc.value()
}
