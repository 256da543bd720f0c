//! Grid files, the JSON shape language and the weight-table cache.
//!
//! Grid file: a header line `fracgrid <dim> <nx> [ny] [nz] <h> <ox> [oy] [oz]`
//! followed by one `0`/`1` character per cell in index order (axis 0
//! fastest). Whitespace between cells is ignored; the writer puts one
//! axis-0 row per line.
//!
//! Field file: the same header with `fracfield`, followed by one real per
//! cell. Used for subgraph heights.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::grid::{CellSet, DomainWindow, ExteriorModel, GridSpec, Subgraph};
use crate::kernel::{InteractionTable, KernelParams};
use crate::{Error, Result};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn parse_header<'a>(magic: &str, tokens: &mut impl Iterator<Item = &'a str>) -> Result<GridSpec> {
    match tokens.next() {
        Some(t) if t == magic => {}
        other => {
            return Err(parse_err(format!(
                "expected `{magic}` header, found {other:?}"
            )))
        }
    }
    let dim: usize = tokens
        .next()
        .ok_or_else(|| parse_err("missing dimension"))?
        .parse()
        .map_err(|_| parse_err("dimension is not an integer"))?;
    if !(1..=3).contains(&dim) {
        return Err(parse_err(format!("dimension {dim} not in 1..=3")));
    }
    let mut extent = Vec::with_capacity(dim);
    for a in 0..dim {
        let v = tokens
            .next()
            .ok_or_else(|| parse_err(format!("missing extent for axis {a}")))?;
        extent.push(
            v.parse()
                .map_err(|_| parse_err(format!("bad extent `{v}`")))?,
        );
    }
    let mut reals = Vec::with_capacity(dim + 1);
    for _ in 0..=dim {
        let v = tokens
            .next()
            .ok_or_else(|| parse_err("header is truncated"))?;
        reals.push(
            v.parse::<f64>()
                .map_err(|_| parse_err(format!("bad number `{v}`")))?,
        );
    }
    GridSpec::new(&reals[1..], &extent, reals[0])
}

fn format_header(magic: &str, spec: &GridSpec) -> String {
    let mut line = format!("{magic} {}", spec.dim());
    for e in spec.extent() {
        line += &format!(" {e}");
    }
    line += &format!(" {:e}", spec.h());
    for o in spec.origin() {
        line += &format!(" {o:e}");
    }
    line
}

/// Parse a grid file into its spec and occupancy mask.
pub fn parse_grid(text: &str) -> Result<(GridSpec, Vec<bool>)> {
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let spec = parse_header("fracgrid", &mut head.split_whitespace())?;
    let mut mask = Vec::with_capacity(spec.num_cells());
    for ch in body.chars().filter(|c| !c.is_whitespace()) {
        match ch {
            '0' => mask.push(false),
            '1' => mask.push(true),
            other => {
                return Err(parse_err(format!(
                    "unexpected character `{other}` in grid body"
                )))
            }
        }
    }
    if mask.len() != spec.num_cells() {
        return Err(parse_err(format!(
            "expected {} cells, found {}",
            spec.num_cells(),
            mask.len()
        )));
    }
    Ok((spec, mask))
}

pub fn format_grid(spec: &GridSpec, mask: &[bool]) -> String {
    let mut out = format_header("fracgrid", spec);
    out.push('\n');
    for row in mask.chunks(spec.extent()[0]) {
        out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn read_grid(path: &Path) -> Result<(GridSpec, Vec<bool>)> {
    parse_grid(&fs::read_to_string(path)?)
}

pub fn write_grid(path: &Path, spec: &GridSpec, mask: &[bool]) -> Result<()> {
    fs::write(path, format_grid(spec, mask))?;
    Ok(())
}

pub fn parse_field(text: &str) -> Result<(GridSpec, Vec<f64>)> {
    let mut tokens = text.split_whitespace();
    let spec = parse_header("fracfield", &mut tokens)?;
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(format!("bad number `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != spec.num_cells() {
        return Err(parse_err(format!(
            "expected {} values, found {}",
            spec.num_cells(),
            values.len()
        )));
    }
    Ok((spec, values))
}

pub fn format_field(spec: &GridSpec, values: &[f64]) -> String {
    let mut out = format_header("fracfield", spec);
    out.push('\n');
    for row in values.chunks(spec.extent()[0]) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out += &line.join(" ");
        out.push('\n');
    }
    out
}

pub fn read_field(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    parse_field(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Shape DSL

/// A set described in the JSON shape language.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Empty,
    Full,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Axis-aligned box `[lo, hi)`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `{x : x[axis] < level}`.
    HalfSpace {
        axis: usize,
        level: f64,
    },
    Subgraph(Subgraph),
    Union(Vec<Shape>),
    Complement(Box<Shape>),
}

#[derive(Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
enum Primitive {
    Empty,
    Full,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Halfspace { axis: usize, level: f64 },
    Subgraph { heights: Vec<f64>, farfield: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSource {
    heights: PathBuf,
    farfield: f64,
}

impl Shape {
    /// Parse a shape. `base_dir` resolves relative height-file paths and
    /// `spec` fixes the base lattice of inline subgraph heights.
    pub fn from_json(value: &Value, spec: &GridSpec, base_dir: &Path) -> Result<Shape> {
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err("shape must be a JSON object"))?;
        if let Some(parts) = obj.get("union") {
            let parts = parts
                .as_array()
                .ok_or_else(|| parse_err("`union` must be an array"))?;
            return parts
                .iter()
                .map(|p| Shape::from_json(p, spec, base_dir))
                .collect::<Result<Vec<_>>>()
                .map(Shape::Union);
        }
        if let Some(inner) = obj.get("complement") {
            return Ok(Shape::Complement(Box::new(Shape::from_json(
                inner, spec, base_dir,
            )?)));
        }
        if let Some(g) = obj.get("graph") {
            let g: GraphSource =
                serde_json::from_value(g.clone()).map_err(|e| parse_err(format!("graph: {e}")))?;
            let (base, heights) = read_field(&base_dir.join(&g.heights))?;
            return Ok(Shape::Subgraph(Subgraph::new(base, heights, g.farfield)?));
        }
        let prim: Primitive =
            serde_json::from_value(value.clone()).map_err(|e| parse_err(format!("shape: {e}")))?;
        let dim = spec.dim();
        let check_len = |v: &[f64], what: &str| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(parse_err(format!(
                    "{what} has {} components, grid has dimension {dim}",
                    v.len()
                )))
            }
        };
        Ok(match prim {
            Primitive::Empty => Shape::Empty,
            Primitive::Full => Shape::Full,
            Primitive::Ball { center, radius } => {
                check_len(&center, "center")?;
                if !(radius > 0.0) {
                    return Err(Error::InvalidRadius(radius));
                }
                Shape::Ball { center, radius }
            }
            Primitive::Box { lo, hi } => {
                check_len(&lo, "lo")?;
                check_len(&hi, "hi")?;
                Shape::Box { lo, hi }
            }
            Primitive::Halfspace { axis, level } => {
                if axis >= dim {
                    return Err(parse_err(format!("half-space axis {axis} out of range")));
                }
                Shape::HalfSpace { axis, level }
            }
            Primitive::Subgraph { heights, farfield } => {
                Shape::Subgraph(Subgraph::new(spec.base()?, heights, farfield)?)
            }
        })
    }

    pub fn contains(&self, p: &[f64; 3], dim: usize) -> bool {
        match self {
            Shape::Empty => false,
            Shape::Full => true,
            Shape::Ball { center, radius } => {
                let r2: f64 = center
                    .iter()
                    .enumerate()
                    .map(|(a, c)| (p[a] - c).powi(2))
                    .sum();
                r2 < radius * radius
            }
            Shape::Box { lo, hi } => (0..dim).all(|a| p[a] >= lo[a] && p[a] < hi[a]),
            Shape::HalfSpace { axis, level } => p[*axis] < *level,
            Shape::Subgraph(sg) => p[dim - 1] < sg.height_at(&p[..dim - 1]),
            Shape::Union(parts) => parts.iter().any(|s| s.contains(p, dim)),
            Shape::Complement(inner) => !inner.contains(p, dim),
        }
    }

    /// The part of the shape outside the grid box, as an exterior model.
    ///
    /// Bounded pieces must lie inside the box; a union may contain at most
    /// one unbounded piece.
    pub fn exterior_model(&self, spec: &GridSpec) -> Result<ExteriorModel> {
        Ok(match self {
            Shape::Empty => ExteriorModel::Empty,
            Shape::Full => ExteriorModel::Full,
            Shape::Ball { center, radius } => {
                let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                check_inside_box(spec, &lo, &hi)?;
                ExteriorModel::Empty
            }
            Shape::Box { lo, hi } => {
                check_inside_box(spec, lo, hi)?;
                ExteriorModel::Empty
            }
            Shape::HalfSpace { axis, level } => ExteriorModel::HalfSpace {
                axis: *axis,
                level: *level,
            },
            Shape::Subgraph(sg) => ExteriorModel::Subgraph(sg.clone()),
            Shape::Complement(inner) => inner.exterior_model(spec)?.complement(),
            Shape::Union(parts) => {
                let mut unbounded = None;
                for p in parts {
                    match p.exterior_model(spec)? {
                        ExteriorModel::Empty => {}
                        ExteriorModel::Full => return Ok(ExteriorModel::Full),
                        m if unbounded.is_none() => unbounded = Some(m),
                        _ => {
                            return Err(parse_err(
                                "a union may contain at most one unbounded piece",
                            ))
                        }
                    }
                }
                unbounded.unwrap_or(ExteriorModel::Empty)
            }
        })
    }

    pub fn to_cellset(&self, spec: &GridSpec) -> Result<CellSet> {
        let dim = spec.dim();
        CellSet::from_fn(spec.clone(), self.exterior_model(spec)?, |p| {
            self.contains(p, dim)
        })
    }

    pub fn to_window(&self, spec: &GridSpec) -> Result<DomainWindow> {
        let dim = spec.dim();
        DomainWindow::from_fn(spec.clone(), |p| self.contains(p, dim))
    }
}

fn check_inside_box(spec: &GridSpec, lo: &[f64], hi: &[f64]) -> Result<()> {
    let h = spec.h();
    for a in 0..spec.dim() {
        let box_lo = spec.origin()[a];
        let box_hi = box_lo + spec.extent()[a] as f64 * h;
        if lo[a] < box_lo || hi[a] > box_hi {
            return Err(parse_err("bounded shape extends beyond the grid box"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Table cache

const CACHE_MAGIC: &[u8; 8] = b"FPTABLE\0";
const CACHE_VERSION: u32 = 1;

/// Write the unit weights of `table` with a versioned header.
pub fn write_table_cache(path: &Path, table: &InteractionTable) -> Result<()> {
    let p = table.params();
    let mut buf = Vec::with_capacity(64 + 8 * table.unit_weights().len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(p.dim as u32).to_le_bytes());
    buf.extend_from_slice(&p.s.to_le_bytes());
    buf.extend_from_slice(&table.spec().h().to_le_bytes());
    buf.extend_from_slice(&(table.max_offset() as u64).to_le_bytes());
    buf.extend_from_slice(&(p.near_field_order as u64).to_le_bytes());
    for w in table.unit_weights() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(parse_err("table cache is truncated"));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("length checked"))
    }
}

/// Load a cached table for `spec` and `params`.
///
/// Returns `Ok(None)` when the header does not match (different `s`, `h`,
/// dimension or near-field order, or too small an offset range).
pub fn read_table_cache(
    path: &Path,
    spec: &GridSpec,
    params: KernelParams,
) -> Result<Option<InteractionTable>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut c = Cursor(&bytes);
    if &c.take::<8>()? != CACHE_MAGIC {
        return Err(parse_err("not a table cache file"));
    }
    let version = u32::from_le_bytes(c.take()?);
    if version != CACHE_VERSION {
        return Err(parse_err(format!(
            "unsupported table cache version {version}"
        )));
    }
    let dim = u32::from_le_bytes(c.take()?) as usize;
    let s = f64::from_le_bytes(c.take()?);
    let h = f64::from_le_bytes(c.take()?);
    let max_offset = u64::from_le_bytes(c.take()?) as usize;
    let order = u64::from_le_bytes(c.take()?) as usize;
    if dim != params.dim
        || s != params.s
        || h != spec.h()
        || order != params.near_field_order
        || max_offset < spec.max_offset()
    {
        return Ok(None);
    }
    let count = (max_offset + 1).pow(dim as u32);
    if c.0.len() != 8 * count {
        return Err(parse_err("table cache length does not match its header"));
    }
    let unit =
        c.0.chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
    InteractionTable::from_unit_weights(spec.clone(), params, max_offset, unit).map(Some)
}

/// Read the cache at `path` if it matches, otherwise build and write it.
pub fn cached_table(
    path: &Path,
    spec: &GridSpec,
    params: KernelParams,
) -> Result<InteractionTable> {
    if path.exists() {
        if let Some(t) = read_table_cache(path, spec, params)? {
            return Ok(t);
        }
    }
    let table = crate::kernel::build_table(spec, params, 0)?;
    write_table_cache(path, &table)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec2() -> GridSpec {
        GridSpec::new(&[0.0, 0.0], &[4, 3], 0.25).unwrap()
    }

    #[test]
    fn grid_round_trip() {
        let spec = spec2();
        let mask: Vec<bool> = (0..12).map(|i| i % 3 == 1).collect();
        let text = format_grid(&spec, &mask);
        assert!(text.starts_with("fracgrid 2 4 3 "));
        let (spec2, mask2) = parse_grid(&text).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(mask2, mask);
    }

    #[test]
    fn grid_body_is_whitespace_insensitive() {
        let (spec, mask) = parse_grid("fracgrid 1 4 0.5 -1\n 0 1\n1\t0 ").unwrap();
        assert_eq!(spec.extent(), &[4]);
        assert_eq!(spec.origin(), &[-1.0]);
        assert_eq!(mask, vec![false, true, true, false]);
    }

    #[test]
    fn grid_errors() {
        assert!(parse_grid("fracgrid 1 4 0.5 0\n010").is_err());
        assert!(parse_grid("fracgrid 1 4 0.5 0\n01x0").is_err());
        assert!(parse_grid("grid 1 4 0.5 0\n0100").is_err());
        assert!(parse_grid("fracgrid 4 1 1 1 1 1 0 0 0 0\n1").is_err());
    }

    #[test]
    fn field_round_trip() {
        let spec = GridSpec::new(&[-1.0], &[3], 0.5).unwrap();
        let vals = vec![0.1, -2.5, 1.0 / 3.0];
        let (s2, v2) = parse_field(&format_field(&spec, &vals)).unwrap();
        assert_eq!(s2, spec);
        assert_eq!(v2, vals);
    }

    #[test]
    fn shape_dsl() {
        let spec = spec2();
        let dir = Path::new(".");
        let ball = Shape::from_json(
            &json!({"shape": "ball", "center": [0.5, 0.375], "radius": 0.2}),
            &spec,
            dir,
        )
        .unwrap();
        let e = ball.to_cellset(&spec).unwrap();
        assert_eq!(e.count(), 2);
        assert_eq!(e.exterior, ExteriorModel::Empty);

        let u = json!({"union": [{"shape": "halfspace", "axis": 0, "level": 0.25}, {"shape": "box", "lo": [0.5, 0.0], "hi": [0.75, 0.25]}]});
        let u = Shape::from_json(&u, &spec, dir).unwrap();
        assert_eq!(u.to_cellset(&spec).unwrap().count(), 4);
        assert_eq!(
            u.exterior_model(&spec).unwrap(),
            ExteriorModel::HalfSpace {
                axis: 0,
                level: 0.25
            }
        );

        let c = Shape::from_json(
            &json!({"complement": {"shape": "halfspace", "axis": 1, "level": 0.5}}),
            &spec,
            dir,
        )
        .unwrap();
        assert_eq!(c.to_cellset(&spec).unwrap().count(), 4);

        let sg = Shape::from_json(
            &json!({"shape": "subgraph", "heights": [0.3, 0.3, 0.6, 0.0], "farfield": 0.0}),
            &spec,
            dir,
        )
        .unwrap();
        assert_eq!(sg.to_cellset(&spec).unwrap().count(), 1 + 1 + 2);

        assert!(Shape::from_json(
            &json!({"shape": "ball", "center": [0.5], "radius": 0.2}),
            &spec,
            dir
        )
        .is_err());
        assert!(Shape::from_json(&json!({"shape": "torus"}), &spec, dir).is_err());
        let outside = Shape::from_json(
            &json!({"shape": "ball", "center": [0.0, 0.0], "radius": 0.5}),
            &spec,
            dir,
        )
        .unwrap();
        assert!(outside.exterior_model(&spec).is_err());
    }

    #[test]
    fn graph_heights_from_file() {
        let dir = std::env::temp_dir().join(format!("fracperim-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let base = GridSpec::new(&[0.0], &[4], 0.25).unwrap();
        fs::write(
            dir.join("v.txt"),
            format_field(&base, &[0.3, 0.3, 0.6, 0.0]),
        )
        .unwrap();
        let shape = Shape::from_json(
            &json!({"graph": {"heights": "v.txt", "farfield": 0.5}}),
            &spec2(),
            &dir,
        )
        .unwrap();
        match shape.exterior_model(&spec2()).unwrap() {
            ExteriorModel::Subgraph(sg) => assert_eq!(sg.farfield, 0.5),
            other => panic!("unexpected model {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn table_cache_round_trip() {
        let spec = GridSpec::new(&[0.0, 0.0], &[3, 3], 0.5).unwrap();
        let params = KernelParams::new(0.4, 2).unwrap();
        let path = std::env::temp_dir().join(format!("fracperim-cache-{}.bin", std::process::id()));
        let built = cached_table(&path, &spec, params).unwrap();
        let read = read_table_cache(&path, &spec, params).unwrap().unwrap();
        assert_eq!(built.unit_weights(), read.unit_weights());
        assert_eq!(built.weight([1, 1, 0]), read.weight([1, 1, 0]));
        let other = KernelParams::new(0.5, 2).unwrap();
        assert!(read_table_cache(&path, &spec, other).unwrap().is_none());
        fs::remove_file(&path).unwrap();
    }
}
