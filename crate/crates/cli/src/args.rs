use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "fracperim",
    version,
    about = "Fractional s-perimeters of discretized sets"
)]
pub struct Cli {
    /// Worker threads. FRACPERIM_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write results to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Weight-table cache file, created on first use.
    #[arg(long, global = true)]
    pub table_cache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Perimeter of a set in a window, with its local/nonlocal split.
    Compute(ComputeArgs),
    /// Mollify and threshold a set along a schedule of radii.
    Approx(ApproxArgs),
    /// Minimal set in a window for given exterior data.
    Minimize(MinimizeArgs),
    /// Relaxed energy of a field against its level-set decomposition.
    CoareaCheck(CoareaArgs),
    /// Perimeter in a window split along a nested inner window.
    DecompositionCheck(DecompositionArgs),
    /// Interaction across inner strips of a window.
    StripScan(StripArgs),
    /// Growth of the nonlocal part of a subgraph in a cylinder.
    CylinderScan(CylinderArgs),
    /// Growth of the nonlocal part restricted to a sector of directions.
    SectorScan(SectorArgs),
    /// Vertical confinement and stability of cylinder minimizers.
    Confinement(ConfinementArgs),
    /// Rescaled local part of a graph against its area as s grows.
    DavilaScan(DavilaArgs),
    /// Partial perimeters of a one-dimensional union of intervals.
    #[command(name = "diverge-1d")]
    #[serde(rename = "diverge-1d")]
    Diverge1d(DivergeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SetArgs {
    /// Grid file with the cells of the set.
    #[arg(long)]
    pub grid: PathBuf,
    /// The set outside the grid box, as a shape (inline JSON or @file).
    #[arg(long, default_value = r#"{"shape":"empty"}"#)]
    pub exterior: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ComputeArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub set: SetArgs,
    /// Window as a shape; the whole grid if omitted.
    #[arg(long)]
    pub omega: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ApproxArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub set: SetArgs,
    /// Windows as shapes; the first one drives the threshold choice.
    #[arg(long = "window")]
    pub windows: Vec<String>,
    /// Decreasing mollifier radii, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// Use the cut-off pipeline for bounded windows.
    #[arg(long)]
    pub lipschitz: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MinimizeArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub set: SetArgs,
    /// Window of free cells, as a shape.
    #[arg(long)]
    pub omega: String,
    /// Relative duality gap at which the solver stops.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Iteration budget of the solver.
    #[arg(long, default_value_t = 40_000)]
    pub max_iter: usize,
    /// Compare against exhaustive search.
    #[arg(long)]
    pub oracle: bool,
    /// Write the minimizer as a grid file.
    #[arg(long)]
    pub minimizer_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CoareaArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    /// Field file with one value per cell.
    #[arg(long)]
    pub field: PathBuf,
    /// Value of the field outside the grid box.
    #[arg(long, default_value_t = 0.0)]
    pub exterior_value: f64,
    /// Window as a shape; the whole grid if omitted.
    #[arg(long)]
    pub omega: Option<String>,
    /// Relative residual allowed.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DecompositionArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub set: SetArgs,
    /// Inner window as a shape, nested in the outer one.
    #[arg(long)]
    pub inner: String,
    /// Outer window; the whole grid if omitted.
    #[arg(long)]
    pub outer: Option<String>,
    /// Residual allowed, relative to 1 + P(E, outer).
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StripArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    /// Grid file whose cells form the window.
    #[arg(long)]
    pub grid: PathBuf,
    /// Strip widths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    /// Bound on the measure of the distance level sets; defaults to the
    /// boundary measure of the window.
    #[arg(long)]
    pub level_area: Option<f64>,
    /// Allowed deviation of the fitted exponent from 1 - s.
    #[arg(long, default_value_t = 0.1)]
    pub exponent_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    /// Field file with the heights of v on the base grid.
    #[arg(long)]
    pub heights: PathBuf,
    /// Value of v beyond the base grid.
    #[arg(long, default_value_t = 0.0)]
    pub farfield: f64,
    /// Base window as a shape; the whole base grid if omitted.
    #[arg(long)]
    pub omega: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct CylinderArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Increasing truncation heights, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    /// Confinement height used for the local-part bound.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SectorArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Fraction of directions in the sector, in (0, 1].
    #[arg(long)]
    pub sigma: f64,
    /// Height bound M on the sector.
    #[arg(long)]
    pub bound: f64,
    /// Truncation heights, comma separated, each above M and the sector radius.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConfinementArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Height of the smallest cylinder.
    #[arg(long, default_value_t = 1.0)]
    pub k0: f64,
    /// Number of taller cylinders to compare against.
    #[arg(long, default_value_t = 2)]
    pub extra: usize,
    /// Relative duality gap at which the solver stops.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Iteration budget of the solver per cylinder.
    #[arg(long, default_value_t = 60_000)]
    pub max_iter: usize,
    /// Write the minimizer on the smallest cylinder as a grid file.
    #[arg(long)]
    pub minimizer_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DavilaArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub s_list: Vec<f64>,
    /// Refinement factors of the base grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub refinements: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct DivergeArgs {
    /// Fractional order, strictly between 0 and 1.
    #[arg(long)]
    pub s: f64,
    /// Numbers of intervals, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8,64")]
    pub m: Vec<usize>,
    /// Interval lengths: `log-squared` for 1/(k ln²(k+1)) or `power:<p>`
    /// for k^{-p}.
    #[arg(long, default_value = "log-squared")]
    pub beta: String,
}
