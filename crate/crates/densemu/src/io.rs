//! CSV and JSON file formats.
//!
//! - density: two columns `t,f` on a regular grid
//! - bandwidth: `{"isotropic": bool, "h": [...]}`
//! - design: `x1..xd` header, one row per point
//! - replicates: `y1..yR` header, one row of raw outputs per design point
//! - densities: grid nodes as the header row, one density per row
//! - decomposition model: a directory with `basis.csv`, `coeffs.csv`, `meta.json`
//!
//! Numbers are written in Rust's shortest round-trip form, so files read
//! back to identical values.

use std::fs;
use std::path::{Path, PathBuf};

use densemu_core::decomposition::{Basis, DecompositionModel, Method};
use densemu_core::density::{Density, Grid, DEFAULT_GRID_POINTS};
use densemu_core::kernel_regression::{Bandwidth, TrainingSet};
use densemu_core::toy_models::training_from_replicates;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on grid steps when reading node coordinates.
pub const GRID_STEP_TOL: f64 = 1e-9;

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(false).trim(csv::Trim::All).from_reader(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => {
            let line = pos.as_ref().map(|p| p.line()).unwrap_or(0);
            Error::data(path, format!("ragged row at line {line}: {len} fields, expected {expected_len}"))
        }
        _ => Error::data(path, e.to_string()),
    }
}

/// Header plus numeric rows.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv_reader(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect(),
        None => return Err(Error::data(path, "empty file")),
    };
    let mut rows = Vec::new();
    for (k, record) in records.enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| Error::data(path, format!("non-numeric cell {cell:?} at line {}, column {}", k + 2, c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_matrix(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Regular grid through `nodes`, checking every step against the mean step.
pub fn grid_from_nodes(path: &Path, nodes: &[f64]) -> Result<Grid> {
    if nodes.len() < 2 {
        return Err(Error::data(path, "a grid needs at least two nodes"));
    }
    let m = nodes.len();
    let dt = (nodes[m - 1] - nodes[0]) / (m - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::data(path, "grid nodes must increase"));
    }
    for (j, pair) in nodes.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > GRID_STEP_TOL * dt {
            return Err(Error::data(path, format!("irregular grid step between nodes {j} and {}", j + 1)));
        }
    }
    Grid::new(nodes[0], dt, m).map_err(|e| Error::data(path, e.to_string()))
}

pub fn write_density(path: &Path, f: &Density) -> Result<()> {
    let rows: Vec<Vec<f64>> = f.grid().nodes().zip(f.values()).map(|(t, v)| vec![t, *v]).collect();
    write_matrix(path, &["t".into(), "f".into()], &rows)
}

/// Reads a `t,f` file and renormalizes the values on the inferred grid.
pub fn read_density(path: &Path) -> Result<Density> {
    let (header, rows) = read_matrix(path)?;
    if header != ["t", "f"] {
        return Err(Error::data(path, format!("expected header t,f, found {}", header.join(","))));
    }
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = grid_from_nodes(path, &nodes)?;
    Density::normalized(grid, rows.iter().map(|r| r[1]).collect()).map_err(|e| Error::data(path, e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct BandwidthFile {
    isotropic: bool,
    h: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::data(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))
}

pub fn write_bandwidth(path: &Path, h: &Bandwidth) -> Result<()> {
    write_json(path, &BandwidthFile { isotropic: h.is_isotropic(), h: h.diag().to_vec() })
}

pub fn read_bandwidth(path: &Path) -> Result<Bandwidth> {
    let file: BandwidthFile = read_json(path)?;
    if file.isotropic {
        if file.h.iter().any(|v| *v != file.h[0]) {
            return Err(Error::data(path, "isotropic bandwidth with unequal entries"));
        }
        return Bandwidth::isotropic(file.h[0], file.h.len()).map_err(|e| Error::data(path, e.to_string()));
    }
    Bandwidth::new(file.h).map_err(|e| Error::data(path, e.to_string()))
}

pub fn write_design(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let d = points.first().map_or(0, Vec::len);
    write_matrix(path, &numbered("x", d), points)
}

pub fn read_design(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_matrix(path)?.1)
}

pub fn write_replicates(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let r = rows.first().map_or(0, Vec::len);
    write_matrix(path, &numbered("y", r), rows)
}

pub fn write_densities(path: &Path, densities: &[Density]) -> Result<()> {
    let grid = densities.first().map(|f| *f.grid()).ok_or_else(|| Error::data(path, "no densities to write"))?;
    let header: Vec<String> = grid.nodes().map(|t| t.to_string()).collect();
    let rows: Vec<Vec<f64>> = densities.iter().map(|f| f.values().to_vec()).collect();
    write_matrix(path, &header, &rows)
}

pub fn read_densities(path: &Path) -> Result<Vec<Density>> {
    let (header, rows) = read_matrix(path)?;
    let nodes = header
        .iter()
        .map(|h| h.parse::<f64>().map_err(|_| Error::data(path, format!("non-numeric grid node {h:?} in header"))))
        .collect::<Result<Vec<_>>>()?;
    let grid = grid_from_nodes(path, &nodes)?;
    rows.into_iter()
        .map(|r| Density::normalized(grid, r).map_err(|e| Error::data(path, e.to_string())))
        .collect()
}

/// How the output grid of ingested or simulated densities is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Pooled replicate range widened by three bandwidths, 512 nodes.
    #[default]
    Auto,
    Fixed { lo: f64, hi: f64, points: usize },
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Option<Grid>> {
        match *self {
            GridSpec::Auto => Ok(None),
            GridSpec::Fixed { lo, hi, points } => Grid::spanning(lo, hi, points)
                .map(Some)
                .map_err(|e| Error::Config(format!("grid: {e}"))),
        }
    }
}

/// Where the outputs of an external dataset come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Outputs {
    Replicates(PathBuf),
    Densities(PathBuf),
}

/// Training set from a design file plus either raw replicates (one KDE per
/// row) or a densities matrix.
pub fn ingest_dataset(design_path: &Path, outputs: &Outputs, grid: &GridSpec) -> Result<TrainingSet> {
    let design = read_design(design_path)?;
    let (out_path, densities) = match outputs {
        Outputs::Replicates(path) => {
            let (_, rows) = read_matrix(path)?;
            check_rows(design_path, design.len(), path, rows.len())?;
            let train = training_from_replicates(design.clone(), &rows, grid.resolve()?)
                .map_err(|e| Error::data(path, e.to_string()))?;
            return Ok(train);
        }
        Outputs::Densities(path) => (path, read_densities(path)?),
    };
    check_rows(design_path, design.len(), out_path, densities.len())?;
    if let GridSpec::Fixed { .. } = grid {
        let target = grid.resolve()?.expect("fixed grid");
        if !densities[0].grid().matches(&target) {
            return Err(Error::data(out_path, "densities grid differs from the configured grid"));
        }
    }
    TrainingSet::new(design, densities).map_err(|e| Error::data(out_path, e.to_string()))
}

fn check_rows(design_path: &Path, design_rows: usize, out_path: &Path, out_rows: usize) -> Result<()> {
    if design_rows != out_rows {
        return Err(Error::data(
            out_path,
            format!("{out_rows} output rows but {} has {design_rows} design rows", design_path.display()),
        ));
    }
    if design_rows == 0 {
        return Err(Error::data(design_path, "no design rows"));
    }
    Ok(())
}

/// Writes `design.csv` and `replicates.csv` into `dir`.
pub fn export_dataset(dir: &Path, points: &[Vec<f64>], replicates: &[Vec<f64>]) -> Result<()> {
    write_design(&dir.join("design.csv"), points)?;
    write_replicates(&dir.join("replicates.csv"), replicates)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridMeta {
    t1: f64,
    dt: f64,
    points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    method: String,
    q: usize,
    samples: usize,
    grid: GridMeta,
    history: Vec<f64>,
    seed: Option<u64>,
    selected: Option<Vec<usize>>,
}

/// Writes `basis.csv` (grid nodes, then one column per basis function, plus
/// the mean for CPCA), `coeffs.csv` and `meta.json` into `dir`.
pub fn save_model(dir: &Path, model: &DecompositionModel) -> Result<()> {
    let grid = *model.grid();
    let q = model.q();
    let mut header = vec!["t".to_string()];
    header.extend(numbered("w", q));
    let columns: Vec<&[f64]> = match model.basis() {
        Basis::Convex(w) => w.iter().map(|d| d.values()).collect(),
        Basis::Pca { mean, components } => {
            header.push("mean".into());
            components.iter().map(|c| c.as_slice()).chain(std::iter::once(mean.values())).collect()
        }
    };
    let rows: Vec<Vec<f64>> = grid
        .nodes()
        .enumerate()
        .map(|(j, t)| std::iter::once(t).chain(columns.iter().map(|c| c[j])).collect())
        .collect();
    write_matrix(&dir.join("basis.csv"), &header, &rows)?;
    write_matrix(&dir.join("coeffs.csv"), &numbered("psi", q), model.coeffs())?;
    let meta = ModelMeta {
        method: model.method().name().into(),
        q,
        samples: model.coeffs().len(),
        grid: GridMeta { t1: grid.t1(), dt: grid.dt(), points: grid.len() },
        history: model.history().to_vec(),
        seed: model.seed(),
        selected: model.selected_indices().map(<[usize]>::to_vec),
    };
    write_json(&dir.join("meta.json"), &meta)
}

pub fn load_model(dir: &Path) -> Result<DecompositionModel> {
    let meta_path = dir.join("meta.json");
    let meta: ModelMeta = read_json(&meta_path)?;
    let method: Method = meta.method.parse().map_err(|e: densemu_core::Error| Error::data(&meta_path, e.to_string()))?;
    let grid = Grid::new(meta.grid.t1, meta.grid.dt, meta.grid.points).map_err(|e| Error::data(&meta_path, e.to_string()))?;

    let basis_path = dir.join("basis.csv");
    let (header, rows) = read_matrix(&basis_path)?;
    let pca = method == Method::Cpca;
    let expected = 1 + meta.q + usize::from(pca);
    if header.len() != expected || rows.len() != grid.len() {
        return Err(Error::data(&basis_path, format!("expected {} rows of {expected} columns", grid.len())));
    }
    let column = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let bad = |e: densemu_core::Error| Error::data(&basis_path, e.to_string());
    let basis = if pca {
        Basis::Pca {
            mean: Density::new(grid, column(meta.q + 1)).map_err(bad)?,
            components: (1..=meta.q).map(column).collect(),
        }
    } else {
        Basis::Convex((1..=meta.q).map(|c| Density::new(grid, column(c))).collect::<densemu_core::Result<Vec<_>>>().map_err(bad)?)
    };

    let coeffs_path = dir.join("coeffs.csv");
    let (_, coeffs) = read_matrix(&coeffs_path)?;
    if coeffs.len() != meta.samples {
        return Err(Error::data(&coeffs_path, format!("{} rows but meta.json lists {} samples", coeffs.len(), meta.samples)));
    }
    DecompositionModel::from_parts(method, basis, coeffs, meta.selected, meta.history, meta.seed)
        .map_err(|e| Error::data(dir, e.to_string()))
}

/// Default number of output grid nodes.
pub const GRID_POINTS: usize = DEFAULT_GRID_POINTS;
