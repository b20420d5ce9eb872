//! File formats: edge-list and coordinate CSVs, signal matrices, JPSD
//! tables, observation lists, and the versioned model JSON document.
//!
//! All CSVs are UTF-8 with LF line endings and a header row. Node and
//! frequency indices are 0-based; time columns are labeled `t1..tT` and the
//! observation file's `t` column uses that same 1-based labeling.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FitReport;
use crate::graph::{Graph, Normalization, SpectralBasis};
use crate::models::{GVarmaModel, GpVarModel, InnovationCovariance};
use crate::stationarity::Jpsd;
use crate::time_vertex::TimeVertexSignal;

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(Normalization::Combinatorial),
            "unit-spectral-norm" => Ok(Normalization::UnitSpectralNorm),
            other => Err(Error::invalid(format!(
                "unknown normalization '{other}' (expected 'combinatorial' or 'unit-spectral-norm')"
            ))),
        }
    }
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Combinatorial => "combinatorial",
            Normalization::UnitSpectralNorm => "unit-spectral-norm",
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn parse_field<T: FromStr>(field: &str, line_no: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| {
        Error::invalid(format!("line {line_no}: cannot parse {what} from '{field}'"))
    })
}

/// Write a graph as `i,j,weight` rows (one undirected edge per row).
pub fn write_graph_csv(path: &Path, graph: &Graph) -> Result<()> {
    let mut out = String::from("i,j,weight\n");
    for &(i, j, w) in graph.edges() {
        writeln!(out, "{i},{j},{w}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read an edge-list CSV. The node count is the largest index plus one.
pub fn read_graph_csv(path: &Path) -> Result<Graph> {
    let lines = read_lines(path)?;
    if lines.is_empty() || lines[0].trim() != "i,j,weight" {
        return Err(Error::invalid("graph CSV must start with header 'i,j,weight'"));
    }
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("line {}: expected 3 fields", idx + 1)));
        }
        let i: usize = parse_field(parts[0], idx + 1, "node index")?;
        let j: usize = parse_field(parts[1], idx + 1, "node index")?;
        let w: f64 = parse_field(parts[2], idx + 1, "weight")?;
        max_node = max_node.max(i).max(j);
        edges.push((i, j, w));
    }
    if edges.is_empty() {
        return Err(Error::invalid("graph CSV contains no edges"));
    }
    Graph::new(max_node + 1, edges)
}

/// Write point coordinates as `node,x,y[,z]` rows.
pub fn write_coords_csv(path: &Path, coords: &[Vec<f64>]) -> Result<()> {
    let dim = coords.first().map(|c| c.len()).unwrap_or(0);
    let header = match dim {
        2 => "node,x,y",
        3 => "node,x,y,z",
        other => {
            return Err(Error::invalid(format!(
                "coordinates must be 2- or 3-dimensional, got {other}"
            )))
        }
    };
    let mut out = String::from(header);
    out.push('\n');
    for (node, point) in coords.iter().enumerate() {
        write!(out, "{node}").unwrap();
        for v in point {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a `node,x,y[,z]` coordinate CSV; nodes must cover `0..N` exactly.
pub fn read_coords_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let lines = read_lines(path)?;
    let dim = match lines.first().map(String::as_str) {
        Some("node,x,y") => 2,
        Some("node,x,y,z") => 3,
        _ => {
            return Err(Error::invalid(
                "coordinates CSV must start with header 'node,x,y' or 'node,x,y,z'",
            ))
        }
    };
    let n = lines.len() - 1;
    let mut coords = vec![None; n];
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != dim + 1 {
            return Err(Error::invalid(format!(
                "line {}: expected {} fields",
                idx + 1,
                dim + 1
            )));
        }
        let node: usize = parse_field(parts[0], idx + 1, "node index")?;
        if node >= n {
            return Err(Error::invalid(format!("line {}: node {node} out of range", idx + 1)));
        }
        let point: Result<Vec<f64>> = parts[1..]
            .iter()
            .map(|p| parse_field(p, idx + 1, "coordinate"))
            .collect();
        if coords[node].replace(point?).is_some() {
            return Err(Error::invalid(format!("node {node} appears twice")));
        }
    }
    coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::invalid(format!("node {i} missing from coordinates"))))
        .collect()
}

/// Write a time-vertex signal as `node,t1,...,tT` rows.
pub fn write_signal_csv(path: &Path, signal: &TimeVertexSignal) -> Result<()> {
    let (n, t_len) = signal.shape();
    let mut out = String::from("node");
    for t in 1..=t_len {
        write!(out, ",t{t}").unwrap();
    }
    out.push('\n');
    for node in 0..n {
        write!(out, "{node}").unwrap();
        for t in 0..t_len {
            write!(out, ",{}", signal[(node, t)]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a `node,t1,...,tT` signal CSV into an `N x T` matrix.
pub fn read_signal_csv(path: &Path) -> Result<TimeVertexSignal> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| Error::invalid("signal CSV is empty"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"node") || cols.len() < 2 {
        return Err(Error::invalid("signal CSV must start with header 'node,t1,...'"));
    }
    for (k, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("t{k}") {
            return Err(Error::invalid(format!("unexpected time column '{c}'")));
        }
    }
    let t_len = cols.len() - 1;
    let n = lines.len() - 1;
    if n == 0 {
        return Err(Error::invalid("signal CSV has no data rows"));
    }
    let mut rows = vec![None; n];
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != t_len + 1 {
            return Err(Error::invalid(format!(
                "line {}: expected {} fields",
                idx + 1,
                t_len + 1
            )));
        }
        let node: usize = parse_field(parts[0], idx + 1, "node index")?;
        if node >= n {
            return Err(Error::invalid(format!("line {}: node {node} out of range", idx + 1)));
        }
        let values: Result<Vec<f64>> = parts[1..]
            .iter()
            .map(|p| parse_field(p, idx + 1, "value"))
            .collect();
        let values = values?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("line {}: non-finite value", idx + 1)));
        }
        if rows[node].replace(values).is_some() {
            return Err(Error::invalid(format!("node {node} appears twice")));
        }
    }
    let mut m = DMatrix::zeros(n, t_len);
    for (node, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| Error::invalid(format!("node {node} missing from signal")))?;
        for (t, v) in row.into_iter().enumerate() {
            m[(node, t)] = v;
        }
    }
    Ok(m)
}

/// Write a JPSD as `lambda_index,omega_index,power` rows.
pub fn write_jpsd_csv(path: &Path, jpsd: &Jpsd) -> Result<()> {
    let (n, t_len) = jpsd.shape();
    let mut out = String::from("lambda_index,omega_index,power\n");
    for i in 0..n {
        for j in 0..t_len {
            writeln!(out, "{i},{j},{}", jpsd.values()[(i, j)]).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a `lambda_index,omega_index,power` JPSD CSV (every grid entry must
/// be present exactly once).
pub fn read_jpsd_csv(path: &Path) -> Result<Jpsd> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some("lambda_index,omega_index,power") {
        return Err(Error::invalid(
            "JPSD CSV must start with header 'lambda_index,omega_index,power'",
        ));
    }
    let mut entries = Vec::new();
    let mut max_i = 0usize;
    let mut max_j = 0usize;
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("line {}: expected 3 fields", idx + 1)));
        }
        let i: usize = parse_field(parts[0], idx + 1, "lambda index")?;
        let j: usize = parse_field(parts[1], idx + 1, "omega index")?;
        let p: f64 = parse_field(parts[2], idx + 1, "power")?;
        max_i = max_i.max(i);
        max_j = max_j.max(j);
        entries.push((i, j, p));
    }
    let (n, t_len) = (max_i + 1, max_j + 1);
    if entries.len() != n * t_len {
        return Err(Error::invalid(format!(
            "JPSD CSV has {} entries for a {n}x{t_len} grid",
            entries.len()
        )));
    }
    let mut seen = vec![false; n * t_len];
    let mut m = DMatrix::zeros(n, t_len);
    for (i, j, p) in entries {
        if seen[i * t_len + j] {
            return Err(Error::invalid(format!("duplicate JPSD entry ({i},{j})")));
        }
        seen[i * t_len + j] = true;
        m[(i, j)] = p;
    }
    Jpsd::new(m)
}

/// Write sparse observations as `t,node,value` rows (`t` is 1-based,
/// matching the `t1..tT` signal columns).
pub fn write_observations_csv(path: &Path, observations: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = String::from("t,node,value\n");
    for &(t, node, value) in observations {
        writeln!(out, "{},{node},{value}", t + 1).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a `t,node,value` observation CSV into 0-based `(t, node, value)`
/// triples. Absent pairs mean unobserved.
pub fn read_observations_csv(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some("t,node,value") {
        return Err(Error::invalid("observation CSV must start with header 't,node,value'"));
    }
    let mut out = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("line {}: expected 3 fields", idx + 1)));
        }
        let t: usize = parse_field(parts[0], idx + 1, "time")?;
        if t == 0 {
            return Err(Error::invalid(format!("line {}: time is 1-based", idx + 1)));
        }
        let node: usize = parse_field(parts[1], idx + 1, "node index")?;
        let value: f64 = parse_field(parts[2], idx + 1, "value")?;
        out.push((t - 1, node, value));
    }
    Ok(out)
}

/// FNV-1a over the dimensions and raw little-endian bytes of the entries;
/// guards a model file against being replayed on a different Laplacian.
pub fn laplacian_checksum(laplacian: &DMatrix<f64>) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |byte: u8| {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    };
    for b in (laplacian.nrows() as u64).to_le_bytes() {
        eat(b);
    }
    for v in laplacian.iter() {
        for b in v.to_le_bytes() {
            eat(b);
        }
    }
    format!("{hash:016x}")
}

const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    #[serde(rename = "type")]
    kind: String,
    n: usize,
    p: usize,
    q: usize,
    normalization: String,
    laplacian_checksum: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    ar_spectra: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ma_spectra: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    innovation_spectrum: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    innovation_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    restricted: Option<bool>,
}

/// Either fitted model, as stored in a model file.
#[derive(Debug, Clone)]
pub enum StoredModel {
    GVarma(GVarmaModel),
    GpVar(GpVarModel),
}

/// Save a G-VARMA model. The innovation covariance must be in spectral
/// form (every JWSS fit produces that); the checksum ties the file to the
/// Laplacian the spectra refer to.
pub fn save_gvarma_model(
    path: &Path,
    model: &GVarmaModel,
    basis: &SpectralBasis,
) -> Result<()> {
    let spectrum = match model.innovation() {
        InnovationCovariance::Spectral(s) => s.iter().cloned().collect(),
        InnovationCovariance::Dense(_) => {
            return Err(Error::invalid(
                "model files store spectral innovation covariances only",
            ))
        }
    };
    let doc = ModelDocument {
        version: MODEL_FILE_VERSION,
        kind: "gvarma".into(),
        n: model.n(),
        p: model.p(),
        q: model.q(),
        normalization: basis.normalization.as_str().into(),
        laplacian_checksum: laplacian_checksum(&basis.laplacian),
        ar_spectra: Some(model.ar_spectra().iter().map(|s| s.iter().cloned().collect()).collect()),
        ma_spectra: Some(model.ma_spectra().iter().map(|s| s.iter().cloned().collect()).collect()),
        innovation_spectrum: Some(spectrum),
        psi: None,
        innovation_power: None,
        restricted: None,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())?;
    Ok(())
}

/// Save a GP-VAR model with the checksum of its own Laplacian.
pub fn save_gpvar_model(path: &Path, model: &GpVarModel, normalization: Normalization) -> Result<()> {
    let doc = ModelDocument {
        version: MODEL_FILE_VERSION,
        kind: "gpvar".into(),
        n: model.n(),
        p: model.p(),
        q: 0,
        normalization: normalization.as_str().into(),
        laplacian_checksum: laplacian_checksum(model.laplacian()),
        ar_spectra: None,
        ma_spectra: None,
        innovation_spectrum: None,
        psi: Some(model.psi().to_vec()),
        innovation_power: Some(model.innovation_power()),
        restricted: Some(model.is_restricted()),
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())?;
    Ok(())
}

/// Load a model file against the basis it will be used with. The stored
/// checksum must match the basis Laplacian; a mismatch means the file was
/// fitted on a different graph or normalization.
pub fn load_model(path: &Path, basis: &SpectralBasis) -> Result<StoredModel> {
    let text = std::fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("malformed model file: {e}")))?;
    if doc.version != MODEL_FILE_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model file version {}",
            doc.version
        )));
    }
    let expected = laplacian_checksum(&basis.laplacian);
    if doc.laplacian_checksum != expected {
        return Err(Error::invalid(format!(
            "laplacian checksum mismatch: model was fitted on {}, graph gives {expected}",
            doc.laplacian_checksum
        )));
    }
    let norm: Normalization = doc.normalization.parse()?;
    if norm != basis.normalization {
        return Err(Error::invalid("model normalization does not match the basis"));
    }
    match doc.kind.as_str() {
        "gvarma" => {
            let ar = doc
                .ar_spectra
                .ok_or_else(|| Error::invalid("gvarma model file missing ar_spectra"))?;
            let ma = doc
                .ma_spectra
                .ok_or_else(|| Error::invalid("gvarma model file missing ma_spectra"))?;
            let innovation = doc
                .innovation_spectrum
                .ok_or_else(|| Error::invalid("gvarma model file missing innovation_spectrum"))?;
            let model = GVarmaModel::new(
                doc.n,
                ar.into_iter().map(DVector::from_vec).collect(),
                ma.into_iter().map(DVector::from_vec).collect(),
                InnovationCovariance::Spectral(DVector::from_vec(innovation)),
            )?;
            Ok(StoredModel::GVarma(model))
        }
        "gpvar" => {
            let psi = doc.psi.ok_or_else(|| Error::invalid("gpvar model file missing psi"))?;
            let power = doc
                .innovation_power
                .ok_or_else(|| Error::invalid("gpvar model file missing innovation_power"))?;
            let model = GpVarModel::new(
                psi,
                basis.laplacian.clone(),
                power,
                doc.restricted.unwrap_or(false),
            )?;
            Ok(StoredModel::GpVar(model))
        }
        other => Err(Error::invalid(format!("unknown model type '{other}'"))),
    }
}

/// Serialize a fit report as pretty JSON.
pub fn save_fit_report(path: &Path, report: &FitReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report).unwrap())?;
    Ok(())
}
