//! On-disk artifacts. Every file carries the config hash, and every reader
//! takes the hash it expects and refuses anything else.
//!
//! * tensors: `name.bin` (magic, hash, shape, little-endian f64) + `name.json` sidecar
//! * traces: CSV `node_id,t,value`
//! * coefficients: CSV `j,n1,n2,n3,eps,value` with `eps` the 3-bit type code
//! * partitions: JSON summary + node tensor `(x, y, z, weight, detector)`
//! * measurements: tensor `[m, nt]` + JSON manifest
//! * reports: JSON objects with a `config_hash` field; solver logs as JSONL
//!
//! CSV files start with a `# config_hash=<hex>` comment line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::digest::{hash_f64s, sha256_hex};
use crate::error::{PatError, Result};
use crate::geom::Vec3;
use crate::l1solve::CpLogEntry;
use crate::sensing::{MeasurementSet, SensingMode, TimeSeries};
use crate::spheregeom::DetectorPartition;
use crate::wavefield::{ScalarField3, TraceTable};
use crate::wavelet3d::{AtomType, CoeffVec, DictIndex, Dictionary};

const MAGIC: &[u8; 8] = b"PATCS\0t1";

fn mismatch(what: &Path, found: &str, want: &str) -> PatError {
    PatError::ArtifactMismatch(format!("{} has config hash {found}, expected {want}", what.display()))
}

fn check_hash(what: &Path, found: &str, want: Option<&str>) -> Result<()> {
    match want {
        Some(w) if w != found => Err(mismatch(what, found, w)),
        _ => Ok(()),
    }
}

pub fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// JSON sidecar of a binary tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub config_hash: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Grid spacing and first node, when the tensor samples a field.
    pub spacing: Option<f64>,
    pub origin: Option<Vec3>,
    pub data_sha256: String,
}

/// Writes `stem.bin` and `stem.json`.
pub fn write_tensor(stem: &Path, values: &[f64], shape: &[usize], spacing: Option<f64>, origin: Option<Vec3>, hash: &str) -> Result<()> {
    if shape.iter().product::<usize>() != values.len() {
        return Err(PatError::SizeMismatch("tensor shape does not match the data".into()));
    }
    let mut w = BufWriter::new(File::create(with_ext(stem, "bin"))?);
    w.write_all(MAGIC)?;
    w.write_all(hash.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let meta = TensorMeta {
        config_hash: hash.into(),
        shape: shape.to_vec(),
        dtype: "f64-le".into(),
        spacing,
        origin,
        data_sha256: hash_f64s(values),
    };
    write_json(&with_ext(stem, "json"), &meta)
}

/// Reads `stem.bin`, checking it against its sidecar and the expected hash.
pub fn read_tensor(stem: &Path, want: Option<&str>) -> Result<(Vec<f64>, TensorMeta)> {
    let meta: TensorMeta = read_json(&with_ext(stem, "json"))?;
    check_hash(stem, &meta.config_hash, want)?;
    let bin = with_ext(stem, "bin");
    let mut r = BufReader::new(File::open(&bin)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PatError::ArtifactMismatch(format!("{} is not a tensor file", bin.display())));
    }
    let mut h = vec![0u8; meta.config_hash.len()];
    r.read_exact(&mut h)?;
    let found = String::from_utf8_lossy(&h).into_owned();
    if found != meta.config_hash {
        return Err(mismatch(&bin, &found, &meta.config_hash));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let ndim = u32::from_le_bytes(b4) as usize;
    let mut shape = Vec::with_capacity(ndim);
    let mut b8 = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut b8)?;
        shape.push(u64::from_le_bytes(b8) as usize);
    }
    if shape != meta.shape {
        return Err(PatError::SizeMismatch(format!("{} shape differs from its sidecar", bin.display())));
    }
    let n: usize = shape.iter().product();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    if hash_f64s(&values) != meta.data_sha256 {
        return Err(PatError::ArtifactMismatch(format!("{} data checksum mismatch", bin.display())));
    }
    Ok((values, meta))
}

pub fn write_field(stem: &Path, u: &ScalarField3, hash: &str) -> Result<()> {
    let g = &u.grid;
    write_tensor(stem, &u.values, &g.shape, Some(g.spacing), Some(g.origin), hash)
}

pub fn read_field(stem: &Path, want: Option<&str>) -> Result<ScalarField3> {
    let (values, meta) = read_tensor(stem, want)?;
    let (Some(spacing), Some(origin), &[a, b, c]) = (meta.spacing, meta.origin, &meta.shape[..]) else {
        return Err(PatError::SizeMismatch("a field needs a 3D shape, spacing and origin".into()));
    };
    let grid = crate::wavefield::Grid3::raster(origin, spacing, [a, b, c]);
    Ok(ScalarField3 { grid, values })
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Any JSON body tagged with the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_stamped<T: Serialize>(path: &Path, body: &T, hash: &str) -> Result<()> {
    write_json(path, &Stamped { config_hash: hash.into(), body })
}

pub fn read_stamped<T: DeserializeOwned>(path: &Path, want: Option<&str>) -> Result<T> {
    let s: Stamped<T> = read_json(path)?;
    check_hash(path, &s.config_hash, want)?;
    Ok(s.body)
}

fn csv_writer(path: &Path, hash: &str, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config_hash={hash}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    Ok(w)
}

/// Reads a CSV written by this module: hash line, header, records.
fn csv_records(path: &Path, want: Option<&str>) -> Result<Vec<csv::StringRecord>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let found = first.trim().strip_prefix("# config_hash=").ok_or_else(|| {
        PatError::ArtifactMismatch(format!("{} lacks a config hash line", path.display()))
    })?;
    check_hash(path, found, want)?;
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.records().collect::<std::result::Result<_, _>>()?)
}

/// One row per node and time sample.
pub fn write_trace_csv(path: &Path, table: &TraceTable, hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &["node_id", "t", "value"])?;
    let times = table.time.times();
    for i in 0..table.nodes.len() {
        for (t, v) in times.iter().zip(table.row(i)) {
            w.write_record(&[i.to_string(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-detector series `(detector, t, value)` of a measurement set.
pub fn write_series_csv(path: &Path, ids: &[usize], series: &[TimeSeries], hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &["detector", "t", "value"])?;
    for (i, s) in ids.iter().zip(series) {
        for (k, v) in s.values.iter().enumerate() {
            w.write_record(&[i.to_string(), (k as f64 * s.dt).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Nonzero coefficients only.
pub fn write_coeff_csv(path: &Path, x: &CoeffVec, dict: &Dictionary, hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &["j", "n1", "n2", "n3", "eps", "value"])?;
    for (idx, v) in x.entries(dict).filter(|(_, v)| *v != 0.0) {
        w.write_record(&[
            idx.j.to_string(),
            idx.n[0].to_string(),
            idx.n[1].to_string(),
            idx.n[2].to_string(),
            idx.eps.code().to_string(),
            v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coeff_csv(path: &Path, dict: &Dictionary, max_scale: u32, want: Option<&str>) -> Result<CoeffVec> {
    let mut x = CoeffVec::zeros(dict, max_scale);
    let bad = |m: &str| PatError::InvalidConfig(format!("{}: {m}", path.display()));
    for rec in csv_records(path, want)? {
        let f = |k: usize| rec.get(k).ok_or_else(|| bad("short record"));
        let int = |k: usize| f(k)?.parse::<i64>().map_err(|_| bad("bad integer"));
        let j = int(0)? as u32;
        let eps = AtomType::from_code(int(4)? as u8).ok_or_else(|| bad("bad eps code"))?;
        let idx = DictIndex::new(j, [int(1)?, int(2)?, int(3)?], eps)?;
        let v: f64 = f(5)?.parse().map_err(|_| bad("bad value"))?;
        let a = dict.position(&idx).filter(|&a| a < x.len()).ok_or_else(|| bad("index outside the dictionary"))?;
        x.values[a] = v;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRow {
    pub id: usize,
    pub center: Vec3,
    pub area: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub n: usize,
    pub radius: f64,
    pub c_ecc: f64,
    pub c_u: f64,
    pub max_diameter: f64,
    /// `mu 2^-j0` when the partition was matched to a scale.
    pub target_diameter: Option<f64>,
    pub key: String,
    pub detectors: Vec<DetectorRow>,
}

/// `stem.json` summary plus the `stem_nodes` tensor.
pub fn write_partition(stem: &Path, p: &DetectorPartition, target: Option<f64>, hash: &str) -> Result<PartitionSummary> {
    let s = PartitionSummary {
        n: p.len(),
        radius: p.radius,
        c_ecc: p.c_ecc,
        c_u: p.c_u,
        max_diameter: p.max_diameter(),
        target_diameter: target,
        key: crate::sensing::cache::partition_key(p),
        detectors: p
            .detectors
            .iter()
            .map(|d| DetectorRow { id: d.id, center: d.center, area: d.area, diameter: d.diameter })
            .collect(),
    };
    write_stamped(&with_ext(stem, "json"), &s, hash)?;
    let mut flat = Vec::new();
    for d in &p.detectors {
        for (x, w) in &d.quad_nodes {
            flat.extend_from_slice(&[x[0], x[1], x[2], *w, d.id as f64]);
        }
    }
    let nodes_stem = stem.with_file_name(format!("{}_nodes", stem.file_name().unwrap().to_string_lossy()));
    write_tensor(&nodes_stem, &flat, &[flat.len() / 5, 5], None, None, hash)?;
    Ok(s)
}

/// JSON manifest of a measurement archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementManifest {
    pub cache_key: String,
    pub sampled_ids: Vec<usize>,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub sensing_mode: SensingMode,
    pub matrix_tag: Option<String>,
    pub dt: f64,
    pub nt: usize,
}

/// `stem.json` manifest + `stem_data` tensor `[m, nt]`.
pub fn write_measurements(stem: &Path, m: &MeasurementSet, hash: &str) -> Result<()> {
    let nt = m.series.first().map_or(0, |s| s.values.len());
    let dt = m.series.first().map_or(0.0, |s| s.dt);
    let man = MeasurementManifest {
        cache_key: m.cache_key.clone(),
        sampled_ids: m.sampled_ids.clone(),
        noise_level: m.noise_level,
        noise_seed: m.noise_seed,
        sensing_mode: m.sensing_mode,
        matrix_tag: m.matrix_tag.clone(),
        dt,
        nt,
    };
    write_stamped(&with_ext(stem, "json"), &man, hash)?;
    let flat: Vec<f64> = m.series.iter().flat_map(|s| s.values.iter().copied()).collect();
    write_tensor(&data_stem(stem), &flat, &[m.m(), nt], None, None, hash)
}

fn data_stem(stem: &Path) -> PathBuf {
    stem.with_file_name(format!("{}_data", stem.file_name().unwrap().to_string_lossy()))
}

pub fn read_measurements(stem: &Path, want: Option<&str>) -> Result<MeasurementSet> {
    let man: MeasurementManifest = read_stamped(&with_ext(stem, "json"), want)?;
    let (flat, meta) = read_tensor(&data_stem(stem), want)?;
    if meta.shape != [man.sampled_ids.len(), man.nt] {
        return Err(PatError::SizeMismatch("measurement data do not match the manifest".into()));
    }
    let series = if man.nt == 0 {
        vec![TimeSeries { values: vec![], dt: man.dt }; man.sampled_ids.len()]
    } else {
        flat.chunks(man.nt).map(|c| TimeSeries { values: c.to_vec(), dt: man.dt }).collect()
    };
    Ok(MeasurementSet {
        sampled_ids: man.sampled_ids,
        series,
        noise_level: man.noise_level,
        noise_seed: man.noise_seed,
        sensing_mode: man.sensing_mode,
        matrix_tag: man.matrix_tag,
        cache_key: man.cache_key,
    })
}

/// One JSON object per log entry.
pub fn write_solver_log(path: &Path, log: &[CpLogEntry], hash: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in log {
        serde_json::to_writer(&mut w, &Stamped { config_hash: hash.into(), body: e })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Plain CSV table with the hash line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>], hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path, want: Option<&str>) -> Result<Vec<Vec<f64>>> {
    csv_records(path, want)?
        .iter()
        .map(|r| {
            r.iter()
                .map(|s| s.parse().map_err(|_| PatError::InvalidConfig(format!("{}: bad number", path.display()))))
                .collect()
        })
        .collect()
}

/// sha256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
