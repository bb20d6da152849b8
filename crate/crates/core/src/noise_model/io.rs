//! Dataset CSV and mixture JSON files.
//!
//! Dataset layout:
//!
//! ```text
//! # seed=42
//! # lambda=2
//! # mu_z2=0
//! # sigma2_z2=1
//! # generator=qnoise-chacha8/1
//! x0,x1
//! 1.2345678901234567e0,-3.0000000000000000e-1
//! ```
//!
//! Metadata comments are optional on input; a file without the full set
//! loads with `meta == None`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Component, Dataset, DatasetMeta, HybridNoiseSpec, TruncatedMixture};
use crate::error::{Error, Result};
use crate::numkit::SquareMatrix;
use crate::textio::{comment_pair, format_f64};

pub fn write_dataset<W: Write>(mut w: W, data: &Dataset) -> std::io::Result<()> {
    if let Some(meta) = data.meta() {
        writeln!(w, "# seed={}", meta.seed)?;
        writeln!(w, "# lambda={}", format_f64(meta.spec.lambda))?;
        writeln!(w, "# mu_z2={}", format_f64(meta.spec.mu_z2))?;
        writeln!(w, "# sigma2_z2={}", format_f64(meta.spec.sigma2_z2))?;
        writeln!(w, "# generator={}", meta.generator)?;
    }
    let header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in data.rows() {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_f64(*v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(BufWriter::new(file), data).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut pairs: HashMap<String, String> = HashMap::new();
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(d) = dim else {
            if line.starts_with('#') {
                if let Some((k, v)) = comment_pair(line) {
                    pairs.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            dim = Some(parse_header(line, lineno)?);
            continue;
        };
        let mut cells = 0;
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric cell {cell:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite cell {cell:?}")));
            }
            values.push(v);
            cells += 1;
        }
        if cells != d {
            return Err(Error::parse(lineno, format!("ragged row: {cells} cells, header has {d}")));
        }
    }

    let Some(dim) = dim else {
        return Err(Error::parse(last_line.max(1), "missing header"));
    };
    if values.is_empty() {
        return Err(Error::parse(last_line.max(1), "no rows"));
    }
    let meta = meta_from_pairs(&pairs, dim);
    Dataset::new(dim, values, meta)
}

fn parse_header(line: &str, lineno: usize) -> Result<usize> {
    let names: Vec<&str> = line.split(',').map(str::trim).collect();
    for (i, name) in names.iter().enumerate() {
        if *name != format!("x{i}") {
            return Err(Error::parse(
                lineno,
                format!("malformed header: expected x{i}, found {name:?}"),
            ));
        }
    }
    Ok(names.len())
}

fn meta_from_pairs(pairs: &HashMap<String, String>, dim: usize) -> Option<DatasetMeta> {
    let num = |k: &str| pairs.get(k)?.parse::<f64>().ok();
    let spec = HybridNoiseSpec::new(num("lambda")?, num("mu_z2")?, num("sigma2_z2")?, dim).ok()?;
    Some(DatasetMeta {
        seed: pairs.get("seed")?.parse().ok()?,
        spec,
        generator: pairs.get("generator").cloned().unwrap_or_default(),
    })
}

#[derive(Serialize, Deserialize)]
struct MixtureFile {
    lambda: f64,
    dim: usize,
    coverage: f64,
    components: Vec<ComponentFile>,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    k: u64,
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<&TruncatedMixture> for MixtureFile {
    fn from(m: &TruncatedMixture) -> Self {
        Self {
            lambda: m.lambda(),
            dim: m.dim(),
            coverage: m.coverage(),
            components: m
                .components()
                .iter()
                .map(|c| ComponentFile {
                    k: c.k,
                    weight: c.weight,
                    mean: c.mean.clone(),
                    cov: c.cov.rows(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MixtureFile> for TruncatedMixture {
    type Error = Error;

    fn try_from(f: MixtureFile) -> Result<Self> {
        let components = f
            .components
            .into_iter()
            .map(|c| {
                Ok(Component {
                    k: c.k,
                    weight: c.weight,
                    mean: c.mean,
                    cov: SquareMatrix::from_rows(&c.cov)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = TruncatedMixture::new(f.lambda, components)?;
        if m.dim() != f.dim {
            return Err(Error::DimensionMismatch {
                expected: f.dim,
                found: m.dim(),
            });
        }
        Ok(m)
    }
}

impl Serialize for TruncatedMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MixtureFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncatedMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = MixtureFile::deserialize(d)?;
        TruncatedMixture::try_from(file).map_err(serde::de::Error::custom)
    }
}

pub fn save_mixture(path: impl AsRef<Path>, mixture: &TruncatedMixture) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(mixture)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_mixture(path: impl AsRef<Path>) -> Result<TruncatedMixture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
