//! Field snapshot files.
//!
//! A snapshot is a text header of `key = value` lines closed by `end_header`,
//! followed by the body. Header keys: `kind` (`velocity` or `scalar`), `role`,
//! `nx`, `ny`, `lx`, `ly`, `hx`, `hy`, `time`, `fields` (number of stacked
//! fields), `values_per_field`, `format` (`csv` or `binary-f64-le`).
//!
//! Binary bodies hold IEEE-754 doubles in little-endian byte order, in storage
//! order: for velocity the u block (index `i*ny + j`, `i = 0..=nx`) then the
//! v block (index `i*(ny+1) + j`); for scalars `i*ny + j`. CSV bodies have one
//! row per value, `field,component,i,j,x,y,value`, printed with 17 significant
//! digits so that a CSV round trip is exact too.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, StaggeredGrid, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Binary,
}

impl SnapshotFormat {
    fn tag(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::Binary => "binary-f64-le",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(SnapshotFormat::Csv),
            "binary" | "binary-f64-le" => Some(SnapshotFormat::Binary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub kind: FieldKind,
    pub role: String,
    pub grid: StaggeredGrid,
    pub time: f64,
    pub fields: usize,
    pub format: SnapshotFormat,
}

fn values_per_field(kind: FieldKind, g: &StaggeredGrid) -> usize {
    match kind {
        FieldKind::Velocity => (g.nx + 1) * g.ny + g.nx * (g.ny + 1),
        FieldKind::Scalar => g.nx * g.ny,
    }
}

/// (component, i, j, x, y) for every storage slot.
fn slot_labels(kind: FieldKind, g: &StaggeredGrid) -> Vec<(&'static str, usize, usize, f64, f64)> {
    let mut out = Vec::with_capacity(values_per_field(kind, g));
    match kind {
        FieldKind::Velocity => {
            for i in 0..=g.nx {
                for j in 0..g.ny {
                    let (x, y) = g.u_position(i, j);
                    out.push(("u", i, j, x, y));
                }
            }
            for i in 0..g.nx {
                for j in 0..=g.ny {
                    let (x, y) = g.v_position(i, j);
                    out.push(("v", i, j, x, y));
                }
            }
        }
        FieldKind::Scalar => {
            for i in 0..g.nx {
                for j in 0..g.ny {
                    let (x, y) = g.cell_center(i, j);
                    out.push(("p", i, j, x, y));
                }
            }
        }
    }
    out
}

fn write_raw(path: &Path, header: &SnapshotHeader, data: &[&[f64]]) -> Result<()> {
    let g = header.grid;
    let mut w = BufWriter::new(fs::File::create(path)?);
    let kind = match header.kind {
        FieldKind::Velocity => "velocity",
        FieldKind::Scalar => "scalar",
    };
    writeln!(w, "kind = {kind}")?;
    writeln!(w, "role = {}", header.role)?;
    writeln!(w, "nx = {}", g.nx)?;
    writeln!(w, "ny = {}", g.ny)?;
    writeln!(w, "lx = {:.16e}", g.lx)?;
    writeln!(w, "ly = {:.16e}", g.ly)?;
    writeln!(w, "hx = {:.16e}", g.hx())?;
    writeln!(w, "hy = {:.16e}", g.hy())?;
    writeln!(w, "time = {:.16e}", header.time)?;
    writeln!(w, "fields = {}", data.len())?;
    writeln!(
        w,
        "values_per_field = {}",
        values_per_field(header.kind, &g)
    )?;
    writeln!(w, "format = {}", header.format.tag())?;
    writeln!(w, "end_header")?;
    match header.format {
        SnapshotFormat::Binary => {
            for field in data {
                for v in field.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        SnapshotFormat::Csv => {
            writeln!(w, "field,component,i,j,x,y,value")?;
            let labels = slot_labels(header.kind, &g);
            for (k, field) in data.iter().enumerate() {
                for ((c, i, j, x, y), v) in labels.iter().zip(field.iter()) {
                    writeln!(w, "{k},{c},{i},{j},{x:.16e},{y:.16e},{v:.16e}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn read_raw(path: &Path) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut keys = std::collections::BTreeMap::new();
    let mut line_no = 0;
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(bad(line_no, "snapshot header is not terminated"));
        }
        line_no += 1;
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected `key = value`, got `{line}`")))?;
        keys.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
    }
    let get = |k: &str| -> Result<&(usize, String)> {
        keys.get(k)
            .ok_or_else(|| bad(line_no, format!("snapshot header lacks `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        let (l, v) = get(k)?;
        v.parse()
            .map_err(|_| bad(*l, format!("`{k}` is not a number")))
    };
    let int = |k: &str| -> Result<usize> {
        let (l, v) = get(k)?;
        v.parse()
            .map_err(|_| bad(*l, format!("`{k}` is not an integer")))
    };
    let kind = match get("kind")?.1.as_str() {
        "velocity" => FieldKind::Velocity,
        "scalar" => FieldKind::Scalar,
        other => return Err(bad(get("kind")?.0, format!("unknown field kind `{other}`"))),
    };
    let format = SnapshotFormat::parse(&get("format")?.1)
        .ok_or_else(|| bad(keys["format"].0, "unknown snapshot format"))?;
    let grid = StaggeredGrid::new(num("lx")?, num("ly")?, int("nx")?, int("ny")?)?;
    let fields = int("fields")?;
    let per = values_per_field(kind, &grid);
    if int("values_per_field")? != per {
        return Err(bad(
            get("values_per_field")?.0,
            "values_per_field does not match the grid",
        ));
    }
    let header = SnapshotHeader {
        kind,
        role: get("role")?.1.clone(),
        grid,
        time: num("time")?,
        fields,
        format,
    };
    let mut data = Vec::with_capacity(fields);
    match format {
        SnapshotFormat::Binary => {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() != fields * per * 8 {
                return Err(Error::Io(format!(
                    "snapshot body has {} bytes, expected {}",
                    bytes.len(),
                    fields * per * 8
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            data.extend(values.chunks(per).map(<[f64]>::to_vec));
        }
        SnapshotFormat::Csv => {
            let mut values = Vec::with_capacity(fields * per);
            for (k, line) in r.lines().enumerate().skip(1) {
                let line = line?;
                let v = line
                    .rsplit(',')
                    .next()
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(line_no + 1 + k, "bad CSV row"))?;
                values.push(v);
            }
            if values.len() != fields * per {
                return Err(Error::Io(format!(
                    "snapshot has {} values, expected {}",
                    values.len(),
                    fields * per
                )));
            }
            data.extend(values.chunks(per).map(<[f64]>::to_vec));
        }
    }
    Ok((header, data))
}

pub fn write_velocity(
    path: &Path,
    w: &VelocityField,
    role: &str,
    time: f64,
    format: SnapshotFormat,
) -> Result<()> {
    write_velocity_series(path, std::slice::from_ref(w), role, time, format)
}

/// Several velocity fields on one grid stacked in a single file.
pub fn write_velocity_series(
    path: &Path,
    fields: &[VelocityField],
    role: &str,
    time: f64,
    format: SnapshotFormat,
) -> Result<()> {
    let grid = match fields.first() {
        Some(f) => *f.grid(),
        None => {
            return Err(Error::Argument(
                "cannot write an empty velocity series".into(),
            ))
        }
    };
    let header = SnapshotHeader {
        kind: FieldKind::Velocity,
        role: role.to_string(),
        grid,
        time,
        fields: fields.len(),
        format,
    };
    let data: Vec<&[f64]> = fields.iter().map(VelocityField::as_slice).collect();
    write_raw(path, &header, &data)
}

pub fn write_scalar(
    path: &Path,
    q: &ScalarField,
    role: &str,
    time: f64,
    format: SnapshotFormat,
) -> Result<()> {
    let header = SnapshotHeader {
        kind: FieldKind::Scalar,
        role: role.to_string(),
        grid: *q.grid(),
        time,
        fields: 1,
        format,
    };
    write_raw(path, &header, &[q.as_slice()])
}

pub fn read_velocity_series(path: &Path) -> Result<(SnapshotHeader, Vec<VelocityField>)> {
    let (header, data) = read_raw(path)?;
    if header.kind != FieldKind::Velocity {
        return Err(Error::Io(format!(
            "{} does not hold a velocity field",
            path.display()
        )));
    }
    let fields = data
        .into_iter()
        .map(|d| VelocityField::from_raw(header.grid, d))
        .collect::<Result<_>>()?;
    Ok((header, fields))
}

pub fn read_velocity(path: &Path) -> Result<(SnapshotHeader, VelocityField)> {
    let (h, mut f) = read_velocity_series(path)?;
    if f.len() != 1 {
        return Err(Error::Io(format!("expected one field, found {}", f.len())));
    }
    Ok((h, f.pop().expect("one field")))
}

pub fn read_scalar(path: &Path) -> Result<(SnapshotHeader, ScalarField)> {
    let (header, mut data) = read_raw(path)?;
    if header.kind != FieldKind::Scalar || data.len() != 1 {
        return Err(Error::Io(format!(
            "{} does not hold one scalar field",
            path.display()
        )));
    }
    let q = ScalarField::from_raw(header.grid, data.pop().expect("one field"))?;
    Ok((header, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_both_formats() {
        let dir = std::env::temp_dir().join(format!("viscomem-snap-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = StaggeredGrid::new(1.0, 2.0, 5, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = VelocityField::random(g, &mut rng);
        let q = ScalarField::random(g, &mut rng);
        for fmt in [SnapshotFormat::Csv, SnapshotFormat::Binary] {
            let pv = dir.join(format!("v-{fmt:?}"));
            write_velocity(&pv, &w, "velocity", 0.25, fmt).unwrap();
            let (h, back) = read_velocity(&pv).unwrap();
            assert_eq!(back, w);
            assert_eq!((h.time, h.format, h.grid), (0.25, fmt, g));
            let pq = dir.join(format!("q-{fmt:?}"));
            write_scalar(&pq, &q, "pressure", 1.0, fmt).unwrap();
            assert_eq!(read_scalar(&pq).unwrap().1, q);
            assert!(read_scalar(&pv).is_err());
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
