//! Volume and field files: a short text header followed by raw
//! little-endian voxel data in x-fastest order.
//!
//! ```text
//! dbsim-volume 1
//! dims 100 100 100
//! spacing_mm 0.5 0.5 0.5
//! origin_mm -25 -25 -25
//! data u8 1000000
//! end_header
//! ```
//!
//! Field files use the `dbsim-field 1` magic, add `program`, `residual` and
//! `iterations` lines, and store `f64` potentials (volts per mA).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::conductor::FieldSolution;
use crate::error::{Error, Result};
use crate::volume::{Grid, Label, SigmaTable, TissueVolume};

const VOLUME_MAGIC: &str = "dbsim-volume 1";
const FIELD_MAGIC: &str = "dbsim-field 1";
const END: &str = "end_header";

fn grid_header(grid: &Grid) -> String {
    let [nx, ny, nz] = grid.dims;
    let [hx, hy, hz] = grid.spacing_mm;
    let [ox, oy, oz] = grid.origin_mm;
    format!("dims {nx} {ny} {nz}\nspacing_mm {hx} {hy} {hz}\norigin_mm {ox} {oy} {oz}\n")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::io(format!("file not found: {}", path.display()), e)
    } else {
        Error::io(format!("{}", path.display()), e)
    }
}

struct Header {
    fields: BTreeMap<String, String>,
}

impl Header {
    fn read<R: BufRead>(r: &mut R, magic: &str) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::io("reading header", e))?;
        if line.trim_end() != magic {
            return Err(Error::Format(format!("expected `{magic}`, found `{}`", line.trim_end())));
        }
        let mut fields = BTreeMap::new();
        loop {
            line.clear();
            if r.read_line(&mut line).map_err(|e| Error::io("reading header", e))? == 0 {
                return Err(Error::Format("header ends before `end_header`".into()));
            }
            let l = line.trim_end();
            if l == END {
                return Ok(Self { fields });
            }
            if l.starts_with('#') || l.is_empty() {
                continue;
            }
            let (k, v) = l.split_once(' ').ok_or_else(|| Error::Format(format!("bad header line `{l}`")))?;
            fields.insert(k.to_string(), v.to_string());
        }
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.fields.get(key).map(String::as_str).ok_or_else(|| Error::Format(format!("header lacks `{key}`")))
    }

    fn triple<T: std::str::FromStr>(&self, key: &str) -> Result<[T; 3]> {
        let parts: Vec<T> = self
            .get(key)?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad value in `{key}`"))))
            .collect::<Result<_>>()?;
        parts.try_into().map_err(|_| Error::Format(format!("`{key}` needs three values")))
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.triple("dims")?, self.triple("spacing_mm")?, self.triple("origin_mm")?)
    }

    fn data(&self, kind: &str, expected: usize) -> Result<()> {
        let d = self.get("data")?;
        if d != format!("{kind} {expected}") {
            return Err(Error::Format(format!("expected `data {kind} {expected}`, found `data {d}`")));
        }
        Ok(())
    }
}

pub fn encode_volume(volume: &TissueVolume) -> Vec<u8> {
    let grid = volume.grid();
    let mut out = format!("{VOLUME_MAGIC}\n{}", grid_header(grid)).into_bytes();
    let _ =
        writeln!(out, "# labels 0=background 1=gray 2=white 3=csf 4=encapsulation 5=lead-insulator 16+k=contact k+1");
    let _ = write!(out, "data u8 {}\n{END}\n", grid.len());
    out.extend(volume.labels().iter().map(|l| l.code()));
    out
}

pub fn decode_volume<R: Read>(reader: R, sigma: SigmaTable) -> Result<TissueVolume> {
    let mut r = BufReader::new(reader);
    let header = Header::read(&mut r, VOLUME_MAGIC)?;
    let grid = header.grid()?;
    header.data("u8", grid.len())?;
    let mut raw = Vec::with_capacity(grid.len());
    r.read_to_end(&mut raw).map_err(|e| Error::io("reading volume data", e))?;
    if raw.len() != grid.len() {
        return Err(Error::Format(format!("volume has {} bytes of data, expected {}", raw.len(), grid.len())));
    }
    let labels = raw
        .iter()
        .map(|&c| Label::from_code(c).ok_or_else(|| Error::Format(format!("unknown label code {c}"))))
        .collect::<Result<Vec<_>>>()?;
    TissueVolume::new(grid, labels, sigma)
}

pub fn write_volume(path: &Path, volume: &TissueVolume) -> Result<()> {
    std::fs::write(path, encode_volume(volume)).map_err(|e| io_err(path, e))
}

pub fn read_volume(path: &Path, sigma: SigmaTable) -> Result<TissueVolume> {
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    decode_volume(f, sigma)
}

pub fn encode_field(solution: &FieldSolution) -> Vec<u8> {
    let grid = &solution.grid;
    let mut out = format!("{FIELD_MAGIC}\n{}", grid_header(grid)).into_bytes();
    let _ = write!(
        out,
        "program {}\nresidual {:e}\niterations {}\ndata f64le {}\n{END}\n",
        solution.program,
        solution.residual,
        solution.iterations,
        grid.len()
    );
    out.reserve(8 * grid.len());
    for v in &solution.potential {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field<R: Read>(reader: R) -> Result<FieldSolution> {
    let mut r = BufReader::new(reader);
    let header = Header::read(&mut r, FIELD_MAGIC)?;
    let grid = header.grid()?;
    header.data("f64le", grid.len())?;
    let program = header.get("program")?.parse()?;
    let residual = header.get("residual")?.parse().map_err(|_| Error::Format("bad residual".into()))?;
    let iterations = header.get("iterations")?.parse().map_err(|_| Error::Format("bad iteration count".into()))?;
    let mut raw = Vec::with_capacity(8 * grid.len());
    r.read_to_end(&mut raw).map_err(|e| Error::io("reading field data", e))?;
    if raw.len() != 8 * grid.len() {
        return Err(Error::Format(format!("field has {} bytes of data, expected {}", raw.len(), 8 * grid.len())));
    }
    let potential = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(FieldSolution { grid, potential, residual, iterations, program })
}

pub fn write_field(path: &Path, solution: &FieldSolution) -> Result<()> {
    std::fs::write(path, encode_field(solution)).map_err(|e| io_err(path, e))
}

pub fn read_field(path: &Path) -> Result<FieldSolution> {
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    decode_field(f)
}
