//! File formats: CSV grids and band tables, JSON objects, and PGM heatmaps.
//!
//! CSV uses LF line endings and writes every float as `{:.16e}`, which
//! round-trips an `f64` exactly. Grids include explicit zero rows so the
//! shape is fixed by the radius.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::localization::{DecaySeries, LocalizationReport};
use crate::spectral::BandRow;
use crate::walk::{ProbabilityGrid, Spinor, DIM};

pub const GRID_HEADER: &str = "n1,n2,p";
pub const BANDS_HEADER: &str = "k1,k2,theta1,theta2,theta3,theta4,theta5";
pub const DECAY_HEADER: &str = "t,magnitude";

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_grid_csv_to<W: Write>(grid: &ProbabilityGrid, mut out: W) -> Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    for ((n1, n2), p) in grid.iter() {
        writeln!(out, "{n1},{n2},{}", sci(p))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_grid_csv(grid: &ProbabilityGrid, path: &Path) -> Result<()> {
    write_grid_csv_to(grid, create(path)?)
}

/// Parses the output of [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> Result<ProbabilityGrid> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != GRID_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header {GRID_HEADER:?}, found {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let bad = |reason: String| Error::Parse {
            line: i + 2,
            reason,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        let n1: i64 = fields[0].parse().map_err(|e| bad(format!("n1: {e}")))?;
        let n2: i64 = fields[1].parse().map_err(|e| bad(format!("n2: {e}")))?;
        let p: f64 = fields[2].parse().map_err(|e| bad(format!("p: {e}")))?;
        rows.push(((n1, n2), p));
    }
    let side = (rows.len() as f64).sqrt().round() as usize;
    if side * side != rows.len() || side.is_multiple_of(2) {
        return Err(Error::Parse {
            line: rows.len() + 1,
            reason: format!("{} rows do not form an odd square grid", rows.len()),
        });
    }
    let radius = side / 2;
    for (expected, ((n1, n2), _)) in crate::walk::sites(radius).zip(&rows) {
        if expected != (*n1, *n2) {
            return Err(Error::Parse {
                line: 0,
                reason: format!("site ({n1},{n2}) out of order, expected {expected:?}"),
            });
        }
    }
    ProbabilityGrid::from_values(radius, rows.into_iter().map(|(_, p)| p).collect())
}

pub fn write_bands_csv_to<W: Write>(rows: &[BandRow], mut out: W) -> Result<()> {
    writeln!(out, "{BANDS_HEADER}")?;
    for row in rows {
        let mut phases = row.phases;
        phases.sort_by(f64::total_cmp);
        let cols: Vec<String> = [row.k.k1, row.k.k2]
            .into_iter()
            .chain(phases)
            .map(sci)
            .collect();
        writeln!(out, "{}", cols.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bands_csv(rows: &[BandRow], path: &Path) -> Result<()> {
    write_bands_csv_to(rows, create(path)?)
}

pub fn write_decay_csv_to<W: Write>(series: &DecaySeries, mut out: W) -> Result<()> {
    writeln!(out, "{DECAY_HEADER}")?;
    for (t, m) in series.times.iter().zip(&series.magnitudes) {
        writeln!(out, "{t},{}", sci(*m))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_decay_csv(series: &DecaySeries, path: &Path) -> Result<()> {
    write_decay_csv_to(series, create(path)?)
}

/// Binary PGM (P5), 16-bit big-endian samples scaled so the largest value
/// maps to 65535. Rows run from the largest `n2` at the top to the smallest,
/// columns from the smallest `n1` on the left.
pub fn write_heatmap_pgm_to<W: Write>(grid: &ProbabilityGrid, mut out: W) -> Result<()> {
    let max = grid.max_value();
    if !(max > 0.0) {
        return Err(Error::DegenerateImage);
    }
    let side = grid.side();
    let r = grid.radius() as i64;
    write!(out, "P5\n{side} {side}\n65535\n")?;
    let mut pixels = Vec::with_capacity(2 * side * side);
    for n2 in (-r..=r).rev() {
        for n1 in -r..=r {
            let level = (65535.0 * grid.get(n1, n2) / max).round() as u16;
            pixels.extend_from_slice(&level.to_be_bytes());
        }
    }
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}

pub fn write_heatmap_pgm(grid: &ProbabilityGrid, path: &Path) -> Result<()> {
    write_heatmap_pgm_to(grid, create(path)?)
}

#[derive(Serialize)]
struct GridJson<'a> {
    radius: usize,
    mass: f64,
    /// Row-major, `n1` major, both ascending.
    values: &'a [f64],
}

pub fn write_grid_json_to<W: Write>(grid: &ProbabilityGrid, out: W) -> Result<()> {
    write_json(
        &GridJson {
            radius: grid.radius(),
            mass: grid.mass(),
            values: grid.values(),
        },
        out,
    )
}

pub fn write_bands_json_to<W: Write>(rows: &[BandRow], out: W) -> Result<()> {
    write_json(&rows, out)
}

pub fn write_decay_json_to<W: Write>(series: &DecaySeries, out: W) -> Result<()> {
    write_json(series, out)
}

/// Flat object keyed by the report field names.
pub fn write_report_json_to<W: Write>(report: &LocalizationReport, out: W) -> Result<()> {
    write_json(report, out)
}

#[derive(Serialize)]
struct SearchJson {
    /// `[re, im]` per chirality.
    amplitudes: [[f64; 2]; DIM],
    limit_mass: f64,
}

/// Minimizer of the limiting mass and its value.
pub fn write_search_json_to<W: Write>(spinor: &Spinor, limit_mass: f64, out: W) -> Result<()> {
    write_json(
        &SearchJson {
            amplitudes: spinor.0.map(|z| [z.re, z.im]),
            limit_mass,
        },
        out,
    )
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
