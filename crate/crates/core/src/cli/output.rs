use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observables::{ObservableSeries, SeriesValues, Spectrum};

pub const REAL_HEADER: &str = "time,mean,stderr";
pub const COMPLEX_HEADER: &str = "time,re_mean,im_mean,stderr";
pub const SPECTRUM_HEADER: &str = "omega,magnitude";

/// 17 significant digits; round-trips every finite f64.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(series: &ObservableSeries, path: &Path) -> Result<()> {
    let t = &series.times;
    let e = &series.stderr;
    match &series.mean {
        SeriesValues::Real(m) => write_lines(
            path,
            REAL_HEADER,
            (0..t.len()).map(|i| format!("{},{},{}", fmt(t[i]), fmt(m[i]), fmt(e[i]))),
        ),
        SeriesValues::Complex(m) => write_lines(
            path,
            COMPLEX_HEADER,
            (0..t.len()).map(|i| format!("{},{},{},{}", fmt(t[i]), fmt(m[i].re), fmt(m[i].im), fmt(e[i]))),
        ),
    }
}

fn bad(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("{}: {what}", path.display()),
    ))
}

/// Reads a file written by [`write_csv`]. The label is the file stem.
pub fn read_csv(path: &Path) -> Result<ObservableSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let complex = match header {
        REAL_HEADER => false,
        COMPLEX_HEADER => true,
        other => return Err(bad(path, format!("unexpected header '{other}'"))),
    };
    let width = if complex { 4 } else { 3 };
    let (mut times, mut re, mut im, mut err) = (vec![], vec![], vec![], vec![]);
    for (i, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(path, format!("row {}: {e}", i + 1)))?;
        if fields.len() != width {
            return Err(bad(path, format!("row {} has {} fields", i + 1, fields.len())));
        }
        times.push(fields[0]);
        re.push(fields[1]);
        if complex {
            im.push(fields[2]);
        }
        err.push(fields[width - 1]);
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(if complex {
        let z = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
        ObservableSeries::complex(label, times, z, err)
    } else {
        ObservableSeries::real(label, times, re, err)
    })
}

pub fn write_spectrum(spectrum: &Spectrum, path: &Path) -> Result<()> {
    write_lines(
        path,
        SPECTRUM_HEADER,
        spectrum
            .omega
            .iter()
            .zip(&spectrum.magnitude)
            .map(|(&w, &m)| format!("{},{}", fmt(w), fmt(m))),
    )
}
