//! CSV readers and writers for spectra, filters, SSFs, calibration data,
//! patch statistics and filter-search rankings.

use std::fmt::Write as _;
use std::path::Path;

use crate::calib::CalibrationSample;
use crate::error::{CoreError, Result};
use crate::io::grid_from_wavelengths;
use crate::spectrum::{FilterTransmittance, RadianceSpectrum};
use crate::system::CameraSSF;
use crate::uncertainty::{FilterLibrary, UncertaintyReport};

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CoreError::io(path.display().to_string(), e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CoreError {
    CoreError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Data rows of a CSV file with their 1-based line numbers; `#` comments
/// and blank lines are skipped; the header row is validated.
fn csv_rows<'a>(
    path: &Path,
    contents: &'a str,
    header: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in contents.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != header {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected header '{header}', got '{line}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        rows.push((line_no, line.split(',').map(str::trim).collect()));
    }
    if !header_seen {
        return Err(parse_err(path, 1, format!("missing header '{header}'")));
    }
    Ok(rows)
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("invalid {what}: '{field}'")))
}

fn expect_fields(path: &Path, line: usize, fields: &[&str], want: usize) -> Result<()> {
    if fields.len() != want {
        return Err(parse_err(
            path,
            line,
            format!("expected {want} comma-separated fields, got {}", fields.len()),
        ));
    }
    Ok(())
}

fn read_two_column(path: &Path, header: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let contents = read_to_string(path)?;
    let rows = csv_rows(path, &contents, header)?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut wavelengths = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        expect_fields(path, line, &fields, 2)?;
        wavelengths.push(parse_f64(path, line, fields[0], "wavelength")?);
        values.push(parse_f64(path, line, fields[1], "value")?);
    }
    Ok((wavelengths, values))
}

fn two_column_body(header: &str, grid_wavelengths: impl Iterator<Item = f64>, values: &[f64], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{header}");
    for (wl, v) in grid_wavelengths.zip(values) {
        let _ = writeln!(out, "{wl},{v}");
    }
    out
}

/// `wavelength_nm,value` rows on a uniform, strictly increasing grid.
pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<RadianceSpectrum> {
    let path = path.as_ref();
    let (wl, values) = read_two_column(path, "wavelength_nm,value")?;
    let grid = grid_from_wavelengths(&wl, &path.display().to_string())?;
    RadianceSpectrum::new(grid, values)
}

pub fn write_spectrum_csv(
    path: impl AsRef<Path>,
    spectrum: &RadianceSpectrum,
    comment: Option<&str>,
) -> Result<()> {
    let body = two_column_body(
        "wavelength_nm,value",
        spectrum.grid().wavelengths(),
        spectrum.values(),
        comment,
    );
    write_string(path.as_ref(), &body)
}

pub fn read_filter_csv(path: impl AsRef<Path>) -> Result<FilterTransmittance> {
    let path = path.as_ref();
    let (wl, values) = read_two_column(path, "wavelength_nm,value")?;
    let grid = grid_from_wavelengths(&wl, &path.display().to_string())?;
    FilterTransmittance::new(grid, values)
}

pub fn write_filter_csv(
    path: impl AsRef<Path>,
    filter: &FilterTransmittance,
    comment: Option<&str>,
) -> Result<()> {
    let body = two_column_body(
        "wavelength_nm,value",
        filter.grid().wavelengths(),
        filter.values(),
        comment,
    );
    write_string(path.as_ref(), &body)
}

/// `wavelength_nm,divisor` rows: the band-wise calibration divisor.
pub fn read_divisor_csv(path: impl AsRef<Path>) -> Result<RadianceSpectrum> {
    let path = path.as_ref();
    let (wl, values) = read_two_column(path, "wavelength_nm,divisor")?;
    let grid = grid_from_wavelengths(&wl, &path.display().to_string())?;
    RadianceSpectrum::new(grid, values)
}

pub fn write_divisor_csv(
    path: impl AsRef<Path>,
    divisor: &RadianceSpectrum,
    comment: Option<&str>,
) -> Result<()> {
    let body = two_column_body(
        "wavelength_nm,divisor",
        divisor.grid().wavelengths(),
        divisor.values(),
        comment,
    );
    write_string(path.as_ref(), &body)
}

/// `wavelength_nm,r,g,b` rows.
pub fn read_ssf_csv(path: impl AsRef<Path>) -> Result<CameraSSF> {
    let path = path.as_ref();
    let contents = read_to_string(path)?;
    let rows = csv_rows(path, &contents, "wavelength_nm,r,g,b")?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut wl = Vec::new();
    let mut chans = [Vec::new(), Vec::new(), Vec::new()];
    for (line, fields) in rows {
        expect_fields(path, line, &fields, 4)?;
        wl.push(parse_f64(path, line, fields[0], "wavelength")?);
        for ch in 0..3 {
            chans[ch].push(parse_f64(path, line, fields[ch + 1], "sensitivity")?);
        }
    }
    let grid = grid_from_wavelengths(&wl, &path.display().to_string())?;
    CameraSSF::from_channel_values(grid, &chans[0], &chans[1], &chans[2])
}

pub fn write_ssf_csv(path: impl AsRef<Path>, ssf: &CameraSSF, comment: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "wavelength_nm,r,g,b");
    for (i, wl) in ssf.grid().wavelengths().enumerate() {
        let _ = writeln!(
            out,
            "{wl},{},{},{}",
            ssf.rows()[(0, i)],
            ssf.rows()[(1, i)],
            ssf.rows()[(2, i)]
        );
    }
    write_string(path.as_ref(), &out)
}

/// Load every `*.csv` in a directory as a filter; ids are the file stems,
/// sorted for a stable order.
pub fn read_filter_library(dir: impl AsRef<Path>) -> Result<FilterLibrary> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CoreError::io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut entries = Vec::with_capacity(paths.len());
    for p in paths {
        let id = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CoreError::invalid(format!("bad filter filename {}", p.display())))?
            .to_string();
        entries.push((id, read_filter_csv(&p)?));
    }
    FilterLibrary::new(entries)
}

/// `rank,id1,id2,v,std_error,samples` summary of a filter search.
pub fn write_ranking_csv(
    path: impl AsRef<Path>,
    reports: &[UncertaintyReport],
    comment: Option<&str>,
) -> Result<()> {
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "rank,id1,id2,v,std_error,samples");
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            r.filter_pair.0,
            r.filter_pair.1,
            r.v,
            r.std_error,
            r.samples
        );
    }
    write_string(path.as_ref(), &out)
}

/// Calibration samples: a `led_id,c_r,c_g,c_b` table plus one spectrum CSV
/// per LED named `<led_id>.csv` in `spectra_dir`.
pub fn read_calibration_samples(
    samples_csv: impl AsRef<Path>,
    spectra_dir: impl AsRef<Path>,
) -> Result<Vec<CalibrationSample>> {
    let path = samples_csv.as_ref();
    let contents = read_to_string(path)?;
    let rows = csv_rows(path, &contents, "led_id,c_r,c_g,c_b")?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        expect_fields(path, line, &fields, 4)?;
        let id = fields[0];
        if id.is_empty() {
            return Err(parse_err(path, line, "empty led_id"));
        }
        let c = [
            parse_f64(path, line, fields[1], "channel mean")?,
            parse_f64(path, line, fields[2], "channel mean")?,
            parse_f64(path, line, fields[3], "channel mean")?,
        ];
        let spectrum_path = spectra_dir.as_ref().join(format!("{id}.csv"));
        let r = read_spectrum_csv(&spectrum_path)?;
        samples.push(CalibrationSample::new(c, r)?);
    }
    Ok(samples)
}

/// Charge-domain patch statistics for the noise fit:
/// `channel,mean_charge,std_charge` rows, grouped by channel index.
pub fn read_patch_stats(path: impl AsRef<Path>) -> Result<Vec<Vec<(f64, f64)>>> {
    let path = path.as_ref();
    let contents = read_to_string(path)?;
    let rows = csv_rows(path, &contents, "channel,mean_charge,std_charge")?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut channels: Vec<Vec<(f64, f64)>> = Vec::new();
    for (line, fields) in rows {
        expect_fields(path, line, &fields, 3)?;
        let ch: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid channel index '{}'", fields[0])))?;
        let mean = parse_f64(path, line, fields[1], "mean charge")?;
        let std = parse_f64(path, line, fields[2], "std charge")?;
        if ch >= channels.len() {
            channels.resize(ch + 1, Vec::new());
        }
        channels[ch].push((mean, std));
    }
    Ok(channels)
}
