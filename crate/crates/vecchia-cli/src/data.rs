//! CSV ingestion: typed columns resolved by header name, parse errors
//! reported with line numbers, optional skipping of malformed rows.

use std::path::Path;

use nalgebra::DMatrix;
use vecchia::covariance::LocationSet;

use crate::CliError;

/// A parsed data file: locations plus optional response and covariates.
pub struct Dataset {
    pub locs: LocationSet,
    pub response: Option<Vec<f64>>,
    pub covariates: Option<DMatrix<f64>>,
    pub n: usize,
}

pub struct ColumnSpec<'a> {
    pub coords: Vec<&'a str>,
    pub time: Option<&'a str>,
    pub response: Option<&'a str>,
    pub covariates: Vec<&'a str>,
    /// Interpret the two coordinate columns as (lon, lat) in degrees and
    /// convert to unit 3-vectors; requires a time column.
    pub sphere_time: bool,
    pub skip_bad: bool,
    /// Prepend a constant column to the covariates.
    pub intercept: bool,
}

pub fn ingest_csv(path: &Path, spec: &ColumnSpec<'_>) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::config(format!("{}: unreadable header: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::config(format!(
                "{}: no column named '{name}' (header: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    if spec.sphere_time && (spec.coords.len() != 2 || spec.time.is_none()) {
        return Err(CliError::config(
            "sphere-time input needs exactly two coordinate columns (lon, lat) and a time column"
                .to_string(),
        ));
    }
    let coord_idx: Vec<usize> = spec
        .coords
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let time_idx = spec.time.map(col).transpose()?;
    let response_idx = spec.response.map(col).transpose()?;
    let covariate_idx: Vec<usize> = spec
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;

    let mut coords: Vec<f64> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut response: Vec<f64> = Vec::new();
    let mut covariates: Vec<f64> = Vec::new();
    let mut skipped = 0usize;
    for (row_id, record) in reader.records().enumerate() {
        let line = row_id + 2; // header is line 1
        let record = record.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        type ParsedRow = (Vec<f64>, Option<f64>, Option<f64>, Vec<f64>);
        let parse_row = || -> Result<ParsedRow, String> {
            let get = |idx: usize| -> Result<f64, String> {
                let raw = record
                    .get(idx)
                    .ok_or_else(|| format!("missing field {idx}"))?;
                raw.parse::<f64>().map_err(|_| {
                    format!(
                        "field '{}' ('{raw}') is not a number",
                        headers.iter().nth(idx).unwrap_or("?")
                    )
                })
            };
            let c: Vec<f64> = coord_idx
                .iter()
                .map(|&i| get(i))
                .collect::<Result<_, _>>()?;
            let t = time_idx.map(get).transpose()?;
            let r = response_idx.map(get).transpose()?;
            let x: Vec<f64> = covariate_idx
                .iter()
                .map(|&i| get(i))
                .collect::<Result<_, _>>()?;
            Ok((c, t, r, x))
        };
        match parse_row() {
            Ok((c, t, r, x)) => {
                coords.extend_from_slice(&c);
                if let Some(t) = t {
                    times.push(t);
                }
                if let Some(r) = r {
                    response.push(r);
                }
                covariates.extend_from_slice(&x);
            }
            Err(msg) if spec.skip_bad => {
                log::warn!("{}:{line}: skipping row: {msg}", path.display());
                skipped += 1;
            }
            Err(msg) => {
                return Err(CliError::config(format!(
                    "{}:{line}: {msg}",
                    path.display()
                )));
            }
        }
    }
    let d = coord_idx.len();
    let n = coords.len() / d.max(1);
    if n == 0 {
        return Err(CliError::config(format!(
            "{}: no usable rows",
            path.display()
        )));
    }
    let locs = if spec.sphere_time {
        let triples: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| (coords[i * 2], coords[i * 2 + 1], times[i]))
            .collect();
        LocationSet::sphere_time(&triples)
    } else if time_idx.is_some() {
        LocationSet::with_time(coords, d, times)
    } else {
        LocationSet::from_flat(coords, d)
    }
    .map_err(CliError::from)?;
    // an intercept alone is handled as a constant mean by callers
    let covariates = if covariate_idx.is_empty() {
        None
    } else {
        let p = covariate_idx.len();
        let extra = usize::from(spec.intercept);
        let mut x = DMatrix::zeros(n, p + extra);
        for i in 0..n {
            if spec.intercept {
                x[(i, 0)] = 1.0;
            }
            for j in 0..p {
                x[(i, j + extra)] = covariates[i * p + j];
            }
        }
        Some(x)
    };
    if skipped > 0 {
        eprintln!("{}: skipped {skipped} malformed row(s)", path.display());
    }
    Ok(Dataset {
        locs,
        response: response_idx.map(|_| response),
        covariates,
        n,
    })
}
