//! CSV and JSON file formats.
//!
//! Every table is a flat CSV with a header row (or a JSON array of the same
//! records when the path ends in `.json`). Floats are written in shortest
//! round-trip form, so reading a file back reproduces the values exactly.
//! Writes go to a temporary file in the target directory and are renamed
//! into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{DataPoint, G2Curve, StarkPoint};
use crate::spectrum::{ScanSeries, Spectrum, TimedSpectrum};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Output flavour for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn of(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path)(e)
    })
}

pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Writes records as CSV, or as a JSON array when the path ends in `.json`.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let bytes = match Format::of(path) {
        Format::Csv => rows_to_csv(rows).map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?,
        Format::Json => to_json_bytes(path, &rows)?,
    };
    write_atomic(path, &bytes)
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    match Format::of(path) {
        Format::Json => serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        }),
        Format::Csv => csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<Result<Vec<T>, _>>()
            .map_err(|source| IoError::Csv {
                path: path.to_path_buf(),
                source,
            }),
    }
}

fn to_json_bytes<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<Vec<u8>, IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, &to_json_bytes(path, value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Column names of a CSV file.
pub fn csv_header(path: &Path) -> Result<Vec<String>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let h = r.headers().map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(h.iter().map(str::to_string).collect())
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Ground truth for simulated data.
    #[serde(default)]
    pub truth: Option<serde_json::Value>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Sidecar {
    pub fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            truth: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_truth<T: Serialize>(mut self, truth: &T) -> Self {
        self.truth = serde_json::to_value(truth).ok();
        self
    }

    pub fn with<T: Serialize>(mut self, key: &str, value: &T) -> Self {
        if let Ok(v) = serde_json::to_value(value) {
            self.extra.insert(key.into(), v);
        }
        self
    }
}

/// `data.csv` → `data.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_sidecar(data_path: &Path, sidecar: &Sidecar) -> Result<PathBuf, IoError> {
    let p = sidecar_path(data_path);
    write_json(&p, sidecar)?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub frequency_ghz: f64,
    pub counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkSpectrumRow {
    pub field_mv_per_m: f64,
    pub frequency_ghz: f64,
    pub counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub field_mv_per_m: f64,
    pub center_ghz: f64,
    pub sigma_ghz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthRow {
    pub field_mv_per_m: f64,
    pub fwhm_mhz: f64,
    pub sigma_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub scan: usize,
    pub timestamp_s: f64,
    pub field_mv_per_m: f64,
    pub frequency_ghz: f64,
    pub counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Row {
    pub curve: usize,
    pub relative_power: f64,
    pub tau_ns: f64,
    pub g2: f64,
    pub sigma: f64,
}

pub fn write_spectrum(path: &Path, s: &Spectrum) -> Result<(), IoError> {
    let rows: Vec<SpectrumRow> = s
        .frequencies
        .iter()
        .zip(&s.counts)
        .map(|(&frequency_ghz, &counts)| SpectrumRow { frequency_ghz, counts })
        .collect();
    write_rows(path, &rows)
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum, IoError> {
    let rows: Vec<SpectrumRow> = read_rows(path)?;
    Ok(Spectrum::new(
        rows.iter().map(|r| r.frequency_ghz).collect(),
        rows.iter().map(|r| r.counts).collect(),
    ))
}

/// One spectrum per static field, long format.
pub fn write_stark_spectra(path: &Path, spectra: &[(f64, Spectrum)]) -> Result<(), IoError> {
    let rows: Vec<StarkSpectrumRow> = spectra
        .iter()
        .flat_map(|(f, s)| {
            s.frequencies
                .iter()
                .zip(&s.counts)
                .map(move |(&frequency_ghz, &counts)| StarkSpectrumRow {
                    field_mv_per_m: *f,
                    frequency_ghz,
                    counts,
                })
        })
        .collect();
    write_rows(path, &rows)
}

/// Groups consecutive rows sharing a field value.
pub fn read_stark_spectra(path: &Path) -> Result<Vec<(f64, Spectrum)>, IoError> {
    let rows: Vec<StarkSpectrumRow> = read_rows(path)?;
    let mut out: Vec<(f64, Spectrum)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((f, s)) if *f == r.field_mv_per_m => {
                s.frequencies.push(r.frequency_ghz);
                s.counts.push(r.counts);
            }
            _ => out.push((r.field_mv_per_m, Spectrum::new(vec![r.frequency_ghz], vec![r.counts]))),
        }
    }
    Ok(out)
}

pub fn write_trajectory(path: &Path, points: &[StarkPoint]) -> Result<(), IoError> {
    let rows: Vec<TrajectoryRow> = points
        .iter()
        .map(|p| TrajectoryRow {
            field_mv_per_m: p.field,
            center_ghz: p.center,
            sigma_ghz: p.sigma,
        })
        .collect();
    write_rows(path, &rows)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<StarkPoint>, IoError> {
    let rows: Vec<TrajectoryRow> = read_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|r| StarkPoint {
            field: r.field_mv_per_m,
            center: r.center_ghz,
            sigma: r.sigma_ghz,
        })
        .collect())
}

pub fn write_linewidths(path: &Path, points: &[DataPoint]) -> Result<(), IoError> {
    let rows: Vec<LinewidthRow> = points
        .iter()
        .map(|p| LinewidthRow {
            field_mv_per_m: p.x,
            fwhm_mhz: p.y,
            sigma_mhz: p.sigma,
        })
        .collect();
    write_rows(path, &rows)
}

pub fn read_linewidths(path: &Path) -> Result<Vec<DataPoint>, IoError> {
    let rows: Vec<LinewidthRow> = read_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|r| DataPoint::new(r.field_mv_per_m, r.fwhm_mhz, r.sigma_mhz))
        .collect())
}

pub fn write_series(path: &Path, series: &ScanSeries) -> Result<(), IoError> {
    let rows: Vec<SeriesRow> = series
        .scans
        .iter()
        .enumerate()
        .flat_map(|(scan, t)| {
            t.spectrum
                .frequencies
                .iter()
                .zip(&t.spectrum.counts)
                .map(move |(&frequency_ghz, &counts)| SeriesRow {
                    scan,
                    timestamp_s: t.timestamp,
                    field_mv_per_m: series.bias_field,
                    frequency_ghz,
                    counts,
                })
        })
        .collect();
    write_rows(path, &rows)
}

pub fn read_series(path: &Path) -> Result<ScanSeries, IoError> {
    let rows: Vec<SeriesRow> = read_rows(path)?;
    let Some(first) = rows.first() else {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: "empty scan series".into(),
        });
    };
    let bias_field = first.field_mv_per_m;
    let mut scans: Vec<(usize, TimedSpectrum)> = Vec::new();
    for r in &rows {
        if r.field_mv_per_m != bias_field {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                message: "a scan series must share one bias field".into(),
            });
        }
        match scans.last_mut() {
            Some((k, t)) if *k == r.scan => {
                t.spectrum.frequencies.push(r.frequency_ghz);
                t.spectrum.counts.push(r.counts);
            }
            _ => scans.push((
                r.scan,
                TimedSpectrum {
                    timestamp: r.timestamp_s,
                    spectrum: Spectrum::new(vec![r.frequency_ghz], vec![r.counts]),
                },
            )),
        }
    }
    Ok(ScanSeries {
        bias_field,
        scans: scans.into_iter().map(|(_, t)| t).collect(),
    })
}

pub fn write_g2(path: &Path, curves: &[G2Curve]) -> Result<(), IoError> {
    let rows: Vec<G2Row> = curves
        .iter()
        .enumerate()
        .flat_map(|(curve, c)| {
            (0..c.tau.len()).map(move |i| G2Row {
                curve,
                relative_power: c.relative_power,
                tau_ns: c.tau[i],
                g2: c.g2[i],
                sigma: c.sigma[i],
            })
        })
        .collect();
    write_rows(path, &rows)
}

pub fn read_g2(path: &Path) -> Result<Vec<G2Curve>, IoError> {
    let rows: Vec<G2Row> = read_rows(path)?;
    let mut curves: Vec<(usize, G2Curve)> = Vec::new();
    for r in rows {
        match curves.last_mut() {
            Some((k, c)) if *k == r.curve => {
                c.tau.push(r.tau_ns);
                c.g2.push(r.g2);
                c.sigma.push(r.sigma);
            }
            _ => curves.push((
                r.curve,
                G2Curve::new(vec![r.tau_ns], vec![r.g2], vec![r.sigma]).with_power(r.relative_power),
            )),
        }
    }
    Ok(curves.into_iter().map(|(_, c)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn spectra_round_trip_exactly() {
        let d = dir();
        let s = Spectrum::new(vec![0.1, 0.2 + 1e-17, -1.0 / 3.0], vec![0.0, 17.0, 2.5]);
        let spectra = vec![(-250.0, s.clone()), (12.5, s.clone())];
        for ext in ["csv", "json"] {
            let p = d.path().join(format!("s.{ext}"));
            write_stark_spectra(&p, &spectra).unwrap();
            assert_eq!(read_stark_spectra(&p).unwrap(), spectra);
            let p = d.path().join(format!("one.{ext}"));
            write_spectrum(&p, &s).unwrap();
            assert_eq!(read_spectrum(&p).unwrap(), s);
        }
    }

    #[test]
    fn series_and_g2_round_trip() {
        let d = dir();
        let s = Spectrum::new(vec![1.0, 2.0], vec![3.0, 4.0]);
        let series = ScanSeries {
            bias_field: 250.0,
            scans: vec![
                TimedSpectrum {
                    timestamp: 0.0,
                    spectrum: s.clone(),
                },
                TimedSpectrum {
                    timestamp: 0.1,
                    spectrum: s,
                },
            ],
        };
        let p = d.path().join("series.csv");
        write_series(&p, &series).unwrap();
        assert_eq!(read_series(&p).unwrap(), series);

        let curves = vec![
            G2Curve::new(vec![0.0, 1.0], vec![0.03, 0.5], vec![0.01, 0.02]),
            G2Curve::new(vec![0.0, 2.0], vec![0.0, 0.9], vec![0.01, 0.02]).with_power(0.01),
        ];
        let p = d.path().join("g2.csv");
        write_g2(&p, &curves).unwrap();
        assert_eq!(read_g2(&p).unwrap(), curves);
    }

    #[test]
    fn points_round_trip() {
        let d = dir();
        let pts = vec![
            StarkPoint {
                field: -1.0,
                center: 0.123456789012345,
                sigma: 1e-4,
            },
            StarkPoint {
                field: 2.0,
                center: -3.0,
                sigma: 2e-4,
            },
        ];
        let p = d.path().join("t.csv");
        write_trajectory(&p, &pts).unwrap();
        assert_eq!(read_trajectory(&p).unwrap(), pts);
        let lw = vec![DataPoint::new(0.0, 49.0, 2.0), DataPoint::new(150.0, 154.5, 7.7)];
        let p = d.path().join("lw.csv");
        write_linewidths(&p, &lw).unwrap();
        assert_eq!(read_linewidths(&p).unwrap(), lw);
        assert_eq!(csv_header(&p).unwrap(), ["field_mv_per_m", "fwhm_mhz", "sigma_mhz"]);
    }

    #[test]
    fn sidecar_next_to_data() {
        let d = dir();
        let p = d.path().join("spectra.csv");
        let sc = Sidecar::new("simulate stark", Some(7), &[1, 2, 3]).with("note", &"x");
        let sp = write_sidecar(&p, &sc).unwrap();
        assert_eq!(sp.file_name().unwrap(), "spectra.meta.json");
        assert_eq!(read_json::<Sidecar>(&sp).unwrap(), sc);
        assert!(!fs::read_dir(d.path())
            .unwrap()
            .any(|e| e.unwrap().file_name().to_string_lossy().contains(".tmp")));
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(matches!(
            read_spectrum(Path::new("/nonexistent/x.csv")),
            Err(IoError::Io { .. })
        ));
    }
}
