//! JSONL and CSV dataset files.
//!
//! JSONL: the first line is a header object
//! `{"grid": {...}, "class_names": [...], "provenance": {...}}`, followed by
//! one `{"id", "label", "cohort", "values"}` object per spectrum. Augmented
//! rows additionally carry `parent_a`, `parent_b`, `lambda` and `alpha`.
//!
//! CSV: columns `id,label,cohort`, the optional provenance columns, then one
//! column per wavenumber named with 4 decimals. An optional leading `#` line
//! holds the JSONL header object so the exact grid and class order survive.
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, MixupOrigin, Provenance, Spectrum, WavenumberGrid};
use crate::error::{Error, Result};

const ORIGIN_COLUMNS: [&str; 4] = ["parent_a", "parent_b", "lambda", "alpha"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from the file extension; anything but `.csv` is
    /// treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    grid: WavenumberGrid,
    class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Provenance::is_empty")]
    provenance: Provenance,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    label: String,
    cohort: String,
    values: Vec<f64>,
    parent_a: Option<String>,
    parent_b: Option<String>,
    lambda: Option<f64>,
    alpha: Option<f64>,
}

fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to String");
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>, format: DatasetFormat) -> Result<()> {
    let path = path.as_ref();
    ds.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let text = match format {
        DatasetFormat::Jsonl => render_jsonl(ds)?,
        DatasetFormat::Csv => render_csv(ds)?,
    };
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn header_json(ds: &Dataset) -> Result<String> {
    Ok(serde_json::to_string(&Header {
        grid: ds.grid,
        class_names: ds.class_names.clone(),
        provenance: ds.provenance.clone(),
    })?)
}

fn render_jsonl(ds: &Dataset) -> Result<String> {
    let mut out = header_json(ds)?;
    out.push('\n');
    for s in &ds.spectra {
        out.push_str("{\"id\":");
        out.push_str(&serde_json::to_string(&s.id)?);
        out.push_str(",\"label\":");
        out.push_str(&serde_json::to_string(&s.label)?);
        out.push_str(",\"cohort\":");
        out.push_str(&serde_json::to_string(&s.cohort)?);
        if let Some(o) = &s.origin {
            out.push_str(",\"parent_a\":");
            out.push_str(&serde_json::to_string(&o.parent_a)?);
            out.push_str(",\"parent_b\":");
            out.push_str(&serde_json::to_string(&o.parent_b)?);
            out.push_str(",\"lambda\":");
            fmt_value(&mut out, o.lambda);
            out.push_str(",\"alpha\":");
            fmt_value(&mut out, o.alpha);
        }
        out.push_str(",\"values\":[");
        for (i, &v) in s.values.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_value(&mut out, v);
        }
        out.push_str("]}\n");
    }
    Ok(out)
}

fn render_csv(ds: &Dataset) -> Result<String> {
    let with_origin = ds.spectra.iter().any(|s| s.origin.is_some());
    let mut out = String::from("# ");
    out.push_str(&header_json(ds)?);
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["id".into(), "label".into(), "cohort".into()];
    if with_origin {
        header.extend(ORIGIN_COLUMNS.iter().map(|c| c.to_string()));
    }
    header.extend(ds.grid.wavenumbers().iter().map(|w| format!("{w:.4}")));
    let csv_err = |e: csv::Error| Error::Config(format!("csv encoding: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for s in &ds.spectra {
        let mut rec: Vec<String> = vec![s.id.clone(), s.label.clone(), s.cohort.clone()];
        if with_origin {
            match &s.origin {
                Some(o) => {
                    rec.push(o.parent_a.clone());
                    rec.push(o.parent_b.clone());
                    rec.push(format!("{:.16e}", o.lambda));
                    rec.push(format!("{:.16e}", o.alpha));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        rec.extend(s.values.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv encoding: {e}")))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        DatasetFormat::Jsonl => read_jsonl(path, reader),
        DatasetFormat::Csv => read_csv(path, reader),
    }
}

fn origin_from(
    path: &Path,
    line: usize,
    parent_a: Option<String>,
    parent_b: Option<String>,
    lambda: Option<f64>,
    alpha: Option<f64>,
) -> Result<Option<MixupOrigin>> {
    match (parent_a, parent_b, lambda, alpha) {
        (None, None, None, None) => Ok(None),
        (Some(parent_a), Some(parent_b), Some(lambda), Some(alpha)) => Ok(Some(MixupOrigin {
            parent_a,
            parent_b,
            lambda,
            alpha,
        })),
        _ => Err(parse_err(
            path,
            line,
            "augmentation provenance needs all of parent_a, parent_b, lambda, alpha",
        )),
    }
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Dataset> {
    let mut header: Option<Header> = None;
    let mut spectra = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: Header = serde_json::from_str(&line)
                .map_err(|e| parse_err(path, lineno, format!("bad header: {e}")))?;
            h.grid
                .validate()
                .map_err(|e| parse_err(path, lineno, e.to_string()))?;
            header = Some(h);
            continue;
        }
        let row: Row =
            serde_json::from_str(&line).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let origin = origin_from(
            path,
            lineno,
            row.parent_a,
            row.parent_b,
            row.lambda,
            row.alpha,
        )?;
        spectra.push(Spectrum {
            id: row.id,
            label: row.label,
            cohort: row.cohort,
            values: row.values,
            origin,
        });
    }
    let header = header.ok_or_else(|| parse_err(path, 1, "no records"))?;
    let ds = Dataset {
        grid: header.grid,
        spectra,
        class_names: header.class_names,
        provenance: header.provenance,
    };
    ds.validate()?;
    Ok(ds)
}

fn read_csv(path: &Path, mut reader: impl BufRead) -> Result<Dataset> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let mut meta: Option<Header> = None;
    let mut body = text.as_str();
    let mut line_offset = 0;
    if let Some(rest) = body.strip_prefix('#') {
        let (first, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        meta = Some(
            serde_json::from_str(first.trim())
                .map_err(|e| parse_err(path, 1, format!("bad metadata line: {e}")))?,
        );
        body = tail;
        line_offset = 1;
    }
    if body.trim().is_empty() {
        return Err(parse_err(path, 1, "no records"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let csv_line = |pos: Option<&csv::Position>| pos.map_or(1, |p| p.line() as usize) + line_offset;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, csv_line(e.position()), e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != ["id", "label", "cohort"] {
        return Err(parse_err(
            path,
            1 + line_offset,
            "header must start with id,label,cohort",
        ));
    }
    let with_origin = names.len() >= 7 && names[3..7] == ORIGIN_COLUMNS;
    let first_value = if with_origin { 7 } else { 3 };
    let wavenumbers = names[first_value..]
        .iter()
        .map(|n| n.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| parse_err(path, 1 + line_offset, format!("bad wavenumber column: {e}")))?;
    if wavenumbers.len() < 3 {
        return Err(parse_err(
            path,
            1 + line_offset,
            "need at least 3 wavenumber columns",
        ));
    }
    let column_grid = WavenumberGrid::new(
        wavenumbers[0],
        *wavenumbers.last().expect("nonempty"),
        wavenumbers.len(),
    )
    .map_err(|e| parse_err(path, 1 + line_offset, e.to_string()))?;
    let grid = match &meta {
        Some(h) => {
            // column names carry 4 decimals; the metadata grid must agree with them
            let agrees = h.grid.points == column_grid.points
                && (h.grid.start_cm1 - column_grid.start_cm1).abs() <= 5.1e-5
                && (h.grid.end_cm1 - column_grid.end_cm1).abs() <= 5.1e-5;
            if !agrees {
                return Err(parse_err(
                    path,
                    1,
                    "metadata grid disagrees with wavenumber columns",
                ));
            }
            h.grid
        }
        None => column_grid,
    };

    let mut spectra = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, csv_line(e.position()), e.to_string()))?;
        let lineno = csv_line(rec.position());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let origin = if with_origin {
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|e| parse_err(path, lineno, format!("`{s}`: {e}")))
                }
            };
            origin_from(
                path,
                lineno,
                opt(field(3)),
                opt(field(4)),
                num(field(5))?,
                num(field(6))?,
            )?
        } else {
            None
        };
        let values = rec
            .iter()
            .skip(first_value)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, lineno, format!("`{v}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        spectra.push(Spectrum {
            id: field(0).to_string(),
            label: field(1).to_string(),
            cohort: field(2).to_string(),
            values,
            origin,
        });
    }
    let (class_names, provenance) = match meta {
        Some(h) => (h.class_names, h.provenance),
        None => {
            let mut names: Vec<String> = Vec::new();
            for s in &spectra {
                if !names.contains(&s.label) {
                    names.push(s.label.clone());
                }
            }
            (names, Provenance::new())
        }
    };
    let ds = Dataset {
        grid,
        spectra,
        class_names,
        provenance,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::Value;

    fn sample(n: usize) -> Dataset {
        let grid = WavenumberGrid::fingerprint();
        let spectra = (0..n)
            .map(|k| {
                Spectrum::new(
                    format!("spec-{k}"),
                    if k % 2 == 0 { "healthy" } else { "sars_cov_2" },
                    "cohort1",
                    (0..219).map(|i| (i as f64 * 0.37 + k as f64).sin() / 3.0).collect(),
                )
            })
            .collect();
        let mut ds = Dataset::new(grid, spectra, vec!["healthy".into(), "sars_cov_2".into()])
            .unwrap();
        ds.provenance.insert("seed".into(), Value::from(7));
        ds
    }

    fn round_trip(ds: &Dataset, format: DatasetFormat) -> Dataset {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds");
        save_dataset(ds, &path, format).unwrap();
        load_dataset(&path, format).unwrap()
    }

    #[test]
    fn three_rows_round_trip_both_formats() {
        let ds = sample(3);
        assert_eq!(round_trip(&ds, DatasetFormat::Jsonl), ds);
        assert_eq!(round_trip(&ds, DatasetFormat::Csv), ds);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = sample(0);
        assert_eq!(round_trip(&ds, DatasetFormat::Jsonl), ds);
        assert_eq!(round_trip(&ds, DatasetFormat::Csv), ds);
    }

    #[test]
    fn non_ascii_id_and_origin_preserved() {
        let mut ds = sample(2);
        ds.spectra[0].id = "échantillon-β,\"7\"".into();
        ds.spectra[1].origin = Some(MixupOrigin {
            parent_a: "a".into(),
            parent_b: "b".into(),
            lambda: 0.123456789012345678,
            alpha: 1.05,
        });
        assert_eq!(round_trip(&ds, DatasetFormat::Jsonl), ds);
        assert_eq!(round_trip(&ds, DatasetFormat::Csv), ds);
    }

    #[test]
    fn short_row_is_grid_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let values: Vec<String> = (0..218).map(|_| "0.0".to_string()).collect();
        std::fs::write(
            &path,
            format!(
                "{{\"grid\":{{\"start_cm1\":1800,\"end_cm1\":900,\"points\":219}},\"class_names\":[\"a\"]}}\n\
                 {{\"id\":\"x1\",\"label\":\"a\",\"cohort\":\"c\",\"values\":[{}]}}\n",
                values.join(",")
            ),
        )
        .unwrap();
        match load_dataset(&path, DatasetFormat::Jsonl) {
            Err(Error::GridMismatch { id, found, .. }) => {
                assert_eq!(id, "x1");
                assert_eq!(found, 218);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_has_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let err = load_dataset(&path, DatasetFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("no records"), "{err}");
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        let err = load_dataset(&path, DatasetFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("no records"), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"grid\":{\"start_cm1\":1800,\"end_cm1\":900,\"points\":3},\"class_names\":[\"a\"]}\n\
             {\"id\":\"x\",\"label\":\"a\",\"cohort\":\"c\",\"values\":[1,2,3]}\n\
             {not json}\n",
        )
        .unwrap();
        match load_dataset(&path, DatasetFormat::Jsonl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_without_metadata_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.csv");
        std::fs::write(
            &path,
            "id,label,cohort,1800.0000,1350.0000,900.0000\nr1,b,c,1,2,3\nr2,a,c,4,5,6\n",
        )
        .unwrap();
        let ds = load_dataset(&path, DatasetFormat::Csv).unwrap();
        assert_eq!(ds.class_names, vec!["b", "a"]);
        assert_eq!(ds.grid.points, 3);
        assert_eq!(ds.spectra[1].values, vec![4.0, 5.0, 6.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn values_round_trip_bit_exact(values in proptest::collection::vec(-1e300f64..1e300, 5)) {
            let grid = WavenumberGrid::new(1800.0, 900.0, 5).unwrap();
            let ds = Dataset::new(grid, vec![Spectrum::new("p", "a", "c", values)], vec!["a".into()]).unwrap();
            for format in [DatasetFormat::Jsonl, DatasetFormat::Csv] {
                let back = round_trip(&ds, format);
                let bits = |d: &Dataset| d.spectra[0].values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&back), bits(&ds));
            }
        }
    }
}
