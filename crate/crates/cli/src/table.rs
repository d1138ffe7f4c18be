//! Curve tables read from CSV.

use std::path::Path;
use std::sync::Arc;

use fqr_core::{Curve, Grid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("empty file: no header row")]
    Empty,
    #[error("no observations after the header")]
    NoRows,
    #[error("header has no numeric abscissae after the id column")]
    NoAbscissae,
    #[error("header column {col}: expected a numeric abscissa, found '{value}'")]
    HeaderNotNumeric { col: usize, value: String },
    #[error("header column {col}: abscissa {value} does not exceed the previous one")]
    NonIncreasing { col: usize, value: f64 },
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("row {row}, column {col}: missing value")]
    Missing { row: u64, col: usize },
    #[error("row {row}, column {col}: '{value}' is not a finite number")]
    NotNumeric { row: u64, col: usize, value: String },
    #[error("response column not found: {0}")]
    ResponseNotFound(String),
    #[error("{0}")]
    Grid(#[from] fqr_core::FqrError),
}

/// Map from original abscissae to `[0, 1]`: `t = (x − offset) · scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) * self.scale
    }

    pub fn invert(&self, t: f64) -> f64 {
        self.offset + t / self.scale
    }
}

/// Curves sampled on a common grid with optional scalar columns.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub ids: Vec<String>,
    /// Abscissae rescaled to `[0, 1]`.
    pub grid: Arc<Grid>,
    /// Abscissae as written in the file.
    pub abscissae: Vec<f64>,
    pub map: AffineMap,
    pub curves: Vec<Curve>,
    /// Non-numeric header columns between the id and the abscissae.
    pub responses: Vec<(String, Vec<f64>)>,
}

impl CurveTable {
    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn response(&self, name: &str) -> Result<&[f64], TableError> {
        self.responses
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| TableError::ResponseNotFound(name.to_string()))
    }
}

fn number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads `id[,y...],t_1,...,t_M` followed by one row per observation.
/// Row numbers in errors are 1-based file lines (the header is row 1);
/// columns are 1-based.
pub fn parse_curves_csv(path: impl AsRef<Path>) -> Result<CurveTable, TableError> {
    let path = path.as_ref();
    let file =
        std::fs::File::open(path).map_err(|source| TableError::Io { path: path.display().to_string(), source })?;
    parse_curves(file)
}

pub fn parse_curves<R: std::io::Read>(input: R) -> Result<CurveTable, TableError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let csv_err = |e: csv::Error| TableError::Csv { row: e.position().map_or(0, |p| p.line()), message: e.to_string() };
    let header = records.next().ok_or(TableError::Empty)?.map_err(csv_err)?;
    let cells: Vec<&str> = header.iter().collect();
    let first_numeric =
        cells.iter().skip(1).position(|c| number(c).is_some()).map(|p| p + 1).ok_or(TableError::NoAbscissae)?;
    let response_names: Vec<String> = cells[1..first_numeric].iter().map(|s| s.trim().to_string()).collect();
    let mut abscissae = Vec::with_capacity(cells.len() - first_numeric);
    for (k, cell) in cells.iter().enumerate().skip(first_numeric) {
        let v = number(cell).ok_or_else(|| TableError::HeaderNotNumeric { col: k + 1, value: cell.to_string() })?;
        if let Some(&prev) = abscissae.last() {
            if v <= prev {
                return Err(TableError::NonIncreasing { col: k + 1, value: v });
            }
        }
        abscissae.push(v);
    }
    if abscissae.len() < 2 {
        return Err(TableError::NoAbscissae);
    }
    let (lo, hi) = (abscissae[0], abscissae[abscissae.len() - 1]);
    let map = AffineMap { offset: lo, scale: 1.0 / (hi - lo) };
    let points: Vec<f64> = abscissae.iter().map(|&x| map.apply(x).clamp(0.0, 1.0)).collect();
    let grid = Arc::new(Grid::from_points(points)?);

    let width = cells.len();
    let mut ids = Vec::new();
    let mut curves = Vec::new();
    let mut responses: Vec<(String, Vec<f64>)> = response_names.into_iter().map(|n| (n, Vec::new())).collect();
    for (k, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec.position().map_or(k as u64 + 2, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(TableError::Ragged { row, expected: width, found: rec.len() });
        }
        let value = |col: usize| -> Result<f64, TableError> {
            let cell = rec[col].trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(TableError::Missing { row, col: col + 1 });
            }
            number(cell).ok_or_else(|| TableError::NotNumeric { row, col: col + 1, value: cell.to_string() })
        };
        ids.push(rec[0].trim().to_string());
        for (j, (_, col)) in responses.iter_mut().enumerate() {
            col.push(value(1 + j)?);
        }
        let values = (first_numeric..width).map(value).collect::<Result<Vec<_>, _>>()?;
        curves.push(Curve::new(grid.clone(), values)?);
    }
    if curves.is_empty() {
        return Err(TableError::NoRows);
    }
    Ok(CurveTable { ids, grid, abscissae, map, curves, responses })
}

/// Writes a table in the same layout `parse_curves` reads.
pub fn write_curves<W: std::io::Write>(
    out: W,
    ids: &[String],
    responses: &[(String, Vec<f64>)],
    abscissae: &[f64],
    curves: &[Curve],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(responses.iter().map(|(n, _)| n.clone()));
    header.extend(abscissae.iter().map(|x| x.to_string()));
    w.write_record(&header)?;
    for (i, c) in curves.iter().enumerate() {
        let mut row = vec![ids[i].clone()];
        row.extend(responses.iter().map(|(_, v)| v[i].to_string()));
        row.extend(c.values().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<CurveTable, TableError> {
        parse_curves(s.as_bytes())
    }

    #[test]
    fn well_formed() {
        let t = parse("id,y,0,0.25,0.5,0.75,1\na,1,1,2,3,4,5\nb,2,0,0,0,0,0\nc,3,5,4,3,2,1\n").unwrap();
        assert_eq!((t.n(), t.m()), (3, 5));
        assert_eq!(t.response("y").unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(t.ids, vec!["a", "b", "c"]);
        assert_eq!(t.curves[2].values()[0], 5.0);
    }

    #[test]
    fn wavelengths_map_to_unit_interval() {
        let xs: Vec<String> = (0..100).map(|k| (850.0 + 200.0 * k as f64 / 99.0).to_string()).collect();
        let row: Vec<String> = (0..100).map(|k| (k as f64).to_string()).collect();
        let text = format!("id,{}\nr1,{}\nr2,{}\n", xs.join(","), row.join(","), row.join(","));
        let t = parse(&text).unwrap();
        assert_eq!(t.map.offset, 850.0);
        assert!((t.map.scale - 1.0 / 200.0).abs() < 1e-18);
        assert_eq!(t.grid.points()[0], 0.0);
        assert_eq!(t.grid.points()[99], 1.0);
        assert!(t.grid.is_uniform());
        assert!(t.responses.is_empty());
        assert!((t.map.invert(0.5) - 950.0).abs() < 1e-12);
    }

    #[test]
    fn ragged_row_is_named() {
        let err = parse("id,0,0.25,0.5,0.75,1\na,1,2,3,4,5\nb,1,2,3,4\n").unwrap_err();
        assert!(matches!(err, TableError::Ragged { row: 3, expected: 6, found: 5 }), "{err}");
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn bad_cells_are_located() {
        let err = parse("id,0,0.5,1\na,1,x,3\n").unwrap_err();
        assert!(matches!(err, TableError::NotNumeric { row: 2, col: 3, .. }), "{err}");
        let err = parse("id,0,0.5,1\na,1,,3\n").unwrap_err();
        assert!(matches!(err, TableError::Missing { row: 2, col: 3 }), "{err}");
        let err = parse("id,0,0.5,0.5\na,1,2,3\n").unwrap_err();
        assert!(matches!(err, TableError::NonIncreasing { col: 4, .. }), "{err}");
        let err = parse("id,0,0.5,w\na,1,2,3\n").unwrap_err();
        assert!(matches!(err, TableError::HeaderNotNumeric { col: 4, .. }), "{err}");
        assert!(matches!(parse("id,y\n").unwrap_err(), TableError::NoAbscissae));
        assert!(matches!(parse("id,0,1\n").unwrap_err(), TableError::NoRows));
        assert!(matches!(parse("").unwrap_err(), TableError::Empty));
    }

    #[test]
    fn missing_response() {
        let t = parse("id,fat,0,1\na,1,2,3\n").unwrap();
        assert_eq!(t.response("protein").unwrap_err().to_string(), "response column not found: protein");
    }

    #[test]
    fn write_then_read() {
        let t = parse("id,y,10,20,30\na,0.5,1,2,3\nb,-1,4,5,6.25\n").unwrap();
        let mut buf = Vec::new();
        write_curves(&mut buf, &t.ids, &t.responses, &t.abscissae, &t.curves).unwrap();
        let back = parse_curves(buf.as_slice()).unwrap();
        assert_eq!(back.curves, t.curves);
        assert_eq!(back.responses, t.responses);
        assert_eq!(back.abscissae, t.abscissae);
    }
}
