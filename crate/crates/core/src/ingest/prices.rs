use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use super::Event;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct PriceParse {
    pub events: Vec<Event>,
    /// Rows dropped for a missing/nonpositive close or an unparseable date.
    pub skipped: usize,
}

/// Parse a daily price CSV.
///
/// The header must name `date` and `close`; the symbol comes from a `symbol`
/// column, or from `file_symbol` for per-symbol files.
pub fn parse_price_csv<R: Read>(reader: R, file_symbol: Option<&str>) -> Result<PriceParse> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (date_col, close_col) = match (find("date"), find("close")) {
        (Some(d), Some(c)) => (d, c),
        _ => {
            return Err(Error::Input {
                path: Default::default(),
                message: format!("price header must contain date and close, got {headers:?}"),
            })
        }
    };
    let symbol_col = find("symbol");
    if symbol_col.is_none() && file_symbol.is_none() {
        return Err(Error::Input {
            path: Default::default(),
            message: "price header has no symbol column and no per-file symbol".into(),
        });
    }

    let mut out = PriceParse::default();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.skipped += 1;
                continue;
            }
        };
        let symbol = match symbol_col {
            Some(c) => record.get(c).unwrap_or(""),
            None => file_symbol.unwrap_or(""),
        };
        let date = record.get(date_col).unwrap_or("");
        let close = record.get(close_col).and_then(|s| s.parse::<f64>().ok());
        let day = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok();
        match (close, day) {
            (Some(close), Some(day)) if close > 0.0 && close.is_finite() && !symbol.is_empty() => {
                out.events.push(Event {
                    timestamp: day.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp(),
                    entity: symbol.to_string(),
                    feature: date.to_string(),
                    value: close,
                });
            }
            _ => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Read one price file; a file without a `symbol` column takes its stem as the symbol.
pub fn read_price_csv(path: &Path) -> Result<PriceParse> {
    let file = std::fs::File::open(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str());
    parse_price_csv(file, stem).map_err(|e| match e {
        Error::Input { message, .. } => Error::Input {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Read every `*.csv` under `dir` (sorted by name).
pub fn read_price_dir(dir: &Path) -> Result<PriceParse> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut all = PriceParse::default();
    for p in paths {
        let part = read_price_csv(&p)?;
        all.events.extend(part.events);
        all.skipped += part.skipped;
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_column_rows() {
        let csv = "symbol,date,close\nAAA,2001-03-05,19.2\n";
        let p = parse_price_csv(csv.as_bytes(), None).unwrap();
        assert_eq!(p.events.len(), 1);
        let ev = &p.events[0];
        assert_eq!(ev.entity, "AAA");
        assert_eq!(ev.feature, "2001-03-05");
        assert_eq!(ev.value, 19.2);
    }

    #[test]
    fn zero_close_is_skipped() {
        let csv = "symbol,date,close\nAAA,2001-03-05,0\n";
        let p = parse_price_csv(csv.as_bytes(), None).unwrap();
        assert!(p.events.is_empty());
        assert_eq!(p.skipped, 1);
    }

    #[test]
    fn five_valid_one_invalid() {
        let csv = "symbol,date,close\n\
                   A,2001-03-05,1\nA,2001-03-06,2\nA,2001-03-07,\nA,2001-03-08,3\nB,2001-03-05,4\nB,2001-03-06,5\n";
        let p = parse_price_csv(csv.as_bytes(), None).unwrap();
        assert_eq!(p.events.len(), 5);
        assert_eq!(p.skipped, 1);
    }

    #[test]
    fn per_file_symbol() {
        let csv = "Date,Close\n2001-03-05,10.5\n";
        let p = parse_price_csv(csv.as_bytes(), Some("XYZ")).unwrap();
        assert_eq!(p.events[0].entity, "XYZ");
    }

    #[test]
    fn missing_header_is_an_error() {
        let csv = "foo,bar\n1,2\n";
        assert!(parse_price_csv(csv.as_bytes(), Some("X")).is_err());
        let csv = "date,close\n2001-03-05,1\n";
        assert!(parse_price_csv(csv.as_bytes(), None).is_err());
    }
}
