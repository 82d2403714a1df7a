use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{DataError, PriceSeries};

const HEADER: [&str; 3] = ["symbol", "date", "close"];

/// Load a `symbol,date,close` CSV into one [`PriceSeries`] per symbol.
pub fn load_prices(path: impl AsRef<Path>) -> Result<BTreeMap<String, PriceSeries>, DataError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_prices(file)
}

pub fn read_prices<R: Read>(reader: R) -> Result<BTreeMap<String, PriceSeries>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(DataError::Parse {
            line: 1,
            message: format!("expected header `symbol,date,close`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut rows: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |message: String| DataError::Parse { line, message };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", record.len())));
        }
        let symbol = record[0].to_string();
        if symbol.is_empty() {
            return Err(parse_err("empty symbol".into()));
        }
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date `{}`: {e}", &record[1])))?;
        let close: f64 = record[2]
            .parse()
            .map_err(|e| parse_err(format!("bad close `{}`: {e}", &record[2])))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(DataError::Validation {
                symbol,
                message: format!("line {line}: non-positive close {close} on {date}"),
            });
        }
        rows.entry(symbol).or_default().push((date, close));
    }

    rows.into_iter()
        .map(|(symbol, mut obs)| {
            obs.sort_by_key(|(d, _)| *d);
            if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(DataError::Validation {
                    symbol,
                    message: format!("duplicate date {}", w[0].0),
                });
            }
            let (dates, closes) = obs.into_iter().unzip();
            let series = PriceSeries::new(symbol.clone(), dates, closes)?;
            Ok((symbol, series))
        })
        .collect()
}

/// Write series in the price CSV layout, symbols in the given order.
pub fn write_prices<'a, W: Write>(
    writer: W,
    series: impl IntoIterator<Item = &'a PriceSeries>,
) -> Result<(), DataError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(HEADER)?;
    for s in series {
        for (d, p) in s.dates.iter().zip(&s.closes) {
            wtr.write_record([s.symbol.as_str(), &d.format("%Y-%m-%d").to_string(), &p.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let m = read_prices("symbol,date,close\nA,2020-01-01,100\nA,2020-01-02,105\n".as_bytes()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["A"].closes, vec![100.0, 105.0]);
    }

    #[test]
    fn rows_are_sorted_by_date() {
        let m = read_prices("symbol,date,close\nA,2020-01-02,105\nB,2020-01-01,1\nA,2020-01-01,100\n".as_bytes()).unwrap();
        assert_eq!(m["A"].closes, vec![100.0, 105.0]);
        assert_eq!(m["B"].len(), 1);
    }

    #[test]
    fn negative_price_is_validation_error() {
        let err = read_prices("symbol,date,close\nA,2020-01-01,-3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Validation { .. }), "{err}");
    }

    #[test]
    fn duplicate_date_is_validation_error() {
        let err = read_prices("symbol,date,close\nA,2020-01-01,3\nA,2020-01-01,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Validation { .. }), "{err}");
    }

    #[test]
    fn malformed_row_names_line() {
        let err = read_prices("symbol,date,close\nA,2020-01-01,3\nA,2020-13-01,4\n".as_bytes()).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = read_prices("symbol,date,close\nA,2020-01-01,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn round_trip_through_writer() {
        let s = PriceSeries::new(
            "ES",
            vec![NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), NaiveDate::from_ymd_opt(2020, 1, 2).unwrap()],
            vec![101.25, 99.0625],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_prices(&mut buf, [&s]).unwrap();
        let back = read_prices(buf.as_slice()).unwrap();
        assert_eq!(back["ES"], s);
    }
}
