use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{CpdResult, Fallback, GpError};

pub const CACHE_HEADER: [&str; 8] = [
    "symbol",
    "date",
    "lookback",
    "nu",
    "gamma",
    "nlml_matern",
    "nlml_changepoint",
    "fallback",
];

pub fn write_cache<'a, W: Write>(writer: W, rows: impl IntoIterator<Item = &'a CpdResult>) -> Result<(), GpError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(CACHE_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.symbol.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.lookback.to_string(),
            r.nu.to_string(),
            r.gamma.to_string(),
            r.nlml_matern.to_string(),
            r.nlml_changepoint.to_string(),
            r.fallback.as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_cache<R: Read>(reader: R) -> Result<Vec<CpdResult>, GpError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CACHE_HEADER {
        return Err(GpError::Cache {
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |what: &str, v: &str| GpError::Cache {
            line,
            message: format!("bad {what} `{v}`"),
        };
        if rec.len() != CACHE_HEADER.len() {
            return Err(GpError::Cache { line, message: format!("expected 8 fields, got {}", rec.len()) });
        }
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what, &rec[i]));
        rows.push(CpdResult {
            symbol: rec[0].to_string(),
            date: NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|_| bad("date", &rec[1]))?,
            lookback: rec[2].parse().map_err(|_| bad("lookback", &rec[2]))?,
            nu: num(3, "nu")?,
            gamma: num(4, "gamma")?,
            nlml_matern: num(5, "nlml_matern")?,
            nlml_changepoint: num(6, "nlml_changepoint")?,
            fallback: Fallback::parse(&rec[7]).ok_or_else(|| bad("fallback", &rec[7]))?,
        });
    }
    Ok(rows)
}

/// `(nu, gamma)` by symbol, lookback and date.
#[derive(Debug, Clone, Default)]
pub struct CpdLookup {
    map: HashMap<(String, usize), BTreeMap<NaiveDate, (f64, f64)>>,
}

impl CpdLookup {
    pub fn get(&self, symbol: &str, lookback: usize, date: NaiveDate) -> Option<(f64, f64)> {
        self.map.get(&(symbol.to_string(), lookback))?.get(&date).copied()
    }

    pub fn lookbacks(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.map.keys().map(|k| k.1).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn len(&self) -> usize {
        self.map.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<'a> FromIterator<&'a CpdResult> for CpdLookup {
    fn from_iter<I: IntoIterator<Item = &'a CpdResult>>(iter: I) -> Self {
        let mut map: HashMap<(String, usize), BTreeMap<NaiveDate, (f64, f64)>> = HashMap::new();
        for r in iter {
            map.entry((r.symbol.clone(), r.lookback))
                .or_default()
                .insert(r.date, (r.nu, r.gamma));
        }
        Self { map }
    }
}
