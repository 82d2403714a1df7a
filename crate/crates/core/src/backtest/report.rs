//! Delimited report files.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::costs::CostPoint;
use super::diagnostics::PositionAverages;
use super::metrics::MetricsRow;
use super::BacktestError;
use crate::strategies::{AssetDay, StrategyReturns};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub group: String,
    pub strategy: String,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub window: String,
    pub group: String,
    pub strategy: String,
    pub metrics: MetricsRow,
}

// csv cannot serialize flattened structs, so rows are written field by field
fn metric_record(prefix: &[&str], m: &MetricsRow) -> Vec<String> {
    prefix.iter().map(|s| s.to_string()).chain(m.values().iter().map(|v| v.to_string())).collect()
}

fn header(prefix: &[&str]) -> Vec<String> {
    prefix.iter().chain(super::METRIC_COLUMNS.iter()).map(|s| s.to_string()).collect()
}

pub fn write_metrics_table<W: Write>(w: W, rows: &[ReportRow]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(&["group", "strategy"]))?;
    for r in rows {
        out.write_record(metric_record(&[&r.group, &r.strategy], &r.metrics))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_window_table<W: Write>(w: W, rows: &[WindowRow]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(&["window", "group", "strategy"]))?;
    for r in rows {
        out.write_record(metric_record(&[&r.window, &r.group, &r.strategy], &r.metrics))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_metrics(rec: &csv::StringRecord, offset: usize) -> Result<MetricsRow, BacktestError> {
    let v: Vec<f64> = (0..9)
        .map(|k| {
            let s = rec.get(offset + k).unwrap_or("");
            s.trim().parse::<f64>().map_err(|_| BacktestError::Report(format!("bad metric value {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(MetricsRow {
        returns_ann: v[0],
        vol_ann: v[1],
        sharpe: v[2],
        downside_dev_ann: v[3],
        sortino: v[4],
        mdd: v[5],
        calmar: v[6],
        pct_positive: v[7],
        avg_p_over_avg_l: v[8],
    })
}

pub fn read_metrics_table<R: Read>(r: R) -> Result<Vec<ReportRow>, BacktestError> {
    let mut rdr = csv::Reader::from_reader(r);
    let expected = header(&["group", "strategy"]);
    if rdr.headers()?.iter().ne(expected.iter().map(String::as_str)) {
        return Err(BacktestError::Report("unexpected metrics table header".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ReportRow { group: rec[0].to_string(), strategy: rec[1].to_string(), metrics: parse_metrics(&rec, 2)? })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PortfolioRecord {
    date: NaiveDate,
    r#return: f64,
}

pub fn write_portfolio_returns<W: Write>(w: W, r: &[(NaiveDate, f64)]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    for &(date, v) in r {
        out.serialize(PortfolioRecord { date, r#return: v })?;
    }
    if r.is_empty() {
        out.write_record(["date", "return"])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AssetRecord {
    symbol: String,
    date: NaiveDate,
    position: f64,
    sigma: f64,
    captured: f64,
}

pub fn write_asset_returns<W: Write>(w: W, r: &StrategyReturns) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "date", "position", "sigma", "captured"])?;
    for (symbol, days) in &r.per_asset {
        for d in days {
            out.write_record([
                symbol.clone(),
                d.date.to_string(),
                d.position.to_string(),
                d.sigma.to_string(),
                d.captured.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_asset_returns<R: Read>(r: R) -> Result<StrategyReturns, BacktestError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut per_asset: BTreeMap<String, Vec<AssetDay>> = BTreeMap::new();
    for rec in rdr.deserialize() {
        let rec: AssetRecord = rec?;
        per_asset.entry(rec.symbol).or_default().push(AssetDay {
            date: rec.date,
            position: rec.position,
            sigma: rec.sigma,
            captured: rec.captured,
        });
    }
    Ok(StrategyReturns::from_assets(per_asset))
}

pub fn write_cost_curve<W: Write>(w: W, curve: &[CostPoint]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["C_bps", "sharpe"])?;
    for p in curve {
        out.write_record([p.c_bps.to_string(), p.sharpe.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Compounded equity `prod(1 + r)` per date.
pub fn equity_curve(r: &[(NaiveDate, f64)]) -> Vec<(NaiveDate, f64)> {
    r.iter()
        .scan(1.0, |e, &(d, v)| {
            *e *= 1.0 + v;
            Some((d, *e))
        })
        .collect()
}

pub fn write_equity_curve<W: Write>(w: W, r: &[(NaiveDate, f64)]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["date", "equity"])?;
    for (d, e) in equity_curve(r) {
        out.write_record([d.to_string(), e.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_position_averages<W: Write>(w: W, rows: &[(String, Vec<PositionAverages>)]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "date", "position", "sma_252", "sma_21"])?;
    for (symbol, series) in rows {
        for p in series {
            out.write_record([symbol.clone(), p.date.to_string(), p.position.to_string(), opt(p.long), opt(p.short)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_regimes<W: Write>(w: W, rows: &[(String, Vec<NaiveDate>)]) -> Result<(), BacktestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "changepoint_date"])?;
    for (symbol, dates) in rows {
        for d in dates {
            out.write_record([symbol.clone(), d.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
