use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::BacktestError;

/// One expanding-window cycle; all bounds are January 1st and half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

impl Window {
    pub fn label(&self) -> String {
        use chrono::Datelike;
        format!("{}-{}", self.test_start.year(), self.test_end.year())
    }
}

fn jan1(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 1, 1).expect("year in range")
}

/// Training always starts at `start_year`; test spans of `step` years follow
/// until `end_year`.
pub fn plan_windows(start_year: i32, end_year: i32, step: u32) -> Result<Vec<Window>, BacktestError> {
    let step = step as i32;
    if step == 0 || end_year - start_year < 2 * step {
        return Err(BacktestError::SpanTooShort { start_year, end_year, step: step as u32 });
    }
    let mut out = Vec::new();
    let mut split = start_year + step;
    while split + step <= end_year {
        out.push(Window {
            train_start: jan1(start_year),
            train_end: jan1(split),
            test_start: jan1(split),
            test_end: jan1(split + step),
        });
        split += step;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;

    #[test]
    fn thirty_years_give_five_windows() {
        let w = plan_windows(1990, 2020, 5).unwrap();
        let ends: Vec<i32> = w.iter().map(|w| w.test_end.year()).collect();
        assert_eq!(ends, vec![2000, 2005, 2010, 2015, 2020]);
        assert_eq!(w[0].train_end, jan1(1995));
        assert_eq!(w[4].train_start, jan1(1990));
        assert_eq!(w[4].label(), "2015-2020");
        for pair in w.windows(2) {
            assert!(pair[1].train_end > pair[0].train_end);
            assert_eq!(pair[1].test_start, pair[0].test_end);
        }
        assert!(w.iter().all(|w| w.train_end == w.test_start));
    }

    #[test]
    fn short_spans() {
        assert_eq!(plan_windows(1990, 2000, 5).unwrap().len(), 1);
        assert_eq!(plan_windows(1990, 2004, 5).unwrap().len(), 1);
        assert!(plan_windows(1990, 1994, 5).is_err());
        assert!(plan_windows(1990, 2000, 0).is_err());
    }
}
