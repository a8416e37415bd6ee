//! Return-series ingestion from CSV.
//!
//! Two layouts are accepted: a `return` column (log-returns used as-is)
//! or a `price` column (converted to log-returns). Header matching is
//! case-insensitive; extra columns such as `date` are ignored.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Log-returns from consecutive prices.
pub fn returns_from_prices(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::Contract("need at least two prices".into()));
    }
    if prices.iter().any(|&p| p <= 0.0) {
        return Err(Error::Config("prices must be strictly positive".into()));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Reads a CSV file with header `date,price`, `price`, or `return` and
/// produces log-returns.
pub fn read_return_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_return_series(&text)
}

pub(crate) fn parse_return_series(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    let columns: Vec<String> = header
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();

    let (column, is_price) = if let Some(i) = columns.iter().position(|c| c == "return") {
        (i, false)
    } else if let Some(i) = columns.iter().position(|c| c == "price") {
        (i, true)
    } else {
        return Err(Error::Format(
            "CSV header must contain a `return` or `price` column".into(),
        ));
    };

    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let field = line.split(',').nth(column).ok_or_else(|| {
            Error::Format(format!("line {}: missing column {}", lineno + 2, column))
        })?;
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::Format(format!("line {}: cannot parse `{}`", lineno + 2, field))
        })?;
        values.push(v);
    }
    if is_price {
        returns_from_prices(&values)
    } else if values.is_empty() {
        Err(Error::Format("CSV holds no data rows".into()))
    } else {
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_price_column() {
        let csv = "date,price\n2024-01-01,100\n2024-02-01,110\n2024-03-01,99\n";
        let r = parse_return_series(csv).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - (110.0f64 / 100.0).ln()).abs() < 1e-15);
        assert!((r[1] - (99.0f64 / 110.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn parses_return_column() {
        let csv = "return\n0.01\n-0.02\n";
        assert_eq!(parse_return_series(csv).unwrap(), vec![0.01, -0.02]);
    }

    #[test]
    fn rejects_unknown_header() {
        assert!(parse_return_series("foo,bar\n1,2\n").is_err());
    }

    #[test]
    fn rejects_garbage_field() {
        assert!(parse_return_series("return\nabc\n").is_err());
    }
}
