//! Universe files and report serialization.
//!
//! A universe is a CSV with header `id,alpha_mean,residual_var,beta` (row
//! order is asset order) plus a JSON config
//! `{"market_mean": .., "market_var": .., "riskless_rate": ..}` where
//! `riskless_rate` is optional. Unknown columns or keys are rejected, and a
//! number that overflows or underflows `f64` is an error rather than a clamp.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::universe::{
    validate_with, AssetSpec, AssetUniverse, ValidationReport, ValidationThresholds,
};

const COLUMNS: [&str; 4] = ["id", "alpha_mean", "residual_var", "beta"];
const CONFIG_KEYS: [&str; 3] = ["market_mean", "market_var", "riskless_rate"];

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses a decimal real, rejecting values that do not fit an `f64`.
pub fn parse_real(text: &str, location: &str) -> Result<f64> {
    let t = text.trim();
    let v: f64 = t
        .parse()
        .map_err(|_| parse_error(location, format!("{t:?} is not a number")))?;
    if !v.is_finite() {
        let lower = t.to_ascii_lowercase();
        let message = if lower.contains("inf") || lower.contains("nan") {
            format!("{t:?} is not a finite number")
        } else {
            format!("{t:?} overflows a double")
        };
        return Err(parse_error(location, message));
    }
    let mantissa = t.split(['e', 'E']).next().unwrap_or("");
    let nonzero_literal = mantissa.chars().any(|c| ('1'..='9').contains(&c));
    if nonzero_literal && (v == 0.0 || v.is_subnormal()) {
        return Err(parse_error(location, format!("{t:?} underflows a double")));
    }
    Ok(v)
}

/// Asset rows from CSV text.
pub fn parse_assets<R: Read>(reader: R) -> Result<Vec<AssetSpec>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error("row 1", e.to_string()))?
        .clone();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (k, h) in headers.iter().enumerate() {
        let Some(col) = COLUMNS.iter().find(|c| **c == h) else {
            return Err(parse_error(
                format!("row 1, column {}", k + 1),
                format!("unknown column {h:?}"),
            ));
        };
        if index.insert(col, k).is_some() {
            return Err(parse_error(
                format!("row 1, column {}", k + 1),
                format!("duplicate column {h:?}"),
            ));
        }
    }
    if let Some(missing) = COLUMNS.iter().find(|c| !index.contains_key(*c)) {
        return Err(parse_error("row 1", format!("missing column {missing:?}")));
    }

    let mut assets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            parse_error(format!("row {row}"), e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() > headers.len() {
            return Err(parse_error(
                format!("row {row}"),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let field = |name: &str| -> Result<&str> {
            match record.get(index[name]) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(parse_error(
                    format!("row {row}, column {name}"),
                    "missing field",
                )),
            }
        };
        let real = |name: &str| -> Result<f64> {
            parse_real(field(name)?, &format!("row {row}, column {name}"))
        };
        assets.push(AssetSpec {
            id: field("id")?.to_string(),
            alpha_mean: real("alpha_mean")?,
            residual_var: real("residual_var")?,
            beta: real("beta")?,
        });
    }
    Ok(assets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    pub market_mean: f64,
    pub market_var: f64,
    pub riskless_rate: Option<f64>,
}

pub fn parse_config(text: &str) -> Result<MarketConfig> {
    let map: HashMap<String, Box<RawValue>> =
        serde_json::from_str(text).map_err(|e| parse_error("config", e.to_string()))?;
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    for k in keys {
        if !CONFIG_KEYS.contains(&k.as_str()) {
            return Err(parse_error(format!("config key {k:?}"), "unknown key"));
        }
    }
    let get = |key: &str| -> Result<Option<f64>> {
        match map.get(key) {
            None => Ok(None),
            Some(raw) if raw.get() == "null" => Ok(None),
            Some(raw) => {
                let s = raw.get();
                if s.starts_with('"') {
                    return Err(parse_error(
                        format!("config key {key:?}"),
                        "expected a number",
                    ));
                }
                parse_real(s, &format!("config key {key:?}")).map(Some)
            }
        }
    };
    let required = |key: &str| -> Result<f64> {
        get(key)?.ok_or_else(|| parse_error(format!("config key {key:?}"), "missing"))
    };
    Ok(MarketConfig {
        market_mean: required("market_mean")?,
        market_var: required("market_var")?,
        riskless_rate: get("riskless_rate")?,
    })
}

/// Reads and validates a universe. Violations are fatal; the validation
/// report (with any warnings) is returned alongside.
pub fn load_universe(
    csv_path: &Path,
    config_path: &Path,
    thresholds: &ValidationThresholds,
) -> Result<(AssetUniverse, ValidationReport)> {
    let assets = parse_assets(File::open(csv_path)?)?;
    let config = parse_config(&std::fs::read_to_string(config_path)?)?;
    let universe = AssetUniverse {
        assets,
        market_mean: config.market_mean,
        market_var: config.market_var,
        riskless_rate: config.riskless_rate,
    };
    let report = validate_with(&universe, thresholds);
    if !report.is_valid() {
        return Err(Error::Validation(report.violations));
    }
    Ok((universe, report))
}

/// Pretty JSON printer that writes every float with 17 significant digits.
struct SigDigitFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Formatter for SigDigitFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let fmt = SigDigitFormatter {
        pretty: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
