use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{CategoryId, Correlation, MetricReport, ReportRow};

const HEADER: [&str; 5] = ["system", "metric", "category", "value", "log_value"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParameter {
                name: "format",
                value: other.to_string(),
                expected: "csv or json",
            }),
        }
    }
}

/// Renders `x` with six significant digits, switching to exponent notation
/// for very large or small magnitudes.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        trim_zeros(format!("{:.*}", (5 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Renders a natural-log value with four decimals.
pub fn format_log(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

fn round_log(x: f64) -> f64 {
    format_log(x).parse().unwrap_or(x)
}

pub fn write_report(report: &MetricReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => write_csv(report),
        ReportFormat::Json => write_json(report),
    }
}

fn write_csv(report: &MetricReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for row in report.sorted_rows() {
        w.write_record([
            row.system.as_str(),
            row.metric.as_str(),
            row.category.as_ref().map_or("", |c| c.as_str()),
            &format_sig(row.value),
            &row.log_value.map(format_log).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    out.push_str(
        &String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"),
    );
    out
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    system: String,
    metric: String,
    category: Option<CategoryId>,
    value: Value,
    log_value: Value,
    #[serde(default)]
    underflow: bool,
}

#[derive(Serialize, Deserialize)]
struct JsonCorrelation {
    a: String,
    b: String,
    tau: f64,
    p_value: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    metadata: BTreeMap<String, String>,
    rows: Vec<JsonRow>,
    #[serde(default)]
    orderings: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    correlations: Vec<JsonCorrelation>,
}

// JSON has no infinities, so non-finite values travel as strings.
fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format_sig(x)), Value::Number)
}

fn from_value(v: &Value, what: &str) -> Result<Option<f64>> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => Ok(n.as_f64()),
        Value::String(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::parse(0, format!("{what} `{s}` is not numeric"))),
        other => Err(Error::parse(0, format!("{what} {other} is not numeric"))),
    }
}

fn write_json(report: &MetricReport) -> String {
    let doc = JsonReport {
        metadata: report.metadata.clone(),
        rows: report
            .sorted_rows()
            .into_iter()
            .map(|r| JsonRow {
                system: r.system.clone(),
                metric: r.metric.clone(),
                category: r.category.clone(),
                value: number(round_sig(r.value)),
                log_value: r.log_value.map_or(Value::Null, |l| number(round_log(l))),
                underflow: r.underflows(),
            })
            .collect(),
        orderings: report.orderings.clone(),
        correlations: report
            .correlations
            .iter()
            .map(|((a, b), c)| JsonCorrelation {
                a: a.clone(),
                b: b.clone(),
                tau: c.tau,
                p_value: c.p_value,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable report");
    s.push('\n');
    s
}

/// Reads a report produced by [`write_report`]; JSON is recognised by a
/// leading `{`.
pub fn read_report(text: &str) -> Result<MetricReport> {
    if text.trim_start().starts_with('{') {
        read_json(text)
    } else {
        read_csv(text)
    }
}

fn read_json(text: &str) -> Result<MetricReport> {
    let doc: JsonReport =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let mut report = MetricReport::new();
    report.metadata = doc.metadata;
    report.orderings = doc.orderings;
    for c in doc.correlations {
        report.correlations.insert(
            (c.a, c.b),
            Correlation {
                tau: c.tau,
                p_value: c.p_value,
            },
        );
    }
    for r in doc.rows {
        let value = from_value(&r.value, "value")?.unwrap_or(f64::NAN);
        let log_value = from_value(&r.log_value, "log value")?;
        report.push(ReportRow {
            system: r.system,
            metric: r.metric,
            category: r.category,
            value,
            log_value,
        })?;
    }
    Ok(report)
}

fn read_csv(text: &str) -> Result<MetricReport> {
    let mut report = MetricReport::new();
    let mut body_start = 0;
    let mut skipped = 0;
    for line in text.split_inclusive('\n') {
        let Some(meta) = line.strip_prefix('#') else {
            break;
        };
        let meta = meta.trim();
        if let Some((k, v)) = meta.split_once('=') {
            report
                .metadata
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        body_start += line.len();
        skipped += 1;
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(&text.as_bytes()[body_start..]);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(skipped + 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::parse(
            skipped + 1,
            format!("expected header `{}`", HEADER.join(",")),
        ));
    }
    for (i, rec) in rdr.records().enumerate() {
        let no = skipped + i + 2;
        let rec = rec.map_err(|e| Error::parse(no, e.to_string()))?;
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(no, format!("{what} `{s}` is not numeric")))
        };
        let category = match &rec[2] {
            "" => None,
            c => Some(CategoryId::new(c).map_err(|e| Error::parse(no, e.to_string()))?),
        };
        let log_value = match &rec[4] {
            "" => None,
            l => Some(num(l, "log value")?),
        };
        report
            .push(ReportRow {
                system: rec[0].to_string(),
                metric: rec[1].to_string(),
                category,
                value: num(&rec[3], "value")?,
                log_value,
            })
            .map_err(|e| Error::parse(no, e.to_string()))?;
    }
    Ok(report)
}
