//! Flat CSV rows shared by every evaluation report.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const BASE_HEADER: [&str; 8] = ["setting", "method", "feature", "trait", "metric", "value", "n", "p_value"];
const SAMPLING_HEADER: [&str; 2] = ["tweet_count", "replicate"];

/// One CSV line. Empty strings and `None` stand for "not applicable".
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub setting: String,
    pub method: String,
    pub feature: String,
    pub trait_key: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub p_value: Option<f64>,
    pub tweet_count: Option<usize>,
    pub replicate: Option<usize>,
}

impl ReportRow {
    pub(crate) fn new(setting: &str, method: &str, feature: &str, trait_key: &str, metric: &str, value: f64, n: usize) -> Self {
        ReportRow {
            setting: setting.into(),
            method: method.into(),
            feature: feature.into(),
            trait_key: trait_key.into(),
            metric: metric.into(),
            value,
            n,
            p_value: None,
            tweet_count: None,
            replicate: None,
        }
    }

    pub(crate) fn with_p(mut self, p: Option<f64>) -> Self {
        self.p_value = p;
        self
    }

    pub(crate) fn with_sample(mut self, tweet_count: usize, replicate: Option<usize>) -> Self {
        self.tweet_count = Some(tweet_count);
        self.replicate = replicate;
        self
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes rows; the sampling columns are added when any row carries a
/// tweet count. Floats use the shortest representation that parses back
/// to the same value.
pub fn write_report_csv<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let sampling = rows.iter().any(|r| r.tweet_count.is_some());
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = BASE_HEADER.to_vec();
    if sampling {
        header.extend(SAMPLING_HEADER);
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.setting.clone(),
            r.method.clone(),
            r.feature.clone(),
            r.trait_key.clone(),
            r.metric.clone(),
            r.value.to_string(),
            r.n.to_string(),
            opt(r.p_value),
        ];
        if sampling {
            rec.push(opt(r.tweet_count));
            rec.push(opt(r.replicate));
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        what: "report",
        line,
        message: format!("bad {col} value {s:?}"),
    })
}

pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let sampling = header.len() == BASE_HEADER.len() + SAMPLING_HEADER.len();
    let expected: Vec<&str> = BASE_HEADER
        .iter()
        .chain(if sampling { &SAMPLING_HEADER[..] } else { &[] })
        .copied()
        .collect();
    if header != expected {
        return Err(Error::Parse {
            what: "report",
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let need = |col: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Parse {
                what: "report",
                line,
                message: format!("missing {col}"),
            })
        };
        rows.push(ReportRow {
            setting: rec[0].to_owned(),
            method: rec[1].to_owned(),
            feature: rec[2].to_owned(),
            trait_key: rec[3].to_owned(),
            metric: rec[4].to_owned(),
            value: need("value", parse_opt(&rec[5], line, "value")?)?,
            n: parse_opt(&rec[6], line, "n")?.ok_or_else(|| Error::Parse {
                what: "report",
                line,
                message: "missing n".into(),
            })?,
            p_value: parse_opt(&rec[7], line, "p_value")?,
            tweet_count: if sampling { parse_opt(&rec[8], line, "tweet_count")? } else { None },
            replicate: if sampling { parse_opt(&rec[9], line, "replicate")? } else { None },
        });
    }
    Ok(rows)
}
