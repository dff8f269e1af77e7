//! Parameter sweeps and self-describing CSV tables.
//!
//! An axis is written `name:min:max:count[:log]`, for example `chi:0:0.2:41`
//! or `sigma:0.01:1000:60:log`. Several axes span their Cartesian product,
//! with the last axis varying fastest.
//!
//! Tables start with `# key = value` metadata lines, followed by a header row
//! and numeric rows. Any CSV reader that skips `#` comments can load them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{domain, Error, Result};

/// Quantities that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    V,
    Sigma,
    Chi,
    EtaMin,
    SigmaB,
    W,
    SigmaEta,
    NPoints,
}

impl Param {
    pub const ALL: [Param; 8] = [
        Param::V,
        Param::Sigma,
        Param::Chi,
        Param::EtaMin,
        Param::SigmaB,
        Param::W,
        Param::SigmaEta,
        Param::NPoints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::V => "V",
            Param::Sigma => "sigma",
            Param::Chi => "chi",
            Param::EtaMin => "eta_min",
            Param::SigmaB => "sigma_b",
            Param::W => "W",
            Param::SigmaEta => "sigma_eta",
            Param::NPoints => "n_points",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
                domain(format!("unknown sweep parameter '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// One swept parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl Axis {
    pub fn new(param: Param, min: f64, max: f64, count: usize, log: bool) -> Result<Self> {
        if count < 2 {
            return Err(domain(format!("sweep over {param} needs at least 2 points, got {count}")));
        }
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(domain(format!("sweep over {param} needs min < max, got {min}..{max}")));
        }
        if log && !(min > 0.0) {
            return Err(domain(format!("log sweep over {param} needs min > 0")));
        }
        Ok(Self {
            param,
            min,
            max,
            count,
            log,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.count {
                    self.max
                } else if self.log {
                    (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(domain(format!("sweep '{s}' must look like name:min:max:count[:log]")));
        }
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("sweep '{s}': '{t}' is not a number")))
        };
        let count = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|_| domain(format!("sweep '{s}': '{}' is not a count", parts[3])))?;
        let log = match parts.get(4).map(|t| t.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(domain(format!("sweep '{s}': unknown scale '{other}'"))),
        };
        Axis::new(parts[0].trim().parse()?, num(parts[1])?, num(parts[2])?, count, log)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.param, self.min, self.max, self.count)?;
        if self.log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

/// A set of axes; each point assigns one value to every swept parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.param == a.param) {
                return Err(domain(format!("parameter {} is swept twice", a.param)));
            }
        }
        Ok(Self { axes })
    }

    pub fn contains(&self, p: Param) -> bool {
        self.axes.iter().any(|a| a.param == p)
    }

    /// Cartesian product of the axes; a spec without axes has one empty point.
    pub fn points(&self) -> Vec<Vec<(Param, f64)>> {
        let mut out: Vec<Vec<(Param, f64)>> = vec![Vec::new()];
        for axis in &self.axes {
            let values = axis.values();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((axis.param, v));
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// A numeric table with metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl fmt::Display) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Structural(format!(
                "row has {} columns, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to(&self, out: &mut dyn Write) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "# columns: {}", self.header.join(", "))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_value(*x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Structural(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let metadata = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 2,
                        message: format!("'{f}' is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self {
            metadata,
            header,
            rows,
        })
    }
}

fn format_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}
