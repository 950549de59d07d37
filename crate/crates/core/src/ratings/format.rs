//! Input formats and dataset presets.
//!
//! Supported layouts:
//! * `csv`: `user_id,item_id,rating`, optional header line, extra columns ignored.
//! * `ml100k`: MovieLens-100K `u.data`: `user \t item \t rating \t timestamp`.
//! * `ml1m`: MovieLens-1M `ratings.dat`: `user::item::rating::timestamp`.
//! * `jester`: one row per user: the count of rated jokes followed by one
//!   rating per joke on the −10..+10 scale, `99` marking a missing rating.
//!   Separators may be commas, tabs or spaces. Ratings are used unchanged.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{natural_id_cmp, Rating, RatingsMatrix};
use crate::{Error, Result, Scalar};

const JESTER_MISSING: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Ml100k,
    Ml1m,
    Jester,
}

impl Format {
    pub fn tag(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ml100k => "ml100k",
            Format::Ml1m => "ml1m",
            Format::Jester => "jester",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "ml100k" => Ok(Format::Ml100k),
            "ml1m" => Ok(Format::Ml1m),
            "jester" => Ok(Format::Jester),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// How a ratings file is read and filtered.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub format: Format,
    pub min_rpi: usize,
    /// Inclusive rating bounds; ratings outside are parse errors.
    pub scale: Option<(f64, f64)>,
}

impl DatasetSpec {
    pub fn new(format: Format, min_rpi: usize) -> Self {
        Self {
            format,
            min_rpi,
            scale: None,
        }
    }

    pub fn with_scale(mut self, lo: f64, hi: f64) -> Self {
        self.scale = Some((lo, hi));
        self
    }
}

/// Per-dataset defaults: minimum ratings per item and SVD rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub format: Format,
    pub min_rpi: usize,
    pub k: usize,
    pub scale: Option<(f64, f64)>,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "jester1",
        format: Format::Jester,
        min_rpi: 1,
        k: 100,
        scale: Some((-10.0, 10.0)),
    },
    Preset {
        name: "jester2",
        format: Format::Jester,
        min_rpi: 1,
        k: 140,
        scale: Some((-10.0, 10.0)),
    },
    Preset {
        name: "musiclab-weak",
        format: Format::Csv,
        min_rpi: 1,
        k: 48,
        scale: None,
    },
    Preset {
        name: "musiclab-strong",
        format: Format::Csv,
        min_rpi: 1,
        k: 48,
        scale: None,
    },
    Preset {
        name: "ml100k",
        format: Format::Ml100k,
        min_rpi: 50,
        k: 603,
        scale: Some((1.0, 5.0)),
    },
    Preset {
        name: "ml1m",
        format: Format::Ml1m,
        min_rpi: 50,
        k: 2514,
        scale: Some((1.0, 5.0)),
    },
    Preset {
        name: "ml10m",
        format: Format::Ml1m,
        min_rpi: 50,
        k: 1500,
        scale: Some((0.5, 5.0)),
    },
    Preset {
        name: "beeradvocate",
        format: Format::Csv,
        min_rpi: 20,
        k: 1500,
        scale: None,
    },
    Preset {
        name: "ratebeer",
        format: Format::Csv,
        min_rpi: 20,
        k: 1500,
        scale: None,
    },
    Preset {
        name: "finefoods",
        format: Format::Csv,
        min_rpi: 20,
        k: 1500,
        scale: None,
    },
    Preset {
        name: "wine",
        format: Format::Csv,
        min_rpi: 20,
        k: 1500,
        scale: None,
    },
    Preset {
        name: "netflix",
        format: Format::Csv,
        min_rpi: 100,
        k: 1500,
        scale: None,
    },
];

impl Preset {
    pub fn find(name: &str) -> Option<&'static Preset> {
        PRESETS.iter().find(|p| p.name == name)
    }

    pub fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            format: self.format,
            min_rpi: self.min_rpi,
            scale: self.scale,
        }
    }
}

struct RawRating {
    user: String,
    item: String,
    value: f64,
    line: u64,
}

/// Reads and filters a ratings file.
pub fn load_ratings<T: Scalar>(path: &Path, spec: &DatasetSpec) -> Result<RatingsMatrix<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(BufReader::new(file), path, spec)
}

/// Like [`load_ratings`] over any reader; `origin` labels error messages.
pub fn read_ratings<T: Scalar, R: Read>(reader: R, origin: &Path, spec: &DatasetSpec) -> Result<RatingsMatrix<T>> {
    if spec.min_rpi == 0 {
        return Err(Error::Domain {
            name: "min_rpi",
            value: 0.0,
            domain: ">= 1",
        });
    }
    let raw = match spec.format {
        Format::Csv => parse_delimited(reader, origin, b',', true)?,
        Format::Ml100k => parse_delimited(reader, origin, b'\t', false)?,
        Format::Ml1m => parse_double_colon(BufReader::new(reader), origin)?,
        Format::Jester => parse_jester(BufReader::new(reader), origin)?,
    };
    if let Some((lo, hi)) = spec.scale {
        if let Some(bad) = raw.iter().find(|r| r.value < lo || r.value > hi) {
            return Err(parse_err(
                origin,
                bad.line,
                format!("rating {} outside scale [{lo}, {hi}]", bad.value),
            ));
        }
    }
    assemble(raw, origin)?.filter_min_rpi(spec.min_rpi)
}

fn parse_err(origin: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(origin),
        line,
        message: message.into(),
    }
}

fn parse_value(origin: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(origin, line, format!("invalid rating `{field}`")))
}

fn parse_delimited<R: Read>(reader: R, origin: &Path, delimiter: u8, header_allowed: bool) -> Result<Vec<RawRating>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(origin, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 3 {
            return Err(parse_err(
                origin,
                line,
                format!("expected at least 3 fields, found {}", rec.len()),
            ));
        }
        let is_first = std::mem::take(&mut first);
        if is_first && header_allowed && rec[2].parse::<f64>().is_err() {
            continue;
        }
        out.push(RawRating {
            user: rec[0].to_string(),
            item: rec[1].to_string(),
            value: parse_value(origin, line, &rec[2])?,
            line,
        });
    }
    Ok(out)
}

fn parse_double_colon<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() < 3 {
            return Err(parse_err(
                origin,
                line_no,
                format!(
                    "expected `user::item::rating[::timestamp]`, found {} fields",
                    fields.len()
                ),
            ));
        }
        out.push(RawRating {
            user: fields[0].trim().to_string(),
            item: fields[1].trim().to_string(),
            value: parse_value(origin, line_no, fields[2])?,
            line: line_no,
        });
    }
    Ok(out)
}

fn parse_jester<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    let mut user = 0usize;
    let mut width: Option<usize> = None;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 2 {
            return Err(parse_err(origin, line_no, "row has no ratings"));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    origin,
                    line_no,
                    format!("expected {w} fields like the first row, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        user += 1;
        // fields[0] is the count of rated jokes
        for (j, f) in fields[1..].iter().enumerate() {
            let v = parse_value(origin, line_no, f)?;
            if v == JESTER_MISSING {
                continue;
            }
            out.push(RawRating {
                user: user.to_string(),
                item: (j + 1).to_string(),
                value: v,
                line: line_no,
            });
        }
    }
    Ok(out)
}

fn assemble<T: Scalar>(raw: Vec<RawRating>, origin: &Path) -> Result<RatingsMatrix<T>> {
    let index = |ids: Vec<&str>| -> (Vec<String>, HashMap<String, usize>) {
        let mut ids: Vec<String> = ids.into_iter().map(str::to_string).collect();
        ids.sort_by(|a, b| natural_id_cmp(a, b));
        ids.dedup();
        let map = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        (ids, map)
    };
    let (user_ids, users) = index(raw.iter().map(|r| r.user.as_str()).collect());
    let (item_ids, items) = index(raw.iter().map(|r| r.item.as_str()).collect());

    let mut seen: HashMap<(usize, usize), u64> = HashMap::with_capacity(raw.len());
    let mut entries = Vec::with_capacity(raw.len());
    for r in &raw {
        let cell = (users[&r.user], items[&r.item]);
        if let Some(prev) = seen.insert(cell, r.line) {
            return Err(parse_err(
                origin,
                r.line,
                format!(
                    "duplicate rating for user `{}` item `{}` (first seen on line {prev})",
                    r.user, r.item
                ),
            ));
        }
        entries.push(Rating {
            user: cell.0,
            item: cell.1,
            value: T::of(r.value),
        });
    }
    RatingsMatrix::with_ids(user_ids, item_ids, entries)
}
