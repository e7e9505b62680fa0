//! Angle and grid arguments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Radians, written as a number or a multiple/fraction of `pi`
/// (`pi`, `-pi`, `pi/2`, `0.5pi`, `2*pi`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_angle(s).map(Angle)
    }
}

fn parse_angle(raw: &str) -> Result<f64, String> {
    let s = raw.trim().to_ascii_lowercase().replace('π', "pi");
    let bad = || format!("cannot parse angle `{raw}`");
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&s[..pos], &s[pos + 2..]);
    let factor = match head.trim_end_matches('*') {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let divisor = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).ok_or_else(bad)?,
    };
    Ok(factor * PI / divisor)
}

/// Inclusive grid `lo:hi:count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    text: String,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.hi } else { self.lo + step * i as f64 }).collect()
    }

    /// Geometric spacing between positive endpoints.
    pub fn log_values(&self) -> Result<Vec<f64>, String> {
        if !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(format!("log grid `{}` needs positive endpoints", self.text));
        }
        if self.count == 1 {
            return Ok(vec![self.lo]);
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let step = (b - a) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| match i {
                0 => self.lo,
                _ if i + 1 == self.count => self.hi,
                _ => (a + step * i as f64).exp(),
            })
            .collect())
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(format!("grid `{s}` must look like lo:hi:count"));
        };
        let lo = parse_angle(lo)?;
        let hi = parse_angle(hi)?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad grid count in `{s}`"))?;
        if count == 0 {
            return Err(format!("grid `{s}` needs count >= 1"));
        }
        if count == 1 && lo != hi {
            return Err(format!("grid `{s}` with one point needs lo == hi"));
        }
        if hi < lo {
            return Err(format!("grid `{s}` needs lo <= hi"));
        }
        Ok(Grid { lo, hi, count, text: s.to_string() })
    }
}

impl TryFrom<String> for Grid {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.text
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
