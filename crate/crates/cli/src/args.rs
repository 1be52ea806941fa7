//! Value parsers for sweep ranges and angles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Parse a real number or a multiple of pi: `1.5`, `pi`, `-pi/2`, `3pi/4`,
/// `0.5*pi`, `2*pi/3`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    if t.is_empty() {
        return Err("empty value".into());
    }
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| format!("invalid number '{s}'"));
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let factor = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| format!("invalid multiple of pi '{s}'"))?,
    };
    let divisor = match tail {
        "" => 1.0,
        t => {
            let d = t
                .strip_prefix('/')
                .ok_or_else(|| format!("invalid angle '{s}'"))?
                .parse::<f64>()
                .map_err(|_| format!("invalid divisor in '{s}'"))?;
            if d == 0.0 {
                return Err(format!("division by zero in '{s}'"));
            }
            d
        }
    };
    Ok(factor * PI / divisor)
}

/// A single value, a comma-separated list, or `start:stop:step` (stop
/// included when it lies on the grid).
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub values: Vec<f64>,
    text: String,
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [single] => single.split(',').map(parse_angle).collect::<Result<Vec<_>, _>>()?,
            [start, stop, step] => {
                let (a, b, h) = (parse_angle(start)?, parse_angle(stop)?, parse_angle(step)?);
                if !(h > 0.0) {
                    return Err(format!("step must be positive in '{s}'"));
                }
                if b < a {
                    return Err(format!("empty range '{s}'"));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize;
                (0..=n).map(|i| a + h * i as f64).collect()
            }
            _ => return Err(format!("expected VALUE, LIST or START:STOP:STEP, got '{s}'")),
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(format!("invalid range '{s}'"));
        }
        Ok(Self {
            values,
            text: s.to_string(),
        })
    }
}

/// Strictly positive float, for tolerances.
pub fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("tolerance must be positive, got {s}"))
    }
}
