//! Grid specifications: a single value `x` or an inclusive range `start:stop:count`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisError(String);

impl fmt::Display for AxisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AxisError {}

impl FromStr for Axis {
    type Err = AxisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| AxisError(format!("'{x}' is not a number")));
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [x] => vec![parse(x)?],
            [a, b, n] => {
                let (start, stop) = (parse(a)?, parse(b)?);
                let count: usize = n.trim().parse().map_err(|_| AxisError(format!("'{n}' is not a point count")))?;
                if count == 0 {
                    return Err(AxisError("an axis needs at least one point".into()));
                }
                if count > 1 && stop <= start {
                    return Err(AxisError(format!("axis {s} must be strictly increasing")));
                }
                sbsim_core::series::linspace(start, stop, count)
            }
            _ => return Err(AxisError(format!("'{s}' is neither a value nor start:stop:count"))),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AxisError(format!("axis {s} has non-finite entries")));
        }
        Ok(Axis { values })
    }
}

impl Axis {
    pub fn scaled(&self, factor: f64) -> Vec<f64> {
        self.values.iter().map(|v| v * factor).collect()
    }
}
