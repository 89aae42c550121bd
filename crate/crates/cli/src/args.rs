//! Flag value types shared by the subcommands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::table::round_sig;

/// A list of reals given as `start:stop:step` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| -> Result<f64, String> {
        let x: f64 = t.trim().parse().map_err(|_| format!("{t:?} is not a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("{t:?} is not finite"))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 {
                return Err("grid step must be positive".into());
            }
            if stop < start {
                return Err("grid stop must not be below start".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err("grid has more than a million points".into());
            }
            (0..=n).map(|i| round_sig(start + i as f64 * step)).collect()
        }
        _ => return Err("expected start:stop:step or a comma-separated list".into()),
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(values))
}

/// Positive integers given as `a,b,c` or an inclusive range `lo:hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntList(pub Vec<u32>);

pub fn parse_int_list(s: &str) -> Result<IntList, String> {
    let int = |t: &str| -> Result<u32, String> {
        match t.trim().parse::<u32>() {
            Ok(0) => Err("values must be positive".into()),
            Ok(v) => Ok(v),
            Err(_) => Err(format!("{t:?} is not a positive integer")),
        }
    };
    let values = match s.split_once(':') {
        Some((lo, hi)) => {
            let (lo, hi) = (int(lo)?, int(hi)?);
            if hi < lo {
                return Err("range end must not be below its start".into());
            }
            (lo..=hi).collect()
        }
        None => s.split(',').map(int).collect::<Result<Vec<_>, _>>()?,
    };
    Ok(IntList(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Where results go. Not part of the recorded parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct Destination {
    /// Output file (or directory for multi-file results); stdout when absent.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,

    /// Manifest path for stdout output. File outputs always get a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g = parse_grid("0.51:0.99:0.02").unwrap().0;
        assert_eq!(g.len(), 25);
        assert_eq!((g[0], g[1], g[24]), (0.51, 0.53, 0.99));
        assert_eq!(parse_grid("0.5, 0.7,0.9").unwrap().0, vec![0.5, 0.7, 0.9]);
        assert_eq!(parse_grid("1:1:0.5").unwrap().0, vec![1.0]);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn int_forms() {
        assert_eq!(parse_int_list("2:5").unwrap().0, vec![2, 3, 4, 5]);
        assert_eq!(parse_int_list("1,3,9").unwrap().0, vec![1, 3, 9]);
        assert!(parse_int_list("0,1").is_err());
        assert!(parse_int_list("5:2").is_err());
    }
}
