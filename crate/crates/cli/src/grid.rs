//! Parsing of ε grids and sample points given on the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

fn parse_number(s: &str) -> CliResult<f64> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let b: f64 = base.trim().parse().map_err(|_| CliError::config(format!("bad base in '{s}'")))?;
        let e: i32 = exp.trim().parse().map_err(|_| CliError::config(format!("bad exponent in '{s}'")))?;
        return Ok(b.powi(e));
    }
    s.parse().map_err(|_| CliError::config(format!("cannot parse '{s}' as a number")))
}

/// `b^i..b^j` (every integer exponent between i and j), a comma list, or a single value.
pub fn parse_eps_grid(spec: &str) -> CliResult<Vec<f64>> {
    let spec = spec.trim();
    let values = if let Some((lo, hi)) = spec.split_once("..") {
        let split = |s: &str| -> CliResult<(f64, i32)> {
            let (b, e) = s
                .trim()
                .split_once('^')
                .ok_or_else(|| CliError::config(format!("range endpoint '{s}' must look like b^k")))?;
            let b = b.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad base in '{s}'")))?;
            let e = e.trim().parse::<i32>().map_err(|_| CliError::config(format!("bad exponent in '{s}'")))?;
            Ok((b, e))
        };
        let ((b1, e1), (b2, e2)) = (split(lo)?, split(hi)?);
        if b1 != b2 {
            return Err(CliError::config("range endpoints must share a base"));
        }
        let step = if e2 >= e1 { 1 } else { -1 };
        let mut out = Vec::new();
        let mut e = e1;
        loop {
            out.push(b1.powi(e));
            if e == e2 {
                break;
            }
            e += step;
        }
        out
    } else {
        spec.split(',').map(parse_number).collect::<CliResult<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(CliError::config("empty epsilon grid"));
    }
    if values.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(CliError::config("epsilon values must lie in (0, 1)"));
    }
    Ok(values)
}

/// Comma-separated coordinates of one point.
pub fn parse_point(spec: &str, dim: usize) -> CliResult<Vec<f64>> {
    let p = spec.split(',').map(parse_number).collect::<CliResult<Vec<_>>>()?;
    if p.len() != dim {
        return Err(CliError::config(format!("point '{spec}' has {} coordinates, expected {dim}", p.len())));
    }
    Ok(p)
}

/// `count` seeded uniform points in [0, 1)^dim.
pub fn unit_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect()
}
