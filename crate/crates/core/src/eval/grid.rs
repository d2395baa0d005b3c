//! Sweep grid strings: `lo:hi:n` (inclusive linspace) or a comma list.

use super::EvalError;

const MAX_POINTS: usize = 10_000;

fn number(s: &str) -> Result<f64, EvalError> {
    let v: f64 = s.trim().parse().map_err(|_| EvalError::Grid(format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Grid(format!("non-finite value {s:?}")))
    }
}

/// Parses a grid and checks that it is non-empty and strictly increasing.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, EvalError> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (number(lo)?, number(hi)?);
            let n: usize = n.trim().parse().map_err(|_| EvalError::Grid(format!("bad point count {n:?}")))?;
            if n == 0 || n > MAX_POINTS {
                return Err(EvalError::Grid(format!("point count {n} outside 1..={MAX_POINTS}")));
            }
            if n == 1 {
                if lo != hi {
                    return Err(EvalError::Grid("a single point needs lo == hi".into()));
                }
                vec![lo]
            } else {
                let step = (hi - lo) / (n - 1) as f64;
                (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
            }
        }
        [list] => {
            let v = list.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
            if v.len() > MAX_POINTS {
                return Err(EvalError::Grid(format!("more than {MAX_POINTS} points")));
            }
            v
        }
        _ => return Err(EvalError::Grid(format!("expected lo:hi:n or a comma list, got {s:?}"))),
    };
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvalError::Grid("grid must be strictly increasing".into()));
    }
    Ok(grid)
}
