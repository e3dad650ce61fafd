//! Parsers for the list-valued command-line flags.

use remlab::CoordBox;

/// Largest number of values a `--beta` range may expand to.
pub const MAX_BETAS: usize = 100_000;

fn number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let v = match t {
        "inf" | "+inf" | "infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"))?,
    };
    if v.is_nan() {
        return Err(format!("not a number: {t:?}"));
    }
    Ok(v)
}

fn finite(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if !v.is_finite() {
        return Err(format!("value must be finite: {s:?}"));
    }
    Ok(v)
}

/// `--beta`: a comma list `0.5,1,2` or an inclusive range `start:stop:step`.
pub fn parse_betas(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("beta list is empty".into());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("beta range must be start:stop:step, got {s:?}"));
        }
        let (start, stop, step) = (finite(parts[0])?, finite(parts[1])?, finite(parts[2])?);
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(format!("beta range step {step} does not lead from {start} to {stop}"));
        }
        let span = (stop - start) / step;
        // small slack so that 0:2.5:0.25 includes 2.5
        let count = (span + 1e-9).floor() + 1.0;
        if !(count <= MAX_BETAS as f64) {
            return Err(format!("beta range expands to more than {MAX_BETAS} values"));
        }
        return Ok((0..count as usize).map(|k| start + k as f64 * step).collect());
    }
    let values = s.split(',').map(finite).collect::<Result<Vec<_>, _>>()?;
    if values.len() > MAX_BETAS {
        return Err(format!("more than {MAX_BETAS} beta values"));
    }
    Ok(values)
}

/// `--n`: strictly increasing comma list of positive sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<u32>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("N list is empty".into());
    }
    let values = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| format!("not a positive integer: {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.contains(&0) {
        return Err("N must be positive".into());
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err("N list must be strictly increasing".into());
    }
    Ok(values)
}

/// `--box`: `a,b` per coordinate, coordinates separated by `;`; bounds may
/// be `inf` or `-inf`.
pub fn parse_box(s: &str) -> Result<CoordBox, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("box is empty".into());
    }
    let mut intervals = Vec::new();
    for part in s.split(';') {
        let ends: Vec<&str> = part.split(',').collect();
        if ends.len() != 2 {
            return Err(format!("box coordinate must be a,b: got {part:?}"));
        }
        intervals.push((number(ends[0])?, number(ends[1])?));
    }
    CoordBox::new(intervals).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_lists_and_ranges() {
        assert_eq!(parse_betas("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        let r = parse_betas("0:2.5:0.25").unwrap();
        assert_eq!(r.len(), 11);
        assert_eq!(r[10], 2.5);
        assert_eq!(parse_betas("2:0:-1").unwrap(), vec![2.0, 1.0, 0.0]);
        assert!(parse_betas("").is_err());
        assert!(parse_betas("0:1:0").is_err());
        assert!(parse_betas("0:1:-0.1").is_err());
        assert!(parse_betas("0:1e9:1e-9").is_err());
        assert!(parse_betas("1,inf").is_err());
        assert!(parse_betas("1,,2").is_err());
    }

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("12,16,20").unwrap(), vec![12, 16, 20]);
        assert!(parse_sizes("16,12").is_err());
        assert!(parse_sizes("0,1").is_err());
        assert!(parse_sizes("-3").is_err());
    }

    #[test]
    fn boxes() {
        let b = parse_box("0.5,0.6").unwrap();
        assert_eq!(b.intervals(), &[(0.5, 0.6)]);
        let b = parse_box("-inf,0; 0.1,inf").unwrap();
        assert_eq!(b.intervals(), &[(f64::NEG_INFINITY, 0.0), (0.1, f64::INFINITY)]);
        assert!(parse_box("0.6,0.5").is_err());
        assert!(parse_box("1").is_err());
        assert!(parse_box("nan,1").is_err());
    }
}
