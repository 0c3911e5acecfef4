//! Small grammars for numeric command-line values.

use std::f64::consts::PI;

use serde::Serialize;

/// A parsed list of values. Wrapping the `Vec` keeps the argument parser
/// from treating it as a repeated flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

/// A real number, optionally written with `pi`: `2.5`, `pi`, `-pi/2`,
/// `3pi/4`, `2*pi`.
pub fn scalar(src: &str) -> Result<f64, String> {
    let s = src.trim().to_ascii_lowercase();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let Some(at) = s.find("pi") else {
        return Err(format!("bad number `{src}`"));
    };
    let (head, tail) = (&s[..at], &s[at + 2..]);
    let head = head.trim_end_matches('*');
    let coeff = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h
            .parse::<f64>()
            .map_err(|_| format!("bad number `{src}`"))?,
    };
    let denom = match tail {
        "" => 1.0,
        t => t
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .ok_or_else(|| format!("bad number `{src}`"))?,
    };
    if denom == 0.0 {
        return Err(format!("division by zero in `{src}`"));
    }
    Ok(coeff * PI / denom)
}

/// `x,y`.
pub fn point(src: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = src.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `x,y`, got `{src}`"));
    }
    Ok((scalar(parts[0])?, scalar(parts[1])?))
}

/// `x,y;x,y;...`.
pub fn points(src: &str) -> Result<List<(f64, f64)>, String> {
    src.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(point)
        .collect::<Result<_, _>>()
        .map(List)
}

/// Comma-separated items, each a single value, `start:stop:step` (inclusive
/// of `stop` when it lands on the grid) or `start:stop:logN` (`N`
/// log-spaced values including both ends).
pub fn range(src: &str) -> Result<List<f64>, String> {
    let mut out = Vec::new();
    for item in src.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(scalar(v)?),
            [a, b, step] => {
                let (a, b) = (scalar(a)?, scalar(b)?);
                if let Some(n) = step.trim().strip_prefix("log") {
                    let n: usize = n
                        .parse()
                        .map_err(|_| format!("bad point count in `{item}`"))?;
                    if n < 2 || !(a > 0.0 && b > 0.0) {
                        return Err(format!(
                            "`{item}`: log ranges need N >= 2 and positive ends"
                        ));
                    }
                    let (la, lb) = (a.ln(), b.ln());
                    for k in 0..n {
                        let v = if k + 1 == n {
                            b
                        } else {
                            (la + (lb - la) * k as f64 / (n - 1) as f64).exp()
                        };
                        out.push(v);
                    }
                } else {
                    let h = scalar(step)?;
                    if !(h > 0.0) || b < a {
                        return Err(format!("`{item}`: need a positive step and start <= stop"));
                    }
                    let n = ((b - a) / h + 1e-9).floor() as usize;
                    // Multiplying rather than accumulating keeps grid points exact-ish.
                    out.extend((0..=n).map(|k| a + k as f64 * h));
                }
            }
            _ => return Err(format!("bad range item `{item}`")),
        }
    }
    if out.is_empty() {
        return Err("empty range".into());
    }
    Ok(List(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_with_pi() {
        assert_eq!(scalar("pi").unwrap(), PI);
        assert_eq!(scalar("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(scalar("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(scalar("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(scalar("1e-3").unwrap(), 1e-3);
        assert!(scalar("pie").is_err());
        assert!(scalar("").is_err());
    }

    #[test]
    fn points_parse() {
        assert_eq!(point("pi,0").unwrap(), (PI, 0.0));
        assert_eq!(
            points("0,0.01;0,0.02").unwrap().0,
            vec![(0.0, 0.01), (0.0, 0.02)]
        );
        assert!(point("1").is_err());
    }

    #[test]
    fn linear_range_includes_stop() {
        let r = range("0.3:1.2:0.05").unwrap().0;
        assert_eq!(r.len(), 19);
        assert_eq!(r[0], 0.3);
        assert!((r[18] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn log_range_hits_both_ends() {
        let r = range("0.002:0.05:log8").unwrap().0;
        assert_eq!(r.len(), 8);
        assert!((r[0] - 0.002).abs() < 1e-15);
        assert_eq!(r[7], 0.05);
        let ratio = r[1] / r[0];
        for w in r.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(range("1,2,3").unwrap().0, vec![1.0, 2.0, 3.0]);
        assert!(range("1:0:0.1").is_err());
        assert!(range("0:1:log1").is_err());
        assert!(range("0:1:0").is_err());
        assert!(range("1:2").is_err());
    }
}
