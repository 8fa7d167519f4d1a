//! Plain-text subproblem fixtures.
//!
//! One entry per line, `#` starts a comment:
//!
//! ```text
//! gamma 1
//! delta 2
//! g 0 1
//! psi 1.4142135623730951     # one line per row of Ψ (n rows)
//! psi 0
//! minv -1                    # one line per row of M⁻¹ (k rows)
//! ```
//!
//! Without `psi`/`minv` lines the matrix is `γI`.

use anyhow::{bail, Context};
use sr1tr::linalg::Matrix;
use sr1tr::lsr1::CompactSr1;

#[derive(Debug)]
pub struct Fixture {
    pub b: CompactSr1,
    pub g: Vec<f64>,
    pub delta: f64,
}

fn numbers(rest: &str, line: usize) -> anyhow::Result<Vec<f64>> {
    rest.split_whitespace()
        .map(|t| t.parse::<f64>().with_context(|| format!("line {line}: bad number {t:?}")))
        .collect()
}

fn scalar(values: Vec<f64>, key: &str, line: usize) -> anyhow::Result<f64> {
    match values.as_slice() {
        [v] => Ok(*v),
        _ => bail!("line {line}: {key} takes exactly one value"),
    }
}

pub fn parse(text: &str) -> anyhow::Result<Fixture> {
    let (mut gamma, mut delta, mut g) = (None, None, None);
    let (mut psi, mut minv) = (Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let values = numbers(rest, line)?;
        match key {
            "gamma" => gamma = Some(scalar(values, key, line)?),
            "delta" => delta = Some(scalar(values, key, line)?),
            "g" => g = Some(values),
            "psi" => psi.push(values),
            "minv" => minv.push(values),
            other => bail!("line {line}: unknown key {other:?} (expected gamma, delta, g, psi, minv)"),
        }
    }
    let gamma = gamma.context("missing gamma")?;
    let delta = delta.context("missing delta")?;
    let g = g.context("missing g")?;
    let n = g.len();
    let b = if psi.is_empty() && minv.is_empty() {
        CompactSr1::scaled_identity(n, gamma)
    } else {
        if psi.len() != n {
            bail!("psi has {} rows but g has {n} entries", psi.len());
        }
        let k = psi[0].len();
        if psi.iter().any(|r| r.len() != k) || minv.len() != k || minv.iter().any(|r| r.len() != k) {
            bail!("psi must be {n}x{k} and minv {k}x{k}");
        }
        CompactSr1::from_parts(gamma, Matrix::from_rows(&psi), Matrix::from_rows(&minv))?
    };
    Ok(Fixture { b, g, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hard_case() {
        let f = parse("gamma 1\ndelta 2 # radius\ng 0 1\npsi 1.4142135623730951\npsi 0\nminv -1\n").unwrap();
        assert_eq!(f.b.rank(), 1);
        assert_eq!(f.g, vec![0.0, 1.0]);
        assert_eq!(f.delta, 2.0);
    }

    #[test]
    fn identity_without_psi() {
        let f = parse("gamma 2\ndelta 1\ng 1 2 3\n").unwrap();
        assert_eq!(f.b.rank(), 0);
        assert_eq!(f.b.gamma(), 2.0);
    }

    #[test]
    fn errors_are_located() {
        let err = parse("gamma 1\ndelta x\ng 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse("gamma 1\ng 1\n").is_err());
        assert!(parse("gamma 1\ndelta 1\ng 1 2\npsi 1\nminv 1\n").is_err());
        assert!(parse("gamma 1\ndelta 1\nh 1\n").is_err());
    }
}
