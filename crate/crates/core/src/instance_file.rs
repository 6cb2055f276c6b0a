//! Plain-text problem instances.
//!
//! ```text
//! # any comment
//! m 3
//! n 5
//! sigma_x2 1
//! gamma0 0.6            (one value, or n values)
//! sigma_w2 0
//! seed 42               (or: seed none)
//! matrix
//! <m lines of n numbers>
//! x
//! <n lines: re im>
//! w
//! <m lines: re im>
//! y
//! <m lines: re im>
//! ```
//!
//! Values are written with shortest round-trip formatting, so reading a
//! written file reproduces the instance bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, ComplexVector, ProblemInstance, RealMatrix};

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Serializes an instance.
pub fn to_text(inst: &ProblemInstance) -> String {
    let mut s = String::new();
    let g = inst.prior.gamma0();
    let uniform = g.iter().all(|&v| v == g[0]);
    let _ = writeln!(s, "# bossamp instance");
    let _ = writeln!(s, "m {}", inst.m());
    let _ = writeln!(s, "n {}", inst.n());
    let _ = writeln!(s, "sigma_x2 {}", inst.prior.sigma_x2());
    let _ = writeln!(s, "gamma0 {}", if uniform { g[0].to_string() } else { join(g.iter().copied()) });
    let _ = writeln!(s, "sigma_w2 {}", inst.sigma_w2);
    match inst.seed {
        Some(seed) => {
            let _ = writeln!(s, "seed {seed}");
        }
        None => {
            let _ = writeln!(s, "seed none");
        }
    }
    let _ = writeln!(s, "matrix");
    for r in 0..inst.m() {
        let _ = writeln!(s, "{}", join(inst.a.row(r).iter().copied()));
    }
    for (name, v) in [("x", &inst.x_true), ("w", &inst.w), ("y", &inst.y)] {
        let _ = writeln!(s, "{name}");
        for (re, im) in v.re().iter().zip(v.im()) {
            let _ = writeln!(s, "{re} {im}");
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::Parse { line: self.last + 1, msg: "unexpected end of file".into() })
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, t) = self.next()?;
        let mut parts = t.splitn(2, char::is_whitespace);
        let k = parts.next().unwrap_or("");
        if k != key {
            return Err(Error::Parse { line, msg: format!("expected `{key}`, found `{k}`") });
        }
        Ok((line, parts.next().unwrap_or("").trim()))
    }

    fn marker(&mut self, key: &str) -> Result<()> {
        let (line, rest) = self.keyed(key)?;
        if !rest.is_empty() {
            return Err(Error::Parse { line, msg: format!("`{key}` takes no value") });
        }
        Ok(())
    }
}

fn numbers(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("`{tok}` is not a finite number") })
        })
        .collect()
}

fn exactly(line: usize, v: Vec<f64>, count: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() != count {
        return Err(Error::Parse {
            line,
            msg: format!("{what}: expected {count} values, found {}", v.len()),
        });
    }
    Ok(v)
}

fn count(line: usize, s: &str, what: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Parse { line, msg: format!("{what} must be a positive integer, found `{s}`") }),
    }
}

fn scalar(line: usize, s: &str, what: &str) -> Result<f64> {
    let v = numbers(line, s)?;
    Ok(exactly(line, v, 1, what)?[0])
}

fn pairs(lines: &mut Lines, key: &str, len: usize) -> Result<ComplexVector> {
    lines.marker(key)?;
    let (mut re, mut im) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for _ in 0..len {
        let (line, t) = lines.next()?;
        let v = exactly(line, numbers(line, t)?, 2, key)?;
        re.push(v[0]);
        im.push(v[1]);
    }
    ComplexVector::new(re, im)
}

/// Parses an instance, reporting the offending line on malformed input.
pub fn from_text(text: &str) -> Result<ProblemInstance> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (l, v) = lines.keyed("m")?;
    let m = count(l, v, "m")?;
    let (l, v) = lines.keyed("n")?;
    let n = count(l, v, "n")?;
    let (l, v) = lines.keyed("sigma_x2")?;
    let sigma_x2 = scalar(l, v, "sigma_x2")?;
    let (gl, v) = lines.keyed("gamma0")?;
    let g = numbers(gl, v)?;
    let gamma0 = match g.len() {
        1 => vec![g[0]; n],
        k if k == n => g,
        k => return Err(Error::Parse { line: gl, msg: format!("gamma0: expected 1 or {n} values, found {k}") }),
    };
    let prior = BernoulliGaussianPrior::new(gamma0, sigma_x2).map_err(|e| Error::Parse { line: gl, msg: e.to_string() })?;
    let (l, v) = lines.keyed("sigma_w2")?;
    let sigma_w2 = scalar(l, v, "sigma_w2")?;
    if sigma_w2 < 0.0 {
        return Err(Error::Parse { line: l, msg: "sigma_w2 must be non-negative".into() });
    }
    let (l, v) = lines.keyed("seed")?;
    let seed = match v {
        "none" => None,
        s => Some(s.parse::<u64>().map_err(|_| Error::Parse { line: l, msg: format!("bad seed `{s}`") })?),
    };
    lines.marker("matrix")?;
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m {
        let (line, t) = lines.next()?;
        data.extend(exactly(line, numbers(line, t)?, n, "matrix row")?);
    }
    let a = RealMatrix::new(m, n, data)?;
    let x_true = pairs(&mut lines, "x", n)?;
    let w = pairs(&mut lines, "w", m)?;
    let y_line = lines.last + 1;
    let y = pairs(&mut lines, "y", m)?;
    if let Ok((line, _)) = lines.next() {
        return Err(Error::Parse { line, msg: "trailing content after y".into() });
    }
    let mut inst = ProblemInstance::new(a, x_true, w, prior, sigma_w2, seed)?;
    let scale = inst.y.norm_sq().sqrt().max(1.0);
    inst.y = y;
    if !inst.is_consistent(1e-9 * scale) {
        return Err(Error::Parse { line: y_line, msg: "y does not equal A x + w".into() });
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, NoiseSpec, SignalModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inst =
            generate_instance(4, 9, 2, 1.0, NoiseSpec::SnrDb(20.0), SignalModel::ExactK, &mut rng).unwrap();
        inst.seed = Some(5);
        inst
    }

    #[test]
    fn round_trip_is_exact() {
        let inst = sample();
        let text = to_text(&inst);
        assert_eq!(from_text(&text).unwrap(), inst);
        assert_eq!(to_text(&from_text(&text).unwrap()), text);
    }

    #[test]
    fn per_component_gamma_round_trips() {
        let mut inst = sample();
        inst.prior = BernoulliGaussianPrior::new((0..9).map(|i| 0.1 * i as f64).collect(), 2.0).unwrap();
        inst.seed = None;
        assert_eq!(from_text(&to_text(&inst)).unwrap(), inst);
    }

    fn error_line(text: &str) -> usize {
        match from_text(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = to_text(&sample());
        let lines: Vec<&str> = text.lines().collect();

        let mut bad = lines.clone();
        bad[9] = "0.5 oops 0.5";
        assert_eq!(error_line(&bad.join("\n")), 10);

        let mut bad = lines.clone();
        bad[2] = "n -3";
        assert_eq!(error_line(&bad.join("\n")), 3);

        let mut bad = lines.clone();
        bad[4] = "gamma0 0.5 0.5";
        assert_eq!(error_line(&bad.join("\n")), 5);

        let truncated = lines[..lines.len() - 2].join("\n");
        assert!(matches!(from_text(&truncated), Err(Error::Parse { .. })));

        // tampered measurement
        let mut bad = lines.clone();
        let last = bad.len() - 1;
        bad[last] = "123 456";
        assert!(matches!(from_text(&bad.join("\n")), Err(Error::Parse { .. })));
    }
}
