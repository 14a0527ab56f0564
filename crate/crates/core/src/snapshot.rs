//! Plain-text tensor snapshots.
//!
//! ```text
//! tensor 2 3 2
//! 0.5
//! ...
//! ```
//!
//! A header line `tensor <extents..>` followed by the row-major values, one
//! per line. Checkpoints are a sequence of `param <path>` lines, each followed
//! by one snapshot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn format_tensor<T: Scalar>(t: &Tensor<T>) -> String {
    let mut out = String::from("tensor");
    for d in t.shape() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for v in t.data() {
        writeln!(out, "{v}").unwrap();
    }
    out
}

fn parse_tensor_lines<'a, T: Scalar>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Tensor<T>> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing tensor header".into()))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("tensor") {
        return Err(Error::Parse(format!("bad tensor header {header:?}")));
    }
    let shape = words
        .map(|w| w.parse::<usize>().map_err(|e| Error::Parse(format!("extent {w:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("truncated tensor values".into()))?;
        data.push(
            line.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad value {line:?}")))?,
        );
    }
    Tensor::new(shape, data)
}

pub fn parse_tensor<T: Scalar>(text: &str) -> Result<Tensor<T>> {
    parse_tensor_lines(&mut text.lines())
}

pub fn write_tensor<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    fs::write(path, format_tensor(t))?;
    Ok(())
}

pub fn read_tensor<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    parse_tensor(&fs::read_to_string(path)?)
}

pub fn write_checkpoint<T: Scalar>(path: &Path, entries: &[(String, Tensor<T>)]) -> Result<()> {
    let mut out = String::new();
    for (name, t) in entries {
        writeln!(out, "param {name}").unwrap();
        out.push_str(&format_tensor(t));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Vec<(String, Tensor<T>)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        let name = line
            .strip_prefix("param ")
            .ok_or_else(|| Error::Parse(format!("expected `param <path>`, got {line:?}")))?;
        out.push((name.to_string(), parse_tensor_lines(&mut lines)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    #[test]
    fn rational_snapshot() {
        let t = Tensor::new([2], vec![Rational64::new(1, 9), Rational64::new(-4, 3)]).unwrap();
        let s = format_tensor(&t);
        assert_eq!(s, "tensor 2\n1/9\n-4/3\n");
        assert_eq!(parse_tensor::<Rational64>(&s).unwrap(), t);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_tensor::<f64>("tensor 2\n1.0\n").is_err());
        assert!(parse_tensor::<f64>("matrix 1\n1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn f64_round_trip_is_exact(values in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let n = values.len();
            let t = Tensor::new([n], values).unwrap();
            prop_assert_eq!(parse_tensor::<f64>(&format_tensor(&t)).unwrap(), t);
        }
    }
}
