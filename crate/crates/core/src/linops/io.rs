//! Matrix exchange formats: a JSON schema `{"dim": n, "re": [[..]], "im": [[..]]}`
//! and a whitespace-delimited text format (dimension, then row-major `re im`
//! pairs). Both round-trip finite doubles bit-exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::matrix::OperatorMatrix;

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Serialize for OperatorMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for i in 0..n {
            let mut row_re = Vec::with_capacity(n);
            let mut row_im = Vec::with_capacity(n);
            for j in 0..n {
                row_re.push(self.matrix()[(i, j)].re);
                row_im.push(self.matrix()[(i, j)].im);
            }
            re.push(row_re);
            im.push(row_im);
        }
        let label = if self.label().is_empty() {
            None
        } else {
            Some(self.label().to_string())
        };
        MatrixJson { dim: n, re, im, label }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(deserializer)?;
        from_parts(raw).map_err(serde::de::Error::custom)
    }
}

fn from_parts(raw: MatrixJson) -> Result<OperatorMatrix> {
    let n = raw.dim;
    let shape_ok = raw.re.len() == n
        && raw.im.len() == n
        && raw.re.iter().all(|r| r.len() == n)
        && raw.im.iter().all(|r| r.len() == n);
    if !shape_ok {
        return Err(Error::bad_input(format!(
            "matrix rows do not match declared dimension {n}"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(raw.re[i][j], raw.im[i][j]);
        }
    }
    let op = OperatorMatrix::new(m, "")?;
    Ok(match raw.label {
        Some(l) => op.with_label(l),
        None => op,
    })
}

pub fn matrix_to_json(a: &OperatorMatrix) -> String {
    serde_json::to_string_pretty(a).expect("matrix serialization cannot fail")
}

pub fn matrix_from_json(text: &str) -> Result<OperatorMatrix> {
    serde_json::from_str(text).map_err(|e| Error::bad_input(format!("matrix JSON: {e}")))
}

/// Text format: first token is the dimension, followed by `dim*dim`
/// whitespace-separated `re im` pairs in row-major order. The shortest
/// round-trip decimal form preserves every finite double exactly.
pub fn matrix_to_text(a: &OperatorMatrix) -> String {
    let n = a.dim();
    let mut out = String::new();
    out.push_str(&n.to_string());
    out.push('\n');
    for i in 0..n {
        let mut row = Vec::with_capacity(2 * n);
        for j in 0..n {
            let z = a.matrix()[(i, j)];
            row.push(format_f64(z.re));
            row.push(format_f64(z.im));
        }
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn matrix_from_text(text: &str) -> Result<OperatorMatrix> {
    let mut tokens = text.split_whitespace();
    let dim: usize = tokens
        .next()
        .ok_or_else(|| Error::bad_input("empty matrix text"))?
        .parse()
        .map_err(|e| Error::bad_input(format!("matrix dimension: {e}")))?;
    let mut entries = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        let re = parse_f64(tokens.next())?;
        let im = parse_f64(tokens.next())?;
        entries.push(Complex64::new(re, im));
    }
    if tokens.next().is_some() {
        return Err(Error::bad_input("trailing data after matrix entries"));
    }
    OperatorMatrix::from_complex(dim, &entries)
}

/// Loads a matrix from disk, dispatching on the `.json` extension.
pub fn load_matrix(path: &std::path::Path) -> Result<OperatorMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        matrix_from_json(&text)
    } else {
        matrix_from_text(&text)
    }
}

fn format_f64(x: f64) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same bits.
    if x == 0.0 && x.is_sign_negative() {
        // Normalize -0.0: it compares equal and carries no operator content.
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn parse_f64(token: Option<&str>) -> Result<f64> {
    let t = token.ok_or_else(|| Error::bad_input("matrix text ended early"))?;
    let x: f64 = t
        .parse()
        .map_err(|e| Error::bad_input(format!("bad number {t:?}: {e}")))?;
    if !x.is_finite() {
        return Err(Error::bad_input(format!("non-finite entry {t:?}")));
    }
    Ok(x)
}
