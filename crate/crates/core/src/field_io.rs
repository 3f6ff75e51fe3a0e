//! Binary field snapshots.
//!
//! A file is one ASCII header line `IFLOW1 <kind> <n> <length>` followed by
//! the values as little-endian `f64` in node order `(i, j)` with `j` fastest. Vector
//! fields store all of `u` and then all of `v`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{GridError, GridSpec, ScalarField, VectorField};
use crate::scalar::Real;

pub const MAGIC: &str = "IFLOW1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing header line")]
    MissingHeader,
    #[error("bad magic {0:?}")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unknown field kind {0:?}")]
    UnknownKind(String),
    #[error("expected a {expected} field, found {found}")]
    KindMismatch {
        expected: FieldKind,
        found: FieldKind,
    },
    #[error("payload has {found} bytes, header implies {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
        }
    }

    fn components(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 2,
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field<T> {
    Scalar(ScalarField<T>),
    Vector(VectorField<T>),
}

impl<T: Real> Field<T> {
    pub fn kind(&self) -> FieldKind {
        match self {
            Field::Scalar(_) => FieldKind::Scalar,
            Field::Vector(_) => FieldKind::Vector,
        }
    }

    pub fn spec(&self) -> &GridSpec<T> {
        match self {
            Field::Scalar(f) => f.spec(),
            Field::Vector(f) => f.spec(),
        }
    }
}

fn header<T: Real>(kind: FieldKind, spec: &GridSpec<T>) -> String {
    format!("{MAGIC} {} {} {}\n", kind, spec.n(), spec.length().as_f64())
}

fn push_values<T: Real>(out: &mut Vec<u8>, values: &[T]) {
    for &x in values {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
}

pub fn encode_scalar<T: Real>(f: &ScalarField<T>) -> Vec<u8> {
    let mut out = header(FieldKind::Scalar, f.spec()).into_bytes();
    push_values(&mut out, f.values());
    out
}

pub fn encode_vector<T: Real>(f: &VectorField<T>) -> Vec<u8> {
    let mut out = header(FieldKind::Vector, f.spec()).into_bytes();
    push_values(&mut out, f.u().values());
    push_values(&mut out, f.v().values());
    out
}

pub fn encode<T: Real>(field: &Field<T>) -> Vec<u8> {
    match field {
        Field::Scalar(f) => encode_scalar(f),
        Field::Vector(f) => encode_vector(f),
    }
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<Field<T>, FormatError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(FormatError::MissingHeader)?;
    let line = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| FormatError::BadHeader("header is not UTF-8".into()))?;
    let mut parts = line.split(' ');
    let magic = parts.next().unwrap_or_default();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic.to_string()));
    }
    let kind = match parts.next() {
        Some("scalar") => FieldKind::Scalar,
        Some("vector") => FieldKind::Vector,
        Some(other) => return Err(FormatError::UnknownKind(other.to_string())),
        None => return Err(FormatError::BadHeader("missing kind".into())),
    };
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::BadHeader("missing or invalid n".into()))?;
    let length: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::BadHeader("missing or invalid length".into()))?;
    if parts.next().is_some() {
        return Err(FormatError::BadHeader("trailing header tokens".into()));
    }
    let spec = GridSpec::new(n, T::lit(length))?;

    let payload = &bytes[nl + 1..];
    let expected = kind.components() * spec.len() * 8;
    if payload.len() != expected {
        return Err(FormatError::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))));
    let mut component = || -> Result<ScalarField<T>, FormatError> {
        let vals: Vec<T> = values.by_ref().take(spec.len()).collect();
        Ok(ScalarField::from_raw_values(spec, vals)?)
    };
    Ok(match kind {
        FieldKind::Scalar => Field::Scalar(component()?),
        FieldKind::Vector => {
            let u = component()?;
            let v = component()?;
            Field::Vector(VectorField::new(u, v)?)
        }
    })
}

pub fn write_field<T: Real>(field: &Field<T>, path: &Path) -> Result<(), FormatError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(field))?;
    Ok(())
}

pub fn write_vector<T: Real>(field: &VectorField<T>, path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_vector(field))?;
    Ok(())
}

pub fn read_field<T: Real>(path: &Path) -> Result<Field<T>, FormatError> {
    decode(&fs::read(path)?)
}

pub fn read_vector<T: Real>(path: &Path) -> Result<VectorField<T>, FormatError> {
    match read_field(path)? {
        Field::Vector(v) => Ok(v),
        other => Err(FormatError::KindMismatch {
            expected: FieldKind::Vector,
            found: other.kind(),
        }),
    }
}

/// Plain-text export, one node per line: `i,j,x,y,<components>`.
pub fn vector_to_csv<T: Real>(field: &VectorField<T>) -> String {
    let spec = field.spec();
    let mut out = String::from("i,j,x,y,u,v\n");
    for i in 0..spec.n() {
        for j in 0..spec.n() {
            let [x, y] = spec.node(i, j);
            let [a, b] = field.get(i, j);
            out.push_str(&format!(
                "{i},{j},{},{},{},{}\n",
                x.as_f64(),
                y.as_f64(),
                a.as_f64(),
                b.as_f64()
            ));
        }
    }
    out
}
