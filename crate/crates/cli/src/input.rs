//! JSON schemas for bodies and test functions.

use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use gaussblab::bodies::ProductBlock;
use gaussblab::function::{FunctionSpec, Polynomial};
use gaussblab::{Direction, SymmetricBody};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Points drawn by the symmetry and convexity spot check at load.
pub const SPOT_CHECK_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Box {
        half_widths: Vec<f64>,
    },
    Ball {
        radius: f64,
        /// Defaults to 2.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Strip {
        direction: Vec<f64>,
        half_width: f64,
    },
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Product {
        blocks: Vec<BlockSpec>,
    },
    DiagScaled {
        x: Vec<f64>,
        body: Box<BodySpec>,
    },
    LinearImage {
        matrix: Vec<Vec<f64>>,
        body: Box<BodySpec>,
    },
    FullSpace {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub coords: Vec<usize>,
    pub body: BlockBody,
}

/// A factor body, or the string "full".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockBody {
    Full(FullMarker),
    Body(Box<BodySpec>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FullMarker {
    Full,
}

fn all_finite(field: &str, v: &[f64]) -> Result<()> {
    ensure!(v.iter().all(|x| x.is_finite()), "{field} must be finite");
    Ok(())
}

fn positive(field: &str, v: &[f64]) -> Result<()> {
    all_finite(field, v)?;
    ensure!(v.iter().all(|&x| x > 0.0), "{field} must be positive");
    Ok(())
}

fn square(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    ensure!(n > 0, "{field} must not be empty");
    for (i, r) in rows.iter().enumerate() {
        ensure!(r.len() == n, "{field} must be square: row {i} has {} entries, expected {n}", r.len());
        all_finite(field, r)?;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl BodySpec {
    pub fn build(&self) -> Result<SymmetricBody> {
        Ok(match self {
            Self::Box { half_widths } => {
                ensure!(!half_widths.is_empty(), "half_widths must not be empty");
                positive("half_widths", half_widths)?;
                SymmetricBody::boxed(half_widths)?
            }
            Self::Ball { radius, dim } => {
                positive("radius", &[*radius])?;
                let n = dim.unwrap_or(2);
                ensure!(n > 0, "dim must be at least 1");
                SymmetricBody::ball(n, *radius)?
            }
            Self::Strip { direction, half_width } => {
                ensure!(!direction.is_empty(), "direction must not be empty");
                all_finite("direction", direction)?;
                positive("half_width", &[*half_width])?;
                let dir = Direction::normalize(DVector::from_column_slice(direction))
                    .map_err(|_| anyhow!("direction must be nonzero"))?;
                SymmetricBody::strip(dir, *half_width)?
            }
            Self::Ellipsoid { matrix } => {
                let m = square("matrix", matrix)?;
                ensure!(
                    (&m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0),
                    "matrix must be symmetric"
                );
                ensure!(m.clone().cholesky().is_some(), "matrix must be positive definite");
                SymmetricBody::ellipsoid(m)?
            }
            Self::Polytope { normals, offsets } => {
                ensure!(!normals.is_empty(), "normals must not be empty");
                ensure!(
                    normals.len() == offsets.len(),
                    "offsets must have one entry per normal: {} normals, {} offsets",
                    normals.len(),
                    offsets.len()
                );
                positive("offsets", offsets)?;
                let n = normals[0].len();
                ensure!(n > 0, "normals must not be empty vectors");
                let mut vs = Vec::with_capacity(normals.len());
                for (i, a) in normals.iter().enumerate() {
                    ensure!(a.len() == n, "normals[{i}] has dimension {}, expected {n}", a.len());
                    all_finite("normals", a)?;
                    ensure!(a.iter().any(|&x| x != 0.0), "normals[{i}] must be nonzero");
                    vs.push(DVector::from_column_slice(a));
                }
                SymmetricBody::polytope(n, vs, offsets.clone())?
            }
            Self::Product { blocks } => {
                ensure!(!blocks.is_empty(), "blocks must not be empty");
                let dim: usize = blocks.iter().map(|b| b.coords.len()).sum();
                let mut seen = vec![false; dim];
                let mut out = Vec::with_capacity(blocks.len());
                for (i, b) in blocks.iter().enumerate() {
                    ensure!(!b.coords.is_empty(), "blocks[{i}].coords must not be empty");
                    for &c in &b.coords {
                        ensure!(c < dim, "blocks[{i}].coords entry {c} is out of range for dimension {dim}");
                        ensure!(!seen[c], "blocks[{i}].coords entry {c} appears twice");
                        seen[c] = true;
                    }
                    let factor = match &b.body {
                        BlockBody::Full(_) => None,
                        BlockBody::Body(s) => {
                            let f = s.build().with_context(|| format!("blocks[{i}].body"))?;
                            ensure!(
                                f.dim() == b.coords.len(),
                                "blocks[{i}].body has dimension {}, but coords lists {}",
                                f.dim(),
                                b.coords.len()
                            );
                            Some(f)
                        }
                    };
                    out.push(ProductBlock {
                        coords: b.coords.clone(),
                        factor,
                    });
                }
                SymmetricBody::product(dim, out)?
            }
            Self::DiagScaled { x, body } => {
                let inner = body.build().context("body")?;
                ensure!(
                    x.len() == inner.dim(),
                    "x has dimension {}, but body has dimension {}",
                    x.len(),
                    inner.dim()
                );
                all_finite("x", x)?;
                inner.scale_diag(x)?
            }
            Self::LinearImage { matrix, body } => {
                let inner = body.build().context("body")?;
                let m = square("matrix", matrix)?;
                ensure!(
                    m.nrows() == inner.dim(),
                    "matrix has dimension {}, but body has dimension {}",
                    m.nrows(),
                    inner.dim()
                );
                inner.linear_image(&m).map_err(|_| anyhow!("matrix must be invertible"))?
            }
            Self::FullSpace { dim } => {
                ensure!(*dim > 0, "dim must be at least 1");
                SymmetricBody::full_space(*dim)
            }
        })
    }
}

/// Parses, validates and spot-checks a body.
pub fn load_body(text: &str) -> Result<SymmetricBody> {
    let spec: BodySpec = serde_json::from_str(text).context("body does not match the schema")?;
    let body = spec.build()?;
    body.spot_check(SPOT_CHECK_POINTS, 0)
        .context("body failed the symmetry/convexity spot check")?;
    Ok(body)
}

/// Reads a body from a file path, or parses the argument itself when it
/// starts with '{'.
pub fn read_body(arg: &str) -> Result<SymmetricBody> {
    load_body(&read_json_arg(arg)?).with_context(|| format!("loading body {}", short(arg)))
}

fn short(arg: &str) -> String {
    if arg.len() > 60 {
        format!("{}…", &arg[..arg.char_indices().nth(60).map_or(arg.len(), |(i, _)| i)])
    } else {
        arg.to_string()
    }
}

pub fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(Path::new(arg)).with_context(|| format!("reading {arg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionArg {
    Linear {
        v: Vec<f64>,
    },
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    Polynomial {
        dim: usize,
        terms: Vec<TermSpec>,
    },
}

impl FunctionArg {
    pub fn build(&self) -> Result<FunctionSpec<f64>> {
        Ok(match self {
            Self::Linear { v } => {
                ensure!(!v.is_empty(), "v must not be empty");
                all_finite("v", v)?;
                FunctionSpec::linear(v.clone())
            }
            Self::Quadratic { matrix, constant } => {
                square("matrix", matrix)?;
                all_finite("constant", &[*constant])?;
                FunctionSpec::quadratic(matrix.clone(), *constant)?
            }
            Self::Polynomial { dim, terms } => {
                ensure!(*dim > 0, "dim must be at least 1");
                for (i, t) in terms.iter().enumerate() {
                    ensure!(t.powers.len() == *dim, "terms[{i}].powers has {} entries, expected {dim}", t.powers.len());
                    all_finite("coef", &[t.coef])?;
                }
                FunctionSpec::Polynomial(Polynomial::new(*dim, terms.iter().map(|t| (t.coef, t.powers.clone())).collect())?)
            }
        })
    }
}

pub fn read_function(arg: &str) -> Result<FunctionSpec<f64>> {
    let text = read_json_arg(arg)?;
    let f: FunctionArg = serde_json::from_str(&text).context("function does not match the schema")?;
    f.build()
}

/// Square matrix given as JSON rows, inline or in a file.
pub fn read_matrix(arg: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&read_json_arg(arg)?).context("matrix must be a JSON array of rows")?;
    square("matrix", &rows)
}

/// Comma-separated reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect()
}

/// start:stop:step, inclusive of stop up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts = parse_list(&s.replace(':', ","))?;
    let [start, stop, step] = parts[..] else {
        bail!("grid must be start:stop:step, got {s:?}");
    };
    ensure!(step > 0.0 && stop >= start, "grid needs step > 0 and stop ≥ start");
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + step * k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_examples() {
        let b = load_body(r#"{"type":"ball","radius":1}"#).unwrap();
        assert_eq!(b, SymmetricBody::ball(2, 1.0).unwrap());
        let b = load_body(r#"{"type":"box","half_widths":[1,2]}"#).unwrap();
        assert_eq!(b, SymmetricBody::boxed(&[1.0, 2.0]).unwrap());
        let e = load_body(r#"{"type":"box","half_widths":[-1]}"#).unwrap_err();
        assert!(format!("{e:#}").contains("half_widths must be positive"));
    }

    #[test]
    fn errors_name_their_field() {
        let cases = [
            (r#"{"type":"ball","radius":0}"#, "radius"),
            (r#"{"type":"polytope","normals":[[1,0]],"offsets":[-1]}"#, "offsets must be positive"),
            (r#"{"type":"polytope","normals":[[1,0],[0,1,2]],"offsets":[1,1]}"#, "normals[1]"),
            (r#"{"type":"strip","direction":[0,0],"half_width":1}"#, "direction"),
            (r#"{"type":"ellipsoid","matrix":[[1,2],[2,1]]}"#, "positive definite"),
            (r#"{"type":"diag_scaled","x":[0],"body":{"type":"box","half_widths":[1,1]}}"#, "x has dimension"),
            (r#"{"type":"box"}"#, "half_widths"),
            (r#"{"type":"cube","side":1}"#, "cube"),
        ];
        for (text, needle) in cases {
            let e = format!("{:#}", load_body(text).unwrap_err());
            assert!(e.contains(needle), "{text}: {e}");
        }
    }

    #[test]
    fn nested_bodies() {
        let text = r#"{"type":"product","blocks":[
            {"coords":[0,1],"body":{"type":"ball","radius":1,"dim":2}},
            {"coords":[2],"body":"full"}]}"#;
        let b = load_body(text).unwrap();
        assert_eq!(b.dim(), 3);
        let img = load_body(r#"{"type":"linear_image","matrix":[[2,0],[0,0.5]],"body":{"type":"box","half_widths":[1,1]}}"#)
            .unwrap();
        assert!((img.gauge(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grids_and_functions() {
        assert_eq!(parse_grid("1:5:0.5").unwrap().len(), 9);
        let f = read_function(r#"{"type":"polynomial","dim":1,"terms":[{"coef":1,"powers":[1]},{"coef":0.05,"powers":[3]}]}"#)
            .unwrap();
        assert!((f.eval(&[2.0]) - 2.4).abs() < 1e-12);
        assert!(read_function(r#"{"type":"linear","v":[]}"#).is_err());
    }
}
