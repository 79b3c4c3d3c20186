//! Finite-dimensional real normed spaces, points, and dense linear maps.
//!
//! Norm evaluation is overflow-safe: finite-`p` norms rescale by the largest
//! coordinate before raising to the `p`-th power, so points with norms near
//! `1e300` are handled exactly as well as points near `1`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A vector of finite real coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "coordinate {bad} is not finite ({})",
                coords[bad]
            )));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// Wraps coordinates produced by arithmetic on finite points. Callers
    /// guarantee finiteness.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, a: f64) -> Point {
        Point(self.0.iter().map(|c| a * c).collect())
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}

/// Exponent of an ℓ_p norm. `p = ∞` is its own variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn validate(self) -> Result<()> {
        match self {
            Exponent::Finite(p) if p.is_finite() && p >= 1.0 => Ok(()),
            Exponent::Finite(p) => Err(Error::InvalidNorm(format!("p must lie in [1, inf], got {p}"))),
            Exponent::Infinity => Ok(()),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let exp = match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::Finite(p),
            Raw::Str(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Exponent::Infinity,
                other => other
                    .parse::<f64>()
                    .map(Exponent::Finite)
                    .map_err(|_| serde::de::Error::custom(format!("bad exponent {s:?}")))?,
            },
        };
        exp.validate().map_err(serde::de::Error::custom)?;
        Ok(exp)
    }
}

/// The computable norms a [`Space`] can carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "snake_case")]
pub enum NormSpec {
    Lp { p: Exponent },
    /// `‖(w_1 x_1, …, w_d x_d)‖_p`.
    WeightedLp { p: Exponent, weights: Vec<f64> },
    /// `max_k |⟨f_k, x⟩|`; the functionals must span the dual.
    MaxAbsFunctionals { functionals: Vec<Vec<f64>> },
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        NormSpec::Lp { p: Exponent::Finite(p) }
    }

    pub fn linf() -> Self {
        NormSpec::Lp { p: Exponent::Infinity }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NormSpec::Lp { p } => p.validate(),
            NormSpec::WeightedLp { p, weights } => {
                p.validate()?;
                if weights.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: weights.len() });
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    return Err(Error::InvalidNorm(format!("weights must be positive and finite, got {w}")));
                }
                Ok(())
            }
            NormSpec::MaxAbsFunctionals { functionals } => {
                for f in functionals {
                    if f.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, found: f.len() });
                    }
                    if f.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidNorm("functional with non-finite coefficient".into()));
                    }
                }
                let rank = matrix_rank(functionals, dim);
                if rank < dim {
                    return Err(Error::InvalidNorm(format!(
                        "functionals span a {rank}-dimensional subspace of a {dim}-dimensional dual"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the norm without a dimension check.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NormSpec::Lp { p } => lp_norm(x.iter().copied(), *p),
            NormSpec::WeightedLp { p, weights } => {
                lp_norm(x.iter().zip(weights).map(|(c, w)| c * w), *p)
            }
            NormSpec::MaxAbsFunctionals { functionals } => functionals
                .iter()
                .map(|f| f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
                .fold(0.0, f64::max),
        }
    }
}

fn lp_norm<I>(coords: I, p: Exponent) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = coords.clone().fold(0.0_f64, |m, c| m.max(c.abs()));
    match p {
        Exponent::Infinity => max,
        Exponent::Finite(1.0) => coords.map(f64::abs).sum(),
        _ if max == 0.0 => 0.0,
        Exponent::Finite(2.0) => {
            let s: f64 = coords.map(|c| (c / max) * (c / max)).sum();
            max * s.sqrt()
        }
        Exponent::Finite(p) => {
            let s: f64 = coords.map(|c| (c.abs() / max).powf(p)).sum();
            max * s.powf(1.0 / p)
        }
    }
}

/// Rank by Gaussian elimination with partial pivoting.
fn matrix_rank(rows: &[Vec<f64>], cols: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |a, c| a.max(c.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = scale * 1e-12 * (rows.len().max(cols) as f64);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..m.len())
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .filter(|&r| m[r][col].abs() > tol)
        else {
            continue;
        };
        m.swap(rank, pivot);
        for r in rank + 1..m.len() {
            let factor = m[r][col] / m[rank][col];
            let (top, bottom) = m.split_at_mut(r);
            for (a, b) in bottom[0][col..cols].iter_mut().zip(&top[rank][col..cols]) {
                *a -= factor * b;
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

#[derive(Deserialize)]
struct SpaceRaw {
    dim: usize,
    norm: NormSpec,
}

/// A real normed space of dimension `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRaw")]
pub struct Space {
    dim: usize,
    norm: NormSpec,
}

impl TryFrom<SpaceRaw> for Space {
    type Error = Error;

    fn try_from(raw: SpaceRaw) -> Result<Self> {
        Space::new(raw.dim, raw.norm)
    }
}

impl Space {
    pub fn new(dim: usize, norm: NormSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNorm("dimension must be at least 1".into()));
        }
        norm.validate(dim)?;
        Ok(Space { dim, norm })
    }

    pub fn lp(dim: usize, p: f64) -> Result<Self> {
        Space::new(dim, NormSpec::lp(p))
    }

    pub fn linf(dim: usize) -> Result<Self> {
        Space::new(dim, NormSpec::linf())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_spec(&self) -> &NormSpec {
        &self.norm
    }

    pub fn norm(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.norm.eval(x.coords()))
    }

    pub(crate) fn norm_unchecked(&self, x: &[f64]) -> f64 {
        self.norm.eval(x)
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.dim() });
        }
        Ok(())
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        let p = Point::new(coords)?;
        self.check(&p)?;
        Ok(p)
    }
}

/// A dense linear map `source → target`, stored row-major as a
/// `target.dim() × source.dim()` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    data: Vec<f64>,
    source: Space,
    target: Space,
}

impl LinearMap {
    pub fn from_rows(rows: Vec<Vec<f64>>, source: Space, target: Space) -> Result<Self> {
        if rows.len() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), found: rows.len() });
        }
        let mut data = Vec::with_capacity(target.dim() * source.dim());
        for row in rows {
            if row.len() != source.dim() {
                return Err(Error::DimensionMismatch { expected: source.dim(), found: row.len() });
            }
            data.extend(row);
        }
        LinearMap::from_row_major(data, source, target)
    }

    pub fn from_row_major(data: Vec<f64>, source: Space, target: Space) -> Result<Self> {
        let expected = target.dim() * source.dim();
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("matrix entry is not finite".into()));
        }
        Ok(LinearMap { data, source, target })
    }

    pub fn identity(space: &Space) -> Self {
        let d = space.dim();
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        LinearMap { data, source: space.clone(), target: space.clone() }
    }

    pub fn zero(source: &Space, target: &Space) -> Self {
        LinearMap {
            data: vec![0.0; source.dim() * target.dim()],
            source: source.clone(),
            target: target.clone(),
        }
    }

    pub fn source(&self) -> &Space {
        &self.source
    }

    pub fn target(&self) -> &Space {
        &self.target
    }

    pub fn rows(&self) -> usize {
        self.target.dim()
    }

    pub fn cols(&self) -> usize {
        self.source.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols()).map(<[f64]>::to_vec).collect()
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.source.check(x)?;
        Ok(Point::from_raw(self.apply_slice(x.coords())))
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols())
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, a: f64) -> LinearMap {
        LinearMap {
            data: self.data.iter().map(|c| a * c).collect(),
            source: self.source.clone(),
            target: self.target.clone(),
        }
    }

    pub fn neg(&self) -> LinearMap {
        self.scaled(-1.0)
    }

    fn same_shape(&self, other: &LinearMap) -> Result<()> {
        if self.source.dim() != other.source.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim(),
                found: other.source.dim(),
            });
        }
        if self.target.dim() != other.target.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.target.dim(),
                found: other.target.dim(),
            });
        }
        Ok(())
    }
}

/// `G_θ = cos θ · E + sin θ · F` as an explicit matrix.
///
/// Applying the result agrees with [`blend`]`(cos θ, Ex, sin θ, Fx)` up to
/// rounding; the gluing code applies `E` and `F` separately and blends.
pub fn combine(theta: f64, e: &LinearMap, f: &LinearMap) -> Result<LinearMap> {
    e.same_shape(f)?;
    let (c, s) = (theta.cos(), theta.sin());
    let data = e.data.iter().zip(&f.data).map(|(a, b)| c * a + s * b).collect();
    Ok(LinearMap { data, source: e.source.clone(), target: e.target.clone() })
}

/// Coordinatewise `c·a + s·b`.
pub fn blend(c: f64, a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| c * x + s * y).collect()
}
