//! Finite isolated time scales, grid functions and the Δ/∇ difference
//! operators.
//!
//! Points are addressed by global index `k ∈ [−1, N]`: `t(−1) = ρ(a)`,
//! `t(0) = a`, `t(N−1) = b`, `t(N) = σ(b)`. Every [`GridFunction`] carries
//! the index window it is defined on; Δ drops the right endpoint of the
//! window and ∇ drops the left one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixkit::{cr, CMatrix, CVector, C64};

/// A strictly increasing grid `t_{−1} < t_0 < … < t_N` with `N ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IsolatedTimeScale {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for IsolatedTimeScale {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<IsolatedTimeScale> for Vec<f64> {
    fn from(s: IsolatedTimeScale) -> Self {
        s.points
    }
}

impl IsolatedTimeScale {
    /// `points` must hold `N + 2` strictly increasing finite reals with `N ≥ 2`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidParameter(format!(
                "a scale needs at least 4 points (N >= 2), got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] - w[0] <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "points must be strictly increasing with positive graininess (at position {i})"
            )));
        }
        Ok(Self { points })
    }

    /// Number of points in `[a, b]`.
    pub fn n(&self) -> usize {
        self.points.len() - 2
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Largest valid index, `N`.
    pub fn last_index(&self) -> isize {
        self.n() as isize
    }

    /// Index of `b`.
    pub fn b_index(&self) -> isize {
        self.n() as isize - 1
    }

    pub fn contains_index(&self, k: isize) -> bool {
        (-1..=self.last_index()).contains(&k)
    }

    pub fn t(&self, k: isize) -> f64 {
        assert!(
            self.contains_index(k),
            "index {k} outside [-1, {}]",
            self.n()
        );
        self.points[(k + 1) as usize]
    }

    /// `μ_σ(t_k) = t_{k+1} − t_k`, defined for `k ∈ [−1, N−1]`.
    pub fn mu_sigma(&self, k: isize) -> f64 {
        self.t(k + 1) - self.t(k)
    }

    /// `μ_ρ(t_k) = t_k − t_{k−1}`, defined for `k ∈ [0, N]`.
    pub fn mu_rho(&self, k: isize) -> f64 {
        self.t(k) - self.t(k - 1)
    }

    pub fn is_unit_uniform(&self) -> bool {
        self.points.windows(2).all(|w| w[1] - w[0] == 1.0)
    }
}

/// How to generate a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScaleKind {
    /// `t_k = k·h`, so `a = 0`.
    Uniform { h: f64 },
    /// `t_k = q^k · t0`, so `a = t0`.
    Qscale { q: f64, t0: f64 },
    /// The `N + 2` points verbatim.
    Explicit { points: Vec<f64> },
    /// `a = 0` with graininess drawn uniformly from `[0.25, 1.75]`.
    Random { seed: u64 },
}

pub fn make_scale(kind: &ScaleKind, n: usize) -> Result<IsolatedTimeScale> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "N must be at least 2, got {n}"
        )));
    }
    let idx = || -1..=n as isize;
    let points = match kind {
        ScaleKind::Uniform { h } => {
            if !(h.is_finite() && *h > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "step h must be positive, got {h}"
                )));
            }
            idx().map(|k| k as f64 * h).collect()
        }
        ScaleKind::Qscale { q, t0 } => {
            if !(q.is_finite() && *q > 1.0) {
                return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
            }
            if !(t0.is_finite() && *t0 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "t0 must be positive, got {t0}"
                )));
            }
            idx().map(|k| t0 * q.powi(k as i32)).collect()
        }
        ScaleKind::Explicit { points } => {
            if points.len() != n + 2 {
                return Err(Error::InvalidParameter(format!(
                    "explicit scale with N = {n} needs {} points, got {}",
                    n + 2,
                    points.len()
                )));
            }
            points.clone()
        }
        ScaleKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut pts = Vec::with_capacity(n + 2);
            pts.push(-rng.gen_range(0.25..1.75));
            pts.push(0.0);
            for _ in 0..n {
                let last = *pts.last().unwrap();
                pts.push(last + rng.gen_range(0.25..1.75));
            }
            pts
        }
    };
    IsolatedTimeScale::new(points)
}

/// A matrix-valued function on the index window `[lo, hi]` of a scale.
/// Vector-valued functions are stored as `d × 1` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    scale: Arc<IsolatedTimeScale>,
    lo: isize,
    values: Vec<CMatrix>,
}

impl GridFunction {
    pub fn new(scale: Arc<IsolatedTimeScale>, lo: isize, values: Vec<CMatrix>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::WindowMismatch(
                "a grid function needs at least one value".into(),
            ));
        }
        let hi = lo + values.len() as isize - 1;
        if !scale.contains_index(lo) || !scale.contains_index(hi) {
            return Err(Error::WindowMismatch(format!(
                "window [{lo}, {hi}] outside [-1, {}]",
                scale.n()
            )));
        }
        let shape = values[0].shape();
        if let Some(i) = values.iter().position(|v| v.shape() != shape) {
            return Err(Error::WindowMismatch(format!(
                "value at index {} has shape {:?}, expected {shape:?}",
                lo + i as isize,
                values[i].shape()
            )));
        }
        Ok(Self { scale, lo, values })
    }

    pub fn from_fn(
        scale: Arc<IsolatedTimeScale>,
        lo: isize,
        hi: isize,
        mut f: impl FnMut(isize, f64) -> CMatrix,
    ) -> Result<Self> {
        if hi < lo {
            return Err(Error::WindowMismatch(format!("empty window [{lo}, {hi}]")));
        }
        let values = (lo..=hi)
            .map(|k| {
                let t = if scale.contains_index(k) {
                    scale.t(k)
                } else {
                    f64::NAN
                };
                f(k, t)
            })
            .collect();
        Self::new(scale, lo, values)
    }

    /// Vector-valued function from a stacked column `(x(t_lo); …; x(t_hi))`.
    pub fn from_stacked(
        scale: Arc<IsolatedTimeScale>,
        lo: isize,
        d: usize,
        stacked: impl IntoIterator<Item = C64>,
    ) -> Result<Self> {
        let flat: Vec<C64> = stacked.into_iter().collect();
        if d == 0 || !flat.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: flat.len(),
            });
        }
        let values = flat
            .chunks(d)
            .map(|ch| CMatrix::from_column_slice(d, 1, ch))
            .collect();
        Self::new(scale, lo, values)
    }

    pub fn zeros(
        scale: Arc<IsolatedTimeScale>,
        lo: isize,
        hi: isize,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        Self::from_fn(scale, lo, hi, |_, _| CMatrix::zeros(rows, cols))
    }

    pub fn scale(&self) -> &Arc<IsolatedTimeScale> {
        &self.scale
    }

    pub fn lo(&self) -> isize {
        self.lo
    }

    pub fn hi(&self) -> isize {
        self.lo + self.values.len() as isize - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(rows, cols)` of each value.
    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn covers(&self, lo: isize, hi: isize) -> bool {
        self.lo <= lo && hi <= self.hi()
    }

    pub fn get(&self, k: isize) -> Option<&CMatrix> {
        if k < self.lo {
            return None;
        }
        self.values.get((k - self.lo) as usize)
    }

    /// Value at global index `k`; panics outside the window.
    pub fn at(&self, k: isize) -> &CMatrix {
        self.get(k)
            .unwrap_or_else(|| panic!("index {k} outside window [{}, {}]", self.lo, self.hi()))
    }

    pub fn restrict(&self, lo: isize, hi: isize) -> Result<Self> {
        if !self.covers(lo, hi) || hi < lo {
            return Err(Error::WindowMismatch(format!(
                "cannot restrict [{}, {}] to [{lo}, {hi}]",
                self.lo,
                self.hi()
            )));
        }
        let a = (lo - self.lo) as usize;
        let b = (hi - self.lo) as usize;
        Ok(Self {
            scale: self.scale.clone(),
            lo,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Stacked column of a vector-valued function.
    pub fn stacked(&self) -> CVector {
        let (rows, cols) = self.shape();
        assert_eq!(cols, 1, "stacked() needs a vector-valued function");
        CVector::from_iterator(
            rows * self.len(),
            self.values.iter().flat_map(|v| v.iter().copied()),
        )
    }

    pub fn map(&self, mut f: impl FnMut(isize, &CMatrix) -> CMatrix) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| f(self.lo + i as isize, v))
            .collect();
        Self::new(self.scale.clone(), self.lo, values)
    }

    /// Pointwise combination on the common window of two functions.
    pub fn zip_with(
        &self,
        other: &GridFunction,
        mut f: impl FnMut(isize, &CMatrix, &CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        if hi < lo {
            return Err(Error::WindowMismatch(format!(
                "windows [{}, {}] and [{}, {}] are disjoint",
                self.lo,
                self.hi(),
                other.lo,
                other.hi()
            )));
        }
        Self::from_fn(self.scale.clone(), lo, hi, |k, _| {
            f(k, self.at(k), other.at(k))
        })
    }

    /// Largest entry modulus over the window.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// A single difference operator in an iterated-derivative word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Derivative {
    Delta,
    Nabla,
}

/// `x^Δ(t_k) = (x_{k+1} − x_k)/μ_σ(t_k)` on `[lo, hi−1]`.
pub fn delta(x: &GridFunction) -> Result<GridFunction> {
    if x.len() < 2 {
        return Err(Error::WindowTooSmall {
            lo: x.lo(),
            hi: x.hi(),
            what: "delta needs two points",
        });
    }
    let s = x.scale().clone();
    GridFunction::from_fn(s.clone(), x.lo(), x.hi() - 1, |k, _| {
        (x.at(k + 1) - x.at(k)) / cr(s.mu_sigma(k))
    })
}

/// `x^∇(t_k) = (x_k − x_{k−1})/μ_ρ(t_k)` on `[lo+1, hi]`.
pub fn nabla(x: &GridFunction) -> Result<GridFunction> {
    if x.len() < 2 {
        return Err(Error::WindowTooSmall {
            lo: x.lo(),
            hi: x.hi(),
            what: "nabla needs two points",
        });
    }
    let s = x.scale().clone();
    GridFunction::from_fn(s.clone(), x.lo() + 1, x.hi(), |k, _| {
        (x.at(k) - x.at(k - 1)) / cr(s.mu_rho(k))
    })
}

/// Left fold of Δ/∇ applications in word order.
pub fn iterated_derivative(x: &GridFunction, word: &[Derivative]) -> Result<GridFunction> {
    word.iter().try_fold(x.clone(), |acc, op| match op {
        Derivative::Delta => delta(&acc),
        Derivative::Nabla => nabla(&acc),
    })
}

/// `∫_{t_lo}^{t_hi} f(t) ∇t = Σ_{k=lo+1}^{hi} f(t_k) μ_ρ(t_k)`.
pub fn nabla_integral(f: &GridFunction, lo: isize, hi: isize) -> Result<CMatrix> {
    let (rows, cols) = f.shape();
    if hi < lo || lo < -1 {
        return Err(Error::WindowMismatch(format!(
            "invalid integration bounds [{lo}, {hi}]"
        )));
    }
    if hi > lo && !f.covers(lo + 1, hi) {
        return Err(Error::WindowMismatch(format!(
            "integrand on [{}, {}] does not cover ({lo}, {hi}]",
            f.lo(),
            f.hi()
        )));
    }
    let s = f.scale();
    Ok(((lo + 1)..=hi).fold(CMatrix::zeros(rows, cols), |acc, k| {
        acc + f.at(k) * cr(s.mu_rho(k))
    }))
}
