//! Pareto dominance, front extraction and hypervolume over reward points.
//!
//! All objectives are maximized. Hypervolume is measured against a lower
//! reference point; coordinates below the reference are clamped up to it, so
//! such points contribute no volume instead of producing an error.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::rng::{self, Role};
use crate::{Error, Result};

/// A point in objective space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct RewardVector(Vec<f64>);

impl RewardVector {
    /// Builds a reward vector; at least one component, all finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("reward vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for RewardVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RewardVector> for Vec<f64> {
    fn from(v: RewardVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for RewardVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The lower corner of the hypervolume region.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint(RewardVector);

impl ReferencePoint {
    pub fn new(values: RewardVector) -> Self {
        Self(values)
    }

    /// The zero vector, used for every experiment in this crate.
    pub fn origin(dim: usize) -> Self {
        Self(RewardVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

/// A finite multiset of reward vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    points: Vec<RewardVector>,
}

impl PointSet {
    pub fn new(points: Vec<RewardVector>) -> Result<Self> {
        if let Some(first) = points.first() {
            let dim = first.dim();
            if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.dim(),
                });
            }
        }
        Ok(Self { points })
    }

    /// Convenience constructor from raw rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| RewardVector::new(r.as_ref().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `None` for the empty set.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(RewardVector::dim)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[RewardVector] {
        &self.points
    }

    pub fn iter(&self) -> core::slice::Iter<'_, RewardVector> {
        self.points.iter()
    }

    pub fn push(&mut self, p: RewardVector) -> Result<()> {
        if let Some(dim) = self.dim() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        self.points.push(p);
        Ok(())
    }
}

/// `a` dominates `b` when it is at least as good everywhere and strictly
/// better somewhere.
pub fn dominates(a: &RewardVector, b: &RewardVector) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    Ok(dominates_raw(a.values(), b.values()))
}

fn dominates_raw(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Nondominated filter with duplicate collapse. Output is sorted
/// lexicographically in descending order.
fn front_rows(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    // A point can only be weakly dominated by points that precede it in
    // descending lexicographic order.
    rows.sort_by(|a, b| lex_desc(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        if !kept.iter().any(|k| weakly_dominates(k, &row)) {
            kept.push(row);
        }
    }
    kept
}

/// The nondominated subset of `s`, duplicates collapsed.
pub fn pareto_front(s: &PointSet) -> PointSet {
    let rows = s.iter().map(|p| p.values().to_vec()).collect();
    let points = front_rows(rows).into_iter().map(RewardVector).collect();
    PointSet { points }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Clamps to the reference and translates it to the origin.
fn shifted_rows(s: &PointSet, reference: &ReferencePoint) -> Result<Vec<Vec<f64>>> {
    let r = reference.values();
    if let Some(dim) = s.dim() {
        check_dim(r.len(), dim)?;
    }
    Ok(s.iter()
        .map(|p| {
            p.values()
                .iter()
                .zip(r)
                .map(|(&v, &lo)| if v > lo { v - lo } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Exact dominated hypervolume of `s` above `reference`.
pub fn hypervolume(s: &PointSet, reference: &ReferencePoint) -> Result<f64> {
    let rows = shifted_rows(s, reference)?;
    if rows.is_empty() {
        return Ok(0.0);
    }
    Ok(volume_from_origin(front_rows(rows), reference.dim()))
}

/// `front` is a nondominated set relative to the origin, sorted descending.
fn volume_from_origin(front: Vec<Vec<f64>>, dim: usize) -> f64 {
    match (front.len(), dim) {
        (0, _) => 0.0,
        (_, 1) => front.iter().map(|p| p[0]).fold(0.0, f64::max),
        (_, 2) => sweep_2d(&front),
        _ => slice_volume(front, dim),
    }
}

/// Input sorted by x descending and nondominated, so y ascends.
fn sweep_2d(front: &[Vec<f64>]) -> f64 {
    let mut area = 0.0;
    let mut prev_y = 0.0;
    for p in front {
        if p[1] > prev_y {
            area += p[0] * (p[1] - prev_y);
            prev_y = p[1];
        }
    }
    area
}

/// Slices along the last coordinate. Between consecutive levels the covered
/// cross-section is the (dim-1)-volume of every point at or above the upper
/// level.
fn slice_volume(mut pts: Vec<Vec<f64>>, dim: usize) -> f64 {
    let last = dim - 1;
    pts.sort_by(|a, b| a[last].total_cmp(&b[last]).then_with(|| lex_desc(a, b)));
    let mut total = 0.0;
    let mut prev_level = 0.0;
    for k in 0..pts.len() {
        let level = pts[k][last];
        let thickness = level - prev_level;
        if thickness > 0.0 {
            let section: Vec<Vec<f64>> = pts[k..].iter().map(|p| p[..last].to_vec()).collect();
            total += thickness * volume_from_origin(front_rows(section), last);
            prev_level = level;
        }
    }
    total
}

/// Monte-Carlo hypervolume estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub volume: f64,
    /// `sqrt(p(1-p)/n) * box_volume` evaluated at the observed hit rate.
    pub std_error: f64,
    pub box_volume: f64,
    pub samples: u64,
}

/// Unbiased Monte-Carlo estimate of [`hypervolume`], sampling uniformly in
/// the box spanned by the reference and the coordinatewise maximum.
pub fn hypervolume_mc(
    s: &PointSet,
    reference: &ReferencePoint,
    n_samples: u64,
    seed: u64,
) -> Result<f64> {
    hypervolume_mc_estimate(s, reference, n_samples, seed).map(|e| e.volume)
}

pub fn hypervolume_mc_estimate(
    s: &PointSet,
    reference: &ReferencePoint,
    n_samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let rows = shifted_rows(s, reference)?;
    let dim = reference.dim();
    let mut upper = vec![0.0f64; dim];
    for row in &rows {
        for (u, &v) in upper.iter_mut().zip(row) {
            *u = u.max(v);
        }
    }
    let box_volume: f64 = if rows.is_empty() {
        0.0
    } else {
        upper.iter().product()
    };
    if box_volume <= 0.0 {
        return Ok(MonteCarloEstimate {
            volume: 0.0,
            std_error: 0.0,
            box_volume: 0.0,
            samples: n_samples,
        });
    }
    let front = front_rows(rows);
    let mut rng = rng::stream(seed, 0, Role::Environment, 0x4d43);
    let mut sample = vec![0.0f64; dim];
    let mut hits = 0u64;
    for _ in 0..n_samples {
        for (x, &u) in sample.iter_mut().zip(&upper) {
            *x = u * rng.random::<f64>();
        }
        if front.iter().any(|p| weakly_dominates(p, &sample)) {
            hits += 1;
        }
    }
    let n = n_samples as f64;
    let p = hits as f64 / n;
    Ok(MonteCarloEstimate {
        volume: p * box_volume,
        std_error: libm::sqrt(p * (1.0 - p) / n) * box_volume,
        box_volume,
        samples: n_samples,
    })
}
