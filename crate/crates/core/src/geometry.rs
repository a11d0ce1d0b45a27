//! Halfspaces, H-polytopes with combinatorial vertex enumeration, and
//! V-form point hulls.
//!
//! Everything the cover algorithm tracks lives in payment space, whose
//! dimension is the outcome count (tiny), while the number of bounding
//! hyperplanes stays small (base facets plus one cut per region pair).
//! Enumerating all `dim`-subsets of hyperplanes is therefore exact and
//! cheap, and avoids the degeneracy pitfalls of incremental convex-hull
//! maintenance.

use itertools::Itertools;
use serde::Serialize;

use crate::error::Error;
use crate::lp::{solve_lp, LinearProgram, LpOutcome};
use crate::model::{ContractSpace, SpaceKind};

/// Slack when testing a point against a bounding hyperplane.
pub const FEAS_TOL: f64 = 1e-7;

/// Vertices closer than this in l-infinity are the same vertex.
pub const DEDUP_TOL: f64 = 1e-7;

/// Pivots smaller than this make a hyperplane subset singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Normals shorter than this (l-infinity) are degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Halfspace
// ---------------------------------------------------------------------------

/// The closed region `{p : normal . p >= offset}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// A degenerate normal separates nothing; callers reject these upstream.
    pub fn is_degenerate(&self) -> bool {
        self.normal.iter().all(|v| v.abs() < DEGENERATE_TOL)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        dot(&self.normal, p) >= self.offset - tol
    }
}

// ---------------------------------------------------------------------------
// Polytope (H-form)
// ---------------------------------------------------------------------------

/// Intersection of halfspaces, stored as rows `a . x <= b`.
///
/// Callers must seed it from a bounded base ([`Polytope::from_space`] or an
/// explicit box); unboundedness is not detectable combinatorially.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    rows: Vec<(Vec<f64>, f64)>,
    vertex_cache: Option<Vec<Vec<f64>>>,
}

impl Polytope {
    /// The H-form of a contract space: non-negativity facets plus either
    /// the total-payment cap (simplex) or per-coordinate caps (box).
    pub fn from_space(space: &ContractSpace) -> Self {
        let m = space.dimension;
        let mut rows = Vec::with_capacity(2 * m + 1);
        for w in 0..m {
            let mut a = vec![0.0; m];
            a[w] = -1.0;
            rows.push((a, 0.0));
        }
        match space.kind {
            SpaceKind::Simplex => rows.push((vec![1.0; m], space.l1_cap())),
            SpaceKind::Box => {
                for w in 0..m {
                    let mut a = vec![0.0; m];
                    a[w] = 1.0;
                    rows.push((a, space.bound));
                }
            }
        }
        Self { dim: m, rows, vertex_cache: None }
    }

    /// Builds from explicit rows; the caller guarantees boundedness.
    pub fn from_rows(dim: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self, Error> {
        if rows.len() < dim {
            return Err(Error::Geometry(format!(
                "{} bounding hyperplanes cannot bound dimension {}",
                rows.len(),
                dim
            )));
        }
        if let Some((a, _)) = rows.iter().find(|(a, b)| {
            a.len() != dim || a.iter().any(|v| !v.is_finite()) || !b.is_finite()
        }) {
            return Err(Error::Geometry(format!(
                "malformed bounding row {a:?} for dimension {dim}"
            )));
        }
        Ok(Self { dim, rows, vertex_cache: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    /// Adds the cut `h.normal . x >= h.offset`, dropping the vertex cache.
    pub fn intersect(&self, h: &Halfspace) -> Self {
        let mut rows = self.rows.clone();
        rows.push((h.normal.iter().map(|v| -v).collect(), -h.offset));
        Self { dim: self.dim, rows, vertex_cache: None }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim
            && self
                .rows
                .iter()
                .all(|(a, b)| dot(a, p) <= b + tol)
    }

    /// Vertices in lexicographic order, computed once and cached until the
    /// next [`Polytope::intersect`].
    pub fn vertices(&mut self) -> Result<&[Vec<f64>], Error> {
        if self.vertex_cache.is_none() {
            self.vertex_cache = Some(self.enumerate_vertices()?);
        }
        Ok(self.vertex_cache.as_deref().expect("cache just filled"))
    }

    /// Enumerates vertices fresh: every `dim`-subset of rows is solved as a
    /// linear system, then filtered for feasibility and deduplicated.
    pub fn enumerate_vertices(&self) -> Result<Vec<Vec<f64>>, Error> {
        if self.rows.len() < self.dim {
            return Err(Error::Geometry(format!(
                "{} bounding hyperplanes cannot bound dimension {}",
                self.rows.len(),
                self.dim
            )));
        }
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for subset in (0..self.rows.len()).combinations(self.dim) {
            let Some(x) = self.solve_subset(&subset) else { continue };
            if !x.iter().all(|v| v.is_finite()) {
                continue;
            }
            if !self.contains(&x, FEAS_TOL) {
                continue;
            }
            if vertices.iter().any(|v| linf_distance(v, &x) <= DEDUP_TOL) {
                continue;
            }
            vertices.push(x);
        }
        vertices.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.partial_cmp(y).expect("vertices are finite"))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(vertices)
    }

    /// Gaussian elimination with partial pivoting on one row subset;
    /// `None` when the subset is singular.
    fn solve_subset(&self, subset: &[usize]) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut mat: Vec<Vec<f64>> = subset
            .iter()
            .map(|&i| {
                let (a, b) = &self.rows[i];
                let mut row = a.clone();
                row.push(*b);
                row
            })
            .collect();
        for col in 0..d {
            let (pivot_row, pivot) = (col..d)
                .map(|r| (r, mat[r][col].abs()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite pivots"))?;
            if pivot < SINGULAR_TOL {
                return None;
            }
            mat.swap(col, pivot_row);
            for r in 0..d {
                if r == col {
                    continue;
                }
                let factor = mat[r][col] / mat[col][col];
                if factor != 0.0 {
                    for c in col..=d {
                        let sub = factor * mat[col][c];
                        mat[r][c] -= sub;
                    }
                }
            }
        }
        Some((0..d).map(|r| mat[r][d] / mat[r][r]).collect())
    }
}

// ---------------------------------------------------------------------------
// PointHull (V-form)
// ---------------------------------------------------------------------------

/// Convex hull of explicitly stored generator points.
///
/// The empty hull doubles as "region not discovered yet"; generators keep
/// insertion order so "the first stored contract" is well defined.
#[derive(Debug, Clone, Default)]
pub struct PointHull {
    points: Vec<Vec<f64>>,
}

impl PointHull {
    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn singleton(p: Vec<f64>) -> Self {
        Self { points: vec![p] }
    }

    /// Appends a generator unless an existing one is within [`DEDUP_TOL`].
    pub fn add(&mut self, p: &[f64]) {
        if !self.points.iter().any(|q| linf_distance(q, p) <= DEDUP_TOL) {
            self.points.push(p.to_vec());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn first(&self) -> Option<&Vec<f64>> {
        self.points.first()
    }

    /// Exact membership via a feasibility LP: minimize the l-infinity gap
    /// between `p` and the hull; inside means the gap is at most `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> Result<bool, Error> {
        let k = self.points.len();
        if k == 0 {
            return Ok(false);
        }
        let dim = p.len();
        // Variables: k convex weights, then the gap t. Maximize -t.
        let mut objective = vec![0.0; k + 1];
        objective[k] = -1.0;
        let mut constraints: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * dim + 2);
        let mut ones = vec![1.0; k];
        ones.push(0.0);
        constraints.push((ones.clone(), 1.0));
        let neg_ones: Vec<f64> = ones.iter().map(|v| -v).collect();
        constraints.push((neg_ones, -1.0));
        for w in 0..dim {
            let mut upper = Vec::with_capacity(k + 1);
            for v in &self.points {
                upper.push(v[w]);
            }
            // The gap enters both rows with -1: |sum(weights . v) - p| <= t.
            let mut lower: Vec<f64> = upper.iter().map(|v| -v).collect();
            lower.push(-1.0);
            upper.push(-1.0);
            constraints.push((upper, p[w]));
            constraints.push((lower, -p[w]));
        }
        match solve_lp(&LinearProgram { objective, constraints })? {
            LpOutcome::Optimal { value, .. } => Ok(-value <= tol),
            other => Err(Error::Lp(format!(
                "hull membership program must be solvable, got {other:?}"
            ))),
        }
    }
}

/// True when the hull's convex span fills the whole polytope.
///
/// Callers maintain `hull subset of polytope`, so equality reduces to every
/// polytope vertex lying in the hull.
pub fn hull_equals_polytope(hull: &PointHull, polytope: &mut Polytope) -> Result<bool, Error> {
    let vertices = polytope.vertices()?.to_vec();
    if hull.is_empty() {
        return Ok(vertices.is_empty());
    }
    debug_assert!(
        hull.points().iter().all(|p| polytope.contains(p, 10.0 * FEAS_TOL)),
        "hull generators must stay inside the polytope"
    );
    for v in &vertices {
        if !hull.contains(v, FEAS_TOL)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Small vector helpers
// ---------------------------------------------------------------------------

pub fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| 0.5 * (x + y)).collect()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
