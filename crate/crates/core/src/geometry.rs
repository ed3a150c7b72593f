//! Boxes, vertex polytopes, grid partitions and the mean sets used by the
//! abstraction (images of a cell under the mean maps).
//!
//! Every destination set is an axis-aligned box. Mean sets are either exact
//! vertex lists or their outer bounding boxes; both keep lower and upper
//! probability bounds sound because they contain the true mean set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::ConditionalGaussian;

/// Default cap on the number of candidate vertices before falling back to boxes.
pub const DEFAULT_VERTEX_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Dimension("box lower bound exceeds upper bound".into()));
        }
        Ok(HyperRect { lower, upper })
    }

    /// `[-r, r]^d`.
    pub fn symmetric(radius: f64, d: usize) -> Self {
        HyperRect {
            lower: vec![-radius; d],
            upper: vec![radius; d],
        }
    }

    pub fn point(p: &[f64]) -> Self {
        HyperRect {
            lower: p.to_vec(),
            upper: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, v)| self.lower[i] <= *v && *v <= self.upper[i])
    }

    pub fn contains_rect(&self, other: &HyperRect) -> bool {
        (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Nearest point of the box to `x`.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    pub fn translate(&self, c: &[f64]) -> HyperRect {
        HyperRect {
            lower: self.lower.iter().zip(c).map(|(l, d)| l + d).collect(),
            upper: self.upper.iter().zip(c).map(|(u, d)| u + d).collect(),
        }
    }

    /// Box ⊕ box.
    pub fn minkowski_sum(&self, other: &HyperRect) -> HyperRect {
        HyperRect {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a + b).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn intersect(&self, other: &HyperRect) -> Option<HyperRect> {
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).map(|(a, b)| a.min(*b)).collect();
        if lower.iter().zip(&upper).all(|(l, u)| l <= u) {
            Some(HyperRect { lower, upper })
        } else {
            None
        }
    }

    /// True when the intersection has positive volume.
    pub fn interiors_overlap(&self, other: &HyperRect) -> bool {
        (0..self.dim()).all(|i| self.lower[i].max(other.lower[i]) < self.upper[i].min(other.upper[i]))
    }

    /// Corner points, `2^d` of them (duplicates kept for degenerate sides).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] })
                    .collect()
            })
            .collect()
    }

    /// Smallest box containing all points.
    pub fn bounding(points: &[Vec<f64>]) -> Result<HyperRect> {
        let first = points.first().ok_or_else(|| Error::Empty("bounding box of no points".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in &points[1..] {
            for (i, v) in p.iter().enumerate() {
                lower[i] = lower[i].min(*v);
                upper[i] = upper[i].max(*v);
            }
        }
        Ok(HyperRect { lower, upper })
    }

    /// Range of the Euclidean norm over the box: `(min |x|, max |x|)`.
    pub fn norm_range(&self) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for i in 0..self.dim() {
            let (l, u) = (self.lower[i], self.upper[i]);
            let closest = if l > 0.0 {
                l
            } else if u < 0.0 {
                u
            } else {
                0.0
            };
            near += closest * closest;
            far += l.abs().max(u.abs()).powi(2);
        }
        (near.sqrt(), far.sqrt())
    }
}

/// A bounded convex polytope in vertex form, optionally with its half-spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    pub vertices: Vec<Vec<f64>>,
    /// `normals · x <= offsets`.
    pub halfspaces: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl ConvexPolytope {
    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Empty("polytope without vertices".into()));
        }
        let d = vertices[0].len();
        if vertices.iter().any(|v| v.len() != d) {
            return Err(Error::Dimension("polytope vertices of mixed dimension".into()));
        }
        Ok(ConvexPolytope {
            vertices,
            halfspaces: None,
        })
    }

    pub fn from_rect(rect: &HyperRect) -> Self {
        let d = rect.dim();
        let mut normals = DMatrix::zeros(2 * d, d);
        let mut offsets = DVector::zeros(2 * d);
        for i in 0..d {
            normals[(2 * i, i)] = 1.0;
            offsets[2 * i] = rect.upper[i];
            normals[(2 * i + 1, i)] = -1.0;
            offsets[2 * i + 1] = -rect.lower[i];
        }
        ConvexPolytope {
            vertices: rect.vertices(),
            halfspaces: Some((normals, offsets)),
        }
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn bounding_box(&self) -> HyperRect {
        HyperRect::bounding(&self.vertices).expect("vertex list is non-empty")
    }

    /// Membership through the half-space form, if present.
    pub fn contains(&self, x: &[f64], tol: f64) -> Option<bool> {
        let (normals, offsets) = self.halfspaces.as_ref()?;
        let xv = DVector::from_column_slice(x);
        let lhs = normals * xv;
        Some(lhs.iter().zip(offsets.iter()).all(|(a, b)| *a <= b + tol))
    }
}

/// `{T v + c : v vertex of P}`; the hull of the result is the image of `P`.
pub fn affine_image(p: &ConvexPolytope, t: &DMatrix<f64>, c: Option<&DVector<f64>>) -> Result<ConvexPolytope> {
    if t.ncols() != p.dim() {
        return Err(Error::Dimension(format!(
            "map has {} columns, polytope dimension {}",
            t.ncols(),
            p.dim()
        )));
    }
    let vertices = p
        .vertices
        .iter()
        .map(|v| {
            let mut y = t * DVector::from_column_slice(v);
            if let Some(c) = c {
                y += c;
            }
            y.as_slice().to_vec()
        })
        .collect();
    Ok(ConvexPolytope {
        vertices,
        halfspaces: None,
    })
}

/// Exact bounding box of `{T x : x ∈ rect}` by interval arithmetic.
pub fn linear_box(t: &DMatrix<f64>, rect: &HyperRect) -> HyperRect {
    let mut lower = vec![0.0; t.nrows()];
    let mut upper = vec![0.0; t.nrows()];
    for i in 0..t.nrows() {
        for j in 0..t.ncols() {
            let a = t[(i, j)];
            let (p, q) = (a * rect.lower[j], a * rect.upper[j]);
            lower[i] += p.min(q);
            upper[i] += p.max(q);
        }
    }
    HyperRect { lower, upper }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub domain: HyperRect,
    pub counts: Vec<usize>,
    pub cells: Vec<HyperRect>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Per-dimension grid index of a cell id (first dimension varies slowest).
    pub fn multi_index(&self, id: usize) -> Vec<usize> {
        let mut rest = id;
        let mut idx = vec![0; self.counts.len()];
        for i in (0..self.counts.len()).rev() {
            idx[i] = rest % self.counts[i];
            rest /= self.counts[i];
        }
        idx
    }

    /// Cell containing `x`, or `None` outside the domain. Shared faces go to the higher cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let mut id = 0;
        for i in 0..self.counts.len() {
            let w = self.domain.width(i) / self.counts[i] as f64;
            let k = ((x[i] - self.domain.lower[i]) / w).floor() as isize;
            let mut k = k.clamp(0, self.counts[i] as isize - 1) as usize;
            // floor() may disagree with the stored cell bounds by one ulp
            let cell_lo = |k: usize| self.domain.lower[i] + k as f64 * w;
            if k + 1 < self.counts[i] && x[i] >= cell_lo(k + 1) {
                k += 1;
            } else if k > 0 && x[i] < cell_lo(k) {
                k -= 1;
            }
            id = id * self.counts[i] + k;
        }
        Some(id)
    }
}

/// Uniform axis-aligned grid over `domain`.
pub fn grid_partition(domain: &HyperRect, counts: &[usize]) -> Result<Partition> {
    let d = domain.dim();
    if counts.len() != d {
        return Err(Error::Dimension(format!("grid has {} counts for a {d}-dimensional domain", counts.len())));
    }
    if counts.contains(&0) {
        return Err(Error::config("region.grid", "grid counts must be positive"));
    }
    if (0..d).any(|i| !(domain.width(i) > 0.0)) {
        return Err(Error::config("region", "domain has a zero-width dimension"));
    }
    let edge = |i: usize, k: usize| -> f64 {
        if k == counts[i] {
            domain.upper[i]
        } else {
            domain.lower[i] + k as f64 * (domain.width(i) / counts[i] as f64)
        }
    };
    let total: usize = counts.iter().product();
    let mut cells = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        cells.push(HyperRect {
            lower: (0..d).map(|i| edge(i, idx[i])).collect(),
            upper: (0..d).map(|i| edge(i, idx[i] + 1)).collect(),
        });
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < counts[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(Partition {
        domain: domain.clone(),
        counts: counts.to_vec(),
        cells,
    })
}

/// `[-ε, ε]^{s·n}`: the no-event set of `s` consecutive samples relative to the last event state.
pub fn phi_cube(epsilon: f64, s: usize, n: usize) -> HyperRect {
    HyperRect::symmetric(epsilon, s * n)
}

/// Linear parts of the conditional-mean sets as maps of `(x, v)`:
/// `P1 = {T₁ x + C_v v}` with `T₁ = C_x + C_v S_l`, and `P2` with `T₂ = T₁ - I`.
fn conditional_mean_maps(cond: &ConditionalGaussian) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = cond.dim();
    let mut t1 = cond.c_x.clone();
    for k in 0..cond.l {
        t1 += cond.c_v.view((0, k * n), (n, n));
    }
    let t2 = &t1 - DMatrix::<f64>::identity(n, n);
    (t1, t2)
}

/// Outer boxes of the conditional-mean sets `P1` (fixed targets) and `P2` (moving target).
pub fn p1_p2_boxes(cond: &ConditionalGaussian, region: &HyperRect, epsilon: f64) -> (HyperRect, HyperRect) {
    let (t1, t2) = conditional_mean_maps(cond);
    let spread: Vec<f64> = (0..cond.dim())
        .map(|i| epsilon * cond.c_v.row(i).iter().map(|c| c.abs()).sum::<f64>())
        .collect();
    let noise = HyperRect {
        lower: spread.iter().map(|r| -r).collect(),
        upper: spread,
    };
    (
        linear_box(&t1, region).minkowski_sum(&noise),
        linear_box(&t2, region).minkowski_sum(&noise),
    )
}

/// Images of every vertex of `region × [-ε,ε]^{l·n}` under the `P1` and `P2` maps,
/// or `None` when there would be more than `cap` of them.
pub fn exact_p_vertices(
    cond: &ConditionalGaussian,
    region: &HyperRect,
    epsilon: f64,
    cap: usize,
) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = cond.dim();
    let bits = n + cond.l * n;
    let count = 1usize.checked_shl(bits as u32).filter(|_| bits < usize::BITS as usize)?;
    if count > cap {
        return None;
    }
    let (t1, t2) = conditional_mean_maps(cond);
    let x_vertices = region.vertices();
    let v_vertices = HyperRect::symmetric(epsilon, cond.l * n).vertices_or_origin();
    let mut p1 = Vec::with_capacity(count);
    let mut p2 = Vec::with_capacity(count);
    for x in &x_vertices {
        let xv = DVector::from_column_slice(x);
        let a1 = &t1 * &xv;
        let a2 = &t2 * &xv;
        for v in &v_vertices {
            let shift = if cond.l == 0 {
                DVector::zeros(n)
            } else {
                &cond.c_v * DVector::from_column_slice(v)
            };
            p1.push((&a1 + &shift).as_slice().to_vec());
            p2.push((&a2 + &shift).as_slice().to_vec());
        }
    }
    Some((p1, p2))
}

impl HyperRect {
    /// Like [`HyperRect::vertices`], but a zero-dimensional box yields the single empty point.
    fn vertices_or_origin(&self) -> Vec<Vec<f64>> {
        if self.lower.is_empty() {
            vec![Vec::new()]
        } else {
            self.vertices()
        }
    }
}

/// Drops points that cannot be extreme: keeps the endpoints in 1-D and the
/// convex hull in 2-D; higher dimensions only lose exact duplicates.
pub fn extreme_candidates(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    match first.len() {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                vec![vec![lo]]
            } else {
                vec![vec![lo], vec![hi]]
            }
        }
        2 => hull_2d(points),
        _ => {
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
            for p in points {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            out
        }
    }
}

/// Andrew's monotone chain; collinear boundary points are dropped.
fn hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() <= 2 {
        return pts.into_iter().map(|p| p.to_vec()).collect();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.is_empty() {
        // all points collinear and identical after dedup
        return vec![pts[0].to_vec()];
    }
    hull.into_iter().map(|p| p.to_vec()).collect()
}
