use alloc::vec;
use alloc::vec::Vec;

use super::hull::{convex_hull_with, orthonormal_complement};
use super::linalg::{dot, lex_cmp, norm, principal_axes, sub};
use super::{dd, GeometryConfig, GeometryError};

/// `normal . x <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Affine subspace `origin + span(basis)` containing a lower-dimensional set.
#[derive(Debug, Clone, PartialEq)]
pub struct Carrier {
    pub origin: Vec<f64>,
    /// Orthonormal directions.
    pub basis: Vec<Vec<f64>>,
}

/// Convex polytope kept in both vertex and halfspace form.
///
/// Vertices are sorted lexicographically and halfspaces by normal then offset,
/// so equal inputs always produce bit-identical objects. When `affine_dim < dim`
/// the halfspaces bound the set inside its carrier only.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub(crate) dim: usize,
    pub(crate) affine_dim: usize,
    pub(crate) vertices: Vec<Vec<f64>>,
    pub(crate) halfspaces: Vec<Halfspace>,
    pub(crate) carrier: Option<Carrier>,
    pub(crate) empty: bool,
}

impl Polytope {
    pub fn empty(dim: usize) -> Self {
        Self { dim, affine_dim: 0, vertices: Vec::new(), halfspaces: Vec::new(), carrier: None, empty: true }
    }

    /// Rebuilds a polytope from stored parts, recomputing the carrier from the
    /// vertices.
    pub fn from_parts(
        dim: usize,
        affine_dim: usize,
        vertices: Vec<Vec<f64>>,
        halfspaces: Vec<Halfspace>,
    ) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            if !halfspaces.is_empty() {
                return Err(GeometryError::Inconsistent("halfspaces without vertices"));
            }
            return Ok(Self::empty(dim));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(GeometryError::DimensionMismatch { index: i, got: v.len(), expected: dim });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinite);
            }
        }
        for h in &halfspaces {
            if h.normal.len() != dim {
                return Err(GeometryError::Inconsistent("halfspace dimension"));
            }
        }
        if affine_dim > dim {
            return Err(GeometryError::Inconsistent("affine dimension exceeds dimension"));
        }
        let carrier = if affine_dim < dim { Some(carrier_of(&vertices, dim, affine_dim)) } else { None };
        Ok(Self { dim, affine_dim, vertices, halfspaces, carrier, empty: false })
    }

    pub(crate) fn single_point(p: Vec<f64>) -> Self {
        let dim = p.len();
        let carrier = if dim > 0 { Some(Carrier { origin: p.clone(), basis: Vec::new() }) } else { None };
        Self { dim, affine_dim: 0, vertices: vec![p], halfspaces: Vec::new(), carrier, empty: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the affine hull; zero for empty sets.
    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn carrier(&self) -> Option<&Carrier> {
        self.carrier.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn is_full_dimensional(&self) -> bool {
        !self.empty && self.affine_dim == self.dim
    }

    /// Largest absolute vertex coordinate, at least one.
    pub fn scale(&self) -> f64 {
        self.vertices.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()))
    }

    pub fn vertex_centroid(&self) -> Option<Vec<f64>> {
        if self.empty {
            return None;
        }
        let mut c = vec![0.0; self.dim];
        for v in &self.vertices {
            c.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        let n = self.vertices.len() as f64;
        c.iter_mut().for_each(|a| *a /= n);
        Some(c)
    }

    /// Distance from `x` to the carrier; zero for full-dimensional sets.
    pub fn carrier_distance(&self, x: &[f64]) -> f64 {
        match &self.carrier {
            None => 0.0,
            Some(c) => {
                let mut r = sub(x, &c.origin);
                for b in &c.basis {
                    let k = dot(&r, b);
                    r.iter_mut().zip(b).for_each(|(v, w)| *v -= k * w);
                }
                norm(&r)
            }
        }
    }

    /// Membership with tolerance `tol` relative to [`Polytope::scale`].
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if self.empty || x.len() != self.dim {
            return false;
        }
        let t = tol * self.scale();
        if self.halfspaces.iter().any(|h| dot(&h.normal, x) > h.offset + t) {
            return false;
        }
        self.carrier_distance(x) <= t
    }

    /// Signed distance from `center` to the nearest facet. Zero when the set is
    /// not full-dimensional, negative when `center` lies outside.
    pub fn inscribed_radius(&self, center: &[f64]) -> Result<f64, GeometryError> {
        if self.empty {
            return Err(GeometryError::Empty);
        }
        if center.len() != self.dim {
            return Err(GeometryError::DimensionMismatch { index: 0, got: center.len(), expected: self.dim });
        }
        if self.affine_dim < self.dim {
            return Ok(0.0);
        }
        Ok(self.halfspaces.iter().map(|h| h.offset - dot(&h.normal, center)).fold(f64::INFINITY, f64::min))
    }

    /// Farthest point of the segment `anchor -> target` inside the set, with the
    /// segment parameter. Returns `target` unchanged when it is inside.
    pub fn ray_clip(&self, anchor: &[f64], target: &[f64], tol: f64) -> Result<(Vec<f64>, f64), GeometryError> {
        if self.empty {
            return Err(GeometryError::Empty);
        }
        if !self.contains(anchor, tol) {
            return Err(GeometryError::AnchorOutside);
        }
        if self.contains(target, tol) {
            return Ok((target.to_vec(), 1.0));
        }
        let d = sub(target, anchor);
        let mut t_star = 1.0f64;
        for h in &self.halfspaces {
            let ad = dot(&h.normal, &d);
            if ad > 0.0 {
                let t = (h.offset - dot(&h.normal, anchor)) / ad;
                t_star = t_star.min(t.max(0.0));
            }
        }
        if let Some(c) = &self.carrier {
            let mut r = d.clone();
            for b in &c.basis {
                let k = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(v, w)| *v -= k * w);
            }
            if norm(&r) > tol * self.scale() {
                t_star = 0.0;
            }
        }
        let p = anchor.iter().zip(&d).map(|(a, b)| a + t_star * b).collect();
        Ok((p, t_star))
    }

    /// Image under `x -> rotation x + translation` for an orthonormal `rotation`
    /// given row-major.
    pub fn transform(&self, rotation: &[Vec<f64>], translation: &[f64]) -> Result<Self, GeometryError> {
        let d = self.dim;
        if rotation.len() != d || rotation.iter().any(|r| r.len() != d) || translation.len() != d {
            return Err(GeometryError::DimensionMismatch { index: 0, got: rotation.len(), expected: d });
        }
        for i in 0..d {
            for j in 0..d {
                let g: f64 = (0..d).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                if (g - e).abs() > 1e-9 {
                    return Err(GeometryError::NotOrthonormal);
                }
            }
        }
        if self.empty {
            return Ok(self.clone());
        }
        let apply = |x: &[f64]| -> Vec<f64> { (0..d).map(|i| dot(&rotation[i], x)).collect() };
        let mut vertices: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|v| apply(v).iter().zip(translation).map(|(a, b)| a + b).collect())
            .collect();
        vertices.sort_by(|a, b| lex_cmp(a, b));
        let mut halfspaces: Vec<Halfspace> = self
            .halfspaces
            .iter()
            .map(|h| {
                let normal = apply(&h.normal);
                let offset = h.offset + dot(&normal, translation);
                Halfspace { normal, offset }
            })
            .collect();
        sort_halfspaces(&mut halfspaces);
        let carrier = self.carrier.as_ref().map(|c| Carrier {
            origin: apply(&c.origin).iter().zip(translation).map(|(a, b)| a + b).collect(),
            basis: c.basis.iter().map(|b| apply(b)).collect(),
        });
        Ok(Self { dim: d, affine_dim: self.affine_dim, vertices, halfspaces, carrier, empty: false })
    }

    /// Slice at `x[axis] = value`, returned in the remaining coordinates.
    pub fn slice_fix_coordinate(&self, axis: usize, value: f64) -> Result<Self, GeometryError> {
        self.slice_with(axis, value, &GeometryConfig::default())
    }

    pub fn slice_with(&self, axis: usize, value: f64, cfg: &GeometryConfig) -> Result<Self, GeometryError> {
        let d = self.dim;
        if axis >= d || d < 2 {
            return Err(GeometryError::AxisOutOfRange { axis, dim: d });
        }
        if !value.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let m = d - 1;
        if self.empty {
            return Ok(Self::empty(m));
        }
        let drop = |v: &[f64]| -> Vec<f64> {
            v.iter().enumerate().filter(|&(i, _)| i != axis).map(|(_, x)| *x).collect()
        };
        let tol_abs = cfg.tol * self.scale().max(value.abs());

        let mut ineq: Vec<(Vec<f64>, f64)> =
            self.halfspaces.iter().map(|h| (drop(&h.normal), h.offset - h.normal[axis] * value)).collect();

        // Carrier equalities n . x = n . origin for every normal n of the carrier.
        let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
        if let Some(c) = &self.carrier {
            for n in orthonormal_complement(&c.basis, d) {
                eq.push((drop(&n), dot(&n, &c.origin) - n[axis] * value));
            }
        }

        // Parametrize the equality solution set as y0 + K w.
        let (y0, kern) = if eq.is_empty() {
            let k: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            (vec![0.0; m], k)
        } else {
            match solve_equalities(&eq, m, tol_abs) {
                Some(s) => s,
                None => return Ok(Self::empty(m)),
            }
        };
        let lift = |w: &[f64]| -> Vec<f64> {
            let mut y = y0.clone();
            for (k, wk) in kern.iter().zip(w) {
                y.iter_mut().zip(k).for_each(|(a, b)| *a += wk * b);
            }
            y
        };
        if kern.is_empty() {
            let ok = ineq.iter().all(|(a, b)| dot(a, &y0) <= b + tol_abs);
            return Ok(if ok { Self::single_point(y0) } else { Self::empty(m) });
        }

        let nk = kern.len();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for (a, b) in ineq.drain(..) {
            let aw: Vec<f64> = kern.iter().map(|k| dot(&a, k)).collect();
            let rhs = b - dot(&a, &y0);
            if norm(&aw) <= 1e-12 {
                if rhs < -tol_abs {
                    return Ok(Self::empty(m));
                }
                continue;
            }
            rows.push((aw, rhs));
        }
        let s = rows.iter().fold(1e-300f64, |acc, (_, b)| acc.max(b.abs()));
        // Cone rows for (t, w'): t * rhs / s - a . w' >= 0, plus t >= 0.
        let mut cone: Vec<Vec<f64>> = rows
            .iter()
            .map(|(a, b)| {
                let mut r = Vec::with_capacity(nk + 1);
                r.push(b / s);
                r.extend(a.iter().map(|x| -x));
                r
            })
            .collect();
        let mut t_row = vec![0.0; nk + 1];
        t_row[0] = 1.0;
        cone.push(t_row);
        let order: Vec<usize> = (0..cone.len()).collect();
        let rays = dd::extreme_rays(&cone, nk + 1, &order, cfg.tol * 1e-1).ok_or(GeometryError::Unbounded)?;

        let mut pts = Vec::new();
        for r in rays {
            if r.v[0] > cfg.tol * 1e-3 {
                let w: Vec<f64> = r.v[1..].iter().map(|x| x / r.v[0] * s).collect();
                let y = lift(&w);
                pts.push(y);
            }
        }
        if pts.is_empty() {
            return Ok(Self::empty(m));
        }
        convex_hull_with(&pts, m, cfg)
    }
}

pub(crate) fn sort_halfspaces(h: &mut [Halfspace]) {
    h.sort_by(|a, b| lex_cmp(&a.normal, &b.normal).then(a.offset.total_cmp(&b.offset)));
}

fn carrier_of(vertices: &[Vec<f64>], dim: usize, k: usize) -> Carrier {
    let n = vertices.len() as f64;
    let mut c = vec![0.0; dim];
    for v in vertices {
        c.iter_mut().zip(v).for_each(|(a, b)| *a += b / n);
    }
    let centered: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v, &c)).collect();
    let (_, axes) = principal_axes(&centered, dim);
    let basis = (0..k).map(|j| (0..dim).map(|i| axes[(i, j)]).collect()).collect();
    Carrier { origin: c, basis }
}

/// Solution set of `E y = e` as a particular solution plus an orthonormal kernel.
fn solve_equalities(eq: &[(Vec<f64>, f64)], m: usize, tol_abs: f64) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    use nalgebra::{DMatrix, DVector};
    let rows = eq.len();
    let e = DMatrix::from_fn(rows, m, |r, c| eq[r].0[c]);
    let rhs = DVector::from_fn(rows, |r, _| eq[r].1);
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    let eps = 1e-9 * smax.max(1e-300);
    let y0 = svd.solve(&rhs, eps).ok()?;
    let resid = (&e * &y0 - &rhs).norm();
    if resid > tol_abs.max(1e-12) * 10.0 {
        return None;
    }
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let row_space: Vec<Vec<f64>> = {
        let vt = svd.v_t.as_ref()?;
        (0..vt.nrows())
            .filter(|&i| svd.singular_values[i] > eps)
            .map(|i| (0..m).map(|c| vt[(i, c)]).collect())
            .collect()
    };
    debug_assert_eq!(row_space.len(), rank);
    let kern = orthonormal_complement(&row_space, m);
    Some((y0.iter().copied().collect(), kern))
}
