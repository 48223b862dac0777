use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{dot, lex_cmp, norm, principal_axes, rank, sub};
use super::polytope::{sort_halfspaces, Carrier, Halfspace, Polytope};
use super::{dd, GeometryConfig, GeometryError};

/// Convex hull with the default tolerance.
pub fn convex_hull(points: &[Vec<f64>], dim: usize) -> Result<Polytope, GeometryError> {
    convex_hull_with(points, dim, &GeometryConfig::default())
}

/// Dimension of the affine hull of `points`.
pub fn affine_dimension(points: &[Vec<f64>], dim: usize) -> Result<usize, GeometryError> {
    let cfg = GeometryConfig::default();
    let pts = canonical_points(points, dim, &cfg)?;
    if pts.is_empty() {
        return Ok(0);
    }
    Ok(analyse(&pts, dim, &cfg).k)
}

struct Frame {
    k: usize,
    centroid: Vec<f64>,
    /// Columns span the carrier, most significant first.
    axes: nalgebra::DMatrix<f64>,
}

fn analyse(pts: &[Vec<f64>], dim: usize, cfg: &GeometryConfig) -> Frame {
    let n = pts.len() as f64;
    let mut c = vec![0.0; dim];
    for p in pts {
        c.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|a| *a /= n);
    let centered: Vec<Vec<f64>> = pts.iter().map(|p| sub(p, &c)).collect();
    let (sv, axes) = principal_axes(&centered, dim);
    let scale = pts.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let smax = sv.first().copied().unwrap_or(0.0);
    let k = if smax <= cfg.tol * scale.max(1e-300) {
        0
    } else {
        sv.iter().filter(|s| **s > cfg.tol * smax).count()
    };
    Frame { k, centroid: c, axes }
}

/// Validates, sorts and de-duplicates input points.
fn canonical_points(points: &[Vec<f64>], dim: usize, cfg: &GeometryConfig) -> Result<Vec<Vec<f64>>, GeometryError> {
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch { index: i, got: p.len(), expected: dim });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
    }
    let mut pts: Vec<Vec<f64>> = points.to_vec();
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts.dedup();
    let scale = pts.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let t = cfg.tol * scale;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        let dup = out.last().is_some_and(|q: &Vec<f64>| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= t));
        if !dup {
            out.push(p);
        }
    }
    Ok(out)
}

/// Orthonormal basis of the complement of `span(basis)` in `R^dim`.
pub(crate) fn orthonormal_complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::new();
    for e in 0..dim {
        let mut r: Vec<f64> = (0..dim).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for _ in 0..2 {
            for q in &all {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&r);
        if n > 1e-6 {
            r.iter_mut().for_each(|x| *x /= n);
            all.push(r.clone());
            out.push(r);
        }
        if all.len() == dim {
            break;
        }
    }
    out
}

/// Convex hull of `points` in `R^dim`, handling lower-dimensional inputs
/// through their carrier subspace.
pub fn convex_hull_with(points: &[Vec<f64>], dim: usize, cfg: &GeometryConfig) -> Result<Polytope, GeometryError> {
    let pts = canonical_points(points, dim, cfg)?;
    if pts.is_empty() {
        return Ok(Polytope::empty(dim));
    }
    if dim == 0 {
        return Ok(Polytope::single_point(Vec::new()));
    }
    let frame = analyse(&pts, dim, cfg);
    let k = frame.k;
    if k == 0 {
        return Ok(Polytope::single_point(pts[0].clone()));
    }
    let basis: Vec<Vec<f64>> = (0..k).map(|j| (0..dim).map(|i| frame.axes[(i, j)]).collect()).collect();
    let mut q: Vec<Vec<f64>> =
        pts.iter().map(|p| { let r = sub(p, &frame.centroid); basis.iter().map(|b| dot(b, &r)).collect() }).collect();
    let s = q.iter().flatten().fold(1e-300f64, |m, x| m.max(x.abs()));
    q.iter_mut().flatten().for_each(|x| *x /= s);

    // Facets in carrier coordinates as (unit normal, offset).
    let facets: Vec<(Vec<f64>, f64)> = if k == 1 {
        let hi = q.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x[0]));
        let lo = q.iter().fold(f64::INFINITY, |m, x| m.min(x[0]));
        vec![(vec![-1.0], -lo), (vec![1.0], hi)]
    } else {
        facets_by_polarity(&q, k, cfg)?
    };

    let face_tol = 10.0 * cfg.tol;
    let mut vertex_idx = Vec::new();
    for (i, p) in q.iter().enumerate() {
        let tight: Vec<&[f64]> =
            facets.iter().filter(|(n, b)| (dot(n, p) - b).abs() <= face_tol).map(|(n, _)| n.as_slice()).collect();
        if tight.len() >= k && rank(&tight, 1e-7) == k {
            vertex_idx.push(i);
        }
    }
    // Merge vertices that coincide within tolerance; indices are already canonical.
    let scale = pts.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(vertex_idx.len());
    for i in vertex_idx {
        let p = &pts[i];
        if !vertices.iter().any(|v| v.iter().zip(p).all(|(a, b)| (a - b).abs() <= cfg.tol * scale)) {
            vertices.push(p.clone());
        }
    }

    let mut halfspaces: Vec<Halfspace> = facets
        .iter()
        .map(|(n, _)| {
            let mut normal = vec![0.0; dim];
            for (bj, nj) in basis.iter().zip(n) {
                normal.iter_mut().zip(bj).for_each(|(a, b)| *a += nj * b);
            }
            let l = norm(&normal);
            normal.iter_mut().for_each(|x| *x /= l);
            let offset = vertices.iter().map(|v| dot(&normal, v)).fold(f64::NEG_INFINITY, f64::max);
            Halfspace { normal, offset }
        })
        .collect();
    sort_halfspaces(&mut halfspaces);

    let carrier = if k < dim { Some(Carrier { origin: frame.centroid.clone(), basis }) } else { None };
    Ok(Polytope { dim, affine_dim: k, vertices, halfspaces, carrier, empty: false })
}

/// Facets of a full-dimensional point set in `R^k` centred near the origin, via
/// extreme rays of the polar cone.
fn facets_by_polarity(q: &[Vec<f64>], k: usize, cfg: &GeometryConfig) -> Result<Vec<(Vec<f64>, f64)>, GeometryError> {
    let rows: Vec<Vec<f64>> = q
        .iter()
        .map(|p| {
            let mut r = Vec::with_capacity(k + 1);
            r.push(1.0);
            r.extend(p.iter().map(|x| -x));
            r
        })
        .collect();
    let order: Vec<usize> = (0..q.len()).collect();
    let rays = dd::extreme_rays(&rows, k + 1, &order, cfg.tol).ok_or(GeometryError::Unbounded)?;

    let face_tol = 10.0 * cfg.tol;
    let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in rays {
        if r.v[0] <= 1e-14 {
            continue;
        }
        let y: Vec<f64> = r.v[1..].to_vec();
        let ly = norm(&y);
        if ly <= 0.0 {
            continue;
        }
        let n0: Vec<f64> = y.iter().map(|x| x / ly).collect();
        let b0 = r.v[0] / ly;
        let tight: Vec<&Vec<f64>> = q.iter().filter(|p| (dot(&n0, p) - b0).abs() <= face_tol).collect();
        if tight.len() < k {
            continue;
        }
        let Some(n) = refit_normal(&tight, k, &n0) else { continue };
        let b = q.iter().map(|p| dot(&n, p)).fold(f64::NEG_INFINITY, f64::max);
        if b <= 0.0 {
            continue;
        }
        facets.push((n, b));
    }
    facets.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(facets.len());
    for f in facets {
        let dup = out.iter().any(|g| g.0.iter().zip(&f.0).all(|(a, b)| (a - b).abs() <= 1e-7));
        if !dup {
            out.push(f);
        }
    }
    Ok(out)
}

/// Least-squares hyperplane normal through `tight`, oriented like `hint`. `None`
/// when the points do not span a hyperplane.
fn refit_normal(tight: &[&Vec<f64>], k: usize, hint: &[f64]) -> Option<Vec<f64>> {
    let n = tight.len() as f64;
    let mut c = vec![0.0; k];
    for p in tight {
        c.iter_mut().zip(p.iter()).for_each(|(a, b)| *a += b / n);
    }
    let centered: Vec<Vec<f64>> = tight.iter().map(|p| sub(p, &c)).collect();
    let (sv, axes) = principal_axes(&centered, k);
    let smax = sv[0].max(1e-300);
    if sv[k - 2] <= 1e-7 * smax.max(1e-9) {
        return None;
    }
    let mut normal: Vec<f64> = (0..k).map(|i| axes[(i, k - 1)]).collect();
    if dot(&normal, hint) < 0.0 {
        normal.iter_mut().for_each(|x| *x = -*x);
    }
    Some(normal)
}
