use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)] // float math without std
use num_traits::Float;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Right singular vectors and singular values of a row-stacked point matrix,
/// sorted by decreasing singular value. Columns of the returned matrix are the
/// vectors.
pub(crate) fn principal_axes(rows: &[Vec<f64>], dim: usize) -> (Vec<f64>, DMatrix<f64>) {
    if rows.is_empty() || dim == 0 {
        return (alloc::vec![0.0; dim], DMatrix::identity(dim, dim));
    }
    // Pad with zero rows so the SVD always yields a full set of right vectors.
    let n = rows.len().max(dim);
    let m = DMatrix::from_fn(n, dim, |r, c| if r < rows.len() { rows[r][c] } else { 0.0 });
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..dim).collect();
    let sv = svd.singular_values;
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let values = idx.iter().map(|&i| sv[i]).collect();
    let mut axes = DMatrix::zeros(dim, dim);
    for (col, &i) in idx.iter().enumerate() {
        // Deterministic sign: largest-magnitude component positive.
        let mut best = 0;
        for c in 0..dim {
            if vt[(i, c)].abs() > vt[(i, best)].abs() + 1e-12 {
                best = c;
            }
        }
        let sign = if vt[(i, best)] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..dim {
            axes[(c, col)] = sign * vt[(i, c)];
        }
    }
    (values, axes)
}

/// Rank of a set of vectors by Gram-Schmidt with an absolute residual threshold.
pub(crate) fn rank(vectors: &[&[f64]], threshold: f64) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&r);
        if n > threshold {
            r.iter_mut().for_each(|x| *x /= n);
            basis.push(r);
        }
    }
    basis.len()
}
