//! Double description method: extreme rays of a pointed cone `{x : A x >= 0}`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)] // float math without std
use num_traits::Float;

#[derive(Debug, Clone)]
pub(crate) struct Ray {
    pub v: Vec<f64>,
    /// Processed rows tight at this ray, as a bitset over row indices.
    pub zeros: Vec<u64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn rank_of(a: &[Vec<f64>], bits: &[u64], n: usize) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (w, &word) in bits.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let i = w * 64 + word.trailing_zeros() as usize;
            word &= word - 1;
            let mut r = a[i].clone();
            for q in &basis {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let nr = dot(&r, &r).sqrt();
            if nr > 1e-8 {
                r.iter_mut().for_each(|x| *x /= nr);
                basis.push(r);
                if basis.len() == n {
                    return n;
                }
            }
        }
    }
    basis.len()
}

/// Picks `n` rows spanning the row space with greedy pivoting on residual norm.
fn initial_basis(rows: &[Vec<f64>], n: usize) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(n);
    let mut residual: Vec<Vec<f64>> = rows.to_vec();
    for _ in 0..n {
        let mut best = None;
        let mut best_norm = 1e-7;
        for (i, r) in residual.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let nr = dot(r, r).sqrt();
            if nr > best_norm {
                best_norm = nr;
                best = Some(i);
            }
        }
        let i = best?;
        let mut q = residual[i].clone();
        normalize(&mut q);
        for r in residual.iter_mut() {
            let c = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(x, y)| *x -= c * y);
        }
        chosen.push(i);
    }
    Some(chosen)
}

/// Extreme rays of `{x : rows[i] . x >= 0}` in `R^n`. Rows are processed in
/// `order` after the initial basis. Returns `None` when the cone is not pointed.
pub(crate) fn extreme_rays(rows: &[Vec<f64>], n: usize, order: &[usize], eps: f64) -> Option<Vec<Ray>> {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    for r in a.iter_mut() {
        normalize(r);
    }
    let words = a.len().div_ceil(64);
    let ordered: Vec<Vec<f64>> = order.iter().map(|&i| a[i].clone()).collect();
    let basis: Vec<usize> = initial_basis(&ordered, n)?.iter().map(|&i| order[i]).collect();

    let ak = DMatrix::from_fn(n, n, |r, c| a[basis[r]][c]);
    let inv = ak.try_inverse()?;
    let mut rays: Vec<Ray> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = (0..n).map(|r| inv[(r, j)]).collect();
            normalize(&mut v);
            let mut zeros = vec![0u64; words];
            for (k, &row) in basis.iter().enumerate() {
                if k != j {
                    set_bit(&mut zeros, row);
                }
            }
            Ray { v, zeros }
        })
        .collect();

    let mut common = vec![0u64; words];
    let mut s = Vec::new();
    for &i in order {
        if basis.contains(&i) {
            continue;
        }
        let row = &a[i];
        s.clear();
        s.extend(rays.iter().map(|r| dot(row, &r.v)));
        let plus: Vec<usize> = (0..rays.len()).filter(|&k| s[k] > eps).collect();
        let minus: Vec<usize> = (0..rays.len()).filter(|&k| s[k] < -eps).collect();
        if minus.is_empty() {
            for (k, r) in rays.iter_mut().enumerate() {
                if s[k].abs() <= eps {
                    set_bit(&mut r.zeros, i);
                }
            }
            continue;
        }
        let mut created = Vec::new();
        for &p in &plus {
            for &q in &minus {
                let mut count = 0u32;
                for ((c, x), y) in common.iter_mut().zip(&rays[p].zeros).zip(&rays[q].zeros) {
                    *c = x & y;
                    count += c.count_ones();
                }
                if (count as usize) + 2 < n {
                    continue;
                }
                if rank_of(&a, &common, n) != n - 2 {
                    continue;
                }
                if (count as usize) + 2 > n {
                    let dominated = rays.iter().enumerate().any(|(k, r)| {
                        k != p && k != q && common.iter().zip(&r.zeros).all(|(c, z)| c & !z == 0)
                    });
                    if dominated {
                        continue;
                    }
                }
                let (sp, sq) = (s[p], s[q]);
                let mut v: Vec<f64> =
                    rays[q].v.iter().zip(&rays[p].v).map(|(vq, vp)| sp * vq - sq * vp).collect();
                normalize(&mut v);
                let mut zeros = common.clone();
                set_bit(&mut zeros, i);
                created.push(Ray { v, zeros });
            }
        }
        let mut next = Vec::with_capacity(rays.len() - minus.len() + created.len());
        for (k, mut r) in rays.into_iter().enumerate() {
            if s[k] > eps {
                next.push(r);
            } else if s[k] >= -eps {
                set_bit(&mut r.zeros, i);
                next.push(r);
            }
        }
        next.extend(created);
        rays = next;
    }
    Some(rays)
}
