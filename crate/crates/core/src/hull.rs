//! Convex-hull membership: a planar fast path and a dimension-free route.

use crate::linalg::{DenseMatrix, Lu};
use crate::scalar::Scalar;

fn cross<T: Scalar>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain). Collinear points are dropped.
pub fn convex_hull_2d<T: Scalar>(points: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[T; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[T; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn segment_distance<T: Scalar>(a: [T; 2], b: [T; 2], p: [T; 2]) -> T {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == T::zero() {
        T::zero()
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).max(T::zero()).min(T::one())
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Whether `p` lies in the convex polygon `hull` (CCW, from
/// [`convex_hull_2d`]) up to `slack`. Degenerate hulls (a point or a segment)
/// are handled by distance.
pub fn point_in_convex_polygon<T: Scalar>(hull: &[[T; 2]], p: [T; 2], slack: T) -> bool {
    match hull.len() {
        0 => false,
        1 => segment_distance(hull[0], hull[0], p) <= slack,
        2 => segment_distance(hull[0], hull[1], p) <= slack,
        n => (0..n).all(|k| {
            let a = hull[k];
            let b = hull[(k + 1) % n];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, p) >= -slack * len
        }),
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean distance from `target` to the convex hull of `points`, any
/// dimension, via Wolfe's minimum-norm-point iteration on `points − target`.
pub fn hull_distance<T: Scalar>(points: &[Vec<T>], target: &[T]) -> T {
    assert!(!points.is_empty(), "hull of no points");
    let p: Vec<Vec<T>> = points
        .iter()
        .map(|s| s.iter().zip(target).map(|(&a, &b)| a - b).collect())
        .collect();
    let scale = p.iter().map(|v| dot(v, v)).fold(T::zero(), T::max);
    if scale == T::zero() {
        return T::zero();
    }
    let tol = T::epsilon() * T::lit(64.0) * scale;
    let first = (0..p.len())
        .min_by(|&a, &b| dot(&p[a], &p[a]).partial_cmp(&dot(&p[b], &p[b])).unwrap())
        .unwrap();
    let mut corral = vec![first];
    let mut w = vec![T::one()];
    let dim = target.len();
    let combine = |corral: &[usize], w: &[T]| -> Vec<T> {
        let mut y = vec![T::zero(); dim];
        for (&k, &wk) in corral.iter().zip(w) {
            for (yi, &pi) in y.iter_mut().zip(&p[k]) {
                *yi += wk * pi;
            }
        }
        y
    };
    for _ in 0..(10 * p.len() + 100) {
        let y = combine(&corral, &w);
        let yy = dot(&y, &y);
        let (j, pj_y) = (0..p.len())
            .map(|k| (k, dot(&p[k], &y)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if yy - pj_y <= tol || corral.contains(&j) {
            return yy.sqrt();
        }
        corral.push(j);
        w.push(T::zero());
        loop {
            let m = corral.len();
            // [G 1; 1ᵀ 0] [α; μ] = [0; 1]
            let sys = DenseMatrix::from_fn(m + 1, m + 1, |a, b| match (a < m, b < m) {
                (true, true) => dot(&p[corral[a]], &p[corral[b]]),
                (false, false) => T::zero(),
                _ => T::one(),
            });
            let mut rhs = vec![T::zero(); m + 1];
            rhs[m] = T::one();
            let alpha = match Lu::factor(&sys) {
                Ok(lu) => lu.solve_vec(&rhs)[..m].to_vec(),
                Err(_) => {
                    // affinely dependent corral: drop the newest point
                    corral.pop();
                    w.pop();
                    return dot(&combine(&corral, &w), &combine(&corral, &w)).sqrt();
                }
            };
            if alpha.iter().all(|&a| a > T::zero()) {
                w = alpha;
                break;
            }
            let theta = alpha
                .iter()
                .zip(&w)
                .filter(|(&a, _)| a <= T::zero())
                .map(|(&a, &wk)| wk / (wk - a))
                .fold(T::one(), T::min);
            for (wk, &a) in w.iter_mut().zip(&alpha) {
                *wk = theta * a + (T::one() - theta) * *wk;
            }
            let mut k = 0;
            let mut removed = false;
            while k < corral.len() {
                if w[k] <= T::epsilon() {
                    corral.remove(k);
                    w.remove(k);
                    removed = true;
                } else {
                    k += 1;
                }
            }
            if !removed {
                // guard: drop the smallest weight so the minor loop terminates
                let (kmin, _) = w.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
                corral.remove(kmin);
                w.remove(kmin);
            }
            let total: T = w.iter().copied().sum();
            for wk in &mut w {
                *wk /= total;
            }
        }
    }
    let y = combine(&corral, &w);
    dot(&y, &y).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_membership() {
        let hull = convex_hull_2d(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(hull.len(), 4);
        assert!(point_in_convex_polygon(&hull, [0.5, 0.5], 1e-9));
        assert!(point_in_convex_polygon(&hull, [1.0, 0.5], 1e-9));
        assert!(point_in_convex_polygon(&hull, [1.0 + 5e-10, 0.5], 1e-9));
        assert!(!point_in_convex_polygon(&hull, [1.0 + 1e-6, 0.5], 1e-9));
    }

    #[test]
    fn degenerate_hulls() {
        let pt = convex_hull_2d(&[[0.3, 0.3], [0.3, 0.3]]);
        assert!(point_in_convex_polygon(&pt, [0.3, 0.3], 1e-9));
        assert!(!point_in_convex_polygon(&pt, [0.3, 0.31], 1e-9));
        let seg = convex_hull_2d(&[[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]]);
        assert_eq!(seg.len(), 2);
        assert!(point_in_convex_polygon(&seg, [0.25, 0.25], 1e-9));
        assert!(!point_in_convex_polygon(&seg, [0.25, 0.3], 1e-9));
    }

    #[test]
    fn wolfe_distances() {
        let sq: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!(hull_distance(&sq, &[0.5, 0.5]) < 1e-12);
        assert!((hull_distance(&sq, &[2.0, 0.5]) - 1.0).abs() < 1e-12);
        assert!((hull_distance(&sq, &[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
        let tet: Vec<Vec<f64>> = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(hull_distance(&tet, &[0.2, 0.2, 0.2]) < 1e-12);
        let d = hull_distance(&tet, &[1.0, 1.0, 1.0]);
        assert!((d - (2.0 / 3f64.sqrt())).abs() < 1e-12, "{d}");
    }
}
