//! Symmetric Chamfer distance:
//! `(1 / 2m) * (sum_x min_y |x - y|^2 + sum_y min_x |y - x|^2)`.

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::sampling::PointCloud;

fn check_sizes(x: &[Point3], y: &[Point3]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("chamfer of empty clouds".into()));
    }
    Ok(())
}

/// Chamfer distance with k-d tree nearest-neighbour queries.
pub fn chamfer(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_sizes(&x.points, &y.points)?;
    let one_way = |from: &[Point3], to: &[Point3]| -> f64 {
        let coords: Vec<[f64; 3]> = to.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
        from.iter()
            .map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance)
            .sum()
    };
    let m = x.len() as f64;
    Ok((one_way(&x.points, &y.points) + one_way(&y.points, &x.points)) / (2.0 * m))
}

/// Quadratic-time reference implementation of [`chamfer`].
pub fn chamfer_brute(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_sizes(&x.points, &y.points)?;
    let one_way = |from: &[Point3], to: &[Point3]| -> f64 {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum()
    };
    let m = x.len() as f64;
    Ok((one_way(&x.points, &y.points) + one_way(&y.points, &x.points)) / (2.0 * m))
}

/// Chamfer distance between a flat `[x0, y0, z0, ...]` prediction and a
/// target cloud, with its gradient with respect to the prediction.
///
/// Nearest neighbours are held fixed at their current assignment; among
/// equidistant candidates the lowest index wins.
pub(crate) fn chamfer_with_grad(pred: &[f64], target: &[Point3]) -> (f64, Vec<f64>) {
    let m = target.len();
    debug_assert_eq!(pred.len(), 3 * m);
    let tx: Vec<f64> = target.iter().map(|q| q.x).collect();
    let ty: Vec<f64> = target.iter().map(|q| q.y).collect();
    let tz: Vec<f64> = target.iter().map(|q| q.z).collect();
    let mut row_best = vec![f64::INFINITY; m];
    let mut row_idx = vec![0usize; m];
    let mut col_best = vec![f64::INFINITY; m];
    let mut col_idx = vec![0usize; m];
    let mut dist = vec![0.0; m];
    for i in 0..m {
        let (px, py, pz) = (pred[3 * i], pred[3 * i + 1], pred[3 * i + 2]);
        for j in 0..m {
            let (dx, dy, dz) = (px - tx[j], py - ty[j], pz - tz[j]);
            dist[j] = dx * dx + dy * dy + dz * dz;
        }
        for j in 0..m {
            let closer = dist[j] < col_best[j];
            col_best[j] = if closer { dist[j] } else { col_best[j] };
            col_idx[j] = if closer { i } else { col_idx[j] };
        }
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for (j, &d) in dist.iter().enumerate() {
            if d < best {
                best = d;
                arg = j;
            }
        }
        row_best[i] = best;
        row_idx[i] = arg;
    }
    let scale = 1.0 / (2.0 * m as f64);
    let loss = (row_best.iter().sum::<f64>() + col_best.iter().sum::<f64>()) * scale;

    let mut grad = vec![0.0; 3 * m];
    for i in 0..m {
        let q = target[row_idx[i]];
        for (k, c) in [q.x, q.y, q.z].into_iter().enumerate() {
            grad[3 * i + k] += 2.0 * scale * (pred[3 * i + k] - c);
        }
    }
    for (j, q) in target.iter().enumerate() {
        let i = col_idx[j];
        for (k, c) in [q.x, q.y, q.z].into_iter().enumerate() {
            grad[3 * i + k] += 2.0 * scale * (pred[3 * i + k] - c);
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| Point3::from(*p)).collect()).unwrap()
    }

    fn random_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| Point3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_value() {
        let x = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let y = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&x, &y).unwrap(), 0.5);
        assert_eq!(chamfer_brute(&x, &y).unwrap(), 0.5);
    }

    #[test]
    fn identity_and_symmetry() {
        let mut rng = seed::rng(2);
        for n in [1, 7, 64] {
            let x = random_cloud(&mut rng, n);
            let y = random_cloud(&mut rng, n);
            assert_eq!(chamfer(&x, &x).unwrap(), 0.0);
            assert_eq!(chamfer(&x, &y).unwrap(), chamfer(&y, &x).unwrap());
        }
    }

    #[test]
    fn accelerated_matches_brute_force() {
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let n = rng.random_range(1..=128);
            let x = random_cloud(&mut rng, n);
            let y = random_cloud(&mut rng, n);
            let fast = chamfer(&x, &y).unwrap();
            let slow = chamfer_brute(&x, &y).unwrap();
            assert!((fast - slow).abs() <= 1e-9);
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        let x = cloud(&[[0.5, 0.5, 0.5]; 300]);
        let y = random_cloud(&mut seed::rng(4), 300);
        let fast = chamfer(&x, &y).unwrap();
        assert!((fast - chamfer_brute(&x, &y).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn size_mismatch() {
        let x = cloud(&[[0.0; 3]]);
        let y = cloud(&[[0.0; 3], [1.0; 3]]);
        assert!(matches!(chamfer(&x, &y), Err(Error::SizeMismatch { left: 1, right: 2 })));
    }

    #[test]
    fn gradient_variant_agrees_with_the_value() {
        let mut rng = seed::rng(5);
        let x = random_cloud(&mut rng, 50);
        let y = random_cloud(&mut rng, 50);
        let (loss, grad) = chamfer_with_grad(&x.flat(), &y.points);
        assert!((loss - chamfer_brute(&x, &y).unwrap()).abs() <= 1e-12);
        let h = 1e-6;
        let flat = x.flat();
        for k in [0, 17, 101, 149] {
            let mut up = flat.clone();
            up[k] += h;
            let mut down = flat.clone();
            down[k] -= h;
            let fd = (chamfer_with_grad(&up, &y.points).0 - chamfer_with_grad(&down, &y.points).0) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6, "{k}: {fd} vs {}", grad[k]);
        }
    }
}
