//! Point-cloud preprocessing: exact KNN index, normal estimation, and the
//! smooth-surface / individual partition.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Exact kd-tree over 3D points. Queries return true nearest neighbors with
/// ties broken by lower point id, so results match a linear scan bit for bit.
#[derive(Clone, Debug)]
pub struct KnnIndex<T: Real> {
    points: Vec<Vector3<T>>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    point_id: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Max-heap entry ordered by (distance², id); the heap root is the current
/// worst of the best-k.
struct HeapItem<T> {
    d2: T,
    id: usize,
}

impl<T: Real> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.d2 == other.d2 && self.id == other.id
    }
}
impl<T: Real> Eq for HeapItem<T> {}
impl<T: Real> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distances are finite by construction.
        self.d2.partial_cmp(&other.d2).unwrap().then(self.id.cmp(&other.id))
    }
}

impl<T: Real> KnnIndex<T> {
    pub fn build(points: &[Vector3<T>]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut ids[..], &mut nodes, 0);
        Self { points: points.to_vec(), nodes, root }
    }

    fn build_rec(
        points: &[Vector3<T>],
        ids: &mut [usize],
        nodes: &mut Vec<Node>,
        depth: usize,
    ) -> Option<usize> {
        if ids.is_empty() {
            return None;
        }
        let axis = depth % 3;
        // Ties sorted by id keep the tree layout canonical.
        ids.sort_unstable_by(|&a, &b| {
            points[a][axis].partial_cmp(&points[b][axis]).unwrap().then(a.cmp(&b))
        });
        let mid = ids.len() / 2;
        let point_id = ids[mid];
        let slot = nodes.len();
        nodes.push(Node { point_id, axis, left: None, right: None });
        let (lo, rest) = ids.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, nodes, depth + 1);
        let right = Self::build_rec(points, hi, nodes, depth + 1);
        nodes[slot].left = left;
        nodes[slot].right = right;
        Some(slot)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, sorted by (distance, id).
    pub fn knn(&self, query: &Vector3<T>, k: usize) -> Result<Vec<(usize, T)>> {
        if k > self.len() {
            return Err(Error::InvalidInput(format!(
                "knn k={k} exceeds population {}",
                self.len()
            )));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<HeapItem<T>> = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(self.root, query, k, &mut heap);
        let mut items: Vec<(usize, T)> =
            heap.into_sorted_vec().into_iter().map(|it| (it.id, it.d2.sqrt())).collect();
        items.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(items)
    }

    fn knn_rec(
        &self,
        node: Option<usize>,
        query: &Vector3<T>,
        k: usize,
        heap: &mut BinaryHeap<HeapItem<T>>,
    ) {
        let Some(ni) = node else { return };
        let n = self.nodes[ni];
        let p = self.points[n.point_id];
        let d2 = (p - query).norm_squared();
        let candidate = HeapItem { d2, id: n.point_id };
        if heap.len() < k {
            heap.push(candidate);
        } else if candidate.cmp(heap.peek().unwrap()) == Ordering::Less {
            heap.pop();
            heap.push(candidate);
        }
        let delta = query[n.axis] - p[n.axis];
        let (near, far) =
            if delta <= T::zero() { (n.left, n.right) } else { (n.right, n.left) };
        self.knn_rec(near, query, k, heap);
        // Descend the far side on equality too: an equal-distance lower id
        // could still displace the current worst.
        if heap.len() < k || delta * delta <= heap.peek().unwrap().d2 {
            self.knn_rec(far, query, k, heap);
        }
    }

    /// All point ids within `radius` (inclusive) of `query`, sorted by id.
    pub fn within_radius(&self, query: &Vector3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(self.root, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: Option<usize>, query: &Vector3<T>, r2: T, out: &mut Vec<usize>) {
        let Some(ni) = node else { return };
        let n = self.nodes[ni];
        let p = self.points[n.point_id];
        if (p - query).norm_squared() <= r2 {
            out.push(n.point_id);
        }
        let delta = query[n.axis] - p[n.axis];
        let (near, far) =
            if delta <= T::zero() { (n.left, n.right) } else { (n.right, n.left) };
        self.radius_rec(near, query, r2, out);
        if delta * delta <= r2 {
            self.radius_rec(far, query, r2, out);
        }
    }

    /// The `k` nearest points excluding one id (typically the query point itself).
    pub fn knn_excluding(
        &self,
        query: &Vector3<T>,
        k: usize,
        exclude: usize,
    ) -> Result<Vec<(usize, T)>> {
        if k + 1 > self.len() {
            return Err(Error::InvalidInput(format!(
                "knn k={k} with exclusion exceeds population {}",
                self.len()
            )));
        }
        let mut items = self.knn(query, k + 1)?;
        items.retain(|&(id, _)| id != exclude);
        items.truncate(k);
        Ok(items)
    }
}

/// Distance from each point to its nearest (other) neighbor.
pub fn nearest_neighbor_distances<T: Real>(index: &KnnIndex<T>, points: &[Vector3<T>]) -> Vec<T> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .knn_excluding(p, 1, i)
                .map(|v| v.first().map(|&(_, d)| d).unwrap_or(T::zero()))
                .unwrap_or(T::zero())
        })
        .collect()
}

fn median<T: Real>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::c(2.0)
    }
}

/// Deterministic sign for an unoriented normal: dominant-magnitude component
/// positive (ties break toward the lower axis index).
fn canonical_sign<T: Real>(n: Vector3<T>) -> Vector3<T> {
    let mut axis = 0;
    for i in 1..3 {
        if n[i].abs() > n[axis].abs() {
            axis = i;
        }
    }
    if n[axis] < T::zero() {
        -n
    } else {
        n
    }
}

/// PCA plane-fit normals from the `k` nearest neighbors of each point.
///
/// Signs are oriented toward `viewpoint` when given (the first camera of the
/// dataset, by convention). Without a viewpoint, or when the viewpoint
/// direction is tangent to the surface, the dominant component is made
/// positive, which keeps neighboring normals consistent.
pub fn estimate_normals<T: Real>(
    points: &[Vector3<T>],
    k: usize,
    viewpoint: Option<&Vector3<T>>,
) -> Result<Vec<Vector3<T>>> {
    if k < 3 {
        return Err(Error::InvalidInput("normal estimation needs k >= 3".into()));
    }
    if points.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "normal estimation needs at least k+1={} points, got {}",
            k + 1,
            points.len()
        )));
    }
    let index = KnnIndex::build(points);
    let mut normals = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let neigh = index.knn_excluding(p, k, i)?;
        let mut centroid = Vector3::zeros();
        for &(j, _) in &neigh {
            centroid += points[j];
        }
        centroid /= T::from_count(neigh.len());
        let mut cov = Matrix3::zeros();
        for &(j, _) in &neigh {
            let d = points[j] - centroid;
            cov += d * d.transpose();
        }
        cov /= T::from_count(neigh.len());
        let eig = SymmetricEigen::new(cov);
        let (mut min_i, mut min_v) = (0, eig.eigenvalues[0]);
        for idx in 1..3 {
            if eig.eigenvalues[idx] < min_v {
                min_v = eig.eigenvalues[idx];
                min_i = idx;
            }
        }
        let mut n: Vector3<T> = eig.eigenvectors.column(min_i).into_owned();
        n /= n.norm();
        n = match viewpoint {
            Some(v) => {
                let dot = n.dot(&(v - p));
                if dot > T::zero() {
                    n
                } else if dot < T::zero() {
                    -n
                } else {
                    canonical_sign(n)
                }
            }
            None => canonical_sign(n),
        };
        normals.push(n);
    }
    Ok(normals)
}

/// Smooth-surface point: position, color, oriented unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct CoPoint<T: Real> {
    pub position: Vector3<T>,
    pub color: Vector3<T>,
    pub normal: Vector3<T>,
}

/// Individual point: position and color only.
#[derive(Clone, Debug, PartialEq)]
pub struct IndPoint<T: Real> {
    pub position: Vector3<T>,
    pub color: Vector3<T>,
}

/// Input cloud partitioned into smooth-surface and individual points.
#[derive(Clone, Debug, Default)]
pub struct ClassifiedCloud<T: Real> {
    pub co_points: Vec<CoPoint<T>>,
    pub ind_points: Vec<IndPoint<T>>,
}

impl<T: Real> ClassifiedCloud<T> {
    pub fn len(&self) -> usize {
        self.co_points.len() + self.ind_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.co_points.is_empty() && self.ind_points.is_empty()
    }

    /// All positions, smooth points first.
    pub fn all_positions(&self) -> Vec<Vector3<T>> {
        self.co_points
            .iter()
            .map(|p| p.position)
            .chain(self.ind_points.iter().map(|p| p.position))
            .collect()
    }
}

/// Partitions points by the two unreliable-normal rules: isolated points
/// (nearest-neighbor distance above `dist_factor` times the median) and
/// points whose radius neighborhood disagrees in normal direction by more
/// than `angle_thresh`.
pub fn classify_points<T: Real>(
    points: &[Vector3<T>],
    colors: &[Vector3<T>],
    normals: &[Vector3<T>],
    dist_factor: T,
    angle_thresh: T,
) -> Result<ClassifiedCloud<T>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("classify_points: empty input".into()));
    }
    if points.len() != colors.len() || points.len() != normals.len() {
        return Err(Error::InvalidInput("classify_points: length mismatch".into()));
    }
    if points.len() == 1 {
        // No neighborhood evidence: treat as individual.
        return Ok(ClassifiedCloud {
            co_points: Vec::new(),
            ind_points: vec![IndPoint { position: points[0], color: colors[0] }],
        });
    }
    let index = KnnIndex::build(points);
    let nn = nearest_neighbor_distances(&index, points);
    let median_nn = median(&nn);
    let cos_thresh = angle_thresh.cos();

    let mut cloud = ClassifiedCloud::default();
    for i in 0..points.len() {
        let isolated = nn[i] > dist_factor * median_nn;
        let mut discordant = false;
        if !isolated {
            for j in index.within_radius(&points[i], median_nn) {
                if j == i {
                    continue;
                }
                // angle > thresh  <=>  cos(angle) < cos(thresh)
                if normals[i].dot(&normals[j]) < cos_thresh {
                    discordant = true;
                    break;
                }
            }
        }
        if isolated || discordant {
            cloud.ind_points.push(IndPoint { position: points[i], color: colors[i] });
        } else {
            cloud.co_points.push(CoPoint {
                position: points[i],
                color: colors[i],
                normal: normals[i],
            });
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid_points() -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..2 {
                    pts.push(Vector3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        pts
    }

    #[test]
    fn knn_grid_single_nearest() {
        let pts = grid_points();
        let idx = KnnIndex::build(&pts);
        let res = idx.knn(&Vector3::new(0.1, 0.0, 0.0), 1).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(pts[res[0].0], Vector3::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn knn_tie_breaks_by_lower_id() {
        // Points 3 and 7 equidistant from the query.
        let pts = vec![
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(-10.0, 0.0, 0.0),
            Vector3::new(0.0, 10.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, -10.0, 0.0),
            Vector3::new(7.0, 7.0, 0.0),
            Vector3::new(-7.0, 7.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
        ];
        let idx = KnnIndex::build(&pts);
        let res = idx.knn(&Vector3::zeros(), 1).unwrap();
        assert_eq!(res[0].0, 3);
        let res2 = idx.knn(&Vector3::zeros(), 2).unwrap();
        assert_eq!((res2[0].0, res2[1].0), (3, 7));
    }

    #[test]
    fn knn_rejects_oversized_k() {
        let pts = grid_points();
        let idx = KnnIndex::build(&pts);
        assert!(idx.knn(&Vector3::zeros(), pts.len() + 1).is_err());
    }

    #[test]
    fn knn_matches_linear_scan_oracle() {
        let mut rng = StdRng::seed_from_u64(99);
        let pts: Vec<Vector3<f64>> = (0..1000)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let idx = KnnIndex::build(&pts);
        for _ in 0..50 {
            let q = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let got = idx.knn(&q, 8).unwrap();
            // Linear-scan oracle.
            let mut all: Vec<(usize, f64)> =
                pts.iter().enumerate().map(|(i, p)| (i, (p - q).norm())).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            for (g, o) in got.iter().zip(all.iter().take(8)) {
                assert_eq!(g.0, o.0);
                assert_eq!(g.1, o.1);
            }
        }
    }

    #[test]
    fn knn_with_duplicate_points_matches_oracle() {
        let mut pts = grid_points();
        pts.extend(grid_points()); // exact duplicates, heavy ties
        let idx = KnnIndex::build(&pts);
        let q = Vector3::new(2.0, 2.0, 0.0);
        let got = idx.knn(&q, 6).unwrap();
        let mut all: Vec<(usize, f64)> =
            pts.iter().enumerate().map(|(i, p)| (i, (p - q).norm())).collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        for (g, o) in got.iter().zip(all.iter().take(6)) {
            assert_eq!(g.0, o.0);
        }
    }

    #[test]
    fn radius_query_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(7);
        let pts: Vec<Vector3<f64>> = (0..500)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let idx = KnnIndex::build(&pts);
        for _ in 0..20 {
            let q = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = rng.gen_range(0.05..0.7);
            let got = idx.within_radius(&q, r);
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= r).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn normals_on_plane_point_up() {
        let mut rng = StdRng::seed_from_u64(42);
        let pts: Vec<Vector3<f64>> = (0..100)
            .map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        let normals = estimate_normals(&pts, 10, None).unwrap();
        for n in &normals {
            let angle = n.dot(&Vector3::new(0.0, 0.0, 1.0)).min(1.0).acos();
            assert!(angle < 1e-3, "angle {angle}");
        }
    }

    #[test]
    fn normals_cube_corners_match_cross_product_oracle() {
        let pts: Vec<Vector3<f64>> = (0..8)
            .map(|i| {
                Vector3::new(
                    (i & 1) as f64,
                    ((i >> 1) & 1) as f64,
                    ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        let idx = KnnIndex::build(&pts);
        let normals = estimate_normals(&pts, 3, None).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let neigh = idx.knn_excluding(p, 3, i).unwrap();
            // Direct 3-point cross-product oracle.
            let (a, b, c) =
                (pts[neigh[0].0], pts[neigh[1].0], pts[neigh[2].0]);
            let mut oracle = (b - a).cross(&(c - a));
            oracle /= oracle.norm();
            let dot = normals[i].dot(&oracle).abs().min(1.0);
            assert!(dot.acos() < 1e-9, "corner {i}");
        }
    }

    #[test]
    fn normals_on_sphere_align_with_radius() {
        let mut rng = StdRng::seed_from_u64(4242);
        let pts: Vec<Vector3<f64>> = (0..2000)
            .map(|_| {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0_f64),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                v / v.norm()
            })
            .collect();
        let normals = estimate_normals(&pts, 10, None).unwrap();
        for (p, n) in pts.iter().zip(normals.iter()) {
            // Analytic oracle: sphere normal is the radial direction (up to sign).
            let angle = n.dot(p).abs().min(1.0).acos();
            assert!(angle < 5.0_f64.to_radians(), "angle {angle}");
        }
    }

    #[test]
    fn normals_direction_is_scale_equivariant() {
        let mut rng = StdRng::seed_from_u64(17);
        let pts: Vec<Vector3<f64>> = (0..120)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.2..0.2),
                )
            })
            .collect();
        let scaled: Vec<Vector3<f64>> = pts.iter().map(|p| p * 3.7).collect();
        let a = estimate_normals(&pts, 8, None).unwrap();
        let b = estimate_normals(&scaled, 8, None).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-9 || (x + y).norm() < 1e-9);
        }
    }

    #[test]
    fn normals_reject_small_input() {
        let pts = vec![Vector3::<f64>::zeros(); 5];
        assert!(estimate_normals(&pts, 10, None).is_err());
        assert!(estimate_normals(&pts, 2, None).is_err());
    }

    // Jittered grid: evenly spaced, so no point is isolated by rule 1.
    fn dense_plane(n: usize, seed: u64) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let side = (n as f64).sqrt().ceil() as usize;
        let step = 2.0 / side as f64;
        let mut pts = Vec::with_capacity(n);
        'outer: for gy in 0..side {
            for gx in 0..side {
                if pts.len() == n {
                    break 'outer;
                }
                pts.push(Vector3::new(
                    -1.0 + (gx as f64 + 0.5 + rng.gen_range(-0.2..0.2)) * step,
                    -1.0 + (gy as f64 + 0.5 + rng.gen_range(-0.2..0.2)) * step,
                    0.0,
                ));
            }
        }
        let colors = vec![Vector3::from_element(0.5); n];
        (pts, colors)
    }

    #[test]
    fn classify_homogeneous_plane_all_co() {
        let (pts, colors) = dense_plane(300, 8);
        let normals = estimate_normals(&pts, 10, None).unwrap();
        let cloud =
            classify_points(&pts, &colors, &normals, 3.0, 20.0_f64.to_radians()).unwrap();
        assert_eq!(cloud.ind_points.len(), 0);
        assert_eq!(cloud.co_points.len(), 300);
    }

    #[test]
    fn classify_far_outlier_goes_ind() {
        let (mut pts, mut colors) = dense_plane(300, 9);
        pts.push(Vector3::new(0.0, 0.0, 50.0));
        colors.push(Vector3::from_element(0.5));
        let normals = estimate_normals(&pts, 10, None).unwrap();
        let cloud =
            classify_points(&pts, &colors, &normals, 3.0, 20.0_f64.to_radians()).unwrap();
        assert_eq!(cloud.ind_points.len(), 1);
        assert_eq!(cloud.ind_points[0].position, Vector3::new(0.0, 0.0, 50.0));
    }

    #[test]
    fn classify_crease_matches_brute_force_oracle() {
        // Two planes meeting at 90 degrees along the y axis.
        let mut rng = StdRng::seed_from_u64(10);
        let mut pts: Vec<Vector3<f64>> = Vec::new();
        for _ in 0..250 {
            pts.push(Vector3::new(rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0), 0.0));
            pts.push(Vector3::new(0.0, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)));
        }
        let colors = vec![Vector3::from_element(0.5); pts.len()];
        let normals = estimate_normals(&pts, 10, None).unwrap();
        let angle_thresh = 20.0_f64.to_radians();
        let cloud = classify_points(&pts, &colors, &normals, 3.0, angle_thresh).unwrap();

        // O(n^2) brute-force oracle.
        let index = KnnIndex::build(&pts);
        let nn = nearest_neighbor_distances(&index, &pts);
        let mut nn_sorted = nn.clone();
        nn_sorted.sort_by(f64::total_cmp);
        let med = (nn_sorted[nn.len() / 2 - 1] + nn_sorted[nn.len() / 2]) / 2.0;
        let mut expect_ind = 0usize;
        for i in 0..pts.len() {
            let isolated = nn[i] > 3.0 * med;
            let discordant = !isolated
                && (0..pts.len()).any(|j| {
                    j != i
                        && (pts[j] - pts[i]).norm() <= med
                        && normals[i].dot(&normals[j]) < angle_thresh.cos()
                });
            if isolated || discordant {
                expect_ind += 1;
            }
        }
        assert_eq!(cloud.ind_points.len(), expect_ind);
        assert!(expect_ind > 0, "crease points must be flagged");
        // Points far from the crease stay smooth.
        assert!(cloud.co_points.len() > pts.len() / 2);
    }

    #[test]
    fn classify_is_permutation_equivariant() {
        let (mut pts, _) = dense_plane(150, 11);
        // Add some structure so both classes are non-empty.
        pts.push(Vector3::new(0.0, 0.0, 30.0));
        let colors: Vec<Vector3<f64>> =
            (0..pts.len()).map(|i| Vector3::from_element(i as f64 / 200.0)).collect();
        let normals = estimate_normals(&pts, 10, None).unwrap();
        let cloud =
            classify_points(&pts, &colors, &normals, 3.0, 20.0_f64.to_radians()).unwrap();

        let mut rng = StdRng::seed_from_u64(5);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let pts_p: Vec<_> = perm.iter().map(|&i| pts[i]).collect();
        let colors_p: Vec<_> = perm.iter().map(|&i| colors[i]).collect();
        let normals_p: Vec<_> = perm.iter().map(|&i| normals[i]).collect();
        let cloud_p =
            classify_points(&pts_p, &colors_p, &normals_p, 3.0, 20.0_f64.to_radians()).unwrap();

        let key = |p: &IndPoint<f64>| (p.position.x.to_bits(), p.color.x.to_bits());
        let mut a: Vec<_> = cloud.ind_points.iter().map(key).collect();
        let mut b: Vec<_> = cloud_p.ind_points.iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert_eq!(cloud.co_points.len(), cloud_p.co_points.len());
    }

    #[test]
    fn classify_rejects_empty() {
        let r = classify_points::<f64>(&[], &[], &[], 3.0, 0.3);
        assert!(r.is_err());
    }

    #[test]
    fn classify_partition_covers_input() {
        let (pts, colors) = dense_plane(100, 12);
        let normals = estimate_normals(&pts, 10, None).unwrap();
        let cloud =
            classify_points(&pts, &colors, &normals, 3.0, 20.0_f64.to_radians()).unwrap();
        assert_eq!(cloud.len(), pts.len());
    }
}
