//! Planar homographies: application, inversion and estimation from point
//! correspondences (normalized DLT, optionally inside RANSAC).

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RegistrationError;

/// Denominators of the projective division smaller than this are treated
/// as mapping to infinity.
pub const MIN_DENOMINATOR: f64 = 1e-12;
/// Smallest admissible |det| of a normalized homography.
pub const MIN_DETERMINANT: f64 = 1e-12;
/// Triangle area (in Hartley-normalized coordinates) below which three
/// points count as collinear.
pub const COLLINEAR_AREA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A point pair: `src` in the thermal frame, `dst` in the visible frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src: Point2,
    pub dst: Point2,
}

impl Correspondence {
    pub fn new(src: (f64, f64), dst: (f64, f64)) -> Self {
        Self {
            src: Point2::new(src.0, src.1),
            dst: Point2::new(dst.0, dst.1),
        }
    }
}

/// 3x3 projective transform with `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Scales `m` so its bottom-right entry is 1 and checks invertibility.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, RegistrationError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(RegistrationError::Singular("non-finite entry".into()));
        }
        let h33 = m[(2, 2)];
        if h33.abs() < MIN_DENOMINATOR {
            return Err(RegistrationError::Singular("h33 is zero".into()));
        }
        let m = m / h33;
        let det = m.determinant();
        if det.is_nan() || det.abs() <= MIN_DETERMINANT {
            return Err(RegistrationError::Singular(format!("determinant {det:e}")));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, RegistrationError> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut m = Matrix3::identity();
        m[(0, 2)] = tx;
        m[(1, 2)] = ty;
        Self { m }
    }

    /// Maps a point. Fails when the point lands at infinity.
    pub fn apply(&self, p: Point2) -> Result<Point2, RegistrationError> {
        let m = &self.m;
        let den = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
        if den.is_nan() || den.abs() <= MIN_DENOMINATOR {
            return Err(RegistrationError::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(Point2::new(
            (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / den,
            (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / den,
        ))
    }

    pub fn inverse(&self) -> Result<Self, RegistrationError> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| RegistrationError::Singular("not invertible".into()))?;
        Self::from_matrix(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self, RegistrationError> {
        Self::from_matrix(self.m * other.m)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.m - other.m).abs().max()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireHomography {
    h: [[f64; 3]; 3],
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireHomography { h: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = WireHomography::deserialize(d)?;
        Homography::from_rows(w.h).map_err(serde::de::Error::custom)
    }
}

/// RANSAC settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Maximum reprojection distance in pixels for an inlier.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_threshold: 2.0,
            seed: 0,
        }
    }
}

/// Similarity that moves the centroid to the origin and sets the mean
/// distance from it to sqrt(2).
fn hartley(points: &[Point2]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !mean_dist.is_finite() || mean_dist <= 0.0 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: &Point2) -> Point2 {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

fn has_collinear_triple(points: &[Point2]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let area = 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
                if area < COLLINEAR_AREA {
                    return true;
                }
            }
        }
    }
    false
}

fn check_finite(corrs: &[Correspondence]) -> Result<(), RegistrationError> {
    let ok = corrs
        .iter()
        .all(|c| c.src.x.is_finite() && c.src.y.is_finite() && c.dst.x.is_finite() && c.dst.y.is_finite());
    if ok {
        Ok(())
    } else {
        Err(RegistrationError::Degenerate("non-finite coordinate".into()))
    }
}

/// Normalized direct linear transform.
///
/// Both point sets are Hartley-normalized, the `2n x 9` design matrix is
/// decomposed by SVD, and the right singular vector of the smallest
/// singular value is denormalized and scaled to `h33 = 1`.
///
/// A minimal four-point set must not contain three collinear source (or
/// destination) points. Larger sets are rejected when the design matrix
/// does not pin down a unique solution.
pub fn dlt(corrs: &[Correspondence]) -> Result<Homography, RegistrationError> {
    if corrs.len() < 4 {
        return Err(RegistrationError::TooFewPoints(corrs.len()));
    }
    check_finite(corrs)?;
    let src: Vec<Point2> = corrs.iter().map(|c| c.src).collect();
    let dst: Vec<Point2> = corrs.iter().map(|c| c.dst).collect();
    let degenerate = || RegistrationError::Degenerate("points do not determine a homography".into());
    let t_src = hartley(&src).ok_or_else(degenerate)?;
    let t_dst = hartley(&dst).ok_or_else(degenerate)?;
    let src_n: Vec<Point2> = src.iter().map(|p| transform(&t_src, p)).collect();
    let dst_n: Vec<Point2> = dst.iter().map(|p| transform(&t_dst, p)).collect();

    if corrs.len() == 4 && (has_collinear_triple(&src_n) || has_collinear_triple(&dst_n)) {
        return Err(RegistrationError::Degenerate(
            "three of the four points are collinear".into(),
        ));
    }

    // pad to at least 9 rows so the full right-singular basis is returned
    let rows = (2 * corrs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for c in 0..9 {
            a[(2 * i, c)] = r0[c];
            a[(2 * i + 1, c)] = r1[c];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(degenerate)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[second] <= 1e-9 * largest {
        return Err(degenerate());
    }
    let h = v_t.row(smallest);
    let h_n = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or_else(degenerate)?;
    Homography::from_matrix(t_dst_inv * h_n * t_src)
}

fn inliers(h: &Homography, corrs: &[Correspondence], threshold: f64) -> Vec<usize> {
    corrs
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(h.apply(c.src), Ok(p) if p.distance(&c.dst) <= threshold))
        .map(|(i, _)| i)
        .collect()
}

/// RANSAC around [`dlt`]: random minimal samples from a seeded ChaCha8
/// stream, consensus by reprojection distance, and a final refit on the
/// largest consensus set.
pub fn ransac(corrs: &[Correspondence], params: &RansacParams) -> Result<Homography, RegistrationError> {
    if corrs.len() < 4 {
        return Err(RegistrationError::TooFewPoints(corrs.len()));
    }
    check_finite(corrs)?;
    if params.inlier_threshold.is_nan() || params.inlier_threshold < 0.0 {
        return Err(RegistrationError::InvalidParameter(format!(
            "inlier threshold {}",
            params.inlier_threshold
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Vec<usize> = Vec::new();
    let mut minimal = Vec::with_capacity(4);
    for _ in 0..params.iterations {
        minimal.clear();
        minimal.extend(sample(&mut rng, corrs.len(), 4).iter().map(|i| corrs[i]));
        let Ok(h) = dlt(&minimal) else { continue };
        let found = inliers(&h, corrs, params.inlier_threshold);
        if found.len() > best.len() {
            best = found;
        }
    }
    if best.len() < 4 {
        return Err(RegistrationError::NoConsensus { inliers: best.len() });
    }
    let mut consensus: Vec<Correspondence> = best.iter().map(|&i| corrs[i]).collect();
    let mut h = dlt(&consensus)?;
    // one re-scoring pass with the refitted model
    let rescored = inliers(&h, corrs, params.inlier_threshold);
    if rescored.len() >= 4 && rescored != best {
        consensus = rescored.iter().map(|&i| corrs[i]).collect();
        h = dlt(&consensus)?;
    }
    Ok(h)
}

/// Estimates the homography mapping `src` points onto `dst` points; plain
/// DLT on all points, or RANSAC when `robust` is given.
pub fn estimate_homography(
    corrs: &[Correspondence],
    robust: Option<&RansacParams>,
) -> Result<Homography, RegistrationError> {
    match robust {
        Some(p) => ransac(corrs, p),
        None => dlt(corrs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(h: &Homography, pts: &[(f64, f64)]) -> Vec<Correspondence> {
        pts.iter()
            .map(|&(x, y)| {
                let q = h.apply(Point2::new(x, y)).unwrap();
                Correspondence::new((x, y), (q.x, q.y))
            })
            .collect()
    }

    const SQUARE: [(f64, f64); 4] = [(0.0, 0.0), (100.0, 0.0), (100.0, 80.0), (0.0, 80.0)];

    #[test]
    fn apply_examples() {
        let p = Point2::new(5.0, 7.0);
        assert_eq!(Homography::identity().apply(p).unwrap(), p);
        assert_eq!(
            Homography::translation(3.0, -2.0).apply(Point2::new(0.0, 0.0)).unwrap(),
            Point2::new(3.0, -2.0)
        );
        let scale = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(scale.apply(Point2::new(4.0, 5.0)).unwrap(), Point2::new(8.0, 10.0));
    }

    #[test]
    fn apply_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            h.apply(Point2::new(-1.0, 3.0)),
            Err(RegistrationError::PointAtInfinity { .. })
        ));
    }

    #[test]
    fn from_rows_normalizes_and_rejects_singular() {
        let h = Homography::from_rows([[2.0, 0.0, 4.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h.rows()[0], [1.0, 0.0, 2.0]);
        assert!(Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::from_rows([[1.1, 0.05, 12.0], [-0.03, 0.95, -7.0], [1e-4, -2e-4, 1.0]]).unwrap();
        let inv = h.inverse().unwrap();
        for &(x, y) in &SQUARE {
            let p = Point2::new(x, y);
            let back = inv.apply(h.apply(p).unwrap()).unwrap();
            assert!(back.distance(&p) < 1e-9);
        }
    }

    #[test]
    fn identity_recovery_from_four_points() {
        let corrs = project(&Homography::identity(), &SQUARE);
        let h = dlt(&corrs).unwrap();
        assert!(h.max_abs_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn arity_and_degeneracy_errors() {
        let corrs = project(&Homography::identity(), &SQUARE[..3]);
        assert!(matches!(dlt(&corrs), Err(RegistrationError::TooFewPoints(3))));
        let line = project(
            &Homography::identity(),
            &[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 5.0)],
        );
        assert!(matches!(dlt(&line), Err(RegistrationError::Degenerate(_))));
        let all_on_line: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            dlt(&project(&Homography::identity(), &all_on_line)),
            Err(RegistrationError::Degenerate(_))
        ));
    }

    #[test]
    fn grid_with_collinear_rows_is_accepted() {
        let h = Homography::from_rows([[1.02, 0.01, 5.0], [0.0, 0.98, -3.0], [1e-5, 0.0, 1.0]]).unwrap();
        let grid: Vec<(f64, f64)> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i as f64 * 50.0, j as f64 * 40.0)))
            .collect();
        let est = dlt(&project(&h, &grid)).unwrap();
        assert!(est.max_abs_diff(&h) < 1e-9);
    }

    #[test]
    fn ransac_rejects_outliers() {
        let h = Homography::from_rows([[0.9, 0.1, 20.0], [-0.05, 1.1, 10.0], [2e-4, 1e-4, 1.0]]).unwrap();
        let pts = [
            (10.0, 10.0),
            (300.0, 20.0),
            (310.0, 250.0),
            (15.0, 240.0),
            (150.0, 120.0),
            (80.0, 200.0),
            (250.0, 60.0),
            (200.0, 180.0),
        ];
        let mut corrs = project(&h, &pts);
        corrs.push(Correspondence::new((50.0, 50.0), (400.0, -90.0)));
        corrs.push(Correspondence::new((220.0, 30.0), (-35.0, 310.0)));
        let params = RansacParams {
            iterations: 200,
            inlier_threshold: 1.0,
            seed: 7,
        };
        let est = ransac(&corrs, &params).unwrap();
        assert!(est.max_abs_diff(&h) < 1e-6);
        assert_eq!(est, ransac(&corrs, &params).unwrap());
    }

    #[test]
    fn ransac_without_consensus() {
        // every minimal sample is degenerate
        let corrs: Vec<Correspondence> = (0..6)
            .map(|i| Correspondence::new((i as f64, 3.0 * i as f64), (7.0 * i as f64, 1.0)))
            .collect();
        let params = RansacParams {
            iterations: 50,
            inlier_threshold: 1.0,
            seed: 1,
        };
        assert!(matches!(
            ransac(&corrs, &params),
            Err(RegistrationError::NoConsensus { inliers: 0 })
        ));
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&Homography::translation(3.0, -2.0)).unwrap();
        assert_eq!(text, r#"{"h":[[1.0,0.0,3.0],[0.0,1.0,-2.0],[0.0,0.0,1.0]]}"#);
        let back: Homography = serde_json::from_str(&text).unwrap();
        assert_eq!(back, Homography::translation(3.0, -2.0));
    }
}
