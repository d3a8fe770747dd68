use nalgebra::{DMatrix, Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::RegistrationError;

/// Below this |w| a projected point is treated as lying at infinity.
const MIN_W: f64 = 1e-12;
const MIN_DET: f64 = 1e-12;
/// Second-smallest over largest singular value of the DLT system.
const MIN_CONDITION_RATIO: f64 = 1e-10;
/// Triangles with a smaller area (px²) count as collinear.
pub const COLLINEAR_AREA: f64 = 1e-9;

/// A source/destination point pair, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src: Point2<f64>,
    pub dst: Point2<f64>,
}

impl Correspondence {
    pub fn new(src: (f64, f64), dst: (f64, f64)) -> Self {
        Self {
            src: Point2::new(src.0, src.1),
            dst: Point2::new(dst.0, dst.1),
        }
    }
}

/// 3x3 projective transform scaled so that `h33 = 1`, or to unit Frobenius
/// norm when `h33` is (numerically) zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, RegistrationError> {
        let canonical = canonicalize(m)?;
        if !(canonical.determinant().abs() > MIN_DET) {
            return Err(RegistrationError::NotInvertible);
        }
        Ok(Self(canonical))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self, RegistrationError> {
        let inv = self.0.try_inverse().ok_or(RegistrationError::NotInvertible)?;
        Self::new(inv)
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self, RegistrationError> {
        Self::new(self.0 * other.0)
    }

    #[inline]
    pub fn apply(&self, p: &Point2<f64>) -> Result<Point2<f64>, RegistrationError> {
        apply_matrix(&self.0, p)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = RegistrationError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Homography::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        let m = h.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

fn canonicalize(m: Matrix3<f64>) -> Result<Matrix3<f64>, RegistrationError> {
    let fro = m.norm();
    if !(fro > 0.0) || !fro.is_finite() {
        return Err(RegistrationError::NotInvertible);
    }
    let h33 = m[(2, 2)];
    if h33.abs() > 1e-12 * fro {
        return Ok(m / h33);
    }
    let mut n = m / fro;
    let first = n.iter().copied().find(|v| v.abs() > 1e-15).unwrap_or(1.0);
    if first < 0.0 {
        n = -n;
    }
    Ok(n)
}

#[inline]
pub(crate) fn apply_matrix(m: &Matrix3<f64>, p: &Point2<f64>) -> Result<Point2<f64>, RegistrationError> {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < MIN_W {
        return Err(RegistrationError::PointAtInfinity);
    }
    Ok(Point2::new(v.x / v.z, v.y / v.z))
}

/// Homogeneous transform of a single point with perspective divide.
pub fn apply_homography(h: &Homography, p: &Point2<f64>) -> Result<Point2<f64>, RegistrationError> {
    h.apply(p)
}

#[inline]
pub(crate) fn triangle_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
}

/// True when any three of the points are collinear within [`COLLINEAR_AREA`].
pub fn has_collinear_triple(points: &[Point2<f64>]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if triangle_area(&points[i], &points[j], &points[k]) < COLLINEAR_AREA {
                    return true;
                }
            }
        }
    }
    false
}

/// Isotropic normalization: centroid to the origin, mean distance √2.
fn normalizer(points: impl Iterator<Item = Point2<f64>> + Clone) -> Result<Matrix3<f64>, RegistrationError> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) {
        return Err(RegistrationError::DegenerateConfiguration(
            "all points coincide".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Normalized direct linear transform from four or more correspondences.
pub fn estimate_homography_dlt(pairs: &[Correspondence]) -> Result<Homography, RegistrationError> {
    if pairs.len() < 4 {
        return Err(RegistrationError::TooFewPairs {
            needed: 4,
            got: pairs.len(),
        });
    }
    if pairs.len() == 4 {
        let src: Vec<_> = pairs.iter().map(|c| c.src).collect();
        if has_collinear_triple(&src) {
            return Err(RegistrationError::DegenerateConfiguration(
                "three source points are collinear".into(),
            ));
        }
    }
    let t_src = normalizer(pairs.iter().map(|c| c.src))?;
    let t_dst = normalizer(pairs.iter().map(|c| c.dst))?;

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let p = t_src * Vector3::new(c.src.x, c.src.y, 1.0);
        let q = t_dst * Vector3::new(c.dst.x, c.dst.y, 1.0);
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for k in 0..9 {
            a[(2 * i, k)] = r0[k];
            a[(2 * i + 1, k)] = r1[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("V requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let largest = sv[order[0]];
    let second_smallest = sv[order[order.len() - 2]];
    if !(largest > 0.0) || second_smallest / largest < MIN_CONDITION_RATIO {
        return Err(RegistrationError::DegenerateConfiguration(format!(
            "ill-conditioned system (ratio {:e})",
            second_smallest / largest
        )));
    }
    let h = v_t.row(order[order.len() - 1]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(RegistrationError::NotInvertible)?;
    Homography::new(t_dst_inv * hn * t_src)
}

/// Least-squares 4-DOF similarity (rotation, uniform scale, translation).
pub fn estimate_similarity(pairs: &[Correspondence]) -> Result<Homography, RegistrationError> {
    if pairs.len() < 2 {
        return Err(RegistrationError::TooFewPairs {
            needed: 2,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let (mut psx, mut psy, mut qsx, mut qsy) = (0.0, 0.0, 0.0, 0.0);
    for c in pairs {
        psx += c.src.x;
        psy += c.src.y;
        qsx += c.dst.x;
        qsy += c.dst.y;
    }
    let (pcx, pcy, qcx, qcy) = (psx / n, psy / n, qsx / n, qsy / n);
    let (mut a, mut b, mut var) = (0.0, 0.0, 0.0);
    for c in pairs {
        let (px, py) = (c.src.x - pcx, c.src.y - pcy);
        let (qx, qy) = (c.dst.x - qcx, c.dst.y - qcy);
        a += px * qx + py * qy;
        b += px * qy - py * qx;
        var += px * px + py * py;
    }
    if var < 1e-12 {
        return Err(RegistrationError::DegenerateConfiguration(
            "source points coincide".into(),
        ));
    }
    let (c, s) = (a / var, b / var);
    let tx = qcx - (c * pcx - s * pcy);
    let ty = qcy - (s * pcx + c * pcy);
    Homography::new(Matrix3::new(c, -s, tx, s, c, ty, 0.0, 0.0, 1.0))
}
