//! m-planes in ℝⁿ: orthonormal frames, orthogonal projections, and the
//! operator-norm angle metric on the Grassmannian G(n,m).
//!
//! A [`Plane`] is an m-dimensional linear subspace stored as an orthonormal
//! frame. The angle between two planes is ∢(P₁,P₂) = ‖π_{P₁} − π_{P₂}‖
//! (largest singular value of the projector difference), which takes values
//! in [0,1] and is a metric on G(n,m). All computation is dense; the intended
//! regime is n ≤ 16.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance enforced on construction (Gram matrix vs identity).
pub const FRAME_TOL: f64 = 1e-12;
/// Rank tolerance for detecting dependent input vectors.
pub const RANK_TOL: f64 = 1e-10;
/// Two planes are considered the same subspace when their angle is below this.
pub const SUBSPACE_EQ_TOL: f64 = 1e-9;

/// An m-dimensional linear subspace of ℝⁿ, stored as an orthonormal frame.
///
/// Frames are coordinates, subspaces are the objects: two planes with
/// different frames may be equal, and comparisons should go through
/// [`angle`], never through the frame entries.
#[derive(Debug, Clone)]
pub struct Plane {
    /// n × m matrix whose columns are the orthonormal frame vectors.
    frame: DMatrix<f64>,
}

impl Plane {
    /// Build a plane from spanning vectors via modified Gram–Schmidt.
    ///
    /// Fails with [`Error::RankDeficient`] if the numerical rank of the
    /// input is below the number of vectors (tolerance `1e-10`).
    pub fn new(vectors: &[DVector<f64>]) -> Result<Plane> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter("no spanning vectors given".into()));
        }
        let n = vectors[0].len();
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let m = vectors.len();
        if m > n {
            return Err(Error::InvalidParameter(format!(
                "cannot span a {m}-plane in dimension {n}"
            )));
        }
        let mut frame = DMatrix::<f64>::zeros(n, m);
        for (j, v) in vectors.iter().enumerate() {
            let mut w = v.clone();
            // two passes of Gram-Schmidt for numerical orthogonality
            for _ in 0..2 {
                for k in 0..j {
                    let col = frame.column(k);
                    let dot = col.dot(&w);
                    w.axpy(-dot, &col.clone_owned(), 1.0);
                }
            }
            let scale0 = vectors[j].norm().max(1.0);
            let norm = w.norm();
            if norm <= RANK_TOL * scale0 {
                return Err(Error::RankDeficient);
            }
            w /= norm;
            frame.set_column(j, &w);
        }
        Ok(Plane { frame })
    }

    /// Wrap an already-orthonormal n×m frame; validates orthonormality.
    pub fn from_frame(frame: DMatrix<f64>) -> Result<Plane> {
        let m = frame.ncols();
        let gram = frame.transpose() * &frame;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > 1e-10 {
                    return Err(Error::InvalidParameter(
                        "frame is not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Plane { frame })
    }

    /// Axis-aligned plane spanned by the first m coordinate directions.
    pub fn coordinate(n: usize, m: usize) -> Result<Plane> {
        if m > n || m == 0 {
            return Err(Error::InvalidParameter(format!("need 0 < m ≤ n, got m={m}, n={n}")));
        }
        let mut frame = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            frame[(j, j)] = 1.0;
        }
        Ok(Plane { frame })
    }

    /// Uniform-ish random plane: orthonormalized Gaussian frame. Deterministic per seed.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Plane> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Plane::random_with(n, m, &mut rng)
    }

    /// As [`Plane::random`], drawing from a caller-supplied generator.
    pub fn random_with(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Plane> {
        if m > n || m == 0 {
            return Err(Error::InvalidParameter(format!("need 0 < m ≤ n, got m={m}, n={n}")));
        }
        loop {
            let cols: Vec<DVector<f64>> = (0..m)
                .map(|_| DVector::from_fn(n, |_, _| rng.sample(StandardNormal)))
                .collect();
            match Plane::new(&cols) {
                Ok(p) => return Ok(p),
                Err(Error::RankDeficient) => continue, // measure-zero event, redraw
                Err(e) => return Err(e),
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// The orthonormal frame, columns spanning the plane.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// The n×n orthogonal projector F Fᵀ onto the plane.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Orthogonal projection π_P(v) of a vector onto the plane.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec(v)?;
        Ok(&self.frame * (self.frame.transpose() * v))
    }

    /// Perpendicular component π_P^⊥(v) = v − π_P(v).
    pub fn project_perp(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(v - self.project(v)?)
    }

    /// Coordinates of π_P(v) in the frame basis (an m-vector).
    pub fn coords(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec(v)?;
        Ok(self.frame.transpose() * v)
    }

    /// Whether v lies in the plane up to `tol` (relative to |v|).
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        match self.project_perp(v) {
            Ok(perp) => perp.norm() <= tol * v.norm().max(1.0),
            Err(_) => false,
        }
    }

    /// Deterministic orthonormal completion: an n×(n−m) frame of P^⊥.
    pub fn perp_frame(&self) -> DMatrix<f64> {
        let n = self.ambient_dim();
        let m = self.dim();
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - m);
        // Greedy Gram-Schmidt of the identity against the frame, in index order.
        for j in 0..n {
            if cols.len() == n - m {
                break;
            }
            let mut w = DVector::zeros(n);
            w[j] = 1.0;
            for _ in 0..2 {
                let proj = &self.frame * (self.frame.transpose() * &w);
                w -= proj;
                for c in &cols {
                    let dot = c.dot(&w);
                    w.axpy(-dot, c, 1.0);
                }
            }
            let norm = w.norm();
            if norm > 1e-8 {
                cols.push(w / norm);
            }
        }
        debug_assert_eq!(cols.len(), n - m);
        DMatrix::from_columns(&cols)
    }

    fn check_vec(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_pair(&self, other: &Plane) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: other.ambient_dim(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

/// Largest singular value of a dense matrix.
fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// The angle metric ∢(P₁,P₂) = ‖π_{P₁} − π_{P₂}‖ ∈ [0,1].
pub fn angle(p1: &Plane, p2: &Plane) -> Result<f64> {
    p1.check_pair(p2)?;
    let d = p1.projector() - p2.projector();
    Ok(operator_norm(&d).min(1.0))
}

/// The six equivalent operator-norm expressions for the plane angle:
/// ‖π₁−π₂‖, ‖π₁^⊥−π₂^⊥‖, ‖π₁^⊥∘π₂‖, ‖π₁∘π₂^⊥‖, ‖π₂^⊥∘π₁‖, ‖π₂∘π₁^⊥‖.
pub fn angle_expressions(p1: &Plane, p2: &Plane) -> Result<[f64; 6]> {
    p1.check_pair(p2)?;
    let n = p1.ambient_dim();
    let id = DMatrix::<f64>::identity(n, n);
    let pr1 = p1.projector();
    let pr2 = p2.projector();
    let pr1p = &id - &pr1;
    let pr2p = &id - &pr2;
    Ok([
        operator_norm(&(&pr1 - &pr2)),
        operator_norm(&(&pr1p - &pr2p)),
        operator_norm(&(&pr1p * &pr2)),
        operator_norm(&(&pr1 * &pr2p)),
        operator_norm(&(&pr2p * &pr1)),
        operator_norm(&(&pr2 * &pr1p)),
    ])
}

/// Whether π_{P₁}|_{P₂} : P₂ → P₁ is a linear isomorphism, with the
/// invertibility margin (smallest singular value of the restricted map).
///
/// The restriction is invertible exactly when ∢(P₁,P₂) < 1.
pub fn restricted_projection_invertible(p1: &Plane, p2: &Plane) -> Result<(bool, f64)> {
    p1.check_pair(p2)?;
    // In frame coordinates the restricted projection is F1ᵀ F2 (m×m).
    let a = p1.frame.transpose() * &p2.frame;
    let svals = a.singular_values();
    let margin = svals.min();
    let ang = angle(p1, p2)?;
    Ok((ang < 1.0 - 1e-9, margin))
}

/// max over frame vectors e of P₁ of dist(e, P₂) — the hypothesis quantity of
/// the basis-angle bound ∢(P₁,P₂) ≤ C₁·θ.
pub fn max_basis_distance(p1: &Plane, p2: &Plane) -> Result<f64> {
    p1.check_pair(p2)?;
    let mut worst: f64 = 0.0;
    for j in 0..p1.dim() {
        let e = p1.frame.column(j).clone_owned();
        let perp = p2.project_perp(&e)?;
        worst = worst.max(perp.norm());
    }
    Ok(worst)
}

/// An affine plane Q = x + P.
#[derive(Debug, Clone)]
pub struct AffinePlane {
    pub base: DVector<f64>,
    pub direction: Plane,
}

impl AffinePlane {
    pub fn new(base: DVector<f64>, direction: Plane) -> Result<AffinePlane> {
        if base.len() != direction.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: direction.ambient_dim(),
                got: base.len(),
            });
        }
        Ok(AffinePlane { base, direction })
    }

    /// π_Q(z) = x + π_P(z − x).
    pub fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.base + self.direction.project(&(z - &self.base))?)
    }

    /// Distance from z to the (full, unbounded) affine plane.
    pub fn distance(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(self.direction.project_perp(&(z - &self.base))?.norm())
    }

    /// Plane coordinates of π_Q(z) − x in the direction frame.
    pub fn coords(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.direction.coords(&(z - &self.base))
    }

    pub fn ambient_dim(&self) -> usize {
        self.direction.ambient_dim()
    }
}

/// Serialization shape for [`Plane`]: row-vector frame.
#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    n: usize,
    m: usize,
    frame: Vec<Vec<f64>>,
}

impl Serialize for Plane {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = PlaneRepr {
            n: self.ambient_dim(),
            m: self.dim(),
            frame: (0..self.dim())
                .map(|j| self.frame.column(j).iter().copied().collect())
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Plane {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Plane, D::Error> {
        let repr = PlaneRepr::deserialize(d)?;
        if repr.frame.len() != repr.m || repr.frame.iter().any(|r| r.len() != repr.n) {
            return Err(serde::de::Error::custom("frame shape does not match n, m"));
        }
        let cols: Vec<DVector<f64>> = repr
            .frame
            .iter()
            .map(|r| DVector::from_column_slice(r))
            .collect();
        let frame = DMatrix::from_columns(&cols);
        Plane::from_frame(frame).map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x, y])
    }

    fn vec3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x, y, z])
    }

    /// Line through the origin in ℝ² at inclination phi.
    fn line2(phi: f64) -> Plane {
        Plane::new(&[vec2(phi.cos(), phi.sin())]).unwrap()
    }

    #[test]
    fn make_plane_standard_basis_is_fixed() {
        let p = Plane::new(&[vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)]).unwrap();
        let f = p.frame();
        assert!((f[(0, 0)] - 1.0).abs() < FRAME_TOL);
        assert!((f[(1, 1)] - 1.0).abs() < FRAME_TOL);
        assert!(f[(2, 0)].abs() < FRAME_TOL && f[(2, 1)].abs() < FRAME_TOL);
    }

    #[test]
    fn make_plane_rejects_dependent_input() {
        let err = Plane::new(&[vec2(1.0, 0.0), vec2(2.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
    }

    #[test]
    fn make_plane_spans_inputs() {
        // (1,1,0),(0,1,1): Gram identity and the projector fixes both inputs.
        let v1 = vec3(1.0, 1.0, 0.0);
        let v2 = vec3(0.0, 1.0, 1.0);
        let p = Plane::new(&[v1.clone(), v2.clone()]).unwrap();
        let gram = p.frame().transpose() * p.frame();
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        for v in [&v1, &v2] {
            let pv = p.project(v).unwrap();
            assert!((pv - v).norm() < 1e-10, "projector must fix spanning vectors");
        }
    }

    #[test]
    fn projector_idempotent_symmetric() {
        for seed in 0..20 {
            let n = 3 + (seed as usize % 6); // up to n = 8
            let m = 1 + (seed as usize % n.min(4));
            let p = Plane::random(n, m, seed).unwrap();
            let pr = p.projector();
            assert!((&pr * &pr - &pr).norm() < 1e-10);
            assert!((&pr - pr.transpose()).norm() < 1e-10);
        }
    }

    #[test]
    fn project_axis_examples() {
        let p = line2(0.0); // x-axis
        let v = vec2(3.0, 4.0);
        assert!((p.project(&v).unwrap() - vec2(3.0, 0.0)).norm() < 1e-14);
        assert!((p.project_perp(&v).unwrap() - vec2(0.0, 4.0)).norm() < 1e-14);
        // v in P is fixed
        let w = vec2(-2.5, 0.0);
        assert!((p.project(&w).unwrap() - &w).norm() < 1e-14);
        assert!(p.project_perp(&w).unwrap().norm() < 1e-14);
    }

    #[test]
    fn project_diagonal_line() {
        // P = span{(1,1)/√2}, v = (1,0) → (1/2, 1/2); complement (1/2, -1/2).
        let p = Plane::new(&[vec2(1.0, 1.0)]).unwrap();
        let v = vec2(1.0, 0.0);
        assert!((p.project(&v).unwrap() - vec2(0.5, 0.5)).norm() < 1e-14);
        assert!((p.project_perp(&v).unwrap() - vec2(0.5, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn project_dimension_mismatch() {
        let p = line2(0.0);
        assert!(matches!(
            p.project(&vec3(1.0, 2.0, 3.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn angle_identity_and_orthogonal() {
        let px = line2(0.0);
        let py = line2(std::f64::consts::FRAC_PI_2);
        assert!(angle(&px, &px).unwrap() < 1e-15);
        assert!((angle(&px, &py).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_inclined_line_is_sine() {
        // ∢(x-axis, line at π/6) = sin(π/6) = 1/2, cross-checked by a
        // brute-force sup over unit-circle samples.
        let phi = std::f64::consts::PI / 6.0;
        let px = line2(0.0);
        let pl = line2(phi);
        let a = angle(&px, &pl).unwrap();
        assert!((a - 0.5).abs() < 1e-12);

        let d = px.projector() - pl.projector();
        let mut sup: f64 = 0.0;
        for k in 0..20000 {
            let t = 2.0 * std::f64::consts::PI * (k as f64) / 20000.0;
            let v = vec2(t.cos(), t.sin());
            sup = sup.max((&d * v).norm());
        }
        assert!((sup - a).abs() < 1e-6);
    }

    #[test]
    fn angle_metric_axioms_on_random_triples() {
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let p1 = Plane::random_with(4, 2, &mut rng).unwrap();
            let p2 = Plane::random_with(4, 2, &mut rng).unwrap();
            let p3 = Plane::random_with(4, 2, &mut rng).unwrap();
            let a12 = angle(&p1, &p2).unwrap();
            let a21 = angle(&p2, &p1).unwrap();
            let a13 = angle(&p1, &p3).unwrap();
            let a23 = angle(&p2, &p3).unwrap();
            assert!(a12 >= 0.0);
            assert!((a12 - a21).abs() < 1e-12, "symmetry");
            assert!(a12 + a23 - a13 >= -1e-10, "triangle inequality");
            assert!(angle(&p1, &p1).unwrap() < SUBSPACE_EQ_TOL);
        }
    }

    #[test]
    fn angle_expression_equalities() {
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p1 = Plane::random_with(4, 2, &mut rng).unwrap();
            let p2 = Plane::random_with(4, 2, &mut rng).unwrap();
            let e = angle_expressions(&p1, &p2).unwrap();
            for i in 1..6 {
                assert!(
                    (e[i] - e[0]).abs() < 1e-9,
                    "expression {i} disagrees: {} vs {}",
                    e[i],
                    e[0]
                );
            }
        }
    }

    #[test]
    fn affine_projection_examples() {
        // Q = (0,1) + x-axis, z = (2,5) → (2,1).
        let q = AffinePlane::new(vec2(0.0, 1.0), line2(0.0)).unwrap();
        let z = vec2(2.0, 5.0);
        let pz = q.project(&z).unwrap();
        assert!((pz.clone() - vec2(2.0, 1.0)).norm() < 1e-14);
        // residual is perpendicular to the direction
        let resid = &z - &pz;
        assert!(q.direction.project(&resid).unwrap().norm() < 1e-14);
        // z ∈ Q is fixed
        let on = vec2(-3.0, 1.0);
        assert!((q.project(&on).unwrap() - on).norm() < 1e-14);
    }

    #[test]
    fn affine_projection_diagonal() {
        // Q = (1,1)+span{(1,1)/√2}, z = (2,0): (1,-1) ⟂ (1,1) → π_Q(z) = (1,1).
        let q = AffinePlane::new(vec2(1.0, 1.0), Plane::new(&[vec2(1.0, 1.0)]).unwrap()).unwrap();
        let z = vec2(2.0, 0.0);
        assert!((q.project(&z).unwrap() - vec2(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn restricted_projection_cases() {
        let px = line2(0.0);
        let (ok, margin) = restricted_projection_invertible(&px, &px).unwrap();
        assert!(ok && (margin - 1.0).abs() < 1e-12);

        let py = line2(std::f64::consts::FRAC_PI_2);
        let (ok, margin) = restricted_projection_invertible(&px, &py).unwrap();
        assert!(!ok, "orthogonal lines are not invertible");
        assert!(margin < 1e-12);

        let phi = std::f64::consts::PI / 6.0;
        let pl = line2(phi);
        let (ok, margin) = restricted_projection_invertible(&px, &pl).unwrap();
        assert!(ok);
        assert!((margin - phi.cos()).abs() < 1e-12);
    }

    #[test]
    fn random_plane_deterministic_and_orthonormal() {
        let a = Plane::random(3, 1, 7).unwrap();
        let b = Plane::random(3, 1, 7).unwrap();
        assert_eq!(a.frame(), b.frame());
        let gram = a.frame().transpose() * a.frame();
        assert!((gram - DMatrix::identity(1, 1)).norm() < FRAME_TOL);
    }

    #[test]
    fn random_line_angle_law() {
        // In G(2,1) the angle to a fixed axis is |sin φ| with φ uniform;
        // empirical CDF must match (2/π)·asin(t) within KS distance 0.05.
        let axis = line2(0.0);
        let n = 10_000;
        let mut angles: Vec<f64> = (0..n)
            .map(|s| angle(&Plane::random(2, 1, s as u64).unwrap(), &axis).unwrap())
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, t) in angles.iter().enumerate() {
            let cdf = 2.0 / std::f64::consts::PI * t.asin();
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((emp_hi - cdf).abs()).max((emp_lo - cdf).abs());
        }
        assert!(ks < 0.05, "KS distance {ks} too large");
    }

    #[test]
    fn perp_frame_completes_basis() {
        for seed in 0..10 {
            let p = Plane::random(5, 2, seed).unwrap();
            let q = p.perp_frame();
            assert_eq!(q.ncols(), 3);
            // orthonormal and orthogonal to the plane
            assert!((q.transpose() * &q - DMatrix::identity(3, 3)).norm() < 1e-10);
            assert!((p.frame().transpose() * &q).norm() < 1e-10);
        }
    }

    #[test]
    fn plane_json_round_trip() {
        let p = Plane::random(4, 2, 3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Plane = serde_json::from_str(&s).unwrap();
        assert!(angle(&p, &q).unwrap() < SUBSPACE_EQ_TOL);
    }
}
