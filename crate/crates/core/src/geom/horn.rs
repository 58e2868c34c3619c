//! Closed-form similarity alignment of two point sets (Horn's quaternion
//! method).

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector3};

use super::{GeomError, Sim3};

/// Result of aligning `src` onto `dst`.
#[derive(Debug, Clone, Copy)]
pub struct Alignment {
    pub transform: Sim3,
    /// Root-mean-square of `‖S·src_i − dst_i‖`.
    pub rms_residual: f64,
}

/// Relative threshold on the second covariance eigenvalue below which the
/// source set counts as collinear.
const COLLINEAR_RATIO: f64 = 1e-12;

/// Finds the similarity `S` minimizing `Σ‖S·src_i − dst_i‖²`.
///
/// Rotation comes from the dominant eigenvector of Horn's 4×4 matrix. Scale is
/// the least-squares factor `Σ d'ᵢ·(R s'ᵢ) / Σ‖s'ᵢ‖²` on centred coordinates, which
/// is the minimizer of the stated cost (the symmetric RMS-ratio form is not).
pub fn horn_align(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Alignment, GeomError> {
    if src.len() != dst.len() {
        return Err(GeomError::LengthMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 3 {
        return Err(GeomError::TooFewPoints { needed: 3, got: n });
    }
    let inv_n = 1.0 / n as f64;
    let c_src = src.iter().sum::<Vector3<f64>>() * inv_n;
    let c_dst = dst.iter().sum::<Vector3<f64>>() * inv_n;

    let mut cov_src = Matrix3::zeros();
    let mut m = Matrix3::zeros();
    let mut src_sq = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let a = s - c_src;
        let b = d - c_dst;
        cov_src += a * a.transpose();
        m += a * b.transpose();
        src_sq += a.norm_squared();
    }
    cov_src *= inv_n;

    let mut eig = SymmetricEigen::new(cov_src).eigenvalues.as_slice().to_vec();
    eig.sort_by(|a, b| b.total_cmp(a));
    let scale_ref = 1.0 + c_src.norm_squared();
    if eig[0] <= 1e-24 * scale_ref || eig[1] < COLLINEAR_RATIO * eig[0] {
        return Err(GeomError::Degenerate);
    }

    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let horn = Matrix4::new(
        sxx + syy + szz, syz - szy,       szx - sxz,       sxy - syx,
        syz - szy,       sxx - syy - szz, sxy + syx,       szx + sxz,
        szx - sxz,       sxy + syx,       -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,       syz + szy,       -sxx - syy + szz,
    );
    let eig4 = SymmetricEigen::new(horn);
    let best = eig4.eigenvalues.imax();
    let v = eig4.eigenvectors.column(best);
    let rotation = UnitQuaternion::new_normalize(Quaternion::new(v[0], v[1], v[2], v[3]));

    let mut num = 0.0;
    for (s, d) in src.iter().zip(dst) {
        num += (d - c_dst).dot(&(rotation * (s - c_src)));
    }
    let scale = num / src_sq;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeomError::Degenerate);
    }
    let translation = c_dst - rotation * c_src * scale;
    let transform = Sim3::new(rotation, translation, scale)?;

    let sq: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (transform.transform_point(s) - d).norm_squared())
        .sum();
    Ok(Alignment {
        transform,
        rms_residual: (sq * inv_n).sqrt(),
    })
}
