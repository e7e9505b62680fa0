//! Closed-form choice of the imprint axis `n` and measurement axis `m` for a
//! given pair of twists, from the moment matrices `M` and `Q`.
//!
//! With `ψ₁ = T_z(μ1)|N/2⟩_x` and `C_l = T_k† S_l T_k`, the slope at `φ = 0`
//! is the bilinear form `nᵀ M m` with `M_kl = i⟨[S_k, C_l]⟩`, and the
//! variance of `S_m` is `mᵀ Q m` with `Q` the symmetrized covariance of the
//! `C_l`. Maximizing `nᵀMm / √(mᵀQm)` is an SVD of `M Q^{-1/2}`.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dicke::{cis, css_x, CVector, SpinOperators, UnitVector3};
use crate::error::{Error, Result};
use crate::metrics::sensitivity_antisymmetric_with;
use crate::protocol::{Protocol, ProtocolConfig, SymmetryClass};
use crate::symmetry::PLANE_TOL;

/// Relative eigenvalue floor for `Q^{-1/2}`.
pub const Q_FLOOR: f64 = 1e-12;
/// Tolerance of the certificate `Δφ⁻¹(cfg) = σ_max`.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrices {
    pub n_particles: usize,
    pub m_matrix: Matrix3<f64>,
    pub q_matrix: Matrix3<f64>,
}

impl MomentMatrices {
    /// `nᵀ M m`, the slope of `⟨S_m⟩` at `φ = 0`.
    pub fn slope(&self, n: &UnitVector3, m: &UnitVector3) -> f64 {
        (vec3(n).transpose() * self.m_matrix * vec3(m))[0]
    }

    /// `mᵀ Q m`, the variance of `S_m` at `φ = 0`.
    pub fn variance(&self, m: &UnitVector3) -> f64 {
        (vec3(m).transpose() * self.q_matrix * vec3(m))[0]
    }

    /// `|nᵀMm| / √(mᵀQm)`.
    pub fn inverse_sensitivity(&self, n: &UnitVector3, m: &UnitVector3) -> f64 {
        self.slope(n, m).abs() / self.variance(m).max(0.0).sqrt()
    }
}

fn vec3(v: &UnitVector3) -> Vector3<f64> {
    Vector3::new(v.x(), v.y(), v.z())
}

/// Builds moment matrices for a fixed `(N, μ1)` and varying `(μ2, k)`.
///
/// Work is done in the eigenframe `V` of `S_k`, where `T_k` is diagonal and
/// `V† S_l V` is again a spin component, so each `k` costs two dense
/// matrix-vector products.
#[derive(Clone, Debug)]
pub struct MomentBuilder<'a> {
    ops: &'a SpinOperators,
    psi1: CVector,
}

impl<'a> MomentBuilder<'a> {
    pub fn new(ops: &'a SpinOperators, mu1: f64) -> Result<Self> {
        let psi0 = css_x(ops.n_particles())?;
        let psi1 = psi0
            .amplitudes()
            .iter()
            .zip(ops.m_values())
            .map(|(a, &m)| a * cis(-0.5 * mu1 * m * m))
            .collect::<Vec<_>>()
            .into();
        Ok(Self { ops, psi1 })
    }

    pub fn ops(&self) -> &'a SpinOperators {
        self.ops
    }

    pub fn build(&self, mu2: f64, k_axis: &UnitVector3) -> MomentMatrices {
        let ops = self.ops;
        let chi = ops.to_axis_frame(k_axis, &self.psi1);
        let comps = SpinOperators::frame_components(k_axis);
        let lambda: Vec<_> = ops.m_values().iter().map(|&m| cis(-0.5 * mu2 * m * m)).collect();
        let diag = |v: &CVector| -> CVector { v.iter().zip(&lambda).map(|(a, p)| a * p).collect::<Vec<_>>().into() };
        let u = diag(&chi);
        // Λ σ_k with σ_k = V† S_k ψ₁, and S'_l u with S'_l = V† S_l V.
        let sigma: Vec<CVector> = comps.iter().map(|o| diag(&ops.apply_component(o, &chi))).collect();
        let su: Vec<CVector> = comps.iter().map(|o| ops.apply_component(o, &u)).collect();
        let means: Vec<f64> = su.iter().map(|v| u.dotc(v).re).collect();
        let m_matrix = Matrix3::from_fn(|k, l| -2.0 * sigma[k].dotc(&su[l]).im);
        let q_raw = Matrix3::from_fn(|k, l| su[k].dotc(&su[l]).re - means[k] * means[l]);
        let q_matrix = (q_raw + q_raw.transpose()) * 0.5;
        MomentMatrices { n_particles: ops.n_particles(), m_matrix, q_matrix }
    }
}

pub fn build_moment_matrices(n_particles: usize, mu1: f64, mu2: f64, k_axis: &UnitVector3) -> Result<MomentMatrices> {
    let ops = SpinOperators::new(n_particles)?;
    Ok(MomentBuilder::new(&ops, mu1)?.build(mu2, k_axis))
}

/// Set of directions an axis may take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subspace {
    #[serde(rename = "full_3d")]
    Full3d,
    #[serde(rename = "yz_plane")]
    YzPlane,
}

impl Subspace {
    fn indices(self) -> &'static [usize] {
        match self {
            Subspace::Full3d => &[0, 1, 2],
            Subspace::YzPlane => &[1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdOptimum {
    pub sigma_max: f64,
    pub n_axis: UnitVector3,
    pub m_axis: UnitVector3,
    /// Subspace of the imprint axis.
    pub subspace: Subspace,
    /// Subspace of the measurement axis.
    pub m_subspace: Subspace,
}

/// Maximizes `nᵀMm / √(mᵀQm)` with both axes restricted to `subspace`.
pub fn svd_optimize_axes(mm: &MomentMatrices, subspace: Subspace) -> Result<SvdOptimum> {
    svd_optimize_axes_split(mm, subspace, subspace)
}

/// As [`svd_optimize_axes`] with separate constraints on `n` and `m`.
pub fn svd_optimize_axes_split(mm: &MomentMatrices, n_space: Subspace, m_space: Subspace) -> Result<SvdOptimum> {
    let ni = n_space.indices();
    let mi = m_space.indices();
    let m_block = DMatrix::from_fn(ni.len(), mi.len(), |r, c| mm.m_matrix[(ni[r], mi[c])]);
    let q_block = DMatrix::from_fn(mi.len(), mi.len(), |r, c| mm.q_matrix[(mi[r], mi[c])]);

    let trace = q_block.trace();
    if !(trace > Q_FLOOR * mm.n_particles as f64) {
        return Err(Error::DegenerateVariance);
    }
    let eig = SymmetricEigen::new(q_block.clone());
    let floor = Q_FLOOR * trace;
    let mut q_inv_sqrt = DMatrix::<f64>::zeros(mi.len(), mi.len());
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > floor {
            let w = eig.eigenvectors.column(j);
            q_inv_sqrt += (w * w.transpose()) / lam.sqrt();
        }
    }

    let a = &m_block * &q_inv_sqrt;
    let svd = a.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let (imax, sigma_max) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let u_max: DVector<f64> = u.column(imax).into();
    let v_max: DVector<f64> = v_t.row(imax).transpose();
    let mut m_dir = &q_inv_sqrt * &v_max;
    if m_dir.norm() < 1e-300 {
        m_dir = v_max.clone();
    }

    Ok(SvdOptimum {
        sigma_max,
        n_axis: embed(ni, &u_max)?,
        m_axis: embed(mi, &m_dir)?,
        subspace: n_space,
        m_subspace: m_space,
    })
}

fn embed(indices: &[usize], v: &DVector<f64>) -> Result<UnitVector3> {
    let mut full = [0.0; 3];
    for (k, &i) in indices.iter().enumerate() {
        full[i] = v[k];
    }
    UnitVector3::normalize(full[0], full[1], full[2])
}

/// Twist axes admitted by the anti-symmetric geometry: `±x` or the y-z plane.
pub(crate) fn check_twist_axis(k_axis: &UnitVector3) -> Result<()> {
    if k_axis.is_along_x(PLANE_TOL) || k_axis.lies_in_yz_plane(PLANE_TOL) {
        Ok(())
    } else {
        Err(Error::UnconstrainedGeometry(format!("twist axis {k_axis:?} is neither along x nor in the y-z plane")))
    }
}

/// Optimal `n`, `m` in the y-z plane for a fixed twist axis, returned with an
/// anti-symmetric config whose sensitivity is checked against `σ_max`.
pub fn optimize_axes_for_antisymmetric(
    n_particles: usize,
    mu1: f64,
    mu2: f64,
    k_axis: &UnitVector3,
) -> Result<(SvdOptimum, ProtocolConfig)> {
    let ops = SpinOperators::new(n_particles)?;
    let builder = MomentBuilder::new(&ops, mu1)?;
    optimize_axes_with(&builder, mu1, mu2, k_axis)
}

pub(crate) fn optimize_axes_with(
    builder: &MomentBuilder<'_>,
    mu1: f64,
    mu2: f64,
    k_axis: &UnitVector3,
) -> Result<(SvdOptimum, ProtocolConfig)> {
    check_twist_axis(k_axis)?;
    let ops = builder.ops();
    let opt = svd_optimize_axes(&builder.build(mu2, k_axis), Subspace::YzPlane)?;
    let cfg = ProtocolConfig::new(
        ops.n_particles(),
        mu1,
        mu2,
        opt.n_axis,
        *k_axis,
        opt.m_axis,
        SymmetryClass::AntiSymmetric,
    )?;
    if opt.sigma_max > crate::metrics::SLOPE_FLOOR * ops.n_particles() as f64 {
        let achieved = sensitivity_antisymmetric_with(&Protocol::new(ops, &cfg)?)?.inverse_delta_phi;
        // Values far below the SQL carry only absolute precision.
        let scale = opt.sigma_max.max(1e-4 * (ops.n_particles() as f64).sqrt());
        let rel = (achieved - opt.sigma_max).abs() / scale;
        if rel > CERTIFICATE_TOL {
            return Err(Error::InternalConsistency(format!(
                "SVD optimum {} not reproduced by its config ({achieved}, rel {rel:e})",
                opt.sigma_max
            )));
        }
    }
    Ok((opt, cfg))
}
