//! Collective-spin algebra on the symmetric (Dicke) subspace of `N` spin-½
//! particles.
//!
//! All matrices act on the `N+1` dimensional space spanned by the `S_z`
//! eigenstates `|m⟩`, ordered by ascending `m = -N/2, …, N/2`. Exponentials of
//! spin components are taken through an exact eigenbasis of `S_n = n·S`, which
//! keeps every propagator unitary to machine precision.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const AXIS_NORM_TOL: f64 = 1e-9;
const STATE_NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
const EXPECTATION_IMAG_TOL: f64 = 1e-10;
const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn cis(angle: f64) -> C64 {
    C64::new(angle.cos(), angle.sin())
}

/// A direction in three dimensions. The components always have unit norm.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts components whose norm is within `1e-9` of one and rescales them
    /// onto the unit sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOL {
            return Err(invalid(format!("axis ({x}, {y}, {z}) is not normalized (|n| = {norm})")));
        }
        Ok(Self { x: x / norm, y: y / norm, z: z / norm })
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(invalid("cannot normalize a zero vector"));
        }
        Ok(Self { x: x / norm, y: y / norm, z: z / norm })
    }

    /// The direction `(0, cos a, sin a)` in the y-z plane.
    pub fn in_yz_plane(angle: f64) -> Self {
        Self { x: 0.0, y: angle.cos(), z: angle.sin() }
    }

    /// Direction with polar angle `theta` (from +z) and azimuth `phi` (from +x).
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Self { x: theta.sin() * phi.cos(), y: theta.sin() * phi.sin(), z: theta.cos() }
    }

    /// Polar and azimuthal angle of this direction.
    pub fn spherical_angles(&self) -> (f64, f64) {
        (self.z.clamp(-1.0, 1.0).acos(), self.y.atan2(self.x))
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn negate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    /// Active rotation of this vector by `angle` about `axis` (Rodrigues).
    pub fn rotated(&self, axis: &UnitVector3, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let k = axis;
        let cross = [k.y * self.z - k.z * self.y, k.z * self.x - k.x * self.z, k.x * self.y - k.y * self.x];
        let kd = k.dot(self) * (1.0 - c);
        let v = [
            self.x * c + cross[0] * s + k.x * kd,
            self.y * c + cross[1] * s + k.y * kd,
            self.z * c + cross[2] * s + k.z * kd,
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Self { x: v[0] / norm, y: v[1] / norm, z: v[2] / norm }
    }

    /// Absolute x-component below `tol`.
    pub fn lies_in_yz_plane(&self, tol: f64) -> bool {
        self.x.abs() < tol
    }

    /// Parallel or anti-parallel to x, up to `tol` in the y and z components.
    pub fn is_along_x(&self, tol: f64) -> bool {
        self.y.abs() < tol && self.z.abs() < tol
    }
}

impl TryFrom<[f64; 3]> for UnitVector3 {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        UnitVector3::new(v[0], v[1], v[2])
    }
}

impl From<UnitVector3> for [f64; 3] {
    fn from(v: UnitVector3) -> Self {
        v.to_array()
    }
}

impl fmt::Debug for UnitVector3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

/// Normalized pure state in the Dicke basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    /// Validates that the amplitudes have unit norm.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(invalid(format!("state has squared norm {norm}, expected 1")));
        }
        Ok(Self(amplitudes))
    }

    pub fn from_unnormalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(invalid("cannot normalize a zero state"));
        }
        Ok(Self(amplitudes / C64::new(norm, 0.0)))
    }

    /// Wraps amplitudes produced by unitary evolution of a normalized state.
    pub(crate) fn from_evolved(amplitudes: CVector) -> Self {
        Self(amplitudes)
    }

    /// The Dicke state `|m⟩` with `m = index - N/2`.
    pub fn dicke(n_particles: usize, index: usize) -> Result<Self> {
        if index > n_particles {
            return Err(invalid(format!("Dicke index {index} exceeds N = {n_particles}")));
        }
        let mut v = CVector::zeros(n_particles + 1);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self(&self.0 * cis(phase))
    }
}

/// A unitary operator on the Dicke space.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let u = Self(matrix);
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(invalid(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(u)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other`, i.e. `other` acts first.
    pub fn then_after(&self, other: &Unitary) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), state.dim())?;
        Ok(StateVector(&self.0 * &state.0))
    }

    /// `U A U†`.
    pub fn conjugate(&self, op: &CMatrix) -> Result<CMatrix> {
        check_dim(self.dim(), op.nrows())?;
        Ok(&self.0 * op * self.0.adjoint())
    }

    /// Largest absolute entry of `U†U − 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.0.nrows();
        let prod = self.0.adjoint() * &self.0;
        max_abs_diff(&prod, &CMatrix::identity(n, n))
    }
}

/// Exact eigenbasis of a spin component `S_n`.
///
/// The columns of [`AxisBasis::frame`] are eigenvectors of `S_n` with
/// eigenvalues `m = -N/2, …, N/2` in ascending order, so that
/// `S_n = V diag(m) V†`.
#[derive(Clone, Debug)]
pub struct AxisBasis {
    axis: UnitVector3,
    eigenvalues: Vec<f64>,
    frame: CMatrix,
    frame_adj: CMatrix,
}

impl AxisBasis {
    pub fn axis(&self) -> UnitVector3 {
        self.axis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn frame(&self) -> &CMatrix {
        &self.frame
    }

    /// Amplitudes of `v` in this eigenbasis, `V† v`.
    pub fn coefficients(&self, v: &CVector) -> CVector {
        &self.frame_adj * v
    }

    /// `V diag(phases) V† v` without forming the operator.
    pub fn apply_diagonal(&self, phases: &[C64], v: &CVector) -> CVector {
        let mut c = &self.frame_adj * v;
        for (ci, p) in c.iter_mut().zip(phases) {
            *ci *= *p;
        }
        &self.frame * c
    }

    /// `V diag(values) V†` as a dense matrix.
    pub fn diagonal_operator(&self, values: &[C64]) -> CMatrix {
        let mut scaled = self.frame.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[j];
        }
        scaled * &self.frame_adj
    }

    pub fn rotation_phases(&self, angle: f64) -> Vec<C64> {
        self.eigenvalues.iter().map(|&m| cis(-angle * m)).collect()
    }

    pub fn twist_phases(&self, mu: f64) -> Vec<C64> {
        self.eigenvalues.iter().map(|&m| cis(-0.5 * mu * m * m)).collect()
    }

    /// `e^{-iθ S_n}`.
    pub fn rotation(&self, angle: f64) -> Unitary {
        Unitary(self.diagonal_operator(&self.rotation_phases(angle)))
    }

    /// `e^{-iμ S_n²/2}`.
    pub fn twist(&self, mu: f64) -> Unitary {
        Unitary(self.diagonal_operator(&self.twist_phases(mu)))
    }
}

/// The collective spin operators `S_x`, `S_y`, `S_z` for `N` particles.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    n_particles: usize,
    m_values: Vec<f64>,
    sx: CMatrix,
    sy: CMatrix,
    sz: CMatrix,
    // Eigenvectors of S_y, columns ordered by ascending eigenvalue.
    y_frame: CMatrix,
    y_frame_adj: CMatrix,
}

impl SpinOperators {
    /// Ladder construction with `⟨m±1|S±|m⟩ = √(j(j+1) − m(m±1))`, `j = N/2`.
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(invalid("particle number must be at least 1"));
        }
        let dim = n_particles + 1;
        let j = n_particles as f64 / 2.0;
        let m_values: Vec<f64> = (0..dim).map(|i| i as f64 - j).collect();

        let mut s_plus = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim - 1 {
            let m = m_values[i];
            s_plus[(i + 1, i)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
        let s_minus = s_plus.transpose();

        let sx_real = (&s_plus + &s_minus) * 0.5;
        let sx = sx_real.map(|v| C64::new(v, 0.0));
        // (S+ − S−)/(2i) = −i (S+ − S−)/2
        let sy = (&s_plus - &s_minus).map(|v| C64::new(0.0, -0.5 * v));
        let sz = CMatrix::from_diagonal(&DVector::from_iterator(dim, m_values.iter().map(|&m| C64::new(m, 0.0))));

        // S_x is real symmetric tridiagonal; its spectrum is exactly {m}.
        let eig = sx_real.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut x_frame = CMatrix::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..dim {
                x_frame[(row, col)] = C64::new(eig.eigenvectors[(row, src)], 0.0);
            }
        }
        // R_z(π/2) S_x R_z(π/2)† = S_y, so its columns carry over.
        let mut y_frame = x_frame;
        for (row, mut r) in y_frame.row_iter_mut().enumerate() {
            r *= cis(-FRAC_PI_2 * m_values[row]);
        }
        let y_frame_adj = y_frame.adjoint();

        Ok(Self { n_particles, m_values, sx, sy, sz, y_frame, y_frame_adj })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// Total spin `j = N/2`.
    pub fn spin(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    /// `S_z` eigenvalues in basis order.
    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    pub fn sx(&self) -> &CMatrix {
        &self.sx
    }

    pub fn sy(&self) -> &CMatrix {
        &self.sy
    }

    pub fn sz(&self) -> &CMatrix {
        &self.sz
    }

    /// `S_n = n_x S_x + n_y S_y + n_z S_z`.
    pub fn component(&self, axis: &UnitVector3) -> CMatrix {
        let mut out = &self.sx * C64::new(axis.x(), 0.0);
        out += &self.sy * C64::new(axis.y(), 0.0);
        out += &self.sz * C64::new(axis.z(), 0.0);
        out
    }

    /// `(n·S) v` using the tridiagonal structure of the spin matrices.
    pub fn apply_component(&self, axis: &UnitVector3, v: &CVector) -> CVector {
        let dim = self.dim();
        let mut out = CVector::zeros(dim);
        let (nx, ny, nz) = (axis.x(), axis.y(), axis.z());
        for i in 0..dim {
            let mut acc = C64::new(nz * self.m_values[i], 0.0) * v[i];
            if i > 0 {
                acc += (self.sx[(i, i - 1)] * nx + self.sy[(i, i - 1)] * ny) * v[i - 1];
            }
            if i + 1 < dim {
                acc += (self.sx[(i, i + 1)] * nx + self.sy[(i, i + 1)] * ny) * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// Eigenbasis of `S_n`, obtained as `V = R_z(φ) R_y(θ)` acting on the
    /// `S_z` basis, where `(θ, φ)` are the spherical angles of `n`.
    pub fn axis_basis(&self, axis: &UnitVector3) -> AxisBasis {
        let (theta, phi) = axis.spherical_angles();
        let dim = self.dim();
        // R_y(θ) = W_y diag(e^{-iθm}) W_y†
        let mut scaled = self.y_frame.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= cis(-theta * self.m_values[j]);
        }
        let mut frame = scaled * &self.y_frame_adj;
        for (row, mut r) in frame.row_iter_mut().enumerate() {
            r *= cis(-phi * self.m_values[row]);
        }
        debug_assert_eq!(frame.nrows(), dim);
        let frame_adj = frame.adjoint();
        AxisBasis { axis: *axis, eigenvalues: self.m_values.clone(), frame, frame_adj }
    }
}

impl SpinOperators {
    /// `V† v` for the frame `V = R_z(φ) R_y(θ)` of [`SpinOperators::axis_basis`],
    /// without forming `V`.
    pub(crate) fn to_axis_frame(&self, axis: &UnitVector3, v: &CVector) -> CVector {
        let (theta, phi) = axis.spherical_angles();
        let mut w: CVector = v.iter().zip(&self.m_values).map(|(a, &m)| a * cis(phi * m)).collect::<Vec<_>>().into();
        w = &self.y_frame_adj * w;
        for (c, &m) in w.iter_mut().zip(&self.m_values) {
            *c *= cis(theta * m);
        }
        &self.y_frame * w
    }

    /// Directions `o_l` with `V† S_l V = o_l·S` for the frame of `axis`.
    pub(crate) fn frame_components(axis: &UnitVector3) -> [UnitVector3; 3] {
        let (theta, phi) = axis.spherical_angles();
        [UnitVector3::X, UnitVector3::Y, UnitVector3::Z]
            .map(|e| e.rotated(&UnitVector3::Z, -phi).rotated(&UnitVector3::Y, -theta))
    }
}

/// Builds the collective spin operators for `n_particles ≥ 1`.
pub fn build_spin_operators(n_particles: usize) -> Result<SpinOperators> {
    SpinOperators::new(n_particles)
}

/// The `+N/2` eigenstate of `S_x` with real, positive amplitudes
/// `√C(N,k) / 2^{N/2}`.
pub fn css_x(n_particles: usize) -> Result<StateVector> {
    if n_particles == 0 {
        return Err(invalid("particle number must be at least 1"));
    }
    let n = n_particles as f64;
    let mut ln_binom = 0.0_f64;
    let mut amps = CVector::zeros(n_particles + 1);
    for k in 0..=n_particles {
        if k > 0 {
            ln_binom += ((n_particles - k + 1) as f64).ln() - (k as f64).ln();
        }
        let ln_p = ln_binom - n * std::f64::consts::LN_2;
        amps[k] = C64::new((0.5 * ln_p).exp(), 0.0);
    }
    StateVector::from_unnormalized(amps)
}

/// `R_n(θ) = e^{-iθ S_n}`.
pub fn rotation(ops: &SpinOperators, axis: &UnitVector3, angle: f64) -> Unitary {
    ops.axis_basis(axis).rotation(angle)
}

/// One-axis twisting `T_k(μ) = e^{-iμ S_k²/2}`.
pub fn oat(ops: &SpinOperators, axis: &UnitVector3, mu: f64) -> Unitary {
    ops.axis_basis(axis).twist(mu)
}

/// `P_x = e^{-iπ S_x}`.
pub fn parity_x(ops: &SpinOperators) -> Unitary {
    rotation(ops, &UnitVector3::X, std::f64::consts::PI)
}

/// `⟨ψ|O|ψ⟩` for a Hermitian observable `O`.
pub fn expectation(state: &StateVector, obs: &CMatrix) -> Result<f64> {
    check_dim(obs.nrows(), state.dim())?;
    check_dim(obs.ncols(), state.dim())?;
    let v = obs * state.amplitudes();
    let value = state.amplitudes().dotc(&v);
    if value.im.abs() > EXPECTATION_IMAG_TOL * (1.0 + value.re.abs()) {
        return Err(Error::InternalConsistency(format!(
            "expectation value has imaginary part {:e}; observable is not Hermitian",
            value.im
        )));
    }
    Ok(value.re)
}

/// `⟨O²⟩ − ⟨O⟩²`, with round-off negatives clamped to zero.
pub fn variance(state: &StateVector, obs: &CMatrix) -> Result<f64> {
    let mean = expectation(state, obs)?;
    let v = obs * state.amplitudes();
    let second = v.norm_squared();
    clamp_variance(second - mean * mean)
}

pub(crate) fn clamp_variance(var: f64) -> Result<f64> {
    if var >= 0.0 {
        Ok(var)
    } else if var >= -NEGATIVE_VARIANCE_TOL {
        Ok(0.0)
    } else {
        Err(Error::InternalConsistency(format!("negative variance {var:e}")))
    }
}

/// Probabilities of the projective `S_axis` measurement, as `(m, p)` pairs with
/// `m` ascending.
pub fn outcome_distribution(ops: &SpinOperators, state: &StateVector, axis: &UnitVector3) -> Result<Vec<(f64, f64)>> {
    check_dim(ops.dim(), state.dim())?;
    Ok(distribution_in_basis(&ops.axis_basis(axis), state.amplitudes()))
}

pub(crate) fn distribution_in_basis(basis: &AxisBasis, amplitudes: &CVector) -> Vec<(f64, f64)> {
    let c = basis.coefficients(amplitudes);
    basis.eigenvalues().iter().zip(c.iter()).map(|(&m, a)| (m, a.norm_sqr())).collect()
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Largest absolute elementwise difference between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
