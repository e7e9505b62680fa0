//! The two-twist Ramsey interferometer: twisted input, signal imprint about
//! `n`, second twist about `k`, projective measurement of `S_m`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dicke::{
    self, cis, css_x, AxisBasis, CMatrix, CVector, SpinOperators, StateVector, UnitVector3, Unitary, C64,
};
use crate::error::{invalid, Result};

/// Parity of the mean signal `⟨S_m(φ)⟩` under `φ → −φ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    AntiSymmetric,
    Symmetric,
    Unclassified,
}

impl SymmetryClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SymmetryClass::AntiSymmetric => "anti_symmetric",
            SymmetryClass::Symmetric => "symmetric",
            SymmetryClass::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymmetryClass {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anti_symmetric" | "anti" | "antisymmetric" => Ok(SymmetryClass::AntiSymmetric),
            "symmetric" | "sym" => Ok(SymmetryClass::Symmetric),
            "unclassified" => Ok(SymmetryClass::Unclassified),
            other => Err(invalid(format!("unknown symmetry class `{other}`"))),
        }
    }
}

/// One point of the variational protocol class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_particles: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub n_axis: UnitVector3,
    pub k_axis: UnitVector3,
    pub m_axis: UnitVector3,
    pub symmetry_class: SymmetryClass,
}

const MU_RANGE_SLACK: f64 = 1e-12;

impl ProtocolConfig {
    pub fn new(
        n_particles: usize,
        mu1: f64,
        mu2: f64,
        n_axis: UnitVector3,
        k_axis: UnitVector3,
        m_axis: UnitVector3,
        symmetry_class: SymmetryClass,
    ) -> Result<Self> {
        let cfg = Self { n_particles, mu1, mu2, n_axis, k_axis, m_axis, symmetry_class };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Twisting strengths must lie in `[−π, π]`.
    ///
    /// Values outside are rejected rather than wrapped: `T(μ + 2π)` differs
    /// from `T(μ)` by a π-rotation about the twisting axis.
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("particle number must be at least 1"));
        }
        for (name, mu) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !mu.is_finite() || mu.abs() > PI + MU_RANGE_SLACK {
                return Err(invalid(format!("{name} = {mu} outside [-pi, pi]")));
            }
        }
        Ok(())
    }

    pub fn with_particles(&self, n_particles: usize) -> Self {
        Self { n_particles, ..self.clone() }
    }
}

/// Sampled mean signal and projection noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalCurve {
    pub phis: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Evaluator for a fixed protocol configuration.
///
/// Holds the eigenbases of the imprint, twist and measurement axes together
/// with the twisted input state, so that sweeps over `φ` only cost
/// matrix-vector products.
#[derive(Clone, Debug)]
pub struct Protocol<'a> {
    ops: &'a SpinOperators,
    cfg: ProtocolConfig,
    twisted_input: CVector,
    imprint: AxisBasis,
    twist: AxisBasis,
    twist_phases: Vec<C64>,
    twist_phases_adj: Vec<C64>,
    measurement: AxisBasis,
}

impl<'a> Protocol<'a> {
    pub fn new(ops: &'a SpinOperators, cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        dicke::check_dim(ops.n_particles(), cfg.n_particles)?;
        let psi0 = css_x(cfg.n_particles)?;
        let twisted_input: CVector = psi0
            .amplitudes()
            .iter()
            .zip(ops.m_values())
            .map(|(a, &m)| a * cis(-0.5 * cfg.mu1 * m * m))
            .collect::<Vec<_>>()
            .into();
        let imprint = ops.axis_basis(&cfg.n_axis);
        let twist = ops.axis_basis(&cfg.k_axis);
        let twist_phases = twist.twist_phases(cfg.mu2);
        let twist_phases_adj = twist_phases.iter().map(|p| p.conj()).collect();
        let measurement = ops.axis_basis(&cfg.m_axis);
        Ok(Self { ops, cfg: cfg.clone(), twisted_input, imprint, twist, twist_phases, twist_phases_adj, measurement })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn ops(&self) -> &'a SpinOperators {
        self.ops
    }

    /// `T_z(μ1)|N/2⟩_x`.
    pub fn twisted_input(&self) -> StateVector {
        StateVector::from_evolved(self.twisted_input.clone())
    }

    /// `R_n(φ) T_z(μ1)|N/2⟩_x`, the state right after the imprint.
    pub fn imprinted(&self, phi: f64) -> CVector {
        self.imprint.apply_diagonal(&self.imprint.rotation_phases(phi), &self.twisted_input)
    }

    /// `T_k(μ2) R_n(φ) T_z(μ1)|N/2⟩_x`.
    pub fn output_state(&self, phi: f64) -> StateVector {
        let v = self.twist.apply_diagonal(&self.twist_phases, &self.imprinted(phi));
        StateVector::from_evolved(v)
    }

    /// Mean and variance of `S_m` on the output state.
    pub fn signal(&self, phi: f64) -> Result<(f64, f64)> {
        let out = self.output_state(phi);
        let s_out = self.ops.apply_component(&self.cfg.m_axis, out.amplitudes());
        let mean = out.amplitudes().dotc(&s_out).re;
        let var = dicke::clamp_variance(s_out.norm_squared() - mean * mean)?;
        Ok((mean, var))
    }

    /// `∂_φ⟨S_m⟩ = i⟨ψ_φ|[S_n, A]|ψ_φ⟩` with `A = T_k† S_m T_k` and
    /// `ψ_φ = R_n(φ) T_z(μ1)|N/2⟩_x`.
    pub fn slope(&self, phi: f64) -> f64 {
        let psi = self.imprinted(phi);
        let a_psi = self.heisenberg_measurement(&psi);
        let sn_psi = self.ops.apply_component(&self.cfg.n_axis, &psi);
        // i(⟨S_nψ|Aψ⟩ − ⟨Aψ|S_nψ⟩) = −2 Im⟨S_nψ|Aψ⟩
        -2.0 * sn_psi.dotc(&a_psi).im
    }

    /// `A v = T_k† S_m T_k v`.
    fn heisenberg_measurement(&self, v: &CVector) -> CVector {
        let twisted = self.twist.apply_diagonal(&self.twist_phases, v);
        let measured = self.ops.apply_component(&self.cfg.m_axis, &twisted);
        self.twist.apply_diagonal(&self.twist_phases_adj, &measured)
    }

    /// Outcome probabilities of the `S_m` measurement at phase `φ`.
    pub fn outcome_distribution(&self, phi: f64) -> Vec<(f64, f64)> {
        dicke::distribution_in_basis(&self.measurement, self.output_state(phi).amplitudes())
    }

    /// Exact harmonic expansion of the signal moments in `φ`.
    pub fn series(&self) -> SignalSeries {
        let dim = self.ops.dim();
        // X = T_k V_n, so that A' = V_n† A V_n = X† S_m X.
        let mut x = self.twist.coefficients_matrix(self.imprint.frame());
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= self.twist_phases[i];
        }
        let x = self.twist.frame() * x;
        let sm = self.ops.component(&self.cfg.m_axis);
        let y = &sm * &x;
        let a = x.adjoint() * &y;
        let a2 = y.adjoint() * &y;
        let c = self.imprint.coefficients(&self.twisted_input);

        let mut mean = vec![C64::new(0.0, 0.0); dim];
        let mut second = vec![C64::new(0.0, 0.0); dim];
        for d in 0..dim {
            for b in 0..dim - d {
                let ai = b + d;
                let w = c[ai].conj() * c[b];
                mean[d] += w * a[(ai, b)];
                second[d] += w * a2[(ai, b)];
            }
        }
        SignalSeries { mean, second }
    }
}

impl AxisBasis {
    /// `V† M` for a matrix `M`.
    pub(crate) fn coefficients_matrix(&self, m: &CMatrix) -> CMatrix {
        self.frame().adjoint() * m
    }
}

/// Trigonometric-polynomial form of `⟨S_m⟩(φ)` and `⟨S_m²⟩(φ)`.
///
/// A moment is represented by coefficients `g_d`, `d = 0…N`, with
/// `f(φ) = g_0 + 2 Re Σ_{d≥1} g_d e^{idφ}`.
#[derive(Clone, Debug)]
pub struct SignalSeries {
    mean: Vec<C64>,
    second: Vec<C64>,
}

impl SignalSeries {
    fn eval(coeffs: &[C64], phi: f64, derivative: bool) -> f64 {
        let step = cis(phi);
        let mut rot = step;
        let mut acc = if derivative { 0.0 } else { coeffs[0].re };
        for (d, g) in coeffs.iter().enumerate().skip(1) {
            let term = g * rot;
            if derivative {
                acc -= 2.0 * d as f64 * term.im;
            } else {
                acc += 2.0 * term.re;
            }
            rot *= step;
        }
        acc
    }

    pub fn mean(&self, phi: f64) -> f64 {
        Self::eval(&self.mean, phi, false)
    }

    pub fn slope(&self, phi: f64) -> f64 {
        Self::eval(&self.mean, phi, true)
    }

    /// `k`-th derivative of the mean signal.
    pub fn mean_derivative(&self, phi: f64, order: u32) -> f64 {
        let step = cis(phi);
        let mut rot = step;
        let mut acc = if order == 0 { self.mean[0].re } else { 0.0 };
        let unit = C64::new(0.0, 1.0).powi(order as i32);
        for (d, g) in self.mean.iter().enumerate().skip(1) {
            acc += 2.0 * (unit * g * rot).re * (d as f64).powi(order as i32);
            rot *= step;
        }
        acc
    }

    pub fn second_moment(&self, phi: f64) -> f64 {
        Self::eval(&self.second, phi, false)
    }

    pub fn variance(&self, phi: f64) -> f64 {
        let m = self.mean(phi);
        (self.second_moment(phi) - m * m).max(0.0)
    }

    /// Cosine and sine amplitudes of harmonic `d ≥ 1` of the mean signal.
    pub fn harmonic(&self, d: usize) -> (f64, f64) {
        match self.mean.get(d) {
            Some(g) if d > 0 => (2.0 * g.re, -2.0 * g.im),
            _ => (0.0, 0.0),
        }
    }

    /// Coefficients `g_d` of `⟨S_m⟩(φ) = g_0 + 2 Re Σ g_d e^{idφ}`.
    pub fn mean_coefficients(&self) -> &[C64] {
        &self.mean
    }

    /// Coefficients of `⟨S_m²⟩(φ)` in the same form.
    pub fn second_moment_coefficients(&self) -> &[C64] {
        &self.second
    }

    pub fn num_harmonics(&self) -> usize {
        self.mean.len() - 1
    }

    /// L2 norms of the non-constant cosine and of the sine amplitudes.
    pub fn parity_norms(&self) -> (f64, f64) {
        let (mut c, mut s) = (0.0, 0.0);
        for d in 1..self.mean.len() {
            let (a, b) = self.harmonic(d);
            c += a * a;
            s += b * b;
        }
        (c.sqrt(), s.sqrt())
    }
}

fn ops_for(cfg: &ProtocolConfig) -> Result<SpinOperators> {
    SpinOperators::new(cfg.n_particles)
}

/// Output state `T_k(μ2) R_n(φ) T_z(μ1)|N/2⟩_x`.
pub fn output_state(cfg: &ProtocolConfig, phi: f64) -> Result<StateVector> {
    let ops = ops_for(cfg)?;
    Ok(Protocol::new(&ops, cfg)?.output_state(phi))
}

/// Mean and variance of `S_m` at phase `φ`.
pub fn signal(cfg: &ProtocolConfig, phi: f64) -> Result<(f64, f64)> {
    let ops = ops_for(cfg)?;
    Protocol::new(&ops, cfg)?.signal(phi)
}

/// Analytic derivative `∂_φ⟨S_m⟩`.
pub fn signal_slope(cfg: &ProtocolConfig, phi: f64) -> Result<f64> {
    let ops = ops_for(cfg)?;
    Ok(Protocol::new(&ops, cfg)?.slope(phi))
}

/// Samples the signal on `num_points` uniformly spaced phases, endpoints
/// included.
pub fn signal_curve(cfg: &ProtocolConfig, phi_min: f64, phi_max: f64, num_points: usize) -> Result<SignalCurve> {
    if num_points < 2 {
        return Err(invalid("signal curve needs at least two points"));
    }
    if !(phi_min.is_finite() && phi_max.is_finite() && phi_max > phi_min) {
        return Err(invalid(format!("invalid phase range [{phi_min}, {phi_max}]")));
    }
    let ops = ops_for(cfg)?;
    let protocol = Protocol::new(&ops, cfg)?;
    let step = (phi_max - phi_min) / (num_points - 1) as f64;
    let mut curve = SignalCurve {
        phis: Vec::with_capacity(num_points),
        means: Vec::with_capacity(num_points),
        variances: Vec::with_capacity(num_points),
    };
    for i in 0..num_points {
        let phi = if i + 1 == num_points { phi_max } else { phi_min + step * i as f64 };
        let (mean, var) = protocol.signal(phi)?;
        curve.phis.push(phi);
        curve.means.push(mean);
        curve.variances.push(var);
    }
    Ok(curve)
}

/// The same interferometer written as explicit rotations between fixed-axis
/// twists: `R₃ T_z(μ2) R₂ R_z(φ) R₁ T_z(μ1)|N/2⟩_x`, read out along `z`.
///
/// With `V_a` the frame that carries `S_z` into `S_a`, the rotations are
/// `R₁ = V_n†`, `R₂ = V_k† V_n` and `R₃ = V_m† V_k`.
pub fn sequence_state(ops: &SpinOperators, cfg: &ProtocolConfig, phi: f64) -> Result<StateVector> {
    cfg.validate()?;
    let frame = |axis: &UnitVector3| Unitary::new(ops.axis_basis(axis).frame().clone());
    let (vn, vk, vm) = (frame(&cfg.n_axis)?, frame(&cfg.k_axis)?, frame(&cfg.m_axis)?);
    let r1 = vn.adjoint();
    let r2 = vk.adjoint().then_after(&vn);
    let r3 = vm.adjoint().then_after(&vk);
    let tz1 = dicke::oat(ops, &UnitVector3::Z, cfg.mu1);
    let tz2 = dicke::oat(ops, &UnitVector3::Z, cfg.mu2);
    let rz = dicke::rotation(ops, &UnitVector3::Z, phi);
    let mut psi = css_x(cfg.n_particles)?;
    for u in [&tz1, &r1, &rz, &r2, &tz2, &r3] {
        psi = u.apply(&psi)?;
    }
    Ok(psi)
}
