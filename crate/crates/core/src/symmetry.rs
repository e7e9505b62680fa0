//! Signal parity: sufficient geometric rules, the `P_x` conjugation identities
//! behind them, and a numerical Fourier test for the remaining geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dicke::{self, css_x, max_abs_diff, parity_x, SpinOperators, UnitVector3, C64};
use crate::error::{invalid, Error, Result};
use crate::protocol::{Protocol, ProtocolConfig};

/// Plane and axis membership tolerance for user-supplied geometry.
pub const PLANE_TOL: f64 = 1e-9;
pub const DEFAULT_FOURIER_SAMPLES: usize = 256;
pub const DEFAULT_FOURIER_TOLERANCE: f64 = 1e-8;
const ZERO_GUARD: f64 = 1e-30;

/// Signal shape implied by the orientation of `n`, `m` and `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryClass {
    AntiSymmetric,
    Symmetric,
    Zero,
    Constant,
    NoInsight,
}

/// Outcome of the numerical parity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierClass {
    AntiSymmetric,
    Symmetric,
    Zero,
    Constant,
    Unclassified,
}

impl FourierClass {
    /// Whether this numerical verdict is compatible with a geometric prediction.
    /// A vanishing signal has both parities and a constant one is even.
    pub fn agrees_with(&self, geometry: GeometryClass) -> bool {
        match geometry {
            GeometryClass::AntiSymmetric => matches!(self, FourierClass::AntiSymmetric | FourierClass::Zero),
            GeometryClass::Symmetric => {
                matches!(self, FourierClass::Symmetric | FourierClass::Constant | FourierClass::Zero)
            }
            GeometryClass::Zero => *self == FourierClass::Zero,
            GeometryClass::Constant => {
                matches!(self, FourierClass::Constant | FourierClass::Zero)
            }
            GeometryClass::NoInsight => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierReport {
    /// L2 norm of the non-constant cosine coefficients.
    pub cosine_norm: f64,
    /// L2 norm of the sine coefficients.
    pub sine_norm: f64,
    pub constant_term: f64,
    pub num_harmonics: usize,
    pub classification: FourierClass,
}

enum Orientation {
    AlongX,
    InYzPlane,
    Other,
}

fn orientation(v: &UnitVector3) -> Orientation {
    if v.is_along_x(PLANE_TOL) {
        Orientation::AlongX
    } else if v.lies_in_yz_plane(PLANE_TOL) {
        Orientation::InYzPlane
    } else {
        Orientation::Other
    }
}

/// Applies the geometric parity rules:
///
/// | n | m | k | shape |
/// |---|---|---|---|
/// | y-z plane | y-z plane | x or y-z plane | anti-symmetric |
/// | y-z plane | x | x or y-z plane | symmetric |
/// | x | y-z plane | x or y-z plane | zero |
/// | x | x | x | constant |
/// | x | x | y-z plane | no insight |
///
/// "x" admits both `±x`.
pub fn classify_geometry(n_axis: &UnitVector3, m_axis: &UnitVector3, k_axis: &UnitVector3) -> Result<GeometryClass> {
    use Orientation::*;
    let unconstrained = |what: &str, v: &UnitVector3| {
        Error::UnconstrainedGeometry(format!("{what} axis {v:?} is neither along x nor in the y-z plane"))
    };
    let n = orientation(n_axis);
    let m = orientation(m_axis);
    let k = orientation(k_axis);
    if let Other = n {
        return Err(unconstrained("imprint", n_axis));
    }
    if let Other = m {
        return Err(unconstrained("measurement", m_axis));
    }
    if let Other = k {
        return Err(unconstrained("twist", k_axis));
    }
    Ok(match (n, m, k) {
        (InYzPlane, InYzPlane, _) => GeometryClass::AntiSymmetric,
        (InYzPlane, AlongX, _) => GeometryClass::Symmetric,
        (AlongX, InYzPlane, _) => GeometryClass::Zero,
        (AlongX, AlongX, AlongX) => GeometryClass::Constant,
        (AlongX, AlongX, InYzPlane) => GeometryClass::NoInsight,
        _ => unreachable!("Other excluded above"),
    })
}

/// Samples `⟨S_m(φ)⟩` on `num_samples` points of `[−π, π)` and splits its
/// discrete Fourier series into cosine (even) and sine (odd) parts.
pub fn classify_fourier(cfg: &ProtocolConfig, num_samples: usize, tolerance: f64) -> Result<FourierReport> {
    if num_samples < 64 {
        return Err(invalid(format!("need at least 64 samples, got {num_samples}")));
    }
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let ops = SpinOperators::new(cfg.n_particles)?;
    let protocol = Protocol::new(&ops, cfg)?;
    let m = num_samples;
    let phis: Vec<f64> = (0..m).map(|j| -PI + 2.0 * PI * j as f64 / m as f64).collect();
    let samples = phis.iter().map(|&phi| protocol.signal(phi).map(|s| s.0)).collect::<Result<Vec<f64>>>()?;
    Ok(fourier_report(&phis, &samples, cfg.n_particles as f64, tolerance))
}

pub(crate) fn fourier_report(phis: &[f64], samples: &[f64], scale: f64, tol: f64) -> FourierReport {
    let m = samples.len();
    let half = m / 2;
    let inv = 1.0 / m as f64;
    let constant_term = samples.iter().sum::<f64>() * inv;
    let (mut cos2, mut sin2) = (0.0, 0.0);
    for d in 1..=half {
        let (mut a, mut b) = (0.0, 0.0);
        for (&phi, &f) in phis.iter().zip(samples) {
            let (s, c) = (d as f64 * phi).sin_cos();
            a += f * c;
            b += f * s;
        }
        // Nyquist term carries half weight and has no sine partner.
        let w = if 2 * d == m { inv } else { 2.0 * inv };
        a *= w;
        b *= if 2 * d == m { 0.0 } else { w };
        cos2 += a * a;
        sin2 += b * b;
    }
    let (cosine_norm, sine_norm) = (cos2.sqrt(), sin2.sqrt());
    let total = cosine_norm + sine_norm + ZERO_GUARD;
    let classification = if cosine_norm < tol * scale && sine_norm < tol * scale {
        if constant_term.abs() < tol * scale {
            FourierClass::Zero
        } else {
            FourierClass::Constant
        }
    } else if cosine_norm < tol * total {
        FourierClass::AntiSymmetric
    } else if sine_norm < tol * total {
        FourierClass::Symmetric
    } else {
        FourierClass::Unclassified
    };
    FourierReport { cosine_norm, sine_norm, constant_term, num_harmonics: half, classification }
}

/// One checked conjugation identity and its largest elementwise deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub deviation: f64,
}

/// Checks every `P_x = e^{−iπS_x}` conjugation identity used by the parity
/// rules, on a fixed set of angles and axes.
pub fn verify_parity_identities(ops: &SpinOperators) -> Result<Vec<IdentityCheck>> {
    let p = parity_x(ops);
    let conj = |op: &dicke::CMatrix| p.conjugate(op);
    let (sx, sy, sz) = (ops.sx(), ops.sy(), ops.sz());
    let mut out = Vec::new();
    let mut push = |name: &str, deviation: f64| out.push(IdentityCheck { name: name.to_string(), deviation });

    push("P S_x P† = S_x", max_abs_diff(&conj(sx)?, sx));
    push("P S_y P† = -S_y", max_abs_diff(&conj(sy)?, &-sy));
    push("P S_z P† = -S_z", max_abs_diff(&conj(sz)?, &-sz));
    for (name, s) in [("P S_x² P† = S_x²", sx), ("P S_y² P† = S_y²", sy), ("P S_z² P† = S_z²", sz)] {
        let sq = s * s;
        push(name, max_abs_diff(&conj(&sq)?, &sq));
    }

    let m = UnitVector3::normalize(0.3, -0.5, 0.81)?;
    let reflected = sx * C64::new(m.x(), 0.0) - sy * C64::new(m.y(), 0.0) - sz * C64::new(m.z(), 0.0);
    push("P S_m P† = m_x S_x - m_y S_y - m_z S_z", max_abs_diff(&conj(&ops.component(&m))?, &reflected));

    let mus = [0.37, 1.9, -2.6, PI];
    let phis = [0.41, -1.3, 2.7];
    let yz_axes: Vec<UnitVector3> = [0.0, 0.7, 2.2, -1.1].iter().map(|&a| UnitVector3::in_yz_plane(a)).collect();

    let z_basis = ops.axis_basis(&UnitVector3::Z);
    let x_basis = ops.axis_basis(&UnitVector3::X);
    let mut dev = 0.0_f64;
    for &mu in &mus {
        let t = z_basis.twist(mu);
        dev = dev.max(max_abs_diff(&conj(t.matrix())?, t.matrix()));
    }
    push("P T_z(mu) P† = T_z(mu)", dev);

    let mut dev = 0.0_f64;
    for axis in &yz_axes {
        let b = ops.axis_basis(axis);
        for &phi in &phis {
            let lhs = conj(b.rotation(phi).matrix())?;
            dev = dev.max(max_abs_diff(&lhs, b.rotation(-phi).matrix()));
        }
    }
    push("P R_n(phi) P† = R_n(-phi), n in y-z plane", dev);

    let mut dev = 0.0_f64;
    for &phi in &phis {
        let r = x_basis.rotation(phi);
        dev = dev.max(max_abs_diff(&conj(r.matrix())?, r.matrix()));
    }
    push("P R_x(phi) P† = R_x(phi)", dev);

    let mut dev = 0.0_f64;
    for &mu in &mus {
        let t = x_basis.twist(mu);
        dev = dev.max(max_abs_diff(&conj(t.matrix())?, t.matrix()));
    }
    push("P T_k(mu) P† = T_k(mu), k = x", dev);

    let mut dev = 0.0_f64;
    for axis in &yz_axes {
        let b = ops.axis_basis(axis);
        for &mu in &mus {
            let t = b.twist(mu);
            dev = dev.max(max_abs_diff(&conj(t.matrix())?, t.matrix()));
        }
    }
    push("P T_k(mu) P† = T_k(mu), k in y-z plane", dev);

    let psi = css_x(ops.n_particles())?;
    let image = p.apply(&psi)?;
    let phase = dicke::cis(-PI * ops.n_particles() as f64 / 2.0);
    let want = psi.amplitudes() * phase;
    let dev = (image.amplitudes() - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
    push("P |N/2>_x = exp(-i pi N/2) |N/2>_x", dev);

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SymmetryClass;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn table_rows() {
        let (x, y, z) = (UnitVector3::X, UnitVector3::Y, UnitVector3::Z);
        assert_eq!(classify_geometry(&y, &z, &x).unwrap(), GeometryClass::AntiSymmetric);
        assert_eq!(classify_geometry(&y, &x, &z).unwrap(), GeometryClass::Symmetric);
        let m = UnitVector3::new(0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        assert_eq!(classify_geometry(&x, &m, &x).unwrap(), GeometryClass::Zero);
        assert_eq!(classify_geometry(&x, &x, &x).unwrap(), GeometryClass::Constant);
        assert_eq!(classify_geometry(&x, &x.negate(), &z).unwrap(), GeometryClass::NoInsight);
    }

    #[test]
    fn near_misses_fail_loudly() {
        let tilted = UnitVector3::normalize(1e-6, 1.0, 0.0).unwrap();
        let r = classify_geometry(&tilted, &UnitVector3::Z, &UnitVector3::X);
        assert!(matches!(r, Err(Error::UnconstrainedGeometry(_))));
        let generic = UnitVector3::normalize(1.0, 1.0, 1.0).unwrap();
        assert!(classify_geometry(&UnitVector3::Y, &UnitVector3::Z, &generic).is_err());
    }

    fn config(nax: UnitVector3, kax: UnitVector3, max: UnitVector3, mu1: f64, mu2: f64, n: usize) -> ProtocolConfig {
        ProtocolConfig::new(n, mu1, mu2, nax, kax, max, SymmetryClass::Unclassified).unwrap()
    }

    #[test]
    fn standard_ramsey_is_pure_sine() {
        let c = config(UnitVector3::Z, UnitVector3::Z, UnitVector3::Y, 0.0, 0.0, 16);
        let r = classify_fourier(&c, 256, 1e-8).unwrap();
        assert_eq!(r.classification, FourierClass::AntiSymmetric);
        assert!(r.cosine_norm < 1e-12);
        assert!((r.sine_norm - 8.0).abs() < 1e-10);
    }

    #[test]
    fn ghz_protocol_is_symmetric() {
        let c = config(UnitVector3::X.negate(), UnitVector3::Z, UnitVector3::X.negate(), PI, PI, 32);
        let r = classify_fourier(&c, 256, 1e-8).unwrap();
        assert_eq!(r.classification, FourierClass::Symmetric);
    }

    #[test]
    fn constant_geometry_detected() {
        let c = config(UnitVector3::X, UnitVector3::X, UnitVector3::X, 0.6, 1.1, 6);
        let r = classify_fourier(&c, 128, 1e-8).unwrap();
        assert_eq!(r.classification, FourierClass::Constant);
        let z = config(UnitVector3::X, UnitVector3::Z, UnitVector3::Y, 0.6, 1.1, 6);
        assert_eq!(classify_fourier(&z, 128, 1e-8).unwrap().classification, FourierClass::Zero);
    }

    #[test]
    fn too_few_samples_rejected() {
        let c = config(UnitVector3::Z, UnitVector3::Z, UnitVector3::Y, 0.0, 0.0, 4);
        assert!(classify_fourier(&c, 32, 1e-8).is_err());
    }

    #[test]
    fn parity_identities_hold() {
        for n in [1, 2, 3, 4, 5, 8] {
            let ops = SpinOperators::new(n).unwrap();
            let checks = verify_parity_identities(&ops).unwrap();
            assert_eq!(checks.len(), 13);
            for c in checks {
                assert!(c.deviation < 1e-12, "n={n} {}: {:e}", c.name, c.deviation);
            }
        }
    }
}
