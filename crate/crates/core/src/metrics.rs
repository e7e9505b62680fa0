//! Figures of merit: local sensitivity, squeezing parameter, mean squared
//! error of linear estimators, and the quantum Fisher information.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dicke::{css_x, CVector, SpinOperators, StateVector, UnitVector3};
use crate::error::{invalid, Error, Result};
use crate::protocol::{Protocol, ProtocolConfig, SignalSeries, SymmetryClass};

/// Slopes below `SLOPE_FLOOR · N` are treated as zero.
pub const SLOPE_FLOOR: f64 = 1e-12;
pub const DEFAULT_SCAN_POINTS: usize = 512;
const GOLDEN_TOL: f64 = 1e-10;
const CANDIDATE_BAND: f64 = 1e-3;
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub delta_phi: f64,
    pub inverse_delta_phi: f64,
    /// Wineland parameter `N Δφ²`.
    pub xi_squared: f64,
    pub working_point: f64,
    pub includes_two_point_factor: bool,
}

impl SensitivityReport {
    fn from_moments(n_particles: usize, variance: f64, slope: f64, working_point: f64, half: bool) -> Result<Self> {
        if !(slope.abs() > SLOPE_FLOOR * n_particles as f64) {
            return Err(Error::DegenerateWorkingPoint { slope });
        }
        let factor = if half { 0.5 } else { 1.0 };
        let dphi2 = factor * variance / (slope * slope);
        let delta_phi = dphi2.sqrt();
        Ok(Self {
            delta_phi,
            inverse_delta_phi: 1.0 / delta_phi,
            xi_squared: n_particles as f64 * dphi2,
            working_point,
            includes_two_point_factor: half,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub fisher_information: f64,
    pub optimal_axis: UnitVector3,
    pub crb_delta_phi: f64,
}

/// `Δφ = ΔS_m / |∂_φ⟨S_m⟩|` at `φ = 0`.
pub fn sensitivity_antisymmetric(cfg: &ProtocolConfig) -> Result<SensitivityReport> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    sensitivity_antisymmetric_with(&Protocol::new(&ops, cfg)?)
}

pub fn sensitivity_antisymmetric_with(protocol: &Protocol<'_>) -> Result<SensitivityReport> {
    let (_, var) = protocol.signal(0.0)?;
    let slope = protocol.slope(0.0);
    SensitivityReport::from_moments(protocol.config().n_particles, var, slope, 0.0, false)
}

/// Settings of the working-point search for symmetric signals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflectionSearch {
    pub phi_max: f64,
    pub scan_points: usize,
}

impl Default for InflectionSearch {
    fn default() -> Self {
        Self { phi_max: PI, scan_points: DEFAULT_SCAN_POINTS }
    }
}

/// Point of steepest slope `φ* ∈ (0, φ_max]` of the mean signal.
pub fn find_inflection_point(cfg: &ProtocolConfig, search: InflectionSearch) -> Result<f64> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    let series = Protocol::new(&ops, cfg)?.series();
    inflection_of_series(&series, cfg.n_particles, search)
}

/// Dense scan of `|∂_φ⟨S_m⟩|` followed by golden-section refinement of every
/// grid maximum close to the best one. Ties go to the smallest `φ`.
pub fn inflection_of_series(series: &SignalSeries, n_particles: usize, search: InflectionSearch) -> Result<f64> {
    if !(search.phi_max > 0.0) || search.scan_points < 3 {
        return Err(invalid("inflection search needs phi_max > 0 and at least 3 scan points"));
    }
    let h = search.phi_max / search.scan_points as f64;
    let abs_slope = |phi: f64| series.slope(phi).abs();
    // grid[0] is φ = 0, which only serves as a left neighbour.
    let grid: Vec<f64> = (0..=search.scan_points).map(|i| abs_slope(i as f64 * h)).collect();
    let best_grid = grid[1..].iter().cloned().fold(0.0, f64::max);
    if !(best_grid > SLOPE_FLOOR * n_particles as f64) {
        return Err(Error::NoInflection);
    }
    let last = search.scan_points;
    let mut best: Option<(f64, f64)> = None;
    for i in 1..=last {
        let right = if i < last { grid[i + 1] } else { f64::NEG_INFINITY };
        let is_peak = grid[i] >= grid[i - 1] && grid[i] >= right;
        if !is_peak || grid[i] < (1.0 - CANDIDATE_BAND) * best_grid {
            continue;
        }
        let lo = (i - 1) as f64 * h;
        let hi = ((i + 1).min(last)) as f64 * h;
        let (phi, val) = golden_max(&abs_slope, lo.max(f64::MIN_POSITIVE), hi);
        let (phi, val) = polish_inflection(series, phi, val, lo, hi);
        let (phi, val) = if grid[i] > val { (i as f64 * h, grid[i]) } else { (phi, val) };
        best = match best {
            None => Some((phi, val)),
            Some((bp, bv)) => {
                let tie = (val - bv).abs() <= TIE_TOL * bv.max(val);
                if (tie && phi < bp) || (!tie && val > bv) {
                    Some((phi, val))
                } else {
                    Some((bp, bv))
                }
            }
        };
    }
    best.map(|(phi, _)| phi).ok_or(Error::NoInflection)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Newton steps on `f''(φ) = 0`; the bracket search alone resolves the flat
/// maximum of `|f'|` only to about `√ε`.
fn polish_inflection(series: &SignalSeries, phi: f64, val: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (mut best_phi, mut best_val) = (phi, val);
    let mut x = phi;
    for _ in 0..8 {
        let f2 = series.mean_derivative(x, 2);
        let f3 = series.mean_derivative(x, 3);
        if f3 == 0.0 {
            break;
        }
        let next = x - f2 / f3;
        if !(next > lo && next <= hi) {
            break;
        }
        let v = series.slope(next).abs();
        if v + 1e-14 * v.abs() < best_val {
            break;
        }
        if v >= best_val {
            best_phi = next;
            best_val = v;
        }
        if (next - x).abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
        x = next;
    }
    (best_phi, best_val)
}

/// Two-point sensitivity at the inflection point `φ*`. With `include_half_factor`
/// the variance ratio is halved, as for the combined estimate of both shots.
pub fn sensitivity_symmetric(cfg: &ProtocolConfig, include_half_factor: bool) -> Result<SensitivityReport> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    sensitivity_symmetric_with(&Protocol::new(&ops, cfg)?, include_half_factor)
}

pub fn sensitivity_symmetric_with(protocol: &Protocol<'_>, include_half_factor: bool) -> Result<SensitivityReport> {
    let n = protocol.config().n_particles;
    let phi_star = inflection_of_series(&protocol.series(), n, InflectionSearch::default())?;
    let (_, var) = protocol.signal(phi_star)?;
    let slope = protocol.slope(phi_star);
    SensitivityReport::from_moments(n, var, slope, phi_star, include_half_factor)
}

/// Dispatches on the config's declared symmetry class.
pub fn sensitivity(cfg: &ProtocolConfig, include_half_factor: bool) -> Result<SensitivityReport> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    let protocol = Protocol::new(&ops, cfg)?;
    match cfg.symmetry_class {
        SymmetryClass::AntiSymmetric => sensitivity_antisymmetric_with(&protocol),
        SymmetryClass::Symmetric => sensitivity_symmetric_with(&protocol, include_half_factor),
        SymmetryClass::Unclassified => Err(invalid("sensitivity requires an anti_symmetric or symmetric config")),
    }
}

/// Fixed linear phase estimator calibrated at the working point.
///
/// Anti-symmetric: `φ̂ = m / s(0)` from one shot at `φ`.
/// Symmetric: `φ̂ = (m₊ − m₋) / (2 s(φ*))` from shots at `φ ± φ*`.
pub struct LinearEstimator<'a> {
    protocol: Protocol<'a>,
    two_point: bool,
    working_point: f64,
    slope: f64,
}

impl<'a> LinearEstimator<'a> {
    pub fn new(protocol: Protocol<'a>) -> Result<Self> {
        let n = protocol.config().n_particles;
        let (two_point, working_point) = match protocol.config().symmetry_class {
            SymmetryClass::AntiSymmetric => (false, 0.0),
            SymmetryClass::Symmetric => {
                (true, inflection_of_series(&protocol.series(), n, InflectionSearch::default())?)
            }
            SymmetryClass::Unclassified => {
                return Err(invalid("estimator requires an anti_symmetric or symmetric config"))
            }
        };
        let slope = protocol.slope(working_point);
        if !(slope.abs() > SLOPE_FLOOR * n as f64) {
            return Err(Error::DegenerateWorkingPoint { slope });
        }
        Ok(Self { protocol, two_point, working_point, slope })
    }

    pub fn is_two_point(&self) -> bool {
        self.two_point
    }

    pub fn working_point(&self) -> f64 {
        self.working_point
    }

    pub fn calibration_slope(&self) -> f64 {
        self.slope
    }

    /// `Σ (φ̂ − φ)² p(outcomes | φ)` by explicit summation over outcomes.
    pub fn mse(&self, phi: f64) -> f64 {
        if self.two_point {
            let plus = self.protocol.outcome_distribution(phi + self.working_point);
            let minus = self.protocol.outcome_distribution(phi - self.working_point);
            let scale = 1.0 / (2.0 * self.slope);
            let mut acc = 0.0;
            for &(mp, pp) in &plus {
                for &(mm, pm) in &minus {
                    let err = (mp - mm) * scale - phi;
                    acc += err * err * pp * pm;
                }
            }
            acc
        } else {
            self.protocol
                .outcome_distribution(phi)
                .iter()
                .map(|&(m, p)| {
                    let err = m / self.slope - phi;
                    err * err * p
                })
                .sum()
        }
    }

    /// First and second moments `(E[φ̂], E[φ̂²])` of the estimator at `φ`.
    pub fn estimate_moments(&self, phi: f64) -> Result<(f64, f64)> {
        if self.two_point {
            let (mp, vp) = self.protocol.signal(phi + self.working_point)?;
            let (mm, vm) = self.protocol.signal(phi - self.working_point)?;
            let s2 = 2.0 * self.slope;
            let mean = (mp - mm) / s2;
            Ok((mean, (vp + vm) / (s2 * s2) + mean * mean))
        } else {
            let (m, v) = self.protocol.signal(phi)?;
            let mean = m / self.slope;
            Ok((mean, (v + m * m) / (self.slope * self.slope)))
        }
    }
}

/// Local mean squared error `ε_M(φ)` of the fixed linear estimator.
pub fn mse_local(cfg: &ProtocolConfig, phi: f64) -> Result<f64> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    Ok(LinearEstimator::new(Protocol::new(&ops, cfg)?)?.mse(phi))
}

/// Quantum Fisher information of a pure state for rotations about the best
/// axis: `4 λ_max(Γ)` with `Γ` the symmetrized spin covariance matrix.
pub fn qfi_of_state(ops: &SpinOperators, state: &StateVector) -> Result<QfiReport> {
    crate::dicke::check_dim(ops.dim(), state.dim())?;
    let psi = state.amplitudes();
    let axes = [UnitVector3::X, UnitVector3::Y, UnitVector3::Z];
    let images: Vec<CVector> = axes.iter().map(|a| ops.apply_component(a, psi)).collect();
    let means: Vec<f64> = images.iter().map(|v| psi.dotc(v).re).collect();
    let gamma = Matrix3::from_fn(|i, j| images[i].dotc(&images[j]).re - means[i] * means[j]);
    let eig = SymmetricEigen::new(gamma);
    let (imax, lmax) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    let mut v: Vector3<f64> = eig.eigenvectors.column(imax).into();
    let dominant = v.iter().cloned().fold(0.0, |a: f64, c| if c.abs() > a.abs() { c } else { a });
    if dominant < 0.0 {
        v = -v;
    }
    let fisher_information = 4.0 * lmax.max(0.0);
    Ok(QfiReport {
        fisher_information,
        optimal_axis: UnitVector3::normalize(v[0], v[1], v[2])?,
        crb_delta_phi: 1.0 / fisher_information.sqrt(),
    })
}

/// QFI of `T_z(μ1)|N/2⟩_x`, maximized over rotation axes.
pub fn qfi_twisted_input(n_particles: usize, mu1: f64) -> Result<QfiReport> {
    let ops = SpinOperators::new(n_particles)?;
    qfi_twisted_input_with(&ops, mu1)
}

pub fn qfi_twisted_input_with(ops: &SpinOperators, mu1: f64) -> Result<QfiReport> {
    if !mu1.is_finite() {
        return Err(invalid("mu1 must be finite"));
    }
    let z = ops.axis_basis(&UnitVector3::Z);
    let psi = z.twist(mu1).apply(&css_x(ops.n_particles())?)?;
    qfi_of_state(ops, &psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distr::{Distribution, Uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(
        n: usize,
        mu1: f64,
        mu2: f64,
        nax: UnitVector3,
        kax: UnitVector3,
        max: UnitVector3,
        class: SymmetryClass,
    ) -> ProtocolConfig {
        ProtocolConfig::new(n, mu1, mu2, nax, kax, max, class).unwrap()
    }

    fn ramsey(n: usize) -> ProtocolConfig {
        use UnitVector3 as U;
        cfg(n, 0.0, 0.0, U::Z, U::Z, U::Y, SymmetryClass::AntiSymmetric)
    }

    fn ghz(n: usize) -> ProtocolConfig {
        use UnitVector3 as U;
        cfg(n, PI, PI, U::X.negate(), U::Z, U::X.negate(), SymmetryClass::Symmetric)
    }

    #[test]
    fn standard_quantum_limit() {
        let r = sensitivity_antisymmetric(&ramsey(32)).unwrap();
        assert!((r.delta_phi - 1.0 / 32f64.sqrt()).abs() < 1e-12);
        assert!((r.xi_squared - 1.0).abs() < 1e-12);
        let r4 = sensitivity_antisymmetric(&ramsey(4)).unwrap();
        assert!((r4.delta_phi - 0.5).abs() < 1e-12);
        assert_eq!(r4.inverse_delta_phi, 1.0 / r4.delta_phi);
    }

    #[test]
    fn davis_echo_beats_sql() {
        use UnitVector3 as U;
        let c = cfg(32, 0.2, -0.2, U::Y, U::Z, U::Y, SymmetryClass::AntiSymmetric);
        let r = sensitivity_antisymmetric(&c).unwrap();
        assert!(r.delta_phi < 1.0 / 32f64.sqrt(), "{}", r.delta_phi);
    }

    #[test]
    fn zero_slope_is_degenerate() {
        let e = sensitivity_antisymmetric(&ghz(8)).unwrap_err();
        assert!(matches!(e, Error::DegenerateWorkingPoint { .. }));
    }

    #[test]
    fn ghz_inflection_and_heisenberg_limit() {
        let phi = find_inflection_point(&ghz(32), InflectionSearch::default()).unwrap();
        assert!((phi - PI / 64.0).abs() < 1e-8, "{phi}");
        let r = sensitivity_symmetric(&ghz(32), false).unwrap();
        assert!((r.delta_phi - 1.0 / 32.0).abs() < 1e-9);
        let h = sensitivity_symmetric(&ghz(32), true).unwrap();
        assert!((h.delta_phi - r.delta_phi / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_signal_inflection_at_half_pi() {
        use UnitVector3 as U;
        let c = cfg(8, 0.0, 0.0, U::Y, U::Z, U::X, SymmetryClass::Symmetric);
        let phi = find_inflection_point(&c, InflectionSearch::default()).unwrap();
        assert!((phi - PI / 2.0).abs() < 1e-8);
        let r = sensitivity_symmetric(&c, false).unwrap();
        assert!((r.delta_phi - 1.0 / 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn flat_signal_has_no_inflection() {
        use UnitVector3 as U;
        let c = cfg(6, 0.4, 0.9, U::X, U::X, U::X, SymmetryClass::Symmetric);
        assert_eq!(find_inflection_point(&c, InflectionSearch::default()), Err(Error::NoInflection));
    }

    #[test]
    fn mse_matches_closed_forms() {
        let e = mse_local(&ramsey(4), 0.0).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
        let g = ghz(16);
        let r = sensitivity_symmetric(&g, true).unwrap();
        let e = mse_local(&g, 0.0).unwrap();
        assert!((e - r.delta_phi.powi(2)).abs() < 1e-12 * e.max(1.0));
    }

    #[test]
    fn moment_form_matches_summation() {
        use UnitVector3 as U;
        let ops = SpinOperators::new(7).unwrap();
        let c = cfg(7, 0.7, -0.4, U::Y, U::in_yz_plane(0.9), U::Z, SymmetryClass::AntiSymmetric);
        let est = LinearEstimator::new(Protocol::new(&ops, &c).unwrap()).unwrap();
        for phi in [0.0, 0.1, -0.3, 1.2] {
            let (b, a) = est.estimate_moments(phi).unwrap();
            let via = a - 2.0 * phi * b + phi * phi;
            assert!((via - est.mse(phi)).abs() < 1e-10 * (1.0 + via));
        }
    }

    #[test]
    fn monte_carlo_reproduces_mse() {
        use UnitVector3 as U;
        let ops = SpinOperators::new(6).unwrap();
        let c = cfg(6, 0.5, -0.3, U::Y, U::Z, U::Y, SymmetryClass::AntiSymmetric);
        let est = LinearEstimator::new(Protocol::new(&ops, &c).unwrap()).unwrap();
        let phi = 0.15;
        let dist = est.protocol.outcome_distribution(phi);
        let mut cdf = Vec::with_capacity(dist.len());
        let mut acc = 0.0;
        for &(_, p) in &dist {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Uniform::new(0.0, acc).unwrap();
        let samples = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let x = u.sample(&mut rng);
            let idx = cdf.partition_point(|&c| c < x).min(dist.len() - 1);
            let err = dist[idx].0 / est.calibration_slope() - phi;
            let e2 = err * err;
            s1 += e2;
            s2 += e2 * e2;
        }
        let mean = s1 / samples as f64;
        let se = ((s2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        let exact = est.mse(phi);
        assert!((mean - exact).abs() < 5.0 * se, "mc {mean} exact {exact} se {se}");
    }

    #[test]
    fn qfi_endpoints() {
        let q0 = qfi_twisted_input(32, 0.0).unwrap();
        assert!((q0.fisher_information - 32.0).abs() < 1e-9);
        let q1 = qfi_twisted_input(32, PI).unwrap();
        assert!((q1.fisher_information - 1024.0).abs() < 1e-8);
        assert!((q1.crb_delta_phi - 1.0 / 32.0).abs() < 1e-12);
        assert!(q1.optimal_axis.is_along_x(1e-6));
    }

    #[test]
    fn qfi_is_phase_independent() {
        let ops = SpinOperators::new(9).unwrap();
        let mu1 = 0.8;
        let base = qfi_twisted_input_with(&ops, mu1).unwrap();
        let z = ops.axis_basis(&UnitVector3::Z);
        let psi = z.twist(mu1).apply(&css_x(9).unwrap()).unwrap();
        let n = base.optimal_axis;
        let rotated = ops.axis_basis(&n).rotation(0.37).apply(&psi).unwrap();
        let after = qfi_of_state(&ops, &rotated).unwrap();
        let sn = ops.component(&n);
        let v0 = crate::dicke::variance(&psi, &sn).unwrap();
        let v1 = crate::dicke::variance(&rotated, &sn).unwrap();
        assert!((v0 - v1).abs() < 1e-10);
        assert!((4.0 * v0 - base.fisher_information).abs() < 1e-9);
        assert!((after.fisher_information - base.fisher_information).abs() < 1e-9);
    }

    #[test]
    fn sensitivity_respects_cramer_rao() {
        use UnitVector3 as U;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ang = Uniform::new(-PI, PI).unwrap();
        for _ in 0..30 {
            let mu1 = ang.sample(&mut rng).abs();
            let c = cfg(
                10,
                mu1,
                ang.sample(&mut rng),
                U::in_yz_plane(ang.sample(&mut rng)),
                U::in_yz_plane(ang.sample(&mut rng)),
                U::in_yz_plane(ang.sample(&mut rng)),
                SymmetryClass::AntiSymmetric,
            );
            let Ok(r) = sensitivity_antisymmetric(&c) else { continue };
            let fq = qfi_twisted_input(10, mu1).unwrap().fisher_information;
            assert!(r.inverse_delta_phi <= fq.sqrt() + 1e-9);
        }
    }
}
