//! Global optimization over twist axes (and the imprint axis for symmetric
//! signals), landscape sweeps, sensitivity-vs-`μ1` curves and particle-number
//! stability.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axes::{optimize_axes_with, svd_optimize_axes, MomentBuilder, Subspace};
use crate::de::{self, Bound, DeSettings};
use crate::dicke::{SpinOperators, UnitVector3};
use crate::error::{invalid, Error, Result};
use crate::metrics::{
    qfi_twisted_input_with, sensitivity_antisymmetric_with, sensitivity_symmetric_with, SensitivityReport,
};
use crate::protocol::{Protocol, ProtocolConfig, SymmetryClass};
use crate::symmetry::{classify_fourier, FourierClass, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE};

pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.10;
const RANGE_SLACK: f64 = 1e-12;

/// Family of twist axes a candidate was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistBranch {
    /// `k = (0, cos κ, sin κ)`.
    YzPlane,
    /// `k = x`.
    AlongX,
    /// `n = m = x`, `k` in the y-z plane, parity checked numerically.
    NoInsight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointOptimum {
    pub sensitivity: SensitivityReport,
    pub config: ProtocolConfig,
    pub branch: TwistBranch,
    pub converged: bool,
}

struct Candidate {
    value: f64,
    mu2: f64,
    n_axis: UnitVector3,
    k_axis: UnitVector3,
    m_axis: UnitVector3,
    branch: TwistBranch,
    converged: bool,
}

fn check_class(symmetry: SymmetryClass) -> Result<()> {
    if symmetry == SymmetryClass::Unclassified {
        return Err(invalid("search requires anti_symmetric or symmetric"));
    }
    Ok(())
}

fn check_mu1(mu1: f64) -> Result<()> {
    if !(-RANGE_SLACK..=PI + RANGE_SLACK).contains(&mu1) {
        return Err(invalid(format!("mu1 = {mu1} outside [0, pi]")));
    }
    Ok(())
}

fn check_mu2(mu2: f64) -> Result<()> {
    if !(mu2.abs() <= PI + RANGE_SLACK) {
        return Err(invalid(format!("mu2 = {mu2} outside [-pi, pi]")));
    }
    Ok(())
}

/// Best sensitivity at fixed `(μ1, μ2)` over the admissible axes.
///
/// Anti-symmetric: `n`, `m` from the SVD in the y-z plane; `k = x`, or
/// `k = (0, cos κ, sin κ)` with `κ` found by differential evolution.
/// Symmetric: `m = x`, `n = (0, cos α, sin α)`, `k` as above, plus the
/// `n = m = x` family admitted only when the signal is verified symmetric.
pub fn optimize_point(
    n_particles: usize,
    mu1: f64,
    mu2: f64,
    symmetry: SymmetryClass,
    de: &DeSettings,
) -> Result<PointOptimum> {
    let ops = SpinOperators::new(n_particles)?;
    optimize_point_with(&ops, mu1, mu2, symmetry, de)
}

pub fn optimize_point_with(
    ops: &SpinOperators,
    mu1: f64,
    mu2: f64,
    symmetry: SymmetryClass,
    de: &DeSettings,
) -> Result<PointOptimum> {
    check_mu1(mu1)?;
    check_mu2(mu2)?;
    search(ops, mu1, Some(mu2), symmetry, None, de)
}

/// As [`optimize_point_with`] restricted to one twist-axis family.
pub fn optimize_point_in_branch(
    ops: &SpinOperators,
    mu1: f64,
    mu2: f64,
    symmetry: SymmetryClass,
    branch: TwistBranch,
    de: &DeSettings,
) -> Result<PointOptimum> {
    check_mu2(mu2)?;
    search(ops, mu1, Some(mu2), symmetry, Some(branch), de)
}

fn search(
    ops: &SpinOperators,
    mu1: f64,
    mu2: Option<f64>,
    symmetry: SymmetryClass,
    branch: Option<TwistBranch>,
    de: &DeSettings,
) -> Result<PointOptimum> {
    check_class(symmetry)?;
    de.validate()?;
    let builder = MomentBuilder::new(ops, mu1)?;
    let mut candidates = match symmetry {
        SymmetryClass::AntiSymmetric => anti_candidates(&builder, mu1, mu2, de)?,
        _ => symmetric_candidates(ops, mu1, mu2, de)?,
    };
    if let Some(b) = branch {
        candidates.retain(|c| c.branch == b);
    }
    // Stable sort keeps branch order on exact ties.
    candidates.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut last_err = None;
    for c in candidates {
        match finalize(ops, &builder, mu1, symmetry, &c) {
            Ok(Some(best)) => return Ok(best),
            Ok(None) => continue,
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::DegenerateWorkingPoint { slope: 0.0 }))
}

fn finalize(
    ops: &SpinOperators,
    builder: &MomentBuilder<'_>,
    mu1: f64,
    symmetry: SymmetryClass,
    c: &Candidate,
) -> Result<Option<PointOptimum>> {
    let (config, sensitivity) = if symmetry == SymmetryClass::AntiSymmetric {
        let (_, cfg) = optimize_axes_with(builder, mu1, c.mu2, &c.k_axis)?;
        let sens = sensitivity_antisymmetric_with(&Protocol::new(ops, &cfg)?)?;
        (cfg, sens)
    } else {
        let cfg =
            ProtocolConfig::new(ops.n_particles(), mu1, c.mu2, c.n_axis, c.k_axis, c.m_axis, SymmetryClass::Symmetric)?;
        if c.branch == TwistBranch::NoInsight {
            let report = classify_fourier(&cfg, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE)?;
            if report.classification != FourierClass::Symmetric {
                return Ok(None);
            }
        }
        let sens = sensitivity_symmetric_with(&Protocol::new(ops, &cfg)?, false)?;
        (cfg, sens)
    };
    Ok(Some(PointOptimum { sensitivity, config, branch: c.branch, converged: c.converged }))
}

/// Splits DE parameters into `μ2` (leading, when free) and the geometry angles.
fn split(params: &[f64], mu2: Option<f64>) -> (f64, &[f64]) {
    match mu2 {
        Some(v) => (v, params),
        None => (params[0], &params[1..]),
    }
}

fn with_mu2(mu2: Option<f64>, geometry: Vec<Bound>) -> Vec<Bound> {
    match mu2 {
        Some(_) => geometry,
        None => std::iter::once(Bound::new(-PI, PI)).chain(geometry).collect(),
    }
}

fn anchors(mu1: f64, mu2: Option<f64>, geometry: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match mu2 {
        Some(_) => geometry.to_vec(),
        None => {
            let mu2s = [0.0, PI, -PI, -mu1, -0.5 * mu1];
            mu2s.iter()
                .flat_map(|&m| geometry.iter().map(move |g| std::iter::once(m).chain(g.iter().cloned()).collect()))
                .collect()
        }
    }
}

fn anti_candidates(builder: &MomentBuilder<'_>, mu1: f64, mu2: Option<f64>, de: &DeSettings) -> Result<Vec<Candidate>> {
    let sigma = |mu2: f64, k: &UnitVector3| {
        svd_optimize_axes(&builder.build(mu2, k), Subspace::YzPlane).map(|o| o.sigma_max).unwrap_or(0.0)
    };
    let mut out = Vec::with_capacity(2);

    let bounds = with_mu2(mu2, vec![Bound::periodic(0.0, PI)]);
    let seeds = anchors(mu1, mu2, &[vec![FRAC_PI_2], vec![0.0]]);
    let r = de::minimize(
        |p| {
            let (m2, g) = split(p, mu2);
            -sigma(m2, &UnitVector3::in_yz_plane(g[0]))
        },
        &bounds,
        &seeds,
        de,
    )?;
    let (m2, g) = split(&r.x, mu2);
    out.push(Candidate {
        value: -r.value,
        mu2: m2,
        n_axis: UnitVector3::Y,
        k_axis: UnitVector3::in_yz_plane(g[0]),
        m_axis: UnitVector3::Y,
        branch: TwistBranch::YzPlane,
        converged: r.converged,
    });

    let (value, m2, converged) = match mu2 {
        Some(m2) => (sigma(m2, &UnitVector3::X), m2, true),
        None => {
            let seeds: Vec<Vec<f64>> = [0.0, PI, -PI, -mu1].iter().map(|&m| vec![m]).collect();
            let r = de::minimize(|p| -sigma(p[0], &UnitVector3::X), &[Bound::new(-PI, PI)], &seeds, de)?;
            (-r.value, r.x[0], r.converged)
        }
    };
    out.push(Candidate {
        value,
        mu2: m2,
        n_axis: UnitVector3::Y,
        k_axis: UnitVector3::X,
        m_axis: UnitVector3::Y,
        branch: TwistBranch::AlongX,
        converged,
    });
    Ok(out)
}

fn symmetric_value(ops: &SpinOperators, mu1: f64, mu2: f64, n: UnitVector3, k: UnitVector3, m: UnitVector3) -> f64 {
    let Ok(cfg) = ProtocolConfig::new(ops.n_particles(), mu1, mu2, n, k, m, SymmetryClass::Symmetric) else {
        return 0.0;
    };
    let Ok(p) = Protocol::new(ops, &cfg) else { return 0.0 };
    sensitivity_symmetric_with(&p, false).map(|s| s.inverse_delta_phi).unwrap_or(0.0)
}

/// As [`symmetric_value`] for `n = m = x`, returning 0 unless the harmonic
/// expansion of the signal has no sine part.
fn no_insight_value(ops: &SpinOperators, mu1: f64, mu2: f64, k: UnitVector3) -> f64 {
    let x = UnitVector3::X;
    let Ok(cfg) = ProtocolConfig::new(ops.n_particles(), mu1, mu2, x, k, x, SymmetryClass::Symmetric) else {
        return 0.0;
    };
    let Ok(p) = Protocol::new(ops, &cfg) else { return 0.0 };
    let (cos_norm, sin_norm) = p.series().parity_norms();
    if sin_norm >= DEFAULT_FOURIER_TOLERANCE * (cos_norm + sin_norm + 1e-30) {
        return 0.0;
    }
    sensitivity_symmetric_with(&p, false).map(|s| s.inverse_delta_phi).unwrap_or(0.0)
}

fn symmetric_candidates(ops: &SpinOperators, mu1: f64, mu2: Option<f64>, de: &DeSettings) -> Result<Vec<Candidate>> {
    let x = UnitVector3::X;
    let yz = UnitVector3::in_yz_plane;
    let mut out = Vec::with_capacity(3);

    let bounds = with_mu2(mu2, vec![Bound::periodic(0.0, PI), Bound::periodic(0.0, PI)]);
    let seeds = anchors(mu1, mu2, &[vec![0.0, FRAC_PI_2], vec![FRAC_PI_2, FRAC_PI_2]]);
    let r = de::minimize(
        |p| {
            let (m2, g) = split(p, mu2);
            -symmetric_value(ops, mu1, m2, yz(g[0]), yz(g[1]), x)
        },
        &bounds,
        &seeds,
        de,
    )?;
    let (m2, g) = split(&r.x, mu2);
    out.push(Candidate {
        value: -r.value,
        mu2: m2,
        n_axis: yz(g[0]),
        k_axis: yz(g[1]),
        m_axis: x,
        branch: TwistBranch::YzPlane,
        converged: r.converged,
    });

    let bounds = with_mu2(mu2, vec![Bound::periodic(0.0, PI)]);
    let seeds = anchors(mu1, mu2, &[vec![0.0], vec![FRAC_PI_2]]);
    let r = de::minimize(
        |p| {
            let (m2, g) = split(p, mu2);
            -symmetric_value(ops, mu1, m2, yz(g[0]), x, x)
        },
        &bounds,
        &seeds,
        de,
    )?;
    let (m2, g) = split(&r.x, mu2);
    out.push(Candidate {
        value: -r.value,
        mu2: m2,
        n_axis: yz(g[0]),
        k_axis: x,
        m_axis: x,
        branch: TwistBranch::AlongX,
        converged: r.converged,
    });

    let seeds = anchors(mu1, mu2, &[vec![FRAC_PI_2], vec![0.0]]);
    let r = de::minimize(
        |p| {
            let (m2, g) = split(p, mu2);
            -no_insight_value(ops, mu1, m2, yz(g[0]))
        },
        &bounds,
        &seeds,
        de,
    )?;
    let (m2, g) = split(&r.x, mu2);
    out.push(Candidate {
        value: -r.value,
        mu2: m2,
        n_axis: x,
        k_axis: yz(g[0]),
        m_axis: x,
        branch: TwistBranch::NoInsight,
        converged: r.converged,
    });
    Ok(out)
}

/// SplitMix64 finalizer, used to decorrelate per-cell seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of grid cell `(i, j)`.
pub fn cell_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ splitmix64(((i as u64) << 32) | (j as u64 & 0xFFFF_FFFF))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCell {
    pub mu1: f64,
    pub mu2: f64,
    pub optimum: Option<PointOptimum>,
    pub error: Option<String>,
    /// No axis choice gives a slope above the numerical floor, so the cell's
    /// sensitivity is zero rather than unknown.
    pub degenerate: bool,
}

impl LandscapeCell {
    /// `Δφ⁻¹`, or 0 for a failed or degenerate cell.
    pub fn inverse_delta_phi(&self) -> f64 {
        self.optimum.as_ref().map_or(0.0, |o| o.sensitivity.inverse_delta_phi)
    }

    pub fn converged(&self) -> bool {
        self.degenerate || self.optimum.as_ref().is_some_and(|o| o.converged)
    }

    pub fn failed(&self) -> bool {
        self.optimum.is_none() && !self.degenerate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub n_particles: usize,
    pub symmetry: SymmetryClass,
    pub mu1_values: Vec<f64>,
    pub mu2_values: Vec<f64>,
    /// Row-major in `μ1`: cell `(i, j)` is at `i · |μ2| + j`.
    pub cells: Vec<LandscapeCell>,
}

pub const LANDSCAPE_HEADER: &str = "mu1,mu2,inv_dphi,xi2,phi_star,nx,ny,nz,kx,ky,kz,mx,my,mz,converged";

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        // Adding zero maps −0 to +0.
        format!("{:.16e}", v + 0.0)
    }
}

impl LandscapeGrid {
    pub fn cell(&self, i: usize, j: usize) -> &LandscapeCell {
        &self.cells[i * self.mu2_values.len() + j]
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }

    pub fn degenerate(&self) -> usize {
        self.cells.iter().filter(|c| c.degenerate).count()
    }

    pub fn non_converged(&self) -> usize {
        self.cells.iter().filter(|c| !c.converged()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 330);
        s.push_str(LANDSCAPE_HEADER);
        s.push('\n');
        for c in &self.cells {
            let mut fields = vec![fmt_f64(c.mu1), fmt_f64(c.mu2)];
            match &c.optimum {
                Some(o) => {
                    fields.push(fmt_f64(o.sensitivity.inverse_delta_phi));
                    fields.push(fmt_f64(o.sensitivity.xi_squared));
                    fields.push(fmt_f64(o.sensitivity.working_point));
                    for axis in [o.config.n_axis, o.config.k_axis, o.config.m_axis] {
                        fields.extend(axis.to_array().iter().map(|&v| fmt_f64(v)));
                    }
                }
                None => {
                    fields.push(fmt_f64(0.0));
                    fields.extend(std::iter::repeat_n(fmt_f64(f64::NAN), 11));
                }
            }
            fields.push(c.converged().to_string());
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(invalid("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))
}

/// Optimizes every `(μ1, μ2)` cell. Cells are independent and seeded from
/// their indices, so the result does not depend on `workers`.
pub fn sweep_landscape(
    n_particles: usize,
    mu1_grid: &[f64],
    mu2_grid: &[f64],
    symmetry: SymmetryClass,
    de: &DeSettings,
    workers: usize,
) -> Result<LandscapeGrid> {
    if mu1_grid.is_empty() || mu2_grid.is_empty() {
        return Err(invalid("landscape grids must be non-empty"));
    }
    for g in [mu1_grid, mu2_grid] {
        if g.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("landscape grids must be sorted ascending"));
        }
    }
    check_class(symmetry)?;
    de.validate()?;
    let ops = SpinOperators::new(n_particles)?;
    let cols = mu2_grid.len();
    let cells = pool(workers)?.install(|| {
        (0..mu1_grid.len() * cols)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / cols, idx % cols);
                let (mu1, mu2) = (mu1_grid[i], mu2_grid[j]);
                let settings = de.with_seed(cell_seed(de.rng_seed, i, j));
                match optimize_point_with(&ops, mu1, mu2, symmetry, &settings) {
                    Ok(o) => LandscapeCell { mu1, mu2, optimum: Some(o), error: None, degenerate: false },
                    Err(e) => LandscapeCell {
                        mu1,
                        mu2,
                        optimum: None,
                        degenerate: matches!(e, Error::DegenerateWorkingPoint { .. }),
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    Ok(LandscapeGrid { n_particles, symmetry, mu1_values: mu1_grid.to_vec(), mu2_values: mu2_grid.to_vec(), cells })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu1: f64,
    pub inverse_delta_phi: f64,
    pub sqrt_qfi: f64,
    pub optimum: Option<PointOptimum>,
    pub error: Option<String>,
}

pub const CURVE_HEADER: &str = "mu1,mu2,inv_dphi,sqrt_qfi,ratio,phi_star,converged";

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for p in points {
        let (mu2, phi_star, conv) = p
            .optimum
            .as_ref()
            .map_or((f64::NAN, f64::NAN, false), |o| (o.config.mu2, o.sensitivity.working_point, o.converged));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.mu1),
            fmt_f64(mu2),
            fmt_f64(p.inverse_delta_phi),
            fmt_f64(p.sqrt_qfi),
            fmt_f64(p.inverse_delta_phi / p.sqrt_qfi),
            fmt_f64(phi_star),
            conv
        );
    }
    s
}

/// For each `μ1`, the best sensitivity over `μ2 ∈ [−π, π]` and all axes,
/// alongside `√F_Q(N, μ1)`.
pub fn curve_vs_mu1(
    n_particles: usize,
    mu1_grid: &[f64],
    symmetry: SymmetryClass,
    de: &DeSettings,
    workers: usize,
) -> Result<Vec<CurvePoint>> {
    check_class(symmetry)?;
    de.validate()?;
    for &mu1 in mu1_grid {
        check_mu1(mu1)?;
    }
    let ops = SpinOperators::new(n_particles)?;
    pool(workers)?.install(|| {
        mu1_grid
            .par_iter()
            .enumerate()
            .map(|(i, &mu1)| {
                let sqrt_qfi = qfi_twisted_input_with(&ops, mu1)?.fisher_information.sqrt();
                let settings = de.with_seed(cell_seed(de.rng_seed, i, usize::MAX));
                Ok(match search(&ops, mu1, None, symmetry, None, &settings) {
                    Ok(o) => CurvePoint {
                        mu1,
                        inverse_delta_phi: o.sensitivity.inverse_delta_phi,
                        sqrt_qfi,
                        optimum: Some(o),
                        error: None,
                    },
                    Err(e) => {
                        CurvePoint { mu1, inverse_delta_phi: 0.0, sqrt_qfi, optimum: None, error: Some(e.to_string()) }
                    }
                })
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub base_n: usize,
    /// `Δφ⁻¹` at `N − 1`, `N`, `N + 1`; 0 where the sensitivity is degenerate.
    pub inverse_delta_phi: [f64; 3],
    pub relative_degradation: f64,
    pub threshold: f64,
    pub stable: bool,
}

fn class_sensitivity(cfg: &ProtocolConfig) -> Result<SensitivityReport> {
    let ops = SpinOperators::new(cfg.n_particles)?;
    let p = Protocol::new(&ops, cfg)?;
    match cfg.symmetry_class {
        SymmetryClass::AntiSymmetric => sensitivity_antisymmetric_with(&p),
        SymmetryClass::Symmetric => sensitivity_symmetric_with(&p, false),
        SymmetryClass::Unclassified => Err(invalid("stability requires a classified config")),
    }
}

pub fn stability_under_n_fluctuation(cfg: &ProtocolConfig) -> Result<StabilityReport> {
    stability_with_threshold(cfg, DEFAULT_STABILITY_THRESHOLD)
}

/// Re-evaluates the sensitivity at `N ± 1` with all other parameters fixed;
/// stable when `1 − min(neighbours)/base < threshold`.
pub fn stability_with_threshold(cfg: &ProtocolConfig, threshold: f64) -> Result<StabilityReport> {
    if cfg.n_particles < 2 {
        return Err(invalid("stability needs N >= 2"));
    }
    check_class(cfg.symmetry_class)?;
    let base = class_sensitivity(cfg)?.inverse_delta_phi;
    let neighbour = |n: usize| match class_sensitivity(&cfg.with_particles(n)) {
        Ok(r) => Ok(r.inverse_delta_phi),
        Err(Error::DegenerateWorkingPoint { .. } | Error::NoInflection) => Ok(0.0),
        Err(e) => Err(e),
    };
    let minus = neighbour(cfg.n_particles - 1)?;
    let plus = neighbour(cfg.n_particles + 1)?;
    let relative_degradation = 1.0 - minus.min(plus) / base;
    Ok(StabilityReport {
        base_n: cfg.n_particles,
        inverse_delta_phi: [minus, base, plus],
        relative_degradation,
        threshold,
        stable: relative_degradation < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sql_point() {
        let o = optimize_point(32, 0.0, 0.0, SymmetryClass::AntiSymmetric, &DeSettings::default()).unwrap();
        assert!((o.sensitivity.inverse_delta_phi - 32f64.sqrt()).abs() < 1e-6 * 32f64.sqrt());
    }

    #[test]
    fn de_over_k_dominates_z() {
        let ops = SpinOperators::new(10).unwrap();
        for (mu1, mu2) in [(0.3, -0.2), (0.8, 1.4), (1.5, -2.5)] {
            let o = optimize_point_with(&ops, mu1, mu2, SymmetryClass::AntiSymmetric, &DeSettings::default()).unwrap();
            let b = MomentBuilder::new(&ops, mu1).unwrap();
            let z = svd_optimize_axes(&b.build(mu2, &UnitVector3::Z), Subspace::YzPlane).unwrap();
            assert!(o.sensitivity.inverse_delta_phi >= z.sigma_max * (1.0 - 1e-10));
            let again = sensitivity_antisymmetric_with(&Protocol::new(&ops, &o.config).unwrap()).unwrap();
            assert!((again.inverse_delta_phi - o.sensitivity.inverse_delta_phi).abs() < 1e-10);
        }
    }

    #[test]
    fn small_landscape_is_worker_independent() {
        let g = [-0.4, 0.0, 0.4];
        let a =
            sweep_landscape(6, &[0.0, 0.2, 0.4], &g, SymmetryClass::AntiSymmetric, &DeSettings::default(), 1).unwrap();
        let b =
            sweep_landscape(6, &[0.0, 0.2, 0.4], &g, SymmetryClass::AntiSymmetric, &DeSettings::default(), 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!((a.cell(0, 1).inverse_delta_phi() - 6f64.sqrt()).abs() < 1e-9);
        assert_eq!(a.to_csv().lines().count(), 10);
    }

    #[test]
    fn rejects_bad_grids() {
        let s = DeSettings::default();
        assert!(sweep_landscape(4, &[], &[0.0], SymmetryClass::AntiSymmetric, &s, 1).is_err());
        assert!(sweep_landscape(4, &[0.2, 0.1], &[0.0], SymmetryClass::AntiSymmetric, &s, 1).is_err());
        assert!(sweep_landscape(4, &[0.0], &[0.0], SymmetryClass::Unclassified, &s, 1).is_err());
        assert!(sweep_landscape(4, &[0.0], &[0.0], SymmetryClass::AntiSymmetric, &s, 0).is_err());
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(42, 0, 1), cell_seed(42, 1, 0));
        assert_eq!(cell_seed(42, 3, 4), cell_seed(42, 3, 4));
    }

    #[test]
    fn ramsey_is_stable() {
        let cfg = ProtocolConfig::new(
            32,
            0.0,
            0.0,
            UnitVector3::Z,
            UnitVector3::Z,
            UnitVector3::Y,
            SymmetryClass::AntiSymmetric,
        )
        .unwrap();
        let r = stability_under_n_fluctuation(&cfg).unwrap();
        assert!((r.relative_degradation - (1.0 - (31f64 / 32.0).sqrt())).abs() < 1e-12);
        assert!(r.stable);
    }

    #[test]
    fn single_twist_at_pi_is_degenerate_not_failed() {
        // With μ1 = π and no second twist the mean spin vanishes exactly.
        let g =
            sweep_landscape(8, &[0.0, PI], &[0.0], SymmetryClass::AntiSymmetric, &DeSettings::default(), 1).unwrap();
        assert!(!g.cell(0, 0).degenerate && g.cell(1, 0).degenerate);
        assert_eq!((g.failures(), g.degenerate()), (0, 1));
        assert_eq!(g.cell(1, 0).inverse_delta_phi(), 0.0);
        assert!(g.cell(1, 0).converged());
    }
}
