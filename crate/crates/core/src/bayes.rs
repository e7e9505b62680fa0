//! Dynamic range: prior-averaged mean squared error of the linear
//! estimators and the effective measurement variance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::SpinOperators;
use crate::error::{invalid, Result};
use crate::metrics::LinearEstimator;
use crate::protocol::{Protocol, ProtocolConfig};
use crate::search::fmt_f64;

pub const DEFAULT_NODES: usize = 96;
pub const MIN_NODES: usize = 16;
/// Upper limit for the bandwidth-driven node increase.
pub const MAX_NODES: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Gaussian,
}

/// Zero-centred phase prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Standard deviation `δφ` in radians.
    pub width: f64,
    /// Fisher information of the prior, `1/δφ²` for a Gaussian.
    pub fisher_information: f64,
}

impl PriorSpec {
    pub fn gaussian(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid(format!("prior width must be positive, got {width}")));
        }
        Ok(Self { kind: PriorKind::Gaussian, width, fisher_information: 1.0 / (width * width) })
    }
}

/// Nodes (ascending) and weights of the `n`-point Gauss–Hermite rule for
/// the weight `e^{−x²}`.
///
/// Newton iteration on the orthonormal Hermite recurrence; values are
/// rescaled during the recurrence so that large `n` does not overflow.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("need at least one node"));
    }
    const RESCALE: f64 = 1e150;
    let pim4 = PI.powf(-0.25);
    // Returns (p_n, p_{n−1}, ln scale) with the true values = returned · e^{scale}.
    let eval = |z: f64| {
        let (mut p1, mut p2, mut log_scale) = (pim4, 0.0f64, 0.0f64);
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            if p1.abs() > RESCALE {
                p1 /= RESCALE;
                p2 /= RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        (p1, p2, log_scale)
    };
    let half = n.div_ceil(2);
    let mut roots = Vec::with_capacity(half);
    let mut weights = Vec::with_capacity(half);
    let nf = n as f64;
    let mut z;
    for i in 0..half {
        z = wkb_root_guess(nf, i + 1);
        // Newton on the Hermite function p_n e^{−z²/2}, deflated by the
        // roots already found.
        let mut converged = false;
        for _ in 0..200 {
            let (pn, pn1, _) = eval(z);
            let pp = (2.0 * nf).sqrt() * pn1;
            let deflation: f64 = roots.iter().map(|&r| 1.0 / (z - r) + 1.0 / (z + r)).sum();
            let step = 1.0 / (pp / pn - z - deflation);
            z -= step;
            if step.abs() <= 1e-14 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(crate::Error::InternalConsistency(format!("Gauss-Hermite root {i} of {n} did not converge")));
        }
        let (_, pn1, log_scale) = eval(z);
        let pp = (2.0 * nf).sqrt() * pn1;
        let log_w = 2f64.ln() - 2.0 * (pp.abs().ln() + log_scale);
        roots.push(z);
        weights.push(log_w.exp());
    }
    let mut nodes = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..half {
        nodes[i] = -roots[i];
        w[i] = weights[i];
        nodes[n - 1 - i] = roots[i];
        w[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[half - 1] = 0.0;
    }
    if nodes.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(crate::Error::InternalConsistency(format!("Gauss-Hermite nodes for n={n} not distinct")));
    }
    Ok((nodes, w))
}

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn cached_rule(n: usize) -> Result<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(gauss_hermite(n)?);
    cache.lock().expect("rule cache poisoned").insert(n, rule.clone());
    Ok(rule)
}

/// Semiclassical estimate of the `k`-th largest zero of `H_n`: solves
/// `∫_x^R √(R² − t²) dt = π(k − 1/4)` with `R² = 2n + 1`.
fn wkb_root_guess(n: f64, k: usize) -> f64 {
    let r = (2.0 * n + 1.0).sqrt();
    let area = |x: f64| 0.5 * r * r * (x / r).acos() - 0.5 * x * (r * r - x * x).max(0.0).sqrt();
    let target = PI * (k as f64 - 0.25);
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if area(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gain applied to the linear estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorGain {
    /// Calibrated at the working point only.
    Fixed,
    /// Scalar gain minimizing the prior-averaged error.
    Optimized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesOptions {
    pub nodes: usize,
    /// Raise the node count until the rule resolves the highest harmonic of
    /// the integrand at the given prior width.
    pub auto_raise: bool,
    pub gain: EstimatorGain,
}

impl Default for BayesOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, auto_raise: true, gain: EstimatorGain::Fixed }
    }
}

impl BayesOptions {
    /// Defaults for the effective measurement variance.
    pub fn for_emv() -> Self {
        Self { gain: EstimatorGain::Optimized, ..Self::default() }
    }
}

/// Nodes needed for `∫ e^{−t²} e^{iat} dt` to near machine precision.
pub fn required_nodes(max_frequency: f64, width: f64) -> usize {
    let a = max_frequency * 2f64.sqrt() * width;
    ((a / 1.5).powi(2).ceil() as usize + MIN_NODES).min(MAX_NODES)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    pub eps_b: f64,
    pub gain: f64,
    pub nodes_used: usize,
    /// Shots combined in one estimate: 1 one-point, 2 two-point.
    pub shots_per_estimate: usize,
}

/// `ε_B = ∫ dφ P(φ) ε_M(φ)` with the fixed linear estimator.
pub fn bayes_mse(cfg: &ProtocolConfig, prior: &PriorSpec, quadrature_nodes: usize) -> Result<f64> {
    let opts = BayesOptions { nodes: quadrature_nodes, ..BayesOptions::default() };
    Ok(bayes_mse_with(cfg, prior, &opts)?.eps_b)
}

pub fn bayes_mse_with(cfg: &ProtocolConfig, prior: &PriorSpec, opts: &BayesOptions) -> Result<BayesResult> {
    if opts.nodes < MIN_NODES {
        return Err(invalid(format!("need at least {MIN_NODES} quadrature nodes")));
    }
    let ops = SpinOperators::new(cfg.n_particles)?;
    let est = LinearEstimator::new(Protocol::new(&ops, cfg)?)?;
    let shots = if est.is_two_point() { 2 } else { 1 };
    let nodes_used = if opts.auto_raise {
        let omega = (shots * cfg.n_particles) as f64;
        opts.nodes.max(required_nodes(omega, prior.width))
    } else {
        opts.nodes
    };
    let rule = cached_rule(nodes_used)?;
    let (t, w) = (&rule.0, &rule.1);
    let scale = 2f64.sqrt() * prior.width;
    let norm = 1.0 / PI.sqrt();
    // ε(g) = g² ⟨a⟩ − 2g ⟨φ b⟩ + ⟨φ²⟩ with b = E[φ̂₀], a = E[φ̂₀²].
    let (mut a_avg, mut phib_avg, mut phi2_avg) = (0.0, 0.0, 0.0);
    for (&ti, &wi) in t.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let phi = scale * ti;
        let (b, a) = est.estimate_moments(phi)?;
        let wi = wi * norm;
        a_avg += wi * a;
        phib_avg += wi * phi * b;
        phi2_avg += wi * phi * phi;
    }
    let gain = match opts.gain {
        EstimatorGain::Fixed => 1.0,
        EstimatorGain::Optimized if a_avg > 0.0 => phib_avg / a_avg,
        EstimatorGain::Optimized => 0.0,
    };
    let eps_b = (gain * gain * a_avg - 2.0 * gain * phib_avg + phi2_avg).max(0.0);
    Ok(BayesResult { eps_b, gain, nodes_used, shots_per_estimate: shots })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmvReport {
    pub bayes_mse: f64,
    /// `(Δφ_M)²` per shot; `+∞` when the measurement adds no information.
    pub emv: f64,
    pub emv_sqrt: f64,
    pub informative: bool,
    pub gain: f64,
    pub nodes_used: usize,
    pub shots_per_estimate: usize,
}

/// `(Δφ_M)² = s · (1/ε_B − I)^{-1}` with `s` shots per estimate, using the
/// gain-optimized estimator.
pub fn effective_measurement_variance(
    cfg: &ProtocolConfig,
    prior: &PriorSpec,
    quadrature_nodes: usize,
) -> Result<EmvReport> {
    let opts = BayesOptions { nodes: quadrature_nodes, ..BayesOptions::for_emv() };
    effective_measurement_variance_with(cfg, prior, &opts)
}

pub fn effective_measurement_variance_with(
    cfg: &ProtocolConfig,
    prior: &PriorSpec,
    opts: &BayesOptions,
) -> Result<EmvReport> {
    let r = bayes_mse_with(cfg, prior, opts)?;
    let info = 1.0 / r.eps_b - prior.fisher_information;
    let informative = info > 0.0 && info.is_finite();
    let emv = if informative { r.shots_per_estimate as f64 / info } else { f64::INFINITY };
    Ok(EmvReport {
        bayes_mse: r.eps_b,
        emv,
        emv_sqrt: emv.sqrt(),
        informative,
        gain: r.gain,
        nodes_used: r.nodes_used,
        shots_per_estimate: r.shots_per_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmvRow {
    pub protocol_name: String,
    pub delta_phi_prior: f64,
    pub eps_b: f64,
    pub emv: f64,
    pub emv_sqrt: f64,
    pub hl_reference: f64,
    pub informative: bool,
}

pub const EMV_HEADER: &str = "protocol_name,delta_phi_prior,eps_b,emv,emv_sqrt,hl_reference";

pub fn emv_to_csv(rows: &[EmvRow]) -> String {
    let mut s = String::from(EMV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.protocol_name,
            fmt_f64(r.delta_phi_prior),
            fmt_f64(r.eps_b),
            fmt_f64(r.emv),
            fmt_f64(r.emv_sqrt),
            fmt_f64(r.hl_reference)
        );
    }
    s
}

/// Every `(config, width)` pair, config-major, with the `1/N²` reference.
pub fn emv_curve(
    cfgs: &[(String, ProtocolConfig)],
    prior_widths: &[f64],
    opts: &BayesOptions,
    workers: usize,
) -> Result<Vec<EmvRow>> {
    if workers == 0 {
        return Err(invalid("worker count must be at least 1"));
    }
    let jobs: Vec<(usize, f64)> = (0..cfgs.len()).flat_map(|i| prior_widths.iter().map(move |&w| (i, w))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(i, width)| {
                let (name, cfg) = &cfgs[i];
                let prior = PriorSpec::gaussian(width)?;
                let r = effective_measurement_variance_with(cfg, &prior, opts)?;
                let n = cfg.n_particles as f64;
                Ok(EmvRow {
                    protocol_name: name.clone(),
                    delta_phi_prior: width,
                    eps_b: r.bayes_mse,
                    emv: r.emv,
                    emv_sqrt: r.emv_sqrt,
                    hl_reference: 1.0 / (n * n),
                    informative: r.informative,
                })
            })
            .collect()
    })
}
