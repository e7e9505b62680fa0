//! Named protocol families from the literature and highlighted regions of
//! the `μ1`–`μ2` plane.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::axes::{svd_optimize_axes_split, MomentBuilder, Subspace};
use crate::de::{self, Bound, DeSettings};
use crate::dicke::{SpinOperators, UnitVector3};
use crate::error::{Error, Result};
use crate::protocol::{ProtocolConfig, SymmetryClass};
use crate::search::{optimize_point_in_branch, optimize_point_with, TwistBranch};
use crate::symmetry::{classify_fourier, FourierClass, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE};

const MU_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Family,
    Region,
}

/// Admissible directions of one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    Fixed(UnitVector3),
    YzPlane,
    Sphere,
    /// Irrelevant because the corresponding twist vanishes.
    Unused,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mu2Rule {
    Fixed(f64),
    NegMu1,
    NegHalfMu1,
    /// `μ2 = ±π`.
    PlusMinusPi,
    Range(f64, f64),
    /// Any value; `default` applies when none is given.
    Near {
        default_to_neg_mu1: bool,
        default: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedSymmetry {
    AntiSymmetric,
    Symmetric,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub kind: EntryKind,
    pub tag: String,
    pub n_axis: AxisSpec,
    pub m_axis: AxisSpec,
    pub k_axis: AxisSpec,
    pub mu1_range: (f64, f64),
    pub mu2_rule: Mu2Rule,
    pub expected_symmetry: ExpectedSymmetry,
    pub provenance: String,
    /// Family this entry is an alternative reading of.
    pub variant_of: Option<String>,
}

/// A built configuration together with the axes chosen by an optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogBuild {
    pub name: String,
    pub config: ProtocolConfig,
    pub optimized_axes: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn entry(
    name: &str,
    kind: EntryKind,
    tag: &str,
    (n_axis, m_axis, k_axis): (AxisSpec, AxisSpec, AxisSpec),
    mu1_range: (f64, f64),
    mu2_rule: Mu2Rule,
    expected_symmetry: ExpectedSymmetry,
    provenance: &str,
) -> CatalogEntry {
    CatalogEntry {
        name: name.into(),
        kind,
        tag: tag.into(),
        n_axis,
        m_axis,
        k_axis,
        mu1_range,
        mu2_rule,
        expected_symmetry,
        provenance: provenance.into(),
        variant_of: None,
    }
}

/// The literature families without variants.
pub fn families() -> Vec<CatalogEntry> {
    list().into_iter().filter(|e| e.kind == EntryKind::Family && e.variant_of.is_none()).collect()
}

pub fn regions() -> Vec<CatalogEntry> {
    list().into_iter().filter(|e| e.kind == EntryKind::Region).collect()
}

/// All families and variants followed by all regions.
pub fn list() -> Vec<CatalogEntry> {
    use AxisSpec::*;
    use EntryKind::*;
    use ExpectedSymmetry::*;
    let x = Fixed(UnitVector3::X);
    let neg_x = Fixed(UnitVector3::X.negate());
    let y = Fixed(UnitVector3::Y);
    let z = Fixed(UnitVector3::Z);
    let full = (0.0, PI);
    let free = Mu2Rule::Range(-PI, PI);
    vec![
        entry(
            "kitagawa",
            Family,
            "μ2=0",
            (Sphere, Sphere, Unused),
            full,
            Mu2Rule::Fixed(0.0),
            Undetermined,
            "Kitagawa & Ueda 1993",
        ),
        entry(
            "leibfried",
            Family,
            "μ1=μ2=π, n=−x",
            (neg_x, neg_x, z),
            (PI, PI),
            Mu2Rule::Fixed(PI),
            Symmetric,
            "Leibfried et al. 2004",
        ),
        CatalogEntry {
            variant_of: Some("leibfried".into()),
            ..entry(
                "leibfried_y",
                Family,
                "μ1=μ2=π, n=y",
                (y, neg_x, z),
                (PI, PI),
                Mu2Rule::Fixed(PI),
                Symmetric,
                "Leibfried et al. 2004",
            )
        },
        entry("davis", Family, "μ2=−μ1", (y, y, z), full, Mu2Rule::NegMu1, AntiSymmetric, "Davis et al. 2016"),
        entry("frowis", Family, "free μ2", (YzPlane, Sphere, YzPlane), full, free, Undetermined, "Froewis et al. 2016"),
        entry(
            "macri",
            Family,
            "μ2∈[0,π]",
            (y, z, z),
            full,
            Mu2Rule::Range(0.0, PI),
            AntiSymmetric,
            "Macri et al. 2016",
        ),
        entry("nolan", Family, "m=x", (YzPlane, x, YzPlane), full, free, Symmetric, "Nolan et al. 2017"),
        entry("schulte_out", Family, "k=z", (Sphere, Sphere, z), full, free, AntiSymmetric, "Schulte et al. 2020"),
        entry("li", Family, "μ2=−μ1, m=x", (y, x, z), full, Mu2Rule::NegMu1, Symmetric, "Li et al. 2022"),
        entry("volkoff", Family, "μ1∈[−π,0]", (y, y, z), (-PI, 0.0), free, AntiSymmetric, "Volkoff & Martin 2022"),
        entry(
            "colombo",
            Family,
            "μ2=−μ1, μ1∈[0,0.6]",
            (y, y, z),
            (0.0, 0.6),
            Mu2Rule::NegMu1,
            AntiSymmetric,
            "Colombo et al. 2022",
        ),
        entry(
            "A1",
            Region,
            "μ2=0",
            (YzPlane, YzPlane, YzPlane),
            full,
            Mu2Rule::Fixed(0.0),
            AntiSymmetric,
            "squeezing only",
        ),
        entry(
            "A2",
            Region,
            "small μ1, μ2≈−μ1",
            (YzPlane, YzPlane, YzPlane),
            full,
            Mu2Rule::Near { default_to_neg_mu1: true, default: 0.0 },
            AntiSymmetric,
            "echo with weak squeezing",
        ),
        entry(
            "A3",
            Region,
            "μ1=−2μ2",
            (YzPlane, YzPlane, YzPlane),
            full,
            Mu2Rule::NegHalfMu1,
            AntiSymmetric,
            "half unsqueezing",
        ),
        entry(
            "A4",
            Region,
            "pseudo-echo (free-form)",
            (YzPlane, YzPlane, YzPlane),
            full,
            free,
            AntiSymmetric,
            "no squeezing inversion",
        ),
        entry(
            "A5",
            Region,
            "μ2=±π",
            (YzPlane, YzPlane, YzPlane),
            full,
            Mu2Rule::PlusMinusPi,
            AntiSymmetric,
            "QFI saturating line",
        ),
        entry("S1", Region, "μ2=0", (YzPlane, x, YzPlane), full, Mu2Rule::Fixed(0.0), Symmetric, "squeezing only"),
        entry("S2", Region, "small μ1", (YzPlane, x, YzPlane), full, free, Symmetric, "weak squeezing"),
        entry("S3", Region, "μ1=−μ2", (YzPlane, x, YzPlane), full, Mu2Rule::NegMu1, Symmetric, "full unsqueezing"),
        entry(
            "S4",
            Region,
            "μ1,μ2≈π",
            (YzPlane, x, YzPlane),
            full,
            Mu2Rule::Near { default_to_neg_mu1: false, default: PI },
            Symmetric,
            "GHZ-like",
        ),
    ]
}

pub fn lookup(name: &str) -> Result<CatalogEntry> {
    list().into_iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownProtocol(name.to_string()))
}

fn violation(name: &str, detail: impl Into<String>) -> Error {
    Error::ConstraintViolation { name: name.to_string(), detail: detail.into() }
}

fn resolve_mu2(e: &CatalogEntry, mu1: f64, mu2: Option<f64>) -> Result<f64> {
    let need = |target: f64, what: &str| match mu2 {
        None => Ok(target),
        Some(v) if (v - target).abs() <= MU_TOL => Ok(target),
        Some(v) => Err(violation(&e.name, format!("requires {what}, got mu2 = {v}"))),
    };
    match e.mu2_rule {
        Mu2Rule::Fixed(v) => need(v, &format!("mu2 = {v}")),
        Mu2Rule::NegMu1 => need(-mu1, "mu2 = -mu1"),
        Mu2Rule::NegHalfMu1 => need(-0.5 * mu1, "mu1 = -2 mu2"),
        Mu2Rule::PlusMinusPi => match mu2 {
            None => Ok(PI),
            Some(v) if (v.abs() - PI).abs() <= MU_TOL => Ok(v.signum() * PI),
            Some(v) => Err(violation(&e.name, format!("requires mu2 = ±pi, got {v}"))),
        },
        Mu2Rule::Range(lo, hi) => {
            let v = mu2.ok_or_else(|| violation(&e.name, "mu2 must be given"))?;
            if v < lo - MU_TOL || v > hi + MU_TOL {
                return Err(violation(&e.name, format!("mu2 = {v} outside [{lo}, {hi}]")));
            }
            Ok(v)
        }
        Mu2Rule::Near { default_to_neg_mu1, default } => {
            Ok(mu2.unwrap_or(if default_to_neg_mu1 { -mu1 } else { default }))
        }
    }
}

fn symmetry_class(e: &CatalogEntry) -> SymmetryClass {
    match e.expected_symmetry {
        ExpectedSymmetry::Symmetric => SymmetryClass::Symmetric,
        _ => SymmetryClass::AntiSymmetric,
    }
}

/// Configuration of `name` at `(N, μ1, μ2)`; `μ2` may be omitted where the
/// entry fixes it. Free axes are filled in by the optimizers using default
/// search settings.
pub fn build(name: &str, n_particles: usize, mu1: f64, mu2: Option<f64>) -> Result<CatalogBuild> {
    build_with(name, n_particles, mu1, mu2, &DeSettings::default())
}

pub fn build_with(name: &str, n_particles: usize, mu1: f64, mu2: Option<f64>, de: &DeSettings) -> Result<CatalogBuild> {
    let e = lookup(name)?;
    let (lo, hi) = e.mu1_range;
    if !(mu1 >= lo - MU_TOL && mu1 <= hi + MU_TOL) {
        return Err(violation(name, format!("mu1 = {mu1} outside [{lo}, {hi}]")));
    }
    let mu2 = resolve_mu2(&e, mu1, mu2)?;
    let ops = SpinOperators::new(n_particles)?;
    let class = symmetry_class(&e);
    let done = |config: ProtocolConfig, optimized: &[&str]| {
        Ok(CatalogBuild {
            name: e.name.clone(),
            config,
            optimized_axes: optimized.iter().map(|s| s.to_string()).collect(),
        })
    };

    if e.kind == EntryKind::Region {
        let best = match class {
            SymmetryClass::Symmetric => optimize_point_in_branch(&ops, mu1, mu2, class, TwistBranch::YzPlane, de)?,
            _ => optimize_point_with(&ops, mu1, mu2, class, de)?,
        };
        return done(best.config, &["n", "m", "k"]);
    }

    match (e.n_axis, e.m_axis, e.k_axis) {
        (AxisSpec::Fixed(n), AxisSpec::Fixed(m), AxisSpec::Fixed(k)) => {
            done(ProtocolConfig::new(n_particles, mu1, mu2, n, k, m, class)?, &[])
        }
        (AxisSpec::YzPlane, AxisSpec::Fixed(_), AxisSpec::YzPlane) => {
            let best = optimize_point_in_branch(&ops, mu1, mu2, class, TwistBranch::YzPlane, de)?;
            done(best.config, &["n", "k"])
        }
        (AxisSpec::Sphere, AxisSpec::Sphere, k) => {
            let k = match k {
                AxisSpec::Fixed(k) => k,
                _ => UnitVector3::Z,
            };
            let builder = MomentBuilder::new(&ops, mu1)?;
            let opt = svd_optimize_axes_split(&builder.build(mu2, &k), Subspace::Full3d, Subspace::Full3d)?;
            let cfg = classified(n_particles, mu1, mu2, opt.n_axis, k, opt.m_axis)?;
            done(cfg, &["n", "m"])
        }
        (AxisSpec::YzPlane, AxisSpec::Sphere, AxisSpec::YzPlane) => {
            let builder = MomentBuilder::new(&ops, mu1)?;
            let sigma = |kappa: f64| {
                svd_optimize_axes_split(
                    &builder.build(mu2, &UnitVector3::in_yz_plane(kappa)),
                    Subspace::YzPlane,
                    Subspace::Full3d,
                )
            };
            let r = de::minimize(
                |p| sigma(p[0]).map(|o| -o.sigma_max).unwrap_or(f64::INFINITY),
                &[Bound::periodic(0.0, PI)],
                &[vec![FRAC_PI_2], vec![0.0]],
                de,
            )?;
            let k = UnitVector3::in_yz_plane(r.x[0]);
            let opt = sigma(r.x[0])?;
            let cfg = classified(n_particles, mu1, mu2, opt.n_axis, k, opt.m_axis)?;
            done(cfg, &["n", "m", "k"])
        }
        other => Err(Error::InternalConsistency(format!("catalog geometry {other:?} has no builder"))),
    }
}

/// One-point configuration whose class is read off the harmonic expansion.
fn classified(
    n_particles: usize,
    mu1: f64,
    mu2: f64,
    n: UnitVector3,
    k: UnitVector3,
    m: UnitVector3,
) -> Result<ProtocolConfig> {
    let mut cfg = ProtocolConfig::new(n_particles, mu1, mu2, n, k, m, SymmetryClass::AntiSymmetric)?;
    let report = classify_fourier(&cfg, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE)?;
    cfg.symmetry_class = match report.classification {
        FourierClass::AntiSymmetric => SymmetryClass::AntiSymmetric,
        FourierClass::Symmetric => SymmetryClass::Symmetric,
        _ => SymmetryClass::Unclassified,
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sensitivity;

    fn close(a: &UnitVector3, b: &UnitVector3) -> bool {
        a.dot(b) > 1.0 - 1e-12
    }

    #[test]
    fn names_are_unique_and_complete() {
        let all = list();
        let mut names: Vec<_> = all.iter().map(|e| e.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        assert_eq!(all.iter().filter(|e| e.kind == EntryKind::Family).count(), 11);
        assert_eq!(families().len(), 10);
        assert_eq!(regions().len(), 9);
        assert_eq!(all.iter().filter(|e| e.kind == EntryKind::Region).count(), 9);
        assert_eq!(lookup("A3").unwrap().tag, "μ1=−2μ2");
        assert_eq!(lookup("S3").unwrap().tag, "μ1=−μ2");
        assert_eq!(lookup("schulte_out").unwrap().k_axis, AxisSpec::Fixed(UnitVector3::Z));
    }

    #[test]
    fn fixed_geometry_rows() {
        let b = build("davis", 32, 0.3, Some(-0.3)).unwrap();
        let c = &b.config;
        assert!(close(&c.n_axis, &UnitVector3::Y) && close(&c.m_axis, &UnitVector3::Y));
        assert!(close(&c.k_axis, &UnitVector3::Z));
        assert_eq!(c.symmetry_class, SymmetryClass::AntiSymmetric);
        assert!(b.optimized_axes.is_empty());

        let l = build("leibfried", 32, PI, Some(PI)).unwrap().config;
        assert_eq!(l.symmetry_class, SymmetryClass::Symmetric);
        assert!(close(&l.m_axis, &UnitVector3::X.negate()));
        let ly = build("leibfried_y", 32, PI, None).unwrap().config;
        assert!(close(&ly.n_axis, &UnitVector3::Y));
    }

    #[test]
    fn constraint_violations() {
        let err = build("davis", 32, 0.3, Some(0.3)).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation { .. }));
        assert!(matches!(build("colombo", 8, 0.7, None), Err(Error::ConstraintViolation { .. })));
        assert!(matches!(build("volkoff", 8, 0.2, Some(0.1)), Err(Error::ConstraintViolation { .. })));
        assert!(matches!(build("macri", 8, 0.2, None), Err(Error::ConstraintViolation { .. })));
        assert!(matches!(build("A5", 8, 0.2, Some(1.0)), Err(Error::ConstraintViolation { .. })));
        assert!(matches!(build("nope", 8, 0.2, None), Err(Error::UnknownProtocol(_))));
    }

    #[test]
    fn optimized_rows_stay_in_their_geometry() {
        let k = build("kitagawa", 8, 0.2, None).unwrap();
        assert_eq!(k.config.symmetry_class, SymmetryClass::AntiSymmetric);
        assert_eq!(k.optimized_axes, ["n", "m"]);
        let s = build("schulte_out", 8, 0.4, Some(-0.3)).unwrap().config;
        assert!(close(&s.k_axis, &UnitVector3::Z));
        let n = build("nolan", 8, 0.4, Some(-0.3)).unwrap().config;
        assert!(close(&n.m_axis, &UnitVector3::X));
        assert!(n.n_axis.lies_in_yz_plane(1e-12) && n.k_axis.lies_in_yz_plane(1e-12));
        let f = build("frowis", 8, 0.4, Some(-0.3)).unwrap().config;
        assert!(f.n_axis.lies_in_yz_plane(1e-12) && f.k_axis.lies_in_yz_plane(1e-12));
    }

    #[test]
    fn region_defaults() {
        let a3 = build("A3", 8, 0.4, None).unwrap().config;
        assert!((a3.mu2 + 0.2).abs() < 1e-15);
        let a5 = build("A5", 8, 0.4, Some(-PI)).unwrap().config;
        assert_eq!(a5.mu2, -PI);
        let s3 = build("S3", 8, 0.4, None).unwrap().config;
        assert_eq!(s3.symmetry_class, SymmetryClass::Symmetric);
        assert!((s3.mu2 + 0.4).abs() < 1e-15);
    }

    #[test]
    fn volkoff_mirrors_davis_geometry() {
        for (a, b) in [(0.3, 0.5), (1.1, -0.7), (0.2, 0.2)] {
            let v = build("volkoff", 8, -a, Some(b)).unwrap().config;
            let mirrored = ProtocolConfig::new(
                8,
                a,
                -b,
                UnitVector3::Y,
                UnitVector3::Z,
                UnitVector3::Y.negate(),
                SymmetryClass::AntiSymmetric,
            )
            .unwrap();
            let sv = sensitivity(&v, false).unwrap().inverse_delta_phi;
            let sm = sensitivity(&mirrored, false).unwrap().inverse_delta_phi;
            assert!((sv - sm).abs() < 1e-10 * sm, "{sv} vs {sm}");
        }
        let v = build("volkoff", 8, -0.3, Some(0.3)).unwrap().config;
        let d = build("davis", 8, 0.3, None).unwrap().config;
        let (sv, sd) = (sensitivity(&v, false).unwrap(), sensitivity(&d, false).unwrap());
        assert!((sv.inverse_delta_phi - sd.inverse_delta_phi).abs() < 1e-10);
    }
}
