//! Invariant suites behind `verify`. Every check is a plain function with
//! explicit sizes so the same code runs at desk scale and at full scale.

use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixtures::{self, DT_K0, PB_LAMBDA_MAX, SUPPORT_RADIUS};
use crate::error::{Error, Result};
use crate::forward::{
    add_noise, measure, measure_grid, verify_common_line, AnalyticJets, Backend, Fault, JetOrder, JetProvider, KGrid,
    MeasurementJet, ModelConfig, SampledJets, StencilJets,
};
use crate::motion::{Motion, MotionSpec, Profile, TimeGrid};
use crate::phantom::{
    balance_weights, dt_pointset_certificate, generate_asymmetric_pointset, moment_residual, pb_pointset_certificate,
    pointset_direction_witness, BlobProfile, Frame, ModelKind, Phantom, PhantomSum, Placement, PointSet, Spectral,
    SymmetryModel,
};
use crate::recovery::{
    dt_equation_residual, dt_recover_step, object_space_coefficients, pb_coefficients, pb_coefficients_at,
    pb_equation_residual, pb_first_order_step, pb_third_order_step, recover_trajectory, truth_cylindrical,
    FirstOrderState, SolverConfig,
};
use crate::so3::{
    angular_velocity, from_cylindrical, hat, nondegeneracy_certificate, orthogonality_defect, sigma_conjugate,
    to_cylindrical,
};
use crate::sweep::frame_sweep;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Kinematics,
    Phantoms,
    Forward,
    Recovery,
    All,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::Kinematics => "kinematics",
            Scope::Phantoms => "phantoms",
            Scope::Forward => "forward",
            Scope::Recovery => "recovery",
            Scope::All => "all",
        }
    }

    fn suites(self) -> Vec<Scope> {
        match self {
            Scope::All => vec![Scope::Kinematics, Scope::Phantoms, Scope::Forward, Scope::Recovery],
            s => vec![s],
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kinematics" => Scope::Kinematics,
            "phantoms" => Scope::Phantoms,
            "forward" => Scope::Forward,
            "recovery" => Scope::Recovery,
            "all" => Scope::All,
            _ => return Err(Error::invalid(format!("unknown verify scope {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity; `None` when the check errored.
    pub value: Option<f64>,
    pub bound: Bound,
    pub limit: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            passed: value <= limit,
            value: Some(value),
            bound: Bound::AtMost,
            limit,
            detail: String::new(),
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            passed: value >= limit,
            value: Some(value),
            bound: Bound::AtLeast,
            limit,
            detail: String::new(),
        }
    }

    fn from_result(name: &str, bound: Bound, limit: f64, r: Result<f64>) -> Check {
        match r {
            Ok(v) => match bound {
                Bound::AtMost => Check::at_most(name, v, limit),
                Bound::AtLeast => Check::at_least(name, v, limit),
            },
            Err(e) => Check {
                name: name.into(),
                passed: false,
                value: None,
                bound,
                limit,
                detail: e.to_string(),
            },
        }
    }

    fn with_detail(mut self, d: impl Into<String>) -> Check {
        let d = d.into();
        self.detail = match (self.detail.is_empty(), d.is_empty()) {
            (true, _) => d,
            (false, true) => self.detail,
            (false, false) => format!("{}; {d}", self.detail),
        };
        self
    }

    pub fn line(&self) -> String {
        let v = self.value.map_or("error".to_string(), |v| format!("{v:.3e}"));
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {} {v} {op} {:.1e}", self.name, self.limit);
        if !self.detail.is_empty() {
            s.push_str(&format!(" ({})", self.detail));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_fault: Option<String>,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Run the suites in `scope`, optionally with a defect injected into every
/// forward model the suites build.
pub fn verify(scope: Scope, fault: Option<Fault>) -> VerifyReport {
    let mut checks = Vec::new();
    for suite in scope.suites() {
        checks.extend(match suite {
            Scope::Kinematics => kinematics_suite(),
            Scope::Phantoms => phantoms_suite(),
            Scope::Forward => forward_suite(fault),
            Scope::Recovery => recovery_suite(fault),
            Scope::All => unreachable!(),
        });
    }
    VerifyReport {
        scope,
        injected_fault: fault.map(|f| format!("{f:?}")),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn kinematics_suite() -> Vec<Check> {
    vec![
        check_orthogonality(1000),
        check_vee_hat(1000, 1),
        check_nondegeneracy_identity(200, 2),
        check_cylindrical_roundtrip(10_000, 3),
        check_sigma_involution(1000, 4),
    ]
}

fn phantoms_suite() -> Vec<Check> {
    let sets = match reference_sets(&[1, 2, 3]) {
        Ok(s) => s,
        Err(e) => return vec![Check::from_result("phantoms.generation", Bound::AtMost, 0.0, Err(e))],
    };
    let mut out = vec![
        check_certificates(&sets),
        check_direction_witness(&sets, 1000, 5),
        check_balance(&sets),
    ];
    match reference_phantom(7) {
        Ok(ph) => out.extend([
            check_moment_spectral(&ph),
            check_spectral_fd(&ph, 20, 6),
            check_reality(&ph, 200, 7),
            check_perturbation_asymmetry(&ph, 48, 6),
        ]),
        Err(e) => out.push(Check::from_result("phantoms.reference", Bound::AtMost, 0.0, Err(e))),
    }
    out
}

fn forward_suite(fault: Option<Fault>) -> Vec<Check> {
    let setup = reference_phantom(7).and_then(|ph| Ok((ph, fixtures::unit_motion(fixtures::smooth_motion(), 40)?)));
    let (ph, m) = match setup {
        Ok(s) => s,
        Err(e) => return vec![Check::from_result("forward.setup", Bound::AtMost, 0.0, Err(e))],
    };
    let dt = with_fault(fixtures::dt_config(Backend::Analytic), fault);
    let pb = with_fault(fixtures::pb_config(Backend::Analytic), fault);
    vec![
        check_pb_hermitian(&ph, &m, pb, 200, 8),
        check_dt_origin(&ph, &m, dt),
        check_dt_ewald_sphere(&ph, &m, dt, 200, 9),
        check_jet_consistency("forward.dt-jet-consistency", &ph, &m, dt, 10, 10),
        check_jet_consistency("forward.pb-jet-consistency", &ph, &m, pb, 10, 11),
        check_common_line(&ph, &m, pb, 100, 12),
        check_pb_sigma_symmetry(&ph, &m, pb, 200, 13),
        check_fourier_slice(&ph, 64, 14),
    ]
}

fn recovery_suite(fault: Option<Fault>) -> Vec<Check> {
    let setup = reference_phantom(7).and_then(|ph| Ok((ph, fixtures::unit_motion(fixtures::smooth_motion(), 40)?)));
    let (ph, m) = match setup {
        Ok(s) => s,
        Err(e) => return vec![Check::from_result("recovery.setup", Bound::AtMost, 0.0, Err(e))],
    };
    let dt = with_fault(fixtures::dt_config(Backend::Analytic), fault);
    let pb = with_fault(fixtures::pb_config(Backend::Analytic), fault);
    let cfg = SolverConfig::analytic();
    let mut out = check_truth_residual(&ph, &m, dt, pb, &cfg);
    out.push(check_argmin_ratio(&ph, &m, dt, pb, &cfg));
    out.push(check_third_order_consistency(&ph, &m, pb, &cfg));
    out.push(check_coefficient_identity(&ph, pb, 20, 15));
    out.push(check_sigma_covariance(&ph, pb, 80, &cfg));
    out.push(check_noise_monotone(&[7], &NOISE_LEVELS, 100));
    out
}

fn with_fault(mut c: ModelConfig, fault: Option<Fault>) -> ModelConfig {
    c.fault = fault;
    c
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rotation(r: &mut ChaCha8Rng) -> Matrix3<f64> {
    let v = Vector3::new(
        r.random_range(-1.0..1.0),
        r.random_range(-1.0..1.0),
        r.random_range(-1.0..1.0),
    );
    Rotation3::from_scaled_axis(v * std::f64::consts::PI).into_inner()
}

fn random_vector(r: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        r.random_range(-1.0..1.0),
        r.random_range(-1.0..1.0),
        r.random_range(-1.0..1.0),
    ) * scale
}

fn random_k(r: &mut ChaCha8Rng, radius: f64) -> Vector2<f64> {
    let a = r.random_range(0.0..std::f64::consts::TAU);
    let s = radius * r.random::<f64>().sqrt();
    Vector2::new(s * a.cos(), s * a.sin())
}

/// Reference point sets, one per seed.
pub fn reference_sets(seeds: &[u64]) -> Result<Vec<PointSet>> {
    seeds
        .iter()
        .map(|&s| {
            generate_asymmetric_pointset(
                8,
                s,
                Placement::Ball {
                    radius: fixtures::PLACEMENT_RADIUS,
                },
            )
        })
        .collect()
}

pub fn reference_phantom(seed: u64) -> Result<Phantom> {
    fixtures::gaussian_phantom(8, seed)
}

// Kinematics

pub fn check_orthogonality(n_steps: usize) -> Check {
    let name = "kinematics.orthogonality";
    let r = fixtures::unit_motion(fixtures::smooth_motion(), n_steps).map(|m| {
        m.trajectory
            .rotation
            .iter()
            .map(orthogonality_defect)
            .fold(0.0, f64::max)
    });
    Check::from_result(name, Bound::AtMost, 1e-10, r)
}

pub fn check_vee_hat(samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let rot = random_rotation(&mut g);
            let w = random_vector(&mut g, 3.0);
            worst = worst.max((angular_velocity(&rot, &(rot * hat(&w)))? - w).norm());
        }
        Ok(worst)
    })();
    Check::from_result("kinematics.vee-hat-roundtrip", Bound::AtMost, 1e-12, r)
}

fn random_profile(g: &mut ChaCha8Rng) -> Profile {
    Profile {
        poly: (0..3).map(|_| g.random_range(-1.0..1.0)).collect(),
        sines: vec![[
            g.random_range(-0.5..0.5),
            g.random_range(0.5..3.0),
            g.random_range(0.0..6.3),
        ]],
    }
}

/// `|det(Re₃,R'e₃,R''e₃) − ρ²(ζ+φ')|` relative to `1 + ‖ω‖(‖ω‖² + ‖ω'‖)`,
/// the natural bound on both sides, over random analytic motions.
pub fn check_nondegeneracy_identity(motions: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let grid = TimeGrid::new(0.0, 1.0, 50)?;
        let mut worst: f64 = 0.0;
        for _ in 0..motions {
            let spec = MotionSpec::AnalyticOmega {
                omega: [random_profile(&mut g), random_profile(&mut g), random_profile(&mut g)],
            };
            let m = Motion::new(spec, grid)?;
            let tr = &m.trajectory;
            for i in 0..tr.len() {
                let c = nondegeneracy_certificate(&tr.rotation[i], &tr.rotation_dot[i], &tr.rotation_ddot[i])?;
                let w = tr.omega[i].norm();
                let scale = 1.0 + w * (w * w + tr.omega_dot[i].norm());
                worst = worst.max(c.discrepancy() / scale);
            }
        }
        Ok(worst)
    })();
    Check::from_result("kinematics.nondegeneracy-identity", Bound::AtMost, 1e-9, r)
}

pub fn check_cylindrical_roundtrip(samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = random_vector(&mut g, 5.0);
            let c = to_cylindrical(&x);
            if !(0.0..std::f64::consts::PI).contains(&c.phi) {
                return Err(Error::invalid(format!("azimuth {} outside [0, π)", c.phi)));
            }
            worst = worst.max((from_cylindrical(&c)? - x).norm() / x.norm().max(1.0));
        }
        Ok(worst)
    })();
    Check::from_result("kinematics.cylindrical-roundtrip", Bound::AtMost, 1e-12, r)
}

pub fn check_sigma_involution(samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let worst = (0..samples)
        .map(|_| {
            let r = random_rotation(&mut g);
            (sigma_conjugate(&sigma_conjugate(&r)) - r).norm()
        })
        .fold(0.0, f64::max);
    Check::at_most("kinematics.sigma-involution", worst, 1e-15)
}

// Phantoms

/// Number of sets failing either determinant certificate.
pub fn check_certificates(sets: &[PointSet]) -> Check {
    let r = (|| {
        let mut failures = 0;
        for s in sets {
            if !dt_pointset_certificate(s)?.passed || !pb_pointset_certificate(s)?.passed {
                failures += 1;
            }
        }
        Ok(failures as f64)
    })();
    Check::from_result("phantoms.certificates", Bound::AtMost, 0.0, r)
}

/// Random directions without a witness pair, over all sets and both models.
pub fn check_direction_witness(sets: &[PointSet], directions: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let mut misses = 0;
        for s in sets {
            for _ in 0..directions {
                let xi = loop {
                    let v = random_vector(&mut g, 1.0);
                    let n = v.norm();
                    if n > 1e-3 && n <= 1.0 {
                        break v / n;
                    }
                };
                for model in [ModelKind::Dt, ModelKind::Pb] {
                    if pointset_direction_witness(s, &xi, model)?.is_none() {
                        misses += 1;
                    }
                }
            }
        }
        Ok(misses as f64)
    })();
    Check::from_result("phantoms.direction-witness", Bound::AtMost, 0.0, r)
}

/// Largest moment residual; a zero weight fails the check outright.
pub fn check_balance(sets: &[PointSet]) -> Check {
    let r = (|| {
        let mut worst: f64 = 0.0;
        for s in sets {
            let w = balance_weights(s)?;
            if w.iter().any(|&x| x == 0.0) {
                return Err(Error::invalid("balanced weights contain a zero"));
            }
            worst = worst.max(moment_residual(s, &w));
        }
        Ok(worst)
    })();
    Check::from_result("phantoms.balance-weights", Bound::AtMost, 1e-12, r)
}

pub fn check_moment_spectral(ph: &Phantom) -> Check {
    let g = ph.spectral(&Vector3::zeros(), 1).grad.norm();
    Check::at_most("phantoms.zero-first-moment", g, 1e-12)
}

/// Hessian and third derivatives against central differences of the
/// gradient and Hessian.
pub fn check_spectral_fd(ph: &Phantom, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let kappa = random_vector(&mut g, 6.0);
        let d = ph.spectral(&kappa, 3);
        let (mut e2, mut e3, mut s2, mut s3): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..3 {
            let mut dk = Vector3::zeros();
            dk[i] = h;
            let p = ph.spectral(&(kappa + dk), 2);
            let m = ph.spectral(&(kappa - dk), 2);
            let fd_grad = (p.grad - m.grad) / C::new(2.0 * h, 0.0);
            let fd_hess = (p.hess - m.hess) / C::new(2.0 * h, 0.0);
            for j in 0..3 {
                e2 = e2.max((fd_grad[j] - d.hess[(i, j)]).norm());
                s2 = s2.max(d.hess[(i, j)].norm());
                for k in 0..3 {
                    e3 = e3.max((fd_hess[(j, k)] - d.third[i][(j, k)]).norm());
                    s3 = s3.max(d.third[i][(j, k)].norm());
                }
            }
        }
        worst = worst.max(e2 / s2.max(1e-300)).max(e3 / s3.max(1e-300));
    }
    Check::at_most("phantoms.spectral-fd-consistency", worst, 1e-5)
}

pub fn check_reality(ph: &Phantom, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let scale = ph.weights.iter().map(|w| w.abs()).sum::<f64>();
    let worst = (0..samples)
        .map(|_| {
            let k = random_vector(&mut g, 10.0);
            (ph.spectral(&-k, 0).value - ph.spectral(&k, 0).value.conj()).norm()
        })
        .fold(0.0, f64::max);
    Check::at_most("phantoms.reality", worst / scale, 1e-12)
}

/// A centred radial blob is symmetric in every frame; adding a small
/// multiple of the asymmetric phantom must make every swept frame violate
/// both symmetry conditions. Reports the smallest violation found.
pub fn check_perturbation_asymmetry(ph: &Phantom, n_dirs: usize, n_rot: usize) -> Check {
    let r = (|| {
        let blob = Phantom::new(
            PointSet::new(vec![Vector3::zeros()]),
            vec![1.0],
            BlobProfile::Gaussian { sigma: 0.15 },
            SUPPORT_RADIUS,
        )?;
        let mut small = ph.clone();
        for w in &mut small.weights {
            *w *= 0.05;
        }
        let base = PhantomSum {
            parts: vec![blob.clone()],
        };
        let sum = PhantomSum {
            parts: vec![blob, small],
        };
        let mut base_worst: f64 = 0.0;
        let mut least = f64::INFINITY;
        for (xi, eta) in frame_sweep(n_dirs, n_rot) {
            let pb = Frame { xi, eta, nu: xi };
            let pbm = SymmetryModel::Pb {
                lambda_max: PB_LAMBDA_MAX,
            };
            base_worst = base_worst.max(crate::phantom::symmetry_residual(&base, &pb, pbm, 32)?);
            least = least.min(crate::phantom::symmetry_residual(&sum, &pb, pbm, 32)?);
            let dtm = SymmetryModel::Dt { k0: DT_K0 };
            for nu in [xi, eta, xi.cross(&eta)] {
                let f = Frame { xi, eta, nu };
                least = least.min(crate::phantom::symmetry_residual(&sum, &f, dtm, 32)?);
            }
        }
        if base_worst > 1e-12 {
            return Err(Error::invalid(format!(
                "radial blob alone violates PB symmetry by {base_worst:.3e}"
            )));
        }
        Ok(least)
    })();
    Check::from_result("phantoms.perturbation-asymmetry", Bound::AtLeast, 1e-8, r)
}

// Forward models

fn data_scale(ph: &Phantom) -> f64 {
    ph.weights.iter().map(|w| w.abs()).sum()
}

pub fn check_pb_hermitian(ph: &Phantom, m: &Motion, cfg: ModelConfig, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let tr = &m.trajectory;
    let r = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let r = &tr.rotation[g.random_range(0..tr.len())];
            let k = random_k(&mut g, PB_LAMBDA_MAX);
            worst = worst.max((measure(ph, r, &cfg, &-k)? - measure(ph, r, &cfg, &k)?.conj()).norm());
        }
        Ok(worst / data_scale(ph))
    })();
    Check::from_result("forward.pb-hermitian", Bound::AtMost, 1e-12, r)
}

/// `m̂(t,0) = f̂(0)` and `∂_t m̂(t,0) = 0` at every step.
pub fn check_dt_origin(ph: &Phantom, m: &Motion, cfg: ModelConfig) -> Check {
    let r = (|| {
        let jets = AnalyticJets::new(ph, m, cfg)?;
        let f0 = ph.spectral(&Vector3::zeros(), 0).value;
        let mut worst: f64 = 0.0;
        for i in 0..m.times().len() {
            let j = jets.jet(i, &Vector2::zeros(), JetOrder::First)?;
            worst = worst.max((j.value - f0).norm()).max(j.dt.norm());
        }
        Ok(worst / data_scale(ph))
    })();
    Check::from_result("forward.dt-origin", Bound::AtMost, 1e-12, r)
}

/// DT samples against `f̂` evaluated directly on the rotated hemisphere
/// `R(k, √(k₀² − ‖k‖²) − k₀)`.
pub fn check_dt_ewald_sphere(ph: &Phantom, m: &Motion, cfg: ModelConfig, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let tr = &m.trajectory;
    let k0 = DT_K0;
    let r = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let r = &tr.rotation[g.random_range(0..tr.len())];
            let k = random_k(&mut g, 0.9 * k0);
            let z = (k0 * k0 - k.norm_squared()).sqrt() - k0;
            let want = ph.spectral(&(r * Vector3::new(k.x, k.y, z)), 0).value;
            worst = worst.max((measure(ph, r, &cfg, &k)? - want).norm());
        }
        Ok(worst / data_scale(ph))
    })();
    Check::from_result("forward.dt-ewald-sphere", Bound::AtMost, 1e-12, r)
}

fn jet_fields(j: &MeasurementJet) -> Vec<Vec<C>> {
    let mut third = Vec::new();
    for a in 0..2 {
        third.extend(j.third_k[a].iter().copied());
    }
    vec![
        vec![j.value],
        vec![j.dt],
        j.grad_k.iter().copied().collect(),
        j.hess_k.iter().copied().collect(),
        third,
        j.dt_grad_k.iter().copied().collect(),
        j.dt_hess_k.iter().copied().collect(),
        j.dtt_grad_k.iter().copied().collect(),
    ]
}

/// Analytic jets against finite differences of re-measured data, per
/// component group, relative to the group's size.
pub fn check_jet_consistency(
    name: &str,
    ph: &Phantom,
    m: &Motion,
    cfg: ModelConfig,
    samples: usize,
    seed: u64,
) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let fd_cfg = ModelConfig {
            backend: Backend::FiniteDifference { dt: 1e-3, dk: 1e-2 },
            ..cfg
        };
        let exact = AnalyticJets::new(ph, m, cfg)?;
        let fd = StencilJets::new(ph, m, fd_cfg)?;
        let reach = cfg.radial_nodes().last().copied().unwrap_or(0.0);
        let n = m.times().len();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let i = g.random_range(1..n - 1);
            let k = random_k(&mut g, reach);
            let a = jet_fields(&exact.jet(i, &k, JetOrder::Third)?);
            let b = jet_fields(&fd.jet(i, &k, JetOrder::Third)?);
            for (ga, gb) in a.iter().zip(&b) {
                let s = ga.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let e = ga.iter().zip(gb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                worst = worst.max(e / s.max(1e-3 * data_scale(ph)));
            }
        }
        Ok(worst)
    })();
    Check::from_result(name, Bound::AtMost, 1e-4, r)
}

pub fn check_common_line(ph: &Phantom, m: &Motion, cfg: ModelConfig, pairs: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let jets = AnalyticJets::new(ph, m, cfg)?;
        let n = m.times().len();
        let mut worst: f64 = 0.0;
        let mut used = 0;
        while used < pairs {
            let (s, t) = (g.random_range(0..n), g.random_range(0..n));
            if s == t {
                continue;
            }
            match verify_common_line(&jets, &m.trajectory, s, t) {
                Ok(d) => worst = worst.max(d),
                Err(Error::DegeneratePair(_)) => {}
                Err(e) => return Err(e),
            }
            used += 1;
        }
        Ok(worst / data_scale(ph))
    })();
    Check::from_result("forward.common-line", Bound::AtMost, 1e-12, r)
}

/// PB data of `(f, R)` and `(f ∘ Σ, ΣRΣ)` coincide.
pub fn check_pb_sigma_symmetry(ph: &Phantom, m: &Motion, cfg: ModelConfig, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let mirrored = ph.sigma_reflected();
    let tr = &m.trajectory;
    let r = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let r = &tr.rotation[g.random_range(0..tr.len())];
            let k = random_k(&mut g, PB_LAMBDA_MAX);
            let a = measure(ph, r, &cfg, &k)?;
            let b = measure(&mirrored, &sigma_conjugate(r), &cfg, &k)?;
            worst = worst.max((a - b).norm());
        }
        Ok(worst / data_scale(ph))
    })();
    Check::from_result("forward.pb-sigma-symmetry", Bound::AtMost, 1e-12, r)
}

/// PB samples against the 2-D transform of line integrals of the rotated
/// object, taken by quadrature on an `n³` rasterization.
pub fn check_fourier_slice(ph: &Phantom, n: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let rot = random_rotation(&mut g);
    let cfg = fixtures::pb_config(Backend::Analytic);
    let half = 1.1 * SUPPORT_RADIUS;
    let h = 2.0 * half / n as f64;
    let node = |i: usize| -half + (i as f64 + 0.5) * h;
    let proj: Vec<f64> = (0..n * n)
        .map(|s| {
            let (a, b) = (node(s % n), node(s / n));
            (0..n)
                .map(|c| ph.eval(&(rot * Vector3::new(a, b, node(c)))))
                .sum::<f64>()
                * h
        })
        .collect();
    let norm = (2.0 * std::f64::consts::PI).powf(-1.5) * h * h;
    let r = (|| {
        let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
        for _ in 0..12 {
            let k = random_k(&mut g, 6.0);
            let mut q = C::new(0.0, 0.0);
            for (s, p) in proj.iter().enumerate() {
                let ph_ = -(k.x * node(s % n) + k.y * node(s / n));
                q += C::from_polar(*p, ph_);
            }
            let want = measure(ph, &rot, &cfg, &k)?;
            err = err.max((q * norm - want).norm());
            scale = scale.max(want.norm());
        }
        Ok(err / scale)
    })();
    Check::from_result("forward.fourier-slice", Bound::AtMost, 1e-6, r)
}

// Recovery

/// The true `ω` in the DT equation and the PB first-order equation.
pub fn check_truth_residual(
    ph: &Phantom,
    m: &Motion,
    dt: ModelConfig,
    pb: ModelConfig,
    cfg: &SolverConfig,
) -> Vec<Check> {
    let tr = &m.trajectory;
    let run = |mc: ModelConfig, is_dt: bool| -> Result<f64> {
        let jets = AnalyticJets::new(ph, m, mc)?;
        let mut worst: f64 = 0.0;
        for i in 0..tr.len() {
            let r = if is_dt {
                dt_equation_residual(&jets, i, &tr.omega[i], cfg)?
            } else {
                pb_equation_residual(&jets, i, &tr.omega[i], cfg)?
            };
            worst = worst.max(r);
        }
        Ok(worst)
    };
    vec![
        Check::from_result("recovery.dt-truth-residual", Bound::AtMost, 1e-10, run(dt, true)),
        Check::from_result("recovery.pb-truth-residual", Bound::AtMost, 1e-10, run(pb, false)),
    ]
}

/// Smallest second-best to best residual ratio across steps of both solvers.
pub fn check_argmin_ratio(ph: &Phantom, m: &Motion, dt: ModelConfig, pb: ModelConfig, cfg: &SolverConfig) -> Check {
    let r = (|| {
        let dj = AnalyticJets::new(ph, m, dt)?;
        let pj = AnalyticJets::new(ph, m, pb)?;
        let mut least = f64::INFINITY;
        for i in 0..m.times().len() {
            least = least.min(dt_recover_step(&dj, i, cfg)?.ratio);
            least = least.min(pb_first_order_step(&pj, i, cfg)?.ratio);
        }
        Ok(least)
    })();
    Check::from_result("recovery.argmin-ratio", Bound::AtLeast, cfg.ambiguity_ratio, r)
}

fn truth_state(m: &Motion, i: usize) -> (FirstOrderState, f64, f64) {
    let tr = &m.trajectory;
    let (c, [rho_dot, phi_dot, zeta_dot]) = truth_cylindrical(&tr.omega[i], &tr.omega_dot[i]);
    (
        FirstOrderState {
            phi: c.phi,
            zeta: c.zeta,
            phi_dot,
            zeta_dot,
        },
        c.rho,
        rho_dot,
    )
}

/// `(X₁, X₂)` against `(ρ², ρ'/ρ)` from exact first-order inputs.
pub fn check_third_order_consistency(ph: &Phantom, m: &Motion, pb: ModelConfig, cfg: &SolverConfig) -> Check {
    let r = (|| {
        let jets = AnalyticJets::new(ph, m, pb)?;
        let mut worst: f64 = 0.0;
        for i in 0..m.times().len() {
            let (state, rho, rho_dot) = truth_state(m, i);
            let t = pb_third_order_step(&pb_coefficients(&jets, i, &state)?, cfg)?;
            worst = worst.max((t.x1 - rho * rho).abs()).max((t.x2 - rho_dot / rho).abs());
        }
        Ok(worst)
    })();
    Check::from_result("recovery.third-order-consistency", Bound::AtMost, 1e-6, r)
}

/// Measurement-space against object-space third-order coefficients at
/// random `(t, λ)`.
pub fn check_coefficient_identity(ph: &Phantom, pb: ModelConfig, samples: usize, seed: u64) -> Check {
    let mut g = rng(seed);
    let r = (|| {
        let m = fixtures::unit_motion(fixtures::smooth_motion(), 200)?;
        let jets = AnalyticJets::new(ph, &m, pb)?;
        let tr = &m.trajectory;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let i = g.random_range(0..tr.len());
            let lam = g.random_range(-PB_LAMBDA_MAX..PB_LAMBDA_MAX);
            let (state, _, _) = truth_state(&m, i);
            let a = pb_coefficients_at(&jets, i, &state, lam)?;
            let b = object_space_coefficients(ph, &tr.rotation[i], &tr.omega[i], &tr.omega_dot[i], lam);
            let scale = b.a0.norm().max(b.a02.norm()).max(b.a1.norm()).max(1e-300);
            let e = (a.a0 - b.a0)
                .norm()
                .max((a.a02 - b.a02).norm())
                .max((a.a1 - b.a1).norm());
            worst = worst.max(e / scale);
        }
        Ok(worst)
    })();
    Check::from_result("recovery.coefficient-identity", Bound::AtMost, 1e-8, r)
}

/// Motion spec of `ΣRΣ` for an analytic `ω` spec.
pub fn sigma_motion(spec: &MotionSpec) -> Result<MotionSpec> {
    let neg = |p: &Profile| Profile {
        poly: p.poly.iter().map(|c| -c).collect(),
        sines: p.sines.iter().map(|s| [-s[0], s[1], s[2]]).collect(),
    };
    match spec {
        MotionSpec::AnalyticOmega { omega } => Ok(MotionSpec::AnalyticOmega {
            omega: [neg(&omega[0]), neg(&omega[1]), omega[2].clone()],
        }),
        _ => Err(Error::invalid("Σ-conjugate motion is built for analytic ω specs")),
    }
}

/// Recovery from `(f ∘ Σ, ΣRΣ)` reproduces the recovery from `(f, R)` up to
/// the branch label.
pub fn check_sigma_covariance(ph: &Phantom, pb: ModelConfig, n_steps: usize, cfg: &SolverConfig) -> Check {
    let r = (|| {
        let spec = fixtures::smooth_motion();
        let m = fixtures::unit_motion(spec.clone(), n_steps)?;
        let ms = fixtures::unit_motion(sigma_motion(&spec)?, n_steps)?;
        let mirrored = ph.sigma_reflected();
        let a = recover_trajectory(&AnalyticJets::new(ph, &m, pb)?, cfg, None)?;
        let b = recover_trajectory(&AnalyticJets::new(&mirrored, &ms, pb)?, cfg, None)?;
        let (Some(ta), Some(tb)) = (a.trajectory, b.trajectory) else {
            return Err(Error::DegenerateData("a recovery was flagged".into()));
        };
        Ok(ta.max_distance(&tb).min(ta.max_distance(&tb.sigma_conjugate())))
    })();
    Check::from_result("recovery.sigma-covariance", Bound::AtMost, 1e-6, r)
}

pub const NOISE_LEVELS: [f64; 4] = [0.0, 1e-4, 1e-3, 1e-2];

/// Frequency grid for sampled DT data: stencils along the radial lines stay
/// inside the band `‖k‖ < k₀`.
pub const NOISE_GRID: KGrid = KGrid { n: 96, extent: 9.9 };

/// `max_t ‖ω̂ − ω‖` of DT recovery from sampled data with added noise, one
/// entry per level. A failed recovery counts as infinite error.
pub fn noise_errors(phantom_seed: u64, levels: &[f64], n_steps: usize) -> Result<Vec<f64>> {
    let ph = reference_phantom(phantom_seed)?;
    let m = fixtures::unit_motion(fixtures::smooth_motion(), n_steps)?;
    let model = fixtures::dt_config(Backend::Analytic);
    let clean = measure_grid(&ph, &m, &model, NOISE_GRID)?;
    let cfg = SolverConfig::finite_difference();
    levels
        .iter()
        .map(|&level| {
            let ms = if level > 0.0 {
                add_noise(&clean, level, 1000 + phantom_seed)?
            } else {
                clean.clone()
            };
            let jets = SampledJets::new(&ms, model)?;
            Ok(match recover_trajectory(&jets, &cfg, None) {
                Ok(res) => res.max_omega_error(&m.trajectory),
                Err(_) => f64::INFINITY,
            })
        })
        .collect()
}

/// Number of decreases of the error along increasing noise, over phantoms.
pub fn check_noise_monotone(phantom_seeds: &[u64], levels: &[f64], n_steps: usize) -> Check {
    let mut detail = Vec::new();
    let r = (|| {
        let mut decreases = 0;
        for &s in phantom_seeds {
            let e = noise_errors(s, levels, n_steps)?;
            decreases += e.windows(2).filter(|w| w[1] < w[0]).count();
            detail.push(format!(
                "seed {s}: {}",
                e.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
            ));
        }
        Ok(decreases as f64)
    })();
    Check::from_result("recovery.noise-monotone", Bound::AtMost, 0.0, r).with_detail(detail.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_names_round_trip() {
        for s in [
            Scope::Kinematics,
            Scope::Phantoms,
            Scope::Forward,
            Scope::Recovery,
            Scope::All,
        ] {
            assert_eq!(s.name().parse::<Scope>().unwrap(), s);
        }
        assert!("everything".parse::<Scope>().is_err());
    }

    #[test]
    fn errors_become_failures() {
        let c = Check::from_result("x", Bound::AtMost, 1.0, Err(Error::invalid("boom")));
        assert!(!c.passed);
        assert!(c.line().starts_with("FAIL x error"));
    }

    #[test]
    fn sigma_motion_conjugates_the_trajectory() {
        let spec = fixtures::smooth_motion();
        let a = fixtures::unit_motion(spec.clone(), 50).unwrap();
        let b = fixtures::unit_motion(sigma_motion(&spec).unwrap(), 50).unwrap();
        assert!(a.trajectory.sigma_conjugate().max_distance(&b.trajectory) < 1e-12);
    }
}
