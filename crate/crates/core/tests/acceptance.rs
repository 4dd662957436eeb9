//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::time::Instant;

use nalgebra::Vector3;
use spinrecon::experiment::fixtures::{self, dt_config, pb_config, unit_motion};
use spinrecon::experiment::verify::{
    check_balance, check_certificates, check_coefficient_identity, check_common_line, check_direction_witness,
    check_fourier_slice, check_noise_monotone, check_nondegeneracy_identity, check_pb_sigma_symmetry,
    check_truth_residual, reference_phantom, reference_sets, Check, NOISE_LEVELS,
};
use spinrecon::forward::{AnalyticJets, Backend, StencilJets};
use spinrecon::phantom::mirror_symmetrize;
use spinrecon::recovery::{
    dt_equation_residual, dt_recover_step, pb_first_order_step, recover_trajectory, Ambiguity, SolverConfig,
};
use spinrecon::so3::to_cylindrical;
use spinrecon::Result;

struct Line {
    passed: bool,
    text: String,
}

fn from_checks(checks: &[Check]) -> Line {
    Line {
        passed: checks.iter().all(|c| c.passed),
        text: checks.iter().map(Check::line).collect::<Vec<_>>().join("; "),
    }
}

fn from_result(r: Result<Line>) -> Line {
    r.unwrap_or_else(|e| Line {
        passed: false,
        text: format!("error: {e}"),
    })
}

fn dt_end_to_end() -> Result<Line> {
    let ph = reference_phantom(7)?;
    let m = unit_motion(fixtures::smooth_motion(), 200)?;
    let start = Instant::now();
    let exact = recover_trajectory(
        &AnalyticJets::new(&ph, &m, dt_config(Backend::Analytic))?,
        &SolverConfig::analytic(),
        None,
    )?;
    let fd = recover_trajectory(
        &StencilJets::new(&ph, &m, dt_config(Backend::FiniteDifference { dt: 1e-3, dk: 1e-2 }))?,
        &SolverConfig::finite_difference(),
        None,
    )?;
    let secs = start.elapsed().as_secs_f64();
    let (a, b) = (exact.max_omega_error(&m.trajectory), fd.max_omega_error(&m.trajectory));
    Ok(Line {
        passed: a <= 1e-6 && b <= 1e-3 && secs <= 60.0,
        text: format!("analytic max|ω̂-ω| {a:.2e} <= 1e-6, fd {b:.2e} <= 1e-3, {secs:.1} s <= 60 s"),
    })
}

fn pb_end_to_end() -> Result<Line> {
    let ph = reference_phantom(7)?;
    let m = unit_motion(fixtures::smooth_motion(), 200)?;
    let start = Instant::now();
    let res = recover_trajectory(
        &AnalyticJets::new(&ph, &m, pb_config(Backend::Analytic))?,
        &SolverConfig::analytic(),
        Some(&m.trajectory),
    )?;
    let secs = start.elapsed().as_secs_f64();
    let d = res.equivalence_distance.unwrap_or(f64::INFINITY);
    Ok(Line {
        passed: d <= 1e-4 && secs <= 120.0,
        text: format!(
            "equivalence distance {d:.2e} <= 1e-4 (branch {:?}, {} flagged), {secs:.1} s <= 120 s",
            res.branch,
            res.flagged.len()
        ),
    })
}

fn ambiguity() -> Result<Line> {
    let cfg = SolverConfig::analytic();
    let m = unit_motion(fixtures::smooth_motion(), 40)?;

    // (a) Mirror plane spanned by e₃ and the azimuth of ω(0): the DT line
    // along that azimuth lies in the plane, so every (ρ, ζ) fits.
    let w0 = m.trajectory.omega[0];
    let phi = to_cylindrical(&w0).phi;
    let normal = Vector3::new(-phi.sin(), phi.cos(), 0.0);
    let mirrored = mirror_symmetrize(&reference_phantom(7)?, &normal)?;
    let jets = AnalyticJets::new(&mirrored, &m, dt_config(Backend::Analytic))?;
    let step = dt_recover_step(&jets, 0, &cfg)?;
    let mut family: f64 = 0.0;
    for i in 0..9 {
        for j in 0..9 {
            // ρ = 0 is left out: there the azimuth of ω is undefined.
            let (rho, zeta) = (-2.25 + 0.5 * i as f64, -2.0 + 0.5 * j as f64);
            let w = Vector3::new(rho * phi.cos(), rho * phi.sin(), zeta);
            family = family.max(dt_equation_residual(&jets, 0, &w, &cfg)?);
        }
    }
    let dphi = (step.phi - phi)
        .abs()
        .min(std::f64::consts::PI - (step.phi - phi).abs());
    let a = step.ambiguity == Ambiguity::PlanarFamily && family <= 1e-10 && dphi <= 1e-6;

    // (b) ω = (0, 0, ζ).
    let zeta = 1.3;
    let mz = unit_motion(fixtures::constant_motion(Vector3::new(0.0, 0.0, zeta)), 20)?;
    let ph = reference_phantom(7)?;
    let pj = AnalyticJets::new(&ph, &mz, pb_config(Backend::Analytic))?;
    let mut zerr: f64 = 0.0;
    let mut all_family = true;
    for i in 0..mz.times().len() {
        let s = pb_first_order_step(&pj, i, &cfg)?;
        all_family &= s.ambiguity == Ambiguity::RhoZeroFamily;
        zerr = zerr.max((s.zeta - zeta).abs());
    }
    let b = all_family && zerr <= 1e-6;

    // (c) Degenerate motion: every step reaches the third-order solve and
    // is flagged for its condition number.
    let md = unit_motion(fixtures::degenerate_motion(), 40)?;
    let dj = AnalyticJets::new(&ph, &md, pb_config(Backend::Analytic))?;
    let res = recover_trajectory(&dj, &cfg, None)?;
    let overflow = res
        .estimates
        .iter()
        .all(|e| e.x1.is_some() && e.condition > cfg.condition_max && e.ambiguity == Ambiguity::Degenerate);
    let min_cond = res.estimates.iter().map(|e| e.condition).fold(f64::INFINITY, f64::min);
    let c = overflow && res.trajectory.is_none();

    Ok(Line {
        passed: a && b && c,
        text: format!(
            "(a) {:?}, family residual {family:.2e} <= 1e-10, |Δφ| {dphi:.1e}; (b) rho-zero-family at every step: {all_family}, |ζ̂-ζ| {zerr:.2e} <= 1e-6; (c) all steps flagged with condition >= {min_cond:.2e} > {:.0e}: {overflow}",
            step.ambiguity, cfg.condition_max
        ),
    })
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Line>)> = vec![
        ("DT end-to-end", Box::new(|| from_result(dt_end_to_end()))),
        ("PB end-to-end up to Σ", Box::new(|| from_result(pb_end_to_end()))),
        (
            "coefficient identity",
            Box::new(|| {
                from_result(
                    reference_phantom(7).map(|ph| {
                        from_checks(&[check_coefficient_identity(&ph, pb_config(Backend::Analytic), 50, 31)])
                    }),
                )
            }),
        ),
        (
            "nondegeneracy identity",
            Box::new(|| from_checks(&[check_nondegeneracy_identity(1000, 32)])),
        ),
        (
            "truth residual",
            Box::new(|| {
                from_result((|| {
                    let ph = reference_phantom(7)?;
                    let m = unit_motion(fixtures::smooth_motion(), 200)?;
                    Ok(from_checks(&check_truth_residual(
                        &ph,
                        &m,
                        dt_config(Backend::Analytic),
                        pb_config(Backend::Analytic),
                        &SolverConfig::analytic(),
                    )))
                })())
            }),
        ),
        ("ambiguity detection", Box::new(|| from_result(ambiguity()))),
        (
            "point-set machinery",
            Box::new(|| {
                from_result(reference_sets(&[1, 2, 3, 4, 5]).map(|sets| {
                    from_checks(&[
                        check_certificates(&sets),
                        check_direction_witness(&sets, 1000, 33),
                        check_balance(&sets),
                    ])
                }))
            }),
        ),
        (
            "data symmetry",
            Box::new(|| {
                from_result((|| {
                    let ph = reference_phantom(7)?;
                    let m = unit_motion(fixtures::smooth_motion(), 200)?;
                    let pb = pb_config(Backend::Analytic);
                    Ok(from_checks(&[
                        check_pb_sigma_symmetry(&ph, &m, pb, 1000, 34),
                        check_common_line(&ph, &m, pb, 100, 35),
                    ]))
                })())
            }),
        ),
        (
            "Fourier slice oracle",
            Box::new(|| from_result(reference_phantom(7).map(|ph| from_checks(&[check_fourier_slice(&ph, 64, 36)])))),
        ),
        (
            "noise smoke test",
            Box::new(|| from_checks(&[check_noise_monotone(&[7, 8, 9], &NOISE_LEVELS, 100)])),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let line = run();
        let status = if line.passed { "PASS" } else { "FAIL" };
        if !line.passed {
            failed += 1;
        }
        println!("{status} [{}] {name}: {}", i + 1, line.text);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
