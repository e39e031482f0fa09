//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the criteria execute in order on an otherwise idle process.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Vector3;
use wavecatch::harness::{run_campaign, run_hover, CampaignOutcome, CampaignSpec, ControllerAggregate, ControllerKind, TargetMotion};
use wavecatch::latency::run_bench;
use wavecatch::{PdGains, UavParams};

const SPEEDS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn aggregate(out: &CampaignOutcome, kind: ControllerKind) -> &ControllerAggregate {
    out.report.controllers.iter().find(|a| a.controller == kind).expect("controller ran")
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Circular target at ±5° roll, 50 paired seeds, speeds cycled over the sweep.
fn paired_campaign() -> (CampaignOutcome, f64) {
    let mut template = common::circular_template(5.0);
    template.record_timing = true;
    let mut spec = common::campaign(template, 50, vec![ControllerKind::ShrinkingHorizon, ControllerKind::SimpleFollowing], None);
    spec.target_speeds_m_s = SPEEDS.to_vec();
    let start = Instant::now();
    let out = run_campaign(&spec).expect("paired campaign runs");
    (out, start.elapsed().as_secs_f64())
}

fn position_accuracy(out: &CampaignOutcome, wall_s: f64) -> Outcome {
    let err = opt(aggregate(out, ControllerKind::ShrinkingHorizon).mean_position_error_m);
    outcome(err <= 0.06 && wall_s <= 120.0, format!("mean EE position error {err:.4} m (≤ 0.06), runtime {wall_s:.1} s (≤ 120)"))
}

fn success_per_speed() -> Outcome {
    let start = Instant::now();
    let mut rates = Vec::new();
    for speed in SPEEDS {
        let mut template = common::circular_template(0.0);
        if let TargetMotion::Circular { speed_m_s, .. } = &mut template.target {
            *speed_m_s = speed;
        }
        let mut spec = common::campaign(template, 50, vec![ControllerKind::ShrinkingHorizon], None);
        spec.roll_amplitude_range = Some((0.0, 5f64.to_radians()));
        let out = run_campaign(&spec).expect("speed campaign runs");
        rates.push((speed, out.report.controllers[0].success_rate));
    }
    let wall_s = start.elapsed().as_secs_f64();
    let pass = rates.iter().all(|(_, r)| *r >= 0.95) && wall_s <= 300.0;
    let listed: Vec<String> = rates.iter().map(|(s, r)| format!("{s} m/s {:.0}%", r * 100.0)).collect();
    outcome(pass, format!("success {} (each ≥ 95%), runtime {wall_s:.1} s (≤ 300)", listed.join(", ")))
}

fn orientation_accuracy(out: &CampaignOutcome) -> Outcome {
    let deg = opt(aggregate(out, ControllerKind::ShrinkingHorizon).max_orientation_error_deg);
    outcome(deg <= 5.0, format!("max EE orientation error in capture windows {deg:.2}° (≤ 5)"))
}

fn uav_campaign() -> Outcome {
    let mut template = common::circular_template(5.0);
    template.target = TargetMotion::default_uav();
    let spec = CampaignSpec {
        roll_amplitude_range: Some((5f64.to_radians(), 8f64.to_radians())),
        ..common::campaign(template, 40, vec![ControllerKind::ShrinkingHorizon], None)
    };
    let out = run_campaign(&spec).expect("uav campaign runs");
    let a = &out.report.controllers[0];
    let rms = opt(a.mean_rms_error_m);
    outcome(
        a.success_rate >= 0.9 && rms <= 0.12,
        format!("success {}/{} (≥ 90%), capture-window RMS {rms:.4} m (≤ 0.12)", a.successes, a.n_trials),
    )
}

fn gains_over_following(out: &CampaignOutcome) -> Outcome {
    let a = aggregate(out, ControllerKind::ShrinkingHorizon);
    let (eff, prec) = (opt(a.efficiency_gain_pct), opt(a.precision_gain_pct));
    outcome(
        out.report.paired && eff >= 10.0 && prec >= 20.0,
        format!("median time-to-capture reduced {eff:.2}% (≥ 10), median RMS reduced {prec:.1}% (≥ 20)"),
    )
}

fn solve_latency() -> Outcome {
    let rows = run_bench(&[20], 200, 0.05, 1).expect("bench runs");
    let p95_ms = rows[0].p95_s * 1e3;
    outcome(p95_ms <= 40.0, format!("h=20 Δt=0.05 solve p95 {p95_ms:.1} ms (≤ 40), median {:.1} ms", rows[0].median_s * 1e3))
}

fn hover_drift() -> Outcome {
    let report = run_hover(&UavParams::default(), &PdGains::default(), &Vector3::new(0.0, 0.0, 2.0), 0.01, 60.0, 1)
        .expect("hover runs");
    let cm = report.rms_horizontal_drift_m * 100.0;
    outcome(cm < 6.0, format!("60 s hover horizontal RMS drift {cm:.2} cm (< 6)"))
}

fn property_suites(out: &CampaignOutcome) -> Outcome {
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    match common::covariance_fuzz(10_000, 1) {
        Ok((min_eig, asym)) => notes.push(format!("psd min eig {min_eig:.1e} asym {asym:.1e}")),
        Err(e) => failures.push(format!("psd fuzz: {e}")),
    }

    let nees = common::nees(500, 50, 2);
    notes.push(format!("NEES {:.3} in [{:.3}, {:.3}]", nees.mean, nees.band.0, nees.band.1));
    if !(nees.band.0 <= nees.mean && nees.mean <= nees.band.1) {
        failures.push("NEES outside band".into());
    }

    let fd = common::jacobian_fd_gap(200, 3);
    notes.push(format!("FD gap {fd:.1e}"));
    if fd > 1e-5 {
        failures.push(format!("jacobian finite-difference gap {fd:e} > 1e-5"));
    }

    let exact = common::discrete_model_gap(200, 200, 4);
    notes.push(format!("discrete gap {exact:.1e}"));
    if exact > 1e-13 {
        failures.push(format!("discrete model gap {exact:e} > 1e-13"));
    }

    let summaries: Vec<_> = out.trials.iter().map(|(_, _, r)| &r.summary).collect();
    let audited: usize = summaries.iter().map(|s| s.feasible_ticks).sum();
    let audit_failures: usize = summaries.iter().map(|s| s.audit_failures).sum();
    let kkt = summaries.iter().filter_map(|s| s.max_kkt_residual).fold(0.0, f64::max);
    notes.push(format!("audit {}/{audited} feasible plans, max KKT {kkt:.1e}", audited - audit_failures));
    if audit_failures > 0 || audited == 0 {
        failures.push(format!("{audit_failures} constraint-audit failures"));
    }
    if kkt > 1e-6 {
        failures.push(format!("KKT residual {kkt:e} > 1e-6"));
    }

    match common::determinism(12, 4) {
        Ok(bytes) => notes.push(format!("logs byte-identical ({bytes} B)")),
        Err(e) => failures.push(e),
    }

    let sweep = common::roll_sweep(&[0.0, 5.0, 8.0, 12.0], 30);
    let listed: Vec<String> = sweep.iter().map(|(r, s)| format!("{r}°:{s}")).collect();
    notes.push(format!("roll sweep {}/30", listed.join(" ")));
    if !common::monotone_within_one(&sweep) {
        failures.push("success rate rises with roll beyond one trial".into());
    }

    let pass = failures.is_empty();
    let mut detail = notes.join("; ");
    if !pass {
        detail = format!("{}; {detail}", failures.join("; "));
    }
    outcome(pass, detail)
}

fn oracle_fixtures() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/v1");
    let cases = match wavecatch_oracles::read_fixtures(&dir) {
        Ok(c) => c,
        Err(e) => return outcome(false, e),
    };
    let names: Vec<&str> = cases.iter().map(|c| c.name.as_str()).collect();
    let missing: Vec<&str> = ["eskf_scalar_kalman_gain", "arm_fk_home"].into_iter().filter(|n| !names.contains(n)).collect();
    let disagreements: Vec<String> = cases.iter().filter_map(|c| wavecatch_oracles::check(c).err()).collect();
    let generated = wavecatch_oracles::cases::oracle_cases().len();
    let pass = missing.is_empty() && disagreements.is_empty() && !cases.is_empty() && generated == cases.len();
    let mut detail = format!("{} fixtures, {} disagreements, {generated} cases at generation", cases.len(), disagreements.len());
    if !missing.is_empty() {
        detail.push_str(&format!(", missing {}", missing.join(", ")));
    }
    for d in disagreements {
        detail.push_str(&format!("\n    {d}"));
    }
    outcome(pass, detail)
}

fn main() -> ExitCode {
    // latency first, before the campaigns warm up every core
    let latency = solve_latency();
    let (paired, paired_wall) = paired_campaign();
    let results = [
        (1, "position accuracy", position_accuracy(&paired, paired_wall)),
        (2, "success per speed", success_per_speed()),
        (3, "orientation accuracy", orientation_accuracy(&paired)),
        (4, "uav-target tilt campaign", uav_campaign()),
        (5, "gains over simple following", gains_over_following(&paired)),
        (6, "solve latency", latency),
        (7, "hover drift", hover_drift()),
        (8, "property suites", property_suites(&paired)),
        (9, "oracle fixtures", oracle_fixtures()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
