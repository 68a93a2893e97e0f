//! Acceptance runner: one PASS/FAIL line per criterion, with its runtime
//! against the allowed budget. Exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pneumahand::config::Config;
use pneumahand::experiments::{
    kapandji_report, run_bellow_characterization, run_finger_characterization, run_pullout,
    validate_library, ExperimentReport, PostureLibrary, TAXONOMY,
};
use pneumahand::hand::{ChannelId, Finger, HandModel};

/// Name, time budget and check.
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict_lines(r: &ExperimentReport) -> String {
    r.verdicts
        .iter()
        .map(|v| {
            format!(
                "{}={:.4}{}",
                v.name,
                v.actual,
                if v.pass { "" } else { "(!)" }
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn bellow_anchors(cfg: &Config) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for ch in [
        ChannelId::ThumbProximal,
        ChannelId::ThumbMiddle,
        ChannelId::ThumbDistal,
    ] {
        let r = run_bellow_characterization(cfg, ch).expect("bellow characterization runs");
        pass &= r.passed();
        detail.push(format!("{ch}: {}", verdict_lines(&r)));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn finger_anchors(cfg: &Config) -> Outcome {
    let r = run_finger_characterization(cfg, Finger::Index).expect("finger characterization runs");
    Outcome {
        pass: r.passed(),
        detail: verdict_lines(&r),
    }
}

fn kapandji(cfg: &Config) -> Outcome {
    let lib = PostureLibrary::default_for(&cfg.model).expect("library authors");
    let r = kapandji_report(cfg, &lib).expect("kapandji runs");
    Outcome {
        pass: r.passed(),
        detail: format!(
            "score {}/10, palm disabled {}/10",
            r.summary["score"], r.summary["score_palm_disabled"]
        ),
    }
}

fn pullout(cfg: &Config) -> Outcome {
    let lib = PostureLibrary::default_for(&cfg.model).expect("library authors");
    let r = run_pullout(cfg, &lib).expect("pull-out runs");
    Outcome {
        pass: r.passed(),
        detail: verdict_lines(&r),
    }
}

fn library(cfg: &Config) -> Outcome {
    let lib = PostureLibrary::default_for(&cfg.model).expect("library authors");
    let r = validate_library(cfg, &lib);
    let bit_identical = r.entries.iter().all(|e| e.bit_identical);
    let pass =
        r.passed() && r.entries.len() == 46 && r.taxonomy.len() == TAXONOMY.len() && bit_identical;
    Outcome {
        pass,
        detail: format!(
            "{}/{} entries, {} taxonomy postures, {} duplicate pairs, 3 replays bit-identical: {bit_identical}",
            r.passed_count(),
            r.entries.len(),
            r.taxonomy.len(),
            r.duplicates.len()
        ),
    }
}

fn control_properties() -> Outcome {
    let tracking = common::closed_loop_tracking(11);
    let checkpoints = [625, 1250, 2500, 5000, 10_000];
    let (rms, drift_switches) = common::drift_ensemble(8, &checkpoints);
    let grows = rms.windows(2).all(|w| w[1] > w[0]);
    let recal = common::recalibration_reset(2000);
    let compliance = common::compliance_under_load();
    let max_rate = tracking.switches.max_rate().max(drift_switches.max_rate());
    let tracking_ok = tracking.max_error <= tracking.bound;
    let rate_ok = max_rate <= 300.0 * (1.0 + 1e-6);
    let reset_ok = recal.after <= recal.bound && recal.after < recal.before;
    let compliance_ok = compliance.valves_stayed_closed
        && compliance.mass_unchanged
        && compliance.pose_changed
        && compliance.pressure_changed;
    Outcome {
        pass: tracking_ok && rate_ok && grows && reset_ok && compliance_ok,
        detail: format!(
            "tracking {:.3e} <= {:.3e} kg: {tracking_ok}; max switch rate {:.1} Hz: {rate_ok}; \
             drift RMS {:?} kg growing: {grows}; recalibration {:.2e} -> {:.2e} kg (bound {:.2e}): {reset_ok}; \
             compliance closed/mass/pose/pressure: {}/{}/{}/{}",
            tracking.max_error,
            tracking.bound,
            max_rate,
            rms.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
            recal.before,
            recal.after,
            recal.bound,
            compliance.valves_stayed_closed,
            compliance.mass_unchanged,
            compliance.pose_changed,
            compliance.pressure_changed
        ),
    }
}

fn equilibrium_oracle() -> Outcome {
    let (err, ch) = common::equilibrium_oracle_error(&HandModel::default(), 100, 2024);
    Outcome {
        pass: err < 1e-4,
        detail: format!("max |dtheta| {err:.2e} rad (worst on {ch}) over 100 samples x 7 bellows"),
    }
}

fn main() -> ExitCode {
    let cfg = Config::default();
    let criteria: Vec<Criterion> = vec![
        (
            "bellow anchors",
            Duration::from_secs(10),
            Box::new(|| bellow_anchors(&cfg)),
        ),
        (
            "finger anchors",
            Duration::from_secs(10),
            Box::new(|| finger_anchors(&cfg)),
        ),
        (
            "kapandji",
            Duration::from_secs(30),
            Box::new(|| kapandji(&cfg)),
        ),
        (
            "pull-out",
            Duration::from_secs(10),
            Box::new(|| pullout(&cfg)),
        ),
        (
            "library",
            Duration::from_secs(120),
            Box::new(|| library(&cfg)),
        ),
        (
            "control properties",
            Duration::from_secs(60),
            Box::new(control_properties),
        ),
        (
            "equilibrium oracle",
            Duration::MAX,
            Box::new(equilibrium_oracle),
        ),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let t = Instant::now();
        let out = check();
        let took = t.elapsed();
        let in_time = took <= budget;
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        let budget = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", budget.as_secs())
        };
        println!(
            "{} {name} [{:.2}s{budget}]: {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
