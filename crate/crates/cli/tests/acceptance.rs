//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with a custom harness so every line is printed. The process exits
//! non-zero on a failed criterion only when `SMOOTHLAB_ACCEPTANCE_STRICT=1`;
//! otherwise the FAIL lines are the report.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use smoothlab_cli::commands::{collapsed, ln_impact, reparam_demo, spectrum, verify};
use smoothlab_cli::config::{CommandKind, ExperimentConfig, Settings};
use smoothlab_cli::output::TrialStatus;
use smoothlab_cli::sampling::{general_attention, normal_matrix, raw_h, symmetric_attention, trial_rng};
use smoothlab_core::attention::perron_report;
use smoothlab_core::dynamics::{run as run_dynamics, UpdateConfig};
use smoothlab_core::metrics::{effective_rank, hfc_lfc_ratio, mean_cosine_similarity, metrics_of};
use smoothlab_core::spectral::{combined_spectrum, dominance_report, smoothing_verdict, ResidualMode};
use smoothlab_core::tensor_core::{eig_general_with, EigOptions, RealMatrix};
use smoothlab_core::Tolerances;

const SEED: u64 = 20240601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn settings(kind: CommandKind, cfg: ExperimentConfig) -> Settings {
    ExperimentConfig {
        seed: Some(SEED),
        ..cfg
    }
    .resolve(kind, 1.0)
    .expect("valid settings")
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn spectrum_settings() -> Settings {
    settings(
        CommandKind::Spectrum,
        ExperimentConfig {
            n: Some(8),
            d: Some(8),
            vary_size: Some(true),
            trials: Some(200),
            ..Default::default()
        },
    )
}

fn reparam_settings() -> Settings {
    settings(
        CommandKind::ReparamDemo,
        ExperimentConfig {
            trials: Some(100),
            ..Default::default()
        },
    )
}

fn criterion_1(report: &spectrum::SpectrumReport, elapsed: Duration) -> Verdict {
    let t = &report.totals;
    let n = report.trials.len();
    Verdict {
        pass: t.lemma1_agreements == n && n == 200 && within(elapsed, 10),
        detail: format!(
            "{}/{n} trials match the Kronecker eigenvalues, max discrepancy {:.2e}, {:.2}s",
            t.lemma1_agreements,
            t.max_lemma1_discrepancy,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let tol = Tolerances::default();
    let (mut holds, mut complex, mut errors) = (0, 0, 0);
    for k in 0..1000u64 {
        let mut rng = trial_rng(SEED, k);
        let n = rng.random_range(1..=8);
        match general_attention(n, &mut rng)
            .map_err(|e| e.to_string())
            .and_then(|a| perron_report(&a, &tol).map_err(|e| e.to_string()))
        {
            Ok(r) => {
                holds += r.holds(&tol) as usize;
                complex += !r.is_real(&tol) as usize;
            }
            Err(_) => errors += 1,
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: holds == 1000 && within(elapsed, 30),
        detail: format!(
            "{holds}/1000 satisfy the Perron properties ({complex} with complex spectra, {errors} errors), {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_3(spec: &spectrum::SpectrumReport, reparam: &reparam_demo::ReparamReport) -> Verdict {
    let from_spectrum = spec.trials.iter().filter_map(|t| t.table_agrees);
    let from_reparam = reparam.trials.iter().filter_map(|t| t.table_agrees);
    let (mut checked, mut disagree) = (0, 0);
    for agrees in from_spectrum.chain(from_reparam) {
        checked += 1;
        disagree += !agrees as usize;
    }
    let expected = spec.trials.len() + reparam.trials.len();
    Verdict {
        pass: disagree == 0 && checked == expected,
        detail: format!(
            "case table disagrees with the direct argmax in {disagree}/{checked} classified trials (of {expected})"
        ),
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let s = settings(
        CommandKind::VerifyCampaign,
        ExperimentConfig {
            trials: Some(2000),
            eligible_target: Some(100),
            ..Default::default()
        },
    );
    let report = verify::campaign(&s);
    let elapsed = start.elapsed();
    let t = &report.totals;
    let sm = &report.summary;
    Verdict {
        pass: t.eligible == 100 && sm.pass == 100 && sm.errored == 0 && within(elapsed, 60),
        detail: format!(
            "{} eligible of {} trials ({} skipped with reasons, {} errored); direction {}/{}, metrics {}/{}, growth {}/{} (offset-corrected growth {}/{}), {:.2}s",
            t.eligible,
            sm.trials,
            sm.skipped,
            sm.errored,
            t.direction_agreements,
            t.eligible,
            t.metric_agreements,
            t.eligible,
            t.growth_agreements,
            t.eligible,
            t.corrected_growth_agreements,
            t.eligible,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_5(report: &reparam_demo::ReparamReport) -> Verdict {
    let unexplained_skip = report
        .trials
        .iter()
        .filter(|t| t.status == Some(TrialStatus::Skipped) && t.reason.is_none())
        .count();
    let (sm, sh) = (&report.smooth, &report.sharpen);
    Verdict {
        pass: sm.trials == 100
            && sh.trials == 100
            && sm.fail + sm.errored + sh.fail + sh.errored == 0
            && unexplained_skip == 0,
        detail: format!(
            "smooth {} pass, {} skipped, {} fail, {} errored; sharpen {} pass, {} skipped, {} fail, {} errored",
            sm.pass, sm.skipped, sm.fail, sm.errored, sh.pass, sh.skipped, sh.fail, sh.errored
        ),
    }
}

fn criterion_6() -> Verdict {
    let s = settings(CommandKind::VerifyCampaign, ExperimentConfig::default());
    let tol = s.tolerances;
    let opts = EigOptions {
        residual_tol: tol.eig_residual,
        ..EigOptions::default()
    };
    let (mut verdicts, mut collapses, mut errors) = (0, 0, Vec::new());
    for k in 0..100u64 {
        let mut rng = trial_rng(SEED ^ 0x6, k);
        let n = rng.random_range(2..=8);
        let d = rng.random_range(2..=8);
        let outcome = (|| -> Result<(bool, bool), String> {
            let a = symmetric_attention(n, &mut rng, &tol).map_err(|e| e.to_string())?;
            let h = raw_h(d, &mut rng);
            let x0 = normal_matrix(n, d, 1.0, &mut rng);
            let spec_h = eig_general_with(&h, &opts).map_err(|e| e.to_string())?;
            let report = dominance_report(
                &combined_spectrum(&spec_h, a.spectrum(), ResidualMode::NoResidual),
                &tol,
            );
            let verdict = smoothing_verdict(&report, a.spectrum(), &spec_h);
            let cfg = UpdateConfig {
                residual: false,
                depth: 2000,
                record_every: 2000,
                renormalize: true,
                ..UpdateConfig::default()
            };
            let traj = run_dynamics(&x0, a.matrix(), &h, &cfg).map_err(|e| e.to_string())?;
            Ok((
                verdict.flags() == (true, true, true),
                collapsed(&traj.last().metrics, &s.thresholds),
            ))
        })();
        match outcome {
            Ok((v, c)) => {
                verdicts += v as usize;
                collapses += c as usize;
            }
            Err(e) => errors.push(format!("trial {k}: {e}")),
        }
    }
    Verdict {
        pass: verdicts == 100 && collapses == 100,
        detail: format!(
            "verdict (T,T,T) in {verdicts}/100, case-1 limits reached in {collapses}/100{}",
            if errors.is_empty() {
                String::new()
            } else {
                format!("; errors: {}", errors.join(", "))
            }
        ),
    }
}

#[allow(clippy::approx_constant)]
fn criterion_7() -> Verdict {
    let hfc = hfc_lfc_ratio(&RealMatrix::from_rows(&[vec![2.0], vec![0.0]])).unwrap();
    let cos = mean_cosine_similarity(&RealMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]])).unwrap();
    let erank = effective_rank(&RealMatrix::from_diag(&[3.0, 1.0])).unwrap();
    let examples = [
        (hfc - 1.0).abs() <= 1e-12,
        (cos - 0.7071067811865476).abs() <= 1e-12,
        (erank - 1.7547728).abs() <= 1e-6,
    ];

    let mut worst = 0.0f64;
    for k in 0..200u64 {
        let mut rng = trial_rng(SEED ^ 0x7, k);
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=8);
        let x = normal_matrix(n, d, 1.0, &mut rng);
        let base = metrics_of(&x).unwrap();
        for c in [1e-6, 0.3, -1.0, 2.5, 1e5] {
            let m = metrics_of(&x.scale(c)).unwrap();
            let rel = (m.hfc_lfc - base.hfc_lfc).abs() / base.hfc_lfc.abs().max(1.0);
            worst = worst
                .max(rel)
                .max((m.mean_cosine - base.mean_cosine).abs())
                .max((m.effective_rank - base.effective_rank).abs());
        }
    }
    Verdict {
        pass: examples.iter().all(|&ok| ok) && worst <= 1e-10,
        detail: format!(
            "hfc_lfc {hfc:.16}, mean_cosine {cos:.16}, effective_rank {erank:.10}; scale invariance max deviation {worst:.2e}"
        ),
    }
}

fn criterion_8() -> Verdict {
    let mut reproduced = 0;
    let mut slowest = Duration::ZERO;
    let mut per_seed = Vec::new();
    for seed in 0..10u64 {
        let s = ExperimentConfig {
            seed: Some(seed),
            ..Default::default()
        }
        .resolve(CommandKind::LnImpact, 1.0)
        .expect("valid settings");
        let start = Instant::now();
        let ok = match ln_impact::experiment(&s) {
            Ok((report, _)) => report.smooth_mode_reproduced,
            Err(_) => false,
        };
        slowest = slowest.max(start.elapsed());
        reproduced += ok as usize;
        per_seed.push(if ok { '+' } else { '-' });
    }
    Verdict {
        pass: reproduced >= 8 && within(slowest, 10),
        detail: format!(
            "smooth-mode slope signs reproduced on {reproduced}/10 seeds [{}], slowest seed {:.2}s",
            per_seed.iter().collect::<String>(),
            slowest.as_secs_f64()
        ),
    }
}

fn write_matrix(path: &Path, m: &RealMatrix) {
    let value = serde_json::json!({ "rows": m.rows(), "cols": m.cols(), "data": m.data() });
    std::fs::write(path, value.to_string()).unwrap();
}

/// Exit code, stdout and the sorted output files of one run.
type RunOutput = (i32, Vec<u8>, Vec<(String, Vec<u8>)>);

/// Runs the binary inside `cwd` with the relative output directory `out`,
/// so both runs of a command see identical settings.
fn run_cli(args: &[&str], cwd: &Path) -> RunOutput {
    let output = Command::new(env!("CARGO_BIN_EXE_smoothlab"))
        .args(args)
        .args(["--out", "out"])
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(cwd.join("out"))
        .map(|dir| {
            dir.map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect()
        })
        .unwrap_or_default();
    files.sort();
    (output.status.code().unwrap_or(-1), output.stdout, files)
}

fn criterion_9() -> Verdict {
    let inputs = tempfile::tempdir().unwrap();
    let a_path = inputs.path().join("a.json");
    let h_path = inputs.path().join("h.json");
    write_matrix(
        &a_path,
        &RealMatrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.2, 0.7]]),
    );
    write_matrix(&h_path, &RealMatrix::from_rows(&[vec![0.5, 0.1], vec![-0.2, 0.3]]));
    let a = a_path.to_str().unwrap();
    let h = h_path.to_str().unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "spectrum",
            vec![
                "spectrum",
                "--seed",
                "3",
                "--trials",
                "20",
                "--vary-size",
                "true",
                "--n",
                "8",
                "--d",
                "8",
            ],
        ),
        ("simulate", vec!["simulate", "--seed", "3", "--depth", "300"]),
        ("classify", vec!["classify", "--a", a, "--h", h]),
        (
            "verify",
            vec!["verify", "--seed", "3", "--trials", "10", "--depth", "500"],
        ),
        ("ln-impact", vec!["ln-impact", "--seed", "3"]),
        (
            "reparam-demo",
            vec!["reparam-demo", "--seed", "3", "--trials", "5", "--depth", "500"],
        ),
    ];
    let mut mismatched = Vec::new();
    for (name, args) in &commands {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        let r1 = run_cli(args, first.path());
        let r2 = run_cli(args, second.path());
        if r1 != r2 || r1.2.is_empty() || r1.0 == 2 || r1.0 == 3 {
            mismatched.push(format!("{name} (exit {} / {})", r1.0, r2.0));
        }
    }
    Verdict {
        pass: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            format!(
                "{} commands produced byte-identical outputs on two runs",
                commands.len()
            )
        } else {
            format!("differing or missing outputs: {}", mismatched.join(", "))
        },
    }
}

fn main() {
    let start = Instant::now();
    let spec = spectrum_settings();
    let spectrum_start = Instant::now();
    let spectrum_report = spectrum::campaign(&spec);
    let spectrum_elapsed = spectrum_start.elapsed();
    let (reparam_report, _) = reparam_demo::campaign(&reparam_settings());

    let verdicts = [
        criterion_1(&spectrum_report, spectrum_elapsed),
        criterion_2(),
        criterion_3(&spectrum_report, &reparam_report),
        criterion_4(),
        criterion_5(&reparam_report),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    for (i, v) in verdicts.iter().enumerate() {
        println!(
            "criterion {}: {} - {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass ({:.1}s)",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );

    let strict = std::env::var("SMOOTHLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < verdicts.len() {
        std::process::exit(1);
    }
}
