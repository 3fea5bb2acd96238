//! Layer-normalized dynamics on a synthetic image: how the sign of the LN
//! scale interacts with pre- and post-LN placement.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;
use smoothlab_core::dynamics::{run as run_dynamics, LayerNormParams, LnMode, Trajectory, UpdateConfig};
use smoothlab_core::reparam::{build_reparam, init_reparam, ReparamMode};
use smoothlab_core::tensor_core::RealMatrix;

use super::log_hfc_slope;
use super::reparam_demo::{mode_name, MODES};
use super::simulate::dynamics_error;
use crate::config::Settings;
use crate::error::CliError;
use crate::output::{to_json, trajectory_csv, Artifacts, ReportHeader};
use crate::sampling::{general_attention, trial_rng};
use crate::{Outcome, RunStatus};

pub const IMAGE_SIDE: usize = 16;
pub const PATCH: usize = 4;
const WAVES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slope {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Serialize)]
pub struct LnRun {
    pub h_mode: ReparamMode,
    pub ln_mode: LnMode,
    pub gamma_positive: bool,
    pub file: String,
    pub slope: Option<f64>,
    pub expected: Option<Slope>,
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LnImpactReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub n: usize,
    pub d: usize,
    pub layers: usize,
    pub h_eigenvalues: Vec<(ReparamMode, Vec<f64>)>,
    pub runs: Vec<LnRun>,
    /// Every run with an expected sign matched it.
    pub expectations_met: bool,
    /// The smooth-mode runs named by the figure: pre-LN γ>0 falling,
    /// pre-LN γ<0 rising, post-LN γ>0 falling.
    pub smooth_mode_reproduced: bool,
}

/// `IMAGE_SIDE²` pixels of a sum of random plane cosines scaled to `[0, 1]`,
/// cut into `PATCH × PATCH` patches; each row of the result is one patch.
pub fn synthetic_image<R: Rng + ?Sized>(rng: &mut R) -> RealMatrix {
    let freq = Uniform::new(0.0, 2.0).expect("valid range");
    let angle = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let waves: Vec<(f64, f64, f64)> = (0..WAVES)
        .map(|_| (freq.sample(rng), freq.sample(rng), angle.sample(rng)))
        .collect();
    let side = IMAGE_SIDE as f64;
    let img = RealMatrix::from_fn(IMAGE_SIDE, IMAGE_SIDE, |y, x| {
        waves
            .iter()
            .map(|(fx, fy, ph)| (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) / side + ph).cos())
            .sum()
    });
    let lo = img.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_row = IMAGE_SIDE / PATCH;
    RealMatrix::from_fn(per_row * per_row, PATCH * PATCH, |p, q| {
        let (py, px) = (p / per_row, p % per_row);
        let (qy, qx) = (q / PATCH, q % PATCH);
        (img[(py * PATCH + qy, px * PATCH + qx)] - lo) / (hi - lo)
    })
}

fn expected(h_mode: ReparamMode, ln_mode: LnMode, gamma_positive: bool) -> Option<Slope> {
    let smoothing = h_mode == ReparamMode::Smooth;
    let natural = if smoothing { Slope::Negative } else { Slope::Positive };
    let reversed = if smoothing { Slope::Positive } else { Slope::Negative };
    match (ln_mode, gamma_positive) {
        (LnMode::PreLn, true) | (LnMode::PostLn, true) => Some(natural),
        (LnMode::PreLn, false) => Some(reversed),
        _ => None,
    }
}

fn ln_name(m: LnMode) -> &'static str {
    match m {
        LnMode::PreLn => "pre_ln",
        LnMode::PostLn => "post_ln",
        LnMode::None => "none",
    }
}

pub fn experiment(s: &Settings) -> Result<(LnImpactReport, Vec<(String, Trajectory)>), CliError> {
    let mut rng = trial_rng(s.seed, 0);
    let x0 = synthetic_image(&mut rng);
    let (n, d) = x0.shape();
    let a = general_attention(n, &mut rng).map_err(CliError::numerical)?;
    let (v_h, psi) = init_reparam(d, &mut rng).map_err(CliError::numerical)?;
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let gamma: Vec<f64> = (0..d).map(|_| 1.0 - unit.sample(&mut rng)).collect();

    let mut runs = Vec::new();
    let mut trajectories = Vec::new();
    let mut h_eigenvalues = Vec::new();
    for h_mode in MODES {
        let reparam = build_reparam(&v_h, &psi, h_mode).map_err(CliError::numerical)?;
        h_eigenvalues.push((h_mode, reparam.clipped.clone()));
        for ln_mode in [LnMode::PreLn, LnMode::PostLn] {
            for gamma_positive in [true, false] {
                let sign = if gamma_positive { 1.0 } else { -1.0 };
                let params = LayerNormParams::new(
                    gamma.iter().map(|g| sign * g).collect(),
                    vec![0.0; d],
                    LayerNormParams::DEFAULT_EPSILON,
                )
                .map_err(dynamics_error)?;
                let cfg = UpdateConfig {
                    residual: true,
                    ln_mode,
                    ln_params: Some(params),
                    depth: s.depth,
                    record_every: s.record_every,
                    renormalize: false,
                };
                let traj = run_dynamics(&x0, &a, &reparam.realized_h, &cfg).map_err(dynamics_error)?;
                let slope = log_hfc_slope(&traj.records);
                let want = expected(h_mode, ln_mode, gamma_positive);
                let observed = slope.map(|v| if v < 0.0 { Slope::Negative } else { Slope::Positive });
                let file = format!(
                    "{}_{}_{}.csv",
                    mode_name(h_mode),
                    ln_name(ln_mode),
                    if gamma_positive { "pos" } else { "neg" }
                );
                runs.push(LnRun {
                    h_mode,
                    ln_mode,
                    gamma_positive,
                    file: file.clone(),
                    slope,
                    expected: want,
                    matches: want.map(|w| observed == Some(w)),
                });
                trajectories.push((file, traj));
            }
        }
    }
    let expectations_met = runs.iter().all(|r| r.matches != Some(false));
    let smooth_mode_reproduced = runs
        .iter()
        .filter(|r| r.h_mode == ReparamMode::Smooth)
        .all(|r| r.matches != Some(false));
    let report = LnImpactReport {
        header: ReportHeader::new(s),
        n,
        d,
        layers: s.depth,
        h_eigenvalues,
        runs,
        expectations_met,
        smooth_mode_reproduced,
    };
    Ok((report, trajectories))
}

pub fn run(s: &Settings) -> Result<Outcome, CliError> {
    let (report, trajectories) = experiment(s)?;
    let json = to_json(&report);
    let mut artifacts = Artifacts::default();
    for (file, traj) in &trajectories {
        artifacts.add(file.clone(), trajectory_csv(traj));
    }
    artifacts.add("ln_impact.json", json.clone());
    let slopes: Vec<String> = report
        .runs
        .iter()
        .map(|r| {
            format!(
                "{}/{}/{}: {}",
                mode_name(r.h_mode),
                ln_name(r.ln_mode),
                if r.gamma_positive { "+" } else { "-" },
                r.slope.map_or("n/a".into(), |v| format!("{v:+.4e}"))
            )
        })
        .collect();
    Ok(Outcome {
        status: if report.smooth_mode_reproduced {
            RunStatus::AllPass
        } else {
            RunStatus::VerificationFailed
        },
        headline: format!("ln-impact: {}", slopes.join(", ")),
        artifacts,
        primary: json,
    })
}
