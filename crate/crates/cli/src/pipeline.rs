//! End-to-end scenario runs: simulate, invert, select, predict, write.
//!
//! Every artifact is plain CSV/JSON/TOML with floats in shortest round-trip
//! form, so two runs of the same scenario produce identical files. The one
//! exception is `timings.csv`, which records wall-clock fit times.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dtwin_core::dynamics::{sample_measurements, slow_time_grid};
use dtwin_core::emulator::{fit_multioutput, EmulatorSpec, Matrix, Z95};
use dtwin_core::inversion::invert_series;
use dtwin_core::selection::{select_model_multioutput, ChannelFit, ModelSelectionReport};
use dtwin_core::{DeltaEstimateSeries, Scalar, MeasurementSeries, TrainedEmulator};

use crate::config::{Case, Scenario};

pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const MEASUREMENTS_CSV: &str = "measurements.csv";
pub const MEASUREMENTS_JSON: &str = "measurements.json";
pub const ESTIMATES_CSV: &str = "estimates.csv";
pub const ESTIMATES_JSON: &str = "estimates.json";
pub const SELECTION_JSON: &str = "selection.json";
pub const SELECTION_TXT: &str = "selection.txt";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TIMINGS_CSV: &str = "timings.csv";
pub const FAILED_MARKER: &str = "FAILED";
pub const REPORT_MD: &str = "report.md";

/// Intervals of the dense prediction grid over the measurement horizon; the
/// grid continues another 10% past the last measurement.
pub const DENSE_INTERVALS: usize = 500;
pub const EXTRAPOLATION_FRACTION: f64 = 0.1;

/// Seed offset for the held-out readings used to check band coverage.
const HELD_OUT_SEED_MIX: u64 = 0xA5A5_A5A5_A5A5_A5A5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Configure,
    Simulate,
    Invert,
    Select,
    Fit,
    Predict,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Configure => "configure",
            Self::Simulate => "simulate",
            Self::Invert => "invert",
            Self::Select => "select",
            Self::Fit => "fit",
            Self::Predict => "predict",
            Self::Write => "write",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

fn at<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> StageError {
    move |e| StageError { stage, message: e.to_string() }
}

/// One emulated quantity: the stiffness or the mass change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    DeltaK,
    DeltaM,
}

impl Channel {
    pub fn key(self) -> &'static str {
        match self {
            Self::DeltaK => "delta_k",
            Self::DeltaM => "delta_m",
        }
    }

    pub fn for_case(case: Case) -> &'static [Channel] {
        match case {
            Case::Stiffness => &[Self::DeltaK],
            Case::Mass => &[Self::DeltaM],
            Case::Joint => &[Self::DeltaK, Self::DeltaM],
        }
    }

    pub fn emulator_file(self) -> String {
        format!("emulator_{}.json", self.key())
    }

    pub fn prediction_file(self) -> String {
        format!("prediction_{}.csv", self.key())
    }

    pub fn estimates(self, est: &DeltaEstimateSeries) -> Option<&Vec<f64>> {
        match self {
            Self::DeltaK => est.delta_k_hat.as_ref(),
            Self::DeltaM => est.delta_m_hat.as_ref(),
        }
    }

    pub fn truth(self, scenario: &Scenario, t_s: f64) -> f64 {
        let (dk, dm) = scenario.profile.deltas(t_s);
        match self {
            Self::DeltaK => dk,
            Self::DeltaM => dm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    /// RMSE of the posterior mean against the true change, over the dense grid
    /// inside the measured range.
    pub rmse: f64,
    /// Fraction of dense in-range points whose true change lies in the 95%
    /// latent band.
    pub latent_coverage: f64,
    /// Fraction of held-out noisy estimates inside the 95% observation band;
    /// absent for noise-free runs.
    pub heldout_coverage: Option<f64>,
    pub n_heldout: usize,
    pub max_latent_variance_at_training: f64,
    pub fit: ChannelFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: Case,
    pub seed: u64,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub model: EmulatorSpec,
    /// Present when the model came out of BIC selection.
    pub bic: Option<f64>,
    pub n_flagged: usize,
    pub channels: Vec<ChannelSummary>,
}

fn write_text(dir: &Path, name: &str, text: &str) -> StageResult<()> {
    fs::write(dir.join(name), text).map_err(at(Stage::Write))
}

fn create_file(dir: &Path, name: &str) -> StageResult<BufWriter<fs::File>> {
    fs::File::create(dir.join(name)).map(BufWriter::new).map_err(at(Stage::Write))
}

pub fn simulate(scenario: &Scenario) -> StageResult<MeasurementSeries> {
    let grid = slow_time_grid(scenario.n_points, scenario.horizon).map_err(at(Stage::Simulate))?;
    sample_measurements(
        &grid,
        &scenario.profile,
        &scenario.system,
        scenario.case.measurement_kind(),
        scenario.noise_sigma,
        scenario.seed,
    )
    .map_err(at(Stage::Simulate))
}

pub fn invert(scenario: &Scenario, series: &MeasurementSeries) -> StageResult<DeltaEstimateSeries> {
    let mut est = invert_series(series, scenario.case.target()).map_err(at(Stage::Invert))?;
    est.measurement_source = Some(MEASUREMENTS_JSON.into());
    Ok(est)
}

/// Emulator inputs (`t_s / T0`) and one target vector per channel.
pub fn training_data(
    scenario: &Scenario,
    est: &DeltaEstimateSeries,
) -> StageResult<(Matrix<f64>, Vec<Vec<f64>>)> {
    let x = Matrix::column(&est.normalized_times());
    let targets = Channel::for_case(scenario.case)
        .iter()
        .map(|c| {
            c.estimates(est).cloned().ok_or_else(|| StageError {
                stage: Stage::Invert,
                message: format!("estimates carry no {} column", c.key()),
            })
        })
        .collect::<StageResult<Vec<_>>>()?;
    Ok((x, targets))
}

pub fn write_measurements(dir: &Path, series: &MeasurementSeries) -> StageResult<()> {
    series.write_csv(create_file(dir, MEASUREMENTS_CSV)?).map_err(at(Stage::Write))?;
    write_text(dir, MEASUREMENTS_JSON, &series.to_json().map_err(at(Stage::Write))?)
}

pub fn write_estimates(dir: &Path, est: &DeltaEstimateSeries) -> StageResult<()> {
    est.write_csv(create_file(dir, ESTIMATES_CSV)?).map_err(at(Stage::Write))?;
    write_text(dir, ESTIMATES_JSON, &est.to_json().map_err(at(Stage::Write))?)
}

pub fn write_selection(dir: &Path, report: &ModelSelectionReport) -> StageResult<()> {
    write_text(dir, SELECTION_JSON, &report.to_json().map_err(at(Stage::Write))?)?;
    write_text(dir, SELECTION_TXT, &report.to_table())?;
    write_text(dir, TIMINGS_CSV, &report.timings_csv())
}

pub fn read_measurements(dir: &Path) -> StageResult<MeasurementSeries> {
    let text = fs::read_to_string(dir.join(MEASUREMENTS_JSON)).map_err(at(Stage::Invert))?;
    MeasurementSeries::from_json(&text).map_err(at(Stage::Invert))
}

pub fn read_estimates(dir: &Path) -> StageResult<DeltaEstimateSeries> {
    let text = fs::read_to_string(dir.join(ESTIMATES_JSON)).map_err(at(Stage::Select))?;
    DeltaEstimateSeries::from_json(&text).map_err(at(Stage::Select))
}

/// Held-out noisy estimates at the midpoints of the measurement grid, drawn
/// from an independent noise stream.
fn held_out(scenario: &Scenario, est: &DeltaEstimateSeries) -> StageResult<DeltaEstimateSeries> {
    let mid: Vec<f64> = est.slow_times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let series = sample_measurements(
        &mid,
        &scenario.profile,
        &scenario.system,
        scenario.case.measurement_kind(),
        scenario.noise_sigma,
        scenario.seed ^ HELD_OUT_SEED_MIX,
    )
    .map_err(at(Stage::Predict))?;
    invert_series(&series, scenario.case.target()).map_err(at(Stage::Predict))
}

/// Dense prediction times in units of `T0`: `DENSE_INTERVALS` steps up to the
/// last measurement, continuing at the same spacing for another 10%.
pub fn dense_grid(last: f64) -> Vec<f64> {
    let extra = (DENSE_INTERVALS as f64 * EXTRAPOLATION_FRACTION).round() as usize;
    (0..=DENSE_INTERVALS + extra)
        .map(|i| if i == DENSE_INTERVALS { last } else { last * i as f64 / DENSE_INTERVALS as f64 })
        .collect()
}

/// Writes the emulator and dense prediction for each channel and scores them.
pub fn predict_and_write(
    dir: &Path,
    scenario: &Scenario,
    est: &DeltaEstimateSeries,
    emulators: &[TrainedEmulator],
) -> StageResult<Vec<ChannelSummary>> {
    let channels = Channel::for_case(scenario.case);
    let period = scenario.system.period();
    let times = est.normalized_times();
    let last = *times.last().ok_or_else(|| StageError {
        stage: Stage::Predict,
        message: "no estimates to train on".into(),
    })?;
    let dense = dense_grid(last);
    let dense_x = Matrix::column(&dense);
    let heldout = if scenario.noise_sigma > 0.0 { Some(held_out(scenario, est)?) } else { None };

    let mut out = Vec::with_capacity(channels.len());
    for (&channel, em) in channels.iter().zip(emulators) {
        write_text(dir, &channel.emulator_file(), &em.to_json().map_err(at(Stage::Write))?)?;

        let pred = em.predict(&dense_x).map_err(at(Stage::Predict))?;
        let latent = pred.latent_band(Z95);
        let observed = pred.observation_band(Z95);
        let mut csv = csv::Writer::from_writer(create_file(dir, &channel.prediction_file())?);
        csv.write_record([
            "t_s_over_T0",
            "true_delta",
            "posterior_mean",
            "lower95",
            "upper95",
            "obs_lower95",
            "obs_upper95",
            "latent_variance",
            "extrapolated",
        ])
        .map_err(at(Stage::Write))?;
        let (mut se, mut covered, mut n_in) = (0.0, 0usize, 0usize);
        for (i, &x) in dense.iter().enumerate() {
            let truth = channel.truth(scenario, x * period);
            let extrapolated = x > last;
            if !extrapolated {
                se += (pred.mean[i] - truth).powi(2);
                n_in += 1;
                if latent[i].0 <= truth && truth <= latent[i].1 {
                    covered += 1;
                }
            }
            csv.write_record([
                x.to_text(),
                truth.to_text(),
                pred.mean[i].to_text(),
                latent[i].0.to_text(),
                latent[i].1.to_text(),
                observed[i].0.to_text(),
                observed[i].1.to_text(),
                pred.latent_variance[i].to_text(),
                u8::from(extrapolated).to_string(),
            ])
            .map_err(at(Stage::Write))?;
        }
        csv.flush().map_err(at(Stage::Write))?;

        let max_latent_variance_at_training = times
            .iter()
            .map(|&t| em.predict_point(&[t]).1)
            .fold(0.0, f64::max);

        let (heldout_coverage, n_heldout) = match &heldout {
            Some(h) => {
                let targets = channel.estimates(h).cloned().unwrap_or_default();
                let p = em.predict(&Matrix::column(&h.normalized_times())).map_err(at(Stage::Predict))?;
                let band = p.observation_band(Z95);
                let inside = targets.iter().zip(&band).filter(|(y, b)| b.0 <= **y && **y <= b.1).count();
                (Some(inside as f64 / targets.len().max(1) as f64), targets.len())
            }
            None => (None, 0),
        };

        out.push(ChannelSummary {
            channel,
            rmse: (se / n_in as f64).sqrt(),
            latent_coverage: covered as f64 / n_in as f64,
            heldout_coverage,
            n_heldout,
            max_latent_variance_at_training,
            fit: ChannelFit::from_emulator(em),
        });
    }
    Ok(out)
}

/// Runs BIC selection over the scenario's pool on the estimates.
pub fn select(
    scenario: &Scenario,
    est: &DeltaEstimateSeries,
) -> StageResult<(ModelSelectionReport, Vec<TrainedEmulator>)> {
    let (x, targets) = training_data(scenario, est)?;
    let sel = select_model_multioutput(&scenario.pool, &x, &targets, &scenario.selection)
        .map_err(at(Stage::Select))?;
    Ok((sel.report, sel.emulators))
}

/// Fits one given mean/kernel pair, skipping selection.
pub fn fit_one(
    scenario: &Scenario,
    est: &DeltaEstimateSeries,
    spec: EmulatorSpec,
) -> StageResult<Vec<TrainedEmulator>> {
    let (x, targets) = training_data(scenario, est)?;
    fit_multioutput(spec, &x, &targets, &scenario.selection.fit).map_err(at(Stage::Fit))
}

/// Result of [`run_scenario`]: the summary on success, the failing stage
/// otherwise. Artifacts written before a failure are kept.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: StageResult<RunSummary>,
}

pub fn prepare_dir(dir: &Path) -> StageResult<()> {
    fs::create_dir_all(dir).map_err(at(Stage::Write))?;
    match fs::remove_file(dir.join(FAILED_MARKER)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(at(Stage::Write)(e)),
        _ => Ok(()),
    }
}

pub fn mark_failed(dir: &Path, err: &StageError) {
    let _ = fs::write(dir.join(FAILED_MARKER), format!("stage: {}\nerror: {}\n", err.stage, err.message));
}

/// Full pipeline into `scenario.output_dir`.
pub fn run_scenario(scenario: &Scenario) -> RunOutcome {
    let dir = scenario.output_dir.clone();
    let result = run_in(&dir, scenario);
    if let Err(e) = &result {
        mark_failed(&dir, e);
    }
    RunOutcome { dir, result }
}

fn run_in(dir: &Path, scenario: &Scenario) -> StageResult<RunSummary> {
    prepare_dir(dir)?;
    write_text(dir, CONFIG_FILE, &scenario.to_toml())?;
    let series = simulate(scenario)?;
    write_measurements(dir, &series)?;
    let est = invert(scenario, &series)?;
    write_estimates(dir, &est)?;
    let (report, emulators) = select(scenario, &est)?;
    write_selection(dir, &report)?;
    let channels = predict_and_write(dir, scenario, &est, &emulators)?;
    let winner = report.winner_record();
    let summary = RunSummary {
        case: scenario.case,
        seed: scenario.seed,
        n_points: scenario.n_points,
        noise_sigma: scenario.noise_sigma,
        model: winner.spec(),
        bic: Some(winner.bic),
        n_flagged: est.flagged.iter().filter(|&&f| f).count(),
        channels,
    };
    write_summary(dir, &summary)?;
    Ok(summary)
}

pub fn write_summary(dir: &Path, summary: &RunSummary) -> StageResult<()> {
    let text = serde_json::to_string_pretty(summary).map_err(at(Stage::Write))?;
    write_text(dir, SUMMARY_JSON, &text)
}
