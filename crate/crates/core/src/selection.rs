//! BIC model selection over a pool of mean and kernel candidates.
//!
//! Every candidate is trained by [`fit`](crate::emulator::fit) and scored with
//! `k ln(n) - L`. The candidate with the lowest score wins; ties go to the
//! candidate with fewer parameters, then to the earlier one in the pool.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{
    fit_multioutput, EmulatorSpec, FitSettings, KernelFamily, KernelKind, Matrix, MeanKind,
    TrainedEmulator,
};
use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// The 30 candidates: every mean kind crossed with every kernel kind,
/// mean-major, kernels in table order.
pub fn full_pool() -> Vec<EmulatorSpec> {
    MeanKind::ALL
        .iter()
        .flat_map(|&m| KernelKind::all().into_iter().map(move |k| EmulatorSpec::new(m, k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicVariant {
    /// `k ln(n) - L`
    #[default]
    Standard,
    /// `k ln(n) - 2 L`, the textbook scaling.
    Textbook,
}

/// `k_m ln(n) - lml`
pub fn bic_score(k_m: usize, n: usize, lml: f64) -> f64 {
    bic_score_with(BicVariant::Standard, k_m, n, lml)
}

pub fn bic_score_with(variant: BicVariant, k_m: usize, n: usize, lml: f64) -> f64 {
    let penalty = k_m as f64 * (n.max(1) as f64).ln();
    match variant {
        BicVariant::Standard => penalty - lml,
        BicVariant::Textbook => penalty - 2.0 * lml,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSettings {
    pub fit: FitSettings,
    pub variant: BicVariant,
}

/// Fitted hyperparameters of one output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub beta: Vec<f64>,
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub shape: Option<f64>,
    pub noise_variance: f64,
    pub log_marginal_likelihood: f64,
}

impl ChannelFit {
    pub fn from_emulator<T: Scalar>(em: &TrainedEmulator<T>) -> Self {
        let k = em.kernel();
        Self {
            beta: em.mean().coefficients.iter().map(|v| v.as_f64()).collect(),
            signal_variance: k.signal_variance.as_f64(),
            length_scales: k.length_scales.iter().map(|v| v.as_f64()).collect(),
            shape: k.shape.map(Scalar::as_f64),
            noise_variance: em.noise_variance().as_f64(),
            log_marginal_likelihood: em.log_marginal_likelihood().as_f64(),
        }
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub mean: MeanKind,
    pub kernel: KernelKind,
    /// Parameter count `k_m`: mean coefficients + kernel hyperparameters +
    /// noise variance, summed over output channels.
    pub n_params: usize,
    /// Observation count `n`, summed over output channels.
    pub n_data: usize,
    pub log_marginal_likelihood: Option<f64>,
    /// Infinite (serialized as null) when the fit failed.
    #[serde(with = "inf_as_null")]
    pub bic: f64,
    pub seed: u64,
    pub channels: Vec<ChannelFit>,
    pub error: Option<String>,
    /// Wall-clock seconds; excluded from serialized reports so they stay
    /// reproducible.
    #[serde(skip)]
    pub fit_seconds: f64,
}

impl CandidateRecord {
    pub fn spec(&self) -> EmulatorSpec {
        EmulatorSpec::new(self.mean, self.kernel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelectionReport {
    pub variant: BicVariant,
    pub records: Vec<CandidateRecord>,
    pub winner: usize,
}

impl ModelSelectionReport {
    pub fn winner_record(&self) -> &CandidateRecord {
        &self.records[self.winner]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width table, one row per candidate, winner marked with `*`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3}  {:<10} {:<28} {:>4} {:>5} {:>24} {:>24}",
            "#", "Mean", "Covariance", "k", "n", "log-likelihood", "BIC"
        );
        for (i, r) in self.records.iter().enumerate() {
            let lml = r.log_marginal_likelihood.map_or("failed".to_string(), |v| format!("{v:.10e}"));
            let bic = if r.bic.is_finite() { format!("{:.10e}", r.bic) } else { "inf".into() };
            let mark = if i == self.winner { "*" } else { " " };
            let _ = writeln!(
                out,
                "{:>3}{} {:<10} {:<28} {:>4} {:>5} {:>24} {:>24}",
                i + 1,
                mark,
                r.mean.to_string(),
                r.kernel.to_string(),
                r.n_params,
                r.n_data,
                lml,
                bic
            );
        }
        let w = self.winner_record();
        let _ = writeln!(out, "\nselected: {} mean with {} covariance", w.mean, w.kernel);
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("mean,kernel,fit_seconds\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.mean.key(), r.kernel.key(), r.fit_seconds);
        }
        out
    }
}

/// Report plus the winning emulator(s), one per output channel.
#[derive(Debug, Clone)]
pub struct Selection<T: Scalar> {
    pub report: ModelSelectionReport,
    pub emulators: Vec<TrainedEmulator<T>>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Optimizer seed for a candidate. ARD and isotropic kernels of the same
/// family share a seed, so on 1-D inputs they produce the same fit.
pub fn candidate_seed(base: u64, spec: EmulatorSpec) -> u64 {
    let mean = MeanKind::ALL.iter().position(|&m| m == spec.mean).unwrap_or(0) as u64;
    let family = KernelFamily::ALL.iter().position(|&f| f == spec.kernel.family).unwrap_or(0) as u64;
    splitmix64(base ^ splitmix64(mean * 16 + family + 1))
}

type FitOutcome<T> = (Result<Vec<TrainedEmulator<T>>>, f64);

/// Single-output selection.
pub fn select_model<T: Scalar>(
    pool: &[EmulatorSpec],
    inputs: &Matrix<T>,
    targets: &[T],
    settings: &SelectionSettings,
) -> Result<Selection<T>> {
    select_model_multioutput(pool, inputs, &[targets.to_vec()], settings)
}

/// Selection for an independent-output GP: every channel uses the candidate's
/// mean and kernel, and the candidate's likelihood is the sum over channels.
pub fn select_model_multioutput<T: Scalar>(
    pool: &[EmulatorSpec],
    inputs: &Matrix<T>,
    targets: &[Vec<T>],
    settings: &SelectionSettings,
) -> Result<Selection<T>> {
    if pool.is_empty() {
        return Err(TwinError::Argument("candidate pool is empty".into()));
    }
    if targets.is_empty() {
        return Err(TwinError::Argument("no target series to select on".into()));
    }
    let dim = inputs.ncols();
    // with one input dimension ARD and isotropic kernels coincide; fit once
    let effective = |s: &EmulatorSpec| {
        let ard = s.kernel.ard && dim > 1;
        EmulatorSpec::new(s.mean, KernelKind { family: s.kernel.family, ard })
    };
    let mut unique: Vec<EmulatorSpec> = Vec::new();
    for s in pool {
        let e = effective(s);
        if !unique.contains(&e) {
            unique.push(e);
        }
    }
    let outcomes: Vec<FitOutcome<T>> = unique
        .par_iter()
        .map(|&spec| {
            let fit_settings =
                FitSettings { seed: candidate_seed(settings.fit.seed, spec), ..settings.fit };
            let start = Instant::now();
            let result = fit_multioutput(spec, inputs, targets, &fit_settings);
            (result, start.elapsed().as_secs_f64())
        })
        .collect();
    let by_spec: HashMap<EmulatorSpec, &FitOutcome<T>> =
        unique.iter().copied().zip(outcomes.iter()).collect();

    let n_data: usize = targets.iter().map(Vec::len).sum();
    let mut records = Vec::with_capacity(pool.len());
    for spec in pool {
        let (result, seconds) = by_spec[&effective(spec)];
        let seed = candidate_seed(settings.fit.seed, *spec);
        let record = match result {
            Ok(ems) => {
                let lml: f64 = ems.iter().map(|e| e.log_marginal_likelihood().as_f64()).sum();
                let n_params: usize = ems.iter().map(TrainedEmulator::n_params).sum();
                CandidateRecord {
                    mean: spec.mean,
                    kernel: spec.kernel,
                    n_params,
                    n_data,
                    log_marginal_likelihood: Some(lml),
                    bic: bic_score_with(settings.variant, n_params, n_data, lml),
                    seed,
                    channels: ems.iter().map(ChannelFit::from_emulator).collect(),
                    error: None,
                    fit_seconds: *seconds,
                }
            }
            Err(e) => CandidateRecord {
                mean: spec.mean,
                kernel: spec.kernel,
                n_params: targets.len()
                    * (spec.mean.n_coefficients(dim) + spec.kernel.n_params(dim) + 1),
                n_data,
                log_marginal_likelihood: None,
                bic: f64::INFINITY,
                seed,
                channels: Vec::new(),
                error: Some(e.to_string()),
                fit_seconds: *seconds,
            },
        };
        records.push(record);
    }

    let winner = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.bic.is_finite())
        .min_by(|(i, a), (j, b)| {
            a.bic
                .partial_cmp(&b.bic)
                .unwrap_or(Ordering::Equal)
                .then(a.n_params.cmp(&b.n_params))
                .then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .ok_or(TwinError::SelectionFailed(pool.len()))?;

    let winning_spec = pool[winner];
    let emulators = match &by_spec[&effective(&winning_spec)].0 {
        Ok(ems) => ems.iter().cloned().map(|e| e.with_kernel_kind(winning_spec.kernel)).collect(),
        Err(_) => unreachable!("winner has a finite score"),
    };
    Ok(Selection { report: ModelSelectionReport { variant: settings.variant, records, winner }, emulators })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_examples() {
        assert_eq!(bic_score(0, 30, 12.5), -12.5);
        assert!((bic_score(2, 30, 10.0) - (2.0 * 30f64.ln() - 10.0)).abs() < 1e-15);
        assert_eq!(bic_score(7, 1, 3.0), -3.0);
        assert_eq!(bic_score_with(BicVariant::Textbook, 0, 5, 2.0), -4.0);
    }

    #[test]
    fn bic_increases_with_parameter_count() {
        for n in 3..50 {
            for k in 0..10 {
                assert!(bic_score(k + 1, n, -4.0) > bic_score(k, n, -4.0));
            }
        }
    }

    #[test]
    fn pool_has_thirty_distinct_candidates() {
        let pool = full_pool();
        assert_eq!(pool.len(), 30);
        let mut seen = pool.clone();
        seen.dedup();
        assert_eq!(seen.len(), 30);
        assert_eq!(pool[0].mean, MeanKind::Constant);
        assert_eq!(pool[29].kernel, KernelKind::ard(KernelFamily::RationalQuadratic));
    }

    fn data() -> (Matrix<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y = t.iter().map(|&v| (0.8 * v).sin() + 0.02 * ((13.0 * v).sin())).collect();
        (Matrix::column(&t), y)
    }

    #[test]
    fn pool_of_one_wins() {
        let (x, y) = data();
        let pool = [EmulatorSpec::new(MeanKind::Linear, KernelKind::iso(KernelFamily::Matern32))];
        let sel = select_model(&pool, &x, &y, &SelectionSettings::default()).unwrap();
        assert_eq!(sel.report.winner, 0);
        assert_eq!(sel.report.records.len(), 1);
        assert_eq!(sel.report.records[0].n_params, 2 + 2 + 1);
        assert_eq!(sel.emulators.len(), 1);
    }

    #[test]
    fn ard_in_one_dimension_ties_and_loses_to_isotropic() {
        let (x, y) = data();
        let pool = [
            EmulatorSpec::new(MeanKind::Constant, KernelKind::ard(KernelFamily::SquaredExponential)),
            EmulatorSpec::new(MeanKind::Constant, KernelKind::iso(KernelFamily::SquaredExponential)),
        ];
        let sel = select_model(&pool, &x, &y, &SelectionSettings::default()).unwrap();
        let r = &sel.report.records;
        assert_eq!(r[0].bic, r[1].bic);
        // equal score and parameter count: pool order decides
        assert_eq!(sel.report.winner, 0);
        assert_eq!(sel.emulators[0].kernel().kind, pool[0].kernel);
    }

    #[test]
    fn failed_candidates_get_infinite_score() {
        // two points cannot identify a quadratic mean
        let x = Matrix::column(&[0.0, 1.0]);
        let y = [0.0, 1.0];
        let pool = [
            EmulatorSpec::new(MeanKind::Quadratic, KernelKind::iso(KernelFamily::Matern52)),
            EmulatorSpec::new(MeanKind::Constant, KernelKind::iso(KernelFamily::Matern52)),
        ];
        let sel = select_model(&pool, &x, &y, &SelectionSettings::default()).unwrap();
        assert!(sel.report.records[0].bic.is_infinite());
        assert!(sel.report.records[0].error.is_some());
        assert_eq!(sel.report.winner, 1);
        let json = sel.report.to_json().unwrap();
        assert!(json.contains("\"bic\": null"));
        assert_eq!(ModelSelectionReport::from_json(&json).unwrap().to_json().unwrap(), json);

        let all_bad = [pool[0]];
        assert!(matches!(
            select_model(&all_bad, &x, &y, &SelectionSettings::default()),
            Err(TwinError::SelectionFailed(1))
        ));
    }

    #[test]
    fn table_marks_winner() {
        let (x, y) = data();
        let pool = [
            EmulatorSpec::new(MeanKind::Constant, KernelKind::iso(KernelFamily::Exponential)),
            EmulatorSpec::new(MeanKind::Constant, KernelKind::iso(KernelFamily::SquaredExponential)),
        ];
        let sel = select_model(&pool, &x, &y, &SelectionSettings::default()).unwrap();
        let table = sel.report.to_table();
        assert!(table.contains("Squared Exponential"));
        assert!(table.contains(&format!("{:>3}*", sel.report.winner + 1)));
    }
}
