//! Closed-form inversion of measured frequencies into fractional stiffness and
//! mass changes. These point estimates are the GP training targets.
//!
//! All distances are signed, nominal minus measured, on the `w0`-normalized
//! scale. A signed distance is needed because the mass can rise as well as fall.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{MeasurementKind, MeasurementSeries, NominalSystem};
use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// Below this magnitude `zeta0 + d_R` is treated as zero.
pub const JOINT_SINGULARITY_TOL: f64 = 1e-12;

/// An estimate together with whether it had to be pulled back into the domain
/// of the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub flagged: bool,
}

fn check_positive<T: Scalar>(name: &str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(TwinError::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

/// `dk = -d1 (2 sqrt(1 - zeta0^2) - d1)` with `d1 = sqrt(1 - zeta0^2) - w_ds/w0`.
pub fn invert_stiffness<T: Scalar>(omega_ds_norm: T, sys: &NominalSystem<T>) -> Result<T> {
    check_positive("normalized damped frequency", omega_ds_norm)?;
    let s = sys.damped_frequency_ratio();
    let d1 = s - omega_ds_norm;
    Ok(-d1 * (T::lit(2.0) * s - d1))
}

fn mass_terms<T: Scalar>(omega_ds_norm: T, sys: &NominalSystem<T>) -> Result<(T, T, T)> {
    check_positive("normalized damped frequency", omega_ds_norm)?;
    let zeta = sys.damping_ratio();
    let z2 = zeta * zeta;
    let s = sys.damped_frequency_ratio();
    let d2 = s - omega_ds_norm;
    let base = s - d2;
    let denom = T::lit(2.0) * base * base;
    if !(denom > T::epsilon()) {
        return Err(TwinError::SingularInversion(format!(
            "mass inversion denominator vanishes (d2 = {d2}, measured frequency -> 0)"
        )));
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let numer = -two * d2 * d2 + four * d2 * s - T::one() + two * z2;
    let inner = T::one() - four * d2 * d2 * z2 + T::lit(8.0) * d2 * s * z2 - four * z2
        + four * z2 * z2;
    Ok((numer, inner, denom))
}

/// Mass change from a damped-frequency reading; errors if the inner square
/// root is negative.
pub fn invert_mass<T: Scalar>(omega_ds_norm: T, sys: &NominalSystem<T>) -> Result<T> {
    let (numer, inner, denom) = mass_terms(omega_ds_norm, sys)?;
    if inner < T::zero() {
        return Err(TwinError::Domain(format!(
            "mass inversion square-root argument is negative ({inner})"
        )));
    }
    Ok((numer + inner.sqrt()) / denom)
}

/// As [`invert_mass`], but a negative square-root argument is clamped to zero
/// and the estimate flagged.
pub fn invert_mass_clamped<T: Scalar>(
    omega_ds_norm: T,
    sys: &NominalSystem<T>,
) -> Result<Estimate<T>> {
    let (numer, inner, denom) = mass_terms(omega_ds_norm, sys)?;
    let flagged = inner < T::zero();
    let root = if flagged { T::zero() } else { inner.sqrt() };
    Ok(Estimate { value: (numer + root) / denom, flagged })
}

/// Joint `(dm, dk)` from the real and imaginary parts of the eigenvalue.
///
/// With `d_R = -zeta0 - Re(lambda)/w0` and `d_I = sqrt(1 - zeta0^2) - Im(lambda)/w0`:
///
/// ```text
/// dm = -d_R / (zeta0 + d_R)
/// dk = (zeta0 d_R^2 - (1 - 2 zeta0^2) d_R + zeta0 d_I^2 - 2 zeta0 sqrt(1 - zeta0^2) d_I)
///      / (zeta0 + d_R)
/// ```
///
/// The stiffness expression is the exact inverse of the eigenvalue map. It
/// reduces to [`invert_stiffness`] when `d_R = 0`.
pub fn invert_joint<T: Scalar>(
    re_lambda_norm: T,
    im_lambda_norm: T,
    sys: &NominalSystem<T>,
) -> Result<(T, T)> {
    check_positive("imaginary part of the normalized eigenvalue", im_lambda_norm)?;
    if !re_lambda_norm.is_finite() {
        return Err(TwinError::Domain("real part of the eigenvalue is not finite".into()));
    }
    let zeta = sys.damping_ratio();
    let s = sys.damped_frequency_ratio();
    let d_r = -zeta - re_lambda_norm;
    let d_i = s - im_lambda_norm;
    let decay = zeta + d_r;
    if decay.abs() <= T::lit(JOINT_SINGULARITY_TOL) {
        return Err(TwinError::SingularInversion(format!(
            "zeta0 + d_R = {decay}: mass and stiffness are not separately identifiable"
        )));
    }
    let two = T::lit(2.0);
    let delta_m = -d_r / decay;
    let delta_k = (zeta * d_r * d_r - (T::one() - two * zeta * zeta) * d_r + zeta * d_i * d_i
        - two * zeta * s * d_i)
        / decay;
    Ok((delta_m, delta_k))
}

/// Which property the inversion attributes the frequency shift to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionTarget {
    Stiffness,
    Mass,
    Joint,
}

impl InversionTarget {
    pub fn required_kind(&self) -> MeasurementKind {
        match self {
            Self::Stiffness | Self::Mass => MeasurementKind::DampedFrequency,
            Self::Joint => MeasurementKind::ComplexEigenvalue,
        }
    }
}

/// Per-time estimates of the fractional stiffness and/or mass change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeltaEstimateSeries<T> {
    pub slow_times: Vec<T>,
    pub source_kind: MeasurementKind,
    pub target: InversionTarget,
    pub delta_k_hat: Option<Vec<T>>,
    pub delta_m_hat: Option<Vec<T>>,
    pub flagged: Vec<bool>,
    pub system: NominalSystem<T>,
    pub noise_sigma: T,
    pub seed: u64,
    /// Path of the measurement file this was computed from, when known.
    pub measurement_source: Option<String>,
}

impl<T: Scalar> DeltaEstimateSeries<T> {
    pub fn len(&self) -> usize {
        self.slow_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slow_times.is_empty()
    }

    pub fn normalized_times(&self) -> Vec<T> {
        let period = self.system.period();
        self.slow_times.iter().map(|&t| t / period).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t_s_over_T0", "delta_k_hat", "delta_m_hat", "flagged"])?;
        let cell = |col: &Option<Vec<T>>, i: usize| {
            col.as_ref().map(|c| c[i].to_text()).unwrap_or_default()
        };
        for (i, t) in self.normalized_times().into_iter().enumerate() {
            out.write_record([
                t.to_text(),
                cell(&self.delta_k_hat, i),
                cell(&self.delta_m_hat, i),
                self.flagged[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Inverts every reading in `series`. Out-of-domain readings are clamped and
/// flagged rather than dropped so the grid stays complete.
pub fn invert_series<T: Scalar>(
    series: &MeasurementSeries<T>,
    target: InversionTarget,
) -> Result<DeltaEstimateSeries<T>> {
    series.validate()?;
    if series.kind != target.required_kind() {
        return Err(TwinError::Argument(format!(
            "{target:?} inversion needs {:?} measurements, got {:?}",
            target.required_kind(),
            series.kind
        )));
    }
    let sys = &series.system;
    let n = series.len();
    let zeta_sq = sys.damping_ratio() * sys.damping_ratio();
    let non_physical = |dk: T, dm: T| {
        let (k, m) = (T::one() + dk, T::one() + dm);
        !(k > T::zero() && m > T::zero() && k * m > zeta_sq)
    };
    let mut flagged = vec![false; n];
    let (delta_k_hat, delta_m_hat) = match target {
        InversionTarget::Stiffness => {
            let mut dk = Vec::with_capacity(n);
            for (i, &w) in series.channels[0].iter().enumerate() {
                let v = invert_stiffness(w, sys)?;
                flagged[i] = non_physical(v, T::zero());
                dk.push(v);
            }
            (Some(dk), None)
        }
        InversionTarget::Mass => {
            let mut dm = Vec::with_capacity(n);
            for (i, &w) in series.channels[0].iter().enumerate() {
                let est = invert_mass_clamped(w, sys)?;
                flagged[i] = est.flagged || non_physical(T::zero(), est.value);
                dm.push(est.value);
            }
            (None, Some(dm))
        }
        InversionTarget::Joint => {
            let mut dk = Vec::with_capacity(n);
            let mut dm = Vec::with_capacity(n);
            for i in 0..n {
                let (m, k) = invert_joint(series.channels[0][i], series.channels[1][i], sys)?;
                flagged[i] = non_physical(k, m);
                dm.push(m);
                dk.push(k);
            }
            (Some(dk), Some(dm))
        }
    };
    Ok(DeltaEstimateSeries {
        slow_times: series.slow_times.clone(),
        source_kind: series.kind,
        target,
        delta_k_hat,
        delta_m_hat,
        flagged,
        system: *sys,
        noise_sigma: series.noise_sigma,
        seed: series.seed,
        measurement_source: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::modal_state;

    fn sys(zeta: f64) -> NominalSystem<f64> {
        NominalSystem::from_modal(1.0, 1.0, zeta).unwrap()
    }

    #[test]
    fn stiffness_examples() {
        let s = sys(0.05);
        assert!(invert_stiffness(s.damped_frequency_ratio(), &s).unwrap().abs() < 1e-16);
        let undamped = sys(0.0);
        assert!((invert_stiffness(0.9, &undamped).unwrap() + 0.19).abs() < 1e-15);
        let w = modal_state(-0.1, 0.0, &s, 0.0).unwrap().damped_frequency;
        assert!((invert_stiffness(w, &s).unwrap() + 0.1).abs() < 1e-12);
        assert!(invert_stiffness(0.0, &s).is_err());
    }

    #[test]
    fn mass_examples() {
        let s = sys(0.05);
        assert!(invert_mass(s.damped_frequency_ratio(), &s).unwrap().abs() < 1e-15);
        let undamped = sys(0.0);
        let w = 1.0 / 1.25f64.sqrt();
        assert!((invert_mass(w, &undamped).unwrap() - 0.25).abs() < 1e-14);
        let w = modal_state(0.0, -0.2, &s, 0.0).unwrap().damped_frequency;
        assert!((invert_mass(w, &s).unwrap() + 0.2).abs() < 1e-12);
    }

    #[test]
    fn mass_singular_and_domain_errors() {
        let s = sys(0.05);
        assert!(matches!(invert_mass(1e-300, &s), Err(TwinError::SingularInversion(_))));
        // 1 - 4 zeta^2 w^2 < 0 once w > 1 / (2 zeta) = 10
        assert!(matches!(invert_mass(10.5, &s), Err(TwinError::Domain(_))));
        let est = invert_mass_clamped(10.5, &s).unwrap();
        assert!(est.flagged && est.value.is_finite());
        assert!(!invert_mass_clamped(0.9, &s).unwrap().flagged);
    }

    #[test]
    fn joint_examples() {
        let s = sys(0.05);
        let (m, k) = invert_joint(-0.05, s.damped_frequency_ratio(), &s).unwrap();
        assert!(m.abs() < 1e-15 && k.abs() < 1e-15);
        for (dm, dk) in [(0.1, -0.05), (-0.2, -0.15)] {
            let l = modal_state(dk, dm, &s, 0.0).unwrap().eigenvalue();
            let (m, k) = invert_joint(l.re, l.im, &s).unwrap();
            assert!((m - dm).abs() < 1e-10, "{m} vs {dm}");
            assert!((k - dk).abs() < 1e-10, "{k} vs {dk}");
        }
    }

    #[test]
    fn joint_singular_when_decay_vanishes() {
        let s = sys(0.05);
        assert!(matches!(invert_joint(0.0, 0.9, &s), Err(TwinError::SingularInversion(_))));
        assert!(invert_joint(-0.05, -0.9, &s).is_err());
    }

    #[test]
    fn joint_with_fixed_mass_matches_stiffness_only() {
        let s = sys(0.05);
        for i in 0..50 {
            let dk = -0.5 + 0.8 * i as f64 / 49.0;
            let l = modal_state(dk, 0.0, &s, 0.0).unwrap().eigenvalue();
            let (_, k_joint) = invert_joint(l.re, l.im, &s).unwrap();
            let k_single = invert_stiffness(l.im, &s).unwrap();
            assert!((k_joint - k_single).abs() < 1e-9);
        }
    }

    #[test]
    fn stiffness_monotone_in_distance() {
        let s = sys(0.2);
        let root = s.damped_frequency_ratio();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let d1 = -0.5 + (root + 0.5) * i as f64 / 200.0;
            let dk = invert_stiffness(root - d1, &s).unwrap();
            assert!(dk < prev);
            prev = dk;
        }
    }

    #[test]
    fn series_rejects_wrong_kind() {
        use crate::dynamics::{sample_measurements, EvolutionProfile};
        let s = NominalSystem::default();
        let p = EvolutionProfile::default();
        let m = sample_measurements(&[0.0, 1.0], &p, &s, MeasurementKind::DampedFrequency, 0.0, 0)
            .unwrap();
        assert!(invert_series(&m, InversionTarget::Joint).is_err());
        let est = invert_series(&m, InversionTarget::Mass).unwrap();
        assert!(est.delta_k_hat.is_none());
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s_over_T0,delta_k_hat,delta_m_hat,flagged\n0,,"));
    }
}
