//! Physical twin: a damped single-degree-of-freedom oscillator whose mass and
//! stiffness drift on a slow service timescale `t_s`.
//!
//! The fast dynamics are never integrated. Everything downstream only needs the
//! eigenvalues of the instantaneous system, which the sensors are assumed to
//! report (damped frequency, or real and imaginary parts of the eigenvalue).

use std::io::Write;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// Mass, damping and stiffness at the start of service life.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem<T>", into = "RawSystem<T>")]
#[serde(bound = "T: Scalar")]
pub struct NominalSystem<T> {
    mass: T,
    damping: T,
    stiffness: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawSystem<T> {
    mass: T,
    damping: T,
    stiffness: T,
}

impl<T: Scalar> TryFrom<RawSystem<T>> for NominalSystem<T> {
    type Error = TwinError;
    fn try_from(raw: RawSystem<T>) -> Result<Self> {
        Self::new(raw.mass, raw.damping, raw.stiffness)
    }
}

impl<T: Scalar> From<NominalSystem<T>> for RawSystem<T> {
    fn from(sys: NominalSystem<T>) -> Self {
        RawSystem { mass: sys.mass, damping: sys.damping, stiffness: sys.stiffness }
    }
}

impl<T: Scalar> NominalSystem<T> {
    pub fn new(mass: T, damping: T, stiffness: T) -> Result<Self> {
        if !(mass > T::zero() && mass.is_finite()) {
            return Err(TwinError::Argument(format!("mass must be positive, got {mass}")));
        }
        if !(stiffness > T::zero() && stiffness.is_finite()) {
            return Err(TwinError::Argument(format!("stiffness must be positive, got {stiffness}")));
        }
        if !(damping >= T::zero() && damping.is_finite()) {
            return Err(TwinError::Argument(format!("damping must be non-negative, got {damping}")));
        }
        let sys = Self { mass, damping, stiffness };
        if sys.damping_ratio() >= T::one() {
            return Err(TwinError::Argument(format!(
                "underdamped required: damping ratio {} must be below 1",
                sys.damping_ratio()
            )));
        }
        Ok(sys)
    }

    /// Builds the system from modal quantities: `k0 = m0 w0^2`, `c0 = 2 zeta0 sqrt(k0 m0)`.
    pub fn from_modal(mass: T, natural_frequency: T, damping_ratio: T) -> Result<Self> {
        if !(natural_frequency > T::zero() && natural_frequency.is_finite()) {
            return Err(TwinError::Argument(format!(
                "natural frequency must be positive, got {natural_frequency}"
            )));
        }
        if !(damping_ratio >= T::zero() && damping_ratio < T::one()) {
            return Err(TwinError::Argument(format!(
                "underdamped required: damping ratio {damping_ratio} must lie in [0, 1)"
            )));
        }
        let stiffness = mass * natural_frequency * natural_frequency;
        let damping = T::lit(2.0) * damping_ratio * (stiffness * mass).sqrt();
        Self::new(mass, damping, stiffness)
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn damping(&self) -> T {
        self.damping
    }

    pub fn stiffness(&self) -> T {
        self.stiffness
    }

    /// `w0 = sqrt(k0 / m0)`
    pub fn natural_frequency(&self) -> T {
        (self.stiffness / self.mass).sqrt()
    }

    /// `zeta0 = c0 / (2 sqrt(k0 m0))`
    pub fn damping_ratio(&self) -> T {
        self.damping / (T::lit(2.0) * (self.stiffness * self.mass).sqrt())
    }

    /// `T0 = 2 pi / w0`
    pub fn period(&self) -> T {
        T::TAU() / self.natural_frequency()
    }

    /// Nominal damped frequency divided by `w0`, i.e. `sqrt(1 - zeta0^2)`.
    pub fn damped_frequency_ratio(&self) -> T {
        let z = self.damping_ratio();
        (T::one() - z * z).sqrt()
    }
}

impl Default for NominalSystem<f64> {
    /// Unit mass, `w0 = 2 pi` (so `T0 = 1`) and 5% damping.
    fn default() -> Self {
        Self::from_modal(1.0, std::f64::consts::TAU, 0.05).expect("valid default system")
    }
}

/// Which slowly varying properties are allowed to drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    pub stiffness: bool,
    pub mass: bool,
}

impl Channels {
    pub const STIFFNESS: Self = Self { stiffness: true, mass: false };
    pub const MASS: Self = Self { stiffness: false, mass: true };
    pub const BOTH: Self = Self { stiffness: true, mass: true };
}

/// Ground-truth drift of stiffness (decaying cosine) and mass (sawtooth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EvolutionProfile<T> {
    pub alpha_k: T,
    pub epsilon_k: T,
    pub beta_k: T,
    pub beta_m: T,
    pub epsilon_m: T,
    pub channels: Channels,
}

impl<T: Scalar> EvolutionProfile<T> {
    pub fn with_defaults(channels: Channels) -> Self {
        Self {
            alpha_k: T::lit(4e-4),
            epsilon_k: T::lit(0.05),
            beta_k: T::lit(2e-2),
            beta_m: T::lit(0.15),
            epsilon_m: T::lit(0.25),
            channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha_k, self.epsilon_k, self.beta_k, self.beta_m, self.epsilon_m]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(TwinError::Argument("profile parameters must be finite".into()));
        }
        if self.epsilon_k <= -T::one() {
            return Err(TwinError::Argument(format!(
                "epsilon_k must exceed -1, got {}",
                self.epsilon_k
            )));
        }
        if self.channels.mass && self.beta_m <= T::zero() {
            return Err(TwinError::Argument(format!(
                "beta_m must be positive, got {}",
                self.beta_m
            )));
        }
        Ok(())
    }

    /// Stiffness drift, `exp(-alpha_k t) (1 + eps_k cos(beta_k t)) / (1 + eps_k) - 1`.
    pub fn delta_k(&self, t_s: T) -> T {
        let one = T::one();
        (-self.alpha_k * t_s).exp() * (one + self.epsilon_k * (self.beta_k * t_s).cos())
            / (one + self.epsilon_k)
            - one
    }

    /// Mass drift, `eps_m * sawtooth(beta_m (t - pi / beta_m))`.
    ///
    /// Evaluated through the cycle count `beta_m t / 2 pi` so that whole periods
    /// land exactly on the lower branch of the sawtooth.
    pub fn delta_m(&self, t_s: T) -> T {
        let cycles = self.beta_m * t_s / T::TAU();
        let mut frac = cycles - cycles.floor();
        if T::one() - frac <= T::epsilon() * T::lit(4.0) * (cycles.abs() + T::one()) {
            frac = T::zero();
        }
        self.epsilon_m * (T::lit(2.0) * frac - T::one())
    }

    /// `(dk, dm)` with disabled channels pinned to zero.
    pub fn deltas(&self, t_s: T) -> (T, T) {
        let dk = if self.channels.stiffness { self.delta_k(t_s) } else { T::zero() };
        let dm = if self.channels.mass { self.delta_m(t_s) } else { T::zero() };
        (dk, dm)
    }
}

impl Default for EvolutionProfile<f64> {
    fn default() -> Self {
        Self::with_defaults(Channels::BOTH)
    }
}

/// `2 pi`-periodic sawtooth equal to `x / pi` on `[-pi, pi)`.
pub fn sawtooth<T: Scalar>(x: T) -> T {
    let shifted = (x + T::PI()) / T::TAU();
    let frac = shifted - shifted.floor();
    let frac = if frac >= T::one() { T::zero() } else { frac };
    T::lit(2.0) * frac - T::one()
}

pub fn delta_k_true<T: Scalar>(t_s: T, profile: &EvolutionProfile<T>) -> T {
    profile.delta_k(t_s)
}

pub fn delta_m_true<T: Scalar>(t_s: T, profile: &EvolutionProfile<T>) -> T {
    profile.delta_m(t_s)
}

/// Instantaneous modal quantities of the drifted system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalState<T> {
    pub natural_frequency: T,
    pub damping_ratio: T,
    pub damped_frequency: T,
}

impl<T: Scalar> ModalState<T> {
    /// Upper eigenvalue `-w_s zeta_s + i w_ds`.
    pub fn eigenvalue(&self) -> Complex<T> {
        Complex::new(-self.natural_frequency * self.damping_ratio, self.damped_frequency)
    }
}

/// Modal state for given fractional drifts of stiffness and mass.
pub fn modal_state<T: Scalar>(
    delta_k: T,
    delta_m: T,
    sys: &NominalSystem<T>,
    t_s: T,
) -> Result<ModalState<T>> {
    let one = T::one();
    let k_ratio = one + delta_k;
    let m_ratio = one + delta_m;
    let zeta0 = sys.damping_ratio();
    let product = k_ratio * m_ratio;
    if !(k_ratio > T::zero() && m_ratio > T::zero() && product > zeta0 * zeta0) {
        return Err(TwinError::Overdamped {
            t_s: t_s.as_f64(),
            product: product.as_f64(),
            zeta_sq: (zeta0 * zeta0).as_f64(),
        });
    }
    let natural_frequency = sys.natural_frequency() * k_ratio.sqrt() / m_ratio.sqrt();
    let damping_ratio = zeta0 / (m_ratio.sqrt() * k_ratio.sqrt());
    let damped_frequency = natural_frequency * (one - damping_ratio * damping_ratio).sqrt();
    Ok(ModalState { natural_frequency, damping_ratio, damped_frequency })
}

/// Upper eigenvalue of the drifted system at `t_s`; the other is its conjugate.
pub fn eigenvalue<T: Scalar>(
    t_s: T,
    profile: &EvolutionProfile<T>,
    sys: &NominalSystem<T>,
) -> Result<Complex<T>> {
    let (dk, dm) = profile.deltas(t_s);
    Ok(modal_state(dk, dm, sys, t_s)?.eigenvalue())
}

/// Both eigenvalues, upper first.
pub fn eigenvalues<T: Scalar>(
    t_s: T,
    profile: &EvolutionProfile<T>,
    sys: &NominalSystem<T>,
) -> Result<[Complex<T>; 2]> {
    let upper = eigenvalue(t_s, profile, sys)?;
    Ok([upper, upper.conj()])
}

/// `n_points` uniformly spaced slow times on `[0, horizon]`.
pub fn slow_time_grid<T: Scalar>(n_points: usize, horizon: T) -> Result<Vec<T>> {
    if n_points < 2 {
        return Err(TwinError::Argument(format!(
            "slow-time grid needs at least 2 points, got {n_points}"
        )));
    }
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(TwinError::Argument(format!("horizon must be positive, got {horizon}")));
    }
    let last = T::from_usize_lossy(n_points - 1);
    let mut grid: Vec<T> =
        (0..n_points).map(|i| horizon * T::from_usize_lossy(i) / last).collect();
    grid[n_points - 1] = horizon;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    /// `w_ds / w0`
    DampedFrequency,
    /// `(Re lambda / w0, Im lambda / w0)`
    ComplexEigenvalue,
}

impl MeasurementKind {
    pub fn channel_names(&self) -> &'static [&'static str] {
        match self {
            Self::DampedFrequency => &["omega_ds_norm"],
            Self::ComplexEigenvalue => &["re_lambda_norm", "im_lambda_norm"],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names().len()
    }
}

/// Sensor readings on a slow-time grid.
///
/// Values are normalized by `w0`. Noise on the damped frequency and on the
/// imaginary part has standard deviation `noise_sigma` on that scale; noise on
/// the real part is relative to the nominal decay rate, i.e. its standard
/// deviation is `noise_sigma * zeta0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeasurementSeries<T> {
    pub slow_times: Vec<T>,
    pub kind: MeasurementKind,
    /// One vector per channel, each aligned with `slow_times`.
    pub channels: Vec<Vec<T>>,
    pub noise_sigma: T,
    pub seed: u64,
    pub system: NominalSystem<T>,
    pub profile: EvolutionProfile<T>,
}

impl<T: Scalar> MeasurementSeries<T> {
    pub fn len(&self) -> usize {
        self.slow_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slow_times.is_empty()
    }

    /// Slow times in units of the nominal period.
    pub fn normalized_times(&self) -> Vec<T> {
        let period = self.system.period();
        self.slow_times.iter().map(|&t| t / period).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.slow_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(TwinError::Argument("slow times must be strictly increasing".into()));
        }
        if self.channels.len() != self.kind.n_channels()
            || self.channels.iter().any(|c| c.len() != self.slow_times.len())
        {
            return Err(TwinError::Argument("channel lengths do not match the slow-time grid".into()));
        }
        if !(self.noise_sigma >= T::zero()) {
            return Err(TwinError::Argument("noise sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t_s_over_T0"];
        header.extend_from_slice(self.kind.channel_names());
        out.write_record(&header)?;
        for (i, t) in self.normalized_times().into_iter().enumerate() {
            let mut row = vec![t.to_text()];
            row.extend(self.channels.iter().map(|c| c[i].to_text()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let series: Self = serde_json::from_str(text)?;
        series.validate()?;
        Ok(series)
    }
}

/// Simulates sensor readings on `grid`, adding i.i.d. Gaussian noise drawn from
/// a ChaCha8 stream seeded with `seed`.
pub fn sample_measurements<T: Scalar>(
    grid: &[T],
    profile: &EvolutionProfile<T>,
    sys: &NominalSystem<T>,
    kind: MeasurementKind,
    noise_sigma: T,
    seed: u64,
) -> Result<MeasurementSeries<T>> {
    if grid.is_empty() {
        return Err(TwinError::Argument("measurement grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(TwinError::Argument("measurement grid must be strictly increasing".into()));
    }
    if !(noise_sigma >= T::zero() && noise_sigma.is_finite()) {
        return Err(TwinError::Argument(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    profile.validate()?;

    let w0 = sys.natural_frequency();
    let zeta0 = sys.damping_ratio();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: T| -> T {
        let z: f64 = StandardNormal.sample(&mut rng);
        noise_sigma * scale * T::lit(z)
    };

    let mut channels = vec![Vec::with_capacity(grid.len()); kind.n_channels()];
    for &t in grid {
        let lambda = eigenvalue(t, profile, sys)?;
        match kind {
            MeasurementKind::DampedFrequency => {
                channels[0].push(lambda.im / w0 + draw(T::one()));
            }
            MeasurementKind::ComplexEigenvalue => {
                channels[0].push(lambda.re / w0 + draw(zeta0));
                channels[1].push(lambda.im / w0 + draw(T::one()));
            }
        }
    }

    Ok(MeasurementSeries {
        slow_times: grid.to_vec(),
        kind,
        channels,
        noise_sigma,
        seed,
        system: *sys,
        profile: *profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-14;

    fn default_profile() -> EvolutionProfile<f64> {
        EvolutionProfile::default()
    }

    #[test]
    fn nominal_system_derived_quantities() {
        let sys = NominalSystem::from_modal(2.0, 3.0, 0.1).unwrap();
        assert!((sys.natural_frequency() - 3.0_f64).abs() < EPS);
        assert!((sys.damping_ratio() - 0.1_f64).abs() < EPS);
        assert!((sys.period() - std::f64::consts::TAU / 3.0).abs() < EPS);
        let direct = NominalSystem::new(sys.mass(), sys.damping(), sys.stiffness()).unwrap();
        assert_eq!(direct, sys);
    }

    #[test]
    fn nominal_system_rejects_overdamped_and_nonpositive() {
        assert!(NominalSystem::from_modal(1.0, 1.0, 1.2).is_err());
        assert!(NominalSystem::new(0.0, 0.1, 1.0).is_err());
        assert!(NominalSystem::new(1.0, -0.1, 1.0).is_err());
        assert!(NominalSystem::new(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn delta_k_examples() {
        let p = default_profile();
        assert_eq!(p.delta_k(0.0), 0.0);
        let t = std::f64::consts::PI / 2e-2;
        // exp(-4e-4 * pi / 0.02) * 0.95 / 1.05 - 1
        assert!((p.delta_k(t) - (-0.15033685804468766)).abs() < 1e-15);
        let flat = EvolutionProfile { alpha_k: 0.0, epsilon_k: 0.0, ..p };
        for t in [0.0, 1.0, 123.4, 1e4] {
            assert_eq!(flat.delta_k(t), 0.0);
        }
    }

    #[test]
    fn delta_m_examples() {
        let p = default_profile();
        let period = std::f64::consts::TAU / p.beta_m;
        assert_eq!(p.delta_m(0.0), -0.25);
        assert!(p.delta_m(std::f64::consts::PI / p.beta_m).abs() < 1e-12);
        // next zero crossing one period later
        assert!(p.delta_m(3.0 * std::f64::consts::PI / p.beta_m).abs() < 1e-12);
        // whole periods sit on the lower branch of the jump
        assert_eq!(p.delta_m(period), -0.25);
        assert_eq!(p.delta_m(2.0 * period), -0.25);
        assert!(p.delta_m(period * 0.999) > 0.24);
    }

    #[test]
    fn sawtooth_branch_convention() {
        use std::f64::consts::PI;
        assert_eq!(sawtooth(-PI), -1.0);
        assert_eq!(sawtooth(0.0), 0.0);
        assert!((sawtooth(PI / 2.0) - 0.5).abs() < EPS);
        assert!((sawtooth(PI - 1e-9) - 1.0).abs() < 1e-8);
        assert!((sawtooth(2.5 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_nominal() {
        let sys = NominalSystem::default();
        let p = EvolutionProfile { alpha_k: 0.0, epsilon_k: 0.0, epsilon_m: 0.0, ..default_profile() };
        let lambda = eigenvalue(17.0, &p, &sys).unwrap();
        let w0 = sys.natural_frequency();
        let z = sys.damping_ratio();
        assert!((lambda.re + z * w0).abs() < 1e-13);
        assert!((lambda.im - w0 * (1.0 - z * z).sqrt()).abs() < 1e-13);
        let pair = eigenvalues(17.0, &p, &sys).unwrap();
        assert_eq!(pair[1], pair[0].conj());
    }

    #[test]
    fn damped_frequency_direct_examples() {
        let undamped = NominalSystem::from_modal(1.0, 1.0, 0.0).unwrap();
        let state = modal_state(-0.19, 0.0, &undamped, 0.0).unwrap();
        assert!((state.damped_frequency - 0.9_f64).abs() < 1e-15);

        let damped = NominalSystem::from_modal(1.0, 1.0, 0.05).unwrap();
        let state = modal_state(-0.1, 0.0, &damped, 0.0).unwrap();
        assert!((state.damped_frequency - 0.9473647660748209_f64).abs() < 1e-15);
    }

    #[test]
    fn overdamped_is_reported() {
        let sys = NominalSystem::from_modal(1.0, 1.0, 0.5).unwrap();
        let err = modal_state(-0.8, 0.0, &sys, 3.0).unwrap_err();
        assert!(matches!(err, TwinError::Overdamped { .. }));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(slow_time_grid(2, 1.0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(slow_time_grid(3, 1.0).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = slow_time_grid(30, 290.0).unwrap();
        assert_eq!(g.len(), 30);
        assert!(g.windows(2).all(|w| ((w[1] - w[0]) - 10.0_f64).abs() < 1e-12));
        assert!(matches!(slow_time_grid::<f64>(1, 1.0), Err(TwinError::Argument(_))));
        assert!(slow_time_grid(5, 0.0f64).is_err());
    }

    #[test]
    fn clean_measurements_are_exact_and_seeded_are_deterministic() {
        let sys = NominalSystem::default();
        let p = default_profile();
        let grid = slow_time_grid(30, 300.0).unwrap();
        let clean =
            sample_measurements(&grid, &p, &sys, MeasurementKind::ComplexEigenvalue, 0.0, 9).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let l = eigenvalue(t, &p, &sys).unwrap() / sys.natural_frequency();
            assert_eq!(clean.channels[0][i], l.re);
            assert_eq!(clean.channels[1][i], l.im);
        }
        let a = sample_measurements(&grid, &p, &sys, MeasurementKind::DampedFrequency, 0.005, 4)
            .unwrap();
        let b = sample_measurements(&grid, &p, &sys, MeasurementKind::DampedFrequency, 0.005, 4)
            .unwrap();
        assert_eq!(a, b);
        let c = sample_measurements(&grid, &p, &sys, MeasurementKind::DampedFrequency, 0.005, 5)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn measurement_preconditions() {
        let sys = NominalSystem::default();
        let p = default_profile();
        let kind = MeasurementKind::DampedFrequency;
        assert!(sample_measurements::<f64>(&[], &p, &sys, kind, 0.0, 0).is_err());
        assert!(sample_measurements(&[1.0, 1.0], &p, &sys, kind, 0.0, 0).is_err());
        assert!(sample_measurements(&[0.0, 1.0], &p, &sys, kind, -0.1, 0).is_err());
    }

    #[test]
    fn csv_and_json_surfaces() {
        let sys = NominalSystem::from_modal(1.0, std::f64::consts::PI, 0.05).unwrap();
        let p = default_profile();
        let grid = slow_time_grid(4, 6.0).unwrap();
        let series =
            sample_measurements(&grid, &p, &sys, MeasurementKind::ComplexEigenvalue, 0.01, 3)
                .unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_s_over_T0,re_lambda_norm,im_lambda_norm"));
        // T0 = 2 here, so the last row is at 6 / 2 = 3
        assert!(text.lines().last().unwrap().starts_with("3,"));
        assert_eq!(text.lines().count(), 5);

        let json = series.to_json().unwrap();
        assert!(json.contains("\"seed\": 3"));
        assert!(json.contains("\"beta_m\""));
        let back = MeasurementSeries::<f64>::from_json(&json).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn works_in_single_precision() {
        let sys = NominalSystem::<f32>::from_modal(1.0, std::f32::consts::TAU, 0.05).unwrap();
        let p = EvolutionProfile::<f32>::with_defaults(Channels::BOTH);
        let l = eigenvalue(10.0f32, &p, &sys).unwrap();
        let l64 = eigenvalue(10.0f64, &default_profile(), &NominalSystem::default()).unwrap();
        assert!((l.im as f64 - l64.im).abs() < 1e-5);
    }
}
