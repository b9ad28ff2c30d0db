use dtwin_core::dynamics::{sample_measurements, slow_time_grid, Channels, MeasurementKind};
use dtwin_core::inversion::{invert_series, InversionTarget};
use dtwin_core::{EvolutionProfile, NominalSystem};

const N: usize = 20_000;

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn residuals(kind: MeasurementKind, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    let sys = NominalSystem::default();
    let profile = EvolutionProfile::with_defaults(Channels::BOTH);
    let grid = slow_time_grid(N, 300.0).unwrap();
    let clean = sample_measurements(&grid, &profile, &sys, kind, 0.0, seed).unwrap();
    let noisy = sample_measurements(&grid, &profile, &sys, kind, sigma, seed).unwrap();
    clean
        .channels
        .iter()
        .zip(&noisy.channels)
        .map(|(c, n)| n.iter().zip(c).map(|(a, b)| a - b).collect())
        .collect()
}

#[test]
fn damped_frequency_noise_has_requested_moments() {
    let sigma = 0.01;
    let r = residuals(MeasurementKind::DampedFrequency, sigma, 21);
    let (m, s) = mean_std(&r[0]);
    assert!(m.abs() <= 3.0 * sigma / (N as f64).sqrt(), "mean {m}");
    assert!((s / sigma - 1.0).abs() <= 0.02, "std {s}");
}

#[test]
fn eigenvalue_noise_scales_real_part_by_damping_ratio() {
    let sigma = 0.02;
    let zeta0 = NominalSystem::default().damping_ratio();
    let r = residuals(MeasurementKind::ComplexEigenvalue, sigma, 8);
    for (channel, scale) in r.iter().zip([sigma * zeta0, sigma]) {
        let (m, s) = mean_std(channel);
        assert!(m.abs() <= 3.0 * scale / (N as f64).sqrt(), "mean {m}");
        assert!((s / scale - 1.0).abs() <= 0.02, "std {s} vs {scale}");
    }
}

#[test]
fn noise_is_independent_across_channels() {
    let r = residuals(MeasurementKind::ComplexEigenvalue, 0.02, 4);
    let (ma, sa) = mean_std(&r[0]);
    let (mb, sb) = mean_std(&r[1]);
    let cov = r[0].iter().zip(&r[1]).map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / (N as f64 - 1.0);
    assert!((cov / (sa * sb)).abs() < 4.0 / (N as f64).sqrt());
}

/// Small noise passes through the stiffness inversion with gain `2 w`, the
/// derivative of `w^2` with respect to the normalized frequency.
#[test]
fn stiffness_estimate_noise_follows_linearized_gain() {
    let sys = NominalSystem::default();
    let profile = EvolutionProfile::with_defaults(Channels::STIFFNESS);
    let grid = slow_time_grid(N, 300.0).unwrap();
    let sigma = 1e-3;
    let kind = MeasurementKind::DampedFrequency;
    let clean = sample_measurements(&grid, &profile, &sys, kind, 0.0, 1).unwrap();
    let noisy = sample_measurements(&grid, &profile, &sys, kind, sigma, 1).unwrap();
    let a = invert_series(&clean, InversionTarget::Stiffness).unwrap().delta_k_hat.unwrap();
    let b = invert_series(&noisy, InversionTarget::Stiffness).unwrap().delta_k_hat.unwrap();
    let scaled: Vec<f64> =
        (0..N).map(|i| (b[i] - a[i]) / (2.0 * clean.channels[0][i] * sigma)).collect();
    let (_, s) = mean_std(&scaled);
    assert!((s - 1.0).abs() <= 0.2, "normalized spread {s}");
}
