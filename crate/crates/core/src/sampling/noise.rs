//! Smoothed Gaussian noise used to augment intensity inputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const SMOOTHING_SIGMA: f64 = 9.0;
pub const KERNEL_TRUNCATION: f64 = 4.0;
/// Noise standard deviation relative to the intensity drop `|I_1 - I_N|`.
pub const NOISE_LEVEL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `I + eta`
    #[default]
    Additive,
    /// `I * (1 + eta)`
    Multiplicative,
}

/// Which signal the target standard deviation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScale {
    /// The smoothed noise itself has the target deviation.
    #[default]
    Realized,
    /// The white noise has the target deviation before smoothing.
    White,
}

impl std::str::FromStr for NoiseScale {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "realized" => Ok(NoiseScale::Realized),
            "white" => Ok(NoiseScale::White),
            other => Err(crate::Error::Config(format!(
                "unknown noise scale {other:?}"
            ))),
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "additive" => Ok(NoiseMode::Additive),
            "multiplicative" => Ok(NoiseMode::Multiplicative),
            other => Err(crate::Error::Config(format!(
                "unknown noise mode {other:?}"
            ))),
        }
    }
}

/// Normalized Gaussian weights on offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f64> {
    let radius = (truncate * sigma + 0.5) as i64;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

// Half-sample symmetric reflection: (d c b a | a b c d | d c b a).
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Convolution with reflective boundary handling.
pub fn smooth(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len() as i64;
    let radius = (kernel.len() / 2) as i64;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * x[reflect(i + j as i64 - radius, n)])
                .sum()
        })
        .collect()
}

fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Smoothed noise of length `n` rescaled to the given standard deviation.
pub fn smoothed_noise<R: Rng>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    smoothed_noise_scaled(rng, n, std, NoiseScale::Realized)
}

pub fn smoothed_noise_scaled<R: Rng>(
    rng: &mut R,
    n: usize,
    std: f64,
    basis: NoiseScale,
) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut eta = smooth(&white, &gaussian_kernel(SMOOTHING_SIGMA, KERNEL_TRUNCATION));
    let scale = match basis {
        NoiseScale::Realized => {
            let realized = population_std(&eta);
            if realized > 0.0 {
                std / realized
            } else {
                0.0
            }
        }
        NoiseScale::White => std,
    };
    eta.iter_mut().for_each(|v| *v *= scale);
    eta
}

/// Perturbed copy of an intensity series. A series with `I_1 = I_N` is
/// returned unchanged.
pub fn perturb<R: Rng>(intensity: &[f64], rng: &mut R, mode: NoiseMode) -> Vec<f64> {
    perturb_scaled(intensity, rng, mode, NoiseScale::Realized)
}

pub fn perturb_scaled<R: Rng>(
    intensity: &[f64],
    rng: &mut R,
    mode: NoiseMode,
    basis: NoiseScale,
) -> Vec<f64> {
    let n = intensity.len();
    if n < 2 {
        return intensity.to_vec();
    }
    let std = NOISE_LEVEL * (intensity[0] - intensity[n - 1]).abs();
    if std == 0.0 {
        return intensity.to_vec();
    }
    let eta = smoothed_noise_scaled(rng, n, std, basis);
    intensity
        .iter()
        .zip(&eta)
        .map(|(&i, &e)| match mode {
            NoiseMode::Additive => i + e,
            NoiseMode::Multiplicative => i * (1.0 + e),
        })
        .collect()
}
