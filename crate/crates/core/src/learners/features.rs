use std::f64::consts::PI;

/// Frequency scales of the Fourier feature map, ascending.
pub const FREQUENCY_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

/// `[sin(2 pi s_j I) for each scale, then cos(2 pi s_j I) for each scale]`,
/// each block as long as the input.
pub fn fourier_features(intensity: &[f64]) -> Vec<f64> {
    let n = intensity.len();
    let mut out = vec![0.0; 2 * FREQUENCY_SCALES.len() * n];
    fourier_features_into(intensity, &mut out);
    out
}

pub fn fourier_features_into(intensity: &[f64], out: &mut [f64]) {
    let n = intensity.len();
    let blocks = FREQUENCY_SCALES.len();
    for (j, s) in FREQUENCY_SCALES.iter().enumerate() {
        for (k, &v) in intensity.iter().enumerate() {
            let (sin, cos) = (2.0 * PI * s * v).sin_cos();
            out[j * n + k] = sin;
            out[(blocks + j) * n + k] = cos;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input() {
        let f = fourier_features(&[0.0; 601]);
        assert_eq!(f.len(), 3606);
        assert!(f[..1803].iter().all(|&v| v == 0.0));
        assert!(f[1803..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unit_input_half_frequency_block() {
        let f = fourier_features(&[1.0; 4]);
        // sin block for scale 0.5 is first, its cos block fourth
        assert!(f[..4].iter().all(|v| v.abs() < 1e-15));
        assert!(f[12..16].iter().all(|v| (v + 1.0).abs() < 1e-15));
    }

    proptest::proptest! {
        #[test]
        fn bounded_and_deterministic(x in proptest::collection::vec(-3.0f64..3.0, 1..50)) {
            let a = fourier_features(&x);
            proptest::prop_assert_eq!(a.len(), 6 * x.len());
            proptest::prop_assert!(a.iter().all(|v| v.abs() <= 1.0));
            proptest::prop_assert_eq!(a, fourier_features(&x));
        }
    }
}
