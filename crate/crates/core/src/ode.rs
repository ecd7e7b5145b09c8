//! Spatially uniform film model at the glob center: thickness and osmolarity
//! driven by osmosis, evaporation and a decaying extensional shear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{Dopri5, DopriOptions, Outcome};
use crate::physics::{intensity, OdeNondim};
use crate::series::{time_grid, TimeSeries, SERIES_LEN};

/// Thickness below which the trajectory is abandoned.
pub const H_FLOOR: f64 = 1e-3;

/// Nondimensional shear rate `b1 exp(-b2 t)`.
pub fn shear(t: f64, b1: f64, b2: f64) -> f64 {
    b1 * (-b2 * t).exp()
}

/// Right-hand side for the state `(h, c)`.
pub fn ode_rhs(state: (f64, f64), t: f64, p: &OdeNondim) -> Result<(f64, f64)> {
    let (h, c) = state;
    if !(h > 0.0) {
        return Err(Error::SingularState(format!("h = {h} at t = {t}")));
    }
    let g = shear(t, p.b1, p.b2);
    let osmosis = p.pc * (c - 1.0);
    let dh = osmosis - g * h - p.je;
    // (-g h c - dh c) / h with the shear terms cancelled analytically
    let dc = (p.je - osmosis) * c / h;
    Ok((dh, dc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Complete,
    /// Thickness dropped below [`H_FLOOR`] at time `t`; the series stop there.
    FloorReached {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    pub h: TimeSeries,
    pub c: TimeSeries,
    pub f: TimeSeries,
    pub intensity: TimeSeries,
    pub params: OdeNondim,
    pub status: SolveStatus,
}

impl OdeSolution {
    pub fn is_complete(&self) -> bool {
        self.status == SolveStatus::Complete
    }
}

/// Integrates from `h = c = 1` over t in [0, 1] and samples the standard grid.
pub fn simulate_ode(p: &OdeNondim) -> Result<OdeSolution> {
    simulate_ode_with(p, DopriOptions::default(), SERIES_LEN)
}

pub fn simulate_ode_with(
    p: &OdeNondim,
    options: DopriOptions,
    samples: usize,
) -> Result<OdeSolution> {
    if !(p.phi > 0.0 && p.f0 > 0.0) {
        return Err(Error::InvalidParameter(
            "phi and f0 must be positive".into(),
        ));
    }
    let grid = time_grid(samples);
    let mut solver = Dopri5::new(options);
    let (states, outcome) = solver.solve(
        |t, y, dy| {
            let (dh, dc) = ode_rhs((y[0], y[1]), t, p)?;
            dy[0] = dh;
            dy[1] = dc;
            Ok(())
        },
        &[1.0, 1.0],
        &grid,
        |_, y| y[0] < H_FLOOR,
    )?;
    let status = match outcome {
        Outcome::Complete => SolveStatus::Complete,
        Outcome::Stopped { t } => SolveStatus::FloorReached { t },
    };
    let h = TimeSeries::new(states.iter().map(|s| s[0]).collect())?;
    let c = TimeSeries::new(states.iter().map(|s| s[1]).collect())?;
    let f = c.map(|ck| p.f0 * ck)?;
    let intensity = intensity(&h, &f, p.phi)?;
    Ok(OdeSolution {
        h,
        c,
        f,
        intensity,
        params: *p,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nondim(pc: f64, je: f64, b1: f64, b2: f64) -> OdeNondim {
        OdeNondim {
            pc,
            je,
            f0: 0.8,
            b1,
            b2,
            phi: 0.4,
        }
    }

    #[test]
    fn shear_examples() {
        assert_eq!(shear(0.0, 1.7, 3.0), 1.7);
        assert_eq!(shear(0.6, 1.7, 0.0), 1.7);
        assert!((shear(1.0, 2.0, 2.0) - 0.2707).abs() < 1e-4);
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(
            ode_rhs((1.0, 1.0), 0.3, &nondim(0.7, 0.0, 0.0, 0.0)).unwrap(),
            (0.0, 0.0)
        );
        let (dh, dc) = ode_rhs((1.0, 1.0), 0.0, &nondim(0.0, 0.5, 0.0, 0.0)).unwrap();
        assert!((dh + 0.5).abs() < 1e-15 && (dc - 0.5).abs() < 1e-15);
        let (dh, dc) = ode_rhs((1.0, 1.0), 0.0, &nondim(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert!((dh + 1.0).abs() < 1e-15 && dc.abs() < 1e-15);
        assert!(matches!(
            ode_rhs((0.0, 1.0), 0.0, &nondim(0.0, 0.0, 0.0, 0.0)),
            Err(Error::SingularState(_))
        ));
    }

    #[test]
    fn simplified_rhs_matches_original_form() {
        let p = nondim(0.6, 1.3, 0.8, 1.1);
        for &(h, c, t) in &[(0.7, 1.4, 0.2), (0.3, 2.5, 0.9), (1.05, 0.98, 0.0)] {
            let g = shear(t, p.b1, p.b2);
            let dh = p.pc * (c - 1.0) - g * h - p.je;
            let dc = (-g * h * c - dh * c) / h;
            let (a, b) = ode_rhs((h, c), t, &p).unwrap();
            assert!((a - dh).abs() < 1e-14);
            assert!((b - dc).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_thinning_closed_form() {
        let sol = simulate_ode(&nondim(0.0, 0.5, 0.0, 0.0)).unwrap();
        assert!(sol.is_complete());
        for (k, t) in time_grid(SERIES_LEN).into_iter().enumerate() {
            assert!((sol.h[k] - (1.0 - 0.5 * t)).abs() < 1e-6);
            assert!((sol.c[k] - 1.0 / (1.0 - 0.5 * t)).abs() < 1e-6);
            assert!((sol.f[k] - 0.8 * sol.c[k]).abs() < 1e-15);
        }
        assert_eq!(sol.intensity[0], 1.0);
    }

    #[test]
    fn fixed_point_without_forcing() {
        let sol = simulate_ode(&nondim(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(sol
            .h
            .iter()
            .chain(sol.c.iter())
            .all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn solute_follows_shear_integral() {
        let (b1, b2) = (1.3, 0.7);
        let sol = simulate_ode(&nondim(0.0, 0.0, b1, b2)).unwrap();
        for (k, t) in time_grid(SERIES_LEN).into_iter().enumerate() {
            let expected = (-(b1 / b2) * (1.0 - (-b2 * t).exp())).exp();
            assert!((sol.h[k] * sol.c[k] - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn floor_breach_is_flagged() {
        let sol = simulate_ode(&nondim(0.0, 3.0, 0.0, 0.0)).unwrap();
        match sol.status {
            SolveStatus::FloorReached { t } => assert!(t < 1.0 / 3.0 + 1e-3),
            other => panic!("unexpected status {other:?}"),
        }
        assert!(sol.h.len() < SERIES_LEN);
    }

    #[test]
    fn tolerance_refinement_changes_little() {
        let p = nondim(0.5, 0.8, 1.2, 0.9);
        let coarse = simulate_ode(&p).unwrap();
        let fine = simulate_ode_with(
            &p,
            DopriOptions {
                rtol: 1e-9,
                atol: 1e-11,
                ..DopriOptions::default()
            },
            SERIES_LEN,
        )
        .unwrap();
        let diff = coarse
            .h
            .iter()
            .zip(fine.h.iter())
            .chain(coarse.c.iter().zip(fine.c.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn solute_conserved_without_shear(pc in 0.0f64..3.0, je in 0.0f64..0.7) {
            let sol = simulate_ode(&nondim(pc, je, 0.0, 0.0)).unwrap();
            for (h, c) in sol.h.iter().zip(sol.c.iter()) {
                proptest::prop_assert!((h * c - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn solute_closed_form_with_shear(
            pc in 0.0f64..3.0, je in 0.0f64..0.5, b1 in -0.5f64..3.0, b2 in 0.01f64..5.0,
        ) {
            let sol = simulate_ode(&nondim(pc, je, b1, b2)).unwrap();
            let grid = time_grid(SERIES_LEN);
            for k in 0..sol.h.len() {
                let expected = (-(b1 / b2) * (1.0 - (-b2 * grid[k]).exp())).exp();
                proptest::prop_assert!((sol.h[k] * sol.c[k] - expected).abs() < 1e-6);
            }
        }
    }
}
