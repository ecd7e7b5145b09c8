//! Parameter sampling, trajectory screening, noise augmentation and dataset
//! assembly.

pub mod dataset;
pub mod filter;
pub mod halton;
pub mod noise;
pub mod ranges;

pub use dataset::{
    build_dataset, BuildConfig, BuildReport, Dataset, RowFlag, RowKind, RowMatrix, Split,
};
pub use filter::{accept, RejectReason};
pub use halton::{halton_point, HaltonState};
pub use noise::{perturb, perturb_scaled, NoiseMode, NoiseScale};
pub use ranges::{scale_params, ModelKind, ParamRanges, SampledParams};

use crate::error::Result;
use crate::ode::simulate_ode;
use crate::pde::{simulate_pde_with, PdeOptions};
use crate::physics::{nondim_ode, nondim_pde, PhysicalConstants};

/// Sampled center (PDE) or spatially uniform (ODE) series of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub intensity: Vec<f64>,
    /// False when the thickness floor stopped the integration early.
    pub complete: bool,
}

pub fn simulate_sample(
    params: &SampledParams,
    constants: &PhysicalConstants,
    nr: usize,
) -> Result<Trajectory> {
    let (h, c, intensity, complete) = match params {
        SampledParams::Ode(p) => {
            let s = simulate_ode(&nondim_ode(p, constants)?)?;
            let complete = s.is_complete();
            (s.h, s.c, s.intensity, complete)
        }
        SampledParams::Pde(p) => {
            let s = simulate_pde_with(&nondim_pde(p, constants)?, &PdeOptions::with_nr(nr))?;
            let complete = s.is_complete();
            (s.h, s.c, s.intensity, complete)
        }
    };
    Ok(Trajectory {
        h: h.into_inner(),
        c: c.into_inner(),
        intensity: intensity.into_inner(),
        complete,
    })
}

/// Screening verdict for one trajectory. A run cut short by the thickness
/// floor counts as a lower-bound failure unless an earlier rule already fails.
pub fn screen(t: &Trajectory) -> std::result::Result<(), RejectReason> {
    accept(&t.h, &t.intensity)?;
    if t.complete {
        Ok(())
    } else {
        Err(RejectReason::LowerBound)
    }
}
