//! Sampling ranges of the dimensional parameters, in laboratory units.

use serde::{Deserialize, Serialize};

use crate::physics::{OdeParams, PdeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ode,
    Pde,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ode => "ode",
            ModelKind::Pde => "pde",
        }
    }

    pub fn param_columns(&self) -> [&'static str; 6] {
        match self {
            ModelKind::Ode => OdeParams::COLUMNS,
            ModelKind::Pde => PdeParams::COLUMNS,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ode" => Ok(ModelKind::Ode),
            "pde" => Ok(ModelKind::Pde),
            other => Err(crate::Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// Inclusive lower and upper bounds per coordinate, in the column order of
/// the model's parameter rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub lower: [f64; 6],
    pub upper: [f64; 6],
}

impl ParamRanges {
    pub fn for_model(model: ModelKind) -> Self {
        match model {
            // h0 um, f0 %, ts s, Je um/min, b1 1/s, b2 1/s
            ModelKind::Ode => Self {
                lower: [2.0, 0.08, 10.0, 0.0, -0.2, 0.0],
                upper: [8.0, 0.2, 60.0, 40.0, 2.0, 2.0],
            },
            // h0 um, f0 %, ts s, v um/min, R_I mm, dsigma0 uN/m
            ModelKind::Pde => Self {
                lower: [2.0, 0.08, 10.0, 0.0, 0.02, 2.0],
                upper: [8.0, 0.2, 60.0, 40.0, 0.2, 60.0],
            },
        }
    }

    pub fn scale(&self, u: &[f64; 6]) -> [f64; 6] {
        std::array::from_fn(|d| self.lower[d] + u[d] * (self.upper[d] - self.lower[d]))
    }
}

/// A sampled parameter set of either model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampledParams {
    Ode(OdeParams),
    Pde(PdeParams),
}

impl SampledParams {
    pub fn to_row(&self) -> [f64; 6] {
        match self {
            SampledParams::Ode(p) => p.to_row(),
            SampledParams::Pde(p) => p.to_row(),
        }
    }

    /// `(h0 um, f0 %, ts s)`, the parameters known independently of the
    /// intensity record.
    pub fn external(&self) -> [f64; 3] {
        let r = self.to_row();
        [r[0], r[1], r[2]]
    }
}

/// Affine map of a unit-cube point onto the model's parameter ranges.
pub fn scale_params(u: &[f64; 6], model: ModelKind) -> SampledParams {
    let row = ParamRanges::for_model(model).scale(u);
    match model {
        ModelKind::Ode => SampledParams::Ode(OdeParams::from_row(&row)),
        ModelKind::Pde => SampledParams::Pde(PdeParams::from_row(&row)),
    }
}
