//! Radially symmetric glob model: method of lines with Fourier collocation in
//! r and a stiffly accurate Rosenbrock integrator in t.

pub mod grid;
pub mod model;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{Outcome, Rosenbrock, RosenbrockOptions, Stats};
use crate::ode::{SolveStatus, H_FLOOR};
use crate::physics::{intensity, PdeNondim};
use crate::series::{time_grid, TimeSeries, SERIES_LEN};

pub use grid::SpectralGrid;
pub use model::{evap_profile, pde_rhs, pressure, velocities, GlobRhs, PdeState};

pub const DEFAULT_NR: usize = 128;

/// Initial surfactant distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaInit {
    /// `1 - B(r)`: concentrated under the glob.
    Glob,
    Uniform(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct PdeOptions {
    pub nr: usize,
    pub samples: usize,
    pub gamma_init: GammaInit,
    pub integrator: RosenbrockOptions,
    pub keep_fields: bool,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            nr: DEFAULT_NR,
            samples: SERIES_LEN,
            gamma_init: GammaInit::Glob,
            integrator: RosenbrockOptions::default(),
            keep_fields: false,
        }
    }
}

impl PdeOptions {
    pub fn with_nr(nr: usize) -> Self {
        Self {
            nr,
            ..Self::default()
        }
    }
}

/// Space-time record of every field, shaped (time, node, field) with fields
/// ordered h, Gamma, c, f.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

pub const FIELD_NAMES: [&str; 4] = ["h", "gamma", "c", "f"];

impl FieldHistory {
    fn from_states(nodes: &[f64], times: &[f64], states: &[Vec<f64>]) -> Self {
        let nr = nodes.len();
        let mut data = Vec::with_capacity(states.len() * nr * 4);
        for s in states {
            for j in 0..nr {
                for field in 0..4 {
                    data.push(s[field * nr + j]);
                }
            }
        }
        Self {
            nodes: nodes.to_vec(),
            times: times[..states.len()].to_vec(),
            data,
        }
    }

    pub fn nr(&self) -> usize {
        self.nodes.len()
    }

    pub fn field(&self, k: usize, field: usize) -> Vec<f64> {
        let nr = self.nr();
        (0..nr)
            .map(|j| self.data[(k * nr + j) * 4 + field])
            .collect()
    }

    /// Writes `fields.f64` (little-endian float64, shape (N, Nr, 4)) and a
    /// JSON manifest `fields.json` into `dir`.
    pub fn write(&self, dir: &Path, params: &PdeNondim) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bin = dir.join("fields.f64");
        fs::write(&bin, crate::io::f64_to_le_bytes(&self.data)).map_err(|e| Error::io(&bin, e))?;
        let manifest = serde_json::json!({
            "dtype": "float64",
            "byte_order": "little",
            "shape": [self.times.len(), self.nr(), 4],
            "fields": FIELD_NAMES,
            "r": self.nodes,
            "t": self.times,
            "params": params,
        });
        let path = dir.join("fields.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub h: TimeSeries,
    pub c: TimeSeries,
    pub f: TimeSeries,
    pub intensity: TimeSeries,
    pub params: PdeNondim,
    pub status: SolveStatus,
    pub stats: Stats,
    pub fields: Option<FieldHistory>,
    /// `int h c r dr` and `int h f r dr` at each output time.
    pub solute: Vec<(f64, f64)>,
}

impl PdeSolution {
    pub fn is_complete(&self) -> bool {
        self.status == SolveStatus::Complete
    }
}

pub fn initial_state(grid: &SpectralGrid, p: &PdeNondim, gamma_init: GammaInit) -> PdeState {
    let n = grid.len();
    let gamma = match gamma_init {
        GammaInit::Glob => model::glob_indicator(grid, p.glob_radius)
            .into_iter()
            .map(|b| 1.0 - b)
            .collect(),
        GammaInit::Uniform(g) => vec![g; n],
    };
    PdeState {
        h: vec![1.0; n],
        gamma,
        c: vec![1.0; n],
        f: vec![p.f0; n],
    }
}

pub fn simulate_pde(p: &PdeNondim, nr: usize) -> Result<PdeSolution> {
    simulate_pde_with(p, &PdeOptions::with_nr(nr))
}

pub fn simulate_pde_with(p: &PdeNondim, opts: &PdeOptions) -> Result<PdeSolution> {
    if !(p.phi > 0.0 && p.f0 > 0.0 && p.pe_c > 0.0 && p.pe_f > 0.0 && p.pe_s > 0.0) {
        return Err(Error::InvalidParameter(
            "phi, f0 and the Peclet numbers must be positive".into(),
        ));
    }
    let grid = SpectralGrid::new(opts.nr)?;
    let nr = grid.len();
    let times = time_grid(opts.samples);
    let y0 = initial_state(&grid, p, opts.gamma_init).to_vec();

    let rhs = GlobRhs::new(&grid, *p);
    let mut jacobian = |y: &[f64], jac: &mut nalgebra::DMatrix<f64>| rhs.jacobian(y, jac);
    let mut solver = Rosenbrock::new(opts.integrator);
    let (states, outcome) = solver.solve(
        |y, dy| rhs.eval(y, dy),
        Some(&mut jacobian),
        &y0,
        &times,
        |_, y| y[..nr].iter().any(|&h| h < H_FLOOR),
    )?;
    let status = match outcome {
        Outcome::Complete => SolveStatus::Complete,
        Outcome::Stopped { t } => SolveStatus::FloorReached { t },
    };

    let center = |field: usize| -> Result<TimeSeries> {
        TimeSeries::new(
            states
                .iter()
                .map(|s| grid.center_value(&s[field * nr..(field + 1) * nr]))
                .collect(),
        )
    };
    let mut h = center(0)?.into_inner();
    let mut c = center(2)?.into_inner();
    let mut f = center(3)?.into_inner();
    // initial data is uniform; pin the first samples exactly
    h[0] = 1.0;
    c[0] = 1.0;
    f[0] = p.f0;
    let (h, c, f) = (
        TimeSeries::new(h)?,
        TimeSeries::new(c)?,
        TimeSeries::new(f)?,
    );
    let intensity = intensity(&h, &f, p.phi)?;

    let solute = states
        .iter()
        .map(|s| {
            let hs = &s[..nr];
            let hc: Vec<f64> = hs
                .iter()
                .zip(&s[2 * nr..3 * nr])
                .map(|(a, b)| a * b)
                .collect();
            let hf: Vec<f64> = hs.iter().zip(&s[3 * nr..]).map(|(a, b)| a * b).collect();
            (grid.integrate_r(&hc), grid.integrate_r(&hf))
        })
        .collect();
    let fields = opts
        .keep_fields
        .then(|| FieldHistory::from_states(grid.nodes(), &times, &states));

    Ok(PdeSolution {
        h,
        c,
        f,
        intensity,
        params: *p,
        status,
        stats: solver.stats,
        fields,
        solute,
    })
}
