//! Physical constants, dimensional parameter bundles and their
//! nondimensionalization, plus the fluorescence-intensity map shared by both
//! simulators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Molar mass of fluorescein sodium, g/mol.
pub const FLUORESCEIN_SODIUM_MOLAR_MASS: f64 = 376.27;

/// One micrometre per minute, in m/s.
pub const UM_PER_MIN: f64 = 1e-6 / 60.0;

/// Dimensional material constants. Every field may be overridden from a JSON
/// file; missing fields keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Viscosity, Pa s.
    pub mu: f64,
    /// Surface tension, N/m.
    pub sigma0: f64,
    /// Density, kg/m^3.
    pub rho: f64,
    /// Hamaker constant.
    pub hamaker: f64,
    /// Molar volume of water, m^3/mol.
    pub molar_volume_water: f64,
    /// Fluorescein diffusivity, m^2/s.
    pub diffusivity_fl: f64,
    /// Salt-ion diffusivity, m^2/s.
    pub diffusivity_osm: f64,
    /// Isotonic osmolarity, Osm/m^3.
    pub c0: f64,
    /// Corneal permeability, m/s.
    pub p0: f64,
    /// Napierian extinction coefficient, L/(m mol) i.e. per metre per molar.
    pub extinction: f64,
    /// Critical fluorescein concentration, % w/v.
    pub fcr_pct: f64,
    /// Critical fluorescein concentration, mol/m^3.
    pub fcr_molar: f64,
    /// Surface diffusivity of the lipid surfactant, m^2/s.
    pub diffusivity_surface: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let fcr_pct = 0.2;
        Self {
            mu: 1.3e-3,
            sigma0: 0.045,
            rho: 1e3,
            hamaker: 6.0 * PI * 3.5e-19,
            molar_volume_water: 1.8e-5,
            diffusivity_fl: 0.39e-9,
            diffusivity_osm: 1.6e-9,
            c0: 300.0,
            p0: 12.1e-6,
            extinction: 1.75e7,
            fcr_pct,
            fcr_molar: pct_to_molar(fcr_pct),
            diffusivity_surface: 3e-8,
        }
    }
}

/// Converts a fluorescein sodium concentration in % w/v to mol/m^3.
pub fn pct_to_molar(pct: f64) -> f64 {
    // 1 % w/v = 10 g/L = 10 kg/m^3
    10.0 * pct * (1000.0 / FLUORESCEIN_SODIUM_MOLAR_MASS)
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu", self.mu),
            ("sigma0", self.sigma0),
            ("rho", self.rho),
            ("hamaker", self.hamaker),
            ("molar_volume_water", self.molar_volume_water),
            ("diffusivity_fl", self.diffusivity_fl),
            ("diffusivity_osm", self.diffusivity_osm),
            ("c0", self.c0),
            ("p0", self.p0),
            ("extinction", self.extinction),
            ("fcr_pct", self.fcr_pct),
            ("fcr_molar", self.fcr_molar),
            ("diffusivity_surface", self.diffusivity_surface),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "constant {name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Parses a (possibly partial) JSON override document.
    pub fn from_json(text: &str) -> Result<Self> {
        let k: Self = serde_json::from_str(text)?;
        k.validate()?;
        Ok(k)
    }

    /// Nondimensional extinction parameter for an initial thickness `h0` (m).
    pub fn phi(&self, h0: f64) -> f64 {
        // extinction is per molar (mol/L); fcr_molar is mol/m^3
        self.extinction * 1e-3 * self.fcr_molar * h0
    }
}

/// Dimensional parameters of the spatially uniform model, SI units.
///
/// Serialized in laboratory units (um, %, s, um/min, 1/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "OdeParamsLab", into = "OdeParamsLab")]
pub struct OdeParams {
    /// Initial thickness, m.
    pub h0: f64,
    /// Initial fluorescein concentration, % w/v.
    pub f0_pct: f64,
    /// Trial duration, s.
    pub ts: f64,
    /// Evaporative thinning rate, m/s.
    pub je: f64,
    /// Maximum shear rate, 1/s.
    pub b1: f64,
    /// Shear decay rate, 1/s.
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeParamsLab {
    h0_um: f64,
    f0_pct: f64,
    ts_s: f64,
    thinning_um_per_min: f64,
    b1_per_s: f64,
    b2_per_s: f64,
}

impl From<OdeParamsLab> for OdeParams {
    fn from(p: OdeParamsLab) -> Self {
        Self {
            h0: p.h0_um * 1e-6,
            f0_pct: p.f0_pct,
            ts: p.ts_s,
            je: p.thinning_um_per_min * UM_PER_MIN,
            b1: p.b1_per_s,
            b2: p.b2_per_s,
        }
    }
}

impl From<OdeParams> for OdeParamsLab {
    fn from(p: OdeParams) -> Self {
        let row = p.to_row();
        Self {
            h0_um: row[0],
            f0_pct: row[1],
            ts_s: row[2],
            thinning_um_per_min: row[3],
            b1_per_s: row[4],
            b2_per_s: row[5],
        }
    }
}

impl OdeParams {
    pub const COLUMNS: [&'static str; 6] = [
        "h0_um",
        "f0_pct",
        "ts_s",
        "thinning_um_per_min",
        "b1_per_s",
        "b2_per_s",
    ];

    /// Laboratory-unit row in [`Self::COLUMNS`] order.
    pub fn to_row(&self) -> [f64; 6] {
        [
            self.h0 * 1e6,
            self.f0_pct,
            self.ts,
            self.je / UM_PER_MIN,
            self.b1,
            self.b2,
        ]
    }

    pub fn from_row(row: &[f64; 6]) -> Self {
        OdeParamsLab {
            h0_um: row[0],
            f0_pct: row[1],
            ts_s: row[2],
            thinning_um_per_min: row[3],
            b1_per_s: row[4],
            b2_per_s: row[5],
        }
        .into()
    }
}

/// Dimensional parameters of the radial glob model, SI units.
///
/// Serialized in laboratory units (um, %, s, um/min, mm, uN/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PdeParamsLab", into = "PdeParamsLab")]
pub struct PdeParams {
    /// Initial thickness, m.
    pub h0: f64,
    /// Initial fluorescein concentration, % w/v.
    pub f0_pct: f64,
    /// Trial duration, s.
    pub ts: f64,
    /// Nominal thinning rate under the glob, m/s.
    pub v: f64,
    /// Glob radius, m.
    pub glob_radius: f64,
    /// Surface-tension change across the glob, N/m.
    pub dsigma0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct PdeParamsLab {
    h0_um: f64,
    f0_pct: f64,
    ts_s: f64,
    thinning_um_per_min: f64,
    glob_radius_mm: f64,
    dsigma0_uN_per_m: f64,
}

impl From<PdeParamsLab> for PdeParams {
    fn from(p: PdeParamsLab) -> Self {
        Self {
            h0: p.h0_um * 1e-6,
            f0_pct: p.f0_pct,
            ts: p.ts_s,
            v: p.thinning_um_per_min * UM_PER_MIN,
            glob_radius: p.glob_radius_mm * 1e-3,
            dsigma0: p.dsigma0_uN_per_m * 1e-6,
        }
    }
}

impl From<PdeParams> for PdeParamsLab {
    fn from(p: PdeParams) -> Self {
        let row = p.to_row();
        Self {
            h0_um: row[0],
            f0_pct: row[1],
            ts_s: row[2],
            thinning_um_per_min: row[3],
            glob_radius_mm: row[4],
            dsigma0_uN_per_m: row[5],
        }
    }
}

impl PdeParams {
    pub const COLUMNS: [&'static str; 6] = [
        "h0_um",
        "f0_pct",
        "ts_s",
        "thinning_um_per_min",
        "glob_radius_mm",
        "dsigma0_uN_per_m",
    ];

    pub fn to_row(&self) -> [f64; 6] {
        [
            self.h0 * 1e6,
            self.f0_pct,
            self.ts,
            self.v / UM_PER_MIN,
            self.glob_radius * 1e3,
            self.dsigma0 * 1e6,
        ]
    }

    pub fn from_row(row: &[f64; 6]) -> Self {
        PdeParamsLab {
            h0_um: row[0],
            f0_pct: row[1],
            ts_s: row[2],
            thinning_um_per_min: row[3],
            glob_radius_mm: row[4],
            dsigma0_uN_per_m: row[5],
        }
        .into()
    }
}

/// Nondimensional groups of the spatially uniform model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeNondim {
    /// Corneal permeability.
    pub pc: f64,
    /// Evaporation rate.
    pub je: f64,
    /// Initial fluorescein concentration relative to critical.
    pub f0: f64,
    /// Maximum shear.
    pub b1: f64,
    /// Shear decay.
    pub b2: f64,
    /// Extinction parameter.
    pub phi: f64,
}

/// Nondimensional groups of the radial glob model, with the scales used to
/// build them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeNondim {
    /// Aspect ratio h0/ell.
    pub eps: f64,
    /// Marangoni number.
    pub marangoni: f64,
    /// Hamaker constant.
    pub hamaker: f64,
    pub pc: f64,
    pub pe_f: f64,
    pub pe_c: f64,
    pub pe_s: f64,
    pub phi: f64,
    pub f0: f64,
    /// Thinning rate under the glob.
    pub v: f64,
    /// Glob radius.
    pub glob_radius: f64,
    /// Length scale, m.
    pub ell: f64,
    /// Velocity scale, m/s.
    pub u: f64,
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn require_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be non-negative, got {value}"
        )))
    }
}

pub fn nondim_ode(p: &OdeParams, k: &PhysicalConstants) -> Result<OdeNondim> {
    require_positive("ts", p.ts)?;
    require_positive("h0", p.h0)?;
    require_positive("f0", p.f0_pct)?;
    require_nonnegative("je", p.je)?;
    require_nonnegative("b2", p.b2)?;
    if !p.b1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "b1 must be finite, got {}",
            p.b1
        )));
    }
    Ok(OdeNondim {
        pc: k.p0 * k.molar_volume_water * k.c0 * p.ts / p.h0,
        je: p.je * p.ts / p.h0,
        f0: p.f0_pct / k.fcr_pct,
        b1: p.b1 * p.ts,
        b2: p.b2 * p.ts,
        phi: k.phi(p.h0),
    })
}

pub fn nondim_pde(p: &PdeParams, k: &PhysicalConstants) -> Result<PdeNondim> {
    require_positive("ts", p.ts)?;
    require_positive("h0", p.h0)?;
    require_positive("f0", p.f0_pct)?;
    require_positive("dsigma0", p.dsigma0)?;
    require_positive("glob_radius", p.glob_radius)?;
    require_nonnegative("v", p.v)?;

    let ell = (p.ts * k.sigma0 * p.h0.powi(3) / k.mu).powf(0.25);
    let u = ell / p.ts;
    let eps = p.h0 / ell;
    let marangoni =
        eps * p.dsigma0 * (p.ts.powi(3) / (k.sigma0 * k.mu.powi(3) * p.h0.powi(3))).powf(0.25);
    Ok(PdeNondim {
        eps,
        marangoni,
        hamaker: k.hamaker / (eps * p.dsigma0 * p.h0 * ell),
        pc: k.p0 * k.molar_volume_water * k.c0 / (eps * u),
        pe_f: u * ell / k.diffusivity_fl,
        pe_c: u * ell / k.diffusivity_osm,
        pe_s: eps * p.dsigma0 * ell / (k.mu * k.diffusivity_surface),
        phi: k.phi(p.h0),
        f0: p.f0_pct / k.fcr_pct,
        v: p.v / (eps * u),
        glob_radius: p.glob_radius / ell,
        ell,
        u,
    })
}

/// Normalized fluorescence intensity of a film of thickness `h` carrying
/// fluorescein concentration `f`; the first sample is exactly 1.
pub fn intensity(h: &TimeSeries, f: &TimeSeries, phi: f64) -> Result<TimeSeries> {
    if h.len() != f.len() {
        return Err(Error::dims(h.len(), f.len(), "intensity: h vs f"));
    }
    if h.is_empty() {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    let raw = |hk: f64, fk: f64| -(-phi * fk * hk).exp_m1() / (1.0 + fk * fk);
    let first = raw(h[0], f[0]);
    if phi * f[0] * h[0] == 0.0 || !first.is_finite() || first == 0.0 {
        return Err(Error::NormalizationUndefined(phi * f[0] * h[0]));
    }
    let mut out: Vec<f64> = h
        .iter()
        .zip(f.iter())
        .map(|(&hk, &fk)| raw(hk, fk) / first)
        .collect();
    out[0] = 1.0;
    TimeSeries::new(out)
}

/// Smooth step marking the glob edge: ~0 inside radius `ri`, ~1 outside.
pub fn blend(r: f64, ri: f64) -> f64 {
    0.5 + 0.5 * ((r - ri) / 0.1).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ode_params() -> OdeParams {
        OdeParams {
            h0: 4e-6,
            f0_pct: 0.2,
            ts: 30.0,
            je: 20.0 * UM_PER_MIN,
            b1: 0.0,
            b2: 0.5,
        }
    }

    #[test]
    fn default_constants_match_reference_table() {
        let k = PhysicalConstants::default();
        k.validate().unwrap();
        assert!((k.hamaker - 6.0 * PI * 3.5e-19).abs() < 1e-30);
        // 0.2 % w/v of fluorescein sodium is 5.3e-3 M
        assert!((k.fcr_molar - 5.3).abs() / 5.3 < 5e-3);
        let direct = 10.0 * k.fcr_pct * (1000.0 / 376.27);
        assert!((k.fcr_molar - direct).abs() / direct < 5e-3);
    }

    #[test]
    fn partial_json_override_keeps_defaults() {
        let k = PhysicalConstants::from_json(r#"{"mu": 2e-3}"#).unwrap();
        assert_eq!(k.mu, 2e-3);
        assert_eq!(k.sigma0, PhysicalConstants::default().sigma0);
        assert!(PhysicalConstants::from_json(r#"{"mu": -1}"#).is_err());
        assert!(PhysicalConstants::from_json(r#"{"nope": 1}"#).is_err());
    }

    #[test]
    fn ode_nondim_examples() {
        let k = PhysicalConstants::default();
        let nd = nondim_ode(&ode_params(), &k).unwrap();
        // 20 um/min = 3.333e-7 m/s; 3.333e-7 * 30 / 4e-6 = 2.5
        assert!((nd.je - 2.5).abs() < 1e-12);
        assert_eq!(nd.b1, 0.0);
        assert!((nd.f0 - 1.0).abs() < 1e-15);
        assert!((nd.b2 - 15.0).abs() < 1e-12);
        let pc = 12.1e-6 * 1.8e-5 * 300.0 * 30.0 / 4e-6;
        assert!((nd.pc - pc).abs() < 1e-12);
        assert!((nd.phi - 1.75e4 * k.fcr_molar * 4e-6).abs() < 1e-12);
    }

    #[test]
    fn ode_nondim_rejects_nonpositive_scales() {
        let k = PhysicalConstants::default();
        let mut p = ode_params();
        p.ts = 0.0;
        assert!(matches!(
            nondim_ode(&p, &k),
            Err(Error::InvalidParameter(_))
        ));
        let mut p = ode_params();
        p.h0 = -1e-6;
        assert!(nondim_ode(&p, &k).is_err());
        let mut p = ode_params();
        p.b1 = -0.2;
        assert!(nondim_ode(&p, &k).is_ok());
    }

    fn pde_params() -> PdeParams {
        PdeParams {
            h0: 2e-6,
            f0_pct: 0.2,
            ts: 10.0,
            v: 10.0 * UM_PER_MIN,
            glob_radius: 0.1e-3,
            dsigma0: 20e-6,
        }
    }

    #[test]
    fn pde_scales() {
        let k = PhysicalConstants::default();
        let nd = nondim_pde(&pde_params(), &k).unwrap();
        // (10 * 0.045 * 8e-18 / 1.3e-3)^(1/4)
        let ell = (10.0f64 * 0.045 * 8e-18 / 1.3e-3).powf(0.25);
        assert!((nd.ell - ell).abs() / ell < 1e-14);
        assert!((nd.ell - 2.29e-4).abs() / 2.29e-4 < 5e-3);
        assert!((nd.u - 2.29e-5).abs() / 2.29e-5 < 5e-3);
        assert!((nd.eps - 8.7e-3).abs() / 8.7e-3 < 5e-3);
        assert!((nd.u * 10.0 - nd.ell).abs() / nd.ell < 1e-12);
        // Table expression for U agrees with ell/ts
        let u_table = (0.045f64 * 8e-18 / (1.3e-3 * 1000.0)).powf(0.25);
        assert!((nd.u - u_table).abs() / u_table < 1e-12);
        assert!((nd.glob_radius - 0.1e-3 / ell).abs() < 1e-12);
    }

    #[test]
    fn pde_requires_surface_tension_change() {
        let k = PhysicalConstants::default();
        let mut p = pde_params();
        p.dsigma0 = 0.0;
        assert!(matches!(
            nondim_pde(&p, &k),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn lab_units_round_trip_through_json() {
        let p = ode_params();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("thinning_um_per_min"));
        let back: OdeParams = serde_json::from_str(&text).unwrap();
        assert!((back.je - p.je).abs() < 1e-20);
        let q = pde_params();
        let back: PdeParams = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert!((back.glob_radius - q.glob_radius).abs() < 1e-18);
    }

    #[test]
    fn intensity_examples() {
        let ones = TimeSeries::new(vec![1.0; 5]).unwrap();
        let i = intensity(&ones, &ones, 0.4).unwrap();
        assert!(i.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let h = TimeSeries::new(vec![1.0, 0.75, 0.5]).unwrap();
        let f = TimeSeries::new(vec![1.0; 3]).unwrap();
        let i = intensity(&h, &f, 0.5).unwrap();
        assert_eq!(i[0], 1.0);
        let expected = (2.0 / (1.0 - (-0.5f64).exp())) * (1.0 - (-0.25f64).exp()) / 2.0;
        assert!((i[2] - expected).abs() < 1e-14);
    }

    #[test]
    fn intensity_requires_nonzero_normalization() {
        let h = TimeSeries::new(vec![0.0, 1.0]).unwrap();
        let f = TimeSeries::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            intensity(&h, &f, 0.5),
            Err(Error::NormalizationUndefined(_))
        ));
    }

    #[test]
    fn blend_examples() {
        assert_eq!(blend(0.7, 0.7), 0.5);
        assert!((blend(2.0, 1.0) - 1.0).abs() < 1e-8);
        let expected = 0.5 + 0.5 * (-10.0f64).tanh();
        assert!((blend(0.0, 1.0) - expected).abs() < 1e-20);
        assert!((blend(0.0, 1.0) - 2.06e-9).abs() < 1e-11);
    }

    proptest::proptest! {
        #[test]
        fn intensity_first_sample_is_one(
            phi in 0.05f64..2.0,
            h in proptest::collection::vec(0.2f64..1.1, 2..40),
            f0 in 0.4f64..1.0,
        ) {
            let f = TimeSeries::new(vec![f0; h.len()]).unwrap();
            let h = TimeSeries::new(h).unwrap();
            let i = intensity(&h, &f, phi).unwrap();
            proptest::prop_assert_eq!(i[0], 1.0);
        }

        #[test]
        fn intensity_increases_with_thickness(
            phi in 0.05f64..2.0, f in 0.1f64..3.0, a in 0.1f64..2.0, d in 1e-3f64..1.0,
        ) {
            let hs = TimeSeries::new(vec![1.0, a, a + d]).unwrap();
            let fs = TimeSeries::new(vec![f; 3]).unwrap();
            let i = intensity(&hs, &fs, phi).unwrap();
            proptest::prop_assert!(i[2] > i[1]);
        }

        #[test]
        fn blend_is_monotone_and_bounded(r in 0.0f64..3.0, dr in 1e-3f64..0.5, ri in 0.05f64..2.0) {
            let a = blend(r, ri);
            let b = blend(r + dr, ri);
            proptest::prop_assert!(a > 0.0 && a < 1.0 || a == 1.0 && b == 1.0);
            proptest::prop_assert!(b >= a);
        }

        #[test]
        fn velocity_scale_identity(h0 in 2e-6f64..8e-6, ts in 10.0f64..60.0, ds in 2e-6f64..60e-6) {
            let k = PhysicalConstants::default();
            let p = PdeParams { h0, f0_pct: 0.1, ts, v: 0.0, glob_radius: 1e-4, dsigma0: ds };
            let nd = nondim_pde(&p, &k).unwrap();
            proptest::prop_assert!((nd.u * ts - nd.ell).abs() / nd.ell < 1e-12);
        }
    }
}
