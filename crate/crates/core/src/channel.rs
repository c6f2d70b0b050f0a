//! Large-scale path loss, SINR, Shannon spectral efficiency and the Rayleigh
//! outage probability of a single frame.
//!
//! Powers are in dBm and losses in dB at the API boundary; SINR values are
//! linear ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// UAV to BS or UE (U2N, U2D) and any UAV/ground interference path.
    AirToGround,
    /// UAV to UAV (U2U).
    AirToAir,
    /// Ground to ground, used for the BS-to-UE second hop and terrestrial UE interference.
    GroundDownlink,
}

impl LinkClass {
    pub fn between(a_airborne: bool, b_airborne: bool) -> Self {
        match (a_airborne, b_airborne) {
            (true, true) => LinkClass::AirToAir,
            (false, false) => LinkClass::GroundDownlink,
            _ => LinkClass::AirToGround,
        }
    }
}

/// Log-distance model: `ref_loss_db + 10 * exponent * log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub exponent: f64,
    pub ref_loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub air_to_ground: PathLossModel,
    pub air_to_air: PathLossModel,
    pub ground: PathLossModel,
    /// Noise power per subchannel.
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub frame_duration_s: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            air_to_ground: PathLossModel {
                exponent: 2.7,
                ref_loss_db: 38.0,
            },
            air_to_air: PathLossModel {
                exponent: 2.2,
                ref_loss_db: 38.0,
            },
            ground: PathLossModel {
                exponent: 3.5,
                ref_loss_db: 38.0,
            },
            noise_dbm: -100.0,
            bandwidth_hz: 180e3,
            frame_duration_s: 0.01,
        }
    }
}

impl ChannelParams {
    pub fn model(&self, class: LinkClass) -> PathLossModel {
        match class {
            LinkClass::AirToGround => self.air_to_ground,
            LinkClass::AirToAir => self.air_to_air,
            LinkClass::GroundDownlink => self.ground,
        }
    }

    /// Checks the parameter invariants, returning the offending field.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        for (name, m) in [
            ("air_to_ground", self.air_to_ground),
            ("air_to_air", self.air_to_air),
            ("ground", self.ground),
        ] {
            if !(m.exponent >= 2.0 && m.exponent.is_finite()) {
                return Err((name, format!("exponent must be >= 2, got {}", m.exponent)));
            }
            if !m.ref_loss_db.is_finite() {
                return Err((name, "ref_loss_db must be finite".into()));
            }
        }
        if self.air_to_air.exponent > self.air_to_ground.exponent {
            return Err((
                "air_to_air",
                "air-to-air exponent must not exceed the air-to-ground exponent".into(),
            ));
        }
        if !self.noise_dbm.is_finite() {
            return Err(("noise_dbm", "must be finite".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(("bandwidth_hz", "must be positive".into()));
        }
        if !(self.frame_duration_s > 0.0) {
            return Err(("frame_duration_s", "must be positive".into()));
        }
        Ok(())
    }

    /// Loss between two points, with distances below the 1 m reference
    /// treated as 1 m (co-located transmitters and receivers).
    pub fn link_loss_db(&self, a: Vec3, b: Vec3, class: LinkClass) -> f64 {
        let m = self.model(class);
        m.ref_loss_db + 10.0 * m.exponent * distance(a, b).max(1.0).log10()
    }

    /// Linear power gain between two points.
    pub fn link_gain(&self, a: Vec3, b: Vec3, class: LinkClass) -> f64 {
        db_to_linear(-self.link_loss_db(a, b, class))
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

pub fn path_loss(d: f64, class: LinkClass, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs d > 0, got {d}")));
    }
    let m = params.model(class);
    Ok(m.ref_loss_db + 10.0 * m.exponent * d.log10())
}

/// Mean (large-scale) signal-to-interference-plus-noise ratio, linear.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct MeanSinr(pub f64);

impl MeanSinr {
    pub fn new(value: f64) -> Self {
        debug_assert!(value >= 0.0 && value.is_finite(), "invalid SINR {value}");
        MeanSinr(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// SINR from a desired transmitter and a list of `(p_tx_dbm, loss_db)` interferers.
pub fn mean_sinr(p_tx_dbm: f64, loss_db: f64, interference: &[(f64, f64)], noise_dbm: f64) -> MeanSinr {
    let signal = dbm_to_mw(p_tx_dbm - loss_db);
    let interference: f64 = interference.iter().map(|&(p, l)| dbm_to_mw(p - l)).sum();
    MeanSinr::new(signal / (interference + dbm_to_mw(noise_dbm)))
}

/// Shannon spectral efficiency in bit/s/Hz.
pub fn spectral_efficiency(s: MeanSinr) -> f64 {
    s.0.ln_1p() / std::f64::consts::LN_2
}

/// Probability that one Rayleigh-faded frame supports `rho` bit/s/Hz:
/// `Pr[log2(1 + sinr * h) >= rho]` with `h ~ Exp(1)`.
pub fn frame_success_prob(mean_sinr: MeanSinr, rho: f64) -> f64 {
    debug_assert!(rho >= 0.0);
    let required = rho.exp2() - 1.0;
    if required <= 0.0 {
        return 1.0;
    }
    if mean_sinr.0 <= 0.0 {
        return 0.0;
    }
    (-required / mean_sinr.0).exp()
}
