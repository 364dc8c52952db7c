//! Model hyperbolic-length calculus: collar crossing terms, thick-torus arc
//! asymptotics, hyperbolic Pythagoras, extremal-length bounds, and the
//! punctured-rectangular-torus horizontal band.
//!
//! These are the model formulas the classification runs on; true hyperbolic
//! lengths on the genus-2 surface would need numerical uniformization and
//! are out of scope. Every estimate carries a regime flag so consumers can
//! tell when a formula is being used outside its asymptotic range.

use serde::Serialize;

use crate::error::{LabError, Result};

/// Tunable constants of the length model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LengthModel {
    /// Band half-width for the 4 log a horizontal-length estimate.
    pub d_band: f64,
    /// Constant replacing "comparable to" in extremal vs hyperbolic checks.
    pub comparability_factor: f64,
    /// Model collar depth (shallow collars are never crossed).
    pub collar_depth_d: f64,
    /// Above this ell the asymptotic arc formula is flagged.
    pub small_ell_threshold: f64,
    /// Scale factor on the transverse arc term.
    pub ell_tau_factor: f64,
    /// Max allowed collar/torus ratio for the augmented formula.
    pub aug_ratio_max: f64,
}

impl Default for LengthModel {
    fn default() -> Self {
        LengthModel {
            d_band: 10.0,
            comparability_factor: 4.0,
            collar_depth_d: 1.0,
            small_ell_threshold: 0.1,
            ell_tau_factor: 1.0,
            aug_ratio_max: 0.5,
        }
    }
}

impl LengthModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_band,
            self.comparability_factor,
            self.collar_depth_d,
            self.small_ell_threshold,
            self.ell_tau_factor,
            self.aug_ratio_max,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(LabError::Config {
                detail: "length-model constants must be positive and finite".into(),
            })
        }
    }
}

/// Which formula produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LengthRegime {
    Augmented,
    Asymptotic,
}

/// A model length with its breakdown. `total` is the sum of the two torus
/// terms; the collar term is reported separately because the augmented
/// formula is only valid when it is negligible.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LengthEstimate {
    pub total: f64,
    pub collar_term: f64,
    pub torus_minus_term: f64,
    pub torus_plus_term: f64,
    pub regime: LengthRegime,
    pub regime_valid: bool,
}

/// Crossing-plus-arc decomposition inside one thick torus.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TorusArc {
    pub crossing_term: f64,
    pub arc_term: f64,
    pub total: f64,
    /// Set when ell_alpha is too large for the asymptotic formula.
    pub regime_warning: bool,
}

/// acosh(cosh a * cosh b), evaluated in log space so a, b in the hundreds
/// never overflow.
pub fn hyperbolic_pythagoras(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
        return Err(LabError::Config {
            detail: format!("hyperbolic_pythagoras needs finite a, b >= 0, got ({a}, {b})"),
        });
    }
    // ln cosh x = x + ln(1 + e^{-2x}) - ln 2 for x >= 0.
    let ln_cosh = |x: f64| x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2;
    let l = ln_cosh(a) + ln_cosh(b);
    if l <= 0.0 {
        return Ok(0.0);
    }
    // acosh(e^L) = L + ln(1 + sqrt(1 - e^{-2L})).
    Ok(l + (1.0 - (-2.0 * l).exp()).sqrt().ln_1p())
}

/// Collar crossing cost: i_beta crossings of a collar around a geodesic of
/// length ell_beta cost i_beta * (-2 log ell_beta), assuming bounded flat
/// twisting.
pub fn collar_crossing_length(i_beta: u64, ell_beta: f64) -> Result<f64> {
    if !(ell_beta > 0.0 && ell_beta < 1.0) {
        return Err(LabError::OutsideModel {
            detail: format!("collar formula needs 0 < ell < 1, got {ell_beta}"),
        });
    }
    Ok(i_beta as f64 * (-2.0 * ell_beta.ln()))
}

/// Arc length through a thick torus with a short core alpha:
/// i_alpha * (-2 log ell_alpha) + i_tau * ell_alpha * ell_tau_factor.
pub fn torus_arc_length(
    i_alpha: u64,
    i_tau: u64,
    ell_alpha: f64,
    ell_tau_factor: f64,
    model: &LengthModel,
) -> Result<TorusArc> {
    if !(ell_alpha > 0.0 && ell_alpha < 1.0) {
        return Err(LabError::OutsideModel {
            detail: format!("arc formula needs 0 < ell < 1, got {ell_alpha}"),
        });
    }
    let crossing_term = i_alpha as f64 * (-2.0 * ell_alpha.ln());
    let arc_term = i_tau as f64 * ell_alpha * ell_tau_factor;
    Ok(TorusArc {
        crossing_term,
        arc_term,
        total: crossing_term + arc_term,
        regime_warning: ell_alpha > model.small_ell_threshold,
    })
}

/// The augmented limit formula: total = i_- * ell_- + i_+ * ell_+.
/// Weighted (non-integer) intersection counts are allowed; the collar term
/// is carried alongside and must stay small relative to the total for the
/// formula to be in regime.
pub fn augmented_length(
    i_sigma_minus: f64,
    i_sigma_plus: f64,
    ell_beta_minus: f64,
    ell_beta_plus: f64,
    collar: Option<f64>,
    model: &LengthModel,
) -> Result<LengthEstimate> {
    for v in [i_sigma_minus, i_sigma_plus, ell_beta_minus, ell_beta_plus] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(LabError::Config {
                detail: format!("augmented_length needs finite nonnegative inputs, got {v}"),
            });
        }
    }
    let torus_minus_term = i_sigma_minus * ell_beta_minus;
    let torus_plus_term = i_sigma_plus * ell_beta_plus;
    let total = torus_minus_term + torus_plus_term;
    let collar_term = collar.unwrap_or(0.0).max(0.0);
    let regime_valid = if total > 0.0 {
        collar_term / total <= model.aug_ratio_max
    } else {
        collar_term == 0.0
    };
    Ok(LengthEstimate {
        total,
        collar_term,
        torus_minus_term,
        torus_plus_term,
        regime: LengthRegime::Augmented,
        regime_valid,
    })
}

/// Horizontal-geodesic band on the punctured rectangular torus of aspect a.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RectBand {
    pub lo: f64,
    pub hi: f64,
    /// Model value 4 log a, strictly increasing in a.
    pub midpoint: f64,
}

pub fn punctured_rect_horizontal_length(a: f64, model: &LengthModel) -> Result<RectBand> {
    if !(a.is_finite() && a >= 1.0) {
        return Err(LabError::OutsideModel {
            detail: format!("rectangular band needs aspect a >= 1, got {a}"),
        });
    }
    let midpoint = 4.0 * a.ln();
    Ok(RectBand {
        lo: (midpoint - model.d_band).max(0.0),
        hi: midpoint + model.d_band,
        midpoint,
    })
}

/// Extremal-length sandwich for a short curve, with the crossing-slit model
/// value when slit data is supplied.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExtremalBounds {
    /// flat_length^2 / area.
    pub lower: f64,
    /// 1 / cylinder_modulus.
    pub upper: f64,
    /// 1 / log(kappa/delta) for a curve crossing a slit of length delta
    /// inside a disk of radius kappa.
    pub slit_value: Option<f64>,
}

pub fn extremal_length_bounds(
    flat_length: f64,
    area: f64,
    cylinder_modulus: f64,
    crossing_slit: Option<(f64, f64)>,
) -> Result<ExtremalBounds> {
    if !(area > 0.0 && cylinder_modulus > 0.0 && flat_length >= 0.0) {
        return Err(LabError::Config {
            detail: "extremal bounds need positive area and modulus".into(),
        });
    }
    let slit_value = match crossing_slit {
        None => None,
        Some((delta, kappa)) => {
            if !(delta > 0.0 && kappa > delta) {
                return Err(LabError::OutsideModel {
                    detail: format!("slit model needs 0 < delta < kappa, got ({delta}, {kappa})"),
                });
            }
            Some(1.0 / (kappa / delta).ln())
        }
    };
    Ok(ExtremalBounds {
        lower: flat_length * flat_length / area,
        upper: 1.0 / cylinder_modulus,
        slit_value,
    })
}
