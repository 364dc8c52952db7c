//! The diagonal Teichmueller flow g_t on holonomy data, the per-family time
//! schedules, torus-area evolution, and the tiny-torus flat-length sandwich.
//!
//! All lengths move in log space: the flow sends (h, v) to (e^t h, e^-t v),
//! so log h gains t and log v loses t, and log h + log v is an exact flow
//! invariant even when the underlying integers have millions of bits.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numberline::{big_ln, ln_rational, rational_to_f64, CFExpansion};
use crate::slitsurf::{holonomy, slit_sequence, CurveId, SlitRecord};
use crate::veech::MeasureEstimate;

/// A point on the flow axis, natural-log scale.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct FlowTime(pub f64);

impl FlowTime {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() {
            Ok(FlowTime(t))
        } else {
            Err(LabError::Schedule {
                detail: format!("flow time must be finite, got {t}"),
            })
        }
    }
}

/// One curve's flowed holonomy, log-space components plus signs.
#[derive(Clone, Debug)]
pub struct SnapshotRow {
    pub id: CurveId,
    pub sign_h: i8,
    pub log_h: f64,
    pub sign_v: i8,
    pub log_v: f64,
    /// log sqrt(h^2 + v^2), the flat length of the class.
    pub log_flat: f64,
}

/// The surface at one flow time: flowed holonomies, the (flow-invariant)
/// torus areas, and the active slit stage.
#[derive(Clone, Debug)]
pub struct SurfaceSnapshot {
    pub t: FlowTime,
    pub rows: Vec<SnapshotRow>,
    pub area_minus: f64,
    pub area_plus: f64,
    pub slit: SlitRecord,
}

/// log sqrt(e^{2a} + e^{2b}) without leaving log space.
pub fn log_flat_length(log_h: f64, log_v: f64) -> f64 {
    let (hi, lo) = if log_h >= log_v {
        (log_h, log_v)
    } else {
        (log_v, log_h)
    };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + 0.5 * (2.0 * (lo - hi)).exp().ln_1p()
}

/// Build the time-t snapshot for the given curves; the slit stage supplies
/// the separating-curve row and rides along as exact data.
pub fn snapshot(
    cf: &CFExpansion,
    curves: &[CurveId],
    slit_stage: usize,
    areas: (f64, f64),
    t: FlowTime,
) -> Result<SurfaceSnapshot> {
    let records = slit_sequence(cf, slit_stage)?;
    let slit = records.last().expect("stage >= 1").clone();
    let mut rows = Vec::with_capacity(curves.len() + 1);
    for c in curves {
        let hv = holonomy(c, cf)?;
        let log_h = hv.h.ln_mag + t.0;
        let log_v = hv.v.ln_mag - t.0;
        rows.push(SnapshotRow {
            id: c.clone(),
            sign_h: hv.h.sign,
            log_h,
            sign_v: hv.v.sign,
            log_v,
            log_flat: log_flat_length(log_h, log_v),
        });
    }
    let slit_log_h = ln_rational(&slit.h_rat) + t.0;
    let slit_log_v = if slit.v.is_zero() {
        f64::NEG_INFINITY
    } else {
        big_ln(&slit.v) - t.0
    };
    rows.push(SnapshotRow {
        id: CurveId::Zeta { k: slit.k },
        sign_h: 1,
        log_h: slit_log_h,
        sign_v: if slit.v.is_zero() { 0 } else { 1 },
        log_v: slit_log_v,
        log_flat: log_flat_length(slit_log_h, slit_log_v),
    });
    Ok(SurfaceSnapshot {
        t,
        rows,
        area_minus: areas.0,
        area_plus: areas.1,
        slit,
    })
}

/// Advance a snapshot by dt: every holonomy maps (h, v) -> (e^dt h, e^-dt v);
/// areas are untouched.
pub fn apply_flow(s: &SurfaceSnapshot, dt: f64) -> SurfaceSnapshot {
    let mut out = s.clone();
    out.t = FlowTime(s.t.0 + dt);
    for row in &mut out.rows {
        row.log_h += dt;
        row.log_v -= dt;
        row.log_flat = log_flat_length(row.log_h, row.log_v);
    }
    out
}

/// t_k = (1/2) log(p_{n_k}^2 + q_{n_k}^2), evaluated from bit lengths so
/// CF3-scale convergents never overflow.
pub fn schedule_tk(cf: &CFExpansion, k: usize) -> Result<FlowTime> {
    let c = cf.convergent(cf.n_k(k)?)?;
    Ok(FlowTime(half_log_pq(cf, c.index)?))
}

fn half_log_pq(cf: &CFExpansion, n: usize) -> Result<f64> {
    let c = cf.convergent(n)?;
    let lq = big_ln(&c.q);
    let ratio = rational_to_f64(&BigRational::new(c.p.clone(), c.q.clone()));
    Ok(lq + 0.5 * (ratio * ratio).ln_1p())
}

/// The CF4 stage schedule: s_k, t_k, and the transition offset z_k.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cf4Schedule {
    pub k: usize,
    pub s_k: FlowTime,
    pub t_k: FlowTime,
    /// Offset from s_k at which the dominance regime flips; root of
    /// e^{2z} + 2z = k log 2.
    pub z_k: f64,
}

/// Schedule for the doubling family: s_k = log q_{k-1} + k log2 / 2,
/// t_k = log q_k, z_k from its defining relation by bisection.
pub fn schedule_cf4(cf: &CFExpansion, k: usize) -> Result<Cf4Schedule> {
    if k < 2 {
        return Err(LabError::Schedule {
            detail: format!("cf4 schedule needs k >= 2, got {k}"),
        });
    }
    let ln2 = std::f64::consts::LN_2;
    let q_prev = &cf.convergent(k - 1)?.q;
    let q_k = &cf.convergent(k)?.q;
    let s_k = big_ln(q_prev) + 0.5 * (k as f64) * ln2;
    let t_k = big_ln(q_k);
    let target = (k as f64) * ln2;
    let f = |z: f64| (2.0 * z).exp() + 2.0 * z - target;
    if f(0.0) >= 0.0 {
        return Err(LabError::Schedule {
            detail: format!("no z_k root in bracket for k = {k}"),
        });
    }
    let mut lo = 0.0f64;
    let mut hi = 0.5 * target.ln() + 1.0;
    debug_assert!(f(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z_k = 0.5 * (lo + hi);
    let s_next = big_ln(q_k) + 0.5 * ((k + 1) as f64) * ln2;
    if !(s_k <= t_k + 1e-9 && t_k <= s_next + 1e-9) {
        return Err(LabError::Schedule {
            detail: format!("cf4 ordering s_k <= t_k <= s_(k+1) violated at k = {k}"),
        });
    }
    Ok(Cf4Schedule {
        k,
        s_k: FlowTime(s_k),
        t_k: FlowTime(t_k),
        z_k,
    })
}

/// The CF3 stage schedule: the ergodic-point time t_k and the barycenter
/// time s_k (which carries the +k drift into the filler block).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cf3Schedule {
    pub k: usize,
    pub t_k: FlowTime,
    pub s_k: FlowTime,
}

/// t_k = (1/2) log(q^2 + p^2) at digit index 4k+5;
/// s_k = (1/2) log(q^2 + p^2) at digit index 4k+3, plus k.
pub fn schedule_cf3(cf: &CFExpansion, k: usize) -> Result<Cf3Schedule> {
    let need = 4 * k + 5;
    if cf.len() < need {
        return Err(LabError::Truncation {
            needed: need,
            available: cf.len(),
        });
    }
    let t_k = half_log_pq(cf, 4 * k + 5)?;
    let s_k = half_log_pq(cf, 4 * k + 3)? + k as f64;
    Ok(Cf3Schedule {
        k,
        t_k: FlowTime(t_k),
        s_k: FlowTime(s_k),
    })
}

/// Area split with the ergodic-endpoint analytic sandwich when it applies.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TorusAreas {
    pub area_minus: f64,
    pub area_plus: f64,
    /// Lemma-erg bounds on the shrinking torus's area, attached at c = +-1.
    pub bounds: Option<[f64; 2]>,
}

/// epsilon_k = min(1, sum_{j >= k} 2 / a_{n_j + 1}) over the recorded
/// stages: the analytic model of the minority torus's area at c = 1.
pub fn epsilon_tail(cf: &CFExpansion, k: usize) -> Result<f64> {
    let subseq = cf.subsequence();
    if k < 1 || k > subseq.len() {
        return Err(LabError::Truncation {
            needed: k.max(1),
            available: subseq.len(),
        });
    }
    if subseq[k - 1] + 1 > cf.len() {
        return Err(LabError::Truncation {
            needed: subseq[k - 1] + 1,
            available: cf.len(),
        });
    }
    let mut sum = 0.0f64;
    for &nj in &subseq[k - 1..] {
        if nj + 1 > cf.len() {
            break;
        }
        let a = cf.digit(nj + 1)?;
        sum += 2.0 / big_ln_safe_f64(a);
    }
    Ok(sum.min(1.0))
}

fn big_ln_safe_f64(a: &num_bigint::BigInt) -> f64 {
    a.to_f64().unwrap_or_else(|| big_ln(a).exp())
}

/// The analytic area model: interpolates the stage-k sandwich linearly in c,
/// so that area_minus(k, c) = (1-c) + c*epsilon_k and the two areas always
/// sum to 2. This is what a perfectly converged measure estimate yields.
pub fn analytic_areas(cf: &CFExpansion, k: usize, c: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(LabError::Config {
            detail: format!("c must lie in [-1, 1], got {c}"),
        });
    }
    let eps = epsilon_tail(cf, k)?;
    let minus = (1.0 - c) + c * eps;
    Ok((minus, 2.0 - minus))
}

/// Measure-driven torus areas at parameter c:
/// area_minus = (1-c)/2 mu_-(sheet 0) + (1+c)/2 mu_+(sheet 0), mass-2
/// convention; the Lemma-erg sandwich is attached at the endpoints.
pub fn torus_areas(
    cf: &CFExpansion,
    m: &MeasureEstimate,
    cparam: f64,
    k: usize,
) -> Result<TorusAreas> {
    if !(-1.0..=1.0).contains(&cparam) {
        return Err(LabError::Config {
            detail: format!("c must lie in [-1, 1], got {cparam}"),
        });
    }
    let minus0 = MeasureEstimate::sheet_mass(&m.mu_minus, 0);
    let plus0 = MeasureEstimate::sheet_mass(&m.mu_plus, 0);
    let area_minus = 0.5 * (1.0 - cparam) * minus0 + 0.5 * (1.0 + cparam) * plus0;
    let area_plus = 2.0 - area_minus;
    let bounds = if cparam.abs() == 1.0 {
        let nk = cf.n_k(k)?;
        if nk + 1 > cf.len() {
            return Err(LabError::Truncation {
                needed: nk + 1,
                available: cf.len(),
            });
        }
        let a = big_ln_safe_f64(cf.digit(nk + 1)?);
        Some([1.0 / (4.0 * a), epsilon_tail(cf, k)?])
    } else {
        None
    };
    Ok(TorusAreas {
        area_minus,
        area_plus,
        bounds,
    })
}

const TINY_TORUS_C: f64 = 0.25;

/// Flat-length sandwich for the shrinking torus's core curve beta_-^k:
/// [C / a_{n_k+1}, sum_{j>=k} 2 / a_{n_j+1}] at t_k, each end flowed
/// conservatively by e^{+-|t - t_k|}.
pub fn beta_minus_flat_length(cf: &CFExpansion, k: usize, t: FlowTime) -> Result<[f64; 2]> {
    let nk = cf.n_k(k)?;
    if nk + 1 > cf.len() {
        return Err(LabError::Truncation {
            needed: nk + 1,
            available: cf.len(),
        });
    }
    let a = big_ln_safe_f64(cf.digit(nk + 1)?);
    let lo = TINY_TORUS_C / a;
    let subseq = cf.subsequence();
    let mut hi = 0.0f64;
    for &nj in &subseq[k - 1..] {
        if nj + 1 > cf.len() {
            break;
        }
        hi += 2.0 / big_ln_safe_f64(cf.digit(nj + 1)?);
    }
    let t_k = schedule_tk(cf, k)?;
    let delta = (t.0 - t_k.0).abs();
    Ok([lo * (-delta).exp(), hi * delta.exp()])
}
