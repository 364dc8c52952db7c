//! Curves on the doubled slit torus: homological curve classes, holonomy
//! vectors, the inductive slit sequence zeta^k with its return-time
//! validation, exact intersection numbers, and measure pairings.
//!
//! Geometry model: each torus is a unit square whose top edge is glued by
//! rotation x -> x + alpha, so the vertical flow from base 0 visits bases
//! j*alpha; the stage-k slit consists of V_k = sum_{j<k} 2 q_{n_j} full
//! vertical strands at those bases (the first slit is the horizontal
//! interval I_1 itself). Curves are represented by homology plus symbolic
//! identity; that determines every quantity used here.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numberline::{big_ln, ln_rational, rational_to_f64, CFExpansion, CertReal};
use crate::veech::MeasureEstimate;

/// Which torus carries a curve; the slit itself separates the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Torus {
    Minus,
    Plus,
    Separating,
}

impl Torus {
    pub fn label(self) -> &'static str {
        match self {
            Torus::Minus => "-",
            Torus::Plus => "+",
            Torus::Separating => "sep",
        }
    }
}

/// Symbolic curve identity. Homology (when it exists) is resolved against a
/// digit prefix: sigma(k) is the n_k-th convergent curve, beta(k) the
/// previous one, gamma_i the horizontal (1, 0) curve of each torus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CurveId {
    Gamma1,
    Gamma2,
    Sigma { k: usize, torus: Torus },
    Beta { k: usize, torus: Torus },
    Zeta { k: usize },
    Custom { m: i64, n: i64, torus: Torus },
}

impl CurveId {
    pub fn torus(&self) -> Torus {
        match self {
            CurveId::Gamma1 => Torus::Minus,
            CurveId::Gamma2 => Torus::Plus,
            CurveId::Sigma { torus, .. } | CurveId::Beta { torus, .. } => *torus,
            CurveId::Zeta { .. } => Torus::Separating,
            CurveId::Custom { torus, .. } => *torus,
        }
    }

    pub fn is_separating(&self) -> bool {
        matches!(self, CurveId::Zeta { .. })
    }

    pub fn label(&self) -> String {
        match self {
            CurveId::Gamma1 => "gamma_1".into(),
            CurveId::Gamma2 => "gamma_2".into(),
            CurveId::Sigma { k, torus } => format!("sigma({k},{})", torus.label()),
            CurveId::Beta { k, torus } => format!("beta({k},{})", torus.label()),
            CurveId::Zeta { k } => format!("zeta({k})"),
            CurveId::Custom { m, n, torus } => format!("custom({m},{n},{})", torus.label()),
        }
    }

    /// Homology (m, n) in the containing torus; errors for the separating
    /// slit, whose data lives in `slit_sequence`.
    pub fn homology(&self, cf: &CFExpansion) -> Result<(BigInt, BigInt)> {
        match self {
            CurveId::Gamma1 | CurveId::Gamma2 => Ok((BigInt::one(), BigInt::zero())),
            CurveId::Sigma { k, .. } => {
                let c = cf.convergent(cf.n_k(*k)?)?;
                Ok((c.p.clone(), c.q.clone()))
            }
            CurveId::Beta { k, .. } => {
                let c = cf.convergent(cf.n_k(*k)? - 1)?;
                Ok((c.p.clone(), c.q.clone()))
            }
            CurveId::Custom { m, n, .. } => Ok((BigInt::from(*m), BigInt::from(*n))),
            CurveId::Zeta { .. } => Err(LabError::OutsideModel {
                detail: "separating curve zeta has no single-torus homology; use slit_sequence"
                    .into(),
            }),
        }
    }
}

/// A length with sign, kept in log space so CF3-scale magnitudes never leave
/// the representable range; the exact linear value rides along when one
/// exists.
#[derive(Clone, Debug)]
pub struct SignedLen {
    pub sign: i8,
    pub ln_mag: f64,
    pub linear: Option<CertReal>,
}

impl SignedLen {
    pub fn zero() -> Self {
        SignedLen {
            sign: 0,
            ln_mag: f64::NEG_INFINITY,
            linear: Some(CertReal::zero()),
        }
    }

    pub fn from_cert(ball: CertReal) -> Self {
        let mid = ball.mid().clone();
        if mid.is_zero() {
            return SignedLen {
                sign: 0,
                ln_mag: f64::NEG_INFINITY,
                linear: Some(ball),
            };
        }
        SignedLen {
            sign: if mid.is_negative() { -1 } else { 1 },
            ln_mag: ln_rational(&mid.abs()),
            linear: Some(ball),
        }
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        if v.is_zero() {
            return Self::zero();
        }
        SignedLen {
            sign: if v.is_negative() { -1 } else { 1 },
            ln_mag: big_ln(&v.abs()),
            linear: Some(CertReal::exact(BigRational::from(v.clone()))),
        }
    }

    pub fn value(&self) -> f64 {
        self.sign as f64 * self.ln_mag.exp()
    }
}

/// Flat holonomy (h, v) of a curve: horizontal and vertical components.
#[derive(Clone, Debug)]
pub struct HolonomyVector {
    pub h: SignedLen,
    pub v: SignedLen,
}

/// Holonomy of a homology class (m, n): the sheared-lattice model sends it
/// to (m - n*alpha, n); for sigma(k) the horizontal part is d_{n_k} up to
/// sign.
pub fn holonomy(c: &CurveId, cf: &CFExpansion) -> Result<HolonomyVector> {
    let (m, n) = c.homology(cf)?;
    let alpha = cf.alpha_ball();
    let h_ball = CertReal::exact(BigRational::from(m.clone()))
        .sub(&alpha.scale(&BigRational::from(n.clone())));
    Ok(HolonomyVector {
        h: SignedLen::from_cert(h_ball),
        v: SignedLen::from_bigint(&n),
    })
}

/// How a slit stage's return structure was checked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SlitValidation {
    /// Scanned ||j alpha|| for j = 1..q_{n_k} in exact residue arithmetic;
    /// records the first entry time into the two-sided residual window.
    DirectSim { first_entry: u64 },
    /// Certified the exact sandwich d_{n_k} < h(zeta^k) <= d_{n_k - 1},
    /// which forces the first entry to land at q_{n_k}.
    Sandwich,
}

/// One slit stage: h is the suffix sum sum_{j >= k} 2 d_{n_j} (ball around
/// the true-alpha value), v and the gamma crossing count are the exact
/// return total sum_{j < k} 2 q_{n_j}.
#[derive(Clone, Debug)]
pub struct SlitRecord {
    pub k: usize,
    pub h: CertReal,
    /// Surrogate suffix sum (no infinite tail), exact in the stage rationals.
    pub h_rat: BigRational,
    pub v: BigInt,
    pub crossing_count_gamma: BigInt,
    /// Advisory: the strict |I_1| < (1/3)||q_{n_1 - 1} alpha|| bound. The
    /// operative precondition is the validated return structure.
    pub smallness: Option<bool>,
    pub validation: SlitValidation,
}

const DIRECT_SIM_LIMIT: u64 = 2_000_000;

/// Build slit stages 1..=K with per-stage return-time validation.
///
/// The smallness flag is recorded as an advisory; construction proceeds when
/// it fails because the validation below checks the property the flag is a
/// proxy for: the orbit of 0 first re-enters the stage-k residual window
/// exactly at return q_{n_k}. A failed validation is a hard error.
pub fn slit_sequence(cf: &CFExpansion, big_k: usize) -> Result<Vec<SlitRecord>> {
    let subseq = cf.subsequence();
    if big_k < 1 || big_k > subseq.len() {
        return Err(LabError::Truncation {
            needed: big_k.max(1),
            available: subseq.len(),
        });
    }
    let nk_last = subseq[big_k - 1];
    if !cf.is_exact() && nk_last >= cf.len() {
        // The last recorded digit pins d_{n_K} only up to the truncation
        // tail; one more digit is needed before stage K is a real surface.
        return Err(LabError::Truncation {
            needed: nk_last + 1,
            available: cf.len(),
        });
    }
    let base = cf.slit_base_length(subseq.len())?;
    let smallness = base.small;
    let two = BigRational::from(BigInt::from(2));

    // Surrogate distances d_{n_j} = |q alpha_surr - p| (denominators divide
    // q_N, so residue scans stay exact) with ball radii q * rad(alpha).
    let alpha_surr = cf.alpha_exact();
    let alpha_rad = cf.alpha_ball().rad().clone();
    let mut d_mid = Vec::with_capacity(subseq.len());
    let mut d_rad = Vec::with_capacity(subseq.len());
    for &nk in subseq {
        let c = cf.convergent(nk)?;
        let q = BigRational::from(c.q.clone());
        let p = BigRational::from(c.p.clone());
        d_mid.push((&alpha_surr * &q - p).abs());
        d_rad.push(&q * &alpha_rad);
    }
    // Shared beyond-truncation tail (zero for exact expansions): everything
    // slit_base_length adds past the last recorded subsequence index.
    let full_partial_upper: BigRational = d_mid
        .iter()
        .zip(&d_rad)
        .map(|(m, r)| &two * (m + r))
        .sum();
    let beyond_tail = (base.value.upper() - full_partial_upper).max(BigRational::zero());

    let mut suffix_mid = vec![BigRational::zero(); subseq.len() + 1];
    let mut suffix_rad = vec![BigRational::zero(); subseq.len() + 1];
    for j in (0..subseq.len()).rev() {
        suffix_mid[j] = &suffix_mid[j + 1] + &two * &d_mid[j];
        suffix_rad[j] = &suffix_rad[j + 1] + &two * &d_rad[j];
    }

    let mut records = Vec::with_capacity(big_k);
    let mut v = BigInt::zero();
    for k in 1..=big_k {
        let h_rat = suffix_mid[k - 1].clone();
        let half_tail = &beyond_tail / &two;
        let h = CertReal::new(
            &h_rat + &half_tail,
            &suffix_rad[k - 1] + &half_tail,
        );
        let validation = validate_stage(cf, k, &h_rat, &d_mid)?;
        records.push(SlitRecord {
            k,
            h,
            h_rat,
            v: v.clone(),
            crossing_count_gamma: v.clone(),
            smallness,
            validation,
        });
        let q = cf.convergent(subseq[k - 1])?.q.clone();
        v += BigInt::from(2) * q;
    }
    Ok(records)
}

/// Check that the first j >= 1 with ||j alpha|| < h(zeta^k) is exactly
/// q_{n_k}, via the exact sandwich when it holds, otherwise by direct scan.
fn validate_stage(
    cf: &CFExpansion,
    k: usize,
    h_rat: &BigRational,
    d_mid: &[BigRational],
) -> Result<SlitValidation> {
    let nk = cf.subsequence()[k - 1];
    let q_nk = &cf.convergent(nk)?.q;
    let d_nk = &d_mid[k - 1];
    let prev = cf.convergent(nk - 1)?;
    let d_prev = (cf.alpha_exact() * BigRational::from(prev.q.clone())
        - BigRational::from(prev.p.clone()))
    .abs();
    if d_nk < h_rat && *h_rat <= d_prev {
        // Best approximation: ||j alpha|| >= d_{n_k - 1} >= h for j < q_{n_k},
        // and d_{n_k} < h admits j = q_{n_k}.
        return Ok(SlitValidation::Sandwich);
    }
    let q_target = q_nk
        .to_u64()
        .filter(|&q| q <= DIRECT_SIM_LIMIT)
        .ok_or_else(|| LabError::ConstructionInvalid {
            detail: format!("stage {k}: sandwich bound fails and q_{{n_k}} too large for direct scan"),
        })?;
    let den = cf.alpha_exact().denom().clone();
    if q_target <= 4096 {
        // Few enough steps to scan in exact rational arithmetic, which
        // stays viable when the surrogate denominator is astronomical.
        let alpha = cf.alpha_exact();
        let one = BigRational::one();
        let mut pos = BigRational::zero();
        let mut first = None;
        for j in 1..=q_target {
            pos += &alpha;
            if pos >= one {
                pos -= &one;
            }
            let dist = (&pos).min(&(&one - &pos)).clone();
            if dist < *h_rat {
                first = Some(j);
                break;
            }
        }
        return finish_scan(k, q_target, first);
    }
    if den.bits() > 62 {
        return Err(LabError::ConstructionInvalid {
            detail: format!("stage {k}: sandwich bound fails and denominators exceed residue range"),
        });
    }
    let d = den.to_u64().expect("checked bits");
    let alpha_num = (cf.alpha_exact() * BigRational::from(BigInt::from(d)))
        .to_integer()
        .to_u64()
        .expect("alpha in (0,1)");
    // Every d_{n_j} shares denominator q_N with alpha, so h * q_N is an
    // exact integer and the scan never rounds.
    let h_scaled = h_rat * BigRational::from(BigInt::from(d));
    debug_assert!(h_scaled.is_integer());
    let h_num = h_scaled.to_integer().to_u64().unwrap_or(u64::MAX);
    let mut pos: u64 = 0;
    let mut first = None;
    for j in 1..=q_target {
        pos += alpha_num;
        if pos >= d {
            pos -= d;
        }
        if pos.min(d - pos) < h_num {
            first = Some(j);
            break;
        }
    }
    finish_scan(k, q_target, first)
}

fn finish_scan(k: usize, q_target: u64, first: Option<u64>) -> Result<SlitValidation> {
    match first {
        Some(j) if j == q_target => Ok(SlitValidation::DirectSim { first_entry: j }),
        Some(j) => Err(LabError::ConstructionInvalid {
            detail: format!(
                "stage {k}: first residual entry at return {j}, formula expects q_{{n_k}} = {q_target}"
            ),
        }),
        None => Err(LabError::ConstructionInvalid {
            detail: format!("stage {k}: no residual entry within q_{{n_k}} = {q_target} returns"),
        }),
    }
}

/// Exact geometric intersection numbers for the supported pairs.
///
/// Same-torus homology pairs use the determinant; gamma against zeta^k is
/// the strand count V_k; same-stage sigma against zeta^k is certified 0 via
/// a clearance bound. Anything else is unsupported.
pub fn intersection_number(c1: &CurveId, c2: &CurveId, cf: &CFExpansion) -> Result<BigInt> {
    match (c1.is_separating(), c2.is_separating()) {
        (false, false) => {
            let (m1, n1) = c1.homology(cf)?;
            let (m2, n2) = c2.homology(cf)?;
            Ok((m1 * n2 - m2 * n1).abs())
        }
        (true, true) => Err(LabError::UnsupportedPair {
            a: c1.label(),
            b: c2.label(),
        }),
        _ => {
            let (zeta, other) = if c1.is_separating() { (c1, c2) } else { (c2, c1) };
            let CurveId::Zeta { k } = zeta else { unreachable!() };
            match other {
                CurveId::Gamma1 | CurveId::Gamma2 => slit_crossings(cf, *k),
                CurveId::Sigma { k: ks, .. } if ks == k => {
                    sigma_slit_clearance(cf, *k).map(|_| BigInt::zero())
                }
                _ => Err(LabError::UnsupportedPair {
                    a: other.label(),
                    b: zeta.label(),
                }),
            }
        }
    }
}

/// i(gamma_i, zeta^k) = sum_{j <= k-1} 2 q_{n_j}: every strand crosses each
/// horizontal curve once, the curve switching torus at every crossing (the
/// count is even, so it closes up).
pub fn slit_crossings(cf: &CFExpansion, k: usize) -> Result<BigInt> {
    let subseq = cf.subsequence();
    if k < 1 || k > subseq.len() {
        return Err(LabError::Truncation {
            needed: k.max(1),
            available: subseq.len(),
        });
    }
    let mut v = BigInt::zero();
    for &nj in &subseq[..k - 1] {
        v += BigInt::from(2) * &cf.convergent(nj)?.q;
    }
    Ok(v)
}

/// Certify that the stage-k sigma curves can be drawn disjoint from zeta^k:
/// with sigma based at the half-spacing offset of its own 1/q grid, every
/// strand base stays (V_k + 1) d_{n_k} short of the grid; disjointness needs
/// that to be under half a grid cell. Returns the certified margin.
pub fn sigma_slit_clearance(cf: &CFExpansion, k: usize) -> Result<BigRational> {
    let nk = cf.n_k(k)?;
    let d = cf.nearest_int_distance(nk)?.mid().clone();
    let v = slit_crossings(cf, k)?;
    let margin = BigRational::new(BigInt::one(), BigInt::from(2))
        - BigRational::from(v + BigInt::one()) * &d;
    if margin.is_positive() {
        Ok(margin)
    } else {
        Err(LabError::Undecided {
            context: format!("sigma({k}) vs zeta({k}): clearance bound not positive"),
        })
    }
}

/// Fractions of a horizontal curve lying in each torus at stage k, from the
/// alternating arcs cut by the V_k strand bases {j alpha}. Returns the two
/// shares (alternation classes in circle order); each tends to 1/2 as the
/// bases equidistribute.
pub fn torus_gap_fractions(cf: &CFExpansion, k: usize) -> Result<(f64, f64)> {
    let v = slit_crossings(cf, k)?
        .to_u64()
        .ok_or_else(|| LabError::OutsideModel {
            detail: "strand count exceeds enumerable range".into(),
        })?;
    if v == 0 {
        return Ok((1.0, 0.0));
    }
    if v > 4_000_000 {
        return Err(LabError::OutsideModel {
            detail: format!("strand count {v} too large to enumerate"),
        });
    }
    let alpha = cf.alpha_exact();
    let mut bases: Vec<BigRational> = Vec::with_capacity(v as usize);
    let mut x = BigRational::zero();
    for _ in 0..v {
        bases.push(x.clone());
        x += &alpha;
        if x >= BigRational::one() {
            x -= BigRational::one();
        }
    }
    bases.sort();
    let mut shares = [BigRational::zero(), BigRational::zero()];
    for i in 0..bases.len() {
        let next = if i + 1 == bases.len() {
            &bases[0] + BigRational::one()
        } else {
            bases[i + 1].clone()
        };
        shares[i % 2] += next - &bases[i];
    }
    Ok((rational_to_f64(&shares[0]), rational_to_f64(&shares[1])))
}

/// i((F, mu_c), gamma_i): the mu_c-horizontal length of gamma_i, i.e. the
/// weighted sheet mass (1-c)/2 mu_-(gamma_i) + (1+c)/2 mu_+(gamma_i) in the
/// normalized (probability) view.
pub fn measure_pairings(c: &CurveId, m: &MeasureEstimate, cparam: f64) -> Result<f64> {
    let sheet = match c {
        CurveId::Gamma1 => 0u8,
        CurveId::Gamma2 => 1u8,
        _ => {
            return Err(LabError::UnsupportedPair {
                a: c.label(),
                b: "measure pairing (gamma_1 or gamma_2 only)".into(),
            })
        }
    };
    if !(-1.0..=1.0).contains(&cparam) {
        return Err(LabError::Config {
            detail: format!("c must lie in [-1, 1], got {cparam}"),
        });
    }
    let minus = MeasureEstimate::sheet_mass(&MeasureEstimate::normalized(&m.mu_minus), sheet);
    let plus = MeasureEstimate::sheet_mass(&MeasureEstimate::normalized(&m.mu_plus), sheet);
    Ok(0.5 * (1.0 - cparam) * minus + 0.5 * (1.0 + cparam) * plus)
}

/// One row of the exported curve table.
#[derive(Clone, Debug, Serialize)]
pub struct CurveRow {
    pub id: String,
    pub torus: String,
    pub m: String,
    pub n: String,
    pub h_log: f64,
    pub v_log: f64,
    pub crossings_with_gamma1: String,
    pub crossings_with_gamma2: String,
}

/// Curve table for stages 1..=K: the two horizontal curves, both copies of
/// sigma and beta per stage, and the slits.
pub fn curve_table(cf: &CFExpansion, big_k: usize) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    let g1 = CurveId::Gamma1;
    let g2 = CurveId::Gamma2;
    let mut push_homological = |c: &CurveId| -> Result<()> {
        let hv = holonomy(c, cf)?;
        let (m, n) = c.homology(cf)?;
        rows.push(CurveRow {
            id: c.label(),
            torus: c.torus().label().into(),
            m: m.to_string(),
            n: n.to_string(),
            h_log: hv.h.ln_mag,
            v_log: hv.v.ln_mag,
            crossings_with_gamma1: intersection_number(c, &g1, cf)?.to_string(),
            crossings_with_gamma2: intersection_number(c, &g2, cf)?.to_string(),
        });
        Ok(())
    };
    push_homological(&g1)?;
    push_homological(&g2)?;
    for k in 1..=big_k {
        for torus in [Torus::Minus, Torus::Plus] {
            push_homological(&CurveId::Sigma { k, torus })?;
            push_homological(&CurveId::Beta { k, torus })?;
        }
    }
    let records = slit_sequence(cf, big_k)?;
    for r in &records {
        let v_log = if r.v.is_zero() {
            f64::NEG_INFINITY
        } else {
            big_ln(&r.v)
        };
        rows.push(CurveRow {
            id: CurveId::Zeta { k: r.k }.label(),
            torus: Torus::Separating.label().into(),
            m: String::new(),
            n: String::new(),
            h_log: ln_rational(r.h.mid()),
            v_log,
            crossings_with_gamma1: r.crossing_count_gamma.to_string(),
            crossings_with_gamma2: r.crossing_count_gamma.to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cf4() -> CFExpansion {
        CFExpansion::family_cf4(8).unwrap()
    }

    #[test]
    fn gamma_holonomy_is_horizontal_unit() {
        let cf = cf4();
        let hv = holonomy(&CurveId::Gamma1, &cf).unwrap();
        assert_eq!(hv.h.sign, 1);
        assert_eq!(hv.h.ln_mag, 0.0);
        assert_eq!(hv.v.sign, 0);
    }

    #[test]
    fn sigma_horizontal_component_is_distance() {
        let cf = cf4();
        for k in 1..=5 {
            let hv = holonomy(
                &CurveId::Sigma {
                    k,
                    torus: Torus::Minus,
                },
                &cf,
            )
            .unwrap();
            let d = cf.nearest_int_distance(k).unwrap();
            let h_abs = hv.linear_h_abs();
            assert_eq!(h_abs, d.mid().clone(), "k={k}");
        }
    }

    impl HolonomyVector {
        fn linear_h_abs(&self) -> BigRational {
            self.h.linear.as_ref().unwrap().mid().abs()
        }
    }

    #[test]
    fn sigma_horizontal_scale_matches_lemma() {
        let cf = cf4();
        // d_{n_k} x q_{n_k} a_{n_k+1} stays within a factor 4 of 1.
        for k in 2..=6 {
            let d = cf.nearest_int_distance(k).unwrap().to_f64();
            let q = cf.convergent(k).unwrap().q.to_f64().unwrap();
            let a = cf.digit(k + 1).unwrap().to_f64().unwrap();
            let prod = d * q * a;
            assert!((0.25..=4.0).contains(&prod), "k={k}: {prod}");
        }
    }

    #[test]
    fn beta_vertical_is_previous_denominator() {
        let cf = cf4();
        let hv = holonomy(
            &CurveId::Beta {
                k: 4,
                torus: Torus::Plus,
            },
            &cf,
        )
        .unwrap();
        let q3 = cf.convergent(3).unwrap().q.clone();
        assert_eq!(
            hv.v.linear.unwrap().mid(),
            &BigRational::from(q3)
        );
    }

    #[test]
    fn zeta_holonomy_rejected() {
        let cf = cf4();
        assert!(matches!(
            holonomy(&CurveId::Zeta { k: 2 }, &cf),
            Err(LabError::OutsideModel { .. })
        ));
    }

    #[test]
    fn slit_sequence_cf4_crossings() {
        let cf = cf4();
        let records = slit_sequence(&cf, 5).unwrap();
        let counts: Vec<i64> = records
            .iter()
            .map(|r| r.crossing_count_gamma.to_i64().unwrap())
            .collect();
        assert_eq!(counts, vec![0, 2, 8, 34, 248]);
        assert_eq!(records[0].smallness, Some(false));
    }

    #[test]
    fn slit_sequence_first_stage_is_base() {
        let cf = cf4();
        let records = slit_sequence(&cf, 1).unwrap();
        let base = cf.slit_base_length(cf.subsequence().len()).unwrap();
        // h(zeta^1) is the slit base; the surrogate sum and the certified
        // partial agree within the ball radius.
        let diff = rational_to_f64(&(&records[0].h_rat - base.partial.mid()).abs());
        assert!(diff <= rational_to_f64(base.partial.rad()) + 1e-15, "diff={diff}");
        assert!(records[0].h.contains(base.value.mid()) || diff < 1e-9);
        assert!(records[0].v.is_zero());
    }

    #[test]
    fn slit_heights_telescope_exactly() {
        let cf = cf4();
        let records = slit_sequence(&cf, 6).unwrap();
        for w in records.windows(2) {
            let nk = cf.subsequence()[w[0].k - 1];
            let d = cf.nearest_int_distance(nk).unwrap().mid().clone();
            let two = BigRational::from(BigInt::from(2));
            assert_eq!(&w[0].h_rat - &w[1].h_rat, two * d, "k={}", w[0].k);
            assert!(w[1].h_rat < w[0].h_rat);
        }
    }

    #[test]
    fn slit_validation_modes() {
        let cf = cf4();
        let records = slit_sequence(&cf, 5).unwrap();
        // Stage 1 has h = b > d_0, so the sandwich fails and the direct scan
        // confirms the trivial first return q_1 = 1.
        assert_eq!(
            records[0].validation,
            SlitValidation::DirectSim { first_entry: 1 }
        );
        for r in &records[1..] {
            match &r.validation {
                SlitValidation::DirectSim { first_entry } => {
                    let q = cf
                        .convergent(cf.subsequence()[r.k - 1])
                        .unwrap()
                        .q
                        .to_u64()
                        .unwrap();
                    assert_eq!(*first_entry, q, "k={}", r.k);
                }
                SlitValidation::Sandwich => {}
            }
        }
    }

    #[test]
    fn slit_sequence_small_family_is_sandwichable() {
        let cf = CFExpansion::from_digits_u64(&[2, 100, 100, 1000, 1000], false).unwrap();
        let records = slit_sequence(&cf, 3).unwrap();
        assert_eq!(records[0].smallness, Some(true));
        // Later stages separate cleanly enough for the exact sandwich.
        assert!(records[1..]
            .iter()
            .all(|r| r.validation == SlitValidation::Sandwich));
    }

    #[test]
    fn slit_sequence_cf3_huge_digits() {
        let cf = CFExpansion::family_cf3(6, &crate::numberline::Filler::DExp).unwrap();
        let records = slit_sequence(&cf, 6).unwrap();
        for w in records.windows(2) {
            assert!(w[1].h_rat < w[0].h_rat);
        }
        // Stages past the first certify by sandwich (q_{n_k} is astronomical).
        assert!(records[2..]
            .iter()
            .all(|r| r.validation == SlitValidation::Sandwich));
    }

    #[test]
    fn intersection_determinant() {
        let cf = CFExpansion::from_digits_u64(&[1, 2, 4], true).unwrap();
        let g = CurveId::Gamma1;
        let s = CurveId::Sigma {
            k: 3,
            torus: Torus::Minus,
        };
        assert_eq!(intersection_number(&g, &s, &cf).unwrap(), BigInt::from(13));
    }

    #[test]
    fn intersection_sigma_beta_unimodular() {
        let cf = cf4();
        for k in 2..=6 {
            let s = CurveId::Sigma {
                k,
                torus: Torus::Minus,
            };
            let b = CurveId::Beta {
                k,
                torus: Torus::Minus,
            };
            assert_eq!(intersection_number(&s, &b, &cf).unwrap(), BigInt::one());
        }
    }

    #[test]
    fn intersection_gamma_zeta_matches_strands() {
        let cf = cf4();
        let z = CurveId::Zeta { k: 3 };
        assert_eq!(
            intersection_number(&CurveId::Gamma1, &z, &cf).unwrap(),
            BigInt::from(8)
        );
        assert_eq!(
            intersection_number(&CurveId::Gamma2, &z, &cf).unwrap(),
            BigInt::from(8)
        );
    }

    #[test]
    fn intersection_sigma_zeta_disjoint() {
        let cf = cf4();
        for k in 2..=6 {
            let s = CurveId::Sigma {
                k,
                torus: Torus::Plus,
            };
            let z = CurveId::Zeta { k };
            assert!(intersection_number(&s, &z, &cf).unwrap().is_zero());
        }
    }

    #[test]
    fn intersection_zeta_zeta_unsupported() {
        let cf = cf4();
        let a = CurveId::Zeta { k: 2 };
        let b = CurveId::Zeta { k: 3 };
        assert!(matches!(
            intersection_number(&a, &b, &cf),
            Err(LabError::UnsupportedPair { .. })
        ));
    }

    #[test]
    fn swap_symmetry_of_crossings() {
        let cf = cf4();
        for k in 2..=5 {
            let a = intersection_number(
                &CurveId::Gamma1,
                &CurveId::Sigma {
                    k,
                    torus: Torus::Plus,
                },
                &cf,
            )
            .unwrap();
            let b = intersection_number(
                &CurveId::Gamma2,
                &CurveId::Sigma {
                    k,
                    torus: Torus::Minus,
                },
                &cf,
            )
            .unwrap();
            assert_eq!(a, b);
            assert_eq!(a, cf.convergent(k).unwrap().q);
        }
    }

    #[test]
    fn gap_fractions_tend_to_half() {
        let cf = cf4();
        let (a2, b2) = torus_gap_fractions(&cf, 2).unwrap();
        let (a5, b5) = torus_gap_fractions(&cf, 5).unwrap();
        assert!((a2 + b2 - 1.0).abs() < 1e-12);
        assert!((a5 + b5 - 1.0).abs() < 1e-12);
        let dev2 = (a2 - 0.5).abs();
        let dev5 = (a5 - 0.5).abs();
        assert!(dev5 < dev2 + 0.05, "dev2={dev2}, dev5={dev5}");
        assert!(dev5 < 0.25);
    }

    fn pairing_estimate() -> MeasureEstimate {
        MeasureEstimate {
            cut_points: [0.2, 0.5],
            arcs: [0.2, 0.3, 0.5],
            degenerate: false,
            mu_minus: [0.2, 0.2, 0.2, 0.7, 0.35, 0.35],
            mu_plus: [0.7, 0.35, 0.35, 0.2, 0.2, 0.2],
            sample_count: 0,
            confidence_radius: 0.0,
            cluster_gap: 1.0,
            lambda_residual: 0.0,
            seed_fractions: vec![],
            cluster_of_seed: vec![],
        }
    }

    #[test]
    fn measure_pairing_weighted_average() {
        let m = pairing_estimate();
        // Normalized sheet-0 masses: mu_- -> 0.3, mu_+ -> 0.7.
        let p = measure_pairings(&CurveId::Gamma1, &m, 0.5).unwrap();
        assert!((p - 0.6).abs() < 1e-12, "pairing = {p}");
    }

    #[test]
    fn measure_pairing_collapses_at_extremes() {
        let m = pairing_estimate();
        let p = measure_pairings(&CurveId::Gamma1, &m, 1.0).unwrap();
        assert!((p - 0.7).abs() < 1e-12);
        let q = measure_pairings(&CurveId::Gamma2, &m, 1.0).unwrap();
        assert!((q - 0.3).abs() < 1e-12);
    }

    #[test]
    fn measure_pairing_symmetric_at_c0() {
        let m = pairing_estimate();
        let p1 = measure_pairings(&CurveId::Gamma1, &m, 0.0).unwrap();
        let p2 = measure_pairings(&CurveId::Gamma2, &m, 0.0).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn measure_pairing_rejects_sigma() {
        let m = pairing_estimate();
        let s = CurveId::Sigma {
            k: 2,
            torus: Torus::Minus,
        };
        assert!(matches!(
            measure_pairings(&s, &m, 0.0),
            Err(LabError::UnsupportedPair { .. })
        ));
    }

    #[test]
    fn curve_table_rows() {
        let cf = cf4();
        let rows = curve_table(&cf, 3).unwrap();
        // 2 gammas + 4 per stage (sigma/beta x two tori) + 3 zetas.
        assert_eq!(rows.len(), 2 + 4 * 3 + 3);
        let zeta3 = rows.iter().find(|r| r.id == "zeta(3)").unwrap();
        assert_eq!(zeta3.crossings_with_gamma1, "8");
        assert_eq!(zeta3.torus, "sep");
    }
}
