//! Continued fractions, convergents, certified rational balls, and the
//! Diophantine inequalities the rest of the lab leans on.
//!
//! Everything here is exact: values are rationals in the truncated expansion,
//! and uncertainty enters only through the truncation itself, carried as an
//! explicit interval radius. "Raising precision" means extending the digit
//! prefix, which only shrinks radii, so any strict comparison verdict is
//! stable under escalation.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LabError, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Natural log of a positive big integer, via bit length plus the leading
/// 53 bits. Exact integers up to 2^53 take the direct route.
pub fn big_ln(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive(), "big_ln needs a positive argument");
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().expect("small BigInt fits f64").ln();
    }
    let shift = bits - 53;
    let lead = (x >> shift).to_f64().expect("53-bit lead fits f64");
    lead.ln() + shift as f64 * LN_2
}

/// Natural log of a positive rational.
pub fn ln_rational(r: &BigRational) -> f64 {
    debug_assert!(r.is_positive(), "ln_rational needs a positive argument");
    big_ln(&r.numer().abs()) - big_ln(r.denom())
}

/// Rational to f64, falling back to exp(ln) when the parts overflow f64.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if r.numer().bits() <= 900 && r.denom().bits() <= 900 {
        if let Some(v) = r.to_f64() {
            if v.is_finite() {
                return v;
            }
        }
    }
    let mag = (big_ln(&r.numer().abs()) - big_ln(r.denom())).exp();
    if r.is_negative() {
        -mag
    } else {
        mag
    }
}

fn big_rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A real known to lie in [mid - rad, mid + rad], both bounds exact rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct CertReal {
    mid: BigRational,
    rad: BigRational,
    bits: u32,
}

impl CertReal {
    pub fn new(mid: BigRational, rad: BigRational) -> Self {
        assert!(!rad.is_negative(), "radius must be nonnegative");
        let bits = achieved_bits(&rad);
        CertReal { mid, rad, bits }
    }

    pub fn exact(mid: BigRational) -> Self {
        CertReal {
            mid,
            rad: BigRational::zero(),
            bits: u32::MAX,
        }
    }

    pub fn zero() -> Self {
        Self::exact(BigRational::zero())
    }

    pub fn mid(&self) -> &BigRational {
        &self.mid
    }

    pub fn rad(&self) -> &BigRational {
        &self.rad
    }

    /// Achieved precision: floor(-log2 radius), u32::MAX for exact values.
    pub fn precision_bits(&self) -> u32 {
        self.bits
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    pub fn lower(&self) -> BigRational {
        &self.mid - &self.rad
    }

    pub fn upper(&self) -> BigRational {
        &self.mid + &self.rad
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.mid)
    }

    pub fn rad_f64(&self) -> f64 {
        rational_to_f64(&self.rad)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(&self.mid + &o.mid, &self.rad + &o.rad)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(&self.mid - &o.mid, &self.rad + &o.rad)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.mid.clone(), self.rad.clone())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::new(&self.mid * c, &self.rad * c.abs())
    }

    /// Interval image under x -> |x|; tight even when the ball straddles 0.
    pub fn abs(&self) -> Self {
        let lo = self.lower();
        let hi = self.upper();
        if !lo.is_negative() {
            return self.clone();
        }
        if !hi.is_positive() {
            return self.neg();
        }
        let top = if lo.abs() > hi { lo.abs() } else { hi };
        let half = &top / BigRational::from(BigInt::from(2));
        Self::new(half.clone(), half)
    }

    /// Strict interval order; None when the balls overlap (and are not the
    /// same exact point).
    pub fn compare(&self, o: &Self) -> Option<Ordering> {
        if self.upper() < o.lower() {
            return Some(Ordering::Less);
        }
        if self.lower() > o.upper() {
            return Some(Ordering::Greater);
        }
        if self.is_exact() && o.is_exact() && self.mid == o.mid {
            return Some(Ordering::Equal);
        }
        None
    }

    pub fn lt(&self, o: &Self) -> Option<bool> {
        match self.compare(o) {
            Some(Ordering::Less) => Some(true),
            Some(_) => Some(false),
            None => None,
        }
    }

    pub fn contains(&self, r: &BigRational) -> bool {
        self.lower() <= *r && *r <= self.upper()
    }
}

impl fmt::Display for CertReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {:.3e}", self.to_f64(), self.rad_f64())
    }
}

fn achieved_bits(rad: &BigRational) -> u32 {
    if rad.is_zero() {
        return u32::MAX;
    }
    if *rad >= BigRational::one() {
        return 0;
    }
    (-ln_rational(rad) / LN_2).floor().max(0.0) as u32
}

/// One convergent p_n/q_n of a continued fraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigInt,
    pub q: BigInt,
    pub index: usize,
}

/// Free-digit schedule for the cf3 family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Filler {
    Const(u64),
    /// 2^(2^k) at block k: fast enough to dominate every ratio the
    /// condition-(C) diagnostics track.
    DExp,
}

impl Filler {
    fn digit(&self, k: usize) -> Result<BigInt> {
        match self {
            Filler::Const(d) => {
                if *d < 1 {
                    Err(LabError::InvalidDigit { position: 4 * k - 1 })
                } else {
                    Ok(BigInt::from(*d))
                }
            }
            Filler::DExp => Ok(BigInt::one() << (1usize << k)),
        }
    }
}

/// A finite digit prefix a_1..a_N with a distinguished subsequence n_k.
///
/// `exact` marks a prefix that IS the number (a rational surrogate); families
/// are truncations of an infinite expansion and carry an interval radius on
/// every derived value instead.
#[derive(Clone, Debug)]
pub struct CFExpansion {
    digits: Vec<BigInt>,
    subseq: Vec<usize>,
    exact: bool,
    convs: Vec<Convergent>,
}

impl CFExpansion {
    pub fn new(digits: Vec<BigInt>, subseq: Vec<usize>, exact: bool) -> Result<Self> {
        for (i, d) in digits.iter().enumerate() {
            if *d < BigInt::one() {
                return Err(LabError::InvalidDigit { position: i + 1 });
            }
        }
        let n = digits.len();
        let mut prev = 0usize;
        for &nk in &subseq {
            if nk <= prev || nk > n {
                return Err(LabError::Config {
                    detail: format!(
                        "subsequence must be strictly increasing within 1..={n}, got index {nk}"
                    ),
                });
            }
            prev = nk;
        }
        let mut convs = Vec::with_capacity(n + 1);
        convs.push(Convergent {
            p: BigInt::zero(),
            q: BigInt::one(),
            index: 0,
        });
        let (mut pm1, mut qm1) = (BigInt::one(), BigInt::zero());
        for (i, a) in digits.iter().enumerate() {
            let last = convs.last().expect("seeded");
            let p = a * &last.p + &pm1;
            let q = a * &last.q + &qm1;
            pm1 = last.p.clone();
            qm1 = last.q.clone();
            convs.push(Convergent { p, q, index: i + 1 });
        }
        Ok(CFExpansion {
            digits,
            subseq,
            exact,
            convs,
        })
    }

    /// Convenience constructor; the subsequence defaults to every index.
    pub fn from_digits_u64(digits: &[u64], exact: bool) -> Result<Self> {
        let ds: Vec<BigInt> = digits.iter().map(|&d| BigInt::from(d)).collect();
        let subseq = (1..=digits.len()).collect();
        Self::new(ds, subseq, exact)
    }

    /// Theorem-CF4 family: digits 1, 2, 4, ..., 2^(k-1); n_k = k.
    pub fn family_cf4(k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(LabError::Config {
                detail: "cf4 family needs k_max >= 1".into(),
            });
        }
        let digits: Vec<BigInt> = (1..=k_max).map(|k| BigInt::one() << (k - 1)).collect();
        let subseq = (1..=k_max).collect();
        Self::new(digits, subseq, false)
    }

    /// Theorem-CF3 family: block digits k^2, k^2 at positions 4k-3, 4k-2
    /// (n_k = 4k-3), free digits from the filler at positions 4k-1, 4k.
    /// k_max = 1 emits the first block only.
    pub fn family_cf3(k_max: usize, filler: &Filler) -> Result<Self> {
        if k_max < 1 {
            return Err(LabError::Config {
                detail: "cf3 family needs k_max >= 1".into(),
            });
        }
        let mut digits = Vec::new();
        let mut subseq = Vec::new();
        for k in 1..=k_max {
            subseq.push(4 * k - 3);
            let block = BigInt::from((k * k) as u64);
            digits.push(block.clone());
            digits.push(block);
            if k < k_max || k_max >= 2 {
                let f = filler.digit(k)?;
                digits.push(f.clone());
                digits.push(f);
            }
        }
        Self::new(digits, subseq, false)
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// 1-based digit access.
    pub fn digit(&self, i: usize) -> Result<&BigInt> {
        if i == 0 || i > self.digits.len() {
            return Err(LabError::Truncation {
                needed: i,
                available: self.digits.len(),
            });
        }
        Ok(&self.digits[i - 1])
    }

    pub fn subsequence(&self) -> &[usize] {
        &self.subseq
    }

    /// 1-based n_k access.
    pub fn n_k(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.subseq.len() {
            return Err(LabError::Truncation {
                needed: k,
                available: self.subseq.len(),
            });
        }
        Ok(self.subseq[k - 1])
    }

    /// Convergent at index n (0 = the 0/1 seed).
    pub fn convergent(&self, n: usize) -> Result<&Convergent> {
        self.convs.get(n).ok_or(LabError::Truncation {
            needed: n,
            available: self.digits.len(),
        })
    }

    /// The convergents p_1/q_1 .. p_n/q_n.
    pub fn convergents(&self, n: usize) -> Result<Vec<Convergent>> {
        if n > self.digits.len() {
            return Err(LabError::Truncation {
                needed: n,
                available: self.digits.len(),
            });
        }
        Ok(self.convs[1..=n].to_vec())
    }

    /// The full prefix evaluated as an exact rational p_N/q_N.
    pub fn alpha_exact(&self) -> BigRational {
        let last = self.convs.last().expect("seeded");
        BigRational::new(last.p.clone(), last.q.clone())
    }

    /// Certified ball around alpha from the prefix: exact expansions have
    /// radius 0; truncated families get |alpha - p_N/q_N| < 1/(q_N(q_N+q_{N-1})).
    pub fn alpha_ball(&self) -> CertReal {
        self.alpha_ball_at(self.digits.len())
            .expect("full prefix is always available")
    }

    fn alpha_ball_at(&self, k: usize) -> Result<CertReal> {
        if k < 2 || k > self.digits.len() {
            return Err(LabError::Truncation {
                needed: 2.max(k),
                available: self.digits.len(),
            });
        }
        let ck = &self.convs[k];
        let mid = BigRational::new(ck.p.clone(), ck.q.clone());
        if self.exact && k == self.digits.len() {
            return Ok(CertReal::exact(mid));
        }
        let prev = &self.convs[k - 1];
        let rad = BigRational::new(BigInt::one(), &ck.q * (&ck.q + &prev.q));
        Ok(CertReal::new(mid, rad))
    }

    /// Certified interval containing alpha, escalating the prefix length until
    /// the radius meets 2^-precision_bits.
    pub fn alpha_value(&self, precision_bits: u32) -> Result<CertReal> {
        if self.digits.len() < 2 {
            return Err(LabError::Truncation {
                needed: 2,
                available: self.digits.len(),
            });
        }
        let mut best: Option<CertReal> = None;
        for k in 2..=self.digits.len() {
            let ball = self.alpha_ball_at(k)?;
            let enough = ball.precision_bits() >= precision_bits;
            best = Some(ball);
            if enough {
                return Ok(best.expect("just set"));
            }
        }
        let last = best.expect("len >= 2");
        Err(LabError::PrecisionExhausted {
            target_bits: precision_bits,
            achieved_bits: last.precision_bits(),
        })
    }

    /// Signed residual q_n*alpha - p_n as a certified ball.
    pub fn residual(&self, n: usize) -> Result<CertReal> {
        let c = self.convergent(n)?;
        let alpha = self.alpha_ball();
        let q = BigRational::from(c.q.clone());
        let p = BigRational::from(c.p.clone());
        let mid = alpha.mid() * &q - p;
        let rad = alpha.rad() * &q;
        Ok(CertReal::new(mid, rad))
    }

    /// d_n = |q_n*alpha - p_n|, the distance of q_n*alpha to the nearest
    /// integer for n >= 1.
    pub fn nearest_int_distance(&self, n: usize) -> Result<CertReal> {
        if n < 1 {
            return Err(LabError::Config {
                detail: "nearest_int_distance needs n >= 1".into(),
            });
        }
        Ok(self.residual(n)?.abs())
    }

    /// ||q_m * alpha|| for any m >= 0 (tent-map image of the fractional part);
    /// equals nearest_int_distance for m >= 1 and handles the m = 0 rounding.
    pub fn nearest_dist_any(&self, m: usize) -> Result<CertReal> {
        let c = self.convergent(m)?;
        let alpha = self.alpha_ball();
        let q = BigRational::from(c.q.clone());
        let x_mid = alpha.mid() * &q;
        let x_rad = alpha.rad() * &q;
        let fl = x_mid.floor();
        let frac = CertReal::new(&x_mid - &fl, x_rad);
        Ok(tent(&frac))
    }

    /// Partial slit base b_K = sum_{k<=K} 2 d_{n_k} with a certified tail
    /// bound, plus the smallness flag b < (1/3)||q_{n_1 - 1} alpha||.
    pub fn slit_base_length(&self, big_k: usize) -> Result<SlitBase> {
        if big_k > self.subseq.len() {
            return Err(LabError::Truncation {
                needed: big_k,
                available: self.subseq.len(),
            });
        }
        let two = BigRational::from(BigInt::from(2));
        let mut partial = CertReal::zero();
        for k in 1..=big_k {
            let d = self.nearest_int_distance(self.subseq[k - 1])?;
            partial = partial.add(&d.scale(&two));
        }
        let mut tail = BigRational::zero();
        for k in (big_k + 1)..=self.subseq.len() {
            let nk = self.subseq[k - 1];
            // d_m < 1/q_{m+1}, and q_{m+1} >= q_m + q_{m-1} when a_{m+1} is
            // not yet known.
            let bound = if nk + 1 <= self.digits.len() {
                BigRational::new(BigInt::one(), self.convs[nk + 1].q.clone())
            } else {
                let qm = &self.convs[nk].q;
                let qm1 = &self.convs[nk - 1].q;
                BigRational::new(BigInt::one(), qm + qm1)
            };
            tail += &two * bound;
        }
        if !self.exact {
            // Everything past the recorded subsequence: sum_{m > n_last} 2 d_m
            // <= 4/q_{n_last} since q at least doubles every second index.
            let n_last = self.subseq.last().copied().unwrap_or(0);
            let q_last = &self.convs[n_last.max(1)].q;
            tail += BigRational::new(BigInt::from(4), q_last.clone());
        }
        let half_tail = &tail / &two;
        let value = CertReal::new(
            partial.mid() + &half_tail,
            partial.rad() + &half_tail,
        );
        let (small, threshold) = if self.subseq.is_empty() {
            (None, None)
        } else {
            let thr = self
                .nearest_dist_any(self.subseq[0] - 1)?
                .scale(&big_rat(1, 3));
            let small = value.lt(&thr);
            (small, Some(thr))
        };
        Ok(SlitBase {
            partial,
            tail_bound: tail,
            value,
            small,
            threshold,
        })
    }

    /// Check the two-sided bounds 1/((a_{n+1}+2) q_n) < d_n < 1/q_{n+1} and
    /// 1/(q_n(q_n+q_{n+1})) < |alpha - p_n/q_n| < 1/(q_n q_{n+1}) for every
    /// n <= n_max, with certified comparisons (undecided is reported, never
    /// passed).
    pub fn verify_dio_lemmas(&self, n_max: usize) -> Result<DioReport> {
        if n_max + 1 > self.digits.len() {
            return Err(LabError::Truncation {
                needed: n_max + 1,
                available: self.digits.len(),
            });
        }
        let mut entries = Vec::with_capacity(2 * n_max);
        for n in 1..=n_max {
            let d = self.nearest_int_distance(n)?;
            let qn = &self.convs[n].q;
            let qn1 = &self.convs[n + 1].q;
            let an1 = &self.digits[n]; // a_{n+1}
            let lower = CertReal::exact(BigRational::new(
                BigInt::one(),
                (an1 + BigInt::from(2)) * qn,
            ));
            let upper = CertReal::exact(BigRational::new(BigInt::one(), qn1.clone()));
            entries.push(DioEntry::from_balls("basic_dio", n, &lower, &d, &upper));

            let gap = d.scale(&BigRational::new(BigInt::one(), qn.clone()));
            let lower = CertReal::exact(BigRational::new(BigInt::one(), qn * (qn + qn1)));
            let upper = CertReal::exact(BigRational::new(BigInt::one(), qn * qn1));
            entries.push(DioEntry::from_balls("eq_k", n, &lower, &gap, &upper));
        }
        let undecided = entries.iter().filter(|e| e.pass.is_none()).count();
        let all_pass = entries.iter().all(|e| e.pass == Some(true));
        Ok(DioReport {
            entries,
            all_pass,
            undecided,
        })
    }

    /// Diagnostic series for conditions (A), (B), (C); finite-prefix trends
    /// only, no asymptotic verdicts.
    pub fn check_conditions(&self, big_k: usize) -> Result<ConditionsReport> {
        if big_k > self.subseq.len() {
            return Err(LabError::Truncation {
                needed: big_k,
                available: self.subseq.len(),
            });
        }
        let mut a_partials = Vec::with_capacity(big_k);
        let mut a_increments = Vec::with_capacity(big_k);
        let mut b_log2 = Vec::with_capacity(big_k);
        let mut c_ratios_ln = Vec::new();
        let mut sum = BigRational::zero();
        for k in 1..=big_k {
            let nk = self.subseq[k - 1];
            let a_next = self.digit(nk + 1)?;
            let inc = BigRational::new(BigInt::one(), a_next.clone());
            a_increments.push(rational_to_f64(&inc));
            sum += inc;
            a_partials.push(sum.clone());
            b_log2.push(big_ln(&self.digits[nk - 1]) / LN_2);
            if k >= 2 {
                let nk_prev = self.subseq[k - 2];
                let ln_ratio =
                    big_ln(&self.convs[nk_prev].q) - big_ln(&self.convs[nk].q);
                let ln_log_digit = big_ln(a_next).max(f64::MIN_POSITIVE).ln();
                c_ratios_ln.push(ln_ratio + ln_log_digit);
            }
        }
        let a_partials_f64: Vec<f64> = a_partials.iter().map(rational_to_f64).collect();
        let c_ratios: Vec<f64> = c_ratios_ln.iter().map(|l| l.exp()).collect();
        let a_diverging_trend = match (a_increments.first(), a_increments.last()) {
            (Some(&f), Some(&l)) if a_increments.len() >= 2 => l >= 0.5 * f,
            _ => false,
        };
        let b_increasing = b_log2.windows(2).all(|w| w[1] >= w[0]);
        let c_decreasing = c_ratios_ln.windows(2).all(|w| w[1] <= w[0]);
        Ok(ConditionsReport {
            a_partials,
            a_partials_f64,
            a_increments,
            b_log2,
            c_ratios,
            c_ratios_ln,
            a_diverging_trend,
            b_increasing,
            c_decreasing,
        })
    }
}

/// Tent-map image min(f, 1-f) of a fractional-part interval.
fn tent(frac: &CertReal) -> CertReal {
    let half = big_rat(1, 2);
    let one = BigRational::one();
    let lo = frac.lower().max(BigRational::zero());
    let hi = frac.upper().min(one.clone());
    if hi <= half {
        return CertReal::new(
            (&lo + &hi) / big_rat(2, 1),
            (&hi - &lo) / big_rat(2, 1),
        );
    }
    if lo >= half {
        let (a, b) = (&one - &hi, &one - &lo);
        return CertReal::new((&a + &b) / big_rat(2, 1), (&b - &a) / big_rat(2, 1));
    }
    let a = (&one - &hi).min(lo.clone()).max(BigRational::zero());
    let b = half;
    CertReal::new((&a + &b) / big_rat(2, 1), (&b - &a) / big_rat(2, 1))
}

/// Partial slit base with certified tail and the smallness flag.
#[derive(Clone, Debug)]
pub struct SlitBase {
    pub partial: CertReal,
    pub tail_bound: BigRational,
    pub value: CertReal,
    /// b < (1/3)||q_{n_1 - 1} alpha||; None when undecided or no subsequence.
    pub small: Option<bool>,
    pub threshold: Option<CertReal>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DioEntry {
    pub n: usize,
    pub check: &'static str,
    pub lower_bound: f64,
    pub value: f64,
    pub upper_bound: f64,
    /// None means undecided at the available precision (never a false pass).
    pub pass: Option<bool>,
}

impl DioEntry {
    fn from_balls(
        check: &'static str,
        n: usize,
        lower: &CertReal,
        value: &CertReal,
        upper: &CertReal,
    ) -> Self {
        let below = lower.lt(value);
        let above = value.lt(upper);
        let pass = match (below, above) {
            (Some(a), Some(b)) => Some(a && b),
            _ => None,
        };
        DioEntry {
            n,
            check,
            lower_bound: lower.to_f64(),
            value: value.to_f64(),
            upper_bound: upper.to_f64(),
            pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DioReport {
    pub entries: Vec<DioEntry>,
    pub all_pass: bool,
    pub undecided: usize,
}

/// Finite-prefix diagnostics for conditions (A), (B), (C).
#[derive(Clone, Debug)]
pub struct ConditionsReport {
    pub a_partials: Vec<BigRational>,
    pub a_partials_f64: Vec<f64>,
    pub a_increments: Vec<f64>,
    pub b_log2: Vec<f64>,
    pub c_ratios: Vec<f64>,
    pub c_ratios_ln: Vec<f64>,
    pub a_diverging_trend: bool,
    pub b_increasing: bool,
    pub c_decreasing: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        big_rat(n, d)
    }

    #[test]
    fn convergents_of_1_2_4() {
        let cf = CFExpansion::from_digits_u64(&[1, 2, 4], true).unwrap();
        let cs = cf.convergents(3).unwrap();
        let got: Vec<(i64, i64)> = cs
            .iter()
            .map(|c| (c.p.to_i64().unwrap(), c.q.to_i64().unwrap()))
            .collect();
        assert_eq!(got, vec![(1, 1), (2, 3), (9, 13)]);
    }

    #[test]
    fn convergent_recursion_1_2_4_8() {
        let cf = CFExpansion::from_digits_u64(&[1, 2, 4, 8], true).unwrap();
        let c4 = cf.convergent(4).unwrap();
        assert_eq!(c4.p, BigInt::from(74));
        assert_eq!(c4.q, BigInt::from(107));
    }

    #[test]
    fn single_digit_cf() {
        let cf = CFExpansion::from_digits_u64(&[1], true).unwrap();
        let cs = cf.convergents(1).unwrap();
        assert_eq!(cs[0].p, BigInt::one());
        assert_eq!(cs[0].q, BigInt::one());
    }

    #[test]
    fn unimodularity_on_families() {
        for cf in [
            CFExpansion::family_cf4(12).unwrap(),
            CFExpansion::family_cf3(4, &Filler::DExp).unwrap(),
            CFExpansion::from_digits_u64(&[1; 20], false).unwrap(),
        ] {
            for n in 1..=cf.len() {
                let c = cf.convergent(n).unwrap();
                let prev = cf.convergent(n - 1).unwrap();
                let det = &c.p * &prev.q - &prev.p * &c.q;
                assert!(det == BigInt::one() || det == -BigInt::one(), "n={n}");
            }
        }
    }

    #[test]
    fn alpha_value_radius_meets_eq_k_tail() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let ball = cf.alpha_value(16).unwrap();
        let q8 = cf.convergent(8).unwrap().q.clone();
        let bound = BigRational::new(BigInt::one(), &q8 * &q8);
        // Full-prefix ball is tighter than 1/q_8^2.
        let full = cf.alpha_ball();
        assert!(*full.rad() < bound);
        assert!(ball.contains(full.mid()) || full.contains(ball.mid()));
    }

    #[test]
    fn alpha_value_rejects_single_digit() {
        let cf = CFExpansion::from_digits_u64(&[1], true).unwrap();
        assert!(matches!(
            cf.alpha_value(8),
            Err(LabError::Truncation { .. })
        ));
    }

    #[test]
    fn alpha_value_escalates_and_exhausts() {
        let cf = CFExpansion::from_digits_u64(&[1, 2], false).unwrap();
        // q_2 = 3: radius 1/(3*(3+1)) = 1/12, about 3.6 bits.
        assert!(cf.alpha_value(3).is_ok());
        assert!(matches!(
            cf.alpha_value(64),
            Err(LabError::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn periodic_sqrt2_ball() {
        let cf = CFExpansion::from_digits_u64(&[2; 40], false).unwrap();
        let ball = cf.alpha_value(60).unwrap();
        // sqrt(2) - 1 is the root of x^2 + 2x - 1: sign change across the ball.
        let sign = |x: &BigRational| -> i32 {
            let v = x * x + rat(2, 1) * x - rat(1, 1);
            if v.is_negative() {
                -1
            } else {
                1
            }
        };
        assert_eq!(sign(&ball.lower()), -1);
        assert_eq!(sign(&ball.upper()), 1);
    }

    #[test]
    fn d1_of_cf4_in_lemma_window() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let d1 = cf.nearest_int_distance(1).unwrap();
        assert!(d1.lt(&CertReal::exact(rat(1, 3))).unwrap());
        assert!(CertReal::exact(rat(1, 4)).lt(&d1).unwrap());
        let v = d1.to_f64();
        assert!((v - 0.3084).abs() < 5e-4, "d1 = {v}");
    }

    #[test]
    fn d3_of_cf4_in_basic_dio_window() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let d3 = cf.nearest_int_distance(3).unwrap();
        assert!(CertReal::exact(rat(1, 130)).lt(&d3).unwrap());
        assert!(d3.lt(&CertReal::exact(rat(1, 107))).unwrap());
    }

    #[test]
    fn distances_strictly_decreasing() {
        let cf = CFExpansion::family_cf4(10).unwrap();
        let mut prev = cf.nearest_int_distance(1).unwrap();
        for n in 2..=9 {
            let d = cf.nearest_int_distance(n).unwrap();
            assert_eq!(d.lt(&prev), Some(true), "n={n}");
            prev = d;
        }
    }

    #[test]
    fn huge_second_digit_shrinks_d1() {
        let cf = CFExpansion::from_digits_u64(&[1, 1_000_000, 2], false).unwrap();
        let d1 = cf.nearest_int_distance(1).unwrap();
        let q2 = cf.convergent(2).unwrap().q.clone();
        let bound = CertReal::exact(BigRational::new(BigInt::one(), q2));
        assert_eq!(d1.lt(&bound), Some(true));
    }

    #[test]
    fn slit_base_empty_sum_is_pure_tail() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let sb = cf.slit_base_length(0).unwrap();
        assert!(sb.partial.mid().is_zero());
        assert!(sb.tail_bound.is_positive());
        assert!(sb.value.upper() >= sb.tail_bound.clone() / rat(2, 1));
    }

    #[test]
    fn slit_base_cf4_is_not_small() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let sb = cf.slit_base_length(4).unwrap();
        let v = sb.value.to_f64();
        assert!((v - 0.785).abs() < 0.01, "b ~ {v}");
        assert_eq!(sb.small, Some(false));
    }

    #[test]
    fn slit_base_fast_family_is_small() {
        let cf = CFExpansion::from_digits_u64(&[2, 100, 100, 1000, 1000], false).unwrap();
        let sb = cf.slit_base_length(3).unwrap();
        assert_eq!(sb.small, Some(true));
    }

    #[test]
    fn slit_base_partials_monotone() {
        let cf = CFExpansion::family_cf4(8).unwrap();
        let mut prev = BigRational::zero();
        for k in 1..=6 {
            let sb = cf.slit_base_length(k).unwrap();
            assert!(sb.partial.mid() > &prev);
            assert!(sb.value.upper() >= sb.partial.upper());
            prev = sb.partial.mid().clone();
        }
    }

    #[test]
    fn dio_lemmas_cf4() {
        let cf = CFExpansion::family_cf4(12).unwrap();
        let report = cf.verify_dio_lemmas(10).unwrap();
        assert_eq!(report.entries.len(), 20);
        assert!(report.all_pass);
        assert_eq!(report.undecided, 0);
    }

    #[test]
    fn dio_lemmas_golden() {
        let cf = CFExpansion::from_digits_u64(&[1; 20], false).unwrap();
        let report = cf.verify_dio_lemmas(15).unwrap();
        assert!(report.all_pass);
        assert_eq!(report.undecided, 0);
    }

    #[test]
    fn dio_lemmas_empty() {
        let cf = CFExpansion::family_cf4(4).unwrap();
        let report = cf.verify_dio_lemmas(0).unwrap();
        assert!(report.entries.is_empty());
        assert!(report.all_pass);
    }

    #[test]
    fn condition_a_cf4_geometric() {
        let cf = CFExpansion::family_cf4(21).unwrap();
        let report = cf.check_conditions(20).unwrap();
        // sum_{k=1..20} 1/a_{k+1} = sum 2^-k = 1 - 2^-20, exactly.
        let expected = rat(1, 1) - BigRational::new(BigInt::one(), BigInt::one() << 20);
        assert_eq!(report.a_partials.last().unwrap(), &expected);
        assert!(!report.a_diverging_trend);
    }

    #[test]
    fn condition_b_cf3_blocks_increasing() {
        let cf = CFExpansion::family_cf3(6, &Filler::Const(2)).unwrap();
        let report = cf.check_conditions(5).unwrap();
        assert!(report.b_increasing);
        // block digits are k^2: log2 of 1, 4, 9, 16, 25.
        assert!((report.b_log2[1] - 2.0).abs() < 1e-12);
        assert!((report.b_log2[2] - 9f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn condition_c_decays_with_dexp_filler() {
        let cf = CFExpansion::family_cf3(5, &Filler::DExp).unwrap();
        let report = cf.check_conditions(4).unwrap();
        assert!(report.c_decreasing);
        assert!(*report.c_ratios_ln.last().unwrap() < -10.0);
    }

    #[test]
    fn condition_a_divergence_trend_for_constant_digits() {
        let cf = CFExpansion::from_digits_u64(&[1; 25], false).unwrap();
        let report = cf.check_conditions(20).unwrap();
        assert!(report.a_diverging_trend);
    }

    #[test]
    fn cf3_family_digit_patterns() {
        let cf = CFExpansion::family_cf3(2, &Filler::Const(2)).unwrap();
        let digits: Vec<u64> = (1..=cf.len())
            .map(|i| cf.digit(i).unwrap().to_u64().unwrap())
            .collect();
        assert_eq!(digits, vec![1, 1, 2, 2, 4, 4, 2, 2]);
        assert_eq!(cf.subsequence(), &[1, 5]);

        let cf1 = CFExpansion::family_cf3(1, &Filler::Const(7)).unwrap();
        let digits: Vec<u64> = (1..=cf1.len())
            .map(|i| cf1.digit(i).unwrap().to_u64().unwrap())
            .collect();
        assert_eq!(digits, vec![1, 1]);
    }

    #[test]
    fn cf3_rejects_zero_filler() {
        assert!(matches!(
            CFExpansion::family_cf3(2, &Filler::Const(0)),
            Err(LabError::InvalidDigit { .. })
        ));
    }

    #[test]
    fn cf4_family_digits() {
        let cf = CFExpansion::family_cf4(4).unwrap();
        let digits: Vec<u64> = (1..=4)
            .map(|i| cf.digit(i).unwrap().to_u64().unwrap())
            .collect();
        assert_eq!(digits, vec![1, 2, 4, 8]);
        let cs = cf.convergents(4).unwrap();
        assert_eq!(cs[3].p, BigInt::from(74));
        assert_eq!(cs[3].q, BigInt::from(107));

        let cf1 = CFExpansion::family_cf4(1).unwrap();
        assert_eq!(cf1.len(), 1);
        assert_eq!(cf1.digit(1).unwrap().to_u64().unwrap(), 1);
    }

    #[test]
    fn cert_real_abs_straddling_zero() {
        let ball = CertReal::new(rat(1, 100), rat(1, 10));
        let a = ball.abs();
        assert!(a.lower() >= BigRational::zero());
        assert!(a.contains(&rat(9, 100)));
        assert!(a.contains(&BigRational::zero()));
    }

    #[test]
    fn cert_real_comparison_is_strict() {
        let a = CertReal::new(rat(1, 2), rat(1, 100));
        let b = CertReal::new(rat(52, 100), rat(1, 100));
        assert_eq!(a.compare(&b), None);
        let c = CertReal::new(rat(3, 4), rat(1, 100));
        assert_eq!(a.compare(&c), Some(Ordering::Less));
    }

    #[test]
    fn big_ln_matches_f64() {
        let x = BigInt::from(1u64 << 60);
        assert!((big_ln(&x) - 60.0 * LN_2).abs() < 1e-12);
        let y = BigInt::one() << 4000;
        assert!((big_ln(&y) - 4000.0 * LN_2).abs() < 1e-6);
    }
}
