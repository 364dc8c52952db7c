//! The skew interval exchange T(x, i) = (x + alpha mod 1, i + chi_J(x)) over
//! two unit tori, exact orbit engines, Birkhoff statistics, ergodic-measure
//! estimation, and the conjugating maps f_c.
//!
//! Two evaluation paths coexist. The certified path steps `CertReal` balls
//! and refuses to decide a membership the radius cannot settle. The exact
//! path fixes the stage-K rational surrogate (alpha and b as exact rationals)
//! and runs orbits in u64 residue arithmetic; a post-hoc certificate records
//! up to which step every decision would also be valid for the true alpha,
//! whose distance from the surrogate is a known radius.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numberline::{rational_to_f64, CFExpansion, CertReal, SlitBase};

/// Image order of the six intervals: codomain slot j holds the image of
/// domain interval PERMUTATION[j] (1-based labels, (342615)).
pub const PERMUTATION: [usize; 6] = [3, 4, 2, 6, 1, 5];

/// A point of the doubled circle: position ball in [0,1) plus a sheet label.
#[derive(Clone, Debug)]
pub struct SkewState {
    pub x: CertReal,
    pub sheet: u8,
}

impl SkewState {
    pub fn new(x: CertReal, sheet: u8) -> Result<Self> {
        if sheet > 1 {
            return Err(LabError::Config {
                detail: format!("sheet must be 0 or 1, got {sheet}"),
            });
        }
        if x.lower().is_negative() || x.upper() >= BigRational::one() {
            return Err(LabError::Config {
                detail: "state position must be certified inside [0,1)".into(),
            });
        }
        Ok(SkewState { x, sheet })
    }

    pub fn exact(x: BigRational, sheet: u8) -> Result<Self> {
        Self::new(CertReal::exact(x), sheet)
    }
}

/// The six-interval skew product at slit stage K: alpha from a digit prefix,
/// J = [0, b) with b the stage-K slit base, fixed permutation (342615).
///
/// The interval table (|I_1|, ..., |I_6|) exists only when b < 1 - alpha;
/// the dynamics itself never needs that ordering and keeps working in the
/// degenerate layout.
#[derive(Clone, Debug)]
pub struct SkewIet {
    alpha: CertReal,
    alpha_rat: BigRational,
    slit_base: SlitBase,
    b_rat: BigRational,
    c: f64,
    stage: usize,
}

impl SkewIet {
    /// Build the stage-K exchange from a digit prefix. `c` selects the member
    /// of the deformed family T_c; the simulated dynamics is always T (the
    /// family is conjugate), and c only drives measure bookkeeping.
    pub fn from_family(cf: &CFExpansion, stage: usize, c: f64) -> Result<Self> {
        if stage < 1 {
            return Err(LabError::Config {
                detail: "slit stage must be >= 1".into(),
            });
        }
        if !(-1.0..=1.0).contains(&c) {
            return Err(LabError::Config {
                detail: format!("c must lie in [-1, 1], got {c}"),
            });
        }
        let slit_base = cf.slit_base_length(stage)?;
        let alpha = cf.alpha_ball();
        let alpha_rat = cf.alpha_exact();
        let b_rat = slit_base.partial.mid().clone();
        if !b_rat.is_positive() || b_rat >= BigRational::one() {
            return Err(LabError::ConstructionInvalid {
                detail: format!("slit base b = {} outside (0,1)", rational_to_f64(&b_rat)),
            });
        }
        Ok(SkewIet {
            alpha,
            alpha_rat,
            slit_base,
            b_rat,
            c,
            stage,
        })
    }

    pub fn alpha(&self) -> &CertReal {
        &self.alpha
    }

    pub fn alpha_rational(&self) -> &BigRational {
        &self.alpha_rat
    }

    /// Stage-K slit base as a ball around the true-alpha value.
    pub fn b(&self) -> &CertReal {
        &self.slit_base.partial
    }

    pub fn b_rational(&self) -> &BigRational {
        &self.b_rat
    }

    pub fn slit_base(&self) -> &SlitBase {
        &self.slit_base
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Certified interval lengths (|I_1|, |I_2|, |I_3|, |I_4|, |I_5|, |I_6|)
    /// for the c = 0 layout: (b, 1 - alpha - b, alpha) on each sheet.
    pub fn interval_table(&self) -> Result<[CertReal; 6]> {
        let one = CertReal::exact(BigRational::one());
        let i3 = self.alpha.clone();
        let i1 = self.slit_base.partial.clone();
        let i2 = one.sub(&self.alpha).sub(&i1);
        if i2.lower() <= BigRational::zero() {
            return Err(LabError::DegenerateLayout {
                b: i1.to_f64(),
                one_minus_alpha: 1.0 - self.alpha.to_f64(),
            });
        }
        Ok([
            i1.clone(),
            i2.clone(),
            i3.clone(),
            i1,
            i2,
            i3,
        ])
    }

    /// Deformed lengths |_cI_j| = mu_c(I_j x sheet) from an estimated pair of
    /// ergodic measures. J-balance makes |_cI_1| = |_cI_4| up to the
    /// estimate's confidence radius.
    pub fn deformed_interval_lengths(&self, m: &MeasureEstimate) -> Result<[f64; 6]> {
        if m.degenerate {
            return Err(LabError::DegenerateLayout {
                b: rational_to_f64(&self.b_rat),
                one_minus_alpha: 1.0 - self.alpha.to_f64(),
            });
        }
        let wm = 0.5 * (1.0 - self.c);
        let wp = 0.5 * (1.0 + self.c);
        let mut out = [0.0; 6];
        for sheet in 0..2 {
            for arc in 0..3 {
                let cell = sheet * 3 + arc;
                out[cell] = wm * m.mu_minus[cell] + wp * m.mu_plus[cell];
            }
        }
        Ok(out)
    }

    fn membership(&self, x: &CertReal) -> Result<bool> {
        let b = &self.slit_base.partial;
        if x.upper() < b.lower() {
            return Ok(true);
        }
        if x.lower() >= b.upper() {
            return Ok(false);
        }
        if x.is_exact() && b.is_exact() {
            return Ok(x.mid() < b.mid());
        }
        Err(LabError::Undecided {
            context: format!(
                "membership in J = [0, b): x = {} overlaps b = {}",
                x.to_f64(),
                b.to_f64()
            ),
        })
    }

    fn shift_mod_one(&self, y: &CertReal) -> Result<CertReal> {
        let fl_lo = y.lower().floor();
        let fl_hi = y.upper().floor();
        if fl_lo != fl_hi {
            return Err(LabError::Undecided {
                context: format!("wrap around 1 undecided near y = {}", y.to_f64()),
            });
        }
        Ok(CertReal::new(y.mid() - &fl_lo, y.rad().clone()))
    }

    /// One step of T: flip the sheet iff x in J = [0, b), then rotate by
    /// alpha. Errors with Undecided when the ball straddles b or the wrap.
    pub fn step(&self, s: &SkewState) -> Result<SkewState> {
        let in_j = self.membership(&s.x)?;
        let y = s.x.add(&self.alpha);
        let x = self.shift_mod_one(&y)?;
        SkewState::new(x, s.sheet ^ u8::from(in_j))
    }

    /// Inverse of `step`: rotate back, then flip iff the preimage sits in J.
    pub fn inverse(&self, s: &SkewState) -> Result<SkewState> {
        let y = s.x.sub(&self.alpha);
        let x = self.shift_mod_one(&y)?;
        let in_j = self.membership(&x)?;
        SkewState::new(x, s.sheet ^ u8::from(in_j))
    }

    /// Exact surrogate step (stage-K rationals, no radii).
    pub fn step_exact(&self, x: &BigRational, sheet: u8) -> (BigRational, u8) {
        let in_j = *x < self.b_rat;
        let mut y = x + &self.alpha_rat;
        if y >= BigRational::one() {
            y -= BigRational::one();
        }
        (y, sheet ^ u8::from(in_j))
    }

    /// Exact surrogate inverse step.
    pub fn inverse_exact(&self, x: &BigRational, sheet: u8) -> (BigRational, u8) {
        let mut y = x - &self.alpha_rat;
        if y.is_negative() {
            y += BigRational::one();
        }
        let in_j = y < self.b_rat;
        (y, sheet ^ u8::from(in_j))
    }
}

/// Sheet-paired grid seeds (2i+1)/(2 count) on both sheets. The pairing makes
/// the mean sheet-0 fraction exactly 1/2: the partner orbit visits the same
/// positions with the sheet complemented at every step.
pub fn grid_seeds(count: usize) -> Vec<(BigRational, u8)> {
    let den = BigInt::from(2 * count as u64);
    let mut seeds = Vec::with_capacity(2 * count);
    for i in 0..count {
        let x = BigRational::new(BigInt::from(2 * i as u64 + 1), den.clone());
        seeds.push((x.clone(), 0));
        seeds.push((x, 1));
    }
    seeds
}

/// Running sheet-0 occupation series for one orbit.
#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffSeries {
    pub seed_index: usize,
    /// (n, f(n)) samples; f(n) = #{t < n : sheet_t = 0} / n.
    pub checkpoints: Vec<(u64, f64)>,
    pub final_fraction: f64,
    pub n: u64,
    /// Steps whose decisions are certified for the true alpha as well as the
    /// surrogate; the exact series keeps going past this point.
    pub certified_up_to: u64,
    pub truncated: bool,
    /// Smallest circular distance (fraction of the circle) from a visited
    /// position to a cut point, the raw margin behind the certificate.
    pub min_cut_gap: f64,
    /// Visits to J on sheet 0 and sheet 1; they differ by at most 1 along
    /// any single orbit because every J visit flips the sheet.
    pub j_visits: (u64, u64),
}

/// Full per-seed outcome of an engine run.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub series: BirkhoffSeries,
    /// Visit counts by [sheet][arc], arcs cut at sorted {b, 1 - alpha}.
    pub cells: [[u64; 3]; 2],
    pub batch_fractions: Vec<f64>,
    pub final_state: (u64, u8),
}

/// One CSV-ready orbit sample.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitRow {
    pub n: u64,
    pub x_mid: f64,
    pub x_radius: f64,
    pub sheet: u8,
    pub running_fraction: f64,
}

/// Exact orbit arithmetic: positions are numerators mod a common denominator
/// D of alpha, b, and the seeds, so every step is one u64 add and compare.
#[derive(Clone, Debug)]
pub struct OrbitEngine {
    modulus: u64,
    alpha_num: u64,
    b_num: u64,
    cut1: u64,
    cut2: u64,
    degenerate: bool,
    /// Per-step growth of the true-alpha ball, in numerator units.
    drift_per_step: f64,
    /// Static pad (stage-K b radius and alpha radius), numerator units.
    drift_pad: f64,
    states: Vec<(u64, u8)>,
}

impl OrbitEngine {
    pub fn new(iet: &SkewIet, seeds: &[(BigRational, u8)]) -> Result<Self> {
        if seeds.is_empty() {
            return Err(LabError::Config {
                detail: "orbit engine needs at least one seed".into(),
            });
        }
        let mut modulus = iet.alpha_rational().denom().clone();
        modulus = modulus.lcm(iet.b_rational().denom());
        for (x, sheet) in seeds {
            if *sheet > 1 || x.is_negative() || *x >= BigRational::one() {
                return Err(LabError::Config {
                    detail: "seeds must lie in [0,1) with sheet 0 or 1".into(),
                });
            }
            modulus = modulus.lcm(x.denom());
        }
        if modulus.bits() > 62 {
            return Err(LabError::OutsideModel {
                detail: format!(
                    "common denominator needs {} bits; exact u64 orbit arithmetic tops out at 62",
                    modulus.bits()
                ),
            });
        }
        let d_big = modulus.clone();
        let d = modulus.to_u64().expect("checked bits");
        let to_num = |r: &BigRational| -> u64 {
            let scaled = r * BigRational::from(d_big.clone());
            debug_assert!(scaled.is_integer());
            scaled.to_integer().to_u64().expect("fits by construction")
        };
        let alpha_num = to_num(iet.alpha_rational());
        let b_num = to_num(iet.b_rational());
        let wrap_cut = d - alpha_num;
        let d_f = d as f64;
        let drift_per_step = rational_to_f64(iet.alpha().rad()) * d_f;
        let drift_pad =
            rational_to_f64(iet.b().rad()).max(rational_to_f64(iet.alpha().rad())) * d_f;
        Ok(OrbitEngine {
            modulus: d,
            alpha_num,
            b_num,
            cut1: b_num.min(wrap_cut),
            cut2: b_num.max(wrap_cut),
            degenerate: b_num > wrap_cut,
            drift_per_step,
            drift_pad,
            states: seeds.iter().map(|(x, s)| (to_num(x), *s)).collect(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn degenerate_layout(&self) -> bool {
        self.degenerate
    }

    pub fn seed_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> (u64, u8) {
        self.states[i]
    }

    fn circular_gap(&self, pos: u64, cut: u64) -> u64 {
        let diff = pos.abs_diff(cut);
        diff.min(self.modulus - diff)
    }

    fn run_one(
        &self,
        seed_index: usize,
        start: (u64, u8),
        n: u64,
        checkpoint_every: u64,
        batches: u64,
    ) -> SeedRun {
        let (mut pos, mut sheet) = start;
        let mut sheet0 = 0u64;
        let mut cells = [[0u64; 3]; 2];
        let mut j_visits = (0u64, 0u64);
        let mut checkpoints = Vec::new();
        let mut certified_up_to = n;
        let mut min_gap = u64::MAX;
        let batch_len = (n / batches.max(1)).max(1);
        let mut batch_fractions = Vec::new();
        let mut batch_sheet0 = 0u64;
        let mut batch_count = 0u64;
        for t in 0..n {
            if sheet == 0 {
                sheet0 += 1;
                batch_sheet0 += 1;
            }
            batch_count += 1;
            let arc = if pos < self.cut1 {
                0
            } else if pos < self.cut2 {
                1
            } else {
                2
            };
            cells[sheet as usize][arc] += 1;
            if checkpoint_every != 0 && (t + 1) % checkpoint_every == 0 {
                checkpoints.push((t + 1, sheet0 as f64 / (t + 1) as f64));
            }
            if batch_count == batch_len {
                batch_fractions.push(batch_sheet0 as f64 / batch_count as f64);
                batch_sheet0 = 0;
                batch_count = 0;
            }
            let gap = self
                .circular_gap(pos, self.b_num)
                .min(self.circular_gap(pos, 0))
                .min(self.circular_gap(pos, self.modulus - self.alpha_num));
            if t > 0 {
                min_gap = min_gap.min(gap);
            }
            if certified_up_to == n
                && t > 0
                && (gap as f64) < self.drift_per_step * t as f64 + self.drift_pad
            {
                certified_up_to = t;
            }
            let in_j = pos < self.b_num;
            if in_j {
                if sheet == 0 {
                    j_visits.0 += 1;
                } else {
                    j_visits.1 += 1;
                }
                sheet ^= 1;
            }
            pos += self.alpha_num;
            if pos >= self.modulus {
                pos -= self.modulus;
            }
        }
        let final_fraction = if n == 0 { 0.0 } else { sheet0 as f64 / n as f64 };
        SeedRun {
            series: BirkhoffSeries {
                seed_index,
                checkpoints,
                final_fraction,
                n,
                certified_up_to,
                truncated: certified_up_to < n,
                min_cut_gap: if min_gap == u64::MAX {
                    1.0
                } else {
                    min_gap as f64 / self.modulus as f64
                },
                j_visits,
            },
            cells,
            batch_fractions,
            final_state: (pos, sheet),
        }
    }

    /// Run every seed for n steps (in parallel, deterministically) and leave
    /// the engine at the final states.
    pub fn run(&mut self, n: u64, checkpoint_every: u64, batches: u64) -> Vec<SeedRun> {
        let starts: Vec<(usize, (u64, u8))> =
            self.states.iter().copied().enumerate().collect();
        let runs: Vec<SeedRun> = starts
            .par_iter()
            .map(|&(i, start)| self.run_one(i, start, n, checkpoint_every, batches))
            .collect();
        for (i, r) in runs.iter().enumerate() {
            self.states[i] = r.final_state;
        }
        runs
    }

    /// First t in 1..=limit with position in [0, b); None if the orbit stays
    /// out for the whole window.
    pub fn first_reentry(&self, seed_index: usize, limit: u64) -> Option<u64> {
        let (mut pos, _) = self.states[seed_index];
        for t in 1..=limit {
            pos += self.alpha_num;
            if pos >= self.modulus {
                pos -= self.modulus;
            }
            if pos < self.b_num {
                return Some(t);
            }
        }
        None
    }

    /// CSV-ready trace of one seed: every `stride`-th step.
    pub fn trace(&self, seed_index: usize, n: u64, stride: u64) -> Vec<OrbitRow> {
        let (mut pos, mut sheet) = self.states[seed_index];
        let mut sheet0 = 0u64;
        let mut rows = Vec::new();
        let d = self.modulus as f64;
        for t in 0..n {
            if sheet == 0 {
                sheet0 += 1;
            }
            if stride != 0 && t % stride == 0 {
                rows.push(OrbitRow {
                    n: t,
                    x_mid: pos as f64 / d,
                    x_radius: self.drift_per_step * t as f64 / d,
                    sheet,
                    running_fraction: sheet0 as f64 / (t + 1) as f64,
                });
            }
            if pos < self.b_num {
                sheet ^= 1;
            }
            pos += self.alpha_num;
            if pos >= self.modulus {
                pos -= self.modulus;
            }
        }
        rows
    }
}

/// Running sheet-0 fraction of one orbit, exact in the stage-K surrogate,
/// with the true-alpha certificate recorded alongside.
pub fn birkhoff_torus_fraction(
    iet: &SkewIet,
    x0: &SkewState,
    n: u64,
    checkpoint_every: u64,
) -> Result<BirkhoffSeries> {
    if n < 1 {
        return Err(LabError::Config {
            detail: "birkhoff series needs n >= 1".into(),
        });
    }
    if x0.x.is_exact() {
        let seeds = vec![(x0.x.mid().clone(), x0.sheet)];
        if let Ok(mut engine) = OrbitEngine::new(iet, &seeds) {
            let mut runs = engine.run(n, checkpoint_every, 16);
            return Ok(runs.remove(0).series);
        }
    }
    // Certified fallback: step balls until a decision fails, then truncate.
    let mut s = x0.clone();
    let mut sheet0 = 0u64;
    let mut j_visits = (0u64, 0u64);
    let mut checkpoints = Vec::new();
    let mut steps_done = 0u64;
    for t in 0..n {
        if s.sheet == 0 {
            sheet0 += 1;
        }
        if s.x.upper() < iet.b().lower() {
            if s.sheet == 0 {
                j_visits.0 += 1;
            } else {
                j_visits.1 += 1;
            }
        }
        if checkpoint_every != 0 && (t + 1) % checkpoint_every == 0 {
            checkpoints.push((t + 1, sheet0 as f64 / (t + 1) as f64));
        }
        steps_done = t + 1;
        if t + 1 < n {
            match iet.step(&s) {
                Ok(next) => s = next,
                Err(LabError::Undecided { .. }) => break,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(BirkhoffSeries {
        seed_index: 0,
        checkpoints,
        final_fraction: sheet0 as f64 / steps_done as f64,
        n: steps_done,
        certified_up_to: steps_done,
        truncated: steps_done < n,
        min_cut_gap: 0.0,
        j_visits,
    })
}

/// Empirical pair of ergodic measures, as visit masses of the six cells
/// (arc x sheet, arcs cut at sorted {b, 1 - alpha}), total mass 2 each.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureEstimate {
    /// Sorted interior cut points of the base circle, as fractions.
    pub cut_points: [f64; 2],
    /// Arc lengths [0,c1), [c1,c2), [c2,1).
    pub arcs: [f64; 3],
    /// True when b > 1 - alpha, so arc 0 is [0, 1-alpha) instead of J.
    pub degenerate: bool,
    /// Cell masses, index = sheet*3 + arc; sums to 2.
    pub mu_minus: [f64; 6],
    pub mu_plus: [f64; 6],
    pub sample_count: u64,
    pub confidence_radius: f64,
    pub cluster_gap: f64,
    /// Max cell deviation of (mu_- + mu_+)/2 from the Lebesgue masses.
    pub lambda_residual: f64,
    pub seed_fractions: Vec<f64>,
    pub cluster_of_seed: Vec<u8>,
}

impl MeasureEstimate {
    pub fn sheet_mass(masses: &[f64; 6], sheet: u8) -> f64 {
        let base = sheet as usize * 3;
        masses[base] + masses[base + 1] + masses[base + 2]
    }

    /// Probability view: masses scaled from total 2 to total 1.
    pub fn normalized(masses: &[f64; 6]) -> [f64; 6] {
        let mut out = *masses;
        for v in &mut out {
            *v *= 0.5;
        }
        out
    }
}

/// Cluster long-orbit occupation statistics into the two ergodic candidates.
///
/// Seeds are clustered on final sheet-0 fraction at the largest gap; the
/// cluster richer in sheet 0 becomes mu_-. Errors when the gap is below the
/// separation threshold.
pub fn estimate_ergodic_measures(
    iet: &SkewIet,
    seeds: &[(BigRational, u8)],
    n: u64,
) -> Result<MeasureEstimate> {
    const SEPARATION: f64 = 0.05;
    if seeds.len() < 2 {
        return Err(LabError::Config {
            detail: "need at least two seeds to estimate two measures".into(),
        });
    }
    let mut engine = OrbitEngine::new(iet, seeds)?;
    let runs = engine.run(n, 0, 16);

    let fractions: Vec<f64> = runs.iter().map(|r| r.series.final_fraction).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| fractions[a].total_cmp(&fractions[b]));
    let mut split = 0usize;
    let mut gap = -1.0f64;
    for w in 0..order.len() - 1 {
        let g = fractions[order[w + 1]] - fractions[order[w]];
        if g > gap {
            gap = g;
            split = w;
        }
    }
    if gap <= SEPARATION {
        return Err(LabError::InconclusiveClusters {
            gap,
            threshold: SEPARATION,
        });
    }
    // Low fractions spend little time on sheet 0: that cluster is mu_+.
    let plus_members: Vec<usize> = order[..=split].to_vec();
    let minus_members: Vec<usize> = order[split + 1..].to_vec();

    let average_cells = |members: &[usize]| -> [f64; 6] {
        let mut out = [0.0; 6];
        for &i in members {
            for sheet in 0..2 {
                for arc in 0..3 {
                    out[sheet * 3 + arc] +=
                        2.0 * runs[i].cells[sheet][arc] as f64 / n as f64;
                }
            }
        }
        for v in &mut out {
            *v /= members.len() as f64;
        }
        out
    };
    let mu_minus = average_cells(&minus_members);
    let mu_plus = average_cells(&plus_members);

    let batch_radius = |members: &[usize]| -> f64 {
        let mut acc = 0.0;
        for &i in members {
            let bf = &runs[i].batch_fractions;
            let m = bf.iter().sum::<f64>() / bf.len() as f64;
            let var = bf.iter().map(|f| (f - m) * (f - m)).sum::<f64>()
                / (bf.len().saturating_sub(1).max(1)) as f64;
            acc += 2.0 * (var / bf.len() as f64).sqrt();
        }
        acc / members.len() as f64 / (members.len() as f64).sqrt()
    };
    let confidence_radius = batch_radius(&minus_members).max(batch_radius(&plus_members));

    let d = engine.modulus() as f64;
    let cut_points = [engine.cut1 as f64 / d, engine.cut2 as f64 / d];
    let arcs = [
        cut_points[0],
        cut_points[1] - cut_points[0],
        1.0 - cut_points[1],
    ];
    let mut lambda_residual = 0.0f64;
    for sheet in 0..2 {
        for arc in 0..3 {
            let cell = sheet * 3 + arc;
            let avg = 0.5 * (mu_minus[cell] + mu_plus[cell]);
            lambda_residual = lambda_residual.max((avg - arcs[arc]).abs());
        }
    }

    let mut cluster_of_seed = vec![0u8; fractions.len()];
    for &i in &plus_members {
        cluster_of_seed[i] = 1;
    }
    Ok(MeasureEstimate {
        cut_points,
        arcs,
        degenerate: engine.degenerate_layout(),
        mu_minus,
        mu_plus,
        sample_count: n,
        confidence_radius,
        cluster_gap: gap,
        lambda_residual,
        seed_fractions: fractions,
        cluster_of_seed,
    })
}

/// f_c(x) = mu_c([0, x] x {sheet 0}) with mu_c = (1-c)/2 mu_- + (1+c)/2 mu_+,
/// piecewise linear across the three arcs. Monotone, f_c(0) = 0, and f_c(1)
/// is the sheet-0 mass of mu_c.
pub fn conjugate_to_c(x: &CertReal, c: f64, m: &MeasureEstimate) -> Result<CertReal> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(LabError::Config {
            detail: format!("c must lie in [-1, 1], got {c}"),
        });
    }
    let xv = x.to_f64();
    if !(0.0..=1.0).contains(&xv) {
        return Err(LabError::Config {
            detail: format!("conjugacy argument must lie in [0, 1], got {xv}"),
        });
    }
    let wm = 0.5 * (1.0 - c);
    let wp = 0.5 * (1.0 + c);
    let cuts = [0.0, m.cut_points[0], m.cut_points[1], 1.0];
    let mut acc = 0.0f64;
    let mut max_density = 0.0f64;
    for arc in 0..3 {
        let mass = wm * m.mu_minus[arc] + wp * m.mu_plus[arc];
        let len = cuts[arc + 1] - cuts[arc];
        if len <= 0.0 {
            continue;
        }
        let density = mass / len;
        max_density = max_density.max(density);
        if xv >= cuts[arc + 1] {
            acc += mass;
        } else if xv > cuts[arc] {
            acc += density * (xv - cuts[arc]);
            break;
        } else {
            break;
        }
    }
    let mid = BigRational::from_float(acc).unwrap_or_else(BigRational::zero);
    let rad_in = x.rad_f64() * max_density + m.confidence_radius;
    let rad = BigRational::from_float(rad_in.max(0.0)).unwrap_or_else(BigRational::zero);
    Ok(CertReal::new(mid, rad))
}
