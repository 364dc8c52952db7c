//! Subcommand implementations: each takes a merged [`RunConfig`], writes its
//! outputs, and returns the process exit code (0 pass, 2 fail, 3 undecided).
//!
//! Output discipline: the machine-readable JSON document always goes to
//! stdout; CSVs and a copy of the JSON go to the output directory when
//! `--out` is given; human-oriented progress lines go to stderr. Identical
//! configs produce byte-identical outputs.

use std::fmt::Write as _;
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use nue_lab_core::config::{Family, RunConfig};
use nue_lab_core::error::{LabError, Result};
use nue_lab_core::limitscan::{
    classify, dominance_cf4, oscillation_check, scan, Cf4Regime, Pairings, ScanConfig, ScanPoint,
};
use nue_lab_core::numberline::CFExpansion;
use nue_lab_core::slitsurf::{
    intersection_number, sigma_slit_clearance, slit_crossings, slit_sequence, CurveId, SlitRecord,
    SlitValidation, Torus,
};
use nue_lab_core::teichflow::{schedule_cf3, schedule_cf4};
use nue_lab_core::veech::{OrbitEngine, SkewIet};

/// One verification suite outcome; `pass: None` means undecided at the
/// available precision.
struct Check {
    name: &'static str,
    pass: Option<bool>,
    detail: String,
}

impl Check {
    fn to_json(&self) -> Value {
        json!({ "name": self.name, "pass": self.pass, "detail": self.detail })
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    let mut map = serde_json::Map::new();
    for (k, v) in cfg.echo() {
        map.insert(k, Value::String(v));
    }
    Value::Object(map)
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Write a named output file under --out; without --out only stdout speaks.
fn write_out(dir: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    let Some(dir) = dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io {
        detail: format!("cannot create {}: {e}", dir.display()),
    })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| LabError::Io {
        detail: format!("cannot write {}: {e}", path.display()),
    })
}

fn emit_json(cfg: &RunConfig, name: &str, doc: &Value) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(doc).expect("serializable"));
    println!("{}", text.trim_end());
    write_out(&cfg.out, name, &text)
}

/// Exact |q_n alpha_N - p_n| against the full-prefix surrogate.
fn d_surrogate(cf: &CFExpansion, n: usize) -> Result<BigRational> {
    let conv = cf.convergent(n)?;
    let alpha = cf.alpha_exact();
    Ok((alpha * BigRational::from(conv.q.clone()) - BigRational::from(conv.p.clone())).abs())
}

/// Deepest stage <= kmax whose defining digit is recorded (one past the
/// stage index for truncated prefixes).
fn usable_stage(cf: &CFExpansion, k_max: usize) -> Result<usize> {
    let mut ks = k_max.min(cf.subsequence().len());
    while ks > 0 {
        let nk = cf.n_k(ks)?;
        if cf.is_exact() || nk < cf.len() {
            break;
        }
        ks -= 1;
    }
    Ok(ks)
}

fn check_cf_identities(cf: &CFExpansion) -> Result<Check> {
    let n = cf.len();
    let mut ok = true;
    let mut first_bad = String::new();
    for i in 1..=n {
        let prev = cf.convergent(i - 1)?;
        let cur = cf.convergent(i)?;
        let det = &cur.p * &prev.q - &prev.p * &cur.q;
        let expected = if i % 2 == 1 {
            BigInt::one()
        } else {
            -BigInt::one()
        };
        if det != expected {
            ok = false;
            if first_bad.is_empty() {
                first_bad = format!("unimodularity fails at n = {i}");
            }
        }
        if i >= 2 {
            // Recover a_i from both recurrences; they must agree and divide
            // exactly.
            let pp = cf.convergent(i - 2)?;
            let dp = &cur.p - &pp.p;
            let dq = &cur.q - &pp.q;
            let consistent = if prev.p.is_zero() {
                // n = 1 has p_0 = 0; the q side alone pins a_1.
                dp.is_zero() || !prev.q.is_zero()
            } else {
                &dp * &prev.q == &dq * &prev.p
            };
            let positive = if prev.q.is_zero() {
                false
            } else {
                (&dq / &prev.q) >= BigInt::one() && (&dq % &prev.q).is_zero()
            };
            if !consistent || !positive {
                ok = false;
                if first_bad.is_empty() {
                    first_bad = format!("recurrence fails at n = {i}");
                }
            }
        }
    }
    // d_n strictly decreasing against the surrogate. The pair ending at the
    // surrogate's own index can collapse to equality when the final digit is
    // 1 (|q_{N-2} alpha_N - p_{N-2}| = a_N / q_N), so only that comparison
    // is allowed to be non-strict.
    let mut collapsed = false;
    let mut prev_d: Option<BigRational> = None;
    for i in 0..=n {
        let d = d_surrogate(cf, i)?;
        if let Some(p) = &prev_d {
            let terminal = i == n - 1;
            if &d > p || (&d == p && !terminal) {
                ok = false;
                if first_bad.is_empty() {
                    first_bad = format!("d_n not strictly decreasing at n = {i}");
                }
            } else if &d == p {
                collapsed = true;
            }
        }
        prev_d = Some(d);
    }
    let detail = if ok {
        let suffix = if collapsed {
            " (terminal pair collapses at the truncation)"
        } else {
            ""
        };
        format!(
            "unimodularity, digit recurrences, and d_n monotonicity exact for n <= {n}{suffix}"
        )
    } else {
        first_bad
    };
    Ok(Check {
        name: "cf-identities",
        pass: Some(ok),
        detail,
    })
}

fn dio_n_max(cf: &CFExpansion) -> usize {
    if cf.is_exact() {
        cf.len().saturating_sub(1)
    } else {
        // Two digits of slack keep the strict inequalities decidable for
        // every infinite continuation of the prefix.
        cf.len().saturating_sub(3)
    }
}

fn check_dio(cf: &CFExpansion) -> Result<(Check, Value)> {
    let n_max = dio_n_max(cf);
    let report = cf.verify_dio_lemmas(n_max)?;
    let pass = if report.undecided > 0 {
        None
    } else {
        Some(report.all_pass)
    };
    let detail = format!(
        "two-sided bounds for n <= {n_max}: {} entries, {} undecided",
        report.entries.len(),
        report.undecided
    );
    let value = serde_json::to_value(&report).expect("serializable");
    Ok((
        Check {
            name: "dio-sandwich",
            pass,
            detail,
        },
        value,
    ))
}

fn check_conditions(cf: &CFExpansion, k_max: usize) -> Result<(Check, Value)> {
    let mut kc = k_max.min(cf.subsequence().len());
    while kc > 0 && cf.n_k(kc)? + 1 > cf.len() {
        kc -= 1;
    }
    let report = cf.check_conditions(kc)?;
    let trend = if report.a_diverging_trend {
        "condition-A partial sums show a diverging trend"
    } else {
        "condition-A partial sums converging"
    };
    let detail = format!(
        "{trend}; a_(n_k) increasing: {}; growth ratios decreasing: {}",
        report.b_increasing, report.c_decreasing
    );
    let value = json!({
        "a_partials": report.a_partials_f64,
        "a_increments": report.a_increments,
        "b_log2": report.b_log2,
        "c_ratios_ln": report.c_ratios_ln,
        "a_diverging_trend": report.a_diverging_trend,
        "b_increasing": report.b_increasing,
        "c_decreasing": report.c_decreasing,
    });
    Ok((
        Check {
            name: "growth-conditions",
            pass: Some(true),
            detail,
        },
        value,
    ))
}

fn check_slit(
    cf: &CFExpansion,
    ks: usize,
    family_regime: bool,
) -> Result<(Check, Vec<SlitRecord>)> {
    // Family prefixes are inside the construction's regime by design, so a
    // validation error there is a hard failure. Explicit digit lists may
    // leave the regime at some stage; report how far validation reaches.
    let mut ks = ks;
    let mut regime_note = String::new();
    let records = loop {
        if ks == 0 {
            return Ok((
                Check {
                    name: "slit-consistency",
                    pass: Some(true),
                    detail: if regime_note.is_empty() {
                        "no stages in range".into()
                    } else {
                        format!("no stages validate: {regime_note}")
                    },
                },
                Vec::new(),
            ));
        }
        match slit_sequence(cf, ks) {
            Ok(r) => break r,
            Err(LabError::ConstructionInvalid { detail }) if !family_regime => {
                if regime_note.is_empty() {
                    regime_note = format!("stage {ks} outside the return-structure regime ({detail})");
                }
                ks -= 1;
            }
            Err(e) => return Err(e),
        }
    };
    let mut ok = true;
    let mut first_bad = String::new();
    let two = BigRational::from(BigInt::from(2));
    for w in records.windows(2) {
        let nk = cf.n_k(w[0].k)?;
        let step = &w[0].h_rat - &w[1].h_rat;
        if step != &two * d_surrogate(cf, nk)? {
            ok = false;
            if first_bad.is_empty() {
                first_bad = format!("suffix telescoping fails at stage {}", w[0].k);
            }
        }
    }
    for r in &records {
        if r.crossing_count_gamma != slit_crossings(cf, r.k)? {
            ok = false;
            if first_bad.is_empty() {
                first_bad = format!("strand count mismatch at stage {}", r.k);
            }
        }
    }
    let direct = records
        .iter()
        .filter(|r| matches!(r.validation, SlitValidation::DirectSim { .. }))
        .count();
    let mut detail = if ok {
        format!(
            "stages 1..={ks} validated ({direct} by orbit simulation, {} by sandwich); \
             suffix sums telescope exactly",
            records.len() - direct
        )
    } else {
        first_bad
    };
    if !regime_note.is_empty() {
        detail.push_str("; ");
        detail.push_str(&regime_note);
    }
    Ok((
        Check {
            name: "slit-consistency",
            pass: Some(ok),
            detail,
        },
        records,
    ))
}

fn check_intersections(cf: &CFExpansion, records: &[SlitRecord]) -> Result<Check> {
    if records.is_empty() {
        return Ok(Check {
            name: "intersections",
            pass: Some(true),
            detail: "no stages in range".into(),
        });
    }
    let g1 = CurveId::Gamma1;
    let g2 = CurveId::Gamma2;
    let mut ok = true;
    let mut undecided = 0usize;
    let mut notes: Vec<String> = Vec::new();
    let mut first_bad = String::new();
    for r in records {
        let k = r.k;
        let qk = cf.convergent(cf.n_k(k)?)?.q.clone();
        let sm = CurveId::Sigma {
            k,
            torus: Torus::Minus,
        };
        let sp = CurveId::Sigma {
            k,
            torus: Torus::Plus,
        };
        let bm = CurveId::Beta {
            k,
            torus: Torus::Minus,
        };
        let zk = CurveId::Zeta { k };
        let pairs = [
            (intersection_number(&g1, &sm, cf)?, qk.clone(), "gamma1 x sigma"),
            (intersection_number(&g2, &sp, cf)?, qk.clone(), "gamma2 x sigma"),
            (intersection_number(&sm, &bm, cf)?, BigInt::one(), "sigma x beta"),
            (
                intersection_number(&g1, &zk, cf)?,
                r.crossing_count_gamma.clone(),
                "gamma1 x zeta",
            ),
            (
                intersection_number(&g2, &zk, cf)?,
                r.crossing_count_gamma.clone(),
                "gamma2 x zeta",
            ),
        ];
        for (got, want, label) in pairs {
            if got != want {
                ok = false;
                if first_bad.is_empty() {
                    first_bad = format!("{label} mismatch at stage {k}: {got} vs {want}");
                }
            }
        }
        // Disjointness certificate is only claimed inside the smallness
        // regime; outside it the inconclusive bound is reported, not gated.
        match sigma_slit_clearance(cf, k) {
            Ok(_) => {}
            Err(LabError::Undecided { .. }) => {
                if r.smallness == Some(true) {
                    undecided += 1;
                } else {
                    notes.push(format!(
                        "stage {k}: clearance bound inconclusive outside the smallness regime"
                    ));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let pass = if !ok {
        Some(false)
    } else if undecided > 0 {
        None
    } else {
        Some(true)
    };
    let mut detail = if !ok {
        first_bad
    } else if undecided > 0 {
        format!("{undecided} clearance certificates undecided in regime")
    } else {
        format!(
            "crossing numbers match convergent denominators and strand counts \
             for stages 1..={}",
            records.len()
        )
    };
    if !notes.is_empty() {
        detail.push_str("; ");
        detail.push_str(&notes.join("; "));
    }
    Ok(Check {
        name: "intersections",
        pass,
        detail,
    })
}

fn run_verify_suites(cfg: &RunConfig, cf: &CFExpansion) -> Result<(Vec<Check>, Value, Value)> {
    let mut checks = Vec::new();
    checks.push(check_cf_identities(cf)?);
    let (dio_check, dio_json) = check_dio(cf)?;
    checks.push(dio_check);
    let (cond_check, cond_json) = check_conditions(cf, cfg.k_max)?;
    checks.push(cond_check);
    let ks = usable_stage(cf, cfg.k_max)?;
    let (slit_check, records) = check_slit(cf, ks, cfg.family != Family::Explicit)?;
    checks.push(slit_check);
    checks.push(check_intersections(cf, &records)?);
    Ok((checks, dio_json, cond_json))
}

fn exit_from_checks(checks: &[Check]) -> u8 {
    if checks.iter().any(|c| c.pass == Some(false)) {
        2
    } else if checks.iter().any(|c| c.pass.is_none()) {
        3
    } else {
        0
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<u8> {
    let cf = cfg.build_expansion()?;
    let (checks, dio_json, cond_json) = run_verify_suites(cfg, &cf)?;
    for c in &checks {
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "undecided",
        };
        eprintln!("check {}: {status} - {}", c.name, c.detail);
    }
    let doc = json!({
        "command": "verify",
        "config": config_json(cfg),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "dio": dio_json,
        "conditions": cond_json,
    });
    emit_json(cfg, "verify.json", &doc)?;
    Ok(exit_from_checks(&checks))
}

fn scan_config(cfg: &RunConfig) -> ScanConfig {
    ScanConfig {
        c: cfg.c,
        k_min: cfg.k_min,
        k_max: cfg.k_max,
        schedule: cfg.schedule_kind(),
        oversample: cfg.oversample,
        pairings: Pairings::default(),
        eps: cfg.eps,
        tail_fraction: cfg.tail_fraction,
        tol_factor: cfg.tol_factor,
    }
}

fn scan_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("t,k,label,ratio,c_hat,clamped,dominance,regime_valid\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f(p.t),
            p.k,
            p.label.as_str(),
            fmt_f(p.ratio),
            fmt_f(p.c_hat),
            p.c_hat_clamped,
            fmt_f(p.dominance),
            p.regime_valid
        );
    }
    s
}

fn lengths_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from(
        "t,k,curve,log_collar,log_torus_minus,log_torus_plus,log_total,regime_valid\n",
    );
    for p in points {
        for (name, g) in [("gamma1", &p.gamma1), ("gamma2", &p.gamma2)] {
            let _ = writeln!(
                s,
                "{},{},{name},{},{},{},{},{}",
                fmt_f(p.t),
                p.k,
                fmt_f(g.log_collar),
                fmt_f(g.log_torus_minus),
                fmt_f(g.log_torus_plus),
                fmt_f(g.log_total),
                p.regime_valid
            );
        }
    }
    s
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<u8> {
    let cf = cfg.build_expansion()?;
    let sc = scan_config(cfg);
    let points = scan(&cf, &sc)?;
    write_out(&cfg.out, "scan.csv", &scan_csv(&points))?;
    write_out(&cfg.out, "scan_lengths.csv", &lengths_csv(&points))?;
    let flagged = points.iter().filter(|p| !p.regime_valid).count();
    let (verdict_json, exit) = match classify(&points, sc.tail_fraction, sc.eps) {
        Ok(v) => {
            eprintln!(
                "verdict: {} with c in [{}, {}] over t in [{}, {}]",
                serde_json::to_value(v.kind).expect("serializable").as_str().unwrap_or("?"),
                fmt_f(v.c_min),
                fmt_f(v.c_max),
                fmt_f(v.window.0),
                fmt_f(v.window.1)
            );
            (serde_json::to_value(&v).expect("serializable"), 0u8)
        }
        Err(LabError::Undecided { context }) => {
            eprintln!("verdict: undecided - {context}");
            (json!({ "kind": "undecided", "notes": context }), 3u8)
        }
        Err(e) => return Err(e),
    };
    let doc = json!({
        "command": "scan",
        "config": config_json(cfg),
        "points": points.len(),
        "flagged": flagged,
        "verdict": verdict_json,
    });
    emit_json(cfg, "scan_verdict.json", &doc)?;
    Ok(exit)
}

const ORBIT_HEADER: &str = "seed_index,seed,n,x_mid,x_radius,sheet,running_fraction\n";

fn seed_label(seed: &(BigRational, u8)) -> String {
    format!("{}/{}@{}", seed.0.numer(), seed.0.denom(), seed.1)
}

pub fn cmd_orbit(cfg: &RunConfig) -> Result<u8> {
    let cf = cfg.build_orbit_expansion()?;
    let iet = SkewIet::from_family(&cf, cfg.stage, cfg.c)?;
    let mut seeds: Vec<(BigRational, u8)> = Vec::new();
    for s in cfg.seeds.resolve() {
        if seeds.contains(&s) {
            eprintln!("warning: duplicate seed {} ignored", seed_label(&s));
        } else {
            seeds.push(s);
        }
    }
    let base_doc = |note: Option<&str>, per_seed: Vec<Value>| {
        json!({
            "command": "orbit",
            "config": config_json(cfg),
            "stage": cfg.stage,
            "seeds": per_seed,
            "note": note,
        })
    };
    if cfg.n_orbit == 0 {
        write_out(&cfg.out, "orbit.csv", ORBIT_HEADER)?;
        let doc = base_doc(Some("n = 0: nothing to simulate"), Vec::new());
        emit_json(cfg, "orbit_summary.json", &doc)?;
        return Ok(0);
    }
    let engine = match OrbitEngine::new(&iet, &seeds) {
        Ok(e) => e,
        Err(LabError::OutsideModel { detail }) => {
            // The exact engine ran out of integer width; emit what exists
            // and report the run as precision-limited.
            write_out(&cfg.out, "orbit.csv", ORBIT_HEADER)?;
            let doc = base_doc(Some(&detail), Vec::new());
            emit_json(cfg, "orbit_summary.json", &doc)?;
            eprintln!("orbit: inconclusive - {detail}");
            return Ok(3);
        }
        Err(e) => return Err(e),
    };
    let stride = (cfg.n_orbit / 1000).max(1);
    let mut csv = String::from(ORBIT_HEADER);
    let mut per_seed = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        let label = seed_label(seed);
        let rows = engine.trace(i, cfg.n_orbit, stride);
        for r in &rows {
            let _ = writeln!(
                csv,
                "{i},{label},{},{},{},{},{}",
                r.n,
                fmt_f(r.x_mid),
                fmt_f(r.x_radius),
                r.sheet,
                fmt_f(r.running_fraction)
            );
        }
        let last = rows.last();
        per_seed.push(json!({
            "seed": label,
            "rows": rows.len(),
            "final_n": last.map(|r| r.n),
            "final_fraction": last.map(|r| r.running_fraction),
        }));
    }
    write_out(&cfg.out, "orbit.csv", &csv)?;
    let doc = json!({
        "command": "orbit",
        "config": config_json(cfg),
        "stage": cfg.stage,
        "modulus": engine.modulus(),
        "stride": stride,
        "seeds": per_seed,
    });
    emit_json(cfg, "orbit_summary.json", &doc)?;
    Ok(0)
}

pub fn cmd_report(cfg: &RunConfig) -> Result<u8> {
    let cf = cfg.build_expansion()?;
    let (checks, dio_json, cond_json) = run_verify_suites(cfg, &cf)?;
    let verify_exit = exit_from_checks(&checks);

    let sc = scan_config(cfg);
    let points = scan(&cf, &sc)?;
    let (verdict_json, scan_exit) = match classify(&points, sc.tail_fraction, sc.eps) {
        Ok(v) => (serde_json::to_value(&v).expect("serializable"), 0u8),
        Err(LabError::Undecided { context }) => {
            (json!({ "kind": "undecided", "notes": context }), 3u8)
        }
        Err(e) => return Err(e),
    };

    let mut schedule_json = Vec::new();
    let mut dominance_json = Vec::new();
    let mut oscillation_json = Value::Null;
    if cfg.family == Family::Cf4 {
        let k_lo = cfg.k_min.max(2);
        for k in k_lo..=cfg.k_max {
            let s = schedule_cf4(&cf, k)?;
            schedule_json.push(json!({
                "k": k, "s_k": s.s_k.0, "z_k": s.z_k, "t_k": s.t_k.0,
            }));
            for regime in [
                Cf4Regime::AtTk,
                Cf4Regime::IntervalTkSk1,
                Cf4Regime::AtSk,
                Cf4Regime::IntervalSkZk,
                Cf4Regime::IntervalZkTk,
            ] {
                let d = dominance_cf4(&cf, k, regime, &sc)?;
                dominance_json.push(serde_json::to_value(d).expect("serializable"));
            }
        }
        if cfg.k_max >= k_lo {
            let osc = oscillation_check(&cf, k_lo, cfg.k_max)?;
            oscillation_json = serde_json::to_value(&osc).expect("serializable");
        }
    } else if cfg.family == Family::Cf3 {
        for k in cfg.k_min..=cfg.k_max {
            let s = schedule_cf3(&cf, k)?;
            schedule_json.push(json!({ "k": k, "s_k": s.s_k.0, "t_k": s.t_k.0 }));
        }
    }
    let dominance_exit = if dominance_json
        .iter()
        .any(|d| d.get("pass") == Some(&Value::Bool(false)))
    {
        2
    } else {
        0
    };

    let doc = json!({
        "command": "report",
        "config": config_json(cfg),
        "verify": {
            "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "dio": dio_json,
            "conditions": cond_json,
        },
        "scan": {
            "points": points.len(),
            "flagged": points.iter().filter(|p| !p.regime_valid).count(),
            "verdict": verdict_json,
        },
        "schedule": schedule_json,
        "dominance": dominance_json,
        "oscillation": oscillation_json,
    });
    emit_json(cfg, "report.json", &doc)?;
    for c in &checks {
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "undecided",
        };
        eprintln!("check {}: {status} - {}", c.name, c.detail);
    }
    Ok(verify_exit.max(scan_exit).max(dominance_exit))
}
