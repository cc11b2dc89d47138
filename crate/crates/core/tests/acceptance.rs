//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use aloha_core::analytic::*;
use aloha_core::delay::*;
use aloha_core::sim::{replicate, run, Mode, SimConfig, SimStats};
use aloha_core::starvation::*;
use aloha_core::{Nodes, SystemParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn near(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn finite(n: u32) -> Nodes {
    Nodes::Finite(n)
}

fn mean_cv(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    (m, var.sqrt() / m)
}

fn asymptotic_closed_forms() -> Outcome {
    let t = Instant::now();
    let values = [
        ("S_s(2)", saturation_asymptotic(2.0).unwrap().s, 0.3466),
        ("S_s(e/(e-1))", saturation_asymptotic(1.0 / (1.0 - (-1f64).exp())).unwrap().s, 0.3679),
        ("S_BBMD(2)", bbmd_asymptotic(2.0).unwrap().s, 0.2158),
        ("S_BBMD(1.582)", bbmd_asymptotic(1.582).unwrap().s, 0.3063),
        ("S_SBMD(1.3757)", sbmd(&SystemParams::new(10.0, 1.3757, Nodes::Infinite).unwrap()).unwrap().s_sbmd, 0.3545),
    ];
    let elapsed = t.elapsed();
    let ok = values.iter().all(|&(_, got, want)| near(got, want, 5e-4)) && elapsed < Duration::from_millis(1);
    let list: Vec<String> = values.iter().map(|(name, got, _)| format!("{name}={got:.5}")).collect();
    check(ok, format!("{} in {elapsed:?}", list.join(" ")))
}

fn optimal_backoff() -> Outcome {
    let t = Instant::now();
    let r = optimal_backoff_asymptotic();
    let elapsed = t.elapsed();
    check(near(r, 1.3757, 1e-3) && elapsed < Duration::from_millis(10), format!("r*={r:.6} in {elapsed:?}"))
}

/// BBMD throughput by scanning G on a 1e-6 grid for the first point where
/// the collision probability reaches 1/r².
fn scanned_bbmd(r: f64, n: u32) -> f64 {
    let target = 1.0 / (r * r);
    let n = f64::from(n);
    let mut k = 0u64;
    loop {
        let g = k as f64 * 1e-6;
        if 1.0 - (1.0 - g / n).powf(n - 1.0) >= target {
            return g * (1.0 - g / n).powf(n - 1.0);
        }
        k += 1;
    }
}

fn finite_n_solver() -> Outcome {
    let s1 = saturation_finite(1.582, 10.0, 30).unwrap().s;
    let s2 = saturation_finite(1.2, 10.0, 30).unwrap().s;
    let b1 = bbmd_finite(2.0, 30).unwrap().s;
    let b2 = bbmd_finite(1.582, 30).unwrap().s;
    let b3 = bbmd_finite(1.2, 30).unwrap().s;
    let oracle = scanned_bbmd(1.2, 30);
    let ok = near(s1, 0.3675, 1e-3)
        && near(s2, 0.3561, 1e-3)
        && near(b1, 0.2221, 1e-3)
        && near(b2, 0.3140, 1e-3)
        && near(b3, 0.3671, 1e-3)
        && near(b3, oracle, 1e-5);
    check(
        ok,
        format!("S_s={s1:.5},{s2:.5} S_BBMD={b1:.5},{b2:.5} S_BBMD(1.2,30)={b3:.5} scan={oracle:.5}"),
    )
}

fn critical_count() -> Outcome {
    // 40-digit evaluations of the closed form, rounded to f64.
    const HP_1_2: f64 = 22.138080578194988;
    const HP_1_582: f64 = 9.067666356869304;
    let a = critical_node_count(1.2, 10.0).unwrap();
    let b = critical_node_count(1.582, 10.0).unwrap();
    let ok = a > 15.0 && a < 30.0 && near(a, HP_1_2, 1e-9) && near(b, HP_1_582, 1e-9) && b < 15.0;
    check(ok, format!("N_s*(1.2)={a:.9} N_s*(1.582)={b:.9}"))
}

fn saturated_throughput() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &r in &[1.582, 1.2] {
        let want = saturation_finite(r, 10.0, 30).unwrap().s;
        let p = SystemParams::new(10.0, r, finite(30)).unwrap();
        for seed in 1..=3 {
            let st = run(&SimConfig::real(p, Mode::Saturated, 5_000_000, seed)).unwrap();
            let e = rel(st.measured_s, want);
            ok &= e <= 0.02;
            parts.push(format!("r={r} seed={seed} S={:.4} ({:+.2}%)", st.measured_s, 100.0 * (st.measured_s / want - 1.0)));
        }
    }
    check(ok, parts.join("; "))
}

fn quantum_jump() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &r in &[1.04, 1.08, 1.12, 1.16, 1.20] {
        let p = SystemParams::new(10.0, r, finite(20)).unwrap();
        let s_o = 0.9 * saturation_finite(r, 10.0, 20).unwrap().s;
        let left = solve_operating_point(s_o, finite(20)).unwrap().g;
        let sat = run(&SimConfig::real(p, Mode::Saturated, 5_000_000, 6)).unwrap();
        let open = run(&SimConfig::real(p.with_offered_load(s_o).unwrap(), Mode::OpenLoad, 5_000_000, 6)).unwrap();
        let e = rel(open.measured_g, left);
        ok &= e <= 0.05 && open.measured_g < sat.measured_g;
        parts.push(format!(
            "r={r} G_open={:.4} G_left={left:.4} ({:+.2}%) G_sat={:.4}",
            open.measured_g,
            100.0 * (open.measured_g / left - 1.0),
            sat.measured_g
        ));
    }
    check(ok, parts.join("; "))
}

fn delay_runs(s_o: f64) -> Vec<SimStats> {
    let p = SystemParams::new(10.0, 1.582, finite(30)).unwrap().with_offered_load(s_o).unwrap();
    replicate(&SimConfig::real(p, Mode::OpenLoad, 5_000_000, 7), 5).unwrap()
}

fn delay_curve() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let cv_at = |s_o: f64, ok: &mut bool, parts: &mut Vec<String>, compare: bool| {
        let reps = delay_runs(s_o);
        let means: Vec<f64> = reps.iter().map(|s| s.mean_delay().unwrap()).collect();
        let (m, cv) = mean_cv(&means);
        if compare {
            let p = SystemParams::new(10.0, 1.582, finite(30)).unwrap().with_offered_load(s_o).unwrap();
            let want = mean_delay(&p).unwrap().mean_delay.finite().unwrap();
            *ok &= rel(m, want) <= 0.05;
            parts.push(format!("S_o={s_o} E[D]={m:.3} vs {want:.3} ({:+.2}%)", 100.0 * (m / want - 1.0)));
        }
        cv
    };
    let mut cv15 = 0.0;
    for &s_o in &[0.05, 0.10, 0.15, 0.20] {
        let cv = cv_at(s_o, &mut ok, &mut parts, true);
        if s_o == 0.15 {
            cv15 = cv;
        }
    }
    let cv30 = cv_at(0.30, &mut ok, &mut parts, false);
    ok &= cv30 > cv15;
    parts.push(format!("cv(0.15)={cv15:.4} cv(0.30)={cv30:.4}"));
    check(ok, parts.join("; "))
}

fn boundary_divergence() -> Outcome {
    let base = SystemParams::new(10.0, 2.0, finite(30)).unwrap();
    let s_bbmd = bbmd_finite(2.0, 30).unwrap().s;
    let at = mean_delay(&base.with_offered_load(0.2221).unwrap()).unwrap();
    let mut ok = at.mean_delay == Bounded::Unbounded && !at.service_var_bounded;
    // Unbounded exactly from S_BBMD upward.
    for k in -20..=20 {
        let s_o = s_bbmd + k as f64 * 1e-5;
        let d = mean_delay(&base.with_offered_load(s_o).unwrap()).unwrap();
        ok &= (d.mean_delay == Bounded::Unbounded) == (s_o >= s_bbmd);
    }
    check(ok, format!("S_BBMD={s_bbmd:.6} at 0.2221: {:?}, var bounded={}", at.mean_delay, at.service_var_bounded))
}

fn starvation_score(r: f64, seed: u64) -> DivergenceScore {
    const N_P: u64 = 100_000;
    let p = SystemParams::new(10.0, r, finite(15)).unwrap();
    let cfg = SimConfig::real(p, Mode::Saturated, u64::MAX / 2, seed).with_warmup(100_000).with_stop(0, N_P);
    let finals: Vec<f64> = replicate(&cfg, 5)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(j, st)| running_mean_trace(&st.service_samples[0][..N_P as usize], j as u64).unwrap().final_mean())
        .collect();
    divergence_score(&finals, DivergenceThresholds::default()).unwrap()
}

fn starvation_diagnostics() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for &(r, want) in &[(1.582, StarvationFlag::Starved), (1.2, StarvationFlag::NonStarved)] {
        // One re-seed is allowed.
        let first = starvation_score(r, 9);
        let score = if first.flag == want { first } else { starvation_score(r, 10) };
        ok &= score.flag == want;
        let retry = if first.flag == want { String::new() } else { format!(" after retry, first cv={:.4}", first.spread) };
        parts.push(format!("r={r}: cv={:.4} {}{retry}", score.spread, score.flag.as_str()));
    }
    check(ok, parts.join("; "))
}

fn starvation_windows() -> Outcome {
    let p = SystemParams::new(10.0, 1.2, finite(30)).unwrap();
    let cfg = SimConfig::real(p, Mode::Saturated, 20_000_000, 0).with_window(7500);
    let mut means = Vec::new();
    let mut streaky = 0;
    let mut parts = Vec::new();
    for (seed, st) in (1..=3).map(|s| (s, run(&cfg.clone().with_replication(s)).unwrap())) {
        let w = WindowCounts::from_stats(&st).unwrap();
        means.push(w.grand_mean());
        if w.longest_streak() >= 100_000 {
            streaky += 1;
        }
        parts.push(format!("seed={seed} mean={:.2} longest zero streak={}", w.grand_mean(), w.longest_streak()));
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let ok = near(grand, 100.0, 10.0) && streaky >= 2;
    parts.push(format!("grand mean={grand:.2} (expected 7500*S_s/N={:.2})", 7500.0 * saturation_finite(1.2, 10.0, 30).unwrap().s / 30.0));
    check(ok, parts.join("; "))
}

fn oracle_equivalences() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for &r0 in &[5.0, 10.0, 20.0] {
        for &r in &[1.2, 1.3757, 2.0] {
            for i in 0..10 {
                let p_c = i as f64 / 10.0;
                if p_c * r * r >= 1.0 {
                    continue;
                }
                let m = service_moments(p_c, r0, r).unwrap();
                let (mean, fact2) = series_moments(p_c, r0, r);
                worst = worst
                    .max(rel(m.mean.finite().unwrap(), mean))
                    .max(rel(m.second_factorial.finite().unwrap(), fact2));
                let ctx = TransformContext::new(p_c, r0, r).unwrap();
                let lambda = 0.5 * (1.0 - p_c * r) / r0;
                worst_norm = worst_norm
                    .max((service_pgf(1.0, &ctx).unwrap().value - 1.0).abs())
                    .max((delay_transform(0.0, lambda, &ctx).unwrap() - 1.0).abs())
                    .max((delay_transform(1e-12, lambda, &ctx).unwrap() - 1.0).abs());
            }
        }
    }
    check(worst <= 1e-6 && worst_norm <= 1e-8, format!("max moment rel err={worst:.2e} max |X(1)-1|,|D*(0)-1|={worst_norm:.2e}"))
}

/// E[X] and X''(1) summed term by term over the collision count k: a sum of
/// k + 1 geometric gaps with means r0 r^j has mean Σm and E[S(S-1)] = Σ(m² - m) + (Σm)² - Σm.
fn series_moments(p_c: f64, r0: f64, r: f64) -> (f64, f64) {
    let (mut mean, mut fact2, mut gaps, mut vars) = (0.0, 0.0, 0.0, 0.0);
    let (mut w, mut m) = (1.0 - p_c, r0);
    for _ in 0..20_000 {
        gaps += m;
        vars += m * m - m;
        mean += w * gaps;
        fact2 += w * (vars + gaps * gaps - gaps);
        w *= p_c;
        m *= r;
        if w == 0.0 || w * m * m * 1e16 < fact2 {
            break;
        }
    }
    (mean, fact2)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("asymptotic closed forms", asymptotic_closed_forms),
        ("optimal backoff factor", optimal_backoff),
        ("finite-N solver", finite_n_solver),
        ("critical node count", critical_count),
        ("saturated simulation vs analysis", saturated_throughput),
        ("quantum jump", quantum_jump),
        ("delay curve", delay_curve),
        ("boundary divergence", boundary_divergence),
        ("starvation diagnostics", starvation_diagnostics),
        ("starvation windows", starvation_windows),
        ("oracle equivalences", oracle_equivalences),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name} [{:.1?}]: {}", i + 1, t.elapsed(), o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
