use std::io::Write;

use aloha_core::analytic::{
    bbmd, collision_prob, collision_prob_asymptotic, critical_node_count, peak_throughput, right_branch_root,
    saturation, saturation_finite, sbmd, solve_operating_point, throughput_at,
};
use aloha_core::delay::mean_delay;
use aloha_core::sim::{replicate, run, Mode, SimConfig, SimStats};
use aloha_core::starvation::{
    analytic_verdict, divergence_score, length_biased_mean, running_mean_trace, DivergenceThresholds, WindowCounts,
};
use aloha_core::{Error, Nodes, SystemParams};

use crate::spec::{CommandKind, Report, RunSpec, SimMode, SimSystem};
use crate::table::{Cell, Table};
use crate::CliError;

/// Runs the command and writes its table (and any raw trace).
pub fn execute(spec: &RunSpec, stdout: &mut dyn Write) -> Result<(), CliError> {
    let table = match spec.command {
        CommandKind::Limits => limits(spec)?,
        CommandKind::SweepR => sweep_r(spec)?,
        CommandKind::Curve => curve(spec)?,
        CommandKind::DelayCurve => delay_curve(spec)?,
        CommandKind::Simulate => simulate(spec)?,
        CommandKind::Starvation => starvation(spec)?,
        CommandKind::Jump => jump(spec)?,
    };
    table.emit(spec, stdout)
}

fn nodes_cell(n: Nodes) -> Cell {
    Cell::text(n.to_string())
}

fn finite_n(spec: &RunSpec) -> u32 {
    spec.params.n.finite().expect("validated as finite")
}

fn limits(spec: &RunSpec) -> Result<Table, CliError> {
    let p = &spec.params;
    let l = sbmd(p)?;
    let mut t = Table::new(&[
        "r0", "r", "n", "s_sat", "g_sat", "p_c_sat", "s_bbmd", "g_bbmd", "s_sbmd", "binding", "critical_n",
    ]);
    t.push(vec![
        Cell::Num(p.r0),
        Cell::Num(p.r),
        nodes_cell(p.n),
        Cell::Num(l.s_sat),
        Cell::Num(l.g_sat),
        Cell::Num(l.p_c_sat),
        Cell::Num(l.s_bbmd),
        Cell::Num(l.g_bbmd),
        Cell::Num(l.s_sbmd),
        Cell::text(l.binding.as_str()),
        Cell::opt(critical_node_count(p.r, p.r0).ok()),
    ]);
    Ok(t)
}

fn sweep_r(spec: &RunSpec) -> Result<Table, CliError> {
    let mut t = Table::new(&["r", "s_sat", "s_bbmd", "s_sbmd", "g_sat", "g_bbmd", "binding"]);
    for r in spec.sweep.expect("sweep-r has a grid").points() {
        let l = sbmd(&SystemParams::new(spec.params.r0, r, spec.params.n)?)?;
        t.push(vec![
            Cell::Num(r),
            Cell::Num(l.s_sat),
            Cell::Num(l.s_bbmd),
            Cell::Num(l.s_sbmd),
            Cell::Num(l.g_sat),
            Cell::Num(l.g_bbmd),
            Cell::text(l.binding.as_str()),
        ]);
    }
    Ok(t)
}

fn curve(spec: &RunSpec) -> Result<Table, CliError> {
    let p = &spec.params;
    let p_c_at = |g: f64| -> Result<f64, Error> {
        match p.n {
            Nodes::Finite(n) => collision_prob(g / f64::from(n), n),
            Nodes::Infinite => collision_prob_asymptotic(g),
        }
    };
    let mut t = Table::new(&["g", "s", "p_c", "point"]);
    let push = |t: &mut Table, g: f64, s: f64, label: &str| -> Result<(), CliError> {
        t.push(vec![Cell::Num(g), Cell::Num(s), Cell::Num(p_c_at(g)?), Cell::text(label)]);
        Ok(())
    };
    for g in spec.sweep.expect("curve has a grid").points() {
        push(&mut t, g, throughput_at(g, p.n)?, "curve")?;
    }
    let sat = saturation(p)?;
    push(&mut t, sat.g, sat.s, "saturation")?;
    let b = bbmd(p.r, p.n)?;
    push(&mut t, b.g, b.s, "bbmd")?;
    if let Some(s_o) = p.s_offered {
        let left = solve_operating_point(s_o, p.n)?;
        push(&mut t, left.g, left.s, "operating-left")?;
        let right = right_branch_root(s_o, p.n)?;
        push(&mut t, right.g, right.s, "operating-right")?;
    }
    Ok(t)
}

fn sim_config(spec: &RunSpec, params: SystemParams, mode: Mode, p_c: Option<f64>) -> SimConfig {
    let o = &spec.sim;
    let mut cfg = match (o.system, p_c) {
        (SimSystem::Proxy, Some(p_c)) => SimConfig::proxy(params, p_c, mode, o.slots, o.seed),
        _ => SimConfig::real(params, mode, o.slots, o.seed),
    };
    if let Some(w) = o.warmup {
        cfg = cfg.with_warmup(w);
    }
    if let Some(w) = o.window {
        cfg = cfg.with_window(w);
    }
    cfg
}

/// Proxy collision probability: the flag, else the analytic value for the mode.
fn proxy_pc(spec: &RunSpec, params: &SystemParams, mode: Mode) -> Result<Option<f64>, CliError> {
    if spec.sim.system == SimSystem::Real {
        return Ok(None);
    }
    if let Some(pc) = spec.sim.pc {
        return Ok(Some(pc));
    }
    Ok(Some(match (mode, params.s_offered) {
        (Mode::OpenLoad, Some(s_o)) => solve_operating_point(s_o, params.n)?.p_c,
        _ => saturation(params)?.p_c,
    }))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

fn delay_curve(spec: &RunSpec) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "s_o", "p_c", "analytic_mean_delay", "sim_mean_delay", "sim_sd", "sim_cv", "reps",
    ]);
    let peak = peak_throughput(spec.params.n);
    for s_o in spec.sweep.expect("delay-curve has a grid").points() {
        if s_o >= peak {
            return Err(Error::InfeasibleLoad { offered: s_o, peak }.into());
        }
        let params = spec.params.with_offered_load(s_o)?;
        let analytic = mean_delay(&params)?;
        let pc = proxy_pc(spec, &params, Mode::OpenLoad)?;
        let reps = replicate(&sim_config(spec, params, Mode::OpenLoad, pc), spec.sim.reps)?;
        let means: Vec<f64> = reps.iter().map(|s| s.mean_delay().unwrap_or(f64::NAN)).collect();
        let (m, sd) = mean_sd(&means);
        t.push(vec![
            Cell::Num(s_o),
            Cell::Num(analytic.p_c),
            Cell::Num(analytic.mean_delay.finite().unwrap_or(f64::INFINITY)),
            Cell::Num(m),
            Cell::Num(sd),
            Cell::Num(sd / m),
            Cell::Int(spec.sim.reps as u64),
        ]);
    }
    Ok(t)
}

fn simulate(spec: &RunSpec) -> Result<Table, CliError> {
    let params = spec.params;
    let mode = match spec.sim.mode {
        Some(SimMode::Open) => Mode::OpenLoad,
        Some(SimMode::Saturated) => Mode::Saturated,
        None if params.s_offered.is_some() => Mode::OpenLoad,
        None => Mode::Saturated,
    };
    if mode == Mode::OpenLoad {
        let s_o = params.s_offered.expect("open mode has a load");
        let peak = peak_throughput(params.n);
        if s_o >= peak {
            return Err(Error::InfeasibleLoad { offered: s_o, peak }.into());
        }
    }
    let pc = proxy_pc(spec, &params, mode)?;
    let mut cfg = sim_config(spec, params, mode, pc);
    if spec.sim.trace.is_some() {
        cfg = cfg.with_trace();
    }
    let reps = replicate(&cfg, spec.sim.reps)?;
    if let Some(path) = &spec.sim.trace {
        write_trace(path, &reps[0])?;
    }
    let mut t = Table::new(&[
        "replication",
        "slots_measured",
        "measured_g",
        "measured_s",
        "measured_pc",
        "arrivals",
        "departures",
        "backlog_start",
        "backlog_end",
        "mean_service",
        "length_biased_service",
        "mean_delay",
        "empty_fraction",
    ]);
    for (i, st) in reps.iter().enumerate() {
        let services: Vec<u64> = st.all_service_samples().collect();
        t.push(vec![
            Cell::Int(i as u64),
            Cell::Int(st.slots_measured),
            Cell::Num(st.measured_g),
            Cell::Num(st.measured_s),
            Cell::Num(st.measured_pc),
            Cell::Int(st.total_arrivals),
            Cell::Int(st.total_departures),
            Cell::Int(st.backlog_start),
            Cell::Int(st.backlog_end),
            Cell::opt(st.mean_service()),
            Cell::opt(length_biased_mean(&services).ok()),
            Cell::opt(st.mean_delay()),
            Cell::opt(if mode == Mode::OpenLoad { st.empty_fraction() } else { None }),
        ]);
    }
    Ok(t)
}

fn write_trace(path: &std::path::Path, st: &SimStats) -> Result<(), CliError> {
    let mut t = Table::new(&["node_id", "arrival_time", "departure_time", "service_slots", "final_stage"]);
    for d in &st.trace {
        t.push(vec![
            Cell::Int(d.node_id as u64),
            Cell::Num(d.arrival_time),
            Cell::Num(d.departure_time),
            Cell::Int(d.service_slots),
            Cell::Int(u64::from(d.final_stage)),
        ]);
    }
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::invalid(format!("cannot write --trace {}: {e}", path.display())))?;
    t.write_csv(std::io::BufWriter::new(file))
}

fn starvation(spec: &RunSpec) -> Result<Table, CliError> {
    let params = spec.params;
    let pc = proxy_pc(spec, &params, Mode::Saturated)?;
    let mut cfg = sim_config(spec, params, Mode::Saturated, pc);
    if spec.report != Report::Windows {
        // Running means need node 0's first n_p packets; stop as soon as they are in.
        cfg = cfg.with_stop(0, spec.sim.np as u64);
    }
    let reps = replicate(&cfg, spec.sim.reps)?;
    let traces = reps
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let s = &st.service_samples[0];
            running_mean_trace(&s[..s.len().min(spec.sim.np)], j as u64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    match spec.report {
        Report::Scores => {
            let finals: Vec<f64> = traces.iter().map(|t| t.final_mean()).collect();
            let score = divergence_score(&finals, DivergenceThresholds::default())?;
            let analytic_pc = saturation_finite(params.r, params.r0, finite_n(spec))?.p_c;
            let verdict = analytic_verdict(analytic_pc, params.r, params.r0)?.with_empirical(score);
            let mut t = Table::new(&[
                "replication",
                "samples",
                "final_mean",
                "length_biased_mean",
                "spread",
                "flag",
                "analytic_non_starved",
                "analytic_e_y",
                "critical_n",
            ]);
            for (st, tr) in reps.iter().zip(&traces) {
                let s = &st.service_samples[0][..tr.values.len()];
                t.push(vec![
                    Cell::Int(tr.replication_id),
                    Cell::Int(tr.values.len() as u64),
                    Cell::Num(tr.final_mean()),
                    Cell::opt(length_biased_mean(s).ok()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            t.push(vec![
                Cell::text("all"),
                Cell::Int(traces.iter().map(|t| t.values.len() as u64).sum()),
                Cell::Num(finals.iter().sum::<f64>() / finals.len() as f64),
                Cell::Empty,
                Cell::Num(score.spread),
                Cell::text(score.flag.as_str()),
                Cell::text(verdict.analytic_non_starved.to_string()),
                Cell::Num(verdict.e_y.finite().unwrap_or(f64::INFINITY)),
                Cell::opt(verdict.critical_n),
            ]);
            Ok(t)
        }
        Report::RunningMean => {
            let mut t = Table::new(&["replication", "n_p", "running_mean"]);
            for tr in &traces {
                let last = tr.values.len() - 1;
                for (i, v) in tr.values.iter().enumerate() {
                    if (i + 1) % spec.sim.stride == 0 || i == last {
                        t.push(vec![Cell::Int(tr.replication_id), Cell::Int(i as u64 + 1), Cell::Num(*v)]);
                    }
                }
            }
            Ok(t)
        }
        Report::Windows => {
            let mut t = Table::new(&["replication", "node", "window", "departures", "max_zero_streak"]);
            for (j, st) in reps.iter().enumerate() {
                let w = WindowCounts::from_stats(st)?;
                for (node, counts) in w.counts.iter().enumerate() {
                    for (k, c) in counts.iter().enumerate() {
                        t.push(vec![
                            Cell::Int(j as u64),
                            Cell::Int(node as u64),
                            Cell::Int(k as u64),
                            Cell::Int(u64::from(*c)),
                            Cell::Int(w.max_zero_streak[node]),
                        ]);
                    }
                }
            }
            Ok(t)
        }
    }
}

fn jump(spec: &RunSpec) -> Result<Table, CliError> {
    let n = finite_n(spec);
    let mut t = Table::new(&["r", "phase", "s_offered", "analytic_g", "analytic_s", "measured_g", "measured_s"]);
    for r in spec.sweep.expect("jump has a grid").points() {
        let params = SystemParams::new(spec.params.r0, r, Nodes::Finite(n))?;
        let sat = saturation_finite(r, params.r0, n)?;
        let st = run(&sim_config(spec, params, Mode::Saturated, None))?;
        t.push(vec![
            Cell::Num(r),
            Cell::text("saturated"),
            Cell::Empty,
            Cell::Num(sat.g),
            Cell::Num(sat.s),
            Cell::Num(st.measured_g),
            Cell::Num(st.measured_s),
        ]);
        let s_o = 0.9 * sat.s;
        let left = solve_operating_point(s_o, params.n)?;
        let st = run(&sim_config(spec, params.with_offered_load(s_o)?, Mode::OpenLoad, None))?;
        t.push(vec![
            Cell::Num(r),
            Cell::text("open"),
            Cell::Num(s_o),
            Cell::Num(left.g),
            Cell::Num(left.s),
            Cell::Num(st.measured_g),
            Cell::Num(st.measured_s),
        ]);
    }
    Ok(t)
}
