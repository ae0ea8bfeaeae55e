//! CSV and JSON emission.
//!
//! CSV columns are fixed per record type (see the `*_header` functions) and
//! floats are written with 17 significant digits so they re-parse to the
//! same `f64`.

use std::io::Write;

use persuasion_core::ActiveSet;
use serde::Serialize;

use crate::experiments::{
    Boundary, BudgetRow, HeterogeneityRow, SimulationRecord, SolveReport,
};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Members as 1-based labels joined by `;` (empty for no members).
pub fn fmt_set(set: ActiveSet) -> String {
    set.labels()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_json<W: Write, T: Serialize>(out: W, value: &T) -> std::io::Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn budget_header(n: usize) -> Vec<String> {
    ["budget", "sender_utility", "receiver_utility", "active_mask", "active_set"]
        .iter()
        .map(ToString::to_string)
        .chain(indexed("s", n))
        .chain(indexed("c", n))
        .collect()
}

pub fn write_budget_rows<W: Write>(out: W, rows: &[BudgetRow]) -> csv::Result<()> {
    let n = rows.first().map_or(0, |r| r.s.len());
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(budget_header(n))?;
    for row in rows {
        let mut record = vec![
            fmt_float(row.budget),
            fmt_float(row.sender_utility),
            fmt_float(row.receiver_utility),
            row.active_set.mask().to_string(),
            fmt_set(row.active_set),
        ];
        record.extend(row.s.iter().chain(&row.c).map(|&x| fmt_float(x)));
        wtr.write_record(record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const BOUNDARY_HEADER: [&str; 5] = ["from_set", "to_set", "lower", "upper", "estimate"];

pub fn write_boundaries<W: Write>(out: W, boundaries: &[Boundary]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(BOUNDARY_HEADER)?;
    for b in boundaries {
        wtr.write_record([
            fmt_set(b.from),
            fmt_set(b.to),
            fmt_float(b.lower),
            fmt_float(b.upper),
            fmt_float(b.estimate),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn heterogeneity_header(n: usize) -> Vec<String> {
    std::iter::once("k".to_string())
        .chain(indexed("mu", n))
        .chain(
            ["sender_utility", "receiver_utility", "active_set"]
                .iter()
                .map(ToString::to_string),
        )
        .collect()
}

pub fn write_heterogeneity_rows<W: Write>(out: W, rows: &[HeterogeneityRow]) -> csv::Result<()> {
    let n = rows.first().map_or(0, |r| r.mu.len());
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(heterogeneity_header(n))?;
    for row in rows {
        let mut record = vec![fmt_float(row.k)];
        record.extend(row.mu.iter().map(|&m| fmt_float(m)));
        record.push(fmt_float(row.sender_utility));
        record.push(fmt_float(row.receiver_utility));
        record.push(fmt_set(row.active_set));
        wtr.write_record(record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const SOLVE_HEADER: [&str; 8] = ["source", "lambda", "mu", "s", "c", "c_min", "response", "active"];

pub fn write_solve_rows<W: Write>(out: W, report: &SolveReport) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SOLVE_HEADER)?;
    for src in &report.sources {
        let response = match src.response {
            persuasion_core::BestResponse::FollowSender => "follow_sender",
            persuasion_core::BestResponse::Default => "default",
        };
        wtr.write_record([
            src.source.to_string(),
            fmt_float(src.lambda),
            fmt_float(src.mu),
            fmt_float(src.s),
            fmt_float(src.c),
            fmt_float(src.c_min),
            response.to_string(),
            report.active_set.contains(src.source - 1).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub const SIMULATION_HEADER: [&str; 18] = [
    "source", "engine", "replication", "s", "c",
    "p00", "p01", "p10", "p11",
    "p00_closed", "p01_closed", "p10_closed", "p11_closed",
    "sender_hat", "sender_closed", "receiver_hat", "receiver_closed", "events",
];

pub fn write_simulation_rows<W: Write>(out: W, records: &[SimulationRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SIMULATION_HEADER)?;
    for r in records {
        let engine = match r.engine {
            persuasion_core::simulate::Engine::Joint => "joint",
            persuasion_core::simulate::Engine::Physical => "physical",
        };
        let mut record = vec![
            r.source.to_string(),
            engine.to_string(),
            r.replication.to_string(),
            fmt_float(r.s),
            fmt_float(r.c),
        ];
        record.extend(r.occupancy.iter().chain(&r.occupancy_closed_form).map(|&x| fmt_float(x)));
        record.extend(
            [
                r.sender_utility_hat,
                r.sender_utility_closed_form,
                r.receiver_utility_hat,
                r.receiver_utility_closed_form,
            ]
            .map(fmt_float),
        );
        record.push(r.events.to_string());
        wtr.write_record(record)?;
    }
    wtr.flush()?;
    Ok(())
}
