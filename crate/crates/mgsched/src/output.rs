//! CSV artifacts. Every table is keyed by the period index `t`, counted
//! from 1.

use std::fs::File;
use std::path::Path;

use mgsched_core::coord::{PeriodSequences, StrategyResult};
use mgsched_core::dr::UserPlan;
use mgsched_core::grid::Schedule;
use mgsched_core::seq::ProbSeq;

use crate::error::RunError;

fn writer(path: &Path) -> Result<csv::Writer<File>, RunError> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn num(x: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{x:?}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Per-period schedule together with the demand, price and reserve
/// requirement it was scored against, so the file can be re-scored alone.
pub fn write_schedule(
    path: &Path,
    s: &Schedule,
    demand: &[f64],
    prices: &[f64],
    reserve_req: &[f64],
) -> Result<(), RunError> {
    let mut w = writer(path)?;
    let mut header = vec![
        "t".to_string(),
        "demand_kw".into(),
        "price_usd_per_kwh".into(),
        "reserve_req_kw".into(),
    ];
    for n in 1..=s.units {
        header.extend([
            format!("mt{n}_on"),
            format!("mt{n}_start"),
            format!("mt{n}_p_kw"),
            format!("mt{n}_r_kw"),
        ]);
    }
    header.extend(
        [
            "p_ch_kw",
            "p_dc_kw",
            "p_res_kw",
            "p_ls_kw",
            "soc_start_kwh",
            "soc_end_kwh",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for t in 0..s.periods {
        let mut row = vec![
            (t + 1).to_string(),
            num(demand[t]),
            num(prices[t]),
            num(reserve_req[t]),
        ];
        for n in 0..s.units {
            let i = t * s.units + n;
            row.extend([
                flag(s.on[i]).to_string(),
                flag(s.start[i]).to_string(),
                num(s.p_mt[i]),
                num(s.r_mt[i]),
            ]);
        }
        row.extend(
            [
                s.p_ch[t],
                s.p_dc[t],
                s.p_res[t],
                s.p_ls[t],
                s.soc[t],
                s.soc[t + 1],
            ]
            .map(num),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a schedule file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleFile {
    pub schedule: Schedule,
    pub demand: Vec<f64>,
    pub prices: Vec<f64>,
    pub reserve_req: Vec<f64>,
}

fn bad(message: String) -> RunError {
    RunError::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        message,
    ))
}

fn field(
    rec: &csv::StringRecord,
    headers: &csv::StringRecord,
    name: &str,
) -> Result<f64, RunError> {
    let col = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| bad(format!("missing column `{name}`")))?;
    let raw = rec.get(col).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| bad(format!("column `{name}`: cannot parse `{raw}`")))
}

pub fn read_schedule(path: &Path) -> Result<ScheduleFile, RunError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let units = headers.iter().filter(|h| h.ends_with("_on")).count();
    let rows: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>()?;
    let periods = rows.len();
    let mut out = ScheduleFile {
        schedule: Schedule::idle(periods, units, 0.0),
        demand: Vec::with_capacity(periods),
        prices: Vec::with_capacity(periods),
        reserve_req: Vec::with_capacity(periods),
    };
    let s = &mut out.schedule;
    for (t, rec) in rows.iter().enumerate() {
        out.demand.push(field(rec, &headers, "demand_kw")?);
        out.prices.push(field(rec, &headers, "price_usd_per_kwh")?);
        out.reserve_req
            .push(field(rec, &headers, "reserve_req_kw")?);
        for n in 0..units {
            let i = t * units + n;
            s.on[i] = field(rec, &headers, &format!("mt{}_on", n + 1))? != 0.0;
            s.start[i] = field(rec, &headers, &format!("mt{}_start", n + 1))? != 0.0;
            s.p_mt[i] = field(rec, &headers, &format!("mt{}_p_kw", n + 1))?;
            s.r_mt[i] = field(rec, &headers, &format!("mt{}_r_kw", n + 1))?;
        }
        s.p_ch[t] = field(rec, &headers, "p_ch_kw")?;
        s.p_dc[t] = field(rec, &headers, "p_dc_kw")?;
        s.p_res[t] = field(rec, &headers, "p_res_kw")?;
        s.p_ls[t] = field(rec, &headers, "p_ls_kw")?;
        s.soc[t] = field(rec, &headers, "soc_start_kwh")?;
        s.soc[t + 1] = field(rec, &headers, "soc_end_kwh")?;
    }
    Ok(out)
}

pub fn write_plan(path: &Path, plan: &UserPlan, el_expected: &[f64]) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record([
        "t",
        "el_expected_kw",
        "price_usd_per_kwh",
        "p_un_kw",
        "p_cn_kw",
        "p_move_kw",
        "served_kw",
    ])?;
    let served = plan.served();
    for t in 0..plan.p_cn.len() {
        let row = [
            el_expected[t],
            plan.prices[t],
            plan.p_un[t],
            plan.p_cn[t],
            plan.p_move[t],
            served[t],
        ]
        .map(num);
        w.write_record(std::iter::once((t + 1).to_string()).chain(row))?;
    }
    w.flush()?;
    Ok(())
}

/// TOU prices, the prices of every pricing iteration and those of the
/// reported scheme.
pub fn write_prices(path: &Path, tou: &[f64], r: &StrategyResult) -> Result<(), RunError> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string(), "tou_usd_per_kwh".into()];
    header.extend(
        r.records
            .iter()
            .map(|rec| format!("iter_{}_usd_per_kwh", rec.iter)),
    );
    header.push("selected_usd_per_kwh".into());
    w.write_record(&header)?;
    for t in 0..tou.len() {
        let mut row = vec![(t + 1).to_string(), num(tou[t])];
        row.extend(r.records.iter().map(|rec| num(rec.prices[t])));
        row.push(num(r.prices[t]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Best fitness per Jaya iteration, for every pricing iteration that ran.
pub fn write_convergence(path: &Path, r: &StrategyResult) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record([
        "pricing_iter",
        "jaya_iter",
        "best_cost_usd",
        "best_violation_kw",
        "feasible_fraction",
    ])?;
    let traces: Vec<(usize, &[_])> = if r.records.is_empty() {
        vec![(1, r.trace.as_slice())]
    } else {
        r.records
            .iter()
            .map(|rec| (rec.iter, rec.trace.as_slice()))
            .collect()
    };
    for (iter, trace) in traces {
        for p in trace {
            w.write_record([
                iter.to_string(),
                p.iteration.to_string(),
                num(p.best.cost),
                num(p.best.violation),
                num(p.feasible_fraction),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_seq_table<'a>(
    path: &Path,
    seqs: impl Iterator<Item = &'a ProbSeq>,
) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["t", "index", "power_kw", "probability"])?;
    for (t, s) in seqs.enumerate() {
        for (i, (power, p)) in s.iter().enumerate() {
            w.write_record([(t + 1).to_string(), i.to_string(), num(power), num(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load, PV, wind and equivalent-load sequences of every period, one file
/// each, plus the per-period expectations and reserve requirements.
pub fn write_sequences(dir: &Path, seqs: &[PeriodSequences]) -> Result<Vec<String>, RunError> {
    std::fs::create_dir_all(dir)?;
    write_seq_table(&dir.join("load.csv"), seqs.iter().map(|s| &s.load))?;
    write_seq_table(&dir.join("pv.csv"), seqs.iter().map(|s| &s.pv))?;
    write_seq_table(&dir.join("wind.csv"), seqs.iter().map(|s| &s.wind))?;
    write_seq_table(&dir.join("el.csv"), seqs.iter().map(|s| &s.el.seq))?;
    let mut w = writer(&dir.join("expectations.csv"))?;
    w.write_record([
        "t",
        "el_expected_kw",
        "el_truncated_expected_kw",
        "reserve_req_kw",
    ])?;
    for (t, s) in seqs.iter().enumerate() {
        w.write_record([
            (t + 1).to_string(),
            num(s.el.expected),
            num(s.el.truncated_expected),
            num(s.reserve_req),
        ])?;
    }
    w.flush()?;
    Ok([
        "load.csv",
        "pv.csv",
        "wind.csv",
        "el.csv",
        "expectations.csv",
    ]
    .map(String::from)
    .to_vec())
}
