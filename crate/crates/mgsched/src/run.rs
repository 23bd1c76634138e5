//! Strategy execution, multi-seed runs and parameter sweeps, and the
//! artifacts they leave in the output directory.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use mgsched_core::coord::{
    profile_spread, run_bilevel, run_mg_only, run_user_only, Prepared, Scenario, Strategy,
    StrategyResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::RunError;
use crate::exec::RayonExecutor;
use crate::output;
use crate::scenario::{Overrides, ScenarioFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One(Strategy),
    All,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mg_only" => Ok(Mode::One(Strategy::MgOnly)),
            "bilevel" => Ok(Mode::One(Strategy::Bilevel)),
            "user_only" => Ok(Mode::One(Strategy::UserOnly)),
            "all" => Ok(Mode::All),
            other => Err(format!(
                "unknown strategy `{other}` (expected mg_only, bilevel, user_only or all)"
            )),
        }
    }
}

/// A strategy result with its wall-clock time.
#[derive(Debug, Clone)]
pub struct Timed {
    pub result: StrategyResult,
    pub seconds: f64,
}

/// Runs the requested strategies. Bilevel needs both single-level anchors,
/// so it runs the other two first.
pub fn execute(prep: &Prepared, mode: Mode) -> Result<Vec<Timed>, RunError> {
    let exec = RayonExecutor;
    let timed =
        |f: &dyn Fn() -> Result<StrategyResult, mgsched_core::Error>| -> Result<Timed, RunError> {
            let start = Instant::now();
            let result = f()?;
            Ok(Timed {
                result,
                seconds: start.elapsed().as_secs_f64(),
            })
        };
    let start = Instant::now();
    match mode {
        Mode::One(Strategy::MgOnly) => Ok(vec![timed(&|| run_mg_only(prep, &exec))?]),
        Mode::One(Strategy::UserOnly) => Ok(vec![timed(&|| run_user_only(prep, &exec))?]),
        Mode::One(Strategy::Bilevel) => {
            let f1_io = run_mg_only(prep, &exec)?.f1;
            let f2_io = prep.user_plan(&prep.scenario.tou)?.f2;
            let result = run_bilevel(prep, f1_io, f2_io, &exec)?;
            Ok(vec![Timed {
                result,
                seconds: start.elapsed().as_secs_f64(),
            }])
        }
        Mode::All => {
            let mut mg = timed(&|| run_mg_only(prep, &exec))?;
            let mut user = timed(&|| run_user_only(prep, &exec))?;
            let (f1_io, f2_io) = (mg.result.f1, user.result.f2);
            for t in [&mut mg, &mut user] {
                t.result.f1_io = f1_io;
                t.result.f2_io = f2_io;
            }
            let bi = timed(&|| run_bilevel(prep, f1_io, f2_io, &exec))?;
            Ok(vec![mg, bi, user])
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationSummary {
    pub iter: usize,
    pub f1_usd: f64,
    pub f2_usd: f64,
    pub distance_usd: Option<f64>,
    pub reserve_shortfall_kw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategySummary {
    pub mode: String,
    /// Microgrid objective; negative values are net revenue.
    pub f1_usd: f64,
    pub f2_usd: f64,
    pub mg_net_revenue_usd: f64,
    pub user_cost_usd: f64,
    pub f1_io_usd: Option<f64>,
    pub f2_io_usd: Option<f64>,
    pub selected_iteration: Option<usize>,
    pub shed_energy_kwh: f64,
    pub reserve_shortfall_kw: f64,
    pub min_reserve_margin_kw: f64,
    pub el_std_before_kw: f64,
    pub el_std_after_kw: f64,
    pub price_min_usd_per_kwh: f64,
    pub price_max_usd_per_kwh: f64,
    pub iterations: Vec<IterationSummary>,
}

impl StrategySummary {
    pub fn new(r: &StrategyResult, prep: &Prepared) -> Self {
        let s = &r.schedule;
        let min_margin = (0..s.periods)
            .map(|p| s.total_mt_reserve(p) + s.p_res[p] - prep.reserve_req[p])
            .fold(f64::INFINITY, f64::min);
        let iterations = r
            .records
            .iter()
            .map(|rec| IterationSummary {
                iter: rec.iter,
                f1_usd: rec.f1_jo,
                f2_usd: rec.f2_jo,
                distance_usd: finite(rec.distance(r.f1_io, r.f2_io)),
                reserve_shortfall_kw: rec.reserve_shortfall,
            })
            .collect();
        StrategySummary {
            mode: r.mode.name().to_string(),
            f1_usd: r.f1,
            f2_usd: r.f2,
            mg_net_revenue_usd: -r.f1,
            user_cost_usd: r.f2,
            f1_io_usd: finite(r.f1_io),
            f2_io_usd: finite(r.f2_io),
            selected_iteration: r.chosen.map(|i| r.records[i].iter),
            shed_energy_kwh: s.shed_energy(),
            reserve_shortfall_kw: r.reserve_shortfall,
            min_reserve_margin_kw: min_margin,
            el_std_before_kw: profile_spread(&prep.el_expected),
            el_std_after_kw: profile_spread(&r.plan.served()),
            price_min_usd_per_kwh: r.prices.iter().copied().fold(f64::INFINITY, f64::min),
            price_max_usd_per_kwh: r.prices.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub gamma: f64,
    pub shiftable_ratio: f64,
    pub q_kw: f64,
    pub strategies: Vec<StrategySummary>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per strategy. Kept out of `summary.json` so that
    /// file depends on the inputs only; written to `timing.json` instead.
    #[serde(skip)]
    pub timing: Vec<StrategyTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyTiming {
    pub mode: String,
    pub wall_seconds: f64,
}

/// Writes the artifacts of one strategy into `dir`; returns their paths
/// relative to `root`.
fn write_strategy(
    root: &Path,
    dir: &Path,
    prep: &Prepared,
    r: &StrategyResult,
) -> Result<Vec<String>, RunError> {
    fs::create_dir_all(dir)?;
    let rel = |name: &str| {
        dir.join(name)
            .strip_prefix(root)
            .map(|p| p.display().to_string())
            .unwrap_or_else(|_| name.to_string())
    };
    let mut written = Vec::new();
    output::write_plan(&dir.join("plan.csv"), &r.plan, &prep.el_expected)?;
    written.push(rel("plan.csv"));
    if r.mode == Strategy::UserOnly {
        return Ok(written);
    }
    let demand = r.plan.served();
    output::write_schedule(
        &dir.join("schedule.csv"),
        &r.schedule,
        &demand,
        &r.prices,
        &prep.reserve_req,
    )?;
    output::write_prices(&dir.join("prices.csv"), &prep.scenario.tou, r)?;
    output::write_convergence(&dir.join("convergence.csv"), r)?;
    written.extend(["schedule.csv", "prices.csv", "convergence.csv"].map(&rel));
    Ok(written)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs one scenario with one seed and writes everything to `out`.
pub fn run_single(
    file: &ScenarioFile,
    scenario: Scenario,
    mode: Mode,
    dump_seqs: bool,
    out: &Path,
) -> Result<RunSummary, RunError> {
    let prep = Prepared::new(scenario)?;
    let results = execute(&prep, mode)?;
    fs::create_dir_all(out)?;
    let mut artifacts = Vec::new();
    if dump_seqs {
        let names = output::write_sequences(&out.join("sequences"), &prep.sequences)?;
        artifacts.extend(names.into_iter().map(|n| format!("sequences/{n}")));
    }
    for t in &results {
        let dir = match mode {
            Mode::All => out.join(t.result.mode.name()),
            Mode::One(_) => out.to_path_buf(),
        };
        artifacts.extend(write_strategy(out, &dir, &prep, &t.result)?);
    }
    artifacts.extend(["summary.json", "timing.json"].map(String::from));
    let timing: Vec<StrategyTiming> = results
        .iter()
        .map(|t| StrategyTiming {
            mode: t.result.mode.name().to_string(),
            wall_seconds: t.seconds,
        })
        .collect();
    write_json(&out.join("timing.json"), &timing)?;
    let s = &prep.scenario;
    let summary = RunSummary {
        scenario: file.name.clone(),
        seed: s.jaya.seed,
        gamma: s.gamma,
        shiftable_ratio: s.dr.ratio,
        q_kw: s.step,
        strategies: results
            .iter()
            .map(|t| StrategySummary::new(&t.result, &prep))
            .collect(),
        artifacts,
        timing,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Consecutive seeds starting at `first`.
pub fn seed_list(first: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| first + k).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiSeedSummary {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub medians: Vec<MedianRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MedianRow {
    pub mode: String,
    pub f1_usd: f64,
    pub f2_usd: f64,
    pub shed_energy_kwh: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn medians(runs: &[RunSummary]) -> Vec<MedianRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .strategies
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let col = |f: &dyn Fn(&StrategySummary) -> f64| {
                median(&runs.iter().map(|r| f(&r.strategies[k])).collect::<Vec<_>>())
            };
            MedianRow {
                mode: s.mode.clone(),
                f1_usd: col(&|s| s.f1_usd),
                f2_usd: col(&|s| s.f2_usd),
                shed_energy_kwh: col(&|s| s.shed_energy_kwh),
            }
        })
        .collect()
}

/// One run per seed, each in its own `seed_<n>` directory, with medians in
/// the top-level summary.
pub fn run_seeds(
    file: &ScenarioFile,
    overrides: &Overrides,
    seeds: &[u64],
    mode: Mode,
    dump_seqs: bool,
    out: &Path,
) -> Result<MultiSeedSummary, RunError> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let mut f = file.clone();
            f.apply(&Overrides {
                seed: Some(seed),
                ..*overrides
            });
            let scenario = f.build(None)?;
            run_single(
                &f,
                scenario,
                mode,
                dump_seqs,
                &out.join(format!("seed_{seed}")),
            )
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let summary = MultiSeedSummary {
        scenario: file.name.clone(),
        seeds: seeds.to_vec(),
        medians: medians(&runs),
        runs,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Ratio,
    Step,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Ratio => "ratio",
            SweepParam::Step => "q",
        }
    }

    fn overrides(&self, base: &Overrides, value: f64) -> Overrides {
        match self {
            SweepParam::Gamma => Overrides {
                gamma: Some(value),
                ..*base
            },
            SweepParam::Ratio => Overrides {
                ratio: Some(value),
                ..*base
            },
            SweepParam::Step => Overrides {
                q_kw: Some(value),
                ..*base
            },
        }
    }
}

/// `name=start:stop:step`, inclusive of both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, range) = s
            .split_once('=')
            .ok_or("sweep must look like name=start:stop:step")?;
        let param = match name.trim() {
            "gamma" => SweepParam::Gamma,
            "ratio" => SweepParam::Ratio,
            "q" | "step" => SweepParam::Step,
            other => {
                return Err(format!(
                    "cannot sweep `{other}` (expected gamma, ratio or q)"
                ))
            }
        };
        let parts: Vec<f64> = range
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number `{p}` in sweep"))
            })
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err("sweep range must be start:stop:step".into());
        };
        if !(step > 0.0) || !(stop >= start) {
            return Err("sweep needs a positive step and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round away the accumulation noise of start + k * step
        let values = (0..count)
            .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
            .collect();
        Ok(SweepSpec { param, values })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seeds: Vec<u64>,
    pub medians: Vec<MedianRow>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

fn point_runs(
    file: &ScenarioFile,
    o: &Overrides,
    seeds: &[u64],
    mode: Mode,
) -> Result<Vec<RunSummary>, RunError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut f = file.clone();
            f.apply(&Overrides {
                seed: Some(seed),
                ..*o
            });
            let scenario = f.build(None)?;
            let prep = Prepared::new(scenario)?;
            let results = execute(&prep, mode)?;
            let s = &prep.scenario;
            Ok(RunSummary {
                scenario: f.name.clone(),
                seed,
                gamma: s.gamma,
                shiftable_ratio: s.dr.ratio,
                q_kw: s.step,
                strategies: results
                    .iter()
                    .map(|t| StrategySummary::new(&t.result, &prep))
                    .collect(),
                artifacts: Vec::new(),
                timing: Vec::new(),
            })
        })
        .collect()
}

/// Runs every sweep point for every seed; writes `sweep.csv` with one row
/// per point and `summary.json` with every run.
pub fn run_sweep(
    file: &ScenarioFile,
    overrides: &Overrides,
    spec: &SweepSpec,
    seeds: &[u64],
    mode: Mode,
    out: &Path,
) -> Result<SweepSummary, RunError> {
    let points = spec
        .values
        .par_iter()
        .map(|&value| {
            let runs = point_runs(file, &spec.param.overrides(overrides, value), seeds, mode)?;
            Ok(SweepPoint {
                value,
                seeds: seeds.to_vec(),
                medians: medians(&runs),
                runs,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec!["param".to_string(), "value".into(), "seeds".into()];
    if let Some(p) = points.first() {
        for m in &p.medians {
            header.extend([
                format!("{}_f1_median_usd", m.mode),
                format!("{}_f2_median_usd", m.mode),
                format!("{}_shed_median_kwh", m.mode),
            ]);
        }
    }
    w.write_record(&header)?;
    for p in &points {
        let mut row = vec![
            spec.param.name().to_string(),
            format!("{:?}", p.value),
            seeds.len().to_string(),
        ];
        for m in &p.medians {
            row.extend([m.f1_usd, m.f2_usd, m.shed_energy_kwh].map(|x| format!("{x:?}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let summary = SweepSummary {
        scenario: file.name.clone(),
        param: spec.param,
        points,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Thread pool of the requested size; `None` uses one thread per core.
pub fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(RunError::Usage("--jobs must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| RunError::Usage(e.to_string()))
}
