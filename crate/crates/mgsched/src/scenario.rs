//! Scenario files: a JSON document with units spelled out in the field
//! names, validated field by field before the engine sees it.

use std::fmt;
use std::path::Path;

use mgsched_core::coord::{PeriodUncertainty, Scenario};
use mgsched_core::dr::DrConfig;
use mgsched_core::grid::{EssConfig, MtUnit};
use mgsched_core::jaya::JayaParams;
use mgsched_core::lp::IpmConfig;
use mgsched_core::models::{LoadModel, PvModel, WtModel};
use serde::{Deserialize, Serialize};

/// The bundled study built from the published test-system constants.
pub const PAPER_BASE: &str = include_str!("../scenarios/paper_base.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub periods: usize,
    /// Discretization step of the probabilistic sequences.
    pub q_kw: f64,
    /// Confidence level of the spinning-reserve constraint.
    pub gamma: f64,
    pub shed_penalty_usd_per_kwh: f64,
    pub load: LoadSection,
    pub pv: PvSection,
    pub wind: WindSection,
    pub microturbines: Vec<MtSection>,
    pub ess: EssSection,
    pub demand_response: DrSection,
    pub pricing: PricingSection,
    pub jaya: JayaSection,
    pub ipm: IpmSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    /// Upper truncation of the load distribution.
    pub p_max_kw: f64,
    /// Standard deviation as a fraction of the mean, used where
    /// `sigma_kw` is absent.
    pub fluctuation: f64,
    pub mu_kw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_kw: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSection {
    pub eta: f64,
    pub area_m2: f64,
    pub p_max_kw: f64,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Zero marks a dark period.
    pub r_max_w_per_m2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSection {
    pub v_in_m_per_s: f64,
    pub v_rated_m_per_s: f64,
    pub v_out_m_per_s: f64,
    pub p_rated_kw: f64,
    pub k: Vec<f64>,
    pub scale_m_per_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtSection {
    pub name: String,
    pub fixed_cost_usd_per_h: f64,
    pub startup_cost_usd: f64,
    pub fuel_cost_usd_per_kwh: f64,
    pub reserve_cost_usd_per_kwh: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssSection {
    pub p_ch_max_kw: f64,
    pub p_dc_max_kw: f64,
    pub eta_ch: f64,
    pub eta_dc: f64,
    pub soc_min_kwh: f64,
    pub soc_max_kwh: f64,
    pub soc_init_kwh: f64,
    pub charge_price_usd_per_kwh: f64,
    pub discharge_price_usd_per_kwh: f64,
    pub reserve_price_usd_per_kwh: f64,
    /// Reactive-power and voltage limits are carried but not enforced: no
    /// network data exists to evaluate them.
    #[serde(default)]
    pub q_ch_max_kvar: f64,
    #[serde(default)]
    pub q_dc_max_kvar: f64,
    #[serde(default)]
    pub v_min_v: f64,
    #[serde(default)]
    pub v_max_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrSection {
    pub shiftable_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_kw: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_kw: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    pub tou_usd_per_kwh: Vec<f64>,
    pub ref_price_usd_per_kwh: f64,
    pub ref_el_kw: f64,
    pub max_iterations: usize,
    /// Early exit once prices move less than this; zero runs every
    /// iteration.
    #[serde(default)]
    pub price_tolerance_usd_per_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JayaSection {
    pub population: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub lamarckian: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpmSection {
    pub gap_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Io {
        path: String,
        message: String,
    },
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io { path, message } => write!(f, "{path}: {message}"),
            ScenarioError::Parse {
                line,
                column,
                message,
            } => write!(f, "line {line}, column {column}: {message}"),
            ScenarioError::Invalid {
                field,
                line: Some(line),
                message,
            } => write!(f, "line {line}: `{field}` {message}"),
            ScenarioError::Invalid {
                field,
                line: None,
                message,
            } => write!(f, "`{field}` {message}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Command-line replacements for scenario values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub ratio: Option<f64>,
    pub q_kw: Option<f64>,
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn paper_base() -> Self {
        Self::parse(PAPER_BASE).expect("bundled scenario parses")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(g) = o.gamma {
            self.gamma = g;
        }
        if let Some(r) = o.ratio {
            self.demand_response.shiftable_ratio = r;
        }
        if let Some(q) = o.q_kw {
            self.q_kw = q;
        }
        if let Some(s) = o.seed {
            self.jaya.seed = s;
        }
    }

    /// Checks every field and builds the engine scenario. `source` is the
    /// original text, used to attach line numbers to field errors.
    pub fn build(&self, source: Option<&str>) -> Result<Scenario, ScenarioError> {
        let v = Validator { source };
        let t = self.periods;
        v.check(t >= 1, "periods", "must be at least 1")?;
        v.positive(self.q_kw, "q_kw")?;
        v.check(
            self.gamma > 0.0 && self.gamma <= 1.0,
            "gamma",
            "must lie in (0, 1]",
        )?;
        v.non_negative(self.shed_penalty_usd_per_kwh, "shed_penalty_usd_per_kwh")?;

        let load = &self.load;
        v.positive(load.p_max_kw, "load.p_max_kw")?;
        v.non_negative(load.fluctuation, "load.fluctuation")?;
        v.len(&load.mu_kw, t, "load.mu_kw")?;
        v.all(
            &load.mu_kw,
            "load.mu_kw",
            |x| x >= 0.0,
            "must be non-negative",
        )?;
        if let Some(s) = &load.sigma_kw {
            v.len(s, t, "load.sigma_kw")?;
            v.all(s, "load.sigma_kw", |x| x >= 0.0, "must be non-negative")?;
        }

        let pv = &self.pv;
        v.check(
            pv.eta > 0.0 && pv.eta <= 1.0,
            "pv.eta",
            "must lie in (0, 1]",
        )?;
        v.positive(pv.area_m2, "pv.area_m2")?;
        v.positive(pv.p_max_kw, "pv.p_max_kw")?;
        v.len(&pv.lambda1, t, "pv.lambda1")?;
        v.len(&pv.lambda2, t, "pv.lambda2")?;
        v.len(&pv.r_max_w_per_m2, t, "pv.r_max_w_per_m2")?;
        v.all(&pv.lambda1, "pv.lambda1", |x| x > 0.0, "must be positive")?;
        v.all(&pv.lambda2, "pv.lambda2", |x| x > 0.0, "must be positive")?;
        v.all(
            &pv.r_max_w_per_m2,
            "pv.r_max_w_per_m2",
            |x| x >= 0.0,
            "must be non-negative",
        )?;

        let w = &self.wind;
        v.positive(w.v_in_m_per_s, "wind.v_in_m_per_s")?;
        v.check(
            w.v_rated_m_per_s > w.v_in_m_per_s,
            "wind.v_rated_m_per_s",
            "must exceed v_in_m_per_s",
        )?;
        v.check(
            w.v_out_m_per_s > w.v_rated_m_per_s,
            "wind.v_out_m_per_s",
            "must exceed v_rated_m_per_s",
        )?;
        v.positive(w.p_rated_kw, "wind.p_rated_kw")?;
        v.len(&w.k, t, "wind.k")?;
        v.len(&w.scale_m_per_s, t, "wind.scale_m_per_s")?;
        v.all(&w.k, "wind.k", |x| x > 0.0, "must be positive")?;
        v.all(
            &w.scale_m_per_s,
            "wind.scale_m_per_s",
            |x| x > 0.0,
            "must be positive",
        )?;

        let mut units = Vec::with_capacity(self.microturbines.len());
        for (n, mt) in self.microturbines.iter().enumerate() {
            let f = |name: &str| format!("microturbines[{n}].{name}");
            v.non_negative(mt.fixed_cost_usd_per_h, &f("fixed_cost_usd_per_h"))?;
            v.non_negative(mt.startup_cost_usd, &f("startup_cost_usd"))?;
            v.non_negative(mt.fuel_cost_usd_per_kwh, &f("fuel_cost_usd_per_kwh"))?;
            v.non_negative(mt.reserve_cost_usd_per_kwh, &f("reserve_cost_usd_per_kwh"))?;
            v.non_negative(mt.p_min_kw, &f("p_min_kw"))?;
            v.check(
                mt.p_max_kw >= mt.p_min_kw && mt.p_max_kw > 0.0,
                &f("p_max_kw"),
                "must be positive and at least p_min_kw",
            )?;
            units.push(MtUnit {
                fixed_cost: mt.fixed_cost_usd_per_h,
                startup_cost: mt.startup_cost_usd,
                fuel_slope: mt.fuel_cost_usd_per_kwh,
                reserve_cost: mt.reserve_cost_usd_per_kwh,
                p_min: mt.p_min_kw,
                p_max: mt.p_max_kw,
            });
        }

        let e = &self.ess;
        v.non_negative(e.p_ch_max_kw, "ess.p_ch_max_kw")?;
        v.non_negative(e.p_dc_max_kw, "ess.p_dc_max_kw")?;
        v.check(
            e.eta_ch > 0.0 && e.eta_ch <= 1.0,
            "ess.eta_ch",
            "must lie in (0, 1]",
        )?;
        v.check(
            e.eta_dc > 0.0 && e.eta_dc <= 1.0,
            "ess.eta_dc",
            "must lie in (0, 1]",
        )?;
        v.non_negative(e.soc_min_kwh, "ess.soc_min_kwh")?;
        v.check(
            e.soc_max_kwh >= e.soc_min_kwh,
            "ess.soc_max_kwh",
            "must be at least soc_min_kwh",
        )?;
        v.check(
            (e.soc_min_kwh..=e.soc_max_kwh).contains(&e.soc_init_kwh),
            "ess.soc_init_kwh",
            "must lie between soc_min_kwh and soc_max_kwh",
        )?;
        v.non_negative(e.charge_price_usd_per_kwh, "ess.charge_price_usd_per_kwh")?;
        v.non_negative(
            e.discharge_price_usd_per_kwh,
            "ess.discharge_price_usd_per_kwh",
        )?;
        v.non_negative(e.reserve_price_usd_per_kwh, "ess.reserve_price_usd_per_kwh")?;
        let ess = EssConfig {
            p_ch_max: e.p_ch_max_kw,
            p_dc_max: e.p_dc_max_kw,
            eta_ch: e.eta_ch,
            eta_dc: e.eta_dc,
            soc_min: e.soc_min_kwh,
            soc_max: e.soc_max_kwh,
            soc_init: e.soc_init_kwh,
            charge_price: e.charge_price_usd_per_kwh,
            discharge_price: e.discharge_price_usd_per_kwh,
            reserve_price: e.reserve_price_usd_per_kwh,
            q_ch_max: e.q_ch_max_kvar,
            q_dc_max: e.q_dc_max_kvar,
            v_min: e.v_min_v,
            v_max: e.v_max_v,
        };

        let d = &self.demand_response;
        v.check(
            (0.0..1.0).contains(&d.shiftable_ratio),
            "demand_response.shiftable_ratio",
            "must lie in [0, 1)",
        )?;
        let bounds = match (&d.lower_kw, &d.upper_kw) {
            (None, None) => None,
            (Some(lo), Some(hi)) => {
                v.len(lo, t, "demand_response.lower_kw")?;
                v.len(hi, t, "demand_response.upper_kw")?;
                let ordered = lo.iter().zip(hi).all(|(l, h)| l <= h);
                v.check(
                    ordered,
                    "demand_response.upper_kw",
                    "must not fall below lower_kw",
                )?;
                Some((lo.clone(), hi.clone()))
            }
            (Some(_), None) => {
                return Err(v.fail(
                    "demand_response.upper_kw",
                    "is required when lower_kw is given",
                ))
            }
            (None, Some(_)) => {
                return Err(v.fail(
                    "demand_response.lower_kw",
                    "is required when upper_kw is given",
                ))
            }
        };

        let p = &self.pricing;
        v.len(&p.tou_usd_per_kwh, t, "pricing.tou_usd_per_kwh")?;
        v.all(
            &p.tou_usd_per_kwh,
            "pricing.tou_usd_per_kwh",
            |x| x >= 0.0,
            "must be non-negative",
        )?;
        v.non_negative(p.ref_price_usd_per_kwh, "pricing.ref_price_usd_per_kwh")?;
        v.positive(p.ref_el_kw, "pricing.ref_el_kw")?;
        v.check(
            p.max_iterations >= 1,
            "pricing.max_iterations",
            "must be at least 1",
        )?;
        v.non_negative(
            p.price_tolerance_usd_per_kwh,
            "pricing.price_tolerance_usd_per_kwh",
        )?;

        v.check(
            self.jaya.population >= 2,
            "jaya.population",
            "must be at least 2",
        )?;
        v.check(
            self.jaya.iterations >= 1,
            "jaya.iterations",
            "must be at least 1",
        )?;
        v.positive(self.ipm.gap_tolerance, "ipm.gap_tolerance")?;
        v.check(
            self.ipm.max_iterations >= 1,
            "ipm.max_iterations",
            "must be at least 1",
        )?;

        let mut periods = Vec::with_capacity(t);
        for i in 0..t {
            let sigma = match &load.sigma_kw {
                Some(s) => s[i],
                None => load.fluctuation * load.mu_kw[i],
            };
            let load_model =
                LoadModel::new(load.mu_kw[i], sigma).map_err(|e| v.engine("load.mu_kw", e))?;
            let pv_model = if pv.r_max_w_per_m2[i] > 0.0 {
                let m = PvModel::from_irradiance(
                    pv.lambda1[i],
                    pv.lambda2[i],
                    pv.eta,
                    pv.area_m2,
                    pv.r_max_w_per_m2[i],
                    pv.p_max_kw,
                )
                .map_err(|e| v.engine("pv.r_max_w_per_m2", e))?;
                Some(m)
            } else {
                None
            };
            let wind = WtModel {
                k: w.k[i],
                scale: w.scale_m_per_s[i],
                v_in: w.v_in_m_per_s,
                v_rated: w.v_rated_m_per_s,
                v_out: w.v_out_m_per_s,
                p_rated: w.p_rated_kw,
            }
            .validated()
            .map_err(|e| v.engine("wind", e))?;
            periods.push(PeriodUncertainty {
                load: load_model,
                pv: pv_model,
                wind,
            });
        }

        let mut jaya = JayaParams::new(self.jaya.population, self.jaya.iterations, self.jaya.seed);
        jaya.lamarckian = self.jaya.lamarckian;
        let ipm = IpmConfig {
            gap_tolerance: self.ipm.gap_tolerance,
            max_iterations: self.ipm.max_iterations,
            ..IpmConfig::default()
        };
        let scenario = Scenario {
            periods,
            load_cap: load.p_max_kw,
            units,
            ess,
            dr: DrConfig {
                ratio: d.shiftable_ratio,
                bounds,
                supply_cap: None,
            },
            tou: p.tou_usd_per_kwh.clone(),
            ref_price: p.ref_price_usd_per_kwh,
            ref_el: p.ref_el_kw,
            gamma: self.gamma,
            step: self.q_kw,
            shed_penalty: self.shed_penalty_usd_per_kwh,
            max_pricing_iterations: p.max_iterations,
            price_tolerance: p.price_tolerance_usd_per_kwh,
            jaya,
            ipm,
        };
        scenario.validate().map_err(|e| v.engine("scenario", e))?;
        Ok(scenario)
    }
}

struct Validator<'a> {
    source: Option<&'a str>,
}

impl Validator<'_> {
    /// Line of a dotted field path such as `load.mu_kw` or
    /// `microturbines[1].p_max_kw`, located by scanning keys in order.
    fn line_of(&self, path: &str) -> Option<usize> {
        let text = self.source?;
        let mut at = 0;
        let mut skip = 0;
        for seg in path.split('.') {
            let (key, index) = match seg.split_once('[') {
                Some((k, rest)) => (k, rest.trim_end_matches(']').parse::<usize>().ok()?),
                None => (seg, 0),
            };
            let quoted = format!("\"{key}\"");
            for _ in 0..=skip {
                at += text[at..].find(&quoted)? + quoted.len();
            }
            skip = index;
        }
        Some(text[..at].matches('\n').count() + 1)
    }

    fn fail(&self, field: &str, message: &str) -> ScenarioError {
        ScenarioError::Invalid {
            field: field.to_string(),
            line: self.line_of(field),
            message: message.to_string(),
        }
    }

    fn engine(&self, field: &str, e: mgsched_core::Error) -> ScenarioError {
        ScenarioError::Invalid {
            field: field.to_string(),
            line: self.line_of(field),
            message: format!("rejected: {e}"),
        }
    }

    fn check(&self, ok: bool, field: &str, message: &str) -> Result<(), ScenarioError> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(field, message))
        }
    }

    fn positive(&self, x: f64, field: &str) -> Result<(), ScenarioError> {
        self.check(x > 0.0 && x.is_finite(), field, "must be positive")
    }

    fn non_negative(&self, x: f64, field: &str) -> Result<(), ScenarioError> {
        self.check(x >= 0.0 && x.is_finite(), field, "must be non-negative")
    }

    fn len(&self, xs: &[f64], t: usize, field: &str) -> Result<(), ScenarioError> {
        self.check(
            xs.len() == t,
            field,
            &format!("must have one entry per period ({t}), found {}", xs.len()),
        )
    }

    fn all(
        &self,
        xs: &[f64],
        field: &str,
        ok: impl Fn(f64) -> bool,
        message: &str,
    ) -> Result<(), ScenarioError> {
        match xs.iter().position(|x| !x.is_finite() || !ok(*x)) {
            None => Ok(()),
            Some(i) => Err(self.fail(field, &format!("entry {} {message}", i + 1))),
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(
    path: &Path,
    overrides: &Overrides,
) -> Result<(ScenarioFile, Scenario), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    from_text(&text, overrides)
}

pub fn from_text(
    text: &str,
    overrides: &Overrides,
) -> Result<(ScenarioFile, Scenario), ScenarioError> {
    let mut file = ScenarioFile::parse(text)?;
    file.apply(overrides);
    let scenario = match file.build(Some(text)) {
        Err(ScenarioError::Invalid { field, message, .. }) if overridden(overrides, &field) => {
            return Err(ScenarioError::Invalid {
                field,
                line: None,
                message: format!("{message} (set on the command line)"),
            });
        }
        other => other?,
    };
    Ok((file, scenario))
}

fn overridden(o: &Overrides, field: &str) -> bool {
    matches!(
        (field, o),
        ("gamma", Overrides { gamma: Some(_), .. })
            | (
                "demand_response.shiftable_ratio",
                Overrides { ratio: Some(_), .. }
            )
            | ("q_kw", Overrides { q_kw: Some(_), .. })
    )
}
