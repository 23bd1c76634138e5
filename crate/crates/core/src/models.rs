//! Continuous uncertainty models for PV output, wind output and load, plus
//! the deterministic device curves that link weather to power.
//!
//! All powers are in kW. Densities are per kW.

use libm::{exp, lgamma, pow, sqrt};

use crate::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Distribution of a non-negative power quantity on `[0, support_max]`,
/// made of a density plus up to two point masses.
pub trait PowerDistribution {
    fn support_max(&self) -> f64;

    /// Continuous part of the density; zero outside the support.
    fn density(&self, p: f64) -> f64;

    /// Point masses as `(power, probability)`; unused slots carry zero mass.
    fn atoms(&self) -> [(f64, f64); 2] {
        [(0.0, 0.0); 2]
    }
}

/// PV array output `P = irradiance * eta * area`, Beta distributed on
/// `[0, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvModel {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Maximum output in kW.
    pub p_max: f64,
    /// Conversion efficiency.
    pub eta: f64,
    /// Panel area in m².
    pub area: f64,
    /// Maximum irradiance in W/m².
    pub r_max: f64,
}

impl PvModel {
    /// Builds a model whose maximum output follows from the irradiance
    /// ceiling, capped at the inverter rating `p_cap` (kW).
    pub fn from_irradiance(
        lambda1: f64,
        lambda2: f64,
        eta: f64,
        area: f64,
        r_max: f64,
        p_cap: f64,
    ) -> Result<Self> {
        let p_max = irradiance_to_power(r_max, eta, area).min(p_cap);
        Self {
            lambda1,
            lambda2,
            p_max,
            eta,
            area,
            r_max,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.lambda1 > 0.0) || !(self.lambda2 > 0.0) {
            return Err(Error::InvalidArgument("PV shape factors must be positive"));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::InvalidArgument("PV maximum output must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidArgument("PV efficiency must lie in (0, 1]"));
        }
        Ok(self)
    }

    fn log_norm(&self) -> f64 {
        lgamma(self.lambda1 + self.lambda2) - lgamma(self.lambda1) - lgamma(self.lambda2)
    }

    fn beta_density(&self, p: f64) -> f64 {
        let x = p / self.p_max;
        exp(self.log_norm()) * pow(x, self.lambda1 - 1.0) * pow(1.0 - x, self.lambda2 - 1.0)
            / self.p_max
    }
}

impl PowerDistribution for PvModel {
    fn support_max(&self) -> f64 {
        self.p_max
    }

    fn density(&self, p: f64) -> f64 {
        if !(0.0..=self.p_max).contains(&p) {
            return 0.0;
        }
        self.beta_density(p)
    }
}

/// Electrical output of the array at irradiance `r` (W/m²), in kW.
pub fn irradiance_to_power(r: f64, eta: f64, area: f64) -> f64 {
    r * eta * area / 1000.0
}

/// Beta density of PV output.
pub fn pv_output_pdf(model: &PvModel, p: f64) -> Result<f64> {
    if !(0.0..=model.p_max).contains(&p) {
        return Err(Error::Domain {
            what: "PV output",
            value: p,
        });
    }
    Ok(model.beta_density(p))
}

/// Wind turbine with Weibull distributed wind speed and a linear ramp
/// between cut-in and rated speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtModel {
    /// Weibull shape.
    pub k: f64,
    /// Weibull scale in m/s.
    pub scale: f64,
    pub v_in: f64,
    pub v_rated: f64,
    pub v_out: f64,
    /// Rated output in kW.
    pub p_rated: f64,
}

impl WtModel {
    pub fn validated(self) -> Result<Self> {
        if !(self.k > 0.0) || !(self.scale > 0.0) {
            return Err(Error::InvalidArgument(
                "Weibull shape and scale must be positive",
            ));
        }
        if !(0.0 < self.v_in && self.v_in < self.v_rated && self.v_rated < self.v_out) {
            return Err(Error::InvalidArgument(
                "wind speeds must satisfy 0 < v_in < v_rated < v_out",
            ));
        }
        if !(self.p_rated > 0.0) {
            return Err(Error::InvalidArgument("rated wind output must be positive"));
        }
        Ok(self)
    }

    /// `h = v_rated / v_in - 1`.
    pub fn h(&self) -> f64 {
        self.v_rated / self.v_in - 1.0
    }

    /// `P(V > v)` for the Weibull wind speed.
    pub fn speed_survival(&self, v: f64) -> f64 {
        exp(-pow(v / self.scale, self.k))
    }

    /// Probability that the turbine produces exactly zero
    /// (below cut-in or at/above cut-off).
    pub fn prob_zero(&self) -> f64 {
        1.0 - self.speed_survival(self.v_in) + self.speed_survival(self.v_out)
    }

    /// Probability of rated output (`v_rated <= v < v_out`).
    pub fn prob_rated(&self) -> f64 {
        self.speed_survival(self.v_rated) - self.speed_survival(self.v_out)
    }

    fn ramp_density(&self, p: f64) -> f64 {
        let h = self.h();
        let y = (1.0 + h * p / self.p_rated) * self.v_in / self.scale;
        self.k * h * self.v_in / (self.scale * self.p_rated)
            * pow(y, self.k - 1.0)
            * exp(-pow(y, self.k))
    }
}

impl PowerDistribution for WtModel {
    fn support_max(&self) -> f64 {
        self.p_rated
    }

    fn density(&self, p: f64) -> f64 {
        if !(0.0..=self.p_rated).contains(&p) {
            return 0.0;
        }
        self.ramp_density(p)
    }

    fn atoms(&self) -> [(f64, f64); 2] {
        [(0.0, self.prob_zero()), (self.p_rated, self.prob_rated())]
    }
}

/// Turbine power curve.
pub fn wt_power_curve(model: &WtModel, v: f64) -> f64 {
    if v < model.v_in || v >= model.v_out {
        0.0
    } else if v < model.v_rated {
        (v - model.v_in) / (model.v_rated - model.v_in) * model.p_rated
    } else {
        model.p_rated
    }
}

/// Density of the ramp section of the turbine output. The point masses at
/// zero and rated output are reported by [`WtModel::atoms`].
pub fn wt_output_pdf(model: &WtModel, p: f64) -> Result<f64> {
    if !(0.0..=model.p_rated).contains(&p) {
        return Err(Error::Domain {
            what: "wind output",
            value: p,
        });
    }
    Ok(model.ramp_density(p))
}

/// Normally distributed load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadModel {
    pub mu: f64,
    pub sigma: f64,
}

impl LoadModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu >= 0.0) || !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(
                "load mean and deviation must be non-negative",
            ));
        }
        Ok(Self { mu, sigma })
    }

    /// `sigma = fluctuation * mu`.
    pub fn with_fluctuation(mu: f64, fluctuation: f64) -> Result<Self> {
        if !(fluctuation >= 0.0) {
            return Err(Error::InvalidArgument(
                "load fluctuation must be non-negative",
            ));
        }
        Self::new(mu, fluctuation * mu)
    }

    /// The model restricted to `[0, p_max]` for discretization.
    pub fn truncated(self, p_max: f64) -> TruncatedLoad {
        TruncatedLoad { model: self, p_max }
    }
}

pub fn load_pdf(model: &LoadModel, p: f64) -> f64 {
    if model.sigma == 0.0 {
        return if p == model.mu { f64::INFINITY } else { 0.0 };
    }
    let z = (p - model.mu) / model.sigma;
    exp(-0.5 * z * z) / (model.sigma * SQRT_2PI)
}

/// Gaussian load cut to `[0, p_max]`; the discretizer renormalizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedLoad {
    pub model: LoadModel,
    pub p_max: f64,
}

impl PowerDistribution for TruncatedLoad {
    fn support_max(&self) -> f64 {
        self.p_max
    }

    fn density(&self, p: f64) -> f64 {
        if self.model.sigma == 0.0 || !(0.0..=self.p_max).contains(&p) {
            return 0.0;
        }
        load_pdf(&self.model, p)
    }

    fn atoms(&self) -> [(f64, f64); 2] {
        if self.model.sigma == 0.0 {
            [(self.model.mu.min(self.p_max), 1.0), (0.0, 0.0)]
        } else {
            [(0.0, 0.0); 2]
        }
    }
}

/// Certain zero output, e.g. PV at night.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroOutput;

impl PowerDistribution for ZeroOutput {
    fn support_max(&self) -> f64 {
        0.0
    }

    fn density(&self, _p: f64) -> f64 {
        0.0
    }

    fn atoms(&self) -> [(f64, f64); 2] {
        [(0.0, 1.0), (0.0, 0.0)]
    }
}

/// Net demand after renewables; negative when renewables exceed the load.
pub fn equivalent_load(p_load: f64, p_pv: f64, p_wt: f64) -> f64 {
    p_load - (p_pv + p_wt)
}

/// Standard deviation helper used by reporting code.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}
