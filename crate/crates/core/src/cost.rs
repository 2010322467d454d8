//! Period cost model for a fleet of N caching proxy instances.
//!
//! Two components are billed per period: renewable-energy certificates
//! bought to offset the energy attributable to mail traffic, and the
//! rental price of the instances themselves. Caching reduces the first
//! component because only cache misses reach the upstream server.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{EnergyAmount, MoneyAmount};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("parameter `{0}` must be finite and non-negative")]
    InvalidField(&'static str),
    #[error("per-instance service rate `beta` must be positive")]
    ZeroServiceRate,
    #[error("period length `T` must be positive")]
    ZeroPeriod,
    #[error("offset ratio r={r} must be at least the target rT={r_t}")]
    OffsetBelowTarget { r: f64, r_t: f64 },
    #[error("miss rate must lie in [0, 1], got {0}")]
    MissRateOutOfRange(f64),
    #[error("instance count must be at least 1")]
    ZeroInstances,
}

/// Inputs for one budgeting period.
///
/// Wire names are the operator-facing schema; the Rust names spell out the
/// role and unit. `lambda_`, `beta`, `T`, and `cv` must share one time unit
/// (hours canonically; any consistent choice works because only the
/// products enter the formulas).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Aggregate client request rate, requests per hour.
    #[serde(rename = "lambda_")]
    pub request_rate: f64,
    /// Period length in hours.
    #[serde(rename = "T")]
    pub period: f64,
    /// Requests per hour one instance can serve within the SLA.
    pub beta: f64,
    /// Client-to-proxy link energy per request, kWh.
    #[serde(rename = "u")]
    pub client_link_kwh_per_request: f64,
    /// Proxy-to-upstream link energy per request, kWh.
    #[serde(rename = "G")]
    pub upstream_link_kwh_per_request: f64,
    /// Upstream server energy per request, kWh.
    #[serde(rename = "H")]
    pub upstream_server_kwh_per_request: f64,
    /// Certificate price, USD per kWh.
    #[serde(rename = "c0")]
    pub rec_price_per_kwh: f64,
    /// Instance rental price, USD per instance per hour.
    #[serde(rename = "cv")]
    pub instance_price_per_hour: f64,
    /// Energy one instance consumes over the period, kWh.
    #[serde(rename = "Ev")]
    pub instance_energy_kwh: f64,
    /// Fraction of instance energy already renewable.
    pub r: f64,
    /// Renewable fraction the operator is obliged to reach.
    #[serde(rename = "rT")]
    pub r_target: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("lambda_", self.request_rate),
            ("T", self.period),
            ("beta", self.beta),
            ("u", self.client_link_kwh_per_request),
            ("G", self.upstream_link_kwh_per_request),
            ("H", self.upstream_server_kwh_per_request),
            ("c0", self.rec_price_per_kwh),
            ("cv", self.instance_price_per_hour),
            ("Ev", self.instance_energy_kwh),
            ("r", self.r),
            ("rT", self.r_target),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(CostError::InvalidField(name));
            }
        }
        if self.beta == 0.0 {
            return Err(CostError::ZeroServiceRate);
        }
        if self.period == 0.0 {
            return Err(CostError::ZeroPeriod);
        }
        if self.r < self.r_target {
            return Err(CostError::OffsetBelowTarget {
                r: self.r,
                r_t: self.r_target,
            });
        }
        Ok(())
    }

    /// Total requests arriving over the period.
    pub fn total_requests(&self) -> f64 {
        self.request_rate * self.period
    }
}

/// Per-period traffic volumes implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateLoad {
    pub total_requests: f64,
    pub client_link_energy: EnergyAmount,
    pub upstream_link_energy: EnergyAmount,
    pub upstream_server_energy: EnergyAmount,
}

impl AggregateLoad {
    pub fn for_period(params: &CostParams) -> Result<Self, CostError> {
        params.validate()?;
        let requests = params.total_requests();
        let energy = |per_request: f64| {
            EnergyAmount::from_kwh(requests * per_request)
                .expect("validated params yield non-negative energy")
        };
        Ok(AggregateLoad {
            total_requests: requests,
            client_link_energy: energy(params.client_link_kwh_per_request),
            upstream_link_energy: energy(params.upstream_link_kwh_per_request),
            upstream_server_energy: energy(params.upstream_server_kwh_per_request),
        })
    }
}

fn check_point(params: &CostParams, instances: u32, miss_rate: f64) -> Result<(), CostError> {
    params.validate()?;
    if instances == 0 {
        return Err(CostError::ZeroInstances);
    }
    if !miss_rate.is_finite() || !(0.0..=1.0).contains(&miss_rate) {
        return Err(CostError::MissRateOutOfRange(miss_rate));
    }
    Ok(())
}

/// Certificate spend for the period at a given fleet size and miss rate.
///
/// Energy to offset is the client link traffic plus the upstream share that
/// misses let through, minus the green energy the fleet already runs on
/// beyond the obligation. Over-offsetting earns no refund: the spend floors
/// at zero.
pub fn rec_cost(params: &CostParams, instances: u32, miss_rate: f64) -> Result<MoneyAmount, CostError> {
    check_point(params, instances, miss_rate)?;
    let requests = params.total_requests();
    let consumption = requests * params.client_link_kwh_per_request
        + requests
            * (params.upstream_link_kwh_per_request + params.upstream_server_kwh_per_request)
            * miss_rate;
    let surplus = instances as f64 * params.instance_energy_kwh * (params.r - params.r_target);
    let billable_kwh = (consumption - surplus).max(0.0);
    Ok(MoneyAmount::from_usd(params.rec_price_per_kwh * billable_kwh)
        .expect("finite inputs yield finite cost"))
}

/// Rental spend for the period: N instances at `cv` for `T`.
pub fn instance_cost(params: &CostParams, instances: u32) -> Result<MoneyAmount, CostError> {
    params.validate()?;
    if instances == 0 {
        return Err(CostError::ZeroInstances);
    }
    Ok(
        MoneyAmount::from_usd(instances as f64 * params.instance_price_per_hour * params.period)
            .expect("finite inputs yield finite cost"),
    )
}

/// Certificate spend plus rental spend.
pub fn total_cost(params: &CostParams, instances: u32, miss_rate: f64) -> Result<MoneyAmount, CostError> {
    Ok(rec_cost(params, instances, miss_rate)? + instance_cost(params, instances)?)
}

/// Smallest fleet size whose aggregate service rate covers the arrival rate.
pub fn sla_min_instances(params: &CostParams) -> Result<u32, CostError> {
    params.validate()?;
    let quotient = params.request_rate / params.beta;
    let mut n = quotient.ceil().max(1.0) as u32;
    // Float guards: the result must be the *smallest* integer with
    // beta * n >= lambda, exactly as evaluated in f64.
    while n > 1 && params.beta * ((n - 1) as f64) >= params.request_rate {
        n -= 1;
    }
    while params.beta * (n as f64) < params.request_rate {
        n += 1;
    }
    Ok(n)
}
