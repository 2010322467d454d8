//! Estimates the energy and carbon behind proxied mail traffic, and the
//! certificate spend needed to offset it.
//!
//! Link transfer is priced per decimal gigabyte moved; upstream server
//! work is priced per request from an annual per-user profile. Carbon
//! mass for a route is split equally across its hops, each weighted by
//! the grid intensity of its region.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostParams};
use crate::units::{EnergyAmount, UnitError};

/// Effective end-to-end energy intensity of moving data across the
/// internet, kWh per decimal GB, used when no measured figure exists.
pub const DEFAULT_KWH_PER_GB: f64 = 24.3;

pub const BYTES_PER_GB: f64 = 1.0e9;

#[derive(Debug, Error)]
pub enum CarbonError {
    #[error("server profile field `{0}` must be finite and positive")]
    InvalidProfile(&'static str),
    #[error("energy intensity must be finite and positive, got {0}")]
    InvalidIntensity(f64),
    #[error("requests per user per year must be positive, got {0}")]
    ZeroRequestRate(f64),
    #[error("route file row {row}: {reason}")]
    MalformedRoute { row: usize, reason: String },
    #[error("route file has duplicate hop_index {0}")]
    DuplicateHopIndex(u32),
    #[error("region table must contain a `default` entry")]
    MissingDefault,
    #[error("region table entry `{0}` is not a finite non-negative number")]
    BadRegionEntry(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// What one upstream mail server costs per user per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerProfile {
    pub users_served: u64,
    pub annual_kwh_per_user: f64,
    pub annual_carbon_kg_per_user: f64,
}

impl ServerProfile {
    pub fn validate(&self) -> Result<(), CarbonError> {
        if self.users_served == 0 {
            return Err(CarbonError::InvalidProfile("users_served"));
        }
        if !self.annual_kwh_per_user.is_finite() || self.annual_kwh_per_user <= 0.0 {
            return Err(CarbonError::InvalidProfile("annual_kwh_per_user"));
        }
        if !self.annual_carbon_kg_per_user.is_finite() || self.annual_carbon_kg_per_user <= 0.0 {
            return Err(CarbonError::InvalidProfile("annual_carbon_kg_per_user"));
        }
        Ok(())
    }

    pub fn aggregate_annual_energy(&self) -> Result<EnergyAmount, CarbonError> {
        self.validate()?;
        Ok(EnergyAmount::from_kwh(self.users_served as f64 * self.annual_kwh_per_user)?)
    }

    /// Carbon mass per unit of server energy implied by the profile.
    pub fn carbon_kg_per_kwh(&self) -> f64 {
        self.annual_carbon_kg_per_user / self.annual_kwh_per_user
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyIntensity {
    pub kwh_per_gb: f64,
}

impl EnergyIntensity {
    pub fn new(kwh_per_gb: f64) -> Result<Self, CarbonError> {
        if !kwh_per_gb.is_finite() || kwh_per_gb <= 0.0 {
            return Err(CarbonError::InvalidIntensity(kwh_per_gb));
        }
        Ok(EnergyIntensity { kwh_per_gb })
    }
}

impl Default for EnergyIntensity {
    fn default() -> Self {
        EnergyIntensity { kwh_per_gb: DEFAULT_KWH_PER_GB }
    }
}

/// Energy to move `bytes` across a link at the given intensity.
pub fn link_energy(bytes: u64, intensity: &EnergyIntensity) -> Result<EnergyAmount, CarbonError> {
    EnergyIntensity::new(intensity.kwh_per_gb)?;
    Ok(EnergyAmount::from_kwh(bytes as f64 / BYTES_PER_GB * intensity.kwh_per_gb)?)
}

/// Upstream server energy attributable to one request.
pub fn server_energy_per_request(
    profile: &ServerProfile,
    requests_per_user_per_year: f64,
) -> Result<EnergyAmount, CarbonError> {
    profile.validate()?;
    if !requests_per_user_per_year.is_finite() || requests_per_user_per_year <= 0.0 {
        return Err(CarbonError::ZeroRequestRate(requests_per_user_per_year));
    }
    Ok(EnergyAmount::from_kwh(profile.annual_kwh_per_user / requests_per_user_per_year)?)
}

/// One hop of a measured network route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteHop {
    pub hop_index: u32,
    pub address: String,
    pub region: String,
    /// Grid intensity of the hop's region, kg CO2 per MWh.
    pub carbon_intensity_kg_per_mwh: f64,
    /// False when the region fell back to the table default.
    pub region_known: bool,
}

/// Carbon mass of pushing `energy` across the route, splitting the energy
/// equally over the hops. An empty route carries nothing.
pub fn route_carbon(route: &[RouteHop], energy: EnergyAmount) -> f64 {
    if route.is_empty() {
        return 0.0;
    }
    let share_mwh = energy.as_mwh() / route.len() as f64;
    route.iter().map(|hop| share_mwh * hop.carbon_intensity_kg_per_mwh).sum()
}

/// Region name to grid intensity (kg CO2 per MWh). Loaded from a flat
/// JSON object; the key `default` is the fallback, keys starting with
/// `_` are annotations and ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionIntensityTable {
    default_kg_per_mwh: f64,
    regions: BTreeMap<String, f64>,
}

impl RegionIntensityTable {
    pub fn new(default_kg_per_mwh: f64, regions: BTreeMap<String, f64>) -> Result<Self, CarbonError> {
        let check = |name: &str, value: f64| {
            if !value.is_finite() || value < 0.0 {
                Err(CarbonError::BadRegionEntry(name.to_string()))
            } else {
                Ok(())
            }
        };
        check("default", default_kg_per_mwh)?;
        for (name, &value) in &regions {
            check(name, value)?;
        }
        Ok(RegionIntensityTable { default_kg_per_mwh, regions })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CarbonError> {
        let raw: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut default = None;
        let mut regions = BTreeMap::new();
        for (key, value) in raw {
            if key.starts_with('_') {
                continue;
            }
            let number = value
                .as_f64()
                .ok_or_else(|| CarbonError::BadRegionEntry(key.clone()))?;
            if key == "default" {
                default = Some(number);
            } else {
                regions.insert(key, number);
            }
        }
        let default = default.ok_or(CarbonError::MissingDefault)?;
        Self::new(default, regions)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, CarbonError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Intensity for a region, falling back to the default; the flag says
    /// whether the region was actually listed.
    pub fn lookup(&self, region: &str) -> (f64, bool) {
        match self.regions.get(region) {
            Some(&value) => (value, true),
            None => (self.default_kg_per_mwh, false),
        }
    }

    pub fn default_kg_per_mwh(&self) -> f64 {
        self.default_kg_per_mwh
    }
}

/// Reads a route CSV (`hop_index,ip,region` with a header row) and
/// resolves each hop's intensity. Hops come back sorted by index;
/// unknown regions take the default and are flagged.
pub fn ingest_route_file(
    path: impl AsRef<Path>,
    table: &RegionIntensityTable,
) -> Result<Vec<RouteHop>, CarbonError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut hops: Vec<RouteHop> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 2; // 1-based, after the header
        if record.len() != 3 {
            return Err(CarbonError::MalformedRoute {
                row,
                reason: format!("expected 3 columns, got {}", record.len()),
            });
        }
        let hop_index: u32 = record[0].parse().map_err(|_| CarbonError::MalformedRoute {
            row,
            reason: format!("bad hop_index `{}`", &record[0]),
        })?;
        if hops.iter().any(|h| h.hop_index == hop_index) {
            return Err(CarbonError::DuplicateHopIndex(hop_index));
        }
        let region = record[2].to_string();
        let (intensity, known) = table.lookup(&region);
        hops.push(RouteHop {
            hop_index,
            address: record[1].to_string(),
            region,
            carbon_intensity_kg_per_mwh: intensity,
            region_known: known,
        });
    }
    hops.sort_by_key(|h| h.hop_index);
    Ok(hops)
}

/// Byte and request counters accumulated by the proxy. A plain snapshot:
/// the live, atomically updated ledger lives with the proxy itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSnapshot {
    pub bytes_to_upstream: u64,
    pub bytes_from_upstream: u64,
    pub requests_to_upstream: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_bytes: u64,
    pub miss_bytes: u64,
}

impl TrafficSnapshot {
    /// Payload bytes served to clients, used as the client-link volume.
    pub fn client_bytes(&self) -> u64 {
        self.hit_bytes + self.miss_bytes
    }

    pub fn upstream_bytes(&self) -> u64 {
        self.bytes_to_upstream + self.bytes_from_upstream
    }
}

/// What the operator owes the grid for a stretch of proxied traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionLedger {
    pub link_energy_kwh: f64,
    pub server_energy_kwh: f64,
    /// Carbon mass of the server share, from the profile's kg/kWh ratio.
    /// Link mass needs route data; see `route_carbon`.
    pub total_carbon_kg: f64,
    /// Certificate spend: energy minus the fleet's green surplus, floored
    /// at zero, priced at c0.
    pub rec_cost_usd: f64,
    pub started_at_unix: Option<u64>,
    pub updated_at_unix: Option<u64>,
}

/// Certificate obligation implied by a traffic snapshot.
///
/// Link energy covers both proxy sides (client payloads plus upstream
/// bytes) unless `ignore_link_energy` is set, which the default config
/// does: measured end-to-end transfer intensities are dominated by shared
/// infrastructure that mail traffic barely dents. Server energy charges
/// each cache miss at the per-request figure in `params`.
pub fn offset_requirement(
    traffic: &TrafficSnapshot,
    profile: &ServerProfile,
    intensity: &EnergyIntensity,
    params: &CostParams,
    instances: u32,
    ignore_link_energy: bool,
) -> Result<EmissionLedger, CarbonError> {
    profile.validate()?;
    params.validate()?;
    if instances == 0 {
        return Err(CarbonError::Cost(CostError::ZeroInstances));
    }
    let link_kwh = if ignore_link_energy {
        0.0
    } else {
        link_energy(traffic.client_bytes() + traffic.upstream_bytes(), intensity)?.kwh()
    };
    let server_kwh = traffic.misses as f64 * params.upstream_server_kwh_per_request;
    let surplus =
        instances as f64 * params.instance_energy_kwh * (params.r - params.r_target);
    let billable = (link_kwh + server_kwh - surplus).max(0.0);
    Ok(EmissionLedger {
        link_energy_kwh: link_kwh,
        server_energy_kwh: server_kwh,
        total_carbon_kg: server_kwh * profile.carbon_kg_per_kwh(),
        rec_cost_usd: params.rec_price_per_kwh * billable,
        started_at_unix: None,
        updated_at_unix: None,
    })
}

/// Shared accumulator for proxy sessions. One mutex guards the whole
/// counter set, so snapshots are never torn.
#[derive(Debug)]
pub struct EmissionAccumulator {
    inner: Mutex<AccumulatorState>,
}

#[derive(Debug)]
struct AccumulatorState {
    link_kwh: f64,
    server_kwh: f64,
    carbon_kg: f64,
    started_at_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl EmissionAccumulator {
    pub fn new() -> Self {
        EmissionAccumulator {
            inner: Mutex::new(AccumulatorState {
                link_kwh: 0.0,
                server_kwh: 0.0,
                carbon_kg: 0.0,
                started_at_unix: unix_now(),
            }),
        }
    }

    pub fn record(&self, link_kwh: f64, server_kwh: f64, carbon_kg: f64) {
        debug_assert!(link_kwh >= 0.0 && server_kwh >= 0.0 && carbon_kg >= 0.0);
        let mut state = self.inner.lock().unwrap();
        state.link_kwh += link_kwh;
        state.server_kwh += server_kwh;
        state.carbon_kg += carbon_kg;
    }

    /// Consistent snapshot priced against the given parameters.
    pub fn snapshot_priced(
        &self,
        params: &CostParams,
        instances: u32,
    ) -> Result<EmissionLedger, CarbonError> {
        params.validate()?;
        if instances == 0 {
            return Err(CarbonError::Cost(CostError::ZeroInstances));
        }
        let state = self.inner.lock().unwrap();
        let surplus =
            instances as f64 * params.instance_energy_kwh * (params.r - params.r_target);
        let billable = (state.link_kwh + state.server_kwh - surplus).max(0.0);
        Ok(EmissionLedger {
            link_energy_kwh: state.link_kwh,
            server_energy_kwh: state.server_kwh,
            total_carbon_kg: state.carbon_kg,
            rec_cost_usd: params.rec_price_per_kwh * billable,
            started_at_unix: Some(state.started_at_unix),
            updated_at_unix: Some(unix_now()),
        })
    }
}

impl Default for EmissionAccumulator {
    fn default() -> Self {
        Self::new()
    }
}
