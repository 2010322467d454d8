//! Scalar quantity types. Energy is canonically kilowatt-hours, money is USD.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOULES_PER_KWH: f64 = 3.6e6;
pub const KWH_PER_MWH: f64 = 1.0e3;

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("energy must be finite and non-negative, got {0}")]
    InvalidEnergy(f64),
    #[error("money must be finite, got {0}")]
    InvalidMoney(f64),
}

/// Non-negative energy quantity stored in kWh.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EnergyAmount(f64);

impl EnergyAmount {
    pub const ZERO: EnergyAmount = EnergyAmount(0.0);

    pub fn from_kwh(kwh: f64) -> Result<Self, UnitError> {
        if kwh.is_finite() && kwh >= 0.0 {
            Ok(EnergyAmount(kwh))
        } else {
            Err(UnitError::InvalidEnergy(kwh))
        }
    }

    pub fn from_joules(joules: f64) -> Result<Self, UnitError> {
        Self::from_kwh(joules / JOULES_PER_KWH)
    }

    pub fn from_mwh(mwh: f64) -> Result<Self, UnitError> {
        Self::from_kwh(mwh * KWH_PER_MWH)
    }

    pub fn kwh(self) -> f64 {
        self.0
    }

    pub fn as_joules(self) -> f64 {
        self.0 * JOULES_PER_KWH
    }

    pub fn as_mwh(self) -> f64 {
        self.0 / KWH_PER_MWH
    }
}

impl TryFrom<f64> for EnergyAmount {
    type Error = UnitError;
    fn try_from(v: f64) -> Result<Self, UnitError> {
        EnergyAmount::from_kwh(v)
    }
}

impl From<EnergyAmount> for f64 {
    fn from(e: EnergyAmount) -> f64 {
        e.0
    }
}

impl std::ops::Add for EnergyAmount {
    type Output = EnergyAmount;
    fn add(self, rhs: EnergyAmount) -> EnergyAmount {
        EnergyAmount(self.0 + rhs.0)
    }
}

impl std::iter::Sum for EnergyAmount {
    fn sum<I: Iterator<Item = EnergyAmount>>(iter: I) -> EnergyAmount {
        iter.fold(EnergyAmount::ZERO, |a, b| a + b)
    }
}

/// Money in US dollars.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MoneyAmount(f64);

impl MoneyAmount {
    pub const ZERO: MoneyAmount = MoneyAmount(0.0);

    pub fn from_usd(usd: f64) -> Result<Self, UnitError> {
        if usd.is_finite() {
            Ok(MoneyAmount(usd))
        } else {
            Err(UnitError::InvalidMoney(usd))
        }
    }

    pub fn usd(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MoneyAmount {
    type Error = UnitError;
    fn try_from(v: f64) -> Result<Self, UnitError> {
        MoneyAmount::from_usd(v)
    }
}

impl From<MoneyAmount> for f64 {
    fn from(m: MoneyAmount) -> f64 {
        m.0
    }
}

impl std::ops::Add for MoneyAmount {
    type Output = MoneyAmount;
    fn add(self, rhs: MoneyAmount) -> MoneyAmount {
        MoneyAmount(self.0 + rhs.0)
    }
}
