//! Miss-rate models M(N): the aggregate cache miss rate as a function of
//! the number of cache instances. Three shapes are supported, all meant to
//! satisfy the working assumptions the optimizer relies on: M is
//! non-negative and vanishes for large fleets, it never rises when
//! instances are added, and extra instances help less and less.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid used to check parametric model assumptions.
const GRID_LO: f64 = 1.0;
const GRID_HI: f64 = 1000.0;
const GRID_STEP: f64 = 0.5;
/// Slack for float noise in the grid checks.
const GRID_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("instance count must be a finite value >= 1, got {0}")]
    DomainN(f64),
    #[error("model parameter `{name}` is out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("exponential model exceeds a miss rate of 1 at N = 1")]
    ExceedsUnitRange,
    #[error("empirical table must contain at least one point")]
    EmptyTable,
    #[error("empirical table has a non-positive or non-finite N: {0}")]
    BadTableN(f64),
    #[error("empirical table has a miss rate outside [0, 1]: {0}")]
    BadTableMiss(f64),
    #[error("empirical table has duplicate N = {0}")]
    DuplicateTableN(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("need at least 2 distinct N values")]
    TooFewDistinctN,
    #[error("observation has a non-positive or non-finite N: {0}")]
    BadObservationN(f64),
    #[error("observation miss rate outside [0, 1]: {0}")]
    BadObservationMiss(f64),
    #[error("all miss rates are zero; log-space fit is undefined")]
    AllZero,
    #[error("fitted parameters are out of range: {0}")]
    InvalidModel(#[from] ModelError),
    #[error("fitted model violates the working assumptions")]
    FailsAssumptions { report: Box<ValidationReport> },
}

/// Which shape `fit_miss_rate` should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVariant {
    Exponential,
    PowerLaw,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissRateModel {
    /// m0 * exp(-k * N)
    Exponential { m0: f64, k: f64 },
    /// min(1, a * N^-b)
    PowerLaw { a: f64, b: f64 },
    /// Piecewise-linear interpolation through measured (N, miss) points,
    /// clamped to the first and last point outside the table.
    Empirical { points: Vec<(f64, f64)> },
}

impl MissRateModel {
    pub fn exponential(m0: f64, k: f64) -> Result<Self, ModelError> {
        if !m0.is_finite() || m0 < 0.0 {
            return Err(ModelError::BadParameter { name: "m0", value: m0 });
        }
        if !k.is_finite() || k < 0.0 {
            return Err(ModelError::BadParameter { name: "k", value: k });
        }
        // The domain starts at N = 1 and the curve decays from there, so
        // the range stays within [0, 1] iff the value at N = 1 does.
        if m0 * (-k).exp() > 1.0 {
            return Err(ModelError::ExceedsUnitRange);
        }
        Ok(MissRateModel::Exponential { m0, k })
    }

    pub fn power_law(a: f64, b: f64) -> Result<Self, ModelError> {
        if !a.is_finite() || a < 0.0 {
            return Err(ModelError::BadParameter { name: "a", value: a });
        }
        if !b.is_finite() {
            return Err(ModelError::BadParameter { name: "b", value: b });
        }
        Ok(MissRateModel::PowerLaw { a, b })
    }

    pub fn empirical(mut points: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        for &(n, miss) in &points {
            if !n.is_finite() || n <= 0.0 {
                return Err(ModelError::BadTableN(n));
            }
            if !miss.is_finite() || !(0.0..=1.0).contains(&miss) {
                return Err(ModelError::BadTableMiss(miss));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in points.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(ModelError::DuplicateTableN(pair[0].0));
            }
        }
        Ok(MissRateModel::Empirical { points })
    }

    /// Re-checks the constructor constraints; needed after deserializing.
    pub fn check_domain(&self) -> Result<(), ModelError> {
        match self {
            MissRateModel::Exponential { m0, k } => {
                Self::exponential(*m0, *k).map(drop)
            }
            MissRateModel::PowerLaw { a, b } => Self::power_law(*a, *b).map(drop),
            MissRateModel::Empirical { points } => {
                Self::empirical(points.clone()).map(drop)
            }
        }
    }

    /// Miss rate at a fleet size of `n` (n >= 1, fractional allowed).
    pub fn evaluate(&self, n: f64) -> Result<f64, ModelError> {
        self.check_domain()?;
        if !n.is_finite() || n < 1.0 {
            return Err(ModelError::DomainN(n));
        }
        Ok(self.eval_unchecked(n))
    }

    fn eval_unchecked(&self, n: f64) -> f64 {
        match self {
            MissRateModel::Exponential { m0, k } => m0 * (-k * n).exp(),
            MissRateModel::PowerLaw { a, b } => (a * n.powf(-b)).min(1.0),
            MissRateModel::Empirical { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if n <= first.0 {
                    return first.1;
                }
                if n >= last.0 {
                    return last.1;
                }
                let idx = points.partition_point(|p| p.0 <= n);
                let (n0, m0) = points[idx - 1];
                let (n1, m1) = points[idx];
                m0 + (m1 - m0) * (n - n0) / (n1 - n0)
            }
        }
    }

    /// dM/dN at `n`. Analytic for the parametric shapes; central
    /// differences with a unit step (clamped to the domain) for tables.
    pub fn derivative(&self, n: f64) -> Result<f64, ModelError> {
        self.check_domain()?;
        if !n.is_finite() || n < 1.0 {
            return Err(ModelError::DomainN(n));
        }
        Ok(match self {
            MissRateModel::Exponential { m0, k } => -m0 * k * (-k * n).exp(),
            MissRateModel::PowerLaw { a, b } => {
                if a * n.powf(-b) >= 1.0 {
                    0.0
                } else {
                    -a * b * n.powf(-b - 1.0)
                }
            }
            MissRateModel::Empirical { .. } => {
                let lo = (n - 1.0).max(1.0);
                let hi = n + 1.0;
                (self.eval_unchecked(hi) - self.eval_unchecked(lo)) / (hi - lo)
            }
        })
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, MissRateModel::Empirical { .. })
    }

    /// Largest N in the table for Empirical models.
    pub fn table_max_n(&self) -> Option<f64> {
        match self {
            MissRateModel::Empirical { points } => points.last().map(|p| p.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub passed: bool,
    /// First N where the assumption was seen to fail, when pointwise.
    pub first_violation_at: Option<f64>,
}

impl AssumptionCheck {
    fn pass() -> Self {
        AssumptionCheck { passed: true, first_violation_at: None }
    }
    fn fail_at(n: Option<f64>) -> Self {
        AssumptionCheck { passed: false, first_violation_at: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub non_negative_with_zero_limit: AssumptionCheck,
    pub monotone_non_increasing: AssumptionCheck,
    pub diminishing_returns: AssumptionCheck,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.non_negative_with_zero_limit.passed
            && self.monotone_non_increasing.passed
            && self.diminishing_returns.passed
    }
}

/// Whether the optimizer may use this model. Parametric shapes must pass
/// all three assumptions. Measured tables only need the first two: they
/// carry their own limit (the clamped tail) and the solver falls back to a
/// grid scan when a table is not convex.
pub fn meets_optimization_assumptions(model: &MissRateModel, report: &ValidationReport) -> bool {
    if model.is_empirical() {
        report.non_negative_with_zero_limit.passed && report.monotone_non_increasing.passed
    } else {
        report.all_pass()
    }
}

/// Checks the three working assumptions, reporting each separately.
pub fn validate_model(model: &MissRateModel) -> ValidationReport {
    if model.check_domain().is_err() {
        let fail = AssumptionCheck::fail_at(None);
        return ValidationReport {
            non_negative_with_zero_limit: fail.clone(),
            monotone_non_increasing: fail.clone(),
            diminishing_returns: fail,
        };
    }
    let samples: Vec<(f64, f64)> = match model {
        MissRateModel::Empirical { points } => points.clone(),
        _ => {
            let count = ((GRID_HI - GRID_LO) / GRID_STEP) as usize + 1;
            (0..count)
                .map(|i| {
                    let n = GRID_LO + i as f64 * GRID_STEP;
                    (n, model.eval_unchecked(n))
                })
                .collect()
        }
    };

    let mut non_negative = AssumptionCheck::pass();
    for &(n, value) in &samples {
        if !(value >= 0.0) {
            non_negative = AssumptionCheck::fail_at(Some(n));
            break;
        }
    }
    // Zero limit: decided analytically for the parametric shapes. A table
    // is its own evidence; its clamped tail is data, not an assumption.
    if non_negative.passed {
        let limit_ok = match model {
            MissRateModel::Exponential { m0, k } => *m0 == 0.0 || *k > 0.0,
            MissRateModel::PowerLaw { a, b } => *a == 0.0 || *b > 0.0,
            MissRateModel::Empirical { .. } => true,
        };
        if !limit_ok {
            non_negative = AssumptionCheck::fail_at(None);
        }
    }

    let mut monotone = AssumptionCheck::pass();
    for pair in samples.windows(2) {
        if pair[1].1 > pair[0].1 + GRID_EPS {
            monotone = AssumptionCheck::fail_at(Some(pair[1].0));
            break;
        }
    }

    // Diminishing returns: successive slopes must not decrease.
    let mut convex = AssumptionCheck::pass();
    for triple in samples.windows(3) {
        let s0 = (triple[1].1 - triple[0].1) / (triple[1].0 - triple[0].0);
        let s1 = (triple[2].1 - triple[1].1) / (triple[2].0 - triple[1].0);
        if s1 < s0 - GRID_EPS {
            convex = AssumptionCheck::fail_at(Some(triple[2].0));
            break;
        }
    }

    ValidationReport {
        non_negative_with_zero_limit: non_negative,
        monotone_non_increasing: monotone,
        diminishing_returns: convex,
    }
}

/// Least squares of y on x.
fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    let slope = cov / var;
    (slope, mean_y - slope * mean_x)
}

/// Pool-adjacent-violators for a non-increasing fit, averaging runs that
/// rise against the trend.
fn isotonic_non_increasing(values: &[(f64, f64, f64)]) -> Vec<f64> {
    // (n, mean, weight) blocks; merge while an earlier block sits below a
    // later one.
    let mut blocks: Vec<(f64, f64)> = Vec::with_capacity(values.len());
    let mut sizes: Vec<usize> = Vec::with_capacity(values.len());
    for &(_, mean, weight) in values {
        blocks.push((mean, weight));
        sizes.push(1);
        while blocks.len() > 1 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 >= last.0 {
                break;
            }
            let weight = prev.1 + last.1;
            let mean = (prev.0 * prev.1 + last.0 * last.1) / weight;
            blocks.pop();
            blocks.pop();
            let merged = sizes.pop().unwrap() + sizes.pop().unwrap();
            blocks.push((mean, weight));
            sizes.push(merged);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (&(mean, _), &count) in blocks.iter().zip(&sizes) {
        out.extend(std::iter::repeat(mean).take(count));
    }
    out
}

/// Fits a model of the requested shape to (N, miss rate) observations.
///
/// Log-space regression for the parametric shapes (zero rates are dropped
/// first, since their logarithm is undefined); duplicate-N averaging plus
/// isotonic pooling for tables. The returned model always satisfies the
/// assumptions the optimizer needs; otherwise this is an error.
pub fn fit_miss_rate(
    observations: &[(f64, f64)],
    variant: FitVariant,
) -> Result<MissRateModel, FitError> {
    const MIN_OBS: usize = 3;
    if observations.len() < MIN_OBS {
        return Err(FitError::TooFewObservations { need: MIN_OBS, got: observations.len() });
    }
    for &(n, miss) in observations {
        if !n.is_finite() || n <= 0.0 {
            return Err(FitError::BadObservationN(n));
        }
        if !miss.is_finite() || !(0.0..=1.0).contains(&miss) {
            return Err(FitError::BadObservationMiss(miss));
        }
    }
    {
        let mut ns: Vec<f64> = observations.iter().map(|p| p.0).collect();
        ns.sort_by(f64::total_cmp);
        ns.dedup();
        if ns.len() < 2 {
            return Err(FitError::TooFewDistinctN);
        }
    }

    let model = match variant {
        FitVariant::Exponential | FitVariant::PowerLaw => {
            let positive: Vec<(f64, f64)> = observations
                .iter()
                .copied()
                .filter(|&(_, m)| m > 0.0)
                .collect();
            if positive.is_empty() {
                return Err(FitError::AllZero);
            }
            if positive.len() < MIN_OBS {
                return Err(FitError::TooFewObservations { need: MIN_OBS, got: positive.len() });
            }
            let mut distinct: Vec<f64> = positive.iter().map(|p| p.0).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(FitError::TooFewDistinctN);
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = positive
                .iter()
                .map(|&(n, m)| {
                    let x = if variant == FitVariant::PowerLaw { n.ln() } else { n };
                    (x, m.ln())
                })
                .unzip();
            let (slope, intercept) = linear_regression(&xs, &ys);
            if variant == FitVariant::PowerLaw {
                MissRateModel::power_law(intercept.exp(), -slope)?
            } else {
                MissRateModel::exponential(intercept.exp(), -slope)?
            }
        }
        FitVariant::Empirical => {
            // Average duplicate N, then pool non-monotone runs.
            let mut sorted = observations.to_vec();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut grouped: Vec<(f64, f64, f64)> = Vec::new();
            for (n, miss) in sorted {
                match grouped.last_mut() {
                    Some((gn, mean, weight)) if *gn == n => {
                        *mean = (*mean * *weight + miss) / (*weight + 1.0);
                        *weight += 1.0;
                    }
                    _ => grouped.push((n, miss, 1.0)),
                }
            }
            let pooled = isotonic_non_increasing(&grouped);
            let points: Vec<(f64, f64)> = grouped
                .iter()
                .zip(pooled)
                .map(|(&(n, _, _), miss)| (n, miss.clamp(0.0, 1.0)))
                .collect();
            MissRateModel::empirical(points)?
        }
    };

    let report = validate_model(&model);
    if !meets_optimization_assumptions(&model, &report) {
        return Err(FitError::FailsAssumptions { report: Box::new(report) });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_evaluate() {
        let m = MissRateModel::exponential(0.9, 0.5).unwrap();
        let v = m.evaluate(3.0).unwrap();
        assert!((v - 0.20081714).abs() < 1e-6, "got {v}");
        assert_eq!(m.evaluate(1.0).unwrap(), 0.9 * (-0.5f64).exp());
    }

    #[test]
    fn power_law_caps_at_one() {
        let m = MissRateModel::power_law(3.0, 1.0).unwrap();
        assert_eq!(m.evaluate(2.0).unwrap(), 1.0);
        assert_eq!(m.evaluate(6.0).unwrap(), 0.5);
    }

    #[test]
    fn empirical_interpolates_and_clamps() {
        let m = MissRateModel::empirical(vec![(2.0, 0.3), (1.0, 0.5)]).unwrap();
        assert!((m.evaluate(1.5).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(m.evaluate(1.0).unwrap(), 0.5);
        assert_eq!(m.evaluate(50.0).unwrap(), 0.3);
    }

    #[test]
    fn domain_below_one_rejected() {
        let m = MissRateModel::exponential(0.9, 0.5).unwrap();
        assert_eq!(m.evaluate(0.5), Err(ModelError::DomainN(0.5)));
        assert_eq!(m.derivative(0.0), Err(ModelError::DomainN(0.0)));
    }

    #[test]
    fn constructor_guards() {
        assert!(MissRateModel::exponential(-0.1, 0.5).is_err());
        assert!(MissRateModel::exponential(0.5, -0.1).is_err());
        // 2.0 * exp(-0.1) > 1 at N = 1.
        assert_eq!(
            MissRateModel::exponential(2.0, 0.1),
            Err(ModelError::ExceedsUnitRange)
        );
        // 2.0 * exp(-1.0) < 1: legal even though m0 > 1.
        assert!(MissRateModel::exponential(2.0, 1.0).is_ok());
        assert!(MissRateModel::power_law(-1.0, 1.0).is_err());
        assert!(MissRateModel::empirical(vec![]).is_err());
        assert!(MissRateModel::empirical(vec![(1.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(MissRateModel::empirical(vec![(1.0, 1.5)]).is_err());
        assert!(MissRateModel::empirical(vec![(0.0, 0.5)]).is_err());
    }

    #[test]
    fn validation_passes_well_behaved_models() {
        for m in [
            MissRateModel::exponential(0.9, 0.5).unwrap(),
            MissRateModel::power_law(0.8, 1.0).unwrap(),
            MissRateModel::empirical(vec![(1.0, 0.9), (2.0, 0.5), (4.0, 0.3)]).unwrap(),
        ] {
            let report = validate_model(&m);
            assert!(report.all_pass(), "{m:?} -> {report:?}");
        }
    }

    #[test]
    fn validation_flags_rising_table() {
        let m = MissRateModel::empirical(vec![(1.0, 0.2), (2.0, 0.5)]).unwrap();
        let report = validate_model(&m);
        assert!(!report.monotone_non_increasing.passed);
        assert_eq!(report.monotone_non_increasing.first_violation_at, Some(2.0));
        assert!(report.non_negative_with_zero_limit.passed);
    }

    #[test]
    fn validation_flags_flat_exponential() {
        let m = MissRateModel::exponential(0.5, 0.0).unwrap();
        let report = validate_model(&m);
        assert!(!report.non_negative_with_zero_limit.passed);
        assert!(report.monotone_non_increasing.passed);
        assert!(!meets_optimization_assumptions(&m, &report));
    }

    #[test]
    fn constant_table_is_acceptable() {
        let m =
            MissRateModel::empirical(vec![(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)]).unwrap();
        let report = validate_model(&m);
        assert!(meets_optimization_assumptions(&m, &report));
    }

    #[test]
    fn fit_recovers_exponential() {
        let truth = MissRateModel::exponential(0.9, 0.3).unwrap();
        let obs: Vec<(f64, f64)> = (1..=8)
            .map(|n| (n as f64, truth.evaluate(n as f64).unwrap()))
            .collect();
        match fit_miss_rate(&obs, FitVariant::Exponential).unwrap() {
            MissRateModel::Exponential { m0, k } => {
                assert!((m0 - 0.9).abs() < 1e-6, "m0 = {m0}");
                assert!((k - 0.3).abs() < 1e-6, "k = {k}");
            }
            other => panic!("wrong variant: {other:?}"),
        }
    }

    #[test]
    fn fit_recovers_power_law() {
        let truth = MissRateModel::power_law(0.8, 1.2).unwrap();
        let obs: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&n| (n, truth.evaluate(n).unwrap()))
            .collect();
        match fit_miss_rate(&obs, FitVariant::PowerLaw).unwrap() {
            MissRateModel::PowerLaw { a, b } => {
                assert!((a - 0.8).abs() < 1e-6);
                assert!((b - 1.2).abs() < 1e-6);
            }
            other => panic!("wrong variant: {other:?}"),
        }
    }

    #[test]
    fn fit_pools_non_monotone_runs() {
        let obs = [(1.0, 0.5), (2.0, 0.52), (3.0, 0.3)];
        match fit_miss_rate(&obs, FitVariant::Empirical).unwrap() {
            MissRateModel::Empirical { points } => {
                assert_eq!(points.len(), 3);
                assert!((points[0].1 - 0.51).abs() < 1e-12);
                assert!((points[1].1 - 0.51).abs() < 1e-12);
                assert_eq!(points[2].1, 0.3);
            }
            other => panic!("wrong variant: {other:?}"),
        }
    }

    #[test]
    fn fit_flat_observations() {
        let obs = [(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)];
        // A flat exponential cannot reach zero: rejected with the report.
        match fit_miss_rate(&obs, FitVariant::Exponential) {
            Err(FitError::FailsAssumptions { report }) => {
                assert!(!report.non_negative_with_zero_limit.passed);
            }
            other => panic!("expected assumption failure, got {other:?}"),
        }
        // The same data is fine as a constant table.
        assert!(fit_miss_rate(&obs, FitVariant::Empirical).is_ok());
    }

    #[test]
    fn fit_input_errors() {
        assert!(matches!(
            fit_miss_rate(&[(1.0, 0.5)], FitVariant::Exponential),
            Err(FitError::TooFewObservations { .. })
        ));
        assert_eq!(
            fit_miss_rate(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], FitVariant::Exponential),
            Err(FitError::AllZero)
        );
        assert!(matches!(
            fit_miss_rate(&[(1.0, 0.1), (1.0, 0.2), (1.0, 0.3)], FitVariant::Empirical),
            Err(FitError::TooFewDistinctN)
        ));
        assert!(matches!(
            fit_miss_rate(&[(1.0, 0.1), (2.0, 1.4), (3.0, 0.2)], FitVariant::Exponential),
            Err(FitError::BadObservationMiss(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let m = MissRateModel::exponential(0.9, 0.5).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("exponential"), "{json}");
        let back: MissRateModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn evaluate_stays_in_unit_range(m0 in 0.0..1.0f64, k in 0.0..3.0f64,
                                            n in 1.0..2000.0f64) {
                let m = MissRateModel::exponential(m0, k).unwrap();
                let v = m.evaluate(n).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }

            #[test]
            fn power_law_in_unit_range(a in 0.0..5.0f64, b in 0.0..3.0f64,
                                       n in 1.0..2000.0f64) {
                let m = MissRateModel::power_law(a, b).unwrap();
                let v = m.evaluate(n).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }

            #[test]
            fn pooled_fit_is_non_increasing(raw in proptest::collection::vec((1u32..40, 0.0..=1.0f64), 3..30)) {
                let obs: Vec<(f64, f64)> = raw.iter().map(|&(n, m)| (n as f64, m)).collect();
                let distinct = {
                    let mut ns: Vec<u32> = raw.iter().map(|p| p.0).collect();
                    ns.sort_unstable();
                    ns.dedup();
                    ns.len()
                };
                prop_assume!(distinct >= 2);
                let fitted = fit_miss_rate(&obs, FitVariant::Empirical).unwrap();
                if let MissRateModel::Empirical { points } = &fitted {
                    for pair in points.windows(2) {
                        prop_assert!(pair[1].1 <= pair[0].1 + 1e-12);
                    }
                }
            }
        }
    }
}
