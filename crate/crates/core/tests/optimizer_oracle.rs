//! Pits the solver against an exhaustive integer scan of the real cost
//! function over randomized pricing/model instances. The scan knows
//! nothing about closed forms or bisection: it just evaluates every
//! admissible fleet size and keeps the cheapest.

use greenproxy_core::cost::{sla_min_instances, total_cost, CostParams};
use greenproxy_core::missrate::MissRateModel;
use greenproxy_core::optimizer::{
    cost_coefficients, solve_optimal_instances, BindingConstraint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const SCAN_CEILING: u32 = 1000;

fn base_params(rng: &mut ChaCha12Rng) -> CostParams {
    let request_rate = rng.random_range(50.0..5000.0);
    // Pin the SLA floor into [1, 50] so it lands well inside the scan.
    let sla_target = rng.random_range(1.0..50.0);
    CostParams {
        request_rate,
        period: rng.random_range(1.0..720.0),
        beta: request_rate / sla_target,
        client_link_kwh_per_request: rng.random_range(1e-4..1e-2),
        upstream_link_kwh_per_request: rng.random_range(1e-4..5e-3),
        upstream_server_kwh_per_request: rng.random_range(1e-4..5e-3),
        rec_price_per_kwh: rng.random_range(0.01..0.1),
        instance_price_per_hour: rng.random_range(0.1..30.0),
        instance_energy_kwh: 0.0,
        r: 1.0,
        r_target: 1.0,
    }
}

/// Gives the fleet a green-energy credit per instance, sized so the
/// certificate bill stays strictly positive across the whole scan range
/// (and the rental term keeps dominating, so C2 stays positive too).
fn add_bounded_credit(params: &mut CostParams, rng: &mut ChaCha12Rng) {
    let credit_ceiling = params.client_link_kwh_per_request * params.request_rate * params.period
        / (2.0 * SCAN_CEILING as f64);
    params.instance_energy_kwh = credit_ceiling * rng.random_range(0.1..1.0);
    params.r = 1.5;
    params.r_target = 1.0;
    params.instance_energy_kwh /= params.r - params.r_target;
    let (_, c2) = cost_coefficients(params);
    assert!(c2 > 0.0, "credit sized to keep the rental term dominant");
}

fn random_model(rng: &mut ChaCha12Rng) -> MissRateModel {
    if rng.random_bool(0.5) {
        MissRateModel::exponential(rng.random_range(0.3..1.0), rng.random_range(0.05..0.5))
            .unwrap()
    } else {
        // a <= 1 keeps the unit cap from ever binding on N >= 1.
        MissRateModel::power_law(rng.random_range(0.1..1.0), rng.random_range(0.3..2.0)).unwrap()
    }
}

fn brute_force(params: &CostParams, model: &MissRateModel) -> u32 {
    let lo = sla_min_instances(params).unwrap();
    let mut best = lo;
    let mut best_cost = f64::INFINITY;
    for n in lo..=SCAN_CEILING {
        let cost = total_cost(params, n, model.evaluate(n as f64).unwrap()).unwrap().usd();
        if cost < best_cost {
            best = n;
            best_cost = cost;
        }
    }
    best
}

#[test]
fn solver_matches_exhaustive_scan_on_random_instances() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0001);
    let mut checked = 0;
    while checked < 120 {
        let mut params = base_params(&mut rng);
        if checked % 2 == 1 {
            add_bounded_credit(&mut params, &mut rng);
        }
        let model = random_model(&mut rng);
        let expected = brute_force(&params, &model);
        if expected >= SCAN_CEILING - 1 {
            // The minimum sits at the scan boundary, so the scan itself is
            // not authoritative there; draw a fresh instance instead.
            continue;
        }
        let result = solve_optimal_instances(&params, &model).unwrap();
        assert_eq!(
            result.n_star, expected,
            "disagreement on instance {checked}: params {params:?} model {model:?}"
        );
        assert!(!result.bracket_exhausted);
        let n_sla = sla_min_instances(&params).unwrap();
        assert!(result.n_star >= n_sla);
        if result.binding_constraint == BindingConstraint::SlaBound {
            assert_eq!(result.n_star, n_sla);
        }
        checked += 1;
    }
}

#[test]
fn uniform_price_scaling_never_moves_the_optimum() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0002);
    for i in 0..60 {
        let mut params = base_params(&mut rng);
        if i % 2 == 1 {
            add_bounded_credit(&mut params, &mut rng);
        }
        let model = random_model(&mut rng);
        let baseline = solve_optimal_instances(&params, &model).unwrap();

        let mut scaled = params.clone();
        scaled.rec_price_per_kwh *= 3.7;
        scaled.instance_price_per_hour *= 3.7;
        let rescaled = solve_optimal_instances(&scaled, &model).unwrap();

        assert_eq!(baseline.n_star, rescaled.n_star, "instance {i}");
        assert_eq!(baseline.binding_constraint, rescaled.binding_constraint);
        let ratio = rescaled.cost_at_n_star.usd() / baseline.cost_at_n_star.usd();
        assert!((ratio - 3.7).abs() < 1e-9, "cost should scale linearly, got {ratio}");
    }
}

#[test]
fn surplus_heavy_fleets_pin_to_the_sla_floor() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0003);
    for _ in 0..40 {
        let mut params = base_params(&mut rng);
        // Make the per-instance credit worth more than the rental: every
        // added instance pays for itself, so the solver must refuse to
        // chase the rebate and stop at the smallest SLA-legal fleet.
        params.r = 2.0;
        params.r_target = 1.0;
        params.instance_energy_kwh =
            2.0 * params.instance_price_per_hour * params.period / params.rec_price_per_kwh;
        let (_, c2) = cost_coefficients(&params);
        assert!(c2 <= 0.0);
        let model = random_model(&mut rng);
        let result = solve_optimal_instances(&params, &model).unwrap();
        assert_eq!(result.binding_constraint, BindingConstraint::SlaBound);
        assert_eq!(result.n_star, sla_min_instances(&params).unwrap());
    }
}
