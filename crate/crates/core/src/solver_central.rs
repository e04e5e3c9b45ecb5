//! Centralized power allocation: the per-sensor closed form at a given
//! multiplier, the multiplier found by bisection on the budget, and a KKT
//! audit usable on the output of any solver.

use crate::error::{Error, Result};
use crate::model::{Scenario, SensorParams};
use crate::quantize::QuantSpec;

/// Nonnegative per-sensor transmit powers and the budget multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p: Vec<f64>,
    lambda0: f64,
}

impl PowerAllocation {
    pub fn new(p: Vec<f64>, lambda0: f64) -> Result<Self> {
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("p", "powers must be finite and >= 0"));
        }
        if !(lambda0.is_finite() && lambda0 >= 0.0) {
            return Err(Error::invalid("lambda0", "must be finite and >= 0"));
        }
        Ok(Self { p, lambda0 })
    }

    /// `P_t / M` to every sensor. No multiplier is associated with it.
    pub fn equal(m: usize, budget: f64) -> Self {
        Self {
            p: vec![budget / m as f64; m],
            lambda0: 0.0,
        }
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn censored(&self) -> Vec<bool> {
        self.p.iter().map(|&p| p <= 0.0).collect()
    }

    pub fn quant_specs(&self, scenario: &Scenario) -> Vec<QuantSpec> {
        scenario
            .sensors()
            .iter()
            .zip(&self.p)
            .map(|(s, &p)| QuantSpec::from_power(p, s.h(), s.zeta(), scenario.u()))
            .collect()
    }

    /// Checks feasibility against `budget` and, when the multiplier is
    /// positive, that the budget is used up to `slack_tol * budget`.
    pub fn check_budget(&self, budget: f64, slack_tol: f64) -> Result<()> {
        let total = self.total();
        if total > budget * (1.0 + slack_tol) + 1e-9 {
            return Err(Error::Usage(format!(
                "allocation uses {total} but the budget is {budget}"
            )));
        }
        if self.lambda0 > 0.0 && (total - budget).abs() > slack_tol * budget {
            return Err(Error::Usage(format!(
                "positive multiplier but budget slack {}",
                budget - total
            )));
        }
        Ok(())
    }
}

/// Split of the closed form `p = [a / sqrt(lambda0) - c]^+`.
fn closed_form_parts(sensor: &SensorParams, u: f64) -> (f64, f64) {
    let n = sensor.samples() as f64;
    let (s2, xi, g) = (sensor.sigma2(), sensor.xi(), sensor.channel_snr());
    let a = xi * u * 3f64.sqrt() / (6.0 * s2 * (1.0 + 2.0 * xi) * g.sqrt());
    let c = u * u / (6.0 * n * s2 * s2 * (1.0 + 2.0 * xi) * g) + 1.0 / g;
    (a, c)
}

/// Power maximizing the sensor's share of the Lagrangian at multiplier
/// `lambda0`:
///
/// ```text
/// [ xi U sqrt(3) / (6 sigma^2 (1+2xi) sqrt(g) sqrt(lambda0))
///   - U^2 / (6 N sigma^4 (1+2xi) g) - 1/g ]^+      g = h^2 / zeta
/// ```
///
/// A bracket of exactly zero censors the sensor.
pub fn power_closed_form(lambda0: f64, sensor: &SensorParams, u: f64) -> f64 {
    let (a, c) = closed_form_parts(sensor, u);
    let p = a / lambda0.sqrt() - c;
    if p > 0.0 {
        p
    } else {
        0.0
    }
}

/// The sensor's term of the power-allocation objective (its share of the
/// deflection at optimal weights).
pub fn sensor_objective(p: f64, sensor: &SensorParams, u: f64) -> f64 {
    let n = sensor.samples() as f64;
    let (s2, xi) = (sensor.sigma2(), sensor.xi());
    let s4 = s2 * s2;
    let noise = u * u / (3.0 * (1.0 + p * sensor.channel_snr()));
    n * n * s4 * xi * xi / (2.0 * n * s4 * (1.0 + 2.0 * xi) + noise)
}

/// Derivative of [`sensor_objective`] with respect to `p`.
pub fn sensor_objective_gradient(p: f64, sensor: &SensorParams, u: f64) -> f64 {
    let n = sensor.samples() as f64;
    let (s2, xi, g) = (sensor.sigma2(), sensor.xi(), sensor.channel_snr());
    let s4 = s2 * s2;
    let y = 1.0 + p * g;
    let den = 2.0 * n * s4 * (1.0 + 2.0 * xi) + u * u / (3.0 * y);
    n * n * s4 * xi * xi / (den * den) * (u * u * g) / (3.0 * y * y)
}

/// Sum of [`sensor_objective`] over the network.
pub fn objective(scenario: &Scenario, powers: &[f64]) -> f64 {
    scenario
        .sensors()
        .iter()
        .zip(powers)
        .map(|(s, &p)| sensor_objective(p, s, scenario.u()))
        .sum()
}

fn total_power(scenario: &Scenario, lambda0: f64) -> f64 {
    scenario
        .sensors()
        .iter()
        .map(|s| power_closed_form(lambda0, s, scenario.u()))
        .sum()
}

const BUDGET_TOL: f64 = 1e-9;

/// Allocates the scenario budget by bisection on the multiplier.
///
/// Total power is continuous and nonincreasing in the multiplier, tending
/// to infinity as it approaches zero and reaching zero for large values, so
/// the bracket `[lo, hi]` is found by halving and doubling from 1. Once the
/// active set is known the multiplier is refined in closed form,
/// `sqrt(lambda0) = sum a_i / (P_t + sum c_i)` over active sensors.
pub fn solve_centralized(scenario: &Scenario) -> Result<PowerAllocation> {
    if scenario.sensors().iter().all(|s| s.xi() == 0.0) {
        return Err(Error::NoSignal);
    }
    let budget = scenario.pt();
    let u = scenario.u();

    let mut lo = 1.0f64;
    while total_power(scenario, lo) <= budget {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Bisection(
                "no lower bracket for the multiplier".into(),
            ));
        }
    }
    let mut hi = 1.0f64;
    while total_power(scenario, hi) >= budget {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bisection(
                "no upper bracket for the multiplier".into(),
            ));
        }
    }
    for _ in 0..2000 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let total = total_power(scenario, mid);
        if (total - budget).abs() <= 1e-13 * budget {
            lo = mid;
            hi = mid;
            break;
        }
        if total > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut lambda = (lo * hi).sqrt();
    let parts: Vec<(f64, f64)> = scenario
        .sensors()
        .iter()
        .map(|s| closed_form_parts(s, u))
        .collect();
    let active: Vec<bool> = parts
        .iter()
        .map(|&(a, c)| a / lambda.sqrt() - c > 0.0)
        .collect();
    let (sum_a, sum_c) = parts
        .iter()
        .zip(&active)
        .filter(|(_, &on)| on)
        .fold((0.0, 0.0), |(sa, sc), (&(a, c), _)| (sa + a, sc + c));
    let refined = (sum_a / (budget + sum_c)).powi(2);
    let consistent = parts
        .iter()
        .zip(&active)
        .all(|(&(a, c), &on)| (a / refined.sqrt() - c > 0.0) == on);
    if consistent && refined.is_finite() && refined > 0.0 {
        lambda = refined;
    }

    let p: Vec<f64> = scenario
        .sensors()
        .iter()
        .map(|s| power_closed_form(lambda, s, u))
        .collect();
    let total: f64 = p.iter().sum();
    if (total - budget).abs() > BUDGET_TOL * budget {
        return Err(Error::Bisection(format!(
            "budget residual {} exceeds tolerance",
            total - budget
        )));
    }
    PowerAllocation::new(p, lambda)
}

/// Stationarity and complementary-slackness audit of an allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `dF_i/dp_i - lambda0` at each sensor, i.e. the stationarity
    /// expression with `mu_i = 0`.
    pub stationarity_residuals: Vec<f64>,
    /// `max(0, -residual)` for inactive sensors, 0 for active ones.
    pub implied_mu: Vec<f64>,
    pub max_abs_residual_active: f64,
    /// Largest positive residual among inactive sensors; positive values
    /// mean an idle sensor would gain from power.
    pub max_inactive_violation: f64,
    /// `|lambda0 (sum p - P_t)|`.
    pub complementary_slackness: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
}

impl KktReport {
    pub fn passes(&self, stationarity_tol: f64, slackness_tol: f64) -> bool {
        self.primal_feasible
            && self.dual_feasible
            && self.max_abs_residual_active <= stationarity_tol
            && self.max_inactive_violation <= stationarity_tol
            && self.complementary_slackness <= slackness_tol
    }
}

pub fn kkt_check(alloc: &PowerAllocation, scenario: &Scenario) -> KktReport {
    let lambda = alloc.lambda0();
    let u = scenario.u();
    let mut residuals = Vec::with_capacity(scenario.m());
    let mut implied_mu = Vec::with_capacity(scenario.m());
    let mut max_active: f64 = 0.0;
    let mut max_inactive: f64 = f64::NEG_INFINITY;
    for (s, &p) in scenario.sensors().iter().zip(alloc.powers()) {
        let r = sensor_objective_gradient(p, s, u) - lambda;
        residuals.push(r);
        if p > 0.0 {
            implied_mu.push(0.0);
            max_active = max_active.max(r.abs());
        } else {
            implied_mu.push((-r).max(0.0));
            max_inactive = max_inactive.max(r);
        }
    }
    let total = alloc.total();
    KktReport {
        stationarity_residuals: residuals,
        implied_mu,
        max_abs_residual_active: max_active,
        max_inactive_violation: max_inactive.max(0.0),
        complementary_slackness: (lambda * (total - scenario.pt())).abs(),
        primal_feasible: total <= scenario.pt() + BUDGET_TOL * scenario.pt()
            && alloc.powers().iter().all(|&p| p >= 0.0),
        dual_feasible: lambda >= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::Graph;
    use crate::model::NetworkSpec;
    use crate::solver_dist::SolverConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sensor(sigma2: f64, xi: f64, h: f64, n: usize) -> SensorParams {
        SensorParams::constant_signal(sigma2, h, 0.1, (xi * sigma2).sqrt(), n).unwrap()
    }

    fn scenario(sensors: Vec<SensorParams>, pt: f64) -> Scenario {
        let m = sensors.len();
        Scenario::new(
            sensors,
            3.0,
            pt,
            0.1,
            Graph::complete(m),
            0,
            SolverConfig::default(),
        )
        .unwrap()
    }

    fn fig1() -> Scenario {
        let spec = NetworkSpec {
            sensors: 10,
            samples: 10,
            signal_amplitude: 0.2,
            xi_a_db: Some(-4.0),
            zeta: 0.1,
            sigma2_range: (0.5, 2.0),
            channel_gain: None,
            radius: 0.5,
        };
        Scenario::generate(&spec, 3.0, 1.0, 0.1, 1, SolverConfig::default()).unwrap()
    }

    #[test]
    fn closed_form_corners() {
        let s = sensor(1.0, 0.4, 1.0, 10);
        assert_eq!(power_closed_form(1e6, &s, 3.0), 0.0);
        let z = sensor(1.0, 0.0, 1.0, 10);
        for lambda in [1e-12, 1e-6, 1.0] {
            assert_eq!(power_closed_form(lambda, &z, 3.0), 0.0);
        }
    }

    #[test]
    fn closed_form_matches_grid_search() {
        // max over p of F(p) - lambda p on a fine grid around the optimum
        let s = sensor(1.0, 0.4, 1.0, 10);
        let lambda = 1e-4;
        let p_star = power_closed_form(lambda, &s, 3.0);
        assert!(p_star > 0.0);
        let f = |p: f64| sensor_objective(p, &s, 3.0) - lambda * p;
        let (lo, hi) = (0.0, 2.0 * p_star);
        let steps = 1_000_000;
        let mut best = (lo, f(lo));
        for i in 1..=steps {
            let p = lo + (hi - lo) * i as f64 / steps as f64;
            let v = f(p);
            if v > best.1 {
                best = (p, v);
            }
        }
        // refine the grid winner with golden-section search
        let (mut a, mut b) = (
            best.0 - (hi - lo) / steps as f64,
            best.0 + (hi - lo) / steps as f64,
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let grid = 0.5 * (a + b);
        assert!(
            (grid - p_star).abs() <= 1e-6 * p_star.max(1.0),
            "grid {grid} closed form {p_star}"
        );
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let s = sensor(1.3, 0.7, 0.8, 12);
        for p in [0.0, 0.1, 1.0, 5.0] {
            let d = 1e-6;
            let fd = (sensor_objective(p + d, &s, 3.0)
                - sensor_objective((p - d).max(0.0), &s, 3.0))
                / (p + d - (p - d).max(0.0));
            let g = sensor_objective_gradient(p, &s, 3.0);
            assert!(
                (fd - g).abs() <= 1e-5 * g.abs().max(1e-8),
                "p={p} fd={fd} g={g}"
            );
        }
    }

    #[test]
    fn single_sensor_takes_budget() {
        let sc = scenario(vec![sensor(1.0, 0.4, 1.0, 10)], 1.0);
        let a = solve_centralized(&sc).unwrap();
        assert!((a.powers()[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn identical_sensors_split_evenly() {
        let sc = scenario(vec![sensor(1.0, 0.4, 0.9, 10); 5], 2.0);
        let a = solve_centralized(&sc).unwrap();
        for &p in a.powers() {
            assert!((p - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn no_signal_is_an_error() {
        let sc = scenario(vec![sensor(1.0, 0.0, 1.0, 10); 3], 1.0);
        assert!(matches!(solve_centralized(&sc), Err(Error::NoSignal)));
    }

    #[test]
    fn total_power_nonincreasing_in_multiplier() {
        let sc = fig1();
        let mut last = f64::INFINITY;
        for i in 0..=240 {
            let lambda = 10f64.powf(-8.0 + 12.0 * i as f64 / 240.0);
            let t = total_power(&sc, lambda);
            assert!(t <= last);
            last = t;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn fig1_allocation_satisfies_kkt() {
        let sc = fig1();
        let a = solve_centralized(&sc).unwrap();
        a.check_budget(sc.pt(), 1e-6).unwrap();
        let r = kkt_check(&a, &sc);
        assert!(r.passes(1e-6, 1e-9), "{r:?}");
        assert!(r.implied_mu.iter().all(|&mu| mu >= 0.0));
        // at least one sensor censored, and those have zero whole bits
        let specs = a.quant_specs(&sc);
        assert!(specs.iter().any(|q| q.censored));
        for q in specs.iter().filter(|q| q.censored) {
            assert_eq!(q.bits_int, 0);
        }
    }

    #[test]
    fn perturbation_breaks_stationarity() {
        let sc = fig1();
        let a = solve_centralized(&sc).unwrap();
        let i = a.powers().iter().position(|&p| p > 0.0).unwrap();
        let mut p = a.powers().to_vec();
        p[i] *= 1.01;
        let r = kkt_check(&PowerAllocation::new(p, a.lambda0()).unwrap(), &sc);
        assert!(r.stationarity_residuals[i].abs() > 1e-6);
    }

    #[test]
    fn idle_allocation_with_huge_multiplier() {
        let sc = fig1();
        let a = PowerAllocation::new(vec![0.0; 10], 1e12).unwrap();
        let r = kkt_check(&a, &sc);
        assert!(r.primal_feasible && r.dual_feasible);
        assert!(r.implied_mu.iter().all(|&mu| mu >= 0.0));
        assert_eq!(r.max_inactive_violation, 0.0);
    }

    #[test]
    fn beats_random_feasible_allocations() {
        let sc = fig1();
        let best = objective(&sc, solve_centralized(&sc).unwrap().powers());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..sc.m()).map(|_| -rng.random::<f64>().ln()).collect();
            let scale = rng.random::<f64>() * sc.pt() / w.iter().sum::<f64>();
            let p: Vec<f64> = w.iter().map(|x| x * scale).collect();
            assert!(objective(&sc, &p) <= best + 1e-12);
        }
    }

    #[test]
    fn worst_channel_is_censored() {
        let sc = fig1();
        let a = solve_centralized(&sc).unwrap();
        let worst = (0..sc.m())
            .min_by(|&i, &j| {
                sc.sensors()[i]
                    .channel_snr()
                    .total_cmp(&sc.sensors()[j].channel_snr())
            })
            .unwrap();
        assert_eq!(a.powers()[worst], 0.0);
    }

    proptest::proptest! {
        // Dominance in (xi, g) implies more power only while the channel is
        // below the peak of p(g) = a/sqrt(g) - c/g; beyond it a stronger
        // channel needs less power to reach the same operating point.
        #[test]
        fn dominance_below_peak(xi_b in 0.05f64..1.0, dxi in 0.0f64..0.5, g_b in 0.2f64..5.0, dg in 0.0f64..5.0, lambda in 1e-3f64..1.0) {
            let hb = (g_b * 0.1).sqrt();
            let ha = ((g_b + dg) * 0.1).sqrt();
            let b = sensor(1.0, xi_b, hb, 10);
            let a = sensor(1.0, xi_b + dxi, ha, 10);
            let (ca, cc) = closed_form_parts(&a, 3.0);
            let peak = (2.0 * cc * (g_b + dg) / (ca * (g_b + dg).sqrt()) * lambda.sqrt()).powi(2);
            proptest::prop_assume!(g_b + dg <= peak);
            proptest::prop_assert!(power_closed_form(lambda, &a, 3.0) >= power_closed_form(lambda, &b, 3.0) - 1e-12);
        }
    }
}
