//! Distributed dual ascent. Every sensor updates its own power in closed
//! form from a local copy of the multiplier, the network learns the mean
//! power through average consensus, and every sensor then takes the same
//! dual step on its copy. The only value exchanged is each sensor's
//! current power.

use std::fmt::Write as _;

use crate::consensus::{Metropolis, StopRule};
use crate::error::{Error, Result};
use crate::model::{Scenario, SensorParams};
use crate::solver_central::{power_closed_form, PowerAllocation};

/// Lower floor applied to the multiplier after each dual step.
pub const LAMBDA_MIN: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `eps[k] = lambda0[k] / k`, with `eps[0] = lambda0[0]`.
    #[default]
    Harmonic,
}

impl StepRule {
    pub fn step(self, lambda0: f64, k: usize) -> f64 {
        match self {
            StepRule::Harmonic if k == 0 => lambda0,
            StepRule::Harmonic => lambda0 / k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda0_init: f64,
    /// Outer stopping threshold on the relative power step.
    pub kappa: f64,
    pub step_rule: StepRule,
    pub consensus_tol: f64,
    pub consensus_max_iter: usize,
    pub consensus_stop: StopRule,
    pub outer_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda0_init: 1e-8,
            kappa: 1e-7,
            step_rule: StepRule::Harmonic,
            consensus_tol: 1e-10,
            consensus_max_iter: 100_000,
            consensus_stop: StopRule::Local,
            outer_max_iter: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda0_init", self.lambda0_init),
            ("kappa", self.kappa),
            ("consensus_tol", self.consensus_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.consensus_max_iter == 0 {
            return Err(Error::invalid("consensus_max_iter", "must be >= 1"));
        }
        if self.outer_max_iter == 0 {
            return Err(Error::invalid("outer_max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

/// Closed-form primal step at one sensor. Uses only that sensor's own
/// parameters and its copy of the multiplier.
pub fn local_power_update(lambda0: f64, sensor: &SensorParams, u: f64) -> f64 {
    power_closed_form(lambda0, sensor, u)
}

/// Dual gradient step `lambda0 + eps (M mean_power - P_t)`, floored at
/// [`LAMBDA_MIN`].
pub fn dual_update(lambda0: f64, mean_power: f64, m: usize, budget: f64, eps: f64) -> f64 {
    (lambda0 + eps * (m as f64 * mean_power - budget)).max(LAMBDA_MIN)
}

/// One outer iteration of the distributed solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// Sensor 0's multiplier after the dual step of this iteration.
    pub lambda0: f64,
    /// Powers computed in this iteration.
    pub powers: Vec<f64>,
    pub consensus_iters: usize,
    /// `||p[k] - p[k-1]|| / ||p[k-1]||`; NaN on the first row and infinite
    /// when the previous iterate is all zero.
    pub rel_step: f64,
    /// Largest difference between two sensors' multiplier copies.
    pub lambda_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualAscentTrace {
    pub rows: Vec<TraceRow>,
}

impl DualAscentTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn total_consensus_rounds(&self) -> usize {
        self.rows.iter().map(|r| r.consensus_iters).sum()
    }

    pub fn final_rel_step(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.rel_step)
    }

    pub fn max_lambda_spread(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.lambda_spread)
            .fold(0.0, f64::max)
    }

    /// CSV with columns `k, lambda0, p_1..p_M, consensus_iters, rel_step`.
    pub fn to_csv(&self) -> String {
        let m = self.rows.first().map_or(0, |r| r.powers.len());
        let mut out = String::from("k,lambda0");
        for i in 1..=m {
            let _ = write!(out, ",p_{i}");
        }
        out.push_str(",consensus_iters,rel_step\n");
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.k, r.lambda0);
            for p in &r.powers {
                let _ = write!(out, ",{p}");
            }
            let _ = writeln!(out, ",{},{}", r.consensus_iters, r.rel_step);
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs distributed dual ascent until the relative power step is at most
/// `kappa`.
///
/// Returns the last power iterate together with the multiplier (sensor 0's
/// copy) that produced it.
pub fn solve_distributed(scenario: &Scenario) -> Result<(PowerAllocation, DualAscentTrace)> {
    let cfg = scenario.solver();
    cfg.validate()?;
    let m = scenario.m();
    let u = scenario.u();
    let budget = scenario.pt();
    let mixer = Metropolis::new(scenario.topology());

    let mut lambdas = vec![cfg.lambda0_init; m];
    let mut prev: Option<Vec<f64>> = None;
    let mut trace = DualAscentTrace::default();

    for k in 0..cfg.outer_max_iter {
        let powers: Vec<f64> = scenario
            .sensors()
            .iter()
            .zip(&lambdas)
            .map(|(s, &l)| local_power_update(l, s, u))
            .collect();
        let consensus = mixer.run(
            &powers,
            cfg.consensus_tol,
            cfg.consensus_max_iter,
            cfg.consensus_stop,
        )?;
        let used = lambdas[0];
        for (lambda, &mean) in lambdas.iter_mut().zip(&consensus.values) {
            let eps = cfg.step_rule.step(*lambda, k);
            *lambda = dual_update(*lambda, mean, m, budget, eps);
        }

        let rel_step = match &prev {
            None => f64::NAN,
            Some(q) => {
                let base = norm(q);
                if base == 0.0 {
                    f64::INFINITY
                } else {
                    let diff: Vec<f64> = powers.iter().zip(q).map(|(a, b)| a - b).collect();
                    norm(&diff) / base
                }
            }
        };
        let (lo, hi) = lambdas
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(l), hi.max(l))
            });
        trace.rows.push(TraceRow {
            k: k + 1,
            lambda0: lambdas[0],
            powers: powers.clone(),
            consensus_iters: consensus.iterations,
            rel_step,
            lambda_spread: hi - lo,
        });

        if rel_step <= cfg.kappa {
            return Ok((PowerAllocation::new(powers, used)?, trace));
        }
        prev = Some(powers);
    }
    Err(Error::DualAscentNonConvergence {
        iterations: cfg.outer_max_iter,
        last_rel_step: trace.final_rel_step(),
        trace: Box::new(trace),
    })
}
