//! Linear combining at the fusion center, the Gaussian detection model of the
//! fused statistic, the modified deflection coefficient and its maximizer.

use crate::error::{Error, Result};
use crate::gaussian::{q, q_inv};
use crate::model::{Scenario, SensorParams};
use crate::quantize::{quant_noise_var, QuantSpec};

/// Combining coefficients, one per sensor. Censored sensors carry exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    alpha: Vec<f64>,
}

impl FusionWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("alpha", "weights must be finite"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    /// Forces the weight of every censored sensor (zero power) to 0.
    pub fn censor(mut self, powers: &[f64]) -> Self {
        for (a, &p) in self.alpha.iter_mut().zip(powers) {
            if p <= 0.0 {
                *a = 0.0;
            }
        }
        self
    }
}

/// Mean and variance of the fused statistic under both hypotheses, plus the
/// mean separation `psi = mean_h1 - mean_h0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionMoments {
    pub mean_h0: f64,
    pub var_h0: f64,
    pub mean_h1: f64,
    pub var_h1: f64,
    pub psi: f64,
}

/// Per-sensor contribution to the fused moments.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SensorTerm {
    pub alpha: f64,
    pub mean_h0: f64,
    pub mean_h1: f64,
    pub var_h0: f64,
    pub var_h1: f64,
    pub noise_var: f64,
    pub offset: f64,
}

pub(crate) fn moments_from_terms(terms: impl IntoIterator<Item = SensorTerm>) -> FusionMoments {
    let mut m = FusionMoments {
        mean_h0: 0.0,
        var_h0: 0.0,
        mean_h1: 0.0,
        var_h1: 0.0,
        psi: 0.0,
    };
    for t in terms {
        let a2 = t.alpha * t.alpha;
        m.mean_h0 += t.alpha * (t.mean_h0 + t.offset);
        m.mean_h1 += t.alpha * (t.mean_h1 + t.offset);
        m.psi += t.alpha * (t.mean_h1 - t.mean_h0);
        m.var_h0 += a2 * (t.var_h0 + t.noise_var);
        m.var_h1 += a2 * (t.var_h1 + t.noise_var);
    }
    m
}

/// Vectors of the deflection quadratic form: `b_i = N sigma_i^2 xi_i` and
/// the diagonal of `R = 2N diag(sigma_i^4 (1 + 2 xi_i) + sigma_vi^2 / 2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionInputs {
    b: Vec<f64>,
    r_diag: Vec<f64>,
}

impl DeflectionInputs {
    pub fn new(b: Vec<f64>, r_diag: Vec<f64>) -> Result<Self> {
        if b.len() != r_diag.len() {
            return Err(Error::Usage("b and R must have equal length".into()));
        }
        if r_diag.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("R_diag", "entries must be finite and > 0"));
        }
        Ok(Self { b, r_diag })
    }

    /// Inputs for a scenario driven at `powers`, with capacity-matched noise.
    pub fn from_scenario(scenario: &Scenario, powers: &[f64]) -> Result<Self> {
        check_len(scenario, powers)?;
        let n = scenario.n() as f64;
        let (b, r) = scenario
            .sensors()
            .iter()
            .zip(powers)
            .map(|(s, &p)| {
                let s4 = s.sigma2() * s.sigma2();
                let noise = quant_noise_var(p, s.h(), s.zeta(), scenario.u());
                (
                    n * s.sigma2() * s.xi(),
                    2.0 * n * s4 * (1.0 + 2.0 * s.xi()) + noise,
                )
            })
            .unzip();
        Self::new(b, r)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn r_diag(&self) -> &[f64] {
        &self.r_diag
    }

    /// Largest achievable deflection, `sum b_i^2 / R_ii`.
    pub fn max_deflection(&self) -> f64 {
        self.b
            .iter()
            .zip(&self.r_diag)
            .map(|(b, r)| b * b / r)
            .sum()
    }
}

fn check_len(scenario: &Scenario, v: &[f64]) -> Result<()> {
    if v.len() != scenario.m() {
        return Err(Error::Usage(format!(
            "expected {} entries, got {}",
            scenario.m(),
            v.len()
        )));
    }
    Ok(())
}

/// `sum alpha_i t_i` over the sensors flagged in `transmitting`.
pub fn fuse(t_hat: &[f64], transmitting: &[bool], weights: &FusionWeights) -> Result<f64> {
    if t_hat.len() != weights.len() || transmitting.len() != weights.len() {
        return Err(Error::Usage(
            "statistics, mask and weights differ in length".into(),
        ));
    }
    let mut any = false;
    let mut sum = 0.0;
    for ((&t, &on), &a) in t_hat.iter().zip(transmitting).zip(weights.alpha()) {
        if on {
            any = true;
            sum += a * t;
        }
    }
    if !any {
        return Err(Error::DegenerateFusion);
    }
    Ok(sum)
}

/// Gaussian moments of the fused energy statistic with capacity-matched
/// quantization noise. The quantization error enters the means with offset
/// `U`, which cancels in `psi`. Censored sensors are excluded.
pub fn fusion_moments(
    scenario: &Scenario,
    weights: &FusionWeights,
    powers: &[f64],
) -> Result<FusionMoments> {
    check_len(scenario, powers)?;
    check_len(scenario, weights.alpha())?;
    let n = scenario.n() as f64;
    let u = scenario.u();
    let terms = scenario
        .sensors()
        .iter()
        .zip(powers)
        .zip(weights.alpha())
        .filter(|((_, &p), _)| p > 0.0)
        .map(|((s, &p), &alpha)| {
            let s4 = s.sigma2() * s.sigma2();
            SensorTerm {
                alpha,
                mean_h0: n * s.sigma2(),
                mean_h1: n * s.sigma2() * (1.0 + s.xi()),
                var_h0: 2.0 * n * s4,
                var_h1: 2.0 * n * s4 * (1.0 + 2.0 * s.xi()),
                noise_var: quant_noise_var(p, s.h(), s.zeta(), u),
                offset: u,
            }
        });
    Ok(moments_from_terms(terms))
}

/// Detection probability of the Gaussian threshold test at false-alarm `pfa`.
pub fn analytic_pd(moments: &FusionMoments, pfa: f64) -> f64 {
    q((q_inv(pfa) * moments.var_h0.sqrt() - moments.psi) / moments.var_h1.sqrt())
}

/// Modified deflection coefficient `(b'a)^2 / (a'Ra)`.
pub fn deflection(weights: &FusionWeights, inputs: &DeflectionInputs) -> Result<f64> {
    if weights.len() != inputs.b.len() {
        return Err(Error::Usage(
            "weights and deflection inputs differ in length".into(),
        ));
    }
    if weights.is_zero() {
        return Err(Error::Usage(
            "deflection of an all-zero weight vector".into(),
        ));
    }
    let (num, den) = weights
        .alpha()
        .iter()
        .zip(&inputs.b)
        .zip(&inputs.r_diag)
        .fold((0.0, 0.0), |(num, den), ((a, b), r)| {
            (num + a * b, den + a * a * r)
        });
    Ok(num * num / den)
}

/// Deflection-maximizing weights `alpha_i = b_i / R_ii`, unnormalized.
pub fn optimal_weights(inputs: &DeflectionInputs) -> FusionWeights {
    FusionWeights {
        alpha: inputs
            .b
            .iter()
            .zip(&inputs.r_diag)
            .map(|(b, r)| b / r)
            .collect(),
    }
}

/// Optimal weights for a scenario at `powers`, censored sensors zeroed.
pub fn optimal_weights_for(scenario: &Scenario, powers: &[f64]) -> Result<FusionWeights> {
    let inputs = DeflectionInputs::from_scenario(scenario, powers)?;
    Ok(optimal_weights(&inputs).censor(powers))
}

/// Equal combining `alpha_i = 1/sqrt(M)` over non-censored sensors.
pub fn equal_weights(m: usize, powers: &[f64]) -> FusionWeights {
    let a = 1.0 / (m as f64).sqrt();
    FusionWeights { alpha: vec![a; m] }.censor(powers)
}

/// Correlator output `sum x(n) s(n)`.
pub fn matched_filter_statistic(x: &[f64], sensor: &SensorParams) -> Result<f64> {
    if x.len() != sensor.samples() {
        return Err(Error::Usage(
            "observation length differs from signal length".into(),
        ));
    }
    if sensor.signal_energy() == 0.0 {
        return Err(Error::Usage("matched filter needs a nonzero signal".into()));
    }
    Ok(x.iter().zip(sensor.signal()).map(|(x, s)| x * s).sum())
}

/// Matched-filter combining weight `E / (sigma^2 E + sigma_v^2)` with `E`
/// the signal energy.
pub fn matched_filter_weight(sensor: &SensorParams, noise_var: f64) -> Result<f64> {
    let e = sensor.signal_energy();
    if e == 0.0 {
        return Err(Error::Usage("matched filter needs a nonzero signal".into()));
    }
    Ok(e / (sensor.sigma2() * e + noise_var))
}

pub fn matched_filter_weights(scenario: &Scenario, powers: &[f64]) -> Result<FusionWeights> {
    check_len(scenario, powers)?;
    let alpha = scenario
        .sensors()
        .iter()
        .zip(powers)
        .map(|(s, &p)| matched_filter_weight(s, quant_noise_var(p, s.h(), s.zeta(), scenario.u())))
        .collect::<Result<Vec<_>>>()?;
    Ok(FusionWeights::new(alpha)?.censor(powers))
}

/// Gaussian moments of the fused matched-filter statistic with
/// capacity-matched quantization noise. The correlator output is exactly
/// Gaussian with variance `sigma^2 E`.
pub fn matched_filter_moments(
    scenario: &Scenario,
    weights: &FusionWeights,
    powers: &[f64],
) -> Result<FusionMoments> {
    check_len(scenario, powers)?;
    check_len(scenario, weights.alpha())?;
    let u = scenario.u();
    let terms = scenario
        .sensors()
        .iter()
        .zip(powers)
        .zip(weights.alpha())
        .filter(|((_, &p), _)| p > 0.0)
        .map(|((s, &p), &alpha)| {
            let e = s.signal_energy();
            SensorTerm {
                alpha,
                mean_h0: 0.0,
                mean_h1: e,
                var_h0: s.sigma2() * e,
                var_h1: s.sigma2() * e,
                noise_var: QuantSpec::from_power(p, s.h(), s.zeta(), u).noise_var,
                offset: 0.0,
            }
        });
    Ok(moments_from_terms(terms))
}
