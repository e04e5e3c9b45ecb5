//! Empirical detection experiments: trial simulation, Gaussian threshold
//! calibration, ROC curves and sweeps over budget, false-alarm target and
//! sample count.
//!
//! Two quantizer models are available. [`Quantizer::WholeBits`] is a
//! physically realizable midrise quantizer over the statistic's range with
//! `floor` of the capacity-matched bit count. [`Quantizer::Additive`] adds
//! zero-mean uniform noise with the real-valued-bit variance and no
//! clipping, which is exactly the model behind the analytic detection
//! probability.
//!
//! Trials are grouped in blocks of [`BLOCK_TRIALS`]. Block `b` under
//! hypothesis `h` draws from ChaCha8 seeded with the scenario seed on
//! stream `2^32 + 2b + h` (H0 = 0, H1 = 1), so results do not depend on
//! the number of workers, and every scheme and every point of a sweep sees
//! the same noise realizations.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::fusion::{
    analytic_pd, equal_weights, fuse, fusion_moments, matched_filter_moments,
    matched_filter_weights, moments_from_terms, optimal_weights_for, FusionMoments, FusionWeights,
    SensorTerm,
};
use crate::gaussian::q_inv;
use crate::model::{fill_observations, Hypothesis, Scenario};
use crate::quantize::quantize_midrise;
use crate::solver_central::{solve_centralized, PowerAllocation};

pub const BLOCK_TRIALS: usize = 2048;
const STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quantizer {
    /// Midrise quantizer with `floor(bits)` levels; sensors below one
    /// whole bit stay silent.
    #[default]
    WholeBits,
    /// `T + v` with `v` uniform, zero mean, variance `U^2 / (3 (1 + p g))`.
    Additive,
}

impl Quantizer {
    pub fn name(self) -> &'static str {
        match self {
            Quantizer::WholeBits => "whole_bits",
            Quantizer::Additive => "additive",
        }
    }
}

impl FromStr for Quantizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole_bits" => Ok(Quantizer::WholeBits),
            "additive" => Ok(Quantizer::Additive),
            other => Err(Error::invalid(
                "quantizer",
                format!("unknown model `{other}` (expected whole_bits or additive)"),
            )),
        }
    }
}

/// How trials are generated: count per hypothesis, quantizer model and
/// execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trials {
    pub count: usize,
    pub quantizer: Quantizer,
    pub exec: Execution,
}

impl Trials {
    pub fn new(count: usize) -> Self {
        Self {
            count,
            quantizer: Quantizer::default(),
            exec: Execution::default(),
        }
    }

    pub fn quantizer(self, quantizer: Quantizer) -> Self {
        Self { quantizer, ..self }
    }

    pub fn exec(self, exec: Execution) -> Self {
        Self { exec, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Energy,
    MatchedFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerRule {
    Optimal,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRule {
    Optimal,
    Equal,
    MatchedFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EdOptWeightsOptPower,
    EdOptWeightsEqualPower,
    EdEqualWeightsOptPower,
    EdEqualWeightsEqualPower,
    MfdOptPower,
    MfdEqualPower,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::EdOptWeightsOptPower,
        Scheme::EdOptWeightsEqualPower,
        Scheme::EdEqualWeightsOptPower,
        Scheme::EdEqualWeightsEqualPower,
        Scheme::MfdOptPower,
        Scheme::MfdEqualPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EdOptWeightsOptPower => "ED_opt_weights_opt_power",
            Scheme::EdOptWeightsEqualPower => "ED_opt_weights_equal_power",
            Scheme::EdEqualWeightsOptPower => "ED_equal_weights_opt_power",
            Scheme::EdEqualWeightsEqualPower => "ED_equal_weights_equal_power",
            Scheme::MfdOptPower => "MFD_opt_power",
            Scheme::MfdEqualPower => "MFD_equal_power",
        }
    }

    pub fn detector(self) -> Detector {
        match self {
            Scheme::MfdOptPower | Scheme::MfdEqualPower => Detector::MatchedFilter,
            _ => Detector::Energy,
        }
    }

    pub fn power_rule(self) -> PowerRule {
        match self {
            Scheme::EdOptWeightsOptPower | Scheme::EdEqualWeightsOptPower | Scheme::MfdOptPower => {
                PowerRule::Optimal
            }
            _ => PowerRule::Equal,
        }
    }

    pub fn weight_rule(self) -> WeightRule {
        match self {
            Scheme::EdOptWeightsOptPower | Scheme::EdOptWeightsEqualPower => WeightRule::Optimal,
            Scheme::EdEqualWeightsOptPower | Scheme::EdEqualWeightsEqualPower => WeightRule::Equal,
            Scheme::MfdOptPower | Scheme::MfdEqualPower => WeightRule::MatchedFilter,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("schemes", format!("unknown scheme `{s}`")))
    }
}

/// Optimal powers come from the centralized oracle; the distributed solver
/// reaches the same allocation to within its convergence tolerance.
pub fn scheme_powers(scenario: &Scenario, rule: PowerRule) -> Result<PowerAllocation> {
    match rule {
        PowerRule::Optimal => solve_centralized(scenario),
        PowerRule::Equal => Ok(PowerAllocation::equal(scenario.m(), scenario.pt())),
    }
}

pub fn scheme_weights(
    scenario: &Scenario,
    scheme: Scheme,
    powers: &PowerAllocation,
) -> Result<FusionWeights> {
    let p = powers.powers();
    match scheme.weight_rule() {
        WeightRule::Optimal => optimal_weights_for(scenario, p),
        WeightRule::Equal => Ok(equal_weights(scenario.m(), p)),
        WeightRule::MatchedFilter => matched_filter_weights(scenario, p),
    }
}

/// Powers and weights prescribed by `scheme` for `scenario`.
pub fn design(scenario: &Scenario, scheme: Scheme) -> Result<(PowerAllocation, FusionWeights)> {
    let powers = scheme_powers(scenario, scheme.power_rule())?;
    let weights = scheme_weights(scenario, scheme, &powers)?;
    Ok((powers, weights))
}

/// Threshold at which the Gaussian H0 model is exceeded with probability `pfa`.
pub fn detection_threshold(moments: &FusionMoments, pfa: f64) -> f64 {
    moments.mean_h0 + q_inv(pfa) * moments.var_h0.sqrt()
}

/// Analytic detection probability of a scheme with capacity-matched
/// (real-valued) bit budgets.
pub fn scheme_analytic_pd(
    scenario: &Scenario,
    scheme: Scheme,
    powers: &PowerAllocation,
    weights: &FusionWeights,
    pfa: f64,
) -> Result<f64> {
    let m = match scheme.detector() {
        Detector::Energy => fusion_moments(scenario, weights, powers.powers())?,
        Detector::MatchedFilter => matched_filter_moments(scenario, weights, powers.powers())?,
    };
    if m.var_h0 <= 0.0 {
        return Ok(pfa);
    }
    Ok(analytic_pd(&m, pfa))
}

/// What the fusion center actually receives: which sensors transmit, at
/// what resolution, and the Gaussian model of the resulting fused statistic
/// used for threshold calibration.
///
/// The calibration model uses the noise variance of the chosen quantizer
/// and its zero-mean error. When no sensor transmits the fusion center has
/// no data and decides H1 with probability `pfa`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    detector: Detector,
    quantizer: Quantizer,
    transmitting: Vec<bool>,
    bits: Vec<u32>,
    /// Half-width of the additive uniform noise, per sensor.
    half_width: Vec<f64>,
    weights: FusionWeights,
    range: (f64, f64),
    model: Option<FusionMoments>,
    bits_shortfall: f64,
}

impl SamplePath {
    pub fn new(
        scenario: &Scenario,
        powers: &PowerAllocation,
        weights: &FusionWeights,
        detector: Detector,
        quantizer: Quantizer,
    ) -> Result<Self> {
        if powers.powers().len() != scenario.m() || weights.len() != scenario.m() {
            return Err(Error::Usage(
                "powers/weights do not match the scenario".into(),
            ));
        }
        if powers.powers().iter().all(|&p| p <= 0.0) {
            return Err(Error::DegenerateFusion);
        }
        let u = scenario.u();
        let specs = powers.quant_specs(scenario);
        let transmitting: Vec<bool> = specs
            .iter()
            .map(|q| match quantizer {
                Quantizer::WholeBits => q.transmits(),
                Quantizer::Additive => !q.censored,
            })
            .collect();
        let noise: Vec<f64> = specs
            .iter()
            .map(|q| match quantizer {
                Quantizer::WholeBits => q.sample_path_noise_var(u),
                Quantizer::Additive => q.noise_var,
            })
            .collect();
        let half_width = noise.iter().map(|v| (3.0 * v).sqrt()).collect();
        let bits: Vec<u32> = specs.iter().map(|q| q.bits_int).collect();
        let bits_shortfall = match quantizer {
            Quantizer::WholeBits => specs
                .iter()
                .filter(|q| !q.censored)
                .map(|q| q.bits_real - q.bits_int as f64)
                .sum(),
            Quantizer::Additive => 0.0,
        };
        let alpha: Vec<f64> = weights
            .alpha()
            .iter()
            .zip(&transmitting)
            .map(|(&a, &on)| if on { a } else { 0.0 })
            .collect();
        let weights = FusionWeights::new(alpha)?;
        let n = scenario.n() as f64;
        let terms: Vec<SensorTerm> = scenario
            .sensors()
            .iter()
            .zip(&noise)
            .zip(weights.alpha())
            .zip(&transmitting)
            .filter(|(_, &on)| on)
            .map(|(((s, &noise_var), &alpha), _)| match detector {
                Detector::Energy => {
                    let s4 = s.sigma2() * s.sigma2();
                    SensorTerm {
                        alpha,
                        mean_h0: n * s.sigma2(),
                        mean_h1: n * s.sigma2() * (1.0 + s.xi()),
                        var_h0: 2.0 * n * s4,
                        var_h1: 2.0 * n * s4 * (1.0 + 2.0 * s.xi()),
                        noise_var,
                        offset: 0.0,
                    }
                }
                Detector::MatchedFilter => {
                    let e = s.signal_energy();
                    SensorTerm {
                        alpha,
                        mean_h0: 0.0,
                        mean_h1: e,
                        var_h0: s.sigma2() * e,
                        var_h1: s.sigma2() * e,
                        noise_var,
                        offset: 0.0,
                    }
                }
            })
            .collect();
        let model = if terms.is_empty() {
            None
        } else {
            let m = moments_from_terms(terms);
            (m.var_h0 > 0.0).then_some(m)
        };
        let range = match detector {
            Detector::Energy => (0.0, 2.0 * u),
            Detector::MatchedFilter => (-u, u),
        };
        Ok(Self {
            detector,
            quantizer,
            transmitting,
            bits,
            half_width,
            weights,
            range,
            model,
            bits_shortfall,
        })
    }

    pub fn transmitting(&self) -> &[bool] {
        &self.transmitting
    }

    /// Gaussian model of the fused statistic; `None` when the fusion center
    /// falls back to a randomized decision.
    pub fn model(&self) -> Option<&FusionMoments> {
        self.model.as_ref()
    }

    pub fn threshold(&self, pfa: f64) -> f64 {
        match &self.model {
            Some(m) => detection_threshold(m, pfa),
            None => 1.0 - pfa,
        }
    }

    /// Detection probability predicted by the calibration model.
    pub fn model_pd(&self, pfa: f64) -> f64 {
        match &self.model {
            Some(m) => analytic_pd(m, pfa),
            None => pfa,
        }
    }
}

/// Fused statistics of a batch of trials under one hypothesis.
#[derive(Debug, Clone, Default)]
pub struct TrialBatch {
    pub statistics: Vec<f64>,
    /// Per-sensor count of local statistics that fell outside the
    /// quantizer range (clipped by the whole-bit quantizer).
    pub clipped: Vec<u64>,
}

impl TrialBatch {
    pub fn exceedances(&self, threshold: f64) -> u64 {
        self.statistics.iter().filter(|&&t| t > threshold).count() as u64
    }

    pub fn clip_rates(&self) -> Vec<f64> {
        let n = self.statistics.len().max(1) as f64;
        self.clipped.iter().map(|&c| c as f64 / n).collect()
    }
}

fn block_rng(seed: u64, block: usize, hypothesis: Hypothesis) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = match hypothesis {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => 1,
    };
    rng.set_stream(STREAM_BASE + 2 * block as u64 + h);
    rng
}

fn simulate_block(
    scenario: &Scenario,
    path: &SamplePath,
    hypothesis: Hypothesis,
    block: usize,
    len: usize,
) -> TrialBatch {
    let m = scenario.m();
    let mut rng = block_rng(scenario.seed(), block, hypothesis);
    let mut x = vec![0.0; scenario.n()];
    let mut t_hat = vec![0.0; m];
    let mut clipped = vec![0u64; m];
    let mut statistics = Vec::with_capacity(len);
    let (lo, hi) = path.range;
    for _ in 0..len {
        // every sensor draws its samples so noise stays aligned across allocations
        for (i, sensor) in scenario.sensors().iter().enumerate() {
            fill_observations(sensor, hypothesis, &mut rng, &mut x);
            if !path.transmitting[i] {
                t_hat[i] = 0.0;
                continue;
            }
            let t = match path.detector {
                Detector::Energy => x.iter().map(|v| v * v).sum::<f64>(),
                Detector::MatchedFilter => x.iter().zip(sensor.signal()).map(|(a, s)| a * s).sum(),
            };
            if t < lo || t > hi {
                clipped[i] += 1;
            }
            t_hat[i] = match path.quantizer {
                Quantizer::WholeBits => quantize_midrise(t, lo, hi, path.bits[i]),
                Quantizer::Additive => {
                    let v: f64 = rng.random();
                    t + (2.0 * v - 1.0) * path.half_width[i]
                }
            };
        }
        let coin: f64 = rng.random();
        let stat = match path.model {
            Some(_) => fuse(&t_hat, &path.transmitting, &path.weights).unwrap_or(0.0),
            None => coin,
        };
        statistics.push(stat);
    }
    TrialBatch {
        statistics,
        clipped,
    }
}

/// Simulates `trials` fused statistics under `hypothesis`.
pub fn simulate_fused(
    scenario: &Scenario,
    path: &SamplePath,
    hypothesis: Hypothesis,
    trials: usize,
    exec: Execution,
) -> TrialBatch {
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let parts = map_indexed(exec, blocks, |b| {
        let len = BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS);
        simulate_block(scenario, path, hypothesis, b, len)
    });
    let mut out = TrialBatch {
        statistics: Vec::with_capacity(trials),
        clipped: vec![0; scenario.m()],
    };
    for part in parts {
        out.statistics.extend(part.statistics);
        for (c, p) in out.clipped.iter_mut().zip(part.clipped) {
            *c += p;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub quantizer: Quantizer,
    /// Sensors sending at least one whole bit.
    pub transmitting: usize,
    /// True when no sensor sends a bit and decisions are randomized.
    pub randomized: bool,
    /// Sum over powered sensors of real-valued minus whole bits.
    pub bits_shortfall: f64,
    /// Per-sensor fraction of local statistics clipped under H0 and H1.
    pub clip_rate_h0: Vec<f64>,
    pub clip_rate_h1: Vec<f64>,
    /// Offset between the analytic fused H0 mean (quantization error of
    /// mean `U`) and the zero-mean error of the midrise quantizer.
    pub mean_offset: f64,
    /// Detection probability predicted by the whole-bit calibration model.
    pub pd_sample_model: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEstimate {
    pub scheme: Scheme,
    pub pt: f64,
    pub n: usize,
    pub m: usize,
    pub pfa_target: f64,
    pub pfa_hat: f64,
    pub pd_hat: f64,
    pub pd_analytic: f64,
    pub trials: usize,
    pub diagnostics: Diagnostics,
}

impl DetectionEstimate {
    /// Normal-approximation standard error of `pd_hat`.
    pub fn sigma_pd(&self) -> f64 {
        binomial_sigma(self.pd_hat, self.trials)
    }

    pub fn sigma_pfa(&self) -> f64 {
        binomial_sigma(self.pfa_hat, self.trials)
    }
}

pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Simulated fused statistics under both hypotheses for one design.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    scenario: &'a Scenario,
    scheme: Scheme,
    powers: &'a PowerAllocation,
    weights: &'a FusionWeights,
    path: SamplePath,
    h0: TrialBatch,
    h1: TrialBatch,
}

impl<'a> Experiment<'a> {
    pub fn run(
        scenario: &'a Scenario,
        powers: &'a PowerAllocation,
        weights: &'a FusionWeights,
        scheme: Scheme,
        trials: Trials,
    ) -> Result<Self> {
        if trials.count == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        let path = SamplePath::new(
            scenario,
            powers,
            weights,
            scheme.detector(),
            trials.quantizer,
        )?;
        let h0 = simulate_fused(scenario, &path, Hypothesis::H0, trials.count, trials.exec);
        let h1 = simulate_fused(scenario, &path, Hypothesis::H1, trials.count, trials.exec);
        Ok(Self {
            scenario,
            scheme,
            powers,
            weights,
            path,
            h0,
            h1,
        })
    }

    pub fn path(&self) -> &SamplePath {
        &self.path
    }

    pub fn batch(&self, hypothesis: Hypothesis) -> &TrialBatch {
        match hypothesis {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }

    /// Empirical operating point at false-alarm target `pfa`.
    pub fn estimate(&self, pfa: f64) -> Result<DetectionEstimate> {
        if !(pfa > 0.0 && pfa < 1.0) {
            return Err(Error::invalid(
                "pfa",
                format!("must lie in (0, 1), got {pfa}"),
            ));
        }
        let trials = self.h0.statistics.len();
        let thr = self.path.threshold(pfa);
        let pfa_hat = self.h0.exceedances(thr) as f64 / trials as f64;
        let pd_hat = self.h1.exceedances(thr) as f64 / trials as f64;
        let sc = self.scenario;
        let pd_analytic = scheme_analytic_pd(sc, self.scheme, self.powers, self.weights, pfa)?;
        let mean_offset = match self.scheme.detector() {
            Detector::Energy => {
                sc.u()
                    * self
                        .weights
                        .alpha()
                        .iter()
                        .zip(self.powers.powers())
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(a, _)| a)
                        .sum::<f64>()
            }
            Detector::MatchedFilter => 0.0,
        };
        Ok(DetectionEstimate {
            scheme: self.scheme,
            pt: sc.pt(),
            n: sc.n(),
            m: sc.m(),
            pfa_target: pfa,
            pfa_hat,
            pd_hat,
            pd_analytic,
            trials,
            diagnostics: Diagnostics {
                quantizer: self.path.quantizer,
                transmitting: self.path.transmitting.iter().filter(|&&t| t).count(),
                randomized: self.path.model.is_none(),
                bits_shortfall: self.path.bits_shortfall,
                clip_rate_h0: self.h0.clip_rates(),
                clip_rate_h1: self.h1.clip_rates(),
                mean_offset,
                pd_sample_model: self.path.model_pd(pfa),
            },
        })
    }
}

/// Empirical detection and false-alarm rates at the scenario's `pfa`.
pub fn run_trials(
    scenario: &Scenario,
    powers: &PowerAllocation,
    weights: &FusionWeights,
    scheme: Scheme,
    trials: Trials,
) -> Result<DetectionEstimate> {
    Experiment::run(scenario, powers, weights, scheme, trials)?.estimate(scenario.pfa())
}

/// One estimate per false-alarm target, all from one set of simulated trials.
pub fn roc_curve(
    scenario: &Scenario,
    powers: &PowerAllocation,
    weights: &FusionWeights,
    scheme: Scheme,
    pfa_grid: &[f64],
    trials: Trials,
) -> Result<Vec<DetectionEstimate>> {
    if pfa_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("pfa_grid", "must be strictly increasing"));
    }
    let exp = Experiment::run(scenario, powers, weights, scheme, trials)?;
    pfa_grid.iter().map(|&pfa| exp.estimate(pfa)).collect()
}

/// Detection at the scenario's `pfa` for every budget and scheme.
pub fn sweep_budget(
    scenario: &Scenario,
    schemes: &[Scheme],
    budgets: &[f64],
    trials: Trials,
) -> Result<Vec<DetectionEstimate>> {
    let mut out = Vec::new();
    for &scheme in schemes {
        for &pt in budgets {
            let sc = scenario.with_budget(pt)?;
            let (powers, weights) = design(&sc, scheme)?;
            out.push(run_trials(&sc, &powers, &weights, scheme, trials)?);
        }
    }
    Ok(out)
}

/// ROC points for every scheme and every sample count in `samples`.
pub fn sweep_pfa(
    scenario: &Scenario,
    schemes: &[Scheme],
    pfa_grid: &[f64],
    samples: &[usize],
    trials: Trials,
) -> Result<Vec<DetectionEstimate>> {
    let own = [scenario.n()];
    let samples = if samples.is_empty() {
        &own[..]
    } else {
        samples
    };
    let mut out = Vec::new();
    for &scheme in schemes {
        for &n in samples {
            let sc = scenario.with_samples(n)?;
            let (powers, weights) = design(&sc, scheme)?;
            out.extend(roc_curve(&sc, &powers, &weights, scheme, pfa_grid, trials)?);
        }
    }
    Ok(out)
}

/// Detection at the scenario's `pfa` for every scheme and sample count.
pub fn sweep_samples(
    scenario: &Scenario,
    schemes: &[Scheme],
    samples: &[usize],
    trials: Trials,
) -> Result<Vec<DetectionEstimate>> {
    let mut out = Vec::new();
    for &scheme in schemes {
        for &n in samples {
            let sc = scenario.with_samples(n)?;
            let (powers, weights) = design(&sc, scheme)?;
            out.push(run_trials(&sc, &powers, &weights, scheme, trials)?);
        }
    }
    Ok(out)
}

pub const RESULTS_HEADER: &str =
    "scheme,Pt,N,M,pfa_target,pfa_hat,pd_hat,pd_analytic,trials,sigma_binomial";

/// Results CSV; `sigma_binomial` is the standard error of `pd_hat`.
pub fn results_csv(rows: &[DetectionEstimate]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.pt,
            r.n,
            r.m,
            r.pfa_target,
            r.pfa_hat,
            r.pd_hat,
            r.pd_analytic,
            r.trials,
            r.sigma_pd()
        );
    }
    out
}

pub const DIAGNOSTICS_HEADER: &str =
    "scheme,Pt,N,pfa_target,quantizer,transmitting,randomized,bits_shortfall,clip_rate_h0_max,clip_rate_h1_max,mean_offset,pd_sample_model,sigma_pfa";

/// Companion diagnostics CSV, one line per results row.
pub fn diagnostics_csv(rows: &[DetectionEstimate]) -> String {
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in rows {
        let d = &r.diagnostics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.pt,
            r.n,
            r.pfa_target,
            d.quantizer.name(),
            d.transmitting,
            d.randomized,
            d.bits_shortfall,
            max(&d.clip_rate_h0),
            max(&d.clip_rate_h1),
            d.mean_offset,
            d.pd_sample_model,
            r.sigma_pfa()
        );
    }
    out
}
