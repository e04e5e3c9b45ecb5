//! Binary hypothesis model at each sensor, the energy statistic and its
//! Gaussian moment model, plus seeded generation of heterogeneous networks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::consensus::{random_geometric_graph, Graph};
use crate::error::{Error, Result};
use crate::solver_dist::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Deterministic signal plus noise.
    H1,
}

/// Ground truth for one sensor node.
///
/// `xi` is derived from the signal so the SNR invariant
/// `xi = sum(s^2) / (N sigma2)` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorParams {
    sigma2: f64,
    xi: f64,
    h: f64,
    zeta: f64,
    signal: Vec<f64>,
}

impl SensorParams {
    pub fn new(sigma2: f64, h: f64, zeta: f64, signal: Vec<f64>) -> Result<Self> {
        positive("sigma2", sigma2)?;
        positive("h", h)?;
        positive("zeta", zeta)?;
        if signal.is_empty() {
            return Err(Error::invalid("signal", "needs at least one sample"));
        }
        if signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("signal", "samples must be finite"));
        }
        let energy: f64 = signal.iter().map(|s| s * s).sum();
        let xi = energy / (signal.len() as f64 * sigma2);
        Ok(Self {
            sigma2,
            xi,
            h,
            zeta,
            signal,
        })
    }

    /// Sensor observing a constant signal of the given amplitude over `n` samples.
    pub fn constant_signal(
        sigma2: f64,
        h: f64,
        zeta: f64,
        amplitude: f64,
        n: usize,
    ) -> Result<Self> {
        Self::new(sigma2, h, zeta, vec![amplitude; n])
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Effective observed SNR.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Channel amplitude gain to the fusion center.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Receiver noise variance at the fusion center.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn samples(&self) -> usize {
        self.signal.len()
    }

    /// Channel SNR per unit power, `h^2 / zeta`.
    pub fn channel_snr(&self) -> f64 {
        self.h * self.h / self.zeta
    }

    pub fn signal_energy(&self) -> f64 {
        self.signal.iter().map(|s| s * s).sum()
    }

    /// Copy of this sensor with every signal sample multiplied by `factor`.
    pub fn scaled_signal(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.sigma2,
            self.h,
            self.zeta,
            self.signal.iter().map(|s| s * factor).collect(),
        )
    }

    /// Copy of this sensor with the signal resampled to `n` samples of the
    /// same per-sample power pattern (constant signals stay constant).
    pub fn with_samples(&self, n: usize) -> Result<Self> {
        let signal = (0..n).map(|k| self.signal[k % self.signal.len()]).collect();
        Self::new(self.sigma2, self.h, self.zeta, signal)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

/// Mean and variance of the energy statistic under both hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticMoments {
    pub mean_h0: f64,
    pub var_h0: f64,
    pub mean_h1: f64,
    pub var_h1: f64,
}

/// Draws `N` observations `x(n) = s(n) + w(n)` (or `w(n)` under H0).
pub fn generate_observations<R: Rng + ?Sized>(
    sensor: &SensorParams,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; sensor.samples()];
    fill_observations(sensor, hypothesis, rng, &mut out);
    out
}

/// Allocation-free variant of [`generate_observations`]; `out` must hold `N` samples.
pub fn fill_observations<R: Rng + ?Sized>(
    sensor: &SensorParams,
    hypothesis: Hypothesis,
    rng: &mut R,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), sensor.samples());
    let sd = sensor.sigma2.sqrt();
    match hypothesis {
        Hypothesis::H0 => {
            for x in out.iter_mut() {
                let w: f64 = StandardNormal.sample(rng);
                *x = sd * w;
            }
        }
        Hypothesis::H1 => {
            for (x, s) in out.iter_mut().zip(&sensor.signal) {
                let w: f64 = StandardNormal.sample(rng);
                *x = s + sd * w;
            }
        }
    }
}

/// Sum of squared samples.
pub fn energy_statistic(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Usage("energy statistic of an empty sequence".into()));
    }
    Ok(x.iter().map(|v| v * v).sum())
}

/// Gaussian-approximation moments of the energy statistic.
pub fn statistic_moments(sensor: &SensorParams) -> StatisticMoments {
    let n = sensor.samples() as f64;
    let s2 = sensor.sigma2;
    let s4 = s2 * s2;
    StatisticMoments {
        mean_h0: n * s2,
        var_h0: 2.0 * n * s4,
        mean_h1: n * s2 * (1.0 + sensor.xi),
        var_h1: 2.0 * n * s4 * (1.0 + 2.0 * sensor.xi),
    }
}

/// Network-average SNR in dB, `10 log10(mean(xi))`.
pub fn average_snr_db(sensors: &[SensorParams]) -> f64 {
    let mean = sensors.iter().map(|s| s.xi).sum::<f64>() / sensors.len() as f64;
    10.0 * mean.log10()
}

/// Rescales every signal by one common factor so the network-average SNR
/// equals `target_db`. SNR ratios between sensors are preserved.
pub fn calibrate_average_snr(
    sensors: &[SensorParams],
    target_db: f64,
) -> Result<Vec<SensorParams>> {
    if sensors.is_empty() {
        return Err(Error::Usage("cannot calibrate an empty sensor list".into()));
    }
    if !target_db.is_finite() {
        return Err(Error::invalid("xi_a_db", "must be finite"));
    }
    let mean = sensors.iter().map(|s| s.xi).sum::<f64>() / sensors.len() as f64;
    if mean <= 0.0 {
        return Err(Error::Usage(
            "all signals are zero; average SNR cannot be calibrated".into(),
        ));
    }
    let target = 10f64.powf(target_db / 10.0);
    let factor = (target / mean).sqrt();
    if (factor - 1.0).abs() <= f64::EPSILON {
        return Ok(sensors.to_vec());
    }
    sensors.iter().map(|s| s.scaled_signal(factor)).collect()
}

/// Parameters for drawing a heterogeneous sensor population.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub sensors: usize,
    pub samples: usize,
    /// Pre-calibration amplitude of the constant signal seen by every sensor.
    pub signal_amplitude: f64,
    /// Target network-average SNR; `None` keeps the raw amplitude.
    pub xi_a_db: Option<f64>,
    pub zeta: f64,
    /// Observation noise variances are log-uniform on this range.
    pub sigma2_range: (f64, f64),
    /// Fixed channel gain for every sensor; `None` draws Rayleigh magnitudes.
    pub channel_gain: Option<f64>,
    /// Connection radius of the random geometric topology (unit square).
    pub radius: f64,
}

impl NetworkSpec {
    /// Draws sensors from `rng`: `M` noise variances first, then `M`
    /// channel gains. Draw order does not depend on `samples`.
    pub fn draw_sensors<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<SensorParams>> {
        let (lo, hi) = self.sigma2_range;
        positive("sigma2_min", lo)?;
        positive("sigma2_max", hi)?;
        if hi < lo {
            return Err(Error::invalid("sigma2_max", "must be >= sigma2_min"));
        }
        if self.sensors == 0 {
            return Err(Error::invalid("M", "need at least one sensor"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("N", "need at least one sample"));
        }
        let sigma2: Vec<f64> = (0..self.sensors)
            .map(|_| {
                let u: f64 = rng.random();
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            })
            .collect();
        let gains: Vec<f64> = (0..self.sensors)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let rayleigh = ((re * re + im * im) / 2.0).sqrt();
                self.channel_gain.unwrap_or(rayleigh)
            })
            .collect();
        let raw = sigma2
            .iter()
            .zip(&gains)
            .map(|(&s2, &h)| {
                SensorParams::constant_signal(s2, h, self.zeta, self.signal_amplitude, self.samples)
            })
            .collect::<Result<Vec<_>>>()?;
        match self.xi_a_db {
            Some(db) => calibrate_average_snr(&raw, db),
            None => Ok(raw),
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    sensors: Vec<SensorParams>,
    samples: usize,
    half_range: f64,
    budget: f64,
    pfa: f64,
    topology: Graph,
    seed: u64,
    solver: SolverConfig,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sensors: Vec<SensorParams>,
        half_range: f64,
        budget: f64,
        pfa: f64,
        topology: Graph,
        seed: u64,
        solver: SolverConfig,
    ) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::invalid("M", "need at least one sensor"));
        }
        let samples = sensors[0].samples();
        if sensors.iter().any(|s| s.samples() != samples) {
            return Err(Error::invalid(
                "N",
                "all sensors must share one sample count",
            ));
        }
        positive("U", half_range)?;
        positive("Pt", budget)?;
        if !(pfa > 0.0 && pfa < 1.0) {
            return Err(Error::invalid(
                "pfa",
                format!("must lie in (0, 1), got {pfa}"),
            ));
        }
        if topology.vertex_count() != sensors.len() {
            return Err(Error::Topology(format!(
                "graph has {} vertices but the network has {} sensors",
                topology.vertex_count(),
                sensors.len()
            )));
        }
        solver.validate()?;
        Ok(Self {
            sensors,
            samples,
            half_range,
            budget,
            pfa,
            topology,
            seed,
            solver,
        })
    }

    /// Draws sensors and topology from `seed` and assembles the scenario.
    ///
    /// The generator is ChaCha8 seeded with `seed` via `seed_from_u64`, on
    /// stream 0. Sensors are drawn first (see [`NetworkSpec::draw_sensors`]),
    /// then the topology.
    pub fn generate(
        spec: &NetworkSpec,
        half_range: f64,
        budget: f64,
        pfa: f64,
        seed: u64,
        solver: SolverConfig,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensors = spec.draw_sensors(&mut rng)?;
        let topology = random_geometric_graph(spec.sensors, spec.radius, &mut rng)?;
        Self::new(sensors, half_range, budget, pfa, topology, seed, solver)
    }

    pub fn sensors(&self) -> &[SensorParams] {
        &self.sensors
    }

    /// Number of sensors `M`.
    pub fn m(&self) -> usize {
        self.sensors.len()
    }

    /// Samples per sensor `N`.
    pub fn n(&self) -> usize {
        self.samples
    }

    /// Half-range `U` of the statistic domain `[0, 2U]`.
    pub fn u(&self) -> f64 {
        self.half_range
    }

    /// Total transmit power budget.
    pub fn pt(&self) -> f64 {
        self.budget
    }

    pub fn pfa(&self) -> f64 {
        self.pfa
    }

    pub fn topology(&self) -> &Graph {
        &self.topology
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        positive("Pt", budget)?;
        Ok(Self {
            budget,
            ..self.clone()
        })
    }

    pub fn with_pfa(&self, pfa: f64) -> Result<Self> {
        if !(pfa > 0.0 && pfa < 1.0) {
            return Err(Error::invalid(
                "pfa",
                format!("must lie in (0, 1), got {pfa}"),
            ));
        }
        Ok(Self {
            pfa,
            ..self.clone()
        })
    }

    /// Same network observed over `n` samples per sensor.
    pub fn with_samples(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("N", "need at least one sample"));
        }
        let sensors = self
            .sensors
            .iter()
            .map(|s| s.with_samples(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sensors,
            samples: n,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(sigma2: f64, amp: f64, n: usize) -> SensorParams {
        SensorParams::constant_signal(sigma2, 1.0, 0.1, amp, n).unwrap()
    }

    #[test]
    fn xi_follows_signal_energy() {
        let s = SensorParams::new(2.0, 1.0, 0.1, vec![1.0, -1.0, 2.0, 0.5]).unwrap();
        let want = (1.0 + 1.0 + 4.0 + 0.25) / (4.0 * 2.0);
        assert!((s.xi() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(SensorParams::new(0.0, 1.0, 0.1, vec![0.0]).is_err());
        assert!(SensorParams::new(1.0, 0.0, 0.1, vec![0.0]).is_err());
        assert!(SensorParams::new(1.0, 1.0, -0.1, vec![0.0]).is_err());
        assert!(SensorParams::new(1.0, 1.0, 0.1, vec![]).is_err());
    }

    #[test]
    fn energy_statistic_examples() {
        assert_eq!(energy_statistic(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(energy_statistic(&[1.0, -1.0, 2.0]).unwrap(), 6.0);
        assert!(matches!(energy_statistic(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn moments_examples() {
        let m = statistic_moments(&sensor(1.0, 0.0, 10));
        assert_eq!(
            (m.mean_h0, m.var_h0, m.mean_h1, m.var_h1),
            (10.0, 20.0, 10.0, 20.0)
        );

        // xi = 0.4 with sigma2 = 1: amplitude sqrt(0.4)
        let s = SensorParams::new(1.0, 1.0, 0.1, vec![0.4f64.sqrt(); 10]).unwrap();
        let m = statistic_moments(&s);
        assert!((m.mean_h1 - 14.0).abs() < 1e-12);
        assert!((m.var_h1 - 36.0).abs() < 1e-12);
        assert!((m.mean_h1 - m.mean_h0 - 10.0 * s.sigma2() * s.xi()).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_h1_matches_h0_draws() {
        let s = sensor(1.0, 0.0, 16);
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            generate_observations(&s, Hypothesis::H0, &mut a),
            generate_observations(&s, Hypothesis::H1, &mut b)
        );
    }

    #[test]
    fn h1_sample_mean_is_signal() {
        let s = sensor(1.0, 0.2, 1_000_000);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = generate_observations(&s, Hypothesis::H1, &mut rng);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!((mean - 0.2).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn energy_statistic_monte_carlo_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100_000;
        let h0 = sensor(1.0, 0.0, 10);
        let t: Vec<f64> = (0..trials)
            .map(|_| {
                energy_statistic(&generate_observations(&h0, Hypothesis::H0, &mut rng)).unwrap()
            })
            .collect();
        let mean = t.iter().sum::<f64>() / trials as f64;
        assert!((mean - 10.0).abs() < 0.1, "mean {mean}");

        let h1 = SensorParams::new(1.0, 1.0, 0.1, vec![0.4f64.sqrt(); 10]).unwrap();
        let want = statistic_moments(&h1);
        let t: Vec<f64> = (0..trials)
            .map(|_| {
                energy_statistic(&generate_observations(&h1, Hypothesis::H1, &mut rng)).unwrap()
            })
            .collect();
        let mean = t.iter().sum::<f64>() / trials as f64;
        let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!((mean / want.mean_h1 - 1.0).abs() < 0.03);
        assert!(
            (var / want.var_h1 - 1.0).abs() < 0.03,
            "var {var} want {}",
            want.var_h1
        );
    }

    #[test]
    fn calibration_hits_target_and_keeps_ratios() {
        let sensors = vec![sensor(1.0, 0.2, 10), sensor(2.0, 0.2, 10)];
        let out = calibrate_average_snr(&sensors, -4.0).unwrap();
        let mean = (out[0].xi() + out[1].xi()) / 2.0;
        assert!((mean - 0.398_107_170_553_497_3).abs() < 1e-12);
        assert!((average_snr_db(&out) + 4.0).abs() < 1e-9);
        assert!((out[0].xi() / out[1].xi() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_identity_and_zero_signal() {
        let s = sensor(1.0, 10f64.powf(-0.2), 10);
        let out = calibrate_average_snr(std::slice::from_ref(&s), -4.0).unwrap();
        for (a, b) in out[0].signal().iter().zip(s.signal()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(calibrate_average_snr(&[sensor(1.0, 0.0, 4)], -4.0).is_err());
    }

    #[test]
    fn drawn_network_is_seeded_and_calibrated() {
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
        let a = spec
            .draw_sensors(&mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = spec
            .draw_sensors(&mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
        assert!((average_snr_db(&a) + 4.0).abs() < 1e-9);
        assert!(a.iter().all(|s| (0.5..=2.0).contains(&s.sigma2())));
    }

    proptest::proptest! {
        #[test]
        fn energy_is_permutation_invariant(mut x in proptest::collection::vec(-10.0f64..10.0, 1..40), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let before = energy_statistic(&x).unwrap();
            x.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let after = energy_statistic(&x).unwrap();
            proptest::prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }
    }
}
