//! Stage-1 receiver: lag autocorrelation, peak choice, carrier-offset estimation and correction.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cis, widen, Real};
use crate::waveform::{Atom, BasebandSignal, OfdmConfig, PulseContent};

const TAU: f64 = std::f64::consts::TAU;
/// −1 dB.
const PROMINENCE: f64 = 0.794_328_234_724_281_5;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("window of {window} samples plus lag {lag} does not fit in {len} samples")]
    Overrun { window: usize, lag: usize, len: usize },
    #[error("pulse windows are not spaced one PRI apart")]
    Spacing,
    #[error("timing window [{lo}, {hi}) holds no correlator output")]
    EmptyWindow { lo: i64, hi: i64 },
}

/// Correlator lag: one OFDM symbol (default) or one PRI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatorLag {
    #[default]
    Symbol,
    Pri,
}

impl CorrelatorLag {
    pub fn samples(self, cfg: &OfdmConfig) -> usize {
        match self {
            Self::Symbol => cfg.symbol_len(),
            Self::Pri => cfg.pri_samples(),
        }
    }

    pub fn seconds(self, cfg: &OfdmConfig) -> f64 {
        self.samples(cfg) as f64 * cfg.t()
    }
}

/// Ξ[k] for absolute start sample `start + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorOutput {
    pub start: i64,
    pub values: Vec<Complex<f64>>,
}

impl CorrelatorOutput {
    pub fn at(&self, sample: i64) -> Option<Complex<f64>> {
        usize::try_from(sample - self.start).ok().and_then(|k| self.values.get(k).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockedTo {
    Alice,
    Eve,
    Ambiguous,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentCase {
    Case1,
    Case2a,
    Case2b,
    Case3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncDecision {
    pub sync_sample: i64,
    pub cfo_estimate: f64,
    pub locked_to: LockedTo,
    pub alignment_case: Option<AlignmentCase>,
    /// Power ratio of the two largest distinct peaks, dB; infinite with a single peak.
    pub peak_margin_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncConfig {
    pub lag: CorrelatorLag,
    pub threshold_db: f64,
    /// Absolute sample range searched for the peak; `None` searches everything.
    pub timing_window: Option<(i64, i64)>,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self { lag: CorrelatorLag::Symbol, threshold_db: 3.0, timing_window: None }
    }
}

/// `Ξ[k] = Σ_{n<window} r[k+n]·conj(r[k+n+lag])`, divided by `window`.
pub fn lag_autocorr<T: Real>(samples: &[Complex<T>], window: usize, lag: usize) -> Result<Vec<Complex<f64>>, SyncError> {
    let len = samples.len();
    if window == 0 || window + lag > len {
        return Err(SyncError::Overrun { window, lag, len });
    }
    let prod: Vec<Complex<f64>> = (0..len - lag).map(|n| widen(samples[n]) * widen(samples[n + lag]).conj()).collect();
    Ok(sliding_sum(&prod, window, 1.0 / window as f64))
}

fn sliding_sum(prod: &[Complex<f64>], window: usize, norm: f64) -> Vec<Complex<f64>> {
    let mut acc: Complex<f64> = prod[..window].iter().sum();
    let mut out = Vec::with_capacity(prod.len() - window + 1);
    out.push(acc * norm);
    for k in 1..=prod.len() - window {
        acc += prod[k + window - 1] - prod[k - 1];
        out.push(acc * norm);
    }
    out
}

/// Lag correlator accumulated over every pulse of a train; normalized so a noiseless
/// unit-power path of gain α peaks at `|α|²`.
pub fn pulse_train_autocorr<T: Real>(
    cfg: &OfdmConfig,
    signal: &BasebandSignal<T>,
    lag: CorrelatorLag,
) -> Result<CorrelatorOutput, SyncError> {
    let window = cfg.symbol_len();
    let len = signal.window_len;
    let pri = cfg.pri_samples() as i64;
    if signal.frame_starts.windows(2).any(|w| w[1] - w[0] != pri) {
        return Err(SyncError::Spacing);
    }
    let pulses: Vec<Vec<Complex<f64>>> =
        (0..signal.pulses()).map(|m| signal.pulse(m).iter().map(|&z| widen(z)).collect()).collect();
    let mut acc: Vec<Complex<f64>> = Vec::new();
    let pairs;
    match lag {
        CorrelatorLag::Symbol => {
            if 2 * window > len {
                return Err(SyncError::Overrun { window, lag: window, len });
            }
            pairs = pulses.len();
            for p in &pulses {
                let prod: Vec<Complex<f64>> = (0..len - window).map(|n| p[n] * p[n + window].conj()).collect();
                add_into(&mut acc, &sliding_sum(&prod, window, 1.0));
            }
        }
        CorrelatorLag::Pri => {
            if window > len || pulses.len() < 2 {
                return Err(SyncError::Overrun { window, lag: pri as usize, len });
            }
            pairs = pulses.len() - 1;
            for w in pulses.windows(2) {
                let prod: Vec<Complex<f64>> = (0..len).map(|n| w[0][n] * w[1][n].conj()).collect();
                add_into(&mut acc, &sliding_sum(&prod, window, 1.0));
            }
        }
    }
    let norm = 1.0 / (window * pairs) as f64;
    acc.iter_mut().for_each(|z| *z *= norm);
    Ok(CorrelatorOutput { start: signal.frame_starts[0], values: acc })
}

fn add_into(acc: &mut Vec<Complex<f64>>, x: &[Complex<f64>]) {
    if acc.is_empty() {
        acc.extend_from_slice(x);
    } else {
        acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
}

/// Outcome of peak picking before the carrier estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakChoice {
    pub sync_sample: i64,
    pub ambiguous: bool,
    pub margin_db: f64,
    pub locked_to: LockedTo,
}

/// Global maximum of |Ξ| unless a second distinct local maximum lies within `threshold_db`,
/// in which case the earlier of the two wins and the choice is flagged ambiguous.
/// `labels` are ground-truth (who, arrival sample) pairs used only for scoring.
pub fn select_sync_peak(
    corr: &CorrelatorOutput,
    threshold_db: f64,
    timing_window: Option<(i64, i64)>,
    labels: &[(LockedTo, i64)],
    label_tolerance: i64,
) -> Result<PeakChoice, SyncError> {
    let n = corr.values.len() as i64;
    let (lo, hi) = match timing_window {
        Some((a, b)) => ((a - corr.start).clamp(0, n), (b - corr.start).clamp(0, n)),
        None => (0, n),
    };
    if lo >= hi {
        let (a, b) = timing_window.unwrap_or((corr.start, corr.start));
        return Err(SyncError::EmptyWindow { lo: a, hi: b });
    }
    let mag: Vec<f64> = corr.values[lo as usize..hi as usize].iter().map(|z| z.norm()).collect();
    let peaks: Vec<usize> = (0..mag.len())
        .filter(|&k| (k == 0 || mag[k] >= mag[k - 1]) && (k + 1 == mag.len() || mag[k] > mag[k + 1]))
        .collect();
    let best = peaks.iter().copied().max_by(|&a, &b| mag[a].total_cmp(&mag[b]).then(b.cmp(&a))).unwrap_or(0);
    // Ripples on the flank of the main triangle are not peaks: a rival needs a 1 dB dip
    // between itself and the maximum.
    let prominent = |k: usize| {
        let (a, b) = if k < best { (k, best) } else { (best, k) };
        let valley = mag[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        valley <= mag[k] * PROMINENCE
    };
    let second = peaks
        .iter()
        .copied()
        .filter(|&k| k.abs_diff(best) > 2 && prominent(k))
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]).then(b.cmp(&a)));
    let margin_db = match second {
        Some(k) if mag[k] > 0.0 => 10.0 * (mag[best] / mag[k]).log10(),
        _ => f64::INFINITY,
    };
    let ambiguous = margin_db < threshold_db;
    let chosen = match second {
        Some(k) if ambiguous => k.min(best),
        _ => best,
    };
    let sync_sample = corr.start + lo + chosen as i64;
    let locked_to = if ambiguous {
        LockedTo::Ambiguous
    } else {
        labels
            .iter()
            .filter(|(_, s)| (s - sync_sample).abs() <= label_tolerance)
            .min_by_key(|(_, s)| (s - sync_sample).abs())
            .map_or(LockedTo::Unknown, |(who, _)| *who)
    };
    Ok(PeakChoice { sync_sample, ambiguous, margin_db, locked_to })
}

/// `η̂ = −arg Ξ[sync] / (2π·lag)` on `(−1/(2·lag), 1/(2·lag)]`.
pub fn estimate_cfo(corr: &CorrelatorOutput, sync_sample: i64, lag_seconds: f64) -> Option<f64> {
    let xi = corr.at(sync_sample)?;
    Some(principal_cfo(-xi.arg() / (TAU * lag_seconds), lag_seconds))
}

fn principal_cfo(eta: f64, lag_seconds: f64) -> f64 {
    let span = 1.0 / lag_seconds;
    let mut x = eta - span * (eta / span).round();
    if x <= -span / 2.0 * (1.0 - 1e-12) {
        x += span;
    }
    x
}

/// Multiplies absolute sample n by `e^{−j2π η̂ n T}`.
pub fn compensate_cfo<T: Real>(signal: &BasebandSignal<T>, eta_hat: f64) -> BasebandSignal<T> {
    if eta_hat == 0.0 {
        return signal.clone();
    }
    let t = 1.0 / signal.sample_rate;
    let ramp: Vec<Complex<T>> = (0..signal.window_len).map(|i| cis(-TAU * frac(eta_hat * i as f64 * t))).collect();
    let start_phase = |s: i64| cis::<T>(-TAU * frac(eta_hat * s as f64 * t));
    let content = match &signal.content {
        PulseContent::Factored(atoms) => {
            let s0 = signal.frame_starts[0];
            let k0 = start_phase(s0);
            PulseContent::Factored(
                atoms
                    .iter()
                    .map(|a| Atom {
                        waveform: a.waveform.iter().zip(&ramp).map(|(&x, &r)| x * r * k0).collect(),
                        weights: a
                            .weights
                            .iter()
                            .zip(&signal.frame_starts)
                            .map(|(&w, &s)| w * start_phase(s - s0))
                            .collect(),
                    })
                    .collect(),
            )
        }
        PulseContent::Windows(w) => PulseContent::Windows(
            w.iter()
                .zip(&signal.frame_starts)
                .map(|(win, &s)| {
                    let k = start_phase(s);
                    win.iter().zip(&ramp).map(|(&x, &r)| x * r * k).collect()
                })
                .collect(),
        ),
    };
    BasebandSignal { content, ..signal.clone() }
}

fn frac(x: f64) -> f64 {
    x - x.round()
}

/// Partition of `eve − alice` arrival difference: `≤ −T_o`, `(−T_o, 0]`, `(0, T_o]`, `> T_o`.
pub fn classify_alignment(alice_arrival_s: f64, eve_arrival_s: f64, cfg: &OfdmConfig) -> AlignmentCase {
    let d = eve_arrival_s - alice_arrival_s;
    let t_o = cfg.t_o();
    if d <= -t_o {
        AlignmentCase::Case1
    } else if d <= 0.0 {
        AlignmentCase::Case2a
    } else if d <= t_o {
        AlignmentCase::Case2b
    } else {
        AlignmentCase::Case3
    }
}

/// Correlate, pick the peak, estimate the carrier offset.
pub fn synchronize<T: Real>(
    cfg: &OfdmConfig,
    signal: &BasebandSignal<T>,
    sync: &SyncConfig,
    labels: &[(LockedTo, i64)],
) -> Result<SyncDecision, SyncError> {
    let corr = pulse_train_autocorr(cfg, signal, sync.lag)?;
    let choice = select_sync_peak(&corr, sync.threshold_db, sync.timing_window, labels, cfg.q_cp as i64 / 2)?;
    let cfo_estimate = estimate_cfo(&corr, choice.sync_sample, sync.lag.seconds(cfg)).expect("peak inside correlator output");
    Ok(SyncDecision {
        sync_sample: choice.sync_sample,
        cfo_estimate,
        locked_to: choice.locked_to,
        alignment_case: None,
        peak_margin_db: choice.margin_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_noise, propagate, PropagationSpec};
    use crate::geometry::PathParams;
    use crate::waveform::{make_training_grid, modulate};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> OfdmConfig {
        OfdmConfig { q: 64, q_cp: 8, m: 8, pri_symbols: 6, ..OfdmConfig::default() }
    }

    fn los(gain: f64, delay_samples: f64, cfg: &OfdmConfig) -> PathParams {
        PathParams {
            gain: Complex::new(gain, 0.0),
            delay: delay_samples * cfg.t(),
            doppler: 0.0,
            angle: 0.0,
            departure: 0.0,
            is_los: true,
        }
    }

    fn received(cfg: &OfdmConfig, paths: Vec<PathParams>, cfo: f64, clock: f64) -> BasebandSignal<f64> {
        let tx = modulate(cfg, &make_training_grid::<f64>(cfg, 2)).unwrap();
        let mut link = PropagationSpec::new(paths);
        link.cfo = cfo;
        link.clock_offset = clock;
        propagate(&tx, &link, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    /// Mean power of one prefixed training symbol (close to, not exactly, 1).
    fn symbol_power(cfg: &OfdmConfig) -> f64 {
        let tx = modulate(cfg, &make_training_grid::<f64>(cfg, 2)).unwrap();
        tx.pulse(0)[..cfg.symbol_len()].iter().map(|z| z.norm_sqr()).sum::<f64>() / cfg.symbol_len() as f64
    }

    #[test]
    fn single_path_peak_and_phase() {
        let cfg = small();
        let eta = 3000.0;
        let rx = received(&cfg, vec![los(0.5, 5.0, &cfg)], eta, 0.0);
        let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Symbol).unwrap();
        let pick = select_sync_peak(&corr, 3.0, None, &[(LockedTo::Alice, 5)], 2).unwrap();
        assert_eq!(pick.sync_sample, 5);
        assert_eq!(pick.locked_to, LockedTo::Alice);
        let xi = corr.at(5).unwrap();
        assert!((xi.norm() - 0.25 * symbol_power(&cfg)).abs() < 1e-12);
        assert!((xi.arg() - -TAU * eta * cfg.t_o()).abs() < 1e-9);
        let est = estimate_cfo(&corr, 5, cfg.t_o()).unwrap();
        assert!((est - eta).abs() < 1e-6 * eta);
    }

    #[test]
    fn zero_offset_peak_is_real() {
        let cfg = small();
        let rx = received(&cfg, vec![los(1.0, 3.0, &cfg)], 0.0, 0.0);
        let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Symbol).unwrap();
        let xi = corr.at(3).unwrap();
        assert!(xi.re > 0.0 && xi.im.abs() < 1e-12);
    }

    #[test]
    fn pri_lag_correlator() {
        let cfg = small();
        let eta = 20.0;
        let rx = received(&cfg, vec![los(1.0, 3.0, &cfg)], eta, 0.0);
        let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Pri).unwrap();
        let pick = select_sync_peak(&corr, 3.0, None, &[], 0).unwrap();
        // Every shift inside the pulse matches itself one PRI later, so the peak is a plateau.
        let xi = corr.at(pick.sync_sample).unwrap();
        assert!(xi.norm() > 0.9 && xi.norm() < 1.1);
        let est = estimate_cfo(&corr, pick.sync_sample, CorrelatorLag::Pri.seconds(&cfg)).unwrap();
        assert!((est - eta).abs() < 1e-6);
    }

    #[test]
    fn aliasing_wrap() {
        let lag = 13.6e-6;
        let corr = CorrelatorOutput { start: 0, values: vec![Complex::from_polar(1.0, -TAU * (1.0 / lag) * lag)] };
        assert!(estimate_cfo(&corr, 0, lag).unwrap().abs() < 1e-6);
        let edge = CorrelatorOutput { start: 0, values: vec![Complex::new(-1.0, 0.0)] };
        assert!((estimate_cfo(&edge, 0, lag).unwrap() - 0.5 / lag).abs() < 1e-6);
    }

    #[test]
    fn stronger_later_transmitter_wins() {
        let cfg = small();
        let a = received(&cfg, vec![los(1.0, 2.0, &cfg)], 0.0, 0.0);
        // +3.01 dB of power, far enough away to form its own peak.
        let e = received(&cfg, vec![los(2f64.sqrt() * 1.0005, 2.0, &cfg)], 0.0, 150.0 * cfg.t());
        let rx = a.add(&e).unwrap();
        let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Symbol).unwrap();
        let labels = [(LockedTo::Alice, 2), (LockedTo::Eve, 152)];
        let pick = select_sync_peak(&corr, 3.0, None, &labels, 2).unwrap();
        assert_eq!(pick.locked_to, LockedTo::Eve);
        assert_eq!(pick.sync_sample, 152);
        // Narrow timing window around the expected arrival ignores the intruder.
        let narrow = select_sync_peak(&corr, 3.0, Some((0, 20)), &labels, 2).unwrap();
        assert_eq!(narrow.locked_to, LockedTo::Alice);
    }

    #[test]
    fn equal_peaks_are_ambiguous_and_earlier_wins() {
        let cfg = small();
        let a = received(&cfg, vec![los(1.0, 2.0, &cfg)], 0.0, 0.0);
        let e = received(&cfg, vec![los(1.0, 2.0, &cfg)], 0.0, 150.0 * cfg.t());
        let rx = e.add(&a).unwrap();
        let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Symbol).unwrap();
        let pick = select_sync_peak(&corr, 3.0, None, &[(LockedTo::Alice, 2), (LockedTo::Eve, 152)], 2).unwrap();
        assert!(pick.ambiguous);
        assert_eq!(pick.locked_to, LockedTo::Ambiguous);
        assert_eq!(pick.sync_sample, 2);
    }

    #[test]
    fn noise_floor_of_correlator() {
        let cfg = OfdmConfig::default();
        let cfg = OfdmConfig { m: 16, ..cfg };
        // Expected single-path peak at 30 dB SNR is |α|² with noise std |α|·10^{-1.5}.
        let alpha = 1.0;
        let std = alpha * 10f64.powf(-1.5);
        let tx = modulate(&cfg, &make_training_grid::<f32>(&cfg, 1)).unwrap();
        let mut link = PropagationSpec::new(vec![los(0.0, 0.0, &cfg)]);
        link.noise_std = std;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut above = 0;
        for _ in 0..50 {
            let rx = propagate(&tx, &link, &mut rng).unwrap();
            let corr = pulse_train_autocorr(&cfg, &rx, CorrelatorLag::Symbol).unwrap();
            let max = corr.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if max >= 0.1 * alpha * alpha {
                above += 1;
            }
        }
        assert_eq!(above, 0);
    }

    #[test]
    fn cfo_estimate_at_five_ppm_under_noise() {
        let cfg = OfdmConfig { m: 8, ..OfdmConfig::default() };
        let eta = cfg.ppm_to_hz(5.0);
        let tx = modulate(&cfg, &make_training_grid::<f32>(&cfg, 4)).unwrap();
        let mut link = PropagationSpec::new(vec![los(1e-3, 10.0, &cfg)]);
        link.cfo = eta;
        let clean = propagate(&tx, &link, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let rx = add_noise(&clean, 1e-3 * 10f64.powf(-1.5), &mut rng).unwrap();
            let d = synchronize(&cfg, &rx, &SyncConfig::default(), &[]).unwrap();
            assert_eq!(d.sync_sample, 10);
            worst = worst.max((d.cfo_estimate - eta).abs());
        }
        assert!(worst < 100.0, "{worst}");
    }

    #[test]
    fn compensation_removes_lag_phase() {
        let cfg = small();
        let eta = 5000.0;
        let rx = received(&cfg, vec![los(1.0, 4.0, &cfg)], eta, 0.0);
        for signal in [rx.clone(), rx.clone().into_windows()] {
            let fixed = compensate_cfo(&signal, eta);
            let corr = pulse_train_autocorr(&cfg, &fixed, CorrelatorLag::Symbol).unwrap();
            assert!(corr.at(4).unwrap().arg().abs() < 1e-9);
        }
        assert_eq!(compensate_cfo(&rx, 0.0), rx);
        // Partial correction leaves the difference.
        let partial = compensate_cfo(&rx, 2000.0);
        let corr = pulse_train_autocorr(&cfg, &partial, CorrelatorLag::Symbol).unwrap();
        let left = estimate_cfo(&corr, 4, cfg.t_o()).unwrap();
        assert!((left - 3000.0).abs() < 1e-6);
    }

    #[test]
    fn factored_and_windowed_compensation_agree() {
        let cfg = small();
        let rx = received(&cfg, vec![los(1.0, 4.0, &cfg)], 777.0, 0.0);
        let a = compensate_cfo(&rx, 321.0).to_dense();
        let b = compensate_cfo(&rx.clone().into_windows(), 321.0).to_dense();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn alignment_examples() {
        let cfg = OfdmConfig::default();
        let t_o = cfg.t_o();
        assert_eq!(classify_alignment(t_o, 0.0, &cfg), AlignmentCase::Case1);
        assert_eq!(classify_alignment(t_o, 1e-12, &cfg), AlignmentCase::Case2a);
        assert_eq!(classify_alignment(1e-3, 1e-3, &cfg), AlignmentCase::Case2a);
        assert_eq!(classify_alignment(1e-3, 1e-3 + 1e-9, &cfg), AlignmentCase::Case2b);
        assert_eq!(classify_alignment(0.0, t_o * 1.01, &cfg), AlignmentCase::Case3);
    }

    #[test]
    fn lag_autocorr_overrun() {
        let x = vec![Complex::new(1.0f64, 0.0); 10];
        assert!(matches!(lag_autocorr(&x, 8, 4), Err(SyncError::Overrun { .. })));
        assert_eq!(lag_autocorr(&x, 4, 4).unwrap().len(), 3);
    }

    proptest! {
        #[test]
        fn cfo_round_trip(eta in -36_000.0..36_000.0f64) {
            let cfg = small();
            let lag = cfg.t_o();
            let corr = CorrelatorOutput { start: 0, values: vec![Complex::from_polar(0.7, -TAU * eta * lag)] };
            let est = estimate_cfo(&corr, 0, lag).unwrap();
            prop_assert!((est - eta).abs() < 1e-6);
            prop_assert!(est > -0.5 / lag && est <= 0.5 / lag);
        }

        #[test]
        fn alignment_is_a_partition(d in -3.0..3.0f64) {
            let cfg = OfdmConfig::default();
            let t_o = cfg.t_o();
            let case = classify_alignment(0.0, d * t_o, &cfg);
            let want = if d * t_o <= -t_o { AlignmentCase::Case1 }
                else if d <= 0.0 { AlignmentCase::Case2a }
                else if d * t_o <= t_o { AlignmentCase::Case2b }
                else { AlignmentCase::Case3 };
            prop_assert_eq!(case, want);
        }
    }
}
