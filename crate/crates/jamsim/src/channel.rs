//! Frequency-domain channel grids and sample-level multipath propagation.
//!
//! Doppler convention: a path with Doppler `f` contributes `e^{+j2π f m T_s}` across slow time,
//! so positive Doppler lands in positive Doppler bins after the slow-time DFT.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::PathParams;
use crate::grid::{Grid, UnitaryFft};
use crate::scalar::{cast, cis, Real};
use crate::waveform::{Atom, BasebandSignal, OfdmConfig, PulseContent, SymbolLayout};

const TAU: f64 = std::f64::consts::TAU;

/// Zero samples kept on each side of a propagated pulse window.
pub const WINDOW_PAD: usize = 32;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("path {index}: delay {delay_s} s is negative or not finite")]
    BadDelay { index: usize, delay_s: f64 },
    #[error("delay spread of {spread} samples overruns the {room} samples between pulses")]
    Overrun { spread: usize, room: usize },
    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error("empty path list")]
    NoPaths,
}

/// Entry q is `e^{-j2π τ q Δf}`.
pub fn steering_delay<T: Real>(cfg: &OfdmConfig, tau: f64) -> Vec<Complex<T>> {
    let step = tau * cfg.delta_f();
    (0..cfg.q).map(|q| cis(-TAU * frac(step * q as f64))).collect()
}

/// Entry m is `e^{-j2π f m T_s}`.
pub fn steering_doppler<T: Real>(cfg: &OfdmConfig, f: f64) -> Vec<Complex<T>> {
    let step = f * cfg.t_s();
    (0..cfg.m).map(|m| cis(-TAU * frac(step * m as f64))).collect()
}

fn frac(x: f64) -> f64 {
    x - x.round()
}

/// `H = Σ_p α_p d(τ_p) b^H(f_p)`, delays taken as given.
pub fn build_ctf<T: Real>(cfg: &OfdmConfig, paths: &[PathParams]) -> Grid<T> {
    let mut h = Grid::zeros(cfg.q, cfg.m);
    for p in paths {
        let d = steering_delay::<f64>(cfg, p.delay);
        let b = steering_doppler::<f64>(cfg, p.doppler);
        for m in 0..cfg.m {
            let k = p.gain * b[m].conj();
            for (q, z) in h.col_mut(m).iter_mut().enumerate() {
                *z = *z + cast::<T>(d[q] * k);
            }
        }
    }
    h
}

/// How a path's Doppler phasor evolves inside one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerPhasor {
    /// `e^{j2π f t}` sample by sample.
    #[default]
    Continuous,
    /// Held at its value at the transmitted pulse start.
    PerPulse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSpec {
    pub paths: Vec<PathParams>,
    /// Carrier offset of the transmitter relative to the receiver, Hz.
    pub cfo: f64,
    /// Transmit start offset, seconds, added to every path delay.
    pub clock_offset: f64,
    pub noise_std: f64,
    pub doppler: DopplerPhasor,
}

impl PropagationSpec {
    pub fn new(paths: Vec<PathParams>) -> Self {
        Self { paths, cfo: 0.0, clock_offset: 0.0, noise_std: 0.0, doppler: DopplerPhasor::Continuous }
    }
}

/// Per-sample std so that a path of gain `los_gain` reaches `snr_db` per demodulated subcarrier.
pub fn noise_std_for_snr(los_gain: Complex<f64>, snr_db: f64) -> f64 {
    los_gain.norm() * 10f64.powf(-snr_db / 20.0)
}

/// Smallest 2^a·3^b ≥ n.
fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1;
    while p3 < best {
        let mut v = p3;
        while v < n {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

/// Shift `src` right by `shift + frac` samples inside a buffer of `len`, fractional part
/// applied as a linear phase over signed frequencies.
fn delayed<T: Real>(
    src: &[Complex<T>],
    shift: usize,
    frac: f64,
    len: usize,
    fft: &mut Option<UnitaryFft<T>>,
) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::zero(); len];
    buf[shift..shift + src.len()].copy_from_slice(src);
    if frac != 0.0 {
        let f = fft.get_or_insert_with(|| UnitaryFft::new(len));
        f.forward(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let signed = if 2 * k < len { k as f64 } else { k as f64 - len as f64 };
            *z = *z * cis::<T>(-TAU * signed * frac / len as f64);
        }
        f.inverse(&mut buf);
    }
    buf
}

/// Fractional delay applied to each prefixed symbol as the subcarrier phase `e^{−j2πqf/Q}`, then
/// placed `shift` samples into a buffer of `len`. Unlike [`delayed`], nothing rings off the symbol edges.
fn cyclic_delayed<T: Real>(
    src: &[Complex<T>],
    layout: SymbolLayout,
    shift: usize,
    frac: f64,
    len: usize,
    fft: &mut Option<UnitaryFft<T>>,
) -> Vec<Complex<T>> {
    let (q, cp) = (layout.q, layout.q_cp);
    let f = fft.get_or_insert_with(|| UnitaryFft::new(q));
    let ramp: Vec<Complex<T>> = (0..q).map(|k| cis::<T>(-TAU * frac * k as f64 / q as f64)).collect();
    let mut buf = vec![Complex::zero(); len];
    for j in 0..layout.count {
        let at = j * (q + cp);
        let mut body = src[at + cp..at + cp + q].to_vec();
        f.forward(&mut body);
        body.iter_mut().zip(&ramp).for_each(|(z, r)| *z = *z * *r);
        f.inverse(&mut body);
        let out = &mut buf[shift + at..shift + at + cp + q];
        out[..cp].copy_from_slice(&body[q - cp..]);
        out[cp..].copy_from_slice(&body);
    }
    buf
}

/// Sum over paths of delayed, Doppler-rotated copies of `tx`, then the carrier offset and noise.
pub fn propagate<T: Real, R: Rng + ?Sized>(
    tx: &BasebandSignal<T>,
    link: &PropagationSpec,
    rng: &mut R,
) -> Result<BasebandSignal<T>, ChannelError> {
    let rx = propagate_clean(tx, link)?;
    if link.noise_std > 0.0 {
        add_noise(&rx, link.noise_std, rng)
    } else if link.noise_std == 0.0 {
        Ok(rx)
    } else {
        Err(ChannelError::BadNoise(link.noise_std))
    }
}

fn propagate_clean<T: Real>(
    tx: &BasebandSignal<T>,
    link: &PropagationSpec,
) -> Result<BasebandSignal<T>, ChannelError> {
    if link.paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let rate = tx.sample_rate;
    let t = 1.0 / rate;
    let mut shifts = Vec::with_capacity(link.paths.len());
    for (index, p) in link.paths.iter().enumerate() {
        let d = p.delay + link.clock_offset;
        if !d.is_finite() || !p.delay.is_finite() || p.delay < 0.0 {
            return Err(ChannelError::BadDelay { index, delay_s: p.delay });
        }
        let samples = d * rate;
        let whole = samples.floor();
        let mut f = samples - whole;
        let mut whole = whole as i64;
        if f < 1e-9 {
            f = 0.0;
        } else if f > 1.0 - 1e-9 {
            f = 0.0;
            whole += 1;
        }
        shifts.push((whole, f));
    }
    let lo = shifts.iter().map(|s| s.0).min().unwrap();
    let hi = shifts.iter().map(|s| s.0 + (s.1 > 0.0) as i64).max().unwrap();
    let spread = (hi - lo) as usize;
    let needed = tx.window_len + spread + 2 * WINDOW_PAD;
    let len = fast_len(needed);
    let pri = (tx.frame_starts.get(1).copied().unwrap_or(i64::MAX) - tx.frame_starts[0]).max(0) as usize;
    if tx.pulses() > 1 && spread + tx.window_len > pri {
        return Err(ChannelError::Overrun { spread, room: pri.saturating_sub(tx.window_len) });
    }
    let start0 = tx.frame_starts[0] + lo - WINDOW_PAD as i64;
    let frame_starts: Vec<i64> = tx.frame_starts.iter().map(|s| s + lo - WINDOW_PAD as i64).collect();

    // Group the input into (waveform, per-pulse weight) atoms.
    let atoms: Vec<Atom<T>> = match &tx.content {
        PulseContent::Factored(a) => a.clone(),
        PulseContent::Windows(w) => {
            let mut uniq: Vec<Atom<T>> = Vec::new();
            for (m, pulse) in w.iter().enumerate() {
                match uniq.iter_mut().find(|a| a.waveform == *pulse) {
                    Some(a) => a.weights[m] = Complex::new(T::one(), T::zero()),
                    None => {
                        let mut weights = vec![Complex::zero(); w.len()];
                        weights[m] = Complex::new(T::one(), T::zero());
                        uniq.push(Atom { waveform: pulse.clone(), weights });
                    }
                }
            }
            uniq
        }
    };

    let layout = tx.symbols.filter(|l| l.len() == tx.window_len);
    let (mut fft, mut sym_fft) = (None, None);
    let mut out = Vec::with_capacity(atoms.len() * link.paths.len());
    let t_s = |m: usize| (tx.frame_starts[m] - tx.frame_starts[0]) as f64 * t;
    for (p, &(whole, f)) in link.paths.iter().zip(&shifts) {
        let shift = (whole - lo) as usize + WINDOW_PAD;
        // Per-sample phasor inside the window, evaluated at absolute receive time.
        let ramp: Vec<Complex<T>> = (0..len)
            .map(|i| {
                let time = (start0 + i as i64) as f64 * t;
                let dop = match link.doppler {
                    DopplerPhasor::Continuous => p.doppler * time,
                    DopplerPhasor::PerPulse => p.doppler * tx.frame_starts[0] as f64 * t,
                };
                cast::<T>(p.gain) * cis::<T>(TAU * (frac(dop) + frac(link.cfo * time)))
            })
            .collect();
        for a in &atoms {
            let mut w = match layout {
                Some(l) if f != 0.0 => cyclic_delayed(&a.waveform, l, shift, f, len, &mut sym_fft),
                _ => delayed(&a.waveform, shift, f, len, &mut fft),
            };
            for (z, r) in w.iter_mut().zip(&ramp) {
                *z = *z * *r;
            }
            let weights = a
                .weights
                .iter()
                .enumerate()
                .map(|(m, &wm)| wm * cis::<T>(TAU * frac((p.doppler + link.cfo) * t_s(m))))
                .collect();
            out.push(Atom { waveform: w, weights });
        }
    }
    Ok(BasebandSignal {
        sample_rate: rate,
        origin_time: tx.origin_time,
        frame_starts,
        window_len: len,
        content: PulseContent::Factored(out),
        symbols: None,
    })
}

/// Circular white Gaussian noise of total variance `std²` on every window sample.
pub fn add_noise<T: Real, R: Rng + ?Sized>(
    signal: &BasebandSignal<T>,
    std: f64,
    rng: &mut R,
) -> Result<BasebandSignal<T>, ChannelError> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(ChannelError::BadNoise(std));
    }
    let s = std / std::f64::consts::SQRT_2;
    let windows = (0..signal.pulses())
        .map(|m| {
            let mut w = signal.pulse(m).into_owned();
            for z in w.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z = *z + Complex::new(T::of(re * s), T::of(im * s));
            }
            w
        })
        .collect();
    Ok(BasebandSignal { content: PulseContent::Windows(windows), ..signal.clone() })
}
