//! OFDM sensing waveform: configuration, BPSK training grid, pulsed modulation and demodulation.
//!
//! Transforms are unitary (1/√Q both ways), so one symbol body carries the same energy
//! in time as its column does in frequency.

use std::borrow::Cow;
use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, UnitaryFft};
use crate::scalar::{cis, Real};

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
    #[error("grid is {got:?}, expected {want:?}")]
    Shape { got: (usize, usize), want: (usize, usize) },
    #[error("demodulation window [{start}, {end}) overruns buffer [{buf_start}, {buf_end})")]
    Overrun { start: i64, end: i64, buf_start: i64, buf_end: i64 },
    #[error("signals have different pulse layouts")]
    Layout,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Subcarrier count.
    pub q: usize,
    /// Cyclic-prefix length, samples.
    pub q_cp: usize,
    /// Bandwidth and sample rate, Hz.
    pub bandwidth: f64,
    pub f_c: f64,
    /// Slow-time symbol count per measurement.
    pub m: usize,
    /// Pulse repetition interval in units of T_o.
    pub pri_symbols: usize,
    /// Identical OFDM symbols sent back to back in each pulse (≥ 2 lets the receiver correlate at lag T_o).
    pub symbols_per_pulse: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self { q: 1024, q_cp: 64, bandwidth: 80e6, f_c: 5e9, m: 128, pri_symbols: 97, symbols_per_pulse: 2 }
    }
}

impl OfdmConfig {
    /// 312.5 kHz subcarrier spacing at the same bandwidth, 0.8 µs prefix and a 1.32 ms PRI.
    pub fn wide_spacing() -> Self {
        Self { q: 256, q_cp: 64, pri_symbols: 330, ..Self::default() }
    }

    /// Smallest whole number of symbols whose duration is at least `pri_s`.
    pub fn pri_symbols_for(&self, pri_s: f64) -> usize {
        (pri_s / self.t_o() - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        let bad = |s: &str| Err(WaveformError::Config(s.to_string()));
        if !self.q.is_power_of_two() || self.q < 4 {
            return bad("Q must be a power of two ≥ 4");
        }
        if self.q_cp == 0 || self.q_cp >= self.q {
            return bad("need 0 < Q_cp < Q");
        }
        if !(self.bandwidth > 0.0 && self.f_c > 0.0 && self.bandwidth.is_finite() && self.f_c.is_finite()) {
            return bad("bandwidth and carrier must be positive");
        }
        if self.m < 2 {
            return bad("need at least two slow-time symbols");
        }
        if self.symbols_per_pulse == 0 {
            return bad("a pulse carries at least one symbol");
        }
        if self.pri_symbols < self.symbols_per_pulse {
            return bad("pulse longer than the repetition interval");
        }
        Ok(())
    }

    pub fn t(&self) -> f64 {
        1.0 / self.bandwidth
    }

    pub fn delta_f(&self) -> f64 {
        self.bandwidth / self.q as f64
    }

    pub fn symbol_len(&self) -> usize {
        self.q + self.q_cp
    }

    pub fn t_o(&self) -> f64 {
        self.symbol_len() as f64 * self.t()
    }

    pub fn pri_samples(&self) -> usize {
        self.pri_symbols * self.symbol_len()
    }

    pub fn t_s(&self) -> f64 {
        self.pri_samples() as f64 * self.t()
    }

    pub fn pulse_len(&self) -> usize {
        self.symbols_per_pulse * self.symbol_len()
    }

    pub fn wavelength(&self) -> f64 {
        crate::geometry::SPEED_OF_LIGHT / self.f_c
    }

    /// Relative bistatic range per range bin, m.
    pub fn range_bin_m(&self) -> f64 {
        crate::geometry::SPEED_OF_LIGHT * self.t()
    }

    /// Doppler per slow-time bin, Hz.
    pub fn doppler_bin_hz(&self) -> f64 {
        1.0 / (self.m as f64 * self.t_s())
    }

    pub fn speed_bin_mps(&self) -> f64 {
        self.doppler_bin_hz() * self.wavelength()
    }

    pub fn ppm_to_hz(&self, ppm: f64) -> f64 {
        ppm * 1e-6 * self.f_c
    }
}

/// Standard-like ±1 training grid with identical columns.
pub fn make_training_grid<T: Real>(cfg: &OfdmConfig, seed: u64) -> Grid<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col: Vec<Complex<T>> = (0..cfg.q)
        .map(|_| if rng.gen::<bool>() { Complex::new(T::one(), T::zero()) } else { Complex::new(-T::one(), T::zero()) })
        .collect();
    Grid::from_columns(cfg.q, vec![col; cfg.m])
}

/// A pulse waveform shared by every pulse, scaled per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub waveform: Vec<Complex<T>>,
    pub weights: Vec<Complex<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseContent<T> {
    /// Pulse m is `Σ_k weights_k[m]·waveform_k`.
    Factored(Vec<Atom<T>>),
    Windows(Vec<Vec<Complex<T>>>),
}

/// Pulse train at rate B. Pulse m occupies `[frame_starts[m], frame_starts[m] + window_len)`;
/// everything outside the windows is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal<T> {
    pub sample_rate: f64,
    pub origin_time: f64,
    pub frame_starts: Vec<i64>,
    pub window_len: usize,
    pub content: PulseContent<T>,
    /// Prefixed-symbol layout of each window, when it is still intact.
    pub symbols: Option<SymbolLayout>,
}

/// `count` back-to-back symbols of `q_cp + q` samples, each prefix a copy of its body's tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolLayout {
    pub q: usize,
    pub q_cp: usize,
    pub count: usize,
}

impl SymbolLayout {
    pub fn len(&self) -> usize {
        self.count * (self.q + self.q_cp)
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate_hz: f64,
    pub origin_time_s: f64,
    pub frame_starts: Vec<i64>,
}

impl<T: Real> BasebandSignal<T> {
    pub fn pulses(&self) -> usize {
        self.frame_starts.len()
    }

    pub fn pulse(&self, m: usize) -> Cow<'_, [Complex<T>]> {
        match &self.content {
            PulseContent::Windows(w) => Cow::Borrowed(&w[m]),
            PulseContent::Factored(atoms) => {
                let mut out = vec![Complex::zero(); self.window_len];
                for a in atoms {
                    let w = a.weights[m];
                    if w.is_zero() {
                        continue;
                    }
                    for (o, &x) in out.iter_mut().zip(&a.waveform) {
                        *o = *o + x * w;
                    }
                }
                Cow::Owned(out)
            }
        }
    }

    pub fn into_windows(self) -> Self {
        match self.content {
            PulseContent::Windows(_) => self,
            PulseContent::Factored(_) => {
                let w = (0..self.pulses()).map(|m| self.pulse(m).into_owned()).collect();
                Self { content: PulseContent::Windows(w), ..self }
            }
        }
    }

    pub fn buffer_start(&self) -> i64 {
        self.frame_starts[0]
    }

    pub fn buffer_end(&self) -> i64 {
        self.frame_starts[self.pulses() - 1] + self.window_len as i64
    }

    /// Time of absolute sample index `n`.
    pub fn time_of(&self, n: i64) -> f64 {
        self.origin_time + n as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        (0..self.pulses()).map(|m| self.pulse(m).iter().map(|z| z.norm_sqr().f64()).sum::<f64>()).sum()
    }

    /// Sum of two trains with equal pulse count and spacing, on the union of their windows.
    pub fn add(&self, other: &Self) -> Result<Self, WaveformError> {
        if self.pulses() != other.pulses() || self.sample_rate != other.sample_rate || self.origin_time != other.origin_time {
            return Err(WaveformError::Layout);
        }
        let offsets: Vec<i64> = self.frame_starts.iter().zip(&other.frame_starts).map(|(a, b)| b - a).collect();
        if offsets.iter().any(|&d| d != offsets[0]) {
            return Err(WaveformError::Layout);
        }
        let d = offsets[0];
        let lo = 0.min(d);
        let hi = (self.window_len as i64).max(d + other.window_len as i64);
        let len = (hi - lo) as usize;
        let windows = (0..self.pulses())
            .map(|m| {
                let mut w = vec![Complex::zero(); len];
                for (i, &x) in self.pulse(m).iter().enumerate() {
                    w[(i as i64 - lo) as usize] = x;
                }
                for (i, &x) in other.pulse(m).iter().enumerate() {
                    let k = (i as i64 + d - lo) as usize;
                    w[k] = w[k] + x;
                }
                w
            })
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            origin_time: self.origin_time,
            frame_starts: self.frame_starts.iter().map(|s| s + lo).collect(),
            window_len: len,
            content: PulseContent::Windows(windows),
            symbols: None,
        })
    }

    /// Every window grown by `before` and `after` zero samples. Errors if windows would overlap.
    pub fn widened(&self, before: usize, after: usize) -> Result<Self, WaveformError> {
        let len = self.window_len + before + after;
        if self.frame_starts.windows(2).any(|w| ((w[1] - w[0]) as usize) < len) {
            return Err(WaveformError::Layout);
        }
        let windows = (0..self.pulses())
            .map(|m| {
                let mut w = vec![Complex::zero(); before];
                w.extend_from_slice(&self.pulse(m));
                w.resize(len, Complex::zero());
                w
            })
            .collect();
        Ok(Self {
            frame_starts: self.frame_starts.iter().map(|s| s - before as i64).collect(),
            window_len: len,
            content: PulseContent::Windows(windows),
            symbols: None,
            ..self.clone()
        })
    }

    /// Contiguous buffer from the first window start through the last window end.
    pub fn to_dense(&self) -> Vec<Complex<T>> {
        let start = self.buffer_start();
        let mut out = vec![Complex::zero(); (self.buffer_end() - start) as usize];
        for m in 0..self.pulses() {
            let off = (self.frame_starts[m] - start) as usize;
            for (i, &x) in self.pulse(m).iter().enumerate() {
                out[off + i] = out[off + i] + x;
            }
        }
        out
    }

    /// Interleaved little-endian f32 I/Q of [`to_dense`](Self::to_dense) plus a JSON sidecar.
    pub fn export_iq(&self, data_path: &Path, sidecar_path: &Path) -> Result<(), WaveformError> {
        let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| WaveformError::Io { path, source }
    };
        let mut bytes = Vec::with_capacity(8 * (self.buffer_end() - self.buffer_start()) as usize);
        for z in self.to_dense() {
            bytes.extend_from_slice(&(z.re.f64() as f32).to_le_bytes());
            bytes.extend_from_slice(&(z.im.f64() as f32).to_le_bytes());
        }
        std::fs::File::create(data_path).and_then(|mut f| f.write_all(&bytes)).map_err(io(data_path))?;
        let sidecar = IqSidecar {
            sample_rate_hz: self.sample_rate,
            origin_time_s: self.time_of(self.buffer_start()),
            frame_starts: self.frame_starts.iter().map(|s| s - self.buffer_start()).collect(),
        };
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(sidecar_path, text).map_err(io(sidecar_path))
    }
}

/// Reads an I/Q file written by [`BasebandSignal::export_iq`].
pub fn read_iq(data_path: &Path, sidecar_path: &Path) -> Result<(IqSidecar, Vec<Complex<f32>>), WaveformError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| WaveformError::Io { path, source }
    };
    let bytes = std::fs::read(data_path).map_err(io(data_path))?;
    let text = std::fs::read_to_string(sidecar_path).map_err(io(sidecar_path))?;
    let sidecar: IqSidecar = serde_json::from_str(&text).map_err(|e| WaveformError::Io {
        path: sidecar_path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            Complex::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect();
    Ok((sidecar, samples))
}

fn check_shape<T: Real>(cfg: &OfdmConfig, grid: &Grid<T>) -> Result<(), WaveformError> {
    if grid.shape() != (cfg.q, cfg.m) {
        return Err(WaveformError::Shape { got: grid.shape(), want: (cfg.q, cfg.m) });
    }
    Ok(())
}

/// One pulse from one frequency-domain column: IDFT, cyclic prefix, repeated per pulse.
pub fn pulse_from_column<T: Real>(cfg: &OfdmConfig, fft: &mut UnitaryFft<T>, column: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut body = column.to_vec();
    fft.inverse(&mut body);
    let mut symbol = Vec::with_capacity(cfg.symbol_len());
    symbol.extend_from_slice(&body[cfg.q - cfg.q_cp..]);
    symbol.extend_from_slice(&body);
    symbol.repeat(cfg.symbols_per_pulse)
}

/// Pulses start at sample 0 and repeat every T_s.
pub fn modulate<T: Real>(cfg: &OfdmConfig, grid: &Grid<T>) -> Result<BasebandSignal<T>, WaveformError> {
    cfg.validate()?;
    check_shape(cfg, grid)?;
    let mut fft = UnitaryFft::new(cfg.q);
    let uniform = (1..cfg.m).all(|m| grid.col(m) == grid.col(0));
    let content = if uniform {
        PulseContent::Factored(vec![Atom {
            waveform: pulse_from_column(cfg, &mut fft, grid.col(0)),
            weights: vec![Complex::new(T::one(), T::zero()); cfg.m],
        }])
    } else {
        PulseContent::Windows((0..cfg.m).map(|m| pulse_from_column(cfg, &mut fft, grid.col(m))).collect())
    };
    Ok(train(cfg, content))
}

/// Modulates `Σ_k column_k · weights_k[m]` without materializing each pulse.
pub fn modulate_factored<T: Real>(
    cfg: &OfdmConfig,
    terms: &[(Vec<Complex<T>>, Vec<Complex<T>>)],
) -> Result<BasebandSignal<T>, WaveformError> {
    cfg.validate()?;
    let mut fft = UnitaryFft::new(cfg.q);
    let mut atoms = Vec::with_capacity(terms.len());
    for (column, weights) in terms {
        if column.len() != cfg.q || weights.len() != cfg.m {
            return Err(WaveformError::Shape { got: (column.len(), weights.len()), want: (cfg.q, cfg.m) });
        }
        atoms.push(Atom { waveform: pulse_from_column(cfg, &mut fft, column), weights: weights.clone() });
    }
    Ok(train(cfg, PulseContent::Factored(atoms)))
}

fn train<T>(cfg: &OfdmConfig, content: PulseContent<T>) -> BasebandSignal<T> {
    BasebandSignal {
        sample_rate: cfg.bandwidth,
        origin_time: 0.0,
        frame_starts: (0..cfg.m).map(|m| (m * cfg.pri_samples()) as i64).collect(),
        window_len: cfg.pulse_len(),
        content,
        symbols: Some(SymbolLayout { q: cfg.q, q_cp: cfg.q_cp, count: cfg.symbols_per_pulse }),
    }
}

/// Demodulates with the FFT window started `backoff` samples early, inside the prefix, then
/// removes the resulting linear phase so the grid lines up with a read at `sync_sample`.
pub fn demodulate_backoff<T: Real>(
    cfg: &OfdmConfig,
    signal: &BasebandSignal<T>,
    sync_sample: i64,
    backoff: usize,
) -> Result<Grid<T>, WaveformError> {
    let mut g = demodulate(cfg, signal, sync_sample - backoff as i64)?;
    if backoff > 0 {
        let ramp: Vec<Complex<T>> =
            (0..cfg.q).map(|q| cis(std::f64::consts::TAU * ((q * backoff) % cfg.q) as f64 / cfg.q as f64)).collect();
        for m in 0..cfg.m {
            g.col_mut(m).iter_mut().zip(&ramp).for_each(|(z, r)| *z = *z * *r);
        }
    }
    Ok(g)
}

/// FFT of the first symbol body after `sync_sample + m·T_s·B + Q_cp`, for each m.
pub fn demodulate<T: Real>(cfg: &OfdmConfig, signal: &BasebandSignal<T>, sync_sample: i64) -> Result<Grid<T>, WaveformError> {
    cfg.validate()?;
    let (buf_start, buf_end) = (signal.buffer_start(), signal.buffer_end());
    let mut fft = UnitaryFft::new(cfg.q);
    let mut cols = Vec::with_capacity(cfg.m);
    for m in 0..cfg.m {
        let start = sync_sample + (m * cfg.pri_samples()) as i64;
        let end = start + cfg.symbol_len() as i64;
        if start < buf_start || end > buf_end {
            return Err(WaveformError::Overrun { start, end, buf_start, buf_end });
        }
        let mut body = vec![Complex::zero(); cfg.q];
        // Any pulse window may overlap the read; in practice only pulse m does.
        for p in 0..signal.pulses() {
            let ws = signal.frame_starts[p];
            let we = ws + signal.window_len as i64;
            let lo = (start + cfg.q_cp as i64).max(ws);
            let hi = end.min(we);
            if lo >= hi {
                continue;
            }
            let pulse = signal.pulse(p);
            for n in lo..hi {
                let k = (n - start - cfg.q_cp as i64) as usize;
                body[k] = body[k] + pulse[(n - ws) as usize];
            }
        }
        fft.forward(&mut body);
        cols.push(body);
    }
    Ok(Grid::from_columns(cfg.q, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn small() -> OfdmConfig {
        OfdmConfig { q: 64, q_cp: 8, m: 8, pri_symbols: 4, ..OfdmConfig::default() }
    }

    fn random_grid(cfg: &OfdmConfig, seed: u64) -> Grid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(cfg.q, cfg.m, |_, _| {
            Complex::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
    }

    #[test]
    fn default_config_values() {
        let c = OfdmConfig::default();
        c.validate().unwrap();
        assert!((c.delta_f() - 78_125.0).abs() < 1e-9);
        assert!((c.t_o() - 13.6e-6).abs() < 1e-15);
        assert_eq!(c.pri_samples(), 105_536);
        assert!((c.t_s() - 1.3192e-3).abs() < 1e-12);
        assert_eq!(c.pri_symbols_for(1.32e-3), 98);
        assert!((c.range_bin_m() - 3.747_405_725).abs() < 1e-8);
        let w = OfdmConfig::wide_spacing();
        w.validate().unwrap();
        assert!((w.delta_f() - 312_500.0).abs() < 1e-9);
        assert!((w.t_o() - 4e-6).abs() < 1e-15);
        assert!((w.t_s() - 1.32e-3).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(OfdmConfig { q: 1000, ..OfdmConfig::default() }.validate().is_err());
        assert!(OfdmConfig { q_cp: 0, ..OfdmConfig::default() }.validate().is_err());
        assert!(OfdmConfig { pri_symbols: 1, ..OfdmConfig::default() }.validate().is_err());
    }

    #[test]
    fn training_grid_properties() {
        let cfg = OfdmConfig::default();
        let g: Grid<f64> = make_training_grid(&cfg, 7);
        assert_eq!(g.col(0), g.col(cfg.m - 1));
        assert_eq!(g, make_training_grid(&cfg, 7));
        assert!(g.as_slice().iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
        let mean: f64 = g.col(0).iter().map(|z| z.re).sum::<f64>() / cfg.q as f64;
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn constant_column_gives_impulse() {
        let cfg = small();
        let g = Grid::from_fn(cfg.q, cfg.m, |_, _| Complex::new(1.0, 0.0));
        let s = modulate(&cfg, &g).unwrap();
        let p = s.pulse(0);
        let body = &p[cfg.q_cp..cfg.symbol_len()];
        assert!((body[0].re - (cfg.q as f64).sqrt()).abs() < 1e-12);
        assert!(body[1..].iter().all(|z| z.norm() < 1e-12));
        assert_eq!(&p[..cfg.q_cp], &body[cfg.q - cfg.q_cp..]);
    }

    #[test]
    fn single_tone_prefix_is_continuous() {
        let cfg = small();
        let g = Grid::from_fn(cfg.q, cfg.m, |q, _| if q == 5 { Complex::new(1.0, 0.0) } else { Complex::zero() });
        let p = modulate(&cfg, &g).unwrap().pulse(3).into_owned();
        let step = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * 5.0 / cfg.q as f64);
        for n in 1..cfg.symbol_len() {
            assert!((p[n] - p[n - 1] * step).norm() < 1e-12);
        }
    }

    #[test]
    fn energy_matches_between_domains() {
        let cfg = small();
        let g = random_grid(&cfg, 3);
        let s = modulate(&cfg, &g).unwrap();
        let p = s.pulse(2);
        let body: f64 = p[cfg.q_cp..cfg.symbol_len()].iter().map(|z| z.norm_sqr()).sum();
        let col: f64 = g.col(2).iter().map(|z| z.norm_sqr()).sum();
        assert!((body - col).abs() < 1e-10 * col);
        let back = demodulate(&cfg, &s, 0).unwrap();
        assert!((back.energy() - g.energy()).abs() < 1e-10 * g.energy());
    }

    #[test]
    fn sync_inside_prefix_is_a_phase_ramp() {
        let cfg = small();
        let g = random_grid(&cfg, 4);
        let s = modulate(&cfg, &g).unwrap();
        // Sampling k samples early keeps orthogonality and adds a linear phase.
        for k in 0..=cfg.q_cp as i64 {
            let padded = s.widened(cfg.q_cp, 0).unwrap();
            let r = demodulate(&cfg, &padded, -k).unwrap();
            for m in 0..cfg.m {
                for q in 0..cfg.q {
                    let ramp = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (q as f64) * (k as f64) / cfg.q as f64);
                    assert!((r.get(q, m) - g.get(q, m) * ramp).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn widened_windows_keep_samples_in_place() {
        let cfg = small();
        let s = modulate(&cfg, &random_grid(&cfg, 3)).unwrap();
        let w = s.widened(5, 7).unwrap();
        assert_eq!(w.window_len, s.window_len + 12);
        assert_eq!(w.buffer_start(), s.buffer_start() - 5);
        assert_eq!(w.to_dense()[5..5 + s.window_len], s.pulse(0)[..]);
        assert!((w.energy() - s.energy()).abs() < 1e-12 * s.energy());
        assert!(matches!(s.widened(cfg.pri_samples(), 0), Err(WaveformError::Layout)));
    }

    #[test]
    fn sync_beyond_prefix_breaks_orthogonality() {
        let cfg = OfdmConfig { symbols_per_pulse: 1, ..small() };
        let g: Grid<f64> = make_training_grid(&cfg, 9);
        let s = modulate(&cfg, &g).unwrap().widened(64, 0).unwrap();
        let evm = |k: i64| {
            let r = demodulate(&cfg, &s, k).unwrap();
            // Best single-phase-ramp fit residual per column.
            let ramp = |q: usize| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (q as f64) * (k as f64) / cfg.q as f64);
            let fit = Grid::from_fn(cfg.q, cfg.m, |q, m| g.get(q, m) * ramp(q));
            r.rel_error(&fit)
        };
        assert!(evm(-4) < 1e-9);
        assert!(evm(-12) > 0.05);
        assert!(evm(-20) > evm(-12));
    }

    #[test]
    fn demodulate_overrun() {
        let cfg = small();
        let s = modulate(&cfg, &random_grid(&cfg, 1)).unwrap();
        assert!(matches!(demodulate(&cfg, &s, -1), Err(WaveformError::Overrun { .. })));
    }

    #[test]
    fn factored_and_windowed_agree() {
        let cfg = small();
        let a: Vec<Complex<f64>> = random_grid(&cfg, 5).col(0).to_vec();
        let b: Vec<Complex<f64>> = random_grid(&cfg, 6).col(0).to_vec();
        let wa: Vec<_> = (0..cfg.m).map(|m| Complex::new(1.0, m as f64)).collect();
        let wb: Vec<_> = (0..cfg.m).map(|m| Complex::from_polar(0.5, m as f64)).collect();
        let f = modulate_factored(&cfg, &[(a.clone(), wa.clone()), (b.clone(), wb.clone())]).unwrap();
        let g = Grid::from_fn(cfg.q, cfg.m, |q, m| a[q] * wa[m] + b[q] * wb[m]);
        let d = modulate(&cfg, &g).unwrap();
        for m in 0..cfg.m {
            for (x, y) in f.pulse(m).iter().zip(d.pulse(m).iter()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn iq_round_trip() {
        let cfg = small();
        let s = modulate(&cfg, &random_grid(&cfg, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (d, j) = (dir.path().join("x.iq"), dir.path().join("x.json"));
        s.export_iq(&d, &j).unwrap();
        let (side, samples) = read_iq(&d, &j).unwrap();
        assert_eq!(side.frame_starts[1], cfg.pri_samples() as i64);
        assert_eq!(samples.len(), s.to_dense().len());
        for (a, b) in samples.iter().zip(s.to_dense()) {
            assert!((a.re as f64 - b.re).abs() < 1e-6 && (a.im as f64 - b.im).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn round_trip_is_exact(seed in any::<u64>()) {
            let cfg = small();
            let g = random_grid(&cfg, seed);
            let back = demodulate(&cfg, &modulate(&cfg, &g).unwrap(), 0).unwrap();
            prop_assert!(back.rel_error(&g) < 1e-12);
        }
    }
}
