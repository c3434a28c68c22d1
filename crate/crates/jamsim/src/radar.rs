//! Stage-2 radar processing: CTF estimate, range-Doppler map, OS-CFAR, truth association.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, UnitaryFft};
use crate::scalar::Real;
use crate::waveform::OfdmConfig;

#[derive(Debug, Error)]
pub enum RadarError {
    #[error("grid shapes differ: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("training symbol is zero at ({q}, {m})")]
    ZeroSymbol { q: usize, m: usize },
    #[error("bad CFAR configuration: {0}")]
    Cfar(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

/// `Ĥ = R ⊘ S`.
pub fn estimate_ctf<T: Real>(r: &Grid<T>, s: &Grid<T>) -> Result<Grid<T>, RadarError> {
    if r.shape() != s.shape() {
        return Err(RadarError::Shape(r.shape(), s.shape()));
    }
    for m in 0..s.cols() {
        if let Some(q) = s.col(m).iter().position(|z| z.re == T::zero() && z.im == T::zero()) {
            return Err(RadarError::ZeroSymbol { q, m });
        }
    }
    Ok(r.zip_map(s, |a, b| a / b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Blackman,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Self::Rectangular => vec![1.0; n],
            Self::Blackman if n < 2 => vec![1.0; n],
            Self::Blackman => {
                let d = (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let x = std::f64::consts::TAU * i as f64 / d;
                        0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
                    })
                    .collect()
            }
        }
    }
}

/// Range-Doppler map: rows are range bins (delay k·T), columns Doppler bins (DC at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm<T> {
    pub values: Grid<T>,
    pub range_bin_m: f64,
    pub speed_bin_mps: f64,
    pub window: (Window, Window),
}

impl<T: Real> Rdm<T> {
    /// `|Y|²`, column-major like the grid.
    pub fn power(&self) -> Vec<f64> {
        self.values.as_slice().iter().map(|z| z.norm_sqr().f64()).collect()
    }

    /// Doppler bin as a signed index in `[−M/2, M/2)`.
    pub fn signed_doppler(&self, l: usize) -> i64 {
        let m = self.values.cols() as i64;
        let l = l as i64;
        if 2 * l >= m {
            l - m
        } else {
            l
        }
    }

    /// Row-major dB magnitude with the speed axis shifted so zero Doppler sits at column M/2.
    pub fn centered_db(&self) -> Vec<f32> {
        let (q, m) = self.values.shape();
        let mut out = Vec::with_capacity(q * m);
        for k in 0..q {
            for c in 0..m {
                let l = (c + m - m / 2) % m;
                let p = self.values.get(k, l).norm().f64();
                out.push((20.0 * p.max(1e-300).log10()) as f32);
            }
        }
        out
    }

    pub fn export(&self, data_path: &Path, sidecar_path: &Path) -> Result<(), RadarError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| RadarError::Io { path, source }
        };
        let (q, m) = self.values.shape();
        let sidecar = RdmSidecar {
            q,
            m,
            range_bin_m: self.range_bin_m,
            speed_bin_mps: self.speed_bin_mps,
            window: self.window,
        };
        let mut bytes = Vec::with_capacity(4 * q * m);
        for v in self.centered_db() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(data_path).and_then(|mut f| f.write_all(&bytes)).map_err(io(data_path))?;
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(sidecar_path, text).map_err(io(sidecar_path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdmSidecar {
    pub q: usize,
    pub m: usize,
    pub range_bin_m: f64,
    pub speed_bin_mps: f64,
    pub window: (Window, Window),
}

/// Reads an RDM written by [`Rdm::export`]; values are row-major, DC-centered dB.
pub fn read_rdm(data_path: &Path, sidecar_path: &Path) -> Result<(RdmSidecar, Vec<f32>), RadarError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| RadarError::Io { path, source }
    };
    let text = std::fs::read_to_string(sidecar_path).map_err(io(sidecar_path))?;
    let sidecar: RdmSidecar = serde_json::from_str(&text)
        .map_err(|e| RadarError::Format { path: sidecar_path.display().to_string(), msg: e.to_string() })?;
    let bytes = std::fs::read(data_path).map_err(io(data_path))?;
    if bytes.len() != 4 * sidecar.q * sidecar.m {
        return Err(RadarError::Format {
            path: data_path.display().to_string(),
            msg: format!("{} bytes for a {}x{} grid", bytes.len(), sidecar.q, sidecar.m),
        });
    }
    let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((sidecar, values))
}

/// Window, unitary IDFT over subcarriers, unitary DFT over slow time.
pub fn compute_rdm<T: Real>(cfg: &OfdmConfig, ctf: &Grid<T>, range_window: Window, doppler_window: Window) -> Rdm<T> {
    let (q, m) = ctf.shape();
    let wq = range_window.coefficients(q);
    let wm = doppler_window.coefficients(m);
    let mut y = Grid::from_fn(q, m, |i, j| ctf.get(i, j) * T::of(wq[i] * wm[j]));
    let mut fq = UnitaryFft::new(q);
    for j in 0..m {
        fq.inverse(y.col_mut(j));
    }
    let mut fm = UnitaryFft::new(m);
    let mut row = vec![Complex::new(T::zero(), T::zero()); m];
    for i in 0..q {
        for (j, z) in row.iter_mut().enumerate() {
            *z = y.get(i, j);
        }
        fm.forward(&mut row);
        for (j, z) in row.iter().enumerate() {
            y.set(i, j, *z);
        }
    }
    Rdm { values: y, range_bin_m: cfg.range_bin_m(), speed_bin_mps: cfg.speed_bin_mps(), window: (range_window, doppler_window) }
}

/// How above-threshold cells become reported detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakRule {
    /// A cell above threshold that is also the maximum of its guard region.
    #[default]
    GuardMaximum,
    /// One detection per 8-connected group of above-threshold cells, at its strongest cell.
    /// Merges targets whose mainlobes touch.
    Cluster,
}

/// How the sliding window continues past the first and last range bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeEdge {
    /// The range FFT is periodic: bin Q−1 sits next to bin 0, so a mainlobe straddling zero
    /// range is seen whole.
    #[default]
    Circular,
    /// Reflect at the ends.
    Mirror,
}

impl RangeEdge {
    fn index(self, i: i64, rows: usize) -> usize {
        match self {
            RangeEdge::Circular => i.rem_euclid(rows as i64) as usize,
            RangeEdge::Mirror => mirror(i, rows),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarConfig {
    pub pfa: f64,
    pub guard_cells: usize,
    pub training_cells: usize,
    pub os_rank: f64,
    #[serde(default)]
    pub peak_rule: PeakRule,
    #[serde(default)]
    pub range_edge: RangeEdge,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            pfa: 1e-6,
            guard_cells: 2,
            training_cells: 8,
            os_rank: 0.75,
            peak_rule: PeakRule::GuardMaximum,
            range_edge: RangeEdge::Circular,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<(), RadarError> {
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(RadarError::Cfar(format!("pfa {} outside (0, 1)", self.pfa)));
        }
        if !(self.os_rank > 0.0 && self.os_rank <= 1.0) {
            return Err(RadarError::Cfar(format!("os_rank {} outside (0, 1]", self.os_rank)));
        }
        if self.training_cells < 4 {
            return Err(RadarError::Cfar(format!("{} training cells, need at least 4", self.training_cells)));
        }
        Ok(())
    }

    pub fn half_width(&self) -> usize {
        self.guard_cells + self.training_cells
    }

    /// Training cells in the square annulus.
    pub fn n_train(&self) -> usize {
        let outer = 2 * self.half_width() + 1;
        let inner = 2 * self.guard_cells + 1;
        outer * outer - inner * inner
    }

    pub fn rank(&self) -> usize {
        ((self.os_rank * self.n_train() as f64).round() as usize).clamp(1, self.n_train())
    }

    pub fn alpha(&self) -> f64 {
        os_cfar_alpha(self.n_train(), self.rank(), self.pfa)
    }
}

/// Threshold multiplier on the k-th smallest of n exponential training cells giving `pfa`:
/// `pfa = Π_{i<k} (n−i)/(n−i+α)`.
pub fn os_cfar_alpha(n: usize, k: usize, pfa: f64) -> f64 {
    let target = pfa.ln();
    let log_pfa = |a: f64| -> f64 { (0..k).map(|i| ((n - i) as f64 / ((n - i) as f64 + a)).ln()).sum() };
    let (mut lo, mut hi) = (0.0, 1.0);
    while log_pfa(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_pfa(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    /// `|Y|` at the cell.
    pub magnitude: f64,
}

pub fn os_cfar<T: Real>(rdm: &Rdm<T>, cfg: &CfarConfig) -> Result<Vec<Detection>, RadarError> {
    let (q, m) = rdm.values.shape();
    os_cfar_power(&rdm.power(), q, m, cfg)
}

/// OS-CFAR on a column-major power grid (`rows` range bins × `cols` Doppler bins).
/// Doppler wraps around; range edges follow [`CfarConfig::range_edge`].
pub fn os_cfar_power(power: &[f64], rows: usize, cols: usize, cfg: &CfarConfig) -> Result<Vec<Detection>, RadarError> {
    Ok(os_cfar_multi(power, rows, cols, cfg, &[cfg.pfa])?.pop().unwrap())
}

/// Detections for several false-alarm rates sharing one pass over the grid.
pub fn os_cfar_multi(
    power: &[f64],
    rows: usize,
    cols: usize,
    cfg: &CfarConfig,
    pfas: &[f64],
) -> Result<Vec<Vec<Detection>>, RadarError> {
    match cfg.peak_rule {
        PeakRule::Cluster => {
            let masks = os_cfar_exceedances(power, rows, cols, cfg, pfas)?;
            Ok(masks.iter().map(|mask| clusters(power, mask, rows, cols)).collect())
        }
        PeakRule::GuardMaximum => {
            // Only guard-region maxima can be reported, so only they need the ranked test.
            let kernel = Kernel::new(rows, cols, cfg, pfas)?;
            let g = cfg.guard_cells as i64;
            let mut out = vec![Vec::new(); pfas.len()];
            for idx in 0..rows * cols {
                if !is_guard_max(power, idx, rows, cols, g, cfg.range_edge) {
                    continue;
                }
                let passed = kernel.passed(power, idx);
                let det = Detection { range_bin: idx % rows, doppler_bin: idx / rows, magnitude: power[idx].sqrt() };
                for &ai in &kernel.order[..passed] {
                    out[ai].push(det);
                }
            }
            Ok(out)
        }
    }
}

fn mirror(i: i64, rows: usize) -> usize {
    let r = rows as i64;
    (if i < 0 {
        -i
    } else if i >= r {
        2 * (r - 1) - i
    } else {
        i
    }) as usize
}

struct Kernel {
    rows: usize,
    cols: usize,
    w: i64,
    /// Training offsets as indices into the (2w+1)² window, Doppler-major.
    offsets: Vec<(usize, usize)>,
    alphas: Vec<f64>,
    /// Alpha indices, ascending.
    order: Vec<usize>,
    allowed_failures: usize,
    edge: RangeEdge,
}

impl Kernel {
    fn new(rows: usize, cols: usize, cfg: &CfarConfig, pfas: &[f64]) -> Result<Self, RadarError> {
        cfg.validate()?;
        for &pfa in pfas {
            CfarConfig { pfa, ..*cfg }.validate()?;
        }
        let w = cfg.half_width() as i64;
        if 2 * w + 1 > rows as i64 || 2 * w + 1 > cols as i64 {
            return Err(RadarError::Cfar(format!("{rows}x{cols} grid smaller than the {}-cell kernel", 2 * w + 1)));
        }
        if 2 * w + 1 > 64 {
            return Err(RadarError::Cfar(format!("kernel of {} cells per side exceeds 64", 2 * w + 1)));
        }
        let n = cfg.n_train();
        let k = cfg.rank();
        let g = cfg.guard_cells as i64;
        let offsets: Vec<(usize, usize)> = (-w..=w)
            .flat_map(|dd| (-w..=w).map(move |dr| (dd, dr)))
            .filter(|&(dd, dr)| dd.abs() > g || dr.abs() > g)
            .map(|(dd, dr)| ((dd + w) as usize, (dr + w) as usize))
            .collect();
        debug_assert_eq!(offsets.len(), n);
        let alphas: Vec<f64> = pfas.iter().map(|&p| os_cfar_alpha(n, k, p)).collect();
        let mut order: Vec<usize> = (0..alphas.len()).collect();
        order.sort_by(|&a, &b| alphas[a].total_cmp(&alphas[b]));
        Ok(Self { rows, cols, w, offsets, alphas, order, allowed_failures: n - k, edge: cfg.range_edge })
    }

    /// How many alphas, in ascending order, the cell clears. The test is monotone in α:
    /// failing the smallest fails them all.
    fn passed(&self, power: &[f64], idx: usize) -> usize {
        let (rows, cols) = (self.rows, self.cols);
        let cut = power[idx];
        if !(cut > 0.0) {
            return 0;
        }
        let (l, r) = ((idx / rows) as i64, (idx % rows) as i64);
        let span = (2 * self.w + 1) as usize;
        let mut col_base = [0usize; 64];
        let mut row_idx = [0usize; 64];
        for i in 0..span {
            let d = i as i64 - self.w;
            col_base[i] = (l + d).rem_euclid(cols as i64) as usize * rows;
            row_idx[i] = self.edge.index(r + d, rows);
        }
        let mut passed = 0;
        for &ai in &self.order {
            let level = cut / self.alphas[ai];
            let mut failures = 0;
            for &(cd, rd) in &self.offsets {
                if power[col_base[cd] + row_idx[rd]] >= level {
                    failures += 1;
                    if failures > self.allowed_failures {
                        return passed;
                    }
                }
            }
            passed += 1;
        }
        passed
    }
}

/// Per pfa, the mask of cells whose power exceeds α times the ranked training statistic.
pub fn os_cfar_exceedances(
    power: &[f64],
    rows: usize,
    cols: usize,
    cfg: &CfarConfig,
    pfas: &[f64],
) -> Result<Vec<Vec<bool>>, RadarError> {
    let kernel = Kernel::new(rows, cols, cfg, pfas)?;
    assert_eq!(power.len(), rows * cols, "power grid size");
    let mut above: Vec<Vec<bool>> = vec![vec![false; rows * cols]; pfas.len()];
    for idx in 0..rows * cols {
        for &ai in &kernel.order[..kernel.passed(power, idx)] {
            above[ai][idx] = true;
        }
    }
    Ok(above)
}

/// Strict maximum of its (2g+1)² neighbourhood; ties go to the lower index.
fn is_guard_max(power: &[f64], idx: usize, rows: usize, cols: usize, g: i64, edge: RangeEdge) -> bool {
    let (l, r) = (idx / rows, idx % rows);
    let p = power[idx];
    (-g..=g).all(|dd| {
        (-g..=g).all(|dr| {
            let c = (l as i64 + dd).rem_euclid(cols as i64) as usize;
            let j = c * rows + edge.index(r as i64 + dr, rows);
            j == idx || power[j] < p || (power[j] == p && j > idx)
        })
    })
}

fn clusters(power: &[f64], mask: &[bool], rows: usize, cols: usize) -> Vec<Detection> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut best = start;
        while let Some(idx) = stack.pop() {
            if power[idx] > power[best] || (power[idx] == power[best] && idx < best) {
                best = idx;
            }
            let (l, r) = ((idx / rows) as i64, (idx % rows) as i64);
            for dd in -1..=1 {
                for dr in -1..=1 {
                    let rr = r + dr;
                    if rr < 0 || rr >= rows as i64 {
                        continue;
                    }
                    let c = (l + dd).rem_euclid(cols as i64) as usize;
                    let j = c * rows + rr as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(Detection { range_bin: best % rows, doppler_bin: best / rows, magnitude: power[best].sqrt() });
    }
    out.sort_by(|a, b| (a.doppler_bin, a.range_bin).cmp(&(b.doppler_bin, b.range_bin)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    /// Zero-range, zero-Doppler peak of the direct path (or of the jammer's reference term).
    Reference,
    Real,
    Artificial,
    /// Jammer scatterer copies of the reference and artificial peaks.
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kind: TruthKind,
    /// Fractional bins; association uses the nearest cell.
    pub range_bin: f64,
    pub doppler_bin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Per truth, in input order.
    pub detected: Vec<bool>,
    /// Per detection, index of the truth it confirmed.
    pub matched: Vec<Option<usize>>,
    pub real_total: usize,
    pub real_detected: usize,
    pub artificial_total: usize,
    pub artificial_detected: usize,
    pub pd_real: Option<f64>,
    pub pd_artificial: Option<f64>,
    pub mdr_real: Option<f64>,
    pub dr_artificial: Option<f64>,
    pub count: usize,
}

/// Greedy by magnitude: each detection confirms the nearest unconfirmed truth within
/// `tol` bins on both axes (both axes wrap).
pub fn associate(detections: &[Detection], truths: &[Truth], tol: (usize, usize), shape: (usize, usize)) -> Association {
    let (rows, cols) = shape;
    let wrap = |a: i64, b: i64, n: usize| -> i64 {
        let d = (a - b).rem_euclid(n as i64);
        d.min(n as i64 - d)
    };
    let cell = |t: &Truth| {
        (
            (t.range_bin.round() as i64).rem_euclid(rows as i64),
            (t.doppler_bin.round() as i64).rem_euclid(cols as i64),
        )
    };
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&detections[a], &detections[b]);
        y.magnitude.total_cmp(&x.magnitude).then((x.doppler_bin, x.range_bin).cmp(&(y.doppler_bin, y.range_bin)))
    });
    let mut detected = vec![false; truths.len()];
    let mut matched = vec![None; detections.len()];
    for di in order {
        let d = &detections[di];
        let best = truths
            .iter()
            .enumerate()
            .filter(|(ti, _)| !detected[*ti])
            .filter_map(|(ti, t)| {
                let (r, l) = cell(t);
                let dr = wrap(d.range_bin as i64, r, rows);
                let dl = wrap(d.doppler_bin as i64, l, cols);
                (dr <= tol.0 as i64 && dl <= tol.1 as i64).then_some((dr + dl, t.kind, r, l, ti))
            })
            .min();
        if let Some((.., ti)) = best {
            detected[ti] = true;
            matched[di] = Some(ti);
        }
    }
    let tally = |kind: TruthKind| {
        let total = truths.iter().filter(|t| t.kind == kind).count();
        let hit = truths.iter().zip(&detected).filter(|(t, &d)| t.kind == kind && d).count();
        (total, hit)
    };
    let (real_total, real_detected) = tally(TruthKind::Real);
    let (artificial_total, artificial_detected) = tally(TruthKind::Artificial);
    let rate = |hit: usize, total: usize| (total > 0).then(|| hit as f64 / total as f64);
    let pd_real = rate(real_detected, real_total);
    let pd_artificial = rate(artificial_detected, artificial_total);
    Association {
        detected,
        matched,
        real_total,
        real_detected,
        artificial_total,
        artificial_detected,
        pd_real,
        pd_artificial,
        mdr_real: pd_real.map(|p| 1.0 - p),
        dr_artificial: pd_artificial,
        count: detections.len(),
    }
}
