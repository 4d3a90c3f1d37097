//! Envelope extraction, resolution and SNR measurement, and the multiplexing-advantage
//! experiment.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::codes::generate_s_sequence;
use crate::demux::{build_system, demultiplex_stream, subset_count, CirculantSystem, DepthProfile, InverseKind};
use crate::error::{Error, Result};
use crate::simulator::{
    argmax, derive_seed, object_profile, simulate_object, AcquisitionConfig, Mode, Phantom, SampledStream,
};

/// SNR reported when the measured noise is exactly zero.
pub const SNR_CAP: f64 = 1e12;

/// Quadrature demodulation at `f_us`: mix with `cos`/`sin`, average over one carrier
/// period, take `√(I² + Q²)`.
///
/// The input is treated as one period of a periodic signal, so the averaging window
/// wraps around. The window for output `n` covers samples
/// `n − (K − 1 − ⌊K/2⌋) ..= n + ⌊K/2⌋`, which centres the detected envelope on the
/// depth of the modulating pulse.
pub fn extract_modulated(signal: &[f64], f_us_hz: f64, f_s_hz: f64) -> Result<Vec<f64>> {
    let k = subset_count(f_s_hz, f_us_hz)?;
    if k < 2 {
        return Err(Error::NyquistViolation { samples_per_cycle: k });
    }
    let len = signal.len();
    if len < k {
        return Err(Error::InsufficientSamples {
            needed: k,
            available: len,
        });
    }
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..k)
        .map(|m| {
            let ph = 2.0 * PI * m as f64 / k as f64;
            (ph.cos(), ph.sin())
        })
        .unzip();
    let mixed_i: Vec<f64> = signal.iter().enumerate().map(|(m, d)| d * cos[m % k]).collect();
    let mixed_q: Vec<f64> = signal.iter().enumerate().map(|(m, d)| d * sin[m % k]).collect();
    let back = k - 1 - k / 2;
    let gain = 2.0 / k as f64;
    Ok((0..len)
        .map(|n| {
            let (mut i, mut q) = (0.0, 0.0);
            for w in 0..k {
                let m = (n + len + w - back) % len;
                i += mixed_i[m];
                q += mixed_q[m];
            }
            gain * i.hypot(q)
        })
        .collect())
}

/// [`extract_modulated`] applied to a profile, keeping its depth axis.
pub fn extract_profile_with(profile: &DepthProfile, f_us_hz: f64, f_s_hz: f64) -> Result<DepthProfile> {
    DepthProfile::new(
        extract_modulated(&profile.values, f_us_hz, f_s_hz)?,
        profile.bin_width_m,
        profile.depth_origin_m,
    )
}

fn extract_profile(profile: &ReconstructedProfile) -> Result<DepthProfile> {
    extract_profile_with(&profile.signal, profile.f_us_hz, profile.f_s_hz)
}

/// Linearly interpolated full width at half maximum, in metres.
pub fn measure_fwhm(profile: &DepthProfile) -> Result<f64> {
    let v = &profile.values;
    if v.is_empty() {
        return Err(Error::NoPeak);
    }
    let peak = argmax(v);
    let max = v[peak];
    if !(max > 0.0) {
        return Err(Error::NoPeak);
    }
    if peak == 0 || peak == v.len() - 1 {
        return Err(Error::EdgePeak(peak));
    }
    let half = max / 2.0;
    let mut l = peak;
    while v[l] > half {
        if l == 0 {
            return Err(Error::EdgePeak(peak));
        }
        l -= 1;
    }
    let left = l as f64 + (half - v[l]) / (v[l + 1] - v[l]);
    let mut r = peak;
    while v[r] > half {
        if r == v.len() - 1 {
            return Err(Error::EdgePeak(peak));
        }
        r += 1;
    }
    let right = r as f64 - (half - v[r]) / (v[r - 1] - v[r]);
    Ok((right - left) * profile.bin_width_m)
}

/// Single-pulse-equivalent signal over one repetition period, before envelope detection.
#[derive(Debug, Clone)]
pub struct ReconstructedProfile {
    pub signal: DepthProfile,
    pub f_us_hz: f64,
    pub f_s_hz: f64,
}

/// Turns streams of one acquisition configuration into single-pulse-equivalent
/// profiles: coded streams are demultiplexed, single-pulse streams period-averaged.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    system: Option<CirculantSystem>,
}

impl Reconstructor {
    pub fn new(cfg: &AcquisitionConfig, kind: InverseKind) -> Result<Self> {
        let system = match cfg.mode {
            Mode::Coded { order } => Some(build_system(&generate_s_sequence(order)?, kind)?),
            Mode::SinglePulse { .. } => None,
        };
        Ok(Reconstructor { system })
    }

    pub fn reconstruct(&self, stream: &SampledStream) -> Result<ReconstructedProfile> {
        let cfg = &stream.config;
        let signal = match (&self.system, cfg.mode) {
            (Some(sys), Mode::Coded { .. }) => demultiplex_stream(sys, stream)?,
            (None, Mode::SinglePulse { .. }) => period_average(stream)?,
            _ => {
                return Err(Error::InvalidConfig(
                    "stream mode does not match the reconstructor".into(),
                ))
            }
        };
        Ok(ReconstructedProfile {
            signal,
            f_us_hz: cfg.f_us_hz,
            f_s_hz: cfg.f_s_hz,
        })
    }

    /// Reconstruct and envelope-detect.
    pub fn profile(&self, stream: &SampledStream) -> Result<DepthProfile> {
        extract_profile(&self.reconstruct(stream)?)
    }
}

/// Mean over all complete repetition periods of a stream.
pub fn period_average(stream: &SampledStream) -> Result<DepthProfile> {
    let cfg = &stream.config;
    let period = cfg.period_samples()?;
    let periods = stream.samples.len() / period;
    if periods == 0 {
        return Err(Error::InsufficientSamples {
            needed: period,
            available: stream.samples.len(),
        });
    }
    let mut acc = vec![0.0; period];
    for chunk in stream.samples.chunks_exact(period) {
        acc.iter_mut().zip(chunk).for_each(|(a, s)| *a += s);
    }
    let inv = 1.0 / periods as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    DepthProfile::new(acc, cfg.bin_width_m(), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrOptions {
    pub n_trials: usize,
    pub solver: InverseKind,
    /// Subtract the mean off-peak magnitude (the envelope detector's noise floor)
    /// from the signal estimate.
    pub subtract_noise_floor: bool,
}

impl Default for SnrOptions {
    fn default() -> Self {
        SnrOptions {
            n_trials: 30,
            solver: InverseKind::Spectral,
            subtract_noise_floor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub mode: Mode,
    pub n_trials: usize,
    pub signal_mean: f64,
    pub noise_std: f64,
    pub snr: f64,
    /// Set when `noise_std` was zero and `snr` holds [`SNR_CAP`].
    pub capped: bool,
    pub peak_bin: usize,
    pub noise_bin: usize,
}

impl SnrReport {
    pub const CSV_HEADER: &'static str = "mode,n_trials,signal_mean_au,noise_std_au,snr_ratio,capped,peak_bin,noise_bin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.mode,
            self.n_trials,
            self.signal_mean,
            self.noise_std,
            self.snr,
            self.capped,
            self.peak_bin,
            self.noise_bin
        )
    }
}

/// Signal-free bin farthest (cyclically) from `peak`; falls back to the farthest bin
/// overall when every bin carries signal.
fn noise_bin(reference: &[f64], peak: usize) -> usize {
    let len = reference.len();
    let max = reference[peak];
    let dist = |i: usize| {
        let d = i.abs_diff(peak);
        d.min(len - d)
    };
    let quiet = (0..len).filter(|&i| reference[i] <= 1e-9 * max).max_by_key(|&i| (dist(i), usize::MAX - i));
    quiet.unwrap_or_else(|| (0..len).max_by_key(|&i| (dist(i), usize::MAX - i)).unwrap_or(0))
}

/// Repeated acquisitions of `object`: the signal is the mean envelope at the noise-free
/// peak bin, the noise is the across-trial standard deviation at a signal-free bin.
/// Trial `i` uses seed `derive_seed(cfg.seed, i)`.
pub fn measure_snr_object(cfg: &AcquisitionConfig, object: &[f64], opts: &SnrOptions) -> Result<SnrReport> {
    if opts.n_trials < 2 {
        return Err(Error::InvalidConfig(format!(
            "at least 2 trials are needed, got {}",
            opts.n_trials
        )));
    }
    let recon = Reconstructor::new(cfg, opts.solver)?;
    let mut clean_cfg = cfg.clone();
    clean_cfg.noise_sigma = 0.0;
    let reference = recon.profile(&simulate_object(&clean_cfg, object)?)?;
    let peak = argmax(&reference.values);
    if !(reference.values[peak] > 0.0) {
        return Err(Error::NoPeak);
    }
    let quiet = noise_bin(&reference.values, peak);

    let samples = (0..opts.n_trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut trial = cfg.clone();
            trial.seed = derive_seed(cfg.seed, i as u64);
            let p = recon.profile(&simulate_object(&trial, object)?)?;
            Ok((p.values[peak], p.values[quiet]))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = samples.len() as f64;
    let peak_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let floor_mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let noise_var = samples.iter().map(|s| (s.1 - floor_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let noise_std = noise_var.sqrt();
    let signal_mean = if opts.subtract_noise_floor {
        peak_mean - floor_mean
    } else {
        peak_mean
    };
    let (snr, capped) = if noise_std > 0.0 {
        (signal_mean / noise_std, false)
    } else {
        (SNR_CAP, true)
    };
    Ok(SnrReport {
        mode: cfg.mode,
        n_trials: opts.n_trials,
        signal_mean,
        noise_std,
        snr,
        capped,
        peak_bin: peak,
        noise_bin: quiet,
    })
}

/// [`measure_snr_object`] for the phantom seen along the configured probe axis.
pub fn measure_snr(cfg: &AcquisitionConfig, ph: &Phantom, opts: &SnrOptions) -> Result<SnrReport> {
    cfg.validate()?;
    ph.validate()?;
    let object = object_profile(cfg, ph)?;
    measure_snr_object(cfg, &object, opts)
}

/// Which single-pulse repetition rate the coded acquisition is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceRate {
    /// One pulse per code length, `prf = f_us / N`.
    #[default]
    Matched,
    /// The fastest rate that still keeps a single pulse in the phantom; the matched
    /// gain is divided by the square root of the rate ratio.
    Maximum,
}

impl std::str::FromStr for ReferenceRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched" => Ok(ReferenceRate::Matched),
            "max-rate" => Ok(ReferenceRate::Maximum),
            other => Err(Error::InvalidConfig(format!("unknown reference rate `{other}`"))),
        }
    }
}

impl std::fmt::Display for ReferenceRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceRate::Matched => "matched",
            ReferenceRate::Maximum => "max-rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageCurve {
    pub orders: Vec<usize>,
    pub measured_gain: Vec<f64>,
    pub theoretical_gain: Vec<f64>,
}

/// Multiplexing advantage predicted for an order-`n` S-sequence, `√N/2`.
pub fn theoretical_gain(n: usize) -> f64 {
    (n as f64).sqrt() / 2.0
}

/// Exact S-matrix gain `(N+1)/(2√N)` from the row norm of `S⁻¹`.
pub fn exact_s_matrix_gain(n: usize) -> f64 {
    (n as f64 + 1.0) / (2.0 * (n as f64).sqrt())
}

impl AdvantageCurve {
    pub const CSV_HEADER: &'static str = "order_n,measured_gain_ratio,theoretical_gain_ratio";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for i in 0..self.orders.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.orders[i], self.measured_gain[i], self.theoretical_gain[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AdvantageRun {
    pub curve: AdvantageCurve,
    pub coded: Vec<SnrReport>,
    pub single: Vec<SnrReport>,
}

/// For each order: SNR of `Coded(N)` over SNR of single pulses at `f_us/N`, both with
/// the same duration, noise, and phantom. Orders are sorted and deduplicated.
pub fn multiplexing_advantage(
    cfg_base: &AcquisitionConfig,
    ph: &Phantom,
    orders: &[usize],
    opts: &SnrOptions,
    reference: ReferenceRate,
) -> Result<AdvantageRun> {
    let mut orders = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    if orders.is_empty() {
        return Err(Error::InvalidConfig("at least one code order is required".into()));
    }
    let mut run = AdvantageRun {
        curve: AdvantageCurve {
            orders: orders.clone(),
            measured_gain: Vec::with_capacity(orders.len()),
            theoretical_gain: orders.iter().map(|&n| theoretical_gain(n)).collect(),
        },
        coded: Vec::new(),
        single: Vec::new(),
    };
    for &n in &orders {
        let coded_cfg = AcquisitionConfig {
            mode: Mode::Coded { order: n },
            ..cfg_base.clone()
        };
        let single_cfg = AcquisitionConfig {
            mode: Mode::SinglePulse { period_slots: n },
            ..cfg_base.clone()
        };
        let coded = measure_snr(&coded_cfg, ph, opts)?;
        let single = measure_snr(&single_cfg, ph, opts)?;
        let mut gain = coded.snr / single.snr;
        if reference == ReferenceRate::Maximum {
            let k = coded_cfg.subsets()?;
            let bins = object_profile(&coded_cfg, ph)?.len();
            let min_slots = bins.div_ceil(k).max(1);
            let ratio = (n as f64 / min_slots as f64).max(1.0);
            gain /= ratio.sqrt();
        }
        run.curve.measured_gain.push(gain);
        run.coded.push(coded);
        run.single.push(single);
    }
    Ok(run)
}

/// Spearman rank correlation (ties get average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Maximum-intensity path across a row-major `ny × nx` map, one row index per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Traces the ridge over columns `first..=last`.
pub fn trace_ridge(map: &[f64], nx: usize, ny: usize, first: usize, last: usize) -> Ridge {
    let columns: Vec<usize> = (first..=last.min(nx - 1)).collect();
    let rows = columns
        .iter()
        .map(|&c| {
            let col: Vec<f64> = (0..ny).map(|r| map[r * nx + c]).collect();
            argmax(&col)
        })
        .collect();
    Ridge { columns, rows }
}

/// Verdict of the banana-shape check on a scan map.
#[derive(Debug, Clone, PartialEq)]
pub struct BananaCheck {
    pub ridge: Ridge,
    /// Neighbouring columns' ridge rows differ by at most one.
    pub connected: bool,
    /// Every column has exactly one local maximum above half its peak.
    pub single: bool,
    /// The ridge is deeper (further from the fibre chord) in the middle than at both ends.
    pub bowed: bool,
}

impl BananaCheck {
    pub fn passed(&self) -> bool {
        self.connected && self.single && self.bowed
    }
}

/// Ridge test between the source and detector columns of a map whose rows run away
/// from the fibre chord (row 0 nearest). Between the two fibre columns the ridge must
/// be connected, unique in every column, and bowed away from the chord.
pub fn banana_check(map: &[f64], nx: usize, ny: usize, src_col: usize, det_col: usize) -> BananaCheck {
    let (first, last) = (src_col.min(det_col), src_col.max(det_col));
    let ridge = trace_ridge(map, nx, ny, first, last);
    let connected = ridge.rows.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1);
    let single = ridge.columns.iter().all(|&c| {
        let col: Vec<f64> = (0..ny).map(|r| map[r * nx + c]).collect();
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let maxima = (0..ny)
            .filter(|&r| {
                let left = if r == 0 { f64::NEG_INFINITY } else { col[r - 1] };
                let right = if r + 1 == ny { f64::NEG_INFINITY } else { col[r + 1] };
                col[r] >= max / 2.0 && col[r] > left && col[r] >= right
            })
            .count();
        maxima == 1
    });
    let mid = ridge.rows[ridge.rows.len() / 2];
    let bowed = mid > ridge.rows[0] && mid > *ridge.rows.last().unwrap_or(&mid);
    BananaCheck {
        ridge,
        connected,
        single,
        bowed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Boundary;

    fn profile(values: Vec<f64>) -> DepthProfile {
        DepthProfile::new(values, 1.0, 0.0).unwrap()
    }

    #[test]
    fn pure_carrier_gives_constant_amplitude() {
        for (f_s, a) in [(5e6, 2.5), (10e6, 0.3), (6.25e6, 1.0)] {
            let k = (f_s / 1.25e6) as usize;
            let s: Vec<f64> = (0..k * 10)
                .map(|n| a * (2.0 * PI * n as f64 / k as f64).sin())
                .collect();
            let env = extract_modulated(&s, 1.25e6, f_s).unwrap();
            assert!(env.iter().all(|v| (v - a).abs() < 0.01 * a), "{env:?}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let env = extract_modulated(&[0.0; 40], 1.25e6, 5e6).unwrap();
        assert!(env.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nyquist_violation() {
        assert!(matches!(
            extract_modulated(&[0.0; 8], 1e6, 1e6),
            Err(Error::NyquistViolation { samples_per_cycle: 1 })
        ));
    }

    #[test]
    fn fwhm_triangle() {
        for w in [4usize, 6, 9] {
            let c = 20.0;
            let v: Vec<f64> = (0..41).map(|i| (1.0 - (i as f64 - c).abs() / w as f64).max(0.0)).collect();
            let fwhm = measure_fwhm(&profile(v)).unwrap();
            assert!((fwhm - w as f64).abs() < 1e-12, "{w}: {fwhm}");
        }
    }

    #[test]
    fn fwhm_gaussian() {
        for sigma in [2.0, 3.7, 6.0] {
            let v: Vec<f64> = (0..101)
                .map(|i| (-((i as f64 - 50.0) / sigma).powi(2) / 2.0).exp())
                .collect();
            let fwhm = measure_fwhm(&profile(v)).unwrap();
            let exact = 2.0 * (2.0f64 * 2.0f64.ln()).sqrt() * sigma;
            assert!((fwhm - exact).abs() < 0.5);
        }
    }

    #[test]
    fn fwhm_errors() {
        assert!(matches!(measure_fwhm(&profile(vec![0.0; 5])), Err(Error::NoPeak)));
        assert!(matches!(
            measure_fwhm(&profile(vec![1.0, 0.5, 0.1])),
            Err(Error::EdgePeak(0))
        ));
        assert!(matches!(
            measure_fwhm(&profile(vec![0.9, 1.0, 0.8])),
            Err(Error::EdgePeak(1))
        ));
    }

    #[test]
    fn delta_phantom_envelope_fwhm_is_pulse_length() {
        let cfg = AcquisitionConfig {
            mode: Mode::SinglePulse { period_slots: 19 },
            noise_sigma: 0.0,
            duration_s: 76.0 * 2.0 / 5e6,
            ..AcquisitionConfig::default()
        };
        let k_bin = 33;
        let mut x = vec![0.0; 76];
        x[k_bin] = 1.0;
        let recon = Reconstructor::new(&cfg, InverseKind::Dense).unwrap();
        let p = recon.profile(&simulate_object(&cfg, &x).unwrap()).unwrap();
        assert_eq!(argmax(&p.values), k_bin);
        let fwhm_bins = measure_fwhm(&p).unwrap() / p.bin_width_m;
        assert!((fwhm_bins - 4.0).abs() < 1e-9, "{fwhm_bins}");
    }

    #[test]
    fn spearman_basic() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_bin_prefers_signal_free_far_bin() {
        let mut r = vec![0.0; 20];
        for (i, v) in r.iter_mut().enumerate().take(8) {
            *v = 1.0 - i as f64 * 0.1;
        }
        // peak at 0; farthest cyclic bin is 10, which is signal free
        assert_eq!(noise_bin(&r, 0), 10);
        let full = vec![1.0; 10];
        assert_eq!(noise_bin(&full, 2), 7);
    }

    #[test]
    fn zero_noise_snr_is_capped() {
        let cfg = AcquisitionConfig {
            mode: Mode::Coded { order: 7 },
            noise_sigma: 0.0,
            duration_s: 28.0 * 4.0 / 5e6,
            ..AcquisitionConfig::default()
        };
        let mut x = vec![0.0; 28];
        x[5] = 1.0;
        let r = measure_snr_object(&cfg, &x, &SnrOptions::default()).unwrap();
        assert!(r.capped);
        assert_eq!(r.snr, SNR_CAP);
        let opts = SnrOptions {
            n_trials: 1,
            ..SnrOptions::default()
        };
        assert!(measure_snr_object(&cfg, &x, &opts).is_err());
    }

    #[test]
    fn doubling_noise_halves_snr() {
        let ph = Phantom {
            depth_extent_m: 3e-3,
            src_pos_m: [-7.5e-3, 0.0, 1.5e-3],
            det_pos_m: [7.5e-3, 0.0, 1.5e-3],
            boundary: Boundary::HalfSpace,
            ..Phantom::default()
        };
        let cfg = AcquisitionConfig {
            mode: Mode::Coded { order: 19 },
            noise_sigma: 0.5,
            duration_s: 1e-3,
            ..AcquisitionConfig::default()
        };
        let opts = SnrOptions::default();
        let a = measure_snr(&cfg, &ph, &opts).unwrap();
        let b = measure_snr(&AcquisitionConfig { noise_sigma: 1.0, ..cfg }, &ph, &opts).unwrap();
        assert_eq!(a.n_trials, 30);
        assert!((a.snr / b.snr / 2.0 - 1.0).abs() < 0.1, "{} {}", a.snr, b.snr);
    }

    #[test]
    fn theoretical_column() {
        assert!((theoretical_gain(3) - 0.8660254037844386).abs() < 1e-15);
        assert!((theoretical_gain(79) - 4.444097208657794).abs() < 1e-12);
    }

    #[test]
    fn empty_orders_rejected() {
        let r = multiplexing_advantage(
            &AcquisitionConfig::default(),
            &Phantom::default(),
            &[],
            &SnrOptions::default(),
            ReferenceRate::Matched,
        );
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn banana_check_on_synthetic_maps() {
        let (nx, ny) = (9, 6);
        let mut bowed = vec![0.0; nx * ny];
        let rows = [0, 1, 2, 3, 3, 3, 2, 1, 0];
        for c in 0..nx {
            for r in 0..ny {
                bowed[r * nx + c] = 1.0 / (1.0 + (r as f64 - rows[c] as f64).powi(2));
            }
        }
        assert!(banana_check(&bowed, nx, ny, 0, 8).passed());
        let mut straight = vec![0.0; nx * ny];
        for c in 0..nx {
            for r in 0..ny {
                straight[r * nx + c] = 1.0 / (1.0 + r as f64);
            }
        }
        let check = banana_check(&straight, nx, ny, 0, 8);
        assert!(check.connected && check.single && !check.bowed);
    }
}
