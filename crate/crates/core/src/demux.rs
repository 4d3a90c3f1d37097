//! Circulant S-matrix inversion and interleaved stream demultiplexing.
//!
//! A coded acquisition sampled at `f_s = K·f_US` is split into `K` subsets, each a
//! sequence of length-`N` frames `y = S·x` at the code rate. Every frame is solved
//! for `x`, the solutions of all complete code periods are averaged per subset, and
//! the subsets are re-interleaved into one vector at `f_s`: the signal a single-pulse
//! transmission would have produced over one repetition period.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::codes::SSequence;
use crate::error::{Error, Result};
use crate::simulator::SampledStream;

/// Largest order for which dense inverses are materialized.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseKind {
    /// LU factorization of the explicit `N×N` matrix. The reference path.
    #[default]
    Dense,
    /// Circular deconvolution through the DFT of the generating row.
    Spectral,
}

impl fmt::Display for InverseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InverseKind::Dense => "dense",
            InverseKind::Spectral => "spectral",
        })
    }
}

impl std::str::FromStr for InverseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(InverseKind::Dense),
            "spectral" => Ok(InverseKind::Spectral),
            other => Err(Error::InvalidConfig(format!("unknown solver `{other}`"))),
        }
    }
}

/// LU factors with partial pivoting, stored row-major (`L` unit-diagonal below, `U` on and above).
#[derive(Clone)]
struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * n as f64 * f64::EPSILON;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny {
                return Err(Error::SingularSystem { column: k, pivot });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Ok(LuFactors { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            let s: f64 = row.iter().zip(&x[..r]).map(|(l, v)| l * v).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let s: f64 = row.iter().zip(&x[r + 1..]).map(|(u, v)| u * v).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        x
    }
}

#[derive(Clone)]
struct SpectralSolver {
    /// `conj(DFT(s))`, the transfer function of `y = S·x`.
    transfer: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralSolver {
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, t) in buf.iter_mut().zip(&self.transfer) {
            *b /= *t;
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / n as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

#[derive(Clone)]
enum Solver {
    Dense(LuFactors),
    Spectral(SpectralSolver),
}

/// The S-matrix `S[r][c] = s[(c - r) mod N]` together with a prepared inverse.
///
/// Immutable after construction; share it freely between threads.
#[derive(Clone)]
pub struct CirculantSystem {
    sequence: SSequence,
    kind: InverseKind,
    spectrum: Vec<Complex64>,
    solver: Solver,
}

impl fmt::Debug for CirculantSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantSystem")
            .field("order", &self.order())
            .field("kind", &self.kind)
            .finish()
    }
}

fn dft_of_row(bits: &[u8]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = bits.iter().map(|&b| Complex64::new(b as f64, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(bits.len()).process(&mut buf);
    buf
}

/// Builds the S-matrix system for `seq` with the requested inverse representation.
pub fn build_system(seq: &SSequence, kind: InverseKind) -> Result<CirculantSystem> {
    CirculantSystem::new(seq.clone(), kind)
}

impl CirculantSystem {
    pub fn new(sequence: SSequence, kind: InverseKind) -> Result<Self> {
        let n = sequence.order();
        let spectrum = dft_of_row(sequence.bits());
        let solver = match kind {
            InverseKind::Dense => {
                let mut a = vec![0.0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        a[r * n + c] = sequence.matrix_entry(r, c) as f64;
                    }
                }
                Solver::Dense(LuFactors::factor(n, a)?)
            }
            InverseKind::Spectral => {
                let floor = spectrum[0].norm() * n as f64 * f64::EPSILON;
                if let Some((k, z)) = spectrum.iter().enumerate().find(|(_, z)| z.norm() <= floor) {
                    return Err(Error::SingularSystem {
                        column: k,
                        pivot: z.norm(),
                    });
                }
                let mut planner = FftPlanner::new();
                Solver::Spectral(SpectralSolver {
                    transfer: spectrum.iter().map(|z| z.conj()).collect(),
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            }
        };
        Ok(CirculantSystem {
            sequence,
            kind,
            spectrum,
            solver,
        })
    }

    pub fn order(&self) -> usize {
        self.sequence.order()
    }

    pub fn kind(&self) -> InverseKind {
        self.kind
    }

    pub fn sequence(&self) -> &SSequence {
        &self.sequence
    }

    /// DFT of the generating row; its DC term is the row weight `(N+1)/2`.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// 2-norm condition number, `max|Ŝ_k| / min|Ŝ_k|` for a circulant.
    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self
            .spectrum
            .iter()
            .map(|z| z.norm())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
        hi / lo
    }

    /// `y = S·x` by direct summation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.order();
        check_len(n, x.len())?;
        Ok((0..n)
            .map(|r| (0..n).map(|c| self.sequence.matrix_entry(r, c) as f64 * x[c]).sum())
            .collect())
    }

    /// Solves `S·x = y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), y.len())?;
        Ok(match &self.solver {
            Solver::Dense(lu) => lu.solve(y),
            Solver::Spectral(sp) => sp.solve(y),
        })
    }

    pub fn demultiplex_frame(&self, frame: &MultiplexedFrame) -> Result<Vec<f64>> {
        self.solve(&frame.values)
    }

    /// Dense `S⁻¹` (row-major) assembled column by column from the prepared solver.
    pub fn inverse_matrix(&self) -> Result<Vec<f64>> {
        let n = self.order();
        if n > DENSE_LIMIT {
            return Err(Error::OrderTooLarge {
                order: n,
                limit: DENSE_LIMIT,
            });
        }
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e)?;
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        Ok(inv)
    }

    /// Closed-form inverse `S⁻¹ = (2/(N+1))·(2Sᵀ − J)`, row-major.
    ///
    /// Verified by multiplying back against `S` before it is returned.
    pub fn analytic_inverse(&self) -> Result<Vec<f64>> {
        let n = self.order();
        if n > DENSE_LIMIT {
            return Err(Error::OrderTooLarge {
                order: n,
                limit: DENSE_LIMIT,
            });
        }
        let scale = 2.0 / (n as f64 + 1.0);
        let mut inv = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                inv[r * n + c] = scale * (2.0 * self.sequence.matrix_entry(c, r) as f64 - 1.0);
            }
        }
        for r in 0..n {
            for c in 0..n {
                let v: f64 = (0..n)
                    .map(|k| self.sequence.matrix_entry(r, k) as f64 * inv[k * n + c])
                    .sum();
                let want = if r == c { 1.0 } else { 0.0 };
                if (v - want).abs() > 1e-9 {
                    return Err(Error::InvalidSequence(format!(
                        "closed-form inverse fails at ({r}, {c}): {v}"
                    )));
                }
            }
        }
        Ok(inv)
    }

    /// Largest elementwise deviation between the solver inverse and the closed form.
    pub fn analytic_inverse_check(&self) -> Result<f64> {
        let solver = self.inverse_matrix()?;
        let closed = self.analytic_inverse()?;
        Ok(solver
            .iter()
            .zip(&closed)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// One code period of measurements at rate `f_US` for one interleaved subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexedFrame {
    pub values: Vec<f64>,
    pub subset_index: usize,
}

/// Modulated-signal amplitude per depth bin.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthProfile {
    pub values: Vec<f64>,
    pub bin_width_m: f64,
    pub depth_origin_m: f64,
}

impl DepthProfile {
    pub fn new(values: Vec<f64>, bin_width_m: f64, depth_origin_m: f64) -> Result<Self> {
        if !(bin_width_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bin width must be positive, got {bin_width_m}"
            )));
        }
        Ok(DepthProfile {
            values,
            bin_width_m,
            depth_origin_m,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn depth_m(&self, bin: usize) -> f64 {
        self.depth_origin_m + bin as f64 * self.bin_width_m
    }

    /// `depth_m,amplitude_au` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth_m,amplitude_au\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.depth_m(i), v));
        }
        out
    }
}

/// `K = f_s / f_us`, required to be a natural number.
pub fn subset_count(f_s: f64, f_us: f64) -> Result<usize> {
    let ratio = f_s / f_us;
    let k = ratio.round();
    if !(f_s > 0.0 && f_us > 0.0) || k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::NonIntegerRatio { f_s, f_us });
    }
    Ok(k as usize)
}

/// Splits `samples` into `subsets` interleaved streams (subset `j` takes indices
/// `j, j+K, j+2K, …`) cut into frames of `order` values. Samples past the last
/// complete `order·subsets` period are dropped.
pub fn deinterleave(
    samples: &[f64],
    order: usize,
    subsets: usize,
) -> Result<Vec<Vec<MultiplexedFrame>>> {
    let period = order * subsets;
    if period == 0 || samples.len() < period {
        return Err(Error::InsufficientSamples {
            needed: period.max(1),
            available: samples.len(),
        });
    }
    let periods = samples.len() / period;
    Ok((0..subsets)
        .map(|j| {
            (0..periods)
                .map(|p| MultiplexedFrame {
                    values: (0..order).map(|q| samples[p * period + q * subsets + j]).collect(),
                    subset_index: j,
                })
                .collect()
        })
        .collect())
}

/// Inverse of [`deinterleave`]: frame `p` of every subset forms period `p` of the output.
pub fn reinterleave(subsets: &[Vec<MultiplexedFrame>]) -> Vec<f64> {
    let k = subsets.len();
    let Some(first) = subsets.first() else {
        return Vec::new();
    };
    let periods = first.len();
    let order = first.first().map_or(0, |f| f.values.len());
    let mut out = vec![0.0; periods * order * k];
    for (j, frames) in subsets.iter().enumerate() {
        for (p, frame) in frames.iter().enumerate() {
            for (q, &v) in frame.values.iter().enumerate() {
                out[p * order * k + q * k + j] = v;
            }
        }
    }
    out
}

/// Demultiplexes a coded stream into the single-pulse-equivalent signal over one
/// repetition period, averaging the per-frame solutions of all complete periods.
pub fn demultiplex_stream(sys: &CirculantSystem, stream: &SampledStream) -> Result<DepthProfile> {
    let cfg = &stream.config;
    let k = subset_count(cfg.f_s_hz, cfg.f_us_hz)?;
    let n = sys.order();
    if let Some(order) = cfg.mode.code_order() {
        check_len(order, n)?;
    }
    let subsets = deinterleave(&stream.samples, n, k)?;
    // Each subset is summed sequentially so the result does not depend on scheduling.
    let averaged = subsets
        .par_iter()
        .map(|frames| -> Result<MultiplexedFrame> {
            let mut acc = vec![0.0; n];
            for frame in frames {
                let x = sys.demultiplex_frame(frame)?;
                acc.iter_mut().zip(&x).for_each(|(a, v)| *a += v);
            }
            let inv = 1.0 / frames.len() as f64;
            acc.iter_mut().for_each(|a| *a *= inv);
            Ok(MultiplexedFrame {
                values: acc,
                subset_index: frames[0].subset_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_subset: Vec<Vec<MultiplexedFrame>> = averaged.into_iter().map(|f| vec![f]).collect();
    DepthProfile::new(reinterleave(&per_subset), cfg.bin_width_m(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::generate_s_sequence;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(n: usize, kind: InverseKind) -> CirculantSystem {
        build_system(&generate_s_sequence(n).unwrap(), kind).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn order_three_dense_inverse_by_hand() {
        // s = 101: S = [[1,0,1],[1,1,0],[0,1,1]]; (1/2)(2Sᵀ − J) computed by hand
        let sys = system(3, InverseKind::Dense);
        assert_eq!(sys.sequence().bits(), &[1, 0, 1]);
        let hand = [0.5, 0.5, -0.5, -0.5, 0.5, 0.5, 0.5, -0.5, 0.5];
        let inv = sys.inverse_matrix().unwrap();
        for (a, b) in inv.iter().zip(hand) {
            assert!((a - b).abs() < 1e-12, "{inv:?}");
        }
    }

    #[test]
    fn spectrum_dc_is_row_weight() {
        let sys = system(7, InverseKind::Spectral);
        assert!((sys.spectrum()[0].re - 4.0).abs() < 1e-12);
        assert!(sys.spectrum()[0].im.abs() < 1e-12);
    }

    #[test]
    fn unit_impulse_round_trip() {
        for kind in [InverseKind::Dense, InverseKind::Spectral] {
            let sys = system(19, kind);
            for k in 0..19 {
                let mut e = vec![0.0; 19];
                e[k] = 1.0;
                let x = sys.solve(&sys.forward(&e).unwrap()).unwrap();
                for (i, v) in x.iter().enumerate() {
                    assert!((v - e[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn all_ones_frame() {
        for kind in [InverseKind::Dense, InverseKind::Spectral] {
            let sys = system(79, kind);
            let x = sys.solve(&vec![1.0; 79]).unwrap();
            assert!(x.iter().all(|v| (v - 2.0 / 80.0).abs() < 1e-12));
        }
    }

    #[test]
    fn random_round_trip_79() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sys = system(79, InverseKind::Dense);
        let x: Vec<f64> = (0..79).map(|_| rng.random::<f64>()).collect();
        let back = sys.solve(&sys.forward(&x).unwrap()).unwrap();
        assert!(rel_err(&back, &x) < 1e-9);
    }

    #[test]
    fn analytic_inverse_errors() {
        assert!(system(3, InverseKind::Dense).analytic_inverse_check().unwrap() < 1e-12);
        assert!(system(7, InverseKind::Dense).analytic_inverse_check().unwrap() < 1e-12);
        assert!(system(79, InverseKind::Dense).analytic_inverse_check().unwrap() < 1e-10);
        assert!(system(79, InverseKind::Spectral).analytic_inverse_check().unwrap() < 1e-10);
        assert!(matches!(
            system(1031, InverseKind::Spectral).analytic_inverse_check(),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn length_mismatch() {
        let sys = system(7, InverseKind::Dense);
        let frame = MultiplexedFrame {
            values: vec![0.0; 6],
            subset_index: 0,
        };
        assert!(matches!(
            sys.demultiplex_frame(&frame),
            Err(Error::LengthMismatch {
                expected: 7,
                actual: 6
            })
        ));
    }

    #[test]
    fn deinterleave_index_arithmetic() {
        let s: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let subsets = deinterleave(&s, 3, 4).unwrap();
        assert_eq!(subsets.len(), 4);
        assert!(subsets.iter().all(|f| f.len() == 1));
        assert_eq!(subsets[0][0].values, vec![0.0, 4.0, 8.0]);
        assert_eq!(subsets[3][0].values, vec![3.0, 7.0, 11.0]);
        assert_eq!(subsets[2][0].subset_index, 2);
        assert_eq!(reinterleave(&subsets), s);
    }

    #[test]
    fn deinterleave_errors() {
        assert!(matches!(
            deinterleave(&[0.0; 11], 3, 4),
            Err(Error::InsufficientSamples {
                needed: 12,
                available: 11
            })
        ));
        assert_eq!(subset_count(5e6, 1.25e6).unwrap(), 4);
        assert!(matches!(
            subset_count(5e6, 1.5e6),
            Err(Error::NonIntegerRatio { .. })
        ));
    }

    #[test]
    fn trailing_partial_period_dropped() {
        let s: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let subsets = deinterleave(&s, 3, 4).unwrap();
        assert_eq!(subsets[0].len(), 2);
        assert_eq!(reinterleave(&subsets), s[..24].to_vec());
    }

    proptest! {
        #[test]
        fn interleave_bijection(periods in 1usize..5, k in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<f64> = (0..periods * 7 * k).map(|_| rng.random()).collect();
            let subsets = deinterleave(&s, 7, k).unwrap();
            prop_assert_eq!(reinterleave(&subsets), s);
        }

        #[test]
        fn linearity(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let sys = system(31, InverseKind::Spectral);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y1: Vec<f64> = (0..31).map(|_| rng.random::<f64>() - 0.5).collect();
            let y2: Vec<f64> = (0..31).map(|_| rng.random::<f64>() - 0.5).collect();
            let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
            let x1 = sys.solve(&y1).unwrap();
            let x2 = sys.solve(&y2).unwrap();
            let xm = sys.solve(&mix).unwrap();
            for i in 0..31 {
                prop_assert!((xm[i] - (a * x1[i] + b * x2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn shift_equivariance(seed in 0u64..1000, shift in 1usize..19) {
            // y shifted by one slot corresponds to x shifted the same way
            let sys = system(19, InverseKind::Dense);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..19).map(|_| rng.random()).collect();
            let x = sys.solve(&y).unwrap();
            let ys: Vec<f64> = (0..19).map(|i| y[(i + 19 - shift) % 19]).collect();
            let xs = sys.solve(&ys).unwrap();
            for i in 0..19 {
                prop_assert!((xs[i] - x[(i + 19 - shift) % 19]).abs() < 1e-10);
            }
        }
    }
}
