//! Stream files.
//!
//! Binary layout: one ASCII header line, then `length` little-endian `f64` samples.
//!
//! ```text
//! CTAOI-STREAM/1 f_s_hz=5000000 t0_s=0.0000608 length=10000 f_us_hz=1250000 ... seed=1\n
//! <length × 8 bytes>
//! ```
//!
//! Header fields are space-separated `key=value` pairs carrying the sampling rate,
//! start time, sample count and the full acquisition configuration.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::simulator::{AcquisitionConfig, SampledStream};

pub const MAGIC: &str = "CTAOI-STREAM/1";

const CONFIG_KEYS: &[&str] = &[
    "f_us_hz",
    "sound_speed_m_s",
    "mode",
    "duration_s",
    "noise_sigma",
    "modulation_efficiency",
    "sample_phase",
    "probe_x_m",
    "probe_y_m",
    "water_path_m",
    "seed",
];

/// `key=value` pairs describing an acquisition configuration, in a fixed order.
pub fn config_pairs(cfg: &AcquisitionConfig) -> Vec<(&'static str, String)> {
    vec![
        ("f_us_hz", cfg.f_us_hz.to_string()),
        ("f_s_hz", cfg.f_s_hz.to_string()),
        ("sound_speed_m_s", cfg.sound_speed_m_s.to_string()),
        ("mode", cfg.mode.to_string()),
        ("duration_s", cfg.duration_s.to_string()),
        ("noise_sigma", cfg.noise_sigma.to_string()),
        ("modulation_efficiency", cfg.modulation_efficiency.to_string()),
        ("sample_phase", cfg.sample_phase.to_string()),
        ("probe_x_m", cfg.probe_xy_m[0].to_string()),
        ("probe_y_m", cfg.probe_xy_m[1].to_string()),
        ("water_path_m", cfg.water_path_m.to_string()),
        ("seed", cfg.seed.to_string()),
    ]
}

fn header_line(stream: &SampledStream) -> String {
    let mut line = format!(
        "{MAGIC} f_s_hz={} t0_s={} length={}",
        stream.f_s_hz,
        stream.t0_s,
        stream.samples.len()
    );
    for (k, v) in config_pairs(&stream.config) {
        if k != "f_s_hz" {
            line.push_str(&format!(" {k}={v}"));
        }
    }
    line.push('\n');
    line
}

pub fn write_binary<W: Write>(stream: &SampledStream, mut w: W) -> Result<()> {
    w.write_all(header_line(stream).as_bytes())?;
    let mut buf = Vec::with_capacity(stream.samples.len() * 8);
    for s in &stream.samples {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map
        .get(key)
        .ok_or_else(|| Error::StreamFormat(format!("missing header field `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::StreamFormat(format!("bad value `{raw}` for `{key}`")))
}

pub fn read_binary<R: BufRead>(mut r: R) -> Result<SampledStream> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut parts = header.trim_end_matches('\n').split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::StreamFormat("missing CTAOI-STREAM/1 header".into()));
    }
    let mut map = BTreeMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::StreamFormat(format!("bad header token `{p}`")))?;
        if !(CONFIG_KEYS.contains(&k) || matches!(k, "f_s_hz" | "t0_s" | "length")) {
            return Err(Error::StreamFormat(format!("unknown header field `{k}`")));
        }
        map.insert(k.to_string(), v.to_string());
    }
    let length: usize = field(&map, "length")?;
    let f_s_hz: f64 = field(&map, "f_s_hz")?;
    let mode_raw: String = field(&map, "mode")?;
    let config = AcquisitionConfig {
        f_us_hz: field(&map, "f_us_hz")?,
        f_s_hz,
        sound_speed_m_s: field(&map, "sound_speed_m_s")?,
        mode: mode_raw.parse()?,
        duration_s: field(&map, "duration_s")?,
        noise_sigma: field(&map, "noise_sigma")?,
        modulation_efficiency: field(&map, "modulation_efficiency")?,
        sample_phase: field(&map, "sample_phase")?,
        probe_xy_m: [field(&map, "probe_x_m")?, field(&map, "probe_y_m")?],
        water_path_m: field(&map, "water_path_m")?,
        seed: field(&map, "seed")?,
    };
    let mut bytes = Vec::with_capacity(length * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != length * 8 {
        return Err(Error::StreamFormat(format!(
            "expected {} payload bytes, found {}",
            length * 8,
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(SampledStream {
        samples,
        f_s_hz,
        t0_s: field(&map, "t0_s")?,
        config,
    })
}

/// `sample,time_s,amplitude_au` CSV; meant for short streams.
pub fn to_csv(stream: &SampledStream) -> String {
    let mut out = String::from("sample,time_s,amplitude_au\n");
    for (i, s) in stream.samples.iter().enumerate() {
        out.push_str(&format!("{i},{},{s}\n", stream.t0_s + i as f64 / stream.f_s_hz));
    }
    out
}
