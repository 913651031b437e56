//! Media conversion targets: bit depth, sampling rate, channel selection,
//! and mix-down. Every flavour gets its own cache folder, keyed by a short
//! deterministic id.

use std::fs;
use std::path::Path;

use crate::audio::{read_wav, resample, scan_wav, write_wav, AudioBuffer, SampleFormat, WavInfo};
use crate::digest::digest_bytes;
use crate::error::{Error, Result};

/// Reserved id of the empty flavour (original files, no conversion).
pub const RAW_FLAVOUR_ID: &str = "raw";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Flavour {
    /// Target bit depth in bits: 16, 24, or 32 (integer PCM).
    pub bit_depth: Option<u16>,
    /// Target sampling rate in Hz.
    pub sampling_rate: Option<u32>,
    /// 0-based input channels to select, in output order.
    pub channels: Option<Vec<usize>>,
    /// Mix all channels down to one by arithmetic mean.
    pub mixdown: bool,
}

impl Flavour {
    pub fn raw() -> Flavour {
        Flavour::default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bits) = self.bit_depth {
            SampleFormat::from_bit_depth(bits)?;
        }
        if self.sampling_rate == Some(0) {
            return Err(Error::BadFlavour("sampling rate must be positive".into()));
        }
        if self.channels.is_some() && self.mixdown {
            return Err(Error::BadFlavour(
                "channel selection and mixdown are mutually exclusive".into(),
            ));
        }
        if matches!(&self.channels, Some(c) if c.is_empty()) {
            return Err(Error::BadFlavour("channel selection is empty".into()));
        }
        Ok(())
    }

    pub fn is_raw(&self) -> bool {
        self.bit_depth.is_none()
            && self.sampling_rate.is_none()
            && self.channels.is_none()
            && !self.mixdown
    }

    /// Deterministic short id; the empty flavour maps to `"raw"`.
    pub fn id(&self) -> String {
        if self.is_raw() {
            return RAW_FLAVOUR_ID.to_string();
        }
        let channels = self
            .channels
            .as_ref()
            .map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        let canonical = format!(
            "bit_depth={};channels={};mixdown={};rate={}",
            self.bit_depth.map(|b| b.to_string()).unwrap_or_default(),
            channels,
            self.mixdown,
            self.sampling_rate
                .map(|r| r.to_string())
                .unwrap_or_default(),
        );
        digest_bytes(canonical.as_bytes())[..8].to_string()
    }

    /// Whether a file with these properties already satisfies every set
    /// field of the flavour.
    fn conforms(&self, info: &WavInfo) -> bool {
        if let Some(bits) = self.bit_depth {
            if info.bit_depth() != bits || info.format == SampleFormat::Float32 {
                return false;
            }
        }
        if let Some(rate) = self.sampling_rate {
            if info.sample_rate != rate {
                return false;
            }
        }
        if self.mixdown && info.channels > 1 {
            return false;
        }
        if let Some(selection) = &self.channels {
            let identity: Vec<usize> = (0..info.channels as usize).collect();
            if *selection != identity {
                return false;
            }
        }
        true
    }
}

/// Applies channel selection or mix-down. Selection may reorder and
/// duplicate channels; mix-down averages all channels into one.
pub fn remix(buf: &AudioBuffer, channels: Option<&[usize]>, mixdown: bool) -> Result<AudioBuffer> {
    if let Some(selection) = channels {
        let available = buf.channel_count();
        let mut out = Vec::with_capacity(selection.len());
        for &index in selection {
            if index >= available {
                return Err(Error::ChannelOutOfRange {
                    index,
                    channels: available,
                });
            }
            out.push(buf.channels()[index].clone());
        }
        return Ok(AudioBuffer::new(out, buf.sample_rate()));
    }
    if mixdown && buf.channel_count() > 1 {
        let frames = buf.frames();
        let n = buf.channel_count() as f64;
        let mut mono = Vec::with_capacity(frames);
        for i in 0..frames {
            mono.push(buf.channels().iter().map(|c| c[i]).sum::<f64>() / n);
        }
        return Ok(AudioBuffer::new(vec![mono], buf.sample_rate()));
    }
    Ok(buf.clone())
}

/// Converts one WAV file into the flavour's format, in the order
/// remix, resample, re-quantize. Files that already conform (and the raw
/// flavour) are copied verbatim. Returns the output file's properties.
pub fn convert(input: &Path, flavour: &Flavour, output: &Path) -> Result<WavInfo> {
    flavour.validate()?;
    let info = scan_wav(input)?;
    if let Some(selection) = &flavour.channels {
        if let Some(&index) = selection.iter().find(|&&i| i >= info.channels as usize) {
            return Err(Error::ChannelOutOfRange {
                index,
                channels: info.channels as usize,
            });
        }
    }
    if flavour.is_raw() || flavour.conforms(&info) {
        if let Some(parent) = output.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::copy(input, output).map_err(|e| Error::io(output, e))?;
        return Ok(info);
    }

    let buf = read_wav(input)?;
    let buf = remix(&buf, flavour.channels.as_deref(), flavour.mixdown)?;
    let buf = match flavour.sampling_rate {
        Some(rate) => resample(&buf, rate),
        None => buf,
    };
    let format = match flavour.bit_depth {
        Some(bits) => SampleFormat::from_bit_depth(bits)?,
        None => info.format,
    };
    if let Some(parent) = output.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_wav(output, &buf, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_fixture(path: &Path, channels: Vec<Vec<f64>>, rate: u32) {
        let buf = AudioBuffer::new(channels, rate);
        write_wav(path, &buf, SampleFormat::Int16).unwrap();
    }

    #[test]
    fn empty_flavour_id_is_raw() {
        assert_eq!(Flavour::raw().id(), "raw");
    }

    #[test]
    fn flavour_ids_are_deterministic_and_distinct() {
        let a = Flavour {
            sampling_rate: Some(8_000),
            ..Flavour::default()
        };
        let b = Flavour {
            sampling_rate: Some(8_000),
            ..Flavour::default()
        };
        let c = Flavour {
            sampling_rate: Some(16_000),
            ..Flavour::default()
        };
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), c.id());
        assert_ne!(a.id(), "raw");
    }

    #[test]
    fn channels_and_mixdown_are_exclusive() {
        let flavour = Flavour {
            channels: Some(vec![0]),
            mixdown: true,
            ..Flavour::default()
        };
        assert!(flavour.validate().is_err());
    }

    #[test]
    fn mixdown_of_identical_channels_is_identity() {
        let signal: Vec<f64> = (0..64).map(|i| (i as f64 * 0.2).sin() * 0.5).collect();
        let buf = AudioBuffer::new(vec![signal.clone(), signal.clone()], 8_000);
        let out = remix(&buf, None, true).unwrap();
        assert_eq!(out.channel_count(), 1);
        for (a, b) in out.channels()[0].iter().zip(&signal) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixdown_never_exceeds_input_peak() {
        let left: Vec<f64> = (0..256).map(|i| ((i as f64) * 0.11).sin() * 0.9).collect();
        let right: Vec<f64> = (0..256).map(|i| ((i as f64) * 0.23).cos() * 0.7).collect();
        let peak_in = left
            .iter()
            .chain(&right)
            .fold(0f64, |acc, v| acc.max(v.abs()));
        let buf = AudioBuffer::new(vec![left, right], 8_000);
        let out = remix(&buf, None, true).unwrap();
        let peak_out = out.channels()[0]
            .iter()
            .fold(0f64, |acc, v| acc.max(v.abs()));
        assert!(peak_out <= peak_in + 1e-12);
    }

    #[test]
    fn channel_selection_picks_and_duplicates() {
        let left = vec![0.1; 16];
        let right = vec![-0.2; 16];
        let buf = AudioBuffer::new(vec![left.clone(), right.clone()], 8_000);
        let picked = remix(&buf, Some(&[1]), false).unwrap();
        assert_eq!(picked.channels(), std::slice::from_ref(&right));
        let doubled = remix(&buf, Some(&[0, 0]), false).unwrap();
        assert_eq!(doubled.channels(), &[left.clone(), left]);
        assert!(matches!(
            remix(&buf, Some(&[2]), false),
            Err(Error::ChannelOutOfRange { .. })
        ));
    }

    #[test]
    fn convert_to_8khz_mono() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("in.wav");
        let output = dir.path().join("out.wav");
        write_fixture(&input, vec![vec![0.5; 16_000], vec![0.5; 16_000]], 16_000);
        let flavour = Flavour {
            sampling_rate: Some(8_000),
            mixdown: true,
            bit_depth: Some(16),
            ..Flavour::default()
        };
        let info = convert(&input, &flavour, &output).unwrap();
        assert_eq!(info.channels, 1);
        assert_eq!(info.sample_rate, 8_000);
        assert_eq!(info.bit_depth(), 16);
        // DC amplitude survives conversion.
        let out = read_wav(&output).unwrap();
        let mid = out.channels()[0][out.frames() / 2];
        assert!((mid - 0.5).abs() < 1e-3, "got {mid}");
    }

    #[test]
    fn raw_flavour_copies_bytes_verbatim() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("in.wav");
        let output = dir.path().join("out.wav");
        write_fixture(&input, vec![vec![0.25; 256]], 16_000);
        convert(&input, &Flavour::raw(), &output).unwrap();
        assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
    }

    #[test]
    fn conforming_file_is_copied_not_recoded() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("in.wav");
        let output = dir.path().join("out.wav");
        write_fixture(&input, vec![vec![0.25; 256]], 8_000);
        let flavour = Flavour {
            sampling_rate: Some(8_000),
            bit_depth: Some(16),
            mixdown: true,
            ..Flavour::default()
        };
        convert(&input, &flavour, &output).unwrap();
        assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
    }

    #[test]
    fn duration_is_preserved_within_one_frame() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("in.wav");
        write_fixture(&input, vec![vec![0.1; 16_000]], 16_000);
        for rate in [8_000u32, 22_050, 44_100] {
            let output = dir.path().join(format!("out{rate}.wav"));
            let flavour = Flavour {
                sampling_rate: Some(rate),
                ..Flavour::default()
            };
            let info = convert(&input, &flavour, &output).unwrap();
            let diff = (info.duration().as_secs_f64() - 1.0).abs();
            assert!(diff <= 1.0 / rate as f64, "rate {rate}: off by {diff}");
        }
    }
}
