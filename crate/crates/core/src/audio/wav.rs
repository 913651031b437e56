//! RIFF/WAVE PCM reader and writer.
//!
//! Supported encodings: 16/24/32-bit integer PCM and 32-bit IEEE float.
//! Written files use the canonical 44-byte header, little-endian samples,
//! no WAVE_FORMAT_EXTENSIBLE.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::audio::AudioBuffer;
use crate::duration::Duration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int16,
    Int24,
    Int32,
    Float32,
}

impl SampleFormat {
    pub fn bit_depth(self) -> u16 {
        match self {
            SampleFormat::Int16 => 16,
            SampleFormat::Int24 => 24,
            SampleFormat::Int32 | SampleFormat::Float32 => 32,
        }
    }

    fn bytes_per_sample(self) -> u16 {
        self.bit_depth() / 8
    }

    /// Integer sample format with the given bit depth.
    pub fn from_bit_depth(bits: u16) -> Result<SampleFormat> {
        match bits {
            16 => Ok(SampleFormat::Int16),
            24 => Ok(SampleFormat::Int24),
            32 => Ok(SampleFormat::Int32),
            other => Err(Error::BadFlavour(format!("unsupported bit depth {other}"))),
        }
    }
}

/// Properties read from the fmt and data chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format: SampleFormat,
    pub channels: u16,
    pub sample_rate: u32,
    pub frames: u64,
}

impl WavInfo {
    pub fn bit_depth(&self) -> u16 {
        self.format.bit_depth()
    }

    pub fn duration(&self) -> Duration {
        if self.sample_rate == 0 {
            return Duration::ZERO;
        }
        Duration::from_secs_f64(self.frames as f64 / self.sample_rate as f64)
    }
}

struct FmtChunk {
    format: SampleFormat,
    channels: u16,
    sample_rate: u32,
}

fn bad(path: &Path, what: &str) -> Error {
    Error::NotAWav(format!("{}: {what}", path.display()))
}

fn read_exact_or(path: &Path, reader: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| bad(path, "truncated file"))
}

fn read_u16(path: &Path, reader: &mut impl Read) -> Result<u16> {
    let mut buf = [0u8; 2];
    read_exact_or(path, reader, &mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(path: &Path, reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or(path, reader, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Walks the chunk list up to the data chunk and returns fmt info plus the
/// data chunk's byte size.
fn read_header<R: Read + Seek>(path: &Path, reader: &mut R) -> Result<(FmtChunk, u64)> {
    let mut magic = [0u8; 4];
    read_exact_or(path, reader, &mut magic)?;
    if &magic != b"RIFF" {
        return Err(bad(path, "missing RIFF magic"));
    }
    let _riff_size = read_u32(path, reader)?;
    read_exact_or(path, reader, &mut magic)?;
    if &magic != b"WAVE" {
        return Err(bad(path, "missing WAVE form type"));
    }

    let mut fmt: Option<FmtChunk> = None;
    loop {
        let mut chunk_id = [0u8; 4];
        if reader.read_exact(&mut chunk_id).is_err() {
            return Err(bad(path, "no data chunk"));
        }
        let chunk_size = read_u32(path, reader)? as u64;
        match &chunk_id {
            b"fmt " => {
                if chunk_size < 16 {
                    return Err(bad(path, "fmt chunk too small"));
                }
                let audio_format = read_u16(path, reader)?;
                let channels = read_u16(path, reader)?;
                let sample_rate = read_u32(path, reader)?;
                let _byte_rate = read_u32(path, reader)?;
                let _block_align = read_u16(path, reader)?;
                let bits = read_u16(path, reader)?;
                let format = match (audio_format, bits) {
                    (1, 16) => SampleFormat::Int16,
                    (1, 24) => SampleFormat::Int24,
                    (1, 32) => SampleFormat::Int32,
                    (3, 32) => SampleFormat::Float32,
                    (f, b) => {
                        return Err(Error::UnsupportedWav(format!(
                            "{}: format code {f} with {b} bits",
                            path.display()
                        )))
                    }
                };
                if channels == 0 {
                    return Err(bad(path, "zero channels"));
                }
                reader
                    .seek(SeekFrom::Current(chunk_size as i64 - 16))
                    .map_err(|e| Error::io(path, e))?;
                fmt = Some(FmtChunk {
                    format,
                    channels,
                    sample_rate,
                });
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| bad(path, "data chunk before fmt chunk"))?;
                return Ok((fmt, chunk_size));
            }
            _ => {
                // Skip unknown chunks; chunk data is padded to even length.
                let skip = chunk_size + (chunk_size & 1);
                reader
                    .seek(SeekFrom::Current(skip as i64))
                    .map_err(|e| Error::io(path, e))?;
            }
        }
    }
}

/// Reads format, channels, sampling rate, and frame count without decoding
/// samples.
pub fn scan_wav(path: &Path) -> Result<WavInfo> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut reader = BufReader::new(file);
    let (fmt, data_size) = read_header(path, &mut reader)?;
    let data_start = reader.stream_position().map_err(|e| Error::io(path, e))?;
    if data_start + data_size > file_len {
        return Err(bad(path, "truncated file"));
    }
    let frame_bytes = fmt.format.bytes_per_sample() as u64 * fmt.channels as u64;
    if data_size % frame_bytes != 0 {
        return Err(bad(path, "data chunk is not a whole number of frames"));
    }
    Ok(WavInfo {
        format: fmt.format,
        channels: fmt.channels,
        sample_rate: fmt.sample_rate,
        frames: data_size / frame_bytes,
    })
}

/// Decodes a WAV file to per-channel f64 amplitudes. Integer samples map to
/// float by division with 2^(bits-1).
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut reader = BufReader::new(file);
    let (fmt, data_size) = read_header(path, &mut reader)?;
    let data_start = reader.stream_position().map_err(|e| Error::io(path, e))?;
    if data_start + data_size > file_len {
        return Err(bad(path, "truncated file"));
    }
    let frame_bytes = fmt.format.bytes_per_sample() as u64 * fmt.channels as u64;
    if data_size % frame_bytes != 0 {
        return Err(bad(path, "data chunk is not a whole number of frames"));
    }
    let frames = (data_size / frame_bytes) as usize;

    let mut data = vec![0u8; data_size as usize];
    read_exact_or(path, &mut reader, &mut data)?;

    let n_channels = fmt.channels as usize;
    let mut channels = vec![Vec::with_capacity(frames); n_channels];
    let step = fmt.format.bytes_per_sample() as usize;
    let mut offset = 0;
    for _ in 0..frames {
        for channel in channels.iter_mut() {
            let bytes = &data[offset..offset + step];
            let value = match fmt.format {
                SampleFormat::Int16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64 / 32_768.0,
                SampleFormat::Int24 => {
                    let raw = (bytes[0] as i32)
                        | ((bytes[1] as i32) << 8)
                        | ((bytes[2] as i8 as i32) << 16);
                    raw as f64 / 8_388_608.0
                }
                SampleFormat::Int32 => {
                    i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
                        / 2_147_483_648.0
                }
                SampleFormat::Float32 => {
                    f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
                }
            };
            channel.push(value);
            offset += step;
        }
    }
    Ok(AudioBuffer::new(channels, fmt.sample_rate))
}

fn quantize(value: f64, full_scale: f64, min: i64, max: i64) -> i64 {
    ((value * full_scale).round() as i64).clamp(min, max)
}

/// Encodes a buffer as WAV with the given sample format. Float amplitudes
/// map to integers by multiplication with 2^(bits-1), clipped to range.
pub fn write_wav(path: &Path, buf: &AudioBuffer, format: SampleFormat) -> Result<WavInfo> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);

    let channels = buf.channel_count() as u16;
    let frames = buf.frames() as u64;
    let bytes_per_sample = format.bytes_per_sample();
    let block_align = bytes_per_sample * channels;
    let data_size = frames * block_align as u64;
    if data_size > u32::MAX as u64 - 36 {
        return Err(Error::UnsupportedWav(format!(
            "{}: audio too long for a RIFF container",
            path.display()
        )));
    }
    let audio_format: u16 = match format {
        SampleFormat::Float32 => 3,
        _ => 1,
    };

    let mut write =
        |bytes: &[u8]| -> Result<()> { writer.write_all(bytes).map_err(|e| Error::io(path, e)) };
    write(b"RIFF")?;
    write(&(36 + data_size as u32).to_le_bytes())?;
    write(b"WAVE")?;
    write(b"fmt ")?;
    write(&16u32.to_le_bytes())?;
    write(&audio_format.to_le_bytes())?;
    write(&channels.to_le_bytes())?;
    write(&buf.sample_rate().to_le_bytes())?;
    write(&(buf.sample_rate() * block_align as u32).to_le_bytes())?;
    write(&block_align.to_le_bytes())?;
    write(&format.bit_depth().to_le_bytes())?;
    write(b"data")?;
    write(&(data_size as u32).to_le_bytes())?;

    for frame in 0..buf.frames() {
        for channel in buf.channels() {
            let value = channel[frame];
            match format {
                SampleFormat::Int16 => {
                    let v = quantize(value, 32_768.0, -32_768, 32_767) as i16;
                    write(&v.to_le_bytes())?;
                }
                SampleFormat::Int24 => {
                    let v = quantize(value, 8_388_608.0, -8_388_608, 8_388_607) as i32;
                    write(&v.to_le_bytes()[..3])?;
                }
                SampleFormat::Int32 => {
                    let v =
                        quantize(value, 2_147_483_648.0, i32::MIN as i64, i32::MAX as i64) as i32;
                    write(&v.to_le_bytes())?;
                }
                SampleFormat::Float32 => {
                    write(&(value as f32).to_le_bytes())?;
                }
            }
        }
    }
    if data_size % 2 == 1 {
        write(&[0u8])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(WavInfo {
        format,
        channels,
        sample_rate: buf.sample_rate(),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sine(frames: usize, rate: u32, freq: f64, amp: f64) -> Vec<f64> {
        (0..frames)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn scan_reads_fmt_fields() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let buf = AudioBuffer::new(vec![sine(16_000, 16_000, 440.0, 0.5)], 16_000);
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        let info = scan_wav(&path).unwrap();
        assert_eq!(info.bit_depth(), 16);
        assert_eq!(info.channels, 1);
        assert_eq!(info.sample_rate, 16_000);
        assert_eq!(info.duration(), Duration::from_secs(1));
    }

    #[test]
    fn zero_frame_file_has_zero_duration() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        let buf = AudioBuffer::new(vec![vec![]], 8_000);
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        let info = scan_wav(&path).unwrap();
        assert_eq!(info.frames, 0);
        assert_eq!(info.duration(), Duration::ZERO);
    }

    #[test]
    fn stereo_8khz_scan() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let buf = AudioBuffer::new(
            vec![sine(800, 8_000, 200.0, 0.4), sine(800, 8_000, 300.0, 0.4)],
            8_000,
        );
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        let info = scan_wav(&path).unwrap();
        assert_eq!(info.channels, 2);
        assert_eq!(info.sample_rate, 8_000);
    }

    #[test]
    fn full_scale_16bit_maps_to_just_below_one() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fs.wav");
        let buf = AudioBuffer::new(vec![vec![32_767.0 / 32_768.0]], 16_000);
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        let read = read_wav(&path).unwrap();
        let value = read.channels()[0][0];
        assert!((value - 0.999_97).abs() < 1e-5, "got {value}");
    }

    #[test]
    fn round_trip_is_exact_per_bit_depth() {
        let dir = tempdir().unwrap();
        for (format, scale) in [
            (SampleFormat::Int16, 32_768.0),
            (SampleFormat::Int24, 8_388_608.0),
            (SampleFormat::Int32, 2_147_483_648.0),
        ] {
            // Amplitudes on the integer grid round-trip exactly.
            let samples: Vec<f64> = (33..997)
                .map(|i| ((i * 7_919) % 1_000 - 500) as f64 * 977.0)
                .map(|v| (v % scale) / scale)
                .collect();
            let path = dir.path().join(format!("rt{}.wav", format.bit_depth()));
            let buf = AudioBuffer::new(vec![samples.clone(), samples.clone()], 44_100);
            write_wav(&path, &buf, format).unwrap();
            let read = read_wav(&path).unwrap();
            assert_eq!(read, buf, "round trip at {:?}", format);
        }
    }

    #[test]
    fn float32_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let samples: Vec<f64> = sine(100, 8_000, 100.0, 0.9)
            .into_iter()
            .map(|v| v as f32 as f64)
            .collect();
        let buf = AudioBuffer::new(vec![samples], 8_000);
        write_wav(&path, &buf, SampleFormat::Float32).unwrap();
        assert_eq!(read_wav(&path).unwrap(), buf);
    }

    #[test]
    fn silence_round_trip_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("z.wav");
        let buf = AudioBuffer::new(vec![vec![0.0; 128]], 16_000);
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        assert_eq!(read_wav(&path).unwrap(), buf);
    }

    #[test]
    fn rejects_non_wav_and_truncated() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not audio at all").unwrap();
        assert!(matches!(scan_wav(&path), Err(Error::NotAWav(_))));

        let good = dir.path().join("good.wav");
        let buf = AudioBuffer::new(vec![vec![0.25; 64]], 8_000);
        write_wav(&good, &buf, SampleFormat::Int16).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(scan_wav(&path), Err(Error::NotAWav(_))));
    }

    #[test]
    fn canonical_header_is_44_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.wav");
        let buf = AudioBuffer::new(vec![vec![0.0; 4]], 8_000);
        write_wav(&path, &buf, SampleFormat::Int16).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 44 + 4 * 2);
        assert_eq!(&bytes[..4], b"RIFF");
        assert_eq!(&bytes[8..16], b"WAVEfmt ");
        assert_eq!(&bytes[36..40], b"data");
    }
}
