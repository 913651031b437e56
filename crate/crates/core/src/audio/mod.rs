//! WAV PCM reading and writing, resampling, and remixing.

pub mod resample;
pub mod wav;

pub use resample::resample;
pub use wav::{read_wav, scan_wav, write_wav, SampleFormat, WavInfo};

use crate::duration::Duration;

/// Decoded audio: one amplitude sequence per channel, values in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// All channels must have equal length.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> AudioBuffer {
        assert!(
            !channels.is_empty(),
            "audio buffer needs at least one channel"
        );
        let frames = channels[0].len();
        assert!(
            channels.iter().all(|c| c.len() == frames),
            "all channels must have equal length"
        );
        AudioBuffer {
            channels,
            sample_rate,
        }
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.frames() as f64 / self.sample_rate as f64)
    }
}
