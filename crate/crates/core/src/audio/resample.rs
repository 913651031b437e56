//! Sample rate conversion with a Kaiser-windowed sinc filter.
//!
//! The filter uses a half-width of 16 taps at the lower of the two rates and
//! per-output weight normalization, which keeps constant signals constant
//! and handles the signal edges without droop.

use crate::audio::AudioBuffer;

const HALF_WIDTH: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind, by power series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..64 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < sum * 1e-14 {
            break;
        }
    }
    sum
}

fn kaiser(u: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resamples all channels to `target_rate`. Equal rates return the input
/// bit-exactly; output length is `round(frames * target / source)`.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    assert!(target_rate > 0, "target rate must be positive");
    let source_rate = buf.sample_rate();
    if source_rate == target_rate {
        return buf.clone();
    }

    let ratio = target_rate as f64 / source_rate as f64;
    let out_frames = (buf.frames() as f64 * ratio).round() as usize;
    // Cutoff sits at the lower Nyquist rate when downsampling.
    let scale = ratio.min(1.0);
    let reach = HALF_WIDTH / scale;

    let channels = buf
        .channels()
        .iter()
        .map(|input| {
            let mut output = Vec::with_capacity(out_frames);
            for n in 0..out_frames {
                let center = n as f64 / ratio;
                let lo = ((center - reach).ceil() as i64).max(0) as usize;
                let hi = ((center + reach).floor() as i64).min(input.len() as i64 - 1);
                let mut acc = 0.0;
                let mut weight_sum = 0.0;
                let mut i = lo;
                while (i as i64) <= hi {
                    let offset = i as f64 - center;
                    let weight = sinc(scale * offset) * kaiser(scale * offset / HALF_WIDTH);
                    acc += weight * input[i];
                    weight_sum += weight;
                    i += 1;
                }
                output.push(if weight_sum.abs() > 1e-12 {
                    acc / weight_sum
                } else {
                    0.0
                });
            }
            output
        })
        .collect();
    AudioBuffer::new(channels, target_rate)
}
