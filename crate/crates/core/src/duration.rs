//! Time offsets with nanosecond resolution and a day-clock text form.
//!
//! The text form is `D days HH:MM:SS[.fffffffff]`, e.g. `0 days 00:00:01.5`.
//! Plain decimal seconds (`"0"`, `"1.5"`) are accepted on input.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const NANOS_PER_SEC: i64 = 1_000_000_000;

/// A non-negative time offset stored as integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Duration(i64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub fn from_nanos(nanos: i64) -> Duration {
        Duration(nanos.max(0))
    }

    pub fn from_secs(secs: u64) -> Duration {
        Duration(secs as i64 * NANOS_PER_SEC)
    }

    /// Builds a duration from fractional seconds, rounding to whole nanoseconds.
    pub fn from_secs_f64(secs: f64) -> Duration {
        Duration(((secs * NANOS_PER_SEC as f64).round() as i64).max(0))
    }

    pub fn as_nanos(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    /// Parses either the day-clock form or plain decimal seconds.
    pub fn parse(text: &str) -> Result<Duration> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::BadDuration(text.to_string()));
        }
        if let Some(days_split) = text.find(" days ") {
            let days: i64 = text[..days_split]
                .parse()
                .map_err(|_| Error::BadDuration(text.to_string()))?;
            let clock = &text[days_split + " days ".len()..];
            let nanos = parse_clock(clock).ok_or_else(|| Error::BadDuration(text.to_string()))?;
            if days < 0 {
                return Err(Error::BadDuration(text.to_string()));
            }
            return Ok(Duration(days * 86_400 * NANOS_PER_SEC + nanos));
        }
        // Plain seconds, possibly fractional.
        let secs: f64 = text
            .parse()
            .map_err(|_| Error::BadDuration(text.to_string()))?;
        if !secs.is_finite() || secs < 0.0 {
            return Err(Error::BadDuration(text.to_string()));
        }
        Ok(Duration::from_secs_f64(secs))
    }
}

/// Parses `HH:MM:SS[.f...]` into nanoseconds.
fn parse_clock(clock: &str) -> Option<i64> {
    let mut parts = clock.split(':');
    let hours: i64 = parts.next()?.parse().ok()?;
    let minutes: i64 = parts.next()?.parse().ok()?;
    let seconds_part = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let (secs_text, frac_text) = match seconds_part.split_once('.') {
        Some((s, f)) => (s, Some(f)),
        None => (seconds_part, None),
    };
    let seconds: i64 = secs_text.parse().ok()?;
    if !(0..60).contains(&minutes) || !(0..60).contains(&seconds) || hours < 0 {
        return None;
    }
    let mut frac_nanos: i64 = 0;
    if let Some(frac) = frac_text {
        if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut digits = frac.to_string();
        while digits.len() < 9 {
            digits.push('0');
        }
        frac_nanos = digits.parse().ok()?;
    }
    Some(((hours * 60 + minutes) * 60 + seconds) * NANOS_PER_SEC + frac_nanos)
}

impl fmt::Display for Duration {
    /// Day-clock form; the fractional part is trimmed of trailing zeros
    /// and omitted entirely for whole seconds.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.0;
        let days = total / (86_400 * NANOS_PER_SEC);
        let rem = total % (86_400 * NANOS_PER_SEC);
        let hours = rem / (3_600 * NANOS_PER_SEC);
        let rem = rem % (3_600 * NANOS_PER_SEC);
        let minutes = rem / (60 * NANOS_PER_SEC);
        let rem = rem % (60 * NANOS_PER_SEC);
        let seconds = rem / NANOS_PER_SEC;
        let nanos = rem % NANOS_PER_SEC;
        write!(f, "{days} days {hours:02}:{minutes:02}:{seconds:02}")?;
        if nanos != 0 {
            let mut frac = format!("{nanos:09}");
            while frac.ends_with('0') {
                frac.pop();
            }
            write!(f, ".{frac}")?;
        }
        Ok(())
    }
}

impl FromStr for Duration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Duration> {
        Duration::parse(s)
    }
}
