//! Version strings and their ordering.
//!
//! Versions are dotted segments compared numerically where both segments are
//! integers, lexicographically otherwise, with the full string as a final
//! tie-break. A pre-release suffix introduced by `-` orders before the plain
//! release: `1.0.0-rc1 < 1.0.0`.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version(String);

impl Version {
    pub fn new(text: impl Into<String>) -> Version {
        Version(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn base(&self) -> &str {
        match self.0.split_once('-') {
            Some((base, _)) => base,
            None => &self.0,
        }
    }

    fn pre_release(&self) -> Option<&str> {
        self.0.split_once('-').map(|(_, pre)| pre)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Version {
    fn from(text: &str) -> Version {
        Version::new(text)
    }
}

fn compare_bases(a: &str, b: &str) -> Ordering {
    let mut left = a.split('.');
    let mut right = b.split('.');
    loop {
        match (left.next(), right.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(l), Some(r)) => {
                let ord = match (l.parse::<u64>(), r.parse::<u64>()) {
                    (Ok(ln), Ok(rn)) => ln.cmp(&rn),
                    _ => l.cmp(r),
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Version) -> Ordering {
        compare_bases(self.base(), other.base())
            .then_with(|| match (self.pre_release(), other.pre_release()) {
                (None, None) => Ordering::Equal,
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (Some(a), Some(b)) => a.cmp(b),
            })
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Version) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The greatest version of a list, if any.
pub fn latest(versions: &[Version]) -> Option<&Version> {
    versions.iter().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        Version::new(s)
    }

    #[test]
    fn numeric_segments_compare_numerically() {
        assert!(v("1.10.0") > v("1.9.0"));
        assert!(v("2.0") > v("1.99.99"));
        assert!(v("1.0.0") < v("1.0.1"));
    }

    #[test]
    fn shorter_version_orders_before_extension() {
        assert!(v("1.0") < v("1.0.0"));
    }

    #[test]
    fn pre_release_orders_before_release() {
        assert!(v("1.0.0-rc1") < v("1.0.0"));
        assert!(v("1.0.0-alpha") < v("1.0.0-beta"));
    }

    #[test]
    fn latest_of_dotted_versions() {
        let versions = [v("1.0.0"), v("1.1.1"), v("1.2.0")];
        assert_eq!(latest(&versions).unwrap().as_str(), "1.2.0");
    }

    #[test]
    fn non_numeric_segments_fall_back_to_lexicographic() {
        assert!(v("1.a") < v("1.b"));
        assert!(v("1.0") < v("1.a"));
    }
}
