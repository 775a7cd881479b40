//! Tail-recurrent observation schedules.
//!
//! A schedule is a finite prefix of strides followed by one stride repeated
//! forever. The text form writes the prefix then the tail in parentheses:
//! `13213(2)` is `1, 3, 2, 1, 3, 2, 2, 2, ...`. When any prefix stride has two
//! or more digits the prefix is comma separated: `1,3,2,13(2)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ScheduleError;

/// Canonical tail-recurrent schedule. The last prefix element, if any,
/// differs from the tail.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    prefix: Vec<usize>,
    tail: usize,
}

impl Schedule {
    /// Canonicalizes `(prefix, tail)` by absorbing trailing prefix strides
    /// equal to the tail.
    pub fn new(mut prefix: Vec<usize>, tail: usize) -> Result<Self, ScheduleError> {
        if tail == 0 || prefix.contains(&0) {
            return Err(ScheduleError::ZeroStride);
        }
        while prefix.last() == Some(&tail) {
            prefix.pop();
        }
        Ok(Self { prefix, tail })
    }

    /// The schedule `(k̄)`.
    pub fn recurrent(tail: usize) -> Result<Self, ScheduleError> {
        Self::new(Vec::new(), tail)
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn tail(&self) -> usize {
        self.tail
    }

    /// Number of policy layers: prefix length plus one for the tail.
    pub fn len(&self) -> usize {
        self.prefix.len() + 1
    }

    /// Always false; a schedule has at least its tail.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride used at check-in interval `i` (0-based).
    pub fn stride(&self, i: usize) -> usize {
        self.prefix.get(i).copied().unwrap_or(self.tail)
    }

    /// Largest stride appearing anywhere in the schedule.
    pub fn max_stride(&self) -> usize {
        self.prefix.iter().copied().fold(self.tail, usize::max)
    }

    /// Checks the stride bound and the maximum length.
    pub fn check_bounds(&self, stride_bound: usize, max_len: Option<usize>) -> Result<(), ScheduleError> {
        let worst = self.max_stride();
        if worst > stride_bound {
            return Err(ScheduleError::StrideOutOfBounds { stride: worst, bound: stride_bound });
        }
        if let Some(max) = max_len {
            if self.len() > max {
                return Err(ScheduleError::TooLong { len: self.len(), max });
            }
        }
        Ok(())
    }

    /// New schedule with `k` at the head.
    pub fn prepend(&self, k: usize, stride_bound: usize) -> Result<Self, ScheduleError> {
        if k == 0 {
            return Err(ScheduleError::ZeroStride);
        }
        if k > stride_bound {
            return Err(ScheduleError::StrideOutOfBounds { stride: k, bound: stride_bound });
        }
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.push(k);
        prefix.extend_from_slice(&self.prefix);
        Self::new(prefix, self.tail)
    }

    /// The schedule with its first stride removed.
    pub fn suffix(&self) -> Self {
        match self.prefix.split_first() {
            Some((_, rest)) => Self { prefix: rest.to_vec(), tail: self.tail },
            None => self.clone(),
        }
    }

    /// First `n` strides.
    pub fn expand(&self, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.stride(i)).collect()
    }

    /// Number of check-ins received by time `t`:
    /// `min { k : t < sum_{i<k} stride(i) }`.
    pub fn checkin_index(&self, t: u64) -> u64 {
        let mut elapsed = 0u64;
        for (k, &d) in self.prefix.iter().enumerate() {
            elapsed += d as u64;
            if t < elapsed {
                return k as u64 + 1;
            }
        }
        let done = self.prefix.len() as u64;
        let tail = self.tail as u64;
        // Past the prefix: intervals of length `tail` starting at `elapsed`.
        done + 1 + (t - elapsed) / tail
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix.iter().any(|&d| d >= 10) {
            let parts: Vec<String> = self.prefix.iter().map(|d| d.to_string()).collect();
            write!(f, "{}", parts.join(","))?;
            // A lone multi-digit stride needs a comma to stay unambiguous.
            if parts.len() == 1 {
                f.write_str(",")?;
            }
        } else {
            for d in &self.prefix {
                write!(f, "{d}")?;
            }
        }
        write!(f, "({})", self.tail)
    }
}

impl FromStr for Schedule {
    type Err = ScheduleError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |pos: usize, msg: &str| ScheduleError::Parse { pos, msg: msg.to_string() };
        let open = text.find('(').ok_or_else(|| err(text.len(), "missing '(' before the tail stride"))?;
        if !text.ends_with(')') {
            return Err(err(text.len(), "expected ')' at end of schedule"));
        }
        let head = &text[..open];
        let tail_text = &text[open + 1..text.len() - 1];
        if tail_text.is_empty() {
            return Err(err(open + 1, "empty tail stride"));
        }
        if let Some(i) = tail_text.find(|c: char| !c.is_ascii_digit()) {
            return Err(err(open + 1 + i, "tail stride must be a decimal number"));
        }
        let tail: usize = tail_text.parse().map_err(|_| err(open + 1, "tail stride out of range"))?;

        let mut prefix = Vec::new();
        if head.contains(',') {
            let mut pos = 0;
            let body = if head.len() > 1 { head.strip_suffix(',').unwrap_or(head) } else { head };
            for part in body.split(',') {
                if part.is_empty() {
                    return Err(err(pos, "empty stride in comma-separated prefix"));
                }
                if let Some(i) = part.find(|c: char| !c.is_ascii_digit()) {
                    return Err(err(pos + i, "prefix strides must be decimal numbers"));
                }
                prefix.push(part.parse().map_err(|_| err(pos, "stride out of range"))?);
                pos += part.len() + 1;
            }
        } else {
            for (i, c) in head.char_indices() {
                let d = c.to_digit(10).ok_or_else(|| err(i, "prefix strides must be digits"))?;
                prefix.push(d as usize);
            }
        }
        if prefix.contains(&0) || tail == 0 {
            return Err(err(0, "strides must be at least 1"));
        }
        Schedule::new(prefix, tail)
    }
}

/// Canonical text order; this fixes stage extension order and output order.
impl Ord for Schedule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl PartialOrd for Schedule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
