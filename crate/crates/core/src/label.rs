use core::fmt;

use crate::error::{Error, Result};

/// Direction of a timbre attribute relative to normal sounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Decreased = -1,
    Unchanged = 0,
    Increased = 1,
}

impl Label {
    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Label::Decreased),
            0 => Ok(Label::Unchanged),
            1 => Ok(Label::Increased),
            other => Err(Error::InvalidLabel(other)),
        }
    }

    /// Position in `[-1, 0, 1]` order, for count tables.
    pub fn slot(self) -> usize {
        (self.value() + 1) as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Map a score in `[0, 1]` to a label with inclusive outer bounds:
/// `score <= t` is decreased, `score >= 1 - t` is increased.
pub fn threshold_label(score: f64, t: f64) -> Result<Label> {
    if !(0.0..0.5).contains(&t) {
        return Err(Error::InvalidThreshold(t));
    }
    if !score.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(if score <= t {
        Label::Decreased
    } else if score >= 1.0 - t {
        Label::Increased
    } else {
        Label::Unchanged
    })
}
