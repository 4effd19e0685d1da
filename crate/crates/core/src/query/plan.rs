use std::convert::Infallible;
use std::ops::Range;

use super::access::read_times;
use super::constraint::{CompareOp, Literal, Selection};
use super::QueryError;
use crate::metadata::{DataSource, TimeAxis};
use crate::store::SeriesStore;
use crate::time::{time_to_offset, TimeEncoding};

/// Conjunction of time clauses reduced to one interval. Each bound is
/// `(offset, inclusive)`; `None` is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimeInterval {
    pub lo: Option<(f64, bool)>,
    pub hi: Option<(f64, bool)>,
}

impl TimeInterval {
    /// Folds the `time` clauses of a constraint. `!=` cannot narrow an
    /// interval and is left to row-level selection.
    pub fn from_selections<'a>(
        selections: impl IntoIterator<Item = &'a Selection>,
        enc: &TimeEncoding,
    ) -> Result<Self, QueryError> {
        let mut interval = TimeInterval::default();
        for sel in selections {
            let v = literal_offset(&sel.literal, enc)?;
            match sel.op {
                CompareOp::Gt => interval.raise_lo(v, false),
                CompareOp::Ge => interval.raise_lo(v, true),
                CompareOp::Lt => interval.lower_hi(v, false),
                CompareOp::Le => interval.lower_hi(v, true),
                CompareOp::Eq => {
                    interval.raise_lo(v, true);
                    interval.lower_hi(v, true);
                }
                CompareOp::Ne => {}
            }
        }
        Ok(interval)
    }

    fn raise_lo(&mut self, v: f64, inclusive: bool) {
        let tighter = match self.lo {
            None => true,
            Some((cur, cur_incl)) => v > cur || (v == cur && cur_incl && !inclusive),
        };
        if tighter {
            self.lo = Some((v, inclusive));
        }
    }

    fn lower_hi(&mut self, v: f64, inclusive: bool) {
        let tighter = match self.hi {
            None => true,
            Some((cur, cur_incl)) => v < cur || (v == cur && cur_incl && !inclusive),
        };
        if tighter {
            self.hi = Some((v, inclusive));
        }
    }

    pub fn above_lo(&self, t: f64) -> bool {
        match self.lo {
            None => !t.is_nan(),
            Some((v, true)) => t >= v,
            Some((v, false)) => t > v,
        }
    }

    pub fn below_hi(&self, t: f64) -> bool {
        match self.hi {
            None => !t.is_nan(),
            Some((v, true)) => t <= v,
            Some((v, false)) => t < v,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.above_lo(t) && self.below_hi(t)
    }
}

/// A selection literal as an offset in the dataset's time encoding.
pub(crate) fn literal_offset(literal: &Literal, enc: &TimeEncoding) -> Result<f64, QueryError> {
    match literal {
        Literal::Number(x) => Ok(*x),
        Literal::Time(t) => Ok(time_to_offset(t, enc)?),
    }
}

/// Sample indices whose times fall inside `interval`. Never extends past the
/// axis; an unsatisfiable interval gives an empty range.
pub fn plan_time_range(
    axis: &TimeAxis,
    interval: &TimeInterval,
    store: &dyn SeriesStore,
    enc: &TimeEncoding,
) -> Result<Range<u64>, QueryError> {
    let len = axis.len();
    let (first, end) = match axis {
        TimeAxis::Uniform {
            start, increment, ..
        } => uniform_bounds(*start, *increment, len, interval),
        TimeAxis::Explicit {
            source: DataSource::Inline { start, increment },
            ..
        } => uniform_bounds(*start, *increment, len, interval),
        TimeAxis::Explicit {
            source: DataSource::Binary { location, .. },
            ..
        } => {
            // One single-element read per probe keeps the search O(log n) in I/O.
            let time_at = |i: u64| -> Result<f64, QueryError> {
                let i = i as i64;
                Ok(store.read_elements(location, i, i)?.values[0])
            };
            let first = search(0, len, |i| Ok::<_, QueryError>(!interval.above_lo(time_at(i)?)))?;
            let end = search(first, len, |i| Ok::<_, QueryError>(interval.below_hi(time_at(i)?)))?;
            (first, end)
        }
        TimeAxis::Explicit { .. } => {
            let times = read_times(axis, 0..len, store, enc)?;
            let first = times.partition_point(|&t| !interval.above_lo(t)) as u64;
            let end = first + times[first as usize..].partition_point(|&t| interval.below_hi(t)) as u64;
            (first, end)
        }
    };
    Ok(first..end.max(first))
}

fn uniform_bounds(start: f64, increment: f64, len: u64, interval: &TimeInterval) -> (u64, u64) {
    let t = |i: u64| TimeAxis::uniform_time(start, increment, i);
    let guess = |v: f64, round: fn(f64) -> f64| {
        let g = round((v - start) / increment);
        if g.is_nan() {
            0
        } else {
            g.clamp(0.0, len as f64) as u64
        }
    };
    let first = match interval.lo {
        None => 0,
        Some((v, _)) => boundary(len, guess(v, f64::ceil), |i| !interval.above_lo(t(i))),
    };
    let end = match interval.hi {
        None => len,
        Some((v, _)) => boundary(len, guess(v, f64::floor).saturating_add(1), |i| {
            i < first || interval.below_hi(t(i))
        }),
    };
    (first, end)
}

/// Smallest `i` in `[0, len]` for which `before(i)` is false, where `before`
/// holds on a prefix. Gallops out from `guess`, so an exact guess costs two
/// evaluations and a bad one costs O(log len).
fn boundary(len: u64, guess: u64, before: impl Fn(u64) -> bool) -> u64 {
    let guess = guess.min(len);
    let (lo, hi);
    if guess < len && before(guess) {
        let mut low = guess + 1;
        let mut step = 1u64;
        hi = loop {
            let probe = guess.saturating_add(step);
            if probe >= len {
                break len;
            }
            if !before(probe) {
                break probe;
            }
            low = probe + 1;
            step = step.saturating_mul(2);
        };
        lo = low;
    } else {
        let mut high = guess;
        let mut step = 1u64;
        lo = loop {
            match guess.checked_sub(step) {
                None => break 0,
                Some(p) if before(p) => break p + 1,
                Some(p) => {
                    high = p;
                    step = step.saturating_mul(2);
                }
            }
        };
        hi = high;
    }
    search(lo, hi, |i| Ok(before(i))).unwrap_or_else(|e: Infallible| match e {})
}

/// Binary search in `[lo, hi]` for the first index where `before` is false.
fn search<E>(mut lo: u64, mut hi: u64, before: impl Fn(u64) -> Result<bool, E>) -> Result<u64, E> {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if before(mid)? {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
