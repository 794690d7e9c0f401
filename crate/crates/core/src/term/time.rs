use chrono::{DateTime, Datelike, NaiveDate, Timelike};

use super::Term;

/// A time point in milliseconds since the Unix epoch (UTC).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePoint(i64);

impl TimePoint {
    pub const fn from_millis(ms: i64) -> Self {
        TimePoint(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn from_datetime(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Option<Self> {
        Self::from_datetime_ms(y, mo, d, h, mi, s, 0)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_datetime_ms(
        y: i32,
        mo: u32,
        d: u32,
        h: u32,
        mi: u32,
        s: u32,
        ms: u32,
    ) -> Option<Self> {
        let dt = NaiveDate::from_ymd_opt(y, mo, d)?.and_hms_milli_opt(h, mi, s, ms)?;
        Some(TimePoint(dt.and_utc().timestamp_millis()))
    }

    /// `(year, month, day, hour, minute, second, millisecond)`.
    pub fn to_parts(self) -> (i32, u32, u32, u32, u32, u32, u32) {
        let dt = DateTime::from_timestamp_millis(self.0).unwrap_or_default().naive_utc();
        (
            dt.year(),
            dt.month(),
            dt.day(),
            dt.hour(),
            dt.minute(),
            dt.second(),
            dt.nanosecond() / 1_000_000,
        )
    }

    /// ISO-8601 text as used in `xsd:dateTime` literals.
    pub fn to_iso(self) -> String {
        let dt = DateTime::from_timestamp_millis(self.0).unwrap_or_default();
        if self.0 % 1000 == 0 {
            dt.format("%Y-%m-%dT%H:%M:%S").to_string()
        } else {
            dt.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
        }
    }

    pub fn parse_iso(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Some(TimePoint(dt.timestamp_millis()));
        }
        let naive = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S"))
            .ok()?;
        Some(TimePoint(naive.and_utc().timestamp_millis()))
    }

    /// The `datetime(Y,M,D,H,Mi,S)` compound (7 arguments when milliseconds are set).
    pub fn to_compound(self) -> Term {
        self.to_compound_arity(if self.0.rem_euclid(1000) == 0 { 6 } else { 7 })
    }

    pub(crate) fn to_compound_arity(self, arity: usize) -> Term {
        let (y, mo, d, h, mi, s, ms) = self.to_parts();
        let mut args = vec![
            Term::Int(y as i64),
            Term::Int(mo as i64),
            Term::Int(d as i64),
            Term::Int(h as i64),
            Term::Int(mi as i64),
            Term::Int(s as i64),
        ];
        if arity == 7 {
            args.push(Term::Int(ms as i64));
        }
        Term::compound("datetime", args)
    }

    /// Interpret `datetime(..)` with six or seven in-range integer arguments.
    pub fn from_term(t: &Term) -> Option<Self> {
        let (name, arity) = t.functor()?;
        if name != "datetime" || !(arity == 6 || arity == 7) {
            return None;
        }
        let mut v = [0i64; 7];
        for (slot, a) in v.iter_mut().zip(t.args()) {
            *slot = a.as_int()?;
        }
        let small = |x: i64| u32::try_from(x).ok();
        Self::from_datetime_ms(
            i32::try_from(v[0]).ok()?,
            small(v[1])?,
            small(v[2])?,
            small(v[3])?,
            small(v[4])?,
            small(v[5])?,
            small(v[6]).filter(|ms| *ms < 1000)?,
        )
    }
}

/// A closed interval `[start, end]` with `start <= end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeInterval {
    start: TimePoint,
    end: TimePoint,
}

impl TimeInterval {
    pub fn new(start: TimePoint, end: TimePoint) -> Option<Self> {
        (start <= end).then_some(TimeInterval { start, end })
    }

    pub fn point(t: TimePoint) -> Self {
        TimeInterval { start: t, end: t }
    }

    pub fn start(&self) -> TimePoint {
        self.start
    }

    pub fn end(&self) -> TimePoint {
        self.end
    }

    pub fn to_term(&self) -> Term {
        Term::list(vec![Term::Time(self.start), Term::Time(self.end)])
    }
}

/// Pointwise interval ordering: `[a1,a2] <= [b1,b2]` iff `a1 <= b1` and `a2 <= b2`.
pub fn interval_leq(a: &TimeInterval, b: &TimeInterval) -> bool {
    a.start <= b.start && a.end <= b.end
}
