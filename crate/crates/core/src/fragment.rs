//! Media-fragment directives: the temporal `t=` dimension in NPT seconds and
//! the spatial `xywh=` dimension with a mandatory `pixel:`/`percent:` unit.

use std::fmt::{self, Write as _};

use crate::model::{
    Annotation, Body, MeasureError, Millis, RegionUnit, RegionViolation, SpatialRegion,
    TimeFragment, VideoReference,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NptError {
    #[error("empty time value")]
    Empty,
    #[error("malformed time value {0:?}")]
    Malformed(String),
    #[error("negative time value")]
    Negative,
    #[error("{0} must be < 60 in colon form")]
    ComponentOutOfRange(&'static str),
    #[error("time value too large")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FragmentError {
    #[error("empty fragment directive")]
    Empty,
    #[error("fragment is not valid UTF-8")]
    NotUtf8,
    #[error("malformed pair {0:?}")]
    MalformedPair(String),
    #[error("duplicate `{0}` dimension")]
    DuplicateKey(&'static str),
    #[error("no temporal or spatial dimension present")]
    NoDimension,
    #[error("invalid time: {0}")]
    Time(#[from] NptError),
    #[error("begin>end ({begin_ms} > {end_ms})")]
    BeginAfterEnd { begin_ms: Millis, end_ms: Millis },
    #[error("xywh requires a `pixel:` or `percent:` unit prefix")]
    MissingUnit,
    #[error("malformed xywh value {0:?}")]
    MalformedRegion(String),
    #[error("invalid xywh coordinate: {0}")]
    Coordinate(#[from] MeasureError),
    #[error("invalid region: {0}")]
    Region(RegionViolation),
    #[error("video URI already contains a fragment: {0}")]
    UriHasFragment(String),
}

/// Temporal dimension as written. An open end (`t=10`) is resolved against
/// the video duration by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TemporalRange {
    pub begin_ms: Millis,
    pub end_ms: Option<Millis>,
}

impl TemporalRange {
    pub fn closed(begin_ms: Millis, end_ms: Millis) -> Self {
        Self {
            begin_ms,
            end_ms: Some(end_ms),
        }
    }

    pub fn open(begin_ms: Millis) -> Self {
        Self {
            begin_ms,
            end_ms: None,
        }
    }

    pub fn resolve(&self, duration_ms: Millis) -> TimeFragment {
        TimeFragment::new(self.begin_ms, self.end_ms.unwrap_or(duration_ms))
    }
}

impl From<TimeFragment> for TemporalRange {
    fn from(f: TimeFragment) -> Self {
        Self::closed(f.begin_ms, f.end_ms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FragmentDirective {
    pub temporal: Option<TemporalRange>,
    pub spatial: Option<SpatialRegion>,
}

impl FragmentDirective {
    pub fn temporal(range: impl Into<TemporalRange>) -> Self {
        Self {
            temporal: Some(range.into()),
            spatial: None,
        }
    }

    pub fn with_spatial(mut self, region: SpatialRegion) -> Self {
        self.spatial = Some(region);
        self
    }
}

impl fmt::Display for FragmentDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_fragment(self))
    }
}

const NPT_PREFIX: &str = "npt:";

/// Parses an NPT time (`SS`, `SS.fff`, `MM:SS.fff`, `HH:MM:SS.fff`, with an
/// optional `npt:` prefix) into milliseconds, rounding sub-millisecond digits
/// half-up.
pub fn parse_npt_time(s: &str) -> Result<Millis, NptError> {
    parse_npt_value(s.strip_prefix(NPT_PREFIX).unwrap_or(s))
}

fn parse_npt_value(s: &str) -> Result<Millis, NptError> {
    if s.is_empty() {
        return Err(NptError::Empty);
    }
    if s.starts_with('-') {
        return Err(NptError::Negative);
    }
    let malformed = || NptError::Malformed(s.to_owned());
    let (clock, frac) = match s.split_once('.') {
        Some((c, f)) => (c, Some(f)),
        None => (s, None),
    };

    let parts: Vec<&str> = clock.split(':').collect();
    if parts.len() > 3
        || parts
            .iter()
            .any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(malformed());
    }
    let nums = parts
        .iter()
        .map(|p| p.parse::<u64>().map_err(|_| NptError::Overflow))
        .collect::<Result<Vec<_>, _>>()?;
    let seconds = match nums.as_slice() {
        [ss] => *ss,
        [mm, ss] => {
            check_sexagesimal(*ss, "seconds")?;
            check_sexagesimal(*mm, "minutes")?;
            mm * 60 + ss
        }
        [hh, mm, ss] => {
            check_sexagesimal(*ss, "seconds")?;
            check_sexagesimal(*mm, "minutes")?;
            hh.checked_mul(3600)
                .and_then(|h| h.checked_add(mm * 60 + ss))
                .ok_or(NptError::Overflow)?
        }
        _ => return Err(malformed()),
    };

    let mut millis = 0u64;
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let digits = f.as_bytes();
        for i in 0..3 {
            millis = millis * 10 + digits.get(i).map_or(0, |d| u64::from(d - b'0'));
        }
        if digits.get(3).is_some_and(|d| *d >= b'5') {
            millis += 1;
        }
    }

    seconds
        .checked_mul(1000)
        .and_then(|ms| ms.checked_add(millis))
        .and_then(|ms| Millis::try_from(ms).ok())
        .ok_or(NptError::Overflow)
}

fn check_sexagesimal(v: u64, field: &'static str) -> Result<(), NptError> {
    if v >= 60 {
        Err(NptError::ComponentOutOfRange(field))
    } else {
        Ok(())
    }
}

/// Canonical seconds form: `10`, `10.5`, `3723.25`; never colon form.
pub fn format_npt_time(t_ms: Millis) -> String {
    let secs = t_ms / 1000;
    let frac = t_ms % 1000;
    if frac == 0 {
        return secs.to_string();
    }
    let mut digits = format!("{frac:03}");
    while digits.ends_with('0') {
        digits.pop();
    }
    format!("{secs}.{digits}")
}

/// Byte-level entry point: non-UTF-8 input is a structured error.
pub fn parse_fragment_bytes(bytes: &[u8]) -> Result<FragmentDirective, FragmentError> {
    let s = std::str::from_utf8(bytes).map_err(|_| FragmentError::NotUtf8)?;
    parse_fragment_string(s)
}

/// Parses the fragment part of a URI (without `#`). Unknown keys are ignored;
/// a repeated `t` or `xywh` is an error.
pub fn parse_fragment_string(s: &str) -> Result<FragmentDirective, FragmentError> {
    if s.is_empty() {
        return Err(FragmentError::Empty);
    }
    let mut temporal = None;
    let mut spatial = None;
    for pair in s.split('&') {
        let (key, value) = match pair.split_once('=') {
            Some((k, v)) if !k.is_empty() => (k, v),
            _ => return Err(FragmentError::MalformedPair(pair.to_owned())),
        };
        match key {
            "t" => {
                if temporal.is_some() {
                    return Err(FragmentError::DuplicateKey("t"));
                }
                temporal = Some(parse_temporal(value)?);
            }
            "xywh" => {
                if spatial.is_some() {
                    return Err(FragmentError::DuplicateKey("xywh"));
                }
                spatial = Some(parse_spatial(value)?);
            }
            _ => {}
        }
    }
    if temporal.is_none() && spatial.is_none() {
        return Err(FragmentError::NoDimension);
    }
    Ok(FragmentDirective { temporal, spatial })
}

fn parse_temporal(value: &str) -> Result<TemporalRange, FragmentError> {
    let value = value.strip_prefix(NPT_PREFIX).unwrap_or(value);
    match value.split_once(',') {
        None => Ok(TemporalRange::open(parse_npt_value(value)?)),
        Some((_, "")) => Err(FragmentError::MalformedPair(format!("t={value}"))),
        Some((begin, end)) => {
            let begin_ms = if begin.is_empty() {
                0
            } else {
                parse_npt_value(begin)?
            };
            let end_ms = parse_npt_value(end)?;
            if begin_ms > end_ms {
                return Err(FragmentError::BeginAfterEnd { begin_ms, end_ms });
            }
            Ok(TemporalRange::closed(begin_ms, end_ms))
        }
    }
}

fn parse_spatial(value: &str) -> Result<SpatialRegion, FragmentError> {
    let (unit, coords) = value.split_once(':').ok_or(FragmentError::MissingUnit)?;
    let unit = match unit {
        "pixel" => RegionUnit::Pixel,
        "percent" => RegionUnit::Percent,
        _ => return Err(FragmentError::MissingUnit),
    };
    let parts: Vec<&str> = coords.split(',').collect();
    let [x, y, w, h] = parts.as_slice() else {
        return Err(FragmentError::MalformedRegion(value.to_owned()));
    };
    let region = SpatialRegion {
        unit,
        x: x.parse()?,
        y: y.parse()?,
        w: w.parse()?,
        h: h.parse()?,
    };
    if let Some(v) = region.validate().into_iter().next() {
        return Err(FragmentError::Region(v));
    }
    Ok(region)
}

/// Canonical form: `t=` before `xywh=`, canonical NPT seconds on both ends.
pub fn serialize_fragment(d: &FragmentDirective) -> String {
    let mut out = String::new();
    if let Some(t) = &d.temporal {
        out.push_str("t=");
        out.push_str(&format_npt_time(t.begin_ms));
        if let Some(end) = t.end_ms {
            out.push(',');
            out.push_str(&format_npt_time(end));
        }
    }
    if let Some(r) = &d.spatial {
        if !out.is_empty() {
            out.push('&');
        }
        let _ = write!(
            out,
            "xywh={}:{},{},{},{}",
            r.unit.as_str(),
            r.x,
            r.y,
            r.w,
            r.h
        );
    }
    out
}

/// Deep link to the annotated fragment of the video, e.g.
/// `http://x/v.mp4#t=10,20`. Overlays also carry their region.
pub fn annotation_fragment_uri(
    video: &VideoReference,
    annotation: &Annotation,
) -> Result<String, FragmentError> {
    if video.uri.contains('#') {
        return Err(FragmentError::UriHasFragment(video.uri.clone()));
    }
    let mut directive = FragmentDirective::temporal(annotation.fragment);
    if let Body::Overlay { region, .. } = &annotation.body {
        directive.spatial = Some(*region);
    }
    Ok(format!("{}#{}", video.uri, serialize_fragment(&directive)))
}
