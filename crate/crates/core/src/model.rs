//! Domain model: fragments, regions, annotation bodies, annotation sets, and
//! the structural checks that every stored or exchanged set must pass.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Media time in integer milliseconds.
pub type Millis = i64;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn into_inner(self) -> String {
                self.0
            }

            /// Ids travel in URL paths and file names, so they are restricted
            /// to `[A-Za-z0-9_.-]`, at most 128 bytes, not starting with `.`.
            pub fn is_well_formed(&self) -> bool {
                is_well_formed_id(&self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Identifier of an annotation, unique within its set.
    AnnotationId
);
id_type!(
    /// Identifier of an annotation set.
    SetId
);
id_type!(
    /// Identifier of a referenced video.
    VideoId
);
id_type!(
    /// Identifier of a catalog resource.
    ResourceId
);
id_type!(
    /// Identifier of a user.
    UserId
);

pub fn is_well_formed_id(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 128
        && !s.starts_with('.')
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// UTC instant, serialized as RFC 3339 with a `Z` suffix and only as many
/// fractional digits as needed (0, 3, 6 or 9).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self(dt)
    }

    /// Panics if `ms` is outside chrono's representable range.
    pub fn from_unix_millis(ms: i64) -> Self {
        Self(
            Utc.timestamp_millis_opt(ms)
                .single()
                .expect("timestamp in range"),
        )
    }

    pub fn unix_millis(&self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn to_rfc3339(&self) -> String {
        self.0.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s).map(|dt| Self(dt.with_timezone(&Utc)))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse()
            .map_err(|e| de::Error::custom(format!("invalid RFC 3339 timestamp {s:?}: {e}")))
    }
}

/// Closed interval `[begin_ms, end_ms]` of video time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeFragment {
    pub begin_ms: Millis,
    pub end_ms: Millis,
}

/// A failed clause of fragment validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FragmentViolation {
    NegativeBegin,
    BeginAfterEnd,
    EndAfterDuration,
    NonPositiveDuration,
}

impl fmt::Display for FragmentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentViolation::NegativeBegin => "begin<0",
            FragmentViolation::BeginAfterEnd => "begin>end",
            FragmentViolation::EndAfterDuration => "end>duration",
            FragmentViolation::NonPositiveDuration => "duration<=0",
        })
    }
}

impl TimeFragment {
    pub const fn new(begin_ms: Millis, end_ms: Millis) -> Self {
        Self { begin_ms, end_ms }
    }

    pub const fn point(at_ms: Millis) -> Self {
        Self::new(at_ms, at_ms)
    }

    pub fn is_point(&self) -> bool {
        self.begin_ms == self.end_ms
    }

    pub fn len_ms(&self) -> Millis {
        self.end_ms - self.begin_ms
    }

    /// Closed-interval membership: a point fragment contains its own instant.
    pub fn contains(&self, t_ms: Millis) -> bool {
        self.begin_ms <= t_ms && t_ms <= self.end_ms
    }

    pub fn contains_fragment(&self, other: &TimeFragment) -> bool {
        self.begin_ms <= other.begin_ms && other.end_ms <= self.end_ms
    }

    /// Length of the shared part; touching intervals share 0 ms.
    pub fn overlap_ms(&self, other: &TimeFragment) -> Millis {
        (self.end_ms.min(other.end_ms) - self.begin_ms.max(other.begin_ms)).max(0)
    }

    /// Overlap divided by the length of the covering span. Two equal points
    /// score 1.0, two distinct points 0.0.
    pub fn jaccard(&self, other: &TimeFragment) -> f64 {
        let overlap = self.overlap_ms(other);
        let union = self.len_ms() + other.len_ms() - overlap;
        if union == 0 {
            return if self == other { 1.0 } else { 0.0 };
        }
        overlap as f64 / union as f64
    }

    pub fn validate(&self, duration_ms: Millis) -> Vec<FragmentViolation> {
        let mut out = Vec::new();
        if duration_ms <= 0 {
            out.push(FragmentViolation::NonPositiveDuration);
        }
        if self.begin_ms < 0 {
            out.push(FragmentViolation::NegativeBegin);
        }
        if self.begin_ms > self.end_ms {
            out.push(FragmentViolation::BeginAfterEnd);
        }
        if duration_ms > 0 && self.end_ms > duration_ms {
            out.push(FragmentViolation::EndAfterDuration);
        }
        out
    }
}

impl fmt::Display for TimeFragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.begin_ms, self.end_ms)
    }
}

/// Checks `0 <= begin <= end <= duration`.
pub fn validate_fragment(fragment: &TimeFragment, duration_ms: Millis) -> Vec<FragmentViolation> {
    fragment.validate(duration_ms)
}

pub fn overlap_ms(a: &TimeFragment, b: &TimeFragment) -> Millis {
    a.overlap_ms(b)
}

pub fn jaccard(a: &TimeFragment, b: &TimeFragment) -> f64 {
    a.jaccard(b)
}

/// Non-negative decimal with at most two fractional digits, stored as an
/// integer count of hundredths so that it compares and round-trips exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Measure(u64);

/// Largest value accepted for a region coordinate (in whole units).
pub const MEASURE_MAX_WHOLE: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("empty number")]
    Empty,
    #[error("malformed number {0:?}")]
    Malformed(String),
    #[error("negative number")]
    Negative,
    #[error("more than two fractional digits")]
    TooPrecise,
    #[error("number too large")]
    TooLarge,
}

impl Measure {
    pub const fn from_hundredths(h: u64) -> Self {
        Self(h)
    }

    pub const fn whole(units: u64) -> Self {
        Self(units * 100)
    }

    pub fn hundredths(&self) -> u64 {
        self.0
    }

    pub fn is_whole(&self) -> bool {
        self.0.is_multiple_of(100)
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Converts a float, rejecting values that are not on the 0.01 grid.
    pub fn from_f64(v: f64) -> Result<Self, MeasureError> {
        if !v.is_finite() {
            return Err(MeasureError::Malformed(v.to_string()));
        }
        if v < 0.0 {
            return Err(MeasureError::Negative);
        }
        if v > MEASURE_MAX_WHOLE as f64 {
            return Err(MeasureError::TooLarge);
        }
        let scaled = v * 100.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-4 {
            return Err(MeasureError::TooPrecise);
        }
        Ok(Self(rounded as u64))
    }
}

impl FromStr for Measure {
    type Err = MeasureError;

    /// Accepts `D+` or `D+.D{1,2}`; no sign, no exponent.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(MeasureError::Empty);
        }
        if s.starts_with('-') {
            return Err(MeasureError::Negative);
        }
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (s, None),
        };
        let malformed = || MeasureError::Malformed(s.to_owned());
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let whole: u64 = int.parse().map_err(|_| MeasureError::TooLarge)?;
        if whole > MEASURE_MAX_WHOLE {
            return Err(MeasureError::TooLarge);
        }
        let frac_h = match frac {
            None => 0,
            Some(f) => {
                if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(malformed());
                }
                if f.len() > 2 {
                    return Err(MeasureError::TooPrecise);
                }
                let v: u64 = f.parse().map_err(|_| malformed())?;
                if f.len() == 1 {
                    v * 10
                } else {
                    v
                }
            }
        };
        Ok(Self(whole * 100 + frac_h))
    }
}

impl fmt::Display for Measure {
    /// Minimal decimal form: `10`, `10.5`, `10.25`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 100;
        let frac = self.0 % 100;
        if frac == 0 {
            write!(f, "{whole}")
        } else if frac.is_multiple_of(10) {
            write!(f, "{whole}.{}", frac / 10)
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_whole() {
            serializer.serialize_u64(self.0 / 100)
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MeasureVisitor;

        impl Visitor<'_> for MeasureVisitor {
            type Value = Measure;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number with at most two fractional digits")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Measure, E> {
                if v > MEASURE_MAX_WHOLE {
                    return Err(E::custom(MeasureError::TooLarge));
                }
                Ok(Measure::whole(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Measure, E> {
                if v < 0 {
                    return Err(E::custom(MeasureError::Negative));
                }
                self.visit_u64(v as u64)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Measure, E> {
                Measure::from_f64(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(MeasureVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionUnit {
    Pixel,
    Percent,
}

impl RegionUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionUnit::Pixel => "pixel",
            RegionUnit::Percent => "percent",
        }
    }
}

/// Rectangular overlay area on the video frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialRegion {
    pub unit: RegionUnit,
    pub x: Measure,
    pub y: Measure,
    pub w: Measure,
    pub h: Measure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionViolation {
    EmptyArea,
    FractionalPixel,
    ExceedsWidth,
    ExceedsHeight,
}

impl fmt::Display for RegionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionViolation::EmptyArea => "w and h must be > 0",
            RegionViolation::FractionalPixel => "pixel coordinates must be integers",
            RegionViolation::ExceedsWidth => "x+w>100",
            RegionViolation::ExceedsHeight => "y+h>100",
        })
    }
}

impl SpatialRegion {
    pub fn pixel(x: u64, y: u64, w: u64, h: u64) -> Self {
        Self {
            unit: RegionUnit::Pixel,
            x: Measure::whole(x),
            y: Measure::whole(y),
            w: Measure::whole(w),
            h: Measure::whole(h),
        }
    }

    pub fn percent(x: Measure, y: Measure, w: Measure, h: Measure) -> Self {
        Self {
            unit: RegionUnit::Percent,
            x,
            y,
            w,
            h,
        }
    }

    pub fn validate(&self) -> Vec<RegionViolation> {
        let mut out = Vec::new();
        if self.w.hundredths() == 0 || self.h.hundredths() == 0 {
            out.push(RegionViolation::EmptyArea);
        }
        match self.unit {
            RegionUnit::Pixel => {
                if ![self.x, self.y, self.w, self.h]
                    .iter()
                    .all(Measure::is_whole)
                {
                    out.push(RegionViolation::FractionalPixel);
                }
            }
            RegionUnit::Percent => {
                if self.x.hundredths() + self.w.hundredths() > 10_000 {
                    out.push(RegionViolation::ExceedsWidth);
                }
                if self.y.hundredths() + self.h.hundredths() > 10_000 {
                    out.push(RegionViolation::ExceedsHeight);
                }
            }
        }
        out
    }
}

/// What an annotation says. Only overlays carry a region.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Body {
    Comment {
        text: String,
    },
    ResourceLink {
        resource_id: ResourceId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Overlay {
        text: String,
        region: SpatialRegion,
    },
}

impl Body {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Body::Comment { .. } => "comment",
            Body::ResourceLink { .. } => "resource_link",
            Body::Overlay { .. } => "overlay",
        }
    }

    pub fn resource_id(&self) -> Option<&ResourceId> {
        match self {
            Body::ResourceLink { resource_id, .. } => Some(resource_id),
            _ => None,
        }
    }

    pub fn region(&self) -> Option<&SpatialRegion> {
        match self {
            Body::Overlay { region, .. } => Some(region),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub id: AnnotationId,
    pub author: UserId,
    pub created: Timestamp,
    pub modified: Timestamp,
    pub fragment: TimeFragment,
    pub body: Body,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Annotation {
    pub fn is_resource_link(&self) -> bool {
        matches!(self.body, Body::ResourceLink { .. })
    }

    /// Ordering key of the main timeline.
    pub fn timeline_key(&self) -> (Millis, Millis, &str) {
        (
            self.fragment.begin_ms,
            self.fragment.end_ms,
            self.id.as_str(),
        )
    }
}

/// Lowercases, trims, drops empties and keeps the first occurrence of each tag.
pub fn normalize_tags<I, S>(tags: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for tag in tags {
        let t = tag.as_ref().trim().to_lowercase();
        if !t.is_empty() && seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Image,
    Text,
    Audio,
    Video,
    Web,
}

/// A predefined resource provisioned by a teacher for one video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resource {
    pub id: ResourceId,
    pub title: String,
    pub kind: ResourceKind,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Resource {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.id.is_well_formed() {
            out.push(Violation::new(
                "id",
                ViolationKind::MalformedId(self.id.to_string()),
            ));
        }
        if self.title.trim().is_empty() {
            out.push(Violation::new("title", ViolationKind::EmptyText));
        }
        if !is_absolute_uri(&self.url) {
            out.push(Violation::new(
                "url",
                ViolationKind::NotAbsoluteUri(self.url.clone()),
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoReference {
    pub id: VideoId,
    pub uri: String,
    pub duration_ms: Millis,
    pub title: String,
}

impl VideoReference {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.id.is_well_formed() {
            out.push(Violation::new(
                "id",
                ViolationKind::MalformedId(self.id.to_string()),
            ));
        }
        if !is_absolute_uri(&self.uri) {
            out.push(Violation::new(
                "uri",
                ViolationKind::NotAbsoluteUri(self.uri.clone()),
            ));
        }
        if self.duration_ms <= 0 {
            out.push(Violation::new(
                "duration_ms",
                ViolationKind::NonPositiveDuration,
            ));
        }
        out
    }
}

pub fn is_absolute_uri(s: &str) -> bool {
    url::Url::parse(s).is_ok()
}

/// One source annotation behind a consolidated annotation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub set_id: SetId,
    pub annotation_id: AnnotationId,
}

impl SourceRef {
    pub fn new(set_id: impl Into<SetId>, annotation_id: impl Into<AnnotationId>) -> Self {
        Self {
            set_id: set_id.into(),
            annotation_id: annotation_id.into(),
        }
    }
}

pub type Provenance = BTreeMap<AnnotationId, Vec<SourceRef>>;

/// One user's annotations over one video.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationSet {
    pub id: SetId,
    pub video_id: VideoId,
    pub owner: UserId,
    pub annotations: Vec<Annotation>,
    pub revision: u64,
    /// Present on consolidated sets produced by a merge.
    pub provenance: Option<Provenance>,
}

impl AnnotationSet {
    pub fn new(
        id: impl Into<SetId>,
        video_id: impl Into<VideoId>,
        owner: impl Into<UserId>,
    ) -> Self {
        Self {
            id: id.into(),
            video_id: video_id.into(),
            owner: owner.into(),
            annotations: Vec::new(),
            revision: 0,
            provenance: None,
        }
    }

    pub fn get(&self, id: &AnnotationId) -> Option<&Annotation> {
        self.annotations.iter().find(|a| &a.id == id)
    }

    pub fn is_consolidated(&self) -> bool {
        self.provenance.is_some()
    }

    /// Sorts the annotations into timeline order in place.
    pub fn sort(&mut self) {
        sort_in_timeline_order(&mut self.annotations);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Fragment(FragmentViolation),
    Region(RegionViolation),
    DuplicateId(AnnotationId),
    UnknownResource(ResourceId),
    MalformedId(String),
    TagsNotNormalized,
    EmptyText,
    ModifiedBeforeCreated,
    VideoMismatch { expected: VideoId, found: VideoId },
    NotAbsoluteUri(String),
    NonPositiveDuration,
    DanglingProvenance(AnnotationId),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Fragment(v) => write!(f, "{v}"),
            ViolationKind::Region(v) => write!(f, "{v}"),
            ViolationKind::DuplicateId(id) => write!(f, "duplicate id {id}"),
            ViolationKind::UnknownResource(id) => write!(f, "unknown resource {id}"),
            ViolationKind::MalformedId(id) => write!(f, "malformed id {id:?}"),
            ViolationKind::TagsNotNormalized => f.write_str("tags not normalized"),
            ViolationKind::EmptyText => f.write_str("empty text"),
            ViolationKind::ModifiedBeforeCreated => f.write_str("modified<created"),
            ViolationKind::VideoMismatch { expected, found } => {
                write!(f, "video mismatch: expected {expected}, found {found}")
            }
            ViolationKind::NotAbsoluteUri(u) => write!(f, "not an absolute URI: {u:?}"),
            ViolationKind::NonPositiveDuration => f.write_str("duration<=0"),
            ViolationKind::DanglingProvenance(id) => {
                write!(f, "provenance for unknown annotation {id}")
            }
        }
    }
}

/// A failed check together with the path of the offending field, e.g.
/// `annotations[3].fragment`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn new(path: impl Into<String>, kind: ViolationKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "{}: {}", self.path, self.kind)
        }
    }
}

/// Per-annotation checks that need only the video duration.
pub fn validate_annotation(a: &Annotation, duration_ms: Millis, path: &str) -> Vec<Violation> {
    let mut out = Vec::new();
    if !a.id.is_well_formed() {
        out.push(Violation::new(
            format!("{path}.id"),
            ViolationKind::MalformedId(a.id.to_string()),
        ));
    }
    if !a.author.is_well_formed() {
        out.push(Violation::new(
            format!("{path}.author"),
            ViolationKind::MalformedId(a.author.to_string()),
        ));
    }
    if a.created > a.modified {
        out.push(Violation::new(
            format!("{path}.modified"),
            ViolationKind::ModifiedBeforeCreated,
        ));
    }
    for v in a.fragment.validate(duration_ms) {
        out.push(Violation::new(
            format!("{path}.fragment"),
            ViolationKind::Fragment(v),
        ));
    }
    match &a.body {
        Body::Comment { text } => {
            if text.trim().is_empty() {
                out.push(Violation::new(
                    format!("{path}.body.text"),
                    ViolationKind::EmptyText,
                ));
            }
        }
        Body::ResourceLink { resource_id, .. } => {
            if !resource_id.is_well_formed() {
                out.push(Violation::new(
                    format!("{path}.body.resource_id"),
                    ViolationKind::MalformedId(resource_id.to_string()),
                ));
            }
        }
        Body::Overlay { text, region } => {
            if text.trim().is_empty() {
                out.push(Violation::new(
                    format!("{path}.body.text"),
                    ViolationKind::EmptyText,
                ));
            }
            for v in region.validate() {
                out.push(Violation::new(
                    format!("{path}.body.region"),
                    ViolationKind::Region(v),
                ));
            }
        }
    }
    if a.tags != normalize_tags(&a.tags) {
        out.push(Violation::new(
            format!("{path}.tags"),
            ViolationKind::TagsNotNormalized,
        ));
    }
    out
}

/// Everything [`validate_set`] checks except resource existence. Used where
/// no catalog is at hand (file import, CLI validation).
pub fn validate_set_structure(set: &AnnotationSet, video: &VideoReference) -> Vec<Violation> {
    let mut out = Vec::new();
    if !set.id.is_well_formed() {
        out.push(Violation::new(
            "id",
            ViolationKind::MalformedId(set.id.to_string()),
        ));
    }
    if !set.owner.is_well_formed() {
        out.push(Violation::new(
            "owner",
            ViolationKind::MalformedId(set.owner.to_string()),
        ));
    }
    if set.video_id != video.id {
        out.push(Violation::new(
            "video_id",
            ViolationKind::VideoMismatch {
                expected: video.id.clone(),
                found: set.video_id.clone(),
            },
        ));
    }
    for v in video.validate() {
        out.push(Violation::new(format!("video.{}", v.path), v.kind));
    }
    let mut ids = HashSet::new();
    for (i, a) in set.annotations.iter().enumerate() {
        let path = format!("annotations[{i}]");
        if !ids.insert(&a.id) {
            out.push(Violation::new(
                format!("{path}.id"),
                ViolationKind::DuplicateId(a.id.clone()),
            ));
        }
        out.extend(validate_annotation(a, video.duration_ms, &path));
    }
    if let Some(prov) = &set.provenance {
        for key in prov.keys() {
            if !ids.contains(key) {
                out.push(Violation::new(
                    format!("provenance.{key}"),
                    ViolationKind::DanglingProvenance(key.clone()),
                ));
            }
        }
    }
    out
}

/// Full set validation: structure plus every resource link resolving in
/// `catalog`.
pub fn validate_set(
    set: &AnnotationSet,
    video: &VideoReference,
    catalog: &[Resource],
) -> Vec<Violation> {
    let mut out = validate_set_structure(set, video);
    let known: HashSet<&ResourceId> = catalog.iter().map(|r| &r.id).collect();
    for (i, a) in set.annotations.iter().enumerate() {
        if let Some(rid) = a.body.resource_id() {
            if !known.contains(rid) {
                out.push(Violation::new(
                    format!("annotations[{i}].body.resource_id"),
                    ViolationKind::UnknownResource(rid.clone()),
                ));
            }
        }
    }
    out
}

pub fn sort_in_timeline_order(annotations: &mut [Annotation]) {
    annotations.sort_by(|a, b| a.timeline_key().cmp(&b.timeline_key()));
}

/// Annotations ordered by `(begin_ms, end_ms, id)`.
pub fn sort_timeline(annotations: &[Annotation]) -> Vec<Annotation> {
    let mut out = annotations.to_vec();
    sort_in_timeline_order(&mut out);
    out
}

/// Annotations active at `t_ms` under closed-interval membership, in
/// timeline order.
pub fn annotations_at(annotations: &[Annotation], t_ms: Millis) -> Vec<&Annotation> {
    let mut out: Vec<&Annotation> = annotations
        .iter()
        .filter(|a| a.fragment.contains(t_ms))
        .collect();
    out.sort_by(|a, b| a.timeline_key().cmp(&b.timeline_key()));
    out
}
