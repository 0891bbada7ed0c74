//! Random generators for valid model values.

use hyvid_core::model::{
    normalize_tags, sort_timeline, Annotation, AnnotationSet, Body, Measure, Millis, Provenance,
    SourceRef, SpatialRegion, TimeFragment, Timestamp, VideoReference,
};
use rand::seq::IndexedRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PIECES: &[&str] = &[
    "hello",
    " world",
    "Grüße",
    "日本語のテキスト",
    " 🎓📹",
    " \"quoted\"",
    " back\\slash",
    " <b>&amp;</b>",
    "\nsecond line",
    "\n\nafter blank",
    "\ttab",
    " \u{1}ctl\u{7f}",
    " --> arrow",
    " a,b;c",
    " ' single",
    " \u{2028}sep",
];

pub fn text(rng: &mut Rng) -> String {
    let mut s = String::from("x");
    for _ in 0..rng.random_range(0..4) {
        s.push_str(PIECES.choose(rng).unwrap());
    }
    s
}

const ID_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-";

/// Well-formed id, unique through `n`.
pub fn id(rng: &mut Rng, prefix: &str, n: usize) -> String {
    let mut s = format!("{prefix}{n}");
    if rng.random_bool(0.5) {
        s.push('-');
        for _ in 0..rng.random_range(0..6) {
            s.push(*ID_CHARS.choose(rng).unwrap() as char);
        }
    }
    s
}

pub fn timestamp(rng: &mut Rng) -> Timestamp {
    Timestamp::from_unix_millis(rng.random_range(0..4_000_000_000_000))
}

pub fn fragment(rng: &mut Rng, duration: Millis) -> TimeFragment {
    let begin = rng.random_range(0..=duration);
    if rng.random_bool(0.2) {
        TimeFragment::point(begin)
    } else {
        TimeFragment::new(begin, rng.random_range(begin..=duration))
    }
}

pub fn region(rng: &mut Rng) -> SpatialRegion {
    if rng.random_bool(0.5) {
        let w = rng.random_range(1..5000);
        let h = rng.random_range(1..5000);
        SpatialRegion::pixel(
            rng.random_range(0..10_000),
            rng.random_range(0..10_000),
            w,
            h,
        )
    } else {
        let w = rng.random_range(1..=10_000);
        let h = rng.random_range(1..=10_000);
        let x = rng.random_range(0..=10_000 - w);
        let y = rng.random_range(0..=10_000 - h);
        SpatialRegion::percent(
            Measure::from_hundredths(x),
            Measure::from_hundredths(y),
            Measure::from_hundredths(w),
            Measure::from_hundredths(h),
        )
    }
}

pub fn body(rng: &mut Rng, resources: &[&str]) -> Body {
    match rng.random_range(0..3) {
        0 => Body::Comment { text: text(rng) },
        1 => Body::ResourceLink {
            resource_id: (*resources.choose(rng).unwrap()).into(),
            note: rng.random_bool(0.4).then(|| text(rng)),
        },
        _ => Body::Overlay {
            text: text(rng),
            region: region(rng),
        },
    }
}

pub fn tags(rng: &mut Rng) -> Vec<String> {
    const WORDS: &[&str] = &[
        "Key",
        "key",
        " intro ",
        "Ünïcode",
        "",
        "q&a",
        "slide-3",
        "TODO",
    ];
    let raw: Vec<&str> = (0..rng.random_range(0..4))
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect();
    normalize_tags(raw)
}

pub fn annotation(rng: &mut Rng, id: String, duration: Millis, resources: &[&str]) -> Annotation {
    let created = timestamp(rng);
    let modified = if rng.random_bool(0.5) {
        created
    } else {
        Timestamp::from_unix_millis(created.unix_millis() + rng.random_range(0..1_000_000_000))
    };
    Annotation {
        id: id.into(),
        author: format!("user{}", rng.random_range(0..5)).into(),
        created,
        modified,
        fragment: fragment(rng, duration),
        body: body(rng, resources),
        tags: tags(rng),
    }
}

pub fn video(rng: &mut Rng, n: usize) -> VideoReference {
    VideoReference {
        id: id(rng, "v", n).into(),
        uri: format!("https://example.org/videos/{n}.mp4?q=a%20b"),
        duration_ms: rng.random_range(1..=10_000_000),
        title: text(rng),
    }
}

pub const RESOURCES: &[&str] = &["r0", "r1", "r2", "r3", "r4"];

/// A valid set in timeline order, with provenance on some of them.
pub fn set(rng: &mut Rng, n: usize) -> (AnnotationSet, VideoReference) {
    let video = video(rng, n);
    let count = rng.random_range(0..40);
    let annotations: Vec<Annotation> = (0..count)
        .map(|i| {
            let aid = id(rng, "a", i);
            annotation(rng, aid, video.duration_ms, RESOURCES)
        })
        .collect();
    let provenance = rng.random_bool(0.3).then(|| {
        let mut p = Provenance::new();
        for a in &annotations {
            let refs = (0..rng.random_range(1..4))
                .map(|k| SourceRef::new(format!("src{k}"), format!("{}-{k}", a.id)))
                .collect();
            p.insert(a.id.clone(), refs);
        }
        p
    });
    let set = AnnotationSet {
        id: id(rng, "s", n).into(),
        video_id: video.id.clone(),
        owner: format!("user{}", rng.random_range(0..5)).into(),
        annotations: sort_timeline(&annotations),
        revision: rng.random_range(0..1_000_000),
        provenance,
    };
    (set, video)
}
