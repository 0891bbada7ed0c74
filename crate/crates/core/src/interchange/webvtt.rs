use std::fmt::Write as _;

use super::{ensure_valid, ExportError};
use crate::model::{sort_timeline, AnnotationSet, Body, Millis, VideoReference};

pub const DEFAULT_POINT_PADDING_MS: Millis = 1000;

/// `HH:MM:SS.mmm`, hours always present (and wider than two digits past
/// 99 hours).
pub fn format_vtt_time(t_ms: Millis) -> String {
    let ms = t_ms % 1000;
    let total_s = t_ms / 1000;
    format!(
        "{:02}:{:02}:{:02}.{:03}",
        total_s / 3600,
        (total_s / 60) % 60,
        total_s % 60,
        ms
    )
}

/// Cue timing for a fragment. WebVTT cues must have positive duration, so
/// points are stretched by `padding` and clamped to the video; a point at
/// the very end of the video is stretched backwards instead.
fn cue_span(begin: Millis, end: Millis, padding: Millis, duration: Millis) -> (Millis, Millis) {
    if end > begin {
        return (begin, end);
    }
    let padded_end = (begin + padding).min(duration);
    if padded_end > begin {
        (begin, padded_end)
    } else {
        ((begin - padding).max(0), begin)
    }
}

/// Cue payload must not contain blank lines or raw markup.
fn escape_cue_text(text: &str) -> String {
    let escaped = text
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;");
    escaped
        .split(['\n', '\r'])
        .filter(|line| !line.trim().is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn cue_text(body: &Body) -> String {
    match body {
        Body::Comment { text } | Body::Overlay { text, .. } => escape_cue_text(text),
        Body::ResourceLink { resource_id, note } => {
            let mut out = format!("[resource] {resource_id}");
            if let Some(note) = note
                .as_deref()
                .map(escape_cue_text)
                .filter(|n| !n.is_empty())
            {
                out.push('\n');
                out.push_str(&note);
            }
            out
        }
    }
}

/// WebVTT rendering: one cue per annotation in timeline order, identified
/// by the annotation id.
pub fn export_webvtt(
    set: &AnnotationSet,
    video: &VideoReference,
    point_padding_ms: Millis,
) -> Result<String, ExportError> {
    if point_padding_ms <= 0 {
        return Err(ExportError::BadPadding(point_padding_ms));
    }
    ensure_valid(set, video)?;
    let mut out = String::from("WEBVTT\n");
    for a in sort_timeline(&set.annotations) {
        let (start, end) = cue_span(
            a.fragment.begin_ms,
            a.fragment.end_ms,
            point_padding_ms,
            video.duration_ms,
        );
        let _ = write!(
            out,
            "\n{}\n{} --> {}\n{}\n",
            a.id,
            format_vtt_time(start),
            format_vtt_time(end),
            cue_text(&a.body)
        );
    }
    Ok(out)
}
