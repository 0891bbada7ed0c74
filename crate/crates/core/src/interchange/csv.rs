use super::{ensure_valid, ExportError};
use crate::model::{sort_timeline, AnnotationSet, Body, VideoReference};

pub const CSV_HEADER: [&str; 7] = [
    "id", "begin_ms", "end_ms", "author", "kind", "content", "tags",
];

fn content(body: &Body) -> String {
    match body {
        Body::Comment { text } | Body::Overlay { text, .. } => text.clone(),
        Body::ResourceLink {
            resource_id,
            note: Some(note),
        } => format!("{resource_id}: {note}"),
        Body::ResourceLink {
            resource_id,
            note: None,
        } => resource_id.to_string(),
    }
}

/// Spreadsheet view with RFC 4180 quoting and CRLF record terminators.
/// Regions and timestamps are not included; tags are joined with `;`.
pub fn export_csv(set: &AnnotationSet, video: &VideoReference) -> Result<String, ExportError> {
    ensure_valid(set, video)?;
    let csv_err = |e: ::csv::Error| ExportError::Csv(e.to_string());
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for a in sort_timeline(&set.annotations) {
        w.write_record([
            a.id.to_string(),
            a.fragment.begin_ms.to_string(),
            a.fragment.end_ms.to_string(),
            a.author.to_string(),
            a.body.kind_str().to_owned(),
            content(&a.body),
            a.tags.join(";"),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExportError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer preserves utf-8"))
}
