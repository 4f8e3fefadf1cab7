use super::{AnnotatedOutput, TemplateError};
use crate::model::ElementPath;
use crate::trace::{
    build_identifier_tree, CodeSpan, LocalTraceModel, ModelRef, TraceIdentifierTree, TraceLink, TEMPLATE_TAG,
};

/// Result of reading an annotated output back.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// The output with every marker removed.
    pub clean: String,
    /// One link per marker region, in order of the opening markers.
    pub links: Vec<TraceLink>,
    pub tree: TraceIdentifierTree,
}

impl Extraction {
    pub fn trace_model(&self, id: &str, transformation: &str, stamp: u64) -> LocalTraceModel {
        LocalTraceModel::new(id, transformation, stamp, self.links.clone())
    }
}

/// Strips the markers from `a` and turns each marker region into a link from
/// the marked element of `model_uri` to the region's extent in the clean text
/// of `file_uri`. Paths lose their leading parameter name, so they are
/// relative to the model root. Outer regions include nested ones.
pub fn extract_trace(a: &AnnotatedOutput, model_uri: &str, file_uri: &str) -> Result<Extraction, TemplateError> {
    let (open, close) = (a.markers.open.as_str(), a.markers.close.as_str());
    let end_token = a.markers.end_token();
    let text = a.text.as_str();
    let mut clean = String::with_capacity(text.len());
    // (path, clean start, end once closed, offset of the opening marker)
    let mut regions: Vec<(ElementPath, usize, Option<usize>, usize)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let Some(found) = text[i..].find(open) else {
            clean.push_str(&text[i..]);
            break;
        };
        let at = i + found;
        clean.push_str(&text[i..at]);
        if text[at..].starts_with(&end_token) {
            let r = stack.pop().ok_or_else(|| TemplateError::UnbalancedMarker {
                offset: at,
                message: "closing marker without an open region".into(),
            })?;
            regions[r].2 = Some(clean.len());
            i = at + end_token.len();
            continue;
        }
        let payload_start = at + open.len();
        let Some(len) = text[payload_start..].find(close) else {
            return Err(TemplateError::UnbalancedMarker {
                offset: at,
                message: "opening marker is not terminated".into(),
            });
        };
        let payload = &text[payload_start..payload_start + len];
        let path = ElementPath::parse(payload).map_err(|e| TemplateError::PathSyntax {
            offset: payload_start + e.offset,
            message: e.message,
        })?;
        stack.push(regions.len());
        regions.push((path.normalized(), clean.len(), None, at));
        i = payload_start + len + close.len();
    }
    if let Some(r) = stack.pop() {
        return Err(TemplateError::UnbalancedMarker {
            offset: regions[r].3,
            message: "region is never closed".into(),
        });
    }
    let links: Vec<TraceLink> = regions
        .iter()
        .map(|(path, start, end, _)| {
            let end = end.expect("all regions closed");
            TraceLink::new(
                ModelRef::new(model_uri, path.clone()),
                CodeSpan::in_text(file_uri, &clean, *start, end).into(),
            )
            .tagged(TEMPLATE_TAG, a.template.clone())
        })
        .collect();
    let tree = build_identifier_tree(regions.iter().map(|r| &r.0));
    Ok(Extraction { clean, links, tree })
}
