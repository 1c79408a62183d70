//! Multi-document YAML reading and writing for manifests and configs.

use chaos_core::{ManifestFile, ModelError, Node};
use serde::Deserialize;

/// Parses every document of a multi-document YAML text.
pub fn parse_documents(path: &str, text: &str) -> Result<Vec<Node>, ModelError> {
    let mut docs = Vec::new();
    for (index, de) in serde_yaml::Deserializer::from_str(text).enumerate() {
        let node = Node::deserialize(de).map_err(|e| ModelError::MalformedDocument {
            path: path.to_string(),
            index,
            reason: describe(&e),
        })?;
        docs.push(node);
    }
    Ok(docs)
}

fn describe(e: &serde_yaml::Error) -> String {
    match e.location() {
        Some(loc) => format!("line {}, column {}: {e}", loc.line(), loc.column()),
        None => e.to_string(),
    }
}

/// Parses a manifest file, keeping its original text.
pub fn parse_manifest_file(path: &str, text: &str) -> Result<ManifestFile, ModelError> {
    let docs = parse_documents(path, text)?;
    ManifestFile::new(path, text, docs)
}

pub fn to_yaml(node: &Node) -> String {
    serde_yaml::to_string(node).expect("document trees always serialize")
}

/// Renders documents as one multi-document text.
pub fn render_documents(docs: &[Node]) -> String {
    docs.iter().map(to_yaml).collect::<Vec<_>>().join("---\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_document_and_position() {
        let docs = parse_documents("a.yml", "kind: Pod\n---\nkind: Service\n").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].get("kind").and_then(Node::as_str), Some("Service"));

        let err = parse_documents("bad.yml", "kind: Pod\n---\nmetadata: [unclosed\n").unwrap_err();
        match err {
            ModelError::MalformedDocument { path, index, reason } => {
                assert_eq!(path, "bad.yml");
                assert_eq!(index, 1);
                assert!(reason.contains("line"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_reparses() {
        let docs = parse_documents("a.yml", "a: 1\nb: [x, y]\n---\nc: true\n").unwrap();
        let again = parse_documents("a.yml", &render_documents(&docs)).unwrap();
        assert_eq!(docs, again);
    }
}
