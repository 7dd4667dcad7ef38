use std::fmt::Write as _;
use std::str::FromStr;

use roxmltree::{Node, NodeType};

use super::CodecError;

pub(super) fn parse_document(bytes: &[u8]) -> Result<roxmltree::Document<'_>, CodecError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CodecError::MalformedDocument(format!("not UTF-8: {e}")))?;
    roxmltree::Document::parse(text).map_err(|e| CodecError::MalformedDocument(e.to_string()))
}

fn violation(msg: impl Into<String>) -> CodecError {
    CodecError::SchemaViolation(msg.into())
}

/// Checks the element name and rejects any attribute outside `allowed`.
pub(super) fn expect_element(
    node: Node<'_, '_>,
    name: &str,
    allowed: &[&str],
) -> Result<(), CodecError> {
    if node.tag_name().namespace().is_some() || node.tag_name().name() != name {
        return Err(violation(format!(
            "unexpected element <{}>, wanted <{name}>",
            node.tag_name().name()
        )));
    }
    for attr in node.attributes() {
        if attr.namespace().is_some() || !allowed.contains(&attr.name()) {
            return Err(violation(format!(
                "unknown attribute `{}` on <{name}>",
                attr.name()
            )));
        }
    }
    Ok(())
}

/// Child elements of `node`; non-blank text is an error.
pub(super) fn child_elements<'a, 'input>(
    node: Node<'a, 'input>,
) -> Result<Vec<Node<'a, 'input>>, CodecError> {
    let mut out = Vec::new();
    for child in node.children() {
        match child.node_type() {
            NodeType::Element => out.push(child),
            NodeType::Text => {
                if !child.text().unwrap_or_default().trim().is_empty() {
                    return Err(violation(format!(
                        "unexpected text inside <{}>",
                        node.tag_name().name()
                    )));
                }
            }
            NodeType::Comment | NodeType::PI => {}
            NodeType::Root => unreachable!("root node is never a child"),
        }
    }
    Ok(out)
}

pub(super) fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, CodecError> {
    node.attribute(attr).ok_or_else(|| {
        violation(format!(
            "missing attribute `{attr}` on <{}>",
            node.tag_name().name()
        ))
    })
}

pub(super) fn parsed<T: FromStr>(
    node: Node<'_, '_>,
    attr: &str,
    value: &str,
) -> Result<T, CodecError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| violation(format!("bad `{attr}` on <{}>: {e}", node.tag_name().name())))
}

pub(super) fn required_parsed<T: FromStr>(node: Node<'_, '_>, attr: &str) -> Result<T, CodecError>
where
    T::Err: std::fmt::Display,
{
    parsed(node, attr, required(node, attr)?)
}

/// Plain decimal without sign or surrounding whitespace.
pub(super) fn parse_uint<T: FromStr>(
    node: Node<'_, '_>,
    attr: &str,
    value: &str,
) -> Result<T, CodecError> {
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
        return Err(violation(format!(
            "bad `{attr}` on <{}>: `{value}` is not a non-negative integer",
            node.tag_name().name()
        )));
    }
    value
        .parse()
        .map_err(|_| violation(format!("`{attr}` out of range: {value}")))
}

pub(super) struct Writer {
    out: String,
}

impl Writer {
    pub fn new() -> Self {
        Writer { out: String::new() }
    }

    /// Writes `<name a="v" ...` at `depth`; caller closes with `open_end` or `empty_end`.
    pub fn start(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"");
            escape_into(&mut self.out, v);
            self.out.push('"');
        }
    }

    pub fn open_end(&mut self) {
        self.out.push_str(">\n");
    }

    pub fn empty_end(&mut self) {
        self.out.push_str("/>\n");
    }

    pub fn close(&mut self, depth: usize, name: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        let _ = writeln!(self.out, "</{name}>");
    }

    pub fn finish(self) -> Vec<u8> {
        self.out.into_bytes()
    }
}

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}
