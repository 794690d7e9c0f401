//! A minimal element tree over quick-xml, plus an indenting writer.

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};

use super::RuleMLError;

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// Character data directly inside the element.
    pub text: String,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element { name: name.into(), attrs: Vec::new(), children: Vec::new(), text: String::new() }
    }

    pub fn with_text(name: &str, text: &str) -> Self {
        Element { text: text.into(), ..Element::new(name) }
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_attr(&mut self, key: &str, value: &str) {
        self.attrs.push((key.into(), value.into()));
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(child);
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn leaf_text(&self) -> String {
        self.text.clone()
    }
}

fn malformed(reader: &Reader<&[u8]>, msg: impl std::fmt::Display) -> RuleMLError {
    RuleMLError::MalformedXml { position: reader.error_position().max(reader.buffer_position()), message: msg.to_string() }
}

/// Parse a document into its root element.
pub fn parse(text: &str) -> Result<Element, RuleMLError> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let ev = reader.read_event().map_err(|e| malformed(&reader, e))?;
        let empty = matches!(ev, Event::Empty(_));
        match ev {
            Event::Start(e) | Event::Empty(e) => {
                let mut el = Element::new(e.name().as_ref());
                for a in e.attributes() {
                    let a = a.map_err(|e| malformed(&reader, e))?;
                    let key = a.key.as_ref().to_string();
                    let value = a.normalized_value(XmlVersion::Implicit1_0).map_err(|e| malformed(&reader, e))?;
                    el.attrs.push((key, value.into_owned()));
                }
                if empty {
                    attach(&mut stack, &mut root, el, &reader)?;
                } else {
                    stack.push(el);
                }
            }
            Event::End(e) => {
                let el = stack.pop().ok_or_else(|| malformed(&reader, "unbalanced end tag"))?;
                if e.name().as_ref() != el.name {
                    return Err(malformed(&reader, format!("expected </{}>", el.name)));
                }
                attach(&mut stack, &mut root, el, &reader)?;
            }
            Event::Text(t) => {
                // A literal line break marks layout: collapse it. Escaped
                // line breaks arrive as references and are kept.
                let raw = t.xml10_content();
                if raw.contains('\n') {
                    push_text(&mut stack, &raw.split_whitespace().collect::<Vec<_>>().join(" "), &reader)?;
                } else {
                    push_text(&mut stack, &raw, &reader)?;
                }
            }
            Event::CData(t) => push_text(&mut stack, &t.xml10_content(), &reader)?,
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref().map_err(|e| malformed(&reader, e))? {
                    Some(c) => c.to_string(),
                    None => {
                        let name = r.xml10_content();
                        resolve_predefined_entity(&name)
                            .ok_or_else(|| malformed(&reader, format!("unknown entity &{name};")))?
                            .to_string()
                    }
                };
                push_text(&mut stack, &resolved, &reader)?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(malformed(&reader, format!("unclosed <{}>", stack[stack.len() - 1].name)));
    }
    root.ok_or_else(|| malformed(&reader, "no root element"))
}

fn push_text(stack: &mut [Element], text: &str, reader: &Reader<&[u8]>) -> Result<(), RuleMLError> {
    match stack.last_mut() {
        Some(el) => {
            el.text.push_str(text);
            Ok(())
        }
        None if text.trim().is_empty() => Ok(()),
        None => Err(malformed(reader, "text outside the root element")),
    }
}

fn attach(
    stack: &mut [Element],
    root: &mut Option<Element>,
    el: Element,
    reader: &Reader<&[u8]>,
) -> Result<(), RuleMLError> {
    match stack.last_mut() {
        Some(parent) => {
            parent.children.push(el);
            Ok(())
        }
        None if root.is_none() => {
            *root = Some(el);
            Ok(())
        }
        None => Err(malformed(reader, "more than one root element")),
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn write_el(el: &Element, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    out.push_str(&pad);
    out.push('<');
    out.push_str(&el.name);
    for (k, v) in &el.attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        escape_text(v, out);
        out.push('"');
    }
    if el.children.is_empty() && el.text.is_empty() {
        out.push_str("/>\n");
    } else if el.children.is_empty() {
        out.push('>');
        escape_text(&el.text, out);
        out.push_str("</");
        out.push_str(&el.name);
        out.push_str(">\n");
    } else {
        out.push_str(">\n");
        for c in &el.children {
            write_el(c, depth + 1, out);
        }
        out.push_str(&pad);
        out.push_str("</");
        out.push_str(&el.name);
        out.push_str(">\n");
    }
}

/// Serialize with an XML declaration and two-space indentation.
pub fn write(root: &Element) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_el(root, 0, &mut out);
    out
}
