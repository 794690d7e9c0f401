//! Validation against the shipped element inventory.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::xml::Element;

/// The schema text shipped with the crate.
pub const SCHEMA: &str = include_str!("../../schema/reaction-ruleml.schema");

#[derive(Debug)]
struct Rule {
    attrs: Option<Vec<String>>,
    any_attr: bool,
    text: bool,
    children: Vec<String>,
}

#[derive(Debug)]
pub struct Schema {
    rules: HashMap<String, Rule>,
}

fn split_list(s: &str, sep: char) -> Vec<String> {
    s.split(sep).map(str::trim).filter(|x| !x.is_empty() && *x != "-").map(String::from).collect()
}

impl Schema {
    pub fn parse(text: &str) -> Result<Schema, String> {
        let mut groups: HashMap<String, Vec<String>> = HashMap::new();
        let mut raw: Vec<(String, String, String)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                let (name, body) = rest.split_once('=').ok_or(format!("line {}: bad group", no + 1))?;
                groups.insert(name.trim().to_string(), split_list(body, ' '));
                continue;
            }
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(format!("line {}: expected `name | attributes | content`", no + 1));
            }
            raw.push((parts[0].into(), parts[1].into(), parts[2].into()));
        }
        fn expand(items: &[String], groups: &HashMap<String, Vec<String>>, out: &mut Vec<String>, depth: usize) {
            for i in items {
                match i.strip_prefix('@') {
                    Some(g) if depth < 8 => expand(groups.get(g).map(Vec::as_slice).unwrap_or(&[]), groups, out, depth + 1),
                    Some(_) => {}
                    None => out.push(i.clone()),
                }
            }
        }
        let mut rules = HashMap::new();
        for (name, attrs, content) in raw {
            let attrs = split_list(&attrs, ',');
            let any_attr = attrs.iter().any(|a| a == "*");
            let content = split_list(&content, ' ');
            let text = content.iter().any(|c| c == "text");
            let mut children = Vec::new();
            expand(&content, &groups, &mut children, 0);
            children.retain(|c| c != "text");
            let attrs = Some(attrs.into_iter().filter(|a| a != "*").collect());
            rules.insert(name, Rule { attrs, any_attr, text, children });
        }
        Ok(Schema { rules })
    }

    /// Every violation found, as `path: message` lines; empty means valid.
    pub fn validate(&self, root: &Element) -> Vec<String> {
        let mut errors = Vec::new();
        if root.name != "RuleML" && root.name != "Message" {
            errors.push(format!("/{}: unexpected root element", root.name));
        }
        self.check(root, "", &mut errors);
        errors
    }

    fn check(&self, el: &Element, path: &str, errors: &mut Vec<String>) {
        let path = format!("{path}/{}", el.name);
        let Some(rule) = self.rules.get(&el.name) else {
            errors.push(format!("{path}: unknown element"));
            return;
        };
        for (k, _) in &el.attrs {
            let listed = rule.attrs.as_ref().is_some_and(|a| a.contains(k));
            if !listed && !rule.any_attr && !k.starts_with("xmlns") {
                errors.push(format!("{path}: attribute {k} not allowed"));
            }
        }
        if !rule.text && !el.text.trim().is_empty() {
            errors.push(format!("{path}: character data not allowed"));
        }
        for c in &el.children {
            if !rule.children.contains(&c.name) {
                errors.push(format!("{path}: <{}> not allowed here", c.name));
            }
            self.check(c, &path, errors);
        }
    }
}

/// The parsed shipped schema.
pub fn shipped() -> &'static Schema {
    static S: OnceLock<Schema> = OnceLock::new();
    S.get_or_init(|| Schema::parse(SCHEMA).expect("shipped schema parses"))
}
