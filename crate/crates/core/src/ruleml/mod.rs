//! Reaction RuleML interchange: clauses, ECA rules, event expressions, event
//! messages and IDL interface declarations to and from XML.
//!
//! Terms map to `Ind`/`Data`/`Var`/`Expr`/`Plex`, goals to `Atom`/`And`/`Or`/
//! `Naf`/`Neg`, and event and action operators to their algebra elements.
//! Attributes the mapping does not interpret (such as `type` on `Ind`) are
//! kept as annotations: the term `'@'(T, [key = "value", ..])`. On `Atom`,
//! attributes of the `Rel` child use keys prefixed with `rel:` and an `<oid>`
//! child is stored under `oid`.

pub mod schema;
mod xml;

use std::collections::{HashMap, HashSet};

use crate::eca::EcaRule;
use crate::messaging::Message;
use crate::parser::{parse_program, Clause, Literal, SyntaxError};
use crate::term::{variant_eq, Term, TimePoint, Var};

pub use xml::Element;

#[derive(Debug, thiserror::Error)]
pub enum RuleMLError {
    #[error("malformed XML near byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("cannot import: {}", .0.join("; "))]
    Import(Vec<String>),
    #[error("cannot serialize {0}")]
    Unserializable(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

fn import_err(msg: impl Into<String>) -> RuleMLError {
    RuleMLError::Import(vec![msg.into()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Active,
    Messaging,
    Reasoning,
}

impl Execution {
    pub fn as_str(self) -> &'static str {
        match self {
            Execution::Active => "active",
            Execution::Messaging => "messaging",
            Execution::Reasoning => "reasoning",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "active" => Some(Execution::Active),
            "messaging" => Some(Execution::Messaging),
            "reasoning" => Some(Execution::Reasoning),
            _ => None,
        }
    }
}

/// Recorded from `@eval` and carried through; execution ignores it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eval {
    Weak,
    Strong,
}

/// Rule-level attributes that do not affect the internal rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleMeta {
    pub execution: Execution,
    pub eval: Option<Eval>,
    pub label: Option<Term>,
}

impl RuleMeta {
    pub fn reasoning() -> Self {
        RuleMeta { execution: Execution::Reasoning, eval: None, label: None }
    }

    pub fn active() -> Self {
        RuleMeta { execution: Execution::Active, eval: None, label: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Inbound,
    Outbound,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Inbound => "inbound",
            Mode::Outbound => "outbound",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XmlMessage {
    pub mode: Mode,
    pub message: Message,
}

/// Instantiation pattern of one interface argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ArgMode {
    /// `+`
    In,
    /// `-`
    Out,
    /// `?`, the default
    #[default]
    Any,
}

impl ArgMode {
    pub fn symbol(self) -> &'static str {
        match self {
            ArgMode::In => "+",
            ArgMode::Out => "-",
            ArgMode::Any => "?",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "+" => Some(ArgMode::In),
            "-" => Some(ArgMode::Out),
            "?" => Some(ArgMode::Any),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceArg {
    pub name: String,
    pub type_tag: Option<String>,
    pub mode: ArgMode,
}

/// `interface(QueryLiteral, Description)` with per-argument modes and types.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceDecl {
    pub functor: String,
    pub args: Vec<InterfaceArg>,
    pub description: String,
}

impl InterfaceDecl {
    /// The execution-syntax fact: `interface/2` when every argument is
    /// untyped with mode `?`, else `interface/3` with a `mode(M[, Type])` list.
    pub fn to_term(&self) -> Term {
        let sig = Term::compound(
            self.functor.as_str(),
            self.args.iter().enumerate().map(|(i, a)| Term::var(a.name.as_str(), i as u64)).collect(),
        );
        let desc = Term::string(self.description.as_str());
        if self.args.iter().all(|a| a.mode == ArgMode::Any && a.type_tag.is_none()) {
            return Term::compound("interface", vec![sig, desc]);
        }
        let modes = self.args.iter().map(|a| {
            let mut m = vec![Term::atom(a.mode.symbol())];
            if let Some(t) = &a.type_tag {
                m.push(Term::string(t.as_str()));
            }
            Term::compound("mode", m)
        });
        Term::compound("interface", vec![sig, desc, Term::list(modes)])
    }

    /// Inverse of [`InterfaceDecl::to_term`]; `None` for other terms.
    pub fn from_term(t: &Term) -> Option<InterfaceDecl> {
        let (name, arity) = t.functor()?;
        if name != "interface" || !(arity == 2 || arity == 3) {
            return None;
        }
        let args = t.args();
        let (functor, _) = args[0].functor()?;
        let names: Option<Vec<String>> = args[0]
            .args()
            .iter()
            .map(|a| match a {
                Term::Var(v) if !v.is_anonymous() => Some(v.name().to_string()),
                _ => None,
            })
            .collect();
        let names = names?;
        let description = args[1].as_text()?.to_string();
        let modes: Vec<(ArgMode, Option<String>)> = if arity == 3 {
            let items = args[2].as_list()?;
            if items.len() != names.len() {
                return None;
            }
            items
                .iter()
                .map(|m| match m.functor() {
                    Some(("mode", 1)) => Some((ArgMode::parse(m.args()[0].as_text()?)?, None)),
                    Some(("mode", 2)) => {
                        Some((ArgMode::parse(m.args()[0].as_text()?)?, Some(m.args()[1].as_text()?.to_string())))
                    }
                    _ => None,
                })
                .collect::<Option<_>>()?
        } else {
            names.iter().map(|_| (ArgMode::Any, None)).collect()
        };
        Some(InterfaceDecl {
            functor: functor.to_string(),
            args: names
                .into_iter()
                .zip(modes)
                .map(|(name, (mode, type_tag))| InterfaceArg { name, type_tag, mode })
                .collect(),
            description,
        })
    }
}

/// One top-level document item.
#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Clause(Clause, RuleMeta),
    Eca(EcaRule, RuleMeta),
    Message(XmlMessage),
    /// A standalone event algebra expression.
    Event(Term),
    Interface(InterfaceDecl),
}

fn conj(goals: Vec<Term>) -> Term {
    let mut it = goals.into_iter().rev();
    match it.next() {
        None => Term::atom("true"),
        Some(last) => it.fold(last, |acc, g| Term::compound(",", vec![g, acc])),
    }
}

impl Item {
    /// A single term capturing everything the item says, for comparisons up
    /// to variable renaming.
    pub fn to_term(&self) -> Term {
        fn meta_term(m: &RuleMeta) -> Term {
            Term::compound(
                "meta",
                vec![
                    Term::atom(m.execution.as_str()),
                    Term::atom(match m.eval {
                        None => "none",
                        Some(Eval::Weak) => "weak",
                        Some(Eval::Strong) => "strong",
                    }),
                    m.label.clone().unwrap_or(Term::Nil),
                ],
            )
        }
        match self {
            Item::Clause(c, m) => {
                let body = conj(c.body.iter().map(Literal::to_goal).collect());
                Term::compound("clause", vec![c.head.clone(), body, meta_term(m)])
            }
            Item::Eca(r, m) => {
                let part = |p: &Option<Term>| p.clone().unwrap_or(Term::atom("$blank"));
                Term::compound(
                    "eca",
                    vec![
                        part(&r.time),
                        part(&r.event),
                        part(&r.condition),
                        part(&r.action),
                        part(&r.post),
                        part(&r.else_action),
                        r.source_oid.clone(),
                        meta_term(m),
                    ],
                )
            }
            Item::Message(x) => {
                let m = &x.message;
                Term::compound(
                    "message",
                    vec![
                        Term::atom(x.mode.as_str()),
                        Term::string(m.performative.as_str()),
                        m.xid.clone(),
                        Term::string(m.protocol.as_str()),
                        Term::string(m.sender.as_str()),
                        Term::string(m.receiver.as_str()),
                        m.payload.clone(),
                        Term::list(m.context.iter().cloned()),
                    ],
                )
            }
            Item::Event(e) => Term::compound("event", vec![e.clone()]),
            Item::Interface(d) => d.to_term(),
        }
    }

    /// Equality up to consistent variable renaming.
    pub fn equivalent(&self, other: &Item) -> bool {
        variant_eq(&self.to_term(), &other.to_term())
    }
}

const EVENT_OPS: &[(&str, &str)] = &[
    ("sequence", "Sequence"),
    ("or", "Disjunction"),
    ("and", "Conjunction"),
    ("xor", "Xor"),
    ("concurrent", "Concurrent"),
    ("neg", "Not"),
    ("any", "Any"),
    ("aperiodic", "Aperiodic"),
    ("periodic", "Periodic"),
    ("succession", "Succession"),
    ("choice", "Choice"),
    ("flow", "Flow"),
    ("loop", "Loop"),
];

fn op_element(name: &str, arity: usize) -> Option<&'static str> {
    if name == "neg" && arity != 2 {
        return None;
    }
    EVENT_OPS.iter().find(|(n, _)| *n == name).map(|(_, e)| *e)
}

fn op_functor(element: &str) -> Option<&'static str> {
    EVENT_OPS.iter().find(|(_, e)| *e == element).map(|(n, _)| *n)
}

fn is_event_element(name: &str) -> bool {
    matches!(
        name,
        "Sequence" | "Disjunction" | "Conjunction" | "Xor" | "Concurrent" | "Not" | "Any" | "Aperiodic" | "Periodic"
    )
}

/// Split `'@'(T, [k = V, ..])` into `T` and its annotation pairs.
fn annotation(t: &Term) -> Option<(&Term, Vec<(String, Term)>)> {
    if !t.is_functor("@", 2) {
        return None;
    }
    let items = t.args()[1].as_list()?;
    let pairs = items
        .iter()
        .map(|p| {
            if !p.is_functor("=", 2) {
                return None;
            }
            let key = p.args()[0].as_atom()?.to_string();
            let value = p.args()[1].clone();
            let ok = if key == "oid" { true } else { matches!(value, Term::Str(_)) };
            ok.then_some((key, value))
        })
        .collect::<Option<Vec<_>>>()?;
    Some((&t.args()[0], pairs))
}

fn annotated(inner: Term, pairs: Vec<(String, Term)>) -> Term {
    if pairs.is_empty() {
        return inner;
    }
    let items = pairs.into_iter().map(|(k, v)| Term::compound("=", vec![Term::atom(k.as_str()), v]));
    Term::compound("@", vec![inner, Term::list(items)])
}

fn is_dotted(name: &str) -> bool {
    name.contains('.') && name.len() > 1
}

/// Per-item encoder: assigns every distinct variable a distinct name.
#[derive(Default)]
struct Encoder {
    names: HashMap<Var, String>,
    used: HashSet<String>,
}

impl Encoder {
    fn var(&mut self, v: &Var) -> Element {
        if v.is_anonymous() {
            return Element::with_text("Var", "_");
        }
        if let Some(n) = self.names.get(v) {
            return Element::with_text("Var", n);
        }
        let mut name = v.name().to_string();
        let mut k = 1;
        while self.used.contains(&name) {
            name = format!("{}_{k}", v.name());
            k += 1;
        }
        self.used.insert(name.clone());
        self.names.insert(v.clone(), name.clone());
        Element::with_text("Var", &name)
    }

    fn apply_annotations(&mut self, mut el: Element, pairs: &[(String, Term)]) -> Result<Element, RuleMLError> {
        for (k, v) in pairs {
            if k == "oid" {
                if el.name != "Atom" {
                    return Err(RuleMLError::Unserializable(format!("oid annotation on <{}>", el.name)));
                }
                let mut oid = Element::new("oid");
                oid.push(self.term(v)?);
                el.children.insert(0, oid);
                continue;
            }
            let text = v.as_text().unwrap_or_default().to_string();
            let nested = k.strip_prefix("rel:").map(|a| ("Rel", a)).or_else(|| k.strip_prefix("fun:").map(|a| ("Fun", a)));
            if let Some((child, key)) = nested {
                match el.children.iter_mut().find(|c| c.name == child) {
                    Some(c) => c.set_attr(key, &text),
                    None => return Err(RuleMLError::Unserializable(format!("{k} annotation on <{}>", el.name))),
                }
                continue;
            }
            match el.attrs.iter_mut().find(|(a, _)| a == k) {
                Some(slot) => slot.1 = text,
                None => el.set_attr(k, &text),
            }
        }
        Ok(el)
    }

    /// Term context: data values and function terms.
    fn term(&mut self, t: &Term) -> Result<Element, RuleMLError> {
        if let Some((inner, pairs)) = annotation(t) {
            let el = self.term(inner)?;
            return self.apply_annotations(el, &pairs);
        }
        Ok(match t {
            Term::Var(v) => self.var(v),
            Term::Atom(a) => Element::with_text("Ind", a),
            Term::Int(i) => typed_data("xs:integer", &i.to_string()),
            Term::Float(f) => typed_data("xs:double", &format!("{f:?}")),
            Term::Str(s) => typed_data("xs:string", s),
            Term::Time(tp) => typed_data("xs:dateTime", &tp.to_iso()),
            Term::Nil => Element::new("Plex"),
            Term::Cons(_) => {
                let (items, tail) = t.list_parts().expect("cons cell is a list");
                let mut plex = Element::new("Plex");
                for i in &items {
                    plex.push(self.term(i)?);
                }
                if !matches!(tail, Term::Nil) {
                    let mut repo = Element::new("repo");
                    repo.push(self.term(&tail)?);
                    plex.push(repo);
                }
                plex
            }
            Term::Compound(c) => {
                let mut expr = Element::new("Expr");
                expr.push(Element::with_text("Fun", &c.functor));
                for a in &c.args {
                    expr.push(self.term(a)?);
                }
                expr
            }
        })
    }

    /// Formula context: goals, connectives and algebra expressions.
    fn formula(&mut self, t: &Term) -> Result<Element, RuleMLError> {
        if let Some((inner, pairs)) = annotation(t) {
            let el = self.formula(inner)?;
            return self.apply_annotations(el, &pairs);
        }
        let Some((name, arity)) = t.functor() else {
            return self.term(t);
        };
        let args = t.args();
        let connective = match (name, arity) {
            (",", 2) => Some("And"),
            (";", 2) => Some("Or"),
            _ => None,
        };
        if let Some(el_name) = connective {
            let mut el = Element::new(el_name);
            let mut cur = t;
            while cur.is_functor(name, 2) && annotation(cur).is_none() {
                el.push(self.formula(&cur.args()[0])?);
                cur = &cur.args()[1];
            }
            el.push(self.formula(cur)?);
            return Ok(el);
        }
        let wrapper = match (name, arity) {
            ("not", 1) => Some("Naf"),
            ("neg", 1) => Some("Neg"),
            _ => op_element(name, arity),
        };
        if let Some(el_name) = wrapper {
            let mut el = Element::new(el_name);
            for a in args {
                el.push(self.formula(a)?);
            }
            return Ok(el);
        }
        if is_dotted(name) {
            return Err(RuleMLError::Unserializable(format!("procedural attachment {name}/{arity}")));
        }
        let mut atom = Element::new("Atom");
        atom.push(Element::with_text("Rel", name));
        for a in args {
            atom.push(self.term(a)?);
        }
        Ok(atom)
    }

    fn part(&mut self, rule: &mut Element, name: &str, t: &Option<Term>, always: bool) -> Result<(), RuleMLError> {
        match t {
            Some(t) => {
                let mut p = Element::new(name);
                p.push(self.formula(t)?);
                rule.push(p);
            }
            None if always => rule.push(Element::new(name)),
            None => {}
        }
        Ok(())
    }
}

fn typed_data(ty: &str, text: &str) -> Element {
    let mut d = Element::with_text("Data", text);
    d.set_attr("type", ty);
    d
}

fn rule_element(meta: &RuleMeta) -> Element {
    let mut rule = Element::new("Rule");
    rule.set_attr("execution", meta.execution.as_str());
    if let Some(e) = meta.eval {
        rule.set_attr("eval", if e == Eval::Weak { "weak" } else { "strong" });
    }
    rule
}

fn is_interface_shaped(t: &Term) -> bool {
    t.is_functor("interface", 2)
        && t.args()[0].args().iter().all(Term::is_var)
        && !t.args()[0].args().is_empty()
        && matches!(t.args()[1], Term::Atom(_))
}

fn export_item_el(item: &Item) -> Result<Element, RuleMLError> {
    let mut enc = Encoder::default();
    match item {
        Item::Clause(c, meta) => {
            if c.body.is_empty() && *meta == RuleMeta::reasoning() && !is_interface_shaped(&c.head) {
                let el = enc.formula(&c.head)?;
                if el.name == "Atom" {
                    return Ok(el);
                }
            }
            let mut enc = Encoder::default();
            let mut rule = rule_element(meta);
            if let Some(l) = &meta.label {
                let mut label = Element::new("label");
                label.push(enc.formula(l)?);
                rule.push(label);
            }
            if !c.body.is_empty() {
                let mut and = Element::new("And");
                for lit in &c.body {
                    and.push(enc.formula(&lit.to_goal())?);
                }
                let mut cond = Element::new("if");
                cond.push(and);
                rule.push(cond);
            }
            let mut then = Element::new("then");
            then.push(enc.formula(&c.head)?);
            rule.push(then);
            Ok(rule)
        }
        Item::Eca(r, meta) => {
            let mut rule = rule_element(meta);
            let mut oid = Element::new("oid");
            oid.push(enc.term(&r.source_oid)?);
            rule.push(oid);
            if let Some(l) = &meta.label {
                let mut label = Element::new("label");
                label.push(enc.formula(l)?);
                rule.push(label);
            }
            enc.part(&mut rule, "qualification", &r.time, false)?;
            enc.part(&mut rule, "on", &r.event, false)?;
            enc.part(&mut rule, "if", &r.condition, false)?;
            enc.part(&mut rule, "do", &r.action, true)?;
            enc.part(&mut rule, "after", &r.post, false)?;
            enc.part(&mut rule, "elseDo", &r.else_action, false)?;
            Ok(rule)
        }
        Item::Message(x) => message_element(&mut enc, x),
        Item::Event(e) => {
            let el = enc.formula(e)?;
            if !is_event_element(&el.name) {
                return Err(RuleMLError::Unserializable(format!("{e} is not an event algebra expression")));
            }
            Ok(el)
        }
        Item::Interface(d) => {
            let mut atom = Element::new("Atom");
            atom.push(Element::with_text("Rel", "interface"));
            let mut expr = Element::new("Expr");
            expr.push(Element::with_text("Fun", &d.functor));
            for a in &d.args {
                let mut v = Element::with_text("Var", &a.name);
                if let Some(t) = &a.type_tag {
                    v.set_attr("type", t);
                }
                if a.mode != ArgMode::Any {
                    v.set_attr("mode", a.mode.symbol());
                }
                expr.push(v);
            }
            atom.push(expr);
            atom.push(Element::with_text("Ind", &d.description));
            Ok(atom)
        }
    }
}

fn message_element(enc: &mut Encoder, x: &XmlMessage) -> Result<Element, RuleMLError> {
    let m = &x.message;
    let mut el = Element::new("Message");
    el.set_attr("mode", x.mode.as_str());
    let directive = if m.performative.contains(':') { m.performative.clone() } else { format!("ACL:{}", m.performative) };
    el.set_attr("directive", &directive);
    let wrap = |name: &str, child: Element| {
        let mut e = Element::new(name);
        e.push(child);
        e
    };
    el.push(wrap("oid", enc.term(&m.xid)?));
    el.push(wrap("protocol", Element::with_text("Ind", &m.protocol)));
    el.push(wrap("sender", Element::with_text("Ind", &m.sender)));
    if !m.receiver.is_empty() {
        el.push(wrap("receiver", Element::with_text("Ind", &m.receiver)));
    }
    let mut content = Element::new("content");
    content.push(enc.formula(&m.payload)?);
    for c in &m.context {
        content.push(enc.term(c)?);
    }
    el.push(content);
    Ok(el)
}

/// Serialize items as one `<RuleML>` document.
pub fn export(items: &[Item]) -> Result<String, RuleMLError> {
    let mut root = Element::new("RuleML");
    for item in items {
        root.push(export_item_el(item)?);
    }
    Ok(xml::write(&root))
}

/// Serialize a message as a standalone `<Message>` document (the wire form).
pub fn message_to_xml(msg: &Message) -> String {
    message_document(&XmlMessage { mode: Mode::Outbound, message: msg.clone() })
        .unwrap_or_else(|e| {
            log::warn!("message payload not serializable ({e}); sending it as a string");
            let mut m = msg.clone();
            m.payload = Term::string(crate::parser::format_term(&msg.payload));
            message_document(&XmlMessage { mode: Mode::Outbound, message: m }).expect("string payloads serialize")
        })
}

pub fn message_document(x: &XmlMessage) -> Result<String, RuleMLError> {
    Ok(xml::write(&message_element(&mut Encoder::default(), x)?))
}

/// Parse a wire message; the receiving side sees it as inbound.
pub fn message_from_xml(text: &str) -> Result<Message, RuleMLError> {
    let root = xml::parse(text)?;
    let el = if root.name == "Message" {
        &root
    } else {
        match root.children.as_slice() {
            [only] if only.name == "Message" => only,
            _ => return Err(import_err("expected a single <Message>")),
        }
    };
    check_schema(el)?;
    Ok(Decoder::default().message(el)?.message)
}

fn check_schema(el: &Element) -> Result<(), RuleMLError> {
    let mut wrapped = Element::new("RuleML");
    let errs = if el.name == "RuleML" {
        schema::shipped().validate(el)
    } else {
        wrapped.push(el.clone());
        schema::shipped().validate(&wrapped)
    };
    if errs.is_empty() {
        Ok(())
    } else {
        Err(RuleMLError::Import(errs))
    }
}

/// Check an XML document against the shipped schema.
pub fn validate(text: &str) -> Result<Vec<String>, RuleMLError> {
    Ok(schema::shipped().validate(&xml::parse(text)?))
}

/// Parse a document into items.
pub fn import(text: &str) -> Result<Vec<Item>, RuleMLError> {
    let root = xml::parse(text)?;
    let items: Vec<&Element> = match root.name.as_str() {
        "RuleML" => root.children.iter().collect(),
        _ => vec![&root],
    };
    check_schema(&root)?;
    items.into_iter().map(|el| Decoder::default().item(el)).collect()
}

/// Per-item decoder: one variable per distinct name.
#[derive(Default)]
struct Decoder {
    vars: HashMap<String, Var>,
    next: u64,
}

const RULE_PARTS: &[&str] =
    &["oid", "label", "qualification", "on", "if", "then", "do", "after", "else", "elseDo", "elseAfter"];

impl Decoder {
    fn var(&mut self, name: &str) -> Term {
        if name == "_" || name.is_empty() {
            self.next += 1;
            return Term::Var(Var::new("_", self.next - 1));
        }
        let next = &mut self.next;
        let v = self.vars.entry(name.to_string()).or_insert_with(|| {
            *next += 1;
            Var::new(name, *next - 1)
        });
        Term::Var(v.clone())
    }

    fn single_child<'e>(&self, el: &'e Element) -> Result<&'e Element, RuleMLError> {
        match el.children.as_slice() {
            [c] => Ok(c),
            _ => Err(import_err(format!("<{}> must hold exactly one element", el.name))),
        }
    }

    fn term(&mut self, el: &Element) -> Result<Term, RuleMLError> {
        let mut pairs: Vec<(String, Term)> = Vec::new();
        let t = match el.name.as_str() {
            "Ind" => Term::atom(el.leaf_text().as_str()),
            "Var" => self.var(el.leaf_text().trim()),
            "Data" => {
                let text = el.leaf_text();
                let ty = el.attr("type");
                let parsed = match ty {
                    Some("xs:integer") => Some(
                        text.trim().parse::<i64>().map(Term::Int).map_err(|_| import_err(format!("bad integer {text}")))?,
                    ),
                    Some("xs:double") => Some(
                        text.trim().parse::<f64>().map(Term::Float).map_err(|_| import_err(format!("bad double {text}")))?,
                    ),
                    Some("xs:dateTime") => Some(
                        TimePoint::parse_iso(text.trim())
                            .map(Term::Time)
                            .ok_or_else(|| import_err(format!("bad dateTime {text}")))?,
                    ),
                    Some("xs:string") | None => Some(Term::string(text.as_str())),
                    Some(_) => None,
                };
                match parsed {
                    Some(t) => {
                        pairs.extend(el.attrs.iter().filter(|(k, _)| k != "type").map(|(k, v)| (k.clone(), Term::string(v.as_str()))));
                        return Ok(annotated(t, pairs));
                    }
                    None => Term::string(text.as_str()),
                }
            }
            "Plex" => {
                let mut items = Vec::new();
                let mut tail = Term::Nil;
                for c in &el.children {
                    if c.name == "repo" {
                        tail = self.term(self.single_child(c)?)?;
                    } else {
                        items.push(self.term(c)?);
                    }
                }
                Term::list_with_tail(items, tail)
            }
            "Expr" => {
                let (fun, rest) = match el.children.split_first() {
                    Some((f, rest)) if f.name == "Fun" => (f, rest),
                    _ => return Err(import_err("<Expr> must start with <Fun>")),
                };
                let args = rest.iter().map(|c| self.term(c)).collect::<Result<Vec<_>, _>>()?;
                pairs.extend(fun.attrs.iter().map(|(k, v)| (format!("fun:{k}"), Term::string(v.as_str()))));
                Term::compound(fun.leaf_text().as_str(), args)
            }
            _ => return self.formula(el),
        };
        let mut own: Vec<(String, Term)> = el.attrs.iter().map(|(k, v)| (k.clone(), Term::string(v.as_str()))).collect();
        own.extend(pairs);
        Ok(annotated(t, own))
    }

    fn formula(&mut self, el: &Element) -> Result<Term, RuleMLError> {
        let children = &el.children;
        let t = match el.name.as_str() {
            "Atom" => {
                let mut oid = None;
                let mut rel = None;
                let mut args = Vec::new();
                for c in children {
                    match c.name.as_str() {
                        "oid" if oid.is_none() && rel.is_none() => oid = Some(self.term(self.single_child(c)?)?),
                        "Rel" if rel.is_none() => rel = Some(c),
                        _ if rel.is_some() => args.push(self.term(c)?),
                        other => return Err(import_err(format!("unexpected <{other}> in <Atom>"))),
                    }
                }
                let rel = rel.ok_or_else(|| import_err("<Atom> without <Rel>"))?;
                let mut pairs: Vec<(String, Term)> =
                    el.attrs.iter().map(|(k, v)| (k.clone(), Term::string(v.as_str()))).collect();
                pairs.extend(rel.attrs.iter().map(|(k, v)| (format!("rel:{k}"), Term::string(v.as_str()))));
                if let Some(o) = oid {
                    pairs.push(("oid".into(), o));
                }
                return Ok(annotated(Term::compound(rel.leaf_text().as_str(), args), pairs));
            }
            "And" | "Or" => {
                let op = if el.name == "And" { "," } else { ";" };
                let parts = children.iter().map(|c| self.formula(c)).collect::<Result<Vec<_>, _>>()?;
                let mut it = parts.into_iter().rev();
                match it.next() {
                    None if op == "," => Term::atom("true"),
                    None => Term::atom("fail"),
                    Some(last) => it.fold(last, |acc, g| Term::compound(op, vec![g, acc])),
                }
            }
            "Naf" | "Neg" => {
                let g = self.formula(self.single_child(el)?)?;
                Term::compound(if el.name == "Naf" { "not" } else { "neg" }, vec![g])
            }
            "Ind" | "Var" | "Data" | "Plex" | "Expr" => return self.term(el),
            name => match op_functor(name) {
                Some(f) => {
                    let args = children.iter().map(|c| self.formula(c)).collect::<Result<Vec<_>, _>>()?;
                    Term::compound(f, args)
                }
                None => return Err(import_err(format!("unsupported element <{name}>"))),
            },
        };
        let pairs: Vec<(String, Term)> = el.attrs.iter().map(|(k, v)| (k.clone(), Term::string(v.as_str()))).collect();
        Ok(annotated(t, pairs))
    }

    /// A rule part: blank when empty, a conjunction when it holds several goals.
    fn part(&mut self, el: Option<&Element>) -> Result<Option<Term>, RuleMLError> {
        let Some(el) = el else { return Ok(None) };
        if el.children.is_empty() {
            return Ok(None);
        }
        let goals = el.children.iter().map(|c| self.formula(c)).collect::<Result<Vec<_>, _>>()?;
        Ok(Some(conj(goals)))
    }

    fn message(&mut self, el: &Element) -> Result<XmlMessage, RuleMLError> {
        let mode = match el.attr("mode") {
            Some("inbound") => Mode::Inbound,
            Some("outbound") => Mode::Outbound,
            other => return Err(import_err(format!("message mode {other:?}"))),
        };
        let directive = el.attr("directive").unwrap_or("");
        let performative = directive.strip_prefix("ACL:").unwrap_or(directive).to_string();
        let text_of = |name: &str| -> Result<String, RuleMLError> {
            match el.child(name) {
                None => Ok(String::new()),
                Some(c) => match c.children.as_slice() {
                    [one] if one.name == "Ind" || one.name == "Data" => Ok(one.leaf_text()),
                    _ => Err(import_err(format!("<{name}> must hold one <Ind>"))),
                },
            }
        };
        let xid = match el.child("oid") {
            Some(o) => self.term(self.single_child(o)?)?,
            None => return Err(import_err("message without <oid>")),
        };
        let content = el.child("content").ok_or_else(|| import_err("message without <content>"))?;
        let (first, rest) = content.children.split_first().ok_or_else(|| import_err("empty <content>"))?;
        let payload = self.formula(first)?;
        let context = rest.iter().map(|c| self.term(c)).collect::<Result<Vec<_>, _>>()?;
        Ok(XmlMessage {
            mode,
            message: Message {
                xid,
                protocol: text_of("protocol")?,
                sender: text_of("sender")?,
                receiver: text_of("receiver")?,
                performative,
                payload,
                context,
            },
        })
    }

    fn interface(&mut self, el: &Element) -> Option<InterfaceDecl> {
        let [rel, expr, desc] = el.children.as_slice() else { return None };
        if rel.name != "Rel" || rel.leaf_text() != "interface" || expr.name != "Expr" || desc.name != "Ind" {
            return None;
        }
        if !el.attrs.is_empty() || !rel.attrs.is_empty() || !desc.attrs.is_empty() {
            return None;
        }
        let (fun, vars) = expr.children.split_first()?;
        if fun.name != "Fun" || vars.is_empty() {
            return None;
        }
        let args = vars
            .iter()
            .map(|v| {
                if v.name != "Var" || v.attrs.iter().any(|(k, _)| k != "type" && k != "mode") {
                    return None;
                }
                let mode = match v.attr("mode") {
                    Some(m) => ArgMode::parse(m)?,
                    None => ArgMode::Any,
                };
                Some(InterfaceArg { name: v.leaf_text().trim().to_string(), type_tag: v.attr("type").map(String::from), mode })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(InterfaceDecl { functor: fun.leaf_text(), args, description: desc.leaf_text() })
    }

    fn meta(&mut self, el: &Element, default: Execution) -> Result<RuleMeta, RuleMLError> {
        let execution = match el.attr("execution") {
            None => default,
            Some(s) => Execution::parse(s).ok_or_else(|| import_err(format!("execution style {s}")))?,
        };
        let eval = match el.attr("eval") {
            None => None,
            Some("weak") => Some(Eval::Weak),
            Some("strong") => Some(Eval::Strong),
            Some(s) => return Err(import_err(format!("eval {s}"))),
        };
        let label = match el.child("label") {
            Some(l) => Some(self.formula(self.single_child(l)?)?),
            None => None,
        };
        Ok(RuleMeta { execution, eval, label })
    }

    fn rule(&mut self, el: &Element) -> Result<Item, RuleMLError> {
        let mut present: Vec<&str> = Vec::new();
        for c in &el.children {
            if !RULE_PARTS.contains(&c.name.as_str()) {
                return Err(import_err(format!("unsupported element <{}> in <Rule>", c.name)));
            }
            if present.contains(&c.name.as_str()) {
                return Err(import_err(format!("duplicate <{}> in <Rule>", c.name)));
            }
            present.push(c.name.as_str());
        }
        let kind = specialize(&present).map_err(import_err)?;
        match kind {
            RuleKind::Derivation => {
                let meta = self.meta(el, Execution::Reasoning)?;
                let then = el.child("then").expect("derivation has then");
                let head = self.formula(self.single_child(then)?)?;
                if !head.is_callable() || matches!(head, Term::Cons(_)) {
                    return Err(import_err(format!("rule head {head} is not callable")));
                }
                let body = match el.child("if") {
                    None => Vec::new(),
                    Some(cond) => {
                        let goal = self.single_child(cond)?;
                        let goals = if goal.name == "And" {
                            goal.children.iter().map(|c| self.formula(c)).collect::<Result<Vec<_>, _>>()?
                        } else {
                            vec![self.formula(goal)?]
                        };
                        goals.into_iter().map(Literal::from_goal).collect()
                    }
                };
                Ok(Item::Clause(Clause::new(head, body), meta))
            }
            RuleKind::Eca => {
                let meta = self.meta(el, Execution::Active)?;
                let source_oid = match el.child("oid") {
                    Some(o) => self.term(self.single_child(o)?)?,
                    None => Term::atom("ruleml"),
                };
                let rule = EcaRule {
                    time: self.part(el.child("qualification"))?,
                    event: self.part(el.child("on"))?,
                    condition: self.part(el.child("if"))?,
                    action: self.part(el.child("do"))?,
                    post: self.part(el.child("after"))?,
                    else_action: self.part(el.child("elseDo"))?,
                    source_oid,
                };
                Ok(Item::Eca(rule, meta))
            }
        }
    }

    fn item(&mut self, el: &Element) -> Result<Item, RuleMLError> {
        match el.name.as_str() {
            "Rule" => self.rule(el),
            "Message" => Ok(Item::Message(self.message(el)?)),
            "Atom" => {
                if let Some(d) = self.interface(el) {
                    return Ok(Item::Interface(d));
                }
                let head = self.formula(el)?;
                Ok(Item::Clause(Clause::fact(head), RuleMeta::reasoning()))
            }
            name if is_event_element(name) => Ok(Item::Event(self.formula(el)?)),
            name => Err(import_err(format!("unsupported top-level element <{name}>"))),
        }
    }
}

/// The internal reading of a `<Rule>`, chosen by which parts are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// `if-then` or `then`: a clause.
    Derivation,
    /// Any rule with `do` and no `then`: trigger (on-do), production (if-do),
    /// ECA (on-if-do) and ECAP (on-if-do-after) rules, with `qualification`
    /// as the time part and `elseDo` as the else action.
    Eca,
}

/// Map the set of present parts (`oid` and `label` are ignored) to a rule
/// kind, or explain why there is no executable reading.
pub fn specialize(parts: &[&str]) -> Result<RuleKind, String> {
    let has = |p: &str| parts.contains(&p);
    let listed = || parts.iter().filter(|p| !matches!(**p, "oid" | "label")).copied().collect::<Vec<_>>().join("-");
    if has("then") {
        let active = ["qualification", "on", "do", "after", "else", "elseDo", "elseAfter"];
        if let Some(p) = active.iter().find(|p| has(p)) {
            return Err(format!("rule {} mixes a conclusion with <{p}>; only if-then derivation rules are supported", listed()));
        }
        return Ok(RuleKind::Derivation);
    }
    if has("do") {
        if has("else") || has("elseAfter") {
            return Err(format!("rule {} uses else/elseAfter, which only apply to conclusions", listed()));
        }
        return Ok(RuleKind::Eca);
    }
    Err(format!("rule {} has neither <then> nor <do>", if parts.is_empty() { "<empty>".into() } else { listed() }))
}

/// Classify a clause of execution syntax as a document item.
pub fn item_from_clause(c: &Clause, oid: &Term) -> Item {
    if c.is_fact() {
        if let Some(d) = InterfaceDecl::from_term(&c.head) {
            return Item::Interface(d);
        }
        if let Ok(r) = EcaRule::from_term(&c.head, oid.clone()) {
            return Item::Eca(r, RuleMeta::active());
        }
        if let Some(x) = message_from_term(&c.head) {
            return Item::Message(x);
        }
    }
    Item::Clause(c.clone(), RuleMeta::reasoning())
}

/// `message(Mode, Performative, XID, Protocol, Sender, Receiver, Payload[, Context])`.
fn message_from_term(t: &Term) -> Option<XmlMessage> {
    let (name, arity) = t.functor()?;
    if name != "message" || !(arity == 7 || arity == 8) {
        return None;
    }
    let a = t.args();
    let mode = match a[0].as_atom()? {
        "inbound" => Mode::Inbound,
        "outbound" => Mode::Outbound,
        _ => return None,
    };
    let context = if arity == 8 { a[7].as_list()? } else { Vec::new() };
    Some(XmlMessage {
        mode,
        message: Message {
            xid: a[2].clone(),
            protocol: a[3].as_text()?.to_string(),
            sender: a[4].as_text()?.to_string(),
            receiver: a[5].as_text()?.to_string(),
            performative: a[1].as_text()?.to_string(),
            payload: a[6].clone(),
            context,
        },
    })
}

fn message_to_term(x: &XmlMessage) -> Term {
    let m = &x.message;
    let mut args = vec![
        Term::atom(x.mode.as_str()),
        Term::atom(m.performative.as_str()),
        m.xid.clone(),
        Term::atom(m.protocol.as_str()),
        Term::atom(m.sender.as_str()),
        Term::atom(m.receiver.as_str()),
        m.payload.clone(),
    ];
    if !m.context.is_empty() {
        args.push(Term::list(m.context.iter().cloned()));
    }
    Term::compound("message", args)
}

/// Translate `.rr` program text to a RuleML document.
pub fn rr_to_ruleml(text: &str) -> Result<String, RuleMLError> {
    let oid = Term::atom("translate");
    let src = parse_program(text, oid.clone())?;
    if let Some(d) = src.directives.first() {
        return Err(RuleMLError::Unserializable(format!("directive {d}")));
    }
    let items: Vec<Item> = src.clauses.iter().map(|c| item_from_clause(c, &oid)).collect();
    export(&items)
}

/// Translate a RuleML document to `.rr` program text.
pub fn ruleml_to_rr(text: &str) -> Result<String, RuleMLError> {
    let mut out = String::new();
    for item in import(text)? {
        let clause = match item {
            Item::Clause(c, _) => c,
            Item::Eca(r, _) => Clause::fact(r.to_term()),
            Item::Message(x) => Clause::fact(message_to_term(&x)),
            Item::Interface(d) => Clause::fact(d.to_term()),
            Item::Event(e) => {
                return Err(RuleMLError::Unserializable(format!("standalone event expression {e} has no rule form")))
            }
        };
        out.push_str(&crate::parser::format_clause(&clause));
        out.push('\n');
    }
    Ok(out)
}
