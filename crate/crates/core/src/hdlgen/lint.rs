//! Structural consistency checks over generated VHDL.
//!
//! The checker builds a symbol table of entity declarations (generics and
//! ports) and, per architecture, of generics, constants, signals and array
//! types. Every `entity work.x` instantiation is then matched against the
//! declaration of `x`: each formal must exist, every port must be associated
//! exactly once, and the widths of formal and actual must agree after
//! evaluating the generic expressions. It understands the subset of VHDL
//! this crate emits, not the language at large.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::network::NetworkSpec;

use super::{mem_file_names, HdlBundle};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LintReport {
    pub entities: usize,
    pub architectures: usize,
    pub instances: usize,
    /// Port associations whose widths were compared.
    pub checked_ports: usize,
    pub issues: Vec<String>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Runs the structural checks and fails with the collected issues.
pub fn check(bundle: &HdlBundle) -> Result<LintReport> {
    let report = lint(bundle);
    if report.is_clean() {
        Ok(report)
    } else {
        Err(Error::Generation(report.issues.join("; ")))
    }
}

/// Verifies that every synapse memory file has one line per memory row and
/// one character per memory bit.
pub fn check_memory_geometry(bundle: &HdlBundle, spec: &NetworkSpec) -> Result<()> {
    for (k, layer) in spec.layers.iter().enumerate() {
        let (ff, fb) = mem_file_names(bundle.name(), k + 1);
        let mut expected = vec![(
            ff,
            layer.n_inputs,
            layer.n_neurons * layer.w_ff.format().bits() as usize,
        )];
        if let Some(w) = &layer.w_fb {
            expected.push((fb, layer.n_neurons, layer.n_neurons * w.format().bits() as usize));
        }
        for (file, depth, width) in expected {
            let text = bundle
                .get(&file)
                .ok_or_else(|| Error::Generation(format!("missing memory file {file}")))?;
            let lines: Vec<&str> = text.lines().collect();
            if lines.len() != depth {
                return Err(Error::Generation(format!(
                    "{file}: {} lines, expected {depth}",
                    lines.len()
                )));
            }
            if let Some((i, _)) = lines
                .iter()
                .enumerate()
                .find(|(_, l)| l.len() != width || !l.bytes().all(|b| b == b'0' || b == b'1'))
            {
                return Err(Error::Generation(format!(
                    "{file}: line {} is not a {width}-bit word",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

pub fn lint(bundle: &HdlBundle) -> LintReport {
    let mut report = LintReport::default();
    let mut units = Vec::new();
    for (file, text) in bundle.files() {
        if !file.ends_with(".vhd") {
            continue;
        }
        match Parser::new(file, text).units() {
            Ok(mut u) => units.append(&mut u),
            Err(e) => report.issues.push(format!("{file}: {e}")),
        }
    }

    let mut entities: BTreeMap<String, &Entity> = BTreeMap::new();
    for unit in &units {
        if let Unit::Entity(e) = unit {
            if entities.insert(e.name.clone(), e).is_some() {
                report
                    .issues
                    .push(format!("{}: entity {} declared twice", e.file, e.name));
            }
        }
    }
    report.entities = entities.len();

    let mut implemented = Vec::new();
    for unit in &units {
        let Unit::Architecture(arch) = unit else { continue };
        report.architectures += 1;
        let Some(entity) = entities.get(&arch.entity) else {
            report.issues.push(format!(
                "{}: architecture of undeclared entity {}",
                arch.file, arch.entity
            ));
            continue;
        };
        implemented.push(arch.entity.clone());
        check_architecture(entity, arch, &entities, bundle, &mut report);
    }
    for name in entities.keys() {
        if !implemented.contains(name) {
            report.issues.push(format!("entity {name} has no architecture"));
        }
    }
    report
}

fn check_architecture(
    entity: &Entity,
    arch: &Architecture,
    entities: &BTreeMap<String, &Entity>,
    bundle: &HdlBundle,
    report: &mut LintReport,
) {
    let here = format!("{} ({})", arch.file, arch.entity);
    let mut scope = Scope::default();
    for g in &entity.generics {
        scope.bind_default(g);
        if let Some(Tok::Str(path)) = g.default.first() {
            if path.ends_with(".mem") && bundle.get(path).is_none() {
                report
                    .issues
                    .push(format!("{here}: generic {} names missing file {path}", g.name));
            }
        }
    }
    for p in &entity.ports {
        scope.objects.insert(p.name.clone(), p.ty.clone());
    }
    for d in &arch.decls {
        match d {
            Decl::Object { names, ty, value } => {
                for n in names {
                    scope.objects.insert(n.clone(), ty.clone());
                    if let Some(v) = value.as_ref().and_then(|v| eval(v, &scope.values).ok()) {
                        scope.values.insert(n.clone(), v);
                    }
                }
            }
            Decl::Array { name, element } => {
                scope.arrays.insert(name.clone(), element.clone());
            }
        }
    }

    for inst in &arch.instances {
        report.instances += 1;
        let at = format!("{here}: instance {}", inst.label);
        let Some(target) = entities.get(&inst.entity) else {
            report.issues.push(format!("{at} of undeclared entity {}", inst.entity));
            continue;
        };
        let mut local = scope.clone();
        for (var, lo) in &inst.loop_vars {
            match eval(lo, &local.values) {
                Ok(v) => {
                    local.values.insert(var.clone(), v);
                }
                Err(e) => report.issues.push(format!("{at}: generate bound: {e}")),
            }
        }

        // generic environment of the instantiated entity
        let mut env: HashMap<String, i64> = HashMap::new();
        for g in &target.generics {
            if let Ok(v) = eval(&g.default, &env) {
                env.insert(g.name.clone(), v);
            }
        }
        for (formal, actual) in &inst.generic_map {
            if !target.generics.iter().any(|g| &g.name == formal) {
                report
                    .issues
                    .push(format!("{at}: {} has no generic {formal}", target.name));
                continue;
            }
            match eval(actual, &local.values) {
                Ok(v) => {
                    env.insert(formal.clone(), v);
                }
                Err(_) => {
                    env.remove(formal);
                }
            }
        }

        let mut seen = Vec::new();
        for (formal, actual) in &inst.port_map {
            let Some(port) = target.ports.iter().find(|p| &p.name == formal) else {
                report
                    .issues
                    .push(format!("{at}: {} has no port {formal}", target.name));
                continue;
            };
            if seen.contains(formal) {
                report.issues.push(format!("{at}: port {formal} associated twice"));
            }
            seen.push(formal.clone());
            let formal_width = type_width(&port.ty, &env);
            let actual_width = match local.actual_width(actual) {
                Ok(w) => w,
                Err(e) => {
                    report.issues.push(format!("{at}: port {formal}: {e}"));
                    continue;
                }
            };
            match (formal_width, actual_width) {
                (Some(f), Some(a)) => {
                    report.checked_ports += 1;
                    if f != a {
                        report
                            .issues
                            .push(format!("{at}: port {formal} is {f} bits wide but its actual is {a}"));
                    }
                }
                (f, a) => report.issues.push(format!(
                    "{at}: port {formal}: width not resolved (formal {f:?}, actual {a:?})"
                )),
            }
        }
        for p in &target.ports {
            if !seen.contains(&p.name) {
                report.issues.push(format!("{at}: port {} left unassociated", p.name));
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scope {
    values: HashMap<String, i64>,
    objects: HashMap<String, Vec<Tok>>,
    arrays: HashMap<String, Vec<Tok>>,
}

impl Scope {
    fn bind_default(&mut self, g: &Generic) {
        if let Ok(v) = eval(&g.default, &self.values) {
            self.values.insert(g.name.clone(), v);
        }
    }

    fn actual_width(&self, actual: &[Tok]) -> std::result::Result<Option<i64>, String> {
        match actual {
            [Tok::Char(_)] => Ok(Some(1)),
            [Tok::Ident(name)] => {
                let ty = self.objects.get(name).ok_or_else(|| format!("undeclared `{name}`"))?;
                Ok(type_width(ty, &self.values))
            }
            [Tok::Ident(name), Tok::Sym("("), inner @ .., Tok::Sym(")")] => {
                let ty = self.objects.get(name).ok_or_else(|| format!("undeclared `{name}`"))?;
                if let Some(pos) = inner.iter().position(|t| *t == Tok::Ident("downto".into())) {
                    let hi = eval(&inner[..pos], &self.values)?;
                    let lo = eval(&inner[pos + 1..], &self.values)?;
                    return Ok(Some(hi - lo + 1));
                }
                match ty.as_slice() {
                    [Tok::Ident(t)] if self.arrays.contains_key(t) => Ok(type_width(&self.arrays[t], &self.values)),
                    _ => Ok(Some(1)),
                }
            }
            _ => Ok(None),
        }
    }
}

fn type_width(ty: &[Tok], env: &HashMap<String, i64>) -> Option<i64> {
    match ty {
        [Tok::Ident(t)] if t == "std_logic" || t == "bit" => Some(1),
        [Tok::Ident(t), Tok::Sym("("), inner @ .., Tok::Sym(")")]
            if matches!(t.as_str(), "std_logic_vector" | "signed" | "unsigned" | "bit_vector") =>
        {
            let pos = inner.iter().position(|t| *t == Tok::Ident("downto".into()))?;
            let hi = eval(&inner[..pos], env).ok()?;
            let lo = eval(&inner[pos + 1..], env).ok()?;
            Some(hi - lo + 1)
        }
        _ => None,
    }
}

// ------------------------------------------------------------------ tokens

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(i64),
    Str(String),
    Char(char),
    Sym(&'static str),
}

const SYMBOLS: [&str; 18] = [
    "=>", ":=", "<=", ">=", "/=", "**", "(", ")", ";", ",", ":", ".", "+", "-", "*", "/", "'", "&",
];
const SINGLE: [&str; 4] = ["=", "<", ">", "|"];

fn tokenize(text: &str) -> std::result::Result<Vec<Tok>, String> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if text[i..].starts_with("--") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(text[start..i].to_ascii_lowercase()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i]
                .parse()
                .map_err(|_| format!("bad number {}", &text[start..i]))?;
            out.push(Tok::Num(n));
        } else if c == b'"' {
            let end = text[i + 1..].find('"').ok_or("unterminated string")? + i + 1;
            out.push(Tok::Str(text[i + 1..end].to_string()));
            i = end + 1;
        } else if c == b'\''
            && !matches!(out.last(), Some(Tok::Ident(_)) | Some(Tok::Sym(")")))
            && b.get(i + 2) == Some(&b'\'')
        {
            out.push(Tok::Char(b[i + 1] as char));
            i += 3;
        } else if let Some(s) = SYMBOLS.iter().chain(SINGLE.iter()).find(|s| text[i..].starts_with(**s)) {
            out.push(Tok::Sym(s));
            i += s.len();
        } else {
            return Err(format!("unexpected character `{}`", c as char));
        }
    }
    Ok(out)
}

// ------------------------------------------------------------- expressions

fn eval(toks: &[Tok], env: &HashMap<String, i64>) -> std::result::Result<i64, String> {
    let mut p = Expr { toks, pos: 0, env };
    let v = p.sum()?;
    if p.pos != toks.len() {
        return Err(format!("trailing tokens in expression {toks:?}"));
    }
    Ok(v)
}

struct Expr<'a> {
    toks: &'a [Tok],
    pos: usize,
    env: &'a HashMap<String, i64>,
}

impl Expr<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> std::result::Result<i64, String> {
        let mut v = self.product()?;
        loop {
            if self.eat("+") {
                v += self.product()?;
            } else if self.eat("-") {
                v -= self.product()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn product(&mut self) -> std::result::Result<i64, String> {
        let mut v = self.power()?;
        loop {
            if self.eat("*") {
                v *= self.power()?;
            } else if self.eat("/") {
                let d = self.power()?;
                if d == 0 {
                    return Err("division by zero".into());
                }
                v /= d;
            } else {
                return Ok(v);
            }
        }
    }

    fn power(&mut self) -> std::result::Result<i64, String> {
        let base = self.unary()?;
        if self.eat("**") {
            let e = self.unary()?;
            return u32::try_from(e)
                .ok()
                .and_then(|e| base.checked_pow(e))
                .ok_or_else(|| format!("{base} ** {e} out of range"));
        }
        Ok(base)
    }

    fn unary(&mut self) -> std::result::Result<i64, String> {
        if self.eat("-") {
            return Ok(-self.unary()?);
        }
        if self.eat("(") {
            let v = self.sum()?;
            if !self.eat(")") {
                return Err("missing `)`".into());
            }
            return Ok(v);
        }
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(n)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => Ok(1),
                    "false" => Ok(0),
                    _ => self
                        .env
                        .get(&name)
                        .copied()
                        .ok_or_else(|| format!("unknown name `{name}`")),
                }
            }
            other => Err(format!("unexpected {other:?} in expression")),
        }
    }
}

// ------------------------------------------------------------------ parser

#[derive(Debug, Clone)]
struct Generic {
    name: String,
    default: Vec<Tok>,
}

#[derive(Debug, Clone)]
struct Port {
    name: String,
    ty: Vec<Tok>,
}

#[derive(Debug, Clone)]
struct Entity {
    file: String,
    name: String,
    generics: Vec<Generic>,
    ports: Vec<Port>,
}

#[derive(Debug, Clone)]
enum Decl {
    Object {
        names: Vec<String>,
        ty: Vec<Tok>,
        value: Option<Vec<Tok>>,
    },
    Array {
        name: String,
        element: Vec<Tok>,
    },
}

#[derive(Debug, Clone)]
struct Instance {
    label: String,
    entity: String,
    loop_vars: Vec<(String, Vec<Tok>)>,
    generic_map: Vec<(String, Vec<Tok>)>,
    port_map: Vec<(String, Vec<Tok>)>,
}

#[derive(Debug, Clone)]
struct Architecture {
    file: String,
    entity: String,
    decls: Vec<Decl>,
    instances: Vec<Instance>,
}

#[derive(Debug, Clone)]
enum Unit {
    Entity(Entity),
    Architecture(Architecture),
}

struct Parser<'a> {
    file: &'a str,
    text: &'a str,
}

fn ident(t: &Tok, word: &str) -> bool {
    matches!(t, Tok::Ident(s) if s == word)
}

fn sym(t: &Tok, s: &str) -> bool {
    matches!(t, Tok::Sym(x) if *x == s)
}

/// Index of the `)` matching the `(` at `open`.
fn matching(toks: &[Tok], open: usize) -> std::result::Result<usize, String> {
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if sym(t, "(") {
            depth += 1;
        } else if sym(t, ")") {
            depth -= 1;
            if depth == 0 {
                return Ok(i);
            }
        }
    }
    Err("unbalanced parentheses".into())
}

/// Splits at `sep` outside nested parentheses.
fn split_top<'t>(toks: &'t [Tok], sep: &str) -> Vec<&'t [Tok]> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if sym(t, "(") {
            depth += 1;
        } else if sym(t, ")") {
            depth -= 1;
        } else if depth == 0 && sym(t, sep) {
            parts.push(&toks[start..i]);
            start = i + 1;
        }
    }
    if start < toks.len() {
        parts.push(&toks[start..]);
    }
    parts
}

fn name_of(t: &Tok) -> std::result::Result<String, String> {
    match t {
        Tok::Ident(s) => Ok(s.clone()),
        other => Err(format!("expected a name, found {other:?}")),
    }
}

/// Name, type tokens and default tokens of one interface item.
type InterfaceItem = (String, Vec<Tok>, Vec<Tok>);

/// `a, b : [mode] type [:= default]` items of a generic or port clause.
fn interface_items(toks: &[Tok]) -> std::result::Result<Vec<InterfaceItem>, String> {
    let mut out = Vec::new();
    for item in split_top(toks, ";") {
        let colon = item
            .iter()
            .position(|t| sym(t, ":"))
            .ok_or("interface item without `:`")?;
        let mut rest = &item[colon + 1..];
        if let Some(t) = rest.first() {
            if ident(t, "in") || ident(t, "out") || ident(t, "inout") {
                rest = &rest[1..];
            }
        }
        let (ty, default) = match rest.iter().position(|t| sym(t, ":=")) {
            Some(p) => (rest[..p].to_vec(), rest[p + 1..].to_vec()),
            None => (rest.to_vec(), Vec::new()),
        };
        for n in split_top(&item[..colon], ",") {
            out.push((name_of(n.first().ok_or("empty name")?)?, ty.clone(), default.clone()));
        }
    }
    Ok(out)
}

fn associations(toks: &[Tok]) -> std::result::Result<Vec<(String, Vec<Tok>)>, String> {
    split_top(toks, ",")
        .into_iter()
        .map(|a| {
            let arrow = a.iter().position(|t| sym(t, "=>")).ok_or("positional association")?;
            if arrow != 1 {
                return Err("formal must be a plain name".to_string());
            }
            Ok((name_of(&a[0])?, a[arrow + 1..].to_vec()))
        })
        .collect()
}

impl<'a> Parser<'a> {
    fn new(file: &'a str, text: &'a str) -> Self {
        Self { file, text }
    }

    fn units(&self) -> std::result::Result<Vec<Unit>, String> {
        let toks = tokenize(self.text)?;
        let mut units = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            if ident(&toks[i], "entity") && toks.get(i + 2).is_some_and(|t| ident(t, "is")) {
                let (e, next) = self.entity(&toks, i)?;
                units.push(Unit::Entity(e));
                i = next;
            } else if ident(&toks[i], "architecture") {
                let (a, next) = self.architecture(&toks, i)?;
                units.push(Unit::Architecture(a));
                i = next;
            } else {
                i += 1;
            }
        }
        Ok(units)
    }

    fn entity(&self, toks: &[Tok], at: usize) -> std::result::Result<(Entity, usize), String> {
        let name = name_of(&toks[at + 1])?;
        let mut e = Entity {
            file: self.file.to_string(),
            name,
            generics: Vec::new(),
            ports: Vec::new(),
        };
        let mut i = at + 3;
        loop {
            let t = toks.get(i).ok_or("unterminated entity")?;
            if ident(t, "end") {
                let semi = toks[i..].iter().position(|t| sym(t, ";")).ok_or("missing `;`")?;
                return Ok((e, i + semi + 1));
            }
            if (ident(t, "generic") || ident(t, "port")) && toks.get(i + 1).is_some_and(|t| sym(t, "(")) {
                let close = matching(toks, i + 1)?;
                let items = interface_items(&toks[i + 2..close])?;
                if ident(t, "generic") {
                    e.generics = items
                        .into_iter()
                        .map(|(name, _, default)| Generic { name, default })
                        .collect();
                } else {
                    e.ports = items.into_iter().map(|(name, ty, _)| Port { name, ty }).collect();
                }
                i = close + 1;
            } else {
                i += 1;
            }
        }
    }

    fn architecture(&self, toks: &[Tok], at: usize) -> std::result::Result<(Architecture, usize), String> {
        if !toks.get(at + 2).is_some_and(|t| ident(t, "of")) {
            return Err("malformed architecture header".into());
        }
        let entity = name_of(toks.get(at + 3).ok_or("truncated architecture")?)?;
        let mut arch = Architecture {
            file: self.file.to_string(),
            entity,
            decls: Vec::new(),
            instances: Vec::new(),
        };
        // declarative part
        let mut i = at + 5;
        loop {
            let t = toks.get(i).ok_or("architecture without `begin`")?;
            if ident(t, "begin") {
                i += 1;
                break;
            }
            if ident(t, "function") || ident(t, "impure") {
                // skip to `end function ;`
                while !(ident(&toks[i], "end") && toks.get(i + 1).is_some_and(|t| ident(t, "function"))) {
                    i += 1;
                    if i + 1 >= toks.len() {
                        return Err("unterminated function".into());
                    }
                }
                i += 3;
                continue;
            }
            let semi = toks[i..].iter().position(|t| sym(t, ";")).ok_or("missing `;`")? + i;
            let stmt = &toks[i..semi];
            if ident(t, "signal") || ident(t, "constant") {
                let items = interface_items(&stmt[1..])?;
                for (name, ty, value) in items {
                    arch.decls.push(Decl::Object {
                        names: vec![name],
                        ty,
                        value: (!value.is_empty()).then_some(value),
                    });
                }
            } else if ident(t, "type") && stmt.len() > 4 && ident(&stmt[3], "array") {
                let of = stmt
                    .iter()
                    .rposition(|t| ident(t, "of"))
                    .ok_or("array type without `of`")?;
                arch.decls.push(Decl::Array {
                    name: name_of(&stmt[1])?,
                    element: stmt[of + 1..].to_vec(),
                });
            }
            i = semi + 1;
        }
        // statement part
        let mut loop_vars: Vec<(String, Vec<Tok>)> = Vec::new();
        let mut generate_depth: Vec<usize> = Vec::new();
        let mut depth = 0usize;
        while i < toks.len() {
            let t = &toks[i];
            if ident(t, "end") {
                let next = toks.get(i + 1);
                if next.is_some_and(|n| ident(n, "architecture")) {
                    let semi = toks[i..].iter().position(|t| sym(t, ";")).ok_or("missing `;`")?;
                    return Ok((arch, i + semi + 1));
                }
                if next.is_some_and(|n| ident(n, "generate")) {
                    if generate_depth.pop().is_some() {
                        loop_vars.pop();
                    }
                    i += 2;
                    continue;
                }
            }
            if ident(t, "for") {
                let to = toks[i..].iter().position(|t| ident(t, "to")).map(|p| p + i);
                let stop = toks[i..]
                    .iter()
                    .position(|t| ident(t, "generate") || ident(t, "loop"))
                    .map(|p| p + i);
                if let (Some(to), Some(stop)) = (to, stop) {
                    if to < stop && ident(&toks[stop], "generate") && ident(&toks[i + 2], "in") {
                        loop_vars.push((name_of(&toks[i + 1])?, toks[i + 3..to].to_vec()));
                        depth += 1;
                        generate_depth.push(depth);
                    }
                    i = stop + 1;
                    continue;
                }
            }
            if sym(t, ":")
                && toks.get(i + 1).is_some_and(|t| ident(t, "entity"))
                && toks.get(i + 2).is_some_and(|t| ident(t, "work"))
                && toks.get(i + 3).is_some_and(|t| sym(t, "."))
            {
                let label = name_of(&toks[i - 1])?;
                let entity = name_of(toks.get(i + 4).ok_or("truncated instance")?)?;
                let mut inst = Instance {
                    label,
                    entity,
                    loop_vars: loop_vars.clone(),
                    generic_map: Vec::new(),
                    port_map: Vec::new(),
                };
                let mut j = i + 5;
                while j < toks.len() && !sym(&toks[j], ";") {
                    if (ident(&toks[j], "generic") || ident(&toks[j], "port"))
                        && toks.get(j + 1).is_some_and(|t| ident(t, "map"))
                        && toks.get(j + 2).is_some_and(|t| sym(t, "("))
                    {
                        let close = matching(toks, j + 2)?;
                        let assoc = associations(&toks[j + 3..close])?;
                        if ident(&toks[j], "generic") {
                            inst.generic_map = assoc;
                        } else {
                            inst.port_map = assoc;
                        }
                        j = close + 1;
                    } else {
                        return Err(format!("unexpected {:?} in instance {}", toks[j], inst.label));
                    }
                }
                arch.instances.push(inst);
                i = j + 1;
                continue;
            }
            i += 1;
        }
        Err(format!("architecture of {} is not terminated", arch.entity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, i64)]) -> HashMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn expressions() {
        let e = env(&[("n", 10), ("w", 4), ("j", 2)]);
        let v = |s: &str| eval(&tokenize(s).unwrap(), &e);
        assert_eq!(v("(n - j) * w - 1"), Ok(31));
        assert_eq!(v("(n - 1 - j) * w"), Ok(28));
        assert_eq!(v("-3"), Ok(-3));
        assert_eq!(v("2 ** (w - 1) - 1"), Ok(7));
        assert_eq!(v("n / 3"), Ok(3));
        assert!(v("q + 1").is_err());
        assert!(v("1 +").is_err());
    }

    #[test]
    fn tokenizer_distinguishes_ticks() {
        let t = tokenize("x <= '1'; y := a'length; -- note\n z(3)'range").unwrap();
        assert!(t.contains(&Tok::Char('1')));
        assert_eq!(t.iter().filter(|t| **t == Tok::Sym("'")).count(), 2);
        assert!(!t.contains(&Tok::Ident("note".into())));
    }

    const GOOD: &str = "
library ieee;
use ieee.std_logic_1164.all;
entity leaf is
  generic (W : positive := 2);
  port (a : in std_logic_vector(W - 1 downto 0); y : out std_logic);
end entity;
architecture rtl of leaf is
begin
  y <= a(0);
end architecture;
entity root is
end entity;
architecture rtl of root is
  constant N : positive := 3;
  signal bus_a : std_logic_vector(N * 4 - 1 downto 0);
  signal ys : std_logic_vector(N - 1 downto 0);
begin
  g : for j in 0 to N - 1 generate
    u : entity work.leaf
      generic map (W => 4)
      port map (a => bus_a((j + 1) * 4 - 1 downto j * 4), y => ys(j));
  end generate;
end architecture;
";

    fn bundle(text: &str) -> HdlBundle {
        HdlBundle {
            name: "t".into(),
            files: [("t.vhd".to_string(), text.to_string())].into_iter().collect(),
        }
    }

    #[test]
    fn accepts_consistent_design() {
        let r = lint(&bundle(GOOD));
        assert!(r.is_clean(), "{:?}", r.issues);
        assert_eq!(
            (r.entities, r.architectures, r.instances, r.checked_ports),
            (2, 2, 1, 2)
        );
    }

    #[test]
    fn reports_width_mismatch() {
        let r = lint(&bundle(&GOOD.replace("generic map (W => 4)", "generic map (W => 5)")));
        assert_eq!(r.issues.len(), 1, "{:?}", r.issues);
        assert!(r.issues[0].contains("port a is 5 bits wide but its actual is 4"));
    }

    #[test]
    fn reports_unknown_names() {
        let r = lint(&bundle(&GOOD.replace("y => ys(j)", "z => ys(j)")));
        assert!(r.issues.iter().any(|i| i.contains("has no port z")));
        assert!(r.issues.iter().any(|i| i.contains("port y left unassociated")));
        let r = lint(&bundle(&GOOD.replace("entity work.leaf", "entity work.leaf2")));
        assert!(r.issues.iter().any(|i| i.contains("undeclared entity leaf2")));
        let r = lint(&bundle(&GOOD.replace("y => ys(j)", "y => zs(j)")));
        assert!(r.issues.iter().any(|i| i.contains("undeclared `zs`")));
        let r = lint(&bundle(&GOOD.replace("(W => 4)", "(V => 4)")));
        assert!(r.issues.iter().any(|i| i.contains("has no generic v")));
    }
}
