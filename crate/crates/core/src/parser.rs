//! The line-oriented `.crn` network format.
//!
//! ```text
//! # comment
//! species: X1, X2, X3, X4          (optional; switches to strict mode)
//! R1: X1 + 2 X2 <=> X3 ; kf=1, kr=1
//! X2 + X3 <=> 2 X4 ; kf=1, kr=1
//! init X1 = 1.0
//! ```
//!
//! Coefficients are nonnegative integers (omitted means 1). Without a
//! `species:` block, species are ordered by first appearance.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{ModelError, Reaction, ReactionNetwork};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    NegativeCoefficient,
    FractionalCoefficient,
    UnknownSpecies(String),
    DuplicateSpecies(String),
    DuplicateReactionId(String),
    DuplicateInit(String),
    /// `init` lines exist but do not cover this species.
    IncompleteInit(String),
    InvalidReaction(String),
    MissingRate(String),
    InvalidNumber(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::NegativeCoefficient => {
                write!(f, "negative stoichiometric coefficient")
            }
            ParseErrorKind::FractionalCoefficient => write!(
                f,
                "fractional stoichiometric coefficient; coefficients must be nonnegative integers"
            ),
            ParseErrorKind::UnknownSpecies(s) => write!(f, "unknown species `{s}`"),
            ParseErrorKind::DuplicateSpecies(s) => write!(f, "species `{s}` declared twice"),
            ParseErrorKind::DuplicateReactionId(s) => write!(f, "duplicate reaction id `{s}`"),
            ParseErrorKind::DuplicateInit(s) => write!(f, "initial value for `{s}` given twice"),
            ParseErrorKind::IncompleteInit(s) => write!(f, "no initial value for species `{s}`"),
            ParseErrorKind::InvalidReaction(msg) => write!(f, "invalid reaction: {msg}"),
            ParseErrorKind::MissingRate(id) => {
                write!(f, "reaction `{id}` has no rate constants and no default was given")
            }
            ParseErrorKind::InvalidNumber(tok) => write!(f, "invalid number `{tok}`"),
        }
    }
}

/// An error with its 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl Position {
    fn error(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: self.line,
            column: self.column,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: u32,
    pub species: String,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionLine {
    pub id: Option<String>,
    pub reactants: Vec<Term>,
    pub products: Vec<Term>,
    /// `(kf, kr)`
    pub rates: Option<(f64, f64)>,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitLine {
    pub species: String,
    pub value: f64,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkFile {
    /// Explicit declarations, if a `species:` block was present.
    pub declared: Option<Vec<String>>,
    pub reactions: Vec<ReactionLine>,
    pub init: Vec<InitLine>,
    /// Species in order of first appearance.
    pub appearance: Vec<String>,
}

impl NetworkFile {
    /// Species order used for vectors.
    pub fn species(&self) -> &[String] {
        self.declared.as_deref().unwrap_or(&self.appearance)
    }

    /// Builds the network and, when `init` lines are present, `c0`.
    pub fn to_network(
        &self,
        default_rates: Option<(f64, f64)>,
    ) -> Result<(ReactionNetwork, Option<Vec<f64>>), LoadError> {
        let species = self.species();
        let index: BTreeMap<&str, usize> =
            species.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let n = species.len();

        let mut reactions = Vec::with_capacity(self.reactions.len());
        let mut ids = Vec::with_capacity(self.reactions.len());
        for (l, line) in self.reactions.iter().enumerate() {
            let id = line.id.clone().unwrap_or_else(|| format!("R{}", l + 1));
            let (kf, kr) = line
                .rates
                .or(default_rates)
                .ok_or_else(|| line.pos.error(ParseErrorKind::MissingRate(id.clone())))?;
            let mut alpha = vec![0u32; n];
            let mut beta = vec![0u32; n];
            for (side, terms) in [(&mut alpha, &line.reactants), (&mut beta, &line.products)] {
                for t in terms {
                    let i = index[t.species.as_str()];
                    side[i] = side[i].checked_add(t.coefficient).ok_or_else(|| {
                        t.pos.error(ParseErrorKind::InvalidNumber("coefficient overflow".into()))
                    })?;
                }
            }
            if ids.contains(&id) {
                return Err(line.pos.error(ParseErrorKind::DuplicateReactionId(id)).into());
            }
            ids.push(id);
            reactions.push(Reaction::new(alpha, beta, kf, kr));
        }
        let network = ReactionNetwork::with_ids(species.to_vec(), reactions, ids)?;

        let c0 = if self.init.is_empty() {
            None
        } else {
            let mut c0 = vec![None; n];
            for init in &self.init {
                c0[index[init.species.as_str()]] = Some(init.value);
            }
            let last = self.init.last().map(|i| i.pos).unwrap_or(Position { line: 1, column: 1 });
            let values = c0
                .iter()
                .zip(network.species())
                .map(|(v, s)| v.ok_or_else(|| last.error(ParseErrorKind::IncompleteInit(s.clone()))))
                .collect::<Result<Vec<_>, _>>()?;
            Some(values)
        };
        Ok((network, c0))
    }
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    idx: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor {
            chars: text.char_indices().collect(),
            idx: 0,
            line,
            text,
        }
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.idx + 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).map(|&(_, c)| c)
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.idx + k).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.idx += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.idx += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_none()
    }

    fn byte_offset(&self) -> usize {
        self.chars.get(self.idx).map_or(self.text.len(), |&(b, _)| b)
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.text[self.byte_offset()..].starts_with(s) {
            self.idx += s.chars().count();
            true
        } else {
            false
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.pos().error(ParseErrorKind::Syntax(msg.into()))
    }

    fn describe_here(&self) -> String {
        match self.peek() {
            Some(c) => format!("`{c}`"),
            None => "end of line".into(),
        }
    }

    fn expect_char(&mut self, want: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{want}`, found {}", self.describe_here())))
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.idx;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.idx += 1,
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.idx += 1;
        }
        Some(self.chars[start..self.idx].iter().map(|&(_, c)| c).collect())
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        self.skip_ws();
        self.ident()
            .ok_or_else(|| self.syntax(format!("expected {what}, found {}", self.describe_here())))
    }

    fn digits(&mut self) -> String {
        let start = self.idx;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.idx += 1;
        }
        self.chars[start..self.idx].iter().map(|&(_, c)| c).collect()
    }

    /// A decimal floating-point literal.
    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let pos = self.pos();
        let start = self.idx;
        if matches!(self.peek(), Some('+' | '-')) {
            self.idx += 1;
        }
        let int = self.digits();
        let mut frac = String::new();
        if self.peek() == Some('.') {
            self.idx += 1;
            frac = self.digits();
        }
        if int.is_empty() && frac.is_empty() {
            self.idx = start;
            return Err(pos.error(ParseErrorKind::Syntax(format!(
                "expected a number, found {}",
                self.describe_here()
            ))));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.idx;
            self.idx += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.idx += 1;
            }
            if self.digits().is_empty() {
                self.idx = save;
            }
        }
        let tok: String = self.chars[start..self.idx].iter().map(|&(_, c)| c).collect();
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(pos.error(ParseErrorKind::InvalidNumber(tok))),
        }
    }
}

/// Parses `.crn` text.
pub fn parse(text: &str) -> Result<NetworkFile, ParseError> {
    let mut file = NetworkFile::default();
    let mut declared: Vec<(String, Position)> = Vec::new();
    let mut has_species_block = false;
    let mut used: Vec<(String, Position)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut cur = Cursor::new(line, lineno + 1);
        if cur.at_end() {
            continue;
        }
        if line.contains("<=>") {
            let r = parse_reaction(&mut cur)?;
            for t in r.reactants.iter().chain(&r.products) {
                used.push((t.species.clone(), t.pos));
            }
            file.reactions.push(r);
            continue;
        }
        let start = cur.idx;
        let pos = cur.pos();
        match cur.ident().as_deref() {
            Some("species") => {
                cur.expect_char(':')?;
                has_species_block = true;
                loop {
                    if cur.at_end() {
                        break;
                    }
                    let p = cur.pos();
                    let name = cur.expect_ident("species name")?;
                    if declared.iter().any(|(d, _)| *d == name) {
                        return Err(p.error(ParseErrorKind::DuplicateSpecies(name)));
                    }
                    declared.push((name, p));
                    cur.skip_ws();
                    if cur.peek() == Some(',') {
                        cur.bump();
                        cur.skip_ws();
                        if cur.peek().is_none() {
                            return Err(cur.syntax("expected species name after `,`"));
                        }
                    }
                }
            }
            Some("init") => {
                cur.skip_ws();
                let p = cur.pos();
                let name = cur.expect_ident("species name")?;
                cur.expect_char('=')?;
                let value = cur.number()?;
                if !cur.at_end() {
                    return Err(cur.syntax(format!("unexpected {}", cur.describe_here())));
                }
                if value < 0.0 {
                    return Err(p.error(ParseErrorKind::InvalidNumber(format!(
                        "negative initial concentration {value}"
                    ))));
                }
                if file.init.iter().any(|i| i.species == name) {
                    return Err(p.error(ParseErrorKind::DuplicateInit(name)));
                }
                used.push((name.clone(), p));
                file.init.push(InitLine {
                    species: name,
                    value,
                    pos: p,
                });
            }
            _ => {
                cur.idx = start;
                return Err(pos.error(ParseErrorKind::Syntax(
                    "expected a reaction (`<=>`), `species:` or `init` line".into(),
                )));
            }
        }
    }

    for (name, _) in &used {
        if !file.appearance.contains(name) {
            file.appearance.push(name.clone());
        }
    }
    if has_species_block {
        if let Some((name, pos)) = used.iter().find(|(u, _)| !declared.iter().any(|(d, _)| d == u)) {
            return Err(pos.error(ParseErrorKind::UnknownSpecies(name.clone())));
        }
        file.declared = Some(declared.into_iter().map(|(d, _)| d).collect());
    }
    let mut seen: Vec<&str> = Vec::new();
    for r in &file.reactions {
        if let Some(id) = &r.id {
            if seen.contains(&id.as_str()) {
                return Err(r.pos.error(ParseErrorKind::DuplicateReactionId(id.clone())));
            }
            seen.push(id);
        }
    }
    Ok(file)
}

fn parse_reaction(cur: &mut Cursor<'_>) -> Result<ReactionLine, ParseError> {
    cur.skip_ws();
    let mut id = None;
    let save = cur.idx;
    if let Some(name) = cur.ident() {
        cur.skip_ws();
        if cur.peek() == Some(':') {
            cur.bump();
            id = Some(name);
        } else {
            cur.idx = save;
        }
    }
    cur.skip_ws();
    let pos = cur.pos();
    let reactants = parse_side(cur)?;
    cur.skip_ws();
    if !cur.eat_str("<=>") {
        return Err(cur.syntax(format!("expected `+` or `<=>`, found {}", cur.describe_here())));
    }
    let products = parse_side(cur)?;

    let mut rates = None;
    cur.skip_ws();
    if cur.peek() == Some(';') {
        cur.bump();
        let mut kf = None;
        let mut kr = None;
        for k in 0..2 {
            if k == 1 {
                cur.expect_char(',')?;
            }
            cur.skip_ws();
            let p = cur.pos();
            let key = cur.expect_ident("`kf` or `kr`")?;
            let slot = match key.as_str() {
                "kf" => &mut kf,
                "kr" => &mut kr,
                _ => {
                    return Err(p.error(ParseErrorKind::Syntax(format!(
                        "expected `kf` or `kr`, found `{key}`"
                    ))))
                }
            };
            if slot.is_some() {
                return Err(p.error(ParseErrorKind::Syntax(format!("`{key}` given twice"))));
            }
            cur.expect_char('=')?;
            *slot = Some(cur.number()?);
        }
        rates = kf.zip(kr);
    }
    if !cur.at_end() {
        return Err(cur.syntax(format!("unexpected {}", cur.describe_here())));
    }

    fn merged(terms: &[Term]) -> BTreeMap<&str, u64> {
        let mut m: BTreeMap<&str, u64> = BTreeMap::new();
        for t in terms {
            *m.entry(t.species.as_str()).or_default() += u64::from(t.coefficient);
        }
        m.retain(|_, v| *v > 0);
        m
    }
    if merged(&reactants) == merged(&products) {
        return Err(pos.error(ParseErrorKind::InvalidReaction(
            "reactant and product sides are identical".into(),
        )));
    }
    Ok(ReactionLine {
        id,
        reactants,
        products,
        rates,
        pos,
    })
}

fn parse_side(cur: &mut Cursor<'_>) -> Result<Vec<Term>, ParseError> {
    let mut terms = vec![parse_term(cur)?];
    loop {
        cur.skip_ws();
        if cur.peek() == Some('+') {
            cur.bump();
            terms.push(parse_term(cur)?);
        } else {
            return Ok(terms);
        }
    }
}

fn parse_term(cur: &mut Cursor<'_>) -> Result<Term, ParseError> {
    cur.skip_ws();
    let pos = cur.pos();
    if cur.peek() == Some('-') && matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit()) {
        return Err(pos.error(ParseErrorKind::NegativeCoefficient));
    }
    let digits = cur.digits();
    let coefficient = if digits.is_empty() {
        1
    } else {
        if cur.peek() == Some('.') || matches!(cur.peek(), Some('e' | 'E') if matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit() || c == '-' || c == '+')) {
            return Err(pos.error(ParseErrorKind::FractionalCoefficient));
        }
        digits
            .parse::<u32>()
            .map_err(|_| pos.error(ParseErrorKind::InvalidNumber(digits.clone())))?
    };
    let species = cur.expect_ident("species name")?;
    Ok(Term {
        coefficient,
        species,
        pos,
    })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Shortest round-trip decimal form.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot serialize: {0}")]
pub struct SerializeError(pub String);

/// Canonical text form: species block in network order, one reaction per
/// line with explicit ids, coefficients and rates, then `init` lines.
pub fn serialize(network: &ReactionNetwork, c0: Option<&[f64]>) -> Result<String, SerializeError> {
    use std::fmt::Write;
    let species = network.species();
    for name in species.iter().chain(network.reaction_ids()) {
        if !is_identifier(name) {
            return Err(SerializeError(format!("`{name}` is not a valid identifier")));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "species: {}", species.join(", "));
    let side = |coefs: &[u32]| {
        coefs
            .iter()
            .zip(species)
            .filter(|(&c, _)| c > 0)
            .map(|(c, s)| format!("{c} {s}"))
            .collect::<Vec<_>>()
            .join(" + ")
    };
    for (r, id) in network.reactions().iter().zip(network.reaction_ids()) {
        let _ = writeln!(
            out,
            "{id}: {} <=> {} ; kf={}, kr={}",
            side(&r.alpha),
            side(&r.beta),
            format_number(r.k_plus),
            format_number(r.k_minus)
        );
    }
    if let Some(c0) = c0 {
        if c0.len() != species.len() {
            return Err(SerializeError("c0 length does not match species".into()));
        }
        for (s, v) in species.iter().zip(c0) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(SerializeError(format!("initial value {v} for `{s}`")));
            }
            let _ = writeln!(out, "init {s} = {}", format_number(*v));
        }
    }
    Ok(out)
}

/// Parses and builds in one go.
pub fn load(
    text: &str,
    default_rates: Option<(f64, f64)>,
) -> Result<(ReactionNetwork, Option<Vec<f64>>), LoadError> {
    parse(text)?.to_network(default_rates)
}
