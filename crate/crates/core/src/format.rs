//! The problem file format: parser and canonical serializer.
//!
//! Declarations are `space`, `kernel`, `setmap`, `fn`, `meas`, `subset` and
//! `settings`; `#` starts a comment. Kernels and set maps are parsed without
//! validation so that `validate` can report their defects. See
//! `docs/format.md` for the grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::function::{BlockValues, Func};
use crate::kernel::{Kernel, RowTemplate};
use crate::measure::Meas;
use crate::rational::Q;
use crate::setmap::{SetMap, SetTemplate};
use crate::space::{Block, Index, Point, Space};
use crate::subset::{IndexSet, Subset};
use crate::template::{ResidueClass, Target};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

const PUNCT: [&str; 13] = [
    "->", "{", "}", "[", "]", ";", ":", ",", "=", "*", "+", "-", "/",
];

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '@')
            {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(s),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Spanned {
                tok: Tok::Int(s.parse().expect("digits")),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Spanned {
                    tok: Tok::Punct(p),
                    line: start_line,
                    column: start_col,
                });
            }
            None => {
                return Err(Error::Parse {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// Run parameters stored in the file; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    pub window: Option<u64>,
    pub oracle: Option<u64>,
    pub search_bound: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelDecl {
    pub name: String,
    pub domain: String,
    pub codomain: String,
    pub kernel: Kernel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetMapDecl {
    pub name: String,
    pub domain: String,
    pub codomain: String,
    pub map: SetMap,
}

/// A named value living on a named space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Literal<T> {
    pub name: String,
    pub space: String,
    pub value: T,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemFile {
    pub spaces: Vec<(String, Arc<Space>)>,
    pub kernels: Vec<KernelDecl>,
    pub setmaps: Vec<SetMapDecl>,
    pub functions: Vec<Literal<Func>>,
    pub measures: Vec<Literal<Meas>>,
    pub subsets: Vec<Literal<Subset>>,
    pub settings: Settings,
}

impl ProblemFile {
    pub fn space(&self, name: &str) -> Option<&Arc<Space>> {
        self.spaces.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    /// Name under which `space` was declared.
    pub fn space_name(&self, space: &Space) -> Option<&str> {
        self.spaces
            .iter()
            .find(|(_, s)| **s == *space)
            .map(|(n, _)| n.as_str())
    }

    /// The first kernel declaration.
    pub fn kernel(&self) -> Result<&KernelDecl> {
        self.kernels.first().ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "no kernel declared".into(),
        })
    }

    pub fn function(&self, name: &str) -> Option<&Literal<Func>> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn subset(&self, name: &str) -> Option<&Literal<Subset>> {
        self.subsets.iter().find(|f| f.name == name)
    }

    /// A file holding one kernel with its two spaces named `K` and `L`
    /// (`K` alone when they coincide).
    pub fn from_kernel(name: &str, kernel: &Kernel) -> Self {
        let mut file = ProblemFile::default();
        file.spaces.push(("K".into(), kernel.domain().clone()));
        let codomain = if kernel.codomain() == kernel.domain() {
            "K"
        } else {
            file.spaces.push(("L".into(), kernel.codomain().clone()));
            "L"
        };
        file.kernels.push(KernelDecl {
            name: name.into(),
            domain: "K".into(),
            codomain: codomain.into(),
            kernel: kernel.clone(),
        });
        file
    }
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    file: &'a mut ProblemFile,
}

type Located<T> = std::result::Result<T, (usize, usize, String)>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.toks[(self.pos + offset).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Located<T> {
        let (l, c) = self.here();
        Err((l, c, message.into()))
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn punct(&mut self, p: &str) -> Located<()> {
        if self.is_punct(p) {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected `{p}`, found {}", self.peek()))
        }
    }

    fn word(&mut self, w: &str) -> Located<()> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected `{w}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> Located<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            t => self.fail(format!("expected {what}, found {t}")),
        }
    }

    fn natural(&mut self, what: &str) -> Located<u64> {
        match self.peek().clone() {
            Tok::Int(n) => match u64::try_from(&n) {
                Ok(v) => {
                    self.next();
                    Ok(v)
                }
                Err(_) => self.fail(format!("{what} out of range")),
            },
            t => self.fail(format!("expected {what}, found {t}")),
        }
    }

    fn rational(&mut self) -> Located<Q> {
        let negative = if self.is_punct("-") {
            self.next();
            true
        } else {
            false
        };
        let num = match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                n
            }
            t => return self.fail(format!("expected a rational, found {t}")),
        };
        let den = if self.is_punct("/") {
            self.next();
            match self.peek().clone() {
                Tok::Int(d) if d != BigInt::from(0) => {
                    self.next();
                    d
                }
                Tok::Int(_) => return self.fail("zero denominator"),
                t => return self.fail(format!("expected a denominator, found {t}")),
            }
        } else {
            BigInt::from(1)
        };
        let value = Q::new(num, den);
        Ok(if negative { -value } else { value })
    }

    fn space_ref(&mut self) -> Located<(String, Arc<Space>)> {
        let name = self.ident("a space name")?;
        match self.file.space(&name) {
            Some(s) => Ok((name, s.clone())),
            None => {
                self.pos -= 1;
                self.fail(format!("unknown space `{name}`"))
            }
        }
    }

    fn fresh_name(&mut self, taken: bool, name: &str) -> Located<()> {
        if taken {
            self.pos -= 1;
            return self.fail(format!("`{name}` declared twice"));
        }
        Ok(())
    }

    /// `X:4` or `X:inf`, checked against `space` when given.
    fn point(&mut self, space: Option<&Space>) -> Located<Point> {
        let at = self.pos;
        let block = self.ident("a block id")?;
        self.punct(":")?;
        let index = if self.is_word("inf") {
            self.next();
            Index::Inf
        } else {
            Index::At(self.natural("an index or `inf`")?)
        };
        let p = Point { block, index };
        if let Some(s) = space {
            if !s.contains(&p) {
                self.pos = at;
                return self.fail(format!("point {p} is not in the space"));
            }
        }
        Ok(p)
    }

    /// `X[a*k+b]` after the block id has been read.
    fn affine(&mut self, block: String) -> Located<Target> {
        self.punct("[")?;
        let a = if matches!(self.peek(), Tok::Int(_)) {
            let a = self.natural("a slope")?;
            self.punct("*")?;
            a
        } else {
            1
        };
        self.word("k")?;
        let b: i64 = if self.is_punct("+") || self.is_punct("-") {
            let sign = if self.is_punct("-") { -1 } else { 1 };
            self.next();
            let n = self.natural("an offset")?;
            match i64::try_from(n) {
                Ok(v) => sign * v,
                Err(_) => return self.fail("offset out of range"),
            }
        } else {
            0
        };
        self.punct("]")?;
        if a == 0 {
            return self.fail("slope must be positive");
        }
        Ok(Target::Indexed { block, a, b })
    }

    fn target(&mut self, space: &Space) -> Located<Target> {
        if matches!(self.peek_at(1), Tok::Punct("[")) {
            let at = self.pos;
            let block = self.ident("a block id")?;
            let t = self.affine(block)?;
            if let Err(e) = t.check(space) {
                self.pos = at;
                return self.fail(e);
            }
            Ok(t)
        } else {
            Ok(Target::Fixed(self.point(Some(space))?))
        }
    }

    /// `mod d rem r from k0`.
    fn class(&mut self) -> Located<ResidueClass> {
        self.word("mod")?;
        let d = self.natural("a modulus")?;
        self.word("rem")?;
        let r = self.natural("a residue")?;
        self.word("from")?;
        let k0 = self.natural("a start")?;
        Ok(ResidueClass::new(d, r, k0))
    }

    /// `{ P: w, ... }` as weighted items.
    fn weighted<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Located<T>,
    ) -> Located<Vec<(T, Q)>> {
        self.punct("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            let x = item(self)?;
            self.punct(":")?;
            let w = self.rational()?;
            out.push((x, w));
            if !self.is_punct(",") {
                break;
            }
            self.next();
        }
        self.punct("}")?;
        Ok(out)
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Located<T>) -> Located<Vec<T>> {
        self.punct("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            out.push(item(self)?);
            if !self.is_punct(",") {
                break;
            }
            self.next();
        }
        self.punct("}")?;
        Ok(out)
    }

    fn measure(&mut self, space: &Arc<Space>) -> Located<Meas> {
        let at = self.pos;
        let atoms = self.weighted(|p| p.point(Some(space)))?;
        let mut seen = BTreeSet::new();
        if let Some((p, _)) = atoms.iter().find(|(p, _)| !seen.insert(p.clone())) {
            self.pos = at;
            return self.fail(format!("point {p} listed twice"));
        }
        Ok(Meas::from_atoms(space, atoms).expect("points checked against the space"))
    }

    fn space_decl(&mut self) -> Located<()> {
        self.word("space")?;
        let name = self.ident("a space name")?;
        self.fresh_name(self.file.space(&name).is_some(), &name)?;
        self.punct("{")?;
        let mut blocks: Vec<Block> = Vec::new();
        while self.is_word("block") {
            self.next();
            let at = self.pos;
            let id = self.ident("a block id")?;
            if blocks.iter().any(|b| b.id == id) {
                self.pos = at;
                return self.fail(format!("duplicate id `{id}`"));
            }
            let block = if self.is_word("seq") {
                self.next();
                Block::seq(&id)
            } else if self.is_word("fin") {
                self.next();
                let n = self.natural("a block size")?;
                if n == 0 {
                    self.pos -= 1;
                    return self.fail(format!("empty block `{id}`"));
                }
                Block::finite(&id, n)
            } else {
                return self.fail(format!(
                    "unknown block kind {}, expected `seq` or `fin`",
                    self.peek()
                ));
            };
            self.punct(";")?;
            blocks.push(block);
        }
        if blocks.is_empty() {
            return self.fail("a space needs at least one block");
        }
        self.punct("}")?;
        let space = Space::new(blocks).map_err(|e| {
            let (l, c) = self.here();
            (l, c, e.to_string())
        })?;
        self.file.spaces.push((name, Arc::new(space)));
        Ok(())
    }

    fn kernel_decl(&mut self) -> Located<()> {
        self.word("kernel")?;
        let name = self.ident("a kernel name")?;
        self.fresh_name(self.file.kernels.iter().any(|k| k.name == name), &name)?;
        self.punct(":")?;
        let (dn, dom) = self.space_ref()?;
        self.punct("->")?;
        let (cn, cod) = self.space_ref()?;
        self.punct("{")?;
        let mut rows = BTreeMap::new();
        let mut templates = Vec::new();
        loop {
            if self.is_word("row") {
                self.next();
                let at = self.pos;
                let y = self.point(None)?;
                self.punct("=")?;
                let m = self.measure(&dom)?;
                self.punct(";")?;
                if rows.insert(y.clone(), m).is_some() {
                    self.pos = at;
                    return self.fail(format!("row {y} given twice"));
                }
            } else if self.is_word("template") {
                self.next();
                let block = self.ident("a block id")?;
                let class = self.class()?;
                self.punct("=")?;
                let atoms = self.weighted(|p| p.target(&dom))?;
                self.punct(";")?;
                templates.push(RowTemplate::new(&block, class, atoms));
            } else {
                break;
            }
        }
        self.punct("}")?;
        self.file.kernels.push(KernelDecl {
            name,
            domain: dn,
            codomain: cn,
            kernel: Kernel::unvalidated(&dom, &cod, rows, templates),
        });
        Ok(())
    }

    fn setmap_decl(&mut self) -> Located<()> {
        self.word("setmap")?;
        let name = self.ident("a set map name")?;
        self.fresh_name(self.file.setmaps.iter().any(|k| k.name == name), &name)?;
        self.punct(":")?;
        let (dn, dom) = self.space_ref()?;
        self.punct("->")?;
        let (cn, cod) = self.space_ref()?;
        self.word("bound")?;
        let bound = self.natural("a cardinality bound")?;
        self.punct("{")?;
        let mut values = BTreeMap::new();
        let mut templates = Vec::new();
        loop {
            if self.is_word("value") {
                self.next();
                let at = self.pos;
                let y = self.point(None)?;
                self.punct("=")?;
                let v: BTreeSet<Point> = self.list(|p| p.point(Some(&cod)))?.into_iter().collect();
                self.punct(";")?;
                if values.insert(y.clone(), v).is_some() {
                    self.pos = at;
                    return self.fail(format!("value at {y} given twice"));
                }
            } else if self.is_word("template") {
                self.next();
                let block = self.ident("a block id")?;
                let class = self.class()?;
                self.punct("=")?;
                let targets = self.list(|p| p.target(&cod))?;
                self.punct(";")?;
                templates.push(SetTemplate::new(&block, class, targets));
            } else {
                break;
            }
        }
        self.punct("}")?;
        self.file.setmaps.push(SetMapDecl {
            name,
            domain: dn,
            codomain: cn,
            map: SetMap::unvalidated(&dom, &cod, bound, values, templates),
        });
        Ok(())
    }

    fn function_decl(&mut self) -> Located<()> {
        self.word("fn")?;
        let name = self.ident("a function name")?;
        self.fresh_name(self.file.function(&name).is_some(), &name)?;
        self.word("on")?;
        let (sn, space) = self.space_ref()?;
        self.punct("{")?;
        let mut given: BTreeMap<String, BlockValues> = BTreeMap::new();
        while !self.is_punct("}") {
            let at = self.pos;
            let id = self.ident("a block id")?;
            let Some(block) = space.block(&id) else {
                self.pos = at;
                return self.fail(format!("unknown block `{id}`"));
            };
            self.punct(":")?;
            let values = if self.is_word("tail") {
                if !block.is_seq() {
                    self.pos = at;
                    return self.fail(format!("`tail` on finite block `{id}`"));
                }
                self.next();
                let tail = self.rational()?;
                let mut exceptions = BTreeMap::new();
                if self.is_word("except") {
                    self.next();
                    for (i, v) in self.weighted(|p| p.natural("an index"))? {
                        exceptions.insert(i, v);
                    }
                }
                BlockValues::Seq { exceptions, tail }
            } else {
                self.punct("[")?;
                let mut vals = Vec::new();
                while !self.is_punct("]") {
                    vals.push(self.rational()?);
                    if !self.is_punct(",") {
                        break;
                    }
                    self.next();
                }
                self.punct("]")?;
                match block.kind {
                    crate::space::BlockKind::Finite(n) if n as usize == vals.len() => {}
                    _ => {
                        self.pos = at;
                        return self.fail(format!(
                            "block `{id}` needs `tail` or exactly its size in values"
                        ));
                    }
                }
                BlockValues::Finite(vals)
            };
            self.punct(";")?;
            if given.insert(id.clone(), values).is_some() {
                self.pos = at;
                return self.fail(format!("block `{id}` given twice"));
            }
        }
        let mut blocks = Vec::new();
        for b in space.blocks() {
            match given.remove(&b.id) {
                Some(v) => blocks.push(v),
                None => return self.fail(format!("missing values for block `{}`", b.id)),
            }
        }
        self.punct("}")?;
        let func = Func::from_blocks(&space, blocks).map_err(|e| {
            let (l, c) = self.here();
            (l, c, e.to_string())
        })?;
        self.file.functions.push(Literal {
            name,
            space: sn,
            value: func,
        });
        Ok(())
    }

    fn measure_decl(&mut self) -> Located<()> {
        self.word("meas")?;
        let name = self.ident("a measure name")?;
        self.fresh_name(self.file.measures.iter().any(|m| m.name == name), &name)?;
        self.word("on")?;
        let (sn, space) = self.space_ref()?;
        let m = self.measure(&space)?;
        self.file.measures.push(Literal {
            name,
            space: sn,
            value: m,
        });
        Ok(())
    }

    fn subset_item(&mut self, space: &Space, set: &mut Subset) -> Located<()> {
        let at = self.pos;
        if matches!(self.peek_at(1), Tok::Punct("[")) {
            let block = self.ident("a block id")?;
            let t = self.affine(block)?;
            if let Err(e) = t.check(space) {
                self.pos = at;
                return self.fail(e);
            }
            let Target::Indexed { block, a, b } = t else {
                unreachable!()
            };
            let shift = if b < 0 {
                (b.unsigned_abs()).div_ceil(a)
            } else {
                0
            };
            let first = (b + (a * shift) as i64) as u64;
            let mut trace = set.trace(&block);
            trace.indices = trace.indices.union(&IndexSet::progression(a, first));
            set.set_trace(&block, trace);
        } else {
            let p = self.point(Some(space))?;
            set.insert(&p);
        }
        Ok(())
    }

    /// `{ X:0, X[2*k+1], X:inf }` on `space`.
    fn subset(&mut self, space: &Space) -> Located<Subset> {
        let mut set = Subset::empty();
        self.punct("{")?;
        while !self.is_punct("}") {
            self.subset_item(space, &mut set)?;
            if !self.is_punct(",") {
                break;
            }
            self.next();
        }
        self.punct("}")?;
        Ok(set)
    }

    fn subset_decl(&mut self) -> Located<()> {
        self.word("subset")?;
        let name = self.ident("a subset name")?;
        self.fresh_name(self.file.subset(&name).is_some(), &name)?;
        self.word("on")?;
        let (sn, space) = self.space_ref()?;
        let set = self.subset(&space)?;
        self.file.subsets.push(Literal {
            name,
            space: sn,
            value: set,
        });
        Ok(())
    }

    fn settings_decl(&mut self) -> Located<()> {
        self.word("settings")?;
        self.punct("{")?;
        while !self.is_punct("}") {
            let at = self.pos;
            let key = self.ident("a setting")?;
            let current = match key.as_str() {
                "window" => self.file.settings.window,
                "oracle" => self.file.settings.oracle,
                "search_bound" => self.file.settings.search_bound,
                "seed" => self.file.settings.seed,
                _ => {
                    self.pos = at;
                    return self.fail(format!("unknown setting `{key}`"));
                }
            };
            if current.is_some() {
                self.pos = at;
                return self.fail(format!("setting `{key}` given twice"));
            }
            let v = self.natural("a natural number")?;
            match key.as_str() {
                "window" => self.file.settings.window = Some(v),
                "oracle" => self.file.settings.oracle = Some(v),
                "search_bound" => self.file.settings.search_bound = Some(v),
                _ => self.file.settings.seed = Some(v),
            }
            self.punct(";")?;
        }
        self.punct("}")?;
        Ok(())
    }

    fn file(&mut self) -> Located<()> {
        let mut settings_seen = false;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(w) => match w.as_str() {
                    "space" => self.space_decl()?,
                    "kernel" => self.kernel_decl()?,
                    "setmap" => self.setmap_decl()?,
                    "fn" => self.function_decl()?,
                    "meas" => self.measure_decl()?,
                    "subset" => self.subset_decl()?,
                    "settings" => {
                        if settings_seen {
                            return self.fail("`settings` given twice");
                        }
                        settings_seen = true;
                        self.settings_decl()?
                    }
                    _ => return self.fail(format!("unknown declaration `{w}`")),
                },
                t => return self.fail(format!("expected a declaration, found {t}")),
            }
        }
        if self.file.spaces.is_empty() {
            return self.fail("no spaces declared");
        }
        Ok(())
    }
}

fn located(e: (usize, usize, String)) -> Error {
    Error::Parse {
        line: e.0,
        column: e.1,
        message: e.2,
    }
}

pub fn parse(text: &str) -> Result<ProblemFile> {
    let toks = lex(text)?;
    let mut file = ProblemFile::default();
    let mut p = Parser {
        toks,
        pos: 0,
        file: &mut file,
    };
    p.file().map_err(located)?;
    Ok(file)
}

fn parse_fragment<T>(text: &str, f: impl FnOnce(&mut Parser) -> Located<T>) -> Result<T> {
    let toks = lex(text)?;
    let mut file = ProblemFile::default();
    let mut p = Parser {
        toks,
        pos: 0,
        file: &mut file,
    };
    let v = f(&mut p).map_err(located)?;
    if p.peek() != &Tok::Eof {
        return Err(located(
            p.fail::<()>(format!("trailing {}", p.peek())).unwrap_err(),
        ));
    }
    Ok(v)
}

/// Parses a subset literal such as `{ X:0, X[2*k+1], X:inf }`.
pub fn parse_subset(text: &str, space: &Space) -> Result<Subset> {
    parse_fragment(text, |p| p.subset(space))
}

/// Parses a point such as `X:3` or `X:inf`.
pub fn parse_point(text: &str, space: &Space) -> Result<Point> {
    parse_fragment(text, |p| p.point(Some(space)))
}

/// Parses a rational such as `-3/5`.
pub fn parse_rational(text: &str) -> Result<Q> {
    parse_fragment(text, |p| p.rational())
}

fn write_space(out: &mut String, name: &str, space: &Space) {
    let _ = writeln!(out, "space {name} {space}");
}

/// Body of a kernel declaration, one row or template per line.
pub fn kernel_body(kernel: &Kernel) -> String {
    let mut out = String::from("{\n");
    for (y, m) in kernel.rows() {
        let _ = writeln!(out, "  row {y} = {m};");
    }
    for t in kernel.templates() {
        let _ = writeln!(out, "  {t};");
    }
    out.push('}');
    out
}

pub fn setmap_body(map: &SetMap) -> String {
    let mut out = String::from("{\n");
    for (y, v) in map.values() {
        let items: Vec<String> = v.iter().map(ToString::to_string).collect();
        if items.is_empty() {
            let _ = writeln!(out, "  value {y} = {{ }};");
        } else {
            let _ = writeln!(out, "  value {y} = {{ {} }};", items.join(", "));
        }
    }
    for t in map.templates() {
        let _ = writeln!(out, "  {t};");
    }
    out.push('}');
    out
}

/// Canonical text of a problem file; `parse(serialize(f)) == f`.
pub fn serialize(file: &ProblemFile) -> String {
    let mut out = String::new();
    for (name, space) in &file.spaces {
        write_space(&mut out, name, space);
    }
    for k in &file.kernels {
        let _ = writeln!(
            out,
            "\nkernel {} : {} -> {} {}",
            k.name,
            k.domain,
            k.codomain,
            kernel_body(&k.kernel)
        );
    }
    for m in &file.setmaps {
        let _ = writeln!(
            out,
            "\nsetmap {} : {} -> {} bound {} {}",
            m.name,
            m.domain,
            m.codomain,
            m.map.bound(),
            setmap_body(&m.map)
        );
    }
    let literals =
        !file.functions.is_empty() || !file.measures.is_empty() || !file.subsets.is_empty();
    if literals {
        out.push('\n');
    }
    for f in &file.functions {
        let _ = writeln!(out, "fn {} on {} {}", f.name, f.space, f.value);
    }
    for m in &file.measures {
        let _ = writeln!(out, "meas {} on {} {}", m.name, m.space, m.value);
    }
    for s in &file.subsets {
        let _ = writeln!(out, "subset {} on {} {}", s.name, s.space, s.value);
    }
    let s = &file.settings;
    if *s != Settings::default() {
        let mut items = Vec::new();
        for (k, v) in [
            ("window", s.window),
            ("oracle", s.oracle),
            ("search_bound", s.search_bound),
            ("seed", s.seed),
        ] {
            if let Some(v) = v {
                items.push(format!("{k} {v};"));
            }
        }
        let _ = writeln!(out, "\nsettings {{ {} }}", items.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::rational::{int, q};

    const EX52: &str = gallery::EX52_FILE;

    #[test]
    fn bundled_ex52_parses_to_the_builtin_kernel() {
        let f = parse(EX52).unwrap();
        let k = f.kernel().unwrap();
        assert_eq!(k.kernel, gallery::ex52());
        assert_eq!(
            f.function("witness").unwrap().value,
            gallery::ex52_witness()
        );
        assert_eq!(f.settings.window, Some(2));
        assert_eq!(f.settings.oracle, Some(5));
    }

    #[test]
    fn serialization_is_parse_stable() {
        let f = parse(EX52).unwrap();
        let text = serialize(&f);
        let g = parse(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(serialize(&g), text);
    }

    #[test]
    fn errors_carry_locations() {
        let e = parse("").unwrap_err().to_string();
        assert!(e.contains("no spaces declared"), "{e}");
        let e = parse("space K {\n  block X tree;\n}").unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    line: 2,
                    column: 11,
                    ..
                }
            ),
            "{e}"
        );
        let e = parse("space K { block X seq; }\nsettings { windw 2; }").unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    line: 2,
                    column: 12,
                    ..
                }
            ),
            "{e}"
        );
        let e = parse("space K { block X seq; block X fin 2; }")
            .unwrap_err()
            .to_string();
        assert!(e.contains("duplicate id"), "{e}");
        let e = parse("space K { block W fin 0; }").unwrap_err().to_string();
        assert!(e.contains("empty block"), "{e}");
        let e = parse("space K { block X seq; } meas m on K { Y:0: 1 }")
            .unwrap_err()
            .to_string();
        assert!(e.contains("not in the space"), "{e}");
    }

    #[test]
    fn subset_literals() {
        let s = Space::new(vec![Block::seq("X"), Block::finite("W", 3)]).unwrap();
        let a = parse_subset("{ X:0, X[2*k+1], X:inf, W:2 }", &s).unwrap();
        assert!(a.contains(&Point::at("X", 0)) && a.contains(&Point::at("X", 7)));
        assert!(!a.contains(&Point::at("X", 4)));
        assert!(a.is_closed());
        assert_eq!(parse_subset(&a.to_string(), &s).unwrap(), a);
        let b = parse_subset("{ X[k-1] }", &s).unwrap();
        assert_eq!(b, parse_subset("{ X[k] }", &s).unwrap());
        assert_eq!(parse_point("X:inf", &s).unwrap(), Point::inf("X"));
        assert_eq!(parse_rational("-3/5").unwrap(), -q(3, 5));
        assert_eq!(parse_rational("4").unwrap(), int(4));
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn kernels_are_parsed_unvalidated() {
        let text = "space K { block X seq; }\nspace L { block Z seq; }\n\
                    kernel T : K -> L { row Z:inf = { X:0: 1 }; template Z mod 1 rem 0 from 0 = { X[k]: 1 }; }";
        let f = parse(text).unwrap();
        assert!(!crate::kernel::validate_kernel(&f.kernel().unwrap().kernel).is_ok());
    }

    #[test]
    fn gallery_kernels_round_trip() {
        for (name, k) in [
            ("ex52", gallery::ex52()),
            ("cancel", gallery::cancellation()),
            ("signed", gallery::two_point_signed()),
            ("mix", gallery::mixture(&q(1, 3))),
        ] {
            let f = ProblemFile::from_kernel(name, &k);
            let g = parse(&serialize(&f)).unwrap();
            assert_eq!(g.kernel().unwrap().kernel, k, "{name}");
        }
    }
}
