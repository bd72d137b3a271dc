//! Line-oriented recursive-descent parser.
//!
//! Each non-empty line is one declaration or one line of an agent body. A
//! malformed line yields a single diagnostic and parsing resumes on the next
//! line, so one pass reports every syntax error in the file.

use crate::model::{
    AgentClass, AgentDef, Atom, BooleanNet, Comparator, Condition, ConditionExpr, Effect,
    EffectKind, Emission, Initializer, Level, LevelKind, Locus, ModelDef, NetNode, NodeSource,
    SignalSpecies, SpeciesKind, Stimulus, GLOBAL_REGION,
};

use super::lexer::{Tok, Token};
use super::{AgentSpans, Code, Diagnostic, Location, SourceMap, KEYWORDS};

type PResult<T> = Result<T, Diagnostic>;

/// Words that open a top-level declaration and therefore end an open block.
const DECLARATIONS: &[&str] = &[
    "model",
    "meta",
    "level",
    "signal",
    "ligand",
    "init",
    "stimulus",
    "agent",
    "interface",
];

fn describe(tok: Option<&Tok>) -> String {
    match tok {
        None | Some(Tok::Newline) | Some(Tok::Eof) => "end of line".into(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Number(_, raw)) => format!("`{raw}`"),
        Some(Tok::Str(s)) => format!("string \"{s}\""),
        Some(Tok::Cmp(c)) => format!("`{}`", c.symbol()),
        Some(Tok::LParen) => "`(`".into(),
        Some(Tok::RParen) => "`)`".into(),
        Some(Tok::Slash) => "`/`".into(),
    }
}

struct Cursor<'a> {
    toks: &'a [Token],
    i: usize,
    eol: Location,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], eol: Location) -> Self {
        Self { toks, i: 0, eol }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn loc(&self) -> Location {
        self.toks.get(self.i).map_or(self.eol, |t| t.loc)
    }

    fn bump(&mut self) {
        self.i += 1;
    }

    fn err(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(
            Code::SyntaxError,
            format!("expected {expected}, found {}", describe(self.peek())),
            Some(self.loc()),
        )
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&format!("`{kw}`")))
        }
    }

    /// Any identifier, keywords included.
    fn word(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.bump();
                Ok(s.clone())
            }
            _ => Err(self.err(what)),
        }
    }

    /// A user-chosen name; keywords are rejected.
    fn name(&mut self, what: &str) -> PResult<String> {
        let loc = self.loc();
        let s = self.word(what)?;
        if KEYWORDS.contains(&s.as_str()) {
            return Err(Diagnostic::error(
                Code::ReservedIdentifier,
                format!("`{s}` is a keyword and cannot be used as {what}"),
                Some(loc),
            ));
        }
        Ok(s)
    }

    fn raw_number(&mut self, what: &str) -> PResult<(f64, &'a str)> {
        match self.peek() {
            Some(Tok::Number(v, raw)) => {
                self.bump();
                Ok((*v, raw.as_str()))
            }
            _ => Err(self.err(what)),
        }
    }

    fn number(&mut self, what: &str) -> PResult<f64> {
        self.raw_number(what).map(|(v, _)| v)
    }

    fn uint(&mut self, what: &str) -> PResult<u64> {
        let loc = self.loc();
        let (_, raw) = self.raw_number(what)?;
        if !raw.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Diagnostic::error(
                Code::SyntaxError,
                format!("{what} must be a non-negative integer, found `{raw}`"),
                Some(loc),
            ));
        }
        raw.parse().map_err(|_| {
            Diagnostic::error(
                Code::SyntaxError,
                format!("{what} `{raw}` is out of range"),
                Some(loc),
            )
        })
    }

    fn u32(&mut self, what: &str) -> PResult<u32> {
        let loc = self.loc();
        let v = self.uint(what)?;
        u32::try_from(v).map_err(|_| {
            Diagnostic::error(Code::SyntaxError, format!("{what} `{v}` is out of range"), Some(loc))
        })
    }

    fn int(&mut self, what: &str) -> PResult<i64> {
        let loc = self.loc();
        let (_, raw) = self.raw_number(what)?;
        let digits = raw.strip_prefix(['-', '+']).unwrap_or(raw);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Diagnostic::error(
                Code::SyntaxError,
                format!("{what} must be an integer, found `{raw}`"),
                Some(loc),
            ));
        }
        raw.parse().map_err(|_| {
            Diagnostic::error(
                Code::SyntaxError,
                format!("{what} `{raw}` is out of range"),
                Some(loc),
            )
        })
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                self.bump();
                Ok(s.clone())
            }
            _ => Err(self.err(what)),
        }
    }

    fn cmp(&mut self) -> PResult<Comparator> {
        match self.peek() {
            Some(Tok::Cmp(c)) => {
                self.bump();
                Ok(*c)
            }
            _ => Err(self.err("a comparator (>=, <=, >, <, =)")),
        }
    }

    fn finish(&self) -> PResult<()> {
        if self.i < self.toks.len() {
            Err(self.err("end of line"))
        } else {
            Ok(())
        }
    }

    /// `LEVEL` or `LEVEL/REGION`.
    fn locus(&mut self, default_region: &str) -> PResult<Locus> {
        let level = self.name("a level name")?;
        if matches!(self.peek(), Some(Tok::Slash)) {
            self.bump();
            let region = self.name("a region name")?;
            Ok(Locus::new(level, region))
        } else {
            Ok(Locus::new(level, default_region))
        }
    }

    /// `ligand L CMP NUM` or `S at LOCUS CMP NUM`.
    fn atom(&mut self, default_region: &str) -> PResult<Atom> {
        if self.at_keyword("ligand") {
            self.bump();
            let ligand = self.name("a ligand name")?;
            let cmp = self.cmp()?;
            let threshold = self.number("a threshold")?;
            return Ok(Atom::Ligand {
                ligand,
                cmp,
                threshold,
            });
        }
        let species = self.name("a species name or `ligand`")?;
        self.keyword("at")?;
        let locus = self.locus(default_region)?;
        let cmp = self.cmp()?;
        let threshold = self.number("a threshold")?;
        Ok(Atom::Signal {
            species,
            locus,
            cmp,
            threshold,
        })
    }

    fn or_expr(&mut self, region: &str) -> PResult<ConditionExpr> {
        let first = self.and_expr(region)?;
        if !self.at_keyword("or") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.at_keyword("or") {
            self.bump();
            xs.push(self.and_expr(region)?);
        }
        Ok(ConditionExpr::Or(xs))
    }

    fn and_expr(&mut self, region: &str) -> PResult<ConditionExpr> {
        let first = self.unary(region)?;
        if !self.at_keyword("and") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.at_keyword("and") {
            self.bump();
            xs.push(self.unary(region)?);
        }
        Ok(ConditionExpr::And(xs))
    }

    fn unary(&mut self, region: &str) -> PResult<ConditionExpr> {
        if self.at_keyword("not") {
            self.bump();
            return Ok(ConditionExpr::Not(Box::new(self.unary(region)?)));
        }
        if matches!(self.peek(), Some(Tok::LParen)) {
            self.bump();
            let inner = self.or_expr(region)?;
            if !matches!(self.peek(), Some(Tok::RParen)) {
                return Err(self.err("`)`"));
            }
            self.bump();
            return Ok(inner);
        }
        self.atom(region).map(ConditionExpr::Atom)
    }
}

pub(crate) struct Parser<'d> {
    lines: Vec<(Vec<Token>, Location)>,
    pos: usize,
    diags: &'d mut Vec<Diagnostic>,
    model: ModelDef,
    map: SourceMap,
    seen_model: bool,
}

impl<'d> Parser<'d> {
    pub(crate) fn new(tokens: Vec<Token>, diags: &'d mut Vec<Diagnostic>) -> Self {
        let mut lines = Vec::new();
        let mut cur = Vec::new();
        for t in tokens {
            match t.tok {
                Tok::Newline | Tok::Eof => {
                    if !cur.is_empty() {
                        lines.push((std::mem::take(&mut cur), t.loc));
                    }
                }
                _ => cur.push(t),
            }
        }
        Self {
            lines,
            pos: 0,
            diags,
            model: ModelDef::default(),
            map: SourceMap::default(),
            seen_model: false,
        }
    }

    pub(crate) fn run(mut self) -> (ModelDef, SourceMap) {
        while self.pos < self.lines.len() {
            let (toks, eol) = self.lines[self.pos].clone();
            self.pos += 1;
            if let Err(d) = self.declaration(&toks, eol) {
                self.diags.push(d);
            }
        }
        if !self.seen_model {
            self.diags.push(Diagnostic::error(
                Code::SyntaxError,
                "missing `model NAME` declaration",
                Some(Location::new(1, 1)),
            ));
        }
        (self.model, self.map)
    }

    fn first_word(&self) -> Option<String> {
        match &self.lines.get(self.pos)?.0.first()?.tok {
            Tok::Ident(s) => Some(s.clone()),
            _ => None,
        }
    }

    fn declaration(&mut self, toks: &[Token], eol: Location) -> PResult<()> {
        let mut c = Cursor::new(toks, eol);
        let start = c.loc();
        let head = c.word("a declaration keyword")?;
        match head.as_str() {
            "model" => {
                let name = c.name("a model name")?;
                c.finish()?;
                if self.seen_model {
                    return Err(Diagnostic::error(
                        Code::DuplicateDeclaration,
                        "a file declares exactly one model",
                        Some(start),
                    ));
                }
                self.seen_model = true;
                self.model.name = name;
                self.map.model = start;
            }
            "meta" => {
                let key = c.word("a metadata key")?;
                let value = c.string("a quoted metadata value")?;
                c.finish()?;
                if self.model.metadata.insert(key.clone(), value).is_some() {
                    return Err(Diagnostic::error(
                        Code::DuplicateDeclaration,
                        format!("metadata key `{key}` is declared twice"),
                        Some(start),
                    ));
                }
            }
            "level" => {
                let name = c.name("a level name")?;
                c.keyword("kind")?;
                let kind_loc = c.loc();
                let kind_name = c.word("a level kind")?;
                let kind = LevelKind::from_name(&kind_name).ok_or_else(|| {
                    Diagnostic::error(
                        Code::SyntaxError,
                        format!(
                            "unknown level kind `{kind_name}`; expected membrane, cytosol, nucleus, organelle or custom"
                        ),
                        Some(kind_loc),
                    )
                })?;
                c.keyword("rank")?;
                let rank = c.u32("rank")?;
                c.finish()?;
                self.model.levels.push(Level { name, rank, kind });
                self.map.levels.push(start);
            }
            "signal" => {
                let name = c.name("a species name")?;
                c.keyword("kind")?;
                let kind = match c.word("`messenger` or `flag`")?.as_str() {
                    "messenger" => SpeciesKind::Messenger,
                    "flag" => SpeciesKind::Flag,
                    _ => {
                        c.i -= 1;
                        return Err(c.err("`messenger` or `flag`"));
                    }
                };
                let mut decay = 0.0;
                if c.at_keyword("decay") {
                    c.bump();
                    decay = c.number("a decay rate")?;
                }
                c.finish()?;
                self.model.species.push(SignalSpecies { name, kind, decay });
                self.map.species.push(start);
            }
            "ligand" => {
                let name = c.name("a ligand name")?;
                c.finish()?;
                self.model.ligands.push(name);
                self.map.ligands.push(start);
            }
            "init" => {
                let species = c.name("a species name")?;
                c.keyword("at")?;
                let locus = c.locus(GLOBAL_REGION)?;
                c.keyword("amount")?;
                let quantity = c.number("an amount")?;
                c.finish()?;
                self.model.initializers.push(Initializer {
                    species,
                    locus,
                    quantity,
                });
                self.map.initializers.push(start);
            }
            "stimulus" => {
                let ligand = c.name("a ligand name")?;
                c.keyword("amount")?;
                let amount = c.number("an amount")?;
                c.keyword("from")?;
                let from_tick = c.uint("start tick")?;
                c.keyword("to")?;
                let to_tick = c.uint("end tick")?;
                c.finish()?;
                self.model.stimuli.push(Stimulus {
                    ligand,
                    amount,
                    from_tick,
                    to_tick,
                });
                self.map.stimuli.push(start);
            }
            "agent" | "interface" => {
                let class = if head == "agent" {
                    AgentClass::Internal
                } else {
                    AgentClass::Interface
                };
                self.agent_block(class, &mut c, start)?;
            }
            "end" => {
                return Err(Diagnostic::error(
                    Code::SyntaxError,
                    "`end` without an open block",
                    Some(start),
                ));
            }
            other => {
                return Err(Diagnostic::error(
                    Code::SyntaxError,
                    format!("expected a declaration, found `{other}`"),
                    Some(start),
                ));
            }
        }
        Ok(())
    }

    fn agent_block(&mut self, class: AgentClass, c: &mut Cursor<'_>, start: Location) -> PResult<()> {
        let id = c.name("an agent id")?;
        let mut agent = AgentDef::new(id, class, Condition::Rule(ConditionExpr::And(Vec::new())));
        let mut seen: Vec<String> = Vec::new();
        while c.peek().is_some() {
            let opt_loc = c.loc();
            let opt = c.word("an agent option")?;
            if seen.contains(&opt) {
                return Err(Diagnostic::error(
                    Code::SyntaxError,
                    format!("option `{opt}` given twice"),
                    Some(opt_loc),
                ));
            }
            match opt.as_str() {
                "priority" => agent.priority = c.int("priority")?,
                "multiplicity" => agent.multiplicity = c.u32("multiplicity")?,
                "probability" => agent.firing_probability = c.number("a probability")?,
                "region" => agent.region = Some(c.name("a region name")?),
                _ => {
                    c.i -= 1;
                    return Err(c.err("`priority`, `multiplicity`, `probability` or `region`"));
                }
            }
            seen.push(opt);
        }

        let mut spans = AgentSpans {
            header: start,
            ..AgentSpans::default()
        };
        let mut condition: Option<Condition> = None;
        let unclosed = |id: &str| {
            Diagnostic::error(
                Code::SyntaxError,
                format!("agent `{id}` is missing its closing `end`"),
                Some(start),
            )
        };
        loop {
            if self.pos >= self.lines.len() {
                return Err(unclosed(&agent.id));
            }
            let word = self.first_word();
            let word = word.as_deref();
            if word.is_some_and(|w| DECLARATIONS.contains(&w)) {
                return Err(unclosed(&agent.id));
            }
            let (toks, eol) = self.lines[self.pos].clone();
            self.pos += 1;
            let mut b = Cursor::new(&toks, eol);
            let line_loc = b.loc();
            if b.at_keyword("end") {
                b.bump();
                if let Err(d) = b.finish() {
                    self.diags.push(d);
                }
                break;
            }
            let region = agent.default_region().to_string();
            let result = match word {
                Some("when") | Some("net") if condition.is_some() => Err(Diagnostic::error(
                    Code::SyntaxError,
                    format!("agent `{}` already has a condition", agent.id),
                    Some(line_loc),
                )),
                Some("when") => {
                    b.bump();
                    b.or_expr(&region).and_then(|e| {
                        b.finish()?;
                        spans.condition = line_loc;
                        condition = Some(Condition::Rule(e));
                        Ok(())
                    })
                }
                Some("net") => {
                    b.bump();
                    spans.condition = line_loc;
                    self.net_block(&mut b, &region, &mut spans).map(|net| {
                        condition = Some(Condition::Net(net));
                    })
                }
                Some(kw @ ("consume" | "produce" | "set")) => {
                    b.bump();
                    let kind = match kw {
                        "consume" => EffectKind::Consume,
                        "produce" => EffectKind::Produce,
                        _ => EffectKind::SetFlag,
                    };
                    (|| {
                        let species = b.name("a species name")?;
                        b.keyword("at")?;
                        let locus = b.locus(&region)?;
                        let amount = if kind == EffectKind::SetFlag {
                            b.keyword("value")?;
                            b.number("a flag value")?
                        } else {
                            b.keyword("amount")?;
                            b.number("an amount")?
                        };
                        b.finish()?;
                        agent.effects.push(Effect {
                            kind,
                            species,
                            locus,
                            amount,
                        });
                        spans.effects.push(line_loc);
                        Ok(())
                    })()
                }
                Some("emit") => {
                    b.bump();
                    (|| {
                        let ligand = b.name("a ligand name")?;
                        b.keyword("amount")?;
                        let amount = b.number("an amount")?;
                        b.finish()?;
                        agent.emissions.push(Emission { ligand, amount });
                        spans.emissions.push(line_loc);
                        Ok(())
                    })()
                }
                _ => Err(b.err("`when`, `net`, `consume`, `produce`, `set`, `emit` or `end`")),
            };
            if let Err(d) = result {
                self.diags.push(d);
            }
        }
        let Some(condition) = condition else {
            return Err(Diagnostic::error(
                Code::SyntaxError,
                format!("agent `{}` has no `when` or `net` condition", agent.id),
                Some(start),
            ));
        };
        agent.condition = condition;
        self.model.agents.push(agent);
        self.map.agents.push(spans);
        Ok(())
    }

    /// Header `net steps N output O` is on the cursor; node lines follow until `end`.
    fn net_block(
        &mut self,
        header: &mut Cursor<'_>,
        region: &str,
        spans: &mut AgentSpans,
    ) -> PResult<BooleanNet> {
        let start = spans.condition;
        header.keyword("steps")?;
        let steps = header.u32("steps")?;
        header.keyword("output")?;
        let output = header.name("an output node name")?;
        header.finish()?;

        let mut nodes = Vec::new();
        let mut ok = true;
        loop {
            if self.pos >= self.lines.len() {
                return Err(unclosed_net(start));
            }
            let word = self.first_word();
            let word = word.as_deref();
            if !matches!(word, Some("input" | "node" | "end")) {
                return Err(unclosed_net(start));
            }
            let (toks, eol) = self.lines[self.pos].clone();
            self.pos += 1;
            let mut b = Cursor::new(&toks, eol);
            let line_loc = b.loc();
            b.bump();
            let result = match word {
                Some("end") => {
                    b.finish()?;
                    break;
                }
                Some("input") => (|| {
                    let name = b.name("a node name")?;
                    b.keyword("when")?;
                    let atom = b.atom(region)?;
                    b.finish()?;
                    Ok(NetNode {
                        name,
                        source: NodeSource::Input(atom),
                    })
                })(),
                _ => (|| {
                    let name = b.name("a node name")?;
                    b.keyword("from")?;
                    let mut inputs = Vec::new();
                    while !b.at_keyword("table") {
                        inputs.push(b.name("an input node name or `table`")?);
                    }
                    b.bump();
                    let table_loc = b.loc();
                    let (_, raw) = b.raw_number("a truth table of 0s and 1s")?;
                    if !raw.bytes().all(|x| x == b'0' || x == b'1') {
                        return Err(Diagnostic::error(
                            Code::SyntaxError,
                            format!("truth table `{raw}` may only contain 0 and 1"),
                            Some(table_loc),
                        ));
                    }
                    let table = raw.bytes().map(|x| x == b'1').collect();
                    b.finish()?;
                    Ok(NetNode {
                        name,
                        source: NodeSource::Rule { inputs, table },
                    })
                })(),
            };
            match result {
                Ok(node) => {
                    nodes.push(node);
                    spans.nodes.push(line_loc);
                }
                Err(d) => {
                    ok = false;
                    self.diags.push(d);
                }
            }
        }
        if !ok {
            // Already reported; keep the agent body parse going without a net.
            return Err(Diagnostic::error(
                Code::SyntaxError,
                "boolean network has malformed node lines",
                Some(start),
            ));
        }
        Ok(BooleanNet {
            nodes,
            output,
            steps,
        })
    }
}

fn unclosed_net(start: Location) -> Diagnostic {
    Diagnostic::error(
        Code::SyntaxError,
        "boolean network is missing its closing `end`",
        Some(start),
    )
}
