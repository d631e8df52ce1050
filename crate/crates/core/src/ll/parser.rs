//! Recursive-descent parser over the token stream.

use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::{ParseError, ParseErrorKind};

/// Types as written in the source; narrowed to [`Ty`] for values.
#[derive(Debug, Clone, PartialEq, Eq)]
enum SrcTy {
    Int(u32),
    /// Typed pointers carry their pointee; opaque `ptr` does not.
    Ptr(Option<Box<SrcTy>>),
    Array(u64, Box<SrcTy>),
    Void,
}

const LINKAGE_AND_VISIBILITY: &[&str] = &[
    "private",
    "internal",
    "external",
    "weak",
    "weak_odr",
    "linkonce",
    "linkonce_odr",
    "common",
    "appending",
    "extern_weak",
    "available_externally",
    "dso_local",
    "dso_preemptable",
    "hidden",
    "protected",
    "default",
    "unnamed_addr",
    "local_unnamed_addr",
    "thread_local",
    "dllimport",
    "dllexport",
];

struct Parser<'t> {
    toks: &'t [Token],
    i: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.i)
    }

    fn peek_at(&self, off: usize) -> Option<&'t Token> {
        self.toks.get(self.i + off)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.i)?;
        self.i += 1;
        Some(t)
    }

    fn end_pos(&self) -> Pos {
        self.toks
            .last()
            .map(|t| Pos::new(t.pos.line, t.pos.col + t.text.len() as u32))
            .unwrap_or(Pos::new(1, 1))
    }

    fn here(&self) -> Pos {
        self.peek().map(|t| t.pos).unwrap_or_else(|| self.end_pos())
    }

    fn malformed(&self, production: &str, expected: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => format!("`{}`", t.display()),
            None => "end of input".to_string(),
        };
        ParseError::new(
            ParseErrorKind::Malformed,
            format!("in {production}: expected {expected}, found {found}"),
            self.here(),
        )
    }

    fn unsupported_at(pos: Pos, what: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Unsupported, what, pos)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(p)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_keyword(k)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str, production: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.malformed(production, &format!("`{p}`")))
        }
    }

    fn expect_keyword(&mut self, k: &str, production: &str) -> PResult<()> {
        if self.eat_keyword(k) {
            Ok(())
        } else {
            Err(self.malformed(production, &format!("`{k}`")))
        }
    }

    fn expect_kind(
        &mut self,
        kind: TokenKind,
        production: &str,
        expected: &str,
    ) -> PResult<&'t Token> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.i += 1;
                Ok(t)
            }
            _ => Err(self.malformed(production, expected)),
        }
    }

    /// Skip tokens until braces/brackets/parens opened along the way are
    /// closed and the next token starts a new line.
    fn skip_statement(&mut self) {
        let Some(first) = self.peek() else { return };
        let mut line = first.pos.line;
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if depth == 0 && t.pos.line != line {
                break;
            }
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "{" | "(" | "[" | "<" => depth += 1,
                    "}" | ")" | "]" | ">" => depth -= 1,
                    _ => {}
                }
            }
            line = t.pos.line;
            self.i += 1;
        }
    }

    fn skip_balanced_parens(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.bump() {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
                if depth <= 0 {
                    return;
                }
            }
        }
    }

    /// Attributes between a type and its operand, or before a return type:
    /// keywords (with optional parenthesised arguments), `align N`,
    /// attribute-group references and string attributes.
    fn skip_attributes(&mut self) {
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Keyword => {
                    if matches!(
                        t.text.as_str(),
                        "to" | "x" | "null" | "true" | "false" | "undef" | "poison"
                    ) {
                        return;
                    }
                    let is_align = t.text == "align";
                    self.i += 1;
                    if self.peek().is_some_and(|n| n.is_punct("(")) {
                        self.skip_balanced_parens();
                    } else if is_align && self.peek().is_some_and(|n| n.kind == TokenKind::IntLit) {
                        self.i += 1;
                    }
                }
                TokenKind::AttrGroup => self.i += 1,
                TokenKind::Str => {
                    self.i += 1;
                    if self.eat_punct("=") {
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    /// Skip trailing keywords and attribute groups on `line` (function
    /// attributes after a call's argument list).
    fn skip_trailing_on_line(&mut self, line: u32) {
        while let Some(t) = self.peek() {
            if t.pos.line != line {
                return;
            }
            match t.kind {
                TokenKind::Keyword | TokenKind::AttrGroup => {
                    self.i += 1;
                    if self.peek().is_some_and(|n| n.is_punct("(")) {
                        self.skip_balanced_parens();
                    }
                }
                _ => return,
            }
        }
    }

    // ---- types --------------------------------------------------------

    fn parse_src_type(&mut self, production: &str) -> PResult<SrcTy> {
        let Some(t) = self.peek() else {
            return Err(self.malformed(production, "a type"));
        };
        let pos = t.pos;
        let mut ty = match t.kind {
            TokenKind::Type => {
                self.i += 1;
                match t.text.as_str() {
                    "void" => SrcTy::Void,
                    "ptr" => {
                        if self.eat_keyword("addrspace") {
                            self.skip_balanced_parens();
                        }
                        SrcTy::Ptr(None)
                    }
                    w if w.starts_with('i') && w[1..].chars().all(|c| c.is_ascii_digit()) => {
                        let bits: u32 = w[1..].parse().map_err(|_| {
                            ParseError::new(
                                ParseErrorKind::Malformed,
                                format!("bad integer type `{w}`"),
                                pos,
                            )
                        })?;
                        SrcTy::Int(bits)
                    }
                    other => {
                        return Err(Self::unsupported_at(pos, format!("type `{other}`")));
                    }
                }
            }
            TokenKind::Punct if t.text == "[" => {
                self.i += 1;
                let n = self.expect_kind(TokenKind::IntLit, production, "array length")?;
                let len: u64 = n.text.parse().map_err(|_| {
                    ParseError::new(ParseErrorKind::Malformed, "bad array length", n.pos)
                })?;
                self.expect_keyword("x", production)?;
                let elem = self.parse_src_type(production)?;
                self.expect_punct("]", production)?;
                SrcTy::Array(len, Box::new(elem))
            }
            TokenKind::Punct if t.text == "{" || t.text == "<" => {
                return Err(Self::unsupported_at(pos, "aggregate and vector types"));
            }
            TokenKind::LocalIdent => {
                return Err(Self::unsupported_at(
                    pos,
                    format!("named type `%{}`", t.text),
                ));
            }
            _ => return Err(self.malformed(production, "a type")),
        };
        loop {
            if self.eat_punct("*") {
                ty = SrcTy::Ptr(Some(Box::new(ty)));
            } else if self.peek().is_some_and(|t| t.is_keyword("addrspace")) {
                self.i += 1;
                self.skip_balanced_parens();
            } else if self.peek().is_some_and(|t| t.is_punct("("))
                && !matches!(ty, SrcTy::Ptr(None))
                && self.looks_like_function_type()
            {
                // Function type such as `i64 (i64)*`; only its pointer form
                // is meaningful and it is used for callee typing, which we
                // read from the definition instead.
                self.skip_balanced_parens();
                if !self.eat_punct("*") {
                    return Err(Self::unsupported_at(pos, "function types"));
                }
                ty = SrcTy::Ptr(None);
            } else {
                break;
            }
        }
        Ok(ty)
    }

    /// True when a `(` begins a parameter-type list rather than a call's
    /// argument list: the matching `)` is followed by `*`.
    fn looks_like_function_type(&self) -> bool {
        let mut depth = 0i32;
        let mut j = self.i;
        while let Some(t) = self.toks.get(j) {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
                if depth == 0 {
                    return self.toks.get(j + 1).is_some_and(|n| n.is_punct("*"));
                }
            }
            j += 1;
        }
        false
    }

    fn value_ty(ty: &SrcTy, pos: Pos) -> PResult<Ty> {
        match ty {
            SrcTy::Int(w) => {
                let w8 = u8::try_from(*w)
                    .ok()
                    .filter(|w| SUPPORTED_WIDTHS.contains(w));
                match w8 {
                    Some(w) => Ok(Ty::Int(w)),
                    None => Err(Self::unsupported_at(pos, format!("integer width i{w}"))),
                }
            }
            SrcTy::Ptr(_) => Ok(Ty::Addr),
            SrcTy::Array(..) => Err(Self::unsupported_at(pos, "array-typed values")),
            SrcTy::Void => Err(ParseError::new(
                ParseErrorKind::Malformed,
                "`void` is not a value type",
                pos,
            )),
        }
    }

    fn size_of(ty: &SrcTy, pos: Pos) -> PResult<u64> {
        match ty {
            SrcTy::Int(w) => match Self::value_ty(ty, pos)?.store_bytes() {
                Some(b) => Ok(b as u64),
                None => Err(Self::unsupported_at(pos, format!("in-memory i{w}"))),
            },
            SrcTy::Ptr(_) => Ok((ADDRESS_BITS / 8) as u64),
            SrcTy::Array(n, elem) => n
                .checked_mul(Self::size_of(elem, pos)?)
                .ok_or_else(|| Self::unsupported_at(pos, "array too large")),
            SrcTy::Void => Err(ParseError::new(
                ParseErrorKind::Malformed,
                "sized type expected",
                pos,
            )),
        }
    }

    fn parse_value_ty(&mut self, production: &str) -> PResult<Ty> {
        let pos = self.here();
        let ty = self.parse_src_type(production)?;
        Self::value_ty(&ty, pos)
    }

    // ---- operands -----------------------------------------------------

    fn parse_int_literal(&self, tok: &Token, ty: Ty) -> PResult<u64> {
        let v: i128 = tok.text.parse().map_err(|_| {
            ParseError::new(
                ParseErrorKind::Malformed,
                format!("integer literal `{}` out of range", tok.text),
                tok.pos,
            )
        })?;
        let bits = ty.bits() as u32;
        let modulus = 1i128 << bits;
        let lo = if bits == 1 {
            -1
        } else {
            -(1i128 << (bits - 1))
        };
        if v < lo || v >= modulus {
            return Err(ParseError::new(
                ParseErrorKind::Malformed,
                format!("integer literal {} does not fit in {ty}", tok.text),
                tok.pos,
            ));
        }
        Ok(v.rem_euclid(modulus) as u64)
    }

    fn parse_operand(&mut self, ty: Ty, production: &str) -> PResult<Operand> {
        let Some(t) = self.peek() else {
            return Err(self.malformed(production, "an operand"));
        };
        let op = match t.kind {
            TokenKind::LocalIdent => Operand::Reg(t.text.clone()),
            TokenKind::IntLit => {
                if ty == Ty::Addr {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        "integer literal used as an address",
                        t.pos,
                    ));
                }
                Operand::Const(self.parse_int_literal(t, ty)?)
            }
            TokenKind::Keyword => match t.text.as_str() {
                "true" | "false" if ty == Ty::Int(1) => Operand::Const((t.text == "true") as u64),
                "null" if ty == Ty::Addr => Operand::Const(0),
                "undef" | "poison" | "zeroinitializer" => {
                    return Err(Self::unsupported_at(t.pos, format!("`{}` values", t.text)));
                }
                "getelementptr" | "bitcast" | "inttoptr" | "ptrtoint" | "add" | "sub" | "mul" => {
                    return Err(Self::unsupported_at(t.pos, "constant expressions"));
                }
                _ => return Err(self.malformed(production, "an operand")),
            },
            TokenKind::GlobalIdent => {
                return Err(Self::unsupported_at(
                    t.pos,
                    format!("global operand `@{}`", t.text),
                ));
            }
            _ => return Err(self.malformed(production, "an operand")),
        };
        self.i += 1;
        Ok(op)
    }

    fn parse_typed_operand(&mut self, production: &str) -> PResult<(Ty, Operand)> {
        let ty = self.parse_value_ty(production)?;
        self.skip_attributes();
        let op = self.parse_operand(ty, production)?;
        Ok((ty, op))
    }

    fn parse_label_ref(&mut self, production: &str) -> PResult<String> {
        match self.peek() {
            Some(t) if t.is(TokenKind::Type, "label") => self.i += 1,
            _ => return Err(self.malformed(production, "`label`")),
        }
        Ok(self
            .expect_kind(TokenKind::LocalIdent, production, "a block label")?
            .text
            .clone())
    }

    // ---- top level ----------------------------------------------------

    fn parse_module(&mut self) -> PResult<LlvmModule> {
        let mut module = LlvmModule::default();
        let mut names: HashSet<String> = HashSet::new();
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Keyword => match t.text.as_str() {
                    "define" => {
                        let f = self.parse_function()?;
                        if !names.insert(f.name.clone()) {
                            return Err(ParseError::new(
                                ParseErrorKind::Malformed,
                                format!("redefinition of `@{}`", f.name),
                                f.pos,
                            ));
                        }
                        module.functions.push(f);
                    }
                    "declare" => {
                        let name = self.parse_declaration()?;
                        module.declarations.push(name);
                    }
                    "target" | "source_filename" => {
                        let start = self.i;
                        self.skip_statement();
                        let note = self.toks[start..self.i]
                            .iter()
                            .map(Token::display)
                            .collect::<Vec<_>>()
                            .join(" ");
                        module.target_notes.push(note);
                    }
                    "attributes" => self.skip_statement(),
                    "module" => return Err(Self::unsupported_at(t.pos, "module-level inline asm")),
                    _ => return Err(self.malformed("module", "a top-level entity")),
                },
                TokenKind::Metadata => self.skip_statement(),
                TokenKind::GlobalIdent => {
                    let alias = self.parse_global()?;
                    if !names.insert(alias.name.clone()) {
                        return Err(ParseError::new(
                            ParseErrorKind::Malformed,
                            format!("redefinition of `@{}`", alias.name),
                            alias.pos,
                        ));
                    }
                    module.aliases.push(alias);
                }
                TokenKind::LocalIdent => {
                    return Err(Self::unsupported_at(
                        t.pos,
                        format!("named type `%{}`", t.text),
                    ));
                }
                _ => return Err(self.malformed("module", "a top-level entity")),
            }
        }
        Ok(module)
    }

    fn parse_declaration(&mut self) -> PResult<String> {
        self.expect_keyword("declare", "declaration")?;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::GlobalIdent {
                break;
            }
            self.i += 1;
        }
        let name = self
            .expect_kind(TokenKind::GlobalIdent, "declaration", "a function name")?
            .text
            .clone();
        let line = self.toks[self.i - 1].pos.line;
        if self.peek().is_some_and(|t| t.is_punct("(")) {
            self.skip_balanced_parens();
        }
        let close_line = self.toks[self.i - 1].pos.line.max(line);
        self.skip_trailing_on_line(close_line);
        Ok(name)
    }

    fn parse_global(&mut self) -> PResult<Alias> {
        let name_tok = self.expect_kind(TokenKind::GlobalIdent, "global", "a global name")?;
        self.expect_punct("=", "global")?;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword && LINKAGE_AND_VISIBILITY.contains(&t.text.as_str()) {
                self.i += 1;
            } else {
                break;
            }
        }
        let Some(kw) = self.peek() else {
            return Err(self.malformed("global", "`alias`"));
        };
        match kw.text.as_str() {
            "alias" if kw.kind == TokenKind::Keyword => {
                self.i += 1;
                while let Some(t) = self.peek() {
                    if t.kind == TokenKind::GlobalIdent {
                        break;
                    }
                    if t.kind == TokenKind::Keyword && t.text == "define" {
                        break;
                    }
                    self.i += 1;
                }
                let target = self.expect_kind(TokenKind::GlobalIdent, "alias", "an aliasee")?;
                Ok(Alias {
                    name: name_tok.text.clone(),
                    target: target.text.clone(),
                    pos: name_tok.pos,
                })
            }
            "global" | "constant" => Err(Self::unsupported_at(
                name_tok.pos,
                format!("global variable `@{}`", name_tok.text),
            )),
            "ifunc" => Err(Self::unsupported_at(name_tok.pos, "ifunc")),
            _ => Err(self.malformed("global", "`alias`")),
        }
    }

    fn parse_function(&mut self) -> PResult<LlvmFunction> {
        let pos = self.here();
        self.expect_keyword("define", "function definition")?;
        // Linkage, visibility, calling convention, return attributes.
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Type || t.is_punct("[") {
                break;
            }
            if t.kind != TokenKind::Keyword && t.kind != TokenKind::AttrGroup {
                return Err(self.malformed("function definition", "a return type"));
            }
            self.skip_attributes();
            if self
                .peek()
                .is_some_and(|n| n.kind == TokenKind::Keyword && n.text == "x")
            {
                break;
            }
        }
        let ret_pos = self.here();
        let ret_src = self.parse_src_type("function definition")?;
        let ret = match ret_src {
            SrcTy::Void => None,
            ref t => Some(Self::value_ty(t, ret_pos)?),
        };
        let name = self
            .expect_kind(
                TokenKind::GlobalIdent,
                "function definition",
                "a function name",
            )?
            .text
            .clone();
        self.expect_punct("(", "parameter list")?;
        let mut next_unnamed: u64 = 0;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                if self.peek().is_some_and(|t| t.is_punct("...")) {
                    return Err(Self::unsupported_at(self.here(), "variadic functions"));
                }
                let ty = self.parse_value_ty("parameter list")?;
                self.skip_attributes();
                let pname = match self.peek() {
                    Some(t) if t.kind == TokenKind::LocalIdent => {
                        self.i += 1;
                        t.text.clone()
                    }
                    _ => {
                        let n = next_unnamed.to_string();
                        next_unnamed += 1;
                        n
                    }
                };
                if let Ok(n) = pname.parse::<u64>() {
                    next_unnamed = n + 1;
                }
                params.push(Param { name: pname, ty });
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",", "parameter list")?;
            }
        }
        // Function attributes, sections, personality, metadata.
        while let Some(t) = self.peek() {
            if t.is_punct("{") {
                break;
            }
            self.i += 1;
        }
        self.expect_punct("{", "function body")?;
        let blocks = self.parse_blocks(&mut next_unnamed)?;
        self.expect_punct("}", "function body")?;
        let f = LlvmFunction {
            name,
            ret,
            params,
            blocks,
            pos,
        };
        check_function(&f)?;
        Ok(f)
    }

    fn parse_blocks(&mut self, next_unnamed: &mut u64) -> PResult<Vec<BasicBlock>> {
        let mut blocks = Vec::new();
        loop {
            let Some(t) = self.peek() else {
                return Err(self.malformed("function body", "`}`"));
            };
            if t.is_punct("}") {
                if blocks.is_empty() {
                    return Err(self.malformed("function body", "at least one basic block"));
                }
                return Ok(blocks);
            }
            let pos = t.pos;
            let label = if t.kind == TokenKind::Label {
                self.i += 1;
                if let Ok(n) = t.text.parse::<u64>() {
                    *next_unnamed = n + 1;
                }
                t.text.clone()
            } else {
                let n = *next_unnamed;
                *next_unnamed += 1;
                n.to_string()
            };
            blocks.push(self.parse_block(label, pos, next_unnamed)?);
        }
    }

    fn parse_block(
        &mut self,
        label: String,
        pos: Pos,
        next_unnamed: &mut u64,
    ) -> PResult<BasicBlock> {
        let mut phis = Vec::new();
        let mut body = Vec::new();
        loop {
            let Some(t) = self.peek() else {
                return Err(self.malformed("basic block", "an instruction"));
            };
            if t.kind == TokenKind::Label || t.is_punct("}") {
                return Err(self.malformed("basic block", "a terminator (`br` or `ret`)"));
            }
            let inst_pos = t.pos;
            let result = if t.kind == TokenKind::LocalIdent {
                self.i += 1;
                self.expect_punct("=", "instruction")?;
                if let Ok(n) = t.text.parse::<u64>() {
                    *next_unnamed = n + 1;
                }
                Some(t.text.clone())
            } else {
                None
            };
            let opcode_tok = self.expect_kind(TokenKind::Keyword, "instruction", "an opcode")?;
            let opcode = opcode_tok.text.as_str();
            match opcode {
                "br" | "ret" => {
                    if result.is_some() {
                        return Err(ParseError::new(
                            ParseErrorKind::Malformed,
                            format!("`{opcode}` does not produce a value"),
                            inst_pos,
                        ));
                    }
                    let terminator = if opcode == "br" {
                        self.parse_br()?
                    } else {
                        self.parse_ret()?
                    };
                    self.skip_attachments("terminator")?;
                    return Ok(BasicBlock {
                        label,
                        phis,
                        body,
                        terminator,
                        term_pos: inst_pos,
                        pos,
                    });
                }
                "phi" => {
                    let Some(result) = result else {
                        return Err(ParseError::new(
                            ParseErrorKind::Malformed,
                            "phi without a result",
                            inst_pos,
                        ));
                    };
                    if !body.is_empty() {
                        return Err(ParseError::new(
                            ParseErrorKind::Malformed,
                            "phi after a non-phi instruction",
                            inst_pos,
                        ));
                    }
                    let phi = self.parse_phi(result, inst_pos)?;
                    self.skip_attachments("phi")?;
                    phis.push(phi);
                }
                "switch" | "indirectbr" | "invoke" | "callbr" | "resume" | "unreachable"
                | "catchswitch" | "catchret" | "cleanupret" => {
                    return Err(Self::unsupported_at(
                        inst_pos,
                        format!("terminator `{opcode}`"),
                    ));
                }
                _ => {
                    let op = self.parse_op(opcode, inst_pos, opcode_tok.pos.line)?;
                    match (&result, op.result_ty()) {
                        (Some(_), None) => {
                            return Err(ParseError::new(
                                ParseErrorKind::Malformed,
                                format!("`{opcode}` does not produce a value"),
                                inst_pos,
                            ))
                        }
                        (None, Some(_)) if !matches!(op, Op::Call { .. }) => {
                            return Err(ParseError::new(
                                ParseErrorKind::Malformed,
                                format!("result of `{opcode}` must be named"),
                                inst_pos,
                            ))
                        }
                        _ => {}
                    }
                    self.skip_attachments(opcode)?;
                    body.push(Instruction {
                        result,
                        op,
                        pos: inst_pos,
                    });
                }
            }
        }
    }

    /// `, align N` and `, !kind !N` trailing an instruction.
    fn skip_attachments(&mut self, production: &str) -> PResult<()> {
        while self.peek().is_some_and(|t| t.is_punct(",")) {
            match self.peek_at(1) {
                Some(n) if n.is_keyword("align") => {
                    self.i += 2;
                    self.expect_kind(TokenKind::IntLit, production, "an alignment")?;
                }
                Some(n) if n.kind == TokenKind::Metadata => {
                    self.i += 2;
                    match self.peek() {
                        Some(v) if v.kind == TokenKind::Metadata => {
                            self.i += 1;
                            if self.peek().is_some_and(|t| t.is_punct("{")) {
                                self.skip_braces();
                            }
                        }
                        _ => return Err(self.malformed(production, "a metadata node")),
                    }
                }
                _ => {
                    self.i += 1;
                    return Err(self.malformed(production, "end of instruction"));
                }
            }
        }
        Ok(())
    }

    fn skip_braces(&mut self) {
        let mut depth = 0;
        while let Some(t) = self.bump() {
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
                if depth == 0 {
                    return;
                }
            }
        }
    }

    fn parse_br(&mut self) -> PResult<Terminator> {
        match self.peek() {
            Some(t) if t.is(TokenKind::Type, "label") => {
                let target = self.parse_label_ref("br")?;
                Ok(Terminator::Br(target))
            }
            _ => {
                let ty = self.parse_value_ty("br")?;
                if ty != Ty::Int(1) {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        "branch condition must be i1",
                        self.toks[self.i - 1].pos,
                    ));
                }
                let cond = self.parse_operand(ty, "br")?;
                self.expect_punct(",", "br")?;
                let on_true = self.parse_label_ref("br")?;
                self.expect_punct(",", "br")?;
                let on_false = self.parse_label_ref("br")?;
                Ok(Terminator::CondBr {
                    cond,
                    on_true,
                    on_false,
                })
            }
        }
    }

    fn parse_ret(&mut self) -> PResult<Terminator> {
        if self.peek().is_some_and(|t| t.is(TokenKind::Type, "void")) {
            self.i += 1;
            return Ok(Terminator::Ret(None));
        }
        let (ty, v) = self.parse_typed_operand("ret")?;
        Ok(Terminator::Ret(Some((ty, v))))
    }

    fn parse_phi(&mut self, result: String, pos: Pos) -> PResult<Phi> {
        let ty = self.parse_value_ty("phi")?;
        let mut incoming = Vec::new();
        loop {
            self.expect_punct("[", "phi")?;
            let v = self.parse_operand(ty, "phi")?;
            self.expect_punct(",", "phi")?;
            let label = self
                .expect_kind(TokenKind::LocalIdent, "phi", "a predecessor label")?
                .text
                .clone();
            self.expect_punct("]", "phi")?;
            incoming.push((v, label));
            let more = self.peek().is_some_and(|t| t.is_punct(","))
                && self.peek_at(1).is_some_and(|t| t.is_punct("["));
            if !more {
                break;
            }
            self.i += 1;
        }
        Ok(Phi {
            result,
            ty,
            incoming,
            pos,
        })
    }

    fn skip_flags(&mut self, flags: &[&str]) {
        while self
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && flags.contains(&t.text.as_str()))
        {
            self.i += 1;
        }
    }

    fn parse_op(&mut self, opcode: &str, pos: Pos, line: u32) -> PResult<Op> {
        if let Some(op) = BinOp::from_mnemonic(opcode) {
            self.skip_flags(&["nuw", "nsw", "exact", "disjoint"]);
            let ty = self.parse_value_ty(opcode)?;
            if ty == Ty::Addr {
                return Err(ParseError::new(
                    ParseErrorKind::Malformed,
                    format!("`{opcode}` on an address"),
                    pos,
                ));
            }
            let lhs = self.parse_operand(ty, opcode)?;
            self.expect_punct(",", opcode)?;
            let rhs = self.parse_operand(ty, opcode)?;
            return Ok(Op::Bin { op, ty, lhs, rhs });
        }
        match opcode {
            "icmp" => {
                self.skip_flags(&["samesign"]);
                let pred_tok = self.expect_kind(TokenKind::Keyword, "icmp", "a predicate")?;
                let pred = IcmpPred::from_mnemonic(&pred_tok.text).ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::Malformed,
                        format!("unknown icmp predicate `{}`", pred_tok.text),
                        pred_tok.pos,
                    )
                })?;
                let ty = self.parse_value_ty("icmp")?;
                let lhs = self.parse_operand(ty, "icmp")?;
                self.expect_punct(",", "icmp")?;
                let rhs = self.parse_operand(ty, "icmp")?;
                Ok(Op::Icmp { pred, ty, lhs, rhs })
            }
            "zext" | "sext" | "trunc" => {
                self.skip_flags(&["nneg", "nuw", "nsw"]);
                let (from, value) = self.parse_typed_operand(opcode)?;
                self.expect_keyword("to", opcode)?;
                let to = self.parse_value_ty(opcode)?;
                let (op, ok) = match opcode {
                    "zext" => (CastOp::Zext, from.bits() < to.bits()),
                    "sext" => (CastOp::Sext, from.bits() < to.bits()),
                    _ => (CastOp::Trunc, from.bits() > to.bits()),
                };
                if from == Ty::Addr || to == Ty::Addr {
                    return Err(Self::unsupported_at(
                        pos,
                        format!("`{opcode}` on addresses"),
                    ));
                }
                if !ok {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        format!("invalid `{opcode}` from {from} to {to}"),
                        pos,
                    ));
                }
                Ok(Op::Cast {
                    op,
                    from,
                    to,
                    value,
                })
            }
            "select" => {
                let (cty, cond) = self.parse_typed_operand("select")?;
                if cty != Ty::Int(1) {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        "select condition must be i1",
                        pos,
                    ));
                }
                self.expect_punct(",", "select")?;
                let (ty, on_true) = self.parse_typed_operand("select")?;
                self.expect_punct(",", "select")?;
                let (ty2, on_false) = self.parse_typed_operand("select")?;
                if ty != ty2 {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        "select arms differ in type",
                        pos,
                    ));
                }
                Ok(Op::Select {
                    cond,
                    ty,
                    on_true,
                    on_false,
                })
            }
            "getelementptr" => self.parse_gep(pos),
            "load" => {
                if self.peek().is_some_and(|t| t.is_keyword("atomic")) {
                    return Err(Self::unsupported_at(pos, "atomic load"));
                }
                self.skip_flags(&["volatile"]);
                let ty_pos = self.here();
                let first = self.parse_src_type("load")?;
                let ty = if self.eat_punct(",") {
                    // load <ty>, <ptr-ty> <ptr>
                    let pty = self.parse_value_ty("load")?;
                    if pty != Ty::Addr {
                        return Err(ParseError::new(
                            ParseErrorKind::Malformed,
                            "load address must be a pointer",
                            pos,
                        ));
                    }
                    Self::value_ty(&first, ty_pos)?
                } else {
                    match &first {
                        SrcTy::Ptr(Some(pointee)) => Self::value_ty(pointee, ty_pos)?,
                        _ => return Err(self.malformed("load", "`,` after the loaded type")),
                    }
                };
                if ty.store_bytes().is_none() {
                    return Err(Self::unsupported_at(pos, format!("load of {ty}")));
                }
                let addr = self.parse_operand(Ty::Addr, "load")?;
                Ok(Op::Load { ty, addr })
            }
            "store" => {
                if self.peek().is_some_and(|t| t.is_keyword("atomic")) {
                    return Err(Self::unsupported_at(pos, "atomic store"));
                }
                self.skip_flags(&["volatile"]);
                let (ty, value) = self.parse_typed_operand("store")?;
                if ty.store_bytes().is_none() {
                    return Err(Self::unsupported_at(pos, format!("store of {ty}")));
                }
                self.expect_punct(",", "store")?;
                let pty = self.parse_value_ty("store")?;
                if pty != Ty::Addr {
                    return Err(ParseError::new(
                        ParseErrorKind::Malformed,
                        "store address must be a pointer",
                        pos,
                    ));
                }
                let addr = self.parse_operand(Ty::Addr, "store")?;
                Ok(Op::Store { ty, value, addr })
            }
            "alloca" => {
                self.skip_flags(&["inalloca"]);
                let ty_pos = self.here();
                let ty = self.parse_src_type("alloca")?;
                let mut size = Self::size_of(&ty, ty_pos)?;
                if self.peek().is_some_and(|t| t.is_punct(","))
                    && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Type)
                {
                    self.i += 1;
                    let cty = self.parse_value_ty("alloca")?;
                    match self.parse_operand(cty, "alloca")? {
                        Operand::Const(n) => {
                            size = size
                                .checked_mul(n)
                                .ok_or_else(|| Self::unsupported_at(pos, "alloca too large"))?
                        }
                        Operand::Reg(_) => return Err(Self::unsupported_at(pos, "dynamic alloca")),
                    }
                }
                Ok(Op::Alloca { size })
            }
            "call" | "tail" | "musttail" | "notail" => {
                if opcode != "call" {
                    self.expect_keyword("call", "call")?;
                }
                self.parse_call(line)
            }
            "udiv" | "sdiv" | "urem" | "srem" | "fadd" | "fsub" | "fmul" | "fdiv" | "frem"
            | "fneg" | "fcmp" | "bitcast" | "ptrtoint" | "inttoptr" | "addrspacecast"
            | "fptrunc" | "fpext" | "fptoui" | "fptosi" | "uitofp" | "sitofp" | "extractvalue"
            | "insertvalue" | "extractelement" | "insertelement" | "shufflevector" | "va_arg"
            | "landingpad" | "cleanuppad" | "catchpad" | "freeze" | "fence" | "cmpxchg"
            | "atomicrmw" => Err(Self::unsupported_at(pos, format!("opcode `{opcode}`"))),
            _ => Err(ParseError::new(
                ParseErrorKind::Malformed,
                format!("in instruction: unknown opcode `{opcode}`"),
                pos,
            )),
        }
    }

    fn parse_gep(&mut self, pos: Pos) -> PResult<Op> {
        self.skip_flags(&["inbounds", "nuw", "nusw"]);
        let ty_pos = self.here();
        let first = self.parse_src_type("getelementptr")?;
        let elem = if self.eat_punct(",") {
            let pty = self.parse_value_ty("getelementptr")?;
            if pty != Ty::Addr {
                return Err(ParseError::new(
                    ParseErrorKind::Malformed,
                    "getelementptr base must be a pointer",
                    pos,
                ));
            }
            first
        } else {
            match first {
                SrcTy::Ptr(Some(pointee)) => *pointee,
                _ => return Err(self.malformed("getelementptr", "`,` after the element type")),
            }
        };
        let elem_size = Self::size_of(&elem, ty_pos)?;
        let base = self.parse_operand(Ty::Addr, "getelementptr")?;
        self.expect_punct(",", "getelementptr")?;
        let (index_ty, index) = self.parse_typed_operand("getelementptr")?;
        if index_ty == Ty::Addr {
            return Err(ParseError::new(
                ParseErrorKind::Malformed,
                "getelementptr index must be an integer",
                pos,
            ));
        }
        if self.peek().is_some_and(|t| t.is_punct(","))
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Type)
        {
            return Err(Self::unsupported_at(
                pos,
                "getelementptr with more than one index",
            ));
        }
        Ok(Op::Gep {
            base,
            index_ty,
            index,
            elem_size,
        })
    }

    fn parse_call(&mut self, line: u32) -> PResult<Op> {
        // Fast-math flags, calling convention, return attributes.
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Type || t.is_punct("[") {
                break;
            }
            if t.kind == TokenKind::Keyword && t.text == "asm" {
                return Err(Self::unsupported_at(t.pos, "inline asm"));
            }
            if t.kind != TokenKind::Keyword && t.kind != TokenKind::AttrGroup {
                return Err(self.malformed("call", "a return type"));
            }
            self.skip_attributes();
        }
        let ret_pos = self.here();
        let ret_src = self.parse_src_type("call")?;
        let ret = match ret_src {
            SrcTy::Void => None,
            ref t => Some(Self::value_ty(t, ret_pos)?),
        };
        // Explicit function type: `call i32 (i8*, ...) @f(...)`.
        if self.peek().is_some_and(|t| t.is_punct("(")) {
            self.skip_balanced_parens();
            self.eat_punct("*");
        }
        let callee = match self.peek() {
            Some(t) if t.kind == TokenKind::GlobalIdent => {
                self.i += 1;
                t.text.clone()
            }
            Some(t) if t.kind == TokenKind::LocalIdent => {
                return Err(Self::unsupported_at(t.pos, "indirect calls"));
            }
            _ => return Err(self.malformed("call", "a callee")),
        };
        self.expect_punct("(", "call")?;
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.parse_typed_operand("call")?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",", "call")?;
            }
        }
        let close_line = self.toks[self.i - 1].pos.line.max(line);
        self.skip_trailing_on_line(close_line);
        Ok(Op::Call { callee, ret, args })
    }
}

/// Single assignment, defined uses, and operand typing.
fn check_function(f: &LlvmFunction) -> PResult<()> {
    let malformed =
        |msg: String, pos: Pos| Err(ParseError::new(ParseErrorKind::Malformed, msg, pos));
    let mut types: BTreeMap<&str, Ty> = BTreeMap::new();
    for p in &f.params {
        if types.insert(&p.name, p.ty).is_some() {
            return malformed(format!("parameter `%{}` declared twice", p.name), f.pos);
        }
    }
    let mut labels = HashSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.as_str()) {
            return malformed(format!("block label `{}` defined twice", b.label), b.pos);
        }
        for phi in &b.phis {
            if types.insert(&phi.result, phi.ty).is_some() {
                return malformed(
                    format!("register `%{}` assigned more than once", phi.result),
                    phi.pos,
                );
            }
        }
        for inst in &b.body {
            if let (Some(r), Some(ty)) = (&inst.result, inst.op.result_ty()) {
                if types.insert(r, ty).is_some() {
                    return malformed(format!("register `%{r}` assigned more than once"), inst.pos);
                }
            }
        }
    }
    if let Some(clash) = types.keys().find(|r| labels.contains(*r)) {
        return malformed(
            format!("`%{clash}` names both a register and a block"),
            f.pos,
        );
    }
    let check = |op: &Operand, expected: Ty, pos: Pos| -> PResult<()> {
        if let Operand::Reg(r) = op {
            match types.get(r.as_str()) {
                None => {
                    return malformed(format!("use of undefined register `%{r}`"), pos);
                }
                Some(&actual) if actual != expected => {
                    return malformed(
                        format!("`%{r}` has type {actual}, expected {expected}"),
                        pos,
                    );
                }
                _ => {}
            }
        }
        Ok(())
    };
    for b in &f.blocks {
        for phi in &b.phis {
            for (v, label) in &phi.incoming {
                check(v, phi.ty, phi.pos)?;
                if !labels.contains(label.as_str()) {
                    return malformed(format!("phi names unknown block `%{label}`"), phi.pos);
                }
            }
        }
        for inst in &b.body {
            let p = inst.pos;
            match &inst.op {
                Op::Bin { ty, lhs, rhs, .. } | Op::Icmp { ty, lhs, rhs, .. } => {
                    check(lhs, *ty, p)?;
                    check(rhs, *ty, p)?;
                }
                Op::Cast { from, value, .. } => check(value, *from, p)?,
                Op::Select {
                    cond,
                    ty,
                    on_true,
                    on_false,
                } => {
                    check(cond, Ty::Int(1), p)?;
                    check(on_true, *ty, p)?;
                    check(on_false, *ty, p)?;
                }
                Op::Gep {
                    base,
                    index_ty,
                    index,
                    ..
                } => {
                    check(base, Ty::Addr, p)?;
                    check(index, *index_ty, p)?;
                }
                Op::Load { addr, .. } => check(addr, Ty::Addr, p)?,
                Op::Store { ty, value, addr } => {
                    check(value, *ty, p)?;
                    check(addr, Ty::Addr, p)?;
                }
                Op::Alloca { .. } => {}
                Op::Call { args, .. } => {
                    for (ty, a) in args {
                        check(a, *ty, p)?;
                    }
                }
            }
        }
        match &b.terminator {
            Terminator::CondBr {
                cond,
                on_true,
                on_false,
            } => {
                check(cond, Ty::Int(1), b.term_pos)?;
                for l in [on_true, on_false] {
                    if !labels.contains(l.as_str()) {
                        return malformed(format!("branch to undefined label `%{l}`"), b.term_pos);
                    }
                }
            }
            Terminator::Br(l) => {
                if !labels.contains(l.as_str()) {
                    return malformed(format!("branch to undefined label `%{l}`"), b.term_pos);
                }
            }
            Terminator::Ret(v) => match (v, f.ret) {
                (None, None) => {}
                (Some((ty, op)), Some(rt)) if *ty == rt => check(op, rt, b.term_pos)?,
                _ => {
                    return malformed(
                        format!(
                            "return does not match the declared return type of `@{}`",
                            f.name
                        ),
                        b.term_pos,
                    )
                }
            },
        }
    }
    Ok(())
}

/// Parse a token stream into a module. Aliases are recorded but not yet
/// resolved.
pub fn parse_module(tokens: &[Token]) -> Result<LlvmModule, ParseError> {
    Parser { toks: tokens, i: 0 }.parse_module()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ll::tokenize;

    fn parse(src: &str) -> Result<LlvmModule, ParseError> {
        parse_module(&tokenize(src)?)
    }

    const OCCURRENCES: &str = include_str!("../../fixtures/occurrences.ll");

    #[test]
    fn occurrences_fixture() {
        let m = parse(OCCURRENCES).unwrap();
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions[0];
        assert_eq!(f.name, "occurrences");
        assert_eq!(f.ret, Some(Ty::Int(64)));
        let labels: Vec<_> = f.blocks.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, ["0", ".lr.ph", "._crit_edge"]);
        assert_eq!(
            f.params
                .iter()
                .map(|p| (p.name.as_str(), p.ty))
                .collect::<Vec<_>>(),
            [
                ("val", Ty::Int(64)),
                ("n", Ty::Int(32)),
                ("array", Ty::Addr)
            ]
        );
        let loop_block = &f.blocks[1];
        assert_eq!(loop_block.phis.len(), 2);
        assert_eq!(loop_block.body.len(), 8);
        assert_eq!(
            loop_block.body[0].op,
            Op::Gep {
                base: Operand::Reg("array".into()),
                index_ty: Ty::Int(64),
                index: Operand::Reg("j".into()),
                elem_size: 8,
            }
        );
        assert_eq!(m.target_notes.len(), 2);
    }

    #[test]
    fn empty_module() {
        let m = parse("; nothing\ntarget triple = \"x86_64\"\n").unwrap();
        assert!(m.functions.is_empty());
        assert!(parse("").unwrap().functions.is_empty());
    }

    #[test]
    fn br_with_three_targets_is_rejected_at_the_extra_operand() {
        let src = include_str!("../../fixtures/malformed.ll");
        let err = parse(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Malformed);
        assert_eq!(err.pos, Pos::new(3, 33));
        assert!(err.message.contains("terminator"), "{}", err.message);
    }

    #[test]
    fn unsupported_is_distinct_from_malformed() {
        let err = parse(include_str!("../../fixtures/unsupported.ll")).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Unsupported);
        assert!(err.message.contains("udiv"));

        let err = parse("define i128 @f() {\n ret i128 0\n}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Unsupported);

        let err = parse("define i64 @f() {\n ret i64 \n}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Malformed);
    }

    #[test]
    fn negative_literals_are_normalised() {
        let m = parse("define i8 @f(i8 %a) {\n %b = add i8 %a, -1\n ret i8 %b\n}").unwrap();
        match &m.functions[0].blocks[0].body[0].op {
            Op::Bin { rhs, .. } => assert_eq!(*rhs, Operand::Const(255)),
            other => panic!("{other:?}"),
        }
        let err = parse("define i8 @f(i8 %a) {\n %b = add i8 %a, 256\n ret i8 %b\n}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Malformed);
    }

    #[test]
    fn single_assignment_is_enforced() {
        let err = parse(
            "define i64 @f(i64 %a) {\n %b = add i64 %a, 1\n %b = add i64 %a, 2\n ret i64 %b\n}",
        )
        .unwrap_err();
        assert!(err.message.contains("more than once"));
        assert_eq!(err.pos.line, 3);
    }

    #[test]
    fn operand_widths_must_agree() {
        let err =
            parse("define i64 @f(i32 %a) {\n %b = add i64 %a, 1\n ret i64 %b\n}").unwrap_err();
        assert!(err.message.contains("expected i64"), "{}", err.message);
    }

    #[test]
    fn phi_after_body_is_rejected() {
        let src =
            "define i64 @f(i64 %a) {\n%b = add i64 %a, 1\n%c = phi i64 [ 0, %0 ]\nret i64 %c\n}";
        let err = parse(src).unwrap_err();
        assert!(err.message.contains("phi after"));
    }

    #[test]
    fn opaque_and_typed_pointers_agree() {
        let typed =
            parse("define i32 @f(i32* %p) {\n %v = load i32* %p, align 4\n ret i32 %v\n}").unwrap();
        let opaque =
            parse("define i32 @f(ptr %p) {\n %v = load i32, ptr %p, align 4\n ret i32 %v\n}")
                .unwrap();
        assert_eq!(typed.without_positions(), opaque.without_positions());
    }

    #[test]
    fn calls_with_attributes() {
        let src = "define i64 @g(i64 %x) {\n ret i64 %x\n}\n\
                   define i64 @f(i64 %x) #0 {\nentry:\n  %r = tail call noundef i64 @g(i64 noundef %x) #1\n  ret i64 %r\n}\n\
                   attributes #0 = { nounwind }\n";
        let m = parse(src).unwrap();
        assert_eq!(
            m.functions[1].blocks[0].body[0].op,
            Op::Call {
                callee: "g".into(),
                ret: Some(Ty::Int(64)),
                args: vec![(Ty::Int(64), Operand::Reg("x".into()))],
            }
        );
    }

    #[test]
    fn alloca_sizes() {
        let m = parse(
            "define void @f() {\n %a = alloca i64, align 8\n %b = alloca [3 x i32], align 4\n %c = alloca i16, i32 5\n ret void\n}",
        )
        .unwrap();
        let sizes: Vec<u64> = m.functions[0].blocks[0]
            .body
            .iter()
            .map(|i| match i.op {
                Op::Alloca { size } => size,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(sizes, [8, 12, 10]);
    }

    #[test]
    fn implicit_block_numbering() {
        let src =
            "define i32 @f(i32) {\n  %2 = icmp eq i32 %0, 0\n  br i1 %2, label %3, label %4\n\n\
                   3:\n  ret i32 1\n\n4:\n  ret i32 %0\n}";
        let m = parse(src).unwrap();
        let labels: Vec<_> = m.functions[0]
            .blocks
            .iter()
            .map(|b| b.label.as_str())
            .collect();
        assert_eq!(labels, ["1", "3", "4"]);
        assert_eq!(m.functions[0].params[0].name, "0");
    }

    #[test]
    fn globals_are_unsupported() {
        let err = parse("@g = global i64 0\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Unsupported);
    }
}
