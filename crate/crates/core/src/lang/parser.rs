use num_rational::Ratio;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::value::{ValueType, MAX_TUPLE_ARITY};

pub(crate) struct Parser<'s> {
    src: &'s str,
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'s> Parser<'s> {
    pub(crate) fn new(src: &'s str) -> PResult<Self> {
        Ok(Parser { src, toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError::syntax(
            self.src,
            self.span().start,
            expected.iter().map(|s| s.to_string()).collect(),
            &self.peek().describe(),
        ))
    }

    fn error_at<T>(&self, span: Span, expected: &str, found: &str) -> PResult<T> {
        Err(ParseError::syntax(self.src, span.start, vec![expected.to_string()], found))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.peek() == &tok {
            Ok(self.bump().span)
        } else {
            self.error(&[&format!("`{}`", tok.text())])
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident::new(name, span))
            }
            _ => self.error(&["identifier"]),
        }
    }

    /// Expects the identifier `word` (used for named arguments and units).
    fn keyword(&mut self, word: &str) -> PResult<Span> {
        match self.peek() {
            Tok::Ident(w) if w == word => Ok(self.bump().span),
            _ => self.error(&[&format!("`{word}`")]),
        }
    }

    pub(crate) fn parse_spec(&mut self) -> PResult<Spec> {
        let mut spec = Spec::default();
        loop {
            match self.peek() {
                Tok::Input => spec.inputs.extend(self.input_decl()?),
                Tok::Output => spec.outputs.push(self.output_decl()?),
                Tok::Trigger => spec.triggers.push(self.trigger_decl()?),
                Tok::Eof => break,
                _ => return self.error(&["`input`", "`output`", "`trigger`"]),
            }
        }
        Ok(spec)
    }

    fn input_decl(&mut self) -> PResult<Vec<InputDecl>> {
        let kw = self.expect(Tok::Input)?;
        let mut decls = Vec::new();
        loop {
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let value_type = self.value_type()?;
            let start = if decls.is_empty() { kw } else { name.span };
            decls.push(InputDecl { span: start.to(self.prev_span()), name, value_type });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(decls)
    }

    fn value_type(&mut self) -> PResult<ValueType> {
        if self.peek() == &Tok::LParen {
            let open = self.bump().span;
            let mut n = 0usize;
            loop {
                match self.peek() {
                    Tok::Ident(t) if is_float_type(t) => {
                        self.bump();
                        n += 1;
                    }
                    _ => return self.error(&["`Float64`"]),
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
            if !(2..=MAX_TUPLE_ARITY).contains(&n) {
                return self.error_at(open, "tuple of 2 to 4 Float64", &format!("tuple of arity {n}"));
            }
            return Ok(ValueType::Tuple(n as u8));
        }
        match self.peek() {
            Tok::Ident(t) if is_float_type(t) => {
                self.bump();
                Ok(ValueType::Float)
            }
            Tok::Ident(t) if t == "Bool" => {
                self.bump();
                Ok(ValueType::Bool)
            }
            _ => self.error(&["`Float64`", "`Bool`", "tuple type"]),
        }
    }

    fn output_decl(&mut self) -> PResult<OutputDecl> {
        let kw = self.expect(Tok::Output)?;
        let name = self.ident()?;
        let value_type = if self.eat(&Tok::Colon) { Some(self.value_type()?) } else { None };
        let pacing = if self.peek() == &Tok::At { Some(self.pacing()?) } else { None };
        let filter = if self.eat(&Tok::Filter) { Some(self.expr()?) } else { None };
        if self.peek() != &Tok::Assign {
            let mut exp = vec!["`:=`"];
            if value_type.is_none() && pacing.is_none() && filter.is_none() {
                exp.push("`:`");
            }
            if pacing.is_none() && filter.is_none() {
                exp.push("`@`");
            }
            if filter.is_none() {
                exp.push("`filter`");
            }
            return self.error(&exp);
        }
        self.bump();
        let expr = self.expr()?;
        Ok(OutputDecl { span: kw.to(expr.span), name, value_type, pacing, filter, expr })
    }

    fn trigger_decl(&mut self) -> PResult<TriggerDecl> {
        let kw = self.expect(Tok::Trigger)?;
        let pacing = if self.peek() == &Tok::At { Some(self.pacing()?) } else { None };
        let condition = self.expr()?;
        let message = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Some(s)
            }
            _ => None,
        };
        Ok(TriggerDecl { span: kw.to(self.prev_span()), pacing, condition, message })
    }

    fn pacing(&mut self) -> PResult<PacingAnnotation> {
        let at = self.expect(Tok::At)?;
        if let Tok::Number(text) = self.peek().clone() {
            let num_span = self.bump().span;
            let mut hz = parse_rational(&text)
                .ok_or_else(|| ParseError::syntax(self.src, num_span.start, vec!["frequency".into()], &text))?;
            match self.peek() {
                Tok::Ident(u) if u == "Hz" => {}
                Tok::Ident(u) if u == "kHz" => hz *= Ratio::from_integer(1000),
                _ => return self.error(&["`Hz`"]),
            }
            self.bump();
            if *hz.numer() == 0 {
                return self.error_at(num_span, "positive frequency", &text);
            }
            return Ok(PacingAnnotation { kind: PacingAnnotationKind::Periodic(hz), span: at.to(self.prev_span()) });
        }
        let e = self.pacing_or()?;
        Ok(PacingAnnotation { kind: PacingAnnotationKind::Event(e), span: at.to(self.prev_span()) })
    }

    fn pacing_or(&mut self) -> PResult<PacingExpr> {
        let mut lhs = self.pacing_and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.pacing_and()?;
            lhs = PacingExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pacing_and(&mut self) -> PResult<PacingExpr> {
        let mut lhs = self.pacing_atom()?;
        while self.eat(&Tok::And) {
            let rhs = self.pacing_atom()?;
            lhs = PacingExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pacing_atom(&mut self) -> PResult<PacingExpr> {
        if self.eat(&Tok::LParen) {
            let e = self.pacing_or()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        match self.peek() {
            Tok::Ident(_) => Ok(PacingExpr::Stream(self.ident()?)),
            _ => self.error(&["stream name", "frequency", "`(`"]),
        }
    }

    pub(crate) fn parse_standalone_expr(&mut self) -> PResult<Expr> {
        let e = self.expr()?;
        if self.peek() != &Tok::Eof {
            return self.error(&["end of expression"]);
        }
        Ok(e)
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and_expr()?;
            lhs = binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(&Tok::And) {
            let rhs = self.cmp_expr()?;
            lhs = binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Not => UnOp::Not,
            _ => return self.pow_expr(),
        };
        let start = self.bump().span;
        let inner = self.unary_expr()?;
        Ok(Expr::new(ExprKind::Unary(op, Box::new(inner.clone())), start.to(inner.span)))
    }

    fn pow_expr(&mut self) -> PResult<Expr> {
        let base = self.postfix_expr()?;
        if self.eat(&Tok::Pow) {
            let exp = self.unary_expr()?;
            return Ok(binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.peek() == &Tok::Dot {
            self.bump();
            match self.peek().clone() {
                Tok::Number(n) => {
                    let sp = self.bump().span;
                    let idx: usize = match n.parse() {
                        Ok(i) if i < MAX_TUPLE_ARITY => i,
                        _ => return self.error_at(sp, "tuple index 0..3", &format!("`{n}`")),
                    };
                    let span = e.span.to(sp);
                    e = Expr::new(ExprKind::Project(Box::new(e), idx as u8), span);
                }
                Tok::Ident(m) if matches!(m.as_str(), "hold" | "offset" | "aggregate") => {
                    let msp = self.span();
                    let Some(target) = stream_path(&e) else {
                        return self.error_at(msp, "stream access before method", &format!("`.{m}`"));
                    };
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let kind = match m.as_str() {
                        "hold" => {
                            self.expect(Tok::Or)?;
                            self.expect(Tok::Colon)?;
                            let d = self.expr()?;
                            ExprKind::Hold { target, default: Box::new(d) }
                        }
                        "offset" => self.offset_args(target)?,
                        _ => self.aggregate_args(target)?,
                    };
                    let close = self.expect(Tok::RParen)?;
                    e = Expr::new(kind, e.span.to(close));
                }
                _ => return self.error(&["tuple index", "`hold`", "`offset`", "`aggregate`"]),
            }
        }
        Ok(e)
    }

    fn offset_args(&mut self, target: StreamPath) -> PResult<ExprKind> {
        let mut by = None;
        let mut default = None;
        loop {
            match self.peek() {
                Tok::Ident(w) if w == "by" && by.is_none() => {
                    self.bump();
                    self.expect(Tok::Colon)?;
                    let neg = self.span();
                    if !self.eat(&Tok::Minus) {
                        return self.error(&["negative integer offset"]);
                    }
                    let Tok::Number(n) = self.peek().clone() else {
                        return self.error(&["integer"]);
                    };
                    match n.parse::<u32>() {
                        Ok(k) if k > 0 => {
                            self.bump();
                            by = Some(k);
                        }
                        _ => return self.error_at(neg, "negative integer offset", &format!("`-{n}`")),
                    }
                }
                Tok::Or if default.is_none() => {
                    self.bump();
                    self.expect(Tok::Colon)?;
                    default = Some(self.expr()?);
                }
                _ => return self.error(&["`by:`", "`or:`"]),
            }
            if by.is_some() && default.is_some() {
                break;
            }
            self.expect(Tok::Comma)?;
        }
        let (Some(by), Some(default)) = (by, default) else { unreachable!() };
        Ok(ExprKind::Offset { target, by, default: Box::new(default) })
    }

    fn aggregate_args(&mut self, target: StreamPath) -> PResult<ExprKind> {
        self.keyword("over")?;
        self.expect(Tok::Colon)?;
        let over = self.duration()?;
        self.expect(Tok::Comma)?;
        self.keyword("using")?;
        self.expect(Tok::Colon)?;
        let fsp = self.span();
        let name = match self.peek().clone() {
            Tok::Ident(n) => n,
            _ => return self.error(&["aggregation function"]),
        };
        let Some(using) = AggrFn::from_name(&name) else {
            return self.error_at(fsp, "one of min, max, sum, avg, count", &format!("`{name}`"));
        };
        self.bump();
        Ok(ExprKind::Aggregate { target, over, using })
    }

    fn duration(&mut self) -> PResult<Rational> {
        let sp = self.span();
        let Tok::Number(text) = self.peek().clone() else {
            return self.error(&["duration"]);
        };
        self.bump();
        let Some(mut d) = parse_rational(&text) else {
            return self.error_at(sp, "duration", &text);
        };
        if let Tok::Ident(unit) = self.peek().clone() {
            let scale = match unit.as_str() {
                "s" => Some(Ratio::from_integer(1)),
                "ms" => Some(Ratio::new(1, 1000)),
                "us" => Some(Ratio::new(1, 1_000_000)),
                "min" => Some(Ratio::from_integer(60)),
                "h" => Some(Ratio::from_integer(3600)),
                _ => None,
            };
            if let Some(scale) = scale {
                self.bump();
                d *= scale;
            }
        }
        if *d.numer() == 0 {
            return self.error_at(sp, "positive duration", &text);
        }
        Ok(d)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let sp = self.span();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                match n.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Expr::new(ExprKind::Float(v), sp)),
                    _ => self.error_at(sp, "finite number", &n),
                }
            }
            Tok::True => {
                self.bump();
                Ok(Expr::new(ExprKind::Bool(true), sp))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::new(ExprKind::Bool(false), sp))
            }
            Tok::Delta => {
                self.bump();
                self.expect(Tok::LParen)?;
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen)?;
                if let Some(bad) = delta_operand_violation(&inner) {
                    return self.error_at(
                        bad,
                        "delta operand without hold, aggregate or now()",
                        "non-shiftable access",
                    );
                }
                Ok(Expr::new(ExprKind::Delta(Box::new(inner)), sp.to(close)))
            }
            Tok::If => {
                self.bump();
                let c = self.expr()?;
                self.expect(Tok::Then)?;
                let t = self.expr()?;
                self.expect(Tok::Else)?;
                let e = self.expr()?;
                let span = sp.to(e.span);
                Ok(Expr::new(ExprKind::Ite(Box::new(c), Box::new(t), Box::new(e)), span))
            }
            Tok::LParen => {
                self.bump();
                let first = self.expr()?;
                if self.eat(&Tok::RParen) {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat(&Tok::Comma) {
                    items.push(self.expr()?);
                }
                let close = self.expect(Tok::RParen)?;
                if items.len() > MAX_TUPLE_ARITY {
                    return self.error_at(sp, "tuple of 2 to 4 values", &format!("tuple of arity {}", items.len()));
                }
                Ok(Expr::new(ExprKind::Tuple(items), sp.to(close)))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek() == &Tok::LParen {
                    if name == "now" {
                        self.bump();
                        let close = self.expect(Tok::RParen)?;
                        return Ok(Expr::new(ExprKind::Now, sp.to(close)));
                    }
                    if let Some(b) = Builtin::from_name(&name) {
                        self.bump();
                        let mut args = vec![self.expr()?];
                        while self.eat(&Tok::Comma) {
                            args.push(self.expr()?);
                        }
                        let close = self.expect(Tok::RParen)?;
                        if args.len() != b.arity() {
                            return self.error_at(
                                sp,
                                &format!("{} argument(s) to {}", b.arity(), b.name()),
                                &format!("{} argument(s)", args.len()),
                            );
                        }
                        return Ok(Expr::new(ExprKind::Call(b, args), sp.to(close)));
                    }
                    return self.error_at(sp, "function name", &format!("`{name}`"));
                }
                Ok(Expr::new(ExprKind::Stream(Ident::new(name, sp)), sp))
            }
            _ => self.error(&["expression"]),
        }
    }
}

fn is_float_type(t: &str) -> bool {
    matches!(t, "Float64" | "Float")
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.to(rhs.span);
    Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span)
}

fn stream_path(e: &Expr) -> Option<StreamPath> {
    match &e.kind {
        ExprKind::Stream(id) => Some(StreamPath { stream: id.clone(), path: vec![] }),
        ExprKind::Project(inner, k) => {
            let mut p = stream_path(inner)?;
            p.path.push(*k);
            Some(p)
        }
        _ => None,
    }
}

/// The delta rewrite shifts every access one step into the past, which is only
/// defined for synchronous and offset accesses.
fn delta_operand_violation(e: &Expr) -> Option<Span> {
    let mut bad = None;
    e.walk(&mut |x| {
        if bad.is_none() && matches!(x.kind, ExprKind::Hold { .. } | ExprKind::Aggregate { .. } | ExprKind::Now) {
            bad = Some(x.span);
        }
    });
    bad
}

/// Exact decimal parse: `12.5` is 25/2, `2e-3` is 1/500.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int}{frac}");
    let mut numer: u64 = digits.parse().ok()?;
    let mut denom: u64 = 10u64.checked_pow(frac.len() as u32)?;
    if exp >= 0 {
        numer = numer.checked_mul(10u64.checked_pow(exp as u32)?)?;
    } else {
        denom = denom.checked_mul(10u64.checked_pow((-exp) as u32)?)?;
    }
    Some(Ratio::new(numer, denom))
}
