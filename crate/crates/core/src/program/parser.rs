//! Recursive-descent parser for `.psl` programs.
//!
//! ```text
//! program   := item*
//! item      := decl | rule | exclusive
//! decl      := ("open" | "closed") IDENT ("/" NUMBER | "(" type ("," type)* ")") "."
//! rule      := weight ":" literals ("=>" literals)? "."
//! weight    := "-"? NUMBER | "HARD"
//! exclusive := "EXCLUSIVE" ":" IDENT "(" (VAR | "*") ("," (VAR | "*"))* ")" "."
//! literals  := literal (("&" | "|") literal)*      -- one connective per side
//! literal   := "~" literal
//!            | "fn" "[" IDENT "]" "(" term "," term ")"
//!            | "setsim" "[" IDENT "]" "(" set "," set ")"
//!            | IDENT "(" term ("," term)* ")"
//!            | term "!=" term
//! set       := "{" VAR ("." IDENT)+ "}" ("++" set)?
//! ```

use super::ast::*;
use super::lexer::{tokenize, Spanned, Token};
use super::ParseError;

pub(crate) fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    Parser { source, tokens, pos: 0 }.program()
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Spanned>,
    pos: usize,
}

enum Connective {
    And,
    Or,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    fn advance(&mut self) -> Spanned {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error_here(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        let tok = &self.tokens[self.pos];
        ParseError {
            line: tok.line,
            column: tok.column,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        self.error_here(format!("unexpected {}", self.peek()), expected)
    }

    fn expect(&mut self, token: Token) -> Result<Spanned, ParseError> {
        if *self.peek() == token {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[token.symbol()]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn variable(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) if is_variable(&name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(&["variable"])),
        }
    }

    fn program(mut self) -> Result<Program, ParseError> {
        let mut program = Program::default();
        while *self.peek() != Token::Eof {
            let start = self.tokens[self.pos].start;
            match self.peek().clone() {
                Token::Ident(word) if word == "open" || word == "closed" => {
                    program.schema.push(self.declaration(word == "closed")?);
                }
                Token::Ident(word) if word == "EXCLUSIVE" => {
                    program.exclusivity.push(self.exclusive()?);
                }
                Token::Ident(word) if word == "HARD" => {
                    self.advance();
                    program.rules.push(self.rule(RuleWeight::Hard, start)?);
                }
                Token::Number(_) | Token::Minus => {
                    let weight = self.weight()?;
                    program.rules.push(self.rule(RuleWeight::Soft(weight), start)?);
                }
                _ => {
                    return Err(self.unexpected(&[
                        "open",
                        "closed",
                        "EXCLUSIVE",
                        "HARD",
                        "weight",
                    ]))
                }
            }
        }
        Ok(program)
    }

    fn declaration(&mut self, closed: bool) -> Result<PredicateDecl, ParseError> {
        self.advance();
        let name = self.ident("predicate name")?;
        let arg_types = match self.peek() {
            Token::Slash => {
                self.advance();
                let arity = match self.peek().clone() {
                    Token::Number(n) => n
                        .parse::<usize>()
                        .map_err(|_| self.error_here("arity must be a positive integer", &[]))?,
                    _ => return Err(self.unexpected(&["arity"])),
                };
                if arity == 0 {
                    return Err(self.error_here("arity must be at least 1", &[]));
                }
                self.advance();
                vec![None; arity]
            }
            Token::LParen => {
                self.advance();
                let mut types = Vec::new();
                loop {
                    let ty = self.ident("type name")?;
                    types.push(if ty == "_" { None } else { Some(ty) });
                    match self.peek() {
                        Token::Comma => {
                            self.advance();
                        }
                        Token::RParen => {
                            self.advance();
                            break;
                        }
                        _ => return Err(self.unexpected(&[",", ")"])),
                    }
                }
                types
            }
            _ => return Err(self.unexpected(&["/", "("])),
        };
        self.expect(Token::Dot)?;
        Ok(PredicateDecl { name, arg_types, closed })
    }

    fn exclusive(&mut self) -> Result<ExclusivityConstraint, ParseError> {
        self.advance();
        self.expect(Token::Colon)?;
        let predicate = self.ident("predicate name")?;
        self.expect(Token::LParen)?;
        let mut free = Vec::new();
        let mut arity = 0;
        loop {
            match self.peek().clone() {
                Token::Star => {
                    free.push(arity);
                    self.advance();
                }
                Token::Ident(name) if is_variable(&name) => {
                    self.advance();
                }
                _ => return Err(self.unexpected(&["variable", "*"])),
            }
            arity += 1;
            match self.peek() {
                Token::Comma => {
                    self.advance();
                }
                Token::RParen => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected(&[",", ")"])),
            }
        }
        if free.len() != 1 {
            return Err(self.error_here(
                "an exclusivity constraint needs exactly one free position `*`",
                &[],
            ));
        }
        self.expect(Token::Dot)?;
        Ok(ExclusivityConstraint { predicate, arity, free_position: free[0] })
    }

    fn weight(&mut self) -> Result<f64, ParseError> {
        let negative = if *self.peek() == Token::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Token::Number(text) => {
                let value: f64 = text
                    .parse()
                    .map_err(|_| self.error_here(format!("invalid weight `{text}`"), &[]))?;
                self.advance();
                Ok(if negative { -value } else { value })
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn rule(&mut self, weight: RuleWeight, start: usize) -> Result<Rule, ParseError> {
        self.expect(Token::Colon)?;
        let (first, first_conn) = self.literal_list()?;
        let (body, head) = if *self.peek() == Token::Implies {
            if let Some((Connective::Or, line, column)) = first_conn {
                return Err(ParseError {
                    line,
                    column,
                    message: "`|` is not allowed in a rule body".into(),
                    expected: vec!["&".into(), "=>".into()],
                });
            }
            self.advance();
            let (head, head_conn) = self.literal_list()?;
            if let Some((Connective::And, line, column)) = head_conn {
                return Err(ParseError {
                    line,
                    column,
                    message: "`&` is not allowed in a rule head".into(),
                    expected: vec!["|".into(), ".".into()],
                });
            }
            (first, head)
        } else {
            if let Some((Connective::And, line, column)) = first_conn {
                return Err(ParseError {
                    line,
                    column,
                    message: "a conjunction needs a head: expected `=>`".into(),
                    expected: vec!["=>".into()],
                });
            }
            (Vec::new(), first)
        };
        let end = self.expect(Token::Dot)?.end;
        Ok(Rule {
            body,
            head,
            weight,
            source: self.source[start..end].trim().to_string(),
        })
    }

    /// Parses literals joined by a single kind of connective. Mixing `&` and
    /// `|` within one side is rejected.
    #[allow(clippy::type_complexity)]
    fn literal_list(
        &mut self,
    ) -> Result<(Vec<Literal>, Option<(Connective, usize, usize)>), ParseError> {
        let mut literals = vec![self.literal()?];
        let mut connective: Option<(Connective, usize, usize)> = None;
        loop {
            let this = match self.peek() {
                Token::Amp => Connective::And,
                Token::Pipe => Connective::Or,
                _ => break,
            };
            let tok = &self.tokens[self.pos];
            let (line, column) = (tok.line, tok.column);
            match &connective {
                Some((prev, ..)) if std::mem::discriminant(prev) != std::mem::discriminant(&this) => {
                    return Err(self.error_here(
                        "`&` and `|` cannot be mixed on one side of a rule",
                        &[match prev {
                            Connective::And => "&",
                            Connective::Or => "|",
                        }],
                    ));
                }
                Some(_) => {}
                None => connective = Some((this, line, column)),
            }
            self.advance();
            literals.push(self.literal()?);
        }
        Ok((literals, connective))
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if *self.peek() == Token::Tilde {
            let at = self.pos;
            self.advance();
            let inner = self.literal()?;
            if inner.is_guard() {
                self.pos = at;
                return Err(self.error_here("an inequality guard cannot be negated", &[]));
            }
            return Ok(inner.negate());
        }
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Token::Ident(word), Token::LBracket) if word == "fn" => {
                self.advance();
                self.advance();
                let function = self.ident("similarity function name")?;
                self.expect(Token::RBracket)?;
                self.expect(Token::LParen)?;
                let left = self.term()?;
                self.expect(Token::Comma)?;
                let right = self.term()?;
                self.expect(Token::RParen)?;
                Ok(Literal {
                    negated: false,
                    kind: LiteralKind::Similarity { function, left, right },
                })
            }
            (Token::Ident(word), Token::LBracket) if word == "setsim" => {
                self.advance();
                self.advance();
                let member = self.ident("member predicate")?;
                self.expect(Token::RBracket)?;
                self.expect(Token::LParen)?;
                let left = self.set_expression()?;
                self.expect(Token::Comma)?;
                let right = self.set_expression()?;
                self.expect(Token::RParen)?;
                Ok(Literal {
                    negated: false,
                    kind: LiteralKind::SetSimilarity { member, left, right },
                })
            }
            (Token::Ident(predicate), Token::LParen) => {
                self.advance();
                self.advance();
                let mut args = vec![self.term()?];
                loop {
                    match self.peek() {
                        Token::Comma => {
                            self.advance();
                            args.push(self.term()?);
                        }
                        Token::RParen => {
                            self.advance();
                            break;
                        }
                        _ => return Err(self.unexpected(&[",", ")"])),
                    }
                }
                Ok(Literal::atom(predicate, args))
            }
            (Token::Ident(_) | Token::Number(_) | Token::Str(_), _) => {
                let left = self.term()?;
                self.expect(Token::NotEqual)?;
                let right = self.term()?;
                Ok(Literal { negated: false, kind: LiteralKind::Inequality { left, right } })
            }
            _ => Err(self.unexpected(&["literal"])),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let term = match self.peek().clone() {
            Token::Ident(name) if is_variable(&name) => Term::Variable(name),
            Token::Ident(name) | Token::Number(name) | Token::Str(name) => Term::Constant(name),
            _ => return Err(self.unexpected(&["term"])),
        };
        self.advance();
        Ok(term)
    }

    fn set_expression(&mut self) -> Result<SetExpression, ParseError> {
        self.expect(Token::LBrace)?;
        let anchor = self.variable()?;
        let mut path = Vec::new();
        while *self.peek() == Token::Dot {
            self.advance();
            path.push(self.ident("relation name")?);
        }
        if path.is_empty() {
            return Err(self.unexpected(&["."]));
        }
        self.expect(Token::RBrace)?;
        let mut expr = SetExpression::new(anchor, path);
        if *self.peek() == Token::Union {
            self.advance();
            expr = expr.union(self.set_expression()?);
        }
        Ok(expr)
    }
}

pub(crate) fn is_variable(name: &str) -> bool {
    name.starts_with(|c: char| c.is_uppercase())
}
