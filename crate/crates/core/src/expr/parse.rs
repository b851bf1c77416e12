//! Recursive-descent parser for the scalar expression grammar.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x'<index> | 't' | func '(' sum ')' | '(' sum ')'
//! func    := exp | ln | sin | cos | sqrt
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`, and it is
//! right-associative through the `unary` exponent (`x1^-2` is accepted).

use super::{ExprError, Func, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part, only when followed by digits
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: format!("number '{text}' is not finite"),
                    });
                }
                out.push(Token {
                    tok: Tok::Num(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(source[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        out.push(Token { tok, offset: start });
        i += 1;
    }
    out.push(Token {
        tok: Tok::End,
        offset: source.len(),
    });
    Ok(out)
}

pub(super) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    allow_t: bool,
}

impl Parser {
    pub(super) fn new(source: &str, dimension: usize, allow_t: bool) -> Result<Self, ExprError> {
        Ok(Self {
            tokens: lex(source)?,
            pos: 0,
            dimension,
            allow_t,
        })
    }

    pub(super) fn parse(mut self) -> Result<Node, ExprError> {
        let node = self.sum()?;
        let tok = self.peek();
        if tok.tok != Tok::End {
            return Err(ExprError::Syntax {
                offset: tok.offset,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(node)
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.product()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.product()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.unary()?;
        Ok(match integer_exponent(&exponent) {
            Some(k) => Node::PowInt(Box::new(base), k),
            None => Node::Pow(Box::new(base), Box::new(exponent)),
        })
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Token { tok, offset } = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(&name, offset),
            Tok::End => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected token {}", describe(&other)),
            }),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<Node, ExprError> {
        if let Some(func) = Func::from_name(name) {
            let next = self.bump();
            if next.tok != Tok::LParen {
                return Err(ExprError::Syntax {
                    offset: next.offset,
                    message: format!("expected '(' after {name}"),
                });
            }
            let arg = self.sum()?;
            self.expect_rparen()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if name == "t" {
            if self.allow_t {
                return Ok(Node::Time);
            }
            return Err(ExprError::UnknownIdentifier {
                offset,
                name: name.into(),
            });
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dimension {
                    return Err(ExprError::VariableOutOfRange {
                        offset,
                        name: name.into(),
                        dimension: self.dimension,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        Err(ExprError::UnknownIdentifier {
            offset,
            name: name.into(),
        })
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let t = self.bump();
        if t.tok == Tok::RParen {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset: t.offset,
                message: format!("expected ')', found {}", describe(&t.tok)),
            })
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

/// Literal integer exponents (optionally negated) take the exact
/// repeated-multiplication path.
fn integer_exponent(node: &Node) -> Option<i32> {
    let (value, sign) = match node {
        Node::Const(v) => (*v, 1.0),
        Node::Neg(inner) => match inner.as_ref() {
            Node::Const(v) => (*v, -1.0),
            _ => return None,
        },
        _ => return None,
    };
    if value.fract() == 0.0 && value.abs() <= 1024.0 {
        Some((sign * value) as i32)
    } else {
        None
    }
}
