//! Recursive-descent parser for formula text.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := power (("*" | "/") power)*
//! power   := unary ("^" power)?
//! unary   := "-" unary | primary
//! primary := number | name | name "(" args ")" | "(" expr ")"
//! ```
//!
//! Tokens are produced on demand, so a call to a non-whitelisted function is
//! reported as a sandbox violation before its argument text is even lexed.

use super::ast::{BinaryOp, Expr, Function, Span};
use super::ExprError;
use crate::decimal::Decimal;

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(Decimal),
    Name(String),
    Op(BinaryOp),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    peeked: Option<(Token, Span)>,
    depth: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Parser<'a> {
    fn error(&self, position: usize, message: impl Into<String>) -> ExprError {
        ExprError::Parse {
            position,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn lex(&mut self) -> Result<(Token, Span), ExprError> {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
        let start = self.pos;
        let Some(c) = trimmed.chars().next() else {
            return Ok((Token::End, Span::new(start, start)));
        };
        let single = |tok: Token, p: &mut Self| {
            p.pos += c.len_utf8();
            Ok((tok, Span::new(start, p.pos)))
        };
        match c {
            '+' => single(Token::Op(BinaryOp::Add), self),
            '-' | '\u{2212}' => single(Token::Op(BinaryOp::Sub), self),
            '*' | '\u{00d7}' => single(Token::Op(BinaryOp::Mul), self),
            '/' | '\u{00f7}' => single(Token::Op(BinaryOp::Div), self),
            '^' => single(Token::Op(BinaryOp::Pow), self),
            '(' => single(Token::LParen, self),
            ')' => single(Token::RParen, self),
            ',' => single(Token::Comma, self),
            '0'..='9' => {
                let len = number_len(trimmed);
                let lexeme = &trimmed[..len];
                if trimmed[len..].starts_with(is_name_start) {
                    return Err(self.error(start + len, "unexpected character after number"));
                }
                let value = lexeme
                    .parse::<Decimal>()
                    .map_err(|e| self.error(start, e.to_string()))?;
                self.pos += len;
                Ok((Token::Number(value), Span::new(start, self.pos)))
            }
            c if is_name_start(c) => {
                let len = name_len(trimmed);
                self.pos += len;
                Ok((
                    Token::Name(trimmed[..len].to_string()),
                    Span::new(start, self.pos),
                ))
            }
            other => Err(self.error(start, format!("unexpected character '{other}'"))),
        }
    }

    fn peek(&mut self) -> Result<&(Token, Span), ExprError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    fn bump(&mut self) -> Result<(Token, Span), ExprError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn enter(&mut self, at: usize) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error(at, format!("expression nested deeper than {MAX_DEPTH}")));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let (Token::Op(op @ (BinaryOp::Add | BinaryOp::Sub)), _) = self.peek()? {
            let op = *op;
            self.bump()?;
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.power()?;
        while let (Token::Op(op @ (BinaryOp::Mul | BinaryOp::Div)), _) = self.peek()? {
            let op = *op;
            self.bump()?;
            let rhs = self.power()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if let (Token::Op(BinaryOp::Pow), span) = self.peek()? {
            let at = span.start;
            self.bump()?;
            self.enter(at)?;
            let exponent = self.power()?;
            self.depth -= 1;
            return Ok(binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let (Token::Op(BinaryOp::Sub), span) = self.peek()? {
            let start = span.start;
            self.bump()?;
            self.enter(start)?;
            let operand = self.unary()?;
            self.depth -= 1;
            let span = Span::new(start, operand.span().end);
            return Ok(Expr::Neg {
                operand: Box::new(operand),
                span,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (token, span) = self.bump()?;
        match token {
            Token::Number(value) => Ok(Expr::Literal { value, span }),
            Token::Name(name) => {
                if self.peek()?.0 != Token::LParen {
                    return Ok(Expr::Variable { name, span });
                }
                let Some(function) = Function::from_name(&name) else {
                    return Err(ExprError::SandboxViolation { function: name });
                };
                self.bump()?;
                self.call(function, span)
            }
            Token::LParen => {
                self.enter(span.start)?;
                let inner = self.expr()?;
                self.depth -= 1;
                let (close, close_span) = self.bump()?;
                if close != Token::RParen {
                    return Err(self.error(close_span.start, "expected ')'"));
                }
                Ok(reposition(inner, span.join(close_span)))
            }
            Token::End => Err(self.error(span.start, "unexpected end of expression")),
            Token::RParen | Token::Comma | Token::Op(_) => {
                Err(self.error(span.start, "expected a number, name or '('"))
            }
        }
    }

    fn call(&mut self, function: Function, name_span: Span) -> Result<Expr, ExprError> {
        self.enter(name_span.start)?;
        let mut args = Vec::new();
        if self.peek()?.0 != Token::RParen {
            loop {
                args.push(self.expr()?);
                match self.bump()? {
                    (Token::Comma, _) => continue,
                    (Token::RParen, close) => {
                        self.depth -= 1;
                        return finish_call(function, args, name_span.join(close));
                    }
                    (_, at) => return Err(self.error(at.start, "expected ',' or ')'")),
                }
            }
        }
        let (_, close) = self.bump()?;
        self.depth -= 1;
        finish_call(function, args, name_span.join(close))
    }
}

fn finish_call(function: Function, args: Vec<Expr>, span: Span) -> Result<Expr, ExprError> {
    let (lo, hi) = function.arity();
    if args.len() < lo || args.len() > hi {
        let expected = if lo == hi {
            format!("{lo}")
        } else {
            format!("{lo} to {hi}")
        };
        return Err(ExprError::Parse {
            position: span.start,
            message: format!(
                "{}() takes {expected} argument(s), got {}",
                function.name(),
                args.len()
            ),
        });
    }
    Ok(Expr::Call {
        function,
        args,
        span,
    })
}

fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span().join(rhs.span());
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
        span,
    }
}

/// Widens a parenthesised node's span to include its parentheses.
fn reposition(expr: Expr, span: Span) -> Expr {
    match expr {
        Expr::Literal { value, .. } => Expr::Literal { value, span },
        Expr::Variable { name, .. } => Expr::Variable { name, span },
        Expr::Neg { operand, .. } => Expr::Neg { operand, span },
        Expr::Binary { op, lhs, rhs, .. } => Expr::Binary { op, lhs, rhs, span },
        Expr::Call { function, args, .. } => Expr::Call {
            function,
            args,
            span,
        },
    }
}

fn number_len(s: &str) -> usize {
    let bytes = s.as_bytes();
    let mut i = bytes.iter().take_while(|b| b.is_ascii_digit()).count();
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        i += bytes[i..].iter().take_while(|b| b.is_ascii_digit()).count();
    }
    i
}

/// Dotted names lex as one token so that `os.system(..)` is reported as a
/// call outside the whitelist. No declaration can carry a dot, so validation
/// rejects a dotted variable as unresolved.
fn name_len(s: &str) -> usize {
    let mut len = 0;
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let ok = if c == '.' {
            chars.peek().is_some_and(|&(_, n)| is_name_start(n))
        } else {
            is_name_char(c)
        };
        if !ok {
            break;
        }
        len = i + c.len_utf8();
    }
    len
}

/// Parses formula text into an expression tree.
pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let mut parser = Parser {
        text,
        pos: 0,
        peeked: None,
        depth: 0,
    };
    let expr = parser.expr()?;
    match parser.bump()? {
        (Token::End, _) => Ok(expr),
        (Token::RParen, span) => Err(parser.error(span.start, "unmatched ')'")),
        (_, span) => Err(parser.error(span.start, "expected an operator")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(text: &str) -> String {
        parse_expression(text).unwrap().to_string()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            shape("regional_gas_index / conversion_factor + y + r + f"),
            "((((regional_gas_index / conversion_factor) + y) + r) + f)"
        );
        assert_eq!(shape("2 ^ 3 ^ 2"), "(2 ^ (3 ^ 2))");
        assert_eq!(shape("-2 ^ 2"), "((-2) ^ 2)");
        assert_eq!(shape("a - b - c"), "((a - b) - c)");
        assert_eq!(shape("a * (b + c)"), "(a * (b + c))");
        assert_eq!(shape("2 ^ -1"), "(2 ^ (-1))");
        assert_eq!(shape("round(miles * rate, 2)"), "round((miles * rate), 2)");
        assert_eq!(shape("miles × rate ÷ 2 − 1"), "(((miles * rate) / 2) - 1)");
    }

    #[test]
    fn spans_cover_source() {
        let text = "(a + b) / c";
        let e = parse_expression(text).unwrap();
        assert_eq!(e.span().slice(text), text);
        if let Expr::Binary { lhs, .. } = &e {
            assert_eq!(lhs.span().slice(text), "(a + b)");
        }
    }

    #[test]
    fn sandbox_rejects_unknown_calls() {
        for text in ["eval('rm -rf')", "os.system(\"ls\")", "1 + open(x)", "__import__(os)"] {
            match parse_expression(text) {
                Err(ExprError::SandboxViolation { .. }) => {}
                other => panic!("{text}: {other:?}"),
            }
        }
        assert_eq!(
            parse_expression("eval('rm -rf')").unwrap_err().to_string(),
            "function 'eval' not whitelisted"
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [("1 +", 3), ("(a", 2), ("a b", 2), ("1.", 1), ("round()", 0), ("a)", 1), ("3x", 1)];
        for (text, pos) in cases {
            match parse_expression(text) {
                Err(ExprError::Parse { position, .. }) => assert_eq!(position, pos, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_expression("sqrt(1, 2)").is_err());
        assert!(parse_expression(&"(".repeat(500)).is_err());
    }

    #[test]
    fn dotted_names_lex_as_one_token() {
        let e = parse_expression("base.total * 2").unwrap();
        assert_eq!(e.variables(), vec!["base.total"]);
    }
}
