use thiserror::Error;

use super::lexer::{tokenize, Spanned, Token};
use super::{BinOp, Expression, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    /// Byte offset of the error in the source text.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Empty => 0,
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Expression, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        Token::End => Ok(expr),
        _ => Err(parser.unexpected("an operator or end of input")),
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].token.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() == Token::Minus {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.advance();
            let exponent = self.unary()?;
            return Ok(Expression::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Token::Num(v) => {
                self.advance();
                Ok(Expression::Num(v))
            }
            Token::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.advance();
                match name.as_str() {
                    "r" => Ok(Expression::Var(Var::R)),
                    "t" => Ok(Expression::Var(Var::T)),
                    "u" => Ok(Expression::Var(Var::U)),
                    _ => {
                        let func = Func::from_name(&name)
                            .ok_or(ParseError::UnknownIdentifier { name: name.clone(), offset })?;
                        if *self.peek() != Token::LParen {
                            return Err(self.unexpected(&format!("'(' after function {name}")));
                        }
                        self.advance();
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(Expression::call(func, arg))
                    }
                }
            }
            _ => Err(self.unexpected("a number, variable, function or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Token::RParen {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected("')'"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: Var) -> Expression {
        Expression::Var(v)
    }

    #[test]
    fn sum_of_power() {
        let e = parse("u + u^3").unwrap();
        let expected = Expression::binary(
            BinOp::Add,
            var(Var::U),
            Expression::binary(BinOp::Pow, var(Var::U), Expression::Num(3.0)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn superlinear_term() {
        let e = parse("u*ln(1+u^2)").unwrap();
        let inner = Expression::binary(
            BinOp::Add,
            Expression::Num(1.0),
            Expression::binary(BinOp::Pow, var(Var::U), Expression::Num(2.0)),
        );
        let expected = Expression::binary(BinOp::Mul, var(Var::U), Expression::call(Func::Ln, inner));
        assert_eq!(e, expected);
    }

    #[test]
    fn syntax_error_offset() {
        let err = parse("u + * 3").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" u+  u ^ 3 ").unwrap(), parse("u+u^3").unwrap());
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ right-assoc
        let e = parse("u^2^3").unwrap();
        let expected = Expression::binary(
            BinOp::Pow,
            var(Var::U),
            Expression::binary(BinOp::Pow, Expression::Num(2.0), Expression::Num(3.0)),
        );
        assert_eq!(e, expected);
        // unary minus binds looser than ^
        let e = parse("-u^2").unwrap();
        assert!(matches!(e, Expression::Neg(ref inner) if matches!(**inner, Expression::Binary(BinOp::Pow, ..))));
        // - is left-assoc
        let e = parse("r - t - u").unwrap();
        assert!(
            matches!(e, Expression::Binary(BinOp::Sub, ref l, _) if matches!(**l, Expression::Binary(BinOp::Sub, ..)))
        );
        // * before +
        let e = parse("r + t * u").unwrap();
        assert!(
            matches!(e, Expression::Binary(BinOp::Add, _, ref r) if matches!(**r, Expression::Binary(BinOp::Mul, ..)))
        );
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("x + 1").unwrap_err();
        assert_eq!(err, ParseError::UnknownIdentifier { name: "x".into(), offset: 0 });
        let err = parse("u + foo(2)").unwrap_err();
        assert_eq!(err, ParseError::UnknownIdentifier { name: "foo".into(), offset: 4 });
    }

    #[test]
    fn other_errors() {
        assert_eq!(parse("   "), Err(ParseError::Empty));
        assert!(matches!(parse("(u + 1"), Err(ParseError::Syntax { offset: 6, .. })));
        assert!(matches!(parse("sin u"), Err(ParseError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("u u"), Err(ParseError::Syntax { offset: 2, .. })));
    }
}
