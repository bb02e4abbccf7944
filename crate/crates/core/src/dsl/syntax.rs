//! Lexer and recursive-descent parser for the call-list surface syntax.
//!
//! ```text
//! plan := ε | call (';' call)* ';'?
//! call := IDENT '(' (arg (',' arg)*)? ')'
//! arg  := IDENT | '$' IDENT
//! ```

use super::{Call, DslError, Plan, TemplateArg, TemplateCall};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Dollar,
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

impl Tok<'_> {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Dollar => "`$`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok<'_>)>, DslError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'$' => Tok::Dollar,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b';' => Tok::Semi,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(&text[start..i])));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(DslError::Syntax { position: i, token: format!("`{ch}`") });
            }
        };
        out.push((i, tok));
        i += 1;
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok<'a> {
        &self.toks[self.at].1
    }

    fn bump(&mut self) -> (usize, Tok<'a>) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self) -> Result<T, DslError> {
        let (position, tok) = &self.toks[self.at];
        Err(DslError::Syntax { position: *position, token: tok.describe() })
    }

    fn expect(&mut self, want: Tok<'static>) -> Result<(), DslError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.unexpected()
        }
    }

    fn ident(&mut self) -> Result<&'a str, DslError> {
        match *self.peek() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(),
        }
    }

    fn arg(&mut self) -> Result<TemplateArg, DslError> {
        if *self.peek() == Tok::Dollar {
            self.bump();
            Ok(TemplateArg::Param(self.ident()?.to_string()))
        } else {
            Ok(TemplateArg::Const(self.ident()?.to_string()))
        }
    }

    fn call(&mut self) -> Result<TemplateCall, DslError> {
        let function = self.ident()?.to_string();
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.arg()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.arg()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok(TemplateCall { function, args })
    }

    fn calls(&mut self) -> Result<Vec<TemplateCall>, DslError> {
        let mut out = Vec::new();
        if *self.peek() == Tok::Eof {
            return Ok(out);
        }
        loop {
            out.push(self.call()?);
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                    if *self.peek() == Tok::Eof {
                        return Ok(out);
                    }
                }
                Tok::Eof => return Ok(out),
                _ => return self.unexpected(),
            }
        }
    }
}

pub(super) fn parse_template_syntax(text: &str) -> Result<Vec<TemplateCall>, DslError> {
    let mut parser = Parser { toks: lex(text)?, at: 0 };
    parser.calls()
}

pub(super) fn parse_plan_syntax(text: &str) -> Result<Plan, DslError> {
    let mut parser = Parser { toks: lex(text)?, at: 0 };
    let mut calls = Vec::new();
    if *parser.peek() == Tok::Eof {
        return Ok(Plan::default());
    }
    loop {
        let function = parser.ident()?.to_string();
        parser.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *parser.peek() != Tok::RParen {
            loop {
                if *parser.peek() == Tok::Dollar {
                    // parameters only make sense inside body templates
                    return parser.unexpected();
                }
                args.push(parser.ident()?.to_string());
                if *parser.peek() != Tok::Comma {
                    break;
                }
                parser.bump();
            }
        }
        parser.expect(Tok::RParen)?;
        calls.push(Call { function, args });
        match parser.peek() {
            Tok::Semi => {
                parser.bump();
                if *parser.peek() == Tok::Eof {
                    break;
                }
            }
            Tok::Eof => break,
            _ => return parser.unexpected(),
        }
    }
    Ok(Plan { calls })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_insensitive() {
        let a = parse_plan_syntax("pickup(A);goto(B);release()").unwrap();
        let b = parse_plan_syntax("  pickup ( A ) ;\n goto(B) ;release( ) ").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn trailing_semicolon_allowed() {
        assert_eq!(parse_plan_syntax("release();").unwrap().len(), 1);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_plan_syntax("pickup(A) goto(B)") {
            Err(DslError::Syntax { position, token }) => {
                assert_eq!(position, 10);
                assert_eq!(token, "`goto`");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_plan_syntax("pickup(A"), Err(DslError::Syntax { position: 8, .. })));
        assert!(matches!(parse_plan_syntax("pickup(A,)"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_plan_syntax(";"), Err(DslError::Syntax { position: 0, .. })));
        assert!(matches!(parse_plan_syntax("pick#up()"), Err(DslError::Syntax { position: 4, .. })));
    }

    #[test]
    fn params_rejected_in_plans() {
        assert!(matches!(parse_plan_syntax("pickup($obj)"), Err(DslError::Syntax { position: 7, .. })));
    }

    #[test]
    fn template_args() {
        let steps = parse_template_syntax("pickup($obj); goto(LUNCH_BAG); release()").unwrap();
        assert_eq!(steps[0].args, vec![TemplateArg::Param("obj".into())]);
        assert_eq!(steps[1].args, vec![TemplateArg::Const("LUNCH_BAG".into())]);
        assert!(steps[2].args.is_empty());
    }
}
