//! Minimal s-expression reader for solver responses.
//!
//! Decimal literals are kept as text so they can be converted to exact
//! rationals by the caller.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Atom(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Net parenthesis depth of `text`, ignoring string literals and `|quoted|`
/// symbols. A complete response has depth zero.
pub fn paren_balance(text: &str) -> i64 {
    let mut depth = 0;
    let mut in_string = false;
    let mut in_quoted = false;
    for c in text.chars() {
        match c {
            '"' if !in_quoted => in_string = !in_string,
            '|' if !in_string => in_quoted = !in_quoted,
            '(' if !in_string && !in_quoted => depth += 1,
            ')' if !in_string && !in_quoted => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// Parses exactly one s-expression from `text`.
pub fn parse(text: &str) -> Result<Sexp, String> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let sexp = parse_tokens(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(format!("trailing input after s-expression in `{text}`"));
    }
    Ok(sexp)
}

#[derive(Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                tokens.push(Token::Open);
            }
            ')' => {
                chars.next();
                tokens.push(Token::Close);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '"' | '|' => {
                let delim = c;
                let mut atom = String::from(c);
                chars.next();
                loop {
                    let Some(c) = chars.next() else {
                        return Err("unterminated literal".into());
                    };
                    atom.push(c);
                    if c == delim {
                        break;
                    }
                }
                tokens.push(Token::Atom(atom));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                tokens.push(Token::Atom(atom));
            }
        }
    }
    Ok(tokens)
}

fn parse_tokens(tokens: &[Token], pos: &mut usize) -> Result<Sexp, String> {
    match tokens.get(*pos) {
        None => Err("unexpected end of input".into()),
        Some(Token::Close) => Err("unexpected `)`".into()),
        Some(Token::Atom(a)) => {
            *pos += 1;
            Ok(Sexp::Atom(a.clone()))
        }
        Some(Token::Open) => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err("unbalanced `(`".into()),
                    Some(Token::Close) => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_tokens(tokens, pos)?),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_model_values() {
        let s = parse("((b_1_1 (/ 1.0 25.0))\n (a_1 0) (x (- 3)))").unwrap();
        let items = s.as_list().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].to_string(), "(b_1_1 (/ 1.0 25.0))");
        assert_eq!(items[2].as_list().unwrap()[1].to_string(), "(- 3)");
    }

    #[test]
    fn balance_ignores_strings() {
        assert_eq!(paren_balance("(error \"a ( b\")"), 0);
        assert_eq!(paren_balance("((a 1)"), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("(a").is_err());
        assert!(parse("a b").is_err());
        assert!(parse(")").is_err());
    }
}
