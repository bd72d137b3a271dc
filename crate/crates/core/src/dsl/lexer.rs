use crate::model::Comparator;

use super::{Code, Diagnostic, Location};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Numeric literal with its source text, which truth tables read bit by bit.
    Number(f64, String),
    Str(String),
    Cmp(Comparator),
    LParen,
    RParen,
    Slash,
    Newline,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: Location,
}

pub(crate) fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Token> {
    let mut out = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx as u32 + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let loc = Location::new(line_no, i as u32 + 1);
            let start = i;
            let tok = match c {
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '(' => {
                    i += 1;
                    Tok::LParen
                }
                ')' => {
                    i += 1;
                    Tok::RParen
                }
                '/' => {
                    i += 1;
                    Tok::Slash
                }
                '>' | '<' => {
                    i += 1;
                    let eq = chars.get(i) == Some(&'=');
                    if eq {
                        i += 1;
                    }
                    Tok::Cmp(match (c, eq) {
                        ('>', true) => Comparator::Ge,
                        ('>', false) => Comparator::Gt,
                        ('<', true) => Comparator::Le,
                        _ => Comparator::Lt,
                    })
                }
                '=' => {
                    i += 1;
                    Tok::Cmp(Comparator::Eq)
                }
                '"' => {
                    i += 1;
                    let mut s = String::new();
                    let mut closed = false;
                    while i < chars.len() {
                        match chars[i] {
                            '"' => {
                                closed = true;
                                i += 1;
                                break;
                            }
                            '\\' if i + 1 < chars.len() => {
                                s.push(chars[i + 1]);
                                i += 2;
                            }
                            ch => {
                                s.push(ch);
                                i += 1;
                            }
                        }
                    }
                    if !closed {
                        diags.push(Diagnostic::error(
                            Code::LexicalError,
                            "unterminated string literal",
                            Some(loc),
                        ));
                        break;
                    }
                    Tok::Str(s)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    Tok::Ident(chars[start..i].iter().collect())
                }
                c if c.is_ascii_digit() || c == '-' || c == '+' => {
                    i += 1;
                    let digits = |i: &mut usize| {
                        let s = *i;
                        while *i < chars.len() && chars[*i].is_ascii_digit() {
                            *i += 1;
                        }
                        *i > s
                    };
                    let lead = digits(&mut i);
                    let mut ok = c.is_ascii_digit() || lead;
                    if ok && chars.get(i) == Some(&'.') {
                        i += 1;
                        ok = digits(&mut i);
                    }
                    if ok && matches!(chars.get(i), Some('e' | 'E')) {
                        i += 1;
                        if matches!(chars.get(i), Some('+' | '-')) {
                            i += 1;
                        }
                        ok = digits(&mut i);
                    }
                    // A number glued to letters (`12ab`) is malformed.
                    if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                        ok = false;
                        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                            i += 1;
                        }
                    }
                    let raw: String = chars[start..i].iter().collect();
                    match raw.parse::<f64>() {
                        Ok(v) if ok && v.is_finite() => Tok::Number(v, raw),
                        _ => {
                            diags.push(Diagnostic::error(
                                Code::LexicalError,
                                format!("malformed number `{raw}`"),
                                Some(loc),
                            ));
                            continue;
                        }
                    }
                }
                other => {
                    i += 1;
                    diags.push(Diagnostic::error(
                        Code::LexicalError,
                        format!("unexpected character `{other}`"),
                        Some(loc),
                    ));
                    continue;
                }
            };
            out.push(Token { tok, loc });
        }
        out.push(Token {
            tok: Tok::Newline,
            loc: Location::new(line_no, chars.len() as u32 + 1),
        });
    }
    let last = text.lines().count() as u32;
    out.push(Token {
        tok: Tok::Eof,
        loc: Location::new(last.max(1), 1),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> (Vec<Tok>, Vec<Diagnostic>) {
        let mut d = Vec::new();
        let t = lex(s, &mut d).into_iter().map(|t| t.tok).collect();
        (t, d)
    }

    #[test]
    fn basic_line() {
        let (t, d) = toks("when IP3 at cytosol/p >= 1.5 # trailing");
        assert!(d.is_empty());
        assert_eq!(
            t,
            vec![
                Tok::Ident("when".into()),
                Tok::Ident("IP3".into()),
                Tok::Ident("at".into()),
                Tok::Ident("cytosol".into()),
                Tok::Slash,
                Tok::Ident("p".into()),
                Tok::Cmp(Comparator::Ge),
                Tok::Number(1.5, "1.5".into()),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        let (t, d) = toks("-2 1e-7 0001 3.25E+2");
        assert!(d.is_empty());
        let nums: Vec<f64> = t
            .iter()
            .filter_map(|t| match t {
                Tok::Number(v, _) => Some(*v),
                _ => None,
            })
            .collect();
        assert_eq!(nums, [-2.0, 1e-7, 1.0, 325.0]);
    }

    #[test]
    fn lexical_errors_have_locations() {
        let (_, d) = toks("level x\n  rank $ 1.2.3 \"open");
        let codes: Vec<_> = d.iter().map(|d| (d.code, d.location.unwrap().line)).collect();
        assert_eq!(
            codes,
            [
                (Code::LexicalError, 2),
                (Code::LexicalError, 2),
                (Code::LexicalError, 2)
            ]
        );
    }
}
