use super::{ParseError, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(String),
    Ident(String),
    Str(String),
    Schematic(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Symbols, longest first. Unicode aliases map onto their ASCII spelling.
const SYMBOLS: &[(&str, &str)] = &[
    ("==>", "=>"),
    ("#>", "#>"),
    ("#", "#"),
    (";;", ";;"),
    ("~=", "~="),
    ("<=", "<="),
    (">=", ">="),
    ("=>", "=>"),
    ("⇒", "=>"),
    ("≠", "~="),
    ("≤", "<="),
    ("≥", ">="),
    ("∧", "&"),
    ("∨", "|"),
    ("¬", "~"),
    ("·", "*"),
    ("−", "-"),
    ("λ", "\\"),
    ("√", "sqrt"),
    ("+", "+"),
    ("-", "-"),
    ("*", "*"),
    ("/", "/"),
    ("^", "^"),
    ("=", "="),
    ("<", "<"),
    (">", ">"),
    ("&", "&"),
    ("|", "|"),
    ("~", "~"),
    ("(", "("),
    (")", ")"),
    ("[", "["),
    ("]", "]"),
    (",", ","),
    (":", ":"),
    (".", "."),
    ("\\", "\\"),
    ("%", "\\"),
];

pub struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, col: 1 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self, n_bytes: usize) {
        for c in self.src[self.pos..self.pos + n_bytes].chars() {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += n_bytes;
    }

    fn span_from(&self, start: usize, line: usize, col: usize) -> SourceSpan {
        SourceSpan { start_offset: start, end_offset: self.pos, line, col }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            let rest = self.rest();
            let ws = rest.len() - rest.trim_start().len();
            if ws > 0 {
                self.bump(ws);
                continue;
            }
            if self.rest().starts_with("(*") {
                let (start, line, col) = (self.pos, self.line, self.col);
                match self.rest()[2..].find("*)") {
                    Some(end) => self.bump(end + 4),
                    None => {
                        self.bump(self.rest().len());
                        return Err(ParseError::syntax(
                            self.span_from(start, line, col),
                            "unterminated comment",
                        ));
                    }
                }
                continue;
            }
            return Ok(());
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (start, line, col) = (self.pos, self.line, self.col);
            let rest = self.rest();
            let Some(c) = rest.chars().next() else {
                out.push(Token { tok: Tok::Eof, span: self.span_from(start, line, col) });
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() {
                let n = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
                let s = rest[..n].to_string();
                self.bump(n);
                Tok::Num(s)
            } else if c.is_alphabetic() || c == '_' {
                let n = ident_len(rest);
                let s = rest[..n].to_string();
                self.bump(n);
                Tok::Ident(s)
            } else if rest.starts_with("''") || c == '"' {
                let (open, close) = if c == '"' { ("\"", "\"") } else { ("''", "''") };
                match rest[open.len()..].find(close) {
                    Some(end) => {
                        let s = rest[open.len()..open.len() + end].to_string();
                        self.bump(open.len() + end + close.len());
                        Tok::Str(s)
                    }
                    None => {
                        self.bump(rest.len());
                        return Err(ParseError::syntax(
                            self.span_from(start, line, col),
                            "unterminated string literal",
                        ));
                    }
                }
            } else if c == '?' {
                let n = ident_len(&rest[1..]);
                if n == 0 {
                    self.bump(1);
                    return Err(ParseError::syntax(
                        self.span_from(start, line, col),
                        "expected a name after `?`",
                    ));
                }
                let s = rest[1..1 + n].to_string();
                self.bump(1 + n);
                Tok::Schematic(s)
            } else if let Some((lit, canon)) = SYMBOLS.iter().find(|(lit, _)| rest.starts_with(lit)) {
                self.bump(lit.len());
                Tok::Sym(canon)
            } else {
                self.bump(c.len_utf8());
                return Err(ParseError::syntax(
                    self.span_from(start, line, col),
                    format!("unexpected character `{c}`"),
                ));
            };
            out.push(Token { tok, span: self.span_from(start, line, col) });
        }
    }
}

fn ident_len(s: &str) -> usize {
    let mut n = 0;
    let mut first = true;
    for c in s.chars() {
        let ok = if first {
            c.is_alphabetic() || c == '_'
        } else {
            c.is_alphanumeric() || c == '_' || (c == '\'' && !s[n..].starts_with("''"))
        };
        if !ok {
            break;
        }
        first = false;
        n += c.len_utf8();
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        Lexer::new(s).tokenize().unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn unicode_aliases() {
        assert_eq!(toks("a · b"), toks("a * b"));
        assert_eq!(toks("a ∨ b"), toks("a | b"));
        assert_eq!(toks("x ≠ 0"), toks("x ~= 0"));
    }

    #[test]
    fn strings_and_primes() {
        assert_eq!(
            toks("Rewrite ''add_0'' x'"),
            vec![
                Tok::Ident("Rewrite".into()),
                Tok::Str("add_0".into()),
                Tok::Ident("x'".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(toks("(* note *) x"), vec![Tok::Ident("x".into()), Tok::Eof]);
    }
}
