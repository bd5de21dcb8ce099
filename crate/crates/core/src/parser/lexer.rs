use super::{ParseError, Position};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase-initial or `_`-prefixed name.
    Ident(String),
    /// Uppercase-initial name.
    Var(String),
    Int(i64),
    /// `#name`, stored without the hash.
    Directive(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    If,
    Dot,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Directive(d) => format!("`#{d}`"),
            other => format!(
                "`{}`",
                match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Colon => ":",
                    Tok::If => ":-",
                    Tok::Dot => ".",
                    Tok::DotDot => "..",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::Eq => "=",
                    Tok::Ne => "!=",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Gt => ">",
                    Tok::Ge => ">=",
                    _ => unreachable!(),
                }
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Position,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, column: col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '%' {
            if next == Some('*') {
                let start = pos;
                advance!(2);
                loop {
                    if i >= chars.len() {
                        return Err(ParseError::new(start, "unterminated block comment"));
                    }
                    if chars[i] == '*' && chars.get(i + 1) == Some(&'%') {
                        advance!(2);
                        break;
                    }
                    advance!(1);
                }
            } else {
                while i < chars.len() && chars[i] != '\n' {
                    advance!(1);
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| ParseError::new(pos, format!("integer `{digits}` out of range")))?;
            tokens.push(Token { tok: Tok::Int(value), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '#' {
            let start = i;
            advance!(1);
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance!(1);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if let Some(name) = word.strip_prefix('#') {
                if name.is_empty() {
                    return Err(ParseError::new(pos, "expected directive name after `#`"));
                }
                Tok::Directive(name.to_string())
            } else if word.starts_with(|ch: char| ch.is_uppercase()) {
                Tok::Var(word)
            } else if word.chars().all(|ch| ch == '_') {
                return Err(ParseError::new(pos, "anonymous variables are not supported"));
            } else if word.starts_with('_') && word[1..].starts_with(|ch: char| ch.is_uppercase()) {
                return Err(ParseError::new(pos, format!("invalid name `{word}`")));
            } else {
                Tok::Ident(word)
            };
            tokens.push(Token { tok, pos });
            continue;
        }
        let (tok, len) = match (c, next) {
            (':', Some('-')) => (Tok::If, 2),
            (':', _) => (Tok::Colon, 1),
            ('.', Some('.')) => (Tok::DotDot, 2),
            ('.', _) => (Tok::Dot, 1),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('=', Some('=')) => (Tok::Eq, 2),
            ('=', _) => (Tok::Eq, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            _ => return Err(ParseError::new(pos, format!("unexpected character `{c}`"))),
        };
        advance!(len);
        tokens.push(Token { tok, pos });
    }
    Ok(tokens)
}
