use super::ast::SourceLocation;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    // keywords
    Let,
    Function,
    If,
    Else,
    While,
    For,
    Return,
    Require,
    TypeOf,
    True,
    False,
    Null,
    Undefined,
    // values
    Ident(String),
    Num(f64),
    Str(String),
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Question,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    EqEqEq,
    NotEq,
    NotEqEq,
    Eq,
    AndAnd,
    OrOr,
    QuestionQuestion,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Num(n) => format!("number `{n}`"),
            TokenKind::Str(_) => "string literal".to_string(),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("{other:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub loc: SourceLocation,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    file: String,
    line_starts: Vec<usize>,
}

/// Byte offset -> (line, column), both 1-based.
pub fn line_col(line_starts: &[usize], offset: usize) -> (u32, u32) {
    let line_idx = match line_starts.binary_search(&offset) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let col = offset - line_starts[line_idx] + 1;
    ((line_idx + 1) as u32, col as u32)
}

pub fn compute_line_starts(src: &str) -> Vec<usize> {
    let mut starts = vec![0usize];
    for (i, b) in src.bytes().enumerate() {
        if b == b'\n' {
            starts.push(i + 1);
        }
    }
    starts
}

impl<'a> Lexer<'a> {
    fn loc(&self, start: usize, end: usize) -> SourceLocation {
        let (line, column) = line_col(&self.line_starts, start);
        SourceLocation {
            file: self.file.clone(),
            line,
            column,
            byte_start: start,
            byte_end: end,
        }
    }

    fn error(&self, start: usize, msg: String) -> FrontendError {
        FrontendError::Lex {
            message: msg,
            loc: self.loc(start, (start + 1).min(self.src.len().max(start + 1))),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                Some(b'/') if self.peek2() == Some(b'*') => {
                    let start = self.pos;
                    self.pos += 2;
                    loop {
                        match (self.peek(), self.peek2()) {
                            (Some(b'*'), Some(b'/')) => {
                                self.pos += 2;
                                break;
                            }
                            (Some(_), _) => self.pos += 1,
                            (None, _) => {
                                return Err(self.error(start, "unterminated block comment".into()))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn lex_string(&mut self, quote: u8) -> Result<TokenKind, FrontendError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None | Some(b'\n') => {
                    return Err(self.error(start, "unterminated string literal".into()))
                }
                Some(b) if b == quote => {
                    self.pos += 1;
                    return Ok(TokenKind::Str(out));
                }
                Some(b'\\') => {
                    let esc_start = self.pos;
                    self.pos += 1;
                    let esc = self
                        .peek()
                        .ok_or_else(|| self.error(esc_start, "unterminated escape".into()))?;
                    out.push(match esc {
                        b'n' => '\n',
                        b't' => '\t',
                        b'\\' => '\\',
                        b'\'' => '\'',
                        b'"' => '"',
                        other => {
                            return Err(self.error(
                                esc_start,
                                format!("unsupported escape `\\{}`", other as char),
                            ))
                        }
                    });
                    self.pos += 1;
                }
                Some(_) => {
                    // keep multi-byte UTF-8 sequences intact
                    let rest = &self.src[self.pos..];
                    let s = std::str::from_utf8(rest)
                        .map_err(|_| self.error(self.pos, "invalid UTF-8".into()))?;
                    let ch = s.chars().next().unwrap();
                    out.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
    }

    fn lex_number(&mut self) -> Result<TokenKind, FrontendError> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') && self.peek2().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let n: f64 = text
            .parse()
            .map_err(|_| self.error(start, format!("invalid number `{text}`")))?;
        Ok(TokenKind::Num(n))
    }

    fn lex_ident(&mut self) -> TokenKind {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text {
            "let" => TokenKind::Let,
            "function" => TokenKind::Function,
            "if" => TokenKind::If,
            "else" => TokenKind::Else,
            "while" => TokenKind::While,
            "for" => TokenKind::For,
            "return" => TokenKind::Return,
            "require" => TokenKind::Require,
            "typeof" => TokenKind::TypeOf,
            "true" => TokenKind::True,
            "false" => TokenKind::False,
            "null" => TokenKind::Null,
            "undefined" => TokenKind::Undefined,
            _ => TokenKind::Ident(text.to_string()),
        }
    }
}

pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lx = Lexer {
        src: source.as_bytes(),
        pos: 0,
        file: file.to_string(),
        line_starts: compute_line_starts(source),
    };
    let mut tokens = Vec::new();
    loop {
        lx.skip_trivia()?;
        let start = lx.pos;
        let Some(b) = lx.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                loc: lx.loc(start, start + 1),
            });
            return Ok(tokens);
        };
        let kind = match b {
            b'\'' | b'"' => lx.lex_string(b)?,
            b'0'..=b'9' => lx.lex_number()?,
            b'a'..=b'z' | b'A'..=b'Z' | b'_' | b'$' => lx.lex_ident(),
            _ => {
                lx.pos += 1;
                match b {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    b'{' => TokenKind::LBrace,
                    b'}' => TokenKind::RBrace,
                    b'[' => TokenKind::LBracket,
                    b']' => TokenKind::RBracket,
                    b',' => TokenKind::Comma,
                    b';' => TokenKind::Semi,
                    b':' => TokenKind::Colon,
                    b'.' => TokenKind::Dot,
                    b'+' => TokenKind::Plus,
                    b'-' => TokenKind::Minus,
                    b'*' => TokenKind::Star,
                    b'/' => TokenKind::Slash,
                    b'%' => TokenKind::Percent,
                    b'?' => {
                        if lx.peek() == Some(b'?') {
                            lx.pos += 1;
                            TokenKind::QuestionQuestion
                        } else {
                            TokenKind::Question
                        }
                    }
                    b'!' => {
                        if lx.peek() == Some(b'=') {
                            lx.pos += 1;
                            if lx.peek() == Some(b'=') {
                                lx.pos += 1;
                                TokenKind::NotEqEq
                            } else {
                                TokenKind::NotEq
                            }
                        } else {
                            TokenKind::Bang
                        }
                    }
                    b'<' => {
                        if lx.peek() == Some(b'=') {
                            lx.pos += 1;
                            TokenKind::Le
                        } else {
                            TokenKind::Lt
                        }
                    }
                    b'>' => {
                        if lx.peek() == Some(b'=') {
                            lx.pos += 1;
                            TokenKind::Ge
                        } else {
                            TokenKind::Gt
                        }
                    }
                    b'=' => {
                        if lx.peek() == Some(b'=') {
                            lx.pos += 1;
                            if lx.peek() == Some(b'=') {
                                lx.pos += 1;
                                TokenKind::EqEqEq
                            } else {
                                TokenKind::EqEq
                            }
                        } else {
                            TokenKind::Eq
                        }
                    }
                    b'&' => {
                        if lx.peek() == Some(b'&') {
                            lx.pos += 1;
                            TokenKind::AndAnd
                        } else {
                            return Err(lx.error(start, "illegal character `&`".into()));
                        }
                    }
                    b'|' => {
                        if lx.peek() == Some(b'|') {
                            lx.pos += 1;
                            TokenKind::OrOr
                        } else {
                            return Err(lx.error(start, "illegal character `|`".into()));
                        }
                    }
                    other => {
                        return Err(
                            lx.error(start, format!("illegal character `{}`", other as char))
                        )
                    }
                }
            }
        };
        let end = lx.pos;
        tokens.push(Token {
            kind,
            loc: lx.loc(start, end),
        });
    }
}
