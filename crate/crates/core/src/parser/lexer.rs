use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    /// Unquoted name, possibly dotted (`java.lang.String`).
    Name(String),
    /// Quoted atom `'...'`.
    Quoted(String),
    Var(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// Operator or punctuation made of symbol characters, or one of `, | ! ;`.
    Sym(String),
    Open,
    /// `(` directly after a name, marking functional notation.
    OpenCall,
    Close,
    OpenList,
    CloseList,
    /// Clause terminator `.`
    End,
    /// Query terminator `?`
    QueryEnd,
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

fn is_symbol(c: char) -> bool {
    SYMBOL_CHARS.contains(c)
}

fn is_ident(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
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

    let terminator_follows = |j: usize| -> bool {
        j >= chars.len() || chars[j].is_whitespace() || chars[j] == '%'
    };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });

        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance!(2);
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance!(1);
            }
            if i >= chars.len() {
                return Err(SyntaxError::new(tl, tc, "end of block comment"));
            }
            advance!(2);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let mut float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                float = true;
                advance!(1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!(1);
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    float = true;
                    advance!(j - i);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!(1);
                    }
                }
            }
            // Duration literals such as `1S`, `10S`, `5M` lex as names.
            if !float && i < chars.len() && chars[i].is_alphabetic() {
                while i < chars.len() && is_ident(chars[i]) {
                    advance!(1);
                }
                push(&mut out, Tok::Name(chars[start..i].iter().collect()));
                continue;
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if float {
                Tok::Float(text.parse().map_err(|_| SyntaxError::new(tl, tc, "number"))?)
            } else {
                Tok::Int(text.parse().map_err(|_| SyntaxError::new(tl, tc, "integer in range"))?)
            };
            push(&mut out, tok);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            loop {
                while i < chars.len() && is_ident(chars[i]) {
                    advance!(1);
                }
                // Dotted names: a dot glued to a following letter continues the name.
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_alphabetic() {
                    advance!(1);
                    continue;
                }
                break;
            }
            let text: String = chars[start..i].iter().collect();
            let first = text.chars().next().unwrap();
            let tok = if (first.is_uppercase() || first == '_') && !text.contains('.') {
                Tok::Var(text)
            } else {
                Tok::Name(text)
            };
            push(&mut out, tok);
            if i < chars.len() && chars[i] == '(' {
                out.push(Token { tok: Tok::OpenCall, line, col });
                advance!(1);
            }
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = c;
            advance!(1);
            let mut text = String::new();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::new(tl, tc, "closing quote"));
                }
                let ch = chars[i];
                if ch == quote {
                    if chars.get(i + 1) == Some(&quote) {
                        text.push(quote);
                        advance!(2);
                        continue;
                    }
                    advance!(1);
                    break;
                }
                if ch == '\\' && i + 1 < chars.len() {
                    let esc = chars[i + 1];
                    text.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        other => other,
                    });
                    advance!(2);
                    continue;
                }
                text.push(ch);
                advance!(1);
            }
            if quote == '"' {
                push(&mut out, Tok::Str(text));
            } else {
                push(&mut out, Tok::Quoted(text));
                if i < chars.len() && chars[i] == '(' {
                    out.push(Token { tok: Tok::OpenCall, line, col });
                    advance!(1);
                }
            }
            continue;
        }
        match c {
            '(' => {
                push(&mut out, Tok::Open);
                advance!(1);
                continue;
            }
            ')' => {
                push(&mut out, Tok::Close);
                advance!(1);
                continue;
            }
            '[' => {
                push(&mut out, Tok::OpenList);
                advance!(1);
                continue;
            }
            ']' => {
                push(&mut out, Tok::CloseList);
                advance!(1);
                continue;
            }
            ',' | '|' | '!' | ';' => {
                push(&mut out, Tok::Sym(c.to_string()));
                advance!(1);
                continue;
            }
            _ => {}
        }
        if c == '.' && terminator_follows(i + 1) {
            push(&mut out, Tok::End);
            advance!(1);
            continue;
        }
        if c == '?' && terminator_follows(i + 1) {
            push(&mut out, Tok::QueryEnd);
            advance!(1);
            continue;
        }
        if is_symbol(c) {
            let start = i;
            while i < chars.len() && is_symbol(chars[i]) {
                // Stop before a terminating dot or question mark.
                if (chars[i] == '.' || chars[i] == '?') && i > start && terminator_follows(i + 1) {
                    break;
                }
                advance!(1);
            }
            let text: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Sym(text));
            if i < chars.len() && chars[i] == '(' {
                out.push(Token { tok: Tok::OpenCall, line, col });
                advance!(1);
            }
            continue;
        }
        return Err(SyntaxError::new(tl, tc, format!("a token (found {c:?})")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
