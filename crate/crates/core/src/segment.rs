//! Lexical segmentation of Java source into type declarations and their
//! methods.
//!
//! The scanner first blanks comments and string/char literals (keeping
//! newlines and byte offsets), then matches braces and parentheses, then walks
//! declaration bodies statement by statement. No grammar is involved: a
//! header that ends in `{` is a type when it carries a type keyword, a method
//! when it ends in `name(...)` optionally followed by `throws`, and an
//! anonymous body or initializer otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpan {
    pub method_name: String,
    pub signature: String,
    pub parameter_count: usize,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpan {
    pub class_name: String,
    /// Enclosing type names joined with `.`, e.g. `Outer.Inner`.
    pub qualified_name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub source: String,
    pub methods: Vec<MethodSpan>,
}

impl ClassSpan {
    pub fn methods_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MethodSpan> + 'a {
        self.methods.iter().filter(move |m| m.method_name == name)
    }

    /// Text of all overloads named `name`, one after another.
    pub fn method_source(&self, file_text: &str, name: &str) -> Option<String> {
        let parts: Vec<String> = self
            .methods_named(name)
            .map(|m| line_range(file_text, m.start_line, m.end_line))
            .collect();
        if parts.is_empty() {
            None
        } else {
            Some(parts.join("\n"))
        }
    }
}

/// Lines `start..=end` (1-based) of `text`, joined with `\n`.
pub fn line_range(text: &str, start: usize, end: usize) -> String {
    text.split('\n')
        .skip(start.saturating_sub(1))
        .take(end + 1 - start)
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Locates every named type declaration (top-level, member and local) in
/// document order, outer types before the types they contain.
pub fn segment_file(file_text: &str) -> Result<Vec<ClassSpan>> {
    let code = blank_non_code(file_text)?;
    let (brace_match, paren_match) = match_delimiters(&code, file_text)?;
    let mut scanner = Scanner {
        text: file_text,
        code: &code,
        line_starts: line_starts(file_text),
        brace_match,
        paren_match,
        spans: Vec::new(),
    };
    scanner.members(0, code.len(), Mode::TypeBody, None, false);
    Ok(scanner.spans)
}

fn line_starts(text: &str) -> Vec<usize> {
    std::iter::once(0)
        .chain(text.bytes().enumerate().filter(|(_, b)| *b == b'\n').map(|(i, _)| i + 1))
        .collect()
}

fn line_of(starts: &[usize], pos: usize) -> usize {
    match starts.binary_search(&pos) {
        Ok(i) => i + 1,
        Err(i) => i,
    }
}

/// Replaces comment and literal bytes with spaces, keeping newlines.
fn blank_non_code(text: &str) -> Result<Vec<u8>> {
    let src = text.as_bytes();
    let n = src.len();
    let mut out = src.to_vec();
    let mut line = 1;
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, at: usize| {
        if out[at] != b'\n' {
            out[at] = b' ';
        }
    };
    while i < n {
        match src[i] {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b'/' if src.get(i + 1) == Some(&b'/') => {
                while i < n && src[i] != b'\n' {
                    blank(&mut out, i);
                    i += 1;
                }
            }
            b'/' if src.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                blank(&mut out, i);
                blank(&mut out, i + 1);
                i += 2;
                loop {
                    if i >= n {
                        return Err(Error::Segmentation {
                            line: start_line,
                            message: "unterminated block comment".into(),
                        });
                    }
                    if src[i] == b'*' && src.get(i + 1) == Some(&b'/') {
                        blank(&mut out, i);
                        blank(&mut out, i + 1);
                        i += 2;
                        break;
                    }
                    if src[i] == b'\n' {
                        line += 1;
                    }
                    blank(&mut out, i);
                    i += 1;
                }
            }
            b'"' if src[i..].starts_with(b"\"\"\"") => {
                let start_line = line;
                for k in i..i + 3 {
                    blank(&mut out, k);
                }
                i += 3;
                loop {
                    if i >= n {
                        return Err(Error::Segmentation {
                            line: start_line,
                            message: "unterminated text block".into(),
                        });
                    }
                    if src[i] == b'\\' && i + 1 < n {
                        if src[i + 1] == b'\n' {
                            line += 1;
                        }
                        blank(&mut out, i);
                        blank(&mut out, i + 1);
                        i += 2;
                        continue;
                    }
                    if src[i..].starts_with(b"\"\"\"") {
                        for k in i..i + 3 {
                            blank(&mut out, k);
                        }
                        i += 3;
                        break;
                    }
                    if src[i] == b'\n' {
                        line += 1;
                    }
                    blank(&mut out, i);
                    i += 1;
                }
            }
            quote @ (b'"' | b'\'') => {
                blank(&mut out, i);
                i += 1;
                // Literals cannot span lines; stop at the newline if unterminated.
                while i < n && src[i] != b'\n' {
                    if src[i] == b'\\' && i + 1 < n && src[i + 1] != b'\n' {
                        blank(&mut out, i);
                        blank(&mut out, i + 1);
                        i += 2;
                        continue;
                    }
                    let done = src[i] == quote;
                    blank(&mut out, i);
                    i += 1;
                    if done {
                        break;
                    }
                }
            }
            _ => i += 1,
        }
    }
    Ok(out)
}

const NONE: usize = usize::MAX;

fn match_delimiters(code: &[u8], text: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let starts = line_starts(text);
    let mut braces = vec![NONE; code.len()];
    let mut parens = vec![NONE; code.len()];
    let mut brace_stack = Vec::new();
    let mut paren_stack = Vec::new();
    for (i, &c) in code.iter().enumerate() {
        let (stack, table, what) = match c {
            b'{' | b'}' => (&mut brace_stack, &mut braces, "brace"),
            b'(' | b')' => (&mut paren_stack, &mut parens, "parenthesis"),
            _ => continue,
        };
        if c == b'{' || c == b'(' {
            stack.push(i);
        } else {
            let open = stack.pop().ok_or_else(|| Error::Segmentation {
                line: line_of(&starts, i),
                message: format!("unmatched closing {what}"),
            })?;
            table[open] = i;
            table[i] = open;
        }
    }
    if let Some(&open) = brace_stack.first() {
        return Err(Error::Segmentation {
            line: line_of(&starts, open),
            message: "unclosed brace".into(),
        });
    }
    if let Some(&open) = paren_stack.first() {
        return Err(Error::Segmentation {
            line: line_of(&starts, open),
            message: "unclosed parenthesis".into(),
        });
    }
    Ok((braces, parens))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Directly inside a type body (or the compilation unit).
    TypeBody,
    /// Inside a method body, initializer or anonymous class.
    Code,
}

enum Header {
    Type { name: String, is_enum: bool },
    Method { name: String, params: (usize, usize) },
    Other { has_assignment: bool },
}

const NOT_METHOD_NAMES: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "try", "return", "new", "throw",
    "else", "do", "super", "this", "assert", "case", "yield",
];

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

struct Scanner<'a> {
    text: &'a str,
    code: &'a [u8],
    line_starts: Vec<usize>,
    brace_match: Vec<usize>,
    paren_match: Vec<usize>,
    spans: Vec<ClassSpan>,
}

impl Scanner<'_> {
    fn line(&self, pos: usize) -> usize {
        line_of(&self.line_starts, pos)
    }

    fn skip_ws(&self, mut i: usize, hi: usize) -> usize {
        while i < hi && self.code[i].is_ascii_whitespace() {
            i += 1;
        }
        i
    }

    fn words(&self, lo: usize, hi: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = lo;
        while i < hi {
            let c = self.code[i];
            if c == b'(' && self.paren_match[i] != NONE {
                i = self.paren_match[i] + 1;
                continue;
            }
            if is_ident_byte(c) {
                let s = i;
                while i < hi && is_ident_byte(self.code[i]) {
                    i += 1;
                }
                out.push((s, i));
            } else {
                i += 1;
            }
        }
        out
    }

    fn word(&self, (s, e): (usize, usize)) -> &str {
        std::str::from_utf8(&self.code[s..e]).unwrap_or("")
    }

    fn prev_non_ws(&self, lo: usize, pos: usize) -> Option<u8> {
        self.code[lo..pos].iter().rev().find(|b| !b.is_ascii_whitespace()).copied()
    }

    fn next_non_ws(&self, pos: usize, hi: usize) -> Option<(usize, u8)> {
        let i = self.skip_ws(pos, hi);
        (i < hi).then(|| (i, self.code[i]))
    }

    fn classify(&self, lo: usize, hi: usize) -> Header {
        let words = self.words(lo, hi);
        for (k, &w) in words.iter().enumerate() {
            let text = self.word(w);
            let keyword = matches!(text, "class" | "interface" | "enum" | "record");
            if !keyword || self.prev_non_ws(lo, w.0) == Some(b'.') {
                continue;
            }
            let Some(&name) = words.get(k + 1) else { continue };
            if text == "record" {
                match self.next_non_ws(name.1, hi) {
                    Some((_, b'(' | b'<')) => {}
                    _ => continue,
                }
            }
            if self.code[lo..w.0].contains(&b'=') {
                break;
            }
            return Header::Type {
                name: self.word(name).to_string(),
                is_enum: text == "enum",
            };
        }

        let mut i = lo;
        let mut has_assignment = false;
        while i < hi {
            match self.code[i] {
                b'=' => has_assignment = true,
                b'(' => {
                    let close = self.paren_match[i];
                    let mut e = i;
                    while e > lo && self.code[e - 1].is_ascii_whitespace() {
                        e -= 1;
                    }
                    let mut s = e;
                    while s > lo && is_ident_byte(self.code[s - 1]) {
                        s -= 1;
                    }
                    if s == e || self.is_annotation(lo, s) {
                        i = close + 1;
                        continue;
                    }
                    let name = self.word((s, e));
                    if has_assignment || NOT_METHOD_NAMES.contains(&name) || name.as_bytes()[0].is_ascii_digit() {
                        return Header::Other { has_assignment };
                    }
                    let rest = String::from_utf8_lossy(&self.code[close + 1..hi]);
                    let rest = rest.trim();
                    let tail_ok = rest.is_empty()
                        || rest.starts_with("throws")
                        || rest.starts_with("default")
                        || rest.starts_with('[');
                    if !tail_ok {
                        return Header::Other { has_assignment };
                    }
                    return Header::Method {
                        name: name.to_string(),
                        params: (i + 1, close),
                    };
                }
                _ => {}
            }
            i += 1;
        }
        Header::Other { has_assignment }
    }

    /// True when the identifier starting at `s` is (the tail of) an
    /// annotation name such as `@Foo` or `@a.b.Foo`.
    fn is_annotation(&self, lo: usize, mut s: usize) -> bool {
        loop {
            let mut j = s;
            while j > lo && self.code[j - 1].is_ascii_whitespace() {
                j -= 1;
            }
            if j == lo {
                return false;
            }
            match self.code[j - 1] {
                b'@' => return true,
                b'.' => {
                    let mut k = j - 1;
                    while k > lo && self.code[k - 1].is_ascii_whitespace() {
                        k -= 1;
                    }
                    let mut t = k;
                    while t > lo && is_ident_byte(self.code[t - 1]) {
                        t -= 1;
                    }
                    if t == k {
                        return false;
                    }
                    s = t;
                }
                _ => return false,
            }
        }
    }

    fn parameter_count(&self, (lo, hi): (usize, usize)) -> usize {
        let inner = &self.code[lo..hi];
        if inner.iter().all(u8::is_ascii_whitespace) {
            return 0;
        }
        let mut depth = 0i32;
        let mut commas = 0;
        for &c in inner {
            match c {
                b'(' | b'<' | b'[' | b'{' => depth += 1,
                b')' | b'>' | b']' | b'}' => depth -= 1,
                b',' if depth == 0 => commas += 1,
                _ => {}
            }
        }
        commas + 1
    }

    fn collapse(&self, lo: usize, hi: usize) -> String {
        String::from_utf8_lossy(&self.code[lo..hi])
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn push_method(&mut self, owner: usize, name: String, params: (usize, usize), lo: usize, header_end: usize, end: usize) {
        let span = MethodSpan {
            method_name: name,
            signature: self.collapse(lo, header_end),
            parameter_count: self.parameter_count(params),
            start_line: self.line(lo),
            end_line: self.line(end),
        };
        self.spans[owner].methods.push(span);
    }

    /// Walks the statements of `[lo, hi)`.
    fn members(&mut self, lo: usize, hi: usize, mode: Mode, owner: Option<usize>, is_enum: bool) {
        let mut i = lo;
        if is_enum {
            // Constants come first and end at the first top-level `;`.
            let mut j = lo;
            while j < hi && self.code[j] != b';' {
                j = match self.code[j] {
                    b'(' => self.paren_match[j] + 1,
                    b'{' => self.brace_match[j] + 1,
                    _ => j + 1,
                };
            }
            i = j + 1;
        }
        'statements: while i < hi {
            i = self.skip_ws(i, hi);
            if i >= hi {
                break;
            }
            let start = i;
            let mut j = i;
            loop {
                if j >= hi {
                    break 'statements;
                }
                match self.code[j] {
                    b'(' => j = self.paren_match[j] + 1,
                    b';' => {
                        if let (Mode::TypeBody, Some(owner)) = (mode, owner) {
                            if let Header::Method { name, params } = self.classify(start, j) {
                                self.push_method(owner, name, params, start, j, j);
                            }
                        }
                        i = j + 1;
                        continue 'statements;
                    }
                    b'{' => {
                        let close = self.brace_match[j];
                        match self.classify(start, j) {
                            Header::Type { name, is_enum } => {
                                let qualified_name = match owner {
                                    Some(o) => format!("{}.{}", self.spans[o].qualified_name, name),
                                    None => name.clone(),
                                };
                                let (start_line, end_line) = (self.line(start), self.line(close));
                                self.spans.push(ClassSpan {
                                    class_name: name,
                                    qualified_name,
                                    start_line,
                                    end_line,
                                    source: line_range(self.text, start_line, end_line),
                                    methods: Vec::new(),
                                });
                                let idx = self.spans.len() - 1;
                                self.members(j + 1, close, Mode::TypeBody, Some(idx), is_enum);
                            }
                            Header::Method { name, params } if mode == Mode::TypeBody && owner.is_some() => {
                                let owner = owner.unwrap_or_default();
                                self.push_method(owner, name, params, start, j, close);
                                self.members(j + 1, close, Mode::Code, Some(owner), false);
                            }
                            Header::Other { has_assignment: true } if mode == Mode::TypeBody => {
                                // Field initializer with an anonymous body; the
                                // statement continues to its `;`.
                                j = close + 1;
                                continue;
                            }
                            _ => self.members(j + 1, close, Mode::Code, owner, false),
                        }
                        i = close + 1;
                        continue 'statements;
                    }
                    _ => j += 1,
                }
            }
        }
    }
}
