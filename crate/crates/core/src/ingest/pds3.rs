//! Attached-label PDS3 parser covering the raster subset.
//!
//! The lexer works on raw bytes and stops at the `END` statement, so the
//! binary data area that follows is never interpreted as text.

use indexmap::IndexMap;

use super::IngestError;

/// A single PDS3 value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Integer(i64),
    /// Radix literal such as `16#FF7FFFFB#`, kept as raw bits.
    Based {
        radix: u32,
        bits: u64,
    },
    Real(f64),
    Text(String),
    Symbol(String),
    Sequence(Vec<Value>),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Integer(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            Value::Based { bits, .. } => Some(bits as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::Integer(v) => Some(v),
            Value::Based { bits, .. } => i64::try_from(bits).ok(),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) | Value::Symbol(s) => Some(s),
            _ => None,
        }
    }
}

/// Value plus the unit suffix it carried, if any (`0.25 <m/pixel>`).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub unit: Option<String>,
}

/// `OBJECT = NAME ... END_OBJECT` block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Object {
    pub name: String,
    pub entries: IndexMap<String, Entry>,
    pub objects: Vec<Object>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pds3Label {
    /// Top-level keyword/value pairs in label order.
    pub entries: IndexMap<String, Entry>,
    pub objects: Vec<Object>,
    /// Byte offset of the data area.
    pub end_offset: usize,
}

impl Pds3Label {
    /// Detached data file named by `^IMAGE`, either `"F.IMG"` or
    /// `("F.IMG", start)`. `end_offset` is then relative to that file.
    pub fn image_file(&self) -> Option<&str> {
        match &self.entries.get("^IMAGE")?.value {
            Value::Text(s) => Some(s),
            Value::Sequence(items) => match items.first()? {
                Value::Text(s) => Some(s),
                _ => None,
            },
            _ => None,
        }
    }

    /// Depth-first lookup: top level first, then nested objects in order.
    pub fn find(&self, keyword: &str) -> Option<&Entry> {
        fn walk<'a>(objects: &'a [Object], keyword: &str) -> Option<&'a Entry> {
            objects.iter().find_map(|o| o.entries.get(keyword).or_else(|| walk(&o.objects, keyword)))
        }
        self.entries.get(keyword).or_else(|| walk(&self.objects, keyword))
    }

    pub fn object(&self, name: &str) -> Option<&Object> {
        fn walk<'a>(objects: &'a [Object], name: &str) -> Option<&'a Object> {
            objects.iter().find_map(|o| if o.name == name { Some(o) } else { walk(&o.objects, name) })
        }
        walk(&self.objects, name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Text(String),
    Quoted(String),
    Unit(String),
    Equals,
    Open(u8),
    Close(u8),
    Comma,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_trivia(&mut self) -> Result<(), IngestError> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.bytes.get(self.pos + 1) == Some(&b'*') => {
                    let rest = &self.bytes[self.pos + 2..];
                    let close = find(rest, b"*/").ok_or_else(|| malformed("unterminated comment"))?;
                    self.pos += 2 + close + 2;
                }
                _ => return Ok(()),
            }
        }
    }

    fn next(&mut self) -> Result<Option<Token>, IngestError> {
        self.skip_trivia()?;
        let Some(&b) = self.bytes.get(self.pos) else {
            return Ok(None);
        };
        let tok = match b {
            b'=' => {
                self.pos += 1;
                Token::Equals
            }
            b',' => {
                self.pos += 1;
                Token::Comma
            }
            b'(' | b'{' => {
                self.pos += 1;
                Token::Open(b)
            }
            b')' | b'}' => {
                self.pos += 1;
                Token::Close(b)
            }
            b'"' => Token::Text(self.delimited(b'"', "unbalanced double quote")?),
            b'\'' => Token::Quoted(self.delimited(b'\'', "unbalanced single quote")?),
            b'<' => Token::Unit(self.delimited(b'>', "unterminated unit")?.trim().to_string()),
            _ => {
                let start = self.pos;
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c.is_ascii_whitespace() || b"=,(){}\"'<".contains(&c) {
                        break;
                    }
                    if c == b'/' && self.bytes.get(self.pos + 1) == Some(&b'*') {
                        break;
                    }
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.bytes[start..self.pos])
                    .map_err(|_| malformed("non-text bytes inside label"))?;
                Token::Word(word.to_string())
            }
        };
        Ok(Some(tok))
    }

    fn delimited(&mut self, close: u8, what: &str) -> Result<String, IngestError> {
        let rest = &self.bytes[self.pos + 1..];
        let len = rest.iter().position(|&c| c == close).ok_or_else(|| malformed(what))?;
        let s = std::str::from_utf8(&rest[..len]).map_err(|_| malformed("non-text bytes inside label"))?;
        self.pos += len + 2;
        Ok(s.to_string())
    }

    fn peek(&mut self) -> Result<Option<Token>, IngestError> {
        let save = self.pos;
        let t = self.next();
        self.pos = save;
        t
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedLabel(msg.into())
}

fn unsupported(msg: impl Into<String>) -> IngestError {
    IngestError::UnsupportedValue(msg.into())
}

/// Parse an attached PDS3 label from the start of `bytes`.
pub fn parse_pds3_label(bytes: &[u8]) -> Result<Pds3Label, IngestError> {
    let mut lex = Lexer { bytes, pos: 0 };
    // Scope stack; index 0 is the label root.
    let mut stack: Vec<Object> = vec![Object::default()];
    let end_pos;

    loop {
        let keyword = match lex.next()? {
            None => return Err(malformed("label has no END statement")),
            Some(Token::Word(w)) => w,
            Some(t) => return Err(malformed(format!("expected keyword, found {t:?}"))),
        };
        if keyword == "END" {
            end_pos = lex.pos;
            break;
        }
        let closes_block = keyword == "END_OBJECT" || keyword == "END_GROUP";
        let entry = if lex.peek()? == Some(Token::Equals) {
            lex.next()?;
            parse_entry(&mut lex)?
        } else if closes_block {
            Entry { value: Value::Symbol(String::new()), unit: None }
        } else {
            return Err(malformed(format!("expected '=' after {keyword}")));
        };
        match keyword.as_str() {
            "OBJECT" | "GROUP" => {
                let name = entry.value.as_str().ok_or_else(|| malformed(format!("{keyword} name must be a symbol")))?;
                stack.push(Object { name: name.to_string(), ..Default::default() });
            }
            "END_OBJECT" | "END_GROUP" => {
                if stack.len() < 2 {
                    return Err(malformed(format!("{keyword} without open block")));
                }
                let obj = stack.pop().expect("checked depth");
                if let Some(name) = entry.value.as_str().filter(|n| !n.is_empty()) {
                    if name != obj.name {
                        return Err(malformed(format!("{keyword} = {name} closes {}", obj.name)));
                    }
                }
                stack.last_mut().expect("root").objects.push(obj);
            }
            _ => {
                let scope = stack.last_mut().expect("root");
                if scope.entries.contains_key(&keyword) {
                    return Err(malformed(format!("duplicate keyword {keyword}")));
                }
                scope.entries.insert(keyword, entry);
            }
        }
    }
    if stack.len() != 1 {
        return Err(malformed("unclosed OBJECT block at END"));
    }
    let root = stack.pop().expect("root");
    let mut label = Pds3Label { entries: root.entries, objects: root.objects, end_offset: 0 };
    label.end_offset = data_offset(&label, bytes, end_pos);
    Ok(label)
}

fn parse_entry(lex: &mut Lexer<'_>) -> Result<Entry, IngestError> {
    let (value, inner_unit) = parse_value(lex)?;
    let unit = match lex.peek()? {
        Some(Token::Unit(u)) => {
            lex.next()?;
            Some(u)
        }
        _ => inner_unit,
    };
    Ok(Entry { value, unit })
}

/// Returns the value and, for sequences, the first unit seen on an element.
fn parse_value(lex: &mut Lexer<'_>) -> Result<(Value, Option<String>), IngestError> {
    match lex.next()? {
        Some(Token::Text(s)) => Ok((Value::Text(normalize_text(&s)), None)),
        Some(Token::Quoted(s)) => Ok((Value::Symbol(s), None)),
        Some(Token::Word(w)) => Ok((classify_word(&w)?, None)),
        Some(Token::Open(open)) => {
            let close = if open == b'(' { b')' } else { b'}' };
            let mut items = Vec::new();
            let mut first_unit = None;
            loop {
                if let Some(Token::Close(c)) = lex.peek()? {
                    lex.next()?;
                    if c != close {
                        return Err(malformed("mismatched brackets"));
                    }
                    break;
                }
                let (item, inner) = parse_value(lex)?;
                items.push(item);
                if let Some(unit) = inner {
                    first_unit.get_or_insert(unit);
                }
                if let Some(Token::Unit(unit)) = lex.peek()? {
                    lex.next()?;
                    first_unit.get_or_insert(unit);
                }
                match lex.next()? {
                    Some(Token::Comma) => continue,
                    Some(Token::Close(c)) if c == close => break,
                    Some(Token::Close(_)) => return Err(malformed("mismatched brackets")),
                    None => return Err(malformed("unbalanced parenthesis")),
                    Some(t) => return Err(malformed(format!("unexpected {t:?} in sequence"))),
                }
            }
            Ok((Value::Sequence(items), first_unit))
        }
        None => Err(malformed("label ends before value")),
        Some(t) => Err(unsupported(format!("value cannot start with {t:?}"))),
    }
}

fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn classify_word(w: &str) -> Result<Value, IngestError> {
    if let Some(v) = parse_based(w)? {
        return Ok(v);
    }
    if let Ok(i) = w.parse::<i64>() {
        return Ok(Value::Integer(i));
    }
    let numeric_start = w.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
    if numeric_start && w.chars().all(|c| c.is_ascii_digit() || "+-.eE".contains(c)) {
        if let Ok(r) = w.parse::<f64>() {
            return Ok(Value::Real(r));
        }
    }
    if w.chars().all(|c| c.is_ascii_alphanumeric() || "_-:.+^/".contains(c)) {
        return Ok(Value::Symbol(w.to_string()));
    }
    Err(unsupported(format!("unrecognised value {w:?}")))
}

fn parse_based(w: &str) -> Result<Option<Value>, IngestError> {
    let Some((radix, rest)) = w.split_once('#') else {
        return Ok(None);
    };
    let Some(digits) = rest.strip_suffix('#') else {
        return Err(unsupported(format!("bad radix literal {w:?}")));
    };
    let radix: u32 = radix
        .parse()
        .ok()
        .filter(|r| (2..=16).contains(r))
        .ok_or_else(|| unsupported(format!("bad radix in {w:?}")))?;
    let bits = u64::from_str_radix(digits, radix).map_err(|_| unsupported(format!("bad digits in {w:?}")))?;
    Ok(Some(Value::Based { radix, bits }))
}

/// Data-area offset: an `^IMAGE` pointer when present, else
/// `RECORD_BYTES × LABEL_RECORDS`, else the first byte after `END`'s line.
fn data_offset(label: &Pds3Label, bytes: &[u8], end_pos: usize) -> usize {
    let record_bytes = label.entries.get("RECORD_BYTES").and_then(|e| e.value.as_i64()).filter(|&r| r > 0);
    if let Some(ptr) = label.entries.get("^IMAGE") {
        let bytes_unit = ptr.unit.as_deref().is_some_and(|u| u.eq_ignore_ascii_case("BYTES"));
        let start = match &ptr.value {
            Value::Integer(n) => Some(*n),
            // Detached file with no offset: data starts at its first byte.
            Value::Text(_) => return 0,
            Value::Sequence(items) => items.last().and_then(Value::as_i64),
            _ => None,
        };
        if let Some(n) = start.filter(|&n| n >= 1) {
            if bytes_unit {
                return (n - 1) as usize;
            }
            if let Some(rb) = record_bytes {
                return ((n - 1) * rb) as usize;
            }
        }
    }
    let label_records = label.entries.get("LABEL_RECORDS").and_then(|e| e.value.as_i64()).filter(|&r| r > 0);
    if let (Some(rb), Some(lr)) = (record_bytes, label_records) {
        return (rb * lr) as usize;
    }
    match bytes[end_pos..].iter().position(|&b| b == b'\n') {
        Some(nl) => end_pos + nl + 1,
        None => bytes.len(),
    }
}
