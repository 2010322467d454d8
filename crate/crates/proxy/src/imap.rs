//! Just enough IMAP grammar for a caching gateway: tag extraction, the
//! verbs the proxy acts on, sequence-set expansion, and synthesis of
//! FETCH data responses served from cache.
//!
//! Anything the parser does not model becomes an [`Command::Opaque`] and
//! is relayed verbatim; the proxy only ever needs full understanding of
//! the commands it answers itself.

use thiserror::Error;

use crate::netutil::strip_crlf;

/// Hard ceiling on how many message ids one command may expand to before
/// the proxy stops expanding and just forwards the set.
pub const MAX_SET_EXPANSION: usize = 10_000;

const KNOWN_VERBS: &[&str] = &[
    "LOGIN", "LOGOUT", "SELECT", "EXAMINE", "LIST", "FETCH", "NOOP", "UID", "STORE", "EXPUNGE",
    "APPEND", "CAPABILITY", "SEARCH", "STATUS", "CLOSE", "CHECK", "CREATE", "DELETE", "RENAME",
    "SUBSCRIBE", "UNSUBSCRIBE", "COPY", "MOVE", "IDLE", "STARTTLS", "AUTHENTICATE",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImapParseError {
    #[error("empty command line")]
    Empty,
    #[error("command line must end with CRLF")]
    MissingCrlf,
    #[error("command line is not valid UTF-8")]
    NotUtf8,
    #[error("first token `{0}` is a command verb; a tag must come first")]
    MissingTag(String),
    #[error("`{0}` needs more arguments")]
    MissingArguments(&'static str),
}

/// What a FETCH asked for. Only two shapes are cache-served; everything
/// else goes upstream untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchItems {
    /// `BODY[]` — the whole raw message.
    Body,
    /// `RFC822` — the RFC822 spelling of the same thing.
    Rfc822,
    Other(String),
}

impl FetchItems {
    pub fn parse(raw: &str) -> FetchItems {
        let mut text = raw.trim();
        if text.starts_with('(') && text.ends_with(')') && text.len() >= 2 {
            text = text[1..text.len() - 1].trim();
        }
        let upper = text.to_ascii_uppercase();
        match upper.as_str() {
            "BODY[]" => FetchItems::Body,
            "RFC822" => FetchItems::Rfc822,
            _ => FetchItems::Other(raw.trim().to_string()),
        }
    }

    /// The item name used on the wire, both toward the upstream and in
    /// synthesized responses. `None` for shapes the cache does not serve.
    pub fn cache_section(&self) -> Option<&'static str> {
        match self {
            FetchItems::Body => Some("BODY[]"),
            FetchItems::Rfc822 => Some("RFC822"),
            FetchItems::Other(_) => None,
        }
    }
}

/// A message-id set, either fully expanded or left opaque (`*` ranges,
/// malformed input, or sets past [`MAX_SET_EXPANSION`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceSet {
    Numbers(Vec<u32>),
    Raw(String),
}

impl SequenceSet {
    pub fn parse(raw: &str) -> SequenceSet {
        let mut ids: Vec<u32> = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            let range = match part.split_once(':') {
                None => match part.parse::<u32>() {
                    Ok(n) if n > 0 => (n, n),
                    _ => return SequenceSet::Raw(raw.to_string()),
                },
                Some((a, b)) => match (a.trim().parse::<u32>(), b.trim().parse::<u32>()) {
                    (Ok(x), Ok(y)) if x > 0 && y > 0 => (x.min(y), x.max(y)),
                    _ => return SequenceSet::Raw(raw.to_string()),
                },
            };
            let span = (range.1 - range.0) as usize + 1;
            if ids.len() + span > MAX_SET_EXPANSION {
                return SequenceSet::Raw(raw.to_string());
            }
            ids.extend(range.0..=range.1);
        }
        if ids.is_empty() {
            return SequenceSet::Raw(raw.to_string());
        }
        ids.sort_unstable();
        ids.dedup();
        SequenceSet::Numbers(ids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Login { user: String },
    Select { mailbox: String },
    Fetch { uid: bool, set: SequenceSet, items: FetchItems },
    Logout,
    /// Anything else the proxy relays without interpreting. The verb is
    /// uppercased, with `UID` folded into it (`UID STORE`).
    Opaque { verb: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCommand {
    pub tag: String,
    pub command: Command,
}

/// Verbs that can change what a mailbox contains; the cache drops the
/// session's mailbox after relaying one of these.
pub fn verb_mutates_mailbox(verb: &str) -> bool {
    matches!(verb, "STORE" | "UID STORE" | "EXPUNGE" | "UID EXPUNGE" | "APPEND" | "CLOSE")
}

/// Splits a command line into atoms. Double-quoted strings stay one token
/// (quotes stripped, `\"` and `\\` unescaped); everything else breaks on
/// whitespace.
fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_ascii_whitespace()) {
            chars.next();
        }
        let Some(&first) = chars.peek() else { break };
        let mut token = String::new();
        if first == '"' {
            chars.next();
            while let Some(c) = chars.next() {
                match c {
                    '"' => break,
                    '\\' => {
                        if let Some(escaped) = chars.next() {
                            token.push(escaped);
                        }
                    }
                    other => token.push(other),
                }
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_ascii_whitespace() {
                    break;
                }
                token.push(c);
                chars.next();
            }
        }
        tokens.push(token);
    }
    tokens
}

/// Parses one complete command line (no pending literal). The grammar is
/// deliberately shallow: tag, verb, and just enough arguments for the
/// commands the proxy treats specially.
pub fn parse_command(line: &[u8]) -> Result<ParsedCommand, ImapParseError> {
    if !line.ends_with(b"\r\n") {
        return Err(ImapParseError::MissingCrlf);
    }
    let text = std::str::from_utf8(strip_crlf(line)).map_err(|_| ImapParseError::NotUtf8)?;
    let mut tokens = tokenize(text).into_iter();
    let tag = tokens.next().ok_or(ImapParseError::Empty)?;
    if KNOWN_VERBS.contains(&tag.to_ascii_uppercase().as_str()) {
        return Err(ImapParseError::MissingTag(tag));
    }
    let verb_token = tokens.next().ok_or(ImapParseError::MissingArguments("command"))?;
    let mut verb = verb_token.to_ascii_uppercase();
    let mut uid = false;
    if verb == "UID" {
        uid = true;
        let sub = tokens.next().ok_or(ImapParseError::MissingArguments("UID"))?;
        verb = format!("UID {}", sub.to_ascii_uppercase());
    }

    let command = match verb.as_str() {
        "LOGIN" => {
            let user = tokens.next().ok_or(ImapParseError::MissingArguments("LOGIN"))?;
            tokens.next().ok_or(ImapParseError::MissingArguments("LOGIN"))?;
            Command::Login { user }
        }
        "SELECT" | "EXAMINE" => {
            let mailbox = tokens.next().ok_or(ImapParseError::MissingArguments("SELECT"))?;
            Command::Select { mailbox }
        }
        "FETCH" | "UID FETCH" => {
            let set = tokens.next().ok_or(ImapParseError::MissingArguments("FETCH"))?;
            let rest: Vec<String> = tokens.collect();
            if rest.is_empty() {
                return Err(ImapParseError::MissingArguments("FETCH"));
            }
            Command::Fetch {
                uid,
                set: SequenceSet::parse(&set),
                items: FetchItems::parse(&rest.join(" ")),
            }
        }
        "LOGOUT" => Command::Logout,
        _ => Command::Opaque { verb },
    };
    Ok(ParsedCommand { tag, command })
}

/// How one upstream response line relates to the command awaiting it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseLine {
    Untagged,
    /// `+` — the server wants the announced literal now.
    Continuation,
    /// The final line for `tag`, carrying OK/NO/BAD.
    Tagged(TaggedStatus),
    /// A tagged line for some other tag (stale or interleaved).
    ForeignTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaggedStatus {
    Ok,
    No,
    Bad,
}

impl TaggedStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaggedStatus::Ok => "OK",
            TaggedStatus::No => "NO",
            TaggedStatus::Bad => "BAD",
        }
    }
}

pub fn classify_response(line: &[u8], tag: &str) -> ResponseLine {
    let text = String::from_utf8_lossy(strip_crlf(line));
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        None => ResponseLine::Untagged,
        Some("*") => ResponseLine::Untagged,
        Some("+") => ResponseLine::Continuation,
        Some(first) if first == tag => match tokens.next().map(|s| s.to_ascii_uppercase()) {
            Some(s) if s == "OK" => ResponseLine::Tagged(TaggedStatus::Ok),
            Some(s) if s == "NO" => ResponseLine::Tagged(TaggedStatus::No),
            _ => ResponseLine::Tagged(TaggedStatus::Bad),
        },
        Some(_) => ResponseLine::ForeignTag,
    }
}

/// A FETCH data response built from cache. The message's UID stands in
/// the sequence-number slot: the proxy does not track sequence numbers,
/// and clients addressing messages by UID key on the `UID n` pair anyway.
pub fn synthesized_fetch(uid: u32, section: &str, payload: &[u8]) -> Vec<u8> {
    let mut response =
        format!("* {uid} FETCH (UID {uid} {section} {{{}}}\r\n", payload.len()).into_bytes();
    response.extend_from_slice(payload);
    response.extend_from_slice(b")\r\n");
    response
}

pub fn tagged(tag: &str, status: TaggedStatus, text: &str) -> Vec<u8> {
    format!("{tag} {} {text}\r\n", status.as_str()).into_bytes()
}
