//! Line and literal primitives for IMAP's wire format: CRLF-terminated
//! lines that may announce a counted byte literal (`{512}` or the
//! non-synchronizing `{512+}`) as their final token.

use std::io::{self, BufRead};

/// Commands and response lines longer than this are refused outright.
pub const MAX_LINE: usize = 64 * 1024;
/// Upper bound on a single literal; bigger announcements are treated as
/// protocol abuse rather than honored.
pub const MAX_LITERAL: usize = 64 * 1024 * 1024;

/// Reads one line including its terminator. Returns `None` on a clean
/// EOF before any byte. Lines that outgrow `MAX_LINE` without a newline
/// are an error, as is an EOF in the middle of a line.
pub fn read_line<R: BufRead>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut line = Vec::new();
    loop {
        let available = reader.fill_buf()?;
        if available.is_empty() {
            return if line.is_empty() {
                Ok(None)
            } else {
                Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection died mid-line"))
            };
        }
        match available.iter().position(|&b| b == b'\n') {
            Some(idx) => {
                line.extend_from_slice(&available[..=idx]);
                reader.consume(idx + 1);
                if line.len() > MAX_LINE {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long"));
                }
                return Ok(Some(line));
            }
            None => {
                line.extend_from_slice(available);
                let taken = available.len();
                reader.consume(taken);
                if line.len() > MAX_LINE {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long"));
                }
            }
        }
    }
}

/// If the line's last token announces a literal, returns its byte count
/// and whether it is non-synchronizing (`{n+}`).
pub fn trailing_literal(line: &[u8]) -> Option<(usize, bool)> {
    let trimmed = strip_crlf(line);
    if !trimmed.ends_with(b"}") {
        return None;
    }
    let open = trimmed.iter().rposition(|&b| b == b'{')?;
    let inner = &trimmed[open + 1..trimmed.len() - 1];
    let (digits, plus) = match inner.split_last() {
        Some((b'+', rest)) => (rest, true),
        _ => (inner, false),
    };
    if digits.is_empty() || !digits.iter().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let value: usize = std::str::from_utf8(digits).ok()?.parse().ok()?;
    Some((value, plus))
}

/// Reads exactly `len` literal bytes.
pub fn read_literal<R: BufRead>(reader: &mut R, len: usize) -> io::Result<Vec<u8>> {
    if len > MAX_LITERAL {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "literal too large"));
    }
    let mut payload = vec![0u8; len];
    reader.read_exact(&mut payload)?;
    Ok(payload)
}

pub fn strip_crlf(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}
