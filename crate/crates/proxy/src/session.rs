//! The proxy itself: accepts IMAP clients, relays them to one upstream
//! connection each, and short-circuits whole-message `UID FETCH` reads out
//! of the shared cache tier.
//!
//! Only `UID FETCH <uids> BODY[]` / `RFC822` on a selected mailbox is
//! answered from cache; sequence-number fetches, partial sections, and
//! anything else pass through untouched. Writes that can change a mailbox
//! (STORE, EXPUNGE, APPEND, CLOSE, and their UID forms) drop every cached
//! payload for the session's selected mailbox after they are relayed.

use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use greenproxy_core::cache::{CacheKey, CacheTier};
use thiserror::Error;

use crate::config::ProxyConfig;
use crate::imap::{
    classify_response, parse_command, synthesized_fetch, tagged, verb_mutates_mailbox, Command,
    FetchItems, ImapParseError, ResponseLine, SequenceSet, TaggedStatus,
};
use crate::ledger::TrafficLedger;
use crate::netutil::{read_line, read_literal, strip_crlf, trailing_literal};

const SESSION_READ_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("cache setup failed: {0}")]
    Cache(#[from] greenproxy_core::cache::CacheError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct ProxyShared {
    pub tier: CacheTier,
    pub ledger: TrafficLedger,
}

pub struct ProxyHandle {
    addr: SocketAddr,
    shared: Arc<ProxyShared>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

pub fn spawn_proxy(config: &ProxyConfig) -> Result<ProxyHandle, ProxyError> {
    let tier = CacheTier::new(
        config.cache.hash,
        config.cache.virtual_points,
        &config.cache.nodes,
    )?;
    let shared = Arc::new(ProxyShared { tier, ledger: TrafficLedger::new() });
    let listener = TcpListener::bind(&config.listen_addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let acceptor = {
        let shared = Arc::clone(&shared);
        let stop = Arc::clone(&stop);
        let upstream_addr = config.upstream_addr.clone();
        thread::spawn(move || loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let shared = Arc::clone(&shared);
                    let upstream_addr = upstream_addr.clone();
                    thread::spawn(move || {
                        if let Err(err) = run_session(stream, &shared, &upstream_addr) {
                            log::debug!("session ended with error: {err}");
                        }
                    });
                }
                Err(_) => {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                }
            }
        })
    };
    Ok(ProxyHandle { addr, shared, stop, acceptor: Some(acceptor) })
}

impl ProxyHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shared(&self) -> &ProxyShared {
        &self.shared
    }

    pub fn shutdown(mut self) {
        self.stop_acceptor();
    }

    fn stop_acceptor(&mut self) {
        if let Some(handle) = self.acceptor.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            let _ = handle.join();
        }
    }
}

impl Drop for ProxyHandle {
    fn drop(&mut self) {
        self.stop_acceptor();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    NotAuthenticated,
    Authenticated,
    Selected,
}

struct SessionState {
    phase: Phase,
    /// Login name, when the client authenticated with an inline LOGIN.
    /// Literal-based logins leave this unset and the session simply never
    /// caches.
    account: Option<String>,
    mailbox: Option<String>,
    gateway_seq: u64,
}

/// What pumping upstream responses ended on.
enum PumpOutcome {
    Done(TaggedStatus),
    Continuation,
}

fn run_session(client: TcpStream, shared: &ProxyShared, upstream_addr: &str) -> io::Result<()> {
    client.set_read_timeout(Some(SESSION_READ_TIMEOUT))?;
    let mut client_w = client.try_clone()?;
    let mut client_r = BufReader::new(client);

    let upstream = match TcpStream::connect(upstream_addr) {
        Ok(s) => s,
        Err(err) => {
            let _ = client_w.write_all(b"* BYE upstream unavailable\r\n");
            return Err(err);
        }
    };
    upstream.set_read_timeout(Some(SESSION_READ_TIMEOUT))?;
    let mut up_w = upstream.try_clone()?;
    let mut up_r = BufReader::new(upstream);

    // Upstream greets first; hand it to the client verbatim.
    let Some(greeting) = read_upstream_line(&mut up_r, &shared.ledger)? else {
        client_w.write_all(b"* BYE upstream closed before greeting\r\n")?;
        return Ok(());
    };
    client_w.write_all(&greeting)?;

    let mut st = SessionState {
        phase: Phase::NotAuthenticated,
        account: None,
        mailbox: None,
        gateway_seq: 0,
    };

    loop {
        let line = match read_line(&mut client_r) {
            Ok(Some(line)) => line,
            Ok(None) => break,
            Err(err) if err.kind() == io::ErrorKind::InvalidData => {
                let _ = client_w.write_all(b"* BAD line too long\r\n");
                break;
            }
            Err(err) => return Err(err),
        };

        // Commands that carry literals (APPEND, literal login arguments,
        // ...) skip parsing entirely and are bridged raw.
        if trailing_literal(&line).is_some() {
            let verb = raw_verb(&line);
            let status = match relay_command(
                &mut client_r,
                &mut client_w,
                &mut up_r,
                &mut up_w,
                &shared.ledger,
                &line,
            ) {
                Ok(status) => status,
                Err(err) => return upstream_lost(&mut client_w, err),
            };
            apply_opaque_effects(shared, &mut st, &verb, status);
            continue;
        }

        let parsed = match parse_command(&line) {
            Ok(parsed) => parsed,
            Err(err) => {
                client_w.write_all(&bad_response(&line, &err))?;
                continue;
            }
        };
        let tag = parsed.tag.clone();

        // Local state guards: don't bother the upstream with commands the
        // session cannot legally issue yet.
        let guard_error = match &parsed.command {
            Command::Select { .. } if st.phase == Phase::NotAuthenticated => {
                Some("SELECT before LOGIN")
            }
            Command::Fetch { .. } if st.phase != Phase::Selected => Some("FETCH before SELECT"),
            _ => None,
        };
        if let Some(reason) = guard_error {
            client_w.write_all(&tagged(&tag, TaggedStatus::Bad, reason))?;
            continue;
        }

        match parsed.command {
            Command::Fetch { uid: true, set: SequenceSet::Numbers(uids), items }
                if cache_section(&items).is_some()
                    && st.account.is_some()
                    && st.mailbox.is_some() =>
            {
                let section = cache_section(&items).unwrap();
                let outcome = serve_fetch_from_cache(
                    shared,
                    &mut client_r,
                    &mut client_w,
                    &mut up_r,
                    &mut up_w,
                    &mut st,
                    &tag,
                    &uids,
                    section,
                );
                if let Err(err) = outcome {
                    return upstream_lost(&mut client_w, err);
                }
            }
            command => {
                let status = match relay_command(
                    &mut client_r,
                    &mut client_w,
                    &mut up_r,
                    &mut up_w,
                    &shared.ledger,
                    &line,
                ) {
                    Ok(status) => status,
                    Err(err) => return upstream_lost(&mut client_w, err),
                };
                match command {
                    Command::Login { user } => {
                        if status == TaggedStatus::Ok {
                            st.phase = Phase::Authenticated;
                            st.account = Some(user);
                            st.mailbox = None;
                        }
                    }
                    Command::Select { mailbox } => {
                        if status == TaggedStatus::Ok {
                            st.phase = Phase::Selected;
                            st.mailbox = Some(mailbox);
                        }
                    }
                    Command::Logout => break,
                    Command::Opaque { verb } => {
                        apply_opaque_effects(shared, &mut st, &verb, status);
                    }
                    Command::Fetch { .. } => {}
                }
            }
        }
    }
    Ok(())
}

/// Mailbox-mutating commands invalidate whatever the session had cached
/// for its selected mailbox, whether or not the upstream accepted them —
/// a NO can still arrive after a partial change, and dropping cache
/// entries is always safe.
fn apply_opaque_effects(
    shared: &ProxyShared,
    st: &mut SessionState,
    verb: &str,
    status: TaggedStatus,
) {
    if verb_mutates_mailbox(verb) {
        if let (Some(account), Some(mailbox)) = (&st.account, &st.mailbox) {
            let dropped = shared.tier.invalidate_mailbox(account, mailbox);
            if dropped > 0 {
                log::debug!("{verb} invalidated {dropped} cached payloads in {mailbox}");
            }
        }
    }
    if verb == "CLOSE" && status == TaggedStatus::Ok {
        st.phase = Phase::Authenticated;
        st.mailbox = None;
    }
}

fn cache_section(items: &FetchItems) -> Option<&'static str> {
    items.cache_section()
}

fn raw_verb(line: &[u8]) -> String {
    let text = String::from_utf8_lossy(strip_crlf(line));
    let mut tokens = text.split_whitespace().skip(1);
    let mut verb = tokens.next().unwrap_or("").to_ascii_uppercase();
    if verb == "UID" {
        if let Some(sub) = tokens.next() {
            verb = format!("UID {}", sub.to_ascii_uppercase());
        }
    }
    verb
}

fn bad_response(line: &[u8], err: &ImapParseError) -> Vec<u8> {
    let text = String::from_utf8_lossy(strip_crlf(line));
    let tag = text.split_whitespace().next().unwrap_or("");
    match err {
        // The "tag" itself was a command verb, so there is nothing to echo.
        ImapParseError::MissingTag(_) | ImapParseError::Empty => {
            format!("* BAD {err}\r\n").into_bytes()
        }
        _ if !tag.is_empty() => tagged(tag, TaggedStatus::Bad, &err.to_string()),
        _ => format!("* BAD {err}\r\n").into_bytes(),
    }
}

fn upstream_lost(client_w: &mut TcpStream, err: io::Error) -> io::Result<()> {
    let _ = client_w.write_all(b"* BYE upstream connection lost\r\n");
    Err(err)
}

fn read_upstream_line(
    up_r: &mut BufReader<TcpStream>,
    ledger: &TrafficLedger,
) -> io::Result<Option<Vec<u8>>> {
    let line = read_line(up_r)?;
    if let Some(line) = &line {
        ledger.add_from_upstream(line.len() as u64);
    }
    Ok(line)
}

fn send_upstream(up_w: &mut TcpStream, ledger: &TrafficLedger, line: &[u8]) -> io::Result<()> {
    up_w.write_all(line)?;
    ledger.add_to_upstream(line.len() as u64);
    ledger.record_upstream_request();
    Ok(())
}

/// Relay one already-read client command line upstream and bridge traffic
/// until the upstream answers it with a tagged status. Handles sync and
/// non-sync literals from the client and continuation-driven exchanges
/// (IDLE-style) by bouncing single client lines through.
fn relay_command(
    client_r: &mut BufReader<TcpStream>,
    client_w: &mut TcpStream,
    up_r: &mut BufReader<TcpStream>,
    up_w: &mut TcpStream,
    ledger: &TrafficLedger,
    first_line: &[u8],
) -> io::Result<TaggedStatus> {
    let tag = {
        let text = String::from_utf8_lossy(strip_crlf(first_line));
        text.split_whitespace().next().unwrap_or("*").to_string()
    };
    send_upstream(up_w, ledger, first_line)?;
    let mut pending_literal = trailing_literal(first_line);

    loop {
        // Non-sync literals don't wait for permission.
        while let Some((len, true)) = pending_literal {
            pending_literal = forward_client_literal(client_r, up_w, ledger, len)?;
        }

        match pump_responses(up_r, client_w, ledger, &tag)? {
            PumpOutcome::Done(status) => return Ok(status),
            PumpOutcome::Continuation => {
                if let Some((len, false)) = pending_literal {
                    pending_literal = forward_client_literal(client_r, up_w, ledger, len)?;
                } else {
                    // No literal owed: the upstream wants free-form client
                    // input (IDLE's DONE, a SASL response, ...).
                    let Some(next) = read_line(client_r)? else {
                        return Err(io::Error::new(
                            io::ErrorKind::UnexpectedEof,
                            "client closed mid-exchange",
                        ));
                    };
                    up_w.write_all(&next)?;
                    ledger.add_to_upstream(next.len() as u64);
                    pending_literal = trailing_literal(&next);
                }
            }
        }
    }
}

/// Send `len` literal bytes plus the line that follows them upstream;
/// returns that line's own trailing literal, if any.
fn forward_client_literal(
    client_r: &mut BufReader<TcpStream>,
    up_w: &mut TcpStream,
    ledger: &TrafficLedger,
    len: usize,
) -> io::Result<Option<(usize, bool)>> {
    let bytes = read_literal(client_r, len)?;
    up_w.write_all(&bytes)?;
    ledger.add_to_upstream(bytes.len() as u64);
    let Some(next) = read_line(client_r)? else {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "client closed inside a literal command",
        ));
    };
    up_w.write_all(&next)?;
    ledger.add_to_upstream(next.len() as u64);
    Ok(trailing_literal(&next))
}

/// Forward upstream lines (and their literals) to the client until a
/// tagged status for `tag` or a continuation request shows up.
fn pump_responses(
    up_r: &mut BufReader<TcpStream>,
    client_w: &mut TcpStream,
    ledger: &TrafficLedger,
    tag: &str,
) -> io::Result<PumpOutcome> {
    loop {
        let Some(line) = read_line(up_r)? else {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "upstream closed mid-response",
            ));
        };
        ledger.add_from_upstream(line.len() as u64);
        match classify_response(&line, tag) {
            ResponseLine::Tagged(status) => {
                client_w.write_all(&line)?;
                return Ok(PumpOutcome::Done(status));
            }
            ResponseLine::Continuation => {
                client_w.write_all(&line)?;
                return Ok(PumpOutcome::Continuation);
            }
            // Untagged data, response closers, and anything else flow
            // through untouched.
            ResponseLine::Untagged | ResponseLine::ForeignTag => {
                client_w.write_all(&line)?;
                if let Some((len, _)) = trailing_literal(&line) {
                    let bytes = read_literal(up_r, len)?;
                    ledger.add_from_upstream(bytes.len() as u64);
                    client_w.write_all(&bytes)?;
                }
            }
        }
    }
}

enum GatewayOutcome {
    /// Upstream said OK; holds the first FETCH literal that streamed by.
    Delivered(Option<Vec<u8>>),
    Refused,
}

/// Answer a cacheable `UID FETCH` one uid at a time: cache hits are
/// synthesized locally, misses are fetched through a private gateway
/// command whose tagged reply never reaches the client. The proxy closes
/// the exchange with its own tagged line.
#[allow(clippy::too_many_arguments)]
fn serve_fetch_from_cache(
    shared: &ProxyShared,
    _client_r: &mut BufReader<TcpStream>,
    client_w: &mut TcpStream,
    up_r: &mut BufReader<TcpStream>,
    up_w: &mut TcpStream,
    st: &mut SessionState,
    tag: &str,
    uids: &[u32],
    section: &str,
) -> io::Result<()> {
    let account = st.account.clone().expect("cached path requires an account");
    let mailbox = st.mailbox.clone().expect("cached path requires a mailbox");
    for &uid in uids {
        let key = CacheKey::new(&account, &mailbox, uid, section);
        if let Ok(Some(payload)) = shared.tier.get(&key) {
            shared.ledger.record_hit(payload.len() as u64);
            client_w.write_all(&synthesized_fetch(uid, section, &payload))?;
            continue;
        }
        shared.ledger.record_miss();
        match gateway_fetch(up_r, up_w, client_w, &shared.ledger, &mut st.gateway_seq, uid, section)?
        {
            GatewayOutcome::Delivered(Some(payload)) => {
                shared.ledger.add_miss_bytes(payload.len() as u64);
                if let Err(err) = shared.tier.set(&key, payload) {
                    // An oversized payload still reached the client; it
                    // just never becomes a hit.
                    log::debug!("not caching {uid}: {err}");
                }
            }
            GatewayOutcome::Delivered(None) => {
                // Upstream had nothing for this uid (expunged or never
                // existed); OK with no data is a valid reply.
            }
            GatewayOutcome::Refused => {
                client_w.write_all(&tagged(tag, TaggedStatus::No, "upstream rejected the fetch"))?;
                return Ok(());
            }
        }
    }
    client_w.write_all(&tagged(tag, TaggedStatus::Ok, "FETCH completed"))?;
    Ok(())
}

/// One `UID FETCH uid section` round-trip on the shared upstream
/// connection under a proxy-private tag. Data lines are relayed to the
/// client as they arrive; the tagged status is swallowed.
fn gateway_fetch(
    up_r: &mut BufReader<TcpStream>,
    up_w: &mut TcpStream,
    client_w: &mut TcpStream,
    ledger: &TrafficLedger,
    gateway_seq: &mut u64,
    uid: u32,
    section: &str,
) -> io::Result<GatewayOutcome> {
    let tag = format!("g{}", *gateway_seq);
    *gateway_seq += 1;
    let command = format!("{tag} UID FETCH {uid} {section}\r\n");
    send_upstream(up_w, ledger, command.as_bytes())?;

    let mut captured: Option<Vec<u8>> = None;
    loop {
        let Some(line) = read_line(up_r)? else {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "upstream closed during gateway fetch",
            ));
        };
        ledger.add_from_upstream(line.len() as u64);
        match classify_response(&line, &tag) {
            ResponseLine::Tagged(TaggedStatus::Ok) => return Ok(GatewayOutcome::Delivered(captured)),
            ResponseLine::Tagged(_) => return Ok(GatewayOutcome::Refused),
            _ => {
                client_w.write_all(&line)?;
                if let Some((len, _)) = trailing_literal(&line) {
                    let bytes = read_literal(up_r, len)?;
                    ledger.add_from_upstream(bytes.len() as u64);
                    client_w.write_all(&bytes)?;
                    if captured.is_none() && is_fetch_data_line(&line) {
                        captured = Some(bytes);
                    }
                }
            }
        }
    }
}

fn is_fetch_data_line(line: &[u8]) -> bool {
    let text = String::from_utf8_lossy(line);
    text.starts_with("* ") && text.to_ascii_uppercase().contains(" FETCH ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_verb_folds_uid_prefix() {
        assert_eq!(raw_verb(b"a1 UID store 1 flags\r\n"), "UID STORE");
        assert_eq!(raw_verb(b"a1 Append INBOX {3}\r\n"), "APPEND");
        assert_eq!(raw_verb(b"\r\n"), "");
    }

    #[test]
    fn bad_response_prefers_the_client_tag() {
        let out = bad_response(b"a9 LOGIN onlyuser\r\n", &ImapParseError::MissingArguments("LOGIN"));
        assert!(out.starts_with(b"a9 BAD"), "{:?}", String::from_utf8_lossy(&out));
        let out = bad_response(b"LOGIN a b\r\n", &ImapParseError::MissingTag("LOGIN".into()));
        assert!(out.starts_with(b"* BAD"));
    }

    #[test]
    fn fetch_data_line_detection() {
        assert!(is_fetch_data_line(b"* 3 FETCH (UID 3 BODY[] {12}\r\n"));
        assert!(!is_fetch_data_line(b"* 3 EXISTS\r\n"));
        assert!(!is_fetch_data_line(b")\r\n"));
    }
}
