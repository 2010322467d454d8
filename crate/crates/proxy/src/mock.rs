//! A small in-process IMAP server for exercising the proxy: fixture
//! accounts, per-verb command counters, an optional response delay, and a
//! fault knob that truncates FETCH literals mid-payload.

use std::collections::HashMap;
use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::netutil::{read_line, read_literal, strip_crlf, trailing_literal};

pub const GREETING: &[u8] = b"* OK mock IMAP server ready\r\n";

#[derive(Debug, Clone)]
pub struct MockMessage {
    pub uid: u32,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct MockAccount {
    pub password: String,
    pub mailboxes: HashMap<String, Vec<MockMessage>>,
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub accounts: HashMap<String, MockAccount>,
    /// Injected before every FETCH response.
    pub latency: Duration,
    /// Announce the full literal length but send only half of it, then
    /// drop the connection. Exercises the proxy's partial-response path.
    pub truncate_fetch_payload: bool,
    /// Answer every FETCH with a tagged NO.
    pub fail_fetch: bool,
}

impl MockConfig {
    /// Two accounts; alice's INBOX holds `messages` bodies of assorted
    /// sizes with uids 1..=n.
    pub fn fixture(messages: u32) -> Self {
        let mut accounts = HashMap::new();
        let inbox: Vec<MockMessage> = (1..=messages)
            .map(|uid| {
                let body = format!(
                    "From: mock@example.test\r\nSubject: message {uid}\r\n\r\n{}",
                    "z".repeat(200 + (uid as usize * 37) % 900)
                );
                MockMessage { uid, body: body.into_bytes() }
            })
            .collect();
        accounts.insert(
            "alice".to_string(),
            MockAccount {
                password: "secret".to_string(),
                mailboxes: HashMap::from([
                    ("INBOX".to_string(), inbox),
                    ("Archive".to_string(), Vec::new()),
                ]),
            },
        );
        accounts.insert(
            "bob".to_string(),
            MockAccount {
                password: "hunter2".to_string(),
                mailboxes: HashMap::from([(
                    "INBOX".to_string(),
                    vec![MockMessage { uid: 1, body: b"From: bob\r\n\r\nbob's one mail".to_vec() }],
                )]),
            },
        );
        MockConfig {
            accounts,
            latency: Duration::ZERO,
            truncate_fetch_payload: false,
            fail_fetch: false,
        }
    }
}

struct MockState {
    accounts: Mutex<HashMap<String, MockAccount>>,
    counts: Mutex<HashMap<String, u64>>,
    latency: Duration,
    truncate_fetch_payload: bool,
    fail_fetch: bool,
}

pub struct MockUpstream {
    addr: SocketAddr,
    state: Arc<MockState>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

pub fn spawn_mock(config: MockConfig, listen: &str) -> io::Result<MockUpstream> {
    let listener = TcpListener::bind(listen)?;
    let addr = listener.local_addr()?;
    let state = Arc::new(MockState {
        accounts: Mutex::new(config.accounts),
        counts: Mutex::new(HashMap::new()),
        latency: config.latency,
        truncate_fetch_payload: config.truncate_fetch_payload,
        fail_fetch: config.fail_fetch,
    });
    let stop = Arc::new(AtomicBool::new(false));
    let acceptor = {
        let state = Arc::clone(&state);
        let stop = Arc::clone(&stop);
        thread::spawn(move || loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let state = Arc::clone(&state);
                    thread::spawn(move || {
                        let _ = serve_connection(stream, &state);
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
    Ok(MockUpstream { addr, state, stop, acceptor: Some(acceptor) })
}

impl MockUpstream {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Commands served so far for a canonical verb (`UID FETCH` counts
    /// as `FETCH`, and so on).
    pub fn command_count(&self, verb: &str) -> u64 {
        *self.state.counts.lock().unwrap().get(&verb.to_ascii_uppercase()).unwrap_or(&0)
    }

    pub fn shutdown(mut self) {
        self.stop_acceptor();
    }

    fn stop_acceptor(&mut self) {
        if let Some(handle) = self.acceptor.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Nudge the blocking accept so the loop observes the flag.
            let _ = TcpStream::connect(self.addr);
            let _ = handle.join();
        }
    }
}

impl Drop for MockUpstream {
    fn drop(&mut self) {
        self.stop_acceptor();
    }
}

fn bump(state: &MockState, verb: &str) {
    *state.counts.lock().unwrap().entry(verb.to_string()).or_insert(0) += 1;
}

fn expand_set(raw: &str, available: &[u32]) -> Vec<u32> {
    let max = available.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    for part in raw.split(',') {
        let parse_bound = |s: &str| -> Option<u32> {
            if s == "*" {
                Some(max)
            } else {
                s.parse().ok()
            }
        };
        match part.split_once(':') {
            None => {
                if let Some(n) = parse_bound(part) {
                    out.push(n);
                }
            }
            Some((a, b)) => {
                if let (Some(x), Some(y)) = (parse_bound(a), parse_bound(b)) {
                    out.extend(x.min(y)..=x.max(y));
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn serve_connection(stream: TcpStream, state: &MockState) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(120)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    writer.write_all(GREETING)?;

    let mut user: Option<String> = None;
    let mut selected: Option<String> = None;

    while let Some(line) = read_line(&mut reader)? {
        let text = String::from_utf8_lossy(strip_crlf(&line)).to_string();
        let mut tokens = text.split_whitespace();
        let tag = match tokens.next() {
            Some(t) => t.to_string(),
            None => {
                writer.write_all(b"* BAD empty command\r\n")?;
                continue;
            }
        };
        let mut verb = match tokens.next() {
            Some(v) => v.to_ascii_uppercase(),
            None => {
                writer.write_all(format!("{tag} BAD missing command\r\n").as_bytes())?;
                continue;
            }
        };
        if verb == "UID" {
            verb = tokens.next().map(|v| v.to_ascii_uppercase()).unwrap_or_default();
        }
        bump(state, &verb);
        let rest: Vec<String> = tokens.map(|t| t.to_string()).collect();

        match verb.as_str() {
            "LOGIN" => {
                let (u, p) = (
                    rest.first().map(|s| s.trim_matches('"').to_string()).unwrap_or_default(),
                    rest.get(1).map(|s| s.trim_matches('"').to_string()).unwrap_or_default(),
                );
                let ok = state
                    .accounts
                    .lock()
                    .unwrap()
                    .get(&u)
                    .map(|a| a.password == p)
                    .unwrap_or(false);
                if ok {
                    user = Some(u);
                    writer.write_all(format!("{tag} OK LOGIN completed\r\n").as_bytes())?;
                } else {
                    writer.write_all(format!("{tag} NO invalid credentials\r\n").as_bytes())?;
                }
            }
            "SELECT" | "EXAMINE" => {
                let mailbox =
                    rest.first().map(|s| s.trim_matches('"').to_string()).unwrap_or_default();
                let count = user.as_ref().and_then(|u| {
                    state.accounts.lock().unwrap().get(u)?.mailboxes.get(&mailbox).map(Vec::len)
                });
                match count {
                    Some(n) => {
                        selected = Some(mailbox);
                        writer.write_all(format!("* {n} EXISTS\r\n").as_bytes())?;
                        writer.write_all(
                            format!("{tag} OK [READ-WRITE] SELECT completed\r\n").as_bytes(),
                        )?;
                    }
                    None => {
                        writer
                            .write_all(format!("{tag} NO no such mailbox\r\n").as_bytes())?;
                    }
                }
            }
            "FETCH" => {
                if !state.latency.is_zero() {
                    thread::sleep(state.latency);
                }
                if state.fail_fetch {
                    writer.write_all(format!("{tag} NO FETCH refused\r\n").as_bytes())?;
                    continue;
                }
                let (Some(u), Some(mb)) = (user.as_ref(), selected.as_ref()) else {
                    writer.write_all(format!("{tag} NO nothing selected\r\n").as_bytes())?;
                    continue;
                };
                let messages: Vec<MockMessage> = state
                    .accounts
                    .lock()
                    .unwrap()
                    .get(u)
                    .and_then(|a| a.mailboxes.get(mb))
                    .cloned()
                    .unwrap_or_default();
                let uids: Vec<u32> = messages.iter().map(|m| m.uid).collect();
                let wanted = expand_set(rest.first().map(String::as_str).unwrap_or(""), &uids);
                let item = if rest.iter().any(|t| t.to_ascii_uppercase().contains("RFC822")) {
                    "RFC822"
                } else {
                    "BODY[]"
                };
                for uid in wanted {
                    let Some(pos) = messages.iter().position(|m| m.uid == uid) else {
                        continue;
                    };
                    let body = &messages[pos].body;
                    let header = format!(
                        "* {} FETCH (UID {uid} {item} {{{}}}\r\n",
                        pos + 1,
                        body.len()
                    );
                    writer.write_all(header.as_bytes())?;
                    if state.truncate_fetch_payload {
                        writer.write_all(&body[..body.len() / 2])?;
                        writer.flush()?;
                        // Die mid-literal: the proxy must treat the whole
                        // exchange as failed and cache nothing.
                        return Ok(());
                    }
                    writer.write_all(body)?;
                    writer.write_all(b")\r\n")?;
                }
                writer.write_all(format!("{tag} OK FETCH completed\r\n").as_bytes())?;
            }
            "STORE" => {
                writer.write_all(b"* 1 FETCH (FLAGS (\\Seen))\r\n")?;
                writer.write_all(format!("{tag} OK STORE completed\r\n").as_bytes())?;
            }
            "EXPUNGE" => {
                writer.write_all(b"* 1 EXPUNGE\r\n")?;
                writer.write_all(format!("{tag} OK EXPUNGE completed\r\n").as_bytes())?;
            }
            "APPEND" => {
                let Some((len, nonsync)) = trailing_literal(&line) else {
                    writer.write_all(format!("{tag} BAD missing literal\r\n").as_bytes())?;
                    continue;
                };
                if !nonsync {
                    writer.write_all(b"+ Ready for literal data\r\n")?;
                }
                let body = read_literal(&mut reader, len)?;
                let _ = read_line(&mut reader)?; // the CRLF finishing the command
                let mailbox =
                    rest.first().map(|s| s.trim_matches('"').to_string()).unwrap_or_default();
                if let Some(u) = user.as_ref() {
                    let mut accounts = state.accounts.lock().unwrap();
                    if let Some(list) =
                        accounts.get_mut(u).and_then(|a| a.mailboxes.get_mut(&mailbox))
                    {
                        let uid = list.iter().map(|m| m.uid).max().unwrap_or(0) + 1;
                        list.push(MockMessage { uid, body });
                        writer.write_all(
                            format!("{tag} OK [APPENDUID 1 {uid}] APPEND completed\r\n")
                                .as_bytes(),
                        )?;
                        continue;
                    }
                }
                writer.write_all(format!("{tag} NO no such mailbox\r\n").as_bytes())?;
            }
            "NOOP" | "CHECK" => {
                writer.write_all(format!("{tag} OK {verb} completed\r\n").as_bytes())?;
            }
            "CAPABILITY" => {
                writer.write_all(b"* CAPABILITY IMAP4rev1\r\n")?;
                writer.write_all(format!("{tag} OK CAPABILITY completed\r\n").as_bytes())?;
            }
            "LIST" => {
                if let Some(u) = user.as_ref() {
                    let accounts = state.accounts.lock().unwrap();
                    if let Some(account) = accounts.get(u) {
                        let mut names: Vec<&String> = account.mailboxes.keys().collect();
                        names.sort();
                        for name in names {
                            writer.write_all(
                                format!("* LIST () \"/\" \"{name}\"\r\n").as_bytes(),
                            )?;
                        }
                    }
                }
                writer.write_all(format!("{tag} OK LIST completed\r\n").as_bytes())?;
            }
            "LOGOUT" => {
                writer.write_all(b"* BYE mock signing off\r\n")?;
                writer.write_all(format!("{tag} OK LOGOUT completed\r\n").as_bytes())?;
                break;
            }
            _ => {
                writer.write_all(format!("{tag} BAD unknown command\r\n").as_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufRead;

    fn connect(mock: &MockUpstream) -> (BufReader<TcpStream>, TcpStream) {
        let stream = TcpStream::connect(mock.addr()).unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        (reader, stream)
    }

    fn expect_line(reader: &mut BufReader<TcpStream>) -> String {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        line
    }

    #[test]
    fn serves_login_select_fetch() {
        let mock = spawn_mock(MockConfig::fixture(3), "127.0.0.1:0").unwrap();
        let (mut reader, mut writer) = connect(&mock);
        assert!(expect_line(&mut reader).starts_with("* OK mock"));

        writer.write_all(b"a1 LOGIN alice secret\r\n").unwrap();
        assert!(expect_line(&mut reader).starts_with("a1 OK"));

        writer.write_all(b"a2 SELECT INBOX\r\n").unwrap();
        assert_eq!(expect_line(&mut reader), "* 3 EXISTS\r\n");
        assert!(expect_line(&mut reader).starts_with("a2 OK"));

        writer.write_all(b"a3 UID FETCH 2 BODY[]\r\n").unwrap();
        let header = expect_line(&mut reader);
        assert!(header.starts_with("* 2 FETCH (UID 2 BODY[] {"), "{header}");
        let len = trailing_literal(header.as_bytes()).unwrap().0;
        let body = read_literal(&mut reader, len).unwrap();
        assert!(body.starts_with(b"From: mock@example.test"));
        assert_eq!(expect_line(&mut reader), ")\r\n");
        assert!(expect_line(&mut reader).starts_with("a3 OK"));

        assert_eq!(mock.command_count("LOGIN"), 1);
        assert_eq!(mock.command_count("FETCH"), 1);
        assert_eq!(mock.command_count("SELECT"), 1);
        mock.shutdown();
    }

    #[test]
    fn rejects_bad_credentials_and_unknown_mailboxes() {
        let mock = spawn_mock(MockConfig::fixture(1), "127.0.0.1:0").unwrap();
        let (mut reader, mut writer) = connect(&mock);
        expect_line(&mut reader);
        writer.write_all(b"a1 LOGIN alice wrong\r\n").unwrap();
        assert!(expect_line(&mut reader).starts_with("a1 NO"));
        writer.write_all(b"a2 LOGIN alice secret\r\n").unwrap();
        expect_line(&mut reader);
        writer.write_all(b"a3 SELECT Nope\r\n").unwrap();
        assert!(expect_line(&mut reader).starts_with("a3 NO"));
    }

    #[test]
    fn append_grows_the_mailbox() {
        let mock = spawn_mock(MockConfig::fixture(2), "127.0.0.1:0").unwrap();
        let (mut reader, mut writer) = connect(&mock);
        expect_line(&mut reader);
        writer.write_all(b"a1 LOGIN alice secret\r\n").unwrap();
        expect_line(&mut reader);
        writer.write_all(b"a2 APPEND INBOX {7}\r\n").unwrap();
        assert!(expect_line(&mut reader).starts_with("+ "));
        writer.write_all(b"new one\r\n").unwrap();
        assert!(expect_line(&mut reader).starts_with("a2 OK"));
        writer.write_all(b"a3 SELECT INBOX\r\n").unwrap();
        assert_eq!(expect_line(&mut reader), "* 3 EXISTS\r\n");
        expect_line(&mut reader);
        writer.write_all(b"a4 UID FETCH 3 BODY[]\r\n").unwrap();
        let header = expect_line(&mut reader);
        let len = trailing_literal(header.as_bytes()).unwrap().0;
        assert_eq!(read_literal(&mut reader, len).unwrap(), b"new one");
    }

    #[test]
    fn truncation_fault_kills_the_connection_mid_literal() {
        let mut config = MockConfig::fixture(1);
        config.truncate_fetch_payload = true;
        let mock = spawn_mock(config, "127.0.0.1:0").unwrap();
        let (mut reader, mut writer) = connect(&mock);
        expect_line(&mut reader);
        writer.write_all(b"a1 LOGIN alice secret\r\n").unwrap();
        expect_line(&mut reader);
        writer.write_all(b"a2 SELECT INBOX\r\n").unwrap();
        expect_line(&mut reader);
        expect_line(&mut reader);
        writer.write_all(b"a3 UID FETCH 1 BODY[]\r\n").unwrap();
        let header = expect_line(&mut reader);
        let len = trailing_literal(header.as_bytes()).unwrap().0;
        assert!(read_literal(&mut reader, len).is_err(), "literal should be cut short");
    }
}
