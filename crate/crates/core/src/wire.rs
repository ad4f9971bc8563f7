//! Line-oriented request/response client shared by external oracles, the
//! external summarizer and the wire policy.
//!
//! Endpoints are `tcp://host:port` or `exec:<shell command>`. One request is
//! in flight per connection. After a timeout the connection is dropped and
//! reopened on the next request so a late reply cannot desynchronize it.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("bad endpoint {0:?}: expected tcp://host:port or exec:<command>")]
    BadEndpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("peer closed the connection")]
    Closed,
    #[error("protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Exec(String),
}

impl FromStr for Endpoint {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(WireError::BadEndpoint(s.to_string()));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(WireError::BadEndpoint(s.to_string()));
            }
            Ok(Endpoint::Exec(cmd.to_string()))
        } else {
            Err(WireError::BadEndpoint(s.to_string()))
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            Endpoint::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

enum Transport {
    Tcp {
        writer: TcpStream,
        reader: BufReader<TcpStream>,
    },
    Process {
        child: Child,
        stdin: ChildStdin,
        lines: Receiver<io::Result<String>>,
    },
}

impl Drop for Transport {
    fn drop(&mut self) {
        if let Transport::Process { child, .. } = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Reply to a request: `OK <payload>` or `ERR <message>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ok(String),
    Err(String),
}

pub fn parse_reply(line: &str) -> Result<Reply, WireError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let (head, rest) = match line.split_once(' ') {
        Some((h, r)) => (h, r),
        None => (line, ""),
    };
    match head {
        "OK" => Ok(Reply::Ok(rest.to_string())),
        "ERR" => Ok(Reply::Err(rest.to_string())),
        _ => Err(WireError::Protocol(format!("unexpected reply {line:?}"))),
    }
}

pub struct LineClient {
    endpoint: Endpoint,
    timeout: Duration,
    transport: Option<Transport>,
}

impl LineClient {
    /// Connects lazily on first request.
    pub fn new(endpoint: Endpoint, timeout: Duration) -> LineClient {
        LineClient {
            endpoint,
            timeout,
            transport: None,
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn open(&self) -> Result<Transport, WireError> {
        match &self.endpoint {
            Endpoint::Tcp(addr) => {
                let sock = addr
                    .to_socket_addrs()?
                    .next()
                    .ok_or_else(|| WireError::BadEndpoint(addr.clone()))?;
                let stream = TcpStream::connect_timeout(&sock, self.timeout)?;
                stream.set_read_timeout(Some(self.timeout))?;
                stream.set_write_timeout(Some(self.timeout))?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                Ok(Transport::Tcp {
                    writer: stream,
                    reader,
                })
            }
            Endpoint::Exec(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let (tx, rx) = mpsc::channel();
                thread::spawn(move || {
                    let mut reader = BufReader::new(stdout);
                    loop {
                        let mut line = String::new();
                        match reader.read_line(&mut line) {
                            Ok(0) => break,
                            Ok(_) => {
                                if tx.send(Ok(line)).is_err() {
                                    break;
                                }
                            }
                            Err(e) => {
                                let _ = tx.send(Err(e));
                                break;
                            }
                        }
                    }
                });
                Ok(Transport::Process {
                    child,
                    stdin,
                    lines: rx,
                })
            }
        }
    }

    /// Sends one line (a newline is appended) and returns the reply line
    /// without its terminator.
    pub fn request(&mut self, line: &str) -> Result<String, WireError> {
        if line.contains('\n') {
            return Err(WireError::Protocol("request contains a newline".into()));
        }
        if self.transport.is_none() {
            self.transport = Some(self.open()?);
        }
        let result = self.exchange(line);
        if result.is_err() {
            self.transport = None;
        }
        result
    }

    fn exchange(&mut self, line: &str) -> Result<String, WireError> {
        let timeout = self.timeout;
        let transport = self.transport.as_mut().expect("opened");
        let reply = match transport {
            Transport::Tcp { writer, reader } => {
                writer.write_all(line.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
                let mut buf = String::new();
                match reader.read_line(&mut buf) {
                    Ok(0) => return Err(WireError::Closed),
                    Ok(_) => buf,
                    Err(e)
                        if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                    {
                        return Err(WireError::Timeout(timeout))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Transport::Process { stdin, lines, .. } => {
                writeln!(stdin, "{line}").map_err(|e| match e.kind() {
                    io::ErrorKind::BrokenPipe => WireError::Closed,
                    _ => e.into(),
                })?;
                stdin.flush()?;
                match lines.recv_timeout(timeout) {
                    Ok(r) => r?,
                    Err(RecvTimeoutError::Timeout) => return Err(WireError::Timeout(timeout)),
                    Err(RecvTimeoutError::Disconnected) => return Err(WireError::Closed),
                }
            }
        };
        Ok(reply.trim_end_matches(['\r', '\n']).to_string())
    }

    /// `request` followed by `parse_reply`.
    pub fn call(&mut self, line: &str) -> Result<Reply, WireError> {
        parse_reply(&self.request(line)?)
    }
}

impl std::fmt::Debug for LineClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineClient")
            .field("endpoint", &self.endpoint)
            .field("timeout", &self.timeout)
            .field("connected", &self.transport.is_some())
            .finish()
    }
}
