//! Local streaming service.
//!
//! Each TCP connection carries two kinds of client records, told apart by
//! their first byte:
//!
//! * `{` starts a control record: one JSON object terminated by `\n`.
//!   `{"type":"hello","config":{...}}`, `{"type":"snapshot_request"}`,
//!   `{"type":"calibrate","x":160,"y":120,"window":3}`, `{"type":"start"}`,
//!   `{"type":"stop"}`.
//! * `G` starts a binary `GFRM` frame record.
//!
//! The server answers with JSON lines. Every frame record is answered by the
//! events it produced (`{"type":"event",...}`) followed by a
//! `{"type":"frame","index":k,"events":n}` acknowledgement, so the responses
//! for frame `k` are complete before frame `k + 1` is read. Protocol
//! violations get `{"type":"error","code":...,"detail":...}` and the
//! connection is closed.

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::color::{calibrate_signature, ChromaSignature};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::frame_io::{encode_gfrm, read_gfrm_body, IndexedFrame, GFRM_MAGIC};
use crate::gesture::MouseEvent;
use crate::image::Frame;
use crate::mapping::{Dims, PixelPoint};
use crate::pipeline::Pipeline;

const MAX_CONTROL_LINE: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        #[serde(default)]
        config: Option<EngineConfig>,
    },
    SnapshotRequest,
    Calibrate {
        x: f64,
        y: f64,
        #[serde(default = "default_window")]
        window: usize,
    },
    Start,
    Stop,
}

fn default_window() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub y: f64,
    pub cb: f64,
    pub cr: f64,
    pub threshold: f64,
}

impl From<&ChromaSignature> for SignatureRecord {
    fn from(s: &ChromaSignature) -> Self {
        SignatureRecord {
            y: s.target.y,
            cb: s.target.cb,
            cr: s.target.cr,
            threshold: s.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Ready { cam: Dims, screen: Dims },
    SnapshotPending,
    Calibrated { signature: SignatureRecord },
    Started,
    Stopped,
    Event(MouseEvent),
    Frame { index: u32, events: usize },
    Error { code: String, detail: String },
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }
}

/// A protocol violation: reported to the client, then the connection closes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError {
    pub code: &'static str,
    pub detail: String,
}

impl ProtocolError {
    fn new(code: &'static str, detail: impl Into<String>) -> Self {
        ProtocolError {
            code,
            detail: detail.into(),
        }
    }

    pub fn to_message(&self) -> ServerMessage {
        ServerMessage::Error {
            code: self.code.to_string(),
            detail: self.detail.clone(),
        }
    }
}

type Reply = std::result::Result<Vec<ServerMessage>, ProtocolError>;

#[derive(Debug)]
enum Phase {
    AwaitHello,
    Snapshot,
    Live(Box<Pipeline>),
}

/// Transport-independent per-connection state.
#[derive(Debug)]
pub struct Session {
    base: EngineConfig,
    config: EngineConfig,
    phase: Phase,
    snapshot: Option<Frame>,
    signature: Option<ChromaSignature>,
}

impl Session {
    pub fn new(base: EngineConfig) -> Self {
        Session {
            config: base.clone(),
            base,
            phase: Phase::AwaitHello,
            snapshot: None,
            signature: None,
        }
    }

    pub fn signature(&self) -> Option<&ChromaSignature> {
        self.signature.as_ref()
    }

    pub fn is_live(&self) -> bool {
        matches!(self.phase, Phase::Live(_))
    }

    pub fn handle_control(&mut self, msg: ClientMessage) -> Reply {
        if matches!(self.phase, Phase::AwaitHello) && !matches!(msg, ClientMessage::Hello { .. }) {
            return Err(ProtocolError::new("no_hello", "first record must be hello"));
        }
        match msg {
            ClientMessage::Hello { config } => {
                if !matches!(self.phase, Phase::AwaitHello) {
                    return Err(ProtocolError::new("unexpected_hello", "session already started"));
                }
                let config = config.unwrap_or_else(|| self.base.clone());
                config
                    .validate()
                    .map_err(|e| ProtocolError::new("bad_config", e.to_string()))?;
                self.config = config;
                self.phase = Phase::Snapshot;
                Ok(vec![ServerMessage::Ready {
                    cam: self.config.cam,
                    screen: self.config.screen,
                }])
            }
            ClientMessage::SnapshotRequest => {
                self.phase = Phase::Snapshot;
                self.snapshot = None;
                Ok(vec![ServerMessage::SnapshotPending])
            }
            ClientMessage::Calibrate { x, y, window } => {
                if self.is_live() {
                    return Err(ProtocolError::new("bad_phase", "stop before recalibrating"));
                }
                let snapshot = self
                    .snapshot
                    .as_ref()
                    .ok_or_else(|| ProtocolError::new("no_snapshot", "send a frame before calibrating"))?;
                let sig = calibrate_signature(snapshot, PixelPoint::new(x, y), window, self.config.threshold)
                    .and_then(|s| ChromaSignature::new(s.target, self.config.threshold_for_luma(s.target.y)))
                    .map_err(|e| ProtocolError::new("bad_calibration", e.to_string()))?;
                self.signature = Some(sig);
                Ok(vec![ServerMessage::Calibrated {
                    signature: SignatureRecord::from(&sig),
                }])
            }
            ClientMessage::Start => {
                if self.is_live() {
                    return Err(ProtocolError::new("bad_phase", "already started"));
                }
                let sig = self
                    .signature
                    .ok_or_else(|| ProtocolError::new("not_calibrated", "calibrate before start"))?;
                let pipeline = Pipeline::new(self.config.clone(), sig)
                    .map_err(|e| ProtocolError::new("bad_config", e.to_string()))?;
                self.phase = Phase::Live(Box::new(pipeline));
                Ok(vec![ServerMessage::Started])
            }
            ClientMessage::Stop => {
                if !self.is_live() {
                    return Err(ProtocolError::new("bad_phase", "not started"));
                }
                self.phase = Phase::Snapshot;
                Ok(vec![ServerMessage::Stopped])
            }
        }
    }

    pub fn handle_frame(&mut self, rec: IndexedFrame) -> Reply {
        if rec.frame.dims() != self.config.cam {
            return Err(ProtocolError::new(
                "dims_mismatch",
                format!("frame is {}, session expects {}", rec.frame.dims(), self.config.cam),
            ));
        }
        match &mut self.phase {
            Phase::AwaitHello => Err(ProtocolError::new("no_hello", "first record must be hello")),
            Phase::Snapshot => {
                self.snapshot = Some(rec.frame);
                Ok(vec![ServerMessage::Frame {
                    index: rec.index,
                    events: 0,
                }])
            }
            Phase::Live(pipeline) => {
                let events = pipeline.process(&rec.frame, rec.index as u64).map_err(|e| match e {
                    Error::Sequence { .. } => ProtocolError::new("bad_sequence", e.to_string()),
                    other => ProtocolError::new("pipeline", other.to_string()),
                })?;
                let n = events.len();
                let mut out: Vec<ServerMessage> = events.into_iter().map(ServerMessage::Event).collect();
                out.push(ServerMessage::Frame { index: rec.index, events: n });
                Ok(out)
            }
        }
    }
}

enum Record {
    Control(ClientMessage),
    Frame(IndexedFrame),
}

/// Reads the next client record; `Ok(None)` at a clean end of stream.
fn read_record<R: BufRead>(src: &mut R, cam: Dims, offset: &mut u64) -> std::result::Result<Option<Record>, ProtocolError> {
    let io_err = |e: io::Error| ProtocolError::new("io", e.to_string());
    loop {
        let first = match src.fill_buf().map_err(io_err)?.first() {
            None => return Ok(None),
            Some(&b) => b,
        };
        match first {
            b'\n' | b'\r' | b' ' | b'\t' => {
                src.consume(1);
                *offset += 1;
            }
            b'{' => {
                let mut line = Vec::new();
                let n = src
                    .by_ref()
                    .take(MAX_CONTROL_LINE as u64)
                    .read_until(b'\n', &mut line)
                    .map_err(io_err)?;
                *offset += n as u64;
                if line.last() != Some(&b'\n') && n == MAX_CONTROL_LINE {
                    return Err(ProtocolError::new("bad_record", "control record too long"));
                }
                let msg = serde_json::from_slice(&line)
                    .map_err(|e| ProtocolError::new("bad_control", e.to_string()))?;
                return Ok(Some(Record::Control(msg)));
            }
            b'G' => {
                let start = *offset;
                let mut magic = [0u8; 4];
                src.read_exact(&mut magic)
                    .map_err(|_| ProtocolError::new("bad_record", "truncated frame record"))?;
                if &magic != GFRM_MAGIC {
                    return Err(ProtocolError::new("bad_record", format!("bad magic at byte {start}")));
                }
                let rec = read_gfrm_body(src, cam, start).map_err(|e| match e {
                    Error::Stream { reason, .. } if reason.contains("dims") => {
                        ProtocolError::new("dims_mismatch", reason)
                    }
                    other => ProtocolError::new("bad_record", other.to_string()),
                })?;
                *offset += (12 + 3 * cam.area()) as u64;
                return Ok(Some(Record::Frame(rec)));
            }
            other => {
                return Err(ProtocolError::new(
                    "bad_record",
                    format!("unexpected byte 0x{other:02x} at {offset}"),
                ))
            }
        }
    }
}

/// Runs one session over a byte stream pair until EOF or a protocol error.
pub fn handle_connection<R: Read, W: Write>(reader: R, writer: W, base: EngineConfig) -> io::Result<()> {
    let mut src = BufReader::with_capacity(256 * 1024, reader);
    let mut out = BufWriter::new(writer);
    let mut session = Session::new(base);
    let mut offset = 0u64;
    loop {
        let cam = session.config.cam;
        let reply = match read_record(&mut src, cam, &mut offset) {
            Ok(None) => break,
            Ok(Some(Record::Control(msg))) => session.handle_control(msg),
            Ok(Some(Record::Frame(rec))) => session.handle_frame(rec),
            Err(e) => Err(e),
        };
        match reply {
            Ok(messages) => {
                for m in &messages {
                    writeln!(out, "{}", m.to_line())?;
                }
                out.flush()?;
            }
            Err(e) => {
                log::warn!("protocol error {}: {}", e.code, e.detail);
                writeln!(out, "{}", e.to_message().to_line())?;
                out.flush()?;
                break;
            }
        }
    }
    Ok(())
}

pub struct Server {
    listener: TcpListener,
    config: EngineConfig,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: EngineConfig) -> Result<Server> {
        config.validate()?;
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            config,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections forever, one thread and one session per connection.
    pub fn run(self) -> Result<()> {
        for conn in self.listener.incoming() {
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let config = self.config.clone();
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                log::info!("session opened {peer:?}");
                let _ = stream.set_nodelay(true);
                let result = stream
                    .try_clone()
                    .and_then(|reader| handle_connection(reader, stream, config));
                match result {
                    Ok(()) => log::info!("session closed {peer:?}"),
                    Err(e) => log::warn!("session {peer:?} ended with error: {e}"),
                }
            });
        }
        Ok(())
    }
}

/// Blocking client for the session protocol.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Client> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<()> {
        let line = serde_json::to_string(msg).expect("message serialization is infallible");
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn send_frame(&mut self, index: u32, frame: &Frame) -> Result<()> {
        self.writer.write_all(&encode_gfrm(index, frame)?)?;
        self.writer.flush()?;
        Ok(())
    }

    /// Next server message, or `None` once the server closed the connection.
    pub fn recv(&mut self) -> Result<Option<ServerMessage>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        serde_json::from_str(line.trim_end())
            .map(Some)
            .map_err(|e| Error::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
    }

    /// Sends `msg` and returns the single reply.
    pub fn request(&mut self, msg: &ClientMessage) -> Result<ServerMessage> {
        self.send(msg)?;
        self.recv()?
            .ok_or_else(|| Error::Io(io::ErrorKind::UnexpectedEof.into()))
    }

    /// Sends a frame and collects its events up to the acknowledgement.
    /// An error reply is returned as the last element.
    pub fn process_frame(&mut self, index: u32, frame: &Frame) -> Result<Vec<ServerMessage>> {
        self.send_frame(index, frame)?;
        let mut out = Vec::new();
        while let Some(msg) = self.recv()? {
            let done = matches!(msg, ServerMessage::Frame { .. } | ServerMessage::Error { .. });
            out.push(msg);
            if done {
                break;
            }
        }
        Ok(out)
    }
}
