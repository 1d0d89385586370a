//! TCP transport: length-prefixed frames over loopback or LAN sockets.
//!
//! All group mutations funnel through one worker thread that owns the
//! [`ServerCore`] (the single-writer contract); per-connection reader and
//! writer threads only move bytes. Broadcast fan-out preserves per-client
//! ordering: a joiner always sees its KEY_ISSUE before any rekey built for
//! that epoch.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::ffield::PrimeField;
use crate::gkm::MemberId;
use crate::netsim::{ClientNode, JoinReply, NetsimError, ServerConfig, ServerCore, ServerStats};
use crate::wire::{decode_frame, encode_frame, Frame, KeyIssueBody, WireError};

/// Upper bound on a single frame, to keep a corrupt length prefix from
/// allocating the moon.
const MAX_FRAME_LEN: usize = 64 << 20;

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), NetsimError> {
    let bytes = encode_frame(frame)?;
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R, field: &PrimeField) -> Result<Frame, NetsimError> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_le_bytes(len_buf) as usize;
    if len > MAX_FRAME_LEN {
        return Err(WireError::CorruptCapture(format!("frame length {len} exceeds cap")).into());
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(decode_frame(field, &buf)?)
}

enum Cmd {
    Conn { id: u64, out: Sender<Vec<u8>> },
    Gone { id: u64 },
    Inbound { id: u64, frame: Frame },
    Flush,
    Rekey,
    Rotate,
    Stats(Sender<ServerStats>),
    Shutdown,
}

struct ConnState {
    out: Sender<Vec<u8>>,
    member: Option<MemberId>,
}

/// Handle to a running server. Dropping it shuts the server down.
pub struct TcpServerHandle {
    addr: SocketAddr,
    cmd_tx: Sender<Cmd>,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl TcpServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> Result<ServerStats, NetsimError> {
        let (tx, rx) = channel();
        self.cmd_tx.send(Cmd::Stats(tx)).map_err(|_| NetsimError::Closed)?;
        rx.recv_timeout(Duration::from_secs(5)).map_err(|_| NetsimError::Timeout)
    }

    /// Forces a batch-window flush now.
    pub fn flush(&self) -> Result<(), NetsimError> {
        self.cmd_tx.send(Cmd::Flush).map_err(|_| NetsimError::Closed)
    }

    pub fn rekey(&self) -> Result<(), NetsimError> {
        self.cmd_tx.send(Cmd::Rekey).map_err(|_| NetsimError::Closed)
    }

    pub fn rotate(&self) -> Result<(), NetsimError> {
        self.cmd_tx.send(Cmd::Rotate).map_err(|_| NetsimError::Closed)
    }

    /// Polls [`TcpServerHandle::stats`] until `pred` holds or the deadline
    /// passes.
    pub fn wait_for(
        &self,
        timeout: Duration,
        pred: impl Fn(&ServerStats) -> bool,
    ) -> Result<ServerStats, NetsimError> {
        let deadline = Instant::now() + timeout;
        loop {
            let stats = self.stats()?;
            if pred(&stats) {
                return Ok(stats);
            }
            if Instant::now() >= deadline {
                return Err(NetsimError::Timeout);
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn shutdown(mut self) {
        self.shutdown_inner();
    }

    fn shutdown_inner(&mut self) {
        if self.shutdown.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = self.cmd_tx.send(Cmd::Shutdown);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for TcpServerHandle {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

/// Binds and starts a server. `config.listen` defaults to an ephemeral
/// loopback port.
pub fn serve(config: ServerConfig) -> Result<TcpServerHandle, NetsimError> {
    let listen = config.listen.clone().unwrap_or_else(|| "127.0.0.1:0".to_string());
    let listener = TcpListener::bind(&listen).map_err(NetsimError::BindFailure)?;
    let addr = listener.local_addr().map_err(NetsimError::BindFailure)?;
    let field = config.field;
    let batch_window_ms = config.batch_window_ms;
    let core = ServerCore::new(config)?;

    let shutdown = Arc::new(AtomicBool::new(false));
    let (cmd_tx, cmd_rx) = channel::<Cmd>();
    let mut threads = Vec::new();

    // Worker: the only thread that touches the group state.
    {
        let shutdown = shutdown.clone();
        threads.push(std::thread::spawn(move || worker_loop(core, cmd_rx, shutdown)));
    }

    // Accept loop: one reader thread per connection.
    {
        let cmd_tx = cmd_tx.clone();
        let shutdown = shutdown.clone();
        threads.push(std::thread::spawn(move || {
            let mut next_id = 0u64;
            for stream in listener.incoming() {
                if shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let id = next_id;
                next_id += 1;
                let (out_tx, out_rx) = channel::<Vec<u8>>();
                if cmd_tx.send(Cmd::Conn { id, out: out_tx }).is_err() {
                    break;
                }
                spawn_conn_threads(id, stream, field, cmd_tx.clone(), out_rx);
            }
        }));
    }

    // Batch-window timer.
    if batch_window_ms > 0 {
        let cmd_tx = cmd_tx.clone();
        let shutdown = shutdown.clone();
        threads.push(std::thread::spawn(move || loop {
            std::thread::sleep(Duration::from_millis(batch_window_ms));
            if shutdown.load(Ordering::SeqCst) || cmd_tx.send(Cmd::Flush).is_err() {
                break;
            }
        }));
    }

    Ok(TcpServerHandle { addr, cmd_tx, shutdown, threads })
}

fn spawn_conn_threads(
    id: u64,
    stream: TcpStream,
    field: PrimeField,
    cmd_tx: Sender<Cmd>,
    out_rx: Receiver<Vec<u8>>,
) {
    let reader = stream.try_clone();
    // Writer: drains the outbound queue; exits (closing the socket) when
    // the worker drops the sender.
    std::thread::spawn(move || {
        let mut stream = stream;
        while let Ok(bytes) = out_rx.recv() {
            if stream.write_all(&bytes).and_then(|_| stream.flush()).is_err() {
                break;
            }
        }
        let _ = stream.shutdown(std::net::Shutdown::Both);
    });
    // Reader: decoded frames go to the worker.
    std::thread::spawn(move || {
        let Ok(mut stream) = reader else {
            let _ = cmd_tx.send(Cmd::Gone { id });
            return;
        };
        loop {
            match read_frame(&mut stream, &field) {
                Ok(frame) => {
                    if cmd_tx.send(Cmd::Inbound { id, frame }).is_err() {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        let _ = cmd_tx.send(Cmd::Gone { id });
    });
}

fn worker_loop(mut core: ServerCore, cmd_rx: Receiver<Cmd>, shutdown: Arc<AtomicBool>) {
    let mut conns: HashMap<u64, ConnState> = HashMap::new();
    let send_to = |conns: &HashMap<u64, ConnState>, id: u64, frame: &Frame| {
        if let Some(conn) = conns.get(&id) {
            if let Ok(bytes) = encode_frame(frame) {
                let mut framed = (bytes.len() as u32).to_le_bytes().to_vec();
                framed.extend_from_slice(&bytes);
                let _ = conn.out.send(framed);
            }
        }
    };
    let broadcast = |conns: &HashMap<u64, ConnState>, frame: &Frame| {
        // Broadcasts go to every connection: the algebra, not the fan-out
        // list, is what protects the secret.
        for id in conns.keys() {
            send_to(conns, *id, frame);
        }
    };

    while let Ok(cmd) = cmd_rx.recv() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        match cmd {
            Cmd::Conn { id, out } => {
                conns.insert(id, ConnState { out, member: None });
            }
            Cmd::Gone { id } => {
                conns.remove(&id);
            }
            Cmd::Inbound { id, frame } => match frame {
                Frame::JoinRequest { member, credential } => {
                    let result = core.handle_join(&member, &credential);
                    let mut close_after = false;
                    let reply = match &result.reply {
                        JoinReply::Issued { key, aggregate } => {
                            if let Some(conn) = conns.get_mut(&id) {
                                conn.member = Some(member.clone());
                            }
                            Frame::KeyIssue {
                                epoch: key.epoch_issued(),
                                body: KeyIssueBody::Issued {
                                    slot: key.slot() as u32,
                                    v: key.vector().clone(),
                                    norm_inv: *key
                                        .norm_inv()
                                        .expect("field keys carry inverse norms"),
                                    aggregate: aggregate.clone(),
                                },
                            }
                        }
                        JoinReply::Refused(code) => {
                            close_after = *code == crate::wire::RefusalCode::ChurnClosed;
                            Frame::KeyIssue { epoch: 0, body: KeyIssueBody::Refused(*code) }
                        }
                    };
                    send_to(&conns, id, &reply);
                    for msg in result.broadcasts {
                        broadcast(&conns, &Frame::Rekey { epoch: msg.epoch, c: msg.c });
                    }
                    if close_after {
                        conns.remove(&id); // dropping the sender closes the socket
                    }
                }
                Frame::LeaveNotice { member } => {
                    let reply = match core.handle_leave(&member) {
                        Ok(()) => Frame::KeyIssue { epoch: 0, body: KeyIssueBody::LeaveAck },
                        Err(code) => {
                            Frame::KeyIssue { epoch: 0, body: KeyIssueBody::Refused(code) }
                        }
                    };
                    send_to(&conns, id, &reply);
                }
                // Auth frames are member-to-member; a server relay is not
                // part of this harness. Anything else is ignored.
                _ => {}
            },
            Cmd::Flush => {
                if let Ok(Some(msg)) = core.flush_window() {
                    broadcast(&conns, &Frame::Rekey { epoch: msg.epoch, c: msg.c });
                }
            }
            Cmd::Rekey => {
                if let Ok(msg) = core.rekey_now() {
                    broadcast(&conns, &Frame::Rekey { epoch: msg.epoch, c: msg.c });
                }
            }
            Cmd::Rotate => {
                if let Ok((msg, reissues)) = core.rotate_now() {
                    for (member, key) in reissues {
                        let target = conns
                            .iter()
                            .find(|(_, c)| c.member.as_ref() == Some(&member))
                            .map(|(id, _)| *id);
                        if let Some(id) = target {
                            let frame = Frame::KeyIssue {
                                epoch: key.epoch_issued(),
                                body: KeyIssueBody::Issued {
                                    slot: key.slot() as u32,
                                    v: key.vector().clone(),
                                    norm_inv: *key
                                        .norm_inv()
                                        .expect("field keys carry inverse norms"),
                                    aggregate: core.aggregate_for_auth(),
                                },
                            };
                            send_to(&conns, id, &frame);
                        }
                    }
                    broadcast(&conns, &Frame::Rekey { epoch: msg.epoch, c: msg.c });
                }
            }
            Cmd::Stats(reply) => {
                let _ = reply.send(core.stats());
            }
            Cmd::Shutdown => break,
        }
    }
}

/// A connected, joined client.
#[derive(Debug)]
pub struct TcpClient {
    stream: TcpStream,
    field: PrimeField,
    pub node: ClientNode,
}

impl TcpClient {
    /// Connects, authenticates, and waits for key issue. Refusals come back
    /// as [`NetsimError::Refused`].
    pub fn login(
        addr: SocketAddr,
        field: PrimeField,
        member: &str,
        password: &str,
        timeout: Duration,
    ) -> Result<TcpClient, NetsimError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        let mut client = TcpClient {
            stream,
            field,
            node: ClientNode::new(MemberId::new(member)),
        };
        write_frame(
            &mut client.stream,
            &Frame::JoinRequest {
                member: MemberId::new(member),
                credential: password.to_string(),
            },
        )?;
        let deadline = Instant::now() + timeout;
        loop {
            match client.poll(deadline.saturating_duration_since(Instant::now()))? {
                Some(Frame::KeyIssue { body: KeyIssueBody::Issued { .. }, .. }) => {
                    return Ok(client)
                }
                Some(Frame::KeyIssue { body: KeyIssueBody::Refused(code), .. }) => {
                    return Err(NetsimError::Refused(code))
                }
                Some(_) => continue,
                None => return Err(NetsimError::Timeout),
            }
        }
    }

    /// Reads and applies one frame; `None` on timeout.
    pub fn poll(&mut self, timeout: Duration) -> Result<Option<Frame>, NetsimError> {
        if timeout.is_zero() {
            return Ok(None);
        }
        self.stream.set_read_timeout(Some(timeout))?;
        match read_frame(&mut self.stream, &self.field) {
            Ok(frame) => {
                self.node.apply(&frame);
                Ok(Some(frame))
            }
            Err(NetsimError::Io(e))
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Applies every frame that arrives within the window.
    pub fn drain_for(&mut self, window: Duration) -> Result<usize, NetsimError> {
        let deadline = Instant::now() + window;
        let mut seen = 0;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Ok(seen);
            }
            match self.poll(remaining) {
                Ok(Some(_)) => seen += 1,
                Ok(None) => return Ok(seen),
                Err(NetsimError::Io(_)) | Err(NetsimError::Closed) => return Ok(seen),
                Err(e) => return Err(e),
            }
        }
    }

    /// Sends a leave notice and waits for the ack.
    pub fn leave(&mut self, timeout: Duration) -> Result<(), NetsimError> {
        let member = self.node.member.clone().expect("logged-in clients are named");
        write_frame(&mut self.stream, &Frame::LeaveNotice { member })?;
        let deadline = Instant::now() + timeout;
        loop {
            match self.poll(deadline.saturating_duration_since(Instant::now()))? {
                Some(Frame::KeyIssue { body: KeyIssueBody::LeaveAck, .. }) => return Ok(()),
                Some(Frame::KeyIssue { body: KeyIssueBody::Refused(code), .. }) => {
                    return Err(NetsimError::Refused(code))
                }
                Some(_) => continue,
                None => return Err(NetsimError::Timeout),
            }
        }
    }
}
