use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, select, unbounded, Receiver, RecvTimeoutError, Sender, TrySendError};

use super::command::{parse_command, Command, Hello, Reply, ServerMessage, TelemetryFrame};
use super::state::SimState;
use super::SimError;
use crate::session::{SessionLog, SessionWriter};

/// One item on a telemetry subscription.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamItem {
    Frame(Arc<TelemetryFrame>),
    /// This many frames were dropped since the last delivered item.
    Gap { missed: u64 },
}

struct Subscriber {
    tx: Sender<StreamItem>,
    missed: u64,
}

/// Telemetry fan-out. Publishing never blocks: a full subscriber loses the
/// frame and gets a gap marker before its next delivered frame.
#[derive(Default)]
pub struct Hub {
    subs: Mutex<Vec<Subscriber>>,
}

impl Hub {
    pub fn subscribe(&self, capacity: usize) -> Receiver<StreamItem> {
        let (tx, rx) = bounded(capacity.max(1));
        self.subs.lock().expect("hub lock").push(Subscriber { tx, missed: 0 });
        rx
    }

    pub fn subscribers(&self) -> usize {
        self.subs.lock().expect("hub lock").len()
    }

    pub fn publish(&self, frame: Arc<TelemetryFrame>) {
        self.subs.lock().expect("hub lock").retain_mut(|s| {
            if s.missed > 0 {
                match s.tx.try_send(StreamItem::Gap { missed: s.missed }) {
                    Ok(()) => s.missed = 0,
                    Err(TrySendError::Full(_)) => {
                        s.missed += 1;
                        return true;
                    }
                    Err(TrySendError::Disconnected(_)) => return false,
                }
            }
            match s.tx.try_send(StreamItem::Frame(frame.clone())) {
                Ok(()) => true,
                Err(TrySendError::Full(_)) => {
                    s.missed += 1;
                    true
                }
                Err(TrySendError::Disconnected(_)) => false,
            }
        });
    }
}

/// How the loop advances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pacing {
    /// One tick per tick length of wall-clock time.
    RealTime,
    /// Only when [`SimService::advance`] grants ticks.
    Manual,
}

/// Where the service writes its session log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogSink {
    Discard,
    Memory,
    File(PathBuf),
}

struct Submission {
    command: Command,
    reply_to: Option<Sender<Reply>>,
}

enum Control {
    Advance(u64),
    Stop,
}

/// What the loop hands back on shutdown.
#[derive(Debug)]
pub struct ServiceSummary {
    pub state: SimState,
    /// Present for [`LogSink::Memory`].
    pub log: Option<SessionLog>,
}

/// Cloneable client-side access to a running service.
#[derive(Clone)]
pub struct ServiceHandle {
    submit_tx: Sender<Submission>,
    hub: Arc<Hub>,
    hello: Arc<Hello>,
}

impl ServiceHandle {
    /// Queue a command; the reply arrives on the returned channel on the tick it is applied.
    pub fn submit(&self, command: Command) -> Receiver<Reply> {
        let (tx, rx) = bounded(1);
        self.submit_to(command, Some(tx));
        rx
    }

    pub fn submit_to(&self, command: Command, reply_to: Option<Sender<Reply>>) {
        // A stopped loop drops the submission; the caller sees a closed reply channel.
        let _ = self.submit_tx.send(Submission { command, reply_to });
    }

    pub fn subscribe(&self, capacity: usize) -> Receiver<StreamItem> {
        self.hub.subscribe(capacity)
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }
}

/// The single simulation loop on its own thread.
pub struct SimService {
    handle: ServiceHandle,
    control_tx: Sender<Control>,
    thread: Option<JoinHandle<Result<ServiceSummary, SimError>>>,
}

impl SimService {
    pub fn start(state: SimState, pacing: Pacing, sink: LogSink) -> Result<Self, SimError> {
        let writer = match &sink {
            LogSink::File(path) => {
                let f = File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
                Some(SessionWriter::new(BufWriter::new(f)))
            }
            _ => None,
        };
        let (submit_tx, submit_rx) = unbounded();
        let (control_tx, control_rx) = unbounded();
        let hub = Arc::new(Hub::default());
        let handle = ServiceHandle {
            submit_tx,
            hub: hub.clone(),
            hello: Arc::new(state.hello()),
        };
        let memory = (sink == LogSink::Memory).then(SessionLog::new);
        let thread = thread::spawn(move || run_loop(state, pacing, submit_rx, control_rx, hub, writer, memory));
        Ok(Self {
            handle,
            control_tx,
            thread: Some(thread),
        })
    }

    pub fn handle(&self) -> ServiceHandle {
        self.handle.clone()
    }

    pub fn submit(&self, command: Command) -> Receiver<Reply> {
        self.handle.submit(command)
    }

    pub fn subscribe(&self, capacity: usize) -> Receiver<StreamItem> {
        self.handle.subscribe(capacity)
    }

    /// Grant `ticks` more ticks to a manually paced loop.
    pub fn advance(&self, ticks: u64) {
        let _ = self.control_tx.send(Control::Advance(ticks));
    }

    /// Stop after the ticks already granted have run.
    pub fn shutdown(mut self) -> Result<ServiceSummary, SimError> {
        let _ = self.control_tx.send(Control::Stop);
        self.thread
            .take()
            .expect("joined once")
            .join()
            .map_err(|_| SimError::Io("simulation loop panicked".into()))?
    }
}

impl Drop for SimService {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            let _ = self.control_tx.send(Control::Stop);
            let _ = t.join();
        }
    }
}

fn run_loop(
    mut state: SimState,
    pacing: Pacing,
    submit_rx: Receiver<Submission>,
    control_rx: Receiver<Control>,
    hub: Arc<Hub>,
    mut writer: Option<SessionWriter<BufWriter<File>>>,
    mut memory: Option<SessionLog>,
) -> Result<ServiceSummary, SimError> {
    let dt = state.config().tick;
    let mut pending: BTreeMap<u64, Sender<Reply>> = BTreeMap::new();
    let mut permits = 0u64;
    let mut stopping = false;
    let start = Instant::now();
    loop {
        match pacing {
            Pacing::Manual => {
                while permits == 0 && !stopping {
                    match control_rx.recv() {
                        Ok(Control::Advance(n)) => permits += n,
                        Ok(Control::Stop) | Err(_) => stopping = true,
                    }
                }
                if permits == 0 {
                    break;
                }
                permits -= 1;
            }
            Pacing::RealTime => {
                let deadline = start + Duration::from_secs_f64(dt * (state.tick() + 1) as f64);
                let wait = deadline.saturating_duration_since(Instant::now());
                match control_rx.recv_timeout(wait) {
                    Ok(Control::Stop) | Err(RecvTimeoutError::Disconnected) => break,
                    Ok(Control::Advance(_)) => continue,
                    Err(RecvTimeoutError::Timeout) => {}
                }
            }
        }
        while let Ok(sub) = submit_rx.try_recv() {
            let origin = state.submit(sub.command);
            if let Some(tx) = sub.reply_to {
                pending.insert(origin, tx);
            }
        }
        let out = state.step(dt);
        for (origin, reply) in out.replies {
            if let Some(tx) = pending.remove(&origin) {
                let _ = tx.send(reply);
            }
        }
        for event in out.events {
            if let Some(w) = &mut writer {
                w.append(&event)?;
            }
            if let Some(log) = &mut memory {
                log.append(event)?;
            }
        }
        if let Some(w) = &mut writer {
            w.flush()?;
        }
        hub.publish(Arc::new(out.frame));
    }
    Ok(ServiceSummary { state, log: memory })
}

/// Frames buffered per TCP client before gap markers start.
pub const CLIENT_BUFFER: usize = 256;

/// Newline-delimited JSON over TCP: one [`Command`] per client line; the
/// server sends a hello, then replies and telemetry as they happen.
pub struct TcpServer {
    listener: TcpListener,
    handle: ServiceHandle,
    stop: Arc<AtomicBool>,
}

impl TcpServer {
    pub fn bind(addr: impl ToSocketAddrs, handle: ServiceHandle) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            handle,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept until [`TcpServerHandle::stop`]; each connection gets its own threads.
    pub fn run(&self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let handle = self.handle.clone();
            thread::spawn(move || {
                let _ = serve_connection(stream, &handle);
            });
        }
        Ok(())
    }

    /// Run the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<TcpServerHandle> {
        let addr = self.local_addr()?;
        let stop = self.stop.clone();
        let thread = thread::spawn(move || self.run());
        Ok(TcpServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

pub struct TcpServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl TcpServerHandle {
    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for TcpServerHandle {
    fn drop(&mut self) {
        self.halt();
    }
}

/// Serve one client until it closes its side.
pub fn serve_connection(stream: TcpStream, handle: &ServiceHandle) -> io::Result<()> {
    let telemetry = handle.subscribe(CLIENT_BUFFER);
    let (reply_tx, reply_rx) = unbounded::<Reply>();
    let (note_tx, note_rx) = unbounded::<ServerMessage>();
    let mut out = BufWriter::new(stream.try_clone()?);
    writeln!(out, "{}", ServerMessage::Hello((*handle.hello).clone()).to_line())?;
    out.flush()?;
    let writer = thread::spawn(move || -> io::Result<()> {
        loop {
            let msg = select! {
                recv(note_rx) -> m => match m {
                    Ok(m) => m,
                    Err(_) => break,
                },
                recv(reply_rx) -> r => match r {
                    Ok(r) => r.to_message(),
                    Err(_) => continue,
                },
                recv(telemetry) -> f => match f {
                    Ok(StreamItem::Frame(f)) => ServerMessage::Telemetry((*f).clone()),
                    Ok(StreamItem::Gap { missed }) => ServerMessage::Gap { missed },
                    Err(_) => break,
                },
            };
            writeln!(out, "{}", msg.to_line())?;
            out.flush()?;
        }
        Ok(())
    });
    for line in BufReader::new(stream).lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_command(&line) {
            Ok(cmd) => handle.submit_to(cmd, Some(reply_tx.clone())),
            Err(message) => {
                let request_id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("request_id").and_then(|r| r.as_u64()));
                let _ = note_tx.send(ServerMessage::Error {
                    request_id,
                    tick: None,
                    code: "parse".into(),
                    message,
                });
            }
        }
    }
    drop(note_tx);
    writer.join().unwrap_or(Ok(()))
}
