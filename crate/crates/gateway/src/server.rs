//! Fixed-rate simulation loop and the WebSocket clients around it.
//!
//! The simulation runs on the calling thread. Each client has its own thread
//! that forwards admitted controls through a channel and sends whatever state
//! frame is newest when it gets the chance; a slow client skips frames.

use std::io::{ErrorKind as IoKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use lapaware_core::session::Recorder;
use lapaware_core::sim::Simulation;
use lapaware_core::tasks::TaskResult;
use log::{debug, info, warn};
use tungstenite::{HandshakeError, Message, WebSocket};

use crate::wire::{ControlGate, ControlMessage, Role, ServerMessage, StateMessage};

const POLL: Duration = Duration::from_millis(5);
/// A client that cannot take a frame within this long is dropped.
const WRITE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct LoopOptions {
    pub tick_rate: f64,
    /// Publish a state frame every this many ticks.
    pub broadcast_every: u64,
    /// Stop after this many ticks; run until shutdown otherwise.
    pub max_ticks: Option<u64>,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions { tick_rate: 60.0, broadcast_every: 2, max_ticks: None }
    }
}

/// Latest-wins slot for serialized state frames.
#[derive(Default)]
struct Mailbox {
    frame: Mutex<Option<(u64, Arc<str>)>>,
}

impl Mailbox {
    fn publish(&self, version: u64, json: String) {
        *self.frame.lock().unwrap() = Some((version, json.into()));
    }

    fn newer_than(&self, seen: u64) -> Option<(u64, Arc<str>)> {
        self.frame.lock().unwrap().as_ref().filter(|(v, _)| *v > seen).cloned()
    }
}

struct Shared {
    mailbox: Mailbox,
    stop: AtomicBool,
    tick: AtomicU64,
    controller: Mutex<Option<u64>>,
    task: String,
    tools: Vec<String>,
}

/// A listening gateway. Dropping it stops the listener and all clients.
pub struct Gateway {
    shared: Arc<Shared>,
    inbox: Receiver<ControlMessage>,
    addr: SocketAddr,
    listener: Option<thread::JoinHandle<()>>,
}

impl Gateway {
    pub fn bind(addr: &str, sim: &Simulation) -> Result<Gateway> {
        let listener = TcpListener::bind(addr).with_context(|| format!("cannot listen on {addr}"))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            mailbox: Mailbox::default(),
            stop: AtomicBool::new(false),
            tick: AtomicU64::new(sim.tick()),
            controller: Mutex::new(None),
            task: sim.task().name().to_owned(),
            tools: sim.tools().iter().map(|t| t.id.clone()).collect(),
        });
        let (tx, inbox) = mpsc::channel();
        let s = shared.clone();
        let handle = thread::spawn(move || accept_loop(listener, s, tx));
        Ok(Gateway { shared, inbox, addr, listener: Some(handle) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Flag that ends `run` at its next tick; safe to set from a signal handler.
    pub fn stop_flag(&self) -> StopHandle {
        StopHandle(self.shared.clone())
    }

    /// Runs the loop until `max_ticks`, a stop request, or a simulation
    /// error. Records every log line to `recorder` and finishes the session.
    pub fn run<W: Write>(
        &self,
        sim: &mut Simulation,
        recorder: &mut Option<Recorder<W>>,
        opts: &LoopOptions,
    ) -> Result<TaskResult> {
        if let Some(r) = recorder.as_mut() {
            r.append(&sim.start_record())?;
        }
        self.publish(sim);
        let period = Duration::from_secs_f64(1.0 / opts.tick_rate);
        let mut deadline = Instant::now();
        while !self.shared.stop.load(Ordering::SeqCst) && opts.max_ticks.is_none_or(|m| sim.tick() < m) {
            let mut batch: Vec<ControlMessage> = self.inbox.try_iter().collect();
            batch.sort_by_key(|m| m.seq);
            let controls: Vec<_> = batch.iter().map(ControlMessage::to_control).collect();
            let records = sim.step(&controls)?;
            if let Some(r) = recorder.as_mut() {
                r.append_all(&records)?;
            }
            self.shared.tick.store(sim.tick(), Ordering::SeqCst);
            if sim.tick().is_multiple_of(opts.broadcast_every.max(1)) {
                self.publish(sim);
            }
            deadline += period;
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            } else if now - deadline > period * 10 {
                warn!("loop fell {:?} behind; resetting the schedule", now - deadline);
                deadline = now;
            }
        }
        let (tail, result) = sim.finish();
        if let Some(r) = recorder.as_mut() {
            r.append_all(&tail)?;
        }
        self.publish(sim);
        Ok(result)
    }

    fn publish(&self, sim: &Simulation) {
        let msg = ServerMessage::State(Box::new(StateMessage::capture(sim)));
        // Version tick+1 so the initial tick-0 frame counts as new.
        self.shared.mailbox.publish(sim.tick() + 1, msg.to_json());
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.listener.take() {
            let _ = h.join();
        }
    }
}

#[derive(Clone)]
pub struct StopHandle(Arc<Shared>);

impl StopHandle {
    pub fn stop(&self) {
        self.0.stop.store(true, Ordering::SeqCst);
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, tx: Sender<ControlMessage>) {
    let mut next_id = 0u64;
    let mut clients = Vec::new();
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                let (id, s, tx) = (next_id, shared.clone(), tx.clone());
                clients.push(thread::spawn(move || {
                    if let Err(e) = serve_client(id, stream, &s, &tx) {
                        debug!("client {id} ({peer}): {e:#}");
                    }
                    let mut c = s.controller.lock().unwrap();
                    if *c == Some(id) {
                        *c = None;
                    }
                    info!("client {id} ({peer}) disconnected");
                }));
            }
            Err(e) if e.kind() == IoKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for c in clients {
        let _ = c.join();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), IoKind::WouldBlock | IoKind::TimedOut))
}

fn serve_client(id: u64, stream: TcpStream, shared: &Shared, tx: &Sender<ControlMessage>) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT))?;
    let mut handshake = tungstenite::accept(stream);
    let mut ws = loop {
        match handshake {
            Ok(ws) => break ws,
            Err(HandshakeError::Interrupted(mid)) if !shared.stop.load(Ordering::SeqCst) => {
                handshake = mid.handshake();
            }
            Err(HandshakeError::Interrupted(_)) => return Ok(()),
            Err(HandshakeError::Failure(e)) => bail!("handshake failed: {e}"),
        }
    };

    let role = {
        let mut c = shared.controller.lock().unwrap();
        if c.is_none() {
            *c = Some(id);
            Role::Controller
        } else {
            Role::Observer
        }
    };
    info!("client {id} connected as {role:?}");
    let hello = ServerMessage::Hello {
        role,
        task: shared.task.clone(),
        tools: shared.tools.clone(),
        tick: shared.tick.load(Ordering::SeqCst),
    };
    send(&mut ws, hello.to_json())?;

    let mut gate = ControlGate::new(shared.tools.clone());
    let mut seen = 0;
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            if let Some((_, frame)) = shared.mailbox.newer_than(seen) {
                send(&mut ws, frame.to_string())?;
            }
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        if let Some((version, frame)) = shared.mailbox.newer_than(seen) {
            send(&mut ws, frame.to_string())?;
            seen = version;
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                if role == Role::Observer {
                    send(&mut ws, ServerMessage::error(None, "observers cannot send controls").to_json())?;
                    continue;
                }
                match gate.admit(text.as_str()) {
                    Ok(msg) => {
                        if tx.send(msg).is_err() {
                            return Ok(());
                        }
                    }
                    Err(reply) => send(&mut ws, reply.to_json())?,
                }
            }
            Ok(Message::Binary(_)) => send(&mut ws, ServerMessage::error(None, "expected a text frame").to_json())?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

fn send(ws: &mut WebSocket<TcpStream>, json: String) -> Result<()> {
    ws.send(Message::text(json))?;
    Ok(())
}
