//! WebSocket bridge between the simulator/trainer and the teleop UI.
//!
//! The simulation runs on its own thread and is the only writer of the
//! [`Session`]. Connections talk to it through an event channel and receive
//! messages from a bounded broadcast; a connection that falls more than
//! `backlog` messages behind is closed. The first connection is the driver,
//! later ones observe until the driver leaves.

pub mod session;
pub mod wire;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use ms3l_core::action::Action;
use ms3l_core::trainer::{IterationReport, TrainHooks};
use tokio::sync::{broadcast, mpsc, oneshot};
use tower_http::services::ServeDir;

pub use session::{replay, CommandLog, Session};
use wire::{parse_client, ClientMessage, ControlOp, Envelope, ErrorMsg, ServerMessage, StatusMsg};

use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeOptions {
    pub host: String,
    pub port: u16,
    /// Wall-clock ticks per second when free-running.
    pub tick_hz: f64,
    /// Advance exactly one tick per driver command instead of on a clock.
    pub lockstep: bool,
    pub backlog: usize,
    pub ui_dir: PathBuf,
}

enum Event {
    Command(Action),
    Control(ControlOp),
    DriverLost,
    Shutdown,
}

pub struct Hub {
    tx: broadcast::Sender<Arc<ServerMessage>>,
    events: Mutex<std_mpsc::Sender<Event>>,
    driver: Mutex<Option<u64>>,
    next_id: AtomicU64,
    backlog: usize,
    iteration: AtomicU64,
    closed: AtomicBool,
}

impl Hub {
    fn send_event(&self, e: Event) {
        let _ = self.events.lock().expect("events lock").send(e);
    }

    fn publish(&self, m: ServerMessage) {
        let _ = self.tx.send(Arc::new(m));
    }

    /// Publishes a training status message to every connection.
    pub fn status(&self, s: StatusMsg) {
        self.iteration.store(s.iteration as u64, Ordering::Relaxed);
        self.publish(ServerMessage::Status(s));
    }
}

/// Forwards per-iteration training reports to the bridge as status messages.
pub struct StatusHooks(pub Arc<Hub>);

impl TrainHooks for StatusHooks {
    fn iteration(&mut self, r: &IterationReport) {
        let finite = |x: f64| x.is_finite().then_some(x);
        self.0.status(StatusMsg {
            iteration: r.iteration,
            frames_kept: r.recorded,
            nav_loss: finite(r.nav_val_loss),
            rec_loss: r.rec_val_loss.and_then(finite),
        });
    }
}

pub struct BridgeHandle {
    pub addr: SocketAddr,
    pub hub: Arc<Hub>,
    pub session: Arc<Mutex<Session>>,
    sim_thread: Option<JoinHandle<()>>,
    shutdown: Option<oneshot::Sender<()>>,
    server: Option<tokio::task::JoinHandle<()>>,
}

impl BridgeHandle {
    /// Stops the simulation thread and the HTTP server.
    pub async fn shutdown(mut self) {
        self.stop();
        if let Some(s) = self.server.take() {
            let _ = s.await;
        }
    }

    fn stop(&mut self) {
        self.hub.closed.store(true, Ordering::SeqCst);
        self.hub.send_event(Event::Shutdown);
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.sim_thread.take() {
            let _ = t.join();
        }
    }

    /// Resolves when the server stops on its own.
    pub async fn wait(mut self) {
        if let Some(s) = self.server.take() {
            let _ = s.await;
        }
        self.stop();
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn sim_loop(session: Arc<Mutex<Session>>, hub: Arc<Hub>, events: std_mpsc::Receiver<Event>, opts: ServeOptions) {
    let period = Duration::from_secs_f64(1.0 / opts.tick_hz);
    let mut next = Instant::now() + period;
    loop {
        let timeout = if opts.lockstep { Duration::from_millis(200) } else { next.saturating_duration_since(Instant::now()) };
        match events.recv_timeout(timeout) {
            Ok(Event::Shutdown) | Err(std_mpsc::RecvTimeoutError::Disconnected) => return,
            Ok(e) => {
                let mut s = session.lock().expect("session lock");
                s.iteration = hub.iteration.load(Ordering::Relaxed) as u32;
                let out = match e {
                    Event::Command(a) => {
                        s.set_command(a);
                        if opts.lockstep {
                            s.tick()
                        } else {
                            None
                        }
                    }
                    Event::Control(op) => s.control(op),
                    Event::DriverLost => s.driver_lost(),
                    Event::Shutdown => unreachable!(),
                };
                drop(s);
                if let Some(m) = out {
                    hub.publish(m);
                }
            }
            Err(std_mpsc::RecvTimeoutError::Timeout) => {
                if hub.closed.load(Ordering::SeqCst) {
                    return;
                }
                if opts.lockstep {
                    continue;
                }
                next += period;
                let now = Instant::now();
                if next < now {
                    next = now + period;
                }
                let mut s = session.lock().expect("session lock");
                s.iteration = hub.iteration.load(Ordering::Relaxed) as u32;
                let out = s.tick();
                drop(s);
                if let Some(m) = out {
                    hub.publish(m);
                }
            }
        }
    }
}

async fn ws_route(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> impl IntoResponse {
    ws.max_message_size(1 << 16).on_upgrade(move |socket| connection(socket, hub))
}

fn error(ref_seq: Option<u64>, message: String) -> ServerMessage {
    ServerMessage::Error(ErrorMsg { ref_seq, message })
}

async fn connection(socket: WebSocket, hub: Arc<Hub>) {
    let id = hub.next_id.fetch_add(1, Ordering::Relaxed);
    let (mut sink, mut stream) = socket.split();
    let mut rx = hub.tx.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::channel::<ServerMessage>(hub.backlog);

    let writer = async move {
        let mut seq = 0u64;
        loop {
            let msg = tokio::select! {
                r = rx.recv() => match r {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        let reason = format!("fell {n} messages behind");
                        let _ = sink.send(Message::Close(Some(CloseFrame { code: 1008, reason: reason.into() }))).await;
                        return;
                    }
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                r = reply_rx.recv() => match r {
                    Some(m) => Arc::new(m),
                    None => return,
                },
            };
            seq += 1;
            let text = serde_json::to_string(&Envelope { seq, msg: &msg }).expect("serializable");
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
    };

    let reader_hub = hub.clone();
    let reader = async move {
        let mut last_seq: Option<u64> = None;
        while let Some(Ok(frame)) = stream.next().await {
            let text = match frame {
                Message::Text(t) => t,
                Message::Binary(_) => {
                    let _ = reply_tx.send(error(None, "binary frames are not supported".into())).await;
                    continue;
                }
                Message::Close(_) => break,
                _ => continue,
            };
            let msg = match parse_client(text.as_str()) {
                Ok(m) => m,
                Err((seq, message)) => {
                    let _ = reply_tx.send(error(seq, message)).await;
                    continue;
                }
            };
            let seq = msg.seq();
            if last_seq.is_some_and(|l| seq <= l) {
                let _ = reply_tx.send(error(Some(seq), format!("seq {seq} is not above {}", last_seq.unwrap()))).await;
                continue;
            }
            last_seq = Some(seq);
            let is_driver = {
                let mut d = reader_hub.driver.lock().expect("driver lock");
                if d.is_none() {
                    *d = Some(id);
                }
                *d == Some(id)
            };
            if !is_driver {
                let _ = reply_tx.send(error(Some(seq), "observers cannot send commands or controls".into())).await;
                continue;
            }
            reader_hub.send_event(match msg {
                ClientMessage::Command { v, w, .. } => Event::Command(Action::new(v, w)),
                ClientMessage::Control { op, .. } => Event::Control(op),
            });
        }
    };

    // the first connection to arrive drives
    {
        let mut d = hub.driver.lock().expect("driver lock");
        if d.is_none() {
            *d = Some(id);
        }
    }
    tokio::select! {
        _ = writer => {}
        _ = reader => {}
    }
    let mut d = hub.driver.lock().expect("driver lock");
    if *d == Some(id) {
        *d = None;
        drop(d);
        hub.send_event(Event::DriverLost);
    }
}

/// Binds `host:port` (0 picks a free port) and starts serving `/ws` and the
/// UI bundle at `/`.
pub async fn serve(session: Session, opts: ServeOptions) -> Result<BridgeHandle, Error> {
    if !(opts.tick_hz > 0.0) || opts.backlog == 0 {
        return Err(Error::Config("bridge: tick_hz and backlog must be positive".into()));
    }
    let (ev_tx, ev_rx) = std_mpsc::channel();
    let (tx, _) = broadcast::channel(opts.backlog);
    let hub = Arc::new(Hub {
        tx,
        events: Mutex::new(ev_tx),
        driver: Mutex::new(None),
        next_id: AtomicU64::new(0),
        backlog: opts.backlog,
        iteration: AtomicU64::new(0),
        closed: AtomicBool::new(false),
    });
    let session = Arc::new(Mutex::new(session));
    let listener = tokio::net::TcpListener::bind((opts.host.as_str(), opts.port))
        .await
        .map_err(|e| Error::io(&PathBuf::from(format!("{}:{}", opts.host, opts.port)), e))?;
    let addr = listener.local_addr().map_err(|e| Error::io(&PathBuf::from(&opts.host), e))?;
    let app = Router::new().route("/ws", get(ws_route)).fallback_service(ServeDir::new(&opts.ui_dir)).with_state(hub.clone());
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = stop_rx.await;
            })
            .await;
    });
    let sim_thread = {
        let (s, h) = (session.clone(), hub.clone());
        std::thread::spawn(move || sim_loop(s, h, ev_rx, opts))
    };
    Ok(BridgeHandle { addr, hub, session, sim_thread: Some(sim_thread), shutdown: Some(stop_tx), server: Some(server) })
}
