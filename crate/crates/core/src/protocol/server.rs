use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch, Notify};

use super::messages::*;
use super::session::{FeedItem, OutboundQueue, Session};
use crate::trace::{replay, ReplayMode, TraceRecord};

pub const SESSION_PATH: &str = "/session";
pub const END_OF_TRACE: &str = "end of trace";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub replay: ReplayMode,
    pub outbound_limit: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { replay: ReplayMode::AsFast, outbound_limit: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunReport {
    pub events: u64,
    /// Messages written to the sink.
    pub messages: u64,
    /// Markers dropped from client queues.
    pub dropped: u64,
    pub errors: u64,
}

struct Client {
    id: u64,
    queue: Mutex<OutboundQueue>,
    notify: Notify,
    closed: AtomicBool,
}

impl Client {
    fn push(&self, msg: MonitorToViz) {
        self.queue.lock().unwrap().push(msg);
        self.notify.notify_one();
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.notify.notify_one();
    }
}

enum Ctl {
    Feed(FeedItem),
    Connected(Arc<Client>),
    Lines(u64, Vec<String>),
    Closed(u64),
}

impl From<FeedItem> for Ctl {
    fn from(f: FeedItem) -> Self {
        Ctl::Feed(f)
    }
}

struct Consumer<W> {
    session: Session,
    sink: W,
    client: Option<Arc<Client>>,
    report: RunReport,
    trace_ended: bool,
    hello: watch::Sender<bool>,
}

impl<W: Write> Consumer<W> {
    fn emit(&mut self, msgs: Vec<MonitorToViz>) -> io::Result<()> {
        for m in msgs {
            if !matches!(m, MonitorToViz::Session(_)) {
                self.sink.write_all(&encode(&m))?;
                self.report.messages += 1;
            }
            if let Some(c) = &self.client {
                c.push(m);
            }
        }
        Ok(())
    }

    fn error(&self, message: String) -> MonitorToViz {
        MonitorToViz::Trigger(TriggerMsg { time: self.session.monitor().time(), message, severity: Severity::Error })
    }

    fn detach(&mut self) {
        if let Some(old) = self.client.take() {
            self.report.dropped += old.queue.lock().unwrap().dropped();
            old.close();
        }
        self.session.client_closed();
    }

    /// Returns true once the session is over.
    fn step(&mut self, ctl: Ctl) -> io::Result<bool> {
        match ctl {
            Ctl::Feed(FeedItem::TraceEnd) => {
                self.trace_ended = true;
                let end = MonitorToViz::Trigger(TriggerMsg {
                    time: self.session.monitor().time(),
                    message: END_OF_TRACE.into(),
                    severity: Severity::Info,
                });
                self.emit(vec![end])?;
            }
            Ctl::Feed(item) => {
                if matches!(item, FeedItem::Event(_)) {
                    self.report.events += 1;
                }
                match self.session.handle(item) {
                    Ok(out) => self.emit(out)?,
                    Err(e) => {
                        self.report.errors += 1;
                        let m = self.error(e.to_string());
                        self.emit(vec![m])?;
                    }
                }
            }
            Ctl::Connected(c) => {
                self.detach();
                self.client = Some(c);
            }
            Ctl::Lines(id, lines) => {
                if self.client.as_ref().is_some_and(|c| c.id == id) {
                    let out = self.session.handle(FeedItem::Client(lines)).unwrap_or_default();
                    self.emit(out)?;
                    if self.session.hello_seen() {
                        self.hello.send_replace(true);
                    }
                }
            }
            Ctl::Closed(id) => {
                if self.client.as_ref().is_some_and(|c| c.id == id) {
                    self.detach();
                }
            }
        }
        Ok(self.trace_ended && self.client.is_none())
    }

    fn finish(mut self) -> io::Result<RunReport> {
        self.detach();
        self.sink.flush()?;
        Ok(self.report)
    }
}

/// Replays the trace through the session with no UI attached; every
/// outbound message goes to `sink`.
pub async fn run_headless<W: Write>(
    session: Session,
    records: Vec<TraceRecord>,
    mode: ReplayMode,
    sink: W,
) -> io::Result<RunReport> {
    let (tx, mut rx) = mpsc::unbounded_channel::<Ctl>();
    let (hello, _) = watch::channel(false);
    let mut consumer =
        Consumer { session, sink, client: None, report: RunReport::default(), trace_ended: false, hello };
    let feeder = async move { replay(records, &tx, mode).await };
    let consume = async {
        while let Some(ctl) = rx.recv().await {
            if consumer.step(ctl)? {
                break;
            }
        }
        io::Result::Ok(())
    };
    let ((), r) = tokio::join!(feeder, consume);
    r?;
    consumer.finish()
}

#[derive(Clone)]
struct AppState {
    ctl: mpsc::UnboundedSender<Ctl>,
    next_id: Arc<AtomicU64>,
    limit: usize,
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: AppState) {
    let id = state.next_id.fetch_add(1, Ordering::SeqCst);
    let client = Arc::new(Client {
        id,
        queue: Mutex::new(OutboundQueue::new(state.limit)),
        notify: Notify::new(),
        closed: AtomicBool::new(false),
    });
    if state.ctl.send(Ctl::Connected(client.clone())).is_err() {
        return;
    }
    log::info!("client {id} connected");
    let (mut tx, mut rx) = socket.split();
    let writer = {
        let client = client.clone();
        async move {
            loop {
                let batch: Vec<_> = client.queue.lock().unwrap().drain().collect();
                for m in batch {
                    if tx.send(Message::Text(encode_line(&m).into())).await.is_err() {
                        return;
                    }
                }
                if client.closed.load(Ordering::SeqCst) && client.queue.lock().unwrap().is_empty() {
                    let _ = tx.send(Message::Close(None)).await;
                    return;
                }
                client.notify.notified().await;
            }
        }
    };
    let reader = {
        let ctl = state.ctl.clone();
        async move {
            while let Some(Ok(frame)) = rx.next().await {
                let text = match frame {
                    Message::Text(t) => t.as_str().to_string(),
                    Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
                    Message::Close(_) => break,
                    _ => continue,
                };
                let lines = text.lines().map(str::to_string).collect();
                if ctl.send(Ctl::Lines(id, lines)).is_err() {
                    break;
                }
            }
        }
    };
    tokio::select! {
        _ = writer => {}
        _ = reader => {}
    }
    log::info!("client {id} disconnected");
    let _ = state.ctl.send(Ctl::Closed(id));
}

/// Serves the session on `listener` at [`SESSION_PATH`]. Replay starts once
/// the first client has said hello; the server stops after the trace has
/// ended and no client is connected. A new connection replaces the current
/// one.
pub async fn serve<W: Write>(
    session: Session,
    records: Vec<TraceRecord>,
    opts: RunOptions,
    sink: W,
    listener: TcpListener,
) -> io::Result<RunReport> {
    let (tx, mut rx) = mpsc::unbounded_channel::<Ctl>();
    let (hello, mut hello_rx) = watch::channel(false);
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let app = Router::new().route(SESSION_PATH, get(upgrade)).with_state(AppState {
        ctl: tx.clone(),
        next_id: Arc::new(AtomicU64::new(1)),
        limit: opts.outbound_limit,
    });
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    let feeder = tokio::spawn(async move {
        if hello_rx.wait_for(|h| *h).await.is_ok() {
            replay(records, &tx, opts.replay).await;
        }
    });
    let mut consumer =
        Consumer { session, sink, client: None, report: RunReport::default(), trace_ended: false, hello };
    let mut result = Ok(());
    while let Some(ctl) = rx.recv().await {
        match consumer.step(ctl) {
            Ok(true) => break,
            Ok(false) => {}
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    feeder.abort();
    let report = consumer.finish();
    let _ = stop_tx.send(());
    server.await.map_err(io::Error::other)??;
    result?;
    report
}
