//! Live frame transport over TCP: a server that renders a simulated app on
//! an fps grid and pushes length-prefixed frames, and a client handle that
//! always hands the scheduler the newest fully received frame.

use std::io::{self, Cursor, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use rendergate_core::imaging::Frame;
use rendergate_core::protocol::{
    decode_raw_rgb, encode_message, encode_raw_rgb, handshake_bytes, parse_handshake,
    PayloadFormat, ProtocolError, StreamDecoder,
};
use rendergate_core::scheduler::{FrameSource, SchedulerError, SourcedFrame};
use rendergate_core::sim::{AppModel, Session, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("frame payload: {0}")]
    BadImage(String),
    #[error("app: {0}")]
    App(#[from] SimError),
    #[error("stream disconnected")]
    Disconnected,
}

#[derive(Debug, Clone, Copy)]
pub struct ServeConfig {
    pub fps: u32,
    pub format: PayloadFormat,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { fps: 30, format: PayloadFormat::Png }
    }
}

// Single-frame mailbox between the render clock and the socket writer.
// put() overwrites: a consumer that falls behind only ever sees the newest
// frame, never a growing queue.
struct Slot {
    state: Mutex<SlotState>,
    cv: Condvar,
}

struct SlotState {
    payload: Option<Vec<u8>>,
    closed: bool,
}

impl Slot {
    fn new() -> Self {
        Slot { state: Mutex::new(SlotState { payload: None, closed: false }), cv: Condvar::new() }
    }

    fn put(&self, payload: Vec<u8>) {
        let mut s = self.state.lock().unwrap();
        s.payload = Some(payload);
        self.cv.notify_all();
    }

    fn take(&self) -> Option<Vec<u8>> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(p) = s.payload.take() {
                return Some(p);
            }
            if s.closed {
                return None;
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.cv.notify_all();
    }
}

struct ServerShared {
    stop: AtomicBool,
    frames_sent: AtomicU64,
    clients: AtomicUsize,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

/// A running frame server. Dropping it stops the accept loop and joins
/// every per-client thread.
pub struct StreamServer {
    addr: SocketAddr,
    fps: u32,
    started_at: Instant,
    shared: Arc<ServerShared>,
    accept: Option<JoinHandle<()>>,
}

/// Serve a simulated app over TCP. Each connection gets a handshake, its
/// own session started at connect time, and frames on the fps grid; a
/// slow connection is fed the newest frame only.
pub fn serve(
    app: AppModel,
    addr: impl ToSocketAddrs,
    cfg: ServeConfig,
) -> Result<StreamServer, StreamError> {
    app.validate()?;
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let shared = Arc::new(ServerShared {
        stop: AtomicBool::new(false),
        frames_sent: AtomicU64::new(0),
        clients: AtomicUsize::new(0),
        workers: Mutex::new(Vec::new()),
    });

    let accept_shared = Arc::clone(&shared);
    let accept = thread::spawn(move || loop {
        if accept_shared.stop.load(Ordering::Relaxed) {
            break;
        }
        match listener.accept() {
            Ok((sock, _)) => {
                accept_shared.clients.fetch_add(1, Ordering::Relaxed);
                let handles = spawn_client(sock, app.clone(), cfg, Arc::clone(&accept_shared));
                accept_shared.workers.lock().unwrap().extend(handles);
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(3));
            }
            Err(_) => break,
        }
    });

    Ok(StreamServer { addr, fps: cfg.fps, started_at: Instant::now(), shared, accept: Some(accept) })
}

fn spawn_client(
    sock: TcpStream,
    app: AppModel,
    cfg: ServeConfig,
    shared: Arc<ServerShared>,
) -> Vec<JoinHandle<()>> {
    let slot = Arc::new(Slot::new());
    let gone = Arc::new(AtomicBool::new(false));
    sock.set_nodelay(true).ok();

    // the producer slams this shut on stop so a writer stuck against a
    // full send buffer wakes up with an error instead of hanging the join
    let writer_sock = sock.try_clone();
    let writer = {
        let slot = Arc::clone(&slot);
        let gone = Arc::clone(&gone);
        let mut sock = sock;
        thread::spawn(move || {
            let send = |sock: &mut TcpStream, bytes: &[u8]| -> io::Result<()> {
                sock.write_all(bytes)?;
                sock.flush()
            };
            if send(&mut sock, &handshake_bytes(cfg.format)).is_err() {
                gone.store(true, Ordering::Relaxed);
                return;
            }
            while let Some(payload) = slot.take() {
                let msg = match encode_message(&payload) {
                    Ok(m) => m,
                    Err(_) => continue,
                };
                if send(&mut sock, &msg).is_err() {
                    gone.store(true, Ordering::Relaxed);
                    return;
                }
            }
        })
    };

    let producer = thread::spawn(move || {
        // validated before the listener came up
        let session = Session::new(app).expect("app validated before serving");
        let epoch = Instant::now();
        let fps = u64::from(cfg.fps.max(1));
        for i in 1u64.. {
            if shared.stop.load(Ordering::Relaxed) || gone.load(Ordering::Relaxed) {
                break;
            }
            let t = i * 1000 / fps;
            let target = epoch + Duration::from_millis(t);
            let now = Instant::now();
            if target > now {
                thread::sleep(target - now);
            }
            let frame = session.frame_at(t);
            let payload = match cfg.format {
                PayloadFormat::RawRgb => encode_raw_rgb(&frame),
                PayloadFormat::Png => {
                    let img = image::RgbImage::from_raw(
                        frame.width as u32,
                        frame.height as u32,
                        frame.pixels,
                    )
                    .expect("simulator frames carry consistent dimensions");
                    let mut buf = Cursor::new(Vec::new());
                    if img.write_to(&mut buf, image::ImageFormat::Png).is_err() {
                        continue;
                    }
                    buf.into_inner()
                }
            };
            slot.put(payload);
            shared.frames_sent.fetch_add(1, Ordering::Relaxed);
        }
        slot.close();
        if let Ok(sock) = writer_sock {
            sock.shutdown(Shutdown::Both).ok();
        }
    });

    vec![writer, producer]
}

impl StreamServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn started_at(&self) -> Instant {
        self.started_at
    }

    /// Frames rendered and offered across all clients; monotone.
    pub fn frames_sent(&self) -> u64 {
        self.shared.frames_sent.load(Ordering::Relaxed)
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.load(Ordering::Relaxed)
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    /// Block until the accept loop exits (it only does on shutdown or a
    /// listener error), for foreground serving.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            h.join().ok();
        }
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.accept.take() {
            h.join().ok();
        }
        let workers: Vec<JoinHandle<()>> =
            std::mem::take(&mut *self.shared.workers.lock().unwrap());
        for h in workers {
            h.join().ok();
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

#[derive(Debug, Clone)]
enum EndState {
    Disconnected,
    BadImage(String),
    Protocol(ProtocolError),
    Io(String),
}

impl EndState {
    fn to_error(&self) -> StreamError {
        match self {
            EndState::Disconnected => StreamError::Disconnected,
            EndState::BadImage(what) => StreamError::BadImage(what.clone()),
            EndState::Protocol(e) => StreamError::Protocol(e.clone()),
            EndState::Io(what) => {
                StreamError::Io(io::Error::new(io::ErrorKind::Other, what.clone()))
            }
        }
    }
}

struct ClientShared {
    state: Mutex<ClientState>,
    cv: Condvar,
}

struct ClientState {
    latest: Option<(u64, Frame)>,
    received: u64,
    ended: Option<EndState>,
}

/// Receiving end of the stream. A background reader keeps only the newest
/// fully received frame; `latest_frame` and `next_frame` never see a
/// partial one.
pub struct StreamClient {
    shared: Arc<ClientShared>,
    // clone of the reader's socket, shut down on drop so the reader exits
    sock: TcpStream,
    last_seen: u64,
    latency: Duration,
}

impl StreamClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, StreamError> {
        let mut sock = TcpStream::connect(addr)?;
        sock.set_nodelay(true).ok();
        let mut hs = [0u8; 2];
        sock.read_exact(&mut hs)?;
        let format = parse_handshake(hs)?;
        let sock_clone = sock.try_clone()?;

        let shared = Arc::new(ClientShared {
            state: Mutex::new(ClientState { latest: None, received: 0, ended: None }),
            cv: Condvar::new(),
        });
        let epoch = Instant::now();
        let reader_shared = Arc::clone(&shared);
        thread::spawn(move || {
            let end = read_frames(&mut sock, format, epoch, &reader_shared);
            let mut s = reader_shared.state.lock().unwrap();
            s.ended = Some(end);
            reader_shared.cv.notify_all();
        });

        Ok(StreamClient { shared, sock: sock_clone, last_seen: 0, latency: Duration::ZERO })
    }

    /// Artificial per-frame delay, emulating a capture-then-transfer path
    /// instead of a push stream.
    pub fn set_latency(&mut self, latency: Duration) {
        self.latency = latency;
    }

    /// Frames the reader has fully received so far.
    pub fn frames_received(&self) -> u64 {
        self.shared.state.lock().unwrap().received
    }

    /// Newest frame right now, waiting only if none has arrived yet.
    /// Intermediate frames the caller never asked for are skipped.
    pub fn latest_frame(&mut self) -> Result<Frame, StreamError> {
        self.frame_where(|seq, _| seq > 0)
    }

    /// Newest frame strictly after the last one returned; blocks for it.
    pub fn next_frame(&mut self) -> Result<Frame, StreamError> {
        let floor = self.last_seen;
        self.frame_where(move |seq, _| seq > floor)
    }

    fn frame_where(
        &mut self,
        ready: impl Fn(u64, &Frame) -> bool,
    ) -> Result<Frame, StreamError> {
        let frame = {
            let mut s = self.shared.state.lock().unwrap();
            loop {
                if let Some((seq, frame)) = &s.latest {
                    if ready(*seq, frame) {
                        self.last_seen = *seq;
                        break frame.clone();
                    }
                }
                if let Some(end) = &s.ended {
                    return Err(end.to_error());
                }
                s = self.shared.cv.wait(s).unwrap();
            }
        };
        if !self.latency.is_zero() {
            thread::sleep(self.latency);
        }
        Ok(frame)
    }
}

impl Drop for StreamClient {
    fn drop(&mut self) {
        self.sock.shutdown(Shutdown::Both).ok();
    }
}

fn read_frames(
    sock: &mut TcpStream,
    format: PayloadFormat,
    epoch: Instant,
    shared: &ClientShared,
) -> EndState {
    let mut decoder = StreamDecoder::new();
    let mut buf = [0u8; 16384];
    loop {
        let n = match sock.read(&mut buf) {
            Ok(0) => return EndState::Disconnected,
            Ok(n) => n,
            Err(e) => match e.kind() {
                io::ErrorKind::ConnectionReset
                | io::ErrorKind::ConnectionAborted
                | io::ErrorKind::BrokenPipe
                | io::ErrorKind::UnexpectedEof => return EndState::Disconnected,
                _ => return EndState::Io(e.to_string()),
            },
        };
        decoder.push(&buf[..n]);
        loop {
            let payload = match decoder.next_message() {
                Ok(Some(p)) => p,
                Ok(None) => break,
                Err(e) => return EndState::Protocol(e),
            };
            let stamp = epoch.elapsed().as_millis() as u64;
            let frame = match decode_payload(&payload, format, stamp) {
                Ok(f) => f,
                Err(what) => return EndState::BadImage(what),
            };
            let mut s = shared.state.lock().unwrap();
            s.received += 1;
            let seq = s.received;
            s.latest = Some((seq, frame));
            shared.cv.notify_all();
        }
    }
}

fn decode_payload(payload: &[u8], format: PayloadFormat, stamp: u64) -> Result<Frame, String> {
    match format {
        PayloadFormat::RawRgb => decode_raw_rgb(payload, stamp).map_err(|e| e.to_string()),
        PayloadFormat::Png => {
            let img = image::load_from_memory_with_format(payload, image::ImageFormat::Png)
                .map_err(|e| e.to_string())?
                .to_rgb8();
            let (w, h) = img.dimensions();
            Frame::new(w as usize, h as usize, img.into_raw(), stamp).map_err(|e| e.to_string())
        }
    }
}

/// Adapts a live stream to the scheduler's frame source: wall-clock time,
/// no ground truth, and a lost stream surfacing as a scheduler error.
pub struct LiveFrameSource {
    client: StreamClient,
    epoch: Instant,
}

impl LiveFrameSource {
    pub fn new(client: StreamClient) -> Self {
        LiveFrameSource { client, epoch: Instant::now() }
    }

    pub fn client_mut(&mut self) -> &mut StreamClient {
        &mut self.client
    }
}

impl FrameSource for LiveFrameSource {
    fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    fn next_frame(&mut self) -> Result<SourcedFrame, SchedulerError> {
        let frame = self.client.next_frame().map_err(|_| SchedulerError::StreamLost)?;
        Ok(SourcedFrame { frame, gt: None })
    }

    fn sleep_until(&mut self, t: u64) {
        let now = self.now_ms();
        if t > now {
            thread::sleep(Duration::from_millis(t - now));
        }
    }
}
