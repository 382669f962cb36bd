//! External denoisers running as child processes.
//!
//! Wire protocol over the child's stdin/stdout, one persistent session:
//!
//! * frame = 10-digit zero-padded ASCII decimal length of the JSON header,
//!   `'\n'`, the JSON header, then a raw little-endian `f32` payload whose
//!   size is implied by the header;
//! * the child first emits the handshake header
//!   `{"proto":"sure-amp-denoise","version":1}` (no payload);
//! * request header `{"op":"denoise","h":H,"w":W,"complex":bool,"noise":{..}}`
//!   with `H*W*(1 or 2)` floats (complex interleaved `re, im`);
//! * response `{"status":"ok"}` plus a payload of the request's shape, or
//!   `{"status":"error","msg":..}` with no payload;
//! * `{"op":"quit"}` makes the child exit with status 0.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::denoise::{Denoiser, NoiseModel};
use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid};

pub const PROTOCOL_NAME: &str = "sure-amp-denoise";
pub const PROTOCOL_VERSION: u32 = 1;

const LEN_DIGITS: usize = 10;
const STDERR_EXCERPT: usize = 2000;

/// A decoded frame: the JSON header text and the raw payload bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginRequest {
    pub h: usize,
    pub w: usize,
    pub complex: bool,
    pub noise: NoiseModel,
}

impl PluginRequest {
    pub fn payload_floats(&self) -> usize {
        self.h * self.w * if self.complex { 2 } else { 1 }
    }

    /// The request header as sent on the wire.
    pub fn header(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            op: &'static str,
            h: usize,
            w: usize,
            complex: bool,
            noise: &'a NoiseModel,
        }
        serde_json::to_string(&Wire {
            op: "denoise",
            h: self.h,
            w: self.w,
            complex: self.complex,
            noise: &self.noise,
        })
        .expect("request header serializes")
    }
}

pub fn encode_frame(header: &str, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(LEN_DIGITS + 1 + header.len() + payload.len());
    out.extend_from_slice(format!("{:0width$}\n", header.len(), width = LEN_DIGITS).as_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_frame(w: &mut impl Write, header: &str, payload: &[u8]) -> io::Result<()> {
    w.write_all(&encode_frame(header, payload))?;
    w.flush()
}

fn parse_len(prefix: &[u8]) -> io::Result<usize> {
    let bad = || io::Error::new(io::ErrorKind::InvalidData, "malformed frame length prefix");
    if prefix.len() != LEN_DIGITS + 1 || prefix[LEN_DIGITS] != b'\n' {
        return Err(bad());
    }
    let digits = &prefix[..LEN_DIGITS];
    if !digits.iter().all(u8::is_ascii_digit) {
        return Err(bad());
    }
    std::str::from_utf8(digits).unwrap().parse().map_err(|_| bad())
}

/// Reads one frame header. Returns `Ok(None)` on a clean end of stream before
/// any byte of the frame.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<String>> {
    let mut prefix = [0u8; LEN_DIGITS + 1];
    let mut got = 0;
    while got < prefix.len() {
        let k = r.read(&mut prefix[got..])?;
        if k == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        got += k;
    }
    let len = parse_len(&prefix)?;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    String::from_utf8(header)
        .map(Some)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "frame header is not UTF-8"))
}

pub fn encode_payload(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_payload(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

/// Runs the plugin side of the protocol on `input`/`output` until `quit` or end
/// of input. `handler` maps a request and its samples to output samples of
/// the same length, or an error message.
pub fn serve<R, W, F>(mut input: R, mut output: W, mut handler: F) -> io::Result<()>
where
    R: Read,
    W: Write,
    F: FnMut(&PluginRequest, Vec<f32>) -> std::result::Result<Vec<f32>, String>,
{
    let handshake = format!(r#"{{"proto":"{PROTOCOL_NAME}","version":{PROTOCOL_VERSION}}}"#);
    write_frame(&mut output, &handshake, &[])?;
    let error = |out: &mut W, msg: &str| {
        let header = format!(r#"{{"status":"error","msg":{}}}"#, Value::from(msg));
        write_frame(out, &header, &[])
    };
    loop {
        let header = match read_frame(&mut input) {
            Ok(Some(h)) => h,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                error(&mut output, &e.to_string())?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let value: Value = match serde_json::from_str(&header) {
            Ok(v) => v,
            Err(e) => {
                error(&mut output, &format!("malformed header: {e}"))?;
                continue;
            }
        };
        match value.get("op").and_then(Value::as_str) {
            Some("quit") => return Ok(()),
            Some("denoise") => {}
            Some(other) => {
                error(&mut output, &format!("unknown op {other:?}"))?;
                continue;
            }
            None => {
                error(&mut output, "header has no op")?;
                continue;
            }
        }
        let req: PluginRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                error(&mut output, &format!("bad denoise request: {e}"))?;
                continue;
            }
        };
        let mut payload = vec![0u8; req.payload_floats() * 4];
        input.read_exact(&mut payload)?;
        match handler(&req, decode_payload(&payload)) {
            Ok(out) if out.len() == req.payload_floats() => {
                write_frame(&mut output, r#"{"status":"ok"}"#, &encode_payload(&out))?;
            }
            Ok(out) => error(
                &mut output,
                &format!("handler produced {} samples, expected {}", out.len(), req.payload_floats()),
            )?,
            Err(msg) => error(&mut output, &msg)?,
        }
    }
}

enum ReadFail {
    Timeout,
    Closed,
}

/// Byte stream fed by a reader thread, readable with a deadline.
struct ChannelReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

impl ChannelReader {
    fn spawn(mut src: impl Read + Send + 'static) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut chunk = vec![0u8; 1 << 16];
            loop {
                match src.read(&mut chunk) {
                    Ok(0) | Err(_) => break,
                    Ok(k) => {
                        if tx.send(chunk[..k].to_vec()).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        Self { rx, buf: Vec::new(), pos: 0 }
    }

    fn read_exact(&mut self, n: usize, deadline: Instant) -> std::result::Result<Vec<u8>, ReadFail> {
        while self.buf.len() - self.pos < n {
            let wait = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(wait) {
                Ok(chunk) => {
                    self.buf.drain(..self.pos);
                    self.pos = 0;
                    self.buf.extend_from_slice(&chunk);
                }
                Err(RecvTimeoutError::Timeout) => return Err(ReadFail::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(ReadFail::Closed),
            }
        }
        let out = self.buf[self.pos..self.pos + n].to_vec();
        self.pos += n;
        Ok(out)
    }
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: ChannelReader,
    stderr: Arc<Mutex<Vec<u8>>>,
    failed: bool,
}

impl Session {
    fn stderr_excerpt(&mut self) -> String {
        // give the child a moment to finish writing diagnostics
        let until = Instant::now() + Duration::from_millis(200);
        while Instant::now() < until {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                thread::sleep(Duration::from_millis(20));
                break;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let buf = self.stderr.lock().unwrap();
        let start = buf.len().saturating_sub(STDERR_EXCERPT);
        String::from_utf8_lossy(&buf[start..]).trim().to_string()
    }

    fn fail(&mut self, msg: impl Into<String>) -> Error {
        self.failed = true;
        let _ = self.child.kill();
        let stderr = self.stderr_excerpt();
        Error::Plugin { msg: msg.into(), stderr }
    }

    fn read_header(&mut self, deadline: Instant) -> std::result::Result<String, String> {
        let describe = |f: ReadFail| match f {
            ReadFail::Timeout => "timed out waiting for the plugin".to_string(),
            ReadFail::Closed => "plugin closed its output (exited?)".to_string(),
        };
        let prefix = self.stdout.read_exact(LEN_DIGITS + 1, deadline).map_err(describe)?;
        let len = parse_len(&prefix).map_err(|e| e.to_string())?;
        let header = self.stdout.read_exact(len, deadline).map_err(describe)?;
        String::from_utf8(header).map_err(|_| "frame header is not UTF-8".to_string())
    }

    fn read_payload(&mut self, n: usize, deadline: Instant) -> std::result::Result<Vec<u8>, String> {
        self.stdout.read_exact(n, deadline).map_err(|f| match f {
            ReadFail::Timeout => "timed out reading plugin payload".to_string(),
            ReadFail::Closed => "plugin exited mid-payload".to_string(),
        })
    }
}

/// Denoiser backed by a child process speaking the plugin protocol. Requests
/// on one handle are serialized.
pub struct PluginDenoiser {
    program: PathBuf,
    pid: u32,
    timeout: Duration,
    session: Mutex<Session>,
}

impl std::fmt::Debug for PluginDenoiser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginDenoiser").field("program", &self.program).finish()
    }
}

impl PluginDenoiser {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    /// Starts `program args...` and waits for its handshake.
    pub fn spawn(program: impl AsRef<Path>, args: &[&str]) -> Result<Self> {
        Self::spawn_with_timeout(program, args, Self::DEFAULT_TIMEOUT)
    }

    pub fn spawn_with_timeout(
        program: impl AsRef<Path>,
        args: &[&str],
        timeout: Duration,
    ) -> Result<Self> {
        let program = program.as_ref().to_path_buf();
        let mut child = Command::new(&program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Plugin {
                msg: format!("cannot start {}: {e}", program.display()),
                stderr: String::new(),
            })?;
        let stdin = child.stdin.take();
        let stdout = ChannelReader::spawn(child.stdout.take().expect("piped stdout"));
        let stderr = Arc::new(Mutex::new(Vec::new()));
        {
            let sink = Arc::clone(&stderr);
            let mut src = child.stderr.take().expect("piped stderr");
            thread::spawn(move || {
                let mut chunk = [0u8; 4096];
                while let Ok(k) = src.read(&mut chunk) {
                    if k == 0 {
                        break;
                    }
                    sink.lock().unwrap().extend_from_slice(&chunk[..k]);
                }
            });
        }
        let mut session = Session { child, stdin, stdout, stderr, failed: false };
        let header = session
            .read_header(Instant::now() + timeout)
            .map_err(|m| session.fail(format!("handshake: {m}")))?;
        let ok = serde_json::from_str::<Value>(&header).ok().is_some_and(|v| {
            v.get("proto").and_then(Value::as_str) == Some(PROTOCOL_NAME)
                && v.get("version").and_then(Value::as_u64) == Some(PROTOCOL_VERSION as u64)
        });
        if !ok {
            return Err(session.fail(format!("unexpected handshake {header:?}")));
        }
        let pid = session.child.id();
        Ok(Self { program, pid, timeout, session: Mutex::new(session) })
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    /// OS process id of the child.
    pub fn pid(&self) -> u32 {
        self.pid
    }

    /// Sends one denoise request and returns the response samples.
    pub fn request(&self, req: &PluginRequest, samples: &[f32]) -> Result<Vec<f32>> {
        if samples.len() != req.payload_floats() {
            return Err(Error::InvalidArgument(format!(
                "request carries {} samples, header implies {}",
                samples.len(),
                req.payload_floats()
            )));
        }
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if s.failed {
            return Err(Error::Plugin { msg: "plugin session already failed".into(), stderr: String::new() });
        }
        let frame = encode_frame(&req.header(), &encode_payload(samples));
        let write = match s.stdin.as_mut() {
            Some(stdin) => stdin.write_all(&frame).and_then(|_| stdin.flush()),
            None => Err(io::ErrorKind::BrokenPipe.into()),
        };
        if let Err(e) = write {
            return Err(s.fail(format!("writing request: {e}")));
        }
        let deadline = Instant::now() + self.timeout;
        let header = s.read_header(deadline).map_err(|m| s.fail(m))?;
        let value: Value = serde_json::from_str(&header)
            .map_err(|e| s.fail(format!("malformed response header: {e}")))?;
        match value.get("status").and_then(Value::as_str) {
            Some("ok") => {
                let bytes = s.read_payload(req.payload_floats() * 4, deadline).map_err(|m| s.fail(m))?;
                Ok(decode_payload(&bytes))
            }
            Some("error") => {
                let msg = value.get("msg").and_then(Value::as_str).unwrap_or("unspecified").to_string();
                Err(Error::Plugin { msg: format!("plugin reported: {msg}"), stderr: String::new() })
            }
            _ => Err(s.fail(format!("response without a valid status: {header}"))),
        }
    }

    /// Sends `quit` and waits for the child to exit.
    pub fn shutdown(self) -> Result<ExitStatus> {
        let mut s = self.session.into_inner().unwrap_or_else(|p| p.into_inner());
        if let Some(mut stdin) = s.stdin.take() {
            let _ = write_frame(&mut stdin, r#"{"op":"quit"}"#, &[]);
        }
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            if let Some(status) = s.child.try_wait()? {
                return Ok(status);
            }
            if Instant::now() >= deadline {
                let _ = s.child.kill();
                return Err(Error::Plugin {
                    msg: "plugin did not exit after quit".into(),
                    stderr: s.stderr_excerpt(),
                });
            }
            thread::sleep(Duration::from_millis(10));
        }
    }

    fn roundtrip_real(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        let req = PluginRequest { h: r.height(), w: r.width(), complex: false, noise: noise.clone() };
        let samples: Vec<f32> = r.as_slice().iter().map(|&v| v as f32).collect();
        let out = self.request(&req, &samples)?;
        RealGrid::from_vec(r.height(), r.width(), out.into_iter().map(f64::from).collect())
            .map_err(|e| Error::Plugin { msg: format!("plugin output: {e}"), stderr: String::new() })
    }

    fn roundtrip_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        let req = PluginRequest { h: r.height(), w: r.width(), complex: true, noise: noise.clone() };
        let samples: Vec<f32> =
            r.as_slice().iter().flat_map(|v| [v.re as f32, v.im as f32]).collect();
        let out = self.request(&req, &samples)?;
        let data = out.chunks_exact(2).map(|p| Complex64::new(p[0] as f64, p[1] as f64)).collect();
        ComplexGrid::from_vec(r.height(), r.width(), data)
            .map_err(|e| Error::Plugin { msg: format!("plugin output: {e}"), stderr: String::new() })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(mut stdin) = self.stdin.take() {
            let _ = write_frame(&mut stdin, r#"{"op":"quit"}"#, &[]);
        }
        let until = Instant::now() + Duration::from_millis(500);
        while Instant::now() < until {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Denoiser for PluginDenoiser {
    fn name(&self) -> String {
        format!("plugin:{}", self.program.display())
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        self.roundtrip_real(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        self.roundtrip_complex(r, noise)
    }
}
