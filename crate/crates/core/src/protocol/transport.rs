//! Moving requests to a cloud and responses back.
//!
//! Over a stream every frame is a little-endian `u32` length followed by
//! that many bytes. The first frame of a connection is a setup message;
//! each later frame is a request answered by one response, or by an error
//! frame (`"ERLX"` then a UTF-8 message).

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;

use super::cloud::Cloud;
use super::message::{ClientRequest, CloudResponse};
use super::setup::SetupMessage;
use crate::ckks::CkksContext;
use crate::{Error, Result};

const ERROR_MAGIC: &[u8; 4] = b"ERLX";
const MAX_FRAME: usize = 1 << 30;

pub trait Transport {
    fn call(&mut self, req: &ClientRequest) -> Result<CloudResponse>;
}

/// Calls a cloud living in the same process, optionally passing every
/// message through its byte encoding.
#[derive(Debug)]
pub struct InProcess {
    cloud: Cloud,
    wire: bool,
}

impl InProcess {
    pub fn new(cloud: Cloud, wire: bool) -> Self {
        Self { cloud, wire }
    }
}

impl Transport for InProcess {
    fn call(&mut self, req: &ClientRequest) -> Result<CloudResponse> {
        if !self.wire {
            return self.cloud.evaluate(req);
        }
        let ctx = self.cloud.context().clone();
        let req = ClientRequest::from_bytes(&ctx, &req.to_bytes())?;
        let resp = self.cloud.evaluate(&req)?;
        CloudResponse::from_bytes(&ctx, &resp.to_bytes())
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    if payload.len() > MAX_FRAME {
        return Err(Error::Framing(format!(
            "frame of {} bytes is too large",
            payload.len()
        )));
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `None` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Framing(format!("frame of {len} bytes is too large")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            Error::Framing(format!("stream ended inside a {len}-byte frame"))
        }
        _ => e.into(),
    })?;
    Ok(Some(buf))
}

fn error_frame(e: &Error) -> Vec<u8> {
    let mut out = ERROR_MAGIC.to_vec();
    out.extend_from_slice(e.to_string().as_bytes());
    out
}

/// Client end of a stream connection to [`serve_connection`].
#[derive(Debug)]
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    ctx: Arc<CkksContext>,
}

impl TcpTransport {
    pub fn connect<A: ToSocketAddrs>(
        addr: A,
        setup: &SetupMessage,
        ctx: Arc<CkksContext>,
    ) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut writer = BufWriter::new(stream.try_clone()?);
        write_frame(&mut writer, &setup.to_bytes())?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            ctx,
        })
    }
}

impl Transport for TcpTransport {
    fn call(&mut self, req: &ClientRequest) -> Result<CloudResponse> {
        write_frame(&mut self.writer, &req.to_bytes())?;
        let frame = read_frame(&mut self.reader)?
            .ok_or_else(|| Error::Framing("server closed the connection".into()))?;
        if let Some(msg) = frame.strip_prefix(ERROR_MAGIC) {
            return Err(Error::Protocol(format!(
                "cloud: {}",
                String::from_utf8_lossy(msg)
            )));
        }
        let resp = CloudResponse::from_bytes(&self.ctx, &frame)?;
        if resp.id != req.id {
            return Err(Error::Protocol(format!(
                "response {} answers request {}",
                resp.id, req.id
            )));
        }
        Ok(resp)
    }
}

/// Serves one client until it disconnects. Returns the number of
/// requests answered.
pub fn serve_connection(stream: TcpStream) -> Result<usize> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let Some(first) = read_frame(&mut reader)? else {
        return Ok(0);
    };
    let cloud = match SetupMessage::from_bytes(&first).and_then(|s| Cloud::from_setup(&s)) {
        Ok(c) => c,
        Err(e) => {
            write_frame(&mut writer, &error_frame(&e))?;
            return Err(e);
        }
    };
    let ctx = cloud.context().clone();
    let mut answered = 0;
    while let Some(frame) = read_frame(&mut reader)? {
        let reply = ClientRequest::from_bytes(&ctx, &frame).and_then(|req| cloud.evaluate(&req));
        match reply {
            Ok(resp) => write_frame(&mut writer, &resp.to_bytes())?,
            Err(e) => write_frame(&mut writer, &error_frame(&e))?,
        }
        answered += 1;
    }
    Ok(answered)
}

/// Accepts connections one after another; stops after `limit` of them
/// when given.
pub fn serve(listener: &TcpListener, limit: Option<usize>) -> Result<()> {
    let mut served = 0;
    for stream in listener.incoming() {
        serve_connection(stream?)?;
        served += 1;
        if limit.is_some_and(|l| served >= l) {
            break;
        }
    }
    Ok(())
}
