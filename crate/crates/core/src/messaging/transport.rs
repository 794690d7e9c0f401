//! TCP transport: each frame is a 4-byte big-endian length followed by a
//! UTF-8 RuleML message document.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::Sender;

use super::Message;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Read one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {n} bytes")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

/// A running listener; dropping it does not stop the thread, call `stop`.
pub struct Listener {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Listener {
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(mut conn: TcpStream, inbox: Sender<Message>, stop: Arc<AtomicBool>) {
    let _ = conn.set_read_timeout(Some(Duration::from_millis(200)));
    loop {
        if stop.load(Ordering::SeqCst) {
            return;
        }
        match read_frame(&mut conn) {
            Ok(Some(body)) => {
                let text = String::from_utf8_lossy(&body);
                match crate::ruleml::message_from_xml(&text) {
                    Ok(m) => {
                        if inbox.send(m).is_err() {
                            return;
                        }
                    }
                    Err(e) => log::warn!("discarding malformed frame: {e}"),
                }
            }
            Ok(None) => return,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::debug!("connection closed: {e}");
                return;
            }
        }
    }
}

/// Accept connections on `addr`, decoding frames into `inbox`. One thread
/// per connection; all of them feed the same queue.
pub fn listen(addr: &str, inbox: Sender<Message>) -> io::Result<Listener> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let handle = std::thread::Builder::new().name(format!("listen-{local}")).spawn(move || {
        while !flag.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((conn, peer)) => {
                    log::debug!("accepted {peer}");
                    let _ = conn.set_nonblocking(false);
                    let (inbox, flag) = (inbox.clone(), flag.clone());
                    let _ = std::thread::Builder::new()
                        .name(format!("conn-{peer}"))
                        .spawn(move || serve(conn, inbox, flag));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    std::thread::sleep(Duration::from_millis(50));
                }
            }
        }
    })?;
    Ok(Listener { addr: local, stop, handle: Some(handle) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_length_prefixed_big_endian() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"<x/>").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 4]);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"<x/>");
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }
}
