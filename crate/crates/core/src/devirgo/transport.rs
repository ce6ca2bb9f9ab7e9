//! Ordered, reliable frame links between the coordinator and its workers.
//!
//! On TCP a frame is a 4-byte little-endian length (covering the tag and
//! the payload), a 1-byte tag and the payload.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};

/// Frames above this size are rejected as malformed.
pub const MAX_FRAME: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: u8, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }

    /// Bytes on the wire, length prefix included.
    pub fn wire_len(&self) -> usize {
        5 + self.payload.len()
    }
}

/// One end of a point-to-point link.
pub trait Link: Send {
    fn send(&mut self, frame: Frame) -> Result<()>;
    fn recv(&mut self) -> Result<Frame>;
}

/// In-process link over a pair of channels.
pub struct ChannelLink {
    tx: Sender<Frame>,
    rx: Receiver<Frame>,
}

/// Two connected in-process endpoints.
pub fn channel_pair() -> (ChannelLink, ChannelLink) {
    let (a_tx, a_rx) = channel();
    let (b_tx, b_rx) = channel();
    (ChannelLink { tx: a_tx, rx: b_rx }, ChannelLink { tx: b_tx, rx: a_rx })
}

impl Link for ChannelLink {
    fn send(&mut self, frame: Frame) -> Result<()> {
        self.tx.send(frame).map_err(|_| Error::Transport("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Frame> {
        self.rx.recv().map_err(|_| Error::Transport("peer hung up".into()))
    }
}

pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn connect(addr: &str) -> Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    let len = u32::try_from(frame.payload.len() + 1).map_err(|_| Error::Transport("frame too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&[frame.tag])?;
    w.write_all(&frame.payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len == 0 || len > MAX_FRAME {
        return Err(Error::Transport(format!("bad frame length {len}")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let mut payload = vec![0u8; len - 1];
    r.read_exact(&mut payload)?;
    Ok(Frame { tag: tag[0], payload })
}

impl Link for TcpLink {
    fn send(&mut self, frame: Frame) -> Result<()> {
        write_frame(&mut self.stream, &frame)
    }

    fn recv(&mut self) -> Result<Frame> {
        read_frame(&mut self.stream)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;
    use std::net::TcpListener;

    #[test]
    fn frames_round_trip_through_bytes() {
        let frames = [Frame::new(1, vec![]), Frame::new(7, vec![1, 2, 3]), Frame::new(255, vec![0; 1000])];
        let mut buf = Vec::new();
        for f in &frames {
            write_frame(&mut buf, f).unwrap();
        }
        assert_eq!(buf.len(), frames.iter().map(Frame::wire_len).sum::<usize>());
        let mut cur = Cursor::new(buf);
        for f in &frames {
            assert_eq!(&read_frame(&mut cur).unwrap(), f);
        }
        assert!(read_frame(&mut cur).is_err());
    }

    #[test]
    fn zero_length_and_truncated_frames_rejected() {
        assert!(read_frame(&mut Cursor::new(vec![0, 0, 0, 0])).is_err());
        assert!(read_frame(&mut Cursor::new(vec![5, 0, 0, 0, 1, 2])).is_err());
    }

    #[test]
    fn channel_and_tcp_links_preserve_order() {
        let (mut a, mut b) = channel_pair();
        for i in 0..10u8 {
            a.send(Frame::new(i, vec![i])).unwrap();
        }
        for i in 0..10u8 {
            assert_eq!(b.recv().unwrap().tag, i);
        }
        drop(a);
        assert!(b.recv().is_err());

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let handle = std::thread::spawn(move || {
            let mut link = TcpLink::new(listener.accept().unwrap().0).unwrap();
            for _ in 0..10 {
                let f = link.recv().unwrap();
                link.send(f).unwrap();
            }
        });
        let mut link = TcpLink::connect(&addr).unwrap();
        for i in 0..10u8 {
            link.send(Frame::new(i, vec![i; i as usize])).unwrap();
        }
        for i in 0..10u8 {
            assert_eq!(link.recv().unwrap(), Frame::new(i, vec![i; i as usize]));
        }
        handle.join().unwrap();
    }
}
