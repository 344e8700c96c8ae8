use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread;

use super::protocol::*;
use super::session::Session;
use super::BridgeError;

/// Serves one multiplexed client over any line-oriented stream (stdio, a
/// single TCP connection, a pipe).
pub fn serve_stream<R: BufRead, W: Write>(session: &mut Session, reader: R, mut writer: W) -> Result<(), BridgeError> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for msg in session.handle_line(&line)? {
            writer.write_all(&encode(&msg))?;
        }
        writer.flush()?;
        if session.is_finished() {
            return Ok(());
        }
    }
    if session.is_finished() {
        Ok(())
    } else {
        Err(BridgeError::Disconnected)
    }
}

/// Dials a listening client and serves it.
pub fn serve_connect(session: &mut Session, addr: &str) -> Result<(), BridgeError> {
    let stream = TcpStream::connect(addr).map_err(|source| BridgeError::Connect {
        addr: addr.to_string(),
        source,
    })?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(session, reader, stream)
}

enum Event {
    Opened(usize, TcpStream),
    Line(usize, String),
    Closed(usize),
}

/// Accepts any number of connections, each claiming devices with `hello`,
/// and routes messages to the connection that owns the device. All
/// simulator access stays on the calling thread.
pub fn serve_tcp(session: &mut Session, listener: TcpListener) -> Result<(), BridgeError> {
    let (tx, rx) = mpsc::channel::<Event>();
    thread::spawn(move || {
        for (id, stream) in listener.incoming().enumerate() {
            let Ok(stream) = stream else { continue };
            let Ok(read_half) = stream.try_clone() else { continue };
            if tx.send(Event::Opened(id, stream)).is_err() {
                return;
            }
            let tx = tx.clone();
            thread::spawn(move || {
                for line in BufReader::new(read_half).lines() {
                    let Ok(line) = line else { break };
                    if tx.send(Event::Line(id, line)).is_err() {
                        return;
                    }
                }
                let _ = tx.send(Event::Closed(id));
            });
        }
    });

    let mut writers: HashMap<usize, TcpStream> = HashMap::new();
    let result = route(session, &rx, &mut writers);
    // also wakes clients still waiting when the session fails
    for w in writers.values() {
        let _ = w.shutdown(std::net::Shutdown::Both);
    }
    result
}

fn route(
    session: &mut Session,
    rx: &mpsc::Receiver<Event>,
    writers: &mut HashMap<usize, TcpStream>,
) -> Result<(), BridgeError> {
    let mut owner: HashMap<usize, usize> = HashMap::new();
    while !session.is_finished() {
        let event = rx.recv().map_err(|_| BridgeError::Disconnected)?;
        match event {
            Event::Opened(id, stream) => {
                writers.insert(id, stream);
            }
            Event::Closed(id) => {
                writers.remove(&id);
                if owner.iter().any(|(&d, &c)| c == id && !session.is_device_done(d)) {
                    return Err(BridgeError::Disconnected);
                }
            }
            Event::Line(id, line) => {
                if line.trim().is_empty() {
                    continue;
                }
                let replies = session.handle_line(&line)?;
                let mut batches: HashMap<usize, Vec<u8>> = HashMap::new();
                for msg in replies {
                    if let Message::Hello(h) = &msg {
                        for &d in &h.devices {
                            owner.insert(d, id);
                        }
                    }
                    let target = match &msg {
                        Message::Hello(_) | Message::Error(_) => id,
                        other => *owner.get(&other.device()).unwrap_or(&id),
                    };
                    batches.entry(target).or_default().extend(encode(&msg));
                }
                for (conn, bytes) in batches {
                    if let Some(w) = writers.get_mut(&conn) {
                        w.write_all(&bytes)?;
                        w.flush()?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Everything one client sent and received, in wire order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    /// `(sent_by_client, message)`.
    pub wire: Vec<(bool, Message)>,
}

impl Transcript {
    pub fn sent(&self) -> impl Iterator<Item = &Message> {
        self.wire.iter().filter(|(c, _)| *c).map(|(_, m)| m)
    }

    pub fn received(&self) -> impl Iterator<Item = &Message> {
        self.wire.iter().filter(|(c, _)| !*c).map(|(_, m)| m)
    }

    pub fn experiences(&self) -> Vec<Experience> {
        self.received()
            .filter_map(|m| match m {
                Message::Experience(e) => Some(e.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn gamma_updates(&self) -> Vec<GammaUpdateMsg> {
        self.received()
            .filter_map(|m| match m {
                Message::GammaUpdate(g) => Some(g.clone()),
                _ => None,
            })
            .collect()
    }

    /// Client lines prefixed `> `, server lines `< `.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for (client, m) in &self.wire {
            out.push_str(if *client { "> " } else { "< " });
            out.push_str(std::str::from_utf8(&encode(m)).expect("json is utf-8"));
        }
        out
    }
}

/// A minimal client: claims `devices` (empty = all remote devices) and
/// answers every decision with `policy`, returning `(z, x)` as an action.
pub struct Client<R, W> {
    reader: R,
    writer: W,
    seq: u64,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect<A: ToSocketAddrs + ToString>(addr: A) -> Result<Self, BridgeError> {
        let name = addr.to_string();
        let stream = TcpStream::connect(addr).map_err(|source| BridgeError::Connect { addr: name, source })?;
        Ok(Client::new(BufReader::new(stream.try_clone()?), stream))
    }
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer, seq: 0 }
    }

    pub fn send(&mut self, mut msg: Message, transcript: &mut Transcript) -> Result<(), BridgeError> {
        msg.set_seq(self.seq);
        self.seq += 1;
        self.writer.write_all(&encode(&msg))?;
        self.writer.flush()?;
        transcript.wire.push((true, msg));
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Option<Message>, BridgeError> {
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            if !line.trim().is_empty() {
                return Ok(Some(decode(line.as_bytes())?));
            }
        }
    }

    /// Runs until every claimed device has finished its last episode or
    /// the server closes the stream.
    pub fn run<F>(&mut self, devices: Vec<usize>, mut policy: F) -> Result<Transcript, BridgeError>
    where
        F: FnMut(&Decision) -> (Option<f64>, Option<usize>),
    {
        let mut transcript = Transcript::default();
        let hello = Message::Hello(Hello {
            seq: 0,
            device: devices.first().copied().unwrap_or(0),
            episode: 0,
            protocol: PROTOCOL_VERSION,
            devices,
            session: None,
        });
        self.send(hello, &mut transcript)?;
        let mut remaining: Option<(usize, Vec<usize>)> = None;
        while let Some(msg) = self.recv()? {
            transcript.wire.push((false, msg.clone()));
            match &msg {
                Message::Hello(h) => {
                    let episodes = h.session.as_ref().map_or(0, |s| s.episodes);
                    remaining = Some((episodes, h.devices.clone()));
                }
                Message::Decision(d) => {
                    let (z, x) = policy(d);
                    let action = Message::Action(ActionMsg {
                        seq: 0,
                        device: d.device,
                        episode: d.episode,
                        token: d.token,
                        z,
                        x,
                    });
                    self.send(action, &mut transcript)?;
                }
                Message::EpisodeEnd(e) => {
                    if let Some((episodes, devices)) = remaining.as_mut() {
                        if e.episode + 1 == *episodes {
                            devices.retain(|&d| d != e.device);
                            if devices.is_empty() {
                                break;
                            }
                        }
                    }
                }
                Message::Error(e) if remaining.is_none() => {
                    return Err(BridgeError::Rejected(e.message.clone()));
                }
                _ => {}
            }
        }
        Ok(transcript)
    }
}
