//! WebSocket front end of the operator session. One simulation thread owns
//! the [`Session`]; socket tasks only forward text in and out.

use std::collections::HashMap;
use std::sync::mpsc as std_mpsc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use pneumahand::config::Config;
use pneumahand::interface::{ClientId, Recipient, Session};
use pneumahand::{Error, Result};
use tokio::sync::{mpsc, oneshot};

enum Inbound {
    Connect {
        outbox: mpsc::UnboundedSender<String>,
        id: oneshot::Sender<ClientId>,
    },
    Text(ClientId, String),
    Disconnect(ClientId),
}

type Inbox = std_mpsc::Sender<Inbound>;

/// Steps the session at the tick rate. Falls back to the current time when
/// a tick overruns by more than 0.1 s (for instance during an experiment).
fn simulation_loop(mut session: Session, inbox: std_mpsc::Receiver<Inbound>) -> Result<()> {
    let period = Duration::from_secs_f64(1.0 / session.simulation().tick_rate());
    let mut clients: HashMap<ClientId, mpsc::UnboundedSender<String>> = HashMap::new();
    let mut deadline = Instant::now();
    loop {
        loop {
            match inbox.try_recv() {
                Ok(Inbound::Connect { outbox, id }) => {
                    let (client, welcome) = session.connect();
                    let _ = outbox.send(welcome.text());
                    clients.insert(client, outbox);
                    let _ = id.send(client);
                }
                Ok(Inbound::Text(client, text)) => session.submit(client, &text),
                Ok(Inbound::Disconnect(client)) => {
                    clients.remove(&client);
                    session.disconnect(client);
                }
                Err(std_mpsc::TryRecvError::Empty) => break,
                Err(std_mpsc::TryRecvError::Disconnected) => return Ok(()),
            }
        }
        for o in session.step()? {
            let text = o.text();
            match o.to {
                Recipient::All => {
                    for tx in clients.values() {
                        let _ = tx.send(text.clone());
                    }
                }
                Recipient::Client(c) => {
                    if let Some(tx) = clients.get(&c) {
                        let _ = tx.send(text);
                    }
                }
            }
        }
        deadline += period;
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        } else if now - deadline > Duration::from_millis(100) {
            deadline = now;
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(inbox): State<Inbox>) -> Response {
    ws.on_upgrade(move |socket| client(socket, inbox))
}

async fn client(socket: WebSocket, inbox: Inbox) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let (id_tx, id_rx) = oneshot::channel();
    if inbox
        .send(Inbound::Connect {
            outbox: tx,
            id: id_tx,
        })
        .is_err()
    {
        return;
    }
    let Ok(id) = id_rx.await else { return };
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(t) => {
                if inbox.send(Inbound::Text(id, t.to_string())).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = inbox.send(Inbound::Disconnect(id));
    writer.abort();
}

pub fn serve(cfg: Config, host: &str, port: u16) -> Result<()> {
    let session = Session::new(cfg)?;
    let (inbox, rx) = std_mpsc::channel();
    let sim = std::thread::Builder::new()
        .name("simulation".into())
        .spawn(move || simulation_loop(session, rx))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let addr = format!("{host}:{port}");
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        println!("listening on ws://{}/ws", listener.local_addr()?);
        let app = Router::new()
            .route("/ws", get(ws_handler))
            .with_state(inbox);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, Error>(())
    })?;
    if sim.is_finished() {
        return sim
            .join()
            .map_err(|_| Error::Domain("simulation thread panicked".into()))?;
    }
    Ok(())
}
