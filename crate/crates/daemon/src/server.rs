//! HTTP and WebSocket service.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use tokio::net::TcpListener;

use crate::acquisition::{AcquisitionHandle, StreamItem};
use crate::messages::{ClientMessage, SamplesMessage, ServerMessage};

/// Per-client queue depth, in stream items.
pub const CLIENT_CAPACITY: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
struct AppState {
    handle: Arc<AcquisitionHandle>,
    started: Instant,
}

pub fn router(handle: Arc<AcquisitionHandle>) -> Router {
    let state = AppState {
        handle,
        started: Instant::now(),
    };
    Router::new()
        .route("/health", get(health))
        .route("/config", get(config))
        .route("/ws", get(ws))
        .with_state(state)
}

/// Binds the listening socket on all interfaces. Port 0 picks a free port.
pub async fn bind(port: u16) -> Result<TcpListener, ServeError> {
    TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port)))
        .await
        .map_err(|source| ServeError::Bind { port, source })
}

pub async fn serve(
    handle: Arc<AcquisitionHandle>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(handle))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

async fn health(State(s): State<AppState>) -> impl IntoResponse {
    Json(json!({
        "status": "ok",
        "uptime_s": s.started.elapsed().as_secs_f64(),
    }))
}

async fn config(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.handle.session())
}

async fn ws(upgrade: WebSocketUpgrade, State(s): State<AppState>) -> impl IntoResponse {
    upgrade.on_upgrade(move |socket| client(socket, s.handle))
}

fn encode(msg: &ServerMessage) -> Message {
    Message::Text(
        serde_json::to_string(msg)
            .expect("server messages serialize")
            .into(),
    )
}

fn to_message(item: &StreamItem) -> ServerMessage {
    match item {
        StreamItem::Samples(b) => ServerMessage::Samples(SamplesMessage::from(b.as_ref())),
        StreamItem::Event(e) => ServerMessage::Event(e.as_ref().clone()),
        StreamItem::Status(s) => ServerMessage::Status(s.as_ref().clone()),
    }
}

async fn client(socket: WebSocket, handle: Arc<AcquisitionHandle>) {
    let sink = handle.hub().subscribe("ws", CLIENT_CAPACITY);
    let (mut tx, mut rx) = socket.split();
    if tx
        .send(encode(&ServerMessage::Status(handle.status())))
        .await
        .is_err()
    {
        return;
    }
    loop {
        tokio::select! {
            item = sink.queue.pop_async() => match item {
                Some(item) => {
                    if tx.send(encode(&to_message(&item))).await.is_err() {
                        break;
                    }
                }
                None if handle.hub().is_closed() && sink.queue.is_empty() => break,
                None => {}
            },
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match ClientMessage::parse(&text) {
                    Err((reference, detail)) => ServerMessage::Error { reference, detail },
                    Ok((reference, msg)) => match msg.into_control() {
                        Err(detail) => ServerMessage::Error { reference, detail },
                        Ok(control) => match handle.request(control).await {
                            Ok(detail) => ServerMessage::Ack { reference, detail },
                            Err(detail) => ServerMessage::Error { reference, detail },
                        },
                    },
                };
                if tx.send(encode(&reply)).await.is_err() {
                    break;
                }
            }
        }
    }
    let _ = tx.close().await;
}
