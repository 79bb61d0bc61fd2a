#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use pieeg_core::simulator::Scenario;
use pieeg_daemon::server;
use pieeg_daemon::{
    run_acquisition, AcquisitionConfig, AcquisitionHandle, Hub, Paced, Session, SimTransport,
};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub struct Live {
    pub handle: Arc<AcquisitionHandle>,
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    server: Option<tokio::task::JoinHandle<()>>,
}

impl Live {
    /// Paced simulator at 250 SPS behind a server on a free local port.
    pub async fn start(scenario: Scenario) -> Live {
        let t = Paced::new(SimTransport::new(scenario, 4.5).unwrap());
        let handle = Arc::new(
            run_acquisition(
                t,
                Session::default(),
                Hub::new(),
                AcquisitionConfig::default(),
            )
            .unwrap(),
        );
        let listener = server::bind(0).await.unwrap();
        let port = listener.local_addr().unwrap().port();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let h = handle.clone();
        let server = tokio::spawn(async move {
            server::serve(h, listener, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        Live {
            handle,
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            shutdown: Some(tx),
            server: Some(server),
        }
    }

    pub async fn connect(&self) -> Ws {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", self.addr))
            .await
            .unwrap();
        ws
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let mut s = TcpStream::connect(self.addr).await.unwrap();
        let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
        s.write_all(req.as_bytes()).await.unwrap();
        let mut buf = Vec::new();
        s.read_to_end(&mut buf).await.unwrap();
        let text = String::from_utf8(buf).unwrap();
        let status: u16 = text[9..12].parse().unwrap();
        let body = text.split("\r\n\r\n").nth(1).unwrap_or("");
        (status, serde_json::from_str(body).unwrap_or(Value::Null))
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.handle.stop();
        if let Some(s) = self.server.take() {
            let _ = tokio::time::timeout(Duration::from_secs(5), s).await;
        }
    }
}

pub async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

pub async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("message within 5 s")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Reads until a message of `kind` arrives; returns it and everything skipped.
pub async fn recv_type(ws: &mut Ws, kind: &str) -> (Value, Vec<Value>) {
    let mut skipped = Vec::new();
    loop {
        let v = recv(ws).await;
        if v["type"] == kind {
            return (v, skipped);
        }
        skipped.push(v);
    }
}
