use std::net::SocketAddr;
use std::path::PathBuf;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio_util::codec::Framed;
use tower_http::services::ServeDir;

use super::connection::{handle_connection, OUTBOUND_CAPACITY};
use super::Gateway;
use crate::protocol::{decode_exact, Message, ProtocolError, WireCodec};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

/// Serves one already-connected byte stream (TCP socket, in-process duplex
/// pipe) speaking the framed wire protocol.
pub async fn serve_io<T>(gw: Gateway, io: T)
where
    T: AsyncRead + AsyncWrite + Send + 'static,
{
    let (mut sink, inbound) = Framed::new(io, WireCodec).split();
    let (tx, mut rx) = mpsc::channel(OUTBOUND_CAPACITY);
    let writer = tokio::spawn(async move {
        while let Some(m) = rx.recv().await {
            if sink.send(m).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    handle_connection(gw, inbound, tx).await;
    let _ = writer.await;
}

/// Accepts raw TCP clients until the gateway shuts down.
pub async fn serve_tcp(gw: Gateway, listener: TcpListener) -> Result<(), ServeError> {
    let stop = gw.shutdown_token();
    loop {
        let (stream, peer): (tokio::net::TcpStream, _) = tokio::select! {
            _ = stop.cancelled() => return Ok(()),
            r = listener.accept() => r?,
        };
        tracing::debug!(%peer, "tcp client connected");
        let _ = stream.set_nodelay(true);
        tokio::spawn(serve_io(gw.clone(), stream));
    }
}

#[derive(Debug, Error)]
enum WsInboundError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("websocket message holds an incomplete protocol message ({0} bytes)")]
    Incomplete(usize),
    #[error("text websocket messages are not part of the protocol")]
    Text,
    #[error("websocket error: {0}")]
    Transport(String),
}

async fn serve_ws_socket(gw: Gateway, socket: WebSocket) {
    let (mut sink, stream) = socket.split();
    let inbound = stream
        .take_while(|m| futures::future::ready(!matches!(m, Ok(WsMessage::Close(_)))))
        .filter_map(|m| {
            futures::future::ready(match m {
                Ok(WsMessage::Binary(b)) => Some(match decode_exact(&b) {
                    Ok(Some(msg)) => Ok(msg),
                    Ok(None) => Err(WsInboundError::Incomplete(b.len())),
                    Err(e) => Err(e.into()),
                }),
                Ok(WsMessage::Text(_)) => Some(Err(WsInboundError::Text)),
                Ok(_) => None,
                Err(e) => Some(Err(WsInboundError::Transport(e.to_string()))),
            })
        });
    let (tx, mut rx) = mpsc::channel::<Message>(OUTBOUND_CAPACITY);
    let writer = tokio::spawn(async move {
        while let Some(m) = rx.recv().await {
            let Ok(bytes) = m.encode() else { continue };
            if sink.send(WsMessage::Binary(bytes.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    handle_connection(gw, Box::pin(inbound), tx).await;
    let _ = writer.await;
}

async fn ws_upgrade(State(gw): State<Gateway>, ws: WebSocketUpgrade) -> impl IntoResponse {
    ws.on_upgrade(move |socket| serve_ws_socket(gw, socket))
}

const PLACEHOLDER_APP: &str = "<!doctype html><title>wayfinder</title>\
<p>No client assets are installed. Set <code>listen.app_dir</code> to serve the web client here.</p>";

async fn placeholder_app() -> Html<&'static str> {
    Html(PLACEHOLDER_APP)
}

/// `/ws` speaks the wire protocol, one protocol message per binary
/// WebSocket message; `/app` serves the static web client.
pub fn router(gw: Gateway, app_dir: Option<PathBuf>) -> Router {
    let app = match app_dir {
        Some(dir) => Router::new().fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => Router::new().fallback(placeholder_app),
    };
    Router::new()
        .route("/ws", get(ws_upgrade))
        .nest_service("/app", app)
        .with_state(gw)
}

pub async fn serve_ws(gw: Gateway, listener: TcpListener, app_dir: Option<PathBuf>) -> Result<(), ServeError> {
    let stop = gw.shutdown_token();
    axum::serve(listener, router(gw, app_dir))
        .with_graceful_shutdown(async move { stop.cancelled().await })
        .await?;
    Ok(())
}
