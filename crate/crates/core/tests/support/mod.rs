#![allow(dead_code)]

pub mod checks;
pub mod gen;
pub mod oracles;

use std::path::PathBuf;
use std::sync::Arc;

use wayfinder_core::config::GatewayConfig;
use wayfinder_core::eval::Recording;
use wayfinder_core::perception::{PerceptionBackend, StubBackend};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/synthetic-walk")
}

pub fn corpus() -> Recording {
    Recording::load(corpus_dir()).expect("bundled corpus loads")
}

pub fn corpus_stub() -> Arc<dyn PerceptionBackend> {
    Arc::new(StubBackend::load(corpus_dir().join("stub_script.json")).expect("stub script loads"))
}

/// A JPEG-looking payload: SOI marker plus filler. Too short to carry real
/// dimensions, so the gateway falls back to the configured camera size.
pub fn fake_jpeg(tag: u8) -> Vec<u8> {
    vec![0xFF, 0xD8, 0xFF, 0xE0, tag, 0, 0, 0]
}

pub fn real_jpeg(width: u32, height: u32) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(width, height, image::Rgb([100, 100, 100]));
    let mut buf = Vec::new();
    image::codecs::jpeg::JpegEncoder::new(&mut buf)
        .encode_image(&img)
        .unwrap();
    buf
}

pub fn config() -> GatewayConfig {
    GatewayConfig::default()
}

/// Serves `router` on an ephemeral local port and returns its base URL.
pub async fn serve_mock(router: axum::Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    format!("http://{addr}")
}
