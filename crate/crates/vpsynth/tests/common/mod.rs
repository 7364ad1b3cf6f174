//! Helpers shared by the integration test binaries.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use vpsynth::scene::{BBox, Scene, SceneObject};

/// The deterministic five-object scene used by hand-derived fixtures:
/// a red dog, a blue cat, two green trucks (areas 400 and 750), and a
/// yellow glass mug.
pub fn fixture_scene() -> Scene {
    let obj = |id: &str, category: &str, color: &str, material: &str, state: &str, bbox: BBox| {
        let mut attributes = BTreeMap::new();
        attributes.insert("color".to_string(), color.to_string());
        attributes.insert("material".to_string(), material.to_string());
        attributes.insert("state".to_string(), state.to_string());
        SceneObject { id: id.into(), category: category.into(), attributes, bbox }
    };
    Scene {
        format_version: "1".into(),
        seed: 0xacce,
        canvas_width: 100,
        canvas_height: 100,
        objects: vec![
            obj("obj0", "dog", "red", "wood", "new", BBox::new(5, 40, 25, 60)),
            obj("obj1", "cat", "blue", "plastic", "old", BBox::new(70, 40, 95, 65)),
            obj("obj2", "truck", "green", "metal", "clean", BBox::new(35, 5, 55, 25)),
            obj("obj3", "truck", "green", "metal", "dirty", BBox::new(60, 70, 90, 95)),
            obj("obj4", "mug", "yellow", "glass", "new", BBox::new(5, 5, 20, 20)),
        ],
    }
}

/// Minimal HTTP completion endpoint for tests: answers every POST with the
/// next canned completion, cycling. Returns the base URL and a request
/// counter.
pub fn spawn_mock_endpoint(completions: Vec<String>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
    let addr = listener.local_addr().unwrap();
    let counter = Arc::new(AtomicUsize::new(0));
    let seen = counter.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            // Read headers.
            let header_end = loop {
                match stream.read(&mut chunk) {
                    Ok(0) => break None,
                    Ok(n) => {
                        buf.extend_from_slice(&chunk[..n]);
                        if let Some(pos) = find_header_end(&buf) {
                            break Some(pos);
                        }
                    }
                    Err(_) => break None,
                }
            };
            let Some(header_end) = header_end else { continue };
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
            let content_length: usize = headers
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse().ok())?
                })
                .unwrap_or(0);
            // Drain the body.
            while buf.len() < header_end + 4 + content_length {
                match stream.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => buf.extend_from_slice(&chunk[..n]),
                    Err(_) => break,
                }
            }
            let i = seen.fetch_add(1, Ordering::SeqCst);
            let text = &completions[i % completions.len()];
            let body = serde_json::json!({ "choices": [{ "text": text }] }).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
        }
    });
    (format!("http://{addr}"), counter)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}
