use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use scigen_core::embedding::Embedder;
use scigen_core::gateway::{
    extract_code, simplify_prompt, ChatRequest, GatewayError, HttpGateway, HttpGatewayOptions, MockModel, MockRule,
    MockScript, MockServer, ModelGateway, DEFAULT_SIMPLIFY_TEMPLATE,
};

fn gateway(url: &str) -> HttpGateway {
    HttpGateway::new(HttpGatewayOptions {
        base_url: url.to_string(),
        request_timeout: Duration::from_secs(10),
        initial_backoff: Duration::from_millis(5),
        ..HttpGatewayOptions::default()
    })
    .unwrap()
}

fn start(script: MockScript) -> MockServer {
    MockServer::start(MockModel::new(script), "127.0.0.1:0").unwrap()
}

#[test]
fn echo_over_http() {
    let server = start(MockScript::echo());
    let gw = gateway(&server.url());
    let req = ChatRequest::single_turn("any-model", Some("You write Python."), "plot /temperature/data");
    assert_eq!(gw.chat(&req).unwrap(), "plot /temperature/data");
    assert_eq!(server.model().chat_calls(), 1);
}

#[test]
fn scripted_reply_and_code_extraction() {
    let server = start(MockScript {
        rules: vec![MockRule::Contains {
            contains: "temperature".into(),
            reply: "Sure!\n```python\nimport h5py\nprint('ok')\n```\nDone.".into(),
        }],
        ..MockScript::default()
    });
    let reply = gateway(&server.url()).chat(&ChatRequest::single_turn("m", None, "plot temperature")).unwrap();
    let script = extract_code(&reply).unwrap();
    assert_eq!(script.source, "import h5py\nprint('ok')");
    assert_eq!(script.language_tag, "python");
}

#[test]
fn unknown_model() {
    let server = start(MockScript { models: vec!["llama3".into()], ..MockScript::default() });
    let gw = gateway(&server.url());
    let err = gw.chat(&ChatRequest::single_turn("mistral", None, "hi")).unwrap_err();
    assert!(matches!(err, GatewayError::ModelNotFound(ref m) if m == "mistral"), "{err:?}");
    assert!(gw.chat(&ChatRequest::single_turn("llama3", None, "hi")).is_ok());
}

#[test]
fn embeddings_over_http() {
    let server = start(MockScript::echo());
    let gw = gateway(&server.url());
    let v = gw.embed("temperature map").unwrap();
    assert_eq!(v.dim(), 384);
    assert_eq!(v, gw.embed("temperature map").unwrap());
    assert!(matches!(gw.embed(""), Err(GatewayError::EmptyText)));
    assert_eq!(gw.descriptor(), "server:all-minilm");
}

#[test]
fn connection_refused() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gw = HttpGateway::new(HttpGatewayOptions {
        base_url: format!("http://127.0.0.1:{port}"),
        max_retries: 1,
        initial_backoff: Duration::from_millis(1),
        ..HttpGatewayOptions::default()
    })
    .unwrap();
    let err = gw.chat(&ChatRequest::single_turn("m", None, "hi")).unwrap_err();
    assert!(matches!(err, GatewayError::ConnectionRefused(_)), "{err:?}");
}

/// Reads one HTTP request from `stream`, returning its body.
fn read_request(stream: &mut TcpStream) -> String {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let msg = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(msg.as_bytes()).unwrap();
}

const OK_CHAT: &str = r#"{"message":{"role":"assistant","content":"recovered"},"done":true}"#;

/// Serves `script` in order, one entry per connection: `None` drops the
/// connection without answering.
fn faulty_server(script: Vec<Option<(&'static str, &'static str)>>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&seen);
    std::thread::spawn(move || {
        for step in script {
            let (mut stream, _) = listener.accept().unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let body = read_request(&mut stream);
            assert!(body.contains("\"stream\":false"));
            match step {
                None => drop(stream),
                Some((status, reply)) => respond(&mut stream, status, reply),
            }
        }
    });
    (url, seen)
}

#[test]
fn dropped_connection_is_retried() {
    let (url, seen) = faulty_server(vec![None, Some(("200 OK", OK_CHAT))]);
    let reply = gateway(&url).chat(&ChatRequest::single_turn("m", None, "hi")).unwrap();
    assert_eq!(reply, "recovered");
    assert_eq!(seen.load(Ordering::SeqCst), 2);
}

#[test]
fn bad_gateway_is_retried_server_error_is_not() {
    let (url, seen) = faulty_server(vec![Some(("503 Service Unavailable", "{\"error\":\"loading\"}")), Some(("200 OK", OK_CHAT))]);
    assert_eq!(gateway(&url).chat(&ChatRequest::single_turn("m", None, "hi")).unwrap(), "recovered");
    assert_eq!(seen.load(Ordering::SeqCst), 2);

    let (url, seen) = faulty_server(vec![Some(("500 Internal Server Error", "{\"error\":\"boom\"}"))]);
    let err = gateway(&url).chat(&ChatRequest::single_turn("m", None, "hi")).unwrap_err();
    assert!(matches!(err, GatewayError::Http { status: 500, ref body } if body == "boom"), "{err:?}");
    assert_eq!(seen.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_reply_is_a_protocol_error() {
    let (url, _) = faulty_server(vec![Some(("200 OK", "{\"unexpected\":1}"))]);
    let err = gateway(&url).chat(&ChatRequest::single_turn("m", None, "hi")).unwrap_err();
    assert!(matches!(err, GatewayError::Protocol(_)), "{err:?}");
}

#[test]
fn in_flight_requests_are_bounded() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let active = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    {
        let (active, peak) = (Arc::clone(&active), Arc::clone(&peak));
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let mut stream = stream.unwrap();
                let (active, peak) = (Arc::clone(&active), Arc::clone(&peak));
                std::thread::spawn(move || {
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    read_request(&mut stream);
                    std::thread::sleep(Duration::from_millis(60));
                    active.fetch_sub(1, Ordering::SeqCst);
                    respond(&mut stream, "200 OK", OK_CHAT);
                });
            }
        });
    }
    let gw = Arc::new(gateway(&url));
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let gw = Arc::clone(&gw);
            std::thread::spawn(move || gw.chat(&ChatRequest::single_turn("m", None, "hi")).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), "recovered");
    }
    let peak = peak.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak concurrency {peak}");
}

#[test]
fn simplify_uses_the_template() {
    let server = start(MockScript::echo());
    let gw = gateway(&server.url());
    let detailed = "Read /temperature/data from the HDF5 file and plot it as a line chart with time on the x axis.";
    let out = simplify_prompt(&gw, "m", DEFAULT_SIMPLIFY_TEMPLATE, detailed).unwrap();
    assert!(out.contains(detailed));
    assert!(matches!(simplify_prompt(&gw, "m", DEFAULT_SIMPLIFY_TEMPLATE, "  "), Err(GatewayError::EmptyPrompt)));
}
