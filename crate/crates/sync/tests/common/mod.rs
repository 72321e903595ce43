#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use rta_assist::{Provider, StubProvider};
use rta_sync::{Config, Service};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub struct Server {
    pub addr: SocketAddr,
    pub service: Arc<Service>,
    pub data_dir: PathBuf,
    task: JoinHandle<()>,
}

impl Server {
    pub async fn start(data_dir: &Path) -> Server {
        Server::start_with(data_dir, |_| {}, Arc::new(StubProvider)).await
    }

    pub async fn start_with(data_dir: &Path, tweak: impl FnOnce(&mut Config), provider: Arc<dyn Provider>) -> Server {
        let mut config = Config { data_dir: data_dir.to_owned(), port: 0, ..Config::default() };
        tweak(&mut config);
        let service = Service::with_provider(config, provider).expect("service opens");
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let task = tokio::spawn({
            let service = service.clone();
            async move {
                rta_sync::api::serve(service, listener).await.unwrap();
            }
        });
        Server { addr, service, data_dir: data_dir.to_owned(), task }
    }

    /// Stops serving and drops this process's handles on the project logs.
    pub async fn stop(self) {
        self.task.abort();
        let _ = self.task.await;
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub async fn session(&self) -> Client {
        let http = reqwest::Client::new();
        let v: Value = http.post(self.url("/sessions")).send().await.unwrap().json().await.unwrap();
        Client {
            base: format!("http://{}", self.addr),
            ws_base: format!("ws://{}", self.addr),
            token: v["token"].as_str().unwrap().to_owned(),
            coder: v["coder_id"].as_str().unwrap().to_owned(),
            http,
        }
    }
}

#[derive(Clone)]
pub struct Client {
    pub base: String,
    pub ws_base: String,
    pub token: String,
    pub coder: String,
    pub http: reqwest::Client,
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Client {
    /// Same server, no credentials.
    pub fn anonymous(&self) -> Client {
        Client { token: String::new(), ..self.clone() }
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        let r = self.http.post(format!("{}{path}", self.base)).bearer_auth(&self.token).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        Reply { status, body: r.json().await.unwrap_or(Value::Null) }
    }

    pub async fn get(&self, path: &str) -> Reply {
        let r = self.http.get(format!("{}{path}", self.base)).bearer_auth(&self.token).send().await.unwrap();
        let status = r.status().as_u16();
        Reply { status, body: r.json().await.unwrap_or(Value::Null) }
    }

    pub async fn get_bytes(&self, path: &str) -> (u16, Vec<u8>) {
        let r = self.http.get(format!("{}{path}", self.base)).bearer_auth(&self.token).send().await.unwrap();
        (r.status().as_u16(), r.bytes().await.unwrap().to_vec())
    }

    pub async fn create_project(&self, name: &str, blind: bool) -> String {
        let r = self.post("/projects", json!({"name": name, "blind_mode": blind})).await;
        assert_eq!(r.status, 201, "{}", r.body);
        r.body["project_id"].as_str().unwrap().to_owned()
    }

    pub async fn submit(&self, project: &str, body: Value) -> Reply {
        self.post(&format!("/projects/{project}/events"), body).await
    }

    pub async fn view(&self, project: &str, view: &str, query: &str) -> Reply {
        self.get(&format!("/projects/{project}/views/{view}{query}")).await
    }

    pub async fn connect(&self, project: &str, since: u64) -> Stream {
        let url = format!("{}/projects/{project}/stream?since={since}&token={}", self.ws_base, self.token);
        let (ws, _) = tokio_tungstenite::connect_async(url).await.expect("websocket connects");
        Stream { ws, raw: Vec::new() }
    }
}

/// A live subscription that also keeps every text frame exactly as received.
pub struct Stream {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    pub raw: Vec<String>,
}

impl Stream {
    /// Next JSON frame, or `None` on close or after `wait` without one.
    pub async fn next(&mut self, wait: Duration) -> Option<Value> {
        loop {
            match tokio::time::timeout(wait, self.ws.next()).await {
                Ok(Some(Ok(Message::Text(text)))) => {
                    self.raw.push(text.to_string());
                    return Some(serde_json::from_str(&text).expect("frames are JSON"));
                }
                Ok(Some(Ok(_))) => continue,
                _ => return None,
            }
        }
    }

    /// Frames up to and including the `ready` frame.
    pub async fn until_ready(&mut self) -> Vec<Value> {
        let mut out = Vec::new();
        while let Some(f) = self.next(Duration::from_secs(5)).await {
            let ready = f["type"] == "ready";
            out.push(f);
            if ready {
                return out;
            }
        }
        panic!("stream ended before ready: {out:?}");
    }

    /// Event frames until one with `seq >= target` arrives.
    pub async fn events_until(&mut self, target: u64) -> Vec<Value> {
        let mut out = Vec::new();
        while let Some(f) = self.next(Duration::from_secs(5)).await {
            if f["type"] == "event" {
                let seq = f["seq"].as_u64().unwrap();
                out.push(f);
                if seq >= target {
                    return out;
                }
            }
        }
        panic!("stream stalled before seq {target}");
    }

    pub async fn close(mut self) {
        let _ = self.ws.send(Message::Close(None)).await;
    }
}
