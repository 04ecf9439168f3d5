//! Fetch backends. ScenarioBackend resolves routes in process and is the
//! default for tests; HttpBackend is a real client with redirects turned
//! off so the chain walker sees every hop; FixtureHttpServer serves a
//! scenario over TCP (proxy absolute-form requests included) so the client
//! path gets exercised end to end without leaving the host.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResponse {
    pub status: u16,
    pub headers: BTreeMap<String, String>,
    pub body: String,
    pub final_url: String,
}

impl FetchResponse {
    /// Case-insensitive header lookup.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// GET-only fetch contract. The vantage label rides along so scenario
/// routes and fixture servers can vary responses per vantage.
pub trait FetchBackend {
    fn vantage(&self) -> &str;
    fn get(&self, url: &str) -> Result<FetchResponse>;
}

fn default_status() -> u16 {
    200
}

/// One response shape: status, headers, body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteVariant {
    #[serde(default = "default_status")]
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl Default for RouteVariant {
    fn default() -> RouteVariant {
        RouteVariant {
            status: 200,
            headers: BTreeMap::new(),
            body: String::new(),
        }
    }
}

/// A route: the default response plus whole-variant overrides per vantage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteSpec {
    #[serde(flatten)]
    pub default: RouteVariant,
    #[serde(default)]
    pub vantages: BTreeMap<String, RouteVariant>,
}

impl RouteSpec {
    pub fn plain(status: u16, body: impl Into<String>) -> RouteSpec {
        RouteSpec {
            default: RouteVariant {
                status,
                headers: BTreeMap::new(),
                body: body.into(),
            },
            vantages: BTreeMap::new(),
        }
    }

    pub fn redirect(status: u16, location: impl Into<String>) -> RouteSpec {
        let mut headers = BTreeMap::new();
        headers.insert("Location".to_string(), location.into());
        RouteSpec {
            default: RouteVariant {
                status,
                headers,
                body: String::new(),
            },
            vantages: BTreeMap::new(),
        }
    }

    fn resolve(&self, vantage: &str) -> &RouteVariant {
        self.vantages.get(vantage).unwrap_or(&self.default)
    }
}

/// Scenario file: exact URL to route. The JSON shape is
/// {"routes": {"http://a.test/x": {"status": ..., "headers": ...,
/// "body": ..., "vantages": {"cn": {...}}}}}.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub routes: BTreeMap<String, RouteSpec>,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }

    pub fn insert(&mut self, url: impl Into<String>, route: RouteSpec) {
        self.routes.insert(url.into(), route);
    }
}

/// In-process backend resolving a scenario directly.
pub struct ScenarioBackend {
    scenario: Scenario,
    vantage: String,
}

impl ScenarioBackend {
    pub fn new(scenario: Scenario, vantage: impl Into<String>) -> ScenarioBackend {
        ScenarioBackend {
            scenario,
            vantage: vantage.into(),
        }
    }
}

impl FetchBackend for ScenarioBackend {
    fn vantage(&self) -> &str {
        &self.vantage
    }

    fn get(&self, url: &str) -> Result<FetchResponse> {
        let route = self.scenario.routes.get(url).ok_or_else(|| Error::Fetch {
            url: url.to_string(),
            reason: "no scenario route".into(),
        })?;
        let variant = route.resolve(&self.vantage);
        Ok(FetchResponse {
            status: variant.status,
            headers: variant.headers.clone(),
            body: variant.body.clone(),
            final_url: url.to_string(),
        })
    }
}

/// Real HTTP client. Redirects are never followed internally: every hop
/// must surface so the chain walker can record it. The vantage label is
/// sent as an X-Vantage request header.
pub struct HttpBackend {
    agent: ureq::Agent,
    vantage: String,
}

impl HttpBackend {
    pub fn new(vantage: impl Into<String>) -> HttpBackend {
        HttpBackend {
            agent: ureq::AgentBuilder::new()
                .redirects(0)
                .timeout(Duration::from_secs(10))
                .build(),
            vantage: vantage.into(),
        }
    }

    /// Routes all requests through an HTTP proxy (the fixture server).
    pub fn with_proxy(vantage: impl Into<String>, proxy_url: &str) -> Result<HttpBackend> {
        let proxy = ureq::Proxy::new(proxy_url).map_err(|e| Error::Fetch {
            url: proxy_url.to_string(),
            reason: format!("bad proxy: {e}"),
        })?;
        Ok(HttpBackend {
            agent: ureq::AgentBuilder::new()
                .redirects(0)
                .timeout(Duration::from_secs(10))
                .proxy(proxy)
                .build(),
            vantage: vantage.into(),
        })
    }

    fn convert(url: &str, resp: ureq::Response) -> Result<FetchResponse> {
        let status = resp.status();
        let final_url = resp.get_url().to_string();
        let mut headers = BTreeMap::new();
        for name in resp.headers_names() {
            if let Some(v) = resp.header(&name) {
                headers.insert(name.clone(), v.to_string());
            }
        }
        let body = resp.into_string().map_err(|e| Error::Fetch {
            url: url.to_string(),
            reason: format!("body read: {e}"),
        })?;
        Ok(FetchResponse {
            status,
            headers,
            body,
            final_url,
        })
    }
}

impl FetchBackend for HttpBackend {
    fn vantage(&self) -> &str {
        &self.vantage
    }

    fn get(&self, url: &str) -> Result<FetchResponse> {
        let req = self.agent.get(url).set("X-Vantage", &self.vantage);
        match req.call() {
            Ok(resp) => HttpBackend::convert(url, resp),
            Err(ureq::Error::Status(_, resp)) => HttpBackend::convert(url, resp),
            Err(e) => Err(Error::Fetch {
                url: url.to_string(),
                reason: e.to_string(),
            }),
        }
    }
}

fn reason_phrase(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        303 => "See Other",
        307 => "Temporary Redirect",
        308 => "Permanent Redirect",
        401 => "Unauthorized",
        403 => "Forbidden",
        404 => "Not Found",
        429 => "Too Many Requests",
        451 => "Unavailable For Legal Reasons",
        _ => "Response",
    }
}

fn handle_connection(stream: &mut TcpStream, scenario: &Scenario) {
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    });
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut host = String::new();
    let mut vantage = String::new();
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    let value = value.trim();
                    if name.eq_ignore_ascii_case("host") {
                        host = value.to_string();
                    } else if name.eq_ignore_ascii_case("x-vantage") {
                        vantage = value.to_string();
                    }
                }
            }
            Err(_) => return,
        }
    }

    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("");
    let target = parts.next().unwrap_or("");
    // Absolute-form target (proxy request) or origin-form plus Host.
    let url = if target.starts_with("http://") || target.starts_with("https://") {
        target.to_string()
    } else {
        format!("http://{host}{target}")
    };

    let (status, headers, body) = match scenario.routes.get(&url) {
        Some(route) if method == "GET" => {
            let v = route.resolve(&vantage);
            (v.status, v.headers.clone(), v.body.clone())
        }
        _ => (404, BTreeMap::new(), String::from("no such route")),
    };

    let mut response = format!("HTTP/1.1 {} {}\r\n", status, reason_phrase(status));
    for (name, value) in &headers {
        response.push_str(&format!("{name}: {value}\r\n"));
    }
    response.push_str(&format!(
        "Content-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    ));
    response.push_str(&body);
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

/// Local HTTP server for a scenario. Serves both proxy-style absolute-form
/// requests and plain requests with a Host header; one thread, polling
/// accept loop, shut down on drop.
pub struct FixtureHttpServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureHttpServer {
    pub fn start(scenario: Scenario) -> Result<FixtureHttpServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let stop = shutdown.clone();
        let handle = std::thread::spawn(move || loop {
            if stop.load(Ordering::Relaxed) {
                break;
            }
            match listener.accept() {
                Ok((mut stream, _)) => {
                    let _ = stream.set_nodelay(true);
                    handle_connection(&mut stream, &scenario);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(2));
                }
                Err(_) => break,
            }
        });
        Ok(FixtureHttpServer {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Proxy URL for HttpBackend::with_proxy.
    pub fn proxy_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for FixtureHttpServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_scenario() -> Scenario {
        let mut s = Scenario::default();
        s.insert("http://a.test/entry", RouteSpec::redirect(302, "http://b.test/next"));
        s.insert("http://b.test/next", RouteSpec::plain(200, "<html>landing</html>"));
        let mut gated = RouteSpec::plain(200, "open content");
        gated.vantages.insert(
            "cn".into(),
            RouteVariant {
                status: 403,
                headers: BTreeMap::new(),
                body: "access denied".into(),
            },
        );
        s.insert("http://v.test/gate", gated);
        s
    }

    #[test]
    fn scenario_backend_resolves_routes_and_vantages() {
        let backend = ScenarioBackend::new(demo_scenario(), "us");
        let resp = backend.get("http://a.test/entry").unwrap();
        assert_eq!(resp.status, 302);
        assert_eq!(resp.header("location"), Some("http://b.test/next"));

        assert_eq!(backend.get("http://v.test/gate").unwrap().status, 200);
        let cn = ScenarioBackend::new(demo_scenario(), "cn");
        let gated = cn.get("http://v.test/gate").unwrap();
        assert_eq!(gated.status, 403);
        assert_eq!(gated.body, "access denied");

        assert!(matches!(
            backend.get("http://missing.test/"),
            Err(Error::Fetch { .. })
        ));
    }

    #[test]
    fn scenario_roundtrips_through_json() {
        let s = demo_scenario();
        let json = serde_json::to_string(&s).unwrap();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn fixture_server_serves_scenario_over_proxy() {
        let server = FixtureHttpServer::start(demo_scenario()).unwrap();
        let backend = HttpBackend::with_proxy("us", &server.proxy_url()).unwrap();

        let resp = backend.get("http://a.test/entry").unwrap();
        assert_eq!(resp.status, 302);
        assert_eq!(resp.header("Location"), Some("http://b.test/next"));

        let landing = backend.get("http://b.test/next").unwrap();
        assert_eq!(landing.status, 200);
        assert_eq!(landing.body, "<html>landing</html>");

        let missing = backend.get("http://missing.test/x").unwrap();
        assert_eq!(missing.status, 404);
    }

    #[test]
    fn fixture_server_varies_by_vantage_header() {
        let server = FixtureHttpServer::start(demo_scenario()).unwrap();
        let us = HttpBackend::with_proxy("us", &server.proxy_url()).unwrap();
        let cn = HttpBackend::with_proxy("cn", &server.proxy_url()).unwrap();
        assert_eq!(us.get("http://v.test/gate").unwrap().status, 200);
        let blocked = cn.get("http://v.test/gate").unwrap();
        assert_eq!(blocked.status, 403);
        assert_eq!(blocked.body, "access denied");
    }
}
