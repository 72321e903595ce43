use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use rta_core::provenance::import_audit;
use rta_core::ProjectState;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_reflexisd");

/// The binary with a clean REFLEXIS_* environment.
fn cmd() -> Command {
    let mut c = Command::new(BIN);
    for (k, _) in std::env::vars() {
        if k.starts_with("REFLEXIS_") {
            c.env_remove(k);
        }
    }
    c.env("RUST_LOG", "warn");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Starts `serve` on an ephemeral port and returns the child and its address.
fn serve(data_dir: &Path) -> (Child, String) {
    let mut child = cmd()
        .args(["serve", "--port", "0", "--data-dir"])
        .arg(data_dir)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_owned();
    (child, addr)
}

fn print_config(env: &[(&str, &std::ffi::OsStr)], args: &[&str]) -> toml::Value {
    let mut c = cmd();
    c.arg("print-config").args(args).envs(env.iter().copied());
    let out = run(&mut c);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    toml::from_str(&stdout(&out)).unwrap()
}

#[test]
fn flags_beat_environment_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "port = 7000\nhost = \"0.0.0.0\"\n[provider]\napi_key_env = \"FILE_KEY\"\n").unwrap();

    let conf = ("REFLEXIS_CONFIG", file.as_os_str());
    let port = ("REFLEXIS_PORT", std::ffi::OsStr::new("7100"));
    let c = print_config(&[conf], &[]);
    assert_eq!((c["port"].as_integer(), c["host"].as_str()), (Some(7000), Some("0.0.0.0")));
    let c = print_config(&[conf, port], &[]);
    assert_eq!(c["port"].as_integer(), Some(7100));
    let c = print_config(&[conf, port], &["--port", "7200"]);
    assert_eq!(c["port"].as_integer(), Some(7200));
    assert_eq!(c["host"].as_str(), Some("0.0.0.0"));

    // only the variable name is ever held, never its value
    let c = cmd().env("REFLEXIS_CONFIG", &file).env("FILE_KEY", "sk-secret-value").arg("print-config").output().unwrap();
    let text = stdout(&c);
    assert!(text.contains("FILE_KEY") && !text.contains("sk-secret-value"), "{text}");

    let bad = run(cmd().args(["print-config", "--config"]).arg(dir.path().join("missing.toml")));
    assert!(!bad.status.success());
    std::fs::write(&file, "colour = \"blue\"\n").unwrap();
    assert!(!run(cmd().args(["print-config", "--config"]).arg(&file)).status.success());
}

#[test]
fn unwritable_data_dir_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("not-a-dir");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(cmd().args(["serve", "--port", "0", "--data-dir"]).arg(blocker.join("data")));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("data directory"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[tokio::test]
async fn kill_nine_keeps_every_acknowledged_event() {
    let dir = tempfile::tempdir().unwrap();
    let (mut child, addr) = serve(dir.path());
    let http = reqwest::Client::new();
    let session: Value = http.post(format!("http://{addr}/sessions")).send().await.unwrap().json().await.unwrap();
    let token = session["token"].as_str().unwrap().to_owned();
    let created: Value = http
        .post(format!("http://{addr}/projects"))
        .bearer_auth(&token)
        .json(&json!({"name": "Crash test"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let project = created["project_id"].as_str().unwrap().to_owned();
    let mut acked = vec![1];
    for i in 0..40 {
        let body = json!({"kind": "CodeCreated", "payload": {"code": {"code_id": format!("c{i}"), "name": format!("Code {i}")}}});
        let r: Value = http
            .post(format!("http://{addr}/projects/{project}/events"))
            .bearer_auth(&token)
            .json(&body)
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        acked.push(r["events"][0]["seq"].as_u64().unwrap());
    }
    child.kill().unwrap();
    child.wait().unwrap();

    let check = run(cmd().args(["check", "--data-dir"]).arg(dir.path()));
    assert!(check.status.success(), "{}", stdout(&check));
    assert!(stdout(&check).contains(&format!("ok      {project} 41 events")), "{}", stdout(&check));

    let (mut child, addr) = serve(dir.path());
    let r: Value = http
        .get(format!("http://{addr}/projects/{project}/events"))
        .bearer_auth(&token)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let seqs: Vec<u64> = r["events"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, acked);
    child.kill().unwrap();
    child.wait().unwrap();

    // export, import elsewhere, verify
    let trail = dir.path().join("trail.json");
    let out = run(cmd().args(["export", "--project", &project, "--data-dir"]).arg(dir.path()).arg("--out").arg(&trail));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&trail).unwrap();
    let events = import_audit(&bytes).unwrap();
    assert_eq!(events.len(), 41);

    let other = tempfile::tempdir().unwrap();
    let out = run(cmd().args(["import", "--data-dir"]).arg(other.path()).arg("--in").arg(&trail));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).trim(), project);
    let again = run(cmd().args(["import", "--data-dir"]).arg(other.path()).arg("--in").arg(&trail));
    assert!(!again.status.success(), "importing twice must not overwrite");
    let out = run(cmd().args(["export", "--project", &project, "--data-dir"]).arg(other.path()));
    let reimported = import_audit(&out.stdout).unwrap();
    assert_eq!(ProjectState::replay(&reimported).unwrap(), ProjectState::replay(&events).unwrap());

    let mut damaged = bytes.clone();
    let at = damaged.len() / 3;
    damaged[at] = if damaged[at] == b'a' { b'b' } else { b'a' };
    std::fs::write(&trail, &damaged).unwrap();
    let third = tempfile::tempdir().unwrap();
    assert!(!run(cmd().args(["import", "--data-dir"]).arg(third.path()).arg("--in").arg(&trail)).status.success());
}

#[test]
fn check_reports_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let trail = rta_core::provenance::export_audit(
        &rta_core::scenario::events(),
        &ProjectState::replay(&rta_core::scenario::events()).unwrap(),
    )
    .unwrap();
    let file = dir.path().join("trail.json");
    std::fs::write(&file, trail).unwrap();
    assert!(run(cmd().args(["import", "--data-dir"]).arg(dir.path()).arg("--in").arg(&file)).status.success());
    assert!(run(cmd().args(["check", "--data-dir"]).arg(dir.path())).status.success());

    let log = dir.path().join("projects/p-civic/events.log");
    let mut bytes = std::fs::read(&log).unwrap();
    let second_line = bytes.iter().position(|&b| b == b'\n').unwrap() + 20;
    bytes[second_line] ^= 0x20;
    std::fs::write(&log, &bytes).unwrap();
    let out = run(cmd().args(["check", "--data-dir"]).arg(dir.path()));
    assert!(!out.status.success());
    assert!(stdout(&out).contains("FAILED"), "{}", stdout(&out));
    assert_eq!(std::fs::read(&log).unwrap(), bytes, "check never modifies the log");
}
