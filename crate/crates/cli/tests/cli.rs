use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn hmk(args: &[&str], config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hmk")).args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn gradcheck_succeeds_and_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n": 8, "points": 1}"#);
    let out = dir.path().join("out");
    let o = hmk(&["gradcheck", "--seed", "3"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gradcheck finished"));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad = write(dir.path(), "bad.json", r#"{"n": 8, "typo": true}"#);
    assert_eq!(hmk(&["gradcheck"], &bad, &out).status.code(), Some(2));
    let unparsable = write(dir.path(), "broken.json", "{");
    assert_eq!(hmk(&["dump-spectral"], &unparsable, &out).status.code(), Some(2));
    let missing = write(dir.path(), "reg.json", r#"{"dataset": {"path": "absent.csv", "inputs": ["x"], "target": "y"}}"#);
    let o = hmk(&["regress"], &missing, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("hmk regress:"));
    assert_eq!(hmk(&["gradcheck"], &dir.path().join("nonexistent.json"), &out).status.code(), Some(2));
}
