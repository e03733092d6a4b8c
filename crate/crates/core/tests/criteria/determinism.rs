//! Two identical training runs through the command line produce identical
//! checkpoints and logs.

use std::path::Path;
use std::process::Command;

use super::Outcome;
use crate::common;
use spanqa::encoder::checkpoint;

fn spanqa(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spanqa"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn train_run(
    dir: &Path,
    data: &str,
    vectors: &str,
    tag: &str,
) -> Result<(String, Vec<u8>, Vec<u8>), String> {
    let ckpt = dir.join(format!("{tag}.ckpt"));
    let log = dir.join(format!("{tag}.csv"));
    let ckpt_s = ckpt.to_str().unwrap();
    let log_s = log.to_str().unwrap();
    #[rustfmt::skip]
    spanqa(&[
        "train", "--train", data, "--dev", data, "--open-vectors", vectors,
        "--out", ckpt_s, "--log", log_s, "--seed", "42", "--steps", "30",
        "--batch-size", "4", "--checkpoint-every", "10", "--hidden", "16",
    ])?;
    let sum = checkpoint::checksum(&ckpt).map_err(|e| e.to_string())?;
    Ok((
        sum,
        std::fs::read(&ckpt).unwrap(),
        std::fs::read(&log).unwrap(),
    ))
}

pub fn check() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.json");
    let data_s = data.to_str().unwrap();
    let raw = common::data_path("synthetic_bioasq.json");
    let vectors = common::data_path("synthetic_vectors.txt");
    let result = spanqa(&[
        "ingest",
        "--format",
        "bioasq",
        "--in",
        raw.to_str().unwrap(),
        "--out",
        data_s,
    ])
    .and_then(|_| {
        let a = train_run(dir.path(), data_s, vectors.to_str().unwrap(), "a")?;
        let b = train_run(dir.path(), data_s, vectors.to_str().unwrap(), "b")?;
        Ok((a, b))
    });
    match result {
        Err(e) => Outcome::Fail(e),
        Ok((a, b)) => {
            let rows = String::from_utf8_lossy(&a.2).lines().count() - 1;
            Outcome::check(
                a == b && rows == 30,
                format!(
                    "checksum {}.. on both runs, {rows} identical log rows",
                    &a.0[..16]
                ),
            )
        }
    }
}
