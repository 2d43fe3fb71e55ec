// `cmd_run` writes one JSON-Lines file per mode with a record per generated
// token: `{step, token, h_bar, g, vge, r, m}`.

use adavboost::experiment::{cmd_run, read_trace, RunConfig};

pub fn run_example() -> adavboost::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::from_json(r#"{"modes": ["vanilla", "adavboost"], "testbed": {"episodes": 5}}"#)?;
    cfg.out_dir = dir.path().to_path_buf();
    let out = cmd_run(&cfg)?;

    for (label, path) in &out.traces {
        let first = std::fs::read_to_string(path)?.lines().next().unwrap_or_default().to_string();
        println!("{label}: {} records, first: {first}", out.tokens[label]);
        let records = read_trace(path)?;
        assert_eq!(records.len(), out.tokens[label]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
