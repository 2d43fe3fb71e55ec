// Per-token decode latency of AdaVBoost against vanilla decoding, measured
// on a single worker so the two modes share the same conditions.

use adavboost::experiment::{cmd_compare, RunConfig};

pub fn run_example() -> adavboost::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::default();
    cfg.testbed.episodes = 50;
    cfg.out_dir = dir.path().to_path_buf();
    let out = cmd_compare(&cfg)?;
    for (label, l) in &out.latency {
        println!("{label:<10} {:>5} tokens  {:.4} ms/token", l.tokens, l.ms_per_token);
    }
    println!("adavboost / vanilla = {:.3}", out.latency_ratio["adavboost"]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
