// Sweep the entropy/grounding balance alpha and the visual boost ceiling,
// one CSV row per grid point.

use adavboost::experiment::{cmd_sweep, parse_grid_arg, RunConfig};

pub fn run_example() -> adavboost::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::default();
    cfg.testbed.episodes = 10;
    cfg.out_dir = dir.path().to_path_buf();

    let mut grid = parse_grid_arg("alpha=0.5,0.7,1.0")?;
    grid.merge(parse_grid_arg("m_vis_max=1.1,2.0")?);
    let rows = cmd_sweep(&cfg, grid)?;
    assert_eq!(rows.len(), 6);
    print!("{}", std::fs::read_to_string(dir.path().join("sweep.csv"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
