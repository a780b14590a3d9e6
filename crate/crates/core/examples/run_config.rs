//! Parse a run configuration, show the resolved file and how errors point at
//! the offending line.
//!
//! cargo run --example run_config -- [config_file]

use entnav::cli::RunConfig;

fn main() {
    let text = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(p).expect("config file"),
        None => "# smaller run\nseed = 11\ndata.n_steps = 20000\ngate.tau = 0.5\neval.sweep_ntw = [1, 5, 10]\n".into(),
    };
    match RunConfig::parse(&text) {
        Ok(cfg) => {
            print!("{}", cfg.to_text());
            println!("# hash {}", cfg.hash());
        }
        Err(e) => println!("error: {e}"),
    }
    for bad in ["gate.tau = 1.5", "seed = 1\nppo.lr = 0.1", "rl.epochs = two"] {
        println!("{bad:?} -> {}", RunConfig::parse(bad).unwrap_err());
    }
}
