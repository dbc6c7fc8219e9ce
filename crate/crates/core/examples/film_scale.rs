//! Runs the full pipeline on the seeded film-scale synthetic data and prints
//! the metrics next to the popularity baseline.

use cyberswarm::pipeline::{Dataset, RunConfig, Session};
use cyberswarm::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SyntheticSpec::film_scale(), 7)?;
    let mut cfg = RunConfig::default();
    for kv in std::env::args().skip(1) {
        cfg.apply_override(&kv)?;
    }
    let mut session = Session::new(Dataset {
        store: data.store,
        social: Some(data.social),
    });
    let out = session.run(&cfg, None)?;
    for (stage, secs) in &out.timings.stages {
        println!("{stage:>14} {secs:8.2}s");
    }
    println!("{}", serde_json::to_string_pretty(&out.report.graph)?);
    println!("{}", serde_json::to_string(&out.report.batch)?);
    for k in &cfg.protocol.ks {
        println!(
            "K={k:<3} hr {:.4} popularity {:.4}",
            out.report.hr_at(*k).unwrap_or(f64::NAN),
            out.report.baseline_hr_at(*k).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
