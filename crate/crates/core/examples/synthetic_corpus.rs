//! Writes the synthetic corpus (speech, protocols, noise tree) to a directory
//! so the `snrbench` binary can be tried without licensed data.
//!
//!     cargo run --example synthetic_corpus -- /tmp/corpus [seed]

use snrbench::fixture::{write_fixture, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args.next().unwrap_or_else(|| "synthetic_corpus".into());
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let layout = write_fixture(
        &root,
        &FixtureSpec {
            seed,
            ..FixtureSpec::default()
        },
    )?;
    println!("speech:    {}", layout.speech_dir.display());
    println!("noise:     {}", layout.noise_dir.display());
    for (split, p) in &layout.protocols {
        println!("{:<10} {}", format!("{}:", split.as_str()), p.display());
    }
    Ok(())
}
