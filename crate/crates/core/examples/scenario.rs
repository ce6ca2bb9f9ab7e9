//! Run an adversarial scenario from inline text and print the report.

use zkbridge::bridge::Scenario;

const TEXT: &str = "
seed = 5
blocks = 8
honest_relays = 2
adversarial_relays = 2
forging_nodes = 1
fork_every = 3
fork_length = 2
lock_amount = 10
";

fn main() -> zkbridge::Result<()> {
    let scenario = Scenario::parse(TEXT)?;
    let report = scenario.run()?;
    println!("{report}");
    println!("passed: {}", report.passed());
    Ok(())
}
