//! Lock tokens on the sender chain and mint them on the receiving chain.

use zkbridge::bridge::app::lock_mint_demo;

fn main() -> zkbridge::Result<()> {
    let report = lock_mint_demo(1, "alice", 25)?;
    println!("mint before the header was relayed: {:?}", report.premature);
    println!("minted {} for {} (lock at height {})", report.receipt.amount, report.receipt.user, report.receipt.height);
    println!("replaying the same lock: {:?}", report.replay);
    println!("balance: {}", report.balance);
    Ok(())
}
