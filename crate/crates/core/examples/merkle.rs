//! Commit to a list of leaves, open one, and watch a tampered leaf fail.

use zkbridge::merkle::{mt_commit, mt_open, mt_verify};

fn main() -> zkbridge::Result<()> {
    let leaves: Vec<String> = (0..10).map(|i| format!("tx-{i}")).collect();
    let root = mt_commit(&leaves)?;
    let (leaf, path) = mt_open(&leaves, 6)?;
    println!("root      {}", hex(&root.0));
    println!("leaf 6    {:?} with {} siblings", String::from_utf8_lossy(&leaf), path.siblings.len());
    println!("verifies  {}", mt_verify(&path, &leaf, &root));
    println!("tampered  {}", mt_verify(&path, b"tx-7", &root));
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
