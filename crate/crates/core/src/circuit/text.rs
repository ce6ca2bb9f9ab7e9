//! Line-oriented circuit files.
//!
//! ```text
//! # x0 * x1 + x2, replicated twice
//! copies 2
//! inputs 4
//! layer 1
//! add 0 0 1
//! layer 2
//! mul 0 0 1
//! mul 1 2 3
//! ```
//!
//! `layer <size>` opens a gate layer; layers are listed from the output
//! towards the inputs. `add o l r` / `mul o l r` set gate `o` of the current
//! layer to read values `l` and `r` of the next layer. Gates that are never set
//! are padding. `copies` is optional and defaults to 1. Blank lines and `#`
//! comments are ignored.

use std::fmt::Write as _;

use super::{Gate, GateKind, LayeredCircuit};
use crate::error::{invalid, Result};

/// Parses a circuit file into the (sub-)circuit and its copy count.
pub fn parse_circuit(text: &str) -> Result<(LayeredCircuit, usize)> {
    let mut copies = None;
    let mut inputs = None;
    let mut layers: Vec<(Vec<Gate>, Vec<bool>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let lineno = n + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        let nums = |count: usize| -> Result<Vec<usize>> {
            if words.len() != count + 1 {
                return invalid(format!("line {lineno}: `{}` takes {count} arguments", words[0]));
            }
            words[1..]
                .iter()
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|_| crate::Error::InvalidArgument(format!("line {lineno}: bad number `{w}`")))
                })
                .collect()
        };
        match words[0] {
            "copies" => {
                let v = nums(1)?[0];
                if copies.replace(v).is_some() {
                    return invalid(format!("line {lineno}: duplicate `copies`"));
                }
            }
            "inputs" => {
                let v = nums(1)?[0];
                if inputs.replace(v).is_some() {
                    return invalid(format!("line {lineno}: duplicate `inputs`"));
                }
            }
            "layer" => {
                let size = nums(1)?[0];
                if size == 0 || size > 1 << 24 {
                    return invalid(format!("line {lineno}: unsupported layer size {size}"));
                }
                layers.push((vec![Gate::DUMMY; size], vec![false; size]));
            }
            kind @ ("add" | "mul") => {
                let v = nums(3)?;
                let Some((gates, set)) = layers.last_mut() else {
                    return invalid(format!("line {lineno}: gate before any `layer`"));
                };
                if v[0] >= gates.len() {
                    return invalid(format!("line {lineno}: gate index {} out of range", v[0]));
                }
                if set[v[0]] {
                    return invalid(format!("line {lineno}: gate {} defined twice", v[0]));
                }
                set[v[0]] = true;
                gates[v[0]] = if kind == "add" { Gate::add(v[1], v[2]) } else { Gate::mul(v[1], v[2]) };
            }
            other => return invalid(format!("line {lineno}: unknown directive `{other}`")),
        }
    }
    let Some(inputs) = inputs else {
        return invalid("missing `inputs` line");
    };
    let circuit = LayeredCircuit::new(layers.into_iter().map(|(g, _)| g).collect(), inputs)?;
    Ok((circuit, copies.unwrap_or(1)))
}

pub fn write_circuit(circuit: &LayeredCircuit, copies: usize) -> String {
    let mut out = String::new();
    if copies != 1 {
        writeln!(out, "copies {copies}").unwrap();
    }
    writeln!(out, "inputs {}", circuit.input_len()).unwrap();
    for layer in circuit.layers() {
        writeln!(out, "layer {}", layer.len()).unwrap();
        for (o, g) in layer.iter().enumerate() {
            let name = match g.kind {
                GateKind::Add => "add",
                GateKind::Mul => "mul",
                GateKind::Dummy => continue,
            };
            writeln!(out, "{name} {o} {} {}", g.left, g.right).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tests::random_circuit;
    use crate::field::fe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_documented_example() {
        let text = "# x0 * x1 + x2\ncopies 2\ninputs 4\nlayer 1\nadd 0 0 1\nlayer 2\nmul 0 0 1\nmul 1 2 3\n";
        let (c, copies) = parse_circuit(text).unwrap();
        assert_eq!(copies, 2);
        let out = c.evaluate(&[fe(2), fe(3), fe(4), fe(1)]).unwrap();
        assert_eq!(out.output(), &[fe(10)]);
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let c = random_circuit(&mut rng, 3, 4);
            let (back, copies) = parse_circuit(&write_circuit(&c, 4)).unwrap();
            assert_eq!(back, c);
            assert_eq!(copies, 4);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        for bad in [
            "layer 2\nadd 0 0 1\n",
            "inputs 2\nadd 0 0 1\n",
            "inputs 2\nlayer 1\nadd 0 0 2\n",
            "inputs 2\nlayer 1\nadd 0 0 1\nadd 0 0 1\n",
            "inputs 2\nlayer 1\nxor 0 0 1\n",
            "inputs 2\nlayer 1\nadd 0 0\n",
            "inputs two\nlayer 1\n",
        ] {
            assert!(parse_circuit(bad).is_err(), "{bad:?}");
        }
    }
}
