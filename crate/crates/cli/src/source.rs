//! `--state` sources: `named:NAME[:P1,P2,...]`, `file:PATH`, `random:DIMS:RANK:SEED`.

use anyhow::{bail, Context, Result};
use qdiscord_core::qstate::{load_state, make_named_state, sample_random_state};
use qdiscord_core::DensityMatrix;

pub fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(['x', ','])
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad dimension {t:?} in {text:?}")))
        .collect()
}

pub fn load(spec: &str) -> Result<DensityMatrix> {
    let (kind, rest) = spec
        .split_once(':')
        .with_context(|| format!("state source {spec:?} needs a prefix: named:, file: or random:"))?;
    match kind {
        "named" => {
            let (name, params) = match rest.split_once(':') {
                Some((n, p)) => {
                    let params = p
                        .split(',')
                        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad parameter {x:?}")))
                        .collect::<Result<Vec<_>>>()?;
                    (n, params)
                }
                None => (rest, Vec::new()),
            };
            Ok(make_named_state(name, &params)?)
        }
        "file" => load_state(rest).with_context(|| format!("reading state file {rest}")),
        "random" => {
            let parts: Vec<&str> = rest.split(':').collect();
            let [dims, rank, seed] = parts[..] else {
                bail!("random source is random:DIMS:RANK:SEED, got {spec:?}");
            };
            let dims = parse_dims(dims)?;
            let rank = rank.parse().with_context(|| format!("bad rank {rank:?}"))?;
            let seed = seed.parse().with_context(|| format!("bad seed {seed:?}"))?;
            Ok(sample_random_state(&dims, rank, seed)?)
        }
        other => bail!("unknown state source {other:?} (named, file or random)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources() {
        assert_eq!(load("named:bell").unwrap().dims(), vec![2, 2]);
        assert_eq!(load("named:ghz:4").unwrap().n_subsystems(), 4);
        assert_eq!(load("named:classical_random:3,7").unwrap().dim(), 8);
        let a = load("random:2x3:2:5").unwrap();
        assert_eq!(a.dims(), vec![2, 3]);
        assert!(a.max_abs_diff(&load("random:2,3:2:5").unwrap()) == 0.0);
        for bad in ["bell", "named:nope", "random:2x2:1", "file:/nonexistent/x.state", "web:x"] {
            assert!(load(bad).is_err(), "{bad}");
        }
    }
}
