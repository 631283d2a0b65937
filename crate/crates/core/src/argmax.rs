//! Argmax with a shared tie rule.
//!
//! Every policy in the crate selects arms through this module, so index
//! policies and value-driven lookahead agree on which scores count as tied.
//! Two scores are tied when they differ by at most `TIE_TOLERANCE` (scaled
//! by the magnitude of the maximum); rounding noise from the value-table
//! recurrence sits many orders of magnitude below that.

use rand::Rng;

pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lowest arm index among the tied maxima.
    #[default]
    Lowest,
    /// Uniformly random among the tied maxima.
    Random,
}

impl std::str::FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest" => Ok(TieBreak::Lowest),
            "random" => Ok(TieBreak::Random),
            other => Err(format!("unknown tie-break rule `{other}`")),
        }
    }
}

fn threshold(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max - TIE_TOLERANCE * max.abs().max(1.0)
}

/// Index of the maximum, lowest index on ties. Panics on an empty slice.
pub fn argmax_lowest(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of empty slice");
    let cut = threshold(values);
    values
        .iter()
        .position(|&v| v >= cut)
        .expect("maximum is always above its own threshold")
}

pub fn argmax<R: Rng + ?Sized>(values: &[f64], rule: TieBreak, rng: &mut R) -> usize {
    match rule {
        TieBreak::Lowest => argmax_lowest(values),
        TieBreak::Random => {
            let cut = threshold(values);
            let tied: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= cut).collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.gen_range(0..tied.len())]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn lowest_index_wins_ties() {
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.7, 0.7 + 1e-13]), 1);
        assert_eq!(argmax_lowest(&[0.1, 0.7, 0.8]), 2);
    }

    #[test]
    fn random_rule_only_picks_tied() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut seen = [0usize; 3];
        for _ in 0..1000 {
            seen[argmax(&[1.0, 0.2, 1.0], TieBreak::Random, &mut rng)] += 1;
        }
        assert_eq!(seen[1], 0);
        assert!(seen[0] > 400 && seen[2] > 400);
    }
}
