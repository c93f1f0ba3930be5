//! Beacon-backoff contention inside one CSMA slot.

use rand::Rng;

/// Outcome of a contention round where every contender hears every other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentionOutcome {
    Idle,
    Winner(usize),
    /// Contenders tied at the minimum backoff; all of their frames are lost.
    Collision(Vec<usize>),
}

pub fn draw_backoff<R: Rng + ?Sized>(rng: &mut R, window: u32) -> u32 {
    rng.random_range(0..window)
}

/// `draws` are `(node, backoff)`. The unique minimum wins; everyone else
/// hears its reservation beacon and sleeps.
pub fn csma_contend(draws: &[(usize, u32)]) -> ContentionOutcome {
    let Some(min) = draws.iter().map(|d| d.1).min() else {
        return ContentionOutcome::Idle;
    };
    let mut tied: Vec<usize> = draws.iter().filter(|d| d.1 == min).map(|d| d.0).collect();
    if tied.len() == 1 {
        ContentionOutcome::Winner(tied[0])
    } else {
        tied.sort_unstable();
        ContentionOutcome::Collision(tied)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Transmit,
    /// Heard the beacon of `heard` first and backed off.
    Defer { heard: usize },
}

/// Contention with imperfect carrier sense. Contenders are visited in
/// `(backoff, node)` order; each defers to the earliest strictly-earlier
/// transmitter it can hear, otherwise it transmits. Contenders sharing a
/// backoff cannot hear each other.
///
/// `hears(listener, talker)` is called at most once per pair, in a
/// deterministic order.
pub fn resolve_with_sensing<F>(draws: &[(usize, u32)], mut hears: F) -> Vec<(usize, u32, Fate)>
where
    F: FnMut(usize, usize) -> bool,
{
    let mut order: Vec<(usize, u32)> = draws.to_vec();
    order.sort_by_key(|&(n, b)| (b, n));
    let mut out: Vec<(usize, u32, Fate)> = Vec::with_capacity(order.len());
    for &(node, b) in &order {
        let fate = out
            .iter()
            .filter(|(_, bj, f)| *bj < b && *f == Fate::Transmit)
            .find(|(talker, _, _)| hears(node, *talker))
            .map(|(talker, _, _)| Fate::Defer { heard: *talker })
            .unwrap_or(Fate::Transmit);
        out.push((node, b, fate));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_outcomes() {
        assert_eq!(csma_contend(&[]), ContentionOutcome::Idle);
        assert_eq!(csma_contend(&[(4, 9)]), ContentionOutcome::Winner(4));
        assert_eq!(csma_contend(&[(1, 1), (2, 3)]), ContentionOutcome::Winner(1));
        assert_eq!(
            csma_contend(&[(5, 2), (3, 2), (1, 7)]),
            ContentionOutcome::Collision(vec![3, 5])
        );
    }

    #[test]
    fn three_contenders_collision_rate_matches_enumeration() {
        let w = 8u32;
        let mut tied = 0u32;
        for a in 0..w {
            for b in 0..w {
                for c in 0..w {
                    if matches!(
                        csma_contend(&[(0, a), (1, b), (2, c)]),
                        ContentionOutcome::Collision(_)
                    ) {
                        tied += 1;
                    }
                }
            }
        }
        // Count triples whose minimum is attained at least twice directly.
        let mut oracle = 0u32;
        for a in 0..w {
            for b in 0..w {
                for c in 0..w {
                    let m = a.min(b).min(c);
                    if [a, b, c].iter().filter(|&&x| x == m).count() >= 2 {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(tied, oracle);
        assert_eq!(oracle, 92);
    }

    #[test]
    fn winners_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = 4;
        let mut wins = [0u32; 4];
        let mut decided = 0u32;
        for _ in 0..100_000 {
            let draws: Vec<_> = (0..k).map(|n| (n, draw_backoff(&mut rng, 16))).collect();
            if let ContentionOutcome::Winner(w) = csma_contend(&draws) {
                wins[w] += 1;
                decided += 1;
            }
        }
        for w in wins {
            let share = f64::from(w) / f64::from(decided);
            assert!((share - 0.25).abs() < 0.02, "{share}");
        }
    }

    #[test]
    fn full_hearing_reproduces_ideal_contention() {
        let draws = [(1, 4), (2, 2), (3, 9)];
        let fates = resolve_with_sensing(&draws, |_, _| true);
        assert_eq!(
            fates,
            vec![
                (2, 2, Fate::Transmit),
                (1, 4, Fate::Defer { heard: 2 }),
                (3, 9, Fate::Defer { heard: 2 })
            ]
        );
    }

    #[test]
    fn hidden_terminals_both_transmit() {
        let fates = resolve_with_sensing(&[(1, 0), (2, 5)], |_, _| false);
        assert!(fates.iter().all(|f| f.2 == Fate::Transmit));
    }

    #[test]
    fn ties_cannot_hear_each_other() {
        let fates = resolve_with_sensing(&[(1, 3), (2, 3)], |_, _| true);
        assert!(fates.iter().all(|f| f.2 == Fate::Transmit));
    }
}
