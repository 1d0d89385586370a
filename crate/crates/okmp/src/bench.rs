//! Stage benchmark harness behind `bench`.
//!
//! For each `(dim, users)` pair the harness times six lifecycle stages and
//! reports the median in nanoseconds as CSV rows `stage,m,n,median_ns`.
//! Absolute numbers are machine-bound; consumers should assert trends only
//! (setup dominates everything; per-departure refresh is linear in `m` and
//! independent of `n`).

use std::time::Instant;

use crate::ffield::{seeded_rng, PrimeField};
use crate::gkm::{GkmError, GroupState, MemberId};
use crate::ortholin::{gen_orthogonal_system, linear_combination};
use crate::wire::{encode_frame, Frame};

/// Table row labels, in emission order.
pub const STAGES: [&str; 6] = [
    "Orthogonalization",
    "Key Refreshment",
    "Generator Coder",
    "Client's setup",
    "Bcast",
    "Client removal + refresh",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchSpec {
    /// Vector-space dimension `m`.
    pub dim: usize,
    /// Group capacity `n`.
    pub users: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageRow {
    pub stage: &'static str,
    pub m: usize,
    pub n: usize,
    pub median_ns: u128,
}

/// `stage,m,n,median_ns` rows with header.
pub fn to_csv(rows: &[StageRow]) -> String {
    let mut out = String::from("stage,m,n,median_ns\n");
    for row in rows {
        out.push_str(&format!("{},{},{},{}\n", row.stage, row.m, row.n, row.median_ns));
    }
    out
}

fn median_ns(mut samples: Vec<u128>) -> u128 {
    samples.sort_unstable();
    samples[samples.len() / 2]
}

fn time_once(f: impl FnOnce()) -> u128 {
    let start = Instant::now();
    f();
    start.elapsed().as_nanos()
}

/// Runs every stage for every spec. `reps` controls the cheap stages; the
/// one-time orthogonalization is measured once per spec.
pub fn run(specs: &[BenchSpec], reps: usize, seed: u64) -> Result<Vec<StageRow>, GkmError> {
    let field = PrimeField::default_field();
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(specs.len() * STAGES.len());

    for (i, spec) in specs.iter().enumerate() {
        let (m, n) = (spec.dim, spec.users);
        let mut rng = seeded_rng(seed ^ ((i as u64) << 48));

        // Stage 1: system setup. The dominant one-time cost.
        let mut system = None;
        let ortho_ns = time_once(|| {
            system = Some(gen_orthogonal_system(&field, m, n, &mut rng));
        });
        let system = system.unwrap()?;
        rows.push(StageRow { stage: STAGES[0], m, n, median_ns: ortho_ns });

        let scalars: Vec<_> = (0..n).map(|_| field.rand_nonzero(&mut rng)).collect();
        let mut state =
            GroupState::from_parts(system, scalars, field.rand_nonzero(&mut rng))?;
        // Measurement mode: the debug-build aggregate recomputation is
        // O(n*m) and would bury the O(m) stages.
        state.set_consistency_checks(false);
        for idx in 0..n {
            let _ = state.assign_member(MemberId::new(format!("u{idx}")))?;
        }

        // Stage 2: re-randomize every slot scalar and rebuild the coder
        // input.
        let samples: Vec<u128> = (0..reps)
            .map(|_| {
                time_once(|| {
                    let _ = state.rotate_all(field.rand_nonzero(&mut rng), &mut rng);
                })
            })
            .collect();
        rows.push(StageRow { stage: STAGES[1], m, n, median_ns: median_ns(samples) });

        // Stage 3: fold the scaled basis into the aggregate vector.
        let samples: Vec<u128> = (0..reps)
            .map(|_| {
                time_once(|| {
                    let _ = linear_combination(
                        &field,
                        state.scalars(),
                        state.system().basis(),
                        state.dim(),
                    );
                })
            })
            .collect();
        rows.push(StageRow { stage: STAGES[2], m, n, median_ns: median_ns(samples) });

        // Stage 4: build one client's key material.
        let member = MemberId::new("u0");
        let samples: Vec<u128> = (0..reps)
            .map(|_| {
                time_once(|| {
                    let _ = state.reissue_key(&member);
                })
            })
            .collect();
        rows.push(StageRow { stage: STAGES[3], m, n, median_ns: median_ns(samples) });

        // Stage 5: scale the aggregate and encode the broadcast frame.
        let samples: Vec<u128> = (0..reps)
            .map(|_| {
                time_once(|| {
                    let msg = state.build_rekey(field.rand_nonzero(&mut rng)).unwrap();
                    let _ = encode_frame(&Frame::Rekey { epoch: msg.epoch, c: msg.c });
                })
            })
            .collect();
        rows.push(StageRow { stage: STAGES[4], m, n, median_ns: median_ns(samples) });

        // Stage 6: one departure plus its refresh broadcast. The member is
        // re-bound between reps (untimed) so every rep leaves a full group.
        let samples: Vec<u128> = (0..reps)
            .map(|rep| {
                if n == 0 {
                    return 0;
                }
                let id = MemberId::new(format!("u{}", rep % n));
                let ns = time_once(|| {
                    state.leave(&id, field.rand_nonzero(&mut rng), &mut rng).expect("member bound");
                });
                let _ = state.assign_member(id).expect("slot just freed");
                ns
            })
            .collect();
        rows.push(StageRow { stage: STAGES[5], m, n, median_ns: median_ns(samples) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_six_rows_per_spec_and_stable_header() {
        let rows = run(&[BenchSpec { dim: 64, users: 16 }], 3, 7).unwrap();
        assert_eq!(rows.len(), 6);
        let csv = to_csv(&rows);
        assert!(csv.starts_with("stage,m,n,median_ns\n"));
        assert_eq!(csv.lines().count(), 7);
        for (row, stage) in rows.iter().zip(STAGES) {
            assert_eq!(row.stage, stage);
            assert_eq!(row.m, 64);
            assert_eq!(row.n, 16);
        }
    }

    #[test]
    fn setup_dwarfs_removal_even_at_small_sizes() {
        let rows = run(&[BenchSpec { dim: 256, users: 128 }], 5, 11).unwrap();
        let ortho = rows.iter().find(|r| r.stage == STAGES[0]).unwrap();
        let removal = rows.iter().find(|r| r.stage == STAGES[5]).unwrap();
        assert!(ortho.median_ns > removal.median_ns);
    }
}
