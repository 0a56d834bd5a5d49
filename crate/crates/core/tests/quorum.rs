//! Vote evaluation against a brute-force oracle, plus the algebraic
//! properties the engine must keep.

use std::collections::BTreeMap;

use clawdlab::domain::{GovernanceModel, QuorumFraction, VoteValue};
use clawdlab::governance::{evaluate_at_expiry, evaluate_vote, GovernanceOutcome, VoteOutcome};
use clawdlab::ids::AgentId;
use proptest::prelude::*;

const MAX_MEMBERS: u64 = 7;

/// Smallest k with k / n >= num / den, found by counting up.
fn oracle_at_least_fraction(num: u64, den: u64, n: u64) -> u64 {
    (0..=n).find(|k| k * den >= num * n).unwrap()
}

fn oracle(approve: u64, reject: u64, n: u64, model: &GovernanceModel) -> GovernanceOutcome {
    let (num, den) = match model {
        GovernanceModel::PiLed => (1, 2),
        GovernanceModel::Democratic { quorum_fraction } => {
            (quorum_fraction.numerator() as u64, quorum_fraction.denominator() as u64)
        }
        GovernanceModel::Consensus => {
            let everyone = if n < 2 { 2 } else { n };
            return if reject > 0 {
                GovernanceOutcome::Rejected
            } else if approve >= everyone {
                GovernanceOutcome::Accepted
            } else {
                GovernanceOutcome::Pending
            };
        }
    };
    let needed = oracle_at_least_fraction(num, den, n).max(2);
    if approve + reject < needed {
        GovernanceOutcome::Pending
    } else if approve > reject {
        GovernanceOutcome::Accepted
    } else if reject > approve {
        GovernanceOutcome::Rejected
    } else {
        GovernanceOutcome::Pending
    }
}

fn models() -> Vec<GovernanceModel> {
    let mut out = vec![GovernanceModel::PiLed, GovernanceModel::Consensus];
    for (n, d) in [(1, 7), (1, 3), (1, 2), (3, 5), (2, 3), (3, 4), (1, 1)] {
        out.push(GovernanceModel::Democratic {
            quorum_fraction: QuorumFraction::new(n, d).unwrap(),
        });
    }
    out
}

fn ballots(approve: u64, reject: u64, abstain: u64) -> BTreeMap<AgentId, VoteValue> {
    let mut b = BTreeMap::new();
    let mut i = 0;
    for (count, v) in [
        (approve, VoteValue::Approve),
        (reject, VoteValue::Reject),
        (abstain, VoteValue::Abstain),
    ] {
        for _ in 0..count {
            b.insert(AgentId::from_seq(i), v);
            i += 1;
        }
    }
    b
}

#[test]
fn evaluate_vote_matches_oracle_for_every_multiset_up_to_seven_members() {
    let mut checked = 0;
    for model in models() {
        for members in 0..=MAX_MEMBERS {
            for approve in 0..=members {
                for reject in 0..=members - approve {
                    for abstain in 0..=members - approve - reject {
                        // active membership can be anything up to the roster
                        for active in 0..=members {
                            let got = evaluate_vote(&ballots(approve, reject, abstain), active, &model);
                            let want = oracle(approve, reject, active, &model);
                            assert_eq!(
                                got, want,
                                "{model:?} a={approve} r={reject} x={abstain} active={active}"
                            );
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn worked_examples() {
    let b = ballots(2, 1, 0);
    assert_eq!(
        evaluate_vote(&b, 4, &GovernanceModel::PiLed),
        GovernanceOutcome::Accepted
    );
    assert_eq!(
        evaluate_vote(&ballots(1, 0, 0), 2, &GovernanceModel::PiLed),
        GovernanceOutcome::Pending
    );
    assert_eq!(
        evaluate_vote(&ballots(1, 1, 0), 2, &GovernanceModel::PiLed),
        GovernanceOutcome::Pending
    );
    assert_eq!(
        evaluate_vote(&ballots(0, 0, 1), 2, &GovernanceModel::PiLed),
        GovernanceOutcome::Pending
    );
}

#[test]
fn expiry_examples() {
    let g = GovernanceModel::PiLed;
    assert_eq!(evaluate_at_expiry(&ballots(1, 0, 0), 4, &g), VoteOutcome::Voided);
    assert_eq!(evaluate_at_expiry(&ballots(1, 1, 0), 2, &g), VoteOutcome::Rejected);
    assert_eq!(evaluate_at_expiry(&ballots(2, 1, 0), 4, &g), VoteOutcome::Accepted);
    assert_eq!(
        evaluate_at_expiry(&ballots(2, 0, 0), 3, &GovernanceModel::Consensus),
        VoteOutcome::Voided
    );
}

#[test]
fn consensus_abstention_blocks() {
    let g = GovernanceModel::Consensus;
    assert_eq!(evaluate_vote(&ballots(3, 0, 0), 3, &g), GovernanceOutcome::Accepted);
    assert_eq!(evaluate_vote(&ballots(2, 0, 1), 3, &g), GovernanceOutcome::Pending);
    assert_eq!(evaluate_vote(&ballots(5, 1, 0), 6, &g), GovernanceOutcome::Rejected);
}

fn model_strategy() -> impl Strategy<Value = GovernanceModel> {
    prop_oneof![
        Just(GovernanceModel::PiLed),
        Just(GovernanceModel::Consensus),
        (1u32..=12, 1u32..=12).prop_filter_map("fraction in (0,1]", |(n, d)| {
            QuorumFraction::new(n, d)
                .ok()
                .map(|q| GovernanceModel::Democratic { quorum_fraction: q })
        }),
    ]
}

proptest! {
    #[test]
    fn adding_approval_never_undoes_acceptance(
        a in 0u64..20, r in 0u64..20, x in 0u64..5, n in 0u64..30, g in model_strategy()
    ) {
        let before = evaluate_vote(&ballots(a, r, x), n, &g);
        let after = evaluate_vote(&ballots(a + 1, r, x), n, &g);
        if before == GovernanceOutcome::Accepted {
            prop_assert_eq!(after, GovernanceOutcome::Accepted);
        }
    }

    #[test]
    fn adding_rejection_never_undoes_rejection(
        a in 0u64..20, r in 0u64..20, x in 0u64..5, n in 0u64..30, g in model_strategy()
    ) {
        let before = evaluate_vote(&ballots(a, r, x), n, &g);
        let after = evaluate_vote(&ballots(a, r + 1, x), n, &g);
        if before == GovernanceOutcome::Rejected {
            prop_assert_eq!(after, GovernanceOutcome::Rejected);
        }
    }

    #[test]
    fn abstentions_never_change_the_outcome(
        a in 0u64..20, r in 0u64..20, x in 0u64..10, n in 0u64..30, g in model_strategy()
    ) {
        prop_assert_eq!(
            evaluate_vote(&ballots(a, r, 0), n, &g),
            evaluate_vote(&ballots(a, r, x), n, &g)
        );
    }
}
