use byzline::adversary::{adversary_algorithm, Attack, AttackConfig, AttackVerdict, Group};
use byzline::protocol::{AlwaysStay, FullTrimMidpoint, TrimmedCenter};
use byzline::{CautiousAlgorithm, Scalar};

fn config(n: usize, f: usize) -> AttackConfig {
    AttackConfig::new(n, f, Scalar::zero(), Scalar::one())
}

#[test]
fn groups_have_the_construction_sizes() {
    for f in 1..=3 {
        for n in 3 * f + 1..=5 * f {
            let algo = FullTrimMidpoint;
            let attack = Attack::new(&config(n, f), &algo).unwrap();
            let m = n - f;
            assert_eq!(attack.members(Group::SetA).len(), f, "n={n} f={f}");
            assert_eq!(attack.members(Group::SetB).len(), f, "n={n} f={f}");
            assert_eq!(attack.members(Group::SetX).len(), m - 2 * f, "n={n} f={f}");
            assert_eq!(attack.x(), Scalar::new(1, 2).unwrap());
        }
    }
}

#[test]
fn bounds_outside_the_impossibility_range_are_rejected() {
    let algo = FullTrimMidpoint;
    for (n, f) in [(3, 1), (4, 2), (6, 1), (11, 2)] {
        assert!(Attack::new(&config(n, f), &algo).is_err(), "n={n} f={f}");
    }
}

#[test]
fn delta_must_be_below_the_border_distance() {
    let mut c = config(9, 2);
    c.delta = Some(Scalar::one());
    assert!(Attack::new(&c, &TrimmedCenter).is_err());
}

#[test]
fn every_cautious_victim_keeps_its_separation() {
    let victims: [(&str, &dyn CautiousAlgorithm); 2] = [("algo4", &TrimmedCenter), ("fulltrim", &FullTrimMidpoint)];
    for f in 1..=2 {
        for n in 3 * f + 1..=5 * f {
            for (name, algo) in victims {
                if name == "algo4" && n <= 4 * f {
                    continue;
                }
                let mut c = config(n, f);
                c.outer_loops = 2;
                let report = adversary_algorithm(&c, algo).unwrap();
                assert!(
                    report.min_separation >= Scalar::new(6, 10).unwrap(),
                    "n={n} f={f} {name}"
                );
                assert_eq!(
                    report.verdict,
                    AttackVerdict::NonConvergenceDemonstrated,
                    "n={n} f={f} {name}"
                );
                assert!(report.fact1_violations.is_empty(), "n={n} f={f} {name}");
            }
        }
    }
}

#[test]
fn a_stationary_victim_keeps_its_separation() {
    let report = adversary_algorithm(&config(9, 2), &AlwaysStay).unwrap();
    assert!(report.min_separation >= Scalar::new(6, 10).unwrap());
}
