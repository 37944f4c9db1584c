use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfsafs::faults::ScriptedFault;
use vfsafs::harness::{Driver, Generator};
use vfsafs::Errno;
use vfsafs::{FaultInjector, FaultPlan};

use crate::Verdict;

const FORCED: usize = 10_000;

/// Alternates a normal step (light background faults) with a step whose
/// first fault point fails, and compares store and handles around the
/// failed one.
pub fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa70);
    let g = Generator::default();
    let mut d = Driver::new(
        4,
        FaultInjector::new(FaultPlan::seeded(0xb9, 0.02).unwrap()),
    );
    let mut forced = 0;
    let mut attempts = 0;
    let mut by_kind = std::collections::BTreeMap::<String, usize>::new();
    while forced < FORCED {
        attempts += 1;
        if attempts > FORCED * 20 {
            return Verdict::Fail(format!("only {forced} ops reached a fault point"));
        }
        let op = g.op_with(&mut rng, &d.open_fds());
        let s = d.step(&op);
        if !s.violations.is_empty() {
            return Verdict::Fail(format!("background step `{op}`: {:?}", s.violations));
        }

        let op = g.op_with(&mut rng, &d.open_fds());
        let err = Errno::LOW_LEVEL[rng.random_range(0..Errno::LOW_LEVEL.len())];
        let background = d.vfs.afs().faults().clone();
        let plan = FaultPlan::scripted(vec![ScriptedFault { step: 1, err }]).unwrap();
        d.vfs.afs_mut().set_faults(FaultInjector::new(plan));
        let state = d.state().clone();
        let handles = d.vfs.handles().clone();
        let s = d.step(&op);
        let fired = d.vfs.afs().faults().injected() > 0;
        d.vfs.afs_mut().set_faults(background);
        if !fired {
            continue;
        }
        if s.result != Err(err) {
            return Verdict::Fail(format!(
                "`{op}` returned {:?} after injected {err}",
                s.result
            ));
        }
        if *d.state() != state || *d.vfs.handles() != handles {
            return Verdict::Fail(format!("`{op}` failed with {err} but changed state"));
        }
        if !s.violations.is_empty() {
            return Verdict::Fail(format!("`{op}`: {:?}", s.violations));
        }
        forced += 1;
        *by_kind
            .entry(op.to_string().split(' ').next().unwrap().to_string())
            .or_default() += 1;
    }
    let kinds: Vec<String> = by_kind.iter().map(|(k, n)| format!("{k}={n}")).collect();
    Verdict::Pass(format!(
        "{forced} forced failures, all states equal; {}",
        kinds.join(" ")
    ))
}
