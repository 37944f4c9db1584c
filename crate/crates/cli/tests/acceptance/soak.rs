use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfsafs::check::InvariantId;
use vfsafs::harness::{Driver, Generator};
use vfsafs::{FaultInjector, FaultPlan, Op, Outcome};

use crate::Verdict;

const OPS: usize = 100_000;
const PAGE_SIZE: usize = 4;
const FAULT_P: f64 = 0.05;

pub struct Soak {
    pub steps: usize,
    pub invariant_violations: Vec<String>,
    pub oracle_violations: Vec<String>,
    pub reads_checked: usize,
    pub faults_injected: u64,
    pub elapsed: Duration,
}

fn soak() -> &'static Soak {
    static SOAK: OnceLock<Soak> = OnceLock::new();
    SOAK.get_or_init(|| {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x50a6);
        let plan = FaultPlan::seeded(0xfa17, FAULT_P).unwrap();
        let mut d = Driver::new(PAGE_SIZE, FaultInjector::new(plan));
        let g = Generator::default();
        let mut s = Soak {
            steps: 0,
            invariant_violations: Vec::new(),
            oracle_violations: Vec::new(),
            reads_checked: 0,
            faults_injected: 0,
            elapsed: Duration::ZERO,
        };
        for i in 0..OPS {
            let op = g.op_with(&mut rng, &d.open_fds());
            let step = d.step(&op);
            if let (Op::Read(..), Ok(Outcome::Data(_))) = (&op, &step.result) {
                s.reads_checked += 1;
            }
            for v in step.violations {
                let line = format!("step {i} `{op}`: {v}");
                if v.invariant == InvariantId::Oracle {
                    s.oracle_violations.push(line);
                } else {
                    s.invariant_violations.push(line);
                }
            }
            s.steps += 1;
        }
        s.faults_injected = d.vfs.afs().faults().injected();
        s.elapsed = start.elapsed();
        s
    })
}

pub fn criterion_1() -> Verdict {
    let s = soak();
    let detail = format!(
        "{} ops, {} faults injected, {} violations, soak took {:.1}s",
        s.steps,
        s.faults_injected,
        s.invariant_violations.len(),
        s.elapsed.as_secs_f64()
    );
    if let Some(first) = s.invariant_violations.first() {
        Verdict::Fail(format!("{detail}; first: {first}"))
    } else if s.elapsed > Duration::from_secs(60) {
        Verdict::Fail(format!("{detail}; over 60s"))
    } else {
        Verdict::Pass(detail)
    }
}

pub fn criterion_3() -> Verdict {
    let s = soak();
    let detail = format!(
        "{} reads compared, file contents compared after each of {} ops, {} mismatches",
        s.reads_checked,
        s.steps,
        s.oracle_violations.len()
    );
    match s.oracle_violations.first() {
        Some(first) => Verdict::Fail(format!("{detail}; first: {first}")),
        None if s.steps < OPS => Verdict::Fail(format!("{detail}; soak incomplete")),
        None => Verdict::Pass(detail),
    }
}
