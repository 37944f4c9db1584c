//! Deterministic fault injection.
//!
//! Every AFS operation except evict may fail with a low-level error before it
//! touches the store. A [`FaultInjector`] decides, once per operation entry
//! ("fault point"), whether that happens. Fault points are numbered from 1 in
//! the order they are reached.
//!
//! Seeded plans draw from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`: one Bernoulli draw per fault point, then, on a hit,
//! a uniform index into the error set. Identical plans replayed against the
//! same operation sequence make identical decisions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Errno;

/// Identifies the AFS operation at a fault point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpId {
    Lookup,
    Create,
    Mkdir,
    Rmdir,
    Link,
    Unlink,
    Rename,
    ReadInode,
    WriteInode,
    ReadPage,
    WritePage,
    Truncate,
    Readdir,
    Evict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScriptedFault {
    /// 1-based fault point index.
    pub step: u64,
    pub err: Errno,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FaultPlan {
    None,
    Seeded {
        seed: u64,
        probability: f64,
        errors: Vec<Errno>,
    },
    Scripted(Vec<ScriptedFault>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultPlanError {
    #[error("probability must lie in [0, 1]")]
    Probability,
    #[error("error set must be non-empty and contain only EIO, ENOSPC, ENOMEM")]
    ErrorSet,
    #[error("scripted steps must be >= 1 and strictly increasing (at step {0})")]
    Order(u64),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

impl FaultPlan {
    pub fn seeded(seed: u64, probability: f64) -> Result<Self, FaultPlanError> {
        Self::seeded_with(seed, probability, Errno::LOW_LEVEL.to_vec())
    }

    pub fn seeded_with(
        seed: u64,
        probability: f64,
        errors: Vec<Errno>,
    ) -> Result<Self, FaultPlanError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(FaultPlanError::Probability);
        }
        if errors.is_empty() || errors.iter().any(|e| !e.is_low_level()) {
            return Err(FaultPlanError::ErrorSet);
        }
        Ok(FaultPlan::Seeded {
            seed,
            probability,
            errors,
        })
    }

    pub fn scripted(faults: Vec<ScriptedFault>) -> Result<Self, FaultPlanError> {
        let mut last = 0;
        for f in &faults {
            if f.step <= last {
                return Err(FaultPlanError::Order(f.step));
            }
            last = f.step;
        }
        Ok(FaultPlan::Scripted(faults))
    }

    /// Parses a scripted plan: one `step=<n> err=<CODE>` per line, blank
    /// lines and `#` comments ignored.
    pub fn parse_script(text: &str) -> Result<Self, FaultPlanError> {
        let mut faults = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: &str| FaultPlanError::Syntax {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut step = None;
            let mut err = None;
            for field in line.split_whitespace() {
                match field.split_once('=') {
                    Some(("step", v)) => {
                        step = Some(v.parse::<u64>().map_err(|_| syntax("bad step"))?)
                    }
                    Some(("err", v)) => {
                        err = Some(v.parse::<Errno>().map_err(|e| syntax(&e.to_string()))?)
                    }
                    _ => return Err(syntax(&format!("unexpected `{field}`"))),
                }
            }
            match (step, err) {
                (Some(step), Some(err)) => {
                    if !err.is_low_level() {
                        return Err(FaultPlanError::ErrorSet);
                    }
                    faults.push(ScriptedFault { step, err })
                }
                _ => return Err(syntax("expected `step=<n> err=<CODE>`")),
            }
        }
        Self::scripted(faults)
    }
}

/// Parses the inline forms `none` and `seed:<s>,p:<prob>[,errs:EIO/ENOSPC]`.
/// Scripted plans live in files; see [`FaultPlan::parse_script`].
impl FromStr for FaultPlan {
    type Err = FaultPlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = |msg: String| FaultPlanError::Syntax { line: 1, msg };
        if s == "none" {
            return Ok(FaultPlan::None);
        }
        let mut seed = None;
        let mut prob = None;
        let mut errors = Errno::LOW_LEVEL.to_vec();
        for part in s.split(',') {
            match part.split_once(':') {
                Some(("seed", v)) => {
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|_| syntax(format!("bad seed `{v}`")))?,
                    )
                }
                Some(("p", v)) => {
                    prob = Some(
                        v.parse::<f64>()
                            .map_err(|_| syntax(format!("bad probability `{v}`")))?,
                    )
                }
                Some(("errs", v)) => {
                    errors = v
                        .split('/')
                        .map(|e| e.parse::<Errno>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| syntax(e.to_string()))?
                }
                _ => return Err(syntax(format!("unexpected `{part}`"))),
            }
        }
        match (seed, prob) {
            (Some(seed), Some(p)) => FaultPlan::seeded_with(seed, p, errors),
            _ => Err(syntax("expected `none` or `seed:<s>,p:<prob>`".into())),
        }
    }
}

impl fmt::Display for FaultPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultPlan::None => write!(f, "none"),
            FaultPlan::Seeded {
                seed,
                probability,
                errors,
            } => {
                let errs: Vec<_> = errors.iter().map(|e| e.name()).collect();
                write!(f, "seed:{seed},p:{probability},errs:{}", errs.join("/"))
            }
            FaultPlan::Scripted(faults) => {
                let steps: Vec<_> = faults
                    .iter()
                    .map(|s| format!("{}={}", s.step, s.err.name()))
                    .collect();
                write!(f, "script[{}]", steps.join(" "))
            }
        }
    }
}

/// Runtime state of a plan: the fault point counter and, for seeded plans,
/// the generator.
#[derive(Clone, Debug)]
pub struct FaultInjector {
    plan: FaultPlan,
    step: u64,
    rng: ChaCha8Rng,
    cursor: usize,
    injected: u64,
}

impl FaultInjector {
    pub fn new(plan: FaultPlan) -> Self {
        let seed = match &plan {
            FaultPlan::Seeded { seed, .. } => *seed,
            _ => 0,
        };
        FaultInjector {
            plan,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cursor: 0,
            injected: 0,
        }
    }

    pub fn none() -> Self {
        Self::new(FaultPlan::None)
    }

    pub fn plan(&self) -> &FaultPlan {
        &self.plan
    }

    /// Number of fault points reached so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Number of errors injected so far.
    pub fn injected(&self) -> u64 {
        self.injected
    }

    /// Decides the fault point for `op`. Evict is never a fault point.
    pub fn next_fault(&mut self, op: OpId) -> Option<Errno> {
        if op == OpId::Evict {
            return None;
        }
        self.step += 1;
        let fault = self.decide();
        self.injected += fault.is_some() as u64;
        fault
    }

    fn decide(&mut self) -> Option<Errno> {
        match &self.plan {
            FaultPlan::None => None,
            FaultPlan::Seeded {
                probability,
                errors,
                ..
            } => {
                if self.rng.random_bool(*probability) {
                    Some(errors[self.rng.random_range(0..errors.len())])
                } else {
                    None
                }
            }
            FaultPlan::Scripted(faults) => {
                while self.cursor < faults.len() && faults[self.cursor].step < self.step {
                    self.cursor += 1;
                }
                match faults.get(self.cursor) {
                    Some(f) if f.step == self.step => {
                        self.cursor += 1;
                        Some(f.err)
                    }
                    _ => None,
                }
            }
        }
    }
}

impl Default for FaultInjector {
    fn default() -> Self {
        Self::none()
    }
}
