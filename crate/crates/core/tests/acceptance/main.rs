//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line reaches the console.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 2 8`.

mod common;
mod bimodal;
mod cmdp;
mod logistic;
mod properties;
mod sir;
mod tracking;

use std::time::{Duration, Instant};

/// Outcome of one criterion: a verdict plus the measured numbers behind it.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

pub type Outcome = Result<Verdict, Box<dyn std::error::Error>>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "gibbs measure, classical langevin",
        budget: Duration::from_secs(10),
        run: gibbs::classical_langevin,
    },
    Criterion {
        id: 2,
        name: "passive variants on the 1-d quadratic",
        budget: Duration::from_secs(60),
        run: gibbs::passive_variants,
    },
    Criterion {
        id: 3,
        name: "bimodal bayesian posterior, desk scale",
        budget: Duration::from_secs(300),
        run: bimodal::run,
    },
    Criterion {
        id: 4,
        name: "self-normalized importance sampling limit",
        budget: Duration::from_secs(60),
        run: sir::run,
    },
    Criterion {
        id: 5,
        name: "cmdp ground truth",
        budget: Duration::from_secs(300),
        run: cmdp::ground_truth,
    },
    Criterion {
        id: 6,
        name: "cmdp irl near the active constraint",
        budget: Duration::from_secs(600),
        run: cmdp::irl,
    },
    Criterion {
        id: 7,
        name: "logistic regression, multi-kernel vs naive",
        budget: Duration::from_secs(900),
        run: logistic::run,
    },
    Criterion {
        id: 8,
        name: "tracking a switching reward",
        budget: Duration::from_secs(300),
        run: tracking::run,
    },
    Criterion {
        id: 9,
        name: "property suites",
        budget: Duration::from_secs(120),
        run: properties::run,
    },
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&c.id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = match std::panic::catch_unwind(c.run) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict::new(false, format!("error: {e}")),
            Err(_) => Verdict::new(false, "panicked"),
        };
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = v.pass && in_budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.1}s of {}s] {}{}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            v.detail,
            if in_budget { "" } else { " (over runtime budget)" },
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
