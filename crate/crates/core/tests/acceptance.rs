//! Desk-scale acceptance run. Prints one line per criterion and exits
//! non-zero if any attainable criterion fails. Criteria whose targets are
//! arithmetically out of reach are still run in full and print FAIL; they
//! only leave the exit status alone.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpal_core::attacks::nearest_neighbor_decode;
use dpal_core::data::{random_attribute_table, universe_element, universe_index, HistogramDatabase};
use dpal_core::experiments::*;
use dpal_core::linalg::{hadamard_row_product, l1, l2, Matrix};
use dpal_core::lp::minimize_l1_residual;
use dpal_core::mechanisms::bounded_noise_adversary;
use dpal_core::queries::{random_sign_query, MarginalQuery};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Criterion {
    id: u8,
    limit: Duration,
    /// Why the target cannot be met, when it cannot.
    unattainable: Option<&'static str>,
    run: fn() -> Outcome,
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, limit: mins(5), unattainable: None, run: c1 },
        Criterion { id: 2, limit: mins(1), unattainable: None, run: c2 },
        Criterion { id: 3, limit: mins(10), unattainable: None, run: c3 },
        Criterion { id: 4, limit: mins(5), unattainable: None, run: c4 },
        Criterion { id: 5, limit: mins(2), unattainable: None, run: c5 },
        Criterion { id: 6, limit: mins(2), unattainable: None, run: c6 },
        Criterion {
            id: 7,
            limit: mins(1),
            unattainable: Some("with equal weights and d=20 the event is S != 0, exact probability 1 - C(20,10)/2^20 = 0.8238"),
            run: c7,
        },
        Criterion { id: 8, limit: mins(1), unattainable: None, run: c8 },
        Criterion {
            id: 9,
            limit: mins(5),
            unattainable: Some("at n=16 the Gaussian sigma at delta=0.5 exceeds the image separation, so decoding is near chance"),
            run: c9,
        },
        Criterion { id: 10, limit: mins(5), unattainable: None, run: c10 },
        Criterion { id: 11, limit: mins(5), unattainable: None, run: c11 },
        Criterion { id: 12, limit: mins(10), unattainable: None, run: c12 },
    ];
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ok = true;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let took = start.elapsed();
        let pass = out.pass && took <= c.limit;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let note = match (pass, c.unattainable) {
            (false, Some(why)) => format!(" [unattainable: {why}]"),
            _ => String::new(),
        };
        println!("criterion {}: {verdict} {} ({:.1}s, limit {}s){note}", c.id, out.detail, took.as_secs_f64(), c.limit.as_secs());
        if !pass && c.unattainable.is_none() {
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn c1() -> Outcome {
    let sym = run_lp_decode(&LpDecodeConfig::default()).expect("lp decode sweep");
    let adv = run_lp_decode(&LpDecodeConfig { wild_mode: WildMode::Adaptive, ..Default::default() }).expect("adaptive sweep");
    Outcome {
        pass: sym.pass && adv.pass,
        detail: format!(
            "symmetric {}/{} chain={}, adaptive {}/{} chain={}",
            sym.successes, sym.trials, sym.chain_all_hold, adv.successes, adv.trials, adv.chain_all_hold
        ),
    }
}

fn c2() -> Outcome {
    let r = run_lp_decode(&LpDecodeConfig::noiseless()).expect("noiseless sweep");
    let worst = r.records.iter().map(|t| t.l1_error).fold(0.0, f64::max);
    let full_rank = r.records.iter().all(|t| t.sigma_min > 1e-9);
    Outcome {
        pass: full_rank && r.records.iter().all(|t| t.l1_error <= 1e-6) && r.trials == 100,
        detail: format!("{}/{} exact, max l1 error {worst:.2e}", r.records.iter().filter(|t| t.l1_error <= 1e-6).count(), r.trials),
    }
}

fn c3() -> Outcome {
    let r = run_attribute_attack(&AttributeAttackConfig::default()).expect("attribute attack");
    Outcome { pass: r.pass, detail: format!("{}/{} seeds within 0.1n", r.successes, r.trials) }
}

fn c4() -> Outcome {
    let r = run_hadamard(&HadamardConfig::default()).expect("hadamard sweep");
    let medians: Vec<String> = r.points.iter().map(|p| format!("{}:{:.3}", p.d_prime, p.median)).collect();
    Outcome { pass: r.pass, detail: format!("medians [{}], drop {:.3}", medians.join(" "), r.max_relative_drop) }
}

fn c5() -> Outcome {
    let r = run_small_universe(&SmallUniverseConfig::default()).expect("algorithm A");
    Outcome { pass: r.pass, detail: format!("k={} {}/{} recovered, oracle clean={}", r.k, r.successes, r.trials, r.oracle_clean) }
}

fn c6() -> Outcome {
    let r = run_small_universe(&SmallUniverseConfig::all_coordinates()).expect("algorithm B");
    Outcome { pass: r.pass, detail: format!("k={} {}/{} recovered", r.k, r.successes, r.trials) }
}

fn c7() -> Outcome {
    let r = run_rademacher(&RademacherConfig::default()).expect("rademacher");
    Outcome {
        pass: r.pass,
        detail: format!(
            "empirical {:.4} vs 0.9 - {:.4}; exponential bound {:.4} {}",
            r.constant.empirical_prob,
            r.constant.tolerance,
            r.exponential.theoretical_bound,
            if r.exponential.pass { "met" } else { "missed" }
        ),
    }
}

fn c8() -> Outcome {
    let r = run_chi_square(&ChiSquareConfig::default()).expect("chi square");
    Outcome { pass: r.pass && r.tail.events == 0, detail: format!("{} exceedances in {} trials", r.tail.events, r.tail.trials) }
}

fn c9() -> Outcome {
    let r = run_mutual_info(&MutualInfoSweepConfig::default()).expect("mutual information");
    let sweep: Vec<String> = r.sweep.iter().map(|p| format!("{}:{:.2}", p.delta, p.recovery_rate)).collect();
    Outcome {
        pass: r.pass,
        detail: format!(
            "s={} gaussian recovery {:.3} fano {:.2}; laplace fano {:.2}; sweep [{}] monotone={}",
            r.main.s,
            r.main.gaussian.recovery_rate,
            r.main.gaussian.fano_bound,
            r.main.laplace.fano_bound,
            sweep.join(" "),
            r.monotone
        ),
    }
}

fn c10() -> Outcome {
    let r = run_packing(&PackingConfig::default()).expect("packing");
    Outcome {
        pass: r.pass,
        detail: format!("{}/{} certified, collapsed family fails separation={}", r.passes, r.trials, r.collapsed_fails_separation),
    }
}

fn c11() -> Outcome {
    let r = run_witness(&WitnessConfig::default()).expect("witness");
    Outcome {
        pass: r.pass,
        detail: format!("noiseless rate {:.2}, gaussian(sigma={}) rate {:.2} gate {:.2}", r.noiseless.rate, r.sigma, r.gaussian.rate, r.gaussian.gate_rate),
    }
}

/// A cross-module sample of the property suites, rerun here at 1000 cases;
/// the full suites live with each module.
fn c12() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };
    let runner = || TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });

    check(
        "l1 within sqrt(k) l2",
        runner()
            .run(&proptest::collection::vec(-1e3f64..1e3, 1..40), |v| {
                prop_assert!(l1(&v) <= (v.len() as f64).sqrt() * l2(&v) + 1e-9);
                prop_assert!(l2(&v) <= l1(&v) + 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "hadamard product shape",
        runner()
            .run(&(1usize..4, 1usize..4, 1usize..5, any::<u64>()), |(r1, r2, c, seed)| {
                let f1 = Matrix::from_fn(r1, c, |i, j| ((seed >> ((i * c + j) % 60)) & 1) as f64);
                let f2 = Matrix::from_fn(r2, c, |i, j| ((seed >> ((i + j * 7) % 60)) & 1) as f64);
                let h = hadamard_row_product(&[f1.clone(), f2.clone()]).unwrap();
                prop_assert_eq!((h.rows(), h.cols()), (r1 * r2, c));
                for (i1, i2, j) in (0..r1).flat_map(|a| (0..r2).flat_map(move |b| (0..c).map(move |j| (a, b, j)))) {
                    prop_assert_eq!(h.get(i1 * r2 + i2, j), f1.get(i1, j) * f2.get(i2, j));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "universe index bijection",
        runner()
            .run(&(1usize..12, any::<u64>()), |(d, raw)| {
                let idx = (raw as usize) % (1 << d);
                prop_assert_eq!(universe_index(&universe_element(idx, d)), idx);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "marginal blocks partition the rows",
        runner()
            .run(&(1usize..12, 2usize..6, 1usize..3, any::<u64>()), |(n, d, ell, seed)| {
                let t = random_attribute_table(n, d, seed);
                let q = MarginalQuery::new(d, ell.min(d)).unwrap();
                let counts = q.evaluate_table(&t).unwrap();
                let block = 1usize << ell.min(d);
                for chunk in counts.chunks(block) {
                    prop_assert_eq!(chunk.iter().sum::<u64>(), n as u64);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "noiseless lp residual vanishes",
        runner()
            .run(&(proptest::collection::vec(0u64..5, 4), any::<u64>()), |(counts, seed)| {
                let q = random_sign_query(4, 12, seed);
                let y = q.apply(&HistogramDatabase::new(counts).as_f64());
                let sol = minimize_l1_residual(q.matrix(), &y).unwrap();
                prop_assert!(sol.residual <= 1e-6);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "bounded noise profile",
        runner()
            .run(&(proptest::collection::vec(-50f64..50.0, 1..60), 0f64..3.0, 0f64..0.5, any::<u64>()), |(a, alpha, gamma, seed)| {
                let rel = bounded_noise_adversary(&a, alpha, gamma, 1e3, seed).unwrap();
                let wild = &rel.profile.as_ref().unwrap().wild;
                prop_assert_eq!(wild.len(), (gamma * a.len() as f64).floor() as usize);
                for (i, (r, t)) in rel.answers.iter().zip(&a).enumerate() {
                    if !wild.contains(&i) {
                        prop_assert!((r - t).abs() <= alpha + 1e-12);
                    }
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "nearest neighbour finds exact images",
        runner()
            .run(&(proptest::collection::vec(proptest::collection::vec(-5f64..5.0, 3), 1..12), any::<prop::sample::Index>()), |(imgs, pick)| {
                let i = pick.index(imgs.len());
                let got = nearest_neighbor_decode(&imgs, &imgs[i]);
                prop_assert!(imgs[got] == imgs[i] && got <= i);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() { "7 cross-module properties at 1000 cases".into() } else { failures.join("; ") },
    }
}
