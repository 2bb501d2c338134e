//! One line per acceptance criterion; exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taxoalign::analysis::{self, ReductionSession};
use taxoalign::data::RUNNING_EXAMPLE;
use taxoalign::engine::{check_consistency, enumerate_worlds};
use taxoalign::relations::compose_base;
use taxoalign::viz::{build_rcg, rcg_to_dot, EdgeKind, NodeKind};
use taxoalign::{parse_alignment, Alignment, BaseRelation, Budget, ConceptRef, RelationMask, Side};

use support::*;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_taxoalign"));
    c.env_remove("TAXOALIGN_BUDGET");
    c
}

/// Relation between two nonempty sets given as bit masks.
fn set_relation(x: u32, y: u32) -> BaseRelation {
    if x == y {
        BaseRelation::Equals
    } else if x & y == 0 {
        BaseRelation::Disjoint
    } else if x & !y == 0 {
        BaseRelation::IsIncludedIn
    } else if y & !x == 0 {
        BaseRelation::Includes
    } else {
        BaseRelation::Overlaps
    }
}

fn composition_table() -> Outcome {
    let start = Instant::now();
    let mut seen = [[0u8; 5]; 5];
    let index = |r: BaseRelation| BaseRelation::ALL.iter().position(|&b| b == r).unwrap();
    for x in 1u32..64 {
        for y in 1u32..64 {
            let r = index(set_relation(x, y));
            for z in 1u32..64 {
                let s = index(set_relation(y, z));
                seen[r][s] |= 1 << index(set_relation(x, z));
            }
        }
    }
    for (i, &r) in BaseRelation::ALL.iter().enumerate() {
        for (j, &s) in BaseRelation::ALL.iter().enumerate() {
            let expected: RelationMask = BaseRelation::ALL
                .iter()
                .enumerate()
                .filter(|(k, _)| seen[i][j] & (1 << k) != 0)
                .map(|(_, &t)| t)
                .collect();
            ensure!(compose_base(r, s) == expected, "{r} ; {s}: table {} vs {expected}", compose_base(r, s));
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("25 entries, {elapsed:.2?}"))
}

fn solver_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut n, mut consistent) = (0, 0);
    while n < 150 {
        let a = random_small_alignment(&mut rng);
        let expected: Vec<RelationMap> = oracle_worlds(&a).into_iter().collect();
        let e = enumerate_worlds(&a, &Budget::default().with_max_worlds(1 << 20)).map_err(|e| e.to_string())?;
        ensure!(!e.truncated, "truncated enumeration");
        let got: Vec<RelationMap> = e.worlds.iter().map(world_map).collect();
        ensure!(got == expected, "mismatch on\n{}", taxoalign::serialize_alignment(&a));
        consistent += usize::from(!expected.is_empty());
        n += 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{n} alignments ({consistent} consistent), {elapsed:.2?}"))
}

fn two_leaf_merge() -> Outcome {
    let a = parse_alignment(
        "taxonomy 1 a\n(A B C)\ntaxonomy 2 b\n(D E F)\narticulations\n[1.B equals 2.E]\n[1.C equals 2.F]\n",
    )
    .map_err(|e| format!("{e:?}"))?;
    ensure!(oracle_worlds(&a).len() == 1, "oracle disagrees on the world count");
    let worlds = enumerate_worlds(&a, &Budget::default()).map_err(|e| e.to_string())?.worlds;
    ensure!(worlds.len() == 1, "{} worlds", worlds.len());
    let w = &worlds[0];
    let roots = w
        .relation(&ConceptRef::new(Side::First, "A"), &ConceptRef::new(Side::Second, "D"))
        .ok_or("roots missing from the world")?;
    ensure!(roots == BaseRelation::Equals, "roots are {roots}");
    let table = analysis::mir(&worlds).map_err(|e| e.to_string())?;
    ensure!(table.entries.iter().all(|e| e.mask.as_single().is_some()), "non-singleton MIR entry");
    let rcg = build_rcg(w, &a).map_err(|e| e.to_string())?;
    let merged = rcg.nodes.iter().filter(|n| n.kind == NodeKind::Merged).count();
    ensure!(rcg.nodes.len() == 3 && merged == 3, "{} nodes, {merged} merged", rcg.nodes.len());
    let input = rcg.edges.iter().filter(|e| e.kind == EdgeKind::Input).count();
    ensure!(rcg.edges.len() == 2 && input == 2, "{} edges, {input} input", rcg.edges.len());
    let dot = rcg_to_dot(&rcg);
    ensure!(dot.matches("color=\"black\"").count() == 2, "DOT edge colors:\n{dot}");
    Ok("1 world, roots ==, singleton MIR, 3 merged nodes, 2 black edges".into())
}

fn running_example() -> Outcome {
    let a = parse_alignment(RUNNING_EXAMPLE).map_err(|e| format!("{e:?}"))?;
    let budget = Budget::default();
    ensure!(a.taxonomies[0].len() == 5 && a.taxonomies[1].len() == 5, "taxonomy sizes");
    let arts: Vec<String> = a.articulation_indices().iter().map(|&i| a.articulation(i).unwrap().to_string()).collect();
    ensure!(arts.len() == 6, "{} articulations", arts.len());
    let disjunctive = a
        .articulation_indices()
        .iter()
        .filter(|&&i| a.articulation(i).unwrap().mask.as_single().is_none())
        .count();
    ensure!(disjunctive == 3, "{disjunctive} disjunctive articulations");
    ensure!(arts.iter().any(|s| s == "1.A {equals is_included_in} 2.A"), "missing 1.A {{== <}} 2.A");
    let target = arts.iter().position(|s| s == "1.D includes 2.A").ok_or("missing 1.D includes 2.A")?;

    // (a)
    ensure!(oracle_worlds_wide(&a).is_empty(), "oracle finds the original consistent");
    let check = check_consistency(&a, &budget).map_err(|e| e.to_string())?;
    ensure!(!check.consistent, "(a) engine finds the original consistent");
    // (b)
    let d = analysis::diagnose(&a, &budget).map_err(|e| e.to_string())?;
    ensure!(d.mus.contains(&target), "(b) MUS {:?} lacks [{target}]", d.mus);
    // (c)
    let repaired = a.without(&BTreeSet::from([target]));
    let oracle = oracle_worlds_wide(&repaired);
    let e = enumerate_worlds(&repaired, &budget).map_err(|e| e.to_string())?;
    let got: BTreeSet<RelationMap> = e.worlds.iter().map(world_map).collect();
    ensure!(!e.truncated && got == oracle, "(c) engine and oracle disagree on the repaired worlds");
    ensure!(!got.is_empty(), "(c) repaired alignment is inconsistent");
    let table = analysis::mir(&e.worlds).map_err(|e| e.to_string())?;
    let entry = table
        .entry(&ConceptRef::new(Side::First, "D"), &ConceptRef::new(Side::Second, "A"))
        .ok_or("(c) no MIR entry for 1.D/2.A")?;
    ensure!(entry.mask == RelationMask::single(BaseRelation::IsIncludedIn), "(c) MIR 1.D/2.A is {}", entry.mask);
    // (d)
    ensure!(e.worlds.len() > 1, "(d) only {} world", e.worlds.len());
    let mut session = ReductionSession::new(e.worlds.clone());
    let q = session.next_question().ok_or("(d) no reduction question")?;
    let best = q.candidates.iter().map(|c| c.surviving).min().unwrap_or(0);
    let pick = q.candidates.iter().find(|c| c.surviving == best).unwrap().mask;
    session.apply_answer(&q.left, &q.right, pick).map_err(|e| e.to_string())?;
    Ok(format!(
        "inconsistent, MUS {:?}, {} worlds after repair, first question {}/{} narrows {} -> {}",
        d.mus,
        e.worlds.len(),
        q.left,
        q.right,
        e.worlds.len(),
        session.surviving.len()
    ))
}

/// Runs the binary with a wall-clock limit, killing it on expiry.
fn timed(args: &[&str], limit: Duration) -> Result<(Option<i32>, Duration, String), String> {
    let start = Instant::now();
    let mut child = bin()
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    loop {
        if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
            let mut err = String::new();
            use std::io::Read;
            if let Some(mut s) = child.stderr.take() {
                let _ = s.read_to_string(&mut err);
            }
            return Ok((status.code(), start.elapsed(), err));
        }
        if start.elapsed() > limit {
            let _ = child.kill();
            let _ = child.wait();
            return Ok((None, start.elapsed(), "killed after the time limit".into()));
        }
        thread::sleep(Duration::from_millis(20));
    }
}

fn generate(dir: &Path, depth: u32, verify: bool) -> Result<String, String> {
    let path = dir.join(format!("depth{depth}.txt"));
    let p = path.to_str().unwrap().to_string();
    let depth = depth.to_string();
    let mut args = vec!["gen", "--depth", depth.as_str(), "--branch", "2", "--pattern", "included", "-o", p.as_str()];
    if !verify {
        args.push("--no-verify");
    }
    let (code, _, err) = timed(&args, Duration::from_secs(300))?;
    ensure!(code == Some(0), "gen failed: {err}");
    Ok(p)
}

fn performance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seven = generate(dir.path(), 7, true)?;
    let out = dir.path().join("w7");
    let (c1, t1, e1) = timed(&["check", &seven], Duration::from_secs(30))?;
    ensure!(c1 == Some(0), "depth 7 check: exit {c1:?} {e1}");
    let (c2, t2, e2) = timed(&["worlds", &seven, "-o", out.to_str().unwrap()], Duration::from_secs(30))?;
    ensure!(c2 == Some(0), "depth 7 worlds: exit {c2:?} {e2}");
    ensure!(t1 + t2 < Duration::from_secs(30), "depth 7 took {:?}", t1 + t2);
    let n = std::fs::read_dir(&out).map_err(|e| e.to_string())?.count();
    ensure!(n == 2, "depth 7 wrote {n} files, expected one world");

    let eight = generate(dir.path(), 8, false)?;
    let (c3, t3, e3) = timed(&["check", &eight], Duration::from_secs(120))?;
    let eight_note = match c3 {
        Some(0) => format!("depth 8 check {t3:.2?}"),
        Some(3) if e3.contains("budget") => format!("depth 8 stopped by budget after {t3:.2?}"),
        _ => return Err(format!("depth 8 check: exit {c3:?} after {t3:?}: {e3}")),
    };
    Ok(format!("depth 7 check {t1:.2?} + worlds {t2:.2?}; {eight_note}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bad = dir.path().join("bad.txt");
    let good = dir.path().join("good.txt");
    std::fs::write(&bad, RUNNING_EXAMPLE).map_err(|e| e.to_string())?;
    std::fs::write(&good, taxoalign::data::RUNNING_EXAMPLE_REPAIRED).map_err(|e| e.to_string())?;
    let (bad, good) = (bad.to_str().unwrap(), good.to_str().unwrap());
    let commands: Vec<Vec<&str>> = vec![
        vec!["check", bad],
        vec!["--json", "check", bad],
        vec!["explain", bad],
        vec!["--json", "explain", bad],
        vec!["mir", good],
        vec!["--json", "mir", good],
        vec!["mir", good, "--provenance", "1.D,2.A"],
        vec!["worlds", good],
        vec!["--json", "worlds", good],
        vec!["cluster", good],
        vec!["--json", "cluster", good],
        vec!["--seed", "9", "gen", "--depth", "4"],
    ];
    for args in &commands {
        let a = bin().args(args).output().map_err(|e| e.to_string())?;
        let b = bin().args(args).output().map_err(|e| e.to_string())?;
        ensure!(a.stdout == b.stdout && a.status == b.status, "{args:?} differs between runs");
    }
    let mut files = 0;
    for cmd in ["worlds", "cluster"] {
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|k| {
                let out = dir.path().join(format!("{cmd}{k}"));
                bin().args([cmd, good, "-o", out.to_str().unwrap()]).output().unwrap();
                let mut entries: Vec<_> = std::fs::read_dir(&out)
                    .unwrap()
                    .map(|e| {
                        let p = e.unwrap().path();
                        (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
                    })
                    .collect();
                entries.sort();
                entries
            })
            .collect();
        ensure!(!runs[0].is_empty() && runs[0] == runs[1], "{cmd} -o files differ between runs");
        files += runs[0].len();
    }
    Ok(format!("{} commands and {files} written files identical", commands.len()))
}

fn diagnosis_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let budget = Budget::default();
    let (mut n, mut repairs) = (0, 0);
    while n < 50 {
        let a: Alignment = random_small_alignment(&mut rng);
        if oracle_consistent(&a) {
            continue;
        }
        n += 1;
        let d = analysis::diagnose(&a, &budget).map_err(|e| e.to_string())?;
        let all: BTreeSet<usize> = a.articulation_indices().into_iter().collect();
        let outside: BTreeSet<usize> = all.iter().copied().filter(|i| !d.mus.contains(i)).collect();
        ensure!(!oracle_consistent(&a.without(&outside)), "MUS {:?} is satisfiable", d.mus);
        for &i in &d.mus {
            let mut drop = outside.clone();
            drop.insert(i);
            ensure!(oracle_consistent(&a.without(&drop)), "MUS {:?} is not minimal at [{i}]", d.mus);
        }
        for r in &d.repairs {
            repairs += 1;
            let drop: BTreeSet<usize> = r.remove.iter().copied().collect();
            ensure!(oracle_consistent(&a.without(&drop)), "repair {:?} does not restore consistency", r.remove);
        }
    }
    Ok(format!("{n} inconsistent alignments, {repairs} repairs verified"))
}

fn main() {
    let criteria: [(&str, Check); 7] = [
        ("composition table matches set oracle", composition_table),
        ("enumeration equals exhaustive grid oracle", solver_oracle_equivalence),
        ("two-leaf merge", two_leaf_merge),
        ("bundled running example", running_example),
        ("synthetic performance", performance),
        ("byte-identical outputs", determinism),
        ("diagnosis minimality and repairs", diagnosis_properties),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
