use purgemerge::codec::{parse_generic, parse_sudoku_corpus, ClauseKind};
use purgemerge::oracle::{brute_force_solutions, check_assignment, SearchBudget};
use purgemerge::solver::{enumerate_solutions, purge_and_merge, SolverConfig, Termination};

const SMALL: &str = include_str!("fixtures/small4.sdk");

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn small_sudokus_match_the_oracle() {
    let puzzles: Vec<_> = parse_sudoku_corpus(SMALL).into_iter().map(Result::unwrap).collect();
    assert_eq!(puzzles.len(), 60);
    let mut multi = 0;
    for (i, p) in puzzles.iter().enumerate() {
        let expected = brute_force_solutions(p, SearchBudget::default()).unwrap();
        let report = purge_and_merge(p, &SolverConfig::default()).unwrap();
        let got = enumerate_solutions(&report, 1000);
        assert_eq!(got.solutions, expected, "puzzle {i}");
        if i < 40 {
            assert_eq!(expected.len(), 1, "puzzle {i} should be unique");
            assert_eq!(report.termination, Termination::AllSolved, "puzzle {i}");
            assert_eq!(report.assignment().as_ref(), Some(&expected[0]));
        }
        multi += usize::from(expected.len() > 1);
    }
    assert_eq!(multi, 20);
}

#[test]
fn killer_document_structure() {
    let inst = parse_generic(&fixture("killer.json")).unwrap();
    assert_eq!(inst.num_vars(), 81);
    let alldiff = inst.clauses.iter().filter(|c| c.kind == ClauseKind::AllDiff).count();
    let cages = inst
        .clauses
        .iter()
        .filter(|c| matches!(c.kind, ClauseKind::Sum { distinct: true, .. }))
        .count();
    assert_eq!(alldiff, 27);
    assert_eq!(cages, inst.clauses.len() - 27);
    // The cages tile the grid.
    let covered: usize = inst.clauses[27..].iter().map(|c| c.scope.len()).sum();
    assert_eq!(covered, 81);
}

#[test]
fn killer_solves_to_a_valid_grid() {
    let inst = parse_generic(&fixture("killer.json")).unwrap();
    let report = purge_and_merge(&inst, &SolverConfig::default()).unwrap();
    let all = enumerate_solutions(&report, 10);
    assert!(!all.solutions.is_empty());
    for s in &all.solutions {
        check_assignment(&inst, s).unwrap();
    }
}

#[test]
fn generic_fixtures_match_the_oracle() {
    for name in ["dice.json", "calcudoku4.json", "kakuro.json", "fillapix5.json"] {
        let inst = parse_generic(&fixture(name)).unwrap();
        let expected = brute_force_solutions(&inst, SearchBudget::default()).unwrap();
        assert!(!expected.is_empty(), "{name}");
        let report = purge_and_merge(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(enumerate_solutions(&report, 100_000).solutions, expected, "{name}");
    }
}

#[test]
fn dice_fixture_has_the_three_throws() {
    let inst = parse_generic(&fixture("dice.json")).unwrap();
    let report = purge_and_merge(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(
        enumerate_solutions(&report, 10).solutions,
        vec![vec![4, 6], vec![5, 5], vec![6, 4]]
    );
}
