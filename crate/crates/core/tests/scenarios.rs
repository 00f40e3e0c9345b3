use std::path::PathBuf;

use touchlink_lab::scenario::{parse, run_scenario, Runner};

fn bundled() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn every_bundled_scenario_meets_its_expectations() {
    let all = bundled();
    assert!(all.len() >= 9);
    for (name, text) in all {
        let scenario = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let out = run_scenario(&scenario);
        assert!(out.passed(), "{name} failed:\n{}", out.report);
    }
}

#[test]
fn bundled_scenarios_survive_a_format_round_trip() {
    for (name, text) in bundled() {
        let scenario = parse(&text).unwrap();
        let again = parse(&scenario.to_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again, scenario, "{name}");
    }
}

#[test]
fn hue_hijack_report_shows_the_adopted_key() {
    let text = bundled()
        .into_iter()
        .find(|(n, _)| n == "hue-hijack")
        .unwrap()
        .1;
    let out = run_scenario(&parse(&text).unwrap());
    assert!(out.report.contains("attack=hijack target=lamp"));
    assert!(out.report.contains(
        "delta: key: 2b7e151628aed2a6abf7158809cf4f3c -> 00112233445566778899aabbccddeeff"
    ));
    assert!(out
        .report
        .ends_with("result: pass (7 step(s), 0 failure(s))\n"));
}

#[test]
fn states_record_before_and_after_every_step() {
    let text = bundled()
        .into_iter()
        .find(|(n, _)| n == "dos-join")
        .unwrap()
        .1;
    let scenario = parse(&text).unwrap();
    let mut runner = Runner::new(&scenario);
    runner.run_script();
    let out = runner.output();
    assert_eq!(
        out.states.matches("-- before\n").count(),
        scenario.script.len()
    );
    assert_eq!(
        out.states.matches("-- after\n").count(),
        scenario.script.len()
    );
    assert!(out
        .states
        .starts_with("== initial\nnode=bridge profile=hue-bridge"));
}
