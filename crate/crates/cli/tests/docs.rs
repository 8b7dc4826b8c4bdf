//! Every figure id has a recipe in the README, and every recipe parses.

use std::collections::BTreeMap;

use autobid_cli::Cli;
use clap::Parser;

const FIGURES: [&str; 11] = [
    "autobidding-chaos",
    "lam",
    "cobweb",
    "bifurcation",
    "GD-bifurcation",
    "revenuewelfare",
    "logistic-revenuewelfare",
    "newcomp",
    "compositions",
    "quadrangles-approx",
    "Chua-sim",
];

/// Commands listed under each `### \`id\`` heading of the recipe section.
fn recipes() -> BTreeMap<String, Vec<String>> {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let section = readme.split("## Figure recipes").nth(1).expect("recipe section");
    let section = section.split("\n## ").next().unwrap();
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current = None;
    for line in section.lines() {
        if let Some(id) = line.strip_prefix("### `").and_then(|s| s.strip_suffix('`')) {
            current = Some(id.to_string());
            out.entry(id.to_string()).or_default();
        } else if line.starts_with("autobid ") {
            let id = current.clone().expect("command under a heading");
            out.get_mut(&id).unwrap().push(line.to_string());
        }
    }
    out
}

#[test]
fn every_figure_has_a_recipe() {
    let r = recipes();
    for id in FIGURES {
        let cmds = r.get(id).unwrap_or_else(|| panic!("no recipe for {id}"));
        assert!(!cmds.is_empty(), "{id} lists no commands");
    }
    assert_eq!(r.len(), FIGURES.len(), "unexpected ids: {:?}", r.keys());
}

#[test]
fn every_recipe_parses() {
    for (id, cmds) in recipes() {
        for c in cmds {
            if let Err(e) = Cli::try_parse_from(c.split_whitespace()) {
                panic!("{id}: `{c}` does not parse:\n{e}");
            }
        }
    }
}

#[test]
fn cheap_recipes_run() {
    let dir = tempfile::tempdir().unwrap();
    for (id, cmds) in recipes() {
        if !["cobweb", "compositions", "newcomp", "Chua-sim"].contains(&id.as_str()) {
            continue;
        }
        for c in cmds {
            let args: Vec<&str> = c.split_whitespace().skip(1).collect();
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_autobid"))
                .args(&args)
                .current_dir(dir.path())
                .output()
                .unwrap();
            assert!(status.status.success(), "{id}: {c}\n{}", String::from_utf8_lossy(&status.stderr));
        }
    }
}
