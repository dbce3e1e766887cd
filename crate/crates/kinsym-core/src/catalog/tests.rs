use super::*;

fn check_table(n: u8) {
    let cfg = VerifyCfg::default();
    let report = verify_table(n, &cfg).unwrap();
    for entry in &report.entries {
        assert!(
            entry.passed,
            "entry {} failed: {}",
            entry.id,
            serde_json::to_string_pretty(entry).unwrap()
        );
    }
    assert!(report.passed);
}

#[test]
fn table1_verifies() {
    check_table(1);
}

#[test]
fn table2_verifies() {
    check_table(2);
}

#[test]
fn table3_verifies() {
    check_table(3);
}

#[test]
fn table4_verifies() {
    check_table(4);
}

#[test]
fn table5_verifies() {
    check_table(5);
}

#[test]
fn lookup_by_id_works() {
    let entry = find("1.I").unwrap();
    assert_eq!(entry.table, 1);
    assert_eq!(entry.basis.len(), 8);
    assert!(matches!(find("no.such.entry"), Err(CatalogError::UnknownEntry(_))));
}

#[test]
fn mutations_are_caught() {
    let cfg = VerifyCfg { check_dim: false, ..VerifyCfg::default() };
    for (i, id) in ["1.I", "1.II.2", "2.I"].iter().enumerate() {
        let entry = find(id).unwrap();
        let (mutated, desc) = mutate_entry(entry, 1000 + i as u64);
        let report = verify_entry(&mutated, &cfg).unwrap();
        assert!(!report.passed, "mutation not caught: {desc}");
        assert!(
            report.generators.iter().any(|g| !g.verdict.is_zero())
                || report.closure.as_ref().is_some_and(|c| !c.closed),
            "mutation passed the generator and closure layers: {desc}"
        );
    }
}
