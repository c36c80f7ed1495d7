fn main() {
    let cfg = spacenet::ScenarioConfig { epochs: 4, n_receivers: 60, ..Default::default() };
    let out = spacenet::run_scenario(&cfg).unwrap();
    println!("height={} epochs_rows={} da_records={}", out.report.final_height, out.report.per_epoch.len(), out.da_log.lines().count());
    let out2 = spacenet::run_scenario(&cfg).unwrap();
    assert_eq!(out.da_log, out2.da_log, "DA log must be byte-identical");
    assert_eq!(out.report.to_json(), out2.report.to_json(), "report must be byte-identical");
    println!("determinism ok");
}
