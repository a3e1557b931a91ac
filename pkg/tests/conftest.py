CRITERIA = {
    "test_criterion_1_cons1_single_producer": "1 Cons-1 single producer (10k txs, <10s)",
    "test_criterion_2_availability_t4": "2 availability / resource point",
    "test_criterion_3_guard_oracle_equivalence": "3 guard-oracle equivalence (>=1000 pairs)",
    "test_criterion_4_atomicity": "4 atomicity of rejections",
    "test_criterion_5_trace_correctness": "5 trace correctness + duality (<30s)",
    "test_criterion_6_scenario_golden": "6 scenario golden run + verify",
    "test_criterion_7_tamper_evidence": "7 tamper evidence (1000 flips, 0 misses)",
    "test_criterion_8_replication_convergence": "8 replication convergence (100 seeds)",
    "test_criterion_9_determinism_round_trip": "9 determinism / round trip (100 histories)",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: exit criteria")


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "nodeid", "").rsplit("::", 1)[-1]
            if name in CRITERIA and report.when == "call":
                results[name] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        if name in results:
            terminalreporter.write_line(f"[{results[name]}] criterion {label}")
