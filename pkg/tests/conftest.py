"""Prints one pass/fail line per acceptance criterion after any run that
executed them (works with or without pytest's output capture)."""

CRITERIA = {
    "test_criterion_1_analytic_pingpong_oracle": (
        1, "latency equals alpha + beta*n within 1e-9 relative"),
    "test_criterion_2_serialization_law": (
        2, "serialized - direct latency = 2*sigma*n (exactly 0 at sigma=0)"),
    "test_criterion_3_collective_oracle_equivalence": (
        3, "collectives bitwise equal serial references, P in 2..9"),
    "test_criterion_4_determinism": (
        4, "repeated invocations yield byte-identical stdout"),
    "test_criterion_5_ml_exactness": (
        5, "distributed ML bitwise equals sequential, P in 1..8"),
    "test_criterion_6_snake_load_balance": (
        6, "snake assignment partitions and balances"),
    "test_criterion_7_speedup_sanity": (
        7, "matmul speedup within 5% of rank count"),
    "test_criterion_8_cli_contract": (
        8, "all 17 benchmark names run; golden latency table"),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call":
                continue
            if "test_acceptance.py::" not in report.nodeid:
                continue
            name = report.nodeid.split("::")[-1]
            if name in CRITERIA:
                results[name] = status
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, (number, label) in sorted(CRITERIA.items(), key=lambda kv: kv[1][0]):
        if name in results:
            verdict = "PASS" if results[name] == "passed" else "FAIL"
            terminalreporter.write_line(f"criterion {number} ({label}): {verdict}")
