_criterion_results = []


def record_criterion(num: int, ok: bool, detail: str) -> None:
    _criterion_results.append((num, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, ok, detail in sorted(_criterion_results):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {detail}")
