import acceptance_report


def pytest_terminal_summary(terminalreporter):
    if acceptance_report.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report.RESULTS:
            terminalreporter.write_line(line)
