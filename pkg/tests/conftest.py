import sys


def pytest_terminal_summary(terminalreporter):
    for name, module in sys.modules.items():
        if name.endswith("test_acceptance"):
            lines = getattr(module, "CRITERION_LINES", [])
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break
