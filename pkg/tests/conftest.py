import sys


def pytest_terminal_summary(terminalreporter):
    for module in list(sys.modules.values()):
        if getattr(module, "__file__", "") and module.__file__.endswith("test_acceptance.py"):
            results = getattr(module, "RESULTS", {})
            if results:
                terminalreporter.section("acceptance criteria")
                for number in sorted(results):
                    terminalreporter.write_line(results[number])
