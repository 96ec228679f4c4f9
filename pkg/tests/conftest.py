import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion (or one of its sub-cases)."""
    results = request.config.stash[_RESULTS]

    def record(number, title, ok, detail=""):
        entry = results.setdefault(number, {"title": title, "ok": True, "failed": []})
        entry["ok"] = entry["ok"] and bool(ok)
        if not ok and detail:
            entry["failed"].append(detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} {detail}".rstrip())
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        entry = results[number]
        verdict = "PASS" if entry["ok"] else "FAIL"
        line = f"{verdict} {number:>2}. {entry['title']}"
        if entry["failed"]:
            line += "  (" + "; ".join(entry["failed"]) + ")"
        terminalreporter.write_line(line)
