from __future__ import annotations

import random

import pytest

from nitireward.structured import BlockOrder, ParsedResponse

# ---------------------------------------------------------------------------
# Random completion generators shared by round-trip and gating tests
# ---------------------------------------------------------------------------

_WORDS = (
    "section liability resignation director tax ruling commercial code "
    "filing notice obligation duty shares transfer registration court"
).split()


def random_text(rng: random.Random, max_words: int = 12) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(0, max_words))]
    text = " ".join(words)
    if rng.random() < 0.3:
        text = f"\n{text}\n"
    return text


def random_parsed_response(rng: random.Random, order: BlockOrder) -> ParsedResponse:
    codes = [rng.randint(0, 9) for _ in range(rng.randint(0, 5))]
    return ParsedResponse(
        reasoning=random_text(rng),
        answer=random_text(rng),
        citations=codes,
        order=order,
    )


def garble(rng: random.Random, text: str) -> str:
    """Randomly break a rendered completion (or leave it intact)."""
    choice = rng.randint(0, 7)
    if choice == 0:
        return text
    if choice == 1:
        return text.replace("</citation>", "", 1)
    if choice == 2:
        return text.replace("<answer>", "<answer><answer>", 1)
    if choice == 3:
        return text.replace("<law_code>", "<law_code>x", 1)
    if choice == 4:  # move citation block to the front
        start = text.find("<citation>")
        if start == -1:
            return text
        return text[start:] + "\n" + text[:start]
    if choice == 5:
        cut = rng.randint(0, len(text))
        return text[:cut]
    if choice == 6:
        return random_text(rng)
    return f"Sure, here you go:\n{text}\nHope that helps."


# ---------------------------------------------------------------------------
# Acceptance reporting: one pass/fail line per criterion
# ---------------------------------------------------------------------------

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))
    elif report.when == "setup" and (report.failed or report.skipped):
        _acceptance_results.append((name, "SKIP" if report.skipped else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in _acceptance_results:
        terminalreporter.write_line(f"{status}  {name}")


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
