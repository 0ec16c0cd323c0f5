import sys

import numpy as np
import pytest

from semloc import ConceptLabel, Segment, SemanticMap


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance checklist collected by test_acceptance, if it ran."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        name, outcome = results[number]
        terminalreporter.write_line(f"criterion {number} ({name}): {outcome}")


def square(cx, cy, side):
    h = side / 2.0
    return np.array([[cx - h, cy - h], [cx + h, cy - h],
                     [cx + h, cy + h], [cx - h, cy + h]])


THREE_CONCEPTS = [
    ConceptLabel(0, "Road", False),
    ConceptLabel(1, "Tree", False),
    ConceptLabel(2, "Lamp_Post", True),
]


@pytest.fixture
def tiny_map():
    """Hand-built map on a 60 x 60 field; four segments, one empty corner."""
    segments = [
        Segment(0, square(10.0, 10.0, 8.0)),
        Segment(1, square(25.0, 12.0, 5.0)),
        Segment(2, square(18.0, 25.0, 0.5)),
        Segment(0, square(40.0, 40.0, 10.0)),
    ]
    return SemanticMap(list(THREE_CONCEPTS), segments, (0.0, 0.0, 60.0, 60.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
