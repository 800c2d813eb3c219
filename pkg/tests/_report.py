"""One line per acceptance criterion, shared between the test module and conftest."""

LINES = []
