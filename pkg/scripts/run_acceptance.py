#!/usr/bin/env python3
"""Run the thirteen acceptance checks and print one verdict line per check."""
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    code = pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider", *sys.argv[1:]])
    sys.exit(int(code))
