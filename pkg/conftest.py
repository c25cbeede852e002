# conftest.py
# Puts the repository root on sys.path so tests import the packages the way biss.py does.
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
