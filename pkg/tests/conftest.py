import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# derandomized so repeated runs see the same examples
settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("repro")
