import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

# fixed example streams so every run checks the same cases; set
# HYPOTHESIS_PROFILE=explore to search with fresh randomness
settings.register_profile("ci", derandomize=True, deadline=None)
settings.register_profile("explore", deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))
