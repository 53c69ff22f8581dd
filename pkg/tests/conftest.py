import os

import pytest

# Real dataset files (not bundled; see README) live here when available.
DATA_DIR = os.environ.get("SIGNEDATTACK_DATA",
                          os.path.join(os.path.dirname(__file__), "..", "data"))


def dataset_path(name):
    return os.path.join(DATA_DIR, name)


def require_dataset(name):
    path = dataset_path(name)
    if not os.path.exists(path):
        pytest.skip(f"dataset file {name} not present (expected at {path}; "
                    f"this environment has no network access to fetch it -- "
                    f"see README for instructions)")
    return path
