import os

# keep BLAS single-threaded so parallel sweeps/scans in the tests do not
# oversubscribe the machine
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest  # noqa: E402

from qbm.model import SystemSpec  # noqa: E402


@pytest.fixture
def coulomb_1d():
    return SystemSpec(dimension=1, coupling=1.0, symmetry="antisymmetric")


@pytest.fixture
def outdir(tmp_path):
    d = tmp_path / "runs"
    d.mkdir()
    return str(d)


def base_config(**over):
    """Minimal valid run-config dict; keyword overrides go in at top level."""
    cfg = {
        "system": {"dimension": 1, "coupling": 1.0,
                   "symmetry": "antisymmetric"},
        "solver": {"method": "basis", "n_basis": 60},
        "t_final": 120.0,
    }
    cfg.update(over)
    return cfg
