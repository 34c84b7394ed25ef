import os
from dotenv import load_dotenv

load_dotenv()


def _number(name: str, default: str, kind=float):
    raw = os.getenv(name, default)
    try:
        return kind(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}")


OUTPUT_DIR = os.getenv("SYMPLECTIC_OUTPUT_DIR", "reports")
LOG_LEVEL = os.getenv("SYMPLECTIC_LOG_LEVEL", "INFO").upper()

DEFAULT_STEPS = _number("SYMPLECTIC_STEPS", "2000", int)
SYMPLECTIC_TOL = _number("SYMPLECTIC_TOL", "1e-8")
INERTIA_TOL = _number("SYMPLECTIC_INERTIA_TOL", "1e-8")
RANK_TOL = _number("SYMPLECTIC_RANK_TOL", "1e-8")
KERNEL_TOL = _number("SYMPLECTIC_KERNEL_TOL", "1e-6")
SCAN_FACTOR = _number("SYMPLECTIC_SCAN_FACTOR", "4", int)
QUAD_ORDER = _number("SYMPLECTIC_QUAD_ORDER", "3", int)

_meshes = os.getenv("SYMPLECTIC_MESHES", "100,200,400,800")
try:
    DEFAULT_MESHES = [int(m) for m in _meshes.split(",") if m.strip()]
except ValueError:
    raise ValueError(f"SYMPLECTIC_MESHES must be a comma separated list of integers, got {_meshes!r}")

# Relative step for central differences of coefficient paths
DIFF_STEP = 1e-5
