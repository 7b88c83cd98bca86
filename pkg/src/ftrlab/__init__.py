"""ftrlab: numerics for degenerate Fourier extension estimates and lattice NLS.

Subpackages by theme:

- ``lattice``: discrete Fourier analysis on Z^d, dispersion symbol, free flow;
- ``finitetype``: finite-type phases, rescaling algebra, region/slab covers;
- ``extension``: oscillatory extension operators and rescaling intertwinings;
- ``analysis``: ball/mixed/Fourier-Lebesgue norms, decoupling and restriction
  constant measurements, translation-averaging identity;
- ``dnls``: Duhamel/Picard and split-step solvers for the lattice NLS,
  contraction and scattering diagnostics;
- ``cli``: seeded batch experiment runner (``ftrlab`` console script).
"""

import os as _os

# Cap BLAS/OpenMP pools before numpy loads so FTRLAB_THREADS is honored;
# results are thread-count independent either way (pairwise reductions).
_threads = _os.environ.get("FTRLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from . import analysis, cli, dnls, extension, finitetype, lattice
from .errors import DomainError, PreconditionError, ResolutionError

__all__ = [
    "analysis",
    "cli",
    "dnls",
    "extension",
    "finitetype",
    "lattice",
    "DomainError",
    "PreconditionError",
    "ResolutionError",
    "__version__",
]
