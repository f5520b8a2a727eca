"""Free-interface compressible MHD with surface tension: discrete operators, solvers and checks."""

__version__ = "0.1.0"

from .errors import ArtifactError  # noqa: F401
from .geometry import Mesh  # noqa: F401
from .eos_state import BackgroundState, Constitutive, FluidState  # noqa: F401
