"""Numerical laboratory for the Brinkman-Fourier ideal-gas system.

Modules: :mod:`constitutive` (closed-form ideal-gas laws), :mod:`envara`
(laws derived from an arbitrary free energy), :mod:`grid` (cell-centered
operators), :mod:`brinkman` (momentum solve), :mod:`evolution` (time
stepping), :mod:`diagnostics` (balance monitors and weak forms),
:mod:`inequalities`, :mod:`experiments` and :mod:`cli`.
"""

from .constitutive import ModelParams
from .evolution import State, TimeStepConfig, run
from .grid import Grid

__all__ = ["Grid", "ModelParams", "State", "TimeStepConfig", "run"]
__version__ = "0.1.0"
