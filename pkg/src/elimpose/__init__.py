"""Elimination-based minimal solvers for partially calibrated relative pose.

The offline stage (``polycore``, ``groebner``, ``elimderive``, ``templates``)
derives exact elimination generators and elimination templates; the online
stage (``solvers``) turns minimal correspondence samples into fundamental
matrices or homographies with focal length and distortion.  ``synth``
generates ground-truth scenes and ``cli`` ties everything together.
"""

__version__ = "0.1.0"

from .polycore import Poly, grevlex, lex
from .elimderive import derive_generators, get_problem, load_generators, verify_reference
from .templates import SolverTemplate, build_template, load_template
from .solvers import PoseSolution, Tolerances, solve_minimal
from .synth import SceneConfig, SceneInstance, random_scene

__all__ = [
    "__version__",
    "Poly",
    "grevlex",
    "lex",
    "derive_generators",
    "get_problem",
    "load_generators",
    "verify_reference",
    "SolverTemplate",
    "build_template",
    "load_template",
    "PoseSolution",
    "Tolerances",
    "solve_minimal",
    "SceneConfig",
    "SceneInstance",
    "random_scene",
]
