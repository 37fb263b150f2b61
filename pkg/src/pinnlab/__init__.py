"""Physics-informed neural networks on plain numpy.

Modules: ``autodiff`` (dual numbers and a reverse-mode tape), ``network``
(multilayer perceptrons and hard-constraint wrappers), ``optim`` (SGD,
ADAM, L-BFGS with a Wolfe line search), ``pde`` (problems, residuals,
series solutions and finite-difference references), ``sampling``,
``training``, ``metrics`` and ``cli``.
"""

from .autodiff import Dual, Jet, Tape, Var, gradient, hessian, second_derivative
from .network import NetworkParams, forward, init_params, param_count
from .pde import GridField, PdeProblem, make_problem
from .training import LossSpec, NetworkSpec, OptimizerSpec, train

__version__ = "0.1.0"
