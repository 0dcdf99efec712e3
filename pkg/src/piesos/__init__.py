"""piesos: stability certification of polynomial PDEs via partial integral
equations (PIEs) and distributed sum-of-squares programming.

The toolkit converts a 1-D polynomial PDE with linear boundary conditions
into an equivalent PIE, assembles Lyapunov feasibility conditions as a
semidefinite program over distributed polynomials, and cross-validates
certified decay bounds against direct simulation.
"""

from .polyring import Poly, VarId, as_fraction

__version__ = "0.1.0"

__all__ = ["Poly", "VarId", "as_fraction", "__version__"]
