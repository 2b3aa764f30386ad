"""Empirical Bayes estimation and imputation for partly interval-censored Gaussian matrices.

Typical use::

    from ebmtobit import validate, ebm_tobit, EbmTobitConfig
    data = validate(L, R)            # L == R marks an exact observation
    res = ebm_tobit(data, EbmTobitConfig(B=50, seed=1))
    res.theta_hat                    # (n, p) estimated means
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .censored_data import *  # noqa: F401,F403
from .tobit_kernel import *  # noqa: F401,F403
from .npmle import *  # noqa: F401,F403
from .posterior import *  # noqa: F401,F403
from .support import *  # noqa: F401,F403
from .baselines import *  # noqa: F401,F403
from .simbench import *  # noqa: F401,F403
