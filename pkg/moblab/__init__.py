'''
Desk-scale machinery for Mobius exponential sums in short intervals
'''
__author__ = 'moblab developers'
__version__ = '0.1.0'
__email__ = 'moblab@users.noreply.github.com'
__status__ = 'Development'


from . import constants
from . import exceptions
from . import utils
from . import phase
from . import compute
from . import sieve
from . import expsum
from . import arcs
from . import characters
from . import vaughan
from . import file_io
from . import config
from . import sweep

from moblab.phase import PhaseReal
from moblab.sieve import ArithSegment, sieve_segment
from moblab.expsum import ExpSumResult, weyl_sum, mobius_expsum, gauss_sum, w_k
from moblab.arcs import arc_params, classify, dirichlet_approx
from moblab.vaughan import make_plan, reconstruct
from moblab.sweep import SweepSpec, run_sweep
