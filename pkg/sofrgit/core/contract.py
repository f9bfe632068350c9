# sofrgit/core/contract.py
"""
sofrgit Numerical Contract

Default model/grid parameters and every tolerance the engines rely on.
The defaults reproduce the reference test case (Hull-White limit, flat curve
at -1%, quarter-year averaging window, spot factor 100).

If you change any constants in here, bump ENGINE_VERSION.
"""

ENGINE_VERSION = "0.4.0"

# Reference model
DEFAULT_BETA = -1.0
DEFAULT_ALPHA = -0.1
DEFAULT_SIGMA = 20.0  # sigma_eff = 0.2 * y_spot at beta = -1
DEFAULT_RBAR_STAR = -0.01
DEFAULT_HORIZON = 0.25

# Reference contract
DEFAULT_T = 0.25
DEFAULT_T0 = 0.0
DEFAULT_Y_SPOT = 100.0
DEFAULT_STRIKES = (90.0, 95.0, 100.0, 105.0, 110.0, 120.0)
DEFAULT_YEAR_DAYS = 360

# Reference grids
DEFAULT_N_T = 40
DEFAULT_N_X = 200
DEFAULT_N_Z = 10
DEFAULT_X_MAX = 1000.0  # rate units, mapped to x per level
DEFAULT_Z_TOP_MULTIPLE = 3.0
MIN_Z_REF_NODES = 121
Z_REF_PER_Z_NODE = 8

# Weber-Orr kernel
TAU_MIN = 1e-6
ENVELOPE_CUT = 37.0  # exp(-37) < 1e-16
P_NODES_PER_PANEL = 8
P_CHUNK = 4096
SPACE_SUBNODES_MAX = 32
GAUSS_LEGENDRE_SEGMENT_NODES = 16

# Coordinate maps
INVERSE_MAP_SAMPLES = 2048
INVERSE_NEWTON_STEPS = 3

# x-grid stretching
SPOT_CLUSTER_STRENGTH = 5.0
LOWER_CLUSTER_STRENGTH = 2.0
CLUSTER_WIDTH_FRACTION = 1.0 / 50.0
GRID_CDF_SAMPLES = 8192

# Kernel-weight cache
DEFAULT_THETA_CACHE_SIZE = 256

# Recurrent scheme
BOUNDARY_EXTRAPOLATION_LEVELS = 3
ODE_SMALL_A = 1e-12
DELTA_Z_DENOMINATOR_FLOOR = 1e-14

# Bond / forward
DEFAULT_FORWARD_DQ = 1.0 / 365.0
ZCB_MAX_SWEEPS = 50
ZCB_SWEEP_TOL = 1e-12
ZCB_RANGE_TOL = 1e-6  # roundoff allowed outside [0, 1] before a bond price is rejected
LIVESK_MAX_ITER = 100
LIVESK_TOL = 1e-8

# 1M composition
DENSITY_MASS_TOL = 1e-3

# Oracles
DEFAULT_ORACLE_SEED = 20240917
DEFAULT_MC_PATHS = 200_000
DEFAULT_MC_STEPS = 200
DEFAULT_FD_N_Y = 80
DEFAULT_FD_N_Z = 45
DEFAULT_FD_N_T = 200
FD_T0_CUTOFF_FRACTION = 1e-4
FD_MAX_STEPS = 200_000
DEFAULT_SMALL_N_T = 8
DEFAULT_SMALL_N_X = 24
DEFAULT_SMALL_N_Z = 6

# Validation tolerances
THETA_CLOSED_FORM_TOL = 1e-8
THETA_ANNIHILATION_TOL = 1e-12
DELTA_LIMIT_RATIO_RANGE = (5.0, 20.0)
TABLE3_TOLERANCE = 0.05
FD_RELATIVE_TOL = 0.01
MC_STANDARD_ERRORS = 3.0
SCHEME_EQUIVALENCE_TOL = 1e-6  # times K, killing and averaging switched off
ZCB_DETERMINISTIC_TOL = 1e-6
# discrete vs continuous: sum(d_i^2 R_i^2) / (2 (T - t0)) stays below 3e-5 at 10% over 91 days
COMPOUNDING_TOL = 5e-5
COMPOUNDING_MAX_RATE = 0.10
COMPOUNDING_PATHS = 1000
BOUNDARY_CHECK_GRID = (5, 12, 4)  # n_t, n_x, n_z
BOUNDARY_CHECK_MODELS = 2  # random models on top of the configured one

# Reference prices (American Asian put, reference model, K = 90..100 step 2).
TABLE3_STRIKES = (90.0, 92.0, 94.0, 96.0, 98.0, 100.0)
TABLE3_AMERICAN = (0.5575, 0.5189, 0.5897, 0.6364, 0.6635, 0.6957)
# Display only; configuration behind these is ambiguous.
TABLE3_BLACK_SCHOLES = (0.0431, 0.1176, 0.2814, 0.6014, 1.1682, 2.0883)
