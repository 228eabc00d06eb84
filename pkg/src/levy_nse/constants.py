"""Every tolerance, sample size and frozen constant used by the checks."""

# exact identities
EXACT_RTOL = 1e-12
N_RANDOM = 10_000

# statistics
SIGNIFICANCE = 0.01
N_KS = 100_000
MOMENT_RTOL = 0.05
MOMENT_ORDER = 1.2

# discretization tolerance tau(h) = C_TAU * h for the energy ledger.
# Fitted once on the abstract backend (N=8, m=4, sigma=0.1, beta=1.5,
# calibrated alpha, 20 runs at h=1e-3, T=10, seeds 10**6 + i) as the 99th
# percentile of |energy defect| / h (measured 66.0), rounded up and frozen.
C_TAU = 67.0

# refinement factor window for quantities that are first order in h
REFINE_FACTOR = (1.5, 3.0)

# sublinear growth: decay exponent may fall short of kappa * p by this much
ESTZ_MARGIN = 0.2

# gamma negativity: the running average must settle before this fraction of T
GAMMA_ONSET_FRACTION = 0.5

# Feller probe: median ratios may spread by at most this factor
FELLER_SPREAD = 10.0

# blow-up runs an experiment may discard
MAX_BLOWUP_FRACTION = 0.01
