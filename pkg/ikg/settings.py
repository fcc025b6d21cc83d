"""Numerical defaults shared by the services, the CLI and the API."""

# Initial samples per arm before any policy decision.
DEFAULT_N0 = 2
DEFAULT_MACRO_REPS = 100
DEFAULT_BASE_SEED = 20240521
DEFAULT_TTEI_BETA = 0.5

# Binomial confidence interval multiplier (95%).
CI_Z = 1.96

# Root finding used by the allocation solvers.
SOLVER_XTOL = 1e-15
SOLVER_RTOL = 4 * 2.220446049250313e-16
SOLVER_MAXITER = 500
RESIDUAL_TOL = 1e-8
SIMPLEX_TOL = 1e-10

# Brute-force allocation guards.
BRUTE_FORCE_MAX_ARMS = 5
BRUTE_FORCE_MIN_STEP = 1e-3
BRUTE_FORCE_MAX_STEP = 0.1
BRUTE_FORCE_MAX_POINTS = 100_000_000

# Pinned random stream family for reproducible experiments.
RNG_ALGORITHM = "PCG64"
SEED_SCHEME = "seedsequence-blake2b64"

RESULTS_CSV = "results.csv"
RATES_CSV = "sampling_rates.csv"
RESULT_JSON = "result.json"
