CONFIG_FILE_KEY = "config_file"

# Wald intervals
CI_LEVEL = 0.95

# Silverman's rule of thumb constant for Gaussian kernels
SILVERMAN_FACTOR = 1.06

# Kernel support (in bandwidths) used for mass checks and GPS quadrature
KERNEL_SUPPORT_BANDWIDTHS = 6.0

# Median-heuristic bandwidth is exact up to this many points and subsampled above
MEDIAN_HEURISTIC_MAX_POINTS = 2000

# In-sample GPS densities used to locate the trim floor
GPS_FLOOR_MAX_POINTS = 2000

# Per-threshold outcome quantiles for the default (y1, y0) grid
DEFAULT_THRESHOLD_QUANTILES = (0.25, 0.5, 0.75)

# Default rows per simulated replicate
DEFAULT_BOUNDS_N = 2000
DEFAULT_IV_N = 6000

# Minimum rows for the TML binary pipeline
MIN_TML_ROWS = 600

# Weak-instrument threshold relative to n * sd(S) * sd(A)
WEAK_INSTRUMENT_TOL = 1e-10

# Column names of the external tabular form
Y_COL, A_COL, S_COL = "y", "a", "s"
X_PREFIX = "x"

# Estimator flags
PLUGIN, MARGINAL, DR_DIRECT, DR_SMOOTH, DR_SMOOTH_LOWER = ["plugin", "marginal", "dr_direct", "dr_smooth", "dr_smooth_lower"]
OR, IPW, DR, GPS_IPW, DR_DENSITY, DR_KERNEL, TWOSLS = ["or", "ipw", "dr", "gps_ipw", "dr_density", "dr_kernel", "twosls"]

BOUNDS_ESTIMATORS = (PLUGIN, MARGINAL, DR_DIRECT, DR_SMOOTH, DR_SMOOTH_LOWER)
BINARY_TML_ESTIMATORS = (OR, IPW, DR)
CONTINUOUS_TML_ESTIMATORS = (OR, GPS_IPW, DR_DENSITY, DR_KERNEL)
ALL_ESTIMATORS = BOUNDS_ESTIMATORS + (OR, IPW, DR, GPS_IPW, DR_DENSITY, DR_KERNEL, TWOSLS)

# CLI exit codes
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERIC_ERROR = 4


class CfDistError(Exception):
    exit_code = 1


class ConfigError(CfDistError):
    exit_code = EXIT_CONFIG_ERROR


class DataError(CfDistError):
    exit_code = EXIT_DATA_ERROR


class NumericError(CfDistError):
    exit_code = EXIT_NUMERIC_ERROR


class BadFoldCount(ConfigError):
    pass


class UnsupportedTarget(ConfigError):
    pass


class MixedTargets(ConfigError):
    pass


class MissingColumn(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class HeterogeneousSchema(DataError):
    pass


class EmptyTable(DataError):
    pass


class ArmMissing(DataError):
    pass


class MissingInstrument(DataError):
    pass


class EmptyEvaluationSet(DataError):
    pass


class LengthMismatch(DataError):
    pass


class OutOfRange(DataError):
    pass


class AllPointsIdentical(DataError):
    pass


class IoFailure(DataError):
    pass


class DegenerateDesign(NumericError):
    pass


class ZeroVariance(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass


class WeakInstrument(NumericError):
    pass


class ZeroKernelMass(NumericError):
    pass


class ShapeMismatch(NumericError):
    pass


class NoConvergence(UserWarning):
    """Iterative fit hit its iteration cap. The last iterate is kept."""
