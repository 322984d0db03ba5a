import os

# Tool Configuration
APP_NAME = "plmc-sampler"
VERSION = "1.0.0"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVEL = "INFO"

# Randomness
DEFAULT_SEED = 42
PRIMARY_LANE = 0
INDEPENDENT_REFERENCE_LANE = 1
# Max float64 values of pre-drawn noise held per trajectory chunk
NOISE_BLOCK_BUDGET = 4_000_000

# Sampler defaults
DEFAULT_THETA = 1.0
DIVERGENCE_NORM = 1e150
DEFAULT_WORKERS = min(8, os.cpu_count() or 1)
TRAJECTORY_CHUNK = 256

# Experiment presets - desk scale runs in minutes, full scale in hours
DESK_TRAJECTORIES = 1000
DESK_H_REF = 2.0 ** -11
FULL_TRAJECTORIES = 3000
FULL_H_REF = 2.0 ** -13
CONVERGE_H_GRID = [2.0 ** -k for k in range(5, 10)]
CONVERGE_T = 6.0
DIMDEP_H = 2.0 ** -4
DIMDEP_ITERATIONS = 80
DIMDEP_DIMENSIONS = [10, 20, 50, 100]
DENSITY_H = 2.0 ** -9
DENSITY_BINS = 80
MAX_DIVERGED_FRACTION = 0.01

# Assumption checks
DISSIPATIVITY_RADIUS = 10.0
CONTRACTIVITY_RADIUS = 60.0
ASSUMPTION_SAMPLES = 100_000
CHECK_RTOL = 1e-10
CF_RADIAL_POINTS = 512
CF_RANDOM_DIRECTIONS = 64
OU_A2 = 1e-12

# Test functions
# PHI2 value on the unlisted band [5/2, 3); 1/4 continues the preceding step
PHI2_GAP_FILL = 0.25
SUP_NORM_SAMPLES = 10_000

# Reports
CSV_FLOAT_FORMAT = ".17g"
