"""
Shared constants and configuration defaults.
Every value can be overridden from the environment (or a .env file loaded
by main.py) using the CFPL_ prefix, e.g. CFPL_M_TRAIN=8.
Desk-scale values are the defaults; full-scale ones are noted inline.
"""
import os

import pytz


def _env(name: str, default: str) -> str:
    return os.getenv(f"CFPL_{name}", default)


# -------------------------------------------------------------------
# Geometry  (circular deployment area, distance-based path-loss)
# -------------------------------------------------------------------
RADIUS = float(_env("RADIUS", "300"))
P0 = float(_env("P0", "10"))
Q0 = float(_env("Q0", "30"))
ETA = float(_env("ETA", "3"))
MIN_DISTANCE = float(_env("MIN_DISTANCE", "1.0"))

# -------------------------------------------------------------------
# Network / objective
# -------------------------------------------------------------------
FEASIBILITY_TOL = float(_env("FEASIBILITY_TOL", "1e-9"))
# |h_hat| below this has no defined phase; the link contributes nothing
PHASE_EPS = 1e-30

# -------------------------------------------------------------------
# CSGD
# -------------------------------------------------------------------
CSGD_MAX_ITER = int(_env("CSGD_MAX_ITER", "500"))
CSGD_BATCH = int(_env("CSGD_BATCH", "64"))
CSGD_TOL = float(_env("CSGD_TOL", "1e-5"))
CSGD_WINDOW = int(_env("CSGD_WINDOW", "10"))
CSGD_FLOOR_FRACTION = float(_env("CSGD_FLOOR_FRACTION", "1e-8"))
# literal step size (constant / inv_sqrt schedules) as a fraction of P/K
CSGD_ALPHA_FRACTION = float(_env("CSGD_ALPHA_FRACTION", "0.01"))
# largest per-entry move of the first normalized step, as a fraction of P/K
CSGD_STEP_FRACTION = float(_env("CSGD_STEP_FRACTION", "1.0"))
# the stop rule is not checked before this many iterations
CSGD_MIN_ITER = int(_env("CSGD_MIN_ITER", "50"))

# -------------------------------------------------------------------
# Network architecture  (full scale: 16 layers, width 160*K)
# -------------------------------------------------------------------
HIDDEN_DEPTH = int(_env("HIDDEN_DEPTH", "4"))
HIDDEN_WIDTH_PER_UE = int(_env("HIDDEN_WIDTH_PER_UE", "32"))
BN_MOMENTUM = float(_env("BN_MOMENTUM", "0.9"))
BN_EPSILON = float(_env("BN_EPSILON", "1e-5"))
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# -------------------------------------------------------------------
# Training
# -------------------------------------------------------------------
LEARNING_RATE = float(_env("LEARNING_RATE", "1e-3"))
EPOCHS = int(_env("EPOCHS", "200"))
STEPS_PER_EPOCH = int(_env("STEPS_PER_EPOCH", "20"))
TRAIN_BATCH = int(_env("TRAIN_BATCH", "64"))
SMOOTHING = float(_env("SMOOTHING", "0.9"))

# -------------------------------------------------------------------
# Harness  (full scale: 2e5 test samples)
# -------------------------------------------------------------------
SEED = int(_env("SEED", "2022"))
M_TRAIN = int(_env("M_TRAIN", "4"))
K = int(_env("K", "4"))
SNR_DB = float(_env("SNR_DB", "20"))
PHI = float(_env("PHI", "0.1"))
TEST_SAMPLES = int(_env("TEST_SAMPLES", "5000"))
CSGD_TEST_SAMPLES = int(_env("CSGD_TEST_SAMPLES", "200"))
WORKERS = int(_env("WORKERS", "1"))
OUT_DIR = _env("OUT_DIR", "results")
CHECKPOINT_DIR = _env("CHECKPOINT_DIR", "checkpoints")

METHODS = ("CL", "NCL", "SCL", "CSGD", "EQUAL")
LEARNED_METHODS = ("CL", "NCL", "SCL")

# -------------------------------------------------------------------
# Logging
# -------------------------------------------------------------------
QUIET = _env("QUIET", "0") == "1"
TZ_LOG = pytz.timezone(_env("LOG_TZ", "UTC"))
