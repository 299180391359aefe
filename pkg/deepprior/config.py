import os

from dotenv import load_dotenv

load_dotenv()

# Worker cap for rendering and ablation cells (mirrored by --threads)
DEEPPRIOR_THREADS = int(os.getenv("DEEPPRIOR_THREADS", "1"))

# Floating point precision used for training ("float32" or "float64")
DEEPPRIOR_DTYPE = os.getenv("DEEPPRIOR_DTYPE", "float32")

# Crop settings
CUBE_SIZE_MM = float(os.getenv("DEEPPRIOR_CUBE_SIZE_MM", "300"))
PATCH_SIZE = int(os.getenv("DEEPPRIOR_PATCH_SIZE", "128"))
SEGMENT_EXTENT_MM = float(os.getenv("DEEPPRIOR_SEGMENT_EXTENT_MM", "250"))

# Prior and optimizer defaults
PCA_COMPONENTS = int(os.getenv("DEEPPRIOR_PCA_COMPONENTS", "30"))
LEARNING_RATE = float(os.getenv("DEEPPRIOR_LEARNING_RATE", "0.0001"))
EPOCHS = int(os.getenv("DEEPPRIOR_EPOCHS", "100"))
BATCH_SIZE = int(os.getenv("DEEPPRIOR_BATCH_SIZE", "128"))
ROBUST_PRIOR_SAMPLES = int(os.getenv("DEEPPRIOR_ROBUST_PRIOR_SAMPLES", "100000"))

# Logging
LOG_LEVEL = os.getenv("DEEPPRIOR_LOG_LEVEL", "INFO")

# Run records database
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///deepprior_runs.db")
