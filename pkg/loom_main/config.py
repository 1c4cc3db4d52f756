import os

from dotenv import load_dotenv

load_dotenv()

# -----------------------------
# Config helpers
# -----------------------------
DEFAULT_MODEL_PATH = os.getenv("LOOM_MODEL", "")
DEFAULT_FORMAT = os.getenv("LOOM_FORMAT", "table")
LOG_LEVEL = os.getenv("LOOM_LOG_LEVEL", "WARNING")

SCHEMA_VERSION = "1.0"

# property carrying the observed-state binding key on hardware elements
MATCH_KEY_PROPERTY = "match_key"
AVAILABILITY_PROPERTY = "availability"
FAILED = "failed"

# properties that are never treated as declared configuration settings
RESERVED_PROPERTY_KEYS = frozenset({AVAILABILITY_PROPERTY})
