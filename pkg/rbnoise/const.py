PROJECT_NAME = "rbnoise"

# Bundle layout
ARTIFACT_VERSION = "1"
SCHEMA_VERSION = "1"
MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.json"
REPORT_FILE = "report.json"
SURVIVAL_COLUMNS = ("seq_id", "realization", "qubit", "shots", "survival", "exact")

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_BUDGET_EXCEEDED = 3
EXIT_CHECK_FAILED = 4

# Random streams, first element of every spawn key
SEQUENCE_STREAM = 0
SHOTS_STREAM = 1
NOISE_STREAM = 2
