from enum import Enum


class PowerSourceKind(Enum):
    CPU_TDP_MODEL = "cpu_tdp_model"
    GPU_QUERY = "gpu_query"
    EXTERNAL_FILE = "external_file"


class RunPhase(Enum):
    TRAINING = "training"
    INFERENCE = "inference"
