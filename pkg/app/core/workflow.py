from enum import Enum


class Stage(str, Enum):
    GEN_DATA = "GEN_DATA"
    TRAIN = "TRAIN"
    TRAIN_BASELINE = "TRAIN_BASELINE"
    ENCODE = "ENCODE"
    INDEX = "INDEX"
    QUERY = "QUERY"
    EVALUATE = "EVALUATE"
    SALIENCY = "SALIENCY"
    DONE = "DONE"
    FAILED = "FAILED"
