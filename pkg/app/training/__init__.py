from app.training.trainer import LossRecord, TrainResult, learning_rate, train, train_baseline
from app.training.triplets import generate_triplets, sample_category_triplets

__all__ = [
    "LossRecord",
    "TrainResult",
    "generate_triplets",
    "learning_rate",
    "sample_category_triplets",
    "train",
    "train_baseline",
]
