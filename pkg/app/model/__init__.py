from app.model.baseline import FlatBaseline
from app.model.hashcode import CodeBundle
from app.model.network import InstanceAwareNet, build_model, encode_image
from app.model.params import KIND_FLAT, KIND_INSTANCE, ModelParams, ModelShapes, init_params

__all__ = [
    "CodeBundle",
    "FlatBaseline",
    "InstanceAwareNet",
    "KIND_FLAT",
    "KIND_INSTANCE",
    "ModelParams",
    "ModelShapes",
    "build_model",
    "encode_image",
    "init_params",
]
