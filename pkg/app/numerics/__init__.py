"""Dense kernels, gradient oracle and seeded randomness."""
from app.numerics.gradcheck import finite_diff_check
from app.numerics.kernels import AffineLayer, ReLULayer, affine_layer, as_matrix, check_finite, matmul, relu_layer
from app.numerics.rng import SeededRng

__all__ = [
    "AffineLayer",
    "ReLULayer",
    "SeededRng",
    "affine_layer",
    "as_matrix",
    "check_finite",
    "finite_diff_check",
    "matmul",
    "relu_layer",
]
