"""Whole-network gradient checks for the instance-aware network and the flat baseline."""
import numpy as np
import pytest

from app.model import (
    FlatBaseline,
    InstanceAwareNet,
    KIND_FLAT,
    KIND_INSTANCE,
    ModelShapes,
    build_model,
    encode_image,
    init_params,
)
from app.model.params import ModelParams
from app.numerics.rng import SeededRng
from app.synthdata import generate_dataset
from tests.helpers import TOLERANCE, certify, tiny_config

SHAPES = ModelShapes(kind=KIND_INSTANCE, categories=3, in_channels=1, hidden_channels=2, channels=2,
                     levels=(2, 1), bits=4, semantic_bits=5)
FLAT_SHAPES = ModelShapes(kind=KIND_FLAT, categories=3, in_channels=1, hidden_channels=2, channels=2,
                          levels=(2, 1), bits=4, semantic_bits=0)
BOXES = np.array([[0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 0.5, 0.5], [0.3, 0.2, 0.9, 1.0]])
DIRECTIONAL_FLOOR = 1e-2


def network_pattern(fp):
    conv = fp.encode.conv
    return (conv.relu1._mask, conv.relu2._mask, conv.pool.argmax, fp.encode.argmax_cells, fp.pooled.argmax_rows)


def shifted(params: ModelParams, direction: np.ndarray, t: float) -> ModelParams:
    moved = params.copy()
    moved.assign_flat(params.flatten() + t * direction)
    return moved


def flat_grads(params: ModelParams, grads) -> np.ndarray:
    return np.concatenate([grads[name].reshape(-1) for name, _ in params])


class TestInstanceAwareNet:
    def test_forward_shapes(self):
        net = InstanceAwareNet(init_params(SHAPES, SeededRng(0)))
        fp = net.forward(SeededRng(1).uniform(size=(1, 6, 6)), BOXES)
        assert fp.D.shape == (3, SHAPES.dim)
        assert fp.M.shape == (3, 3) and fp.P.shape == (3, 3)
        assert fp.f.shape == (3, 4) and fp.s.shape == (5,)
        assert np.isclose(fp.p.sum(), 1.0)

    def test_rejects_flat_params(self):
        with pytest.raises(ValueError):
            InstanceAwareNet(init_params(FLAT_SHAPES, SeededRng(0)))

    def test_directional_gradient(self):
        """Upstream gradients on m, f and s flow back to every parameter."""
        def make(rng):
            params = init_params(SHAPES, rng.child("init"))
            image = rng.uniform(size=(1, 6, 6))
            g = rng.generator
            Rm, Rf, Rs = g.normal(size=3), g.normal(size=(3, 4)), g.normal(size=5)

            def objective(p):
                fp = InstanceAwareNet(p).forward(image, BOXES)
                return float(Rm @ fp.pooled.m + np.sum(Rf * fp.f) + Rs @ fp.s), fp

            _, fp = objective(params)
            grads = InstanceAwareNet(params).backward(fp, Rm, Rf, Rs)
            v = g.normal(size=params.flatten().size)
            v /= np.linalg.norm(v)
            slope = float(flat_grads(params, grads) @ v)
            if abs(slope) < DIRECTIONAL_FLOOR:
                return None

            def f(t):
                value, fp_t = objective(shifted(params, v, float(t[0])))
                return value, network_pattern(fp_t)

            return f, np.zeros(1), np.array([slope])

        assert certify(make) < TOLERANCE

    def test_backward_without_semantic_gradient_skips_semantic_tensors(self):
        params = init_params(SHAPES, SeededRng(2))
        net = InstanceAwareNet(params)
        fp = net.forward(SeededRng(3).uniform(size=(1, 6, 6)), BOXES)
        grads = net.backward(fp, grad_m=np.ones(3))
        assert "sem.W" not in grads
        assert not grads["hash.W"].any()

    def test_encode_bundle(self):
        cfg = tiny_config()
        scene = generate_dataset(cfg)["query"][0]
        net = InstanceAwareNet(init_params(ModelShapes.from_config(cfg), SeededRng(4)))
        bundle = net.encode(scene)
        assert bundle.image_id == scene.id
        assert bundle.category_codes.shape == (3, 4)
        assert bundle.semantic_code.shape == (5,)
        assert set(np.unique(bundle.category_codes)) <= {0, 1}

    def test_zero_weights_give_zero_codes_and_uniform_probabilities(self):
        cfg = tiny_config()
        scene = generate_dataset(cfg)["query"][0]
        bundle = encode_image(scene, InstanceAwareNet(ModelParams.zeros(ModelShapes.from_config(cfg))))
        assert not bundle.category_codes.any()
        assert not bundle.semantic_code.any()
        assert np.allclose(bundle.p, 1.0 / 3)


class TestFlatBaseline:
    def test_uniform_probabilities_and_no_semantic_code(self):
        cfg = tiny_config()
        scene = generate_dataset(cfg)["query"][0]
        bundle = FlatBaseline(init_params(FLAT_SHAPES, SeededRng(0))).encode(scene)
        assert np.allclose(bundle.p, 1.0 / 3)
        assert bundle.semantic_code is None

    def test_directional_gradient(self):
        def make(rng):
            params = init_params(FLAT_SHAPES, rng.child("init"))
            image = rng.uniform(size=(1, 6, 6))
            Rf = rng.generator.normal(size=(3, 4))
            fp = FlatBaseline(params).forward(image)
            grads = FlatBaseline(params).backward(fp, Rf)
            v = rng.generator.normal(size=params.flatten().size)
            v /= np.linalg.norm(v)
            slope = float(flat_grads(params, grads) @ v)
            if abs(slope) < DIRECTIONAL_FLOOR:
                return None

            def f(t):
                fp_t = FlatBaseline(shifted(params, v, float(t[0]))).forward(image)
                conv = fp_t.conv
                return float(np.sum(Rf * fp_t.f)), (conv.relu1._mask, conv.relu2._mask, conv.pool.argmax)

            return f, np.zeros(1), np.array([slope])

        assert certify(make) < TOLERANCE


class TestBuildModel:
    def test_kind_selects_network(self):
        assert isinstance(build_model(init_params(SHAPES, SeededRng(0))), InstanceAwareNet)
        assert isinstance(build_model(init_params(FLAT_SHAPES, SeededRng(0))), FlatBaseline)

    def test_semantic_head_disabled(self):
        cfg = tiny_config(model={"semantic_head": False})
        shapes = ModelShapes.from_config(cfg)
        assert shapes.semantic_bits == 0
        assert "sem.W" not in dict(shapes.tensor_shapes())

    def test_init_is_seeded(self):
        a = init_params(SHAPES, SeededRng(9)).flatten()
        b = init_params(SHAPES, SeededRng(9)).flatten()
        assert np.array_equal(a, b)
        assert np.all(init_params(SHAPES, SeededRng(9))["cls.b"] == 0.0)
