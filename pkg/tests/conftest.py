import numpy as np
import pytest

from collm.models import ArchitectureSpec, Checkpoint, parameter_shapes


def tiny_spec() -> ArchitectureSpec:
    """A minimal two-tensor architecture for format and merge tests."""
    return ArchitectureSpec(
        block="conv",
        inputs=(("synthetic", 4),),
        layers=(
            {"kind": "conv1d", "name": "s0.conv1", "in_channels": 1,
             "out_channels": 2, "kernel_size": 3},
            {"kind": "softmax_head", "name": "head", "in_features": 4, "units": 2},
        ),
    )


def random_checkpoint(spec, seed, languages=("lang0",)) -> Checkpoint:
    rng = np.random.default_rng(seed)
    tensors = {
        name: rng.standard_normal(shape).astype(np.float32)
        for name, shape in parameter_shapes(spec).items()
    }
    return Checkpoint(spec=spec, tensors=tensors, languages=languages, seed=seed)


@pytest.fixture
def small_ckpt():
    return random_checkpoint(tiny_spec(), seed=11)
