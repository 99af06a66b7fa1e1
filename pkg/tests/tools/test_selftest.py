import numpy as np
import pytest

from tools.selftest import (
    check_beamformer,
    check_scattering,
    check_vectorization,
    random_instance,
    selftest,
    SelftestResponse,
)


async def test_selftest_passes():
    """Test that every numerical self-check passes on a few instances"""
    result = await selftest(seed=0, instances=2)

    assert isinstance(result, SelftestResponse)
    assert result.passed, str(result)
    names = [check.name for check in result.checks]
    assert names == [
        "scattering_unitarity",
        "scattering_symmetry",
        "fp_identity",
        "beamformer_kkt",
        "vectorization",
        "placement_constant_offset",
        "placement_gradient",
        "placement_minorization",
    ]
    assert str(result).startswith("All checks passed (seed 0)")


async def test_selftest_rejects_zero_instances():
    """Test that at least one instance is required"""
    with pytest.raises(ValueError, match="instances must be at least 1"):
        await selftest(instances=0)


def test_individual_checks():
    """Test the cheap checks on more instances"""
    rng = np.random.default_rng(1)
    for check in check_scattering(rng, 8):
        assert check.passed
    assert check_beamformer(rng, 8).passed
    assert check_vectorization(rng, 8).passed


def test_random_instance_shapes():
    """Test the random instance dimensions"""
    instance = random_instance(np.random.default_rng(2), num_elements=6, group_size=3)
    assert instance.arch.num_groups == 2
    assert instance.channels.bs_ris.shape == (6, 4)
    assert instance.W.shape == (4, instance.geometry.num_users)
    instance.geometry.validate()
