import pytest

from src.core.geometry.mesh import build_mesh
from src.core.geometry.registry import build_spec
from src.core.spectral.dirichlet import EnergyForm, spectral_decompose


@pytest.fixture(scope="session")
def sg_spec():
    return build_spec("sg")


@pytest.fixture(scope="session")
def vicsek_spec():
    return build_spec("vicsek")


@pytest.fixture(scope="session")
def sg_mesh(sg_spec):
    """SG 4 层网格，123 个顶点"""
    return build_mesh(sg_spec, 4)


@pytest.fixture(scope="session")
def vicsek_mesh(vicsek_spec):
    """Vicsek 3 层网格，376 个顶点"""
    return build_mesh(vicsek_spec, 3)


@pytest.fixture(scope="session")
def sg_spectral(sg_mesh):
    return spectral_decompose(EnergyForm(sg_mesh))


@pytest.fixture(scope="session")
def vicsek_spectral(vicsek_mesh):
    return spectral_decompose(EnergyForm(vicsek_mesh))
