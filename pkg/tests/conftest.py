from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from loom_main.main_agents import model_core
from loom_main.main_agents.model_store import save_model
from loom_main.models.models_graph import Element, ElementKind, Layer, RequirementSubkind
from loom_main.stores.isb_fixture import RMF_ROOT_ID, build_isb_model

TESTS_DIR = Path(__file__).parent

settings.register_profile(
    "loom",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("loom")


@pytest.fixture
def data_dir() -> Path:
    return TESTS_DIR / "data"


@pytest.fixture
def golden_dir() -> Path:
    return TESTS_DIR / "golden"


@pytest.fixture
def isb_model():
    return build_isb_model()


@pytest.fixture
def rmf_model():
    """Empty model holding only the RMF root requirement."""
    model = model_core.create_model("rmf-only")
    model_core.add_element(model, Element(
        id=RMF_ROOT_ID, name="NIST RMF", kind=ElementKind.Requirement,
        subkind=RequirementSubkind.Cybersecurity, layer_tags={Layer.Requirements},
    ))
    return model


@pytest.fixture
def isb_file(tmp_path, isb_model):
    return save_model(isb_model, tmp_path / "isb.json")
