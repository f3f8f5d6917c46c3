import pytest
import os
import sys
from pathlib import Path

# Add project root to path if not already there
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.core.models import DeployConfig, HardwareSpec, ModelSpec
from app.sim.ToyLM import ToyLM

FIXTURES = Path(project_root) / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def tiny_spec():
    return ModelSpec(h=4, h_kv=2, h_mlp=8, l=1, V=10, L_d=1, D=1, n_h=2)


@pytest.fixture
def qwen_spec():
    return ModelSpec(h=8192, h_kv=1024, h_mlp=29568, l=80, V=152064, L_d=1, D=5, n_h=64)


@pytest.fixture
def tiny_hw():
    return HardwareSpec(P_peak=400, B_mem=100)


@pytest.fixture
def h800():
    return HardwareSpec(P_peak=9.89e14, B_mem=3.35e12, dtype_bytes=2)


@pytest.fixture
def tiny_deploy():
    return DeployConfig(b=1, s_pre=0, top_k=1, k=2, t_acc=2)


@pytest.fixture
def markov_pair():
    return ToyLM.load(FIXTURES / "toylm" / "markov_target.txt"), ToyLM.load(FIXTURES / "toylm" / "markov_draft.txt")
