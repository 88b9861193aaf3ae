import numpy as np
import pytest

from fgam.model import init_params
from fgam.persistence import bundle_from_prepared, load_model, save_model
from fgam.pipeline import prepare
from fgam.synthetic import default_interaction_spec, generate


@pytest.fixture(scope="session")
def demo_prepared():
    dataset, truth = generate(default_interaction_spec(0.2), 400, seed=77)
    return prepare(dataset, (0.7, 0.1, 0.2), seed=77), dataset, truth


@pytest.fixture(scope="session")
def demo_bundle(demo_prepared, tmp_path_factory):
    """Untrained but fully wired model bundle, saved and reloaded so the
    version hash is real."""
    prepared, _, _ = demo_prepared
    config = prepared.model_config(
        dnnn_depth=2, dnnn_width=4, trunk_widths=(8, 4), dropout_rate=0.1
    )
    params = init_params(config, 123)
    bundle = bundle_from_prepared(params, prepared)
    path = tmp_path_factory.mktemp("model") / "model.json"
    save_model(bundle, path)
    return load_model(path)
