from __future__ import annotations

import pytest

from fado import instancegen
from fado.model import design_from_dict, device_from_dict, qor_from_dict


@pytest.fixture
def toy_docs():
    return instancegen.toy_instance()


@pytest.fixture
def toy(toy_docs):
    device_doc, design_doc, qor_doc = toy_docs
    graph = design_from_dict(design_doc)
    return device_from_dict(device_doc), graph, qor_from_dict(qor_doc, graph)
