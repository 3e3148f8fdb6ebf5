"""Numerical core: LSTM stack, fully connected head, exact gradients.

The sequence kernels have two interchangeable implementations: a compiled
extension and a pure numpy fallback (see .backend). Everything else is
plain numpy.
"""

from .params import (  # noqa: F401
    GATE_ORDER,
    DenseParams,
    LstmLayerParams,
    ManeuverModelParams,
    ModelConfig,
    init_params,
)
from .model import (  # noqa: F401
    backward,
    forward,
    lstm_cell_forward,
    softmax_cross_entropy,
)
from .optim import AdamState, adam_step, init_adam_state, sgd_step  # noqa: F401
from .backend import available_backends, backend_name, set_backend  # noqa: F401
