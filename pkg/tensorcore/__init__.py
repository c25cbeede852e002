from tensorcore.tensor import (Graph, Tensor, backward, get_default_dtype, no_grad,
                               set_default_dtype)
from tensorcore import ops

__all__ = ['Graph', 'Tensor', 'backward', 'get_default_dtype', 'no_grad', 'ops', 'set_default_dtype']
