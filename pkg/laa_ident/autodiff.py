"""
Automatic Differentiation Helpers
=================================

Thin layer over torch's reverse-mode tape used by the PINN identifier:
- Gradients of a scalar loss with respect to parameter tensors
- Time derivatives of network outputs for the physics residuals (reverse and forward mode)
- Central finite-difference checks for gradient verification
"""

import logging
from typing import Callable, Dict, List, Sequence, Tuple, Union

import torch

from .exceptions import UnsupportedOperationError

logger = logging.getLogger(__name__)

TensorOrSeq = Union[torch.Tensor, Sequence[torch.Tensor]]


def _as_list(inputs: TensorOrSeq) -> List[torch.Tensor]:
    return [inputs] if isinstance(inputs, torch.Tensor) else list(inputs)


def autodiff_grad(output: torch.Tensor, inputs: TensorOrSeq,
                  create_graph: bool = False) -> List[torch.Tensor]:
    """
    Reverse-mode gradient of a scalar output

    Args:
        output: Scalar tensor recorded on the autograd tape
        inputs: Tensor(s) with requires_grad set
        create_graph: Keep the graph so the gradient can be differentiated again

    Returns:
        One gradient tensor per input, same shapes as the inputs
    """
    inputs = _as_list(inputs)
    if output.numel() != 1:
        raise UnsupportedOperationError(f"gradient needs a scalar output, got shape {tuple(output.shape)}")
    if output.grad_fn is None and not output.requires_grad:
        raise UnsupportedOperationError("output has no differentiable path to the inputs")
    for x in inputs:
        if not x.requires_grad:
            raise UnsupportedOperationError("input does not require grad")

    grads = torch.autograd.grad(output, inputs, create_graph=create_graph, allow_unused=True)
    missing = [i for i, g in enumerate(grads) if g is None]
    if missing:
        raise UnsupportedOperationError(f"inputs {missing} are not connected to the output")
    return list(grads)


def time_derivative(outputs: torch.Tensor, t: torch.Tensor, create_graph: bool = True) -> torch.Tensor:
    """
    d(outputs)/dt for a batch of time samples

    ``outputs`` is T x m, produced row-wise from ``t`` (T x 1); each row only
    depends on its own time sample, so one backward pass per column suffices.
    """
    if not t.requires_grad:
        raise UnsupportedOperationError("time tensor does not require grad")
    columns = []
    for j in range(outputs.shape[1]):
        (col,) = torch.autograd.grad(outputs[:, j].sum(), t, create_graph=create_graph, allow_unused=True)
        if col is None:
            raise UnsupportedOperationError(f"output column {j} does not depend on time")
        columns.append(col[:, 0])
    return torch.stack(columns, dim=1)


def forward_time_derivative(fn: Callable[[torch.Tensor], torch.Tensor], t: torch.Tensor,
                            create_graph: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    fn(t) and its derivative along t in one Jacobian-vector product

    Rows of fn(t) must depend only on their own time sample, so the product
    with a ones tangent is the per-row derivative for every output column at
    once. With create_graph the derivative stays differentiable with respect
    to the parameters fn closes over.
    """
    if t.dim() != 2 or t.shape[1] != 1:
        raise UnsupportedOperationError(f"time must be a T x 1 column, got shape {tuple(t.shape)}")
    outputs, derivative = torch.autograd.functional.jvp(fn, t, torch.ones_like(t), create_graph=create_graph)
    return outputs, derivative


def finite_difference_check(fn: Callable[[], torch.Tensor], params: Sequence[torch.Tensor],
                            h: float = 1e-5) -> Dict[int, float]:
    """
    Compare autograd gradients of fn() against central differences

    Args:
        fn: Closure returning a scalar loss from the current parameter values
        params: Leaf tensors to perturb in place
        h: Finite-difference step

    Returns:
        {param index: norm-wise relative error}
    """
    params = list(params)
    loss = fn()
    analytic = autodiff_grad(loss, params)
    errors = {}
    for k, p in enumerate(params):
        numeric = torch.zeros_like(p).view(-1)
        flat = p.data.view(-1)
        for i in range(flat.numel()):
            saved = flat[i].item()
            flat[i] = saved + h
            up = fn().item()
            flat[i] = saved - h
            down = fn().item()
            flat[i] = saved
            numeric[i] = (up - down) / (2 * h)
        numeric = numeric.view_as(p)
        with torch.no_grad():
            scale = max(torch.linalg.norm(numeric).item(), torch.linalg.norm(analytic[k]).item(), 1e-12)
            errors[k] = torch.linalg.norm(numeric - analytic[k]).item() / scale
    logger.debug(f"Finite-difference check: {errors}")
    return errors
