"""Central finite-difference gradient checking against torch autograd."""

import torch

EPS = 1e-6
RTOL = 1e-4
ATOL = 1e-8


def finite_difference_grads(model: torch.nn.Module, loss_fn) -> dict[str, torch.Tensor]:
    """Central differences of loss_fn() w.r.t. every model parameter.

    The model must be in float64 and eval mode; loss_fn re-runs the full
    forward pass on each call.
    """
    grads: dict[str, torch.Tensor] = {}
    for name, param in model.named_parameters():
        flat = param.data.view(-1)
        fd = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + EPS
            plus = loss_fn().item()
            flat[i] = orig - EPS
            minus = loss_fn().item()
            flat[i] = orig
            fd[i] = (plus - minus) / (2.0 * EPS)
        grads[name] = fd.view_as(param)
    return grads


def analytic_grads(model: torch.nn.Module, loss_fn) -> dict[str, torch.Tensor]:
    model.zero_grad(set_to_none=True)
    loss_fn().backward()
    return {
        name: (param.grad.clone() if param.grad is not None else torch.zeros_like(param))
        for name, param in model.named_parameters()
    }


def max_relative_error(analytic: dict[str, torch.Tensor], fd: dict[str, torch.Tensor]) -> float:
    """Worst relative disagreement, ignoring entries that agree within ATOL."""
    worst = 0.0
    for name in analytic:
        a, f = analytic[name], fd[name]
        err = (a - f).abs()
        rel = err / torch.maximum(a.abs(), f.abs()).clamp_min(1e-12)
        rel = rel.masked_fill(err <= ATOL, 0.0)
        worst = max(worst, rel.max().item())
    return worst


def check_gradients(model: torch.nn.Module, loss_fn) -> float:
    """Returns the worst relative error between autograd and central FD."""
    analytic = analytic_grads(model, loss_fn)
    fd = finite_difference_grads(model, loss_fn)
    return max_relative_error(analytic, fd)
