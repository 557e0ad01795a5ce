import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fd_check(fn, x, eps=1e-6, idx=None):
    """Central-difference gradient of scalar ``fn`` at tensor ``x`` (double) vs autograd.

    Returns the norm-wise relative error over the checked entries.
    """
    x = x.detach().clone().double().requires_grad_(True)
    (g,) = torch.autograd.grad(fn(x), x)
    flat = x.detach().reshape(-1)
    idx = range(flat.numel()) if idx is None else idx
    num, ana = [], []
    for i in idx:
        xp = flat.clone()
        xp[i] += eps
        xm = flat.clone()
        xm[i] -= eps
        with torch.no_grad():
            fp = fn(xp.view_as(x)).item()
            fm = fn(xm.view_as(x)).item()
        num.append((fp - fm) / (2 * eps))
        ana.append(g.reshape(-1)[i].item())
    num, ana = np.array(num), np.array(ana)
    scale = max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)
    return np.linalg.norm(num - ana) / scale, np.linalg.norm(ana)


def param_fd(model, loss_fn, rng, per_tensor=2, eps=1e-6):
    """Central differences on sampled entries of every parameter vs autograd."""
    model.zero_grad()
    loss_fn().backward()
    num, ana = [], []
    with torch.no_grad():
        for p in model.parameters():
            flat = p.view(-1)
            for i in rng.choice(flat.numel(), size=min(per_tensor, flat.numel()), replace=False):
                orig = flat[i].item()
                flat[i] = orig + eps
                fp = loss_fn().item()
                flat[i] = orig - eps
                fm = loss_fn().item()
                flat[i] = orig
                num.append((fp - fm) / (2 * eps))
                ana.append(p.grad.view(-1)[i].item())
    num, ana = np.array(num), np.array(ana)
    return np.linalg.norm(num - ana) / max(np.linalg.norm(num), 1e-12), np.linalg.norm(ana)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, ok, detail)``; asserts ``ok``."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
