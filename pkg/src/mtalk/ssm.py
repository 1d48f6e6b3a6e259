"""Selective state-space core: parameter selection, discretization, scan, and
the gated Mamba block.

Shapes follow (batch B, length M, inner width E, state size N). The state
matrix is diagonal and stored as its (E, N) diagonal, A = -exp(A_log).
"""

from __future__ import annotations

import numpy as np

from . import ndiff as nd
from .ndiff import Array, Conv1d, Linear, Module, Parameter

MODES = ("euler", "zoh")


class SsmParams(Module):
    """Weights of one gated selective-scan block (D -> E -> D)."""

    def __init__(self, model_dim: int, inner_dim: int, state_dim: int, rng: np.random.Generator,
                 conv_kernel: int = 4, mode: str = "euler", project_out: bool = True):
        if mode not in MODES:
            raise ValueError(f"unknown discretization mode {mode!r}; expected one of {MODES}")
        self.proj_in_x = Linear(model_dim, inner_dim, rng)
        self.proj_in_z = Linear(model_dim, inner_dim, rng)
        # depthwise and causal: left padding only
        self.conv = Conv1d(inner_dim, inner_dim, conv_kernel, rng,
                           padding=(conv_kernel - 1, 0), groups=inner_dim)
        self.proj_delta = Linear(inner_dim, inner_dim, rng, bias=False)
        self.delta_bias = Parameter(np.zeros(inner_dim))
        self.proj_B = Linear(inner_dim, state_dim, rng, bias=False)
        self.proj_C = Linear(inner_dim, state_dim, rng, bias=False)
        self.A_log = Parameter(np.log(np.tile(np.arange(1.0, state_dim + 1.0), (inner_dim, 1))))
        # callers that merge several gated paths themselves skip this projection
        self.proj_out = Linear(inner_dim, model_dim, rng) if project_out else None
        self._mode = mode
        self._dims = (model_dim, inner_dim, state_dim)

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def dims(self) -> tuple[int, int, int]:
        return self._dims

    def A(self) -> Array:
        return -nd.exp(self.A_log)

    def __call__(self, tokens) -> Array:
        return mamba_block(tokens, self)


def select_parameters(x, p: SsmParams) -> tuple[Array, Array, Array]:
    """Input-dependent step size and projections: (delta, B, C)."""
    delta = nd.softplus(nd.matmul(x, p.proj_delta.weight) + p.delta_bias)
    return delta, p.proj_B(x), p.proj_C(x)


def discretize(delta, A, Bmat, mode: str = "euler") -> tuple[Array, Array]:
    """Per-step (A_bar, B_bar), each shaped (..., E, N).

    ``euler`` uses B_bar = delta * B; ``zoh`` uses the exact zero-order hold
    B_bar = (exp(dA) - 1) / dA * delta * B, whose dA -> 0 limit is delta * B.
    """
    delta, A, Bmat = nd.as_array(delta), nd.as_array(A), nd.as_array(Bmat)
    if not np.all(delta.data > 0):
        raise ValueError("discretize needs a strictly positive step size")
    if mode not in MODES:
        raise ValueError(f"unknown discretization mode {mode!r}")
    d = delta.reshape(delta.shape + (1,))
    dA = d * A
    a_bar = nd.exp(dA)
    b = Bmat.reshape(Bmat.shape[:-1] + (1, Bmat.shape[-1]))
    b_bar = d * b if mode == "euler" else nd.exprel(dA) * d * b
    return a_bar, b_bar


def scan(a_bar, b_bar, c, x) -> Array:
    """Linear-time recurrence h_t = A_t * h_{t-1} + B_t x_t, y_t = sum_n C_t h_t.

    a_bar, b_bar: (B, M, E, N); c: (B, M, N); x: (B, M, E). The first state
    has no predecessor: h_0 = B_0 x_0.
    """
    a_bar, b_bar, c, x = (nd.as_array(v) for v in (a_bar, b_bar, c, x))
    bsz, length, inner, state = a_bar.shape
    if b_bar.shape != a_bar.shape or c.shape != (bsz, length, state) or x.shape != (bsz, length, inner):
        raise nd.ShapeError(f"scan: inconsistent shapes A{a_bar.shape} B{b_bar.shape} "
                            f"C{c.shape} x{x.shape}")
    A, Bb, C, X = a_bar.data, b_bar.data, c.data, x.data
    h = Bb * X[..., None]
    for t in range(1, length):
        h[:, t] += A[:, t] * h[:, t - 1]
    y = np.einsum("bmen,bmn->bme", h, C)

    def bw(gy):
        gc = np.einsum("bme,bmen->bmn", gy, h)
        gh = gy[..., None] * C[:, :, None, :]
        for t in range(length - 2, -1, -1):
            gh[:, t] += A[:, t + 1] * gh[:, t + 1]
        ga = np.zeros_like(A)
        ga[:, 1:] = gh[:, 1:] * h[:, :-1]
        gb = gh * X[..., None]
        gx = np.einsum("bmen,bmen->bme", gh, Bb)
        return ga, gb, gc, gx

    return nd.record(y, (a_bar, b_bar, c, x), bw, "scan")


def gated_scan(tokens, p: SsmParams) -> Array:
    """Selective scan of the conv branch gated by SiLU of the z branch; (B, M, D) -> (B, M, E)."""
    tokens = nd.as_array(tokens)
    x = nd.silu(p.conv(p.proj_in_x(tokens)))
    z = p.proj_in_z(tokens)
    delta, Bmat, Cmat = select_parameters(x, p)
    a_bar, b_bar = discretize(delta, p.A(), Bmat, p.mode)
    return scan(a_bar, b_bar, Cmat, x) * nd.silu(z)


def mamba_block(tokens, p: SsmParams) -> Array:
    """Gated selective-scan block with residual; (B, M, D) -> (B, M, D)."""
    if p.proj_out is None:
        raise ValueError("mamba_block needs parameters built with project_out=True")
    tokens = nd.as_array(tokens)
    return p.proj_out(gated_scan(tokens, p)) + tokens
