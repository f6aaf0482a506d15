"""Contract a hierarchical model must satisfy to be fitted.

A model consists of a signature (group count n, global dimension d,
local dimensions d_i) plus two differentiable log-density pieces:

    log_prior_global(theta_G)          -> scalar
    log_h_local(i, b_i, theta_G)       -> scalar

where the local piece bundles the latent prior and the group likelihood.
Both must be written entirely in adiff primitives so they evaluate on
floats and on taped variables alike.  Densities may drop constants that
do not depend on the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import adiff


@dataclass(frozen=True)
class ModelSignature:
    n: int
    d: int
    d_i: tuple
    global_names: tuple
    local_names: tuple  # coordinate labels within one local block

    def __post_init__(self):
        if self.n < 0 or self.d < 1:
            raise ValueError("need n >= 0 and d >= 1")
        if len(self.d_i) != self.n or any(di < 1 for di in self.d_i):
            raise ValueError("need one local dimension >= 1 per group")
        if len(self.global_names) != self.d:
            raise ValueError("one label per global coordinate")

    @property
    def dim_local(self):
        return sum(self.d_i)

    @property
    def dim_total(self):
        return self.d + self.dim_local

    def theta_labels(self):
        """Labels for the full theta vector, ordered (theta_G, b_1, ..., b_n)."""
        labels = list(self.global_names)
        for i, di in enumerate(self.d_i):
            for k in range(di):
                base = self.local_names[k] if k < len(self.local_names) else f"b{k}"
                labels.append(f"{base}[{i}]")
        return labels


@dataclass
class HierarchicalModel:
    """Target density pieces plus dimensions."""

    signature: ModelSignature
    log_prior_global: callable
    log_h_local: callable
    kind: str = "custom"
    extra: dict = field(default_factory=dict)

    def split_theta(self, theta):
        """Split a flat theta (theta_G first, then local blocks) into pieces."""
        sig = self.signature
        if len(theta) != sig.dim_total:
            raise ValueError(
                f"theta has length {len(theta)}, expected {sig.dim_total}"
            )
        theta_g = list(theta[: sig.d])
        locals_ = []
        off = sig.d
        for di in sig.d_i:
            locals_.append(list(theta[off : off + di]))
            off += di
        return theta_g, locals_

    def log_h_joint(self, theta):
        """log p(theta_G) + sum_i log h_i(b_i | theta_G)."""
        theta_g, locals_ = self.split_theta(theta)
        total = self.log_prior_global(theta_g)
        for i, b_i in enumerate(locals_):
            total = total + self.log_h_local(i, b_i, theta_g)
        return total

    def grad_log_h_local(self, i, b_i, theta_g):
        """Gradients of log h_i with respect to (b_i, theta_G)."""
        tape = adiff.Tape()
        b_vars = [tape.var(x) for x in b_i]
        g_vars = [tape.var(x) for x in theta_g]
        out = self.log_h_local(i, b_vars, g_vars)
        grads = tape.gradient(out, b_vars + g_vars)
        return grads[: len(b_i)], grads[len(b_i) :]

    def grad_log_h_joint(self, theta):
        """Gradient of the joint log kernel at a flat theta."""
        tape = adiff.Tape()
        t_vars = [tape.var(x) for x in theta]
        out = self.log_h_joint(t_vars)
        return adiff.value(out), tape.gradient(out, t_vars)
