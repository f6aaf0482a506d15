"""The variational family: conditionally structured Gaussian base with
optional local and global skew-symmetric corrections.

Parameter blocks (lambda):

    mu_G               global mean
    vech(T_G*)         global precision Cholesky, log-diagonal coords
    m_i                local means
    T_Gi               global-local coupling blocks (d x d_i)
    f_i                local scale star coordinates
    B_i                conditional scale response, vech(T_i(theta_G)*) =
                       f_i + B_i theta_G

The base family is `gaussian` (B_i frozen at zero, T_i independent of
theta_G) or `csg`.  The skew mode is `none`, `global` (reflect theta_G
using the approximate marginal kernel) or `hierarchical` (global plus
per-group conditional corrections).  Skew corrections add no free
parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import adiff, linalg
from .adiff import TraceInvalidError
from .model import HierarchicalModel, ModelSignature

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)

W_MIN = 1e-300
W_MAX = 1.0 - 1e-16

# star-diagonal magnitude beyond which exp() would overflow
STAR_DIAG_LIMIT = 700.0


# ---------------------------------------------------------------------------
# variants


@dataclass(frozen=True)
class Variant:
    base: str  # "gaussian" | "csg"
    skew: str  # "none" | "global" | "hierarchical"
    learned: bool = False  # skew learned with the parameters vs post-hoc

    def __post_init__(self):
        if self.base not in ("gaussian", "csg"):
            raise ValueError(f"unknown base {self.base!r}")
        if self.skew not in ("none", "global", "hierarchical"):
            raise ValueError(f"unknown skew mode {self.skew!r}")
        if self.skew == "none" and self.learned:
            raise ValueError("learned flag requires a skew correction")
        if self.base == "gaussian" and self.skew == "hierarchical" and self.learned:
            raise ValueError(
                "gaussian base with learned hierarchical skew is not in the ladder"
            )

    @property
    def skewed_global(self):
        return self.skew in ("global", "hierarchical")

    @property
    def skewed_local(self):
        return self.skew == "hierarchical"

    def training_variant(self):
        """The family actually optimized: post-hoc skew drops out."""
        if self.skew == "none" or self.learned:
            return self
        return Variant(self.base, "none", False)


VARIANTS = {
    "G-VA": Variant("gaussian", "none"),
    "G-VA^G-": Variant("gaussian", "global", False),
    "G-VA^G+": Variant("gaussian", "global", True),
    "G-VA^H-": Variant("gaussian", "hierarchical", False),
    "CSG-VA": Variant("csg", "none"),
    "CSG-VA^H-": Variant("csg", "hierarchical", False),
    "GLOSS-VA": Variant("csg", "hierarchical", True),
}

LADDER = tuple(VARIANTS)


def variant_by_name(name):
    try:
        return VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")


def variant_name(variant):
    for name, v in VARIANTS.items():
        if v == variant:
            return name
    return f"{variant.base}/{variant.skew}/{'learned' if variant.learned else 'posthoc'}"


def base_name(name):
    """Name of the fitted base a post-hoc variant wraps."""
    v = variant_by_name(name)
    tv = v.training_variant()
    return variant_name(tv)


def posthoc_wrap(fitted_variant, skew):
    """View an already-fitted family under a post-hoc skew correction.

    The variational parameters are untouched; only sampling and density
    evaluation change.
    """
    fitted = (
        variant_by_name(fitted_variant)
        if isinstance(fitted_variant, str)
        else fitted_variant
    )
    if fitted.skew != "none":
        raise ValueError("post-hoc wrapping starts from an unskewed base fit")
    return Variant(fitted.base, skew, False)


# ---------------------------------------------------------------------------
# parameters


@dataclass
class VariationalParams:
    """Full lambda, stored blockwise with generic scalar entries."""

    signature: ModelSignature
    mu_g: list
    t_g_star: list
    m: list  # per group
    t_gi: list  # per group, Matrix d x d_i
    f: list  # per group, packed length d_i (d_i + 1) / 2
    b: list  # per group, Matrix nh_i x d

    @classmethod
    def zeros_like_signature(cls, sig: ModelSignature):
        d = sig.d
        return cls(
            signature=sig,
            mu_g=[0.0] * d,
            t_g_star=[0.0] * linalg.packed_length(d),
            m=[[0.0] * di for di in sig.d_i],
            t_gi=[linalg.Matrix.zeros(d, di) for di in sig.d_i],
            f=[[0.0] * linalg.packed_length(di) for di in sig.d_i],
            b=[linalg.Matrix.zeros(linalg.packed_length(di), d) for di in sig.d_i],
        )

    @staticmethod
    def layout(sig: ModelSignature):
        """(block name, offset, length) for the flat packed vector."""
        d = sig.d
        blocks = [("mu_G", d), ("vech_T_G_star", linalg.packed_length(d))]
        for i, di in enumerate(sig.d_i):
            blocks.append((f"m[{i}]", di))
        for i, di in enumerate(sig.d_i):
            blocks.append((f"vec_T_G{i}", d * di))
        for i, di in enumerate(sig.d_i):
            blocks.append((f"f[{i}]", linalg.packed_length(di)))
        for i, di in enumerate(sig.d_i):
            blocks.append((f"vec_B[{i}]", linalg.packed_length(di) * d))
        out = []
        off = 0
        for name, length in blocks:
            out.append((name, off, length))
            off += length
        return out

    @staticmethod
    def packed_size(sig: ModelSignature):
        name, off, length = VariationalParams.layout(sig)[-1]
        return off + length

    def pack(self):
        flat = list(self.mu_g) + list(self.t_g_star)
        for mi in self.m:
            flat.extend(mi)
        for tgi in self.t_gi:
            flat.extend(linalg.vec(tgi))
        for fi in self.f:
            flat.extend(fi)
        for bi in self.b:
            flat.extend(linalg.vec(bi))
        return flat

    @classmethod
    def unpack(cls, flat, sig: ModelSignature):
        if len(flat) != cls.packed_size(sig):
            raise ValueError("packed vector length mismatch")
        d = sig.d
        pos = 0

        def take(k):
            nonlocal pos
            out = list(flat[pos : pos + k])
            pos += k
            return out

        mu_g = take(d)
        t_g_star = take(linalg.packed_length(d))
        m = [take(di) for di in sig.d_i]
        t_gi = []
        for di in sig.d_i:
            cols = take(d * di)
            mat = linalg.Matrix.zeros(d, di)
            k = 0
            for j in range(di):
                for i in range(d):
                    mat[i, j] = cols[k]
                    k += 1
            t_gi.append(mat)
        f = [take(linalg.packed_length(di)) for di in sig.d_i]
        b = []
        for di in sig.d_i:
            nh = linalg.packed_length(di)
            cols = take(nh * d)
            mat = linalg.Matrix.zeros(nh, d)
            k = 0
            for j in range(d):
                for i in range(nh):
                    mat[i, j] = cols[k]
                    k += 1
            b.append(mat)
        return cls(sig, mu_g, t_g_star, m, t_gi, f, b)

    def copy_values(self):
        return VariationalParams.unpack(
            [adiff.value(x) for x in self.pack()], self.signature
        )

    @staticmethod
    def frozen_mask(sig: ModelSignature, variant: Variant):
        """Boolean mask over the flat vector; True marks frozen coords."""
        mask = np.zeros(VariationalParams.packed_size(sig), dtype=bool)
        if variant.base == "gaussian":
            for name, off, length in VariationalParams.layout(sig):
                if name.startswith("vec_B"):
                    mask[off : off + length] = True
        return mask

    @staticmethod
    def n_free(sig: ModelSignature, variant: Variant):
        """Free parameter count; skew corrections add none."""
        return int((~VariationalParams.frozen_mask(sig, variant)).sum())


def save_params(params: VariationalParams, path, meta=None):
    """Serialize lambda as JSON: block layout plus bit-exact hex floats."""
    sig = params.signature
    payload = {
        "layout": [
            {"name": name, "offset": off, "length": length}
            for name, off, length in VariationalParams.layout(sig)
        ],
        "signature": {
            "n": sig.n,
            "d": sig.d,
            "d_i": list(sig.d_i),
            "global_names": list(sig.global_names),
            "local_names": list(sig.local_names),
        },
        "values_hex": [float(v).hex() for v in params.pack()],
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_params(path):
    with open(path) as fh:
        payload = json.load(fh)
    s = payload["signature"]
    sig = ModelSignature(
        n=s["n"],
        d=s["d"],
        d_i=tuple(s["d_i"]),
        global_names=tuple(s["global_names"]),
        local_names=tuple(s["local_names"]),
    )
    flat = [float.fromhex(h) for h in payload["values_hex"]]
    return VariationalParams.unpack(flat, sig), payload.get("meta", {})


# ---------------------------------------------------------------------------
# conditional maps


@dataclass
class CondScale:
    """Local precision Cholesky factor plus its log diagonal."""

    tri: linalg.LowerTriangular
    log_diag: list


def global_scale(params: VariationalParams) -> CondScale:
    d = params.signature.d
    tri = linalg.star_inverse(linalg.unvech(params.t_g_star, d))
    log_diag = [params.t_g_star[k] for k in linalg.diag_indices_packed(d)]
    return CondScale(tri, log_diag)


def t_i_of(params: VariationalParams, i, theta_g, base="csg") -> CondScale:
    """Conditional local scale: vech(T_i(theta_G)*) = f_i + B_i theta_G."""
    di = params.signature.d_i[i]
    star_coords = list(params.f[i])
    if base == "csg":
        resp = params.b[i].matvec(theta_g)
        star_coords = [s + r for s, r in zip(star_coords, resp)]
    diag_idx = linalg.diag_indices_packed(di)
    for k in diag_idx:
        if abs(adiff.value(star_coords[k])) > STAR_DIAG_LIMIT:
            raise TraceInvalidError("t_i_star_diag", adiff.value(star_coords[k]))
    tri = linalg.star_inverse(linalg.LowerTriangular(di, star_coords))
    log_diag = [star_coords[k] for k in diag_idx]
    return CondScale(tri, log_diag)


def mu_i_of(params: VariationalParams, i, theta_g, scale: CondScale):
    """Conditional local mean m_i + T_i^-T T_Gi' (mu_G - theta_G)."""
    diff = [mg - tg for mg, tg in zip(params.mu_g, theta_g)]
    proj = params.t_gi[i].transpose_matvec(diff)
    shift = linalg.tri_solve(scale.tri, proj, transpose=True)
    return [m + s for m, s in zip(params.m[i], shift)]


def gaussian_logpdf(x, mu, scale: CondScale):
    """log phi(x; mu, (TT')^-1) through the precision factor T."""
    diff = [xi - mi for xi, mi in zip(x, mu)]
    half = scale.tri.to_matrix().transpose_matvec(diff)
    val = -0.5 * len(x) * LOG_2PI - 0.5 * linalg.sq_norm(half)
    for ld in scale.log_diag:
        val = val + ld
    return val


def clamp_unit(w):
    """Guard against log of an exact 0/1 weight in far tails."""
    v = adiff.value(w)
    if v < W_MIN:
        return W_MIN
    if v > W_MAX:
        return W_MAX
    return w


# ---------------------------------------------------------------------------
# skewing functions


def w_local(model: HierarchicalModel, params, i, b_i, theta_g, scale=None, mu_i=None):
    """Optimal local skew weight sigmoid(log h_i(b) - log h_i(reflection))."""
    if scale is None:
        scale = t_i_of(params, i, theta_g, base="csg")
    if mu_i is None:
        mu_i = mu_i_of(params, i, theta_g, scale)
    reflected = [2.0 * m - b for m, b in zip(mu_i, b_i)]
    delta = model.log_h_local(i, b_i, theta_g) - model.log_h_local(
        i, reflected, theta_g
    )
    return adiff.sigmoid(delta)


def log_h_tilde(model: HierarchicalModel, params, theta_g, base="csg"):
    """Approximate log marginal kernel of theta_G.

    log p(theta_G) plus, per group, the local kernel at the conditional
    mean with the Gaussian normalization correction.
    """
    total = model.log_prior_global(theta_g)
    for i in range(model.signature.n):
        scale = t_i_of(params, i, theta_g, base=base)
        mu_i = mu_i_of(params, i, theta_g, scale)
        total = total + 0.5 * model.signature.d_i[i] * LOG_2PI
        for ld in scale.log_diag:
            total = total - ld
        total = total + model.log_h_local(i, mu_i, theta_g)
    return total


def w_global(model: HierarchicalModel, params, theta_g, base="csg", log_ht=None):
    """Global skew weight from the approximate marginal kernel."""
    if log_ht is None:
        log_ht = lambda tg: log_h_tilde(model, params, tg, base=base)
    reflected = [2.0 * mg - tg for mg, tg in zip(params.mu_g, theta_g)]
    return adiff.sigmoid(log_ht(theta_g) - log_ht(reflected))


# ---------------------------------------------------------------------------
# joint density


def log_q(model: HierarchicalModel, params, variant: Variant, theta):
    """Log density of the variational family at a full theta."""
    theta_g, locals_ = model.split_theta(theta)
    g_scale = global_scale(params)
    val = gaussian_logpdf(theta_g, params.mu_g, g_scale)
    if variant.skewed_global:
        w = clamp_unit(w_global(model, params, theta_g, base=variant.base))
        val = val + LOG_2 + adiff.log(w)
    for i, b_i in enumerate(locals_):
        scale = t_i_of(params, i, theta_g, base=variant.base)
        mu_i = mu_i_of(params, i, theta_g, scale)
        val = val + gaussian_logpdf(b_i, mu_i, scale)
        if variant.skewed_local:
            w_i = clamp_unit(
                w_local(model, params, i, b_i, theta_g, scale=scale, mu_i=mu_i)
            )
            val = val + LOG_2 + adiff.log(w_i)
    return val


# ---------------------------------------------------------------------------
# sampling (rejection-free)


@dataclass
class Draw:
    theta_g: np.ndarray
    b: list
    reflected_global: bool
    reflected_local: list
    eps_g: np.ndarray
    eps: list
    u_g: float
    u: list

    def flat(self):
        parts = [self.theta_g] + [np.asarray(bi) for bi in self.b]
        return np.concatenate(parts)


def stream_rng(seed, draw_index, stream):
    """Counter-based generator keyed by (seed, draw index, stream index).

    Stream 0 is the global block; stream i+1 is group i.  Identical keys
    give identical draws whether groups are sampled serially or in
    parallel.
    """
    key = np.array(
        [np.uint64(seed), np.uint64((int(draw_index) << 20) + int(stream))],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def sample(model: HierarchicalModel, params, variant: Variant, seed, draw_index=0):
    """One draw via the rejection-free reflect-or-keep scheme."""
    sig = model.signature
    g_scale = global_scale(params)
    rng = stream_rng(seed, draw_index, 0)
    eps_g = rng.standard_normal(sig.d)
    shift = linalg.tri_solve(g_scale.tri, list(eps_g), transpose=True)
    theta_g = [mg + s for mg, s in zip(params.mu_g, shift)]
    u_g = float(rng.random())
    reflected_global = False
    if variant.skewed_global:
        w = adiff.value(w_global(model, params, theta_g, base=variant.base))
        if u_g > w:
            theta_g = [2.0 * mg - tg for mg, tg in zip(params.mu_g, theta_g)]
            reflected_global = True
    bs, eps_list, u_list, refl_list = [], [], [], []
    for i in range(sig.n):
        rng_i = stream_rng(seed, draw_index, i + 1)
        eps_i = rng_i.standard_normal(sig.d_i[i])
        scale = t_i_of(params, i, theta_g, base=variant.base)
        mu_i = mu_i_of(params, i, theta_g, scale)
        shift_i = linalg.tri_solve(scale.tri, list(eps_i), transpose=True)
        b_i = [m + s for m, s in zip(mu_i, shift_i)]
        u_i = float(rng_i.random())
        reflected = False
        if variant.skewed_local:
            w_i = adiff.value(
                w_local(model, params, i, b_i, theta_g, scale=scale, mu_i=mu_i)
            )
            if u_i > w_i:
                b_i = [2.0 * m - b for m, b in zip(mu_i, b_i)]
                reflected = True
        bs.append(np.array([adiff.value(x) for x in b_i]))
        eps_list.append(eps_i)
        u_list.append(u_i)
        refl_list.append(reflected)
    return Draw(
        theta_g=np.array([adiff.value(x) for x in theta_g]),
        b=bs,
        reflected_global=reflected_global,
        reflected_local=refl_list,
        eps_g=eps_g,
        eps=eps_list,
        u_g=u_g,
        u=u_list,
    )


def sample_matrix(model, params, variant, n_draws, seed):
    """Stack n_draws flat draws, rows ordered by draw index."""
    dim = model.signature.dim_total
    out = np.empty((n_draws, dim))
    for j in range(n_draws):
        out[j] = sample(model, params, variant, seed, j).flat()
    return out
