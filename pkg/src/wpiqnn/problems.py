"""
Benchmark PDEs: exact solutions, forcing terms, and residual descriptors.

Every problem lives on one or two rectangles in (x, y) where y is time for
evolution problems. A residual is a linear combination of field derivative
arrays plus an optional pointwise power term, minus a target:

    r = sum_i a_i * V[key_i] + g * V[key_p]**k - target

where ``key = (subdomain, point_set, field, (dx, dy))``. This covers every
loss term the benchmarks need, and its pullback is closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

PI = np.pi
COMPONENTS = ("pde", "ic", "bc", "interface")


@dataclass
class Residual:
    component: str
    terms: list  # [(coefficient, key)]
    target: np.ndarray
    power: tuple | None = None  # (coefficient, key, exponent)
    label: str = ""

    @property
    def keys(self):
        keys = [k for _, k in self.terms]
        if self.power is not None:
            keys.append(self.power[1])
        return keys


@dataclass
class ResidualEvaluation:
    residuals: list  # arrays aligned with the Residual descriptors
    losses: dict  # component -> mean-squared total (unweighted)


def _check_available(residuals, values):
    for res in residuals:
        for key in res.keys:
            if key not in values:
                sub, name, f, order = key
                raise ConfigurationError(
                    f"residual {res.label or res.component!r} needs derivative order {order} of field {f} "
                    f"on point set {name!r} (subdomain {sub}), which was not evaluated"
                )


def evaluate_residuals(residuals, values) -> list:
    _check_available(residuals, values)
    out = []
    for res in residuals:
        r = -np.asarray(res.target, dtype=np.float64)
        for coef, key in res.terms:
            r = r + coef * values[key]
        if res.power is not None:
            coef, key, k = res.power
            r = r + coef * values[key] ** k
        out.append(r)
    return out


def residual_vjp(residuals, values, cotangents) -> dict:
    """Pull per-residual cotangents back onto the field arrays in ``values``."""
    grads = {}
    for res, w in zip(residuals, cotangents):
        for coef, key in res.terms:
            grads[key] = grads.get(key, 0.0) + coef * w
        if res.power is not None:
            coef, key, k = res.power
            grads[key] = grads.get(key, 0.0) + coef * k * values[key] ** (k - 1) * w
    return grads


def residual_and_vjp(residuals, values, weights=None):
    """Residuals, per-component mean-squared losses, and the loss pullback.

    The returned cotangents are d(sum_c weight_c * loss_c)/dV for every field
    array ``V`` the residuals consume.
    """
    weights = weights or {}
    rs = evaluate_residuals(residuals, values)
    losses = {c: 0.0 for c in COMPONENTS}
    cots = []
    for res, r in zip(residuals, rs):
        if r.size == 0:  # empty point set contributes nothing
            cots.append(r)
            continue
        losses[res.component] += float(np.mean(r * r))
        cots.append(weights.get(res.component, 1.0) * 2.0 * r / r.size)
    return ResidualEvaluation(rs, losses), residual_vjp(residuals, values, cots)


def requests_for(residuals) -> dict:
    """(subdomain, point_set) -> sorted list of (field, order) needed."""
    req = {}
    for res in residuals:
        for sub, name, f, order in res.keys:
            req.setdefault((sub, name), set()).add((f, order))
    return {k: sorted(v) for k, v in req.items()}


def _sin_d(a, phase, x, k):
    """k-th derivative of sin(a x + phase)."""
    return a**k * np.sin(a * x + phase + k * PI / 2)


def _poly_d(coeffs, x, k):
    """k-th derivative of sum_p coeffs[p] x**p."""
    P = np.polynomial.polynomial
    return P.polyval(x, P.polyder(coeffs, k))


@dataclass
class Problem:
    """A benchmark PDE on one or more rectangular subdomains."""

    name: str
    params: dict
    coords: tuple = ("x", "t")
    fields: tuple = ("u",)
    subdomains: list = field(default_factory=list)  # [(lower, upper)]
    boundary_segments: list = field(default_factory=list)  # per subdomain: [(dim, value)]
    has_initial: bool = True
    interface: tuple | None = None  # (dim, value) shared by subdomains 0 and 1

    @property
    def domain(self):
        lo = np.min([s[0] for s in self.subdomains], axis=0)
        hi = np.max([s[1] for s in self.subdomains], axis=0)
        return lo, hi

    def subdomain_of(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if len(self.subdomains) == 1:
            return np.zeros(len(pts), dtype=int)
        dim, value = self.interface
        return (pts[:, dim] > value).astype(int)

    # Problem-specific pieces, overridden below.
    def exact(self, f, points, order=(0, 0), sub=None):
        raise NotImplementedError

    def build_residuals(self, points: dict) -> list:
        raise NotImplementedError

    def manufactured_values(self, residuals, points: dict) -> dict:
        """Field arrays from the analytic exact solution for every key the residuals use."""
        values = {}
        for res in residuals:
            for key in res.keys:
                sub, name, f, order = key
                values[key] = self.exact(f, points[sub, name], order, sub=sub)
        return values


def _xy(points):
    pts = np.asarray(points, dtype=np.float64)
    return pts[:, 0], pts[:, 1]


class HeatConduction(Problem):
    """u_t = eps u_xx + f on (-1,1) x (0,1] with u = (1 - x^2) exp(1/((2t-1)^2 + eps))."""

    def _g(self, t, k):
        eps = self.params["eps"]
        d = 2 * t - 1
        s = d * d + eps
        g = np.exp(1 / s)
        if k == 0:
            return g
        g1 = -4 * d * g / s**2
        if k == 1:
            return g1
        return -4 / s**2 * (2 * g + d * g1 - 8 * d * d * g / s)

    def exact(self, f, points, order=(0, 0), sub=None):
        x, t = _xy(points)
        return _poly_d([1.0, 0.0, -1.0], x, order[0]) * self._g(t, order[1])

    def forcing(self, points):
        eps = self.params["eps"]
        x, t = _xy(points)
        d = 2 * t - 1
        s = d * d + eps
        g = np.exp(1 / s)
        return (1 - x * x) * (-4 * d * g / s**2) + 2 * eps * g

    def initial(self, x):
        return (1 - x * x) * np.exp(1 / (1 + self.params["eps"]))

    def build_residuals(self, points):
        eps = self.params["eps"]
        return [
            Residual("pde", [(1.0, (0, "collocation", 0, (0, 1))), (-eps, (0, "collocation", 0, (2, 0)))],
                     self.forcing(points[0, "collocation"]), label="heat"),
            Residual("ic", [(1.0, (0, "initial", 0, (0, 0)))], self.initial(points[0, "initial"][:, 0]), label="u0"),
            Residual("bc", [(1.0, (0, "boundary", 0, (0, 0)))], np.zeros(len(points[0, "boundary"])), label="u=0"),
        ]


class Helmholtz(Problem):
    """u_xx + u_yy + kappa^2 u = f on (-1,1)^2 with u = sin(pi b1 x) sin(pi b2 y)."""

    def exact(self, f, points, order=(0, 0), sub=None):
        x, y = _xy(points)
        b1, b2 = self.params["b1"], self.params["b2"]
        return _sin_d(PI * b1, 0.0, x, order[0]) * _sin_d(PI * b2, 0.0, y, order[1])

    def forcing(self, points):
        x, y = _xy(points)
        k, b1, b2 = self.params["kappa"], self.params["b1"], self.params["b2"]
        return (k * k - PI**2 * (b1 * b1 + b2 * b2)) * np.sin(PI * b1 * x) * np.sin(PI * b2 * y)

    def build_residuals(self, points):
        k2 = self.params["kappa"] ** 2
        col = (0, "collocation", 0)
        return [
            Residual("pde", [(1.0, col + ((2, 0),)), (1.0, col + ((0, 2),)), (k2, col + ((0, 0),))],
                     self.forcing(points[0, "collocation"]), label="helmholtz"),
            Residual("bc", [(1.0, (0, "boundary", 0, (0, 0)))], self.exact(0, points[0, "boundary"]), label="u=g"),
        ]


class KleinGordon(Problem):
    """u_tt + alpha u_xx + beta u + gamma u^k = f, exact u = x cos(a pi t) + (x t)^3."""

    def exact(self, f, points, order=(0, 0), sub=None):
        x, t = _xy(points)
        a = self.params["a"]
        dx, dt = order
        wave = _poly_d([0.0, 1.0], x, dx) * _sin_d(a * PI, PI / 2, t, dt)
        cubic = _poly_d([0.0, 0.0, 0.0, 1.0], x, dx) * _poly_d([0.0, 0.0, 0.0, 1.0], t, dt)
        return wave + cubic

    def forcing(self, points):
        x, t = _xy(points)
        p = self.params
        a = p["a"]
        u = x * np.cos(a * PI * t) + (x * t) ** 3
        u_tt = -(a * PI) ** 2 * x * np.cos(a * PI * t) + 6 * x**3 * t
        u_xx = 6 * x * t**3
        return u_tt + p["alpha"] * u_xx + p["beta"] * u + p["gamma"] * u ** p["k"]

    def build_residuals(self, points):
        p = self.params
        col = (0, "collocation", 0)
        x0 = points[0, "initial"][:, 0]
        terms = [(1.0, col + ((0, 2),)), (p["alpha"], col + ((2, 0),))]
        if p["beta"]:
            terms.append((p["beta"], col + ((0, 0),)))
        return [
            Residual("pde", terms, self.forcing(points[0, "collocation"]),
                     power=(p["gamma"], col + ((0, 0),), p["k"]), label="klein-gordon"),
            Residual("ic", [(1.0, (0, "initial", 0, (0, 0)))], x0, label="u(x,0)=x"),
            Residual("ic", [(1.0, (0, "initial", 0, (0, 1)))], np.zeros_like(x0), label="u_t(x,0)=0"),
            Residual("bc", [(1.0, (0, "boundary", 0, (0, 0)))], self.exact(0, points[0, "boundary"]), label="u=h"),
        ]


def _wave_d(terms, x, t, order):
    """Derivative of sum amp * cos(a x + b t + c) over ``terms``."""
    dx, dt = order
    out = np.zeros_like(x)
    for amp, a, b, c in terms:
        out = out + amp * a**dx * b**dt * np.cos(a * x + b * t + c + (dx + dt) * PI / 2)
    return out


class Maxwell(Problem):
    """1-D TEM cavity: E_t + H_x / eps = f_E, H_t + E_x / mu = f_H.

    Fields are ordered (E_y, H_z). ``forcing`` returns the closed-form source
    that makes the stated exact pair satisfy the system; it is identically
    zero whenever the medium is consistent with that pair.
    """

    @property
    def heterogeneous(self):
        return self.params["medium"] == "heterogeneous"

    def material(self, sub):
        p = self.params
        if not self.heterogeneous:
            return p["eps"], p["mu"]
        return (p["eps1"], p["mu1"]) if sub == 0 else (p["eps2"], p["mu2"])

    def _sub(self, points, sub):
        return self.subdomain_of(points) if sub is None else np.full(len(points), sub)

    def exact(self, f, points, order=(0, 0), sub=None):
        x, t = _xy(points)
        if not self.heterogeneous:
            n, w = self.params["n"], self.omega
            if f == 0:
                return _sin_d(n * PI, 0.0, x, order[0]) * _sin_d(w, PI / 2, t, order[1])
            return -_sin_d(n * PI, PI / 2, x, order[0]) * _sin_d(w, 0.0, t, order[1])
        left = [(1.0, -2.0, 2.0, 1.0), (0.5 if f == 0 else -0.5, 2.0, 2.0, -1.0)]
        right = [(1.5 if f == 0 else 0.5, -3.0, 2.0, 1.5)]
        subs = self._sub(points, sub)
        return np.where(subs == 0, _wave_d(left, x, t, order), _wave_d(right, x, t, order))

    @property
    def omega(self):
        return self.params["n"] * PI / self.params["length"]

    def forcing(self, eq, points, sub=None):
        x, t = _xy(points)
        if not self.heterogeneous:
            eps, mu = self.material(0)
            n, w = self.params["n"], self.omega
            if eq == 0:
                return (n * PI / eps - w) * np.sin(n * PI * x) * np.sin(w * t)
            return (n * PI / mu - w) * np.cos(n * PI * x) * np.cos(w * t)
        subs = self._sub(points, sub)
        a = 2 * t - 2 * x + 1
        b = 2 * t + 2 * x - 1
        c = 2 * t - 3 * x + 1.5
        e1, m1 = self.material(0)
        e2, m2 = self.material(1)
        if eq == 0:
            left = (1 / e1 - 1) * (2 * np.sin(a) + np.sin(b))
            right = (1.5 / e2 - 3) * np.sin(c)
        else:
            left = (1 / m1 - 1) * (2 * np.sin(a) - np.sin(b))
            right = (4.5 / m2 - 1) * np.sin(c)
        return np.where(subs == 0, left, right)

    def build_residuals(self, points):
        out = []
        for sub in range(len(self.subdomains)):
            eps, mu = self.material(sub)
            col = points[sub, "collocation"]
            c = (sub, "collocation")
            out.append(Residual("pde", [(1.0, c + (0, (0, 1))), (1 / eps, c + (1, (1, 0)))],
                                self.forcing(0, col, sub), label=f"E-equation[{sub}]"))
            out.append(Residual("pde", [(1.0, c + (1, (0, 1))), (1 / mu, c + (0, (1, 0)))],
                                self.forcing(1, col, sub), label=f"H-equation[{sub}]"))
            init = points[sub, "initial"]
            for f in (0, 1):
                out.append(Residual("ic", [(1.0, (sub, "initial", f, (0, 0)))], self.exact(f, init, sub=sub),
                                    label=f"{self.fields[f]}(x,0)[{sub}]"))
            bnd = points[sub, "boundary"]
            out.append(Residual("bc", [(1.0, (sub, "boundary", 0, (0, 0)))], self.exact(0, bnd, sub=sub),
                                label=f"E boundary[{sub}]"))
            if not self.heterogeneous:
                out.append(Residual("bc", [(1.0, (sub, "boundary", 1, (1, 0)))], np.zeros(len(bnd)),
                                    label="dH/dx=0"))
        if self.heterogeneous:
            for f in (0, 1):
                out.append(Residual("interface", [(1.0, (0, "interface", f, (0, 0))), (-1.0, (1, "interface", f, (0, 0)))],
                                    np.zeros(len(points[0, "interface"])), label=f"{self.fields[f]} continuity"))
        return out


def heat_conduction_problem(eps: float = 0.5) -> HeatConduction:
    if not eps > 0:
        raise ConfigurationError(f"heat conduction needs eps > 0, got {eps}")
    return HeatConduction(
        "heat", {"eps": float(eps)}, ("x", "t"), ("u",),
        [((-1.0, 0.0), (1.0, 1.0))], [[(0, -1.0), (0, 1.0)]],
    )


def helmholtz_problem(kappa: float = 1.0, b1: float = 1.0, b2: float = 8.0) -> Helmholtz:
    vals = dict(kappa=float(kappa), b1=float(b1), b2=float(b2))
    if not all(np.isfinite(v) for v in vals.values()):
        raise ConfigurationError("Helmholtz parameters must be finite")
    return Helmholtz(
        "helmholtz", vals, ("x", "y"), ("u",),
        [((-1.0, -1.0), (1.0, 1.0))], [[(0, -1.0), (0, 1.0), (1, -1.0), (1, 1.0)]],
        has_initial=False,
    )


def klein_gordon_problem(a: float = 5.0, alpha=-1.0, beta=0.0, gamma=1.0, k=3) -> KleinGordon:
    if a == 0:
        raise ConfigurationError("Klein-Gordon exact solution needs a != 0")
    if int(k) != k or k < 1:
        raise ConfigurationError(f"nonlinearity exponent must be a positive integer, got {k}")
    return KleinGordon(
        "klein_gordon", dict(a=float(a), alpha=float(alpha), beta=float(beta), gamma=float(gamma), k=int(k)),
        ("x", "t"), ("u",), [((0.0, 0.0), (1.0, 1.0))], [[(0, 0.0), (0, 1.0)]],
    )


def maxwell_problem(medium: str = "homogeneous", n: int = 4, length: float = 1.0, eps=1.0, mu=1.0,
                    eps1=1.0, mu1=1.0, eps2=1.5, mu2=4.5) -> Maxwell:
    """Homogeneous PEC cavity or the two-layer medium split at x = 0.5."""
    if medium == "homogeneous":
        if length <= 0 or eps <= 0 or mu <= 0:
            raise ConfigurationError("cavity length and material constants must be positive")
        return Maxwell(
            "maxwell", dict(medium=medium, n=int(n), length=float(length), eps=float(eps), mu=float(mu)),
            ("x", "t"), ("E", "H"), [((0.0, 0.0), (1.0, 1.0))], [[(0, 0.0), (0, 1.0)]],
        )
    if medium == "heterogeneous":
        mats = dict(eps1=float(eps1), mu1=float(mu1), eps2=float(eps2), mu2=float(mu2))
        if min(mats.values()) <= 0:
            raise ConfigurationError("material constants must be positive")
        return Maxwell(
            "maxwell", dict(medium=medium, **mats), ("x", "t"), ("E", "H"),
            [((0.0, 0.0), (0.5, 1.0)), ((0.5, 0.0), (1.0, 1.0))],
            [[(0, 0.0)], [(0, 1.0)]], interface=(0, 0.5),
        )
    raise ConfigurationError(f"unknown Maxwell medium {medium!r}; expected 'homogeneous' or 'heterogeneous'")


PROBLEMS = {
    "heat": heat_conduction_problem,
    "helmholtz": helmholtz_problem,
    "klein_gordon": klein_gordon_problem,
    "maxwell": maxwell_problem,
}


def make_problem(name: str, params: dict | None = None) -> Problem:
    if name not in PROBLEMS:
        raise ConfigurationError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}")
    try:
        return PROBLEMS[name](**(params or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for problem {name!r}: {exc}") from exc
