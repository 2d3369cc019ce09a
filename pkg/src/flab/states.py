"""Global lattice states and correlation queries.

Three state families, sharing one query interface:

* ProductState: one density matrix repeated over every site.
* CircuitState: a product base on a finite chain segment, evolved by a
  brickwork of two-site unitary layers with open boundaries. Pure bases
  keep a statevector, mixed bases evolve the density matrix.
* MarkovState: a classical stationary Markov chain on the integer line;
  operators act through their diagonals in the chain basis.

An expectation query takes a map from sites to single-site operators and
returns the expectation of the corresponding tensor product. Truncated
pair correlations are exposed through ``correlator`` with the distance
reweighting e^{+d} applied, and ``estimate_G0`` reports a certified
lower bound on the decay constant sup over separated pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from .algebra import (
    SiteOperator,
    SiteState,
    hermitian_basis,
    op_norm,
)
from .errors import CostGuardError
from .lattice import Metric, Region, chain_metric, region_distance

STATEVEC_MAX_DIM = 2**14
DENSITY_MAX_DIM = 2**20  # squared Hilbert space dimension

UNITARY_TOL = 1e-12
STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
HOMOGENEITY_TOL = 1e-10


class Assignment:
    """One single-site operator per site of a region."""

    __slots__ = ("support", "ops")

    def __init__(self, support: Region, ops: Dict):
        ops = dict(ops)
        if set(ops.keys()) != set(support.sites):
            raise ValueError("assignment keys must equal the support sites")
        dims = {op.dim for op in ops.values()}
        if len(dims) != 1:
            raise ValueError("assignment operators must share one dimension")
        self.support = support
        self.ops = ops

    @property
    def dim(self) -> int:
        return next(iter(self.ops.values())).dim


@dataclass
class CorrelatorValue:
    value: complex
    x_sites: tuple
    y_sites: tuple
    distance: float


@dataclass
class G0Estimate:
    value: float
    samples: int


class GlobalState:
    """Interface shared by the concrete state families."""

    site_dim: int
    metric: Metric

    def expect(self, ops: Dict) -> complex:
        raise NotImplementedError

    def site_restriction(self, x) -> SiteState:
        raise NotImplementedError

    def contains_site(self, x) -> bool:
        try:
            self.metric.check_site(x)
        except ValueError:
            return False
        return True

    def single_site_restriction(self) -> SiteState:
        raise NotImplementedError

    def averaged_restriction(self, region: Region) -> SiteState:
        mats = [self.site_restriction(x).rho for x in region.sites]
        return SiteState(sum(mats) / len(mats))

    def _check_ops(self, ops: Dict) -> None:
        if not ops:
            raise ValueError("expectation query needs at least one site")
        for x, op in ops.items():
            if not self.contains_site(x):
                raise ValueError(f"site {x!r} outside the state's domain")
            if op.dim != self.site_dim:
                raise ValueError(
                    f"operator dimension {op.dim} does not match site dimension {self.site_dim}"
                )


class ProductState(GlobalState):
    """The same single-site density matrix at every site of the metric."""

    def __init__(self, site: SiteState, metric: Metric | None = None):
        self.site = site
        self.site_dim = site.dim
        self.metric = metric if metric is not None else chain_metric(1.0)

    def expect(self, ops: Dict) -> complex:
        self._check_ops(ops)
        out = complex(1.0, 0.0)
        for x in sorted(ops.keys(), key=self.metric.site_key):
            out *= complex(np.trace(self.site.rho @ ops[x].mat))
        return out

    def site_restriction(self, x) -> SiteState:
        self.metric.check_site(x)
        return self.site

    def single_site_restriction(self) -> SiteState:
        return self.site


class MarkovState(GlobalState):
    """Stationary classical Markov chain on the integer line.

    ``transition`` is column stochastic: transition[i, j] is the
    probability of moving to configuration i from configuration j one
    step to the right. The stationary vector is either supplied or
    computed, and T pi = pi is checked either way. The mixing condition
    |lambda_2| <= e^{-alpha} ties the chain's correlation length to the
    metric scale alpha, and quantum operators act through their diagonal
    entries in the configuration basis.
    """

    def __init__(self, transition, alpha: float, pi=None):
        T = np.asarray(transition, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError("transition matrix must be square")
        d = T.shape[0]
        if np.min(T) < -STOCHASTIC_TOL:
            raise ValueError("transition matrix has negative entries")
        colsums = T.sum(axis=0)
        if np.max(np.abs(colsums - 1.0)) > STOCHASTIC_TOL:
            raise ValueError("transition matrix columns must sum to 1")
        if not (alpha > 0.0):
            raise ValueError("alpha must be positive")
        if pi is None:
            eigvals, eigvecs = np.linalg.eig(T)
            idx = int(np.argmin(np.abs(eigvals - 1.0)))
            v = np.real(eigvecs[:, idx])
            if v.sum() < 0:
                v = -v
            if np.min(v) < -1e-10:
                raise ValueError("stationary vector has negative entries")
            pi = np.clip(v, 0.0, None)
            pi = pi / pi.sum()
        else:
            pi = np.asarray(pi, dtype=float)
            if pi.shape != (d,):
                raise ValueError("stationary vector shape mismatch")
            if np.min(pi) < 0.0 or abs(pi.sum() - 1.0) > STOCHASTIC_TOL:
                raise ValueError("stationary vector must be a distribution")
        if np.max(np.abs(T @ pi - pi)) > STATIONARY_TOL:
            raise ValueError("supplied vector is not stationary for T")
        lams = np.sort(np.abs(np.linalg.eigvals(T)))[::-1]
        self.second_eigenvalue = float(lams[1]) if d > 1 else 0.0
        if self.second_eigenvalue > np.exp(-alpha) + 1e-10:
            raise ValueError(
                f"second eigenvalue {self.second_eigenvalue:.6f} exceeds e^-alpha"
            )
        self.transition = T
        self.pi = pi
        self.alpha = float(alpha)
        self.site_dim = d
        self.metric = chain_metric(alpha)
        self._powers = {0: np.eye(d), 1: T.copy()}

    def transition_power(self, g: int) -> np.ndarray:
        if g < 0:
            raise ValueError("gap must be nonnegative")
        cached = self._powers.get(g)
        if cached is None:
            cached = self.transition @ self.transition_power(g - 1)
            self._powers[g] = cached
        return cached

    def expect(self, ops: Dict) -> complex:
        self._check_ops(ops)
        sites = sorted(ops.keys())
        v = self.pi.astype(complex)
        prev = None
        for x in sites:
            if prev is not None:
                v = self.transition_power(x - prev) @ v
            v = np.diagonal(ops[x].mat) * v
            prev = x
        return complex(v.sum())

    def site_restriction(self, x) -> SiteState:
        self.metric.check_site(x)
        return SiteState(np.diag(self.pi))

    def single_site_restriction(self) -> SiteState:
        return SiteState(np.diag(self.pi))


def _apply_two_site(tensor: np.ndarray, gate: np.ndarray, i: int, d: int) -> np.ndarray:
    """Apply a two-site gate on tensor axes (i, i+1)."""
    g = gate.reshape(d, d, d, d)
    out = np.tensordot(g, tensor, axes=[[2, 3], [i, i + 1]])
    return np.moveaxis(out, [0, 1], [i, i + 1])


class CircuitState(GlobalState):
    """Brickwork circuit on a chain segment of given length, open ends.

    Each layer is (offset, gate): the d^2 x d^2 unitary acts on every
    neighbor pair (i, i+1) with i matching the offset parity. The state
    is evolved once at construction and cached. Correlations vanish
    identically beyond graph distance 2 * depth, since disjoint light
    cones factorize.
    """

    def __init__(
        self,
        base: SiteState,
        length: int,
        layers: Sequence[tuple],
        scale: float = 1.0,
    ):
        if length < 1:
            raise ValueError("segment length must be positive")
        d = base.dim
        self.base = base
        self.length = length
        self.site_dim = d
        self.metric = chain_metric(scale)
        self.layers = []
        for offset, gate in layers:
            if offset not in (0, 1):
                raise ValueError("layer offset must be 0 or 1")
            g = np.asarray(gate, dtype=complex)
            if g.shape != (d * d, d * d):
                raise ValueError("gate must be a d^2 x d^2 matrix")
            if np.max(np.abs(g @ g.conj().T - np.eye(d * d))) > UNITARY_TOL:
                raise ValueError("gate is not unitary within tolerance")
            self.layers.append((int(offset), g))

        eigs = np.linalg.eigvalsh(base.rho)
        pure = bool(eigs[-1] > 1.0 - 1e-12)
        dim_total = d**length
        if pure:
            if dim_total > STATEVEC_MAX_DIM:
                raise CostGuardError(
                    "circuit statevector size",
                    f"d^L = {dim_total} exceeds {STATEVEC_MAX_DIM}",
                )
            vec = np.linalg.eigh(base.rho)[1][:, -1]
            psi = vec.copy()
            for _ in range(length - 1):
                psi = np.kron(psi, vec)
            tensor = psi.reshape((d,) * length)
            for offset, g in self.layers:
                for i in range(offset, length - 1, 2):
                    tensor = _apply_two_site(tensor, g, i, d)
            self._psi = tensor
            self._rho = None
        else:
            if dim_total * dim_total > DENSITY_MAX_DIM:
                raise CostGuardError(
                    "circuit density-matrix size",
                    f"d^2L = {dim_total * dim_total} exceeds {DENSITY_MAX_DIM}",
                )
            rho = base.rho.copy()
            for _ in range(length - 1):
                rho = np.kron(rho, base.rho)
            tensor = rho.reshape((d,) * (2 * length))
            for offset, g in self.layers:
                for i in range(offset, length - 1, 2):
                    # rho -> G rho G+: left-multiply rows by G, columns by conj(G)
                    tensor = _apply_two_site(tensor, g, i, d)
                    tensor = _apply_two_site(tensor, g.conj(), length + i, d)
            self._psi = None
            self._rho = tensor

    @property
    def depth(self) -> int:
        return len(self.layers)

    def contains_site(self, x) -> bool:
        return isinstance(x, int) and 0 <= x < self.length

    def expect(self, ops: Dict) -> complex:
        self._check_ops(ops)
        d = self.site_dim
        if self._psi is not None:
            phi = self._psi
            for x, op in ops.items():
                phi = np.tensordot(op.mat, phi, axes=[[1], [x]])
                phi = np.moveaxis(phi, 0, x)
            return complex(np.vdot(self._psi.reshape(-1), phi.reshape(-1)))
        phi = self._rho
        for x, op in ops.items():
            phi = np.tensordot(op.mat, phi, axes=[[1], [x]])
            phi = np.moveaxis(phi, 0, x)
        dim_total = d**self.length
        return complex(np.trace(phi.reshape(dim_total, dim_total)))

    def site_restriction(self, x) -> SiteState:
        if not self.contains_site(x):
            raise ValueError(f"site {x!r} outside circuit segment")
        d = self.site_dim
        if self._psi is not None:
            p = np.moveaxis(self._psi, x, 0).reshape(d, -1)
            return SiteState(p @ p.conj().T)
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        rows = list(letters[: self.length])
        cols = rows.copy()
        cols[x] = letters[self.length]
        sub = "".join(rows) + "".join(cols) + "->" + rows[x] + cols[x]
        return SiteState(np.einsum(sub, self._rho))

    def single_site_restriction(self) -> SiteState:
        mats = [self.site_restriction(x).rho for x in range(self.length)]
        avg = sum(mats) / self.length
        dev = max(float(np.max(np.abs(m - avg))) for m in mats)
        if dev > HOMOGENEITY_TOL:
            raise ValueError(
                f"circuit restrictions vary across sites (deviation {dev:.3e})"
            )
        return SiteState(avg)


def expect_global(state: GlobalState, assignment) -> complex:
    """Expectation of a tensor product of single-site operators."""
    if isinstance(assignment, Assignment):
        return state.expect(assignment.ops)
    return state.expect(dict(assignment))


def correlator(state: GlobalState, x_asg: Assignment, y_asg: Assignment) -> CorrelatorValue:
    """Distance-reweighted truncated correlation of two disjoint regions.

    Returns (omega(AB) - omega(A) omega(B)) e^{+d(X, Y)} together with
    the regions and their distance.
    """
    if x_asg.support.metric != y_asg.support.metric:
        raise ValueError("correlator regions must share one metric")
    if x_asg.support.metric != state.metric:
        raise ValueError("correlator regions must use the state's metric")
    xs = set(x_asg.support.sites)
    ys = set(y_asg.support.sites)
    if xs & ys:
        raise ValueError("correlator regions must be disjoint")
    d = region_distance(x_asg.support, y_asg.support)
    joint = dict(x_asg.ops)
    joint.update(y_asg.ops)
    e_ab = state.expect(joint)
    e_a = state.expect(x_asg.ops)
    e_b = state.expect(y_asg.ops)
    return CorrelatorValue(
        value=(e_ab - e_a * e_b) * float(np.exp(d)),
        x_sites=tuple(x_asg.support.sites),
        y_sites=tuple(y_asg.support.sites),
        distance=d,
    )


def _direction_set(dim: int) -> list[SiteOperator]:
    dirs = []
    for h in hermitian_basis(dim)[1:]:
        dirs.append(SiteOperator(h.mat / op_norm(h)))
    return dirs


def estimate_G0(
    state: GlobalState,
    max_region_size: int = 2,
    max_separation: int = 8,
    sample_budget: int = 200,
    seed: int = 0,
) -> G0Estimate:
    """Certified lower bound on the truncated-correlation decay constant.

    Sweeps single-site Hermitian basis directions over a deterministic
    grid of separations, then spends the sample budget on random
    regions and random Hermitian unit-norm operators. Every candidate is
    an exact correlator evaluation divided by the operator norms, so the
    reported value is a true lower bound on the supremum.
    """
    if max_region_size < 1 or max_separation < 1 or sample_budget < 0:
        raise ValueError("estimate_G0 parameters must be positive")
    dirs = _direction_set(state.site_dim)
    best = 0.0
    count = 0
    metric = state.metric

    def domain_ok(sites) -> bool:
        return all(state.contains_site(int(s)) for s in sites)

    for m in range(1, max_separation + 1):
        if not domain_ok([0, m]):
            break
        rx = Region(metric, (0,))
        ry = Region(metric, (m,))
        for a in dirs:
            for b in dirs:
                c = correlator(
                    state, Assignment(rx, {0: a}), Assignment(ry, {m: b})
                )
                count += 1
                if abs(c.value) > best:
                    best = abs(c.value)

    rng = np.random.default_rng(seed)
    for _ in range(sample_budget):
        kx = int(rng.integers(1, max_region_size + 1))
        ky = int(rng.integers(1, max_region_size + 1))
        gap = int(rng.integers(1, max_separation + 1))
        xs = list(range(0, kx))
        ys = list(range(kx - 1 + gap, kx - 1 + gap + ky))
        if not domain_ok(xs + ys):
            continue
        ops_x = {}
        for s in xs:
            ops_x[s] = random_hermitian_unit(rng, state.site_dim)
        ops_y = {}
        for s in ys:
            ops_y[s] = random_hermitian_unit(rng, state.site_dim)
        c = correlator(
            state,
            Assignment(Region(metric, xs), ops_x),
            Assignment(Region(metric, ys), ops_y),
        )
        count += 1
        if abs(c.value) > best:
            best = abs(c.value)
    return G0Estimate(value=best, samples=count)


def random_hermitian_unit(rng: np.random.Generator, dim: int) -> SiteOperator:
    """Random Hermitian operator with unit operator norm."""
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (raw + raw.conj().T)
    nrm = float(np.linalg.norm(h, 2))
    if nrm == 0.0:
        return SiteOperator(np.eye(dim))
    return SiteOperator(h / nrm)


def random_density(rng: np.random.Generator, dim: int) -> SiteState:
    """Random full-rank density matrix."""
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = raw @ raw.conj().T + 1e-6 * np.eye(dim)
    return SiteState(rho / np.trace(rho))


def _parse_complex_entry(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v, 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ValueError(f"cannot parse complex entry {v!r}")


def parse_matrix(doc) -> np.ndarray:
    return np.array([[_parse_complex_entry(v) for v in row] for row in doc])


def state_from_json(doc: dict) -> GlobalState:
    """Build a state from a JSON-style dictionary.

    Matrix entries are numbers or [re, im] pairs. Kinds:

    * {"kind": "product", "rho": [[...]], "metric": {...}?}
    * {"kind": "markov", "T": [[...]], "alpha": 0.4, "pi": [...]?}
    * {"kind": "circuit", "base": [[...]] | {"ket": [...]},
       "length": 8, "layers": [{"offset": 0, "gate": [[...]]}],
       "scale": 1.0?}
    """
    kind = doc.get("kind")
    if kind == "product":
        metric = None
        if "metric" in doc:
            from .lattice import metric_from_json

            metric = metric_from_json(doc["metric"])
        return ProductState(SiteState(parse_matrix(doc["rho"])), metric)
    if kind == "markov":
        T = np.array([[float(v) for v in row] for row in doc["T"]])
        pi = doc.get("pi")
        if pi is not None:
            pi = [float(v) for v in pi]
        return MarkovState(T, float(doc["alpha"]), pi)
    if kind == "circuit":
        base_doc = doc["base"]
        if isinstance(base_doc, dict) and "ket" in base_doc:
            from .algebra import pure_state

            base = pure_state([_parse_complex_entry(v) for v in base_doc["ket"]])
        else:
            base = SiteState(parse_matrix(base_doc))
        layers = [
            (int(layer["offset"]), parse_matrix(layer["gate"]))
            for layer in doc.get("layers", [])
        ]
        return CircuitState(
            base, int(doc["length"]), layers, float(doc.get("scale", 1.0))
        )
    raise ValueError(f"unknown state kind {kind!r}")
