"""
Physics residual service: 1-D heat-transfer residuals, collocation sampling,
boundary penalties, analytic solutions and problem presets.

Residuals are written once against a Taylor jet of the field, so the same
code evaluates plain networks, analytic oracles and taped parameters.
"""

import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..models.dataset import Dataset
from ..models.physics import (
    CollocationScheme,
    DerivativeMode,
    FluidProperties,
    PdeProblem,
    ProblemKind,
    ResidualEval,
    SourceKind,
    SourceTerm,
)
from ..utils.seeding import make_rng
from ..utils.validation import ShapeMismatchError, ValidationError
from . import autodiff as ad
from .autodiff import Jet
from .mlp import Mlp, coordinate_jet, network_output

DEFAULT_COLLOCATION = 64
NUSSELT_SMOOTHNESS = "nusselt-smoothness"


class NetworkField:
    """
    Network output as a field; parameters may be a taped node.

    ``scale`` and ``shift`` map a network trained on z-scored targets back to
    the units the problem is stated in.
    """

    def __init__(self, arch, theta, scale: float = 1.0, shift: float = 0.0):
        self.arch = arch
        self.theta = theta
        self.scale = float(scale)
        self.shift = float(shift)

    @classmethod
    def from_net(cls, net: Mlp) -> "NetworkField":
        return cls(net.arch, net.params)

    def _affine(self, u):
        if self.scale == 1.0 and self.shift == 0.0:
            return u
        return u * self.scale + self.shift

    def values(self, inputs: np.ndarray):
        return self._affine(network_output(self.arch, self.theta, inputs))

    def jet(self, inputs: np.ndarray, dim: int) -> Jet:
        return self._affine(network_output(self.arch, self.theta, coordinate_jet(inputs, dim)))


class AnalyticField:
    """Closed-form field T(x) of one coordinate, built from autodiff primitives."""

    def __init__(self, fn: Callable, coordinate: int = 0):
        self.fn = fn
        self.coordinate = coordinate

    def values(self, inputs: np.ndarray):
        return np.asarray(self.fn(np.asarray(inputs, dtype=float)[:, self.coordinate]), dtype=float)

    def jet(self, inputs: np.ndarray, dim: int) -> Jet:
        return Jet.lift(self.fn(Jet.seed(np.asarray(inputs, dtype=float)[:, dim])))


Field = Union[NetworkField, AnalyticField]


def as_field(obj) -> Field:
    """Accept a network or an already wrapped field."""
    if isinstance(obj, Mlp):
        return NetworkField.from_net(obj)
    if isinstance(obj, (NetworkField, AnalyticField)):
        return obj
    raise ValidationError(f"Expected a network or field, got {type(obj).__name__}")


def problem_inputs(prob: PdeProblem, xs) -> np.ndarray:
    """Network inputs for coordinate values ``xs``: the anchor with x in the coordinate slot."""
    xs = np.asarray(xs, dtype=float).reshape(-1)
    if prob.anchor is None:
        return xs[:, None]
    inputs = np.tile(prob.anchor, (xs.size, 1))
    inputs[:, prob.coordinate] = xs
    return inputs


def source_values(prob: PdeProblem, xs) -> np.ndarray:
    """f(x) at the given points."""
    xs = np.asarray(xs, dtype=float)
    source = prob.source
    if source.kind is SourceKind.ZERO:
        return np.zeros_like(xs)
    if source.kind is SourceKind.CONSTANT:
        return np.full_like(xs, source.amplitude)
    if source.kind is SourceKind.SINE:
        return source.amplitude * np.sin(source.frequency * np.pi * xs)

    # Manufactured: T = sin(pi x) is exact.
    p = prob.props
    s, c = np.sin(np.pi * xs), np.cos(np.pi * xs)
    if prob.kind is ProblemKind.CONDUCTION:
        return p.k_s * np.pi ** 2 * s
    if prob.kind is ProblemKind.CONVDIFF:
        return p.rho * p.cp * p.u_adv * np.pi * c + p.k_f * np.pi ** 2 * s
    return p.k_s * (1.0 + prob.c_k * s) * np.pi ** 2 * s - p.k_s * prob.c_k * np.pi ** 2 * c * c


def residual_terms(prob: PdeProblem, xs, u: Jet):
    """
    Pointwise residual from a jet of the field.

    Args:
        prob: Problem
        xs: Coordinate values
        u: Jet (u, u', u'') of the field at ``xs``

    Returns:
        Residual values (array, or taped node when u is taped)
    """
    f = source_values(prob, xs)
    p = prob.props
    if prob.kind is ProblemKind.CONDUCTION:
        return p.k_s * u.second + f
    if prob.kind is ProblemKind.CONDUCTION_VARK:
        k = p.k_s * (1.0 + prob.c_k * u.primal)
        return p.k_s * prob.c_k * (u.first * u.first) + k * u.second + f
    return p.rho * p.cp * p.u_adv * u.first - p.k_f * u.second - f


def field_jet(prob: PdeProblem, field: Field, xs) -> Jet:
    """Jet of the field along the problem coordinate, exact or by central differences."""
    inputs = problem_inputs(prob, xs)
    if prob.derivative_mode is DerivativeMode.TAYLOR:
        return field.jet(inputs, prob.coordinate)

    h = prob.fd_step
    shift = np.zeros_like(inputs)
    shift[:, prob.coordinate] = h
    u0 = field.values(inputs)
    up = field.values(inputs + shift)
    um = field.values(inputs - shift)
    return Jet(u0, (up - um) / (2.0 * h), (up - 2.0 * u0 + um) / (h * h))


def boundary_penalty(prob: PdeProblem, field) -> float:
    """
    Weighted Dirichlet mismatch ``w * ((u(a) - T_a)^2 + (u(b) - T_b)^2)``.

    Returns 0 without evaluating the field when the weight is zero.
    """
    field = as_field(field)
    if prob.boundary_weight == 0.0:
        return 0.0
    u = field.values(problem_inputs(prob, prob.domain))
    ta, tb = prob.boundary
    return prob.boundary_weight * ((u[0] - ta) ** 2 + (u[1] - tb) ** 2)


def physics_loss_of(prob: PdeProblem, field: Field):
    """Mean squared residual plus boundary penalty (taped when the field is)."""
    r = residual_terms(prob, prob.collocation, field_jet(prob, field, prob.collocation))
    return ad.mean(r * r) + boundary_penalty(prob, field)


def residual(prob: PdeProblem, net, x: float) -> float:
    """
    Residual at a single point.

    Args:
        prob: Problem
        net: Network or field
        x: Point in the problem domain

    Returns:
        R(x)
    """
    a, b = prob.domain
    if not a <= x <= b:
        raise ValidationError(f"Point {x} outside the domain [{a}, {b}]")
    xs = np.array([float(x)])
    r = residual_terms(prob, xs, field_jet(prob, as_field(net), xs))
    return float(np.broadcast_to(ad.value_of(r), (1,))[0])


def evaluate(prob: PdeProblem, net) -> ResidualEval:
    """Residuals at every collocation point plus the boundary penalty."""
    field = as_field(net)
    _check_inputs(prob, field)
    xs = prob.collocation
    r = np.broadcast_to(np.asarray(residual_terms(prob, xs, field_jet(prob, field, xs)), dtype=float), xs.shape)
    return ResidualEval(residuals=r.copy(), boundary_penalty=float(boundary_penalty(prob, field)))


def physics_loss(net, prob: PdeProblem) -> float:
    """(1/N_p) * sum R(x_j)^2 plus the boundary penalty."""
    return evaluate(prob, net).loss


def _check_inputs(prob: PdeProblem, field: Field):
    if isinstance(field, NetworkField) and field.arch.input_dim != prob.input_dim:
        raise ShapeMismatchError(
            f"Problem expects {prob.input_dim} network inputs, network has {field.arch.input_dim}"
        )


def sample_collocation(
    domain: Tuple[float, float],
    n: int,
    scheme: CollocationScheme = CollocationScheme.UNIFORM_RANDOM,
    seed: int = 0,
) -> np.ndarray:
    """
    Collocation points in ``[a, b]``.

    Args:
        domain: Interval (a, b)
        n: Number of points
        scheme: Uniform random or equi-spaced (endpoints included; n = 1 gives the midpoint)
        seed: Sampling seed

    Returns:
        Points
    """
    if n < 1:
        raise ValidationError(f"Need at least one collocation point, got {n}")
    a, b = float(domain[0]), float(domain[1])
    if not a < b:
        raise ValidationError(f"Domain must satisfy a < b, got {domain}")
    scheme = CollocationScheme(scheme)
    if scheme is CollocationScheme.EQUI_SPACED:
        if n == 1:
            return np.array([0.5 * (a + b)])
        return np.linspace(a, b, n)
    return make_rng(seed).uniform(a, b, size=n)


def exact_solution(prob: PdeProblem) -> AnalyticField:
    """
    Closed-form solution of a problem, as an oracle field.

    Available for manufactured sources (``sin(pi x)``), Conduction1D with
    zero/constant/sine sources and ConvDiff1D without a source.
    """
    a, b = prob.domain
    ta, tb = prob.boundary
    p = prob.props
    source = prob.source

    if source.kind is SourceKind.MANUFACTURED:
        return AnalyticField(lambda x: ad.sin(np.pi * x), prob.coordinate)

    if prob.kind is ProblemKind.CONDUCTION:
        if source.kind is SourceKind.SINE:
            omega = source.frequency * np.pi
            scale = source.amplitude / (p.k_s * omega * omega)

            def particular(x):
                return scale * ad.sin(omega * x)
        elif source.kind is SourceKind.CONSTANT:
            scale = -source.amplitude / (2.0 * p.k_s)

            def particular(x):
                return scale * (x * x)
        else:
            def particular(x):
                return 0.0 * x

        pa = float(np.asarray(particular(np.array(a)), dtype=float))
        pb = float(np.asarray(particular(np.array(b)), dtype=float))
        slope = ((tb - pb) - (ta - pa)) / (b - a)
        return AnalyticField(lambda x: particular(x) + (ta - pa) + slope * (x - a), prob.coordinate)

    if prob.kind is ProblemKind.CONVDIFF and source.kind is SourceKind.ZERO:
        pe = prob.peclet
        if pe == 0.0:
            return AnalyticField(lambda x: ta + (tb - ta) * ((x - a) / (b - a)), prob.coordinate)
        denom = math.expm1(pe)
        return AnalyticField(
            lambda x: ta + (tb - ta) * ((ad.exp(pe * ((x - a) / (b - a))) - 1.0) / denom),
            prob.coordinate,
        )

    raise ValidationError(f"No closed-form solution for {prob.kind.value} with a {source.kind.value} source")


def make_problem(
    name: str,
    n_collocation: int = DEFAULT_COLLOCATION,
    seed: int = 0,
    scheme: CollocationScheme = CollocationScheme.UNIFORM_RANDOM,
    props: Optional[FluidProperties] = None,
    **overrides,
) -> PdeProblem:
    """
    Build a named problem preset.

    Args:
        name: ``conduction1d``, ``conduction-vark1d`` or ``convdiff1d``
        n_collocation: Number of collocation points
        seed: Collocation seed
        scheme: Collocation scheme
        props: Property overrides
        **overrides: Other PdeProblem fields (boundary, boundary_weight, c_k, ...)

    Returns:
        Problem
    """
    props = props or FluidProperties()
    try:
        kind = ProblemKind(name)
    except ValueError:
        raise ValidationError(
            f"Unknown problem {name!r}; choose from {[k.value for k in ProblemKind]} or {NUSSELT_SMOOTHNESS!r}"
        )

    domain = tuple(overrides.pop("domain", (0.0, 1.0)))
    if kind is ProblemKind.CONDUCTION:
        defaults = {
            "source": SourceTerm(kind=SourceKind.SINE, amplitude=props.k_s * np.pi ** 2),
            "boundary": (0.0, 0.0),
        }
    elif kind is ProblemKind.CONDUCTION_VARK:
        defaults = {"source": SourceTerm(kind=SourceKind.MANUFACTURED), "boundary": (0.0, 0.0)}
    else:
        defaults = {"source": SourceTerm(kind=SourceKind.ZERO), "boundary": (0.0, 1.0)}
    defaults.update(overrides)

    try:
        problem = PdeProblem(
            kind=kind,
            domain=domain,
            props=props,
            collocation=sample_collocation(domain, n_collocation, scheme, seed),
            name=name,
            **defaults,
        )
    except ValueError as e:
        raise ValidationError(f"Invalid {name} problem: {e}")
    logger.debug(f"Built {name} problem with {n_collocation} collocation points")
    return problem


def nusselt_smoothness(
    ds: Dataset,
    n_collocation: int = DEFAULT_COLLOCATION,
    seed: int = 0,
    coordinate: int = 0,
) -> PdeProblem:
    """
    Curvature penalty along the standardized flow-number input of a Nusselt dataset.

    A source-free Conduction1D residual (``u'' = 0``) without boundary terms,
    applied along ``coordinate`` with every other input held at 0.

    Args:
        ds: Normalized dataset (fixes the coordinate range and input width)
        n_collocation: Number of collocation points
        seed: Collocation seed
        coordinate: Input column acting as x

    Returns:
        Problem
    """
    if ds.norm is None:
        raise ValidationError("nusselt-smoothness needs a normalized dataset")
    if not 0 <= coordinate < ds.n_features:
        raise ValidationError(f"Coordinate {coordinate} outside [0, {ds.n_features})")
    column = ds.features[:, coordinate]
    domain = (float(column.min()), float(column.max()))
    if not domain[0] < domain[1]:
        raise ValidationError(f"Column {ds.column_names[coordinate]!r} is constant")
    return PdeProblem(
        kind=ProblemKind.CONDUCTION,
        domain=domain,
        boundary=(0.0, 0.0),
        source=SourceTerm(kind=SourceKind.ZERO),
        collocation=sample_collocation(domain, n_collocation, CollocationScheme.UNIFORM_RANDOM, seed),
        boundary_weight=0.0,
        coordinate=coordinate,
        anchor=np.zeros(ds.n_features),
        name=NUSSELT_SMOOTHNESS,
    )


def problem_dataset(prob: PdeProblem, n_points: int, seed: int = 0, noise: float = 0.0) -> Dataset:
    """
    Observations of a problem's analytic solution at uniform random points.

    Args:
        prob: Problem with a closed-form solution
        n_points: Number of observations
        seed: Sampling seed
        noise: Relative multiplicative Gaussian noise

    Returns:
        Dataset with the network inputs as features and ``u`` as target
    """
    if n_points < 2:
        raise ValidationError(f"Need at least two observations, got {n_points}")
    rng = make_rng(seed)
    xs = rng.uniform(prob.domain[0], prob.domain[1], size=n_points)
    inputs = problem_inputs(prob, xs)
    clean = exact_solution(prob).values(inputs)
    targets = clean * (1.0 + noise * rng.standard_normal(n_points)) if noise > 0 else clean.copy()
    names = [f"x{j}" for j in range(inputs.shape[1])] if inputs.shape[1] > 1 else ["x"]
    return Dataset(features=inputs, targets=targets, column_names=names, target_name="u",
                   clean_targets=clean, domain=prob.name)
